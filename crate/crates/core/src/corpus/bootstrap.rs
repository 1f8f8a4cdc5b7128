use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CorpusError, FileRecord};
use crate::rules::Severity;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub draws: usize,
    pub draw_size: usize,
    /// Draws whose mean reached the reference.
    pub exceed: usize,
    pub p: f64,
    pub seed: u64,
    pub reference_mean: f64,
}

/// HIGH/file for each repo, ordered by repo id.
pub fn repo_means(records: &[FileRecord]) -> Vec<(String, f64)> {
    let mut by_repo: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = by_repo.entry(&r.repo_id).or_default();
        e.0 += 1;
        e.1 += r.count(Severity::High);
    }
    by_repo.into_iter().map(|(k, (files, high))| (k.to_string(), high as f64 / files as f64)).collect()
}

/// Fraction of random repo subsets (without replacement inside a draw) whose
/// mean is at least `reference_mean`.
pub fn bootstrap_repo_sensitivity(
    repo_means: &[f64],
    reference_mean: f64,
    draws: usize,
    draw_size: usize,
    seed: u64,
) -> Result<BootstrapResult, CorpusError> {
    if draws == 0 || draw_size == 0 {
        return Err(CorpusError::Bootstrap("draws and draw size must be positive".into()));
    }
    if draw_size > repo_means.len() {
        return Err(CorpusError::DrawTooLarge { draw_size, repos: repo_means.len() });
    }
    if !reference_mean.is_finite() || repo_means.iter().any(|m| !m.is_finite()) {
        return Err(CorpusError::Bootstrap("means must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut exceed = 0;
    for _ in 0..draws {
        let picked = sample(&mut rng, repo_means.len(), draw_size);
        let mean = picked.iter().map(|i| repo_means[i]).sum::<f64>() / draw_size as f64;
        if mean >= reference_mean {
            exceed += 1;
        }
    }
    Ok(BootstrapResult { draws, draw_size, exceed, p: exceed as f64 / draws as f64, seed, reference_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dominance_and_errors() {
        let above = [0.5, 0.6, 0.7];
        assert_eq!(bootstrap_repo_sensitivity(&above, 0.4, 100, 2, 1).unwrap().p, 1.0);
        assert_eq!(bootstrap_repo_sensitivity(&above, 0.9, 100, 2, 1).unwrap().p, 0.0);
        assert!(matches!(
            bootstrap_repo_sensitivity(&above, 0.4, 10, 4, 1),
            Err(CorpusError::DrawTooLarge { draw_size: 4, repos: 3 })
        ));
    }

    #[test]
    fn seeded_runs_repeat() {
        let m = [0.1, 0.2, 0.3, 0.4, 0.5];
        let a = bootstrap_repo_sensitivity(&m, 0.3, 500, 2, 9).unwrap();
        let b = bootstrap_repo_sensitivity(&m, 0.3, 500, 2, 9).unwrap();
        assert_eq!(a, b);
    }
}
