use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use truthscan::corpus::{
    assign_cells, bootstrap_repo_sensitivity, match_controls, priority_order, repo_means, Arm, CellKey, Comparison,
    FileRecord, FindingTally, MatchSpec, Ratio, DEFAULT_PARITY_BAND,
};
use truthscan::rules::{CheckId, Severity};
use truthscan::syntax::LanguageId;

fn rec(id: String, repo: String, language: LanguageId, lines: usize, arm: Arm) -> FileRecord {
    FileRecord { file_id: id, repo_id: repo, language, line_count: lines, arm, findings: vec![] }
}

fn random_records(rng: &mut ChaCha8Rng, n: usize, repos: usize, arm: Arm, tag: &str) -> Vec<FileRecord> {
    let langs = [LanguageId::Python, LanguageId::Javascript];
    (0..n)
        .map(|i| {
            let lines = [120, 150, 250, 400, 650, 900][rng.gen_range(0..6)];
            rec(
                format!("{tag}{i:03}"),
                format!("repo{}", rng.gen_range(0..repos)),
                langs[rng.gen_range(0..2)],
                lines,
                arm,
            )
        })
        .collect()
}

/// Largest remainder with ties broken by cell order.
fn quotas(cells: &[CellKey], target: usize) -> BTreeMap<CellKey, usize> {
    let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
    for c in cells {
        *counts.entry(*c).or_default() += 1;
    }
    let n = cells.len();
    let mut q: BTreeMap<CellKey, usize> = counts.iter().map(|(k, c)| (*k, target * c / n)).collect();
    let mut rest: Vec<(usize, CellKey)> = counts.iter().map(|(k, c)| (target * c % n, *k)).collect();
    rest.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = target - q.values().sum::<usize>();
    for (_, k) in rest.into_iter().take(short) {
        *q.get_mut(&k).unwrap() += 1;
    }
    q
}

/// Exhaustive search: largest feasible subset, earliest in priority order among equals.
fn brute_force(pool: &[FileRecord], arm_a: &[FileRecord], cap: usize, seed: u64) -> Vec<String> {
    let edges = [300, 800];
    let a_cells: Vec<CellKey> = assign_cells(arm_a, arm_a, &edges).into_iter().flatten().collect();
    let q = quotas(&a_cells, arm_a.len());
    let cells = assign_cells(arm_a, pool, &edges);
    let order: Vec<usize> = priority_order(pool, seed)
        .into_iter()
        .filter(|&i| cells[i].is_some_and(|c| q.get(&c).copied().unwrap_or(0) > 0))
        .collect();
    let n = order.len();
    assert!(n <= 16);
    let mut best: Option<Vec<usize>> = None;
    for mask in 0u32..(1 << n) {
        let chosen: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
        let mut per_cell: BTreeMap<CellKey, usize> = BTreeMap::new();
        let mut per_repo: BTreeMap<&str, usize> = BTreeMap::new();
        let ok = chosen.iter().all(|&p| {
            let r = &pool[order[p]];
            let c = per_cell.entry(cells[order[p]].unwrap()).or_default();
            *c += 1;
            let k = per_repo.entry(&r.repo_id).or_default();
            *k += 1;
            *c <= q[&cells[order[p]].unwrap()] && *k <= cap
        });
        if !ok {
            continue;
        }
        best = match best {
            Some(b) if b.len() > chosen.len() || (b.len() == chosen.len() && b <= chosen) => Some(b),
            _ => Some(chosen),
        };
    }
    best.unwrap_or_default().into_iter().map(|p| pool[order[p]].file_id.clone()).collect()
}

#[test]
fn matching_agrees_with_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..150 {
        let (na, np, repos) = (rng.gen_range(2..8), rng.gen_range(4..15), rng.gen_range(1..5));
        let arm_a = random_records(&mut rng, na, 4, Arm::AiAttributed, "a");
        let pool = random_records(&mut rng, np, repos, Arm::HumanControl, "p");
        let cap = rng.gen_range(1..4);
        let seed = rng.gen();
        let spec = MatchSpec { cap, seed, ..MatchSpec::default() };
        let got: Vec<String> = match_controls(&pool, &arm_a, &spec).unwrap().selected.into_iter().map(|r| r.file_id).collect();
        assert_eq!(got, brute_force(&pool, &arm_a, cap, seed), "round {round}");
    }
}

#[test]
fn matching_respects_cap_and_quotas_and_is_repeatable() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let (na, np, repos) = (rng.gen_range(5..60), rng.gen_range(20..300), rng.gen_range(1..25));
        let arm_a = random_records(&mut rng, na, 10, Arm::AiAttributed, "a");
        let pool = random_records(&mut rng, np, repos, Arm::HumanControl, "p");
        let spec = MatchSpec { cap: rng.gen_range(1..6), seed: rng.gen(), ..MatchSpec::default() };
        let res = match_controls(&pool, &arm_a, &spec).unwrap();
        let mut per_repo: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &res.selected {
            *per_repo.entry(&r.repo_id).or_default() += 1;
        }
        assert!(per_repo.values().all(|&n| n <= spec.cap));
        assert!(res.selected.len() <= res.target);
        let ids: BTreeSet<&str> = res.selected.iter().map(|r| r.file_id.as_str()).collect();
        assert_eq!(ids.len(), res.selected.len());
        let again = match_controls(&pool, &arm_a, &spec).unwrap();
        assert_eq!(again.selected, res.selected);
    }
}

fn exact_p(means: &[f64], k: usize, reference: f64) -> f64 {
    let n = means.len();
    let (mut hit, mut total) = (0usize, 0usize);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != k {
            continue;
        }
        total += 1;
        let sum: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| means[i]).sum();
        if sum / k as f64 >= reference {
            hit += 1;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn bootstrap_approaches_exact_enumeration() {
    let means = [0.1, 0.2, 0.25, 0.3, 0.35, 0.4, 0.5, 0.6, 0.8, 1.1];
    for (k, reference) in [(2, 0.45), (3, 0.4), (4, 0.5)] {
        let exact = exact_p(&means, k, reference);
        for seed in [1, 42, 99] {
            let r = bootstrap_repo_sensitivity(&means, reference, 5000, k, seed).unwrap();
            assert!((r.p - exact).abs() <= 0.02, "k={k} seed={seed}: {} vs {exact}", r.p);
        }
    }
    let low = bootstrap_repo_sensitivity(&means, 5.0, 200, 3, 1).unwrap();
    let high = bootstrap_repo_sensitivity(&means, 0.0, 200, 3, 1).unwrap();
    assert_eq!((low.p, high.p), (0.0, 1.0));
    assert!(bootstrap_repo_sensitivity(&means, 0.1, 10, 11, 1).is_err());
}

#[test]
fn repo_means_average_high_per_file() {
    let hi = FindingTally { check: CheckId::C01, severity: Severity::High };
    let mut a = rec("x1".into(), "r1".into(), LanguageId::Python, 200, Arm::AiAttributed);
    a.findings = vec![hi, hi];
    let b = rec("x2".into(), "r1".into(), LanguageId::Python, 200, Arm::AiAttributed);
    let mut c = rec("x3".into(), "r2".into(), LanguageId::Python, 200, Arm::AiAttributed);
    c.findings = vec![hi, FindingTally { check: CheckId::C04, severity: Severity::Low }];
    assert_eq!(repo_means(&[a, b, c]), vec![("r1".to_string(), 1.0), ("r2".to_string(), 1.0)]);
}

fn arm_with(arm: Arm, lang: LanguageId, files: usize, high: usize, tag: &str) -> Vec<FileRecord> {
    (0..files)
        .map(|i| {
            let mut r = rec(format!("{tag}{i}"), format!("r{}", i % 9), lang, 200, arm);
            if i < high {
                r.findings.push(FindingTally { check: CheckId::C03, severity: Severity::High });
            }
            r
        })
        .collect()
}

#[test]
fn differential_uses_rounded_rates() {
    let a = arm_with(Arm::AiAttributed, LanguageId::Python, 300, 80, "a");
    let b = arm_with(Arm::HumanControl, LanguageId::Python, 300, 61, "b");
    let c = Comparison::build(&a, &b, DEFAULT_PARITY_BAND).unwrap();
    assert_eq!((c.differential.a_rate, c.differential.b_rate), (0.267, 0.203));
    let Ratio::Finite(r) = c.differential.ratio else { panic!("ratio") };
    assert!((r - 1.32).abs() < 0.005);
    let empty = arm_with(Arm::HumanControl, LanguageId::Python, 10, 0, "z");
    let c = Comparison::build(&a, &empty, DEFAULT_PARITY_BAND).unwrap();
    assert_eq!(c.differential.ratio, Ratio::Infinite);
}
