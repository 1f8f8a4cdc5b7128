//! Matched-control selection over (language, size band, size decile) cells.
//!
//! Cells and per-cell quotas come from arm A. Among all pool selections that
//! respect the quotas and the per-repo cap, the largest is chosen; ties are
//! broken lexicographically by a seeded priority order over the pool.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{CorpusError, FileRecord};
use crate::scan::STUDY_SIZE_BOUNDS;
use crate::syntax::LanguageId;

/// Upper bounds of the lower size bands: 100-300, 301-800, 801-2000.
pub const DEFAULT_BAND_EDGES: [usize; 2] = [300, 800];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSpec {
    pub cap: usize,
    pub seed: u64,
    /// Number of controls wanted; defaults to the size of arm A.
    pub target: Option<usize>,
    pub band_edges: Vec<usize>,
}

impl Default for MatchSpec {
    fn default() -> Self {
        MatchSpec { cap: 4, seed: 42, target: None, band_edges: DEFAULT_BAND_EDGES.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct CellKey {
    pub language: LanguageId,
    pub band: u8,
    /// 1..=10 within the (language, band) distribution of arm A.
    pub decile: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellGap {
    pub cell: CellKey,
    pub band_label: String,
    pub quota: usize,
    pub selected: usize,
    pub shortfall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub target: usize,
    pub candidates: usize,
    /// Selected pool records in priority order.
    pub selected: Vec<FileRecord>,
    pub quotas: Vec<(CellKey, usize)>,
    pub gaps: Vec<CellGap>,
}

fn band_of(lines: usize, edges: &[usize]) -> u8 {
    edges.iter().filter(|e| lines > **e).count() as u8
}

pub fn band_label(band: u8, edges: &[usize]) -> String {
    let b = band as usize;
    let lo = if b == 0 { STUDY_SIZE_BOUNDS.0 } else { edges[b - 1] + 1 };
    let hi = edges.get(b).copied().unwrap_or(STUDY_SIZE_BOUNDS.1);
    format!("{lo}-{hi}")
}

/// Nearest-rank 10th..90th percentiles.
fn cutpoints(mut lines: Vec<usize>) -> [usize; 9] {
    lines.sort_unstable();
    let n = lines.len();
    let mut out = [0; 9];
    for (k, slot) in out.iter_mut().enumerate() {
        let rank = ((k + 1) * n).div_ceil(10).max(1);
        *slot = lines[rank - 1];
    }
    out
}

/// Cell of each record under arm A's cut points; `None` when arm A has no
/// file in the record's language and band.
pub fn assign_cells(arm_a: &[FileRecord], records: &[FileRecord], band_edges: &[usize]) -> Vec<Option<CellKey>> {
    let mut groups: BTreeMap<(LanguageId, u8), Vec<usize>> = BTreeMap::new();
    for r in arm_a {
        groups.entry((r.language, band_of(r.line_count, band_edges))).or_default().push(r.line_count);
    }
    let cuts: BTreeMap<(LanguageId, u8), [usize; 9]> = groups.into_iter().map(|(k, v)| (k, cutpoints(v))).collect();
    records
        .iter()
        .map(|r| {
            let band = band_of(r.line_count, band_edges);
            cuts.get(&(r.language, band)).map(|c| CellKey {
                language: r.language,
                band,
                decile: 1 + c.iter().filter(|p| r.line_count > **p).count() as u8,
            })
        })
        .collect()
}

/// Pool indices in tie-break order: sorted by file id, then shuffled by `seed`.
pub fn priority_order(pool: &[FileRecord], seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    idx.sort_by(|&a, &b| (&pool[a].file_id, &pool[a].repo_id, a).cmp(&(&pool[b].file_id, &pool[b].repo_id, b)));
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Largest-remainder apportionment of `target` over cell counts.
fn apportion(counts: &BTreeMap<CellKey, usize>, target: usize) -> BTreeMap<CellKey, usize> {
    let n: usize = counts.values().sum();
    let mut quotas: BTreeMap<CellKey, usize> = BTreeMap::new();
    let mut rems = Vec::new();
    for (k, &c) in counts {
        quotas.insert(*k, target * c / n);
        rems.push((target * c % n, *k));
    }
    let mut left = target - quotas.values().sum::<usize>();
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for (_, k) in rems {
        if left == 0 {
            break;
        }
        *quotas.get_mut(&k).unwrap() += 1;
        left -= 1;
    }
    quotas
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    Open,
    Locked,
    Rejected,
}

#[derive(Clone, Copy)]
enum Step {
    SourceCell(usize, bool),
    File(usize, bool),
    RepoSink(usize, bool),
}

/// Unit-capacity flow: source -> cell (quota) -> file -> repo (cap) -> sink.
struct Network {
    quota: Vec<usize>,
    cap: usize,
    cell_used: Vec<usize>,
    repo_used: Vec<usize>,
    file_cell: Vec<usize>,
    file_repo: Vec<usize>,
    cell_files: Vec<Vec<usize>>,
    repo_files: Vec<Vec<usize>>,
    flow: Vec<bool>,
    state: Vec<State>,
}

const SOURCE: usize = 0;
const SINK: usize = 1;

impl Network {
    fn cell_node(&self, c: usize) -> usize {
        2 + c
    }

    fn repo_node(&self, r: usize) -> usize {
        2 + self.quota.len() + r
    }

    fn neighbours(&self, node: usize, out: &mut Vec<(usize, Step)>) {
        out.clear();
        let cells = self.quota.len();
        if node == SOURCE {
            for c in 0..cells {
                if self.cell_used[c] < self.quota[c] {
                    out.push((self.cell_node(c), Step::SourceCell(c, true)));
                }
            }
        } else if node == SINK {
            for r in 0..self.repo_used.len() {
                if self.repo_used[r] > 0 {
                    out.push((self.repo_node(r), Step::RepoSink(r, false)));
                }
            }
        } else if node < 2 + cells {
            let c = node - 2;
            if self.cell_used[c] > 0 {
                out.push((SOURCE, Step::SourceCell(c, false)));
            }
            for &f in &self.cell_files[c] {
                if !self.flow[f] && self.state[f] != State::Rejected {
                    out.push((self.repo_node(self.file_repo[f]), Step::File(f, true)));
                }
            }
        } else {
            let r = node - 2 - cells;
            if self.repo_used[r] < self.cap {
                out.push((SINK, Step::RepoSink(r, true)));
            }
            for &f in &self.repo_files[r] {
                if self.flow[f] && self.state[f] == State::Open {
                    out.push((self.cell_node(self.file_cell[f]), Step::File(f, false)));
                }
            }
        }
    }

    fn path(&self, from: usize, to: usize) -> Option<Vec<Step>> {
        let nodes = 2 + self.quota.len() + self.repo_used.len();
        let mut parent: Vec<Option<(usize, Step)>> = vec![None; nodes];
        let mut seen = vec![false; nodes];
        seen[from] = true;
        let mut queue = VecDeque::from([from]);
        let mut buf = Vec::new();
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            self.neighbours(u, &mut buf);
            for &(v, step) in &buf {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, step));
                    queue.push_back(v);
                }
            }
        }
        if !seen[to] {
            return None;
        }
        let mut steps = Vec::new();
        let mut v = to;
        while v != from {
            let (u, step) = parent[v]?;
            steps.push(step);
            v = u;
        }
        Some(steps)
    }

    fn apply(&mut self, step: Step) {
        match step {
            Step::SourceCell(c, true) => self.cell_used[c] += 1,
            Step::SourceCell(c, false) => self.cell_used[c] -= 1,
            Step::File(f, fwd) => self.flow[f] = fwd,
            Step::RepoSink(r, true) => self.repo_used[r] += 1,
            Step::RepoSink(r, false) => self.repo_used[r] -= 1,
        }
    }

    fn maximise(&mut self) {
        while let Some(steps) = self.path(SOURCE, SINK) {
            for s in steps {
                self.apply(s);
            }
        }
    }

    /// Lock `f` into the selection if some maximum flow can carry it.
    fn try_lock(&mut self, f: usize) -> bool {
        if !self.flow[f] {
            let (from, to) = (self.repo_node(self.file_repo[f]), self.cell_node(self.file_cell[f]));
            match self.path(from, to) {
                Some(steps) => {
                    for s in steps {
                        self.apply(s);
                    }
                    self.flow[f] = true;
                }
                None => {
                    self.state[f] = State::Rejected;
                    return false;
                }
            }
        }
        self.state[f] = State::Locked;
        true
    }
}

pub fn match_controls(pool: &[FileRecord], arm_a: &[FileRecord], spec: &MatchSpec) -> Result<MatchResult, CorpusError> {
    if pool.is_empty() {
        return Err(CorpusError::EmptyPool);
    }
    if spec.cap < 1 {
        return Err(CorpusError::InvalidCap);
    }
    if arm_a.is_empty() {
        return Err(CorpusError::EmptyReference);
    }
    let target = spec.target.unwrap_or(arm_a.len());
    let mut counts: BTreeMap<CellKey, usize> = BTreeMap::new();
    for cell in assign_cells(arm_a, arm_a, &spec.band_edges).into_iter().flatten() {
        *counts.entry(cell).or_default() += 1;
    }
    let quotas = apportion(&counts, target);
    let cell_keys: Vec<CellKey> = quotas.keys().copied().collect();
    let cell_index: BTreeMap<CellKey, usize> = cell_keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();

    let pool_cells = assign_cells(arm_a, pool, &spec.band_edges);
    let mut repo_index: BTreeMap<&str, usize> = BTreeMap::new();
    for r in pool {
        let next = repo_index.len();
        repo_index.entry(r.repo_id.as_str()).or_insert(next);
    }

    // Candidate files in priority order, numbered by their position in it.
    let order: Vec<usize> = priority_order(pool, spec.seed)
        .into_iter()
        .filter(|&i| pool_cells[i].is_some_and(|c| quotas.get(&c).is_some_and(|&q| q > 0)))
        .collect();
    let mut net = Network {
        quota: quotas.values().copied().collect(),
        cap: spec.cap,
        cell_used: vec![0; cell_keys.len()],
        repo_used: vec![0; repo_index.len()],
        file_cell: Vec::with_capacity(order.len()),
        file_repo: Vec::with_capacity(order.len()),
        cell_files: vec![Vec::new(); cell_keys.len()],
        repo_files: vec![Vec::new(); repo_index.len()],
        flow: vec![false; order.len()],
        state: vec![State::Open; order.len()],
    };
    for (f, &i) in order.iter().enumerate() {
        let c = cell_index[&pool_cells[i].unwrap()];
        let r = repo_index[pool[i].repo_id.as_str()];
        net.file_cell.push(c);
        net.file_repo.push(r);
        net.cell_files[c].push(f);
        net.repo_files[r].push(f);
    }
    net.maximise();
    for f in 0..order.len() {
        net.try_lock(f);
    }

    let selected: Vec<FileRecord> =
        (0..order.len()).filter(|&f| net.state[f] == State::Locked).map(|f| pool[order[f]].clone()).collect();
    let gaps = cell_keys
        .iter()
        .enumerate()
        .filter(|(c, _)| net.cell_used[*c] < net.quota[*c])
        .map(|(c, k)| CellGap {
            cell: *k,
            band_label: band_label(k.band, &spec.band_edges),
            quota: net.quota[c],
            selected: net.cell_used[c],
            shortfall: net.quota[c] - net.cell_used[c],
        })
        .collect();
    Ok(MatchResult { target, candidates: order.len(), selected, quotas: quotas.into_iter().collect(), gaps })
}
