//! Approximate K-NN graph construction by NN-descent.
//!
//! Every node starts with K random neighbors. Each iteration runs a local join
//! over a node's sampled neighborhood (forward and reverse) and keeps any pair
//! that improves either endpoint's list. Entries carry a new/old flag so that
//! pairs of two old entries, which were already compared in an earlier
//! iteration, are not joined again. New entries are sampled at rate `rho`, and
//! reverse neighbors are capped at `rho * K` per node and flag class. The loop
//! stops once an iteration changes fewer than `zeta * K * n` list entries.
//!
//! For very small K the lists are too short for neighbors' neighbors to reach
//! anything new, so every node keeps at least [`MIN_POOL`] candidates while
//! iterating (K, rho and zeta then refer to that pool size) and the best K are
//! returned.
//!
//! Pair distances for a block of nodes are computed (optionally in parallel)
//! before any list is touched, then applied in node order. A join's pair set is
//! fixed at the start of the iteration, so the result does not depend on the
//! thread count.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{l2, DenseDataset, GraphKind, Neighbor, NeighborGraph};

const JOIN_BLOCK: usize = 256;

/// Smallest per-node candidate list maintained during construction.
pub const MIN_POOL: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NnDescentParams {
    /// Neighbors per node (K).
    pub k: usize,
    /// Sample rate rho in (0, 1].
    pub sample_rate: f64,
    /// Early-termination threshold zeta in [0, 1).
    pub termination: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Compute join distances on the rayon pool. Output is identical either way.
    pub parallel: bool,
}

impl Default for NnDescentParams {
    fn default() -> Self {
        Self {
            k: 40,
            sample_rate: 0.5,
            termination: 0.002,
            max_iters: 30,
            seed: 42,
            parallel: false,
        }
    }
}

impl NnDescentParams {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::usage("K must be at least 1"));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::usage(format!(
                "sample rate rho={} must be in (0, 1]",
                self.sample_rate
            )));
        }
        if !(self.termination >= 0.0 && self.termination < 1.0) {
            return Err(Error::usage(format!(
                "termination threshold zeta={} must be in [0, 1)",
                self.termination
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::usage("max_iters must be at least 1"));
        }
        Ok(())
    }

    fn sample_size(&self, pool: usize) -> usize {
        ((self.sample_rate * pool as f64).ceil() as usize).max(1)
    }
}

/// Construction statistics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NnDescentReport {
    /// List entries replaced in each iteration.
    pub updates: Vec<usize>,
    pub distance_computations: u64,
}

impl NnDescentReport {
    pub fn iterations(&self) -> usize {
        self.updates.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    id: u32,
    dist: f32,
    is_new: bool,
}

impl Entry {
    #[inline]
    fn key(&self) -> (f32, u32) {
        (self.dist, self.id)
    }
}

#[inline]
fn key_lt(a: (f32, u32), b: (f32, u32)) -> bool {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).is_lt()
}

/// Bounded list sorted ascending by `(dist, id)`.
#[derive(Debug, Clone)]
struct KnnList {
    entries: Vec<Entry>,
}

impl KnnList {
    fn insert(&mut self, cap: usize, id: u32, dist: f32) -> bool {
        let key = (dist, id);
        if self.entries.len() == cap {
            if let Some(last) = self.entries.last() {
                if !key_lt(key, last.key()) {
                    return false;
                }
            }
        }
        if self.entries.iter().any(|e| e.id == id) {
            return false;
        }
        let pos = self.entries.partition_point(|e| key_lt(e.key(), key));
        if self.entries.len() == cap {
            self.entries.pop();
        }
        self.entries.insert(
            pos,
            Entry {
                id,
                dist,
                is_new: true,
            },
        );
        true
    }

    fn to_neighbors(&self) -> Vec<Neighbor> {
        self.entries.iter().map(|e| Neighbor::new(e.id, e.dist)).collect()
    }
}

/// Builds an approximate K-NN graph.
pub fn build_knn_graph(dataset: &DenseDataset, params: &NnDescentParams) -> Result<NeighborGraph> {
    build_knn_graph_with_report(dataset, params).map(|(g, _)| g)
}

pub fn build_knn_graph_with_report(
    dataset: &DenseDataset,
    params: &NnDescentParams,
) -> Result<(NeighborGraph, NnDescentReport)> {
    build_impl(dataset, params, None)
}

/// Like [`build_knn_graph_with_report`], calling `observe(iteration, lists)`
/// after initialization (iteration 0) and after every join iteration.
pub fn build_knn_graph_observed<F>(
    dataset: &DenseDataset,
    params: &NnDescentParams,
    mut observe: F,
) -> Result<(NeighborGraph, NnDescentReport)>
where
    F: FnMut(usize, &[Vec<Neighbor>]),
{
    build_impl(dataset, params, Some(&mut observe))
}

type Observer<'a> = &'a mut dyn FnMut(usize, &[Vec<Neighbor>]);

fn build_impl(
    dataset: &DenseDataset,
    params: &NnDescentParams,
    mut observe: Option<Observer<'_>>,
) -> Result<(NeighborGraph, NnDescentReport)> {
    params.validate()?;
    let n = dataset.len();
    let k = params.k;
    if n <= k {
        return Err(Error::usage(format!(
            "NN-descent needs n > K, got n={n} K={k}"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::usage("dataset too large for 32-bit ids"));
    }

    let pool = k.max(MIN_POOL).min(n - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut report = NnDescentReport::default();
    let mut lists = init_lists(dataset, pool, &mut rng);
    report.distance_computations += (n * pool) as u64;
    if let Some(f) = observe.as_mut() {
        f(0, &snapshot(&lists, k));
    }

    let sample = params.sample_size(pool);
    let threshold = params.termination * (pool * n) as f64;

    for iter in 1..=params.max_iters {
        let (new_sets, old_sets) = sample_join_sets(&mut lists, sample, &mut rng);
        let mut updates = 0usize;
        for block_start in (0..n).step_by(JOIN_BLOCK) {
            let block = block_start..(block_start + JOIN_BLOCK).min(n);
            let join = |v: usize| local_join_pairs(dataset, &new_sets[v], &old_sets[v]);
            let pairs: Vec<Vec<(u32, u32, f32)>> = if params.parallel {
                block.into_par_iter().map(join).collect()
            } else {
                block.map(join).collect()
            };
            for node_pairs in pairs {
                report.distance_computations += node_pairs.len() as u64;
                for (a, b, dist) in node_pairs {
                    updates += usize::from(lists[a as usize].insert(pool, b, dist));
                    updates += usize::from(lists[b as usize].insert(pool, a, dist));
                }
            }
        }
        report.updates.push(updates);
        if let Some(f) = observe.as_mut() {
            f(iter, &snapshot(&lists, k));
        }
        log::debug!("nn-descent iteration {iter}: {updates} updates");
        if (updates as f64) < threshold {
            break;
        }
    }

    let adjacency = snapshot(&lists, k);
    let graph = NeighborGraph::new_unchecked(GraphKind::KnnGraph { k }, adjacency);
    debug_assert!(graph.validate().is_ok());
    Ok((graph, report))
}

fn snapshot(lists: &[KnnList], k: usize) -> Vec<Vec<Neighbor>> {
    lists
        .iter()
        .map(|l| {
            let mut out = l.to_neighbors();
            out.truncate(k);
            out
        })
        .collect()
}

fn init_lists(dataset: &DenseDataset, k: usize, rng: &mut ChaCha8Rng) -> Vec<KnnList> {
    let n = dataset.len();
    (0..n)
        .map(|v| {
            let mut list = KnnList {
                entries: Vec::with_capacity(k),
            };
            // draw from 0..n-1 and skip over v, so draws are distinct and never self
            for i in index::sample(rng, n - 1, k) {
                let u = if i >= v { i + 1 } else { i };
                let dist = l2(dataset.row(v), dataset.row(u));
                list.insert(k, u as u32, dist);
            }
            list
        })
        .collect()
}

/// Splits each list into join sets. Sampled new entries are flipped to old so
/// they are not joined as new twice.
fn sample_join_sets(
    lists: &mut [KnnList],
    sample: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
    let n = lists.len();
    let mut new_sets: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut old_sets: Vec<Vec<u32>> = vec![Vec::new(); n];

    for (v, list) in lists.iter_mut().enumerate() {
        let new_pos: Vec<usize> = list
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_new)
            .map(|(i, _)| i)
            .collect();
        for e in list.entries.iter().filter(|e| !e.is_new) {
            old_sets[v].push(e.id);
        }
        let picked: Vec<usize> = if new_pos.len() <= sample {
            new_pos
        } else {
            index::sample(rng, new_pos.len(), sample)
                .into_iter()
                .map(|i| new_pos[i])
                .collect()
        };
        for pos in picked {
            let e = &mut list.entries[pos];
            e.is_new = false;
            new_sets[v].push(e.id);
        }
    }

    let mut rev_new: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut rev_old: Vec<Vec<u32>> = vec![Vec::new(); n];
    for v in 0..n {
        for &u in &new_sets[v] {
            rev_new[u as usize].push(v as u32);
        }
        for &u in &old_sets[v] {
            rev_old[u as usize].push(v as u32);
        }
    }

    for v in 0..n {
        append_sample(&mut new_sets[v], &rev_new[v], sample, rng);
        append_sample(&mut old_sets[v], &rev_old[v], sample, rng);
        new_sets[v].sort_unstable();
        new_sets[v].dedup();
        old_sets[v].sort_unstable();
        old_sets[v].dedup();
        let new_set = &new_sets[v];
        old_sets[v].retain(|id| new_set.binary_search(id).is_err());
    }
    (new_sets, old_sets)
}

fn append_sample(dst: &mut Vec<u32>, src: &[u32], cap: usize, rng: &mut ChaCha8Rng) {
    if src.len() <= cap {
        dst.extend_from_slice(src);
    } else {
        dst.extend(index::sample(rng, src.len(), cap).into_iter().map(|i| src[i]));
    }
}

/// All new-new and new-old pairs of one node's neighborhood with their distances.
fn local_join_pairs(dataset: &DenseDataset, new: &[u32], old: &[u32]) -> Vec<(u32, u32, f32)> {
    let mut pairs = Vec::with_capacity(new.len() * (new.len() + 2 * old.len()) / 2);
    for (i, &a) in new.iter().enumerate() {
        let row_a = dataset.row(a as usize);
        for &b in &new[i + 1..] {
            pairs.push((a, b, l2(row_a, dataset.row(b as usize))));
        }
        for &b in old {
            pairs.push((a, b, l2(row_a, dataset.row(b as usize))));
        }
    }
    pairs
}

/// Mean over nodes of `|approx list ∩ exact list| / K`.
pub fn graph_recall(approx: &NeighborGraph, exact: &NeighborGraph) -> Result<f64> {
    if approx.len() != exact.len() {
        return Err(Error::usage(format!(
            "graphs have different node counts: {} vs {}",
            approx.len(),
            exact.len()
        )));
    }
    let k = approx.kind().degree_param();
    if k != exact.kind().degree_param() {
        return Err(Error::usage(format!(
            "graphs have different K: {k} vs {}",
            exact.kind().degree_param()
        )));
    }
    let mut total = 0.0;
    for node in 0..approx.len() {
        let truth = exact.neighbors(node);
        let hits = approx
            .neighbors(node)
            .iter()
            .filter(|nb| truth.iter().any(|t| t.id == nb.id))
            .count();
        let denom = truth.len().max(1);
        total += hits as f64 / denom as f64;
    }
    Ok(total / approx.len() as f64)
}
