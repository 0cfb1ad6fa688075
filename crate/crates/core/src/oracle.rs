//! Exact k-nearest-neighbor search by linear scan.
//!
//! This is both the ground-truth generator and the speedup baseline: the mean
//! single-threaded scan time per query is recorded in [`GroundTruth`].

use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DenseDataset, GraphKind, Neighbor, NeighborGraph, QuerySet};

/// Exact neighbors for a query workload plus the brute-force timing baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub k: usize,
    /// One list of exactly `k` neighbors per query, ascending by `(dist, id)`.
    pub neighbors: Vec<Vec<Neighbor>>,
    /// Mean wall time in seconds of one brute-force query.
    pub baseline_time: f64,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn ids(&self, query: usize) -> impl Iterator<Item = u32> + '_ {
        self.neighbors[query].iter().map(|nb| nb.id)
    }
}

/// The `k` nearest rows of `dataset` to `query`, ascending by `(dist, id)`.
pub fn brute_force_knn(dataset: &DenseDataset, query: &[f32], k: usize) -> Result<Vec<Neighbor>> {
    if query.len() != dataset.dim() {
        return Err(Error::usage(format!(
            "query dimension {} does not match dataset dimension {}",
            query.len(),
            dataset.dim()
        )));
    }
    if k == 0 || k > dataset.len() {
        return Err(Error::usage(format!(
            "k={k} must be in 1..={}",
            dataset.len()
        )));
    }
    Ok(scan(dataset, query, k, None))
}

fn scan(dataset: &DenseDataset, query: &[f32], k: usize, skip: Option<usize>) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = (0..dataset.len())
        .filter(|&i| Some(i) != skip)
        .map(|i| Neighbor::new(i as u32, dataset.dist_to(i, query)))
        .collect();
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, Neighbor::cmp_by_dist);
        all.truncate(k);
    }
    all.sort_unstable_by(Neighbor::cmp_by_dist);
    all
}

/// Runs [`brute_force_knn`] for every query on the calling thread and times it.
pub fn build_ground_truth(dataset: &DenseDataset, queries: &QuerySet, k: usize) -> Result<GroundTruth> {
    if queries.is_empty() {
        return Err(Error::usage("empty query set"));
    }
    queries.check_against(dataset)?;
    if k == 0 || k > dataset.len() {
        return Err(Error::usage(format!("k={k} must be in 1..={}", dataset.len())));
    }
    // warm-up pass, untimed
    std::hint::black_box(scan(dataset, queries.row(0), k, None));

    let start = Instant::now();
    let neighbors: Vec<Vec<Neighbor>> = queries.rows().map(|q| scan(dataset, q, k, None)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let baseline_time = (elapsed / queries.len() as f64).max(f64::MIN_POSITIVE);
    Ok(GroundTruth {
        k,
        neighbors,
        baseline_time,
    })
}

/// Exact K-NN graph (self excluded), parallel over nodes. Quadratic; meant for
/// small `n` as a reference for approximate construction.
pub fn exact_knn_graph(dataset: &DenseDataset, k: usize) -> Result<NeighborGraph> {
    let n = dataset.len();
    if k == 0 || k >= n {
        return Err(Error::usage(format!("K={k} must be in 1..{n}")));
    }
    let adjacency: Vec<Vec<Neighbor>> = (0..n)
        .into_par_iter()
        .map(|i| scan(dataset, dataset.row(i), k, Some(i)))
        .collect();
    Ok(NeighborGraph::new_unchecked(GraphKind::KnnGraph { k }, adjacency))
}
