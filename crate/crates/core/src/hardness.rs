//! Workload hardness: Relative Contrast, local intrinsic dimensionality, and
//! the minHops reachability diagnostic for graph indexes.

use std::collections::VecDeque;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DenseDataset, NeighborGraph, QuerySet};

/// Above this many points the mean distance is taken over a seeded sample.
pub const DEFAULT_MEAN_SAMPLE_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HardnessOptions {
    pub mean_sample_cap: usize,
    pub seed: u64,
}

impl Default for HardnessOptions {
    fn default() -> Self {
        Self {
            mean_sample_cap: DEFAULT_MEAN_SAMPLE_CAP,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeContrast {
    /// `E[D_mean] / E[D_min]`.
    pub rc: f64,
    /// `E[D_mean] / E[D_knn]`.
    pub rc_k: f64,
    pub k: usize,
    pub queries_used: usize,
    /// Queries dropped because they coincide with a data point (`D_min = 0`).
    pub excluded: usize,
    /// Points averaged per query for `D_mean`.
    pub mean_sample_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidEstimate {
    /// Mean of the per-query estimates; `+inf` if any profile is flat.
    pub lid: f64,
    pub neighbors_per_query: usize,
    pub queries_used: usize,
    /// Queries dropped because a neighbor distance was zero.
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardnessReport {
    pub rc: RelativeContrast,
    pub lid: LidEstimate,
}

struct Profile {
    /// Ascending distances to the nearest `need` points.
    nearest: Vec<f64>,
    mean: f64,
}

fn mean_sample(n: usize, opts: &HardnessOptions) -> Option<Vec<usize>> {
    if n <= opts.mean_sample_cap {
        None
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut ids = index::sample(&mut rng, n, opts.mean_sample_cap).into_vec();
        ids.sort_unstable();
        Some(ids)
    }
}

fn profiles(
    dataset: &DenseDataset,
    queries: &QuerySet,
    need: usize,
    opts: &HardnessOptions,
) -> Result<(Vec<Profile>, usize)> {
    queries.check_against(dataset)?;
    if queries.is_empty() {
        return Err(Error::usage("empty query set"));
    }
    let n = dataset.len();
    if need == 0 || need > n {
        return Err(Error::usage(format!("neighbor count {need} must be in 1..={n}")));
    }
    let sample = mean_sample(n, opts);
    let sample_size = sample.as_ref().map_or(n, Vec::len);
    let out = (0..queries.len())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let mut all: Vec<f64> = (0..n).map(|i| f64::from(dataset.dist_to(i, q))).collect();
            let mean = match &sample {
                None => all.iter().sum::<f64>() / n as f64,
                Some(ids) => ids.iter().map(|&i| all[i]).sum::<f64>() / ids.len() as f64,
            };
            if need < n {
                all.select_nth_unstable_by(need - 1, f64::total_cmp);
                all.truncate(need);
            }
            all.sort_unstable_by(f64::total_cmp);
            Profile { nearest: all, mean }
        })
        .collect();
    Ok((out, sample_size))
}

fn rc_from(profiles: &[Profile], k: usize, sample_size: usize) -> Result<RelativeContrast> {
    let (mut sum_mean, mut sum_min, mut sum_knn) = (0.0, 0.0, 0.0);
    let mut used = 0usize;
    for p in profiles {
        if p.nearest[0] == 0.0 {
            continue;
        }
        sum_mean += p.mean;
        sum_min += p.nearest[0];
        sum_knn += p.nearest[k - 1];
        used += 1;
    }
    let excluded = profiles.len() - used;
    if excluded > 0 {
        log::warn!("relative contrast: {excluded} queries coincide with a data point and were excluded");
    }
    if used == 0 {
        return Err(Error::usage("every query coincides with a data point; relative contrast undefined"));
    }
    Ok(RelativeContrast {
        rc: sum_mean / sum_min,
        rc_k: sum_mean / sum_knn,
        k,
        queries_used: used,
        excluded,
        mean_sample_size: sample_size,
    })
}

pub fn relative_contrast(
    dataset: &DenseDataset,
    queries: &QuerySet,
    k: usize,
    opts: &HardnessOptions,
) -> Result<RelativeContrast> {
    let (profiles, sample_size) = profiles(dataset, queries, k, opts)?;
    rc_from(&profiles, k, sample_size)
}

/// Maximum-likelihood (Hill) estimate from one ascending distance profile
/// `r_1 <= ... <= r_w`: `-1 / mean(ln(r_i / r_w))`.
///
/// `None` if some distance is zero; `+inf` if all distances are equal.
pub fn lid_mle(distances: &[f64]) -> Option<f64> {
    let w = distances.len();
    let r_w = *distances.last()?;
    if distances.iter().any(|&r| r <= 0.0) {
        return None;
    }
    let s: f64 = distances.iter().map(|&r| (r / r_w).ln()).sum::<f64>() / w as f64;
    if s == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(-1.0 / s)
    }
}

fn lid_from(profiles: &[Profile], w: usize) -> Result<LidEstimate> {
    let mut sum = 0.0;
    let mut used = 0usize;
    for p in profiles {
        if let Some(lid) = lid_mle(&p.nearest[..w]) {
            sum += lid;
            used += 1;
        }
    }
    let dropped = profiles.len() - used;
    if dropped > 0 {
        log::warn!("LID: {dropped} queries with zero neighbor distance were dropped");
    }
    if used == 0 {
        return Err(Error::usage("no query has a usable neighbor distance profile"));
    }
    let lid = sum / used as f64;
    if lid.is_infinite() {
        log::warn!("LID estimate diverged: at least one query has a flat distance profile");
    }
    Ok(LidEstimate {
        lid,
        neighbors_per_query: w,
        queries_used: used,
        dropped,
    })
}

pub const MIN_LID_NEIGHBORS: usize = 10;

pub fn lid_estimate(
    dataset: &DenseDataset,
    queries: &QuerySet,
    neighbors_per_query: usize,
) -> Result<LidEstimate> {
    if neighbors_per_query < MIN_LID_NEIGHBORS {
        return Err(Error::usage(format!(
            "LID needs at least {MIN_LID_NEIGHBORS} neighbors per query, got {neighbors_per_query}"
        )));
    }
    let (profiles, _) = profiles(dataset, queries, neighbors_per_query, &HardnessOptions::default())?;
    lid_from(&profiles, neighbors_per_query)
}

/// RC and LID from one scan per query.
pub fn hardness_report(
    dataset: &DenseDataset,
    queries: &QuerySet,
    k: usize,
    lid_neighbors: usize,
    opts: &HardnessOptions,
) -> Result<HardnessReport> {
    if lid_neighbors < MIN_LID_NEIGHBORS {
        return Err(Error::usage(format!(
            "LID needs at least {MIN_LID_NEIGHBORS} neighbors per query, got {lid_neighbors}"
        )));
    }
    if k == 0 {
        return Err(Error::usage("k must be at least 1"));
    }
    let (profiles, sample_size) = profiles(dataset, queries, k.max(lid_neighbors), opts)?;
    Ok(HardnessReport {
        rc: rc_from(&profiles, k, sample_size)?,
        lid: lid_from(&profiles, lid_neighbors)?,
    })
}

/// Distribution of the fewest hops from a node to any point of a kNN set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MinHopsHistogram {
    /// `fractions[h]` is the fraction of nodes at exactly `h` hops.
    pub fractions: Vec<f64>,
    /// Fraction of nodes that cannot reach the set at all.
    pub unreachable: f64,
}

impl MinHopsHistogram {
    pub fn total(&self) -> f64 {
        self.fractions.iter().sum::<f64>() + self.unreachable
    }

    fn accumulate(&mut self, other: &MinHopsHistogram, weight: f64) {
        if self.fractions.len() < other.fractions.len() {
            self.fractions.resize(other.fractions.len(), 0.0);
        }
        for (dst, src) in self.fractions.iter_mut().zip(&other.fractions) {
            *dst += src * weight;
        }
        self.unreachable += other.unreachable * weight;
    }
}

/// Reversed edges in compressed form, built once per graph.
pub struct ReverseGraph {
    offsets: Vec<usize>,
    sources: Vec<u32>,
}

impl ReverseGraph {
    pub fn new(graph: &NeighborGraph) -> Self {
        let n = graph.len();
        let mut offsets = vec![0usize; n + 1];
        for list in graph.adjacency() {
            for nb in list {
                offsets[nb.id as usize + 1] += 1;
            }
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut sources = vec![0u32; offsets[n]];
        for (v, list) in graph.adjacency().iter().enumerate() {
            for nb in list {
                let slot = &mut fill[nb.id as usize];
                sources[*slot] = v as u32;
                *slot += 1;
            }
        }
        Self { offsets, sources }
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes with an edge into `node`.
    pub fn sources(&self, node: usize) -> &[u32] {
        &self.sources[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Breadth-first search from `targets` over reversed edges.
    pub fn min_hops(&self, targets: &[u32]) -> Result<MinHopsHistogram> {
        let n = self.len();
        if targets.is_empty() {
            return Err(Error::usage("kNN set is empty"));
        }
        let mut hops = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        for &t in targets {
            let t = t as usize;
            if t >= n {
                return Err(Error::usage(format!("kNN id {t} out of range (n={n})")));
            }
            if hops[t] == usize::MAX {
                hops[t] = 0;
                queue.push_back(t);
            }
        }
        let mut counts: Vec<usize> = Vec::new();
        while let Some(v) = queue.pop_front() {
            let h = hops[v];
            if counts.len() <= h {
                counts.resize(h + 1, 0);
            }
            counts[h] += 1;
            for &u in self.sources(v) {
                let u = u as usize;
                if hops[u] == usize::MAX {
                    hops[u] = h + 1;
                    queue.push_back(u);
                }
            }
        }
        let reached: usize = counts.iter().sum();
        Ok(MinHopsHistogram {
            fractions: counts.iter().map(|&c| c as f64 / n as f64).collect(),
            unreachable: (n - reached) as f64 / n as f64,
        })
    }
}

pub fn min_hops_histogram(graph: &NeighborGraph, truth: &[u32]) -> Result<MinHopsHistogram> {
    ReverseGraph::new(graph).min_hops(truth)
}

/// Per-query histograms averaged over a workload.
pub fn mean_min_hops_histogram(graph: &NeighborGraph, truths: &[Vec<u32>]) -> Result<MinHopsHistogram> {
    if truths.is_empty() {
        return Err(Error::usage("no queries given"));
    }
    let reverse = ReverseGraph::new(graph);
    let per_query: Vec<MinHopsHistogram> = truths
        .par_iter()
        .map(|t| reverse.min_hops(t))
        .collect::<Result<_>>()?;
    let mut mean = MinHopsHistogram::default();
    let w = 1.0 / truths.len() as f64;
    for h in &per_query {
        mean.accumulate(h, w);
    }
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GraphKind, Neighbor};

    fn qs(rows: &[Vec<f32>]) -> QuerySet {
        QuerySet::new(DenseDataset::from_rows(rows).unwrap())
    }

    #[test]
    fn unit_square_by_hand() {
        // square minus the queried vertex (0,0)
        let ds = DenseDataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let rc = relative_contrast(&ds, &qs(&[vec![0.0, 0.0]]), 1, &HardnessOptions::default()).unwrap();
        let mean = (1.0 + 1.0 + 2f64.sqrt()) / 3.0;
        assert!((rc.rc - mean / 1.0).abs() < 1e-6);
        let rc3 = relative_contrast(&ds, &qs(&[vec![0.0, 0.0]]), 3, &HardnessOptions::default()).unwrap();
        assert!((rc3.rc_k - mean / 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(rc.mean_sample_size, 3);
    }

    #[test]
    fn equidistant_points_give_one() {
        let ds = DenseDataset::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        let rc = relative_contrast(&ds, &qs(&[vec![0.0, 0.0]]), 1, &HardnessOptions::default()).unwrap();
        assert!((rc.rc - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coincident_query_is_excluded() {
        let ds = DenseDataset::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]).unwrap();
        let rc = relative_contrast(&ds, &qs(&[vec![0.0], vec![0.5]]), 1, &HardnessOptions::default()).unwrap();
        assert_eq!((rc.queries_used, rc.excluded), (1, 1));
        assert!(relative_contrast(&ds, &qs(&[vec![1.0]]), 1, &HardnessOptions::default()).is_err());
    }

    #[test]
    fn sampled_mean_records_size() {
        let ds = DenseDataset::new(50, 1, (0..50).map(|i| i as f32).collect()).unwrap();
        let opts = HardnessOptions { mean_sample_cap: 20, seed: 7 };
        let rc = relative_contrast(&ds, &qs(&[vec![10.5]]), 1, &opts).unwrap();
        assert_eq!(rc.mean_sample_size, 20);
    }

    #[test]
    fn lid_mle_on_its_own_model() {
        // r_i = (i/w)^(1/D) is the exact quantile profile of a D-dimensional density
        for dim in [2.0, 8.0, 30.0] {
            let w = 20_000;
            let r: Vec<f64> = (1..=w).map(|i| (i as f64 / w as f64).powf(1.0 / dim)).collect();
            let est = lid_mle(&r).unwrap();
            assert!((est - dim).abs() / dim < 1e-3, "dim {dim}: {est}");
        }
    }

    #[test]
    fn lid_degenerate_profiles() {
        assert_eq!(lid_mle(&[2.0; 10]), Some(f64::INFINITY));
        assert_eq!(lid_mle(&[0.0, 1.0, 2.0]), None);
    }

    #[test]
    fn lid_requires_ten_neighbors() {
        let ds = DenseDataset::new(50, 1, (0..50).map(|i| i as f32).collect()).unwrap();
        assert!(lid_estimate(&ds, &qs(&[vec![0.5]]), 9).is_err());
        assert!(lid_estimate(&ds, &qs(&[vec![0.5]]), 10).is_ok());
    }

    fn graph(adj: Vec<Vec<u32>>) -> NeighborGraph {
        let adj = adj
            .into_iter()
            .map(|l| l.into_iter().map(|id| Neighbor::new(id, 1.0)).collect())
            .collect();
        NeighborGraph::new_unchecked(GraphKind::KnnGraph { k: 0 }, adj)
    }

    #[test]
    fn min_hops_chain_and_components() {
        // 0 -> 1 -> 2 -> 3, and a separate pair 4 <-> 5
        let g = graph(vec![vec![1], vec![2], vec![3], vec![2], vec![5], vec![4]]);
        let h = min_hops_histogram(&g, &[3]).unwrap();
        assert_eq!(h.fractions.len(), 4);
        for f in &h.fractions {
            assert!((f - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!((h.unreachable - 2.0 / 6.0).abs() < 1e-12);
        assert!((h.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_hops_complete_graph() {
        let n = 6u32;
        let g = graph((0..n).map(|v| (0..n).filter(|&u| u != v).collect()).collect());
        let h = min_hops_histogram(&g, &[2, 4]).unwrap();
        assert!((h.fractions[0] - 2.0 / 6.0).abs() < 1e-12);
        assert!((h.fractions[1] - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(h.unreachable, 0.0);
        assert!(min_hops_histogram(&g, &[]).is_err());
    }

    #[test]
    fn mean_histogram_sums_to_one() {
        let g = graph(vec![vec![1], vec![2], vec![3], vec![2], vec![5], vec![4]]);
        let h = mean_min_hops_histogram(&g, &[vec![3], vec![4], vec![0, 5]]).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-12);
    }
}
