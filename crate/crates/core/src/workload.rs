//! Synthetic datasets and query workloads.
//!
//! All generators draw from a single `ChaCha8Rng` seeded with the caller's
//! seed, in row-major order, so output depends only on the parameters and the
//! seed. Gaussian draws use `rand_distr::StandardNormal`.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{DenseDataset, QuerySet};

fn unit_direction(rng: &mut ChaCha8Rng, d: usize, out: &mut Vec<f64>) {
    loop {
        out.clear();
        out.extend((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.iter_mut().for_each(|x| *x /= norm);
            return;
        }
    }
}

/// Points uniform in the unit ball of dimension `d`.
pub fn gen_random_hypersphere(n: usize, d: usize, seed: u64) -> Result<DenseDataset> {
    if n == 0 || d == 0 {
        return Err(Error::usage(format!("need n >= 1 and d >= 1, got n={n} d={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut dir = Vec::with_capacity(d);
    let inv_d = 1.0 / d as f64;
    for _ in 0..n {
        unit_direction(&mut rng, d, &mut dir);
        let radius = rng.random::<f64>().powf(inv_d);
        data.extend(dir.iter().map(|x| (x * radius) as f32));
    }
    DenseDataset::new(n, d, data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussClusters {
    pub dataset: DenseDataset,
    pub centers: Vec<Vec<f32>>,
    /// Center index of every point.
    pub labels: Vec<usize>,
}

/// Isotropic Gaussian blobs around centers drawn uniformly from `[0, box_hi]^d`.
pub fn gen_gauss_clusters(
    n: usize,
    d: usize,
    num_clusters: usize,
    box_hi: f64,
    sigma: f64,
    seed: u64,
) -> Result<DenseDataset> {
    gen_gauss_clusters_labeled(n, d, num_clusters, box_hi, sigma, seed).map(|g| g.dataset)
}

pub fn gen_gauss_clusters_labeled(
    n: usize,
    d: usize,
    num_clusters: usize,
    box_hi: f64,
    sigma: f64,
    seed: u64,
) -> Result<GaussClusters> {
    if n == 0 || d == 0 || num_clusters == 0 {
        return Err(Error::usage(format!(
            "need n, d, num_clusters >= 1, got n={n} d={d} clusters={num_clusters}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !(box_hi >= 0.0 && box_hi.is_finite()) {
        return Err(Error::usage(format!(
            "sigma={sigma} and box_hi={box_hi} must be finite and non-negative"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec<f32>> = (0..num_clusters)
        .map(|_| (0..d).map(|_| (rng.random::<f64>() * box_hi) as f32).collect())
        .collect();
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..num_clusters);
        labels.push(c);
        for &x in &centers[c] {
            let noise: f64 = rng.sample(StandardNormal);
            data.push((f64::from(x) + sigma * noise) as f32);
        }
    }
    Ok(GaussClusters {
        dataset: DenseDataset::new(n, d, data)?,
        centers,
        labels,
    })
}

/// `n` points at `0, 1, ..., n-1` on the real line.
pub fn gen_line(n: usize) -> Result<DenseDataset> {
    DenseDataset::new(n, 1, (0..n).map(|i| i as f32).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySplit {
    pub reference: DenseDataset,
    pub queries: QuerySet,
    /// Original row of each query.
    pub query_ids: Vec<usize>,
}

/// Removes `m` random rows to serve as queries.
pub fn split_queries(dataset: &DenseDataset, m: usize, seed: u64) -> Result<(DenseDataset, QuerySet)> {
    split_queries_with_ids(dataset, m, seed).map(|s| (s.reference, s.queries))
}

pub fn split_queries_with_ids(dataset: &DenseDataset, m: usize, seed: u64) -> Result<QuerySplit> {
    let n = dataset.len();
    if m == 0 || m >= n {
        return Err(Error::usage(format!(
            "query count m={m} must be in 1..{n} (dataset size)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let query_ids = index::sample(&mut rng, n, m).into_vec();
    let mut is_query = vec![false; n];
    for &i in &query_ids {
        is_query[i] = true;
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !is_query[i]).collect();
    Ok(QuerySplit {
        reference: dataset.select(&keep)?,
        queries: QuerySet::new(dataset.select(&query_ids)?),
        query_ids,
    })
}

/// Moves every query by exactly `delta` in an independent uniform random direction.
pub fn perturb_queries(queries: &QuerySet, delta: f64, seed: u64) -> Result<QuerySet> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::usage(format!("delta={delta} must be finite and non-negative")));
    }
    let d = queries.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir = Vec::with_capacity(d);
    let mut data = Vec::with_capacity(queries.len() * d);
    for q in queries.rows() {
        unit_direction(&mut rng, d, &mut dir);
        data.extend(q.iter().zip(&dir).map(|(&x, u)| (f64::from(x) + delta * u) as f32));
    }
    Ok(QuerySet::new(DenseDataset::new(queries.len(), d, data)?))
}

/// Named dataset configurations addressable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// 10k points uniform in the 32-d unit ball.
    Rand10kD32,
    /// 5k points uniform in the 20-d unit ball.
    Rand5kD20,
    /// 1M points uniform in the 100-d unit ball.
    Rand1mD100,
    /// 10k points, 32-d, 10 Gaussian clusters in `[0,10]^32`, sigma 1.
    Gauss10kD32C10,
    /// 1000 points on a line.
    Line1k,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Rand10kD32,
        Preset::Rand5kD20,
        Preset::Rand1mD100,
        Preset::Gauss10kD32C10,
        Preset::Line1k,
    ];

    /// Presets small enough to index in a test run.
    pub const DESK: [Preset; 4] = [
        Preset::Rand10kD32,
        Preset::Rand5kD20,
        Preset::Gauss10kD32C10,
        Preset::Line1k,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Rand10kD32 => "rand-10k-d32",
            Preset::Rand5kD20 => "rand-5k-d20",
            Preset::Rand1mD100 => "rand-1m-d100",
            Preset::Gauss10kD32C10 => "gauss-10k-d32-c10",
            Preset::Line1k => "line-1k",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<DenseDataset> {
        match self {
            Preset::Rand10kD32 => gen_random_hypersphere(10_000, 32, seed),
            Preset::Rand5kD20 => gen_random_hypersphere(5_000, 20, seed),
            Preset::Rand1mD100 => gen_random_hypersphere(1_000_000, 100, seed),
            Preset::Gauss10kD32C10 => gen_gauss_clusters(10_000, 32, 10, 10.0, 1.0, seed),
            Preset::Line1k => gen_line(1_000),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(Preset::name).collect();
                Error::usage(format!("unknown preset '{s}', expected one of {}", names.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::l2;

    fn norm(x: &[f32]) -> f64 {
        x.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }

    #[test]
    fn hypersphere_inside_ball_and_deterministic() {
        let a = gen_random_hypersphere(2000, 7, 3).unwrap();
        assert!(a.rows().all(|r| norm(r) <= 1.0 + 1e-6));
        let b = gen_random_hypersphere(2000, 7, 3).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = gen_random_hypersphere(2000, 7, 4).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn hypersphere_mean_norm_moment() {
        // E[U^(1/d)] = d / (d + 1)
        let d = 10;
        let ds = gen_random_hypersphere(100_000, d, 42).unwrap();
        let mean = ds.rows().map(norm).sum::<f64>() / ds.len() as f64;
        assert!((mean - d as f64 / (d as f64 + 1.0)).abs() < 1e-2, "{mean}");
    }

    #[test]
    fn gauss_zero_sigma_hits_centers() {
        let g = gen_gauss_clusters_labeled(100, 4, 3, 10.0, 0.0, 1).unwrap();
        for (row, &c) in g.dataset.rows().zip(&g.labels) {
            assert_eq!(row, g.centers[c].as_slice());
        }
        assert!(g.centers.iter().flatten().all(|&x| (0.0..=10.0).contains(&x)));
    }

    #[test]
    fn gauss_single_cluster_mean_near_center() {
        let n = 20_000;
        let g = gen_gauss_clusters_labeled(n, 5, 1, 10.0, 1.0, 9).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for j in 0..5 {
            let mean = g.dataset.rows().map(|r| f64::from(r[j])).sum::<f64>() / n as f64;
            assert!((mean - f64::from(g.centers[0][j])).abs() < bound);
        }
    }

    #[test]
    fn gauss_preset_is_well_separated() {
        let g = gen_gauss_clusters_labeled(10_000, 32, 10, 10.0, 1.0, 42).unwrap();
        let mut min_gap = f32::INFINITY;
        for a in 0..10 {
            for b in a + 1..10 {
                min_gap = min_gap.min(l2(&g.centers[a], &g.centers[b]));
            }
        }
        assert!(min_gap > 6.0, "min center gap {min_gap}");
    }

    #[test]
    fn split_partitions_rows() {
        let ds = gen_line(50).unwrap();
        let s = split_queries_with_ids(&ds, 10, 5).unwrap();
        assert_eq!(s.reference.len() + s.queries.len(), 50);
        let mut all: Vec<f32> = s.reference.as_slice().to_vec();
        all.extend_from_slice(s.queries.as_slice());
        all.sort_by(f32::total_cmp);
        assert_eq!(all, ds.as_slice());
        for (q, &id) in s.queries.rows().zip(&s.query_ids) {
            assert_eq!(q, ds.row(id));
        }
        assert_eq!(split_queries_with_ids(&ds, 10, 5).unwrap(), s);
        assert!(split_queries(&ds, 50, 5).is_err());
        assert!(split_queries(&ds, 0, 5).is_err());
    }

    #[test]
    fn perturbation_has_exact_length() {
        let ds = gen_random_hypersphere(200, 16, 1).unwrap();
        let qs = QuerySet::new(ds);
        let same = perturb_queries(&qs, 0.0, 2).unwrap();
        assert_eq!(same, qs);
        for delta in [0.1, 0.5, 2.0] {
            let moved = perturb_queries(&qs, delta, 2).unwrap();
            for (a, b) in qs.rows().zip(moved.rows()) {
                assert!((f64::from(l2(a, b)) - delta).abs() < 1e-5);
            }
        }
        assert!(perturb_queries(&qs, -1.0, 2).is_err());
    }

    #[test]
    fn presets_round_trip_names() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert!("nope".parse::<Preset>().is_err());
    }
}
