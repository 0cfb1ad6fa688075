//! Measurement protocol: index builds, search-parameter sweeps, and CSV reports.
//!
//! Search sweeps always run on the calling thread. For each query `i` the entry
//! points are drawn with seed `seed + i`, so every pool size in a sweep starts
//! from the same entries.

use std::fmt::Write as _;
use std::time::Instant;

use crate::dpg::{dpg_from_knn, AngularObjective, DiversifyMethod, DpgParams};
use crate::error::{Error, Result};
use crate::hardness::{HardnessReport, MinHopsHistogram};
use crate::model::{DenseDataset, NeighborGraph, QuerySet, SearchParams};
use crate::nndescent::{build_knn_graph, NnDescentParams};
use crate::oracle::GroundTruth;
use crate::search::{recall, GraphSearcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    KGraph,
    DpgAngular,
    DpgCounting,
}

impl Algo {
    pub fn name(&self) -> &'static str {
        match self {
            Algo::KGraph => "kgraph",
            Algo::DpgAngular => "dpg-angular",
            Algo::DpgCounting => "dpg-counting",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kgraph" => Ok(Algo::KGraph),
            "dpg-angular" => Ok(Algo::DpgAngular),
            "dpg-counting" => Ok(Algo::DpgCounting),
            other => Err(Error::usage(format!(
                "unknown algorithm '{other}', expected kgraph, dpg-angular or dpg-counting"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    pub algo: Algo,
    /// K of the K-NN graph. Defaults to 40 for KGraph and `2 * kappa` for DPG.
    pub knn_k: Option<usize>,
    pub kappa: usize,
    pub sample_rate: f64,
    pub termination: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// Worker threads for construction; 1 builds serially.
    pub threads: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        let nn = NnDescentParams::default();
        Self {
            algo: Algo::DpgCounting,
            knn_k: None,
            kappa: 20,
            sample_rate: nn.sample_rate,
            termination: nn.termination,
            max_iters: nn.max_iters,
            seed: nn.seed,
            threads: 1,
        }
    }
}

impl BuildConfig {
    pub fn new(algo: Algo) -> Self {
        Self { algo, ..Self::default() }
    }

    pub fn knn_params(&self) -> NnDescentParams {
        let k = self.knn_k.unwrap_or(match self.algo {
            Algo::KGraph => 40,
            _ => 2 * self.kappa,
        });
        NnDescentParams {
            k,
            sample_rate: self.sample_rate,
            termination: self.termination,
            max_iters: self.max_iters,
            seed: self.seed,
            parallel: self.threads > 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BuildOutcome {
    pub graph: NeighborGraph,
    pub build_secs: f64,
    pub index_bytes: usize,
}

pub fn build_index(dataset: &DenseDataset, config: &BuildConfig) -> Result<BuildOutcome> {
    if config.threads == 0 {
        return Err(Error::usage("threads must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::usage(format!("cannot start thread pool: {e}")))?;
    let knn_params = config.knn_params();
    let start = Instant::now();
    let graph = pool.install(|| -> Result<NeighborGraph> {
        let knn = build_knn_graph(dataset, &knn_params)?;
        let method = match config.algo {
            Algo::KGraph => return Ok(knn),
            Algo::DpgAngular => DiversifyMethod::Angular,
            Algo::DpgCounting => DiversifyMethod::Counting,
        };
        let params = DpgParams {
            kappa: config.kappa,
            method,
            objective: AngularObjective::Maximize,
            knn: knn_params,
        };
        params.validate()?;
        dpg_from_knn(dataset, &knn, &params)
    })?;
    let build_secs = start.elapsed().as_secs_f64();
    let index_bytes = graph.index_bytes();
    Ok(BuildOutcome {
        graph,
        build_secs,
        index_bytes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub pool_size: usize,
    pub k: usize,
    pub mean_recall: f64,
    pub speedup: f64,
    pub mean_distance_computations: f64,
    pub pct_points_accessed: f64,
    pub mean_hops: f64,
    pub mean_query_secs: f64,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub k: usize,
    pub pool_sizes: Vec<usize>,
    pub entry_count: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: 20,
            pool_sizes: vec![20, 40, 80, 160, 320],
            entry_count: SearchParams::default().entry_count,
            seed: 42,
        }
    }
}

/// Per-query recall and distance counts for one pool size.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcomes {
    pub recalls: Vec<f64>,
    pub distance_computations: Vec<usize>,
    pub hops: Vec<usize>,
    pub total_secs: f64,
}

fn check_workload(dataset: &DenseDataset, graph: &NeighborGraph, queries: &QuerySet, gt: &GroundTruth, k: usize) -> Result<()> {
    queries.check_against(dataset)?;
    if graph.len() != dataset.len() {
        return Err(Error::usage(format!(
            "index has {} nodes but dataset has {} points",
            graph.len(),
            dataset.len()
        )));
    }
    if gt.len() != queries.len() {
        return Err(Error::usage(format!(
            "ground truth covers {} queries, query file has {}",
            gt.len(),
            queries.len()
        )));
    }
    if gt.k != k {
        return Err(Error::usage(format!("ground truth has k={}, search asks for k={k}", gt.k)));
    }
    if let Some(bad) = gt.neighbors.iter().flatten().find(|nb| nb.id as usize >= dataset.len()) {
        return Err(Error::usage(format!(
            "ground truth id {} out of range for dataset of {} points",
            bad.id,
            dataset.len()
        )));
    }
    Ok(())
}

/// Runs every query once at pool size `pool_size`.
pub fn run_queries(
    dataset: &DenseDataset,
    graph: &NeighborGraph,
    queries: &QuerySet,
    gt: &GroundTruth,
    pool_size: usize,
    config: &SweepConfig,
) -> Result<QueryOutcomes> {
    check_workload(dataset, graph, queries, gt, config.k)?;
    let mut searcher = GraphSearcher::new(dataset, graph)?;
    let mut out = QueryOutcomes {
        recalls: Vec::with_capacity(queries.len()),
        distance_computations: Vec::with_capacity(queries.len()),
        hops: Vec::with_capacity(queries.len()),
        total_secs: 0.0,
    };
    let base = SearchParams {
        k: config.k,
        pool_size,
        entry_count: config.entry_count,
        seed: config.seed,
    };
    base.validate(dataset.len())?;
    let mut truth = Vec::with_capacity(config.k);
    for (qi, q) in queries.rows().enumerate() {
        let params = SearchParams {
            seed: config.seed.wrapping_add(qi as u64),
            ..base
        };
        let res = searcher.search(q, &params)?;
        truth.clear();
        truth.extend(gt.ids(qi));
        out.recalls.push(recall(&res.ids(), &truth)?);
        out.distance_computations.push(res.stats.distance_computations);
        out.hops.push(res.stats.hops);
        out.total_secs += res.stats.wall_time.as_secs_f64();
    }
    Ok(out)
}

pub fn search_sweep(
    dataset: &DenseDataset,
    graph: &NeighborGraph,
    queries: &QuerySet,
    gt: &GroundTruth,
    config: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if config.pool_sizes.is_empty() {
        return Err(Error::usage("no pool sizes to sweep"));
    }
    let n = dataset.len() as f64;
    let m = queries.len() as f64;
    config
        .pool_sizes
        .iter()
        .map(|&pool_size| {
            let o = run_queries(dataset, graph, queries, gt, pool_size, config)?;
            let mean_n = o.distance_computations.iter().sum::<usize>() as f64 / m;
            let mean_query_secs = (o.total_secs / m).max(f64::MIN_POSITIVE);
            Ok(SweepRow {
                pool_size,
                k: config.k,
                mean_recall: o.recalls.iter().sum::<f64>() / m,
                speedup: gt.baseline_time / mean_query_secs,
                mean_distance_computations: mean_n,
                pct_points_accessed: mean_n / n * 100.0,
                mean_hops: o.hops.iter().sum::<usize>() as f64 / m,
                mean_query_secs,
            })
        })
        .collect()
}

/// Formats with 6 significant digits, dropping trailing zeros.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x.is_infinite() {
            if x > 0.0 { "inf".into() } else { "-inf".into() }
        } else {
            "0".into()
        };
    }
    let mag = x.abs().log10().floor() as i32;
    let s = if (-4..15).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // rounding can carry into a new digit (9.999995 -> 10.00000); recheck
        let digits = s.chars().filter(char::is_ascii_digit).collect::<String>();
        let significant = digits.trim_start_matches('0').len();
        if significant > 6 && decimals > 0 {
            format!("{x:.prec$}", prec = decimals - 1)
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exp) = match s.find('e') {
        Some(i) => s.split_at(i),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') {
        mantissa.trim_end_matches('0').trim_end_matches('.')
    } else {
        mantissa
    };
    format!("{mantissa}{exp}")
}

pub const SWEEP_COLUMNS: &str = "L,k,mean_recall,speedup,mean_N,pct_points_accessed,mean_hops";

/// Sweep rows as CSV. `#` lines carry provenance; `speedup` is the only wall-clock column.
pub fn sweep_csv(rows: &[SweepRow], provenance: &str) -> String {
    let mut out = String::new();
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{SWEEP_COLUMNS}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.pool_size,
            r.k,
            sig6(r.mean_recall),
            sig6(r.speedup),
            sig6(r.mean_distance_computations),
            sig6(r.pct_points_accessed),
            sig6(r.mean_hops)
        );
    }
    out
}

pub const HARDNESS_COLUMNS: &str =
    "k,lid_neighbors,rc,rc_k,lid,rc_queries_used,rc_excluded,lid_queries_used,lid_dropped,mean_sample_size";

pub fn hardness_csv(report: &HardnessReport, provenance: &str) -> String {
    let mut out = String::new();
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{HARDNESS_COLUMNS}");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        report.rc.k,
        report.lid.neighbors_per_query,
        sig6(report.rc.rc),
        sig6(report.rc.rc_k),
        sig6(report.lid.lid),
        report.rc.queries_used,
        report.rc.excluded,
        report.lid.queries_used,
        report.lid.dropped,
        report.rc.mean_sample_size
    );
    out
}

pub const MINHOPS_COLUMNS: &str = "hops,fraction";

/// One row per finite hop count, then an `inf` row for unreachable nodes.
pub fn minhops_csv(hist: &MinHopsHistogram, provenance: &str) -> String {
    let mut out = String::new();
    for line in provenance.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{MINHOPS_COLUMNS}");
    for (h, f) in hist.fractions.iter().enumerate() {
        let _ = writeln!(out, "{h},{}", sig6(*f));
    }
    let _ = writeln!(out, "inf,{}", sig6(hist.unreachable));
    out
}
