//! Command-line front end for `dpg-bench`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    build_index, hardness_csv, minhops_csv, search_sweep, sweep_csv, BuildConfig, SweepConfig,
};
use crate::error::{Error, Result};
use crate::hardness::{hardness_report, mean_min_hops_histogram, HardnessOptions};
use crate::model::QuerySet;
use crate::oracle::build_ground_truth;
use crate::vecio::{load_ground_truth, load_index, read_fvecs, save_ground_truth, save_index, write_fvecs};
use crate::workload::{
    gen_gauss_clusters, gen_line, gen_random_hypersphere, perturb_queries, split_queries, Preset,
};

#[derive(Debug, Parser)]
#[command(name = "dpg-bench", version, about = "Build and benchmark graph-based ANN indexes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (and optionally held-out queries).
    Gen(GenArgs),
    /// Exact ground truth and brute-force baseline timing.
    Gt(GtArgs),
    /// Build a kgraph, dpg-angular or dpg-counting index.
    Build(BuildArgs),
    /// Sweep the pool size L and report recall, speedup and points accessed.
    Search(SearchArgs),
    /// Relative Contrast and LID of a workload.
    Hardness(HardnessArgs),
    /// Mean minHops histogram of an index for the queries' kNN sets.
    Minhops(MinhopsArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Named configuration, e.g. rand-10k-d32, gauss-10k-d32-c10, line-1k.
    #[arg(long, conflicts_with = "kind")]
    pub preset: Option<String>,
    /// Generator when no preset is given: rand, gauss or line.
    #[arg(long)]
    pub kind: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub d: usize,
    #[arg(long, default_value_t = 10)]
    pub clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    pub box_hi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Hold out this many random points as queries (written to --query-out).
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long, requires = "queries")]
    pub query_out: Option<PathBuf>,
    /// Move every held-out query by this distance in a random direction.
    #[arg(long, requires = "queries")]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GtArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Base path; writes <out>.ivecs, <out>.fvecs and <out>.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "dpg-counting")]
    pub algo: String,
    #[arg(long, default_value_t = 20)]
    pub kappa: usize,
    /// K of the K-NN graph (default 40 for kgraph, 2*kappa for dpg).
    #[arg(long = "K")]
    pub knn_k: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.002)]
    pub zeta: f64,
    #[arg(long, default_value_t = 30)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Ground-truth base path as written by `gt`.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Pool sizes L to sweep, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80,160,320")]
    pub pool: Vec<usize>,
    /// Random entry points p per query.
    #[arg(long, default_value_t = 10)]
    pub entries: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HardnessArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Neighbors per query for the LID estimate.
    #[arg(long, default_value_t = 100)]
    pub lid_k: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MinhopsArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Use only the first this-many queries.
    #[arg(long)]
    pub max_queries: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn read_queries(path: &Path) -> Result<QuerySet> {
    read_fvecs(path).map(QuerySet::new)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Gt(a) => cmd_gt(a),
        Command::Build(a) => cmd_build(a),
        Command::Search(a) => cmd_search(a),
        Command::Hardness(a) => cmd_hardness(a),
        Command::Minhops(a) => cmd_minhops(a),
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let dataset = match (&a.preset, a.kind.as_deref()) {
        (Some(name), _) => name.parse::<Preset>()?.generate(a.seed)?,
        (None, Some("rand")) => gen_random_hypersphere(a.n, a.d, a.seed)?,
        (None, Some("gauss")) => gen_gauss_clusters(a.n, a.d, a.clusters, a.box_hi, a.sigma, a.seed)?,
        (None, Some("line")) => gen_line(a.n)?,
        (None, Some(other)) => {
            return Err(Error::usage(format!("unknown kind '{other}', expected rand, gauss or line")))
        }
        (None, None) => return Err(Error::usage("either --preset or --kind is required")),
    };
    match a.queries {
        None => write_fvecs(&dataset, &a.out)?,
        Some(m) => {
            let query_out = a
                .query_out
                .ok_or_else(|| Error::usage("--queries needs --query-out"))?;
            let (reference, mut queries) = split_queries(&dataset, m, a.seed)?;
            if let Some(delta) = a.delta {
                queries = perturb_queries(&queries, delta, a.seed)?;
            }
            write_fvecs(&reference, &a.out)?;
            write_fvecs(&queries, &query_out)?;
        }
    }
    Ok(())
}

fn cmd_gt(a: GtArgs) -> Result<()> {
    let dataset = read_fvecs(&a.data)?;
    let queries = read_queries(&a.queries)?;
    let gt = build_ground_truth(&dataset, &queries, a.k)?;
    save_ground_truth(&gt, &a.out)?;
    println!("queries={} k={} baseline_secs={:.6e}", gt.len(), gt.k, gt.baseline_time);
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<()> {
    let dataset = read_fvecs(&a.data)?;
    let config = BuildConfig {
        algo: a.algo.parse()?,
        knn_k: a.knn_k,
        kappa: a.kappa,
        sample_rate: a.rho,
        termination: a.zeta,
        max_iters: a.max_iters,
        seed: a.seed,
        threads: a.threads,
    };
    let outcome = build_index(&dataset, &config)?;
    save_index(&outcome.graph, &a.out)?;
    println!(
        "algo={} seed={} n={} edges={} build_secs={:.3} index_bytes={}",
        config.algo.name(),
        config.seed,
        dataset.len(),
        outcome.graph.edge_count(),
        outcome.build_secs,
        outcome.index_bytes
    );
    Ok(())
}

fn cmd_search(a: SearchArgs) -> Result<()> {
    let dataset = read_fvecs(&a.data)?;
    let graph = load_index(&a.index)?;
    let queries = read_queries(&a.queries)?;
    let gt = load_ground_truth(&a.gt)?;
    let config = SweepConfig {
        k: a.k,
        pool_sizes: a.pool,
        entry_count: a.entries,
        seed: a.seed,
    };
    let rows = search_sweep(&dataset, &graph, &queries, &gt, &config)?;
    let provenance = format!(
        "dpg-bench search seed={} entries={} n={} queries={} index={}",
        a.seed,
        a.entries,
        dataset.len(),
        queries.len(),
        a.index.display()
    );
    write_text(&a.out, &sweep_csv(&rows, &provenance))
}

fn cmd_hardness(a: HardnessArgs) -> Result<()> {
    let dataset = read_fvecs(&a.data)?;
    let queries = read_queries(&a.queries)?;
    let opts = HardnessOptions {
        seed: a.seed,
        ..HardnessOptions::default()
    };
    let report = hardness_report(&dataset, &queries, a.k, a.lid_k, &opts)?;
    let provenance = format!(
        "dpg-bench hardness seed={} n={} queries={}",
        a.seed,
        dataset.len(),
        queries.len()
    );
    write_text(&a.out, &hardness_csv(&report, &provenance))
}

fn cmd_minhops(a: MinhopsArgs) -> Result<()> {
    let graph = load_index(&a.index)?;
    let gt = load_ground_truth(&a.gt)?;
    let take = a.max_queries.unwrap_or(gt.len()).min(gt.len());
    if take == 0 {
        return Err(Error::usage("no queries selected"));
    }
    let truths: Vec<Vec<u32>> = (0..take).map(|q| gt.ids(q).collect()).collect();
    if let Some(bad) = truths.iter().flatten().find(|&&id| id as usize >= graph.len()) {
        return Err(Error::usage(format!(
            "ground truth id {bad} out of range for index of {} nodes",
            graph.len()
        )));
    }
    let hist = mean_min_hops_histogram(&graph, &truths)?;
    let provenance = format!(
        "dpg-bench minhops queries={take} n={} index={}",
        graph.len(),
        a.index.display()
    );
    write_text(&a.out, &minhops_csv(&hist, &provenance))
}
