use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use grafica::clustering::KMeansOptions;
use grafica::filter::{CForm, FilterCoefficients};
use grafica::graph::AttributedGraph;
use grafica::io::{
    generate_sbm, load_content_cites, load_csv_dataset, read_results, response_grid,
    write_csv_dataset, write_filter_response, write_results, write_sweep, SbmParams,
};
use grafica::metrics::MetricReport;
use grafica::pipeline::{
    grafica_run, run_baseline, sweep, Baseline, GammaMode, RunConfig, RunResult, SelectionMode,
};

mod grid;

use grid::Grid;

#[derive(Parser)]
#[command(
    name = "grafica",
    version,
    about = "Attributed graph clustering with learned polynomial graph filters"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the alternating filter / partition optimization.
    Cluster(ClusterArgs),
    /// Run a reference clustering method.
    Baseline(BaselineArgs),
    /// Run every (T, alpha) cell of a grid and report the best.
    Sweep(SweepArgs),
    /// Generate an attributed stochastic block model as nodes.csv / edges.csv.
    Synth(SynthArgs),
    /// Tabulate the frequency response of a filter over [0, 2].
    FilterResponse(ResponseArgs),
    /// Score a result document against dataset labels or another result.
    Eval(EvalArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    ContentCites,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    GroundTruthNmi,
    InternalCost,
    ConsecutiveNmi,
}

#[derive(Clone, Copy, ValueEnum)]
enum CMatrix {
    Derived,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    KmeansAttrs,
    ScAttrs,
    ScGraph,
}

#[derive(Args)]
struct DatasetArgs {
    /// Input format; inferred from the path flags when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    content: Option<PathBuf>,
    #[arg(long)]
    cites: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Scale every attribute row to unit L2 norm.
    #[arg(long)]
    row_normalize: bool,
}

#[derive(Args)]
struct KMeansArgs {
    /// k-means++ restarts per clustering.
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    /// Lloyd iterations per restart.
    #[arg(long, default_value_t = 300)]
    kmeans_iters: usize,
}

impl KMeansArgs {
    fn options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.restarts,
            max_iter: self.kmeans_iters,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Number of clusters (defaults to the number of label classes).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Candidate selection rule [default: ground-truth-nmi with labels, else internal-cost].
    #[arg(long, value_enum)]
    selection: Option<Selection>,
    /// Fixed association/cut balance instead of the adaptive ratio.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum, default_value = "derived")]
    c_matrix: CMatrix,
    /// Re-derive gamma after every outer iteration.
    #[arg(long)]
    recompute_gamma: bool,
    /// Unit-normalize embedding rows before k-means.
    #[arg(long)]
    normalize_embedding: bool,
    /// Outer iteration cap.
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    /// Convergence tolerance on the selection score.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[command(flatten)]
    kmeans: KMeansArgs,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Filter order T.
    #[arg(long, default_value_t = 3)]
    t: usize,
    /// Graph weight alpha.
    #[arg(long, default_value_t = 0.0, conflicts_with = "alpha_grid")]
    alpha: f64,
    /// Try every alpha in `start:stop:step` (or a comma list) and keep the best run.
    #[arg(long, value_parser = grid::parse_float_grid)]
    alpha_grid: Option<Grid<f64>>,
    /// Result document path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Filter orders, `start:stop:step` or a comma list.
    #[arg(long, value_parser = grid::parse_order_grid, default_value = "3")]
    t_grid: Grid<usize>,
    /// Alpha values, `start:stop:step` or a comma list.
    #[arg(long, value_parser = grid::parse_float_grid, default_value = "0:0.1:0.01")]
    alpha_grid: Grid<f64>,
    /// Sweep table path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    kmeans: KMeansArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, default_value_t = 0.2)]
    p_in: f64,
    #[arg(long, default_value_t = 0.02)]
    p_out: f64,
    /// Attribute dimension (at least k - 1).
    #[arg(long, default_value_t = 8)]
    dim: usize,
    /// Distance between block centers.
    #[arg(long, default_value_t = 5.0)]
    sep: f64,
    /// Attribute noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ResponseArgs {
    /// Take the filter from a result document.
    #[arg(long, required_unless_present = "coeffs", conflicts_with = "coeffs")]
    results: Option<PathBuf>,
    /// Comma-separated coefficients h_0,h_1,... (scaled to unit norm).
    #[arg(long, value_parser = grid::parse_coefficients)]
    coeffs: Option<Grid<f64>>,
    /// Grid points over [0, 2].
    #[arg(long, default_value_t = 201)]
    points: usize,
    /// Output path (standard output when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Result document to score.
    #[arg(long)]
    results: PathBuf,
    /// Compare against this result's partition instead of dataset labels.
    #[arg(long)]
    against: Option<PathBuf>,
    #[command(flatten)]
    data: DatasetArgs,
}

/// Bad invocation detected after argument parsing; exits with status 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn existing(path: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    let path = path
        .as_ref()
        .ok_or_else(|| usage(format!("missing --{flag}")))?;
    if !path.exists() {
        return Err(usage(format!("--{flag} {}: no such file", path.display())));
    }
    Ok(path.clone())
}

impl DatasetArgs {
    fn is_given(&self) -> bool {
        self.content.is_some()
            || self.cites.is_some()
            || self.nodes.is_some()
            || self.edges.is_some()
    }

    fn load(&self) -> Result<AttributedGraph> {
        let format = match self.format {
            Some(f) => f,
            None if self.content.is_some() || self.cites.is_some() => Format::ContentCites,
            None if self.nodes.is_some() || self.edges.is_some() => Format::Csv,
            None => {
                return Err(usage(
                    "no dataset given; use --content/--cites or --nodes/--edges",
                ))
            }
        };
        let mut graph = match format {
            Format::ContentCites => {
                let ds = load_content_cites(
                    &existing(&self.content, "content")?,
                    &existing(&self.cites, "cites")?,
                )?;
                info!(
                    "loaded {} nodes, {} edges, {} classes; skipped {} of {} citations",
                    ds.graph.n_nodes(),
                    ds.graph.adjacency().n_edges(),
                    ds.class_names.len(),
                    ds.skipped_citations,
                    ds.citation_lines
                );
                ds.graph
            }
            Format::Csv => load_csv_dataset(
                &existing(&self.nodes, "nodes")?,
                &existing(&self.edges, "edges")?,
            )?,
        };
        if self.row_normalize {
            graph.row_normalize_attributes();
        }
        Ok(graph)
    }
}

fn cluster_count(k: Option<usize>, graph: &AttributedGraph) -> Result<usize> {
    k.or_else(|| graph.n_classes())
        .ok_or_else(|| usage("--k is required when the dataset has no labels"))
}

impl RunArgs {
    fn config(&self, graph: &AttributedGraph, t_order: usize, alpha: f64) -> Result<RunConfig> {
        let selection = match self.selection {
            Some(Selection::GroundTruthNmi) => SelectionMode::GroundTruthNmi,
            Some(Selection::InternalCost) => SelectionMode::InternalCost,
            Some(Selection::ConsecutiveNmi) => SelectionMode::ConsecutiveNmi,
            None if graph.labels().is_some() => SelectionMode::GroundTruthNmi,
            None => SelectionMode::InternalCost,
        };
        let cfg = RunConfig {
            alpha,
            gamma_mode: self
                .gamma
                .map_or(GammaMode::AdaptiveRatio, GammaMode::Fixed),
            selection,
            seed: self.seed,
            max_outer_iters: self.max_iters,
            convergence_tol: self.tol,
            kmeans: self.kmeans.options(),
            c_form: match self.c_matrix {
                CMatrix::Derived => CForm::Derived,
                CMatrix::Literal => CForm::Literal,
            },
            recompute_gamma: self.recompute_gamma,
            normalize_embedding: self.normalize_embedding,
            ..RunConfig::new(cluster_count(self.k, graph)?, t_order)
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn metrics_text(m: Option<&MetricReport>) -> String {
    match m {
        Some(m) => format!("NMI={:.4} ARI={:.4}", m.nmi, m.ari),
        None => "NMI=n/a ARI=n/a".into(),
    }
}

fn summarize(r: &RunResult) {
    let mut line = format!("{} {}", r.method, metrics_text(r.metrics.as_ref()));
    if let Some(cfg) = &r.config {
        line += &format!(
            " iterations={} converged={} T={} alpha={} selection={}",
            r.iterations,
            r.converged,
            cfg.t_order,
            cfg.alpha,
            cfg.selection.as_str()
        );
    }
    if let Some(cost) = r.history.last().map(|h| h.cost) {
        line += &format!(" cost={cost:.6}");
    }
    println!("{line}");
}

fn save(result: &RunResult, out: &Option<PathBuf>) -> Result<()> {
    if let Some(path) = out {
        write_results(result, path)?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let graph = args.data.load()?;
    let result = match &args.alpha_grid {
        None => grafica_run(&graph, &args.run.config(&graph, args.t, args.alpha)?)?,
        Some(alphas) => {
            let base = args.run.config(&graph, args.t, alphas[0])?;
            let table = sweep(&graph, &base, &[args.t], alphas)?;
            for row in &table.rows {
                info!(
                    "alpha={} NMI={:?} cost={:?}",
                    row.alpha, row.nmi, row.final_cost
                );
            }
            table.best_result
        }
    };
    summarize(&result);
    save(&result, &args.out)
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let graph = args.data.load()?;
    let base = args
        .run
        .config(&graph, args.t_grid[0], args.alpha_grid[0])?;
    let table = sweep(&graph, &base, &args.t_grid, &args.alpha_grid)?;
    for row in &table.rows {
        let nmi = row.nmi.map_or("n/a".into(), |v| format!("{v:.4}"));
        let ari = row.ari.map_or("n/a".into(), |v| format!("{v:.4}"));
        let cost = row.final_cost.map_or("n/a".into(), |v| format!("{v:.6}"));
        println!(
            "T={} alpha={} NMI={nmi} ARI={ari} cost={cost} iterations={}",
            row.t_order, row.alpha, row.iterations
        );
    }
    print!("best: ");
    summarize(&table.best_result);
    if let Some(path) = &args.out {
        write_sweep(&table, path)?;
    }
    Ok(())
}

fn baseline(args: BaselineArgs) -> Result<()> {
    let graph = args.data.load()?;
    let k = cluster_count(args.k, &graph)?;
    if k == 0 || k > graph.n_nodes() {
        return Err(usage(format!("--k {k} must be in 1..={}", graph.n_nodes())));
    }
    let method = match args.method {
        Method::KmeansAttrs => Baseline::KmeansAttrs,
        Method::ScAttrs => Baseline::ScAttrs,
        Method::ScGraph => Baseline::ScGraph,
    };
    let result = run_baseline(&graph, method, k, args.seed, &args.kmeans.options())?;
    summarize(&result);
    save(&result, &args.out)
}

fn synth(args: SynthArgs) -> Result<()> {
    let params = SbmParams {
        n_nodes: args.n,
        k: args.k,
        p_in: args.p_in,
        p_out: args.p_out,
        attr_dim: args.dim,
        center_separation: args.sep,
        attr_noise_sigma: args.sigma,
        seed: args.seed,
    };
    params.validate().map_err(|e| usage(e.to_string()))?;
    let graph = generate_sbm(&params)?;
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let nodes = args.out_dir.join("nodes.csv");
    let edges = args.out_dir.join("edges.csv");
    write_csv_dataset(&graph, &nodes, &edges)?;
    println!(
        "wrote {} nodes and {} edges to {}",
        graph.n_nodes(),
        graph.adjacency().n_edges(),
        args.out_dir.display()
    );
    Ok(())
}

fn filter_response(args: ResponseArgs) -> Result<()> {
    let h = match (&args.results, &args.coeffs) {
        (Some(path), _) => read_results(path)?.h,
        (None, Some(c)) => {
            FilterCoefficients::normalized(c.clone()).map_err(|e| usage(e.to_string()))?
        }
        (None, None) => return Err(usage("give --results or --coeffs")),
    };
    if args.points == 0 {
        return Err(usage("--points must be positive"));
    }
    let grid = response_grid(args.points);
    match &args.out {
        Some(path) => write_filter_response(&h, &grid, path)?,
        None => {
            for (l, v) in grid.iter().zip(grafica::filter::filter_response(&h, &grid)) {
                println!("{l}\t{v}");
            }
        }
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let result = read_results(&args.results)?;
    let truth: Vec<usize> = match (&args.against, args.data.is_given()) {
        (Some(path), _) => read_results(path)?.partition.labels().to_vec(),
        (None, true) => {
            let graph = args.data.load()?;
            graph
                .labels()
                .ok_or_else(|| anyhow!("dataset has no labels to compare against"))?
                .to_vec()
        }
        (None, false) => return Err(usage("give --against or a labelled dataset")),
    };
    let report = MetricReport::compare(&truth, result.partition.labels())?;
    println!("{} {}", result.method, metrics_text(Some(&report)));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Baseline(a) => baseline(a),
        Command::Sweep(a) => run_sweep(a),
        Command::Synth(a) => synth(a),
        Command::FilterResponse(a) => filter_response(a),
        Command::Eval(a) => eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = matches!(
                e.downcast_ref::<grafica::Error>(),
                Some(grafica::Error::Config(_))
            );
            if e.is::<UsageError>() || config_error {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
