//! Command-line front end: particle-filter runs, the
//! grow/prune/change/swap MCMC baseline, exact enumeration of small
//! instances, configuration sweeps, and prior tree statistics.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use treesmc::data::{self, Dataset, DatasetSpec};
use treesmc::eval::{evaluate, evaluate_probs, Metrics};
use treesmc::mcmc::{mcmc_run, McmcConfig, MoveKind};
use treesmc::model::{prior_tree_stats, DmLikelihood, Hyperparams};
use treesmc::oracle::enumerate_posterior;
use treesmc::run::{
    append_results_row, config_hash, summarize, timed, write_diagnostics_csv, write_json,
    write_trace_csv, RunManifest, SweepRow, Timings,
};
use treesmc::smc::{
    islands_run, Expansion, Priority, ProposalKind, ResampleScheme, SmcConfig,
};

#[derive(Parser)]
#[command(
    name = "treesmc",
    version,
    about = "Bayesian decision trees by sequential Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the particle filter and report marginal and test metrics.
    Smc(SmcCmd),
    /// Run the grow/prune/change/swap Metropolis-Hastings baseline.
    Mcmc(McmcCmd),
    /// Enumerate the exact posterior of a small instance.
    Oracle(OracleCmd),
    /// Run every configuration in a grid file, appending results rows.
    Sweep(SweepCmd),
    /// Draw trees from the data-dependent prior and summarize shapes.
    SamplePrior(SamplePriorCmd),
}

/// Flags describing one labeled table.
#[derive(Args)]
struct TableArgs {
    /// Labeled CSV-like file (no header).
    #[arg(long)]
    data: PathBuf,

    /// Zero-based label column; defaults to the last column.
    #[arg(long)]
    label_col: Option<usize>,

    /// Field delimiter: one byte, or "tab". Runs of spaces collapse.
    #[arg(long, default_value = ",")]
    delimiter: String,
}

impl TableArgs {
    fn delimiter_byte(&self) -> anyhow::Result<u8> {
        if self.delimiter == "tab" {
            return Ok(b'\t');
        }
        match self.delimiter.as_bytes() {
            [b] => Ok(*b),
            _ => Err(treesmc::Error::invalid_parameter(format!(
                "delimiter must be a single byte or \"tab\", got {:?}",
                self.delimiter
            ))
            .into()),
        }
    }

    fn load(&self) -> anyhow::Result<Dataset> {
        let delimiter = self.delimiter_byte()?;
        Ok(data::load_csv(&self.data, self.label_col, delimiter)?)
    }
}

/// Flags describing a train/test pair: either two files or a seeded
/// split of one file.
#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    table: TableArgs,

    /// Held-out table; when absent, --split-frac splits --data.
    #[arg(long)]
    test: Option<PathBuf>,

    /// Labels in a separate file (one per row) aligned with --data.
    #[arg(long)]
    labels_file: Option<PathBuf>,

    /// Label file paired with --test.
    #[arg(long)]
    test_labels_file: Option<PathBuf>,

    /// Training fraction when splitting --data.
    #[arg(long, default_value_t = 0.7)]
    split_frac: f64,

    #[arg(long, default_value_t = 1)]
    split_seed: u64,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<(Dataset, Dataset)> {
        let spec = DatasetSpec {
            data_path: self.table.data.clone(),
            test_path: self.test.clone(),
            labels_path: self.labels_file.clone(),
            test_labels_path: self.test_labels_file.clone(),
            label_col: self.table.label_col,
            delimiter: self.table.delimiter_byte()?,
            split_fraction: self.split_frac,
            split_seed: self.split_seed,
        };
        Ok(data::load(&spec)?)
    }
}

#[derive(Args)]
struct HyperArgs {
    /// Total Dirichlet concentration over classes.
    #[arg(long, default_value_t = 5.0)]
    alpha: f64,

    /// Split probability at depth zero.
    #[arg(long, default_value_t = 0.95)]
    alpha_split: f64,

    /// Depth-decay exponent of the split probability.
    #[arg(long, default_value_t = 0.5)]
    beta_split: f64,
}

impl HyperArgs {
    fn build(&self) -> anyhow::Result<Hyperparams> {
        Ok(Hyperparams::new(self.alpha, self.alpha_split, self.beta_split)?)
    }
}

#[derive(Args)]
struct SmcArgs {
    /// Total particles, shared evenly across islands.
    #[arg(long, default_value_t = 1000)]
    particles: usize,

    #[arg(long, default_value_t = 1)]
    islands: usize,

    #[arg(long, default_value = "prior")]
    proposal: ProposalKind,

    #[arg(long, default_value = "node")]
    expansion: Expansion,

    /// Node-wise candidate order.
    #[arg(long, default_value = "breadth")]
    priority: Priority,

    #[arg(long, default_value = "multinomial")]
    resampler: ResampleScheme,

    /// Resample when ESS drops below this fraction of the island size.
    #[arg(long, default_value_t = 0.1)]
    ess_frac: f64,

    #[arg(long, default_value_t = 5000)]
    max_stages: usize,

    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl SmcArgs {
    fn config(&self) -> SmcConfig {
        SmcConfig {
            num_particles: self.particles,
            num_islands: self.islands,
            proposal: self.proposal,
            expansion: self.expansion,
            priority: self.priority,
            resampler: self.resampler,
            ess_threshold_fraction: self.ess_frac,
            max_stages: self.max_stages,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct SmcCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    smc: SmcArgs,
    /// Where to write manifest.json, diagnostics.csv, and eval.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct McmcCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,

    #[arg(long, default_value_t = 10_000)]
    iterations: u64,

    /// States before this iteration are excluded from the predictive
    /// average.
    #[arg(long, default_value_t = 0)]
    burn_in: u64,

    /// Keep every k-th iteration in the trace file.
    #[arg(long, default_value_t = 1)]
    trace_every: u64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Where to write manifest.json, trace.csv, and eval.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct OracleCmd {
    #[command(flatten)]
    table: TableArgs,
    #[command(flatten)]
    hyper: HyperArgs,

    /// Abort once enumeration would produce more trees than this.
    #[arg(long, default_value_t = 1_000_000)]
    max_nodes_guard: u64,

    /// Where to write oracle.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Base configuration; grid axes override these one at a time.
    #[command(flatten)]
    base: SmcArgs,

    /// JSON file of value lists to cross, e.g.
    /// {"particles": [100, 1000], "proposal": ["prior", "optimal"]}.
    #[arg(long)]
    grid: PathBuf,

    /// Where to append results.csv.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SamplePriorCmd {
    #[command(flatten)]
    table: TableArgs,
    #[command(flatten)]
    hyper: HyperArgs,

    /// Number of prior draws.
    #[arg(long, default_value_t = 10_000)]
    iterations: u64,

    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Where to write prior_stats.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

/// Caller mistakes (bad flag values or combinations) exit 2, matching
/// the parser's own usage errors; data and runtime failures exit 1.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<treesmc::Error>() {
        Some(treesmc::Error::InvalidParameter(_)) => 2,
        _ => 1,
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Smc(cmd) => run_smc(cmd),
        Command::Mcmc(cmd) => run_mcmc(cmd),
        Command::Oracle(cmd) => run_oracle(cmd),
        Command::Sweep(cmd) => run_sweep(cmd),
        Command::SamplePrior(cmd) => run_sample_prior(cmd),
    }
}

/// --out-dir wins; otherwise the TREESMC_OUT_DIR environment variable
/// supplies a default.
fn resolve_out_dir(flag: Option<PathBuf>) -> Option<PathBuf> {
    flag.or_else(|| std::env::var_os("TREESMC_OUT_DIR").map(PathBuf::from))
}

fn print_metrics(metrics: &Metrics) {
    println!("mean_log_prob = {:.6}", metrics.mean_log_prob);
    println!("accuracy = {:.6}", metrics.accuracy);
}

fn run_smc(cmd: SmcCmd) -> anyhow::Result<()> {
    let (loaded, load_secs) = timed(|| cmd.data.load());
    let (train, test) = loaded?;
    let hyper = cmd.hyper.build()?;
    let config = cmd.smc.config();
    config.validate()?;

    let (run, run_secs) = timed(|| islands_run(&train, &hyper, &config));
    let run = run?;
    let (metrics, predict_secs) = timed(|| -> treesmc::Result<Metrics> {
        let predictor = run.predictor(&hyper)?;
        evaluate(&predictor, &test)
    });
    let metrics = metrics?;

    let completed = run.islands.iter().all(|island| island.completed);
    println!(
        "train_rows = {} test_rows = {} dims = {} classes = {}",
        train.n_rows(),
        test.n_rows(),
        train.n_dims(),
        train.num_classes()
    );
    println!("log_marginal = {:.6}", run.log_marginal);
    println!("completed = {completed}");
    print_metrics(&metrics);
    println!("run_secs = {run_secs:.3}");
    println!("predict_secs = {predict_secs:.3}");

    if let Some(dir) = resolve_out_dir(cmd.out_dir) {
        fs::create_dir_all(&dir)?;
        let mut manifest = RunManifest::new("smc", summarize(&train, Some(&test)), &hyper);
        manifest.smc = Some(&config);
        manifest.log_marginal = Some(run.log_marginal);
        manifest.metrics = Some(metrics);
        manifest.timings = Timings {
            load_secs,
            run_secs,
            predict_secs,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        write_diagnostics_csv(&dir.join("diagnostics.csv"), &run)?;
        write_json(&dir.join("eval.json"), &metrics)?;
        println!("out_dir = {}", dir.display());
    }
    Ok(())
}

fn run_mcmc(cmd: McmcCmd) -> anyhow::Result<()> {
    let (loaded, load_secs) = timed(|| cmd.data.load());
    let (train, test) = loaded?;
    let hyper = cmd.hyper.build()?;
    let config = McmcConfig {
        iterations: cmd.iterations,
        burn_in: cmd.burn_in,
        seed: cmd.seed,
        trace_every: cmd.trace_every,
    };
    config.validate()?;

    let (run, run_secs) = timed(|| mcmc_run(&train, &hyper, &config, Some(&test)));
    let run = run?;
    let probs = run.mean_probs.as_ref().expect("test set was provided");
    let (metrics, predict_secs) = timed(|| evaluate_probs(probs, &test));
    let metrics = metrics?;

    println!(
        "train_rows = {} test_rows = {} dims = {} classes = {}",
        train.n_rows(),
        test.n_rows(),
        train.n_dims(),
        train.num_classes()
    );
    println!("iterations = {}", config.iterations);
    println!(
        "final_log_posterior = {:.6}",
        run.final_state.log_prior() + run.final_state.log_lik()
    );
    println!("final_num_nodes = {}", run.final_state.num_nodes());
    for kind in MoveKind::ALL {
        let i = kind.index();
        println!(
            "accepted[{kind}] = {} / {}",
            run.accepted[i], run.attempted[i]
        );
    }
    print_metrics(&metrics);
    println!("run_secs = {run_secs:.3}");
    println!("predict_secs = {predict_secs:.3}");

    if let Some(dir) = resolve_out_dir(cmd.out_dir) {
        fs::create_dir_all(&dir)?;
        let mut manifest = RunManifest::new("mcmc", summarize(&train, Some(&test)), &hyper);
        manifest.mcmc = Some(&config);
        manifest.metrics = Some(metrics);
        manifest.timings = Timings {
            load_secs,
            run_secs,
            predict_secs,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
        write_trace_csv(&dir.join("trace.csv"), &run.trace)?;
        write_json(&dir.join("eval.json"), &metrics)?;
        println!("out_dir = {}", dir.display());
    }
    Ok(())
}

fn run_oracle(cmd: OracleCmd) -> anyhow::Result<()> {
    let data = cmd.table.load()?;
    let hyper = cmd.hyper.build()?;
    let (posterior, run_secs) =
        timed(|| enumerate_posterior(&data, &hyper, cmd.max_nodes_guard));
    let posterior = posterior?;

    println!(
        "rows = {} dims = {} classes = {}",
        data.n_rows(),
        data.n_dims(),
        data.num_classes()
    );
    println!("trees = {}", posterior.trees.len());
    println!("log_marginal = {:.12}", posterior.log_marginal);
    println!("marginal = {:.12e}", posterior.log_marginal.exp());
    println!("posterior_mean_nodes = {:.6}", posterior.mean_nodes());
    println!("run_secs = {run_secs:.3}");

    if let Some(dir) = resolve_out_dir(cmd.out_dir) {
        fs::create_dir_all(&dir)?;
        let report = serde_json::json!({
            "dataset": summarize(&data, None),
            "hyper": hyper,
            "max_nodes_guard": cmd.max_nodes_guard,
            "trees": posterior.trees.len(),
            "log_marginal": posterior.log_marginal,
            "posterior_mean_nodes": posterior.mean_nodes(),
            "run_secs": run_secs,
        });
        write_json(&dir.join("oracle.json"), &report)?;
        println!("out_dir = {}", dir.display());
    }
    Ok(())
}

fn run_sample_prior(cmd: SamplePriorCmd) -> anyhow::Result<()> {
    let data = cmd.table.load()?;
    let hyper = cmd.hyper.build()?;
    if cmd.iterations == 0 {
        return Err(treesmc::Error::invalid_parameter("need at least one prior draw").into());
    }
    let lik = DmLikelihood::new(hyper.alpha, data.num_classes(), data.n_rows())?;
    let (stats, run_secs) = timed(|| {
        prior_tree_stats(&data, &lik, &hyper, cmd.iterations as usize, cmd.seed)
    });
    let stats = stats?;

    println!(
        "rows = {} dims = {} classes = {}",
        data.n_rows(),
        data.n_dims(),
        data.num_classes()
    );
    println!("draws = {}", stats.draws);
    println!("mean_depth = {:.4} sd_depth = {:.4}", stats.mean_depth, stats.sd_depth);
    println!("mean_nodes = {:.4} sd_nodes = {:.4}", stats.mean_nodes, stats.sd_nodes);
    println!("mean_leaves = {:.4}", stats.mean_leaves);
    println!("run_secs = {run_secs:.3}");

    if let Some(dir) = resolve_out_dir(cmd.out_dir) {
        fs::create_dir_all(&dir)?;
        let report = serde_json::json!({
            "dataset": summarize(&data, None),
            "hyper": hyper,
            "seed": cmd.seed,
            "stats": stats,
            "run_secs": run_secs,
        });
        write_json(&dir.join("prior_stats.json"), &report)?;
        println!("out_dir = {}", dir.display());
    }
    Ok(())
}

/// Value lists crossed to produce sweep configurations. Absent or
/// empty lists fall back to the base flag value.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepGrid {
    particles: Option<Vec<usize>>,
    islands: Option<Vec<usize>>,
    proposal: Option<Vec<ProposalKind>>,
    expansion: Option<Vec<Expansion>>,
    priority: Option<Vec<Priority>>,
    resampler: Option<Vec<ResampleScheme>>,
    ess_frac: Option<Vec<f64>>,
    max_stages: Option<Vec<usize>>,
    seeds: Option<Vec<u64>>,
}

fn grid_configs(grid: &SweepGrid, base: SmcConfig) -> Vec<SmcConfig> {
    let mut configs = vec![base];
    macro_rules! expand_axis {
        ($values:expr, $field:ident) => {
            if let Some(values) = $values.as_ref().filter(|v| !v.is_empty()) {
                configs = configs
                    .iter()
                    .flat_map(|config| {
                        values.iter().map(|value| {
                            let mut next = *config;
                            next.$field = *value;
                            next
                        })
                    })
                    .collect();
            }
        };
    }
    expand_axis!(grid.particles, num_particles);
    expand_axis!(grid.islands, num_islands);
    expand_axis!(grid.proposal, proposal);
    expand_axis!(grid.expansion, expansion);
    expand_axis!(grid.priority, priority);
    expand_axis!(grid.resampler, resampler);
    expand_axis!(grid.ess_frac, ess_threshold_fraction);
    expand_axis!(grid.max_stages, max_stages);
    expand_axis!(grid.seeds, seed);
    configs
}

fn sweep_entry(
    train: &Dataset,
    test: &Dataset,
    hyper: &Hyperparams,
    config: &SmcConfig,
) -> treesmc::Result<(f64, Metrics, f64, f64)> {
    config.validate()?;
    let (run, run_secs) = timed(|| islands_run(train, hyper, config));
    let run = run?;
    let (metrics, predict_secs) = timed(|| -> treesmc::Result<Metrics> {
        let predictor = run.predictor(hyper)?;
        evaluate(&predictor, test)
    });
    Ok((run.log_marginal, metrics?, run_secs, predict_secs))
}

fn run_sweep(cmd: SweepCmd) -> anyhow::Result<()> {
    let grid_text = fs::read_to_string(&cmd.grid)
        .with_context(|| format!("reading grid file {}", cmd.grid.display()))?;
    let grid: SweepGrid = serde_json::from_str(&grid_text)
        .map_err(|e| treesmc::Error::invalid_parameter(format!(
            "grid file {}: {e}",
            cmd.grid.display()
        )))?;

    let (train, test) = cmd.data.load()?;
    let hyper = cmd.hyper.build()?;
    let configs = grid_configs(&grid, cmd.base.config());

    let dir = resolve_out_dir(cmd.out_dir).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let results = dir.join("results.csv");

    let mut failures = 0usize;
    for (i, config) in configs.iter().enumerate() {
        let mut row = SweepRow::new(config, &hyper);
        match sweep_entry(&train, &test, &hyper, config) {
            Ok((log_marginal, metrics, run_secs, predict_secs)) => {
                row.status = "ok".to_string();
                row.log_marginal = Some(log_marginal);
                row.mean_log_prob = Some(metrics.mean_log_prob);
                row.accuracy = Some(metrics.accuracy);
                row.run_secs = Some(run_secs);
                row.predict_secs = Some(predict_secs);
            }
            // A bad grid point is recorded and the sweep moves on.
            Err(err) => {
                row.status = format!("error: {err}");
                failures += 1;
            }
        }
        append_results_row(&results, &row)?;
        println!(
            "[{}/{}] {} particles={} islands={} proposal={} seed={} -> {}",
            i + 1,
            configs.len(),
            config_hash(config, &hyper),
            config.num_particles,
            config.num_islands,
            config.proposal,
            config.seed,
            row.status
        );
    }
    println!(
        "wrote {} rows ({} failed) to {}",
        configs.len(),
        failures,
        results.display()
    );
    Ok(())
}
