use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use citygraph::config::{ExperimentConfig, RunConfig};
use citygraph::pipeline;
use citygraph::Error;

#[derive(Parser)]
#[command(
    name = "citygraph",
    about = "Synthesize and analyze geo-referenced urban social networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Size of the rayon thread pool (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the population, households and friendship edges.
    Generate(CommonArgs),
    /// Compute the metric suite over previously generated runs.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
        /// Analyze even if the manifest hash does not match the config.
        #[arg(long)]
        force: bool,
    },
    /// Run a cross-product of configurations and consolidate the results.
    Experiment(CommonArgs),
    /// Parse and validate a run configuration.
    ValidateConfig {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
}

fn apply_overrides(config: &mut RunConfig, args: &CommonArgs) {
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(runs) = args.runs {
        config.runs = runs;
    }
}

fn init_threads(threads: Option<usize>) -> Result<(), Error> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run() -> Result<(), Error> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(args) => {
            init_threads(args.threads)?;
            let mut config = RunConfig::load(&args.config)?;
            apply_overrides(&mut config, &args);
            let dirs = pipeline::run_generate(&config)?;
            for dir in dirs {
                println!("generated {}", dir.display());
            }
        }
        Command::Analyze { common, force } => {
            init_threads(common.threads)?;
            let mut config = RunConfig::load(&common.config)?;
            apply_overrides(&mut config, &common);
            let reports = pipeline::run_analyze(&config, force)?;
            for report in &reports {
                println!(
                    "run seed {}: N={} K={:.3} dist={:.3} C={:.5} C_loc={:.5} rho={} comp={} giant={:.2}%",
                    report.seed,
                    report.nodes,
                    report.mean_degree,
                    report.avg_path_length,
                    report.global_clustering,
                    report.mean_local_clustering,
                    report
                        .assortativity
                        .map(|r| format!("{r:.4}"))
                        .unwrap_or_else(|| "undefined".into()),
                    report.component_count,
                    100.0 * report.giant_fraction
                );
            }
        }
        Command::Experiment(args) => {
            init_threads(args.threads)?;
            let mut experiment = ExperimentConfig::load(&args.config)?;
            apply_overrides(&mut experiment.base, &args);
            let summaries = pipeline::run_experiment(&experiment)?;
            let failures: Vec<&pipeline::CellSummary> =
                summaries.iter().filter(|s| s.error.is_some()).collect();
            println!(
                "experiment finished: {} cells, {} failed",
                summaries.len(),
                failures.len()
            );
            for f in failures {
                eprintln!("cell {} failed: {}", f.label, f.error.as_deref().unwrap_or(""));
            }
        }
        Command::ValidateConfig { config } => {
            let config = RunConfig::load(&config)?;
            config.validate()?;
            println!(
                "config ok: mu={} runs={} seed={} hash={}",
                config.mu,
                config.runs,
                config.seed,
                &config.hash()[..12]
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
