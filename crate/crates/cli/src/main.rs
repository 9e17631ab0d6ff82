use clap::{Args, Parser, Subcommand};
use corv_cli::config::{load_config, CliError};
use corv_cli::experiments::run_experiment;
use corv_cli::gridsearch::{grid_search_stepsize, write_table, Objective};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "corv", version, about = "Langevin sampling experiments on bounded domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Override the config seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config output directory
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for replicate fan-out (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file
    Run { config: PathBuf },
    /// Evaluate a stepsize grid under a fixed seed and report the argmin
    GridSearch {
        config: PathBuf,
        /// tv_distance | validation_rmse (default: by experiment kind)
        #[arg(long)]
        objective: Option<String>,
        /// Comma-separated stepsize candidates (default: grids.stepsizes)
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Per-step timing table for the NMF samplers
    Bench { config: PathBuf },
    /// Generate a synthetic ratings file plus sidecar metadata
    GenData(GenDataArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value_t = 200)]
    users: usize,
    #[arg(long, default_value_t = 100)]
    items: usize,
    #[arg(long, default_value_t = 5)]
    rank: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::InvalidConfig(issues)) => {
            for issue in &issues {
                eprintln!("error: {}: {}", issue.path, issue.message);
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Run { config } => {
            let mut cfg = load_config(config)?;
            apply_overrides(&mut cfg, cli);
            let outputs = run_experiment(&cfg)?;
            println!("wrote {}", outputs.summary_path.display());
            Ok(())
        }
        Command::GridSearch { config, objective, grid } => {
            let mut cfg = load_config(config)?;
            apply_overrides(&mut cfg, cli);
            let objective = match objective {
                Some(name) => Objective::parse(name)?,
                None => Objective::default_for(cfg.kind),
            };
            let candidates = match grid {
                Some(g) if !g.is_empty() => g.clone(),
                _ => cfg.stepsize_grid.clone(),
            };
            if candidates.is_empty() {
                return Err(CliError::Run(
                    "no stepsize candidates: pass --grid or set grids.stepsizes".into(),
                ));
            }
            let outcome = grid_search_stepsize(&cfg, &candidates, objective)?;
            let path = write_table(&outcome, &cfg)?;
            println!(
                "best stepsize {} ({} = {}); table at {}",
                outcome.best_stepsize,
                outcome.objective.name(),
                outcome.best_objective,
                path.display()
            );
            if outcome.edge_warning {
                eprintln!("warning: argmin sits on the grid edge; widen the grid");
            }
            Ok(())
        }
        Command::Bench { config } => {
            let mut cfg = load_config(config)?;
            apply_overrides(&mut cfg, cli);
            if cfg.kind != corv_cli::ExperimentKind::BenchmarkOverhead {
                return Err(CliError::Run(
                    "bench expects a config with kind = \"benchmark_overhead\"".into(),
                ));
            }
            let outputs = run_experiment(&cfg)?;
            println!("wrote {}", outputs.summary_path.display());
            Ok(())
        }
        Command::GenData(args) => gen_data(args, cli.seed.unwrap_or(0)),
    }
}

fn apply_overrides(cfg: &mut corv_cli::ExperimentConfig, cli: &Cli) {
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.out_dir = dir.clone();
    }
}

/// Write a tab-separated ratings file (user, item, count, timestamp) plus
/// a key=value sidecar with the generation parameters and the noise floor.
fn gen_data(args: &GenDataArgs, seed: u64) -> Result<(), CliError> {
    use std::fmt::Write as _;
    let ds = corv::nmf::generate_synthetic(
        args.users,
        args.items,
        args.rank,
        args.lambda,
        args.density,
        seed,
    )?;
    let mut body = String::new();
    for e in &ds.entries {
        let _ = writeln!(body, "{}\t{}\t{}\t0", e.user, e.item, e.value);
    }
    std::fs::write(&args.out, body)?;
    let meta = format!(
        "users={}\nitems={}\nrank_true={}\nlambda={}\ndensity={}\nseed={seed}\nn_entries={}\nnoise_floor_rmse={}\n",
        args.users,
        args.items,
        args.rank,
        args.lambda,
        args.density,
        ds.entries.len(),
        ds.noise_floor_rmse.map(|f| f.to_string()).unwrap_or_default(),
    );
    let meta_path = args.out.with_extension("meta");
    std::fs::write(&meta_path, meta)?;
    println!("wrote {} and {}", args.out.display(), meta_path.display());
    Ok(())
}
