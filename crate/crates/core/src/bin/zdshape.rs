use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zdshape::config::{spring_seed, PipelineConfig};
use zdshape::optimize::GaConfig;
use zdshape::pipeline::{check_config, fit_spring_table, run_pipeline, simulate_report, RunOptions, Stage, StageError};

/// Mass and spring co-design for the closed-chain mechanism.
#[derive(Parser)]
#[command(name = "zdshape", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// RNG seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Fitness-evaluation threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Full design run: mass distribution, ideal spring, fits, validation.
    Run { config: PathBuf },
    /// Validation simulations for the design stored in a report.
    Simulate { report: PathBuf },
    /// Fit piecewise-linear springs to a (theta, sigma) CSV table.
    FitSpring {
        #[arg(long)]
        table: PathBuf,
        /// Pair counts to fit.
        #[arg(long, num_args = 1.., default_value = "1")]
        n: Vec<usize>,
        /// Slope bound (N m/rad).
        #[arg(long, default_value_t = 10.0)]
        k_max: f64,
        /// Take the spring GA settings and slope bound from this configuration.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Invariant suite for a configuration.
    Check { config: PathBuf },
}

fn fail(e: StageError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ZDSHAPE_LOG", "info")).init();
    let cli = Cli::parse();
    let opts = RunOptions {
        seed: cli.common.seed,
        workers: cli.common.workers,
        out: cli.common.out,
    };
    match cli.command {
        Command::Run { config } => match run_pipeline(&config, &opts) {
            Ok(o) => {
                let m = &o.report.mass;
                println!(
                    "rms {:.6} N m (baseline {:.6}, {:.1}% lower), Omega_s {:.4}",
                    m.rms,
                    m.baseline_rms,
                    100.0 * m.reduction,
                    m.center.omega_s
                );
                for (s, v) in o.report.springs.iter().zip(&o.report.validation.fitted) {
                    let d = v.zero_dynamics.deviation.map(|d| d.orbital);
                    println!("n = {}: mse {:.4e}, orbit deviation {:?} of stroke", s.n, s.mse, d);
                }
                println!("report: {}", o.out_dir.join("report.json").display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Simulate { report } => match simulate_report(&report, &opts) {
            Ok((s, dir)) => {
                let v = &s.validation;
                println!("sigma*: closed-loop deviation {:?}", v.ideal.closed_loop.deviation);
                for f in &v.fitted {
                    println!("{}: zero-dynamics deviation {:?}", f.spring, f.zero_dynamics.deviation);
                }
                println!("output: {}", dir.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::FitSpring { table, n, k_max, config } => {
            let seed = opts.seed.unwrap_or(0);
            let (ga, k_max) = match config {
                Some(path) => match PipelineConfig::load(&path) {
                    Ok((cfg, _)) => (cfg.spring_ga.with_seed(spring_seed(seed)), cfg.spring.k_max),
                    Err(error) => return fail(StageError::new(Stage::Config, error)),
                },
                None => (GaConfig::default().with_seed(spring_seed(seed)), k_max),
            };
            match fit_spring_table(&table, &n, k_max, &ga, opts.workers(), opts.out.as_deref()) {
                Ok(fits) => {
                    for f in &fits {
                        println!("n = {}: mse {:.6e}, params {:?}", f.n, f.mse, f.params);
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Check { config } => {
            let cfg = match PipelineConfig::load(&config) {
                Ok((cfg, _)) => cfg,
                Err(error) => return fail(StageError::new(Stage::Config, error)),
            };
            match check_config(&cfg) {
                Ok(items) => {
                    for i in &items {
                        let tag = if i.pass { "PASS" } else { "FAIL" };
                        println!("{tag} {}: {:.3e} (limit {:.1e})", i.name, i.value, i.tolerance);
                    }
                    if items.iter().all(|i| i.pass) {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
