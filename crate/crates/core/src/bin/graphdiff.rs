use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use graphdiff::check::{run_check_suite, DEFAULT_SEED};
use graphdiff::experiments::{apply_overrides, compare_runs, run_experiment, CheckResult, RunOptions, RunSummary};
use graphdiff::scenario::{parse_scenario_with, DistanceSpec, ExperimentKind, Exponent};

#[derive(Parser)]
#[command(name = "graphdiff", version, about = "Heat flow and nonlocal diffusion on metric graphs with rays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Output directory (overrides `out` in the scenario).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Seed for randomized checks.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Heat equation run.
    Local {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Nonlocal diffusion run.
    Nonlocal {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit decay exponents of Lᵖ norms.
    Decay {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<Exponent>>,
        #[command(flatten)]
        common: Common,
    },
    /// Weighted distance to the asymptotic profile.
    Profile {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<Exponent>>,
        #[command(flatten)]
        common: Common,
    },
    /// Nonlocal to local relaxation as ε shrinks.
    Relax {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Distance between points written as `edge:coord`.
    Distance {
        scenario: PathBuf,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in invariant suite.
    Check {
        #[command(flatten)]
        common: Common,
    },
    /// Compare two output directories column by column.
    Compare { a: PathBuf, b: PathBuf },
}

fn run_scenario(
    path: &Path,
    kind: ExperimentKind,
    common: &Common,
    opts: RunOptions,
    extra_pair: Option<[String; 2]>,
) -> graphdiff::Result<RunSummary> {
    let opts = RunOptions {
        out: common.out.clone(),
        jobs: common.jobs,
        ..opts
    };
    let s = parse_scenario_with(path, Some(kind), |s| {
        apply_overrides(s, &opts);
        if let Some(pair) = extra_pair {
            s.distance.get_or_insert_with(DistanceSpec::default).pairs.push(pair);
        }
    })?;
    run_experiment(&s, &opts)
}

fn report(checks: &[CheckResult]) -> bool {
    for c in checks {
        println!("{c}");
    }
    checks.iter().all(|c| c.passed)
}

fn run_checks(common: &Common) -> graphdiff::Result<bool> {
    let start = Instant::now();
    let run = || run_check_suite(common.seed);
    let checks = match common.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| graphdiff::Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let passed = report(&checks);
    if let Some(dir) = &common.out {
        let summary = RunSummary {
            scenario_hash: format!("seed-{}", common.seed),
            kind: "check".into(),
            wall_clock_seconds: start.elapsed().as_secs_f64(),
            all_passed: passed,
            csv: Vec::new(),
            checks,
        };
        summary.write(dir)?;
    }
    Ok(passed)
}

fn dispatch(cli: Cli) -> graphdiff::Result<bool> {
    let none = RunOptions::default();
    let summary = match cli.command {
        Command::Local { scenario, common } => run_scenario(&scenario, ExperimentKind::Local, &common, none, None)?,
        Command::Nonlocal { scenario, common } => {
            run_scenario(&scenario, ExperimentKind::Nonlocal, &common, none, None)?
        }
        Command::Decay { scenario, p, common } => {
            let opts = RunOptions { p, ..none };
            run_scenario(&scenario, ExperimentKind::Decay, &common, opts, None)?
        }
        Command::Profile {
            scenario,
            times,
            p,
            common,
        } => {
            let opts = RunOptions {
                profile_times: times,
                p,
                ..none
            };
            run_scenario(&scenario, ExperimentKind::Profile, &common, opts, None)?
        }
        Command::Relax { scenario, eps, common } => {
            let opts = RunOptions { eps, ..none };
            run_scenario(&scenario, ExperimentKind::Relax, &common, opts, None)?
        }
        Command::Distance {
            scenario,
            from,
            to,
            common,
        } => {
            let pair = match (from, to) {
                (Some(a), Some(b)) => Some([a, b]),
                (None, None) => None,
                _ => {
                    return Err(graphdiff::Error::InvalidParameter(
                        "--from and --to must be given together".into(),
                    ))
                }
            };
            let s = run_scenario(&scenario, ExperimentKind::Distance, &common, none, pair)?;
            if let Some(csv) = s.csv.iter().find(|c| c.name == "distance.csv") {
                if let Ok(text) = std::fs::read_to_string(&csv.path) {
                    print!("{text}");
                }
            }
            s
        }
        Command::Check { common } => return run_checks(&common),
        Command::Compare { a, b } => {
            let report = compare_runs(&a, &b)?;
            print!("{report}");
            return Ok(true);
        }
    };
    let passed = report(&summary.checks);
    println!(
        "{} checks, {} ({:.2} s)",
        summary.checks.len(),
        if passed { "all passed" } else { "some failed" },
        summary.wall_clock_seconds
    );
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
