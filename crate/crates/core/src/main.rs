use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};

use fracchemo::config::{parse_config_with, ParseOptions, Scenario};
use fracchemo::output::fmt_f64;
use fracchemo::runner::{bench, run_to_dir};
use fracchemo::verification::{criticality_sweep, estimate_sobolev_constant, scaling_symmetry_check, verify_scenario};
use fracchemo::{Error, Result};

/// Pseudo-spectral chemotaxis simulator with energy-identity checks.
#[derive(Debug, Parser)]
#[command(name = "fracchemo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file; `verify` accepts several.
    #[arg(long, global = true, value_name = "PATH")]
    config: Vec<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Worker threads for sweeps and restarts.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    workers: usize,

    /// Overrides the scenario seed.
    #[arg(long, global = true, value_name = "S")]
    seed: Option<u64>,

    /// Reject monitors declared outside their parameter regime.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario, writing the diagnostics CSV and snapshots.
    Run,
    /// Check residuals, conservation and monitors against tolerances.
    Verify,
    /// Run every (alpha, amplitude) pair of the [sweep] section.
    Sweep,
    /// Compare a run with its rescaled counterpart.
    ScalingTest,
    /// Lower-bound the L4 / H^(1/4) constant.
    Sobolev,
    /// Report steps per second and FFT share on standard grids.
    Bench,
}

enum Failure {
    /// Config or runtime error: exit 1.
    Error(Error),
    /// Completed but flagged (blow-up or failed check): exit 2.
    Flagged,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(path: &Path, cli: &Cli) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let mut sc = parse_config_with(&text, ParseOptions { strict: cli.strict })?;
    if let Some(seed) = cli.seed {
        sc.seed = seed;
    }
    Ok(sc)
}

fn single(cli: &Cli) -> Result<Scenario> {
    match cli.config.as_slice() {
        [one] => load(one, cli),
        [] => Err(Error::param("config", "--config PATH is required")),
        _ => Err(Error::param("config", "this subcommand takes a single --config")),
    }
}

fn cmd_run(cli: &Cli) -> std::result::Result<(), Failure> {
    let sc = single(cli)?;
    let summary = run_to_dir(&sc, &cli.out)?;
    let last = summary.trajectory.rows.last().expect("initial row");
    println!("scenario {}: t = {}, rows = {}", sc.name, last.t, summary.trajectory.rows.len());
    println!("csv {}", summary.csv_path.display());
    if let fracchemo::Outcome::BlowUp { t, reason } = &summary.trajectory.outcome {
        eprintln!("blow-up flagged at t = {t}: {reason}");
        return Err(Failure::Flagged);
    }
    Ok(())
}

fn cmd_verify(cli: &Cli) -> std::result::Result<(), Failure> {
    if cli.config.is_empty() {
        return Err(Error::param("config", "--config PATH is required").into());
    }
    let scenarios = cli.config.iter().map(|p| load(p, cli)).collect::<Result<Vec<_>>>()?;
    let mut ok = true;
    for sc in &scenarios {
        let rep = verify_scenario(sc)?;
        for c in &rep.checks {
            println!(
                "{} {:<16} {} <= {} {}",
                sc.name,
                c.name,
                fmt_f64(c.value),
                fmt_f64(c.tolerance),
                if c.passed { "PASS" } else { "FAIL" }
            );
        }
        for m in &rep.monitors {
            println!(
                "{} monitor {:<12} increment {} (tol {} relative) {}{}",
                sc.name,
                m.monitor.name(),
                fmt_f64(m.max_increment),
                fmt_f64(m.tolerance),
                if m.passed { "PASS" } else { "FAIL" },
                if m.in_regime { "" } else { " (outside proven regime)" }
            );
        }
        if rep.blew_up {
            println!("{} blow-up FAIL", sc.name);
        }
        ok &= rep.passed();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Flagged)
    }
}

fn cmd_sweep(cli: &Cli) -> std::result::Result<(), Failure> {
    let sc = single(cli)?;
    if sc.sweep.alphas.is_empty() || sc.sweep.amplitudes.is_empty() {
        return Err(Error::param("sweep", "[sweep] needs non-empty alphas and amplitudes").into());
    }
    let table = criticality_sweep(&sc.sweep.alphas, &sc.sweep.amplitudes, &sc, cli.workers)?;
    fs::create_dir_all(&cli.out).map_err(Error::from)?;
    let path = cli.out.join(format!("{}_sweep.csv", sc.name));
    let csv = table.to_csv();
    fs::write(&path, &csv).map_err(Error::from)?;
    print!("{csv}");
    Ok(())
}

fn cmd_scaling(cli: &Cli) -> std::result::Result<(), Failure> {
    let sc = single(cli)?;
    let d = scaling_symmetry_check(&sc, sc.scaling_lambda)?;
    println!("lambda {} discrepancy {}", sc.scaling_lambda, fmt_f64(d));
    Ok(())
}

fn cmd_sobolev(cli: &Cli) -> std::result::Result<(), Failure> {
    let (budget, seed) = match cli.config.as_slice() {
        [] => (10_000, cli.seed.unwrap_or(0)),
        _ => {
            let sc = single(cli)?;
            (sc.sobolev_budget, sc.seed)
        }
    };
    let est = estimate_sobolev_constant(budget, seed)?;
    println!("ratio {}", fmt_f64(est.ratio));
    println!("threshold {}", fmt_f64(est.threshold));
    println!("evaluations {}", est.evaluations);
    Ok(())
}

fn cmd_bench() -> std::result::Result<(), Failure> {
    for r in bench(Duration::from_millis(300))? {
        let case = format!("d={} n={}", r.dim, r.n);
        println!("{case:<12} {:>12.1} {:>8.3}", r.steps_per_second, r.fft_share);
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run => cmd_run(&cli),
        Command::Verify => cmd_verify(&cli),
        Command::Sweep => cmd_sweep(&cli),
        Command::ScalingTest => cmd_scaling(&cli),
        Command::Sobolev => cmd_sobolev(&cli),
        Command::Bench => cmd_bench(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Flagged) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
