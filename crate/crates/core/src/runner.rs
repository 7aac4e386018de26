//! File-producing drivers behind the command-line tool.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::Scenario;
use crate::diagnostics::Trajectory;
use crate::dynamics::{Kinetics, ModelParams, State};
use crate::error::Result;
use crate::integrator::{run, StepMode, Stepper};
use crate::output::CsvWriter;
use crate::snapshot::Snapshot;
use crate::spectral::{Grid, SpectralField};

#[derive(Debug)]
pub struct RunSummary {
    pub trajectory: Trajectory,
    pub csv_path: PathBuf,
    pub config_dump: PathBuf,
    pub snapshots: Vec<PathBuf>,
}

/// Runs the scenario, streaming the diagnostics CSV into `out` (flushed per
/// row) and writing a snapshot every `snapshot_every` rows.
pub fn run_to_dir(sc: &Scenario, out: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out)?;
    let config_dump = out.join(format!("{}.normalized.cfg", sc.name));
    fs::write(&config_dump, sc.to_config())?;
    let csv_path = out.join(&sc.output.csv);
    let mut csv = CsvWriter::new(BufWriter::new(File::create(&csv_path)?))?;
    let every = sc.output.snapshot_every;
    let mut snapshots = Vec::new();
    let mut count = 0usize;
    let (alpha, kinetics) = (sc.params.alpha, sc.params.kinetics);
    let trajectory = run(
        sc.initial_state()?,
        sc.params.clone(),
        &sc.integrator,
        &sc.run_options(),
        &mut |row, state| {
            csv.write_row(row)?;
            if every > 0 && count.is_multiple_of(every) {
                let path = out.join(format!("{}_{:06}.snap", sc.name, row.step));
                Snapshot::from_state(state, alpha, kinetics)?.write_file(&path)?;
                snapshots.push(path);
            }
            count += 1;
            Ok(())
        },
    )?;
    Ok(RunSummary {
        trajectory,
        csv_path,
        config_dump,
        snapshots,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub dim: usize,
    pub n: usize,
    pub steps_per_second: f64,
    /// Fraction of stepping time spent inside FFTs.
    pub fft_share: f64,
}

pub const BENCH_CASES: [(usize, usize); 5] = [(1, 128), (1, 256), (1, 512), (2, 64), (2, 128)];

/// Times IFRK2 steps on smooth data for roughly `budget` per case.
pub fn bench(budget: Duration) -> Result<Vec<BenchRow>> {
    BENCH_CASES
        .iter()
        .map(|&(dim, n)| bench_case(dim, n, budget))
        .collect()
}

fn bench_case(dim: usize, n: usize, budget: Duration) -> Result<BenchRow> {
    let grid = Grid::new(dim, n)?;
    let params = ModelParams::new(dim, 1.5, Kinetics::Quadratic)?;
    let u = SpectralField::from_fn(grid, |x| 1.0 + 0.1 * x[0].cos() + 0.05 * (x[0] + x[1]).sin());
    let phi = SpectralField::from_fn(grid, |x| 0.1 * (x[0] - x[1]).sin());
    let mut s = State::new(0.0, u, phi.gradient())?;
    let mut stepper = Stepper::new(params, grid, StepMode::Full)?;
    s = stepper.step_ifrk2(&s, 1e-4)?;
    stepper.dynamics_mut().transform_mut().reset_timer();
    let start = Instant::now();
    let mut steps = 0u64;
    while start.elapsed() < budget || steps < 3 {
        s = stepper.step_ifrk2(&s, 1e-4)?;
        steps += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    let fft = stepper.dynamics().transform().fft_time().as_secs_f64();
    Ok(BenchRow {
        dim,
        n,
        steps_per_second: steps as f64 / elapsed,
        fft_share: (fft / elapsed).min(1.0),
    })
}
