//! Independent checks of the solver: closed-form linear evolution, an
//! explicit RK4 reference, manufactured solutions, the `L4` / `H^(1/4)`
//! ratio search, the scaling symmetry and amplitude sweeps.

use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::diagnostics::{
    self, monitor_monotone, residual_energy_balance, DiagnosticsRow, Monitor, MonitorReport, Outcome, Recorder,
    Trajectory,
};
use crate::dynamics::{Forcing, Kinetics, ModelParams, State};
use crate::error::{Error, Result};
use crate::integrator::{run, simulate, IntegratorSettings, StepMode, Stepper};
use crate::output::fmt_f64;
use crate::spectral::{Grid, SpectralField, Transform, VectorField};

/// `sum_k exp(-|k|^alpha t) u0_hat(k) e^{ikx}`.
pub fn linear_oracle(u0: &SpectralField, alpha: f64, t: f64) -> Result<SpectralField> {
    crate::spectral::check_alpha(alpha)?;
    let grid = u0.grid();
    let coeffs = u0
        .coeffs()
        .iter()
        .enumerate()
        .map(|(idx, c)| c * (-grid.k_norm_sq(idx).powf(alpha / 2.0) * t).exp())
        .collect();
    SpectralField::from_coeffs(grid, coeffs)
}

/// `||a - b||_L2 / ||b||_L2` (absolute when `b = 0`).
pub fn relative_l2(a: &SpectralField, b: &SpectralField) -> Result<f64> {
    let diff = (a - b).sobolev_norm(0.0, true);
    let scale = b.sobolev_norm(0.0, true);
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// `sqrt(||u - u'||^2 + ||q - q'||^2)`.
pub fn state_distance(a: &State, b: &State) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let du = (&a.u - &b.u).sobolev_norm_sq(0.0, true);
    let dq = (&a.q - &b.q).sobolev_norm_sq(0.0, true);
    Ok((du + dq).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Ifrk2,
    Rk4,
}

/// Largest step the explicit RK4 reference accepts: `0.5 / (n/2)^alpha`.
pub fn rk4_stability_limit(grid: Grid, alpha: f64) -> f64 {
    0.5 / (grid.n() as f64 / 2.0).powf(alpha)
}

fn rk4_step(st: &mut Stepper, s: &State, dt: f64) -> Result<State> {
    let stage = |base: &State, k: &(SpectralField, VectorField), h: f64| State {
        t: base.t + h,
        u: &base.u + &k.0.scaled(h),
        q: &base.q + &k.1.scaled(h),
    };
    let k1 = st.tendency(s)?;
    let k2 = st.tendency(&stage(s, &k1, 0.5 * dt))?;
    let k3 = st.tendency(&stage(s, &k2, 0.5 * dt))?;
    let k4 = st.tendency(&stage(s, &k3, dt))?;
    let combine = |a: &SpectralField, b: &SpectralField, c: &SpectralField, d: &SpectralField| {
        let mut sum = a.clone();
        sum += &b.scaled(2.0);
        sum += &c.scaled(2.0);
        sum += d;
        sum.scaled(dt / 6.0)
    };
    let du = combine(&k1.0, &k2.0, &k3.0, &k4.0);
    let comps = (0..s.q.components().len())
        .map(|i| combine(k1.1.component(i), k2.1.component(i), k3.1.component(i), k4.1.component(i)))
        .collect();
    let next = State {
        t: s.t + dt,
        u: &s.u + &du,
        q: &s.q + &VectorField::new(comps)?,
    };
    if !next.is_finite() {
        return Err(Error::Overflow { t: next.t });
    }
    Ok(next)
}

/// Integrates from `initial` to `t_end` with a uniform step no larger than
/// `dt`; `observer` sees every state after each step.
pub fn integrate_fixed(
    initial: &State,
    params: ModelParams,
    mode: StepMode,
    t_end: f64,
    dt: f64,
    scheme: Scheme,
    observer: &mut dyn FnMut(&State, usize) -> Result<()>,
) -> Result<State> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", format!("step must be positive, got {dt}")));
    }
    let grid = initial.grid();
    if scheme == Scheme::Rk4 {
        let limit = rk4_stability_limit(grid, params.alpha);
        if dt > limit {
            return Err(Error::Unstable { dt, limit });
        }
    }
    let span = t_end - initial.t;
    if span < 0.0 {
        return Err(Error::param("t_end", "ends before the initial time"));
    }
    let steps = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut st = Stepper::new(params, grid, mode)?;
    let mut s = initial.clone();
    for i in 1..=steps {
        let mut next = match scheme {
            Scheme::Ifrk2 => st.step_ifrk2(&s, h)?,
            Scheme::Rk4 => rk4_step(&mut st, &s, h)?,
        };
        next.t = if i == steps { t_end } else { initial.t + i as f64 * h };
        s = next;
        observer(&s, i)?;
    }
    Ok(s)
}

/// Classical explicit RK4 run of the scenario with a fixed step, sampled
/// like [`simulate`].
pub fn rk4_reference(sc: &Scenario, dt: f64) -> Result<Trajectory> {
    let initial = sc.initial_state()?;
    let mut recorder = Recorder::new(sc.params.alpha, &initial)?;
    let mut rows = vec![recorder.row(&initial, 0)?];
    let mut prev = initial.clone();
    let every = sc.integrator.sample_every;
    let t_end = sc.integrator.t_end;
    let last = integrate_fixed(
        &initial,
        sc.params.clone(),
        sc.integrator.mode,
        t_end,
        dt,
        Scheme::Rk4,
        &mut |s, step| {
            recorder.advance(&prev, s)?;
            prev = s.clone();
            if step % every == 0 || s.t == t_end {
                rows.push(recorder.row(s, step)?);
            }
            Ok(())
        },
    )?;
    Ok(Trajectory {
        dim: sc.params.dim,
        alpha: sc.params.alpha,
        irrotational: sc.run_options().irrotational,
        rows,
        final_state: last,
        outcome: Outcome::Completed,
    })
}

/// Sources making `u* = a e^{-t} cos x1`, `q* = (b e^{-t} sin x1, 0)` an
/// exact solution for every `alpha` (the mode `|k| = 1` has symbol 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedForcing {
    pub a: f64,
    pub b: f64,
    pub kinetics: Kinetics,
}

impl ManufacturedForcing {
    pub fn exact(&self, t: f64, grid: Grid) -> State {
        let (a, b) = (self.a, self.b);
        let e = (-t).exp();
        let u = SpectralField::from_fn(grid, |x| a * e * x[0].cos());
        let mut comps = vec![SpectralField::from_fn(grid, |x| b * e * x[0].sin())];
        if grid.dim() == 2 {
            comps.push(SpectralField::zeros(grid));
        }
        State {
            t,
            u,
            q: VectorField::new(comps).expect("shared grid"),
        }
    }

    /// Highest wavenumber present in the target or its sources.
    pub fn band_limit(&self) -> i64 {
        2
    }
}

impl Forcing for ManufacturedForcing {
    fn eval(&self, t: f64, grid: Grid) -> (SpectralField, VectorField) {
        let (a, b) = (self.a, self.b);
        let e1 = (-t).exp();
        let e2 = (-2.0 * t).exp();
        let fu = SpectralField::from_fn(grid, |x| -a * b * e2 * (2.0 * x[0]).cos());
        let fq0 = match self.kinetics {
            Kinetics::Quadratic => {
                SpectralField::from_fn(grid, |x| -b * e1 * x[0].sin() + 0.5 * a * a * e2 * (2.0 * x[0]).sin())
            }
            Kinetics::Linear => SpectralField::from_fn(grid, |x| (a - b) * e1 * x[0].sin()),
        };
        let mut comps = vec![fq0];
        if grid.dim() == 2 {
            comps.push(SpectralField::zeros(grid));
        }
        (fu, VectorField::new(comps).expect("shared grid"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Refinement {
    TimeStep,
    GridSize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub refinement: Refinement,
    /// `(dt or n, error)` from coarsest to finest.
    pub levels: Vec<(f64, f64)>,
    /// Least-squares slope of `log error` against `-log(level)` for time
    /// steps and `log n` for grids; `None` when some error is zero.
    pub slope: Option<f64>,
    pub target_order: Option<f64>,
}

impl ConvergenceReport {
    fn new(refinement: Refinement, levels: Vec<(f64, f64)>, target_order: Option<f64>) -> Self {
        let slope = if levels.iter().all(|&(_, e)| e > 0.0) {
            let pts: Vec<(f64, f64)> = levels.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
            let m = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let s = sxy / sxx;
            Some(match refinement {
                Refinement::TimeStep => s,
                Refinement::GridSize => -s,
            })
        } else {
            None
        };
        ConvergenceReport {
            refinement,
            levels,
            slope,
            target_order,
        }
    }

    pub fn max_error(&self) -> f64 {
        self.levels.iter().map(|l| l.1).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let col = match self.refinement {
            Refinement::TimeStep => "dt",
            Refinement::GridSize => "n",
        };
        let mut s = format!("{col},error\n");
        for (h, e) in &self.levels {
            let _ = writeln!(s, "{},{}", fmt_f64(*h), fmt_f64(*e));
        }
        s
    }
}

/// The manufactured problem: amplitudes, grid size and final time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSetup {
    pub a: f64,
    pub b: f64,
    pub n: usize,
    pub t_end: f64,
    pub scheme: Scheme,
}

impl Default for ManufacturedSetup {
    fn default() -> Self {
        ManufacturedSetup {
            a: 0.5,
            b: 0.5,
            n: 64,
            t_end: 0.5,
            scheme: Scheme::Ifrk2,
        }
    }
}

fn manufactured_params(p: &ModelParams, f: ManufacturedForcing, grid: Grid) -> Result<ModelParams> {
    p.validate()?;
    let band = f.band_limit();
    let fits = if p.dealias {
        3 * band < grid.n() as i64
    } else {
        2 * band < grid.n() as i64
    };
    if !fits {
        return Err(Error::param(
            "n",
            format!("grid {grid} cannot represent the manufactured modes up to |k| = {band}"),
        ));
    }
    Ok(ModelParams {
        forcing: Some(Arc::new(f)),
        ..p.clone()
    })
}

/// Error at `t_end` against the exact manufactured solution for each step
/// size in `dts`.
pub fn manufactured_convergence(p: &ModelParams, dts: &[f64], setup: ManufacturedSetup) -> Result<ConvergenceReport> {
    if dts.len() < 3 {
        return Err(Error::param("refinements", "at least three levels are needed"));
    }
    let grid = Grid::new(p.dim, setup.n)?;
    let f = ManufacturedForcing {
        a: setup.a,
        b: setup.b,
        kinetics: p.kinetics,
    };
    let params = manufactured_params(p, f, grid)?;
    let initial = f.exact(0.0, grid);
    let exact = f.exact(setup.t_end, grid);
    let mut levels = Vec::with_capacity(dts.len());
    for &dt in dts {
        let end = integrate_fixed(
            &initial,
            params.clone(),
            StepMode::Full,
            setup.t_end,
            dt,
            setup.scheme,
            &mut |_, _| Ok(()),
        )?;
        levels.push((dt, state_distance(&end, &exact)?));
    }
    let order = match setup.scheme {
        Scheme::Ifrk2 => 2.0,
        Scheme::Rk4 => 4.0,
    };
    Ok(ConvergenceReport::new(Refinement::TimeStep, levels, Some(order)))
}

/// Spatial study at a fixed step: each grid in `ns` is compared with the
/// finest one, whose error is reported as zero-free by omission.
pub fn manufactured_spatial(p: &ModelParams, ns: &[usize], dt: f64, setup: ManufacturedSetup) -> Result<ConvergenceReport> {
    if ns.len() < 3 {
        return Err(Error::param("refinements", "at least three levels are needed"));
    }
    let f = ManufacturedForcing {
        a: setup.a,
        b: setup.b,
        kinetics: p.kinetics,
    };
    let finest = *ns.iter().max().expect("non-empty");
    let fine_grid = Grid::new(p.dim, finest)?;
    let solve = |n: usize| -> Result<State> {
        let grid = Grid::new(p.dim, n)?;
        let params = manufactured_params(p, f, grid)?;
        integrate_fixed(&f.exact(0.0, grid), params, StepMode::Full, setup.t_end, dt, setup.scheme, &mut |_, _| Ok(()))
    };
    let reference = solve(finest)?;
    let mut levels = Vec::new();
    for &n in ns.iter().filter(|&&n| n != finest) {
        let coarse = solve(n)?;
        let lifted = State {
            t: coarse.t,
            u: coarse.u.resample(fine_grid)?,
            q: coarse.q.map(|c| c.resample(fine_grid).expect("same dimension")),
        };
        levels.push((n as f64, state_distance(&lifted, &reference)?));
    }
    Ok(ConvergenceReport::new(Refinement::GridSize, levels, None))
}

pub const SOBOLEV_GRID: usize = 256;
pub const SOBOLEV_BAND: usize = 32;
/// Ratio evaluations given to each restart.
pub const SOBOLEV_RESTART_EVALS: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SobolevEstimate {
    /// Best `||g||_L4 / ||g||_{H^(1/4)}` found: a lower bound on the constant.
    pub ratio: f64,
    /// The maximizing field.
    pub snapshot: SpectralField,
    /// `4 / (9 ratio^2)`.
    pub threshold: f64,
    pub evaluations: usize,
}

/// `||g||_L4 / ||g||_{H^(1/4)}` (homogeneous); `None` for `g = 0`.
pub fn sobolev_ratio(g: &SpectralField) -> Result<Option<f64>> {
    sobolev_ratio_with(g, &mut Transform::new(g.grid()))
}

fn sobolev_ratio_with(g: &SpectralField, tr: &mut Transform) -> Result<Option<f64>> {
    let den = g.sobolev_norm(0.25, true);
    if den == 0.0 {
        return Ok(None);
    }
    Ok(Some(g.lp_norm_with(4.0, tr)? / den))
}

fn band_field(grid: Grid, coef: &[f64]) -> SpectralField {
    // coef = [a_1, b_1, a_2, b_2, ...] for a_k cos kx + b_k sin kx.
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    for k in 1..=SOBOLEV_BAND {
        let (a, b) = (coef[2 * (k - 1)], coef[2 * (k - 1) + 1]);
        let z = Complex64::new(0.5 * a, -0.5 * b);
        c[k] = z;
        c[grid.n() - k] = z.conj();
    }
    SpectralField::from_coeffs(grid, c).expect("sized to grid")
}

struct RestartResult {
    ratio: f64,
    coef: Vec<f64>,
    evaluations: usize,
}

/// Coordinate ascent from one start point, using at most `evals` ratio
/// evaluations.
fn sobolev_restart(seed: u64, index: u64, evals: usize) -> Result<Option<RestartResult>> {
    let grid = Grid::new(1, SOBOLEV_GRID)?;
    let mut tr = Transform::new(grid);
    let dims = 2 * SOBOLEV_BAND;
    let mut coef = vec![0.0; dims];
    if index == 0 {
        coef[0] = 1.0;
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        for (i, c) in coef.iter_mut().enumerate() {
            let k = (i / 2 + 1) as f64;
            *c = rng.random_range(-1.0..1.0) / k;
        }
    }
    let mut used = 0;
    let mut eval = |coef: &[f64], used: &mut usize| -> Result<Option<f64>> {
        *used += 1;
        sobolev_ratio_with(&band_field(grid, coef), &mut tr)
    };
    let Some(mut best) = eval(&coef, &mut used)? else {
        return Ok(None);
    };
    let mut step = 0.25;
    'outer: while used < evals && step > 1e-12 {
        let mut improved = false;
        for i in 0..dims {
            for dir in [1.0, -1.0] {
                if used >= evals {
                    break 'outer;
                }
                let old = coef[i];
                coef[i] = old + dir * step;
                match eval(&coef, &mut used)? {
                    Some(r) if r > best => {
                        best = r;
                        improved = true;
                        break;
                    }
                    _ => coef[i] = old,
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(Some(RestartResult {
        ratio: best,
        coef,
        evaluations: used,
    }))
}

/// Searches mean-zero fields with `|k| <= 32` on 256 nodes for the largest
/// `||g||_L4 / ||g||_{H^(1/4)}`. Restart 0 starts from `cos x`; the others
/// from seeded random coefficients. Each restart gets a fixed number of
/// evaluations, so a larger budget only adds work and never lowers the
/// result.
pub fn estimate_sobolev_constant(budget: usize, seed: u64) -> Result<SobolevEstimate> {
    if budget == 0 {
        return Err(Error::param("budget", "must be positive"));
    }
    let full = budget / SOBOLEV_RESTART_EVALS;
    let rest = budget % SOBOLEV_RESTART_EVALS;
    let mut plan: Vec<(u64, usize)> = (0..full as u64).map(|i| (i, SOBOLEV_RESTART_EVALS)).collect();
    if rest > 0 {
        plan.push((full as u64, rest));
    }
    let results = plan
        .par_iter()
        .map(|&(idx, evals)| sobolev_restart(seed, idx, evals))
        .collect::<Result<Vec<_>>>()?;
    let evaluations = results.iter().flatten().map(|r| r.evaluations).sum();
    let best = results
        .into_iter()
        .flatten()
        .reduce(|a, b| if b.ratio > a.ratio { b } else { a })
        .ok_or_else(|| Error::param("budget", "no non-zero candidate was evaluated"))?;
    let grid = Grid::new(1, SOBOLEV_GRID)?;
    Ok(SobolevEstimate {
        ratio: best.ratio,
        snapshot: band_field(grid, &best.coef),
        threshold: 4.0 / (9.0 * best.ratio * best.ratio),
        evaluations,
    })
}

/// Rescales a state by `x -> lambda x` with amplitude factors `(su, sq)`.
fn dilate_state(s: &State, lambda: usize, su: f64, sq: f64) -> Result<State> {
    let u = s.u.dilate(lambda)?.scaled(su);
    let comps = s
        .q
        .components()
        .iter()
        .map(|c| Ok(c.dilate(lambda)?.scaled(sq)))
        .collect::<Result<Vec<_>>>()?;
    State::new(s.t, u, VectorField::new(comps)?)
}

/// Amplitude factors of the symmetry for `u` and `q`.
pub fn scaling_factors(kinetics: Kinetics, alpha: f64, lambda: f64) -> (f64, f64) {
    let sq = lambda.powf(alpha - 1.0);
    let su = match kinetics {
        Kinetics::Quadratic => sq,
        Kinetics::Linear => lambda.powf(2.0 * alpha - 2.0),
    };
    (su, sq)
}

/// Runs the scenario to `lambda^alpha T` on its grid and the rescaled data
/// to `T` on a grid `lambda` times finer, then returns the relative `L2`
/// gap between the rescaled first result and the second.
pub fn scaling_symmetry_check(base: &Scenario, lambda: usize) -> Result<f64> {
    if lambda == 0 {
        return Err(Error::param("lambda", "must be a positive integer"));
    }
    let alpha = base.params.alpha;
    let (su, sq) = scaling_factors(base.params.kinetics, alpha, lambda as f64);
    let t = base.integrator.t_end;
    let opts = base.run_options();
    let initial = base.initial_state()?;

    let long = IntegratorSettings {
        t_end: (lambda as f64).powf(alpha) * t,
        ..base.integrator.clone()
    };
    let first = run(initial.clone(), base.params.clone(), &long, &opts, &mut |_, _| Ok(()))?;
    let rescaled = dilate_state(&initial, lambda, su, sq)?;
    let second = run(rescaled, base.params.clone(), &base.integrator, &opts, &mut |_, _| Ok(()))?;
    if first.blew_up() || second.blew_up() {
        return Err(Error::Unsupported("scaling check hit the blow-up cap".into()));
    }
    let mapped = first.final_state.u.dilate(lambda)?.scaled(su);
    relative_l2(&mapped, &second.final_state.u)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub amplitude: f64,
    pub e0_final: f64,
    pub e2_final: f64,
    /// `max_t E2(t) / E2(0)`; 1 when `E2(0) = 0`.
    pub e2_growth: f64,
    pub blowup: bool,
    pub monitors: Vec<(Monitor, bool)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub monitors: Vec<Monitor>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,amplitude,E0_final,E2_final,E2_growth,blowup");
        for m in &self.monitors {
            let _ = write!(s, ",monitor_{}", m.name());
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{}",
                fmt_f64(r.alpha),
                fmt_f64(r.amplitude),
                fmt_f64(r.e0_final),
                fmt_f64(r.e2_final),
                fmt_f64(r.e2_growth),
                r.blowup
            );
            for (_, ok) in &r.monitors {
                s.push_str(if *ok { ",pass" } else { ",fail" });
            }
            s.push('\n');
        }
        s
    }
}

fn sweep_cell(base: &Scenario, initial: &State, alpha: f64, amplitude: f64) -> Result<SweepRow> {
    let mut sc = base.clone();
    sc.params.alpha = alpha;
    sc.params.validate()?;
    let tr = run(
        initial.scaled(amplitude),
        sc.params.clone(),
        &sc.integrator,
        &sc.run_options(),
        &mut |_, _| Ok(()),
    )?;
    let first = tr.rows.first().expect("initial row");
    let last = tr.rows.last().expect("initial row");
    let e2_growth = if first.e2 > 0.0 {
        tr.rows.iter().map(|r| r.e2).fold(first.e2, f64::max) / first.e2
    } else {
        1.0
    };
    let monitors = sc
        .hypotheses
        .monitors
        .iter()
        .map(|&m| (m, !tr.blew_up() && monitor_monotone(&tr, m, sc.hypotheses.monitor_tol).passed))
        .collect();
    Ok(SweepRow {
        alpha,
        amplitude,
        e0_final: last.e0,
        e2_final: last.e2,
        e2_growth,
        blowup: tr.blew_up(),
        monitors,
    })
}

/// Runs `A (u0, q0)` for every `(alpha, A)` pair (alpha-major order) on
/// `workers` threads. Blow-ups are recorded in their row.
pub fn criticality_sweep(alphas: &[f64], amplitudes: &[f64], base: &Scenario, workers: usize) -> Result<SweepTable> {
    for &a in alphas {
        crate::spectral::check_alpha(a)?;
    }
    let initial = base.initial_state()?;
    let cells: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| amplitudes.iter().map(move |&amp| (a, amp)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Unsupported(format!("thread pool: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, amp)| sweep_cell(base, &initial, a, amp))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepTable {
        monitors: base.hypotheses.monitors.clone(),
        rows,
    })
}

/// One named pass/fail line of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub monitors: Vec<MonitorReport>,
    pub blew_up: bool,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        !self.blew_up && self.checks.iter().all(|c| c.passed) && self.monitors.iter().all(|m| m.passed)
    }
}

/// Residuals, conservation and declared monitors for one trajectory.
pub fn verify_trajectory(sc: &Scenario, tr: &Trajectory) -> Result<VerifyReport> {
    let tol = &sc.verify;
    let mut checks = vec![Check::new("R_low", residual_energy_balance(tr), tol.r_low)];
    if tr.dim == 1 {
        checks.push(Check::new("R_1", diagnostics::residual_h1_1d(tr)?, tol.r_1));
        checks.push(Check::new("R_2", diagnostics::residual_h2_1d(tr)?, tol.r_2));
    } else if tr.irrotational {
        checks.push(Check::new("R_1", diagnostics::residual_h1_2d(tr)?, tol.r_1));
        checks.push(Check::new("curl_rel", tr.max_relative_curl(), tol.curl));
        let gap = tr
            .rows
            .iter()
            .map(|r: &DiagnosticsRow| (r.grad_q_norm - r.div_q_norm).abs() / r.grad_q_norm.max(1e-300))
            .fold(0.0, f64::max);
        checks.push(Check::new("grad_q_vs_div_q", gap, tol.curl));
    }
    let (du, dq) = tr.mean_drift();
    checks.push(Check::new("mean_u_drift", du, tol.mean));
    checks.push(Check::new("mean_q_drift", dq, tol.mean));
    let monitors = sc
        .hypotheses
        .monitors
        .iter()
        .map(|&m| monitor_monotone(tr, m, sc.hypotheses.monitor_tol))
        .collect();
    Ok(VerifyReport {
        scenario: sc.name.clone(),
        checks,
        monitors,
        blew_up: tr.blew_up(),
    })
}

pub fn verify_scenario(sc: &Scenario) -> Result<VerifyReport> {
    verify_trajectory(sc, &simulate(sc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn scenario(body: &str) -> Scenario {
        parse_config(body).unwrap()
    }

    const SMALL_1D: &str = r#"
[model]
d = 1
alpha = 1.5
n = 32
[integrator]
t_end = 0.2
dt_max = 0.0002
[initial]
u0 = "1 + 0.2*cos(1) - 0.1*sin(2)"
q0 = "0.1*sin(1) + 0.05*cos(3)"
"#;

    #[test]
    fn linear_oracle_matches_symbol() {
        let g = Grid::new(1, 16).unwrap();
        let u0 = SpectralField::from_fn(g, |x| 1.0 + (2.0 * x[0]).cos());
        let u = linear_oracle(&u0, 1.0, 0.5).unwrap();
        assert!((u.coeff([2, 0]).re - 0.5 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((u.mean() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rk4_steady_state_is_constant() {
        let sc = scenario(&SMALL_1D.replace("u0 = \"1 + 0.2*cos(1) - 0.1*sin(2)\"\nq0 = \"0.1*sin(1) + 0.05*cos(3)\"", "preset = steady"));
        let tr = rk4_reference(&sc, 0.005).unwrap();
        let mut expected = sc.initial_state().unwrap();
        expected.t = 0.2;
        assert_eq!(tr.final_state, expected);
    }

    #[test]
    fn rk4_rejects_unstable_step() {
        let sc = scenario(SMALL_1D);
        let limit = rk4_stability_limit(sc.grid(), 1.5);
        assert!(matches!(rk4_reference(&sc, 2.0 * limit), Err(Error::Unstable { .. })));
    }

    #[test]
    fn rk4_agrees_with_ifrk2() {
        let sc = scenario(SMALL_1D);
        let rk = rk4_reference(&sc, 1e-3).unwrap();
        let init = sc.initial_state().unwrap();
        let gap = |dt: f64| {
            let end = integrate_fixed(&init, sc.params.clone(), StepMode::Full, 0.2, dt, Scheme::Ifrk2, &mut |_, _| Ok(())).unwrap();
            state_distance(&end, &rk.final_state).unwrap()
        };
        let (g1, g2) = (gap(2e-3), gap(1e-3));
        assert!(g1 < 1e-5, "{g1}");
        let ratio = g1 / g2;
        assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio}");
    }

    #[test]
    fn manufactured_forcing_is_exact_residual() {
        // The exact solution's time derivative must equal the forced tendency.
        let g = Grid::new(1, 16).unwrap();
        for kin in [Kinetics::Quadratic, Kinetics::Linear] {
            let f = ManufacturedForcing { a: 0.7, b: 0.3, kinetics: kin };
            let p = ModelParams::new(1, 1.3, kin).unwrap().with_forcing(Arc::new(f));
            let mut st = Stepper::new(p, g, StepMode::Full).unwrap();
            let t = 0.4;
            let s = f.exact(t, g);
            let (du, dq) = st.tendency(&s).unwrap();
            let eps = 1e-6;
            let ds = |h: f64| f.exact(t + h, g);
            let fd_u = (&ds(eps).u - &ds(-eps).u).scaled(0.5 / eps);
            let fd_q = (&ds(eps).q - &ds(-eps).q).scaled(0.5 / eps);
            assert!(du.max_coeff_diff(&fd_u).unwrap() < 1e-9);
            assert!(dq.max_coeff_diff(&fd_q).unwrap() < 1e-9);
        }
    }

    #[test]
    fn zero_amplitude_manufactured_has_zero_error() {
        let p = ModelParams::new(1, 1.0, Kinetics::Quadratic).unwrap();
        let setup = ManufacturedSetup { a: 0.0, b: 0.0, ..Default::default() };
        let rep = manufactured_convergence(&p, &[0.1, 0.05, 0.025], setup).unwrap();
        assert!(rep.levels.iter().all(|l| l.1 == 0.0));
        assert_eq!(rep.slope, None);
        assert!(manufactured_convergence(&p, &[0.1, 0.05], setup).is_err());
    }

    #[test]
    fn slope_fit_recovers_power_law() {
        let levels = (0..4).map(|i| {
            let h = 0.1 / 2f64.powi(i);
            (h, 3.0 * h * h)
        });
        let rep = ConvergenceReport::new(Refinement::TimeStep, levels.collect(), Some(2.0));
        assert!((rep.slope.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_mode_sobolev_ratio() {
        let g = Grid::new(1, SOBOLEV_GRID).unwrap();
        let c = SpectralField::from_fn(g, |x| x[0].cos());
        let expected = (0.75 * std::f64::consts::PI).powf(0.25) / std::f64::consts::PI.sqrt();
        assert!((sobolev_ratio(&c).unwrap().unwrap() - expected).abs() < 1e-13);
        let ten = c.scaled(10.0);
        assert!((sobolev_ratio(&ten).unwrap().unwrap() - expected).abs() < 1e-12);
        assert_eq!(sobolev_ratio(&SpectralField::zeros(g)).unwrap(), None);
    }

    #[test]
    fn sobolev_search_is_monotone_in_budget() {
        let a = estimate_sobolev_constant(300, 7).unwrap();
        let b = estimate_sobolev_constant(2_500, 7).unwrap();
        assert!(b.ratio >= a.ratio);
        let again = estimate_sobolev_constant(2_500, 7).unwrap();
        assert_eq!(again.ratio, b.ratio);
        let re = sobolev_ratio(&b.snapshot).unwrap().unwrap();
        assert!((re - b.ratio).abs() < 1e-10);
    }

    #[test]
    fn scaling_identity_lambda_one() {
        let sc = scenario(SMALL_1D);
        assert_eq!(scaling_symmetry_check(&sc, 1).unwrap(), 0.0);
        assert!(scaling_symmetry_check(&sc, 0).is_err());
    }

    #[test]
    fn scaling_linear_only_is_exact() {
        let mut sc = scenario(SMALL_1D);
        sc.integrator.mode = StepMode::LinearOnly;
        sc.integrator.t_end = 0.05;
        let d = scaling_symmetry_check(&sc, 3).unwrap();
        assert!(d <= 1e-10, "{d}");
    }

    #[test]
    fn sweep_zero_amplitude_row() {
        let mut sc = scenario(SMALL_1D);
        sc.integrator.t_end = 0.02;
        let t = criticality_sweep(&[1.2, 1.8], &[0.0, 0.5], &sc, 2).unwrap();
        assert_eq!(t.rows.len(), 4);
        for r in t.rows.iter().filter(|r| r.amplitude == 0.0) {
            assert_eq!(r.e2_growth, 1.0);
            assert!(!r.blowup);
        }
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("alpha,amplitude,E0_final,E2_final,E2_growth,blowup,monitor_E0\n"));
    }

    #[test]
    fn verify_small_run_passes() {
        let sc = scenario(SMALL_1D);
        let rep = verify_scenario(&sc).unwrap();
        assert!(rep.passed(), "{rep:#?}");
    }
}
