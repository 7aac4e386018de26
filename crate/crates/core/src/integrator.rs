//! Integrating-factor Heun stepping and the adaptive simulation loop.
//!
//! The diffusion `-Lambda^alpha` is diagonal in Fourier space and is
//! propagated exactly by `exp(-|k|^alpha dt)`; the transport, the `q`
//! source and any forcing are advanced by the two-stage Heun scheme
//! in the integrating-factor variable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::diagnostics::{DiagnosticsRow, Outcome, Recorder, Trajectory};
use crate::dynamics::{Dynamics, ModelParams, State};
use crate::error::{Error, Result};
use crate::spectral::{Grid, LpExponent, SpectralField, VectorField};

/// Default `||u||_inf` cap that labels a run as blown up.
pub const DEFAULT_BLOWUP_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Full,
    /// Drops the transport and the `q` source; forcing is kept.
    LinearOnly,
}

impl StepMode {
    pub fn name(self) -> &'static str {
        match self {
            StepMode::Full => "full",
            StepMode::LinearOnly => "linear_only",
        }
    }
}

impl fmt::Display for StepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StepMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(StepMode::Full),
            "linear_only" => Ok(StepMode::LinearOnly),
            other => Err(format!("unknown mode `{other}` (expected full or linear_only)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub dt_max: f64,
    pub cfl: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub mode: StepMode,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            dt_max: 1e-2,
            cfl: 0.4,
            t_end: 1.0,
            sample_every: 10,
            mode: StepMode::Full,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::param("dt_max", "must be positive"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("cfl", "must lie in (0, 1]"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("t_end", "must be finite and non-negative"));
        }
        if self.sample_every == 0 {
            return Err(Error::param("sample_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// `min(dt_max, cfl / (max|q|/dx + max|u|/dx + 1e-12))`.
pub fn cfl_formula(u_max: f64, q_max: f64, grid: Grid, settings: &IntegratorSettings) -> f64 {
    let dx = grid.spacing();
    let rate = q_max / dx + u_max / dx + 1e-12;
    settings.dt_max.min(settings.cfl / rate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub blowup_cap: f64,
    pub irrotational: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            blowup_cap: DEFAULT_BLOWUP_CAP,
            irrotational: false,
        }
    }
}

/// One-step maps for a fixed model and grid.
#[derive(Debug)]
pub struct Stepper {
    dynamics: Dynamics,
    mode: StepMode,
    nodes: Vec<f64>,
}

impl Stepper {
    pub fn new(params: ModelParams, grid: Grid, mode: StepMode) -> Result<Self> {
        Ok(Stepper {
            dynamics: Dynamics::new(params, grid)?,
            mode,
            nodes: vec![0.0; grid.len()],
        })
    }

    pub fn dynamics(&self) -> &Dynamics {
        &self.dynamics
    }

    pub fn dynamics_mut(&mut self) -> &mut Dynamics {
        &mut self.dynamics
    }

    pub fn mode(&self) -> StepMode {
        self.mode
    }

    /// Explicit (non-diffusive) tendencies of `u` and `q`.
    fn explicit(&mut self, s: &State) -> Result<(SpectralField, VectorField)> {
        match self.mode {
            StepMode::Full => {
                let nu = self.dynamics.transport(s)?;
                let nq = self.dynamics.q_rate(s)?;
                Ok((nu, nq))
            }
            StepMode::LinearOnly => Ok(self
                .dynamics
                .forcing_at(s.t)
                .unwrap_or_else(|| (SpectralField::zeros(s.grid()), VectorField::zeros(s.grid())))),
        }
    }

    /// Complete tendencies including diffusion, for explicit reference schemes.
    pub fn tendency(&mut self, s: &State) -> Result<(SpectralField, VectorField)> {
        let (mut nu, nq) = self.explicit(s)?;
        for ((o, c), m) in nu.coeffs_mut().iter_mut().zip(s.u.coeffs()).zip(self.dynamics.symbol()) {
            *o -= c * m;
        }
        Ok((nu, nq))
    }

    /// One integrating-factor Heun step of size `dt`.
    pub fn step_ifrk2(&mut self, s: &State, dt: f64) -> Result<State> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::param("dt", format!("step must be positive, got {dt}")));
        }
        if !s.is_finite() {
            return Err(Error::Overflow { t: s.t });
        }
        let decay: Vec<f64> = self.dynamics.symbol().iter().map(|m| (-m * dt).exp()).collect();
        let (nu0, nq0) = self.explicit(s)?;

        let mut u1 = s.u.clone();
        for ((c, n), e) in u1.coeffs_mut().iter_mut().zip(nu0.coeffs()).zip(&decay) {
            *c = (*c + n * dt) * e;
        }
        let q1 = &s.q + &nq0.scaled(dt);
        let s1 = State { t: s.t + dt, u: u1, q: q1 };
        let (nu1, nq1) = self.explicit(&s1)?;

        let mut u = s.u.clone();
        for (((c, a), b), e) in u
            .coeffs_mut()
            .iter_mut()
            .zip(nu0.coeffs())
            .zip(nu1.coeffs())
            .zip(&decay)
        {
            *c = *c * e + (a * e + b) * (0.5 * dt);
        }
        let q = &s.q + &(&nq0 + &nq1).scaled(0.5 * dt);
        let next = State { t: s.t + dt, u, q };
        if !next.is_finite() {
            return Err(Error::Overflow { t: next.t });
        }
        Ok(next)
    }

    /// `(max|u|, max_i max|q_i|)` at the nodes.
    pub fn sup_norms(&mut self, s: &State) -> Result<(f64, f64)> {
        let tr = self.dynamics.transform_mut();
        tr.inverse_into(&s.u, &mut self.nodes)?;
        let u_max = LpExponent::Infinity.norm(&self.nodes, 1.0);
        let mut q_max: f64 = 0.0;
        for c in s.q.components() {
            tr.inverse_into(c, &mut self.nodes)?;
            q_max = q_max.max(LpExponent::Infinity.norm(&self.nodes, 1.0));
        }
        Ok((u_max, q_max))
    }

    pub fn cfl_dt(&mut self, s: &State, settings: &IntegratorSettings) -> Result<f64> {
        let (u_max, q_max) = self.sup_norms(s)?;
        Ok(cfl_formula(u_max, q_max, s.grid(), settings))
    }
}

/// Advances `initial` to `settings.t_end`, sampling diagnostics every
/// `sample_every` steps and at the end. `observer` sees each row as soon as
/// it is produced.
pub fn run(
    initial: State,
    params: ModelParams,
    settings: &IntegratorSettings,
    opts: &RunOptions,
    observer: &mut dyn FnMut(&DiagnosticsRow, &State) -> Result<()>,
) -> Result<Trajectory> {
    settings.validate()?;
    let alpha = params.alpha;
    let dim = params.dim;
    let grid = initial.grid();
    let mut stepper = Stepper::new(params, grid, settings.mode)?;
    let mut recorder = Recorder::new(alpha, &initial)?;
    let mut state = initial;
    let mut rows = Vec::new();

    let (mut u_max, mut q_max) = stepper.sup_norms(&state)?;
    let mut first = recorder.row(&state, 0)?;
    let mut outcome = Outcome::Completed;
    if !u_max.is_finite() || u_max > opts.blowup_cap {
        first.flags.blowup = true;
        outcome = Outcome::BlowUp {
            t: state.t,
            reason: format!("initial max|u| = {u_max:e} exceeds cap"),
        };
    }
    observer(&first, &state)?;
    rows.push(first);

    let mut step = 0usize;
    let t_end = settings.t_end;
    while outcome == Outcome::Completed && state.t < t_end {
        let mut dt = cfl_formula(u_max, q_max, grid, settings);
        let last = state.t + dt >= t_end - 1e-12 * t_end.max(1.0);
        if last {
            dt = t_end - state.t;
        }
        let mut next = match stepper.step_ifrk2(&state, dt) {
            Ok(next) => next,
            Err(Error::Overflow { t }) => {
                outcome = Outcome::BlowUp {
                    t,
                    reason: "non-finite values".into(),
                };
                flag_last(&mut rows, &mut recorder, &state, step, observer)?;
                break;
            }
            Err(e) => return Err(e),
        };
        if last {
            next.t = t_end;
        }
        recorder.advance(&state, &next)?;
        state = next;
        step += 1;
        (u_max, q_max) = stepper.sup_norms(&state)?;
        let blown = !u_max.is_finite() || u_max > opts.blowup_cap;
        if blown || last || step.is_multiple_of(settings.sample_every) {
            let mut row = recorder.row(&state, step)?;
            if blown {
                row.flags.blowup = true;
                outcome = Outcome::BlowUp {
                    t: state.t,
                    reason: format!("max|u| = {u_max:e} exceeds cap {:e}", opts.blowup_cap),
                };
            }
            observer(&row, &state)?;
            rows.push(row);
        }
    }

    Ok(Trajectory {
        dim,
        alpha,
        irrotational: opts.irrotational,
        rows,
        final_state: state,
        outcome,
    })
}

fn flag_last(
    rows: &mut Vec<DiagnosticsRow>,
    recorder: &mut Recorder,
    state: &State,
    step: usize,
    observer: &mut dyn FnMut(&DiagnosticsRow, &State) -> Result<()>,
) -> Result<()> {
    match rows.last_mut() {
        Some(last) if last.t == state.t => last.flags.blowup = true,
        _ => {
            let mut row = recorder.row(state, step)?;
            row.flags.blowup = true;
            observer(&row, state)?;
            rows.push(row);
        }
    }
    Ok(())
}

/// Builds the scenario's initial state and runs it without streaming output.
pub fn simulate(sc: &Scenario) -> Result<Trajectory> {
    let initial = sc.initial_state()?;
    run(initial, sc.params.clone(), &sc.integrator, &sc.run_options(), &mut |_, _| Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Kinetics;

    fn g1(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    fn stepper(g: Grid, alpha: f64, mode: StepMode) -> Stepper {
        Stepper::new(ModelParams::new(g.dim(), alpha, Kinetics::Quadratic).unwrap(), g, mode).unwrap()
    }

    fn smooth(g: Grid, amp: f64) -> State {
        State::new(
            0.0,
            SpectralField::from_fn(g, |x| 1.0 + amp * x[0].cos() + 0.5 * amp * (2.0 * x[0]).sin()),
            VectorField::new(vec![SpectralField::from_fn(g, |x| amp * x[0].sin())]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn linear_only_step_is_exact() {
        let g = g1(32);
        let mut st = stepper(g, 1.0, StepMode::LinearOnly);
        let s = State::new(
            0.0,
            SpectralField::from_fn(g, |x| (2.0 * x[0]).cos()),
            VectorField::new(vec![SpectralField::from_fn(g, |x| x[0].sin())]).unwrap(),
        )
        .unwrap();
        for dt in [1e-3, 0.37, 5.0] {
            let next = st.step_ifrk2(&s, dt).unwrap();
            let expect = SpectralField::from_fn(g, |x| (-2.0 * dt).exp() * (2.0 * x[0]).cos());
            assert!(next.u.max_coeff_diff(&expect).unwrap() < 1e-13);
            assert_eq!(next.q, s.q);
        }
    }

    #[test]
    fn steady_state_is_fixed_point() {
        let g = g1(32);
        let mut st = stepper(g, 1.3, StepMode::Full);
        let s = State::steady(g, 0.7);
        for dt in [1e-4, 0.1, 3.0] {
            let next = st.step_ifrk2(&s, dt).unwrap();
            assert_eq!(next.u, s.u);
            assert_eq!(next.q, s.q);
        }
    }

    #[test]
    fn local_error_is_third_order() {
        // Oracle: Richardson comparison of one step against two half steps.
        let g = g1(64);
        let mut st = stepper(g, 1.4, StepMode::Full);
        let s = smooth(g, 0.5);
        let mut diffs = Vec::new();
        for dt in [0.04, 0.02, 0.01, 0.005] {
            let one = st.step_ifrk2(&s, dt).unwrap();
            let half = st.step_ifrk2(&s, dt / 2.0).unwrap();
            let two = st.step_ifrk2(&half, dt / 2.0).unwrap();
            let d = one.u.max_coeff_diff(&two.u).unwrap().max(one.q.max_coeff_diff(&two.q).unwrap());
            diffs.push(d);
        }
        for w in diffs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((6.5..9.5).contains(&ratio), "ratio {ratio} from {diffs:?}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let g = g1(16);
        let mut st = stepper(g, 1.0, StepMode::Full);
        let s = State::steady(g, 1.0);
        assert!(st.step_ifrk2(&s, 0.0).is_err());
        assert!(st.step_ifrk2(&s, -1.0).is_err());
        let mut bad = s.clone();
        bad.u = SpectralField::constant(g, f64::NAN);
        assert!(matches!(st.step_ifrk2(&bad, 0.1), Err(Error::Overflow { .. })));
    }

    #[test]
    fn cfl_examples() {
        let settings = IntegratorSettings {
            dt_max: 0.05,
            ..Default::default()
        };
        let g = Grid::new(1, 128).unwrap();
        let mut st = stepper(g, 1.0, StepMode::Full);
        assert_eq!(st.cfl_dt(&State::steady(g, 0.0), &settings).unwrap(), 0.05);

        let s = State::new(
            0.0,
            SpectralField::zeros(g),
            VectorField::new(vec![SpectralField::from_fn(g, |x| x[0].cos())]).unwrap(),
        )
        .unwrap();
        let dt = st.cfl_dt(&s, &settings).unwrap();
        assert!((dt - 0.4 * g.spacing()).abs() < 1e-12);
        let dt2 = st.cfl_dt(&s.scaled(2.0), &settings).unwrap();
        assert!((dt2 - dt / 2.0).abs() < 1e-12);
    }

    #[test]
    fn settings_validation() {
        let ok = IntegratorSettings::default();
        assert!(ok.validate().is_ok());
        for bad in [
            IntegratorSettings { dt_max: 0.0, ..ok.clone() },
            IntegratorSettings { cfl: 1.5, ..ok.clone() },
            IntegratorSettings { sample_every: 0, ..ok.clone() },
            IntegratorSettings { t_end: f64::NAN, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn run_samples_start_and_end() {
        let g = g1(32);
        let params = ModelParams::new(1, 1.5, Kinetics::Quadratic).unwrap();
        let settings = IntegratorSettings {
            dt_max: 0.013,
            t_end: 0.1,
            sample_every: 3,
            ..Default::default()
        };
        let tr = run(smooth(g, 0.1), params, &settings, &RunOptions::default(), &mut |_, _| Ok(())).unwrap();
        assert_eq!(tr.rows[0].t, 0.0);
        assert_eq!(tr.rows.last().unwrap().t, 0.1);
        assert_eq!(tr.final_state.t, 0.1);
        assert!(tr.rows.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(tr.outcome, Outcome::Completed);
    }

    #[test]
    fn steady_run_has_zero_residuals() {
        let g = g1(32);
        let params = ModelParams::new(1, 1.2, Kinetics::Quadratic).unwrap();
        let settings = IntegratorSettings {
            t_end: 1.0,
            sample_every: 5,
            ..Default::default()
        };
        let tr = run(State::steady(g, 2.0), params, &settings, &RunOptions::default(), &mut |_, _| Ok(())).unwrap();
        for r in &tr.rows {
            assert_eq!(r.e0, tr.rows[0].e0);
            assert!(r.r_low <= 1e-13 && r.r_1 <= 1e-13 && r.r_2.unwrap() <= 1e-13);
        }
    }

    #[test]
    fn cap_flags_blowup() {
        let g = g1(32);
        let params = ModelParams::new(1, 1.0, Kinetics::Quadratic).unwrap();
        let settings = IntegratorSettings {
            t_end: 0.5,
            ..Default::default()
        };
        let opts = RunOptions {
            blowup_cap: 0.5,
            ..Default::default()
        };
        let tr = run(smooth(g, 0.1), params, &settings, &opts, &mut |_, _| Ok(())).unwrap();
        assert!(tr.blew_up());
        assert!(tr.rows.last().unwrap().flags.blowup);
        assert_eq!(tr.rows.len(), 1);
    }
}
