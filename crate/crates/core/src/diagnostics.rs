//! Energies, dissipations, identity residuals and monotonicity monitors.
//!
//! The residuals are kept in time-integrated form. For the `L2` level,
//!
//! ```text
//! R_low(t) = | E_0(t)/2 + int_0^t D_0 ds - E_0(0)/2 | / max(E_0(0)/2, 1e-14)
//! ```
//!
//! and analogously at the `H1` and `H2` levels with the cubic source
//! integrals `I`, `J1 + J2` (1-D) or `N2` (2-D) subtracted. The dissipation
//! integrals are accumulated per Fourier mode with a trapezoid rule in the
//! integrating-factor variable `exp(2 |k|^alpha s) |u_hat(k, s)|^2`, which
//! reduces to the plain trapezoid for slowly decaying modes and is exact for
//! pure diffusion. The cubic integrals use the plain trapezoid at step
//! boundaries and are evaluated on a `3n/2` grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::State;
use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField, Transform};

/// Normalizer floor for relative residuals.
pub const RESIDUAL_FLOOR: f64 = 1e-14;

/// Default per-interval relative tolerance of the monotonicity monitors.
pub const DEFAULT_MONITOR_TOL: f64 = 1e-9;

/// `E_beta = ||u||^2_{H^beta} + ||q||^2_{H^beta}` (homogeneous).
pub fn energy(s: &State, beta: f64) -> f64 {
    s.u.sobolev_norm_sq(beta, true) + s.q.sobolev_norm_sq(beta, true)
}

/// `D_beta = ||u||^2_{H^(beta + alpha/2)}` (homogeneous).
pub fn dissipation(s: &State, beta: f64, alpha: f64) -> f64 {
    s.u.sobolev_norm_sq(beta + alpha / 2.0, true)
}

/// Cubic source terms of the higher-order energy identities.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NonlinearIntegrals {
    /// `3/2 int q_x u_x^2` (1-D)
    pub i: f64,
    /// `5/2 int q_x u_xx^2` (1-D)
    pub j1: f64,
    /// `5 int q_xx u_xx u_x` (1-D)
    pub j2: f64,
    /// `int (-grad u . q Lap u + |grad u|^2 div q)` (2-D)
    pub n2: f64,
}

/// Evaluates the cubic integrals by nodal quadrature on `tr`'s grid, which
/// should be the `3/2`-padded grid of the state.
pub fn nonlinear_integrals(s: &State, tr: &mut Transform) -> Result<NonlinearIntegrals> {
    let pg = tr.grid();
    let cell = pg.cell_volume();
    let mut nodes = |f: &SpectralField| -> Result<Vec<f64>> { tr.inverse(&f.resample(pg)?) };
    match s.grid().dim() {
        1 => {
            let ux = s.u.derivative(0);
            let uxx = ux.derivative(0);
            let qx = s.q.component(0).derivative(0);
            let qxx = qx.derivative(0);
            let (ux, uxx, qx, qxx) = (nodes(&ux)?, nodes(&uxx)?, nodes(&qx)?, nodes(&qxx)?);
            let mut out = NonlinearIntegrals::default();
            for j in 0..ux.len() {
                out.i += qx[j] * ux[j] * ux[j];
                out.j1 += qx[j] * uxx[j] * uxx[j];
                out.j2 += qxx[j] * uxx[j] * ux[j];
            }
            out.i *= 1.5 * cell;
            out.j1 *= 2.5 * cell;
            out.j2 *= 5.0 * cell;
            Ok(out)
        }
        _ => {
            let ux = nodes(&s.u.derivative(0))?;
            let uy = nodes(&s.u.derivative(1))?;
            let lap = nodes(&s.u.laplacian())?;
            let q1 = nodes(s.q.component(0))?;
            let q2 = nodes(s.q.component(1))?;
            let div = nodes(&s.q.divergence())?;
            let mut n2 = 0.0;
            for j in 0..ux.len() {
                n2 += -(ux[j] * q1[j] + uy[j] * q2[j]) * lap[j] + (ux[j] * ux[j] + uy[j] * uy[j]) * div[j];
            }
            Ok(NonlinearIntegrals {
                n2: n2 * cell,
                ..Default::default()
            })
        }
    }
}

/// `int_0^1 exp(-z t) (1 - t) dt`
fn phi_start(z: f64) -> f64 {
    if z < 0.1 {
        series(-z)
    } else {
        (z + (-z).exp_m1()) / (z * z)
    }
}

/// `b * int_0^1 exp(z (1 - t)) t dt`, guarded against overflow for large `z`.
fn end_term(b: f64, z: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if z < 0.1 {
        b * series(z)
    } else if z < 600.0 {
        b * (z.exp_m1() - z) / (z * z)
    } else {
        (b.ln() + z - 2.0 * z.ln()).exp() * (1.0 - (1.0 + z) * (-z).exp())
    }
}

/// `sum_{m >= 0} x^m / (m + 2)!`
fn series(x: f64) -> f64 {
    let mut term = 0.5;
    let mut sum = 0.5;
    for m in 1..10 {
        term *= x / (m + 2) as f64;
        sum += term;
    }
    sum
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RowFlags {
    pub blowup: bool,
    pub negative_u: bool,
}

impl fmt::Display for RowFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.blowup {
            parts.push("blowup");
        }
        if self.negative_u {
            parts.push("negative_u");
        }
        f.write_str(&parts.join(";"))
    }
}

/// All monitored quantities at one sampling instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub step: usize,
    pub e0: f64,
    pub e_half: f64,
    pub e1: f64,
    pub e2: f64,
    pub d0: f64,
    pub d_half: f64,
    pub d1: f64,
    pub d2: f64,
    pub u_l2_sq: f64,
    pub u_h1_sq: f64,
    pub mean_u: f64,
    pub mean_q: Vec<f64>,
    pub min_u: f64,
    pub max_u: f64,
    pub q_l2: f64,
    pub curl_norm: f64,
    pub div_q_norm: f64,
    pub grad_q_norm: f64,
    pub int_d0: f64,
    pub int_d1: f64,
    pub int_d2: f64,
    pub int_i: f64,
    pub int_j: f64,
    pub int_n2: f64,
    pub r_low: f64,
    pub r_1: f64,
    /// Only defined in 1-D.
    pub r_2: Option<f64>,
    pub flags: RowFlags,
}

impl DiagnosticsRow {
    /// `||u||^2_{H1} + ||div q||^2_{L2}` (full `H1` norm of `u`).
    pub fn h1_div(&self) -> f64 {
        self.u_l2_sq + self.u_h1_sq + self.div_q_norm * self.div_q_norm
    }

    pub fn is_finite(&self) -> bool {
        [
            self.e0, self.e_half, self.e1, self.e2, self.d0, self.d1, self.d2, self.mean_u, self.min_u,
            self.max_u, self.r_low, self.r_1,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
struct Origin {
    e0: f64,
    e1: f64,
    e2: f64,
    h1_div_hom: f64,
}

/// Accumulates time integrals along a trajectory and produces rows.
#[derive(Debug)]
pub struct Recorder {
    alpha: f64,
    grid: Grid,
    transform: Transform,
    padded: Transform,
    symbol: Vec<f64>,
    k2: Vec<f64>,
    origin: Origin,
    last: NonlinearIntegrals,
    int_d0: f64,
    int_d1: f64,
    int_d2: f64,
    int_i: f64,
    int_j: f64,
    int_n2: f64,
    /// Tolerance below zero before `min_u` is flagged.
    pub positivity_tol: f64,
    warned_negative: bool,
}

impl Recorder {
    pub fn new(alpha: f64, initial: &State) -> Result<Self> {
        let grid = initial.grid();
        let mut padded = Transform::new(grid.padded());
        let last = nonlinear_integrals(initial, &mut padded)?;
        let symbol = (0..grid.len())
            .map(|idx| {
                let k2 = grid.k_norm_sq(idx);
                if k2 == 0.0 {
                    0.0
                } else {
                    k2.powf(alpha / 2.0)
                }
            })
            .collect();
        let k2 = (0..grid.len()).map(|idx| grid.k_norm_sq(idx)).collect();
        Ok(Recorder {
            alpha,
            grid,
            transform: Transform::new(grid),
            padded,
            symbol,
            k2,
            origin: Origin {
                e0: energy(initial, 0.0),
                e1: energy(initial, 1.0),
                e2: energy(initial, 2.0),
                h1_div_hom: h1_div_hom(initial),
            },
            last,
            int_d0: 0.0,
            int_d1: 0.0,
            int_d2: 0.0,
            int_i: 0.0,
            int_j: 0.0,
            int_n2: 0.0,
            positivity_tol: 1e-12,
            warned_negative: false,
        })
    }

    /// Adds the contributions of the step `prev -> next`.
    pub fn advance(&mut self, prev: &State, next: &State) -> Result<()> {
        let h = next.t - prev.t;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for idx in 0..self.grid.len() {
            let lam = self.symbol[idx];
            if lam == 0.0 {
                continue;
            }
            let a = prev.u.coeffs()[idx].norm_sqr();
            let b = next.u.coeffs()[idx].norm_sqr();
            let z = 2.0 * lam * h;
            let w = lam * h * (a * phi_start(z) + end_term(b, z));
            let k2 = self.k2[idx];
            s0 += w;
            s1 += k2 * w;
            s2 += k2 * k2 * w;
        }
        let vol = self.grid.volume();
        self.int_d0 += vol * s0;
        self.int_d1 += vol * s1;
        self.int_d2 += vol * s2;

        let now = nonlinear_integrals(next, &mut self.padded)?;
        self.int_i += 0.5 * h * (self.last.i + now.i);
        self.int_j += 0.5 * h * (self.last.j1 + self.last.j2 + now.j1 + now.j2);
        self.int_n2 += 0.5 * h * (self.last.n2 + now.n2);
        self.last = now;
        Ok(())
    }

    pub fn row(&mut self, s: &State, step: usize) -> Result<DiagnosticsRow> {
        let alpha = self.alpha;
        let nodes = self.transform.inverse(&s.u)?;
        let min_u = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        let max_u = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e0 = energy(s, 0.0);
        let e1 = energy(s, 1.0);
        let e2 = energy(s, 2.0);
        let div_q_norm = s.q.divergence().sobolev_norm(0.0, true);
        let curl_norm = match self.grid.dim() {
            1 => 0.0,
            _ => s.q.curl2d()?.sobolev_norm(0.0, true),
        };
        let rel = |num: f64, e_init: f64| num.abs() / (0.5 * e_init).max(RESIDUAL_FLOOR);
        let r_low = rel(0.5 * e0 + self.int_d0 - 0.5 * self.origin.e0, self.origin.e0);
        let (r_1, r_2) = match self.grid.dim() {
            1 => (
                rel(0.5 * e1 + self.int_d1 - self.int_i - 0.5 * self.origin.e1, self.origin.e1),
                Some(rel(
                    0.5 * e2 + self.int_d2 - self.int_j - 0.5 * self.origin.e2,
                    self.origin.e2,
                )),
            ),
            _ => (
                rel(
                    0.5 * h1_div_hom(s) + self.int_d1 - self.int_n2 - 0.5 * self.origin.h1_div_hom,
                    self.origin.h1_div_hom,
                ),
                None,
            ),
        };
        let negative_u = min_u < -self.positivity_tol;
        if negative_u && !self.warned_negative {
            self.warned_negative = true;
            log::warn!("t = {}: min u = {:e} below zero (flagged on every such row)", s.t, min_u);
        }
        Ok(DiagnosticsRow {
            t: s.t,
            step,
            e0,
            e_half: energy(s, alpha / 2.0),
            e1,
            e2,
            d0: dissipation(s, 0.0, alpha),
            d_half: dissipation(s, alpha / 2.0, alpha),
            d1: dissipation(s, 1.0, alpha),
            d2: dissipation(s, 2.0, alpha),
            u_l2_sq: s.u.sobolev_norm_sq(0.0, true),
            u_h1_sq: s.u.sobolev_norm_sq(1.0, true),
            mean_u: s.u.mean(),
            mean_q: s.q.components().iter().map(SpectralField::mean).collect(),
            min_u,
            max_u,
            q_l2: s.q.sobolev_norm(0.0, true),
            curl_norm,
            div_q_norm,
            grad_q_norm: s.q.gradient_norm(),
            int_d0: self.int_d0,
            int_d1: self.int_d1,
            int_d2: self.int_d2,
            int_i: self.int_i,
            int_j: self.int_j,
            int_n2: self.int_n2,
            r_low,
            r_1,
            r_2,
            flags: RowFlags {
                blowup: false,
                negative_u,
            },
        })
    }
}

/// `||u||^2_{H1} + ||div q||^2_{L2}`, homogeneous in `u`.
fn h1_div_hom(s: &State) -> f64 {
    s.u.sobolev_norm_sq(1.0, true) + s.q.divergence().sobolev_norm_sq(0.0, true)
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Outcome {
    Completed,
    BlowUp { t: f64, reason: String },
}

/// Sampled diagnostics of one run plus its terminal state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dim: usize,
    pub alpha: f64,
    /// Whether the run declared (and was validated for) curl-free `q`.
    pub irrotational: bool,
    pub rows: Vec<DiagnosticsRow>,
    pub final_state: State,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn blew_up(&self) -> bool {
        matches!(self.outcome, Outcome::BlowUp { .. })
    }

    fn max_over(&self, f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
        self.rows.iter().map(f).fold(0.0, f64::max)
    }

    /// Largest `|mean u(t) - mean u(0)|` and `|mean q_i(t) - mean q_i(0)|`.
    pub fn mean_drift(&self) -> (f64, f64) {
        let Some(first) = self.rows.first() else {
            return (0.0, 0.0);
        };
        let du = self.max_over(|r| (r.mean_u - first.mean_u).abs());
        let dq = self.max_over(|r| {
            r.mean_q
                .iter()
                .zip(&first.mean_q)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        (du, dq)
    }

    /// Largest `||curl q|| / ||q||` over the samples (2-D).
    pub fn max_relative_curl(&self) -> f64 {
        self.max_over(|r| if r.q_l2 > 0.0 { r.curl_norm / r.q_l2 } else { r.curl_norm })
    }
}

/// Max over samples of the relative `L2` energy-balance residual.
pub fn residual_energy_balance(tr: &Trajectory) -> f64 {
    tr.max_over(|r| r.r_low)
}

/// Max over samples of the relative `H1` identity residual (1-D).
pub fn residual_h1_1d(tr: &Trajectory) -> Result<f64> {
    if tr.dim != 1 {
        return Err(Error::Dimension {
            op: "residual_h1_1d",
            dim: tr.dim,
        });
    }
    Ok(tr.max_over(|r| r.r_1))
}

/// Max over samples of the relative `H2` identity residual (1-D).
pub fn residual_h2_1d(tr: &Trajectory) -> Result<f64> {
    if tr.dim != 1 {
        return Err(Error::Dimension {
            op: "residual_h2_1d",
            dim: tr.dim,
        });
    }
    Ok(tr.max_over(|r| r.r_2.unwrap_or(f64::NAN)))
}

/// Max over samples of the relative residual of the 2-D identity for
/// `||u||^2_{H1} + ||div q||^2_{L2}`.
pub fn residual_h1_2d(tr: &Trajectory) -> Result<f64> {
    if tr.dim != 2 {
        return Err(Error::Dimension {
            op: "residual_h1_2d",
            dim: tr.dim,
        });
    }
    if !tr.irrotational {
        return Err(Error::Unsupported(
            "residual_h1_2d requires a scenario declared irrotational".into(),
        ));
    }
    Ok(tr.max_over(|r| r.r_1))
}

/// Quantities whose non-increase is asserted by the small-data results.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Monitor {
    /// `E_{alpha/2}`; 1-D, `1 < alpha < 1.5`, small data.
    EHalfAlpha,
    /// `||u||^2_{H1} + ||q||^2_{H1}`; 1-D, `0.5 <= alpha <= 1`, small data.
    E1Full,
    /// `||u||^2_{H1} + ||div q||^2_{L2}`; 2-D, `1 <= alpha < 2`, curl-free small data.
    H1DivQ2d,
    /// `E_0`; unconditional.
    E0,
}

impl Monitor {
    pub const ALL: [Monitor; 4] = [Monitor::EHalfAlpha, Monitor::E1Full, Monitor::H1DivQ2d, Monitor::E0];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::EHalfAlpha => "E_half_alpha",
            Monitor::E1Full => "E1_full",
            Monitor::H1DivQ2d => "H1_divq_2d",
            Monitor::E0 => "E0",
        }
    }

    pub fn quantity(self, r: &DiagnosticsRow) -> f64 {
        match self {
            Monitor::EHalfAlpha => r.e_half,
            Monitor::E1Full => r.e0 + r.e1,
            Monitor::H1DivQ2d => r.h1_div(),
            Monitor::E0 => r.e0,
        }
    }

    /// Hypotheses on `(d, alpha)` under which non-increase is proven.
    pub fn regime(self) -> &'static str {
        match self {
            Monitor::EHalfAlpha => "d = 1, 1 < alpha < 1.5, small H^(alpha/2) data, mean-zero q0",
            Monitor::E1Full => "d = 1, 0.5 <= alpha <= 1, H1 energy below 4/(9 C_S^2), mean-zero q0",
            Monitor::H1DivQ2d => "d = 2, 1 <= alpha < 2, small H1 data, curl-free mean-zero q0",
            Monitor::E0 => "any d, any alpha",
        }
    }

    pub fn in_regime(self, dim: usize, alpha: f64) -> bool {
        match self {
            Monitor::EHalfAlpha => dim == 1 && alpha > 1.0 && alpha < 1.5,
            Monitor::E1Full => dim == 1 && (0.5..=1.0).contains(&alpha),
            Monitor::H1DivQ2d => dim == 2 && (1.0..2.0).contains(&alpha),
            Monitor::E0 => true,
        }
    }

    /// Whether the underlying result assumes `<q0> = 0`.
    pub fn needs_mean_zero_q(self) -> bool {
        !matches!(self, Monitor::E0)
    }
}

impl fmt::Display for Monitor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Monitor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Monitor::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown monitor `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub monitor: Monitor,
    /// Largest increase between consecutive samples (zero if never increasing).
    pub max_increment: f64,
    /// `max_increment` divided by the initial value.
    pub relative_increment: f64,
    /// Relative tolerance per sampling interval.
    pub tolerance: f64,
    pub passed: bool,
    pub in_regime: bool,
    pub regime: String,
}

pub fn monitor_monotone(tr: &Trajectory, monitor: Monitor, tolerance: f64) -> MonitorReport {
    let values: Vec<f64> = tr.rows.iter().map(|r| monitor.quantity(r)).collect();
    let initial = values.first().copied().unwrap_or(0.0);
    let max_increment = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let relative_increment = if initial > 0.0 { max_increment / initial } else { max_increment };
    MonitorReport {
        monitor,
        max_increment,
        relative_increment,
        tolerance,
        passed: max_increment <= tolerance * initial,
        in_regime: monitor.in_regime(tr.dim, tr.alpha),
        regime: monitor.regime().to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrrotationalChecks {
    pub curl_norm: f64,
    pub grad_q_norm: f64,
    pub div_q_norm: f64,
    /// `||q||_L2 / ||div q||_L2`; reported only.
    pub poincare_ratio: f64,
}

pub fn irrotational_checks(s: &State) -> Result<IrrotationalChecks> {
    let curl = s.q.curl2d()?;
    let div_q_norm = s.q.divergence().sobolev_norm(0.0, true);
    Ok(IrrotationalChecks {
        curl_norm: curl.sobolev_norm(0.0, true),
        grad_q_norm: s.q.gradient_norm(),
        div_q_norm,
        poincare_ratio: s.q.sobolev_norm(0.0, true) / div_q_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::VectorField;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn state(g: Grid, u: impl Fn([f64; 2]) -> f64, q: Vec<Box<dyn Fn([f64; 2]) -> f64>>) -> State {
        let comps = q.into_iter().map(|f| SpectralField::from_fn(g, f)).collect();
        State::new(0.0, SpectralField::from_fn(g, u), VectorField::new(comps).unwrap()).unwrap()
    }

    #[test]
    fn energy_examples() {
        let g = Grid::new(1, 32).unwrap();
        let s = state(g, |x| x[0].cos(), vec![Box::new(|x| x[0].sin())]);
        assert_relative_eq!(energy(&s, 0.0), 2.0 * PI, epsilon = 1e-13);
        assert_relative_eq!(energy(&s, 1.0), 2.0 * PI, epsilon = 1e-13);
        let s = state(g, |x| (2.0 * x[0]).cos(), vec![Box::new(|_| 0.0)]);
        // (2 pi) * 2^3 * (1/4 + 1/4)
        assert_relative_eq!(dissipation(&s, 1.0, 1.0), 8.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn quadrature_weights_limits() {
        for z in [1e-8, 1e-3, 0.099, 0.1, 0.5, 3.0, 40.0] {
            // Oracle: midpoint quadrature of the defining integrals.
            let m = 400_000;
            let (mut a, mut b) = (0.0, 0.0);
            for j in 0..m {
                let t = (j as f64 + 0.5) / m as f64;
                a += (-z * t).exp() * (1.0 - t) / m as f64;
                b += (z * (1.0 - t)).exp() * t / m as f64;
            }
            assert_relative_eq!(phi_start(z), a, max_relative = 1e-8);
            assert_relative_eq!(end_term(1.0, z), b, max_relative = 1e-8);
        }
        assert_eq!(end_term(0.0, 1e4), 0.0);
        assert!(end_term(1e-300, 650.0).is_finite());
    }

    #[test]
    fn nonlinear_integrals_match_fine_quadrature() {
        let g = Grid::new(1, 16).unwrap();
        let s = state(
            g,
            |x| 1.0 + 0.3 * x[0].cos() + 0.2 * (3.0 * x[0]).sin(),
            vec![Box::new(|x| 0.5 * (2.0 * x[0]).sin() - 0.1 * (5.0 * x[0]).cos())],
        );
        let mut tr = Transform::new(g.padded());
        let got = nonlinear_integrals(&s, &mut tr).unwrap();
        // Oracle: analytic derivatives, fine midpoint rule.
        let ux = |x: f64| -0.3 * x.sin() + 0.6 * (3.0 * x).cos();
        let uxx = |x: f64| -0.3 * x.cos() - 1.8 * (3.0 * x).sin();
        let qx = |x: f64| (2.0 * x).cos() + 0.5 * (5.0 * x).sin();
        let qxx = |x: f64| -2.0 * (2.0 * x).sin() + 2.5 * (5.0 * x).cos();
        let m = 4000;
        let h = 2.0 * PI / m as f64;
        let (mut i, mut j1, mut j2) = (0.0, 0.0, 0.0);
        for k in 0..m {
            let x = -PI + (k as f64 + 0.5) * h;
            i += 1.5 * qx(x) * ux(x) * ux(x) * h;
            j1 += 2.5 * qx(x) * uxx(x) * uxx(x) * h;
            j2 += 5.0 * qxx(x) * uxx(x) * ux(x) * h;
        }
        assert_relative_eq!(got.i, i, epsilon = 1e-12);
        assert_relative_eq!(got.j1, j1, epsilon = 1e-12);
        assert_relative_eq!(got.j2, j2, epsilon = 1e-11);
    }

    #[test]
    fn irrotational_examples() {
        let g = Grid::new(2, 16).unwrap();
        let phi = SpectralField::from_fn(g, |x| (x[0] + x[1]).sin());
        let s = State::new(0.0, SpectralField::zeros(g), phi.gradient()).unwrap();
        let c = irrotational_checks(&s).unwrap();
        let expect = 2.0 * phi.sobolev_norm(0.0, true);
        assert_relative_eq!(c.grad_q_norm, expect, epsilon = 1e-13);
        assert_relative_eq!(c.div_q_norm, expect, epsilon = 1e-13);
        assert!(c.curl_norm < 1e-14);

        let s = state(g, |_| 0.0, vec![Box::new(|x| x[1].cos()), Box::new(|x| x[0].cos())]);
        assert!(irrotational_checks(&s).unwrap().curl_norm > 1.0);

        let s1 = State::steady(Grid::new(1, 16).unwrap(), 1.0);
        assert!(matches!(irrotational_checks(&s1), Err(Error::Dimension { .. })));
    }

    #[test]
    fn monitor_names_round_trip() {
        for m in Monitor::ALL {
            assert_eq!(m.name().parse::<Monitor>().unwrap(), m);
        }
        assert!("E3".parse::<Monitor>().is_err());
        assert!(Monitor::EHalfAlpha.in_regime(1, 1.25));
        assert!(!Monitor::EHalfAlpha.in_regime(1, 1.6));
        assert!(Monitor::H1DivQ2d.in_regime(2, 1.5));
    }
}
