//! Right-hand side of the model system
//!
//! ```text
//! u_t = -Lambda^alpha u + div(u q)
//! q_t = grad f(u)
//! ```
//!
//! with `f(u) = u^2 / 2` (quadratic) or `f(u) = u` (linear), plus optional
//! forcing for manufactured solutions. Quadratic products are formed at the
//! nodes and truncated by the 2/3 rule.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{check_alpha, Grid, SpectralField, Transform, VectorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kinetics {
    /// `f(u) = u^2 / 2`
    Quadratic,
    /// `f(u) = u`
    Linear,
}

impl Kinetics {
    pub fn f(self, u: f64) -> f64 {
        match self {
            Kinetics::Quadratic => 0.5 * u * u,
            Kinetics::Linear => u,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Kinetics::Quadratic => "quadratic",
            Kinetics::Linear => "linear",
        }
    }
}

impl fmt::Display for Kinetics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kinetics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "quadratic" => Ok(Kinetics::Quadratic),
            "linear" => Ok(Kinetics::Linear),
            other => Err(format!("unknown kinetics `{other}` (expected quadratic or linear)")),
        }
    }
}

/// Time-dependent source terms `(F_u, F_q)` added to the two equations.
pub trait Forcing: Send + Sync + fmt::Debug {
    fn eval(&self, t: f64, grid: Grid) -> (SpectralField, VectorField);
}

#[derive(Debug, Clone)]
pub struct ModelParams {
    pub dim: usize,
    pub alpha: f64,
    pub kinetics: Kinetics,
    pub dealias: bool,
    pub forcing: Option<Arc<dyn Forcing>>,
}

impl ModelParams {
    pub fn new(dim: usize, alpha: f64, kinetics: Kinetics) -> Result<Self> {
        let p = ModelParams {
            dim,
            alpha,
            kinetics,
            dealias: true,
            forcing: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_forcing(mut self, forcing: Arc<dyn Forcing>) -> Self {
        self.forcing = Some(forcing);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::param("d", format!("dimension must be 1 or 2, got {}", self.dim)));
        }
        check_alpha(self.alpha)
    }
}

/// `(u, q)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub u: SpectralField,
    pub q: VectorField,
}

impl State {
    pub fn new(t: f64, u: SpectralField, q: VectorField) -> Result<Self> {
        if u.grid() != q.grid() {
            return Err(Error::GridMismatch);
        }
        Ok(State { t, u, q })
    }

    /// The homogeneous steady state `(c, 0)`.
    pub fn steady(grid: Grid, c: f64) -> Self {
        State {
            t: 0.0,
            u: SpectralField::constant(grid, c),
            q: VectorField::zeros(grid),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.u.is_finite() && self.q.is_finite()
    }

    /// Multiplies both fields by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        State {
            t: self.t,
            u: self.u.scaled(a),
            q: self.q.scaled(a),
        }
    }
}

/// Evaluates the right-hand side for one grid; owns its transform workspace.
#[derive(Debug)]
pub struct Dynamics {
    params: ModelParams,
    grid: Grid,
    transform: Transform,
    /// `|k|^alpha` per coefficient.
    symbol: Vec<f64>,
    u_nodes: Vec<f64>,
    work: Vec<f64>,
    prod: Vec<f64>,
}

impl Dynamics {
    pub fn new(params: ModelParams, grid: Grid) -> Result<Self> {
        params.validate()?;
        if params.dim != grid.dim() {
            return Err(Error::param(
                "d",
                format!("model dimension {} does not match grid dimension {}", params.dim, grid.dim()),
            ));
        }
        let symbol = (0..grid.len())
            .map(|idx| {
                let k2 = grid.k_norm_sq(idx);
                if k2 == 0.0 {
                    0.0
                } else {
                    k2.powf(params.alpha / 2.0)
                }
            })
            .collect();
        Ok(Dynamics {
            params,
            grid,
            transform: Transform::new(grid),
            symbol,
            u_nodes: vec![0.0; grid.len()],
            work: vec![0.0; grid.len()],
            prod: vec![0.0; grid.len()],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    pub fn transform(&self) -> &Transform {
        &self.transform
    }

    pub fn transform_mut(&mut self) -> &mut Transform {
        &mut self.transform
    }

    fn check(&self, s: &State) -> Result<()> {
        if s.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Forward transform of `self.prod`, truncated when dealiasing is on.
    fn product_to_spectral(&mut self) -> Result<SpectralField> {
        let mut out = self.transform.forward(&self.prod)?;
        if self.params.dealias {
            out.dealias_in_place();
        }
        Ok(out)
    }

    pub fn forcing_at(&self, t: f64) -> Option<(SpectralField, VectorField)> {
        self.params.forcing.as_ref().map(|f| f.eval(t, self.grid))
    }

    /// `div(u q) + F_u`: the explicit part of the `u` equation.
    pub fn transport(&mut self, s: &State) -> Result<SpectralField> {
        self.check(s)?;
        self.transform.inverse_into(&s.u, &mut self.u_nodes)?;
        let mut out = SpectralField::zeros(self.grid);
        for axis in 0..self.grid.dim() {
            self.transform.inverse_into(s.q.component(axis), &mut self.work)?;
            for ((p, u), q) in self.prod.iter_mut().zip(&self.u_nodes).zip(&self.work) {
                *p = u * q;
            }
            let flux = self.product_to_spectral()?;
            out += &flux.derivative(axis);
        }
        if let Some((fu, _)) = self.forcing_at(s.t) {
            out += &fu;
        }
        Ok(out)
    }

    /// Full `u` tendency `-Lambda^alpha u + div(u q) + F_u`.
    pub fn rhs_u(&mut self, s: &State) -> Result<SpectralField> {
        let mut out = self.transport(s)?;
        for ((o, c), m) in out.coeffs_mut().iter_mut().zip(s.u.coeffs()).zip(&self.symbol) {
            *o -= c * m;
        }
        Ok(out)
    }

    /// `grad f(u) + F_q` in product form: `u grad u` for quadratic kinetics.
    pub fn rhs_q(&mut self, s: &State) -> Result<VectorField> {
        self.check(s)?;
        let mut out = match self.params.kinetics {
            Kinetics::Linear => s.u.gradient(),
            Kinetics::Quadratic => {
                self.transform.inverse_into(&s.u, &mut self.u_nodes)?;
                let mut comps = Vec::with_capacity(self.grid.dim());
                for axis in 0..self.grid.dim() {
                    self.transform.inverse_into(&s.u.derivative(axis), &mut self.work)?;
                    for ((p, u), du) in self.prod.iter_mut().zip(&self.u_nodes).zip(&self.work) {
                        *p = u * du;
                    }
                    comps.push(self.product_to_spectral()?);
                }
                VectorField::new(comps)?
            }
        };
        self.add_q_forcing(s.t, &mut out);
        Ok(out)
    }

    /// `grad(P(u^2) / 2) + F_q`, exactly curl-free before forcing. Only
    /// meaningful for quadratic kinetics.
    pub fn rhs_q_gradient_form(&mut self, s: &State) -> Result<VectorField> {
        self.check(s)?;
        if self.params.kinetics != Kinetics::Quadratic {
            return Err(Error::Unsupported(
                "gradient-form q update requires quadratic kinetics".into(),
            ));
        }
        self.transform.inverse_into(&s.u, &mut self.u_nodes)?;
        for (p, u) in self.prod.iter_mut().zip(&self.u_nodes) {
            *p = 0.5 * u * u;
        }
        let potential = self.product_to_spectral()?;
        let mut out = potential.gradient();
        self.add_q_forcing(s.t, &mut out);
        Ok(out)
    }

    /// The `q` tendency used by the time steppers: gradient form for
    /// quadratic kinetics, `grad u` for linear kinetics.
    pub fn q_rate(&mut self, s: &State) -> Result<VectorField> {
        match self.params.kinetics {
            Kinetics::Quadratic => self.rhs_q_gradient_form(s),
            Kinetics::Linear => self.rhs_q(s),
        }
    }

    fn add_q_forcing(&self, t: f64, out: &mut VectorField) {
        if let Some((_, fq)) = self.forcing_at(t) {
            for (o, f) in out.components_mut().iter_mut().zip(fq.components()) {
                *o += f;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(g: Grid, f: impl Fn([f64; 2]) -> f64) -> SpectralField {
        SpectralField::from_fn(g, f)
    }

    fn state1(g: Grid, u: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64) -> State {
        State::new(
            0.0,
            field(g, |x| u(x[0])),
            VectorField::new(vec![field(g, |x| q(x[0]))]).unwrap(),
        )
        .unwrap()
    }

    fn dynamics(g: Grid, alpha: f64, kin: Kinetics) -> Dynamics {
        Dynamics::new(ModelParams::new(g.dim(), alpha, kin).unwrap(), g).unwrap()
    }

    #[test]
    fn rhs_u_examples() {
        let g = Grid::new(1, 32).unwrap();
        let mut dy = dynamics(g, 2.0, Kinetics::Quadratic);
        let s = state1(g, f64::cos, |_| 0.0);
        let r = dy.rhs_u(&s).unwrap();
        assert!(r.max_coeff_diff(&field(g, |x| -x[0].cos())).unwrap() < 1e-14);

        let s = state1(g, f64::cos, f64::sin);
        let r = dy.rhs_u(&s).unwrap();
        let expect = field(g, |x| -x[0].cos() + (2.0 * x[0]).cos());
        assert!(r.max_coeff_diff(&expect).unwrap() < 1e-14);

        let s = State::steady(g, 1.3);
        assert!(dy.rhs_u(&s).unwrap().coeffs().iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn rhs_q_examples() {
        let g = Grid::new(1, 32).unwrap();
        let s = state1(g, f64::cos, |_| 0.0);
        let expect = field(g, |x| -0.5 * (2.0 * x[0]).sin());
        let mut quad = dynamics(g, 1.0, Kinetics::Quadratic);
        let r = quad.rhs_q(&s).unwrap();
        assert!(r.component(0).max_coeff_diff(&expect).unwrap() < 1e-14);
        let rg = quad.rhs_q_gradient_form(&s).unwrap();
        assert!(rg.max_coeff_diff(&r).unwrap() < 1e-13);

        let mut lin = dynamics(g, 1.0, Kinetics::Linear);
        let r = lin.rhs_q(&s).unwrap();
        assert!(r.component(0).max_coeff_diff(&field(g, |x| -x[0].sin())).unwrap() < 1e-14);
        assert!(matches!(lin.rhs_q_gradient_form(&s), Err(Error::Unsupported(_))));

        let c = State::steady(g, 2.0);
        for r in [quad.rhs_q(&c).unwrap(), quad.rhs_q_gradient_form(&c).unwrap(), lin.rhs_q(&c).unwrap()] {
            assert!(r.component(0).coeffs().iter().all(|z| z.norm() < 1e-15));
        }
    }

    #[test]
    fn gradient_form_is_curl_free_in_2d() {
        let g = Grid::new(2, 16).unwrap();
        let mut dy = dynamics(g, 1.5, Kinetics::Quadratic);
        let u = field(g, |x| x[0].sin() * x[1].sin());
        let s = State::new(0.0, u, VectorField::zeros(g)).unwrap();
        let r = dy.rhs_q_gradient_form(&s).unwrap();
        let curl = r.curl2d().unwrap();
        assert!(curl.coeffs().iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn grid_mismatch_rejected() {
        let g = Grid::new(1, 32).unwrap();
        let mut dy = dynamics(g, 1.0, Kinetics::Quadratic);
        let other = State::steady(Grid::new(1, 16).unwrap(), 1.0);
        assert!(matches!(dy.rhs_u(&other), Err(Error::GridMismatch)));
        assert!(matches!(dy.rhs_q(&other), Err(Error::GridMismatch)));
        let bad = State::new(0.0, SpectralField::zeros(g), VectorField::zeros(Grid::new(1, 16).unwrap()));
        assert!(bad.is_err());
    }

    #[test]
    fn model_dimension_must_match_grid() {
        let p = ModelParams::new(2, 1.0, Kinetics::Quadratic).unwrap();
        assert!(Dynamics::new(p, Grid::new(1, 16).unwrap()).is_err());
        assert!(ModelParams::new(1, 2.5, Kinetics::Quadratic).is_err());
    }
}
