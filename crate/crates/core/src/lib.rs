//! Pseudo-spectral simulation of the fractional hyperbolic-parabolic
//! chemotaxis system
//!
//! ```text
//! u_t = -Lambda^alpha u + div(u q),    q_t = grad f(u),
//! ```
//!
//! on the periodic box `[-pi, pi]^d`, `d = 1, 2`, together with the energy
//! bookkeeping used to check its dissipation identities.

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod output;
pub mod runner;
pub mod snapshot;
pub mod spectral;
pub mod verification;

pub use config::{parse_config, parse_config_with, ConfigError, ParseOptions, Scenario};
pub use diagnostics::{DiagnosticsRow, Monitor, MonitorReport, Outcome, Trajectory};
pub use dynamics::{Dynamics, Forcing, Kinetics, ModelParams, State};
pub use error::{Error, Result};
pub use integrator::{run, simulate, IntegratorSettings, RunOptions, StepMode, Stepper};
pub use snapshot::Snapshot;
pub use spectral::{Grid, SpectralField, Transform, VectorField};
