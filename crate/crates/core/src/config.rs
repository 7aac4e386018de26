//! Scenario files: `key = value` lines grouped in `[section]`s.
//!
//! ```text
//! [model]
//! d = 1
//! alpha = 1.6
//! n = 128
//!
//! [integrator]
//! t_end = 0.5
//!
//! [initial]
//! u0 = "1 + 0.1*cos(1)"
//! q0 = "0.1*sin(1)"
//! ```
//!
//! Initial data are mode lists: sums of constants and `a*cos(k)` /
//! `a*sin(k)` terms, with `k` an integer (1-D) or a pair `k1,k2` (2-D)
//! standing for `cos(k1 x + k2 y)`. In 2-D, `q0 = "grad(...)"` builds a
//! gradient field; otherwise the components are given as `q0_x` / `q0_y`.
//! Unknown sections and keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagnostics::{Monitor, DEFAULT_MONITOR_TOL};
use crate::dynamics::{Kinetics, ModelParams, State};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorSettings, RunOptions, StepMode, DEFAULT_BLOWUP_CAP};
use crate::snapshot::Snapshot;
use crate::spectral::{Grid, SpectralField, Transform, VectorField};

/// A rejected configuration, pointing at the offending key and line
/// (line 0 when the problem is not tied to one line).
#[derive(Debug, Clone, Error, PartialEq)]
#[error("config line {line}, key `{key}`: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(line: usize, key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            line,
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wave {
    Const,
    Cos,
    Sin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeTerm {
    pub amp: f64,
    pub wave: Wave,
    /// Wavevector; only the first entry is used in 1-D.
    pub k: [i64; 2],
    /// Number of wavevector entries written (1 or 2); 0 for constants.
    pub arity: usize,
}

/// A finite trigonometric sum, exactly representable on a large enough grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeList {
    pub terms: Vec<ModeTerm>,
}

impl ModeList {
    pub fn parse(text: &str) -> Result<Self, String> {
        Parser::new(text).expression()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let phase = t.k[0] as f64 * x[0] + t.k[1] as f64 * x[1];
                match t.wave {
                    Wave::Const => t.amp,
                    Wave::Cos => t.amp * phase.cos(),
                    Wave::Sin => t.amp * phase.sin(),
                }
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| match t.wave {
                Wave::Const => t.amp,
                Wave::Cos if t.k == [0, 0] => t.amp,
                _ => 0.0,
            })
            .sum()
    }

    fn check_dim(&self, dim: usize) -> Result<(), String> {
        for t in &self.terms {
            if t.wave != Wave::Const && t.arity != dim {
                return Err(format!(
                    "mode with {} wavenumber(s) in a {dim}-D scenario",
                    t.arity
                ));
            }
        }
        Ok(())
    }

    /// Spectral coefficients assembled directly; rejects modes that do not
    /// fit below the grid's Nyquist frequency.
    pub fn to_field(&self, grid: Grid) -> Result<SpectralField, String> {
        self.check_dim(grid.dim())?;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.len()];
        for t in &self.terms {
            let add = |coeffs: &mut Vec<Complex64>, k: [i64; 2], v: Complex64| -> Result<(), String> {
                let idx = grid
                    .index_of(k)
                    .ok_or_else(|| format!("mode {:?} is not band-limited on a grid of {grid}", &k[..grid.dim()]))?;
                coeffs[idx] += v;
                Ok(())
            };
            let neg = [-t.k[0], -t.k[1]];
            match t.wave {
                Wave::Const => add(&mut coeffs, [0, 0], Complex64::new(t.amp, 0.0))?,
                Wave::Cos if t.k == [0, 0] => add(&mut coeffs, [0, 0], Complex64::new(t.amp, 0.0))?,
                Wave::Sin if t.k == [0, 0] => {}
                Wave::Cos => {
                    add(&mut coeffs, t.k, Complex64::new(0.5 * t.amp, 0.0))?;
                    add(&mut coeffs, neg, Complex64::new(0.5 * t.amp, 0.0))?;
                }
                Wave::Sin => {
                    add(&mut coeffs, t.k, Complex64::new(0.0, -0.5 * t.amp))?;
                    add(&mut coeffs, neg, Complex64::new(0.0, 0.5 * t.amp))?;
                }
            }
        }
        SpectralField::from_coeffs(grid, coeffs).map_err(|e| e.to_string())
    }
}

impl fmt::Display for ModeList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let (sign, amp) = if t.amp.is_sign_negative() { ("-", -t.amp) } else { ("+", t.amp) };
            if i == 0 {
                if sign == "-" {
                    f.write_str("-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            match t.wave {
                Wave::Const => write!(f, "{amp}")?,
                Wave::Cos | Wave::Sin => {
                    let name = if t.wave == Wave::Cos { "cos" } else { "sin" };
                    let k = if t.arity == 2 {
                        format!("{},{}", t.k[0], t.k[1])
                    } else {
                        format!("{}", t.k[0])
                    };
                    write!(f, "{amp}*{name}({k})")?;
                }
            }
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            s: text.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{}` at offset {}", c as char, self.pos))
        }
    }

    fn expression(&mut self) -> Result<ModeList, String> {
        let mut terms = Vec::new();
        let mut sign = if self.eat(b'-') {
            -1.0
        } else {
            self.eat(b'+');
            1.0
        };
        loop {
            let mut t = self.term()?;
            t.amp *= sign;
            terms.push(t);
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                Some(c) => return Err(format!("unexpected `{}` at offset {}", c as char, self.pos)),
            }
        }
        Ok(ModeList { terms })
    }

    fn term(&mut self) -> Result<ModeTerm, String> {
        let amp = match self.peek() {
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let a = self.number()?;
                if !self.eat(b'*') {
                    return Ok(ModeTerm {
                        amp: a,
                        wave: Wave::Const,
                        k: [0, 0],
                        arity: 0,
                    });
                }
                a
            }
            _ => 1.0,
        };
        self.skip_ws();
        let wave = if self.s[self.pos..].starts_with(b"cos") {
            Wave::Cos
        } else if self.s[self.pos..].starts_with(b"sin") {
            Wave::Sin
        } else {
            return Err(format!("expected a number, cos(..) or sin(..) at offset {}", self.pos));
        };
        self.pos += 3;
        self.expect(b'(')?;
        let mut k = [0i64; 2];
        k[0] = self.integer()?;
        let mut arity = 1;
        if self.eat(b',') {
            k[1] = self.integer()?;
            arity = 2;
        }
        self.expect(b')')?;
        Ok(ModeTerm { amp, wave, k, arity })
    }

    fn integer(&mut self) -> Result<i64, String> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.s.len() && self.s[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("");
        text.parse().map_err(|_| format!("expected an integer wavenumber at offset {start}"))
    }

    fn number(&mut self) -> Result<f64, String> {
        self.skip_ws();
        let start = self.pos;
        let s = self.s;
        while self.pos < s.len() && (s[self.pos].is_ascii_digit() || s[self.pos] == b'.') {
            self.pos += 1;
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            while self.pos < s.len() && s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).unwrap_or("");
        text.parse().map_err(|_| format!("malformed number `{text}`"))
    }
}

/// How `q0` is described.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorRecipe {
    /// One mode list per component.
    Components(Vec<ModeList>),
    /// `q0 = grad(potential)`.
    Gradient(ModeList),
}

impl VectorRecipe {
    pub fn to_field(&self, grid: Grid) -> Result<VectorField, String> {
        match self {
            VectorRecipe::Components(c) => {
                let comps = c.iter().map(|m| m.to_field(grid)).collect::<Result<Vec<_>, _>>()?;
                VectorField::new(comps).map_err(|e| e.to_string())
            }
            VectorRecipe::Gradient(phi) => Ok(phi.to_field(grid)?.gradient()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `(1, 0)`.
    Steady,
    /// Seeded smooth data: `u` near 1, `q` a mean-zero gradient.
    Random,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Steady => "steady",
            Preset::Random => "random",
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "steady" => Ok(Preset::Steady),
            "random" => Ok(Preset::Random),
            other => Err(format!("unknown preset `{other}` (expected steady or random)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialRecipe {
    Modes { u: ModeList, q: VectorRecipe },
    Preset { preset: Preset, amplitude: f64 },
    Snapshot(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypotheses {
    pub irrotational: bool,
    pub nonnegative_u0: bool,
    pub monitors: Vec<Monitor>,
    pub monitor_tol: f64,
}

impl Default for Hypotheses {
    fn default() -> Self {
        Hypotheses {
            irrotational: false,
            nonnegative_u0: false,
            monitors: vec![Monitor::E0],
            monitor_tol: DEFAULT_MONITOR_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPlan {
    /// File name of the diagnostics CSV, relative to the output directory.
    pub csv: String,
    /// Write a snapshot every this many diagnostics rows; 0 disables.
    pub snapshot_every: usize,
}

/// Tolerances checked by the `verify` subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyTolerances {
    pub r_low: f64,
    pub r_1: f64,
    pub r_2: f64,
    pub mean: f64,
    pub curl: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            r_low: 1e-8,
            r_1: 1e-7,
            r_2: 1e-6,
            mean: 1e-12,
            curl: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepPlan {
    pub alphas: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Full description of a run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub n: usize,
    pub params: ModelParams,
    pub integrator: IntegratorSettings,
    pub blowup_cap: f64,
    pub initial: InitialRecipe,
    pub hypotheses: Hypotheses,
    pub output: OutputPlan,
    pub verify: VerifyTolerances,
    pub sweep: SweepPlan,
    pub scaling_lambda: usize,
    pub sobolev_budget: usize,
}

impl Scenario {
    pub fn grid(&self) -> Grid {
        Grid::new(self.params.dim, self.n).expect("validated at parse time")
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            blowup_cap: self.blowup_cap,
            irrotational: self.hypotheses.irrotational || self.params.dim == 1,
        }
    }

    pub fn initial_state(&self) -> Result<State> {
        let grid = self.grid();
        match &self.initial {
            InitialRecipe::Modes { u, q } => {
                let key_err = |key: &str, m: String| Error::Config(ConfigError::new(0, key, m));
                let u = u.to_field(grid).map_err(|m| key_err("u0", m))?;
                let q = q.to_field(grid).map_err(|m| key_err("q0", m))?;
                State::new(0.0, u, q)
            }
            InitialRecipe::Preset { preset, amplitude } => Ok(preset_state(*preset, grid, *amplitude, self.seed)),
            InitialRecipe::Snapshot(path) => {
                let snap = Snapshot::read_file(path)?;
                if snap.header.d != self.params.dim || snap.header.n != self.n {
                    return Err(Error::Config(ConfigError::new(
                        0,
                        "snapshot",
                        format!(
                            "snapshot grid (d = {}, n = {}) does not match the model (d = {}, n = {})",
                            snap.header.d, snap.header.n, self.params.dim, self.n
                        ),
                    )));
                }
                snap.to_state()
            }
        }
    }

    /// Normalized `key = value` dump with every default materialized.
    pub fn to_config(&self) -> String {
        let mut out = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            out.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                out.push_str(&format!("{k} = {v}\n"));
            }
            out.push('\n');
        };
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        section("scenario", vec![("name", self.name.clone()), ("seed", self.seed.to_string())]);
        section(
            "model",
            vec![
                ("d", self.params.dim.to_string()),
                ("alpha", self.params.alpha.to_string()),
                ("n", self.n.to_string()),
                ("kinetics", self.params.kinetics.to_string()),
                ("dealias", self.params.dealias.to_string()),
            ],
        );
        section(
            "integrator",
            vec![
                ("t_end", self.integrator.t_end.to_string()),
                ("dt_max", self.integrator.dt_max.to_string()),
                ("cfl", self.integrator.cfl.to_string()),
                ("sample_every", self.integrator.sample_every.to_string()),
                ("mode", self.integrator.mode.to_string()),
                ("blowup_cap", self.blowup_cap.to_string()),
            ],
        );
        let initial = match &self.initial {
            InitialRecipe::Modes { u, q } => {
                let mut v = vec![("u0", format!("\"{u}\""))];
                match q {
                    VectorRecipe::Gradient(phi) => v.push(("q0", format!("\"grad({phi})\""))),
                    VectorRecipe::Components(c) if c.len() == 1 => v.push(("q0", format!("\"{}\"", c[0]))),
                    VectorRecipe::Components(c) => {
                        v.push(("q0_x", format!("\"{}\"", c[0])));
                        v.push(("q0_y", format!("\"{}\"", c[1])));
                    }
                }
                v
            }
            InitialRecipe::Preset { preset, amplitude } => {
                vec![("preset", preset.name().to_string()), ("amplitude", amplitude.to_string())]
            }
            InitialRecipe::Snapshot(p) => vec![("snapshot", format!("\"{}\"", p.display()))],
        };
        section("initial", initial);
        section(
            "hypotheses",
            vec![
                ("irrotational", self.hypotheses.irrotational.to_string()),
                ("nonnegative_u0", self.hypotheses.nonnegative_u0.to_string()),
                (
                    "monitors",
                    self.hypotheses.monitors.iter().map(|m| m.name()).collect::<Vec<_>>().join(", "),
                ),
                ("monitor_tol", self.hypotheses.monitor_tol.to_string()),
            ],
        );
        section(
            "output",
            vec![
                ("csv", self.output.csv.clone()),
                ("snapshot_every", self.output.snapshot_every.to_string()),
            ],
        );
        section(
            "verify",
            vec![
                ("r_low_tol", self.verify.r_low.to_string()),
                ("r1_tol", self.verify.r_1.to_string()),
                ("r2_tol", self.verify.r_2.to_string()),
                ("mean_tol", self.verify.mean.to_string()),
                ("curl_tol", self.verify.curl.to_string()),
            ],
        );
        section(
            "sweep",
            vec![("alphas", list(&self.sweep.alphas)), ("amplitudes", list(&self.sweep.amplitudes))],
        );
        section("scaling", vec![("lambda", self.scaling_lambda.to_string())]);
        section("sobolev", vec![("budget", self.sobolev_budget.to_string())]);
        out.trim_end().to_string() + "\n"
    }
}

/// Seeded smooth initial data used by the `random` preset.
pub fn preset_state(preset: Preset, grid: Grid, amplitude: f64, seed: u64) -> State {
    match preset {
        Preset::Steady => State::steady(grid, 1.0),
        Preset::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let band: i64 = 4;
            let mut u = vec![Complex64::new(0.0, 0.0); grid.len()];
            let mut phi = vec![Complex64::new(0.0, 0.0); grid.len()];
            u[0] = Complex64::new(1.0, 0.0);
            let ky_range = if grid.dim() == 2 { -band..=band } else { 0..=0 };
            for kx in 0..=band {
                for ky in ky_range.clone() {
                    // One representative per +-k pair.
                    if kx == 0 && ky <= 0 {
                        continue;
                    }
                    let kn = ((kx * kx + ky * ky) as f64).sqrt();
                    let mut draw = |scale: f64| {
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
                    };
                    let cu = draw(0.5 * amplitude / (kn * kn));
                    let cp = draw(0.5 * amplitude / (kn * kn * kn));
                    let (Some(i), Some(j)) = (grid.index_of([kx, ky]), grid.index_of([-kx, -ky])) else {
                        continue;
                    };
                    u[i] = cu;
                    u[j] = cu.conj();
                    phi[i] = cp;
                    phi[j] = cp.conj();
                }
            }
            let u = SpectralField::from_coeffs(grid, u).expect("sized to grid");
            let phi = SpectralField::from_coeffs(grid, phi).expect("sized to grid");
            State {
                t: 0.0,
                u,
                q: phi.gradient(),
            }
        }
    }
}

/// Parsing switches.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Reject monitors declared outside the parameter regime of the result
    /// they check (otherwise only logged).
    pub strict: bool,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("scenario", &["name", "seed"]),
    ("model", &["d", "alpha", "n", "kinetics", "dealias"]),
    ("integrator", &["t_end", "dt_max", "cfl", "sample_every", "mode", "blowup_cap"]),
    ("initial", &["u0", "q0", "q0_x", "q0_y", "preset", "amplitude", "snapshot"]),
    ("hypotheses", &["irrotational", "nonnegative_u0", "monitors", "monitor_tol"]),
    ("output", &["csv", "snapshot_every"]),
    ("verify", &["r_low_tol", "r1_tol", "r2_tol", "mean_tol", "curl_tol"]),
    ("sweep", &["alphas", "amplitudes"]),
    ("scaling", &["lambda"]),
    ("sobolev", &["budget"]),
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, key: &str) -> usize {
        self.map.get(key).map_or(0, |(l, _)| *l)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => parse(v).map(Some).map_err(|m| ConfigError::new(line, key, m)),
        }
    }

    fn required<T>(&self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        self.get(key, parse)?
            .ok_or_else(|| ConfigError::new(0, key, "required key is missing"))
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("expected a number, got `{v}`"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_u64(v: &str) -> Result<u64, String> {
    v.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_f64(s.trim())).collect()
}

/// Drops a trailing ` # comment` that sits outside quotes.
fn strip_comment(v: &str) -> &str {
    let mut quote = None;
    let mut prev_space = true;
    for (i, c) in v.char_indices() {
        match (quote, c) {
            (None, '"' | '\'') => quote = Some(c),
            (Some(q), c) if c == q => quote = None,
            (None, '#') if prev_space => return &v[..i],
            _ => {}
        }
        prev_space = c.is_whitespace();
    }
    v
}

fn unquote(v: &str) -> &str {
    let v = strip_comment(v).trim();
    if v.len() >= 2 && ((v.starts_with('"') && v.ends_with('"')) || (v.starts_with('\'') && v.ends_with('\''))) {
        &v[1..v.len() - 1]
    } else {
        v
    }
}

/// Parses and validates a scenario with default options.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    parse_config_with(text, ParseOptions::default())
}

pub fn parse_config_with(text: &str, opts: ParseOptions) -> Result<Scenario, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section: Option<&str> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::new(line_no, line, "malformed section header"))?
                .trim();
            let known = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| ConfigError::new(line_no, name, "unknown section"))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::new(line_no, line, "expected `key = value`"))?;
        let key = key.trim();
        let sec = section.ok_or_else(|| ConfigError::new(line_no, key, "key outside of any [section]"))?;
        let allowed = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::new(line_no, key, format!("unknown key in [{sec}]")));
        }
        let full = format!("{sec}.{key}");
        if map.contains_key(&full) {
            return Err(ConfigError::new(line_no, key, "duplicate key"));
        }
        map.insert(full, (line_no, unquote(value).to_string()));
    }
    let e = Entries { map };

    let name = e.get("scenario.name", |v| Ok(v.to_string()))?.unwrap_or_else(|| "scenario".into());
    let seed = e.get("scenario.seed", parse_u64)?.unwrap_or(0);

    let dim = e.required("model.d", parse_usize)?;
    if dim != 1 && dim != 2 {
        return Err(ConfigError::new(e.line("model.d"), "d", "dimension must be 1 or 2"));
    }
    let alpha = e.required("model.alpha", parse_f64)?;
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(ConfigError::new(
            e.line("model.alpha"),
            "alpha",
            format!("diffusion exponent must lie in (0, 2], got {alpha}"),
        ));
    }
    let n = e.required("model.n", parse_usize)?;
    let grid = Grid::new(dim, n).map_err(|err| ConfigError::new(e.line("model.n"), "n", err.to_string()))?;
    let kinetics = e.get("model.kinetics", |v| v.parse::<Kinetics>())?.unwrap_or(Kinetics::Quadratic);
    let dealias = e.get("model.dealias", parse_bool)?.unwrap_or(true);
    let params = ModelParams {
        dim,
        alpha,
        kinetics,
        dealias,
        forcing: None,
    };

    let defaults = IntegratorSettings::default();
    let integrator = IntegratorSettings {
        t_end: e.required("integrator.t_end", parse_f64)?,
        dt_max: e.get("integrator.dt_max", parse_f64)?.unwrap_or(defaults.dt_max),
        cfl: e.get("integrator.cfl", parse_f64)?.unwrap_or(defaults.cfl),
        sample_every: e.get("integrator.sample_every", parse_usize)?.unwrap_or(defaults.sample_every),
        mode: e.get("integrator.mode", |v| v.parse::<StepMode>())?.unwrap_or(defaults.mode),
    };
    if let Err(Error::InvalidParameter { name, reason }) = integrator.validate() {
        return Err(ConfigError::new(e.line(&format!("integrator.{name}")), name, reason));
    }
    let blowup_cap = e.get("integrator.blowup_cap", parse_f64)?.unwrap_or(DEFAULT_BLOWUP_CAP);
    if !(blowup_cap > 0.0) {
        return Err(ConfigError::new(e.line("integrator.blowup_cap"), "blowup_cap", "must be positive"));
    }

    let initial = parse_initial(&e, dim)?;

    let mut hypotheses = Hypotheses {
        irrotational: e.get("hypotheses.irrotational", parse_bool)?.unwrap_or(false),
        nonnegative_u0: e.get("hypotheses.nonnegative_u0", parse_bool)?.unwrap_or(false),
        monitor_tol: e.get("hypotheses.monitor_tol", parse_f64)?.unwrap_or(DEFAULT_MONITOR_TOL),
        ..Default::default()
    };
    if let Some(list) = e.get("hypotheses.monitors", |v| {
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse::<Monitor>)
            .collect::<Result<Vec<_>, _>>()
    })? {
        hypotheses.monitors = list;
    }

    let output = OutputPlan {
        csv: e.get("output.csv", |v| Ok(v.to_string()))?.unwrap_or_else(|| format!("{name}.csv")),
        snapshot_every: e.get("output.snapshot_every", parse_usize)?.unwrap_or(0),
    };
    let vd = VerifyTolerances::default();
    let verify = VerifyTolerances {
        r_low: e.get("verify.r_low_tol", parse_f64)?.unwrap_or(vd.r_low),
        r_1: e.get("verify.r1_tol", parse_f64)?.unwrap_or(vd.r_1),
        r_2: e.get("verify.r2_tol", parse_f64)?.unwrap_or(vd.r_2),
        mean: e.get("verify.mean_tol", parse_f64)?.unwrap_or(vd.mean),
        curl: e.get("verify.curl_tol", parse_f64)?.unwrap_or(vd.curl),
    };
    let sweep = SweepPlan {
        alphas: e.get("sweep.alphas", parse_list)?.unwrap_or_default(),
        amplitudes: e.get("sweep.amplitudes", parse_list)?.unwrap_or_default(),
    };
    for &a in &sweep.alphas {
        if !(a > 0.0 && a <= 2.0) {
            return Err(ConfigError::new(e.line("sweep.alphas"), "alphas", format!("alpha {a} outside (0, 2]")));
        }
    }
    let scaling_lambda = e.get("scaling.lambda", parse_usize)?.unwrap_or(2);
    if scaling_lambda == 0 {
        return Err(ConfigError::new(e.line("scaling.lambda"), "lambda", "must be a positive integer"));
    }
    let sobolev_budget = e.get("sobolev.budget", parse_usize)?.unwrap_or(10_000);

    let scenario = Scenario {
        name,
        seed,
        n,
        params,
        integrator,
        blowup_cap,
        initial,
        hypotheses,
        output,
        verify,
        sweep,
        scaling_lambda,
        sobolev_budget,
    };
    validate_hypotheses(&scenario, grid, &e, opts)?;
    Ok(scenario)
}

fn parse_initial(e: &Entries, dim: usize) -> Result<InitialRecipe, ConfigError> {
    let has = |k: &str| e.raw(&format!("initial.{k}")).is_some();
    let sources = ["u0", "preset", "snapshot"].iter().filter(|k| has(k)).count();
    if sources != 1 {
        return Err(ConfigError::new(
            0,
            "initial",
            "exactly one of u0, preset or snapshot must be given",
        ));
    }
    if let Some(path) = e.get("initial.snapshot", |v| Ok(PathBuf::from(v)))? {
        return Ok(InitialRecipe::Snapshot(path));
    }
    if let Some(preset) = e.get("initial.preset", Preset::parse)? {
        let amplitude = e.get("initial.amplitude", parse_f64)?.unwrap_or(0.1);
        return Ok(InitialRecipe::Preset { preset, amplitude });
    }
    if has("amplitude") {
        return Err(ConfigError::new(e.line("initial.amplitude"), "amplitude", "only valid with a preset"));
    }
    let u = e.required("initial.u0", ModeList::parse)?;
    u.check_dim(dim).map_err(|m| ConfigError::new(e.line("initial.u0"), "u0", m))?;
    let q = if dim == 1 {
        if has("q0_x") || has("q0_y") {
            return Err(ConfigError::new(e.line("initial.q0_x").max(e.line("initial.q0_y")), "q0_x", "component keys are for d = 2"));
        }
        let q = e.get("initial.q0", ModeList::parse)?.unwrap_or_default();
        VectorRecipe::Components(vec![q])
    } else if let Some((line, raw)) = e.raw("initial.q0") {
        if has("q0_x") || has("q0_y") {
            return Err(ConfigError::new(line, "q0", "give either q0 = grad(..) or q0_x / q0_y"));
        }
        let inner = raw
            .trim()
            .strip_prefix("grad(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| ConfigError::new(line, "q0", "in 2-D, q0 must be `grad(...)`; use q0_x / q0_y for components"))?;
        VectorRecipe::Gradient(ModeList::parse(inner).map_err(|m| ConfigError::new(line, "q0", m))?)
    } else {
        let x = e.get("initial.q0_x", ModeList::parse)?.unwrap_or_default();
        let y = e.get("initial.q0_y", ModeList::parse)?.unwrap_or_default();
        VectorRecipe::Components(vec![x, y])
    };
    let q_key_line = e.line("initial.q0").max(e.line("initial.q0_x"));
    match &q {
        VectorRecipe::Components(c) => {
            for m in c {
                m.check_dim(dim).map_err(|msg| ConfigError::new(q_key_line, "q0", msg))?;
            }
        }
        VectorRecipe::Gradient(m) => m.check_dim(dim).map_err(|msg| ConfigError::new(q_key_line, "q0", msg))?,
    }
    Ok(InitialRecipe::Modes { u, q })
}

fn validate_hypotheses(sc: &Scenario, grid: Grid, e: &Entries, opts: ParseOptions) -> Result<(), ConfigError> {
    let state = sc.initial_state().map_err(|err| match err {
        Error::Config(c) => ConfigError {
            line: e.line(&format!("initial.{}", c.key)),
            ..c
        },
        other => ConfigError::new(e.line("initial.snapshot"), "initial", other.to_string()),
    })?;
    let h = &sc.hypotheses;
    let mon_line = e.line("hypotheses.monitors");
    for m in &h.monitors {
        if m.needs_mean_zero_q() {
            let worst = state.q.components().iter().map(|c| c.mean().abs()).fold(0.0, f64::max);
            if worst > 1e-14 {
                return Err(ConfigError::new(
                    mon_line,
                    "monitors",
                    format!("monitor {m} assumes mean-zero q0, but |<q0_i>| = {worst:e}"),
                ));
            }
        }
        if !m.in_regime(sc.params.dim, sc.params.alpha) {
            let msg = format!(
                "monitor {m} is outside its proven regime ({}) for d = {}, alpha = {}",
                m.regime(),
                sc.params.dim,
                sc.params.alpha
            );
            if opts.strict {
                return Err(ConfigError::new(mon_line, "monitors", msg));
            }
            log::warn!("{msg}");
        }
    }
    if h.nonnegative_u0 {
        let nodes = Transform::new(grid)
            .inverse(&state.u)
            .map_err(|err| ConfigError::new(0, "u0", err.to_string()))?;
        let min = nodes.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-14 {
            return Err(ConfigError::new(
                e.line("hypotheses.nonnegative_u0"),
                "nonnegative_u0",
                format!("u0 is negative on the grid (min = {min:e})"),
            ));
        }
    }
    if h.irrotational {
        if sc.params.dim == 2 {
            let curl = state.q.curl2d().map_err(|err| ConfigError::new(0, "q0", err.to_string()))?;
            let c = curl.sobolev_norm(0.0, true);
            let scale = 1.0 + state.q.sobolev_norm(1.0, true);
            if c > 1e-12 * scale {
                return Err(ConfigError::new(
                    e.line("hypotheses.irrotational"),
                    "irrotational",
                    format!("q0 is not curl-free (||curl q0|| = {c:e})"),
                ));
            }
        }
    } else if sc.hypotheses.monitors.contains(&Monitor::H1DivQ2d) {
        return Err(ConfigError::new(
            mon_line,
            "monitors",
            "H1_divq_2d assumes a curl-free q0; declare irrotational = true",
        ));
    }
    Ok(())
}
