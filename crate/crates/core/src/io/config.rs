//! `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fokker_planck::FpOptions;
use crate::grid::{Mollifier, TorusGrid};
use crate::hjb::{HjbMethod, HjbOptions};
use crate::mfg::{InitialDensity, MfgProblem};
use crate::model::{critical_exponents, Coupling, CouplingSign, CriticalExponents, Hamiltonian, Potential, Regime};
use crate::validation::{Noise, ParticleOptions, MAX_RADIUS, MIN_PARTICLES};

use super::field_csv::read_field;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Solve,
    Sweep,
    Validate,
    Particles,
    Pohozaev,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Self::Solve),
            "sweep" => Ok(Self::Sweep),
            "validate" => Ok(Self::Validate),
            "particles" => Ok(Self::Particles),
            "pohozaev" => Ok(Self::Pohozaev),
            other => Err(Error::param(
                "mode",
                format!("expected one of solve, sweep, validate, particles, pohozaev; got `{other}`"),
            )),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Solve => "solve",
            Self::Sweep => "sweep",
            Self::Validate => "validate",
            Self::Particles => "particles",
            Self::Pohozaev => "pohozaev",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSource {
    Zero,
    Cosine { amplitude: f64, modes: u32 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialSource {
    Uniform,
    Cosine(f64),
    Bump { amplitude: f64, width: f64 },
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub output_dir: Option<PathBuf>,
    pub run_id: String,
    pub seed: u64,
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub c_f: f64,
    pub sign: CouplingSign,
    pub potential: PotentialSource,
    pub mollifier_k: Option<u32>,
    pub theta: f64,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    /// Defaults to a tenth of `outer_tol`.
    pub hjb_tol: Option<f64>,
    pub hjb_dt: Option<f64>,
    pub hjb_max_steps: usize,
    pub hjb_method: HjbMethod,
    /// Defaults to a tenth of `outer_tol`.
    pub fp_tol: Option<f64>,
    pub fp_max_iters: usize,
    pub sweep_alphas: Vec<f64>,
    pub sweep_refine: bool,
    pub initial: InitialSource,
    /// Directory holding `u.csv` and `m.csv` of an earlier run.
    pub input_dir: Option<PathBuf>,
    pub particles_count: usize,
    pub particles_horizon: f64,
    pub particles_dt: f64,
    pub particles_noise: Noise,
    pub pohozaev_radius: f64,
    /// Defaults to the centre of the domain.
    pub pohozaev_center: Option<[f64; 2]>,
    pub nls_tol: f64,
}

pub const KEYS: &[&str] = &[
    "mode",
    "output_dir",
    "run_id",
    "seed",
    "dim",
    "n",
    "length",
    "gamma",
    "alpha",
    "c_f",
    "sign",
    "potential",
    "mollifier_k",
    "theta",
    "outer_tol",
    "outer_max_iters",
    "hjb_tol",
    "hjb_dt",
    "hjb_max_steps",
    "hjb_method",
    "fp_tol",
    "fp_max_iters",
    "sweep_alphas",
    "sweep_refine",
    "initial",
    "input_dir",
    "particles_count",
    "particles_horizon",
    "particles_dt",
    "particles_noise",
    "pohozaev_radius",
    "pohozaev_center",
    "nls_tol",
];

impl RunConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            output_dir: None,
            run_id: "run".into(),
            seed: 0,
            dim: 1,
            n: 128,
            length: 1.0,
            gamma: 2.0,
            alpha: 1.0,
            c_f: 1.0,
            sign: CouplingSign::Focusing,
            potential: PotentialSource::Zero,
            mollifier_k: None,
            theta: 0.5,
            outer_tol: 1e-8,
            outer_max_iters: 500,
            hjb_tol: None,
            hjb_dt: None,
            hjb_max_steps: 200_000,
            hjb_method: HjbMethod::Marching,
            fp_tol: None,
            fp_max_iters: 2000,
            sweep_alphas: Vec::new(),
            sweep_refine: false,
            initial: InitialSource::Uniform,
            input_dir: None,
            particles_count: 100_000,
            particles_horizon: 50.0,
            particles_dt: 1e-3,
            particles_noise: Noise::TwoPoint,
            pohozaev_radius: 0.25,
            pohozaev_center: None,
            nls_tol: 1e-10,
        }
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::with_length(self.dim, self.n, self.length)
    }

    pub fn critical(&self) -> Result<CriticalExponents> {
        critical_exponents(self.gamma, self.dim)
    }

    pub fn potential(&self) -> Result<Potential> {
        match &self.potential {
            PotentialSource::Zero => Ok(Potential::Zero),
            PotentialSource::Cosine { amplitude, modes } => Potential::cosine(*amplitude, *modes),
            PotentialSource::File(p) => {
                let v = read_field(p)?;
                if !v.grid().same_shape(&self.grid()?) {
                    return Err(Error::param("potential", "potential file does not match dim/n/length"));
                }
                Potential::field(v)
            }
        }
    }

    pub fn initial(&self) -> Result<InitialDensity> {
        Ok(match &self.initial {
            InitialSource::Uniform => InitialDensity::Uniform,
            InitialSource::Cosine(eps) => InitialDensity::Cosine(*eps),
            InitialSource::Bump { amplitude, width } => InitialDensity::Bump {
                amplitude: *amplitude,
                width: *width,
            },
            InitialSource::File(p) => InitialDensity::Field(read_field(p)?),
        })
    }

    pub fn problem(&self) -> Result<MfgProblem> {
        let grid = self.grid()?;
        let k = self.mollifier_k.unwrap_or_else(|| Mollifier::default_k(&grid));
        let mut p = MfgProblem::new(
            grid,
            Hamiltonian::power_law(self.gamma)?,
            Coupling::new(self.alpha, self.c_f, self.sign)?,
            self.potential()?,
        )?
        .with_mollifier_k(k)?
        .with_tol(self.outer_tol);
        p.theta = self.theta;
        p.max_outer_iters = self.outer_max_iters;
        p.hjb = HjbOptions {
            dt: self.hjb_dt,
            tol: self.hjb_tol.unwrap_or(0.1 * self.outer_tol),
            max_steps: self.hjb_max_steps,
            method: self.hjb_method,
        };
        p.fp = FpOptions {
            tol: self.fp_tol.unwrap_or(0.1 * self.outer_tol),
            max_iters: self.fp_max_iters,
            ..FpOptions::default()
        };
        Ok(p)
    }

    pub fn particle_options(&self) -> ParticleOptions {
        ParticleOptions {
            count: self.particles_count,
            horizon: self.particles_horizon,
            dt: self.particles_dt,
            seed: self.seed,
            noise: self.particles_noise,
        }
    }

    pub fn pohozaev_center(&self) -> [f64; 2] {
        self.pohozaev_center.unwrap_or([0.5 * self.length, 0.5 * self.length])
    }

    /// Checks every value against the preconditions of the code that will use it.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        let problem = self.problem()?;
        problem.validate()?;
        positive("hjb_tol", problem.hjb.tol)?;
        if let Some(dt) = self.hjb_dt {
            positive("hjb_dt", dt)?;
        }
        if self.hjb_max_steps == 0 {
            return Err(Error::param("hjb_max_steps", "need hjb_max_steps >= 1"));
        }
        positive("fp_tol", problem.fp.tol)?;
        if self.fp_max_iters == 0 {
            return Err(Error::param("fp_max_iters", "need fp_max_iters >= 1"));
        }
        positive("nls_tol", self.nls_tol)?;
        self.initial()?.sample(&grid)?;
        for &a in &self.sweep_alphas {
            Coupling::new(a, self.c_f, self.sign).map_err(|_| {
                Error::param("sweep_alphas", format!("exponents must be > 0, got {a}"))
            })?;
        }
        if self.sweep_alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::param("sweep_alphas", "exponents must be strictly increasing"));
        }
        if self.mode == Mode::Sweep && self.sweep_alphas.is_empty() {
            return Err(Error::param("sweep_alphas", "sweep mode needs at least one exponent"));
        }
        if self.mode == Mode::Sweep && self.sweep_refine && matches!(self.potential, PotentialSource::File(_)) {
            return Err(Error::param("sweep_refine", "refinement needs an analytic potential"));
        }
        if self.particles_count < MIN_PARTICLES {
            return Err(Error::param(
                "particles_count",
                format!("need particles_count >= {MIN_PARTICLES}, got {}", self.particles_count),
            ));
        }
        if !(self.particles_dt > 0.0 && self.particles_dt <= grid.h()) {
            return Err(Error::param(
                "particles_dt",
                format!("need 0 < particles_dt <= h = {}, got {}", grid.h(), self.particles_dt),
            ));
        }
        if !(self.particles_horizon >= self.particles_dt && self.particles_horizon.is_finite()) {
            return Err(Error::param("particles_horizon", "need particles_horizon >= particles_dt"));
        }
        if !(self.pohozaev_radius > 0.0 && self.pohozaev_radius <= MAX_RADIUS * self.length) {
            return Err(Error::param(
                "pohozaev_radius",
                format!("need 0 < pohozaev_radius <= {}, got {}", MAX_RADIUS * self.length, self.pohozaev_radius),
            ));
        }
        if let Some(dir) = &self.input_dir {
            for f in ["u.csv", "m.csv"] {
                if !dir.join(f).is_file() {
                    return Err(Error::param("input_dir", format!("{} has no {f}", dir.display())));
                }
            }
        }
        let c = self.pohozaev_center();
        if (0..self.dim).any(|d| !(c[d] >= 0.0 && c[d] < self.length)) {
            return Err(Error::param("pohozaev_center", format!("need coordinates in [0, {})", self.length)));
        }
        Ok(())
    }

    /// Effective values of every key, for manifests.
    pub fn echo(&self) -> BTreeMap<&'static str, String> {
        let opt = |v: Option<f64>| v.map_or("default".to_string(), |x| x.to_string());
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        m.insert("mode", self.mode.to_string());
        m.insert(
            "output_dir",
            self.output_dir.as_ref().map_or("default".into(), |p| p.display().to_string()),
        );
        m.insert("run_id", self.run_id.clone());
        m.insert("seed", self.seed.to_string());
        m.insert("dim", self.dim.to_string());
        m.insert("n", self.n.to_string());
        m.insert("length", self.length.to_string());
        m.insert("gamma", self.gamma.to_string());
        m.insert("alpha", self.alpha.to_string());
        m.insert("c_f", self.c_f.to_string());
        m.insert("sign", self.sign.to_string());
        m.insert(
            "potential",
            match &self.potential {
                PotentialSource::Zero => "zero".into(),
                PotentialSource::Cosine { amplitude, modes } => format!("cosine:{amplitude},{modes}"),
                PotentialSource::File(p) => format!("file:{}", p.display()),
            },
        );
        m.insert("mollifier_k", self.mollifier_k.map_or("default".into(), |k| k.to_string()));
        m.insert("theta", self.theta.to_string());
        m.insert("outer_tol", self.outer_tol.to_string());
        m.insert("outer_max_iters", self.outer_max_iters.to_string());
        m.insert("hjb_tol", opt(self.hjb_tol));
        m.insert("hjb_dt", opt(self.hjb_dt));
        m.insert("hjb_max_steps", self.hjb_max_steps.to_string());
        m.insert(
            "hjb_method",
            match self.hjb_method {
                HjbMethod::Marching => "marching".into(),
                HjbMethod::Newton => "newton".into(),
            },
        );
        m.insert("fp_tol", opt(self.fp_tol));
        m.insert("fp_max_iters", self.fp_max_iters.to_string());
        m.insert("sweep_alphas", list(&self.sweep_alphas));
        m.insert("sweep_refine", self.sweep_refine.to_string());
        m.insert(
            "initial",
            match &self.initial {
                InitialSource::Uniform => "uniform".into(),
                InitialSource::Cosine(e) => format!("cosine:{e}"),
                InitialSource::Bump { amplitude, width } => format!("bump:{amplitude},{width}"),
                InitialSource::File(p) => format!("file:{}", p.display()),
            },
        );
        m.insert("input_dir", self.input_dir.as_ref().map_or("none".into(), |p| p.display().to_string()));
        m.insert("particles_count", self.particles_count.to_string());
        m.insert("particles_horizon", self.particles_horizon.to_string());
        m.insert("particles_dt", self.particles_dt.to_string());
        m.insert(
            "particles_noise",
            match self.particles_noise {
                Noise::Gaussian => "gaussian".into(),
                Noise::TwoPoint => "two-point".into(),
            },
        );
        m.insert("pohozaev_radius", self.pohozaev_radius.to_string());
        let c = self.pohozaev_center();
        m.insert("pohozaev_center", list(&c[..self.dim]));
        m.insert("nls_tol", self.nls_tol.to_string());
        m
    }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(key, format!("need {key} > 0, got {v}")))
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str, what: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::param(key, format!("expected {what}, got `{v}`")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s.trim(), "a comma-separated list of numbers"))
        .collect()
}

fn parse_pair(key: &str, v: &str) -> Result<(f64, f64)> {
    match parse_list(key, v)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::param(key, format!("expected two comma-separated numbers, got `{v}`"))),
    }
}

fn apply(cfg: &mut RunConfig, key: &str, v: &str) -> Result<()> {
    match key {
        "mode" => cfg.mode = v.parse()?,
        "output_dir" => cfg.output_dir = Some(PathBuf::from(v)),
        "run_id" => {
            if v.is_empty() || v.contains(['/', '\\']) {
                return Err(Error::param(key, "run_id must be a nonempty name without path separators"));
            }
            cfg.run_id = v.to_string();
        }
        "seed" => cfg.seed = parse_num(key, v, "a nonnegative integer")?,
        "dim" => {
            cfg.dim = parse_num(key, v, "1 or 2")?;
            if !(cfg.dim == 1 || cfg.dim == 2) {
                return Err(Error::param(key, format!("need dim in {{1, 2}}, got {}", cfg.dim)));
            }
        }
        "n" => {
            cfg.n = parse_num(key, v, "an integer >= 8")?;
            if cfg.n < 8 {
                return Err(Error::param(key, format!("need n >= 8, got {}", cfg.n)));
            }
        }
        "length" => {
            cfg.length = parse_num(key, v, "a number")?;
            positive(key, cfg.length)?;
        }
        "gamma" => {
            cfg.gamma = parse_num(key, v, "a number")?;
            if !(cfg.gamma > 1.0 && cfg.gamma.is_finite()) {
                return Err(Error::param(key, format!("need gamma > 1, got {}", cfg.gamma)));
            }
        }
        "alpha" => {
            cfg.alpha = parse_num(key, v, "a number")?;
            positive(key, cfg.alpha)?;
        }
        "c_f" => {
            cfg.c_f = parse_num(key, v, "a number")?;
            if !(cfg.c_f >= 0.0 && cfg.c_f.is_finite()) {
                return Err(Error::param(key, format!("need c_f >= 0, got {}", cfg.c_f)));
            }
        }
        "sign" => cfg.sign = v.parse()?,
        "potential" => {
            cfg.potential = if v == "zero" {
                PotentialSource::Zero
            } else if let Some(rest) = v.strip_prefix("cosine:") {
                let (a, k) = parse_pair(key, rest)?;
                if !(a >= 0.0) || k < 1.0 || k.fract() != 0.0 {
                    return Err(Error::param(key, "cosine:a,modes needs a >= 0 and an integer modes >= 1"));
                }
                PotentialSource::Cosine {
                    amplitude: a,
                    modes: k as u32,
                }
            } else if let Some(path) = v.strip_prefix("file:") {
                PotentialSource::File(PathBuf::from(path))
            } else {
                return Err(Error::param(key, format!("expected zero, cosine:a,modes or file:path; got `{v}`")));
            }
        }
        "mollifier_k" => cfg.mollifier_k = Some(parse_num(key, v, "a positive integer")?),
        "theta" => cfg.theta = parse_num(key, v, "a number in (0, 1]")?,
        "outer_tol" => cfg.outer_tol = parse_num(key, v, "a positive number")?,
        "outer_max_iters" => cfg.outer_max_iters = parse_num(key, v, "a positive integer")?,
        "hjb_tol" => cfg.hjb_tol = Some(parse_num(key, v, "a positive number")?),
        "hjb_dt" => cfg.hjb_dt = Some(parse_num(key, v, "a positive number")?),
        "hjb_max_steps" => cfg.hjb_max_steps = parse_num(key, v, "a positive integer")?,
        "hjb_method" => cfg.hjb_method = v.parse()?,
        "fp_tol" => cfg.fp_tol = Some(parse_num(key, v, "a positive number")?),
        "fp_max_iters" => cfg.fp_max_iters = parse_num(key, v, "a positive integer")?,
        "sweep_alphas" => cfg.sweep_alphas = parse_list(key, v)?,
        "sweep_refine" => cfg.sweep_refine = parse_num(key, v, "true or false")?,
        "initial" => {
            cfg.initial = if v == "uniform" {
                InitialSource::Uniform
            } else if let Some(rest) = v.strip_prefix("cosine:") {
                InitialSource::Cosine(parse_num(key, rest, "a number in (-1, 1)")?)
            } else if let Some(rest) = v.strip_prefix("bump:") {
                let (amplitude, width) = parse_pair(key, rest)?;
                InitialSource::Bump { amplitude, width }
            } else if let Some(path) = v.strip_prefix("file:") {
                InitialSource::File(PathBuf::from(path))
            } else {
                return Err(Error::param(
                    key,
                    format!("expected uniform, cosine:eps, bump:amplitude,width or file:path; got `{v}`"),
                ));
            }
        }
        "input_dir" => cfg.input_dir = Some(PathBuf::from(v)),
        "particles_count" => cfg.particles_count = parse_num(key, v, "an integer")?,
        "particles_horizon" => cfg.particles_horizon = parse_num(key, v, "a positive number")?,
        "particles_dt" => cfg.particles_dt = parse_num(key, v, "a positive number")?,
        "particles_noise" => cfg.particles_noise = v.parse()?,
        "pohozaev_radius" => cfg.pohozaev_radius = parse_num(key, v, "a positive number")?,
        "pohozaev_center" => {
            let c = parse_list(key, v)?;
            if c.is_empty() || c.len() > 2 {
                return Err(Error::param(key, "expected one or two coordinates"));
            }
            cfg.pohozaev_center = Some([c[0], c.get(1).copied().unwrap_or(0.0)]);
        }
        "nls_tol" => cfg.nls_tol = parse_num(key, v, "a positive number")?,
        other => unreachable!("key `{other}` passed the key check"),
    }
    Ok(())
}

/// Splits the text into `(line, key, value)` triples.
fn entries(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config {
                line,
                message: format!("unknown key `{k}`"),
            });
        }
        if let Some(first) = seen.insert(k.to_string(), line) {
            return Err(Error::Config {
                line,
                message: format!("key `{k}` already set on line {first}"),
            });
        }
        out.push((line, k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn build(mut cfg: RunConfig, items: Vec<(usize, String, String)>) -> Result<RunConfig> {
    for (line, k, v) in items {
        apply(&mut cfg, &k, &v).map_err(|e| e.context(format!("line {line}")))?;
    }
    cfg.validate()?;
    let crit = cfg.critical()?;
    let alphas = std::iter::once(cfg.alpha).chain(cfg.sweep_alphas.iter().copied());
    for a in alphas {
        if crit.regime(a) == Regime::Unknown {
            log::warn!("alpha = {a} equals the critical exponent {}: UNKNOWN-REGIME", crit.alpha2);
        }
    }
    Ok(cfg)
}

/// Parses a configuration that must name its own `mode`.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let items = entries(text)?;
    let mode = items
        .iter()
        .find(|(_, k, _)| k == "mode")
        .ok_or_else(|| Error::param("mode", "missing; expected one of solve, sweep, validate, particles, pohozaev"))?;
    let mode: Mode = mode.2.parse()?;
    build(RunConfig::new(mode), items)
}

/// Parses a configuration whose mode is fixed by the caller; a `mode` key,
/// if present, has to agree.
pub fn parse_with_mode(text: &str, mode: Mode) -> Result<RunConfig> {
    let items = entries(text)?;
    if let Some((line, _, v)) = items.iter().find(|(_, k, _)| k == "mode") {
        let given: Mode = v.parse()?;
        if given != mode {
            return Err(Error::Config {
                line: *line,
                message: format!("config says mode = {given} but the {mode} command was used"),
            });
        }
    }
    build(RunConfig::new(mode), items)
}
