//! Experiment configuration: a flat `key = value` text format.
//!
//! Config files are deliberately minimal — one assignment per line, `#`
//! comments, no sections, no nesting. Every key must be one the tool
//! knows; an unrecognized key is a hard error rather than a silent no-op,
//! because a typo like `bath_size = 64` that quietly falls back to the
//! default has ruined more than one experiment sweep.
//!
//! Parsing happens in two stages: [`RawConfig`] ingests the text into a
//! key → value map (rejecting duplicates), and [`ExperimentConfig::from_raw`]
//! consumes typed values out of that map, leaving any unknown keys behind
//! to be reported. All referenced input files are checked for existence at
//! load time so a sweep cannot die hours in on a bad path.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

/// Configuration-stage failure. Everything in this module reports through
/// this type; the binary maps it to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// The key → value map read from a config file, before typing.
#[derive(Debug, Default)]
pub struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    /// Parses the flat text format. Blank lines and lines whose first
    /// non-space character is `#` are skipped; everything else must be
    /// `key = value` (the first `=` splits; later ones belong to the
    /// value). Duplicate keys are rejected.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`, got {raw_line:?}", i + 1));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return err(format!("line {}: empty key", i + 1));
            }
            if map.insert(key.clone(), value).is_some() {
                return err(format!("line {}: duplicate key `{key}`", i + 1));
            }
        }
        Ok(RawConfig { map })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn remaining(&self) -> Vec<&str> {
        self.map.keys().map(String::as_str).collect()
    }
}

/// Which dataset the experiment runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Synthetic,
    Libsvm,
}

/// The smooth part of a synthetic objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Tanh,
    QuadraticL1,
    PowerAbs,
}

/// A solver selectable from the `methods` list. `DetProxGrad` is the
/// deterministic full-gradient reference, run through the same trajectory
/// pipeline (full batch, constant step λ) so its CSV is comparable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    NormSgd,
    ProxSgd,
    DetProxGrad,
}

impl MethodKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MethodKind::NormSgd => "norm_sgd",
            MethodKind::ProxSgd => "prox_sgd",
            MethodKind::DetProxGrad => "det_prox_grad",
        }
    }
}

/// Step-size schedule family for the stochastic runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Polynomial,
    Constant,
}

/// Fully typed experiment description. One struct serves all four
/// subcommands; each command validates the subset it actually needs and
/// ignores the rest, but *every* present key must parse.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    /// Input path for `problem = libsvm`; output path for `gen-data`.
    pub data_path: Option<PathBuf>,
    pub dim_override: Option<usize>,

    // Synthetic-data shape (tanh classification and gen-data).
    pub n: usize,
    pub d: usize,
    pub density: f64,
    pub data_seed: u64,

    pub loss: LossKind,
    /// Exponent of the power-absolute loss (`loss = power_abs`).
    pub p: f64,
    /// ℓ1 weight; `None` means "auto", resolved to 1/N at build time.
    pub nu: Option<f64>,
    /// Squared-ℓ2 weight of the elastic net (0 disables it).
    pub nu2: f64,

    pub methods: Vec<MethodKind>,
    /// Prox scaling; `None` means "auto", resolved to the step numerator α.
    pub lambda: Option<f64>,
    pub schedule: ScheduleKind,
    /// Step numerator: α_k = α/(β + k)^γ, or the constant step itself.
    /// `None` is allowed only for descent-check, which solves for a step
    /// that fits inside its time window.
    pub alpha: Option<f64>,
    /// When present, the solve command sweeps these values instead of `alpha`.
    pub alpha_list: Option<Vec<f64>>,
    /// Offset β of the polynomial schedule; `None` means "auto" → L.
    pub beta: Option<f64>,
    pub gamma: f64,
    pub batch_size: usize,
    /// Exactly one of `epochs` / `max_iters` must be set for solver runs.
    pub epochs: Option<u64>,
    pub max_iters: Option<u64>,
    pub seeds: Vec<u64>,
    /// Row-recording cadence; `None` means "auto" → max(1, total/200).
    pub record_every: Option<u64>,
    pub diagnostic_mode: bool,

    // Descent-check knobs.
    /// Multiplier on the computed time-window length T.
    pub t_scale: f64,
    /// KL modulus estimate ĉ; enables the KL-tightened window report.
    pub kl_c_hat: Option<f64>,
    /// Windows to skip before auditing; `None` means "auto" → K_δ.
    pub burn_in: Option<u64>,

    // Reference-solver knobs (ψ* and x* refinement).
    pub tol: f64,
    pub max_ref_iters: u64,

    // Rate-grid knobs.
    /// Overrides the problem's own KL exponent in rate predictions.
    pub theta: Option<f64>,
    pub gammas: Vec<f64>,
    pub thetas: Vec<f64>,

    pub out: Option<PathBuf>,
}

fn parse_one<T: std::str::FromStr>(key: &str, s: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    s.parse::<T>().map_err(|e| ConfigError(format!("key `{key}`: cannot parse {s:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|part| parse_one(key, part.trim())).collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool, ConfigError> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => err(format!("key `{key}`: expected a boolean, got {other:?}")),
    }
}

/// `auto` → None, anything else parses as T.
fn parse_auto<T: std::str::FromStr>(key: &str, s: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    if s == "auto" {
        Ok(None)
    } else {
        parse_one(key, s).map(Some)
    }
}

impl ExperimentConfig {
    /// Types the raw map. Consumes every key it understands; whatever is
    /// left over is unknown and fails the load.
    pub fn from_raw(mut raw: RawConfig) -> Result<Self, ConfigError> {
        let problem = match raw.take("problem").as_deref() {
            None | Some("synthetic") => ProblemKind::Synthetic,
            Some("libsvm") => ProblemKind::Libsvm,
            Some(other) => return err(format!("key `problem`: unknown kind {other:?}")),
        };
        let data_path = raw.take("data_path").map(PathBuf::from);
        let dim_override = match raw.take("dim_override") {
            Some(s) => Some(parse_one("dim_override", &s)?),
            None => None,
        };

        let n = match raw.take("n") {
            Some(s) => parse_one("n", &s)?,
            None => 2000,
        };
        let d = match raw.take("d") {
            Some(s) => parse_one("d", &s)?,
            None => 500,
        };
        let density = match raw.take("density") {
            Some(s) => parse_one("density", &s)?,
            None => 0.05,
        };
        let data_seed = match raw.take("data_seed") {
            Some(s) => parse_one("data_seed", &s)?,
            None => 0,
        };

        let loss = match raw.take("loss").as_deref() {
            None | Some("tanh") => LossKind::Tanh,
            Some("quadratic_l1") => LossKind::QuadraticL1,
            Some("power_abs") => LossKind::PowerAbs,
            Some(other) => return err(format!("key `loss`: unknown loss {other:?}")),
        };
        let p = match raw.take("p") {
            Some(s) => parse_one("p", &s)?,
            None => 2.0,
        };
        let nu = match raw.take("nu") {
            Some(s) => parse_auto("nu", &s)?,
            None => None,
        };
        let nu2 = match raw.take("nu2") {
            Some(s) => parse_one("nu2", &s)?,
            None => 0.0,
        };

        let methods = match raw.take("methods") {
            Some(s) => {
                let mut out = Vec::new();
                for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    out.push(match part {
                        "norm_sgd" => MethodKind::NormSgd,
                        "prox_sgd" => MethodKind::ProxSgd,
                        "det_prox_grad" => MethodKind::DetProxGrad,
                        other => return err(format!("key `methods`: unknown method {other:?}")),
                    });
                }
                if out.is_empty() {
                    return err("key `methods`: list is empty");
                }
                out
            }
            None => vec![MethodKind::NormSgd],
        };

        let lambda = match raw.take("lambda") {
            Some(s) => parse_auto("lambda", &s)?,
            None => None,
        };
        let schedule = match raw.take("schedule").as_deref() {
            None | Some("polynomial") => ScheduleKind::Polynomial,
            Some("constant") => ScheduleKind::Constant,
            Some(other) => return err(format!("key `schedule`: unknown schedule {other:?}")),
        };
        let alpha = match raw.take("alpha") {
            Some(s) => parse_auto("alpha", &s)?,
            None => None,
        };
        let alpha_list = match raw.take("alpha_list") {
            Some(s) => {
                let list: Vec<f64> = parse_list("alpha_list", &s)?;
                if list.is_empty() {
                    return err("key `alpha_list`: list is empty");
                }
                Some(list)
            }
            None => None,
        };
        let beta = match raw.take("beta") {
            Some(s) => parse_auto("beta", &s)?,
            None => None,
        };
        let gamma = match raw.take("gamma") {
            Some(s) => parse_one("gamma", &s)?,
            None => 1.0,
        };
        let batch_size = match raw.take("batch_size") {
            Some(s) => parse_one("batch_size", &s)?,
            None => 256,
        };
        let epochs = match raw.take("epochs") {
            Some(s) => Some(parse_one("epochs", &s)?),
            None => None,
        };
        let max_iters = match raw.take("max_iters") {
            Some(s) => Some(parse_one("max_iters", &s)?),
            None => None,
        };
        if epochs.is_some() && max_iters.is_some() {
            return err("set either `epochs` or `max_iters`, not both");
        }
        let seeds = match raw.take("seeds") {
            Some(s) => {
                let list: Vec<u64> = parse_list("seeds", &s)?;
                if list.is_empty() {
                    return err("key `seeds`: list is empty");
                }
                list
            }
            None => vec![0],
        };
        let record_every = match raw.take("record_every") {
            Some(s) => parse_auto("record_every", &s)?,
            None => None,
        };
        let diagnostic_mode = match raw.take("diagnostic_mode") {
            Some(s) => parse_bool("diagnostic_mode", &s)?,
            None => false,
        };

        let t_scale = match raw.take("t_scale") {
            Some(s) => parse_one("t_scale", &s)?,
            None => 1.0,
        };
        let kl_c_hat = match raw.take("kl_c_hat") {
            Some(s) => Some(parse_one("kl_c_hat", &s)?),
            None => None,
        };
        let burn_in = match raw.take("burn_in") {
            Some(s) => parse_auto("burn_in", &s)?,
            None => None,
        };

        let tol = match raw.take("tol") {
            Some(s) => parse_one("tol", &s)?,
            None => 1e-5,
        };
        let max_ref_iters = match raw.take("max_ref_iters") {
            Some(s) => parse_one("max_ref_iters", &s)?,
            None => 20_000,
        };

        let theta = match raw.take("theta") {
            Some(s) => Some(parse_one("theta", &s)?),
            None => None,
        };
        let gammas = match raw.take("gammas") {
            Some(s) => parse_list("gammas", &s)?,
            None => vec![0.75],
        };
        let thetas = match raw.take("thetas") {
            Some(s) => parse_list("thetas", &s)?,
            None => vec![0.0, 0.25, 0.5, 0.75, 0.9],
        };

        let out = raw.take("out").map(PathBuf::from);

        let leftover = raw.remaining();
        if !leftover.is_empty() {
            return err(format!("unknown key(s): {}", leftover.join(", ")));
        }

        let cfg = ExperimentConfig {
            problem,
            data_path,
            dim_override,
            n,
            d,
            density,
            data_seed,
            loss,
            p,
            nu,
            nu2,
            methods,
            lambda,
            schedule,
            alpha,
            alpha_list,
            beta,
            gamma,
            batch_size,
            epochs,
            max_iters,
            seeds,
            record_every,
            diagnostic_mode,
            t_scale,
            kl_c_hat,
            burn_in,
            tol,
            max_ref_iters,
            theta,
            gammas,
            thetas,
            out,
        };
        cfg.validate_common()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_raw(RawConfig::load(path)?)
    }

    /// Sanity checks that hold regardless of subcommand.
    fn validate_common(&self) -> Result<(), ConfigError> {
        if !(self.density >= 0.0 && self.density <= 1.0) {
            return err(format!("density = {} must lie in [0, 1]", self.density));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return err(format!("alpha = {a} must be finite and > 0"));
            }
        }
        if let Some(list) = &self.alpha_list {
            for &a in list {
                if !(a > 0.0) || !a.is_finite() {
                    return err(format!("alpha_list entry {a} must be finite and > 0"));
                }
            }
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0) || !l.is_finite() {
                return err(format!("lambda = {l} must be finite and > 0"));
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return err(format!("beta = {b} must be finite and > 0"));
            }
        }
        if let Some(nu) = self.nu {
            if !(nu >= 0.0) || !nu.is_finite() {
                return err(format!("nu = {nu} must be finite and >= 0"));
            }
        }
        if !(self.nu2 >= 0.0) || !self.nu2.is_finite() {
            return err(format!("nu2 = {} must be finite and >= 0", self.nu2));
        }
        if self.batch_size == 0 {
            return err("batch_size must be >= 1");
        }
        if !(self.t_scale > 0.0) || !self.t_scale.is_finite() {
            return err(format!("t_scale = {} must be finite and > 0", self.t_scale));
        }
        if !(self.tol > 0.0) {
            return err(format!("tol = {} must be > 0", self.tol));
        }
        if let Some(c) = self.kl_c_hat {
            if !(c > 0.0) || !c.is_finite() {
                return err(format!("kl_c_hat = {c} must be finite and > 0"));
            }
        }
        Ok(())
    }

    /// The α values a solve/rates run sweeps over.
    pub fn alphas(&self) -> Result<Vec<f64>, ConfigError> {
        if let Some(list) = &self.alpha_list {
            return Ok(list.clone());
        }
        match self.alpha {
            Some(a) => Ok(vec![a]),
            None => err("set `alpha` (or `alpha_list`) for this command"),
        }
    }

    /// Checks that input files referenced by the config exist. Called by
    /// commands that *read* `data_path` (gen-data writes it instead).
    pub fn check_inputs(&self) -> Result<(), ConfigError> {
        if self.problem == ProblemKind::Libsvm {
            let Some(path) = &self.data_path else {
                return err("problem = libsvm requires `data_path`");
            };
            if !path.exists() {
                return err(format!("data_path {} does not exist", path.display()));
            }
        }
        Ok(())
    }
}
