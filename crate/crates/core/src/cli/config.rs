//! Flat `section.key = value` run configuration.
//!
//! Frequencies are given as ν = ω/2π in kHz and times in µs or ns as the key
//! name says; everything is converted to rad/s and seconds on load. `#`
//! starts a comment. Unknown keys, repeated keys and out-of-range values are
//! errors that carry the line number.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::analysis::{Branch, DEFAULT_PHASE_POINTS};
use crate::ising::{
    Coupling, FieldSign, Integrator, IsingConfig, Orientation, RampSchedule, DEFAULT_BX, DEFAULT_J_OVER_BX,
};
use crate::measurement::DetectionModel;
use crate::phonon::{WalkingWaveParams, DEFAULT_TARGET_J};
use crate::populations::Populations;

const KHZ: f64 = 2.0 * PI * 1e3;

pub const KEYS: &[&str] = &[
    "ising.n_spins",
    "ising.bx_khz",
    "ising.j_max_over_bx",
    "ising.bz_bias_khz",
    "ising.coupling",
    "ising.gamma_dephasing",
    "ising.field_sign",
    "ising.orientation",
    "ramp.t_total_us",
    "ramp.t_linear_end_us",
    "ramp.linear_end_fraction",
    "ramp.alpha_per_us",
    "ramp.beta",
    "ramp.n_steps",
    "ramp.dt_ns",
    "ramp.self_check",
    "phonon.omega_stretch_khz",
    "phonon.delta_khz",
    "phonon.target_j_khz",
    "phonon.g_up_khz",
    "phonon.fock_levels",
    "phonon.lamb_dicke",
    "phonon.n_loops",
    "phonon.dt_ns",
    "detect.mean_bright",
    "detect.mean_dark",
    "detect.window_us",
    "detect.n_shots",
    "detect.p_dd",
    "detect.p_uu",
    "detect.p_mixed",
    "sweep.points",
    "sweep.ratios",
    "gap.n_min",
    "gap.n_max",
    "gap.j_over_bx",
    "parity.points",
    "parity.target_contrast",
    "run.seed",
    "run.out_dir",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },

    #[error("line {line}: expected `section.key = value`, got {text:?}")]
    Syntax { line: usize, text: String },

    #[error("line {line}: unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(" (did you mean `{s}`?)")).unwrap_or_default())]
    UnknownKey { line: usize, key: String, suggestion: Option<String> },

    #[error("line {line}: key `{key}` already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },

    #[error("line {line}: invalid value {value:?} for `{key}`: {reason}")]
    InvalidValue { line: usize, key: String, value: String, reason: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub points: usize,
    /// Explicit final J(T)/B_x values; when absent the grid is
    /// `k/points × J_max/B_x` for `k = 1..=points`.
    pub ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapSpec {
    pub n_min: usize,
    pub n_max: usize,
    pub j_over_bx: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParitySpec {
    pub points: usize,
    /// When set, the dephasing rate is calibrated to reach this contrast.
    pub target_contrast: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhononRun {
    pub params: WalkingWaveParams,
    pub n_loops: usize,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectSpec {
    pub model: DetectionModel,
    pub n_shots: u64,
    /// Defaults to the final populations of the configured ramp.
    pub populations: Option<Populations>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ising: IsingConfig,
    pub orientation: Orientation,
    pub schedule: RampSchedule,
    pub integrator: Integrator,
    pub phonon: PhononRun,
    pub detect: DetectSpec,
    pub sweep: SweepSpec,
    pub gap: GapSpec,
    pub parity: ParitySpec,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        parse_config_str("").expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn branch(&self) -> Branch {
        match self.orientation {
            Orientation::PlusX => Branch::Ferro,
            Orientation::MinusX => Branch::Antiferro,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_config_str(&text)
}

/// Closest known key, if any is reasonably close.
pub fn nearest_key(key: &str) -> Option<&'static str> {
    KEYS.iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .min()
        .filter(|(d, k)| *d <= k.len().max(key.len()) / 2)
        .map(|(_, k)| k)
}

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.trim().to_string() })?;
            let known = KEYS.iter().find(|k| **k == key).ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: key.to_string(),
                suggestion: nearest_key(key).map(str::to_string),
            })?;
            if let Some((first, _)) = map.get(known) {
                return Err(ConfigError::Duplicate { line, key: key.to_string(), first: *first });
            }
            map.insert(*known, (line, value.to_string()));
        }
        Ok(Self { map })
    }

    fn bad(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let (line, value) = self.map.get(key).cloned().unwrap_or((0, String::new()));
        if line == 0 {
            return ConfigError::Invalid(format!("`{key}`: {}", reason.into()));
        }
        ConfigError::InvalidValue { line, key: key.to_string(), value, reason: reason.into() }
    }

    fn optional<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError> {
        match self.map.get(key) {
            None => Ok(None),
            Some((_, v)) => v.parse::<T>().map(Some).map_err(|_| self.bad(key, "cannot parse")),
        }
    }

    fn get<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, ConfigError> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    fn float(&self, key: &'static str, default: f64) -> Result<f64, ConfigError> {
        self.optional_float(key).map(|v| v.unwrap_or(default))
    }

    fn optional_float(&self, key: &'static str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.optional(key)?;
        match v {
            Some(x) if !x.is_finite() => Err(self.bad(key, "must be finite")),
            other => Ok(other),
        }
    }

    fn check(&self, key: &'static str, ok: bool, reason: &str) -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(self.bad(key, reason))
        }
    }

    /// Value in config units times `scale`, or `default` (already scaled) when unset.
    fn scaled(&self, key: &'static str, scale: f64, default: f64) -> Result<f64, ConfigError> {
        Ok(self.optional_float(key)?.map_or(default, |v| v * scale))
    }

    fn word_raw(&self, key: &str, default: &str) -> String {
        self.map.get(key).map_or(default.to_string(), |(_, v)| v.clone())
    }

    fn word(&self, key: &'static str, default: &str) -> String {
        self.map.get(key).map_or(default.to_string(), |(_, v)| v.to_ascii_lowercase())
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let e = Entries::parse(text)?;

    let n_spins: usize = e.get("ising.n_spins", 2)?;
    e.check("ising.n_spins", (1..=10).contains(&n_spins), "must lie in 1..=10")?;
    let bx = e.scaled("ising.bx_khz", KHZ, DEFAULT_BX)?;
    e.check("ising.bx_khz", bx > 0.0, "must be positive")?;
    let j_over_bx = e.float("ising.j_max_over_bx", -DEFAULT_J_OVER_BX)?;
    let bz_bias = e.scaled("ising.bz_bias_khz", KHZ, 0.0)?;
    let coupling = match e.word("ising.coupling", "nearest").as_str() {
        "nearest" | "nearest_neighbour" | "nearest_neighbor" => Coupling::NearestNeighbour,
        "all" | "all_pairs" => Coupling::AllPairs,
        _ => return Err(e.bad("ising.coupling", "expected `nearest` or `all`")),
    };
    let gamma = e.float("ising.gamma_dephasing", 0.0)?;
    e.check("ising.gamma_dephasing", gamma >= 0.0, "must be non-negative")?;
    e.check("ising.gamma_dephasing", gamma == 0.0 || n_spins <= 3, "dephasing is limited to n_spins <= 3")?;
    let field_sign = match e.word("ising.field_sign", "-1").as_str() {
        "-1" | "negative" | "-" => FieldSign::Negative,
        "1" | "+1" | "positive" | "+" => FieldSign::Positive,
        _ => return Err(e.bad("ising.field_sign", "expected -1 or +1")),
    };
    let orientation = match e.word("ising.orientation", "plus_x").as_str() {
        "plus_x" | "+x" => Orientation::PlusX,
        "minus_x" | "-x" => Orientation::MinusX,
        _ => return Err(e.bad("ising.orientation", "expected `plus_x` or `minus_x`")),
    };
    let ising = IsingConfig {
        n_spins,
        bx,
        j_max: j_over_bx * bx,
        bz_bias,
        coupling,
        gamma_dephasing: gamma,
        field_sign,
    };

    let ramp = RampSchedule::default();
    let t_total = e.scaled("ramp.t_total_us", 1e-6, ramp.t_total)?;
    e.check("ramp.t_total_us", t_total > 0.0, "must be positive")?;
    let t_linear_end = e.scaled("ramp.t_linear_end_us", 1e-6, ramp.t_linear_end)?;
    e.check("ramp.t_linear_end_us", (0.0..=t_total).contains(&t_linear_end), "must lie in [0, t_total_us]")?;
    let linear_end_fraction = e.float("ramp.linear_end_fraction", ramp.linear_end_fraction)?;
    e.check("ramp.linear_end_fraction", (0.0..=1.0).contains(&linear_end_fraction), "must lie in [0, 1]")?;
    let n_steps: usize = e.get("ramp.n_steps", ramp.n_steps)?;
    e.check("ramp.n_steps", n_steps >= 1, "must be at least 1")?;
    let schedule = RampSchedule {
        t_total,
        t_linear_end,
        linear_end_fraction,
        alpha: e.float("ramp.alpha_per_us", ramp.alpha)?,
        beta: e.float("ramp.beta", ramp.beta)?,
        n_steps,
    };
    schedule.validate().map_err(|err| e.bad("ramp.alpha_per_us", err.to_string()))?;
    let dt = e.scaled("ramp.dt_ns", 1e-9, Integrator::default().dt)?;
    e.check("ramp.dt_ns", dt > 0.0, "must be positive")?;
    e.check("ramp.dt_ns", gamma * dt < 0.1, "gamma_dephasing * dt must stay below 0.1")?;
    let integrator = Integrator { dt, self_check: e.get("ramp.self_check", true)? };

    let base = WalkingWaveParams::default();
    let omega_stretch = e.scaled("phonon.omega_stretch_khz", KHZ, base.omega_stretch)?;
    let delta = e.scaled("phonon.delta_khz", KHZ, base.delta)?;
    e.check("phonon.delta_khz", delta != 0.0, "detuning must be non-zero")?;
    e.check("phonon.delta_khz", delta.abs() < omega_stretch, "|delta| must be below omega_stretch")?;
    let fock_levels: usize = e.get("phonon.fock_levels", base.fock_levels)?;
    e.check("phonon.fock_levels", (8..=200).contains(&fock_levels), "must lie in 8..=200")?;
    let lamb_dicke = e.float("phonon.lamb_dicke", base.lamb_dicke)?;
    e.check("phonon.lamb_dicke", lamb_dicke > 0.0, "must be positive")?;
    let target_j = e.scaled("phonon.target_j_khz", KHZ, DEFAULT_TARGET_J)?;
    let params = WalkingWaveParams { omega_stretch, delta, fock_levels, lamb_dicke, ..base };
    let changed = params != base || e.map.contains_key("phonon.target_j_khz");
    let params = match e.optional_float("phonon.g_up_khz")? {
        Some(g) => WalkingWaveParams { g_up: g * KHZ, ..params },
        None if changed => params.calibrated(target_j),
        None => params,
    };
    let n_loops: usize = e.get("phonon.n_loops", 1)?;
    e.check("phonon.n_loops", (1..=100).contains(&n_loops), "must lie in 1..=100")?;
    let phonon_dt = e.scaled("phonon.dt_ns", 1e-9, 10e-9)?;
    e.check("phonon.dt_ns", phonon_dt > 0.0, "must be positive")?;
    let phonon = PhononRun { params, n_loops, dt: phonon_dt };

    let detect_defaults = DetectionModel::default();
    let model = DetectionModel {
        mean_bright: e.float("detect.mean_bright", detect_defaults.mean_bright)?,
        mean_dark: e.float("detect.mean_dark", detect_defaults.mean_dark)?,
        window: e.scaled("detect.window_us", 1e-6, detect_defaults.window)?,
        n_ions: 2,
    };
    e.check("detect.mean_dark", model.mean_dark > 0.0, "must be positive")?;
    e.check("detect.mean_bright", model.mean_bright > model.mean_dark, "must exceed detect.mean_dark")?;
    let n_shots: u64 = e.get("detect.n_shots", 10_000)?;
    e.check("detect.n_shots", n_shots >= 100, "must be at least 100")?;
    let probs = [
        e.optional_float("detect.p_dd")?,
        e.optional_float("detect.p_uu")?,
        e.optional_float("detect.p_mixed")?,
    ];
    let populations = match probs {
        [None, None, None] => None,
        [Some(a), Some(b), Some(c)] => Some(
            Populations::new(a, b, c)
                .ok()
                .filter(|p| p.as_array().iter().all(|x| *x >= 0.0))
                .ok_or_else(|| e.bad("detect.p_dd", "p_dd, p_uu, p_mixed must be non-negative and sum to 1"))?,
        ),
        _ => return Err(ConfigError::Invalid("set all of detect.p_dd, detect.p_uu, detect.p_mixed or none".into())),
    };
    let detect = DetectSpec { model, n_shots, populations };

    let points: usize = e.get("sweep.points", 50)?;
    e.check("sweep.points", points >= 1, "must be at least 1")?;
    let ratios = match e.map.get("sweep.ratios") {
        None => None,
        Some((_, v)) => {
            let parsed: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let list = parsed.map_err(|_| e.bad("sweep.ratios", "expected a comma-separated list of numbers"))?;
            let ok = !list.is_empty()
                && j_over_bx != 0.0
                && list.iter().all(|r| r.is_finite() && *r / j_over_bx > 0.0 && *r / j_over_bx <= 1.0);
            e.check("sweep.ratios", ok, "each ratio must have the sign of j_max_over_bx and |ratio| <= |j_max_over_bx|")?;
            Some(list)
        }
    };
    let sweep = SweepSpec { points, ratios };

    let gap = GapSpec {
        n_min: e.get("gap.n_min", 2)?,
        n_max: e.get("gap.n_max", 6)?,
        j_over_bx: e.float("gap.j_over_bx", -5.0)?,
    };
    e.check("gap.n_min", gap.n_min >= 2, "must be at least 2")?;
    e.check("gap.n_max", gap.n_max >= gap.n_min && gap.n_max <= 10, "must lie in n_min..=10")?;

    let parity_points: usize = e.get("parity.points", DEFAULT_PHASE_POINTS)?;
    e.check("parity.points", parity_points >= 8, "must be at least 8")?;
    let target_contrast = e.optional_float("parity.target_contrast")?;
    if let Some(c) = target_contrast {
        e.check("parity.target_contrast", c > 0.0 && c < 1.0, "must lie in (0, 1)")?;
        e.check("parity.target_contrast", n_spins == 2, "needs ising.n_spins = 2")?;
    }
    let parity = ParitySpec { points: parity_points, target_contrast };

    let seed: u64 = e.get("run.seed", 0)?;
    let out_dir = PathBuf::from(e.word_raw("run.out_dir", "."));

    Ok(RunConfig {
        ising,
        orientation,
        schedule,
        integrator,
        phonon,
        detect,
        sweep,
        gap,
        parity,
        seed,
        out_dir,
    })
}
