//! Experiment configuration: `key = value` text, mode-dependent defaults and
//! validation.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::anc::AncConfig;
use crate::dmlms::{Cadence, EstimationConfig, NetworkSetup, StepSizes};
use crate::error::{Error, Result};
use crate::multirate::RateSchedule;
use crate::topology::load_topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Estimate,
    Anc,
    Sweep,
    Compare,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Estimate => "estimate",
            Mode::Anc => "anc",
            Mode::Sweep => "sweep",
            Mode::Compare => "compare",
        }
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "estimate" => Ok(Mode::Estimate),
            "anc" => Ok(Mode::Anc),
            "sweep" => Ok(Mode::Sweep),
            "compare" => Ok(Mode::Compare),
            _ => Err("expected one of estimate, anc, sweep, compare".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    /// Generated from the master seed with `mean_degree`.
    Random,
    /// 1-indexed edge list.
    File(PathBuf),
}

impl fmt::Display for TopologySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologySource::Random => f.write_str("random"),
            TopologySource::File(p) => write!(f, "{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub node_count: usize,
    pub m1: usize,
    pub m2: usize,
    pub lp: usize,
    pub ls: usize,
    pub delta: usize,
    pub delta_offset: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub mu1_grid: Vec<f64>,
    pub mu2_grid: Vec<f64>,
    pub trials: usize,
    pub iterations: usize,
    pub master_seed: u64,
    pub topology: TopologySource,
    pub mean_degree: f64,
    pub variance_min: f64,
    pub variance_max: f64,
    pub snr_min_db: f64,
    pub snr_max_db: f64,
    pub observation_noise: bool,
    pub mic_snr_db: Option<f64>,
    pub cadence: Cadence,
    pub parallel: bool,
    pub out_dir: PathBuf,
    pub plot: bool,
}

pub const KEYS: &[&str] = &[
    "mode",
    "node_count",
    "m1",
    "m2",
    "lp",
    "ls",
    "delta",
    "delta_offset",
    "mu1",
    "mu2",
    "mu1_grid",
    "mu2_grid",
    "trials",
    "iterations",
    "master_seed",
    "topology",
    "mean_degree",
    "variance_min",
    "variance_max",
    "snr_min_db",
    "snr_max_db",
    "observation_noise",
    "mic_snr_db",
    "cadence",
    "parallel",
    "out_dir",
    "plot",
];

impl ExperimentConfig {
    pub fn defaults(mode: Mode) -> Self {
        let grid = vec![0.1, 0.2, 0.4, 0.8];
        let estimation = Self {
            mode,
            node_count: 20,
            m1: 5,
            m2: 4,
            lp: 16,
            ls: 8,
            delta: 2,
            delta_offset: 0,
            mu1: 0.4,
            mu2: 0.4,
            mu1_grid: grid.clone(),
            mu2_grid: grid,
            trials: 100,
            iterations: 3000,
            master_seed: 1,
            topology: TopologySource::Random,
            mean_degree: 4.0,
            variance_min: 0.1,
            variance_max: 0.3,
            snr_min_db: 10.0,
            snr_max_db: 30.0,
            observation_noise: true,
            mic_snr_db: None,
            cadence: Cadence::Sample,
            parallel: true,
            out_dir: PathBuf::from("out"),
            plot: true,
        };
        match mode {
            Mode::Anc => Self {
                node_count: 10,
                m1: 16,
                m2: 8,
                mu1: 0.01,
                mu2: 0.01,
                iterations: 6000,
                mean_degree: 3.0,
                variance_min: 0.5,
                variance_max: 1.5,
                ..estimation
            },
            _ => estimation,
        }
    }

    pub fn schedule(&self) -> Result<RateSchedule> {
        RateSchedule::new(self.delta, self.delta_offset)
    }

    pub fn steps(&self) -> Result<StepSizes> {
        StepSizes::new(self.mu1, self.mu2)
    }

    pub fn estimation_config(&self) -> Result<EstimationConfig> {
        Ok(EstimationConfig {
            m1: self.m1,
            m2: self.m2,
            schedule: self.schedule()?,
            steps: self.steps()?,
            cadence: self.cadence,
            trials: self.trials,
            iterations: self.iterations,
            master_seed: self.master_seed,
            observation_noise: self.observation_noise,
            parallel: self.parallel,
            fixed_plant: None,
        })
    }

    pub fn anc_config(&self) -> Result<AncConfig> {
        Ok(AncConfig {
            m1: self.m1,
            m2: self.m2,
            primary_len: self.lp,
            secondary_len: self.ls,
            schedule: self.schedule()?,
            steps: self.steps()?,
            cadence: self.cadence,
            trials: self.trials,
            iterations: self.iterations,
            master_seed: self.master_seed,
            mic_snr_db: self.mic_snr_db,
            parallel: self.parallel,
            fixed_paths: None,
        })
    }

    /// Topology, combination weights and per-node profiles for this seed.
    pub fn network_setup(&self) -> Result<NetworkSetup> {
        let variance = (self.variance_min, self.variance_max);
        let snr = (self.snr_min_db, self.snr_max_db);
        match &self.topology {
            TopologySource::Random => {
                let degree = if self.node_count == 1 { 0.0 } else { self.mean_degree };
                NetworkSetup::generate(self.master_seed, self.node_count, degree, variance, snr)
            }
            TopologySource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let topology = load_topology(&text)?;
                if topology.node_count() != self.node_count {
                    return Err(Error::config(
                        "topology",
                        format!(
                            "{} has {} nodes but node_count = {}",
                            path.display(),
                            topology.node_count(),
                            self.node_count
                        ),
                    ));
                }
                NetworkSetup::with_topology(self.master_seed, topology, variance, snr)
            }
        }
    }

    /// `key = value` for every key, in canonical order. Parsing the result
    /// gives back an identical config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.value_of(key));
        }
        out
    }

    fn value_of(&self, key: &str) -> String {
        let grid = |g: &[f64]| g.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        match key {
            "mode" => self.mode.as_str().into(),
            "node_count" => self.node_count.to_string(),
            "m1" => self.m1.to_string(),
            "m2" => self.m2.to_string(),
            "lp" => self.lp.to_string(),
            "ls" => self.ls.to_string(),
            "delta" => self.delta.to_string(),
            "delta_offset" => self.delta_offset.to_string(),
            "mu1" => self.mu1.to_string(),
            "mu2" => self.mu2.to_string(),
            "mu1_grid" => grid(&self.mu1_grid),
            "mu2_grid" => grid(&self.mu2_grid),
            "trials" => self.trials.to_string(),
            "iterations" => self.iterations.to_string(),
            "master_seed" => self.master_seed.to_string(),
            "topology" => self.topology.to_string(),
            "mean_degree" => self.mean_degree.to_string(),
            "variance_min" => self.variance_min.to_string(),
            "variance_max" => self.variance_max.to_string(),
            "snr_min_db" => self.snr_min_db.to_string(),
            "snr_max_db" => self.snr_max_db.to_string(),
            "observation_noise" => self.observation_noise.to_string(),
            "mic_snr_db" => self.mic_snr_db.map_or("none".into(), |v| v.to_string()),
            "cadence" => self.cadence.as_str().into(),
            "parallel" => self.parallel.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "plot" => self.plot.to_string(),
            _ => unreachable!("unknown key {key}"),
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |msg: String| Error::config(key, msg);
        match key {
            "mode" => self.mode = value.parse().map_err(bad)?,
            "node_count" => self.node_count = number(key, value)?,
            "m1" => self.m1 = number(key, value)?,
            "m2" => self.m2 = number(key, value)?,
            "lp" => self.lp = number(key, value)?,
            "ls" => self.ls = number(key, value)?,
            "delta" => self.delta = number(key, value)?,
            "delta_offset" => self.delta_offset = number(key, value)?,
            "mu1" => self.mu1 = number(key, value)?,
            "mu2" => self.mu2 = number(key, value)?,
            "mu1_grid" => self.mu1_grid = list(key, value)?,
            "mu2_grid" => self.mu2_grid = list(key, value)?,
            "trials" => self.trials = number(key, value)?,
            "iterations" => self.iterations = number(key, value)?,
            "master_seed" => self.master_seed = number(key, value)?,
            "topology" => {
                self.topology = match value {
                    "random" => TopologySource::Random,
                    "" => return Err(bad("expected `random` or an edge-list path".into())),
                    path => TopologySource::File(PathBuf::from(path)),
                }
            }
            "mean_degree" => self.mean_degree = number(key, value)?,
            "variance_min" => self.variance_min = number(key, value)?,
            "variance_max" => self.variance_max = number(key, value)?,
            "snr_min_db" => self.snr_min_db = number(key, value)?,
            "snr_max_db" => self.snr_max_db = number(key, value)?,
            "observation_noise" => self.observation_noise = number(key, value)?,
            "mic_snr_db" => {
                self.mic_snr_db = match value {
                    "none" => None,
                    v => Some(number(key, v)?),
                }
            }
            "cadence" => {
                self.cadence = match value {
                    "sample" => Cadence::Sample,
                    "tick" => Cadence::Tick,
                    _ => return Err(bad("expected `sample` or `tick`".into())),
                }
            }
            "parallel" => self.parallel = number(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "plot" => self.plot = number(key, value)?,
            _ => return Err(bad("unknown key".into())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("node_count", self.node_count),
            ("m1", self.m1),
            ("m2", self.m2),
            ("lp", self.lp),
            ("ls", self.ls),
            ("delta", self.delta),
            ("trials", self.trials),
            ("iterations", self.iterations),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::config(key, "must be at least 1"));
            }
        }
        if self.delta_offset >= self.delta {
            return Err(Error::config(
                "delta_offset",
                format!("{} is out of range, expected 0 <= delta_offset < delta = {}", self.delta_offset, self.delta),
            ));
        }
        for (key, v) in [("mu1", self.mu1), ("mu2", self.mu2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, format!("{v} is out of range, expected a finite value >= 0")));
            }
        }
        for (key, grid) in [("mu1_grid", &self.mu1_grid), ("mu2_grid", &self.mu2_grid)] {
            if grid.is_empty() {
                return Err(Error::config(key, "grid must not be empty"));
            }
            if let Some(v) = grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                return Err(Error::config(key, format!("{v} is out of range, expected finite values >= 0")));
            }
        }
        if !(self.variance_min > 0.0 && self.variance_min.is_finite()) {
            return Err(Error::config("variance_min", format!("{} is out of range, expected > 0", self.variance_min)));
        }
        if !(self.variance_max >= self.variance_min && self.variance_max.is_finite()) {
            return Err(Error::config(
                "variance_max",
                format!("{} is out of range, expected >= variance_min = {}", self.variance_max, self.variance_min),
            ));
        }
        if !self.snr_min_db.is_finite() {
            return Err(Error::config("snr_min_db", "must be finite"));
        }
        if !(self.snr_max_db >= self.snr_min_db && self.snr_max_db.is_finite()) {
            return Err(Error::config(
                "snr_max_db",
                format!("{} is out of range, expected >= snr_min_db = {}", self.snr_max_db, self.snr_min_db),
            ));
        }
        if let Some(v) = self.mic_snr_db {
            if !v.is_finite() {
                return Err(Error::config("mic_snr_db", "must be finite or `none`"));
            }
        }
        if self.topology == TopologySource::Random && self.node_count > 1 {
            let n = self.node_count as f64;
            let lo = 2.0 * (n - 1.0) / n;
            let hi = n - 1.0;
            if !(self.mean_degree >= lo - 1e-9 && self.mean_degree <= hi + 1e-9) {
                return Err(Error::config(
                    "mean_degree",
                    format!("{} is out of range, expected {lo} <= mean_degree <= {hi} for {} nodes", self.mean_degree, self.node_count),
                ));
            }
        }
        Ok(())
    }
}

fn number<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| number(key, s))
        .collect()
}

/// Split one line into `(key, value)` pairs. A line is either a single
/// `key = value` or several whitespace-separated `key=value` tokens.
fn assignments(line: &str, number: usize) -> Result<Vec<(String, String)>> {
    let malformed = || Error::Parse {
        line: number,
        message: format!("expected `key = value`, got `{line}`"),
    };
    let pair = |s: &str| -> Result<(String, String)> {
        let (k, v) = s.split_once('=').ok_or_else(malformed)?;
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(malformed());
        }
        Ok((k.to_string(), v.trim().to_string()))
    };
    if line.matches('=').count() <= 1 {
        return Ok(vec![pair(line)?]);
    }
    line.split_whitespace().map(pair).collect()
}

/// Parse configuration text, then apply `overrides` in order. Defaults
/// follow the mode, which is looked up in the overrides first, then in the
/// text, falling back to `estimate`.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        pairs.extend(assignments(line, i + 1)?);
    }
    pairs.extend(overrides.iter().cloned());
    let mode = match pairs.iter().rev().find(|(k, _)| k == "mode") {
        Some((_, v)) => v.parse().map_err(|e: String| Error::config("mode", e))?,
        None => Mode::Estimate,
    };
    let mut config = ExperimentConfig::defaults(mode);
    for (key, value) in &pairs {
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, overrides)
}
