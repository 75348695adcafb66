//! Experiment configuration: defaults, then a flat `key = value` file, then
//! `Z2SYNC_*` environment variables, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{PosteriorOptions, SamplerOptions};
use crate::model::ModelParams;
use crate::pipeline::PipelineConfig;
use crate::renorm::RenormOptions;

/// Prefix of environment overrides, e.g. `Z2SYNC_P=0.1`.
pub const ENV_PREFIX: &str = "Z2SYNC_";

/// Everything a run needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub n: i64,
    pub p: f64,
    pub eta: f64,
    /// Gaussian range; 0 selects twice the block scale.
    pub range_l: usize,
    pub seed: u64,
    pub scale: i64,
    pub kappa: u32,
    pub t: f64,
    pub burn_in: usize,
    /// Total sweeps of each block chain, burn-in included.
    pub sweeps: usize,
    /// Measured sweeps after burn-in for diagnostics.
    pub measure: usize,
    pub replicas: usize,
    pub reps: usize,
    pub instances: usize,
    pub risk_pairs: usize,
    pub beta_scale: f64,
    pub p_grid: Vec<f64>,
    pub scale_grid: Vec<i64>,
    pub lambda_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    /// Not serialized: results do not depend on it.
    #[serde(default, skip_serializing)]
    pub threads: usize,
    #[serde(default, skip_serializing)]
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 20,
            p: 0.05,
            eta: 0.5,
            range_l: 0,
            seed: 1,
            scale: 6,
            kappa: 2,
            t: 0.5,
            burn_in: 500,
            sweeps: 500,
            measure: 2000,
            replicas: 2,
            reps: 1,
            instances: 10,
            risk_pairs: 200_000,
            beta_scale: 1.0,
            p_grid: Vec::new(),
            scale_grid: Vec::new(),
            lambda_grid: Vec::new(),
            q_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            threads: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "d",
    "n",
    "p",
    "eta",
    "range_l",
    "seed",
    "scale",
    "kappa",
    "t",
    "burn_in",
    "sweeps",
    "measure",
    "replicas",
    "reps",
    "instances",
    "risk_pairs",
    "beta_scale",
    "p_grid",
    "scale_grid",
    "lambda_grid",
    "q_grid",
    "threads",
    "out_dir",
];

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::param(key, format!("cannot parse {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let v = value.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse(key, s)).collect()
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Set one key from its textual value. Lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "d" => self.d = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "p" => self.p = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "range_l" => self.range_l = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "scale" => self.scale = parse(key, value)?,
            "kappa" => self.kappa = parse(key, value)?,
            "t" => self.t = parse(key, value)?,
            "burn_in" => self.burn_in = parse(key, value)?,
            "sweeps" => self.sweeps = parse(key, value)?,
            "measure" => self.measure = parse(key, value)?,
            "replicas" => self.replicas = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "instances" => self.instances = parse(key, value)?,
            "risk_pairs" => self.risk_pairs = parse(key, value)?,
            "beta_scale" => self.beta_scale = parse(key, value)?,
            "p_grid" => self.p_grid = parse_list(key, value)?,
            "scale_grid" => self.scale_grid = parse_list(key, value)?,
            "lambda_grid" => self.lambda_grid = parse_list(key, value)?,
            "q_grid" => self.q_grid = parse_list(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value.trim()),
            _ => return Err(Error::param(key, "unknown configuration key")),
        }
        Ok(())
    }

    /// Apply a flat `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("config line {}: expected key = value", lineno + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Apply `Z2SYNC_<KEY>` variables from `vars`.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (k, v) in vars {
            if let Some(rest) = k.strip_prefix(ENV_PREFIX) {
                let key = rest.to_ascii_lowercase();
                if KEYS.contains(&key.as_str()) {
                    self.set(&key, &v)?;
                }
            }
        }
        Ok(())
    }

    /// Gaussian range actually used.
    pub fn effective_range(&self) -> usize {
        if self.range_l == 0 {
            2 * self.scale.max(0) as usize
        } else {
            self.range_l
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.d, self.n, self.p, self.eta, self.effective_range(), self.seed)
    }

    /// Model admitting `p = 0` and `p = 1/2`.
    pub fn model_closed(&self) -> Result<ModelParams> {
        ModelParams::new_closed(self.d, self.n, self.p, self.eta, self.effective_range(), self.seed)
    }

    pub fn block_sampler(&self) -> SamplerOptions {
        SamplerOptions {
            burn_in: self.burn_in,
            sweeps: self.sweeps,
        }
    }

    pub fn diag_sampler(&self) -> SamplerOptions {
        SamplerOptions {
            burn_in: self.burn_in,
            sweeps: self.burn_in + self.measure,
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            model: self.model()?,
            scale: self.scale,
            kappa: self.kappa,
            t: self.t,
            renorm: RenormOptions {
                sampler: self.block_sampler(),
                posterior: PosteriorOptions::default(),
                replica: 0,
            },
            risk_pairs: self.risk_pairs,
        })
    }

    /// Checks shared by every subcommand.
    pub fn validate(&self) -> Result<()> {
        self.model_closed()?;
        if self.scale < 6 || self.scale % 6 != 0 {
            return Err(Error::param("scale", format!("must be a positive multiple of 6, got {}", self.scale)));
        }
        if self.kappa == 0 {
            return Err(Error::param("kappa", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::param("t", format!("must lie in [0, 1], got {}", self.t)));
        }
        self.block_sampler().validate()?;
        if self.replicas < 2 {
            return Err(Error::param("replicas", "need at least two replicas"));
        }
        if self.reps == 0 {
            return Err(Error::param("reps", "must be positive"));
        }
        if self.risk_pairs < 2 {
            return Err(Error::param("risk_pairs", "need at least two sampled pairs"));
        }
        if !(self.beta_scale > 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::param("beta_scale", "must be positive and finite"));
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(**p > 0.0 && **p < 0.5)) {
            return Err(Error::param("p_grid", format!("values must lie in (0, 1/2), got {p}")));
        }
        if let Some(s) = self.scale_grid.iter().find(|s| **s < 6 || **s % 6 != 0) {
            return Err(Error::param("scale_grid", format!("values must be positive multiples of 6, got {s}")));
        }
        Ok(())
    }

    /// Every setting that affects results, as `key=value` pairs joined by
    /// `;`. Thread count and output directory are left out.
    pub fn params_string(&self) -> String {
        let mut m: BTreeMap<&str, String> = BTreeMap::new();
        m.insert("d", self.d.to_string());
        m.insert("n", self.n.to_string());
        m.insert("p", self.p.to_string());
        m.insert("eta", self.eta.to_string());
        m.insert("range_l", self.effective_range().to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("scale", self.scale.to_string());
        m.insert("kappa", self.kappa.to_string());
        m.insert("t", self.t.to_string());
        m.insert("burn_in", self.burn_in.to_string());
        m.insert("sweeps", self.sweeps.to_string());
        m.insert("measure", self.measure.to_string());
        m.insert("replicas", self.replicas.to_string());
        m.insert("reps", self.reps.to_string());
        m.insert("instances", self.instances.to_string());
        m.insert("risk_pairs", self.risk_pairs.to_string());
        m.insert("beta_scale", self.beta_scale.to_string());
        m.insert("p_grid", join(&self.p_grid));
        m.insert("scale_grid", join(&self.scale_grid));
        m.insert("lambda_grid", join(&self.lambda_grid));
        m.insert("q_grid", join(&self.q_grid));
        let mut s = String::new();
        for (i, (k, v)) in m.iter().enumerate() {
            if i > 0 {
                s.push(';');
            }
            let _ = write!(s, "{k}={v}");
        }
        s
    }
}
