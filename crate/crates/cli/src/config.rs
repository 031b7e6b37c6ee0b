//! Flat JSON run configuration with command-line overrides.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

/// `alpha`: a fixed Tikhonov weight or `"cv"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaChoice {
    Fixed(f64),
    Cv,
}

impl Serialize for AlphaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Fixed(a) => s.serialize_f64(*a),
            Self::Cv => s.serialize_str("cv"),
        }
    }
}

impl std::str::FromStr for AlphaChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(Self::Cv);
        }
        let v: f64 = s.parse().map_err(|_| format!("alpha must be a number or `cv`, got `{s}`"))?;
        if !(v >= 0.0) || !v.is_finite() {
            return Err(format!("alpha must be finite and nonnegative, got {v}"));
        }
        Ok(Self::Fixed(v))
    }
}

impl<'de> Deserialize<'de> for AlphaChoice {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => {
                let v = n.as_f64().ok_or_else(|| serde::de::Error::custom("alpha out of range"))?;
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(serde::de::Error::custom(format!("alpha must be finite and nonnegative, got {v}")));
                }
                Ok(Self::Fixed(v))
            }
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("alpha must be a number or \"cv\", got {other}"))),
        }
    }
}

/// Gaussian bandwidth: a number or `"median"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    Median,
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => Ok(Self::Fixed(n.as_f64().unwrap_or(f64::NAN))),
            Value::String(s) if s == "median" => Ok(Self::Median),
            other => Err(serde::de::Error::custom(format!("sigma must be a number or \"median\", got {other}"))),
        }
    }
}

/// Every recognised key. Commands read the keys they need and ignore the rest;
/// keys outside this list are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    // loss
    pub family: Option<String>,
    pub k: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub grid_lo: Option<f64>,
    pub grid_hi: Option<f64>,
    pub grid_n: Option<usize>,

    // estimation
    pub alpha: Option<AlphaChoice>,
    pub cv_grid: Option<Vec<f64>>,
    pub cv_folds: Option<usize>,
    pub kernel: Option<String>,
    pub sigma: Option<Bandwidth>,
    pub degree: Option<u32>,
    pub offset: Option<f64>,
    pub max_iter: Option<usize>,
    pub grad_tol: Option<f64>,

    // data
    pub data: Option<String>,
    pub n_p: Option<usize>,
    pub n_q: Option<usize>,
    pub n_holdout: Option<usize>,
    pub mu_p: Option<f64>,
    pub sigma_p: Option<f64>,
    pub mu_q: Option<f64>,
    pub sigma_q: Option<f64>,
    pub p_csv: Option<PathBuf>,
    pub q_csv: Option<PathBuf>,
    pub interval: Option<[f64; 2]>,
    pub breakpoints: Option<Vec<f64>>,
    pub p_levels: Option<Vec<f64>>,
    pub q_levels: Option<Vec<f64>>,

    // eval
    pub model: Option<PathBuf>,
    pub points_csv: Option<PathBuf>,

    // figures
    pub quad_nodes: Option<usize>,
    pub curve_n: Option<usize>,
    pub alphas: Option<Vec<f64>>,
    pub sizes: Option<Vec<usize>>,
    pub n_seeds: Option<usize>,
    pub x_lo: Option<f64>,
    pub x_hi: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub n_src: Option<usize>,
    pub n_tgt: Option<usize>,

    // check
    pub n_pairs: Option<usize>,
    pub n_random: Option<usize>,
    pub mutate_gamma_prime: Option<bool>,
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub family: Option<String>,
    pub k: Option<f64>,
    pub alpha: Option<AlphaChoice>,
}

impl RunConfig {
    /// Reads `path` (if any), applies `overrides`, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> CliResult<Self> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text)
                    .map_err(|e| CliError::Usage(format!("config {} is not JSON: {e}", p.display())))?
                {
                    Value::Object(m) => m,
                    _ => return Err(CliError::Usage("config must be a JSON object".into())),
                }
            }
            None => Map::new(),
        };
        for (key, value) in map.iter() {
            if matches!(value, Value::Object(_)) {
                return Err(CliError::Usage(format!("config is flat: key `{key}` holds an object")));
            }
        }
        let set = |map: &mut Map<String, Value>, key: &str, v: Value| {
            map.insert(key.to_string(), v);
        };
        if let Some(s) = overrides.seed {
            set(&mut map, "seed", Value::from(s));
        }
        if let Some(o) = &overrides.out {
            set(&mut map, "out", Value::from(o.to_string_lossy().into_owned()));
        }
        if let Some(f) = &overrides.family {
            set(&mut map, "family", Value::from(f.clone()));
        }
        if let Some(k) = overrides.k {
            set(&mut map, "k", Value::from(k));
        }
        match overrides.alpha {
            Some(AlphaChoice::Fixed(a)) => set(&mut map, "alpha", Value::from(a)),
            Some(AlphaChoice::Cv) => set(&mut map, "alpha", Value::from("cv")),
            None => {}
        }
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0) || !x.is_finite() => Err(CliError::Usage(format!("`{name}` must be positive, got {x}"))),
            _ => Ok(()),
        };
        positive("sigma_p", self.sigma_p)?;
        positive("sigma_q", self.sigma_q)?;
        positive("grad_tol", self.grad_tol)?;
        if let Some(Bandwidth::Fixed(s)) = self.sigma {
            positive("sigma", Some(s))?;
        }
        for (name, v) in [("grid_n", self.grid_n), ("curve_n", self.curve_n), ("n_seeds", self.n_seeds)] {
            if v == Some(0) {
                return Err(CliError::Usage(format!("`{name}` must be at least 1")));
            }
        }
        if let Some(n) = self.noise_sigma {
            if !(n >= 0.0) {
                return Err(CliError::Usage(format!("`noise_sigma` must be nonnegative, got {n}")));
            }
        }
        if let Some(g) = &self.cv_grid {
            if g.is_empty() || g.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
                return Err(CliError::Usage("`cv_grid` needs finite nonnegative values".into()));
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}
