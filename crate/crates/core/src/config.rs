//! Plain-text `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys and
//! repeated keys are errors. Every key is optional.
//!
//! Solver keys and defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `tolerance` | `1e-10` |
//! | `max_iterations` | `10000` |
//! | `damping` | `0.5` |
//! | `continuation_factor` | `0.7` |
//! | `safe_height_multiplier` | `1.0` |
//!
//! Ensemble keys and defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `n` | `1000` |
//! | `replicates` | `5` |
//! | `seed` | `0` |
//! | `model` | `iid` (unit variance); otherwise a coefficient file path |
//! | `symmetrization` | `wigner` |
//! | `innovation` | `gaussian` |
//! | `innovation_variance` | `1.0` (Volterra models only) |

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::{parse_model, FieldModel, VolterraCoefficients};
use crate::sim::{EnsembleConfig, Innovation, Symmetrization};
use crate::solver::SolverConfig;

/// One `key = value` line with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_key_values(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: ln + 1,
            message: "expected key = value".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse {
                line: ln + 1,
                message: "empty key".into(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Parse {
                line: ln + 1,
                message: format!("duplicate key {key:?}"),
            });
        }
        out.push(Entry {
            line: ln + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn value<T: FromStr>(e: &Entry) -> Result<T> {
    e.value.parse().map_err(|_| Error::Parse {
        line: e.line,
        message: format!("bad value {:?} for {}", e.value, e.key),
    })
}

fn unknown(e: &Entry) -> Error {
    Error::Parse {
        line: e.line,
        message: format!("unknown key {:?}", e.key),
    }
}

impl SolverConfig {
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut cfg = SolverConfig::default();
        for e in parse_key_values(text)? {
            match e.key.as_str() {
                "tolerance" => cfg.tolerance = value(&e)?,
                "max_iterations" => cfg.max_iterations = value(&e)?,
                "damping" => cfg.damping = value(&e)?,
                "continuation_factor" => cfg.continuation_factor = value(&e)?,
                "safe_height_multiplier" => cfg.safe_height_multiplier = value(&e)?,
                _ => return Err(unknown(&e)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "tolerance = {:e}\nmax_iterations = {}\ndamping = {}\ncontinuation_factor = {}\nsafe_height_multiplier = {}\n",
            self.tolerance,
            self.max_iterations,
            self.damping,
            self.continuation_factor,
            self.safe_height_multiplier
        )
    }
}

/// Ensemble configuration as read from text, with the model still a
/// reference (`iid` or a file path).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub model: String,
    pub symmetrization: Symmetrization,
    pub innovation: Innovation,
    pub innovation_variance: f64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            n: 1000,
            replicates: 5,
            seed: 0,
            model: "iid".into(),
            symmetrization: Symmetrization::Wigner,
            innovation: Innovation::Gaussian,
            innovation_variance: 1.0,
        }
    }
}

impl EnsembleSettings {
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut s = EnsembleSettings::default();
        for e in parse_key_values(text)? {
            match e.key.as_str() {
                "n" => s.n = value(&e)?,
                "replicates" => s.replicates = value(&e)?,
                "seed" => s.seed = value(&e)?,
                "model" => s.model = e.value.clone(),
                "symmetrization" => s.symmetrization = value(&e)?,
                "innovation" => s.innovation = value(&e)?,
                "innovation_variance" => s.innovation_variance = value(&e)?,
                _ => return Err(unknown(&e)),
            }
        }
        if !(s.innovation_variance > 0.0 && s.innovation_variance.is_finite()) {
            return Err(Error::InvalidInput("innovation_variance must be positive".into()));
        }
        Ok(s)
    }

    pub fn to_key_values(&self) -> String {
        format!(
            "n = {}\nreplicates = {}\nseed = {}\nmodel = {}\nsymmetrization = {}\ninnovation = {}\ninnovation_variance = {}\n",
            self.n,
            self.replicates,
            self.seed,
            self.model,
            self.symmetrization,
            self.innovation,
            self.innovation_variance
        )
    }

    /// Path of the model file, resolved against `base_dir`; `None` for `iid`.
    pub fn model_path(&self, base_dir: &Path) -> Option<std::path::PathBuf> {
        (self.model != "iid").then(|| base_dir.join(&self.model))
    }

    /// Loads the model (relative paths resolve against `base_dir`) and
    /// validates the result.
    pub fn resolve(&self, base_dir: &Path) -> Result<EnsembleConfig> {
        let model = match self.model_path(base_dir) {
            None => FieldModel::iid(1.0),
            Some(path) => parse_model(&std::fs::read_to_string(path)?)?,
        };
        self.with_model(model)
    }

    pub fn with_model(&self, model: FieldModel) -> Result<EnsembleConfig> {
        let model = match model {
            FieldModel::Volterra(bv) => {
                let entries: Vec<_> = bv.entries().collect();
                FieldModel::Volterra(VolterraCoefficients::new(&entries, self.innovation_variance)?)
            }
            other => other,
        };
        let cfg = EnsembleConfig {
            n: self.n,
            replicates: self.replicates,
            seed: self.seed,
            model,
            symmetrization: self.symmetrization,
            innovation: self.innovation,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
