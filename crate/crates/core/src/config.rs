//! Experiment configuration, read from a single JSON document with three
//! sections: `env`, `algo` and `run`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::desapo::{ConstantsProfile, SwitchMode};
use crate::env::{load_delay_table, load_loss_table, DelayModel, LossModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub algo: AlgoConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    #[serde(rename = "K")]
    pub num_arms: usize,
    #[serde(rename = "T")]
    pub horizon: u64,
    pub loss: LossSpec,
    pub delay: DelaySpec,
}

/// Loss model as written in a config; CSV tables are referenced by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    Bernoulli {
        means: Vec<f64>,
    },
    Flip {
        means_a: Vec<f64>,
        means_b: Vec<f64>,
        flip_round: u64,
    },
    Table {
        rows: Vec<Vec<f64>>,
    },
    /// CSV with header `t,arm0,...`; relative paths resolve against the config file.
    TableFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    Fixed {
        d: u64,
    },
    GeometricCapped {
        mean: f64,
        cap: u64,
    },
    Spike {
        base: u64,
        spike: u64,
        rounds: BTreeSet<u64>,
    },
    Table {
        delays: Vec<u64>,
    },
    /// CSV with header `t,delay`.
    TableFile {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgoKind {
    #[default]
    Base,
    Ghost,
    /// The fallback alone, from round 1.
    FallbackOnly,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum FallbackSpec {
    #[serde(rename = "exp3-delayed")]
    Exp3Delayed {
        /// Learning rate; `sqrt(log K / (K T))` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
}

impl Default for FallbackSpec {
    fn default() -> Self {
        FallbackSpec::Exp3Delayed { eta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgoConfig {
    #[serde(default)]
    pub variant: AlgoKind,
    #[serde(default)]
    pub constants: ConstantsProfile<f64>,
    #[serde(default)]
    pub fallback: FallbackSpec,
    #[serde(default)]
    pub switch_mode: SwitchMode,
    /// Cap the importance-sampling radius at 1 in its bounds and interval check.
    #[serde(default)]
    pub cap_is_width: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            variant: AlgoKind::Base,
            constants: ConstantsProfile::default(),
            fallback: FallbackSpec::default(),
            switch_mode: SwitchMode::Fallback,
            cap_is_width: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Write every 100th round (plus the last) to trace files.
    #[serde(default)]
    pub downsample: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parses and validates a JSON config; table files resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        if let Some(dir) = base_dir {
            cfg.resolve_paths(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, path.parent())
    }

    fn resolve_paths(&mut self, dir: &Path) {
        if let LossSpec::TableFile { path } = &mut self.env.loss {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
        if let DelaySpec::TableFile { path } = &mut self.env.delay {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let env = &self.env;
        if env.num_arms == 0 {
            return Err(Error::config("K", "must be at least 1"));
        }
        if env.horizon < env.num_arms as u64 {
            return Err(Error::config(
                "T",
                format!("must be at least K = {}, got {}", env.num_arms, env.horizon),
            ));
        }
        if self.run.seeds.is_empty() {
            return Err(Error::config("seeds", "need at least one seed"));
        }
        self.algo.constants.validate()?;
        if let FallbackSpec::Exp3Delayed { eta: Some(eta) } = self.algo.fallback {
            if !(eta.is_finite() && eta >= 0.0) {
                return Err(Error::config(
                    "algo.fallback.eta",
                    format!("must be >= 0, got {eta}"),
                ));
            }
        }
        self.loss_model()?.validate(env.num_arms, env.horizon)?;
        self.delay_model()?.validate(env.horizon)?;
        Ok(())
    }

    pub fn loss_model(&self) -> Result<LossModel> {
        Ok(match &self.env.loss {
            LossSpec::Bernoulli { means } => LossModel::Bernoulli { means: means.clone() },
            LossSpec::Flip {
                means_a,
                means_b,
                flip_round,
            } => LossModel::Flip {
                means_a: means_a.clone(),
                means_b: means_b.clone(),
                flip_round: *flip_round,
            },
            LossSpec::Table { rows } => LossModel::Table { rows: rows.clone() },
            LossSpec::TableFile { path } => LossModel::Table {
                rows: load_loss_table(path)?,
            },
        })
    }

    pub fn delay_model(&self) -> Result<DelayModel> {
        Ok(match &self.env.delay {
            DelaySpec::Fixed { d } => DelayModel::Fixed { d: *d },
            DelaySpec::GeometricCapped { mean, cap } => DelayModel::GeometricCapped {
                mean: *mean,
                cap: *cap,
            },
            DelaySpec::Spike { base, spike, rounds } => DelayModel::Spike {
                base: *base,
                spike: *spike,
                rounds: rounds.clone(),
            },
            DelaySpec::Table { delays } => DelayModel::Table {
                delays: delays.clone(),
            },
            DelaySpec::TableFile { path } => DelayModel::Table {
                delays: load_delay_table(path)?,
            },
        })
    }

    /// Pretty JSON with every default filled in.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Minimal Bernoulli experiment, handy for tests and examples.
    pub fn bernoulli(means: Vec<f64>, horizon: u64, delay: u64, seeds: Vec<u64>) -> Self {
        Self {
            env: EnvConfig {
                num_arms: means.len(),
                horizon,
                loss: LossSpec::Bernoulli { means },
                delay: DelaySpec::Fixed { d: delay },
            },
            algo: AlgoConfig::default(),
            run: RunConfig {
                seeds,
                out_dir: default_out_dir(),
                downsample: false,
            },
        }
    }
}
