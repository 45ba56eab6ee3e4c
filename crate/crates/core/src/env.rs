//! Oblivious loss and delay schedules.
//!
//! Every random draw is keyed by `(seed, stream, round)` on a seekable ChaCha
//! stream, so the whole schedule is fixed by the seed before round 1 and the
//! loss of an arm exists whether or not it is pulled.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stream id of the delay draws; loss draws use the arm index as stream id.
const DELAY_STREAM: u64 = 1 << 62;
/// Stream id of the policy's sampling RNG.
pub const POLICY_STREAM: u64 = 1 << 63;
/// 32-bit words reserved per round on a stream.
const WORDS_PER_ROUND: u128 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossModel {
    /// I.i.d. Bernoulli losses with the given per-arm means.
    Bernoulli { means: Vec<f64> },
    /// Fixed `T × K` loss matrix, row `t - 1` holds round `t`.
    Table { rows: Vec<Vec<f64>> },
    /// Bernoulli with `means_a` up to and including `flip_round`, `means_b` afterwards.
    Flip {
        means_a: Vec<f64>,
        means_b: Vec<f64>,
        flip_round: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Fixed {
        d: u64,
    },
    /// Per-round delays, entry `t - 1` for round `t`.
    Table {
        delays: Vec<u64>,
    },
    /// Geometric on `{0, 1, ...}` with the given mean, truncated at `cap`.
    GeometricCapped {
        mean: f64,
        cap: u64,
    },
    /// `spike` on the listed rounds, `base` elsewhere.
    Spike {
        base: u64,
        spike: u64,
        rounds: BTreeSet<u64>,
    },
}

fn check_means(field: &str, means: &[f64], num_arms: usize) -> Result<()> {
    if means.len() != num_arms {
        return Err(Error::config(
            field,
            format!("expected {num_arms} means, got {}", means.len()),
        ));
    }
    if let Some(m) = means.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(Error::config(field, format!("mean {m} outside [0, 1]")));
    }
    Ok(())
}

impl LossModel {
    pub fn validate(&self, num_arms: usize, horizon: u64) -> Result<()> {
        match self {
            LossModel::Bernoulli { means } => check_means("env.loss.means", means, num_arms),
            LossModel::Flip { means_a, means_b, .. } => {
                check_means("env.loss.means_a", means_a, num_arms)?;
                check_means("env.loss.means_b", means_b, num_arms)
            }
            LossModel::Table { rows } => {
                if rows.len() as u64 != horizon {
                    return Err(Error::config(
                        "env.loss.rows",
                        format!("expected {horizon} rows, got {}", rows.len()),
                    ));
                }
                for (i, row) in rows.iter().enumerate() {
                    if row.len() != num_arms {
                        return Err(Error::config(
                            "env.loss.rows",
                            format!("row {} has {} entries, expected {num_arms}", i + 1, row.len()),
                        ));
                    }
                    if row.iter().any(|l| !(0.0..=1.0).contains(l)) {
                        return Err(Error::config(
                            "env.loss.rows",
                            format!("row {} has a loss outside [0, 1]", i + 1),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Expected loss of `arm` in round `t`.
    pub fn mean_at(&self, t: u64, arm: usize) -> f64 {
        match self {
            LossModel::Bernoulli { means } => means[arm],
            LossModel::Table { rows } => rows[(t - 1) as usize][arm],
            LossModel::Flip {
                means_a,
                means_b,
                flip_round,
            } => {
                if t <= *flip_round {
                    means_a[arm]
                } else {
                    means_b[arm]
                }
            }
        }
    }

    /// Whether losses are i.i.d. across rounds, so that gaps are well defined.
    pub fn is_stationary(&self) -> bool {
        matches!(self, LossModel::Bernoulli { .. })
    }
}

impl DelayModel {
    pub fn validate(&self, horizon: u64) -> Result<()> {
        match self {
            DelayModel::Table { delays } if delays.len() as u64 != horizon => Err(Error::config(
                "env.delay.delays",
                format!("expected {horizon} delays, got {}", delays.len()),
            )),
            DelayModel::GeometricCapped { mean, .. } if !(mean.is_finite() && *mean >= 0.0) => Err(
                Error::config("env.delay.mean", format!("mean {mean} must be finite and >= 0")),
            ),
            _ => Ok(()),
        }
    }
}

/// A seeded instance of a loss model and a delay model.
#[derive(Debug, Clone)]
pub struct Environment {
    losses: LossModel,
    delays: DelayModel,
    num_arms: usize,
    horizon: u64,
    key: ChaCha8Rng,
}

impl Environment {
    pub fn new(
        losses: LossModel,
        delays: DelayModel,
        num_arms: usize,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::config("env.K", "need at least one arm"));
        }
        losses.validate(num_arms, horizon)?;
        delays.validate(horizon)?;
        Ok(Self {
            losses,
            delays,
            num_arms,
            horizon,
            key: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn losses(&self) -> &LossModel {
        &self.losses
    }

    pub fn delays(&self) -> &DelayModel {
        &self.delays
    }

    fn stream_at(&self, stream: u64, t: u64) -> ChaCha8Rng {
        let mut rng = self.key.clone();
        rng.set_stream(stream);
        rng.set_word_pos(u128::from(t) * WORDS_PER_ROUND);
        rng
    }

    fn check_round(&self, t: u64) -> Result<()> {
        if t == 0 || t > self.horizon {
            return Err(Error::Protocol(format!("round {t} outside 1..={}", self.horizon)));
        }
        Ok(())
    }

    /// Realized loss of `arm` in round `t`; independent of anything the policy does.
    pub fn loss_at(&self, t: u64, arm: usize) -> Result<f64> {
        self.check_round(t)?;
        if arm >= self.num_arms {
            return Err(Error::Protocol(format!("arm {arm} out of range")));
        }
        Ok(match &self.losses {
            LossModel::Table { rows } => rows[(t - 1) as usize][arm],
            model => {
                let u: f64 = self.stream_at(arm as u64, t).random();
                if u < model.mean_at(t, arm) {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    pub fn mean_at(&self, t: u64, arm: usize) -> f64 {
        self.losses.mean_at(t, arm)
    }

    pub fn delay_at(&self, t: u64) -> Result<u64> {
        self.check_round(t)?;
        Ok(match &self.delays {
            DelayModel::Fixed { d } => *d,
            DelayModel::Table { delays } => delays[(t - 1) as usize],
            DelayModel::Spike { base, spike, rounds } => {
                if rounds.contains(&t) {
                    *spike
                } else {
                    *base
                }
            }
            DelayModel::GeometricCapped { mean, cap } => {
                if *mean == 0.0 {
                    0
                } else {
                    let geo = Geometric::new(1.0 / (mean + 1.0))
                        .map_err(|e| Error::config("env.delay.mean", e.to_string()))?;
                    geo.sample(&mut self.stream_at(DELAY_STREAM, t)).min(*cap)
                }
            }
        })
    }

    /// The full `T × K` loss matrix.
    pub fn loss_matrix(&self) -> Result<Vec<Vec<f64>>> {
        (1..=self.horizon)
            .map(|t| (0..self.num_arms).map(|a| self.loss_at(t, a)).collect())
            .collect()
    }

    pub fn delay_vector(&self) -> Result<Vec<u64>> {
        (1..=self.horizon).map(|t| self.delay_at(t)).collect()
    }
}

/// Reads a loss table with header `t,arm0,...,arm{K-1}` and rows for `t = 1, 2, ...`.
pub fn load_loss_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let field = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("t") {
        return Err(Error::config(field, "first column must be `t`"));
    }
    for (i, h) in headers.iter().skip(1).enumerate() {
        if h != format!("arm{i}") {
            return Err(Error::config(field, format!("column {} must be `arm{i}`", i + 2)));
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parse_err = |what: &str| Error::config(&field, format!("row {}: bad {what}", i + 1));
        let t: u64 = record[0].trim().parse().map_err(|_| parse_err("t"))?;
        if t != i as u64 + 1 {
            return Err(Error::config(&field, format!("row {} has t = {t}", i + 1)));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|v| v.trim().parse::<f64>().map_err(|_| parse_err("loss")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a delay table with header `t,delay` and rows for `t = 1, 2, ...`.
pub fn load_delay_table(path: &Path) -> Result<Vec<u64>> {
    let field = path.display().to_string();
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "delay" {
        return Err(Error::config(field, "header must be `t,delay`"));
    }
    let mut delays = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let t: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::config(&field, format!("row {}: bad t", i + 1)))?;
        if t != i as u64 + 1 {
            return Err(Error::config(&field, format!("row {} has t = {t}", i + 1)));
        }
        let d: u64 = record[1]
            .trim()
            .parse()
            .map_err(|_| Error::config(&field, format!("row {}: bad delay", i + 1)))?;
        delays.push(d);
    }
    Ok(delays)
}

/// Writes delays in the `t,delay` format read by [`load_delay_table`].
pub fn write_delay_table(path: &Path, delays: &[u64]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["t", "delay"])?;
    for (i, d) in delays.iter().enumerate() {
        writer.write_record([(i + 1).to_string(), d.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::sigma_d_certificate;

    fn bern(means: Vec<f64>) -> LossModel {
        LossModel::Bernoulli { means }
    }

    #[test]
    fn degenerate_bernoulli() {
        let env = Environment::new(bern(vec![0.0, 1.0]), DelayModel::Fixed { d: 7 }, 2, 500, 3).unwrap();
        for t in 1..=500 {
            assert_eq!(env.loss_at(t, 0).unwrap(), 0.0);
            assert_eq!(env.loss_at(t, 1).unwrap(), 1.0);
            assert_eq!(env.delay_at(t).unwrap(), 7);
        }
    }

    #[test]
    fn rounds_outside_horizon_are_errors() {
        let env = Environment::new(bern(vec![0.5]), DelayModel::Fixed { d: 0 }, 1, 10, 0).unwrap();
        assert!(env.loss_at(0, 0).is_err());
        assert!(env.loss_at(11, 0).is_err());
        assert!(env.delay_at(11).is_err());
    }

    #[test]
    fn flip_means_per_half() {
        let horizon = 50_000;
        let model = LossModel::Flip {
            means_a: vec![0.1, 0.9],
            means_b: vec![0.9, 0.1],
            flip_round: horizon / 2,
        };
        let env = Environment::new(model, DelayModel::Fixed { d: 0 }, 2, horizon, 11).unwrap();
        let half = horizon / 2;
        let first: f64 = (1..=half).map(|t| env.loss_at(t, 0).unwrap()).sum::<f64>() / half as f64;
        let second: f64 = (half + 1..=horizon)
            .map(|t| env.loss_at(t, 0).unwrap())
            .sum::<f64>()
            / half as f64;
        assert!((first - 0.1).abs() < 0.02, "{first}");
        assert!((second - 0.9).abs() < 0.02, "{second}");
    }

    #[test]
    fn spike_delay_backlog() {
        let horizon = 200;
        let model = DelayModel::Spike {
            base: 0,
            spike: 10_000,
            rounds: [1].into_iter().collect(),
        };
        let env = Environment::new(bern(vec![0.5]), model, 1, horizon, 0).unwrap();
        let delays = env.delay_vector().unwrap();
        assert_eq!(delays[0], 10_000);
        assert!(delays[1..].iter().all(|&d| d == 0));
        // Only round 1 is ever missing.
        assert_eq!(sigma_d_certificate(&delays), (1, 10_000));
    }

    #[test]
    fn geometric_capped_mean() {
        let horizon = 100_000;
        let model = DelayModel::GeometricCapped {
            mean: 50.0,
            cap: 1000,
        };
        let env = Environment::new(bern(vec![0.5]), model, 1, horizon, 5).unwrap();
        let delays = env.delay_vector().unwrap();
        assert!(delays.iter().all(|&d| d <= 1000));
        let mean = delays.iter().sum::<u64>() as f64 / horizon as f64;
        assert!((mean - 50.0).abs() < 5.0, "{mean}");
    }

    #[test]
    fn validation_messages_name_fields() {
        let err = Environment::new(bern(vec![0.5]), DelayModel::Fixed { d: 0 }, 2, 10, 0).unwrap_err();
        assert!(err.to_string().contains("env.loss.means"));
        let err = Environment::new(
            bern(vec![0.5]),
            DelayModel::Table { delays: vec![1, 2] },
            1,
            10,
            0,
        )
        .unwrap_err();
        assert!(err.to_string().contains("env.delay.delays"));
    }

    #[test]
    fn loss_table_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("losses.csv");
        std::fs::write(&path, "t,arm0,arm1\n1,0.5,1\n2,0,0.25\n").unwrap();
        let rows = load_loss_table(&path).unwrap();
        assert_eq!(rows, vec![vec![0.5, 1.0], vec![0.0, 0.25]]);

        std::fs::write(&path, "t,a,b\n1,0.5,1\n").unwrap();
        assert!(load_loss_table(&path).is_err());
    }

    #[test]
    fn delay_table_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("delays.csv");
        write_delay_table(&path, &[3, 0, 1, 5]).unwrap();
        assert_eq!(load_delay_table(&path).unwrap(), vec![3, 0, 1, 5]);
        std::fs::write(&path, "t,delay\n1,x\n").unwrap();
        assert!(load_delay_table(&path).is_err());
        std::fs::write(&path, "t,delay\n2,1\n").unwrap();
        assert!(load_delay_table(&path).is_err());
    }
}
