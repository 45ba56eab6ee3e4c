//! Adversarial-regime algorithms the best-of-both-worlds policy hands over to.
//!
//! A fallback is activated once, at the switch round, and from then on chooses
//! every action. It only ever receives feedback for rounds it chose itself.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scheduler::RoundRecord;

/// Contract for an adversarial bandit algorithm under delayed feedback.
///
/// Third-party implementations only need these three calls: `activate` once,
/// then per round `choose`, and `feed` for every feedback arrival.
pub trait Fallback<F: Scalar>: Send {
    /// Starts the algorithm at round `t`; rounds before `t` are never fed.
    fn activate(&mut self, t: u64);

    /// Distribution over arms for round `t`. Every entry must be positive.
    fn choose(&mut self, t: u64) -> Result<Vec<F>>;

    /// Feedback for a round this algorithm chose, delivered on arrival.
    fn feed(&mut self, rec: &RoundRecord<F>) -> Result<()>;

    fn name(&self) -> &'static str;
}

/// Exponential weights over importance-weighted cumulative loss estimates,
/// updated when feedback arrives using the probability recorded at pull time.
#[derive(Debug, Clone)]
pub struct DelayedExp3<F> {
    pub cumulative_estimates: Vec<F>,
    pub eta: F,
    pub activated_at: Option<u64>,
}

impl<F: Scalar> DelayedExp3<F> {
    pub fn new(num_arms: usize, eta: F) -> Self {
        Self {
            cumulative_estimates: vec![F::zero(); num_arms],
            eta,
            activated_at: None,
        }
    }

    /// `η = sqrt(log K / (K T))`.
    pub fn default_eta(num_arms: usize, horizon: u64) -> F {
        let k = F::from_count(num_arms as u64);
        (crate::stats::log_base(k) / (k * F::from_count(horizon))).sqrt()
    }

    pub fn with_default_eta(num_arms: usize, horizon: u64) -> Self {
        Self::new(num_arms, Self::default_eta(num_arms, horizon))
    }

    /// Softmax of `-η L̂`, shifted by the minimum estimate for stability.
    pub fn probabilities(&self) -> Vec<F> {
        let floor = self
            .cumulative_estimates
            .iter()
            .copied()
            .fold(F::infinity(), F::min);
        let weights: Vec<F> = self
            .cumulative_estimates
            .iter()
            .map(|&l| (-(self.eta * (l - floor))).exp().max(F::min_positive_value()))
            .collect();
        let total = weights.iter().copied().fold(F::zero(), |a, b| a + b);
        weights.into_iter().map(|w| w / total).collect()
    }
}

impl<F: Scalar> Fallback<F> for DelayedExp3<F> {
    fn activate(&mut self, t: u64) {
        self.activated_at = Some(t);
    }

    fn choose(&mut self, t: u64) -> Result<Vec<F>> {
        match self.activated_at {
            Some(start) if t >= start => Ok(self.probabilities()),
            _ => Err(Error::Protocol(format!(
                "fallback asked to choose in round {t} before activation"
            ))),
        }
    }

    fn feed(&mut self, rec: &RoundRecord<F>) -> Result<()> {
        match self.activated_at {
            Some(start) if rec.round >= start => {}
            _ => {
                return Err(Error::Protocol(format!(
                    "fallback fed round {} it did not choose",
                    rec.round
                )))
            }
        }
        if rec.probability.is_nan() || rec.probability <= F::zero() {
            return Err(Error::invariant("fallback fed a zero-probability round"));
        }
        let est = &mut self.cumulative_estimates[rec.arm];
        *est = *est + rec.loss / rec.probability;
        Ok(())
    }

    fn name(&self) -> &'static str {
        "exp3-delayed"
    }
}
