//! Confidence statistics over the processed feedback sequence.
//!
//! Every statistic here is a function of the ordered sequence of processed
//! rounds. Running bounds are the running minimum (upper bounds) or maximum
//! (lower bounds) of the per-prefix candidate values, so they are maintained
//! in O(K) per appended round instead of being recomputed over prefixes.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scheduler::RoundRecord;

/// Base of every logarithm in the confidence radii and the algorithm's budgets.
pub const LOG_BASE: f64 = 2.0;

/// `log(x)` in [`LOG_BASE`].
#[inline]
pub fn log_base<F: Scalar>(x: F) -> F {
    if LOG_BASE == 2.0 {
        x.log2()
    } else {
        x.ln() / F::lit(LOG_BASE).ln()
    }
}

fn check_horizon(horizon: u64) -> Result<()> {
    if horizon < 2 {
        return Err(Error::config(
            "T",
            format!("horizon must be at least 2, got {horizon}"),
        ));
    }
    Ok(())
}

/// Per-arm confidence width `min(1, sqrt(2 log T / n))`, with `n = 0` mapped to the cap.
pub fn width<F: Scalar>(n: u64, horizon: u64) -> Result<F> {
    check_horizon(horizon)?;
    Ok(width_from_log(n, log_base(F::from_count(horizon))))
}

/// Importance-sampling width `min(1, sqrt(2 K log T / |S|))`, with `|S| = 0` mapped to the cap.
pub fn owidth<F: Scalar>(s_len: u64, num_arms: usize, horizon: u64) -> Result<F> {
    check_horizon(horizon)?;
    if num_arms == 0 {
        return Err(Error::config("K", "need at least one arm"));
    }
    Ok(owidth_from_log(s_len, num_arms, log_base(F::from_count(horizon))))
}

#[inline]
pub(crate) fn width_from_log<F: Scalar>(n: u64, log_t: F) -> F {
    if n == 0 {
        return F::one();
    }
    (F::lit(2.0) * log_t / F::from_count(n)).sqrt().min(F::one())
}

#[inline]
pub(crate) fn owidth_from_log<F: Scalar>(s_len: u64, num_arms: usize, log_t: F) -> F {
    is_radius_from_log(s_len, num_arms, log_t).min(F::one())
}

/// Uncapped importance-sampling radius `sqrt(2 K log T / |S|)`; infinite for `|S| = 0`.
#[inline]
pub(crate) fn is_radius_from_log<F: Scalar>(s_len: u64, num_arms: usize, log_t: F) -> F {
    if s_len == 0 {
        return F::infinity();
    }
    (F::lit(2.0) * F::from_count(num_arms as u64) * log_t / F::from_count(s_len)).sqrt()
}

/// How the importance-sampling bounds scale their radius.
///
/// Importance-weighted means range over `[0, 1/p]`, so capping their radius at 1
/// lets a single early large estimate pin `olcb` far above the true mean for the
/// rest of the run. `Uncapped` uses the raw radius for the bounds and the check
/// that compares against them; `Capped` reproduces the literal `min(1, .)` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IsWidth {
    #[default]
    Uncapped,
    Capped,
}

/// Empirical-mean statistics of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmMeanStats<F> {
    pub pulls_observed: u64,
    pub loss_sum: F,
    pub running_ucb: F,
    pub running_lcb: F,
}

impl<F: Scalar> Default for ArmMeanStats<F> {
    fn default() -> Self {
        // Prefixes with no samples of the arm contribute the trivial interval [0, 1].
        Self {
            pulls_observed: 0,
            loss_sum: F::zero(),
            running_ucb: F::one(),
            running_lcb: F::zero(),
        }
    }
}

impl<F: Scalar> ArmMeanStats<F> {
    /// Empirical mean, zero before the first sample.
    pub fn mean(&self) -> F {
        if self.pulls_observed == 0 {
            F::zero()
        } else {
            self.loss_sum / F::from_count(self.pulls_observed)
        }
    }

    fn push(&mut self, loss: F, log_t: F) {
        self.pulls_observed += 1;
        self.loss_sum = self.loss_sum + loss;
        let mean = self.mean();
        let w = width_from_log(self.pulls_observed, log_t);
        self.running_ucb = self.running_ucb.min(mean + w);
        self.running_lcb = self.running_lcb.max(mean - w);
    }
}

/// Importance-sampling statistics of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmIsStats<F> {
    pub is_sum: F,
    pub running_oucb: F,
    pub running_olcb: F,
}

impl<F: Scalar> Default for ArmIsStats<F> {
    fn default() -> Self {
        Self {
            is_sum: F::zero(),
            running_oucb: F::infinity(),
            running_olcb: F::neg_infinity(),
        }
    }
}

/// The processed sequence `S` with its per-arm running statistics.
#[derive(Debug, Clone)]
pub struct ProcessedLog<F> {
    rounds: Vec<u64>,
    seen: Vec<u64>,
    per_arm_mean: Vec<ArmMeanStats<F>>,
    per_arm_is: Vec<ArmIsStats<F>>,
    horizon: u64,
    num_arms: usize,
    log_t: F,
    is_width: IsWidth,
    total_loss: F,
}

impl<F: Scalar> ProcessedLog<F> {
    pub fn new(num_arms: usize, horizon: u64) -> Result<Self> {
        Self::with_is_width(num_arms, horizon, IsWidth::default())
    }

    pub fn with_is_width(num_arms: usize, horizon: u64, is_width: IsWidth) -> Result<Self> {
        check_horizon(horizon)?;
        if num_arms == 0 {
            return Err(Error::config("K", "need at least one arm"));
        }
        Ok(Self {
            rounds: Vec::new(),
            seen: Vec::new(),
            per_arm_mean: vec![ArmMeanStats::default(); num_arms],
            per_arm_is: vec![ArmIsStats::default(); num_arms],
            horizon,
            num_arms,
            log_t: log_base(F::from_count(horizon)),
            is_width,
            total_loss: F::zero(),
        })
    }

    fn mark_seen(&mut self, round: u64) -> bool {
        let (word, bit) = ((round / 64) as usize, round % 64);
        if word >= self.seen.len() {
            self.seen.resize(word + 1, 0);
        }
        let fresh = self.seen[word] & (1 << bit) == 0;
        self.seen[word] |= 1 << bit;
        fresh
    }

    /// Appends one processed round and refreshes all running bounds.
    pub fn append(&mut self, rec: &RoundRecord<F>) -> Result<()> {
        if rec.arm >= self.num_arms {
            return Err(Error::invariant(format!("arm {} out of range", rec.arm)));
        }
        if !(rec.loss >= F::zero() && rec.loss <= F::one()) {
            return Err(Error::invariant(format!("loss {} outside [0, 1]", rec.loss)));
        }
        if !(rec.probability > F::zero() && rec.probability <= F::one()) {
            return Err(Error::invariant(format!(
                "probability {} outside (0, 1]",
                rec.probability
            )));
        }
        if !self.mark_seen(rec.round) {
            return Err(Error::invariant(format!("round {} processed twice", rec.round)));
        }

        self.rounds.push(rec.round);
        self.total_loss = self.total_loss + rec.loss;
        self.per_arm_mean[rec.arm].push(rec.loss, self.log_t);
        let is = &mut self.per_arm_is[rec.arm];
        is.is_sum = is.is_sum + rec.loss / rec.probability;

        let len = F::from_count(self.rounds.len() as u64);
        let radius = self.is_radius();
        for is in &mut self.per_arm_is {
            let mean = is.is_sum / len;
            is.running_oucb = is.running_oucb.min(mean + radius);
            is.running_olcb = is.running_olcb.max(mean - radius);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// `log T` in the configured base.
    pub fn log_t(&self) -> F {
        self.log_t
    }

    pub fn is_width_mode(&self) -> IsWidth {
        self.is_width
    }

    /// Round indices in processing order.
    pub fn rounds(&self) -> &[u64] {
        &self.rounds
    }

    pub fn mean_stats(&self, arm: usize) -> &ArmMeanStats<F> {
        &self.per_arm_mean[arm]
    }

    pub fn is_stats(&self, arm: usize) -> &ArmIsStats<F> {
        &self.per_arm_is[arm]
    }

    pub fn pulls(&self, arm: usize) -> u64 {
        self.per_arm_mean[arm].pulls_observed
    }

    pub fn mean(&self, arm: usize) -> F {
        self.per_arm_mean[arm].mean()
    }

    pub fn width(&self, arm: usize) -> F {
        width_from_log(self.pulls(arm), self.log_t)
    }

    pub fn ucb(&self, arm: usize) -> F {
        self.per_arm_mean[arm].running_ucb
    }

    pub fn lcb(&self, arm: usize) -> F {
        self.per_arm_mean[arm].running_lcb
    }

    /// Importance-sampling mean `L̄_i(S) / |S|`, zero on the empty log.
    pub fn is_mean(&self, arm: usize) -> F {
        if self.rounds.is_empty() {
            F::zero()
        } else {
            self.per_arm_is[arm].is_sum / F::from_count(self.rounds.len() as u64)
        }
    }

    pub fn oucb(&self, arm: usize) -> F {
        self.per_arm_is[arm].running_oucb
    }

    pub fn olcb(&self, arm: usize) -> F {
        self.per_arm_is[arm].running_olcb
    }

    /// Capped importance-sampling width of the current sequence.
    pub fn owidth(&self) -> F {
        owidth_from_log(self.rounds.len() as u64, self.num_arms, self.log_t)
    }

    /// Radius the importance-sampling bounds are built from (capped or not).
    pub fn is_radius(&self) -> F {
        let len = self.rounds.len() as u64;
        match self.is_width {
            IsWidth::Capped => owidth_from_log(len, self.num_arms, self.log_t),
            IsWidth::Uncapped => is_radius_from_log(len, self.num_arms, self.log_t),
        }
    }

    /// `min_i min(ucb_i, oucb_i)`; 1 on the empty log.
    pub fn ucb_star(&self) -> F {
        self.per_arm_mean
            .iter()
            .zip(&self.per_arm_is)
            .fold(F::one(), |acc, (m, is)| {
                acc.min(m.running_ucb).min(is.running_oucb)
            })
    }

    /// Sum of realized losses of the pulled arms over `S`.
    pub fn total_loss(&self) -> F {
        self.total_loss
    }
}
