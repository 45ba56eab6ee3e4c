//! Delayed-feedback event queue.
//!
//! Round `s` pulled with delay `d_s` is observed at the end of round `s + d_s`
//! and becomes usable at the start of round `s + d_s + 1`. The ledger tracks the
//! outstanding count `σ(t)`, its running maximum, and the total delay `D`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One pulled round and its (eventually observed) feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord<F> {
    pub round: u64,
    pub arm: usize,
    pub loss: F,
    /// Probability with which `arm` was drawn in this round.
    pub probability: F,
    pub delay: u64,
    /// Round at whose end the feedback is observed, `round + delay`.
    pub arrival: u64,
}

impl<F: Scalar> RoundRecord<F> {
    pub fn new(round: u64, arm: usize, loss: F, probability: F, delay: u64) -> Self {
        Self {
            round,
            arm,
            loss,
            probability,
            delay,
            arrival: round + delay,
        }
    }
}

/// Incremental delay bookkeeping for a single run.
#[derive(Debug, Clone)]
pub struct DelayLedger<F> {
    pending: BTreeMap<u64, Vec<RoundRecord<F>>>,
    current: u64,
    sigma_now: u64,
    sigma_max: u64,
    total_delay: u64,
    submitted: u64,
    delivered: u64,
}

impl<F: Scalar> Default for DelayLedger<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> DelayLedger<F> {
    pub fn new() -> Self {
        Self {
            pending: BTreeMap::new(),
            current: 0,
            sigma_now: 0,
            sigma_max: 0,
            total_delay: 0,
            submitted: 0,
            delivered: 0,
        }
    }

    /// Opens round `t` and returns the feedback that is usable in it, i.e. every
    /// record with `round + delay < t` not yet delivered, ascending by round.
    pub fn arrivals_at(&mut self, t: u64) -> Result<Vec<RoundRecord<F>>> {
        if t != self.current + 1 {
            return Err(Error::Protocol(format!(
                "ledger advanced from round {} to {t}",
                self.current
            )));
        }
        self.current = t;
        let out = self.pending.remove(&(t - 1)).unwrap_or_default();
        self.delivered += out.len() as u64;
        // Records observed at the end of round t are no longer missing after it.
        if let Some(due) = self.pending.get(&t) {
            self.sigma_now -= due.len() as u64;
        }
        Ok(out)
    }

    /// Queues the record pulled in the current round.
    pub fn submit(&mut self, rec: RoundRecord<F>) -> Result<()> {
        if rec.round < self.current {
            return Err(Error::Protocol(format!(
                "record for past round {} submitted in round {}",
                rec.round, self.current
            )));
        }
        if rec.round > self.current {
            return Err(Error::Protocol(format!(
                "record for round {} submitted before the round was opened",
                rec.round
            )));
        }
        if rec.arrival != rec.round + rec.delay {
            return Err(Error::invariant(format!(
                "record for round {} has arrival {} but delay {}",
                rec.round, rec.arrival, rec.delay
            )));
        }
        if rec.arrival > self.current {
            self.sigma_now += 1;
            self.sigma_max = self.sigma_max.max(self.sigma_now);
        }
        self.total_delay += rec.delay;
        self.submitted += 1;
        self.pending.entry(rec.arrival).or_default().push(rec);
        Ok(())
    }

    /// Number of pulls up to the current round whose feedback is still missing.
    pub fn sigma_now(&self) -> u64 {
        self.sigma_now
    }

    pub fn sigma_max(&self) -> u64 {
        self.sigma_max
    }

    pub fn total_delay(&self) -> u64 {
        self.total_delay
    }

    pub fn submitted(&self) -> u64 {
        self.submitted
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn current_round(&self) -> u64 {
        self.current
    }

    pub fn pending_len(&self) -> usize {
        self.pending.values().map(Vec::len).sum()
    }
}

/// Runs a delay vector (round `t` has delay `delays[t - 1]`) through a ledger and
/// returns `(σ(1..=T), σ_max, D)`.
pub fn replay_delays(delays: &[u64]) -> (Vec<u64>, u64, u64) {
    let mut ledger = DelayLedger::<f64>::new();
    let mut series = Vec::with_capacity(delays.len());
    for (i, &d) in delays.iter().enumerate() {
        let t = i as u64 + 1;
        ledger.arrivals_at(t).expect("sequential rounds");
        ledger
            .submit(RoundRecord::new(t, 0, 0.0, 1.0, d))
            .expect("current round");
        series.push(ledger.sigma_now());
    }
    (series, ledger.sigma_max(), ledger.total_delay())
}

/// `σ(t) = |{τ ≤ t : τ + d_τ > t}|` for every `t` in `1..=T`, by direct scan.
pub fn naive_sigma_series(delays: &[u64]) -> Vec<u64> {
    // Round tau = i + 1 is still outstanding at the end of t iff tau + d > t.
    // Deadlines are kept as i32 so the inner count vectorizes.
    assert!(
        delays.len() < i32::MAX as usize,
        "horizon too long for the direct scan"
    );
    let deadlines: Vec<i32> = delays
        .iter()
        .enumerate()
        .map(|(i, &d)| (i as u64 + 1).saturating_add(d).min(i32::MAX as u64) as i32)
        .collect();
    (1..=delays.len())
        .map(|t| {
            let t = t as i32;
            // A checked add would block vectorization; the count stays below t.
            deadlines[..t as usize]
                .iter()
                .fold(0i32, |acc, &end| acc.wrapping_add(i32::from(end > t))) as u64
        })
        .collect()
}

/// `(σ_max, D)` by direct O(T²) scan; the reference the incremental ledger is checked against.
pub fn sigma_d_certificate(delays: &[u64]) -> (u64, u64) {
    let sigma_max = naive_sigma_series(delays).into_iter().max().unwrap_or(0);
    (sigma_max, delays.iter().sum())
}

/// `D ≥ σ_max (σ_max + 1) / 2`: the `j`-th most recent missing round at any time
/// must have delay at least `j`.
pub fn backlog_inequality_holds(sigma_max: u64, total_delay: u64) -> bool {
    let s = u128::from(sigma_max);
    u128::from(total_delay) * 2 >= s * (s + 1)
}
