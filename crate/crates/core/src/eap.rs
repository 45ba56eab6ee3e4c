//! Phase system for eliminated arms.
//!
//! An eliminated arm keeps a positive sampling probability `p1 · 2^-j`. Rounds
//! observed after its elimination are banked by the exponent `j` that was in
//! force when they were played, and consumed only by a phase running at that
//! same exponent. A phase ends in success after `⌊N⌋` rounds (probability
//! halves, cap doubles) or in error when the importance-weighted loss undershoots
//! the frozen mean (probability doubles, cap halves, both clamped at the first
//! phase). Either way `p · N` stays equal to `p1 · N1`.

use std::collections::BTreeMap;

use crate::desapo::ConstantsProfile;
use crate::scalar::Scalar;
use crate::stats::ProcessedLog;

/// Quantities frozen when an arm leaves the active set (or is flagged as a ghost).
#[derive(Debug, Clone, PartialEq)]
pub struct EliminationSnapshot<F> {
    /// Round of formal elimination; `None` while the arm is a ghost.
    pub tau: Option<u64>,
    /// Round in which the elimination rule fired for the arm.
    pub flagged_at: u64,
    pub s_tilde_len: u64,
    pub n_at_elim: u64,
    pub mu_tilde: F,
    pub delta_tilde: F,
    pub p1: F,
    pub n1: F,
}

impl<F: Scalar> EliminationSnapshot<F> {
    /// `Δ̃ = 8 width`, `p1 = 1/(2K) + n/(2T)`, `N1 = 1280 / (p1 Δ̃²)` from the current log.
    pub fn freeze(log: &ProcessedLog<F>, arm: usize, round: u64, constants: &ConstantsProfile<F>) -> Self {
        let k = F::from_count(log.num_arms() as u64);
        let horizon = F::from_count(log.horizon());
        let n = log.pulls(arm);
        let two = F::lit(2.0);
        let delta_tilde = constants.delta_mult * log.width(arm);
        let p1 = F::one() / (two * k) + F::from_count(n) / (two * horizon);
        let n1 = constants.n1_numerator / (p1 * delta_tilde * delta_tilde);
        Self {
            tau: None,
            flagged_at: round,
            s_tilde_len: log.len() as u64,
            n_at_elim: n,
            mu_tilde: log.mean(arm),
            delta_tilde,
            p1,
            n1,
        }
    }
}

/// One banked round: whether the arm itself was pulled, and the observed loss.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BankEntry<F> {
    pulled: bool,
    loss: F,
}

#[derive(Debug, Clone, Default)]
pub struct Bank<F> {
    waiting: BTreeMap<u64, BankEntry<F>>,
    /// Number of rounds consumed from this bank so far.
    pub processed: u64,
}

impl<F> Bank<F> {
    pub fn waiting(&self) -> usize {
        self.waiting.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EapOutcome<F> {
    Probability(F),
    Switch,
}

#[derive(Debug, Clone)]
pub struct PhaseState<F> {
    /// Phase index, starting at 1.
    pub r: u64,
    pub n_cap: F,
    pub p_exponent: u32,
    pub phase_len: u64,
    pub phase_is_sum: F,
    pub error_count: u64,
    banks: BTreeMap<u32, Bank<F>>,
}

impl<F: Scalar> PhaseState<F> {
    pub fn new(snapshot: &EliminationSnapshot<F>) -> Self {
        Self {
            r: 1,
            n_cap: snapshot.n1,
            p_exponent: 0,
            phase_len: 0,
            phase_is_sum: F::zero(),
            error_count: 0,
            banks: BTreeMap::new(),
        }
    }

    /// Current sampling probability `p1 · 2^-j`.
    pub fn probability(&self, snapshot: &EliminationSnapshot<F>) -> F {
        dyadic(snapshot.p1, self.p_exponent)
    }

    pub fn bank(&self, exponent: u32) -> Option<&Bank<F>> {
        self.banks.get(&exponent)
    }

    pub fn banked(&self) -> usize {
        self.banks.values().map(Bank::waiting).sum()
    }

    /// Stores an observed post-elimination round played while this arm's exponent was `exponent`.
    pub fn deposit(&mut self, exponent: u32, round: u64, pulled: bool, loss: F) {
        self.banks
            .entry(exponent)
            .or_default()
            .waiting
            .insert(round, BankEntry { pulled, loss });
    }

    fn start_phase(&mut self) {
        self.r += 1;
        self.phase_len = 0;
        self.phase_is_sum = F::zero();
    }

    /// Consumes banked rounds at the current exponent, moving through phases,
    /// until the bank of the current exponent is empty.
    pub fn step(&mut self, snapshot: &EliminationSnapshot<F>, error_budget: u64) -> EapOutcome<F> {
        let quarter = F::lit(0.25);
        loop {
            let exponent = self.p_exponent;
            let Some(bank) = self.banks.get_mut(&exponent) else {
                break;
            };
            let Some((_, entry)) = bank.waiting.pop_first() else {
                break;
            };
            bank.processed += 1;

            self.phase_len += 1;
            if entry.pulled {
                self.phase_is_sum = self.phase_is_sum + entry.loss / dyadic(snapshot.p1, exponent);
            }

            let shortfall = F::from_count(self.phase_len) * snapshot.mu_tilde - self.phase_is_sum;
            if shortfall >= quarter * snapshot.delta_tilde * self.n_cap {
                // phase error
                self.error_count += 1;
                if self.p_exponent > 0 {
                    self.p_exponent -= 1;
                    self.n_cap = self.n_cap / F::lit(2.0);
                }
                self.start_phase();
                if self.error_count >= error_budget {
                    return EapOutcome::Switch;
                }
                continue;
            }
            if F::from_count(self.phase_len) == self.n_cap.floor() {
                // phase ended
                self.p_exponent += 1;
                self.n_cap = self.n_cap * F::lit(2.0);
                self.start_phase();
            }
        }
        EapOutcome::Probability(self.probability(snapshot))
    }
}

/// `base · 2^-exponent`, exact for binary floating point.
#[inline]
pub fn dyadic<F: Scalar>(base: F, exponent: u32) -> F {
    base * F::lit(2.0).powi(-(exponent as i32))
}
