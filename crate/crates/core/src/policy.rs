//! The interface the simulation harness drives every algorithm through.

use rand::Rng;

use crate::error::{Error, Result};
use crate::fallback::{DelayedExp3, Fallback};
use crate::scalar::Scalar;
use crate::scheduler::RoundRecord;

/// Per-arm end-of-run summary, in `f64` whatever the policy's scalar type.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArmReport {
    pub arm: usize,
    /// Round of formal elimination.
    pub tau: Option<u64>,
    /// Round in which the elimination rule first fired for the arm.
    pub flagged_at: Option<u64>,
    pub delta_tilde: Option<f64>,
    pub mu_tilde: Option<f64>,
    pub p1: Option<f64>,
    pub n1: Option<f64>,
    pub n_at_elim: Option<u64>,
    /// Pulls of the arm processed during its ghost period.
    pub ghost_pulls: Option<u64>,
    pub phases: u64,
    pub errors: u64,
}

/// A bandit algorithm under delayed feedback, one round at a time:
/// `observe` (feedback usable in round `t`), `probabilities`, then `commit`.
pub trait Policy<F: Scalar>: Send {
    fn num_arms(&self) -> usize;

    /// Feedback that became usable at the start of round `t`, ascending by round.
    fn observe(&mut self, t: u64, arrivals: &[RoundRecord<F>]) -> Result<()>;

    fn probabilities(&mut self, t: u64) -> Result<Vec<F>>;

    /// Records the arm drawn in round `t` from `probabilities`.
    fn commit(&mut self, t: u64, arm: usize, probabilities: &[F]) -> Result<()>;

    /// Round at which control passed to an adversarial fallback, if it did.
    fn switched_at(&self) -> Option<u64> {
        None
    }

    /// First check that failed while switching was suppressed.
    fn suppressed_switch_at(&self) -> Option<u64> {
        None
    }

    /// Checks internal invariants; called by the harness after every round.
    fn check_invariants(&self) -> Result<()> {
        Ok(())
    }

    fn arm_reports(&self) -> Vec<ArmReport> {
        (0..self.num_arms())
            .map(|arm| ArmReport {
                arm,
                ..Default::default()
            })
            .collect()
    }
}

/// Draws an arm from `probabilities` by inversion of one uniform draw.
pub fn sample_arm<F: Scalar, R: Rng + ?Sized>(probabilities: &[F], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (arm, p) in probabilities.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            last_positive = arm;
        }
        cumulative += p;
        if u < cumulative {
            return arm;
        }
    }
    last_positive
}

/// Checks that a vector is a distribution: positive entries summing to 1 within `tol`.
pub fn check_distribution<F: Scalar>(probabilities: &[F], tol: f64) -> Result<()> {
    let mut sum = 0.0;
    for (arm, p) in probabilities.iter().enumerate() {
        let p = p.as_f64();
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::invariant(format!("probability of arm {arm} is {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > tol {
        return Err(Error::invariant(format!("probabilities sum to {sum}")));
    }
    Ok(())
}

/// Plays every arm with probability `1/K`.
#[derive(Debug, Clone)]
pub struct UniformPolicy {
    num_arms: usize,
}

impl UniformPolicy {
    pub fn new(num_arms: usize) -> Self {
        Self { num_arms }
    }
}

impl<F: Scalar> Policy<F> for UniformPolicy {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn observe(&mut self, _t: u64, _arrivals: &[RoundRecord<F>]) -> Result<()> {
        Ok(())
    }

    fn probabilities(&mut self, _t: u64) -> Result<Vec<F>> {
        Ok(vec![
            F::one() / F::from_count(self.num_arms as u64);
            self.num_arms
        ])
    }

    fn commit(&mut self, _t: u64, _arm: usize, _probabilities: &[F]) -> Result<()> {
        Ok(())
    }
}

/// A fallback algorithm run on its own from round 1.
pub struct FallbackOnly<F: Scalar> {
    num_arms: usize,
    inner: Box<dyn Fallback<F>>,
}

impl<F: Scalar> FallbackOnly<F> {
    pub fn new(num_arms: usize, mut inner: Box<dyn Fallback<F>>) -> Self {
        inner.activate(1);
        Self { num_arms, inner }
    }

    pub fn exp3(num_arms: usize, horizon: u64, eta: Option<F>) -> Self {
        let eta = eta.unwrap_or_else(|| DelayedExp3::<F>::default_eta(num_arms, horizon));
        Self::new(num_arms, Box::new(DelayedExp3::new(num_arms, eta)))
    }
}

impl<F: Scalar> Policy<F> for FallbackOnly<F> {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn observe(&mut self, _t: u64, arrivals: &[RoundRecord<F>]) -> Result<()> {
        arrivals.iter().try_for_each(|rec| self.inner.feed(rec))
    }

    fn probabilities(&mut self, t: u64) -> Result<Vec<F>> {
        self.inner.choose(t)
    }

    fn commit(&mut self, _t: u64, _arm: usize, _probabilities: &[F]) -> Result<()> {
        Ok(())
    }

    fn switched_at(&self) -> Option<u64> {
        Some(1)
    }
}
