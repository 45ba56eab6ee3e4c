//! Best-of-both-worlds successive elimination under delayed feedback.
//!
//! Active arms are played with equal probability. An arm whose empirical mean
//! exceeds `ucb*` by `9` widths is eliminated but keeps a small dyadic sampling
//! probability managed by the phase system in [`crate::eap`]. After every
//! processed round two checks test whether the losses still look stochastic;
//! if either fails, or an eliminated arm accumulates too many phase errors,
//! control passes irrevocably to the adversarial [`Fallback`].

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::eap::{EapOutcome, EliminationSnapshot, PhaseState};
use crate::error::{Error, Result};
use crate::fallback::Fallback;
use crate::ghost::GhostState;
use crate::policy::{ArmReport, Policy};
use crate::scalar::Scalar;
use crate::scheduler::RoundRecord;
use crate::stats::{log_base, IsWidth, ProcessedLog};

/// Numeric constants of the elimination rule, the phase system and the checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    default,
    deny_unknown_fields,
    bound(deserialize = "F: Scalar + Deserialize<'de>")
)]
pub struct ConstantsProfile<F> {
    /// Widths an arm's mean must exceed `ucb*` by to be eliminated.
    pub elim_width_mult: F,
    /// `Δ̃ = delta_mult · width` at elimination.
    pub delta_mult: F,
    /// `N1 = n1_numerator / (p1 Δ̃²)`.
    pub n1_numerator: F,
    pub bsc2_sqrt_coeff: F,
    pub bsc2_sigma_coeff: F,
    /// Phase-error budget is `⌈max_errors_mult · log T⌉`.
    pub max_errors_mult: F,
    /// Single coefficient of the regret-budget check in the ghost variant.
    pub ghost_bsc_coeff: F,
}

impl<F: Scalar> Default for ConstantsProfile<F> {
    fn default() -> Self {
        Self {
            elim_width_mult: F::lit(9.0),
            delta_mult: F::lit(8.0),
            n1_numerator: F::lit(1280.0),
            bsc2_sqrt_coeff: F::lit(272.0),
            bsc2_sigma_coeff: F::lit(30.0),
            max_errors_mult: F::lit(3.0),
            ghost_bsc_coeff: F::lit(302.0),
        }
    }
}

impl<F: Scalar> ConstantsProfile<F> {
    /// Default profile with a regret-budget coefficient of 3, which makes the
    /// regime check react within desk-scale horizons.
    pub fn aggressive() -> Self {
        Self {
            bsc2_sqrt_coeff: F::lit(3.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("elim_width_mult", self.elim_width_mult),
            ("delta_mult", self.delta_mult),
            ("n1_numerator", self.n1_numerator),
            ("bsc2_sqrt_coeff", self.bsc2_sqrt_coeff),
            ("bsc2_sigma_coeff", self.bsc2_sigma_coeff),
            ("max_errors_mult", self.max_errors_mult),
            ("ghost_bsc_coeff", self.ghost_bsc_coeff),
        ];
        for (name, value) in fields {
            if !(value > F::zero() && value.is_finite()) {
                return Err(Error::config(
                    format!("algo.constants.{name}"),
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Arms are eliminated as soon as the elimination rule fires.
    #[default]
    Base,
    /// Flagged arms stay active until the next dyadic elimination point.
    Ghost,
}

/// What a failed stochastic check does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchMode {
    /// Hand control to the fallback.
    #[default]
    Fallback,
    /// Record the would-be switch, stop eliminating, keep playing.
    Suppress,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesapoOptions {
    pub variant: Variant,
    pub switch_mode: SwitchMode,
    pub is_width: IsWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SwitchReason {
    /// An active arm's importance-sampling mean left its inflated interval.
    ImportanceInterval { arm: usize },
    /// The regret lower bound exceeded the stochastic budget.
    RegretBudget,
    /// An eliminated arm used up its phase-error budget.
    PhaseErrors { arm: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwitchEvent {
    pub round: u64,
    pub reason: SwitchReason,
}

#[derive(Debug, Clone)]
pub enum ArmLifecycle<F> {
    Active,
    /// Flagged by the elimination rule, still played as active (ghost variant).
    Ghost(EliminationSnapshot<F>),
    Eliminated {
        snapshot: EliminationSnapshot<F>,
        phase: PhaseState<F>,
        ghost_pulls: Option<u64>,
    },
}

impl<F> ArmLifecycle<F> {
    /// Played with the shared active probability.
    pub fn is_active(&self) -> bool {
        !matches!(self, ArmLifecycle::Eliminated { .. })
    }

    pub fn is_eliminated(&self) -> bool {
        matches!(self, ArmLifecycle::Eliminated { .. })
    }
}

/// `μ̄ ∈ [olcb − radius, oucb + radius]`.
pub fn is_interval_holds<F: Scalar>(is_mean: F, olcb: F, oucb: F, radius: F) -> bool {
    olcb - radius <= is_mean && is_mean <= oucb + radius
}

/// The best-of-both-worlds policy state.
pub struct Desapo<F: Scalar> {
    pub(crate) num_arms: usize,
    pub(crate) horizon: u64,
    pub(crate) constants: ConstantsProfile<F>,
    pub(crate) options: DesapoOptions,
    pub(crate) log: ProcessedLog<F>,
    pub(crate) lifecycles: Vec<ArmLifecycle<F>>,
    pub(crate) ghost: GhostState,
    /// Exponents of the eliminated arms in force when each outstanding round was played.
    exponents_by_round: HashMap<u64, Vec<(usize, u32)>>,
    received: u64,
    sigma_max: u64,
    switched: Option<SwitchEvent>,
    suppressed: Option<SwitchEvent>,
    eliminations_frozen: bool,
    fallback: Box<dyn Fallback<F>>,
    pub(crate) elimination_order: Vec<(u64, usize)>,
    pub(crate) guard_hits: u64,
}

impl<F: Scalar> Desapo<F> {
    pub fn new(
        num_arms: usize,
        horizon: u64,
        constants: ConstantsProfile<F>,
        options: DesapoOptions,
        fallback: Box<dyn Fallback<F>>,
    ) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::config("env.K", "need at least one arm"));
        }
        if horizon < num_arms as u64 {
            return Err(Error::config(
                "env.T",
                "horizon must be at least the number of arms",
            ));
        }
        constants.validate()?;
        Ok(Self {
            num_arms,
            horizon,
            constants,
            options,
            log: ProcessedLog::with_is_width(num_arms, horizon.max(2), options.is_width)?,
            lifecycles: vec![ArmLifecycle::Active; num_arms],
            ghost: GhostState::default(),
            exponents_by_round: HashMap::new(),
            received: 0,
            sigma_max: 0,
            switched: None,
            suppressed: None,
            eliminations_frozen: false,
            fallback,
            elimination_order: Vec::new(),
            guard_hits: 0,
        })
    }

    pub fn log(&self) -> &ProcessedLog<F> {
        &self.log
    }

    pub fn constants(&self) -> &ConstantsProfile<F> {
        &self.constants
    }

    pub fn options(&self) -> &DesapoOptions {
        &self.options
    }

    pub fn lifecycle(&self, arm: usize) -> &ArmLifecycle<F> {
        &self.lifecycles[arm]
    }

    pub fn active_arms(&self) -> Vec<usize> {
        (0..self.num_arms)
            .filter(|&a| self.lifecycles[a].is_active())
            .collect()
    }

    pub fn switch_event(&self) -> Option<SwitchEvent> {
        self.switched
    }

    /// First failed check in [`SwitchMode::Suppress`].
    pub fn suppressed_switch(&self) -> Option<SwitchEvent> {
        self.suppressed
    }

    /// Running maximum of the missing-feedback count, as seen by the policy.
    pub fn sigma_max(&self) -> u64 {
        self.sigma_max
    }

    /// Number of times the last active arm was kept back from elimination.
    pub fn guard_hits(&self) -> u64 {
        self.guard_hits
    }

    /// Arms in order of formal elimination, with the round.
    pub fn elimination_order(&self) -> &[(u64, usize)] {
        &self.elimination_order
    }

    pub fn ghost_state(&self) -> &GhostState {
        &self.ghost
    }

    /// `⌈max_errors_mult · log T⌉`.
    pub fn error_budget(&self) -> u64 {
        (self.constants.max_errors_mult * self.log.log_t())
            .ceil()
            .to_u64()
            .unwrap_or(u64::MAX)
            .max(1)
    }

    /// Regret budget of the second stochastic check given the running `σ_max`.
    pub fn regret_budget(&self, sigma_max: u64) -> F {
        let k = F::from_count(self.num_arms as u64);
        let root = (k * F::from_count(self.horizon) * self.log.log_t()).sqrt();
        let sigma = F::from_count(sigma_max);
        match self.options.variant {
            Variant::Base => {
                let log_k = log_base(k.max(F::lit(2.0)));
                self.constants.bsc2_sqrt_coeff * root + self.constants.bsc2_sigma_coeff * sigma * log_k
            }
            Variant::Ghost => self.constants.ghost_bsc_coeff * (root + sigma),
        }
    }

    /// `Σ_{s∈S} (ℓ_{a_s}(s) − ucb*(S))`.
    pub fn regret_lower_bound(&self) -> F {
        self.log.total_loss() - F::from_count(self.log.len() as u64) * self.log.ucb_star()
    }

    /// Both stochastic checks on the current processed sequence.
    pub fn bsc_check(&self) -> Option<SwitchReason> {
        let radius = self.log.is_radius();
        for arm in (0..self.num_arms).filter(|&a| self.lifecycles[a].is_active()) {
            if !is_interval_holds(
                self.log.is_mean(arm),
                self.log.olcb(arm),
                self.log.oucb(arm),
                radius,
            ) {
                return Some(SwitchReason::ImportanceInterval { arm });
            }
        }
        if self.regret_lower_bound() > self.regret_budget(self.sigma_max) {
            return Some(SwitchReason::RegretBudget);
        }
        None
    }

    /// Arms the elimination rule fires for among `candidates`.
    pub(crate) fn rule_fires(&self, candidates: impl Iterator<Item = usize>) -> Vec<usize> {
        let ucb_star = self.log.ucb_star();
        candidates
            .filter(|&a| self.elimination_score(a) > ucb_star)
            .collect()
    }

    /// `μ̂_i − 9 width_i`.
    pub(crate) fn elimination_score(&self, arm: usize) -> F {
        self.log.mean(arm) - self.constants.elim_width_mult * self.log.width(arm)
    }

    /// Removes from `leaving` the arm with the smallest score if `leaving` would
    /// empty the active set.
    pub(crate) fn guard_last_active(&mut self, leaving: &mut Vec<usize>, round: u64) {
        let active = self.lifecycles.iter().filter(|l| l.is_active()).count();
        if leaving.is_empty() || leaving.len() < active {
            return;
        }
        let keep = leaving
            .iter()
            .copied()
            .min_by(|&a, &b| {
                self.elimination_score(a)
                    .partial_cmp(&self.elimination_score(b))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("non-empty");
        leaving.retain(|&a| a != keep);
        self.guard_hits += 1;
        log::warn!("round {round}: elimination would empty the active set, keeping arm {keep}");
    }

    /// Formally eliminates `arm` at `round`, starting its phase system.
    pub(crate) fn eliminate(
        &mut self,
        arm: usize,
        mut snapshot: EliminationSnapshot<F>,
        round: u64,
        ghost_pulls: Option<u64>,
    ) {
        snapshot.tau = Some(round);
        let phase = PhaseState::new(&snapshot);
        self.lifecycles[arm] = ArmLifecycle::Eliminated {
            snapshot,
            phase,
            ghost_pulls,
        };
        self.elimination_order.push((round, arm));
    }

    /// Base-variant elimination after an append; returns the newly eliminated arms.
    pub fn elimination_rule(&mut self, round: u64) -> Vec<usize> {
        let candidates: Vec<usize> = (0..self.num_arms)
            .filter(|&a| matches!(self.lifecycles[a], ArmLifecycle::Active))
            .collect();
        let mut leaving = self.rule_fires(candidates.into_iter());
        self.guard_last_active(&mut leaving, round);
        for &arm in &leaving {
            let snapshot = EliminationSnapshot::freeze(&self.log, arm, round, &self.constants);
            self.eliminate(arm, snapshot, round, None);
        }
        leaving
    }

    fn trigger_switch(&mut self, round: u64, reason: SwitchReason) {
        let event = SwitchEvent { round, reason };
        match self.options.switch_mode {
            SwitchMode::Fallback => {
                log::debug!(
                    "round {round}: switching to {} ({reason:?})",
                    self.fallback.name()
                );
                self.switched = Some(event);
                self.fallback.activate(round);
                self.exponents_by_round.clear();
            }
            SwitchMode::Suppress => {
                self.suppressed.get_or_insert(event);
                self.eliminations_frozen = true;
            }
        }
    }

    /// Processes one feedback record in round `round`.
    pub fn process_feedback(&mut self, round: u64, rec: &RoundRecord<F>) -> Result<()> {
        if let Some(exponents) = self.exponents_by_round.remove(&rec.round) {
            for (arm, exponent) in exponents {
                match &mut self.lifecycles[arm] {
                    ArmLifecycle::Eliminated { phase, .. } => {
                        phase.deposit(exponent, rec.round, rec.arm == arm, rec.loss)
                    }
                    _ => {
                        return Err(Error::invariant(format!(
                            "round {} banked for arm {arm}, which is not eliminated",
                            rec.round
                        )))
                    }
                }
            }
        }
        self.log.append(rec)?;
        if self.eliminations_frozen {
            return Ok(());
        }
        if let Some(reason) = self.bsc_check() {
            self.trigger_switch(round, reason);
            if self.switched.is_some() || self.eliminations_frozen {
                return Ok(());
            }
        }
        match self.options.variant {
            Variant::Base => {
                self.elimination_rule(round);
            }
            Variant::Ghost => {
                self.flag_ghosts(round);
                self.elimination_point(round);
            }
        }
        Ok(())
    }

    /// Runs the phase system of an eliminated arm for this round.
    pub fn eap_step(&mut self, arm: usize) -> Result<EapOutcome<F>> {
        let budget = self.error_budget();
        match &mut self.lifecycles[arm] {
            ArmLifecycle::Eliminated { snapshot, phase, .. } => Ok(phase.step(snapshot, budget)),
            _ => Err(Error::invariant(format!(
                "phase step for non-eliminated arm {arm}"
            ))),
        }
    }

    fn stochastic_probabilities(&mut self, round: u64) -> Result<Option<Vec<F>>> {
        let mut probs = vec![F::zero(); self.num_arms];
        let mut eliminated_mass = F::zero();
        for (arm, slot) in probs.iter_mut().enumerate() {
            if !self.lifecycles[arm].is_eliminated() {
                continue;
            }
            let p = loop {
                match self.eap_step(arm)? {
                    EapOutcome::Probability(p) => break p,
                    EapOutcome::Switch => {
                        self.trigger_switch(round, SwitchReason::PhaseErrors { arm });
                        if self.switched.is_some() {
                            return Ok(None);
                        }
                    }
                }
            };
            *slot = p;
            eliminated_mass = eliminated_mass + p;
        }
        if eliminated_mass >= F::one() {
            return Err(Error::invariant(format!(
                "eliminated arms hold probability {eliminated_mass}"
            )));
        }
        let active = self.lifecycles.iter().filter(|l| l.is_active()).count();
        let share = (F::one() - eliminated_mass) / F::from_count(active as u64);
        for (p, life) in probs.iter_mut().zip(&self.lifecycles) {
            if life.is_active() {
                *p = share;
            }
        }
        Ok(Some(probs))
    }

    pub fn choose_probabilities(&mut self, round: u64) -> Result<Vec<F>> {
        if self.switched.is_none() {
            if let Some(probs) = self.stochastic_probabilities(round)? {
                return Ok(probs);
            }
        }
        self.fallback.choose(round)
    }
}

impl<F: Scalar> Policy<F> for Desapo<F> {
    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn observe(&mut self, t: u64, arrivals: &[RoundRecord<F>]) -> Result<()> {
        // Everything in this batch was observed at the end of round t - 1.
        self.received += arrivals.len() as u64;
        let missing = (t - 1)
            .checked_sub(self.received)
            .ok_or_else(|| Error::Protocol(format!("more feedback than pulls before round {t}")))?;
        self.sigma_max = self.sigma_max.max(missing);

        for rec in arrivals {
            match self.switched {
                Some(event) if rec.round >= event.round => self.fallback.feed(rec)?,
                Some(_) => {}
                None => self.process_feedback(t, rec)?,
            }
        }
        Ok(())
    }

    fn probabilities(&mut self, t: u64) -> Result<Vec<F>> {
        self.choose_probabilities(t)
    }

    fn commit(&mut self, t: u64, _arm: usize, _probabilities: &[F]) -> Result<()> {
        if self.switched.is_some() {
            return Ok(());
        }
        let exponents: Vec<(usize, u32)> = self
            .lifecycles
            .iter()
            .enumerate()
            .filter_map(|(arm, life)| match life {
                ArmLifecycle::Eliminated { phase, .. } => Some((arm, phase.p_exponent)),
                _ => None,
            })
            .collect();
        if !exponents.is_empty() {
            self.exponents_by_round.insert(t, exponents);
        }
        Ok(())
    }

    fn switched_at(&self) -> Option<u64> {
        self.switched.map(|e| e.round)
    }

    fn suppressed_switch_at(&self) -> Option<u64> {
        self.suppressed.map(|e| e.round)
    }

    fn check_invariants(&self) -> Result<()> {
        let tol = F::lit(1e-9);
        for (arm, life) in self.lifecycles.iter().enumerate() {
            if let ArmLifecycle::Eliminated { snapshot, phase, .. } = life {
                let expected = snapshot.p1 * snapshot.n1;
                let product = phase.probability(snapshot) * phase.n_cap;
                if ((product - expected) / expected).abs() > tol {
                    return Err(Error::invariant(format!(
                        "arm {arm}: p * N = {product}, expected {expected}"
                    )));
                }
            }
        }
        if self.switched.is_none() && !self.lifecycles.iter().any(|l| l.is_active()) {
            return Err(Error::invariant("active set is empty"));
        }
        Ok(())
    }

    fn arm_reports(&self) -> Vec<ArmReport> {
        self.lifecycles
            .iter()
            .enumerate()
            .map(|(arm, life)| {
                let mut report = ArmReport {
                    arm,
                    ..Default::default()
                };
                let snapshot = match life {
                    ArmLifecycle::Active => None,
                    ArmLifecycle::Ghost(snapshot) => Some(snapshot),
                    ArmLifecycle::Eliminated {
                        snapshot,
                        phase,
                        ghost_pulls,
                    } => {
                        report.phases = phase.r;
                        report.errors = phase.error_count;
                        report.ghost_pulls = *ghost_pulls;
                        Some(snapshot)
                    }
                };
                if let Some(s) = snapshot {
                    report.tau = s.tau;
                    report.flagged_at = Some(s.flagged_at);
                    report.delta_tilde = Some(s.delta_tilde.as_f64());
                    report.mu_tilde = Some(s.mu_tilde.as_f64());
                    report.p1 = Some(s.p1.as_f64());
                    report.n1 = Some(s.n1.as_f64());
                    report.n_at_elim = Some(s.n_at_elim);
                }
                report
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fallback::DelayedExp3;
    use approx::assert_relative_eq;

    fn desapo(num_arms: usize, horizon: u64) -> Desapo<f64> {
        Desapo::new(
            num_arms,
            horizon,
            ConstantsProfile::default(),
            DesapoOptions::default(),
            Box::new(DelayedExp3::with_default_eta(num_arms, horizon)),
        )
        .unwrap()
    }

    #[test]
    fn elimination_inequality() {
        let ucb_star = 0.4;
        assert!(0.9 - 9.0 * 0.05 > ucb_star);
        assert!(0.9 - 9.0 * 0.06 < ucb_star);
    }

    #[test]
    fn interval_check() {
        assert!(!is_interval_holds(0.85, 0.3, 0.7, 0.1));
        assert!(is_interval_holds(0.5, 0.3, 0.7, 0.1));
        assert!(is_interval_holds(0.75, 0.3, 0.7, 0.1));
        assert!(is_interval_holds(0.25, 0.3, 0.7, 0.1));
    }

    #[test]
    fn regret_budget_value() {
        let alg = desapo(4, 256);
        // 272 * sqrt(4 * 256 * 8) + 30 * 10 * log2(4)
        let expected = 272.0 * (8192.0f64).sqrt() + 600.0;
        assert_relative_eq!(alg.regret_budget(10), expected, epsilon = 1e-9);
        assert!((alg.regret_budget(10) - 25219.0).abs() < 1.0);
    }

    #[test]
    fn error_budget_rounds_up() {
        // 3 * log2(50_000) = 46.83
        assert_eq!(desapo(5, 50_000).error_budget(), 47);
        assert_eq!(desapo(2, 256).error_budget(), 24);
    }

    #[test]
    fn no_eliminations_gives_uniform() {
        let mut alg = desapo(4, 100);
        let p = alg.choose_probabilities(1).unwrap();
        assert_eq!(p, vec![0.25; 4]);
    }

    fn eliminated_with_probability(alg: &mut Desapo<f64>, arm: usize, p1: f64, exponent: u32) {
        let snapshot = EliminationSnapshot {
            tau: Some(1),
            flagged_at: 1,
            s_tilde_len: 0,
            n_at_elim: 0,
            mu_tilde: 0.9,
            delta_tilde: 0.5,
            p1,
            n1: 1000.0,
        };
        let mut phase = PhaseState::new(&snapshot);
        phase.p_exponent = exponent;
        phase.n_cap = 1000.0 * f64::from(1u32 << exponent);
        alg.lifecycles[arm] = ArmLifecycle::Eliminated {
            snapshot,
            phase,
            ghost_pulls: None,
        };
    }

    #[test]
    fn active_share_of_remaining_mass() {
        let mut alg = desapo(3, 100);
        eliminated_with_probability(&mut alg, 2, 0.1, 0);
        let p = alg.choose_probabilities(1).unwrap();
        assert_relative_eq!(p[0], 0.45, epsilon = 1e-15);
        assert_relative_eq!(p[1], 0.45, epsilon = 1e-15);
        assert_eq!(p[2], 0.1);

        let mut alg = desapo(2, 256);
        eliminated_with_probability(&mut alg, 1, 0.25, 1);
        let p = alg.choose_probabilities(1).unwrap();
        assert_eq!(p, vec![0.875, 0.125]);
    }

    #[test]
    fn post_elimination_rounds_are_banked_by_exponent() {
        let mut alg = desapo(2, 256);
        eliminated_with_probability(&mut alg, 1, 0.25, 1);
        let p = alg.probabilities(5).unwrap();
        alg.commit(5, 0, &p).unwrap();
        // round 5 arrives at round 7 (delay 1)
        alg.observe(7, &[RoundRecord::new(5, 1, 1.0, p[1], 1)]).unwrap();
        let ArmLifecycle::Eliminated { phase, .. } = alg.lifecycle(1) else {
            panic!()
        };
        assert_eq!(phase.bank(1).unwrap().waiting(), 1);
        assert!(phase.bank(0).is_none());
        // processed into S as well
        assert_eq!(alg.log().len(), 1);
    }

    #[test]
    fn unpulled_round_enters_bank_with_zero_estimate() {
        let mut alg = desapo(2, 256);
        eliminated_with_probability(&mut alg, 1, 0.25, 0);
        let p = alg.probabilities(3).unwrap();
        alg.commit(3, 0, &p).unwrap();
        alg.observe(4, &[RoundRecord::new(3, 0, 0.7, p[0], 0)]).unwrap();
        alg.probabilities(4).unwrap();
        let ArmLifecycle::Eliminated { phase, .. } = alg.lifecycle(1) else {
            panic!()
        };
        assert_eq!(phase.bank(0).unwrap().processed, 1);
        assert_eq!(phase.phase_len, 1);
        assert_eq!(phase.phase_is_sum, 0.0);
    }

    #[test]
    fn elimination_freezes_snapshot() {
        let horizon = 10_000;
        let mut alg = desapo(2, horizon);
        // arm 0 always loses 0, arm 1 always loses 1
        let mut t = 1;
        let mut eliminated = None;
        while t < horizon && eliminated.is_none() {
            let arm = (t % 2) as usize;
            let rec = RoundRecord::new(t, arm, arm as f64, 0.5, 0);
            alg.process_feedback(t + 1, &rec).unwrap();
            if alg.lifecycle(1).is_eliminated() {
                eliminated = Some(t);
            }
            t += 1;
        }
        assert!(eliminated.is_some());
        assert!(matches!(alg.lifecycle(0), ArmLifecycle::Active));
        let ArmLifecycle::Eliminated { snapshot, phase, .. } = alg.lifecycle(1) else {
            panic!()
        };
        let width = crate::stats::width::<f64>(snapshot.n_at_elim, horizon).unwrap();
        assert_eq!(snapshot.delta_tilde, 8.0 * width);
        assert_eq!(snapshot.p1, 0.25 + snapshot.n_at_elim as f64 / 20_000.0);
        assert_eq!(snapshot.mu_tilde, 1.0);
        assert_relative_eq!(
            snapshot.p1 * snapshot.n1,
            1280.0 / (snapshot.delta_tilde * snapshot.delta_tilde)
        );
        assert_eq!(phase.r, 1);
        assert_eq!(phase.p_exponent, 0);
    }

    #[test]
    fn guard_keeps_one_arm_active() {
        let mut alg = desapo(1, 64);
        // Force an arm to look bad relative to an artificially low ucb*.
        let mut leaving = vec![0];
        alg.guard_last_active(&mut leaving, 3);
        assert!(leaving.is_empty());
        assert_eq!(alg.guard_hits(), 1);
    }

    #[test]
    fn constants_must_be_positive() {
        let c = ConstantsProfile::<f64> {
            n1_numerator: 0.0,
            ..Default::default()
        };
        let err = c.validate().unwrap_err();
        assert!(err.to_string().contains("n1_numerator"));
    }

    #[test]
    fn horizon_below_arms_is_rejected() {
        let r = Desapo::<f64>::new(
            5,
            4,
            ConstantsProfile::default(),
            DesapoOptions::default(),
            Box::new(DelayedExp3::new(5, 0.1)),
        );
        assert!(r.is_err());
    }
}
