//! Ghost-period elimination.
//!
//! In this mode the elimination rule only flags an arm: it freezes the arm's
//! snapshot but keeps playing it with the active probability. Flagged arms are
//! eliminated together at the next elimination point, the first append at which
//! the smallest width over all arms drops to `2^-h`.

use std::collections::BTreeSet;

use crate::desapo::{ArmLifecycle, Desapo};
use crate::eap::EliminationSnapshot;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GhostState {
    /// Index of the next elimination point, starting at 1.
    pub h: u32,
    pub ghosts: BTreeSet<usize>,
    /// Rounds at which elimination points were reached, with the `h` they closed.
    pub points: Vec<(u64, u32)>,
}

impl Default for GhostState {
    fn default() -> Self {
        Self {
            h: 1,
            ghosts: BTreeSet::new(),
            points: Vec::new(),
        }
    }
}

/// `2^-h`.
pub fn ladder_level<F: Scalar>(h: u32) -> F {
    F::lit(2.0).powi(-(h as i32))
}

impl<F: Scalar> Desapo<F> {
    /// Flags active, not yet flagged arms that the elimination rule fires for.
    pub fn flag_ghosts(&mut self, round: u64) -> Vec<usize> {
        let candidates: Vec<usize> = (0..self.num_arms)
            .filter(|&a| matches!(self.lifecycles[a], ArmLifecycle::Active))
            .collect();
        let flagged = self.rule_fires(candidates.into_iter());
        for &arm in &flagged {
            let snapshot = EliminationSnapshot::freeze(&self.log, arm, round, &self.constants);
            self.lifecycles[arm] = ArmLifecycle::Ghost(snapshot);
            self.ghost.ghosts.insert(arm);
        }
        flagged
    }

    /// Smallest per-arm width over all arms.
    pub fn min_width(&self) -> F {
        (0..self.num_arms)
            .map(|a| self.log.width(a))
            .fold(F::infinity(), F::min)
    }

    /// Advances the elimination-point ladder past the current minimum width and,
    /// if at least one point was reached, eliminates every ghost.
    pub fn elimination_point(&mut self, round: u64) -> bool {
        let min_width = self.min_width();
        let start = self.ghost.h;
        while min_width <= ladder_level(self.ghost.h) {
            self.ghost.h += 1;
        }
        if self.ghost.h == start {
            return false;
        }
        self.ghost.points.push((round, self.ghost.h - 1));

        let mut leaving: Vec<usize> = std::mem::take(&mut self.ghost.ghosts).into_iter().collect();
        self.guard_last_active(&mut leaving, round);
        for arm in 0..self.num_arms {
            let ArmLifecycle::Ghost(snapshot) = &self.lifecycles[arm] else {
                continue;
            };
            if leaving.contains(&arm) {
                let snapshot = snapshot.clone();
                let ghost_pulls = self.log.pulls(arm) - snapshot.n_at_elim;
                self.eliminate(arm, snapshot, round, Some(ghost_pulls));
            } else {
                // kept back by the guard
                self.lifecycles[arm] = ArmLifecycle::Active;
            }
        }
        true
    }
}
