//! Brute-force reference computations for tests.
//!
//! Everything here is recomputed from scratch over each prefix, in O(n²) or
//! worse, and shares no state with the incremental implementations it checks.

use crate::scheduler::RoundRecord;

/// Bounds of one processed sequence, recomputed from its prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrefixBounds {
    pub pulls: Vec<u64>,
    pub mean: Vec<f64>,
    pub ucb: Vec<f64>,
    pub lcb: Vec<f64>,
    pub is_mean: Vec<f64>,
    pub oucb: Vec<f64>,
    pub olcb: Vec<f64>,
    pub ucb_star: f64,
}

fn width(n: u64, log_t: f64) -> f64 {
    if n == 0 {
        1.0
    } else {
        (2.0 * log_t / n as f64).sqrt().min(1.0)
    }
}

fn is_radius(len: u64, num_arms: usize, log_t: f64, capped: bool) -> f64 {
    let r = (2.0 * num_arms as f64 * log_t / len as f64).sqrt();
    if capped {
        r.min(1.0)
    } else {
        r
    }
}

/// Bounds after every prefix of `records`: entry `m` describes the first `m` rounds.
///
/// Each prefix's candidate values are summed afresh from the records; running
/// bounds are the min (max) over the candidates of all prefixes seen so far,
/// with `[0, 1]` standing in for prefixes where an arm has no samples.
pub fn prefix_bounds(
    records: &[RoundRecord<f64>],
    num_arms: usize,
    horizon: u64,
    capped_is: bool,
) -> Vec<PrefixBounds> {
    let log_t = (horizon as f64).log2();
    let mut out = Vec::with_capacity(records.len() + 1);
    let mut ucb = vec![1.0f64; num_arms];
    let mut lcb = vec![0.0f64; num_arms];
    let mut oucb = vec![f64::INFINITY; num_arms];
    let mut olcb = vec![f64::NEG_INFINITY; num_arms];

    for m in 0..=records.len() {
        let prefix = &records[..m];
        let mut pulls = vec![0u64; num_arms];
        let mut sum = vec![0.0f64; num_arms];
        let mut is_sum = vec![0.0f64; num_arms];
        for r in prefix {
            pulls[r.arm] += 1;
            sum[r.arm] += r.loss;
            is_sum[r.arm] += r.loss / r.probability;
        }
        let mut mean = vec![0.0; num_arms];
        let mut is_mean = vec![0.0; num_arms];
        for a in 0..num_arms {
            if pulls[a] > 0 {
                mean[a] = sum[a] / pulls[a] as f64;
                let w = width(pulls[a], log_t);
                ucb[a] = ucb[a].min(mean[a] + w);
                lcb[a] = lcb[a].max(mean[a] - w);
            }
            if m > 0 {
                is_mean[a] = is_sum[a] / m as f64;
                let r = is_radius(m as u64, num_arms, log_t, capped_is);
                oucb[a] = oucb[a].min(is_mean[a] + r);
                olcb[a] = olcb[a].max(is_mean[a] - r);
            }
        }
        let ucb_star = (0..num_arms).fold(1.0f64, |acc, a| acc.min(ucb[a]).min(oucb[a]));
        out.push(PrefixBounds {
            pulls,
            mean,
            ucb: ucb.clone(),
            lcb: lcb.clone(),
            is_mean,
            oucb: oucb.clone(),
            olcb: olcb.clone(),
            ucb_star,
        });
    }
    out
}

/// Adversarial regret straight from a `T × K` loss matrix and the played arms.
pub fn adversarial_regret(losses: &[Vec<f64>], arms: &[usize]) -> f64 {
    let played: f64 = arms.iter().enumerate().map(|(t, &a)| losses[t][a]).sum();
    let num_arms = losses.first().map_or(0, Vec::len);
    let best = (0..num_arms)
        .map(|a| losses.iter().map(|row| row[a]).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    played - best
}
