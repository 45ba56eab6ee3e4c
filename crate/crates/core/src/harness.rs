//! End-to-end runs: environment, policy and delay ledger stepped together for
//! `T` rounds, plus multi-seed batches, trace I/O and the lemma oracles.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AlgoKind, ExperimentConfig, FallbackSpec};
use crate::desapo::{ConstantsProfile, Desapo, DesapoOptions, Variant};
use crate::env::{Environment, POLICY_STREAM};
use crate::error::{Error, Result};
use crate::fallback::DelayedExp3;
use crate::policy::{check_distribution, sample_arm, ArmReport, FallbackOnly, Policy, UniformPolicy};
use crate::scalar::Scalar;
use crate::scheduler::{DelayLedger, RoundRecord};
use crate::stats::IsWidth;

/// Tolerance on `Σ p = 1` checked every round.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: u64,
    pub arm: usize,
    #[serde(skip)]
    pub prob_hash: u64,
    pub sigma_t: u64,
    pub switched: bool,
    pub cum_pseudo_regret: f64,
    pub cum_adv_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceDetail {
    /// Keep one row per round.
    #[default]
    Full,
    /// Keep finals only.
    Finals,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub seed: u64,
    pub num_arms: usize,
    pub horizon: u64,
    pub rows: Vec<TraceRow>,
    /// Expected loss of the played arms minus that of the best fixed arm.
    pub pseudo_regret: f64,
    /// Realized loss minus that of the best fixed arm in hindsight.
    pub adversarial_regret: f64,
    pub switch_round: Option<u64>,
    /// First failed check of a policy running with switching suppressed.
    pub suppressed_switch_round: Option<u64>,
    pub arms: Vec<ArmReport>,
    pub sigma_max: u64,
    pub total_delay: u64,
    pub delays: Vec<u64>,
    /// Arm means, when the loss model is stationary.
    pub means: Option<Vec<f64>>,
}

/// Builds the policy selected by `cfg` in scalar type `F`.
pub fn build_policy<F: Scalar>(cfg: &ExperimentConfig) -> Result<Box<dyn Policy<F>>> {
    let k = cfg.env.num_arms;
    let horizon = cfg.env.horizon;
    let FallbackSpec::Exp3Delayed { eta } = cfg.algo.fallback;
    let eta = eta.map(F::lit);
    let exp3 = || {
        let eta = eta.unwrap_or_else(|| DelayedExp3::<F>::default_eta(k, horizon));
        Box::new(DelayedExp3::new(k, eta))
    };
    let variant = match cfg.algo.variant {
        AlgoKind::Uniform => return Ok(Box::new(UniformPolicy::new(k))),
        AlgoKind::FallbackOnly => return Ok(Box::new(FallbackOnly::new(k, exp3()))),
        AlgoKind::Base => Variant::Base,
        AlgoKind::Ghost => Variant::Ghost,
    };
    let options = DesapoOptions {
        variant,
        switch_mode: cfg.algo.switch_mode,
        is_width: if cfg.algo.cap_is_width {
            IsWidth::Capped
        } else {
            IsWidth::Uncapped
        },
    };
    let constants = cast_constants(&cfg.algo.constants);
    Ok(Box::new(Desapo::new(k, horizon, constants, options, exp3())?))
}

fn cast_constants<F: Scalar>(c: &ConstantsProfile<f64>) -> ConstantsProfile<F> {
    ConstantsProfile {
        elim_width_mult: F::lit(c.elim_width_mult),
        delta_mult: F::lit(c.delta_mult),
        n1_numerator: F::lit(c.n1_numerator),
        bsc2_sqrt_coeff: F::lit(c.bsc2_sqrt_coeff),
        bsc2_sigma_coeff: F::lit(c.bsc2_sigma_coeff),
        max_errors_mult: F::lit(c.max_errors_mult),
        ghost_bsc_coeff: F::lit(c.ghost_bsc_coeff),
    }
}

pub fn environment(cfg: &ExperimentConfig, seed: u64) -> Result<Environment> {
    Environment::new(
        cfg.loss_model()?,
        cfg.delay_model()?,
        cfg.env.num_arms,
        cfg.env.horizon,
        seed,
    )
}

fn hash_probabilities<F: Scalar>(probs: &[F]) -> u64 {
    let mut h = DefaultHasher::new();
    for p in probs {
        p.as_f64().to_bits().hash(&mut h);
    }
    h.finish()
}

pub fn run_once<F: Scalar>(cfg: &ExperimentConfig, seed: u64, detail: TraceDetail) -> Result<RunTrace> {
    run_observed::<F>(cfg, seed, detail, |_, _| {})
}

/// Like [`run_once`], calling `observer` with every round's row and probability vector.
pub fn run_observed<F: Scalar>(
    cfg: &ExperimentConfig,
    seed: u64,
    detail: TraceDetail,
    mut observer: impl FnMut(&TraceRow, &[F]),
) -> Result<RunTrace> {
    cfg.validate()?;
    let env = environment(cfg, seed)?;
    let mut policy = build_policy::<F>(cfg)?;
    let mut ledger = DelayLedger::<F>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(POLICY_STREAM);

    let k = cfg.env.num_arms;
    let horizon = cfg.env.horizon;
    let stationary = env.losses().is_stationary();
    let means: Option<Vec<f64>> = stationary.then(|| (0..k).map(|a| env.mean_at(1, a)).collect());
    let gaps: Option<Vec<f64>> = means.as_ref().map(|m| {
        let best = m.iter().copied().fold(f64::INFINITY, f64::min);
        m.iter().map(|&x| x - best).collect()
    });

    let mut rows = Vec::with_capacity(if detail == TraceDetail::Full {
        horizon as usize
    } else {
        0
    });
    let mut delays = Vec::with_capacity(horizon as usize);
    let mut pseudo = 0.0;
    let mut played_mean = 0.0;
    let mut played_loss = 0.0;
    let mut arm_mean = vec![0.0; k];
    let mut arm_loss = vec![0.0; k];
    let mut row = None;

    for t in 1..=horizon {
        let arrivals = ledger.arrivals_at(t)?;
        policy.observe(t, &arrivals)?;
        let probs = policy.probabilities(t)?;
        check_distribution(&probs, PROBABILITY_TOLERANCE)
            .map_err(|e| Error::invariant(format!("round {t}: {e}")))?;
        let arm = sample_arm(&probs, &mut rng);
        let delay = env.delay_at(t)?;
        delays.push(delay);
        let loss = env.loss_at(t, arm)?;
        ledger.submit(RoundRecord::new(t, arm, F::lit(loss), probs[arm], delay))?;
        policy.commit(t, arm, &probs)?;
        policy
            .check_invariants()
            .map_err(|e| Error::invariant(format!("round {t}: {e}")))?;

        for a in 0..k {
            arm_loss[a] += env.loss_at(t, a)?;
            arm_mean[a] += env.mean_at(t, a);
        }
        played_loss += loss;
        played_mean += env.mean_at(t, arm);
        pseudo = match &gaps {
            Some(g) => pseudo + g[arm],
            None => played_mean - arm_mean.iter().copied().fold(f64::INFINITY, f64::min),
        };
        let current = TraceRow {
            t,
            arm,
            prob_hash: hash_probabilities(&probs),
            sigma_t: ledger.sigma_now(),
            switched: policy.switched_at().is_some(),
            cum_pseudo_regret: pseudo,
            cum_adv_regret: played_loss - arm_loss.iter().copied().fold(f64::INFINITY, f64::min),
        };
        observer(&current, &probs);
        if detail == TraceDetail::Full {
            rows.push(current);
        }
        row = Some(current);
    }

    let last = row.expect("horizon is at least 1");
    Ok(RunTrace {
        seed,
        num_arms: k,
        horizon,
        rows,
        pseudo_regret: last.cum_pseudo_regret,
        adversarial_regret: last.cum_adv_regret,
        switch_round: policy.switched_at(),
        suppressed_switch_round: policy.suppressed_switch_at(),
        arms: policy.arm_reports(),
        sigma_max: ledger.sigma_max(),
        total_delay: ledger.total_delay(),
        delays,
        means,
    })
}

/// Per-trace pass/fail of the structural properties of a stochastic run.
/// `None` means the property does not apply to the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LemmaReport {
    pub optimal_arm_kept: Option<bool>,
    pub gap_estimate_bracket: Option<bool>,
    pub elimination_order: Option<bool>,
    pub phase_count: bool,
    pub delay_backlog: bool,
    pub ghost_pull_growth: Option<bool>,
    /// Ledger `σ_max` and `D` equal the values recomputed from the delay vector.
    pub scheduler_agreement: bool,
}

impl LemmaReport {
    pub fn entries(&self) -> [(&'static str, Option<bool>); 7] {
        [
            ("optimal_arm_kept", self.optimal_arm_kept),
            ("gap_estimate_bracket", self.gap_estimate_bracket),
            ("elimination_order", self.elimination_order),
            ("phase_count", Some(self.phase_count)),
            ("delay_backlog", Some(self.delay_backlog)),
            ("ghost_pull_growth", self.ghost_pull_growth),
            ("scheduler_agreement", Some(self.scheduler_agreement)),
        ]
    }
}

/// Outstanding-feedback counts recomputed from scratch with a difference array.
pub fn sigma_from_delays(delays: &[u64]) -> (u64, u64) {
    let horizon = delays.len();
    let mut diff = vec![0i64; horizon + 2];
    for (i, &d) in delays.iter().enumerate() {
        // round i+1 is outstanding at the end of rounds i+1 ..= i+d
        if d == 0 {
            continue;
        }
        let start = i + 1;
        let end = (i as u64 + d).min(horizon as u64) as usize;
        if start <= end {
            diff[start] += 1;
            diff[end + 1] -= 1;
        }
    }
    let mut running = 0i64;
    let mut sigma_max = 0;
    for v in &diff[1..=horizon] {
        running += v;
        sigma_max = sigma_max.max(running as u64);
    }
    (sigma_max, delays.iter().sum())
}

pub fn lemma_oracles(trace: &RunTrace) -> LemmaReport {
    let log_t = (trace.horizon.max(2) as f64).log2();
    let (sigma_max, total_delay) = sigma_from_delays(&trace.delays);
    let mut report = LemmaReport {
        phase_count: trace.arms.iter().all(|a| a.phases as f64 <= 7.0 * log_t + 1.0),
        delay_backlog: (total_delay as u128) * 2 >= (sigma_max as u128) * (sigma_max as u128 + 1),
        scheduler_agreement: sigma_max == trace.sigma_max && total_delay == trace.total_delay,
        ..Default::default()
    };
    let ghost: Vec<bool> = trace
        .arms
        .iter()
        .filter_map(|a| Some(a.ghost_pulls? <= 1600 * a.n_at_elim?))
        .collect();
    if !ghost.is_empty() {
        report.ghost_pull_growth = Some(ghost.iter().all(|&ok| ok));
    }

    let Some(means) = &trace.means else {
        return report;
    };
    let best = means.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = |arm: usize| means[arm] - best;
    let eliminated: Vec<&ArmReport> = trace.arms.iter().filter(|a| a.tau.is_some()).collect();

    report.optimal_arm_kept = Some(eliminated.iter().all(|a| gap(a.arm) > 0.0));
    report.gap_estimate_bracket = Some(eliminated.iter().all(|a| {
        let est = a.delta_tilde.expect("eliminated arms carry a gap estimate");
        est <= gap(a.arm) && gap(a.arm) <= 2.0 * est
    }));
    report.elimination_order = Some(eliminated.iter().all(|early| {
        eliminated
            .iter()
            .filter(|late| late.tau > early.tau)
            .all(|late| gap(late.arm) <= 20.0 * gap(early.arm))
    }));
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub seeds: Vec<u64>,
    pub mean_pseudo_regret: f64,
    pub std_pseudo_regret: f64,
    pub mean_adv_regret: f64,
    pub std_adv_regret: f64,
    pub switch_rate: f64,
    pub lemma_violations: BTreeMap<String, u64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl BatchSummary {
    /// Aggregates traces, in any order, into a summary sorted by seed.
    pub fn from_traces(traces: &[RunTrace]) -> Self {
        let mut sorted: Vec<&RunTrace> = traces.iter().collect();
        sorted.sort_by_key(|t| t.seed);
        let pseudo: Vec<f64> = sorted.iter().map(|t| t.pseudo_regret).collect();
        let adv: Vec<f64> = sorted.iter().map(|t| t.adversarial_regret).collect();
        let (mean_pseudo_regret, std_pseudo_regret) = mean_std(&pseudo);
        let (mean_adv_regret, std_adv_regret) = mean_std(&adv);
        let switched = sorted.iter().filter(|t| t.switch_round.is_some()).count();

        let mut lemma_violations = BTreeMap::new();
        for trace in &sorted {
            for (name, outcome) in lemma_oracles(trace).entries() {
                let count = lemma_violations.entry(name.to_string()).or_insert(0);
                if outcome == Some(false) {
                    *count += 1;
                }
            }
        }
        Self {
            seeds: sorted.iter().map(|t| t.seed).collect(),
            mean_pseudo_regret,
            std_pseudo_regret,
            mean_adv_regret,
            std_adv_regret,
            switch_rate: switched as f64 / sorted.len() as f64,
            lemma_violations,
        }
    }
}

/// Runs every seed on up to `jobs` threads (all cores when `None`).
/// Traces come back sorted by seed; the first failing seed aborts the batch.
pub fn run_batch<F: Scalar>(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    jobs: Option<usize>,
    detail: TraceDetail,
) -> Result<(Vec<RunTrace>, BatchSummary)> {
    if seeds.is_empty() {
        return Err(Error::config("seeds", "need at least one seed"));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("jobs", e.to_string()))?;
    let mut results: Vec<(u64, Result<RunTrace>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| (seed, run_once::<F>(cfg, seed, detail)))
            .collect()
    });
    results.sort_by_key(|(seed, _)| *seed);
    let mut traces = Vec::with_capacity(results.len());
    for (seed, result) in results {
        match result {
            Ok(trace) => traces.push(trace),
            Err(e) => {
                return Err(Error::Run {
                    seed,
                    source: Box::new(e),
                })
            }
        }
    }
    let summary = BatchSummary::from_traces(&traces);
    Ok((traces, summary))
}

/// Rows written to a trace file: all of them, or every 100th plus the last.
pub fn rows_to_write(rows: &[TraceRow], downsample: bool) -> Vec<&TraceRow> {
    if !downsample {
        return rows.iter().collect();
    }
    let mut out: Vec<&TraceRow> = rows.iter().filter(|r| r.t % 100 == 0).collect();
    if let Some(last) = rows.last() {
        if last.t % 100 != 0 {
            out.push(last);
        }
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &RunTrace, downsample: bool) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows_to_write(&trace.rows, downsample) {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn trace_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("trace_seed{seed}.csv"))
}

/// Writes one CSV per trace and `summary.json` into `dir`.
pub fn write_batch(dir: &Path, traces: &[RunTrace], summary: &BatchSummary, downsample: bool) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for trace in traces {
        write_trace_csv(&trace_path(dir, trace.seed), trace, downsample)?;
    }
    let json = serde_json::to_string_pretty(summary)?;
    std::fs::write(dir.join("summary.json"), json + "\n")?;
    Ok(())
}
