use desapo::config::{AlgoKind, DelaySpec, LossSpec};
use desapo::harness::{
    lemma_oracles, run_batch, run_observed, run_once, sigma_from_delays, write_trace_csv, RunTrace,
    TraceDetail,
};
use desapo::oracles::adversarial_regret;
use desapo::policy::ArmReport;
use desapo::scheduler::replay_delays;
use desapo::{harness, ExperimentConfig};

fn uniform(means: Vec<f64>, horizon: u64, delay: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::bernoulli(means, horizon, delay, vec![1]);
    cfg.algo.variant = AlgoKind::Uniform;
    cfg
}

#[test]
fn single_arm_has_no_regret() {
    let cfg = ExperimentConfig::bernoulli(vec![0.3], 2000, 5, vec![1]);
    let trace = run_once::<f64>(&cfg, 9, TraceDetail::Full).unwrap();
    assert_eq!(trace.pseudo_regret, 0.0);
    assert_eq!(trace.adversarial_regret, 0.0);
    assert!(trace.arms.iter().all(|a| a.tau.is_none()));
    assert_eq!(trace.rows.len(), 2000);
}

#[test]
fn no_feedback_means_uniform_play() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.5, 0.9], 10, 100, vec![1]);
    let mut seen = Vec::new();
    let trace = run_observed::<f64>(&cfg, 3, TraceDetail::Full, |row, p| {
        seen.push((row.t, p.to_vec()));
    })
    .unwrap();
    assert_eq!(seen.len(), 10);
    for (_, p) in &seen {
        assert_eq!(p, &vec![1.0 / 3.0; 3]);
    }
    assert_eq!(trace.rows.last().unwrap().sigma_t, 10);
    assert_eq!(trace.switch_round, None);
}

#[test]
fn runs_are_deterministic() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.5], 3000, 10, vec![1]);
    let a = run_once::<f64>(&cfg, 77, TraceDetail::Full).unwrap();
    let b = run_once::<f64>(&cfg, 77, TraceDetail::Full).unwrap();
    assert_eq!(a.rows, b.rows);
    let c = run_once::<f64>(&cfg, 78, TraceDetail::Full).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn losses_do_not_depend_on_the_policy() {
    let mut cfg = ExperimentConfig::bernoulli(vec![0.2, 0.6], 500, 3, vec![1]);
    let first = harness::environment(&cfg, 4).unwrap().loss_matrix().unwrap();
    cfg.algo.variant = AlgoKind::Uniform;
    let _ = run_once::<f64>(&cfg, 4, TraceDetail::Finals).unwrap();
    let second = harness::environment(&cfg, 4).unwrap().loss_matrix().unwrap();
    assert_eq!(first, second);
}

#[test]
fn adversarial_regret_matches_naive_recomputation() {
    let mut cfg = ExperimentConfig::bernoulli(vec![0.1, 0.5, 0.9], 4000, 0, vec![1]);
    cfg.env.loss = LossSpec::Flip {
        means_a: vec![0.1, 0.5, 0.9],
        means_b: vec![0.9, 0.5, 0.1],
        flip_round: 2000,
    };
    cfg.env.delay = DelaySpec::GeometricCapped { mean: 5.0, cap: 40 };
    let trace = run_once::<f64>(&cfg, 21, TraceDetail::Full).unwrap();
    let losses = harness::environment(&cfg, 21).unwrap().loss_matrix().unwrap();
    let arms: Vec<usize> = trace.rows.iter().map(|r| r.arm).collect();
    assert_eq!(trace.adversarial_regret, adversarial_regret(&losses, &arms));
    assert!(trace.means.is_none());
}

#[test]
fn scheduler_agrees_with_delay_vector() {
    let mut cfg = ExperimentConfig::bernoulli(vec![0.3, 0.6], 3000, 0, vec![1]);
    cfg.env.delay = DelaySpec::GeometricCapped { mean: 20.0, cap: 200 };
    let trace = run_once::<f64>(&cfg, 2, TraceDetail::Full).unwrap();
    let (series, sigma_max, total) = replay_delays(&trace.delays);
    assert_eq!((trace.sigma_max, trace.total_delay), (sigma_max, total));
    assert_eq!(sigma_from_delays(&trace.delays), (sigma_max, total));
    let traced: Vec<u64> = trace.rows.iter().map(|r| r.sigma_t).collect();
    assert_eq!(traced, series);
}

#[test]
fn uniform_policy_regret_is_linear_in_gap() {
    let cfg = uniform(vec![0.1, 0.5], 10_000, 0);
    let seeds: Vec<u64> = (1..=20).collect();
    let (_, summary) = run_batch::<f64>(&cfg, &seeds, Some(4), TraceDetail::Finals).unwrap();
    // E = 0.5 * 0.4 * 10_000
    assert!(
        (summary.mean_pseudo_regret - 2000.0).abs() < 100.0,
        "{}",
        summary.mean_pseudo_regret
    );
}

#[test]
fn batch_summary_is_the_arithmetic_mean_in_any_seed_order() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.4, 0.6], 2000, 7, vec![1]);
    let (traces, summary) = run_batch::<f64>(&cfg, &[5, 2, 9], Some(2), TraceDetail::Finals).unwrap();
    assert_eq!(summary.seeds, vec![2, 5, 9]);
    assert_eq!(traces.iter().map(|t| t.seed).collect::<Vec<_>>(), vec![2, 5, 9]);
    let mean = traces.iter().map(|t| t.pseudo_regret).sum::<f64>() / 3.0;
    assert!((summary.mean_pseudo_regret - mean).abs() < 1e-9);
    let (_, permuted) = run_batch::<f64>(&cfg, &[9, 5, 2], Some(3), TraceDetail::Finals).unwrap();
    assert_eq!(summary, permuted);
}

#[test]
fn invalid_config_fails_before_running() {
    let mut cfg = ExperimentConfig::bernoulli(vec![0.1, 0.5], 1000, 0, vec![1]);
    cfg.env.horizon = 1;
    assert!(run_once::<f64>(&cfg, 1, TraceDetail::Finals)
        .unwrap_err()
        .is_config());
    assert!(run_batch::<f64>(&cfg, &[1], None, TraceDetail::Finals)
        .unwrap_err()
        .is_config());
}

#[test]
fn single_precision_runs_end_to_end() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.9], 20_000, 10, vec![1]);
    let trace = run_once::<f32>(&cfg, 1, TraceDetail::Finals).unwrap();
    assert!(trace.pseudo_regret >= 0.0);
    assert!(trace.arms[1].tau.is_some(), "the 0.9 arm should be eliminated");
    assert!(trace.arms[0].tau.is_none());
}

#[test]
fn eliminated_arm_keeps_being_sampled() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.9], 40_000, 10, vec![1]);
    let trace = run_once::<f64>(&cfg, 8, TraceDetail::Full).unwrap();
    let tau = trace.arms[1].tau.expect("arm 1 eliminated");
    let later = trace.rows.iter().filter(|r| r.t > tau && r.arm == 1).count();
    assert!(later > 0);
    assert!(trace.arms[1].phases >= 1);
    let report = lemma_oracles(&trace);
    assert_eq!(report.optimal_arm_kept, Some(true));
    assert!(report.delay_backlog && report.scheduler_agreement && report.phase_count);
}

fn fake_trace(arms: Vec<ArmReport>, means: Vec<f64>) -> RunTrace {
    RunTrace {
        seed: 0,
        num_arms: means.len(),
        horizon: 1024,
        rows: Vec::new(),
        pseudo_regret: 0.0,
        adversarial_regret: 0.0,
        switch_round: None,
        suppressed_switch_round: None,
        arms,
        sigma_max: 1,
        total_delay: 3,
        delays: vec![3, 0, 0],
        means: Some(means),
    }
}

fn eliminated(arm: usize, tau: u64, delta_tilde: f64) -> ArmReport {
    ArmReport {
        arm,
        tau: Some(tau),
        delta_tilde: Some(delta_tilde),
        phases: 1,
        ..Default::default()
    }
}

#[test]
fn oracle_flags_eliminated_best_arm() {
    let trace = fake_trace(
        vec![
            eliminated(0, 10, 0.2),
            ArmReport {
                arm: 1,
                ..Default::default()
            },
        ],
        vec![0.1, 0.5],
    );
    assert_eq!(lemma_oracles(&trace).optimal_arm_kept, Some(false));
}

#[test]
fn oracle_flags_gap_bracket_and_order() {
    // gaps 0.4 and 0.02: estimate 0.3 brackets 0.4, the late arm's gap 0.02 <= 20 * 0.4
    let ok = fake_trace(
        vec![
            ArmReport {
                arm: 0,
                ..Default::default()
            },
            eliminated(1, 10, 0.3),
            eliminated(2, 20, 0.015),
        ],
        vec![0.1, 0.5, 0.12],
    );
    let r = lemma_oracles(&ok);
    assert_eq!(
        (r.gap_estimate_bracket, r.elimination_order),
        (Some(true), Some(true))
    );

    // 0.8 eliminated after 0.02: 0.8 > 20 * 0.02
    let bad = fake_trace(
        vec![
            ArmReport {
                arm: 0,
                ..Default::default()
            },
            eliminated(1, 30, 0.5),
            eliminated(2, 20, 0.001),
        ],
        vec![0.1, 0.9, 0.12],
    );
    let r = lemma_oracles(&bad);
    assert_eq!(r.elimination_order, Some(false));
    assert_eq!(r.gap_estimate_bracket, Some(false));
}

#[test]
fn oracle_flags_too_many_phases() {
    let mut arm = eliminated(1, 10, 0.3);
    // 7 * log2(1024) + 1 = 71
    arm.phases = 71;
    let trace = fake_trace(vec![ArmReport::default(), arm.clone()], vec![0.1, 0.5]);
    assert!(lemma_oracles(&trace).phase_count);
    arm.phases = 72;
    let trace = fake_trace(vec![ArmReport::default(), arm], vec![0.1, 0.5]);
    assert!(!lemma_oracles(&trace).phase_count);
}

#[test]
fn trace_csv_has_documented_columns() {
    let cfg = ExperimentConfig::bernoulli(vec![0.1, 0.5], 250, 1, vec![1]);
    let trace = run_once::<f64>(&cfg, 1, TraceDetail::Full).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trace_csv(&path, &trace, true).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,arm,sigma_t,switched,cum_pseudo_regret,cum_adv_regret"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[2].starts_with("250,"));
}
