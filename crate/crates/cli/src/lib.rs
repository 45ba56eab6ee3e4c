//! Command-line front end: `run`, `oracle` and `print-config`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use desapo::env::load_delay_table;
use desapo::harness::{lemma_oracles, run_batch, write_batch, RunTrace, TraceDetail};
use desapo::scheduler::{backlog_inequality_holds, sigma_d_certificate};
use desapo::{BatchSummary, Error, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
/// Oracle inequality failed.
pub const EXIT_ORACLE_FAILED: i32 = 1;
pub const EXIT_INVALID_INPUT: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Shifts every configured seed, so CI reruns see fresh randomness.
pub const SEED_OFFSET_VAR: &str = "DESAPO_SEED_OFFSET";

#[derive(Debug, Parser)]
#[command(
    name = "desapo",
    version,
    about = "Delayed-feedback best-of-both-worlds bandit simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every seed of an experiment and write traces plus a summary.
    Run {
        config: PathBuf,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Output directory, overriding `run.out_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print sigma_max and D of a delay table and check D >= sigma_max (sigma_max + 1) / 2.
    Oracle { delays: PathBuf },
    /// Validate a config and print it with every default filled in.
    PrintConfig { config: PathBuf },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Run { source, .. } => exit_code(source),
        Error::Config { .. } | Error::Json(_) | Error::Csv(_) | Error::Io(_) => EXIT_INVALID_INPUT,
        Error::Protocol(_) | Error::Invariant(_) => EXIT_RUNTIME,
    }
}

fn seed_offset(raw: Option<String>) -> Result<u64, Error> {
    match raw {
        None => Ok(0),
        Some(s) => s
            .trim()
            .parse()
            .map_err(|e| Error::config(SEED_OFFSET_VAR, format!("{s:?}: {e}"))),
    }
}

/// Parses `args` (program name first) and runs the command; usage errors exit 2.
pub fn run_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli, out, err),
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            }
            _ => {
                let _ = write!(err, "{}", e.render());
                EXIT_INVALID_INPUT
            }
        },
    }
}

/// Runs a parsed command, writing human output to `out`, and returns the exit code.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Run {
            config,
            jobs,
            out: dir,
        } => cmd_run(&config, jobs, dir, std::env::var(SEED_OFFSET_VAR).ok(), out),
        Command::Oracle { delays } => cmd_oracle(&delays, out),
        Command::PrintConfig { config } => cmd_print_config(&config, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn cmd_run(
    config: &Path,
    jobs: Option<usize>,
    out_dir: Option<PathBuf>,
    seed_offset_var: Option<String>,
    out: &mut dyn Write,
) -> Result<i32, Error> {
    let cfg = ExperimentConfig::from_path(config)?;
    let offset = seed_offset(seed_offset_var)?;
    let seeds: Vec<u64> = cfg.run.seeds.iter().map(|s| s.wrapping_add(offset)).collect();
    let dir = out_dir.unwrap_or_else(|| cfg.run.out_dir.clone());
    log::info!(
        "running {} seeds, K = {}, T = {}",
        seeds.len(),
        cfg.env.num_arms,
        cfg.env.horizon
    );

    let (traces, summary) = run_batch::<f64>(&cfg, &seeds, jobs, TraceDetail::Full)?;
    write_batch(&dir, &traces, &summary, cfg.run.downsample)?;
    write_table(out, &traces, &summary)?;
    writeln!(
        out,
        "wrote {} trace(s) and summary.json to {}",
        traces.len(),
        dir.display()
    )?;
    Ok(EXIT_OK)
}

fn write_table(out: &mut dyn Write, traces: &[RunTrace], summary: &BatchSummary) -> std::io::Result<()> {
    writeln!(
        out,
        "{:>12} {:>14} {:>14} {:>8} {:>10} {:>10}",
        "seed", "pseudo_regret", "adv_regret", "switch", "eliminated", "violations"
    )?;
    for t in traces {
        let eliminated = t.arms.iter().filter(|a| a.tau.is_some()).count();
        let violations = lemma_oracles(t)
            .entries()
            .iter()
            .filter(|(_, ok)| *ok == Some(false))
            .count();
        let switch = t.switch_round.map_or("-".to_string(), |r| r.to_string());
        writeln!(
            out,
            "{:>12} {:>14.2} {:>14.2} {:>8} {:>10} {:>10}",
            t.seed, t.pseudo_regret, t.adversarial_regret, switch, eliminated, violations
        )?;
    }
    writeln!(
        out,
        "{:>12} {:>14.2} {:>14.2} {:>8.2}",
        "mean", summary.mean_pseudo_regret, summary.mean_adv_regret, summary.switch_rate
    )?;
    writeln!(
        out,
        "{:>12} {:>14.2} {:>14.2}",
        "std", summary.std_pseudo_regret, summary.std_adv_regret
    )
}

pub fn cmd_oracle(delays: &Path, out: &mut dyn Write) -> Result<i32, Error> {
    let delays = load_delay_table(delays)?;
    let (sigma_max, total) = sigma_d_certificate(&delays);
    let holds = backlog_inequality_holds(sigma_max, total);
    writeln!(out, "T={} sigma_max={sigma_max} D={total}", delays.len())?;
    writeln!(
        out,
        "D >= sigma_max(sigma_max+1)/2: {}",
        if holds { "holds" } else { "VIOLATED" }
    )?;
    Ok(if holds { EXIT_OK } else { EXIT_ORACLE_FAILED })
}

pub fn cmd_print_config(config: &Path, out: &mut dyn Write) -> Result<i32, Error> {
    let cfg = ExperimentConfig::from_path(config)?;
    writeln!(out, "{}", cfg.to_json()?)?;
    Ok(EXIT_OK)
}
