//! `gpe`: run bandit experiments, compare algorithms and execute the verification suites.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gpe_core::egreedy::run_egreedy;
use gpe_core::envsim::RoundRecord;
use gpe_core::gpe::run_gpe;
use gpe_core::verify::{run_suite, VerifyOptions};
use log::info;
use rayon::prelude::*;

use config::{Plan, RunConfig};

#[derive(Parser)]
#[command(name = "gpe", version, about = "Contextual-bandit experiments with policy elimination and epsilon-greedy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its per-round CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV; overrides the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a property suite (or `all`) and report pass/fail counts.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Adds this much to one coefficient on the checked side; a negative control.
        #[arg(long, default_value_t = 0.0, hide = true)]
        perturb: f64,
    },
    /// Run several configurations on one environment into a long-format CSV.
    Compare {
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<gpe_core::Error> for Failure {
    fn from(e: gpe_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn execute(cfg: &RunConfig, seed: u64) -> Result<Vec<RoundRecord>, Failure> {
    let env = cfg.environment(seed).map_err(Failure::Usage)?;
    let records = match cfg.plan(&env).map_err(Failure::Usage)? {
        Plan::Gpe(c) => run_gpe(&env, &c)?.records,
        Plan::Egreedy(c) => run_egreedy(&env, &c)?.records,
    };
    Ok(records)
}

fn cmd_run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Failure> {
    let cfg = RunConfig::load(&config).map_err(Failure::Usage)?;
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Failure::Usage("no output path: pass --out or set 'output' in the config".into()))?;
    let seed = seed.unwrap_or(cfg.seed);
    info!("running {} on {} for {} rounds (seed {seed})", cfg.label(), cfg.environment.preset, cfg.horizon);
    let records = execute(&cfg, seed)?;
    output::write_atomic(&out, &output::run_csv(&records)).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {} rounds to {}", records.len(), out.display());
    Ok(())
}

fn cmd_verify(suite: &str, seed: u64, perturb: f64) -> Result<(), Failure> {
    let reports = run_suite(suite, VerifyOptions { seed, perturbation: perturb }).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut ok = true;
    for r in &reports {
        println!("{:<15} {} passed, {} failed", r.suite, r.passed, r.failed);
        for f in &r.failures {
            eprintln!("  {}: {f}", r.suite);
        }
        ok &= r.ok();
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("suite '{suite}' has failures")))
    }
}

fn threads() -> Option<usize> {
    std::env::var("NUM_THREADS").ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0)
}

fn cmd_compare(configs: Vec<PathBuf>, out: PathBuf) -> Result<(), Failure> {
    if configs.len() < 2 {
        return Err(Failure::Usage("compare needs at least two configs".into()));
    }
    let cfgs: Vec<RunConfig> = configs.iter().map(|p| RunConfig::load(p)).collect::<Result<_, _>>().map_err(Failure::Usage)?;
    if let Some(c) = cfgs.iter().find(|c| !c.same_environment(&cfgs[0])) {
        return Err(Failure::Usage(format!(
            "configs use different environments ({:?} vs {:?})",
            cfgs[0].environment, c.environment
        )));
    }
    let jobs: Vec<(usize, u64)> = cfgs.iter().enumerate().flat_map(|(i, c)| c.seeds().into_iter().map(move |s| (i, s))).collect();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads() {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Usage(format!("cannot start thread pool: {e}")))?;
    let results: Vec<Result<Vec<RoundRecord>, Failure>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, seed)| {
                let r = execute(&cfgs[i], seed);
                println!("finished {} seed {seed}", cfgs[i].label());
                r
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for r in results {
        runs.push(r?);
    }
    let labels: Vec<String> = cfgs.iter().map(RunConfig::label).collect();
    let csv = output::compare_csv(jobs.iter().zip(&runs).map(|(&(i, seed), recs)| (labels[i].as_str(), seed, recs.as_slice())));
    output::write_atomic(&out, &csv).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", out.display())))?;
    println!("wrote {} runs to {}", runs.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed } => cmd_run(config, out, seed),
        Command::Verify { suite, seed, perturb } => cmd_verify(&suite, seed, perturb),
        Command::Compare { configs, out } => cmd_compare(configs, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
