use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use stardkg_harness::acceptance::run_all;
use stardkg_harness::report::RunReport;
use stardkg_harness::scenario::base::{self, expected_ok, SchedulerSpec, ScenarioScript};
use stardkg_harness::scenario::beacon::{run_beacon, BeaconAction};
use stardkg_harness::scenario::equivocation::{refuse, run_demo};
use stardkg_harness::scenario::proofs::run_bench;
use stardkg_harness::scenario::registration::{run_registration, ADVERSARIES};
use stardkg_harness::scenario::tamper::run_matrix;
use stardkg_harness::setup::{self, GroupMode, OracleChoice, ProfileMode, RunConfig};
use stardkg_harness::with_env;

#[derive(Parser)]
#[command(name = "stardkg", version, about = "Scenario runner for the stardkg protocol stack")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    #[arg(long, value_enum, default_value = "production", global = true)]
    profile: ProfileMode,
    #[arg(long, value_enum, default_value = "production", global = true)]
    group: GroupMode,
    #[arg(long, default_value_t = 1, global = true)]
    seed: u64,
    #[arg(long, value_enum, default_value = "ideal", global = true)]
    oracle: OracleChoice,
    /// Write the JSON report here.
    #[arg(long, global = true)]
    json: Option<PathBuf>,
    /// Run independent seeds (or acceptance criteria) concurrently.
    #[arg(long, global = true)]
    parallel: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Honest (or scheduler-perturbed) base run.
    RunBase {
        #[arg(long, default_value_t = 3)]
        parties: usize,
        /// `fifo`, `random` or `withhold:<party>`.
        #[arg(long, default_value = "fifo")]
        scheduler: String,
        /// Number of consecutive seeds starting at `--seed`.
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
    /// Six single-check mutations plus the unmutated fixture.
    Tamper,
    /// Device registration, honest and adversarial.
    Register {
        #[arg(long, default_value_t = 3)]
        joiners: usize,
        /// Sponsor every joiner by P2 instead of chaining.
        #[arg(long)]
        star: bool,
        /// Also run each adversarial variant.
        #[arg(long)]
        adversarial: bool,
    },
    /// Equivocation to discrete-log reduction. Toy group only.
    EquivocationDemo {
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Commit–reveal beacon over USV certificates.
    Beacon {
        #[arg(long, default_value_t = 3)]
        parties: usize,
        /// 1-based party indices that never reveal.
        #[arg(long, value_delimiter = ',')]
        withhold: Vec<usize>,
        /// Party indices that commit a second time after seeing the others.
        #[arg(long, value_delimiter = ',')]
        recommit: Vec<usize>,
        /// Party indices that reveal a tag for a different commitment.
        #[arg(long, value_delimiter = ',')]
        bad_reveal: Vec<usize>,
    },
    /// Prove/verify timings and sizes across repetition counts.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        r: Vec<usize>,
        #[arg(long, default_value_t = 15)]
        iters: usize,
    },
    /// The full acceptance suite under its pinned seeds.
    Acceptance,
}

fn scheduler(spec: &str, seed: u64) -> anyhow::Result<SchedulerSpec> {
    Ok(match spec {
        "fifo" => SchedulerSpec::Fifo,
        "random" => SchedulerSpec::Random(seed),
        s => match s.strip_prefix("withhold:") {
            Some(p) => SchedulerSpec::Withhold(p.to_string()),
            None => anyhow::bail!("unknown scheduler {s:?}"),
        },
    })
}

fn print_report(r: &RunReport) {
    println!("{} [seed {}]: {}", r.scenario, r.seed, r.outcome.status);
    for c in &r.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("  {mark} {}", c.name);
        } else {
            println!("  {mark} {}: {}", c.name, c.detail);
        }
    }
}

fn emit<T: Serialize>(path: &Option<PathBuf>, v: &T) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, serde_json::to_string_pretty(v)?)?;
    }
    Ok(())
}

fn finish(g: &Global, reports: Vec<RunReport>) -> anyhow::Result<bool> {
    reports.iter().for_each(print_report);
    let ok = reports.iter().all(RunReport::passed);
    match reports.as_slice() {
        [one] => emit(&g.json, one)?,
        many => emit(&g.json, &many)?,
    }
    Ok(ok)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let g = &cli.global;
    let cfg = RunConfig::new(g.group, g.profile, g.oracle, g.seed);
    match cli.cmd {
        Cmd::RunBase { parties, scheduler: spec, runs } => {
            let one = |seed: u64| -> anyhow::Result<RunReport> {
                let cfg = cfg.with_seed(seed);
                let script = ScenarioScript {
                    parties,
                    scheduler: scheduler(&spec, seed)?,
                    ..ScenarioScript::default()
                };
                let mut rep = with_env!(cfg, |env| base::run(&env, &cfg, &script, None));
                let ok = expected_ok(&rep, &script);
                rep.check("outcome matches script", ok, rep.outcome.status.clone());
                Ok(rep)
            };
            let seeds: Vec<u64> = (0..runs).map(|i| g.seed.wrapping_add(i)).collect();
            let reports = if g.parallel {
                seeds.par_iter().map(|&s| one(s)).collect::<anyhow::Result<Vec<_>>>()?
            } else {
                seeds.iter().map(|&s| one(s)).collect::<anyhow::Result<Vec<_>>>()?
            };
            finish(g, reports)
        }
        Cmd::Tamper => {
            let rep = with_env!(cfg, |env| run_matrix(&env, &cfg, None));
            finish(g, vec![rep])
        }
        Cmd::Register { joiners, star, adversarial } => {
            let adv: &[_] = if adversarial { &ADVERSARIES } else { &[] };
            let rep = with_env!(cfg, |env| run_registration(&env, &cfg, joiners, !star, adv, None)?);
            finish(g, vec![rep])
        }
        Cmd::EquivocationDemo { trials } => {
            let rep = match g.group {
                GroupMode::Toy => run_demo(&setup::toy_trapdoor_env(&cfg)?, &cfg, trials)?,
                GroupMode::Production => return Err(refuse(&setup::production_env(&cfg)?).into()),
            };
            finish(g, vec![rep])
        }
        Cmd::Beacon {
            parties,
            withhold,
            recommit,
            bad_reveal,
        } => {
            let actions: Vec<BeaconAction> = withhold
                .into_iter()
                .map(BeaconAction::Withhold)
                .chain(recommit.into_iter().map(BeaconAction::Recommit))
                .chain(bad_reveal.into_iter().map(BeaconAction::BadReveal))
                .collect();
            let rep = with_env!(cfg, |env| run_beacon(&env, &cfg, parties, &actions, None)?);
            if let Some(rho) = rep.data.get("result").and_then(|r| r.get("rho")).and_then(|v| v.as_str()) {
                println!("rho = {rho}");
            }
            finish(g, vec![rep])
        }
        Cmd::Bench { r, iters } => {
            let p = cfg.profile.params();
            let rep = match g.group {
                GroupMode::Toy => run_bench(&setup::toy_group(p)?, &cfg, p.t, p.b, &r, iters)?,
                GroupMode::Production => run_bench(&setup::production_group(), &cfg, p.t, p.b, &r, iters)?,
            };
            if let Some(rows) = rep.data.get("rows") {
                println!("{}", serde_json::to_string_pretty(rows)?);
            }
            finish(g, vec![rep])
        }
        Cmd::Acceptance => {
            let suite = run_all(g.parallel);
            for c in &suite.criteria {
                println!("{}", c.line());
            }
            emit(&g.json, &suite)?;
            Ok(suite.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
