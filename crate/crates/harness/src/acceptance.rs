//! The acceptance suite. Every criterion runs under a seed pinned in [`seeds`]; the
//! leak scan of criterion 12 merges the surfaces collected by all the others.

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use stardkg::algebra::{Group, ToyGroup};
use stardkg::fischlin::{honest_reject_bound_log2, soundness_bound_log2, FischlinParams};
use stardkg::keybox::{tag, KeyBoxConfig, SlotId};
use stardkg::sdkg::{derive_all_shares_oracle, install_base_shares, run_base, BaseOutcome, Rdr, RegAdversary, SigmaTable};
use stardkg::transport::{FifoScheduler, PartyId};

use crate::report::{CheckResult, Outcome, RunReport, Sizes};
use crate::scan::{LeakScanner, ScanSummary};
use crate::scenario::base::{self, execute, ScenarioScript};
use crate::scenario::beacon::{run_beacon, BeaconAction};
use crate::scenario::equivocation::{refuse, run_demo};
use crate::scenario::oracle::run_oracle_contract;
use crate::scenario::proofs::{extraction_statistics, rarity_statistics};
use crate::scenario::registration::{run_registration, ADVERSARIES};
use crate::scenario::{linos, tamper};
use crate::setup::{self, GroupMode, OracleChoice, ProfileMode, RunConfig};

pub mod seeds {
    pub const SIZES: u64 = 0x5eed_0001;
    pub const BOUNDS: u64 = 0x5eed_0002;
    pub const RARITY: u64 = 0x5eed_0003;
    pub const EXTRACTION: u64 = 0x5eed_0004;
    pub const TWO_PATH: u64 = 0x5eed_0005;
    pub const BIJECTION: u64 = 0x5eed_0006;
    pub const TAMPER: u64 = 0x5eed_0007;
    pub const LINOS: u64 = 0x5eed_0008;
    pub const REGISTRATION: u64 = 0x5eed_0009;
    pub const EQUIVOCATION: u64 = 0x5eed_000a;
    pub const ORACLE: u64 = 0x5eed_000b;
    pub const BEACON: u64 = 0x5eed_000c;
}

pub const CRITERIA: [(u8, &str); 12] = [
    (1, "transcript sizes"),
    (2, "soundness-bound calculator"),
    (3, "rarity-search statistics"),
    (4, "straight-line extraction"),
    (5, "two-path key consistency"),
    (6, "bijection uniformity"),
    (7, "tamper matrix"),
    (8, "one-shot and state-continuity negatives"),
    (9, "registration suite"),
    (10, "equivocation reduction"),
    (11, "oracle contract"),
    (12, "no-export scan"),
];

pub const TWO_PATH_RUNS: usize = 1000;
pub const EXTRACTION_PROOFS: usize = 1000;
pub const RARITY_REPETITIONS: usize = 1000;
pub const EQUIVOCATION_TRIALS: usize = 100;
pub const REGISTRATION_JOINERS: usize = 5;
pub const ISOLATION_INPUTS: usize = 1024;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: f64,
    pub report: Option<RunReport>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<40} {}  {}",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Suite {
    pub criteria: Vec<CriterionResult>,
    pub scan: ScanSummary,
}

impl Suite {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }
}

fn production(seed: u64) -> RunConfig {
    RunConfig::new(GroupMode::Production, ProfileMode::Production, OracleChoice::Ideal, seed)
}

fn toy_small(seed: u64) -> RunConfig {
    RunConfig::new(GroupMode::Toy, ProfileMode::Small, OracleChoice::Ideal, seed)
}

fn failures(rep: &RunReport) -> String {
    let f: Vec<String> = rep
        .failures()
        .iter()
        .map(|c| if c.detail.is_empty() { c.name.clone() } else { format!("{} ({})", c.name, c.detail) })
        .collect();
    if f.is_empty() {
        format!("{} checks", rep.checks.len())
    } else {
        format!("failed: {}", f.join("; "))
    }
}

fn within(v: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&v)
}

pub fn sizes(scan: &mut LeakScanner) -> anyhow::Result<(RunReport, String)> {
    let cfg = production(seeds::SIZES);
    let env = setup::production_env(&cfg)?;
    let script = ScenarioScript::with_sid("sid-sizes");
    let mut rep = base::run(&env, &cfg, &script, Some(scan));
    let s = rep.sizes.clone().ok_or_else(|| anyhow::anyhow!("no transcript: {:?}", rep.outcome))?;
    let (dl, aff, cert, total) = (Sizes::kib(s.pi_dl), Sizes::kib(s.pi_aff), Sizes::kib(s.usv_cert), Sizes::kib(s.total));
    rep.check("|pi_DL| in [2.0, 2.3] KiB", within(dl, 2.0, 2.3), format!("{dl:.3}"));
    rep.check("|pi_aff| in [4.0, 4.6] KiB", within(aff, 4.0, 4.6), format!("{aff:.3}"));
    rep.check("|(C, zeta)| in [3.0, 3.4] KiB", within(cert, 3.0, 3.4), format!("{cert:.3}"));
    rep.check("total in [11, 13.5] KiB", within(total, 11.0, 13.5), format!("{total:.3}"));
    let detail = format!("pi_DL {dl:.2} KiB, pi_aff {aff:.2} KiB, (C,zeta) {cert:.2} KiB, total {total:.2} KiB");
    Ok((rep, detail))
}

/// `log2 binom(2r, r)` from the exact integer, as an independent check of the
/// calculator's log-space sum.
fn log2_binom_exact(n: u64, k: u64) -> f64 {
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
    }
    (c as f64).log2()
}

pub fn bounds() -> anyhow::Result<(RunReport, String)> {
    let p = FischlinParams::PRODUCTION;
    let cfg = production(seeds::BOUNDS);
    let mut rep = RunReport::new("bounds", &setup::production_group(), p, &cfg);
    for q in [0u64, 1, 1 << 20, 1 << 40, 1 << 60] {
        let per_query = soundness_bound_log2(&p, q) - ((q + 1) as f64).log2();
        rep.check(&format!("Q = {q}: exponent in -194.9 ± 0.5"), (per_query + 194.9).abs() <= 0.5, format!("{per_query:.3}"));
    }
    let exact = log2_binom_exact(p.s + p.r as u64, p.r as u64) - (p.b as f64) * p.r as f64;
    let calc = soundness_bound_log2(&p, 0);
    rep.check("matches exact binomial", (exact - calc).abs() < 1e-6, format!("{exact:.4} vs {calc:.4}"));
    let reject = honest_reject_bound_log2(&p);
    let direct = (p.r as f64 * (1.0 - (-(p.b as f64)).exp2()).powi(1 << p.t)).log2();
    rep.check("honest reject in -41.2 ± 0.3", (reject + 41.2).abs() <= 0.3, format!("{reject:.3}"));
    rep.check("honest reject matches direct product", (reject - direct).abs() < 1e-6, format!("{direct:.4}"));
    rep.datum("soundness_log2_per_query", calc);
    rep.datum("honest_reject_log2", reject);
    Ok((rep, format!("soundness (Q+1)*2^{calc:.2}, honest reject 2^{reject:.2}")))
}

pub fn rarity() -> anyhow::Result<(RunReport, String)> {
    let cfg = production(seeds::RARITY);
    let env = setup::production_env(&cfg)?;
    let stats = rarity_statistics(&env, RARITY_REPETITIONS, cfg.seed)?;
    let mut rep = RunReport::new("rarity", &env.grp, env.params, &cfg);
    rep.check(
        &format!("at least {RARITY_REPETITIONS} repetitions"),
        stats.repetitions >= RARITY_REPETITIONS,
        stats.repetitions.to_string(),
    );
    rep.check("mean trials in [230, 282]", within(stats.mean_trials, 230.0, 282.0), format!("{:.2}", stats.mean_trials));
    let detail = format!(
        "mean {:.2} trials over {} repetitions ({} proofs)",
        stats.mean_trials, stats.repetitions, stats.proofs
    );
    rep.datum("rarity", &stats);
    Ok((rep, detail))
}

pub fn extraction() -> anyhow::Result<(RunReport, String)> {
    let cfg = toy_small(seeds::EXTRACTION);
    let env = setup::toy_env(&cfg)?;
    let s = extraction_statistics(&env, EXTRACTION_PROOFS, cfg.seed)?;
    let mut rep = RunReport::new("extraction", &env.grp, env.params, &cfg);
    rep.check("honest proofs verify", s.honest_verified == s.honest, format!("{}/{}", s.honest_verified, s.honest));
    rep.check("exact witness extracted", s.extracted_exact == s.honest, format!("{}/{}", s.extracted_exact, s.honest));
    rep.check("simulated proofs verify", s.simulated_verified == s.simulated, format!("{}/{}", s.simulated_verified, s.simulated));
    rep.check("no extraction on simulated proofs", s.simulated_attempts == 0, s.simulated_attempts.to_string());
    rep.datum("extraction", &s);
    let detail = format!(
        "{}/{} extracted, {} attempts on {} simulated",
        s.extracted_exact, s.honest, s.simulated_attempts, s.simulated
    );
    Ok((rep, detail))
}

fn sigma_table<G: Group>(run: &stardkg::sdkg::BaseRun<G>) -> Option<SigmaTable<G::Scalar>> {
    let (l, f) = (&run.leader, &run.leaf);
    Some(SigmaTable {
        s11: l.shadow_scalar("s11")?,
        s21: l.shadow_scalar("s21")?,
        s31: l.shadow_scalar("s31")?,
        s12: f.shadow_scalar("s12")?,
        s22: f.shadow_scalar("s22")?,
        s32: f.shadow_scalar("s32")?,
        s13: l.shadow_scalar("s13")?,
        s23: f.shadow_scalar("s23")?,
    })
}

/// One honest toy run checked along both reconstruction paths. Returns a failure
/// description, or `None` when every identity holds.
fn two_path_run(cfg: &RunConfig) -> anyhow::Result<Option<String>> {
    let env = setup::toy_env(cfg)?;
    let grp = env.grp.clone();
    let sid = format!("sid-two-path-{}", cfg.seed);
    let script = ScenarioScript {
        install: false,
        ..ScenarioScript::with_sid(&sid)
    };
    let mut run = execute(&env, cfg, &script);
    let BaseOutcome::Accepted { k: big_k } = run.outcome else {
        return Ok(Some(format!("outcome {:?}", run.outcome)));
    };
    let Some(t) = sigma_table(&run) else {
        return Ok(Some("sigma table unavailable".into()));
    };
    let x1 = t.s11 + t.s21 + t.s31;
    let x2 = t.s12 + t.s22 + t.s32;
    let k = grp.scalar(3) * x1 - grp.scalar(2) * x2;
    let d = derive_all_shares_oracle(&grp, &t);
    run.install = Some(install_base_shares(&mut run.leader, &mut run.leaf));
    let sid_b = sid.as_bytes();
    let k12 = run.leader.keybox_mut().get_pub(&SlotId::new(sid_b, tag::K12));
    let k2 = run.leaf.keybox_mut().get_pub(&SlotId::new(sid_b, tag::K2));
    let k13 = run.leader.keybox_mut().get_pub(&SlotId::new(sid_b, tag::K13));
    let mut rdr = Rdr::new(run).map_err(|e| anyhow::anyhow!("{e}"))?;
    let j = PartyId::indexed(3);
    let reg = rdr.register(&j, &PartyId::indexed(2), RegAdversary::Honest, &mut FifoScheduler, &mut setup::rng(cfg.seed));
    let k3 = rdr
        .base
        .devices
        .get_mut(&j)
        .and_then(|dev| dev.keybox_mut().get_pub(&SlotId::new(sid_b, tag::K3)));
    let g = |s| grp.mul_base(&s);
    let checks = [
        ("k12 + k2 = 3x1 - 2x2", d.k12 + d.k2 == k),
        ("k13 + k3 = 3x1 - 2x2", d.k13 + d.k3 == k),
        ("K = kG", big_k == g(k)),
        ("registration", reg.is_ok()),
        ("GetPub(k12) = k12 G", k12 == Some(g(d.k12))),
        ("GetPub(k2) = k2 G", k2 == Some(g(d.k2))),
        ("GetPub(k13) = k13 G", k13 == Some(g(d.k13))),
        ("GetPub(k3) = k3 G", k3 == Some(g(d.k3))),
        ("K13 + k3 G = K", k13.zip(k3).is_some_and(|(a, b)| a + b == big_k)),
    ];
    Ok(checks.iter().find(|c| !c.1).map(|c| c.0.to_string()))
}

pub fn two_path() -> anyhow::Result<(RunReport, String)> {
    let cfg = toy_small(seeds::TWO_PATH);
    let grp = setup::toy_group(cfg.profile.params())?;
    let mut rep = RunReport::new("two-path", &grp, cfg.profile.params(), &cfg);
    let mut bad = Vec::new();
    for i in 0..TWO_PATH_RUNS as u64 {
        let c = cfg.with_seed(cfg.seed.wrapping_add(i));
        if let Some(f) = two_path_run(&c)? {
            bad.push(format!("seed {}: {f}", c.seed));
        }
    }
    let ok = TWO_PATH_RUNS - bad.len();
    rep.check(
        "all identities hold in every run",
        bad.is_empty(),
        bad.iter().take(3).cloned().collect::<Vec<_>>().join("; "),
    );
    Ok((rep, format!("{ok}/{TWO_PATH_RUNS} runs consistent on Z_{}", grp.modulus())))
}

/// Sweeps one programmed σ over every value of Z_101 with all other randomness fixed.
fn sweep(cfg: &RunConfig, which: &str) -> anyhow::Result<(usize, bool, bool)> {
    let mut ks = BTreeSet::new();
    let mut expected_ok = true;
    let mut others: BTreeSet<Vec<u64>> = BTreeSet::new();
    let grp = ToyGroup::setup(101, setup::TOY_TRAPDOOR)?;
    for v in 0..grp.modulus() {
        let env = setup::env(grp.clone(), cfg)?;
        let mut bc = ScenarioScript::with_sid("sid-bijection").base_config();
        bc.install = false;
        let programmed = grp.scalar(v);
        match which {
            "s31" => bc.programmed.s31 = Some(programmed),
            _ => bc.programmed.s32 = Some(programmed),
        }
        let kbs = setup::keyboxes(&env, 3, KeyBoxConfig::default(), cfg.seed);
        let run = run_base(&env, &bc, kbs, &mut FifoScheduler, &mut setup::rng(cfg.seed));
        let BaseOutcome::Accepted { k } = run.outcome else {
            anyhow::bail!("{which} = {v}: {:?}", run.outcome);
        };
        let t = sigma_table(&run).ok_or_else(|| anyhow::anyhow!("sigma table unavailable"))?;
        let x1 = t.s11 + t.s21 + t.s31;
        let x2 = t.s12 + t.s22 + t.s32;
        expected_ok &= grp.mul_base(&(grp.scalar(3) * x1 - grp.scalar(2) * x2)) == k;
        expected_ok &= if which == "s31" { t.s31 == programmed } else { t.s32 == programmed };
        let rest: Vec<u64> = [t.s11, t.s21, t.s12, t.s22]
            .into_iter()
            .chain(std::iter::once(if which == "s31" { t.s32 } else { t.s31 }))
            .map(|s| s.value())
            .collect();
        others.insert(rest);
        ks.insert(k.value());
    }
    Ok((ks.len(), expected_ok, others.len() == 1))
}

pub fn bijection() -> anyhow::Result<(RunReport, String)> {
    let cfg = RunConfig::new(GroupMode::Toy, ProfileMode::Small, OracleChoice::Ideal, seeds::BIJECTION);
    let grp = ToyGroup::setup(101, setup::TOY_TRAPDOOR)?;
    let mut rep = RunReport::new("bijection", &grp, cfg.profile.params(), &cfg);
    let mut detail = Vec::new();
    for which in ["s31", "s32"] {
        let (n, formula, fixed) = sweep(&cfg, which)?;
        rep.check(&format!("{which}: 101 distinct K"), n == 101, n.to_string());
        rep.check(&format!("{which}: K = (3 x1 - 2 x2) G"), formula, "");
        rep.check(&format!("{which}: other contributions fixed"), fixed, "");
        detail.push(format!("{which}: {n} distinct K"));
    }
    Ok((rep, detail.join(", ")))
}

pub fn tamper_matrix(scan: &mut LeakScanner) -> anyhow::Result<(RunReport, String)> {
    let cfg = production(seeds::TAMPER);
    let env = setup::production_env(&cfg)?;
    let rep = tamper::run_matrix(&env, &cfg, Some(scan));
    let d = failures(&rep);
    Ok((rep, d))
}

pub fn linos_negatives(scan: &mut LeakScanner) -> anyhow::Result<(RunReport, String)> {
    let cfg = production(seeds::LINOS);
    let env = setup::production_env(&cfg)?;
    let rep = linos::run_linos(&env, &cfg, Some(scan))?;
    let d = failures(&rep);
    Ok((rep, d))
}

pub fn registration(scan: &mut LeakScanner) -> anyhow::Result<(RunReport, String)> {
    let cfg = production(seeds::REGISTRATION);
    let env = setup::production_env(&cfg)?;
    let rep = run_registration(&env, &cfg, REGISTRATION_JOINERS, true, &ADVERSARIES, Some(scan))?;
    let d = failures(&rep);
    Ok((rep, d))
}

pub fn equivocation() -> anyhow::Result<(RunReport, String)> {
    let cfg = toy_small(seeds::EQUIVOCATION);
    let env = setup::toy_trapdoor_env(&cfg)?;
    let mut rep = run_demo(&env, &cfg, EQUIVOCATION_TRIALS)?;
    let prod = setup::production_env(&production(seeds::EQUIVOCATION))?;
    let refused = refuse(&prod);
    rep.check("production group refuses the demo", matches!(refused, crate::scenario::equivocation::DemoError::TrapdoorUnavailable), "");
    let hidden = setup::toy_env(&cfg)?;
    let hidden_refused = crate::scenario::equivocation::trial(&hidden, &stardkg::oracle::CallerId::new("f"), &mut setup::rng(1)).is_err();
    rep.check("unexposed toy trapdoor refuses the demo", hidden_refused, "");
    let d = format!("{} of {EQUIVOCATION_TRIALS} recovered", rep.data.get("recovered").cloned().unwrap_or_default());
    Ok((rep, d))
}

pub fn oracle_contract() -> anyhow::Result<(RunReport, String)> {
    let rep = run_oracle_contract(&production(seeds::ORACLE), ISOLATION_INPUTS)?;
    let d = failures(&rep);
    Ok((rep, d))
}

/// Beacon runs whose surfaces join the global scan.
pub fn beacon_surfaces(scan: &mut LeakScanner) -> anyhow::Result<Vec<RunReport>> {
    let cfg = production(seeds::BEACON);
    let env = setup::production_env(&cfg)?;
    let mut out = Vec::new();
    for actions in [vec![], vec![BeaconAction::Withhold(2)], vec![BeaconAction::Recommit(1)]] {
        out.push(run_beacon(&env, &cfg, 3, &actions, Some(&mut *scan))?);
    }
    Ok(out)
}

type Outcome12 = anyhow::Result<(RunReport, String)>;

fn run_one(id: u8, scan: &mut LeakScanner) -> Outcome12 {
    match id {
        1 => sizes(scan),
        2 => bounds(),
        3 => rarity(),
        4 => extraction(),
        5 => two_path(),
        6 => bijection(),
        7 => tamper_matrix(scan),
        8 => linos_negatives(scan),
        9 => registration(scan),
        10 => equivocation(),
        11 => oracle_contract(),
        _ => anyhow::bail!("criterion {id} is not standalone"),
    }
}

fn timed(id: u8) -> (CriterionResult, LeakScanner) {
    let mut scan = LeakScanner::new();
    let t0 = Instant::now();
    let res = run_one(id, &mut scan);
    let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;
    let name = CRITERIA[id as usize - 1].1.to_string();
    let r = match res {
        Ok((rep, detail)) => CriterionResult {
            id,
            name,
            passed: rep.passed(),
            detail,
            elapsed_ms,
            report: Some(rep),
        },
        Err(e) => CriterionResult {
            id,
            name,
            passed: false,
            detail: format!("error: {e:#}"),
            elapsed_ms,
            report: None,
        },
    };
    (r, scan)
}

/// Runs criteria 1 to 11, then the merged no-export scan. With `parallel`, the
/// independent criteria run concurrently; results are identical either way.
pub fn run_all(parallel: bool) -> Suite {
    let ids: Vec<u8> = (1..=11).collect();
    let parts: Vec<(CriterionResult, LeakScanner)> = if parallel {
        ids.par_iter().map(|&i| timed(i)).collect()
    } else {
        ids.iter().map(|&i| timed(i)).collect()
    };
    let mut scan = LeakScanner::new();
    let mut criteria = Vec::new();
    for (c, s) in parts {
        scan.absorb(s);
        criteria.push(c);
    }
    let t0 = Instant::now();
    let beacon = beacon_surfaces(&mut scan);
    for c in &criteria {
        if let Some(r) = &c.report {
            scan.add_json(format!("acceptance/criterion-{}", c.id), r);
        }
    }
    let summary = scan.scan();
    let mut rep = RunReport::new("no-export-scan", &setup::production_group(), FischlinParams::PRODUCTION, &production(0));
    let beacon_ok = match &beacon {
        Ok(rs) => rep.check("beacon runs completed", rs.iter().all(RunReport::passed), format!("{} runs", rs.len())),
        Err(e) => rep.check("beacon runs completed", false, format!("{e:#}")),
    };
    rep.check("no resident scalar in any surface", summary.clean(), format!("{} hits", summary.hits.len()));
    rep.datum("scan", &summary);
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    let detail = format!(
        "{} secrets, {} surfaces, {} bytes, {} hits",
        summary.secrets,
        summary.surfaces,
        summary.bytes_scanned,
        summary.hits.len()
    );
    criteria.push(CriterionResult {
        id: 12,
        name: CRITERIA[11].1.into(),
        passed: summary.clean() && beacon_ok,
        detail,
        elapsed_ms: t0.elapsed().as_secs_f64() * 1e3,
        report: Some(rep),
    });
    Suite { criteria, scan: summary }
}

/// Flattened check list of a suite, for the JSON report.
pub fn all_checks(s: &Suite) -> Vec<(u8, CheckResult)> {
    s.criteria
        .iter()
        .flat_map(|c| c.report.iter().flat_map(move |r| r.checks.iter().map(move |k| (c.id, k.clone()))))
        .collect()
}
