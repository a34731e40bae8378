//! One mutation per check of the acceptance predicate.
//!
//! Each mutation is run twice. As a fixture, the counterpart is lenient and computes
//! honestly on the mutated input, so the final transcript violates exactly the target
//! check. Live, the counterpart is honest and must abort on that check.

use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::oracle::CallerId;
use stardkg::sdkg::{acc_sdkg_check, BaseOutcome, Check, Env, LeaderFault, LeafFault};

use super::base::{execute, feed_scanner, report, ScenarioScript};
use crate::report::{Outcome, RunReport};
use crate::scan::LeakScanner;
use crate::setup::RunConfig;

#[derive(Debug, Clone, Copy, Serialize)]
pub enum Mutation {
    Leaf(LeafFault),
    Leader(LeaderFault),
}

/// `(target, mutation, party expected to abort)`.
pub const MATRIX: [(Check, Mutation, u8); 6] = [
    (Check::C1, Mutation::Leaf(LeafFault::FlipReceipt), 1),
    (Check::C2, Mutation::Leaf(LeafFault::PerturbS21), 1),
    (Check::C3, Mutation::Leader(LeaderFault::PerturbProofY1), 2),
    (Check::C4, Mutation::Leaf(LeafFault::PerturbProofY2), 1),
    (Check::C5, Mutation::Leaf(LeafFault::WrongH32Point), 1),
    (Check::C6, Mutation::Leaf(LeafFault::ShiftKrec), 1),
];

#[derive(Debug, Clone, Serialize)]
pub struct TamperRow {
    pub target: Check,
    pub mutation: Mutation,
    /// `acc_sdkg` on the fixture transcript.
    pub fixture_acc: bool,
    pub fixture_first_failure: Option<Check>,
    pub live: Outcome,
    pub passed: bool,
}

fn script(sid: &str, m: Mutation, lenient: bool) -> ScenarioScript {
    let mut s = ScenarioScript::with_sid(sid);
    s.install = false;
    match m {
        Mutation::Leaf(f) => {
            s.leaf_fault = Some(f);
            s.lenient_leader = lenient;
        }
        Mutation::Leader(f) => {
            s.leader_fault = Some(f);
            s.lenient_leaf = lenient;
        }
    }
    s
}

pub fn run_matrix<G: Group>(env: &Env<G>, cfg: &RunConfig, mut scan: Option<&mut LeakScanner>) -> RunReport {
    let grp = &env.grp;
    let verifier = CallerId::new("tamper-verifier");
    let mut rep = RunReport::new("tamper", grp, env.params, cfg);

    let clean = ScenarioScript::with_sid("sid-tamper");
    let mut honest = execute(env, cfg, &clean);
    let honest_rep = report("tamper/unmutated", &mut honest, cfg, &clean);
    let t = honest.leader.transcript();
    let (p1, p2) = (honest.leader.id().clone(), honest.leaf.id().clone());
    let acc = t.as_ref().map(|t| acc_sdkg_check(env, &verifier, clean.sid.as_bytes(), &p2, &p1, t));
    rep.check("unmutated fixture accepted", acc == Some(Ok(())), format!("{acc:?}"));
    if let Some(s) = scan.as_deref_mut() {
        feed_scanner(s, "tamper/unmutated", &mut honest, &honest_rep);
    }
    drop(honest);

    let mut rows = Vec::new();
    for (target, mutation, party) in MATRIX {
        let fx = script("sid-tamper", mutation, true);
        let fixture = execute(env, cfg, &fx);
        let first = fixture
            .leader
            .transcript()
            .map(|t| acc_sdkg_check(env, &verifier, fx.sid.as_bytes(), &p2, &p1, &t));
        let live_script = script("sid-tamper", mutation, false);
        let mut live = execute(env, cfg, &live_script);
        let live_out = Outcome::from_base(grp, &live.outcome);
        let live_ok = live.outcome == BaseOutcome::Aborted { party, check: target };
        let fixture_first_failure = first.and_then(|r| r.err());
        let passed = fixture_first_failure == Some(target) && live_ok;
        rep.check(
            &format!("{target:?} violation rejected"),
            passed,
            format!("fixture={fixture_first_failure:?} live={:?}", abort_of(&live.outcome)),
        );
        if let Some(s) = scan.as_deref_mut() {
            let live_rep = report("tamper/live", &mut live, cfg, &live_script);
            feed_scanner(s, &format!("tamper/{target:?}"), &mut live, &live_rep);
        }
        rows.push(TamperRow {
            target,
            mutation,
            fixture_acc: first == Some(Ok(())),
            fixture_first_failure,
            live: live_out,
            passed,
        });
    }
    rep.datum("rows", &rows);
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    rep
}

fn abort_of<E>(o: &BaseOutcome<E>) -> Option<(u8, Check)> {
    match o {
        BaseOutcome::Aborted { party, check } => Some((*party, *check)),
        _ => None,
    }
}
