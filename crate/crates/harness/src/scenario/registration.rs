use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::keybox::{tag, SlotId};
use stardkg::sdkg::{Env, Rdr, RegAdversary, RegError};
use stardkg::transport::{FifoScheduler, PartyId};

use super::base::{execute, feed_scanner, report, ScenarioScript};
use crate::report::{Outcome, RunReport};
use crate::scan::LeakScanner;
use crate::setup::{rng, RunConfig};

pub const ADVERSARIES: [RegAdversary; 4] = [
    RegAdversary::AdMismatch,
    RegAdversary::WrongScalar,
    RegAdversary::KMismatch,
    RegAdversary::K13Mismatch,
];

fn expected_error(a: RegAdversary) -> Option<RegError> {
    match a {
        RegAdversary::Honest => None,
        RegAdversary::KMismatch => Some(RegError::KMismatch),
        RegAdversary::K13Mismatch => Some(RegError::K13Mismatch),
        RegAdversary::AdMismatch | RegAdversary::WrongScalar => Some(RegError::Install),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversaryRow {
    pub adversary: RegAdversary,
    pub result: Result<(), RegError>,
    pub joiner_unchanged: bool,
    pub honest_retry: Result<(), RegError>,
    pub passed: bool,
}

fn base<G: Group>(env: &Env<G>, cfg: &RunConfig, sid: &str, parties: usize) -> anyhow::Result<Rdr<G>> {
    let mut s = ScenarioScript::with_sid(sid);
    s.parties = parties;
    Rdr::new(execute(env, cfg, &s)).map_err(|e| anyhow::anyhow!("base run for registration: {e}"))
}

fn scan_rdr<G: Group>(scan: &mut LeakScanner, label: &str, r: &mut Rdr<G>, cfg: &RunConfig) {
    let script = ScenarioScript::default();
    let rep = report(label, &mut r.base, cfg, &script);
    feed_scanner(scan, label, &mut r.base, &rep);
}

/// Honest registration of `joiners` devices, chained (each sponsored by the previous
/// one) or star-shaped (all sponsored by `P2`), followed by each adversarial variant
/// against a fresh base run.
pub fn run_registration<G: Group>(
    env: &Env<G>,
    cfg: &RunConfig,
    joiners: usize,
    chain: bool,
    adversaries: &[RegAdversary],
    mut scan: Option<&mut LeakScanner>,
) -> anyhow::Result<RunReport> {
    let grp = &env.grp;
    let mut rep = RunReport::new("register", grp, env.params, cfg);
    let mut r = rng(cfg.seed ^ 0x0072_6567);
    let sid = "sid-register";
    let mut rdr = base(env, cfg, sid, joiners + 2)?;
    let k = rdr.base.leader.public_key().expect("installed");
    let k13 = rdr.base.leader.k13().expect("installed");

    if joiners >= 2 {
        let res = rdr.register(&PartyId::indexed(3), &PartyId::indexed(4), RegAdversary::Honest, &mut FifoScheduler, &mut r);
        rep.check("unregistered sponsor refused", res == Err(RegError::SponsorNotEligible), format!("{res:?}"));
    }
    let mut sponsor = PartyId::indexed(2);
    let mut k3s = Vec::new();
    for i in 3..joiners + 3 {
        let j = PartyId::indexed(i);
        let res = rdr.register(&j, &sponsor, RegAdversary::Honest, &mut FifoScheduler, &mut r);
        rep.check(&format!("{} registered via {}", j.as_str(), sponsor.as_str()), res.is_ok(), format!("{res:?}"));
        let dev = rdr.base.devices.get_mut(&j).expect("provisioned");
        let k3 = dev.keybox_mut().get_pub(&SlotId::new(sid.as_bytes(), tag::K3));
        rep.check(
            &format!("{}: K13 + k3·G = K", j.as_str()),
            k3.is_some_and(|k3| k13 + k3 == k),
            "",
        );
        k3s.extend(k3);
        if chain {
            sponsor = j;
        }
    }
    rep.check(
        "identical k3 across joiners",
        k3s.len() == joiners && k3s.windows(2).all(|w| w[0] == w[1]),
        format!("{} shares", k3s.len()),
    );
    if joiners >= 1 {
        let res = rdr.register(&PartyId::indexed(3), &PartyId::indexed(2), RegAdversary::Honest, &mut FifoScheduler, &mut r);
        rep.check("duplicate registration refused", res == Err(RegError::AlreadyRegistered), format!("{res:?}"));
    }
    let registered: Vec<PartyId> = rdr.registered().iter().cloned().collect();
    if let Some(s) = scan.as_deref_mut() {
        scan_rdr(s, "register/honest", &mut rdr, cfg);
    }
    drop(rdr);

    let mut rows = Vec::new();
    for (n, &adv) in adversaries.iter().enumerate() {
        let sid = format!("sid-register-adv{n}");
        let mut rdr = base(env, cfg, &sid, 3)?;
        let j = PartyId::indexed(3);
        let before = rdr.base.devices[&j].keybox().corrupt_snapshot();
        let before_res = rdr.base.devices[&j].keybox().audit_resident_encodings();
        let result = rdr.register(&j, &PartyId::indexed(2), adv, &mut FifoScheduler, &mut r);
        let after = rdr.base.devices[&j].keybox().corrupt_snapshot();
        let unchanged = before.slots == after.slots
            && before.buffered_handles == after.buffered_handles
            && before_res == rdr.base.devices[&j].keybox().audit_resident_encodings();
        let honest_retry = rdr.register(&j, &PartyId::indexed(2), RegAdversary::Honest, &mut FifoScheduler, &mut r);
        let passed = result.err() == expected_error(adv) && unchanged && honest_retry.is_ok();
        rep.check(&format!("{adv:?} aborts, joiner unchanged"), passed, format!("{result:?}"));
        if let Some(s) = scan.as_deref_mut() {
            scan_rdr(s, &format!("register/{adv:?}"), &mut rdr, cfg);
        }
        rows.push(AdversaryRow {
            adversary: adv,
            result,
            joiner_unchanged: unchanged,
            honest_retry,
            passed,
        });
    }
    rep.datum("adversarial", &rows);
    rep.outcome = Outcome {
        registered,
        ..Outcome::status(if rep.passed() { "registered" } else { "failed" })
    };
    Ok(rep)
}
