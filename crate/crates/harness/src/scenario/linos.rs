//! One-shot prover negatives and the state-continuity failure mode.
//!
//! With the rollback knob set, restoring a checkpoint taken before `FS.Start` replays the
//! KeyBox randomness, so a second session reuses the first-move nonces. Two proofs over
//! different statements then share commitments and reveal the share by special
//! soundness.

use stardkg::algebra::Group;
use stardkg::keybox::{fs_verify, tag, KeyBoxError, SlotId};
use stardkg::oracle::CallerId;
use stardkg::sdkg::Env;
use stardkg::codec::encode;
use stardkg::fischlin::proof_value;
use stardkg::sigma::{special_soundness, Schnorr};

use super::base::{execute, feed_scanner, report, ScenarioScript};
use crate::report::{Outcome, RunReport};
use crate::scan::LeakScanner;
use crate::setup::RunConfig;

pub fn run_linos<G: Group>(env: &Env<G>, cfg: &RunConfig, mut scan: Option<&mut LeakScanner>) -> anyhow::Result<RunReport> {
    let grp = &env.grp;
    let verifier = CallerId::new("linos-verifier");
    let mut rep = RunReport::new("linos", grp, env.params, cfg);

    // Guarded KeyBox.
    let script = ScenarioScript::with_sid("sid-linos");
    let mut run = execute(env, cfg, &script);
    anyhow::ensure!(run.installed(), "base run did not install: {:?}", run.outcome);
    let slot = SlotId::new(&run.sid, tag::K2);
    let kb = run.leaf.keybox_mut();
    let big_k = kb.get_pub(&slot).expect("k2 installed");
    let cp = kb.checkpoint();
    let (h, _) = kb.fs_start(&slot, b"linos-A", &big_k).expect("FS.Start");
    let first = kb.fs_prove(&slot, &h);
    let verified = first
        .as_ref()
        .is_some_and(|p| fs_verify(grp, &env.oracle, env.params, &verifier, b"linos-A", &big_k, p));
    rep.check("first FS.Prove verifies", verified, "");
    rep.check("second FS.Prove returns bottom", kb.fs_prove(&slot, &h).is_none(), "");
    rep.check("FS.Start with a wrong K refused", kb.fs_start(&slot, b"linos-A", &(big_k + grp.generator())).is_none(), "");
    let restored = kb.restore(cp);
    rep.check(
        "rollback rejected by epoch guard",
        matches!(restored, Err(KeyBoxError::Rollback { .. })),
        format!("{restored:?}"),
    );
    if let Some(s) = scan.as_deref_mut() {
        if let Some(p) = &first {
            s.add_bytes("linos/proof", encode(&proof_value::<G, Schnorr>(grp, &env.params, p)));
        }
        let r = report("linos/guarded", &mut run, cfg, &script);
        feed_scanner(s, "linos/guarded", &mut run, &r);
    }
    drop(run);

    // Broken state continuity.
    let script = ScenarioScript {
        allow_rollback: true,
        ..ScenarioScript::with_sid("sid-linos-knob")
    };
    let mut run = execute(env, cfg, &script);
    anyhow::ensure!(run.installed(), "base run did not install: {:?}", run.outcome);
    let slot = SlotId::new(&run.sid, tag::K2);
    let kb = run.leaf.keybox_mut();
    let big_k = kb.get_pub(&slot).expect("k2 installed");
    let cp = kb.checkpoint();
    let (ha, aa) = kb.fs_start(&slot, b"linos-A", &big_k).expect("FS.Start");
    let pa = kb.fs_prove(&slot, &ha).expect("first proof");
    let restored = kb.restore(cp);
    rep.check("restore accepted with the knob set", restored.is_ok(), format!("{restored:?}"));
    let (hb, ab) = kb.fs_start(&slot, b"linos-B", &big_k).expect("FS.Start");
    let pb = kb.fs_prove(&slot, &hb).expect("second proof");
    rep.check("replayed first moves", aa == ab, "");

    let recovered = pa
        .triples
        .iter()
        .zip(&pb.triples)
        .find(|(x, y)| x.commitment == y.commitment && x.challenge != y.challenge)
        .and_then(|(x, y)| special_soundness(grp, (x.challenge, x.response), (y.challenge, y.response)));
    let matches_pub = recovered.is_some_and(|k| grp.mul_base(&k) == big_k);
    let resident = kb.audit_resident_encodings();
    let matches_slot = recovered.is_some_and(|k| resident.contains(&grp.scalar_to_bytes(&k)));
    rep.check("share recovered via (z - z')/(e - e')", matches_pub && matches_slot, "");
    rep.datum("rollback_recovered", recovered.is_some());
    if let Some(s) = scan {
        for (n, p) in [("A", &pa), ("B", &pb)] {
            s.add_bytes(
                format!("linos/knob/proof{n}"),
                encode(&proof_value::<G, Schnorr>(grp, &env.params, p)),
            );
        }
        let r = report("linos/knob", &mut run, cfg, &script);
        feed_scanner(s, "linos/knob", &mut run, &r);
    }
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    Ok(rep)
}
