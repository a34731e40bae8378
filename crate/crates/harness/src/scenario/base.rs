use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::keybox::{tag, KeyBoxConfig, SlotId};
use stardkg::oracle::CallerId;
use stardkg::sdkg::{acc_sdkg_check, acc_sdkg_value, run_base, BaseConfig, BaseRun, Env, LeaderFault, LeafFault};
use stardkg::transport::{FifoScheduler, PartyId, RandomScheduler, Scheduler, ScriptStep, ScriptedScheduler};

use crate::report::{Outcome, ProofSummary, RunReport, Sizes};
use crate::scan::LeakScanner;
use crate::setup::{keyboxes, rng, RunConfig};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerSpec {
    Fifo,
    Random(u64),
    /// Never deliver anything sent by this party.
    Withhold(String),
}

impl SchedulerSpec {
    pub fn build(&self) -> Box<dyn Scheduler> {
        match self {
            SchedulerSpec::Fifo => Box::new(FifoScheduler),
            SchedulerSpec::Random(s) => Box::new(RandomScheduler::new(*s)),
            SchedulerSpec::Withhold(p) => Box::new(ScriptedScheduler::new([ScriptStep::Withhold(PartyId::new(p.as_str()))])),
        }
    }
}

/// Replayable description of one base run.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioScript {
    pub sid: String,
    pub parties: usize,
    pub scheduler: SchedulerSpec,
    pub leaf_fault: Option<LeafFault>,
    pub leader_fault: Option<LeaderFault>,
    pub lenient_leader: bool,
    pub lenient_leaf: bool,
    pub install: bool,
    pub allow_rollback: bool,
}

impl Default for ScenarioScript {
    fn default() -> Self {
        Self {
            sid: "sid-base".into(),
            parties: 3,
            scheduler: SchedulerSpec::Fifo,
            leaf_fault: None,
            leader_fault: None,
            lenient_leader: false,
            lenient_leaf: false,
            install: true,
            allow_rollback: false,
        }
    }
}

impl ScenarioScript {
    pub fn with_sid(sid: &str) -> Self {
        Self {
            sid: sid.into(),
            ..Self::default()
        }
    }

    pub fn base_config<S>(&self) -> BaseConfig<S> {
        let mut c = BaseConfig::new(self.sid.as_bytes());
        c.leaf_fault = self.leaf_fault;
        c.leader_fault = self.leader_fault;
        c.lenient_leader = self.lenient_leader;
        c.lenient_leaf = self.lenient_leaf;
        c.install = self.install;
        c
    }
}

/// Provisions KeyBoxes and runs the protocol under `script`.
pub fn execute<G: Group>(env: &Env<G>, cfg: &RunConfig, script: &ScenarioScript) -> BaseRun<G> {
    let kbc = KeyBoxConfig {
        allow_rollback: script.allow_rollback,
    };
    let kbs = keyboxes(env, script.parties.max(2), kbc, cfg.seed);
    let mut sched = script.scheduler.build();
    run_base(env, &script.base_config(), kbs, sched.as_mut(), &mut rng(cfg.seed))
}

/// Report over a finished run. Performs public post-run checks, which query the
/// installed KeyBoxes.
pub fn report<G: Group>(name: &str, run: &mut BaseRun<G>, cfg: &RunConfig, script: &ScenarioScript) -> RunReport {
    let env = run.env.clone();
    let grp = &env.grp;
    let mut rep = RunReport::new(name, grp, env.params, cfg);
    rep.datum("script", script);
    rep.outcome = Outcome::from_base(grp, &run.outcome);
    let stats: Vec<_> = run.leader.prove_stats().iter().chain(run.leaf.prove_stats()).cloned().collect();
    rep.proofs = ProofSummary::of(&stats);

    let (p1, p2) = (run.leader.id().clone(), run.leaf.id().clone());
    if let Some(t) = run.leader.transcript() {
        rep.sizes = Some(Sizes::of(grp, &env.params, &t));
        let verifier = CallerId::new("public-verifier");
        let acc = acc_sdkg_check(&env, &verifier, &run.sid, &p2, &p1, &t);
        rep.check("acc_sdkg", acc.is_ok() == run.accepted(), format!("{acc:?}"));
        let wire = acc_sdkg_value(&env, &verifier, &run.sid, &p2, &p1, &t.to_value(grp, &env.params));
        rep.check("acc_sdkg wire form agrees", wire == acc, "");
    }
    if let Some(res) = run.install {
        rep.check("installation", res.is_ok(), format!("{res:?}"));
    }
    if run.installed() {
        let k = run.leader.public_key().expect("accepted");
        let sid = run.sid.clone();
        let k12 = run.leader.keybox_mut().get_pub(&SlotId::new(&sid, tag::K12));
        let k13 = run.leader.keybox_mut().get_pub(&SlotId::new(&sid, tag::K13));
        let k2 = run.leaf.keybox_mut().get_pub(&SlotId::new(&sid, tag::K2));
        let sum_ok = matches!((k12, k2), (Some(a), Some(b)) if a + b == k);
        rep.check("GetPub(k12) + GetPub(k2) = K", sum_ok, "");
        rep.check("GetPub(k13) = K13 from transcript", k13.is_some() && k13 == run.leader.k13(), "");
        rep.check("leaf and center agree on K", run.leaf.public_key() == Some(k), "");
        let erased = run.leader.host_state().retained.is_empty() && run.leaf.host_state().retained.is_empty();
        rep.check("host shadow state erased", erased, "");
        let observed = run.devices.values().all(|d| d.public_key() == Some(k));
        rep.check("devices observed K on the broadcast", observed, "");
    }
    rep
}

/// Adds every surface of `run` and `rep` plus all resident secrets.
pub fn feed_scanner<G: Group>(scan: &mut LeakScanner, label: &str, run: &mut BaseRun<G>, rep: &RunReport) {
    scan.add_resident(run.leader.keybox());
    scan.add_resident(run.leaf.keybox());
    for d in run.devices.values() {
        scan.add_resident(d.keybox());
    }
    for (i, w) in run.wire.iter().enumerate() {
        scan.add_bytes(format!("{label}/wire/{i}/{}", w.label), w.bytes.clone());
    }
    scan.add_json(format!("{label}/wire.json"), &run.wire);
    scan.add_json(format!("{label}/adversary-view"), run.net.view());
    scan.add_json(format!("{label}/usv-handles"), &run.table.export(&run.env.grp));
    scan.add_json(format!("{label}/snapshot/P1"), &run.leader.keybox().corrupt_snapshot());
    scan.add_json(format!("{label}/snapshot/P2"), &run.leaf.keybox().corrupt_snapshot());
    for (id, d) in &run.devices {
        scan.add_json(format!("{label}/snapshot/{}", id.as_str()), &d.keybox().corrupt_snapshot());
    }
    // Pre-install shadow state holds σ-values by design; it is erased at installation.
    if run.installed() {
        scan.add_json(format!("{label}/host/P1"), &run.leader.host_state());
        scan.add_json(format!("{label}/host/P2"), &run.leaf.host_state());
        let sid = run.sid.clone();
        for t in [tag::K12, tag::K13, tag::K31] {
            if let Some(e) = run.leader.keybox_mut().get_pub(&SlotId::new(&sid, t)) {
                scan.add_bytes(format!("{label}/getpub/{t}"), run.env.grp.element_to_bytes(&e));
            }
        }
        for t in [tag::K2, tag::K32, tag::K23] {
            if let Some(e) = run.leaf.keybox_mut().get_pub(&SlotId::new(&sid, t)) {
                scan.add_bytes(format!("{label}/getpub/{t}"), run.env.grp.element_to_bytes(&e));
            }
        }
    }
    scan.add_json(format!("{label}/report"), rep);
}

/// One base run end to end.
pub fn run<G: Group>(env: &Env<G>, cfg: &RunConfig, script: &ScenarioScript, scan: Option<&mut LeakScanner>) -> RunReport {
    let mut run = execute(env, cfg, script);
    let rep = report("run-base", &mut run, cfg, script);
    if let Some(s) = scan {
        feed_scanner(s, &format!("base/{}", script.sid), &mut run, &rep);
    }
    rep
}

/// Whether the outcome matches what the script implies: honest scripts must install,
/// withheld schedules must stall.
pub fn expected_ok(rep: &RunReport, script: &ScenarioScript) -> bool {
    let honest = script.leaf_fault.is_none() && script.leader_fault.is_none();
    match (&script.scheduler, honest) {
        (SchedulerSpec::Withhold(_), _) => rep.outcome.status == "stalled",
        (_, true) => rep.outcome.status == "accepted" && rep.passed(),
        (_, false) => rep.outcome.status == "aborted",
    }
}
