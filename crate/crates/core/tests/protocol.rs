use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use stardkg::algebra::{Group, ToyGroup};
use stardkg::fischlin::FischlinParams;
use stardkg::keybox::{provision, tag, KeyBox, KeyBoxConfig, SlotId};
use stardkg::oracle::{CallerId, Oracle, OracleMode};
use stardkg::sdkg::{
    acc_sdkg_check, derive_all_shares_oracle, run_base, BaseConfig, BaseOutcome, BaseRun, Check, Env, FreshnessGuard,
    LeaderFault, LeafFault, Phase, Rdr, RegAdversary, RegError, SigmaTable,
};
use stardkg::transport::{FifoScheduler, PartyId, RandomScheduler, ScriptStep, ScriptedScheduler};

fn toy_env(seed: u64) -> Env<ToyGroup> {
    let grp = ToyGroup::setup(101, 7).unwrap();
    Env::new(grp, Arc::new(Oracle::new(OracleMode::Ideal, seed)), FischlinParams::SMALL).unwrap()
}

fn boxes(env: &Env<ToyGroup>, n: usize, seed: u64) -> BTreeMap<PartyId, KeyBox<ToyGroup>> {
    let parties: Vec<_> = (1..=n).map(PartyId::indexed).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    provision(&parties, &env.grp, &env.oracle, env.params, KeyBoxConfig::default(), &mut rng)
}

fn base(env: &Env<ToyGroup>, cfg: &BaseConfig<<ToyGroup as Group>::Scalar>, n: usize, seed: u64) -> BaseRun<ToyGroup> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    run_base(env, cfg, boxes(env, n, seed), &mut FifoScheduler, &mut rng)
}

#[test]
fn honest_runs_reconstruct_consistently() {
    let env = toy_env(1);
    for seed in 0..40 {
        let mut cfg = BaseConfig::new(format!("sid-{seed}").as_bytes());
        cfg.install = false;
        let run = base(&env, &cfg, 3, seed);
        let BaseOutcome::Accepted { k } = run.outcome else {
            panic!("seed {seed}: {:?}", run.outcome)
        };
        let (l, f) = (&run.leader, &run.leaf);
        let t = SigmaTable {
            s11: l.shadow_scalar("s11").unwrap(),
            s21: l.shadow_scalar("s21").unwrap(),
            s31: l.shadow_scalar("s31").unwrap(),
            s12: f.shadow_scalar("s12").unwrap(),
            s22: f.shadow_scalar("s22").unwrap(),
            s32: f.shadow_scalar("s32").unwrap(),
            s13: l.shadow_scalar("s13").unwrap(),
            s23: f.shadow_scalar("s23").unwrap(),
        };
        let d = derive_all_shares_oracle(&env.grp, &t);
        assert_eq!(d.k12 + d.k2, d.k);
        assert_eq!(d.k13 + d.k3, d.k);
        assert_eq!(d.big_k, k);
        assert_eq!(f.public_key(), Some(k));
        assert_eq!(l.k13(), Some(d.big_k13));
        assert_eq!(run.devices[&PartyId::indexed(3)].public_key(), Some(k));
        let tr = l.transcript().unwrap();
        // D2 = σ32·G by construction
        let m2 = env.grp.mul_base(&t.s21) - tr.t1.b2 * env.grp.scalar(2);
        let d2 = tr.t3.x2 - env.grp.mul_base(&tr.t2.s12) - m2 - tr.t1.b2 * env.grp.scalar(3);
        assert_eq!(d2, env.grp.mul_base(&t.s32));
    }
}

#[test]
fn install_erases_and_public_keys_add_up() {
    let env = toy_env(2);
    let mut run = base(&env, &BaseConfig::new(b"sid"), 3, 7);
    assert!(run.installed(), "{:?}", run.install);
    let k = run.leader.public_key().unwrap();
    assert!(run.leader.host_state().retained.is_empty());
    assert!(run.leaf.host_state().retained.is_empty());
    let k12 = run.leader.keybox_mut().get_pub(&SlotId::new(b"sid", tag::K12)).unwrap();
    let k2 = run.leaf.keybox_mut().get_pub(&SlotId::new(b"sid", tag::K2)).unwrap();
    assert_eq!(k12 + k2, k);
    let k13 = run.leader.keybox_mut().get_pub(&SlotId::new(b"sid", tag::K13)).unwrap();
    assert_eq!(Some(k13), run.leader.k13());
    let snap = run.leader.keybox().corrupt_snapshot();
    let tags: Vec<_> = snap.slots.iter().map(|s| s.tag.as_str()).collect();
    assert_eq!(tags.len(), 3);
    for t in [tag::K12, tag::K13, tag::K31] {
        assert!(tags.contains(&t));
    }
}

#[test]
fn random_scheduler_still_accepts() {
    let env = toy_env(3);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let run = run_base(&env, &BaseConfig::new(b"r"), boxes(&env, 4, 5), &mut RandomScheduler::new(9), &mut rng);
    assert!(run.installed());
}

#[test]
fn withheld_round_two_stalls() {
    let env = toy_env(4);
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut sched = ScriptedScheduler::new([ScriptStep::Withhold(PartyId::indexed(1))]);
    let run = run_base(&env, &BaseConfig::new(b"w"), boxes(&env, 3, 5), &mut sched, &mut rng);
    assert_eq!(run.outcome, BaseOutcome::Stalled);
    assert_eq!(run.leaf.phase(), Phase::AwaitR2);
    assert!(run.install.is_none());
}

fn leaf_fault_cfg(f: LeafFault, lenient: bool) -> BaseConfig<<ToyGroup as Group>::Scalar> {
    let mut cfg = BaseConfig::new(b"tamper");
    cfg.leaf_fault = Some(f);
    cfg.lenient_leader = lenient;
    cfg.install = false;
    cfg
}

#[test]
fn tamper_matrix_single_check() {
    let env = toy_env(5);
    let verifier = CallerId::new("acc");
    let (p1, p2) = (PartyId::indexed(1), PartyId::indexed(2));
    let honest = {
        let mut cfg = BaseConfig::new(b"tamper");
        cfg.install = false;
        base(&env, &cfg, 3, 11)
    };
    let t = honest.leader.transcript().unwrap();
    assert_eq!(acc_sdkg_check(&env, &verifier, b"tamper", &p2, &p1, &t), Ok(()));
    let cases = [
        (LeafFault::FlipReceipt, Check::C1),
        (LeafFault::PerturbS21, Check::C2),
        (LeafFault::PerturbProofY2, Check::C4),
        (LeafFault::WrongH32Point, Check::C5),
        (LeafFault::ShiftKrec, Check::C6),
    ];
    for (fault, check) in cases {
        let fixture = base(&env, &leaf_fault_cfg(fault, true), 3, 11);
        let tr = fixture.leader.transcript().unwrap_or_else(|| panic!("{fault:?}"));
        assert_eq!(acc_sdkg_check(&env, &verifier, b"tamper", &p2, &p1, &tr), Err(check), "{fault:?}");
        let live = base(&env, &leaf_fault_cfg(fault, false), 3, 11);
        assert_eq!(live.outcome, BaseOutcome::Aborted { party: 1, check }, "{fault:?}");
    }
    let mut cfg = BaseConfig::new(b"tamper");
    cfg.leader_fault = Some(LeaderFault::PerturbProofY1);
    cfg.lenient_leaf = true;
    cfg.install = false;
    let tr = base(&env, &cfg, 3, 11).leader.transcript().unwrap();
    assert_eq!(acc_sdkg_check(&env, &verifier, b"tamper", &p2, &p1, &tr), Err(Check::C3));
    cfg.lenient_leaf = false;
    cfg.guard = FreshnessGuard::default();
    assert_eq!(base(&env, &cfg, 3, 11).outcome, BaseOutcome::Aborted { party: 2, check: Check::C3 });
}

#[test]
fn nu_minus_one_aborts() {
    let env = toy_env(6);
    let run = base(&env, &leaf_fault_cfg(LeafFault::NuMinusOne, false), 3, 3);
    assert!(matches!(run.outcome, BaseOutcome::Aborted { party: 1, .. }));
}

#[test]
fn replayed_cid_is_rejected() {
    let env = toy_env(7);
    let guard = FreshnessGuard::default();
    let mut cfg = BaseConfig::new(b"fresh");
    cfg.guard = guard.clone();
    assert!(base(&env, &cfg, 3, 1).accepted());
    assert_eq!(base(&env, &cfg, 3, 2).outcome, BaseOutcome::Aborted { party: 1, check: Check::Freshness });
}

#[test]
fn latent_uniformity_bijection() {
    let env = toy_env(8);
    let sweep = |which: u8| {
        let mut ks = std::collections::BTreeSet::new();
        for v in 0..101u64 {
            let mut cfg = BaseConfig::new(b"bij");
            cfg.install = false;
            if which == 1 {
                cfg.programmed.s31 = Some(env.grp.scalar(v));
            } else {
                cfg.programmed.s32 = Some(env.grp.scalar(v));
            }
            let run = base(&env, &cfg, 3, 42);
            let BaseOutcome::Accepted { k } = run.outcome else { panic!() };
            ks.insert(k.value());
        }
        ks.len()
    };
    assert_eq!(sweep(1), 101);
    assert_eq!(sweep(2), 101);
}

fn rdr(env: &Env<ToyGroup>, n: usize, seed: u64) -> Rdr<ToyGroup> {
    let run = base(env, &BaseConfig::new(b"reg"), n, seed);
    Rdr::new(run).unwrap()
}

#[test]
fn chained_registration() {
    let env = toy_env(9);
    let mut r = rdr(&env, 6, 4);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let k = r.base.leader.public_key().unwrap();
    let k13 = r.base.leader.k13().unwrap();
    let mut sponsor = PartyId::indexed(2);
    for i in 3..=6 {
        let j = PartyId::indexed(i);
        r.register(&j, &sponsor, RegAdversary::Honest, &mut FifoScheduler, &mut rng).unwrap();
        let k3 = r.base.devices.get_mut(&j).unwrap().keybox_mut().get_pub(&SlotId::new(b"reg", tag::K3)).unwrap();
        assert_eq!(k13 + k3, k);
        sponsor = j;
    }
    assert_eq!(
        r.register(&PartyId::indexed(4), &PartyId::indexed(2), RegAdversary::Honest, &mut FifoScheduler, &mut rng),
        Err(RegError::AlreadyRegistered)
    );
}

#[test]
fn adversarial_registration_leaves_joiner_unchanged() {
    let env = toy_env(10);
    for adv in [
        RegAdversary::AdMismatch,
        RegAdversary::WrongScalar,
        RegAdversary::KMismatch,
        RegAdversary::K13Mismatch,
    ] {
        let mut r = rdr(&env, 3, 4);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let j = PartyId::indexed(3);
        let before = r.base.devices[&j].keybox().corrupt_snapshot();
        let res = r.register(&j, &PartyId::indexed(2), adv, &mut FifoScheduler, &mut rng);
        let expected = match adv {
            RegAdversary::KMismatch => RegError::KMismatch,
            RegAdversary::K13Mismatch => RegError::K13Mismatch,
            _ => RegError::Install,
        };
        assert_eq!(res, Err(expected), "{adv:?}");
        let after = r.base.devices[&j].keybox().corrupt_snapshot();
        assert_eq!(before.slots, after.slots);
        assert_eq!(before.buffered_handles, after.buffered_handles);
        // a later honest attempt still succeeds
        r.register(&j, &PartyId::indexed(2), RegAdversary::Honest, &mut FifoScheduler, &mut rng).unwrap();
    }
}

#[test]
fn unregistered_sponsor_is_refused() {
    let env = toy_env(11);
    let mut r = rdr(&env, 4, 4);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    assert_eq!(
        r.register(&PartyId::indexed(4), &PartyId::indexed(3), RegAdversary::Honest, &mut FifoScheduler, &mut rng),
        Err(RegError::SponsorNotEligible)
    );
}
