//! Party state machines for the base run.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use rand::{CryptoRng, RngCore};
use serde::Serialize;

use crate::algebra::Group;
use crate::codec::Value;
use crate::keybox::{derivation, tag, KeyBox, SlotId};
use crate::oracle::{ctx, CallerId};
use crate::transport::PartyId;
use crate::usv::{receipt_digest, HandleKey, UsvCertificate, UsvHandleTable, PROVE_ATTEMPTS};

use super::{aff1_statement, aff2_statement, derive_k13, h32, Check, Env, Publish, Round1, Round2, Round3, SdkgTranscript};
use crate::fischlin::{AffineStatement, ProveStats};

/// Deviations of a corrupted leaf, each aimed at exactly one acceptance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeafFault {
    /// Flip one bit of the receipt digest `d`.
    FlipReceipt,
    /// Send `σ21 + 1`.
    PerturbS21,
    /// Replace `ν2` by `−1`.
    NuMinusOne,
    /// Perturb one response in `π_Y2`.
    PerturbProofY2,
    /// Commit `h32` over `(σ32 + 1)G`.
    WrongH32Point,
    /// Send `K_rec + G`.
    ShiftKrec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeaderFault {
    /// Perturb one response in `π_Y1`.
    PerturbProofY1,
}

/// Test hook fixing values a party would otherwise sample.
#[derive(Debug, Clone, Copy)]
pub struct Programmed<S> {
    pub m1: Option<S>,
    pub b1: Option<S>,
    pub s31: Option<S>,
    pub s32: Option<S>,
}

impl<S> Default for Programmed<S> {
    fn default() -> Self {
        Self {
            m1: None,
            b1: None,
            s31: None,
            s32: None,
        }
    }
}

/// `(sid, cid2)` pairs already seen by a center; may be shared across sessions.
#[derive(Debug, Clone, Default)]
pub struct FreshnessGuard(Arc<Mutex<BTreeSet<(Vec<u8>, Vec<u8>)>>>);

impl FreshnessGuard {
    /// True iff the pair was unseen; records it either way.
    fn claim(&self, sid: &[u8], cid: &[u8]) -> bool {
        self.0.lock().expect("guard poisoned").insert((sid.to_vec(), cid.to_vec()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Phase {
    Start,
    AwaitR1,
    AwaitR2,
    AwaitR3,
    Sent3,
    Accepted,
    Installed,
    Aborted(Check),
}

/// Serializable host-side state of a party.
#[derive(Debug, Clone, Serialize)]
pub struct HostState {
    pub party: PartyId,
    pub sid: String,
    pub phase: Phase,
    pub retained: BTreeMap<String, String>,
    pub erased: Vec<String>,
}

#[derive(Clone)]
struct Shadow<G: Group> {
    retained: BTreeMap<&'static str, G::Scalar>,
    erased: BTreeSet<&'static str>,
}

impl<G: Group> Shadow<G> {
    fn new() -> Self {
        Self {
            retained: BTreeMap::new(),
            erased: BTreeSet::new(),
        }
    }

    fn retain(&mut self, name: &'static str, s: G::Scalar) {
        self.erased.remove(name);
        self.retained.insert(name, s);
    }

    fn get(&self, name: &str) -> Option<G::Scalar> {
        self.retained.get(name).copied()
    }

    fn erased(&mut self, names: &[&'static str]) {
        for n in names {
            self.retained.remove(n);
            self.erased.insert(n);
        }
    }

    fn erase_all(&mut self) {
        let names: Vec<_> = self.retained.keys().copied().collect();
        self.erased(&names);
    }

    fn dump(&self, grp: &G, party: &PartyId, sid: &[u8], phase: Phase) -> HostState {
        HostState {
            party: party.clone(),
            sid: hex::encode(sid),
            phase,
            retained: self
                .retained
                .iter()
                .map(|(k, v)| (k.to_string(), hex::encode(grp.scalar_to_bytes(v))))
                .collect(),
            erased: self.erased.iter().map(|s| s.to_string()).collect(),
        }
    }
}

fn perturb_first_response<G: Group>(grp: &G, p: &mut crate::fischlin::DlProof<G>) {
    if let Some(t) = p.triples.first_mut() {
        t.response = t.response + grp.one();
    }
}

fn load_all<G: Group>(kb: &mut KeyBox<G>, loads: &[(SlotId, &str, Value)]) -> Result<(), Check> {
    kb.atomically(|kb| {
        for (slot, g, m) in loads {
            kb.load(slot, g, m)?;
        }
        Some(())
    })
    .ok_or(Check::KeyBox)
}

/// The center `P1`.
pub struct Leader<G: Group> {
    env: Env<G>,
    id: PartyId,
    leaf: PartyId,
    sid: Vec<u8>,
    kb: KeyBox<G>,
    caller: CallerId,
    guard: FreshnessGuard,
    pub fault: Option<LeaderFault>,
    /// Colluding mode: skip every check, compute on whatever was received.
    pub lenient: bool,
    pub programmed: Programmed<G::Scalar>,
    shadow: Shadow<G>,
    phase: Phase,
    t1: Option<Round1<G>>,
    t2: Option<Round2<G>>,
    t3: Option<Round3<G>>,
    m2: Option<G::Element>,
    k: Option<G::Element>,
    k13: Option<G::Element>,
    prove_stats: Vec<ProveStats>,
}

impl<G: Group> Leader<G> {
    pub fn new(env: Env<G>, id: PartyId, leaf: PartyId, sid: &[u8], kb: KeyBox<G>, guard: FreshnessGuard) -> Self {
        Self {
            caller: CallerId::new(id.as_str()),
            env,
            id,
            leaf,
            sid: sid.to_vec(),
            kb,
            guard,
            fault: None,
            lenient: false,
            programmed: Programmed::default(),
            shadow: Shadow::new(),
            phase: Phase::AwaitR1,
            t1: None,
            t2: None,
            t3: None,
            m2: None,
            k: None,
            k13: None,
            prove_stats: Vec::new(),
        }
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn caller(&self) -> &CallerId {
        &self.caller
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn keybox(&self) -> &KeyBox<G> {
        &self.kb
    }

    pub fn keybox_mut(&mut self) -> &mut KeyBox<G> {
        &mut self.kb
    }

    pub fn public_key(&self) -> Option<G::Element> {
        self.k
    }

    pub fn k13(&self) -> Option<G::Element> {
        self.k13
    }

    pub fn host_state(&self) -> HostState {
        self.shadow.dump(&self.env.grp, &self.id, &self.sid, self.phase)
    }

    /// Retained σ-value by name (`s11`, `s21`, `s31`, `s13`). Test oracle access.
    pub fn shadow_scalar(&self, name: &str) -> Option<G::Scalar> {
        self.shadow.get(name)
    }

    /// Prover measurements for every proof this party produced.
    pub fn prove_stats(&self) -> &[ProveStats] {
        &self.prove_stats
    }

    pub fn transcript(&self) -> Option<SdkgTranscript<G>> {
        Some(SdkgTranscript {
            t1: self.t1.clone()?,
            t2: self.t2.clone()?,
            t3: self.t3.clone()?,
        })
    }

    fn abort<T>(&mut self, c: Check) -> Result<T, Check> {
        self.phase = Phase::Aborted(c);
        self.shadow.erase_all();
        Err(c)
    }

    fn require(&mut self, ok: bool, c: Check) -> Result<(), Check> {
        if ok || self.lenient {
            Ok(())
        } else {
            self.abort(c)
        }
    }

    pub fn round2<R: RngCore + CryptoRng>(
        &mut self,
        table: &UsvHandleTable<G>,
        r1: Round1<G>,
        rng: &mut R,
    ) -> Result<Round2<G>, Check> {
        if self.phase != Phase::AwaitR1 {
            return self.abort(Check::Freshness);
        }
        let fresh = r1.sid == self.sid && self.guard.claim(&r1.sid, &r1.cid2);
        self.require(fresh, Check::Freshness)?;
        let env = self.env.clone();
        let grp = &env.grp;
        let usv = env.usv();
        let key = HandleKey {
            sid: self.sid.clone(),
            cid: r1.cid2.clone(),
            sender: self.leaf.clone(),
            recipient: self.id.clone(),
        };
        let verified = table.verify(&usv, &self.caller, &key, &r1.c2, &r1.zeta2) == Some(true);
        self.require(verified, Check::UsvVerify)?;
        let Some(m2) = usv.open_m(&self.caller, &r1.c2, &r1.zeta2) else {
            return self.abort(Check::D1);
        };
        let d = receipt_digest(grp, &env.oracle, &self.caller, &key, &r1.c2, Some(&m2));
        self.require(d == Ok(r1.d), Check::C1)?;
        self.require(r1.zeta2.nu != -grp.one(), Check::UsvVerify)?;
        let linkage = grp.mul_base(&r1.s21) - r1.b2 * grp.scalar(2) == m2;
        self.require(linkage, Check::C2)?;

        let m1 = self.programmed.m1.unwrap_or_else(|| grp.random_nonzero_scalar(rng));
        let b1 = self.programmed.b1.unwrap_or_else(|| grp.random_scalar(rng));
        let s31 = self.programmed.s31.unwrap_or_else(|| grp.random_scalar(rng));
        let f1 = |x: u64| m1 + b1 * grp.scalar(x);
        let (s11, s12, s13) = (f1(2), f1(3), f1(1));
        let (big_m1, big_b1) = (grp.mul_base(&m1), grp.mul_base(&b1));
        self.shadow.erased(&["m1", "b1", "f1"]);
        let x1 = grp.mul_base(&s11) + grp.mul_base(&r1.s21) + grp.mul_base(&s31);
        let stmt = AffineStatement::new(&self.sid, super::AFF1, x1, grp.scalar(2), big_m1, big_b1, grp.mul_base(&r1.s21));
        let mut aff1 = match env.fs().prove_affine_with_stats(&self.caller, ctx::UC, &stmt, &s11, &s31, rng, PROVE_ATTEMPTS) {
            Ok((p, st)) => {
                self.prove_stats.extend(st);
                p
            }
            Err(_) => return self.abort(Check::Prove),
        };
        if self.fault == Some(LeaderFault::PerturbProofY1) {
            perturb_first_response(grp, &mut aff1.y);
        }
        let r2 = Round2 {
            sid: self.sid.clone(),
            x1,
            m1: big_m1,
            b1: big_b1,
            s12,
            aff1,
        };
        self.shadow.retain("s21", r1.s21);
        self.shadow.retain("s11", s11);
        self.shadow.retain("s13", s13);
        self.shadow.retain("s31", s31);
        self.shadow.erased(&["s12", "prover scratch"]);
        self.k13 = Some(derive_k13(grp, &r2));
        self.m2 = Some(m2);
        self.t1 = Some(r1);
        self.t2 = Some(r2.clone());
        self.phase = Phase::AwaitR3;
        Ok(r2)
    }

    /// Verification of the third message. Returns the accepted public key.
    pub fn finalize(&mut self, r3: Round3<G>) -> Result<G::Element, Check> {
        if self.phase != Phase::AwaitR3 {
            return self.abort(Check::Parse);
        }
        let env = self.env.clone();
        let grp = &env.grp;
        let (t1, t2) = (self.t1.clone().expect("phase"), self.t2.clone().expect("phase"));
        let m2 = self.m2.expect("phase");
        let stmt = aff2_statement(grp, &self.sid, m2, &t1, &t2, &r3);
        let ok = env.fs().verify_affine(&self.caller, ctx::UC, &stmt, &r3.aff2);
        self.require(ok, Check::C4)?;
        let h = h32(&env, &self.caller, &self.sid, &t1.cid2, &stmt.d());
        self.require(h == Ok(t1.h32), Check::C5)?;
        let k = t2.x1 * grp.scalar(3) - r3.x2 * grp.scalar(2);
        self.require(k == r3.k, Check::C6)?;
        self.t3 = Some(r3);
        self.k = Some(k);
        self.phase = Phase::Accepted;
        Ok(k)
    }

    /// Post-accept installation of `k12`, `k13` and `k31`, then erasure of all σ-values.
    pub fn install(&mut self) -> Result<(), Check> {
        if self.phase != Phase::Accepted {
            return Err(Check::KeyBox);
        }
        let grp = &self.env.grp;
        let sv = |n: &str| grp.scalar_value(&self.shadow.get(n).expect("retained until install"));
        let sid = &self.sid;
        let loads = [
            (SlotId::new(sid, tag::K12), derivation::G12, Value::tuple(vec![sv("s11"), sv("s21"), sv("s31")])),
            (
                SlotId::new(sid, tag::K13),
                derivation::G13,
                Value::tuple(vec![sv("s11"), sv("s21"), sv("s31"), sv("s13")]),
            ),
            (SlotId::new(sid, tag::K31), derivation::G31_REG, Value::tuple(vec![sv("s31")])),
        ];
        let res = load_all(&mut self.kb, &loads);
        self.shadow.erase_all();
        match res {
            Ok(()) => {
                self.phase = Phase::Installed;
                Ok(())
            }
            Err(c) => self.abort(c),
        }
    }
}

/// The initiating leaf `P2`.
pub struct Leaf<G: Group> {
    env: Env<G>,
    id: PartyId,
    leader: PartyId,
    sid: Vec<u8>,
    cid2: Vec<u8>,
    kb: KeyBox<G>,
    caller: CallerId,
    pub fault: Option<LeafFault>,
    pub lenient: bool,
    pub programmed: Programmed<G::Scalar>,
    shadow: Shadow<G>,
    phase: Phase,
    r1: Option<Round1<G>>,
    k: Option<G::Element>,
    k13: Option<G::Element>,
    prove_stats: Vec<ProveStats>,
}

impl<G: Group> Leaf<G> {
    pub fn new(env: Env<G>, id: PartyId, leader: PartyId, sid: &[u8], cid2: &[u8], kb: KeyBox<G>) -> Self {
        Self {
            caller: CallerId::new(id.as_str()),
            env,
            id,
            leader,
            sid: sid.to_vec(),
            cid2: cid2.to_vec(),
            kb,
            fault: None,
            lenient: false,
            programmed: Programmed::default(),
            shadow: Shadow::new(),
            phase: Phase::Start,
            r1: None,
            k: None,
            k13: None,
            prove_stats: Vec::new(),
        }
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn caller(&self) -> &CallerId {
        &self.caller
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn keybox(&self) -> &KeyBox<G> {
        &self.kb
    }

    pub fn keybox_mut(&mut self) -> &mut KeyBox<G> {
        &mut self.kb
    }

    pub fn public_key(&self) -> Option<G::Element> {
        self.k
    }

    pub fn k13(&self) -> Option<G::Element> {
        self.k13
    }

    pub fn host_state(&self) -> HostState {
        self.shadow.dump(&self.env.grp, &self.id, &self.sid, self.phase)
    }

    /// Retained σ-value by name (`s12`, `s22`, `s23`, `s32`). Test oracle access.
    pub fn shadow_scalar(&self, name: &str) -> Option<G::Scalar> {
        self.shadow.get(name)
    }

    /// Prover measurements for every proof this party produced.
    pub fn prove_stats(&self) -> &[ProveStats] {
        &self.prove_stats
    }

    fn abort<T>(&mut self, c: Check) -> Result<T, Check> {
        self.phase = Phase::Aborted(c);
        self.shadow.erase_all();
        Err(c)
    }

    pub fn round1<R: RngCore + CryptoRng>(
        &mut self,
        table: &mut UsvHandleTable<G>,
        usv_caller: &CallerId,
        rng: &mut R,
    ) -> Result<Round1<G>, Check> {
        if self.phase != Phase::Start {
            return Err(Check::Parse);
        }
        let env = self.env.clone();
        let grp = &env.grp;
        let Some(out) = self.kb.leaf_init(&self.sid) else {
            return self.abort(Check::KeyBox);
        };
        let mut cert: UsvCertificate<G> = out.cert;
        if self.fault == Some(LeafFault::NuMinusOne) {
            cert.tag.nu = -grp.one();
        }
        let key = HandleKey {
            sid: self.sid.clone(),
            cid: self.cid2.clone(),
            sender: self.id.clone(),
            recipient: self.leader.clone(),
        };
        let Ok(mut d) = table.commit(&env.usv(), usv_caller, key, &cert.c, &cert.tag) else {
            return self.abort(Check::UsvVerify);
        };
        let s32 = self.programmed.s32.unwrap_or_else(|| grp.random_scalar(rng));
        let committed = match self.fault {
            Some(LeafFault::WrongH32Point) => s32 + grp.one(),
            _ => s32,
        };
        let Ok(h) = h32(&env, &self.caller, &self.sid, &self.cid2, &grp.mul_base(&committed)) else {
            return self.abort(Check::C5);
        };
        let s21 = match self.fault {
            Some(LeafFault::PerturbS21) => out.s21 + grp.one(),
            _ => out.s21,
        };
        if self.fault == Some(LeafFault::FlipReceipt) {
            d[0] ^= 1;
        }
        let r1 = Round1 {
            sid: self.sid.clone(),
            cid2: self.cid2.clone(),
            c2: cert.c,
            zeta2: cert.tag,
            b2: out.b2,
            h32: h,
            s21,
            d,
        };
        self.shadow.retain("s22", out.s22);
        self.shadow.retain("s23", out.s23);
        self.shadow.retain("s32", s32);
        self.shadow.erased(&["s21"]);
        self.r1 = Some(r1.clone());
        self.phase = Phase::AwaitR2;
        Ok(r1)
    }

    pub fn round3<R: RngCore + CryptoRng>(&mut self, r2: Round2<G>, rng: &mut R) -> Result<(Round3<G>, Publish<G>), Check> {
        if self.phase != Phase::AwaitR2 || r2.sid != self.sid {
            return self.abort(Check::Parse);
        }
        let env = self.env.clone();
        let grp = &env.grp;
        let r1 = self.r1.clone().expect("phase");
        let stmt1 = aff1_statement(grp, &self.sid, &r1, &r2);
        let ok = grp.mul_base(&r2.s12) == r2.m1 + r2.b1 * grp.scalar(3)
            && env.fs().verify_affine(&self.caller, ctx::UC, &stmt1, &r2.aff1);
        if !ok && !self.lenient {
            return self.abort(Check::C3);
        }
        let Some(m2) = env.usv().open_m(&self.caller, &r1.c2, &r1.zeta2) else {
            return self.abort(Check::D1);
        };
        let (s22, s32) = (self.shadow.get("s22").expect("retained"), self.shadow.get("s32").expect("retained"));
        let x2 = grp.mul_base(&r2.s12) + grp.mul_base(&s22) + grp.mul_base(&s32);
        let stmt2 = AffineStatement::new(&self.sid, super::AFF2, x2, grp.scalar(3), m2, r1.b2, grp.mul_base(&r2.s12));
        let mut aff2 = match env.fs().prove_affine_with_stats(&self.caller, ctx::UC, &stmt2, &s22, &s32, rng, PROVE_ATTEMPTS) {
            Ok((p, st)) => {
                self.prove_stats.extend(st);
                p
            }
            Err(_) => return self.abort(Check::Prove),
        };
        if self.fault == Some(LeafFault::PerturbProofY2) {
            perturb_first_response(grp, &mut aff2.y);
        }
        let k = r2.x1 * grp.scalar(3) - x2 * grp.scalar(2);
        let k_sent = match self.fault {
            Some(LeafFault::ShiftKrec) => k + grp.generator(),
            _ => k,
        };
        self.shadow.retain("s12", r2.s12);
        self.shadow.erased(&["prover scratch"]);
        self.k = Some(k);
        self.k13 = Some(derive_k13(grp, &r2));
        self.phase = Phase::Sent3;
        Ok((
            Round3 {
                sid: self.sid.clone(),
                x2,
                aff2,
                k: k_sent,
            },
            Publish {
                sid: self.sid.clone(),
                k,
            },
        ))
    }

    /// Installation of `k2`, `k32` and `k23`, then erasure of all σ-values.
    pub fn install(&mut self) -> Result<(), Check> {
        if self.phase != Phase::Sent3 {
            return Err(Check::KeyBox);
        }
        let grp = &self.env.grp;
        let sv = |n: &str| grp.scalar_value(&self.shadow.get(n).expect("retained until install"));
        let sid = &self.sid;
        let loads = [
            (SlotId::new(sid, tag::K2), derivation::G2, Value::tuple(vec![sv("s12"), sv("s22"), sv("s32")])),
            (SlotId::new(sid, tag::K32), derivation::G32_REG, Value::tuple(vec![sv("s32")])),
            (SlotId::new(sid, tag::K23), derivation::G23_REG, Value::tuple(vec![sv("s23")])),
        ];
        let res = load_all(&mut self.kb, &loads);
        self.shadow.erase_all();
        match res {
            Ok(()) => {
                self.phase = Phase::Installed;
                Ok(())
            }
            Err(c) => self.abort(c),
        }
    }
}
