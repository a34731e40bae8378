//! The 1+1-out-of-n star DKG: base run between the center `P1` and the initiating leaf
//! `P2`, the public acceptance predicate, and recovery-device registration.

mod messages;
mod party;
mod registration;
mod session;

pub use messages::{Message, Publish, Reg1, Reg2, Round1, Round2, Round3, SdkgTranscript};
pub use party::{FreshnessGuard, HostState, Leader, Leaf, LeaderFault, LeafFault, Phase, Programmed};
pub use registration::{register_device, Device, RegAdversary, RegError, Rdr, SponsorRef};
pub use session::{install_base_shares, run_base, BaseConfig, BaseOutcome, BaseRun, WireRecord, USV_FUNCTIONALITY};

use std::sync::Arc;

use serde::Serialize;

use crate::algebra::Group;
use crate::codec::{encode, Value};
use crate::fischlin::{AffineStatement, Fischlin, FischlinError, FischlinParams};
use crate::oracle::{ctx, CallerId, Digest, Oracle, OracleError};
use crate::transport::PartyId;
use crate::usv::{receipt_digest, HandleKey, Usv};

pub const AFF1: &str = "aff1";
pub const AFF2: &str = "aff2";

/// Group, oracle and Fischlin profile shared by every party of a deployment.
#[derive(Clone)]
pub struct Env<G: Group> {
    pub grp: G,
    pub oracle: Arc<Oracle>,
    pub params: FischlinParams,
}

impl<G: Group> Env<G> {
    pub fn new(grp: G, oracle: Arc<Oracle>, params: FischlinParams) -> Result<Self, FischlinError> {
        params.validate(&grp)?;
        Ok(Self { grp, oracle, params })
    }

    pub fn fs(&self) -> Fischlin<'_, G> {
        Fischlin::new(&self.grp, &self.oracle, self.params).expect("validated at construction")
    }

    pub fn usv(&self) -> Usv<'_, G> {
        Usv { fs: self.fs() }
    }
}

/// Which check failed. Shared by party aborts and [`acc_sdkg`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Check {
    /// Malformed or unexpected message.
    Parse,
    /// Reused `(sid, cid2)` or a second first-round message.
    Freshness,
    /// Handle-bound USV verification returned 0.
    UsvVerify,
    /// `Open_M(C2, ζ2) = ⊥`.
    D1,
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    /// KeyBox refused an operation on the honest path.
    KeyBox,
    /// Proof generation failed (honest rejection after all retries).
    Prove,
}

impl Check {
    pub fn describe(self) -> &'static str {
        match self {
            Check::Parse => "message parse failure",
            Check::Freshness => "sid/cid2 not fresh",
            Check::UsvVerify => "USV handle verification failed",
            Check::D1 => "USV opening is bottom",
            Check::C1 => "USV receipt consistency",
            Check::C2 => "USV certificate linkage",
            Check::C3 => "affine AoK for X1",
            Check::C4 => "affine AoK for X2",
            Check::C5 => "digest check for h32",
            Check::C6 => "key consistency",
            Check::KeyBox => "KeyBox operation refused",
            Check::Prove => "proof generation failed",
        }
    }
}

/// `H_s32(⟨sid, cid2, P⟩)`.
pub fn h32<G: Group>(
    env: &Env<G>,
    caller: &CallerId,
    sid: &[u8],
    cid2: &[u8],
    point: &G::Element,
) -> Result<Digest, OracleError> {
    let input = Value::tuple(vec![Value::bytes(sid), Value::bytes(cid2), env.grp.element_value(point)]);
    env.oracle.query(caller, ctx::SDKG_S32, &encode(&input))
}

/// `K13 := 2(M1 + B1) − X1`.
pub fn derive_k13<G: Group>(grp: &G, t2: &Round2<G>) -> G::Element {
    (t2.m1 + t2.b1) * grp.scalar(2) - t2.x1
}

pub fn aff1_statement<G: Group>(grp: &G, sid: &[u8], t1: &Round1<G>, t2: &Round2<G>) -> AffineStatement<G> {
    AffineStatement::new(sid, AFF1, t2.x1, grp.scalar(2), t2.m1, t2.b1, grp.mul_base(&t1.s21))
}

pub fn aff2_statement<G: Group>(
    grp: &G,
    sid: &[u8],
    m2: G::Element,
    t1: &Round1<G>,
    t2: &Round2<G>,
    t3: &Round3<G>,
) -> AffineStatement<G> {
    AffineStatement::new(sid, AFF2, t3.x2, grp.scalar(3), m2, t1.b2, grp.mul_base(&t2.s12))
}

/// The acceptance predicate. `Ok(())` iff every check passes; otherwise the first failure.
pub fn acc_sdkg_check<G: Group>(
    env: &Env<G>,
    caller: &CallerId,
    sid: &[u8],
    sender: &PartyId,
    recipient: &PartyId,
    t: &SdkgTranscript<G>,
) -> Result<(), Check> {
    let grp = &env.grp;
    let (t1, t2, t3) = (&t.t1, &t.t2, &t.t3);
    let usv = env.usv();
    let m2 = usv.open_m(caller, &t1.c2, &t1.zeta2).ok_or(Check::D1)?;
    let key = HandleKey {
        sid: sid.to_vec(),
        cid: t1.cid2.clone(),
        sender: sender.clone(),
        recipient: recipient.clone(),
    };
    let d_star = receipt_digest(grp, &env.oracle, caller, &key, &t1.c2, Some(&m2)).map_err(|_| Check::C1)?;
    let fs = env.fs();
    let aff1 = aff1_statement(grp, sid, t1, t2);
    let aff2 = aff2_statement(grp, sid, m2, t1, t2, t3);
    let k_hat = t2.x1 * grp.scalar(3) - t3.x2 * grp.scalar(2);

    if t1.d != d_star {
        return Err(Check::C1);
    }
    if grp.mul_base(&t1.s21) - t1.b2 * grp.scalar(2) != m2 {
        return Err(Check::C2);
    }
    if grp.mul_base(&t2.s12) != t2.m1 + t2.b1 * grp.scalar(3) || !fs.verify_affine(caller, ctx::UC, &aff1, &t2.aff1) {
        return Err(Check::C3);
    }
    if !fs.verify_affine(caller, ctx::UC, &aff2, &t3.aff2) {
        return Err(Check::C4);
    }
    if h32(env, caller, sid, &t1.cid2, &aff2.d()).map_err(|_| Check::C5)? != t1.h32 {
        return Err(Check::C5);
    }
    if t3.k != k_hat {
        return Err(Check::C6);
    }
    Ok(())
}

pub fn acc_sdkg<G: Group>(
    env: &Env<G>,
    caller: &CallerId,
    sid: &[u8],
    sender: &PartyId,
    recipient: &PartyId,
    t: &SdkgTranscript<G>,
) -> bool {
    acc_sdkg_check(env, caller, sid, sender, recipient, t).is_ok()
}

/// Acceptance over the wire form; parse failures are rejections.
pub fn acc_sdkg_value<G: Group>(
    env: &Env<G>,
    caller: &CallerId,
    sid: &[u8],
    sender: &PartyId,
    recipient: &PartyId,
    v: &Value,
) -> Result<(), Check> {
    let t = SdkgTranscript::from_value(&env.grp, v).map_err(|_| Check::Parse)?;
    acc_sdkg_check(env, caller, sid, sender, recipient, &t)
}

/// All σ-values of an honest run. Only the test oracle ever sees them together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaTable<S> {
    pub s11: S,
    pub s21: S,
    pub s31: S,
    pub s12: S,
    pub s22: S,
    pub s32: S,
    pub s13: S,
    pub s23: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedShares<G: Group> {
    pub x1: G::Scalar,
    pub x2: G::Scalar,
    pub k12: G::Scalar,
    pub k2: G::Scalar,
    pub k13: G::Scalar,
    pub k3: G::Scalar,
    pub k: G::Scalar,
    pub big_k: G::Element,
    pub big_k13: G::Element,
}

/// Recomputes every share from the full σ-table.
pub fn derive_all_shares_oracle<G: Group>(grp: &G, t: &SigmaTable<G::Scalar>) -> DerivedShares<G> {
    let two = grp.scalar(2);
    let x1 = t.s11 + t.s21 + t.s31;
    let x2 = t.s12 + t.s22 + t.s32;
    let k12 = grp.scalar(3) * x1;
    let k2 = -(two * x2);
    let k13 = two * t.s13 - x1;
    let k3 = two * (t.s23 + two * t.s31 - t.s32);
    let k = k12 + k2;
    DerivedShares {
        x1,
        x2,
        k12,
        k2,
        k13,
        k3,
        k,
        big_k: grp.mul_base(&k),
        big_k13: grp.mul_base(&k13),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ToyGroup;

    #[test]
    fn toy_sigma_table() {
        let g = ToyGroup::setup(101, 7).unwrap();
        let s = |v: i64| g.scalar(v.rem_euclid(101) as u64);
        // f1(2) = 2, f1(3) = 5 ⇒ b1 = 3, m1 = −4, σ13 = f1(1) = −1
        let t = SigmaTable {
            s11: s(2),
            s21: s(11),
            s31: s(4),
            s12: s(5),
            s22: s(15),
            s32: s(6),
            s13: s(-1),
            s23: s(7),
        };
        let d = derive_all_shares_oracle(&g, &t);
        assert_eq!((d.x1, d.x2), (s(17), s(26)));
        assert_eq!(d.k, s(100));
        assert_eq!((d.k12, d.k2), (s(51), s(49)));
        assert_eq!((d.k3, d.k13), (s(18), s(82)));
        assert_eq!(d.k13 + d.k3, d.k);
        assert_eq!(d.big_k13 + g.mul_base(&d.k3), d.big_k);
    }

    #[test]
    fn all_zero_table() {
        let g = ToyGroup::setup(101, 7).unwrap();
        let z = g.zero();
        let t = SigmaTable { s11: z, s21: z, s31: z, s12: z, s22: z, s32: z, s13: z, s23: z };
        let d = derive_all_shares_oracle(&g, &t);
        assert_eq!(d.k, z);
        assert_eq!(d.big_k, g.identity());
    }

    #[test]
    fn k13_toy() {
        let g = ToyGroup::setup(101, 7).unwrap();
        let t2 = Round2::<ToyGroup> {
            sid: vec![],
            x1: g.element(10),
            m1: g.element(3),
            b1: g.element(4),
            s12: g.zero(),
            aff1: crate::fischlin::AffineProof {
                y: crate::fischlin::FischlinProof { triples: vec![] },
                d: crate::fischlin::FischlinProof { triples: vec![] },
            },
        };
        assert_eq!(derive_k13(&g, &t2), g.element(4));
        let t2 = Round2 { x1: g.identity(), ..t2 };
        assert_eq!(derive_k13(&g, &t2), g.element(14));
    }
}
