//! USV certificates: a commitment `C = mG + rH` with a tag whose verified opening is the
//! group element `M = mG`, never the scalar `m`.
//!
//! The tag is `ζ = (ν, υ, π)` with `ν = m/r`, `υ = (m + r)G` and `π` a Fischlin DLEQ
//! proof that `υ − M` and `C − M` share the discrete log `r` to bases `G` and `H`.
//! `M = ν/(ν+1)·υ` is recovered deterministically from public data.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::Group;
use crate::codec::{encode, CodecError, Value};
use crate::fischlin::{proof_from_value, proof_value, DleqProof, Fischlin, FischlinError, FischlinParams};
use crate::oracle::{ctx, CallerId, Digest, LogEntry, Oracle, OracleError};
use crate::sigma::{ChaumPedersen, DleqStatement};
use crate::transport::PartyId;

/// Fresh first moves tried before an honest DLEQ rejection is surfaced.
pub const PROVE_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UsvError {
    #[error("cannot certify m = 0")]
    ZeroMessage,
    #[error("tag simulation needs M ≠ identity and C = M + R")]
    SimulationPrecondition,
    #[error("tag simulation requires a programmable oracle: {0}")]
    Simulation(FischlinError),
    #[error("proof generation failed: {0}")]
    Proof(FischlinError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsvTag<G: Group> {
    pub nu: G::Scalar,
    pub upsilon: G::Element,
    pub proof: DleqProof<G>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsvCertificate<G: Group> {
    pub c: G::Element,
    pub tag: UsvTag<G>,
}

/// `Υ = (M, R)` with `C = M + R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifiedOpening<G: Group> {
    pub m: G::Element,
    pub r: G::Element,
}

impl<G: Group> UsvTag<G> {
    pub fn to_value(&self, grp: &G, params: &FischlinParams) -> Value {
        Value::tuple(vec![
            grp.scalar_value(&self.nu),
            grp.element_value(&self.upsilon),
            proof_value::<G, ChaumPedersen>(grp, params, &self.proof),
        ])
    }

    pub fn from_value(grp: &G, v: &Value) -> Result<Self, CodecError> {
        let it = v.as_tuple_of(3)?;
        Ok(Self {
            nu: grp.parse_scalar(&it[0])?,
            upsilon: grp.parse_element(&it[1])?,
            proof: proof_from_value::<G, ChaumPedersen>(grp, &it[2])?,
        })
    }
}

impl<G: Group> UsvCertificate<G> {
    pub fn to_value(&self, grp: &G, params: &FischlinParams) -> Value {
        Value::tuple(vec![grp.element_value(&self.c), self.tag.to_value(grp, params)])
    }

    pub fn from_value(grp: &G, v: &Value) -> Result<Self, CodecError> {
        let it = v.as_tuple_of(2)?;
        Ok(Self {
            c: grp.parse_element(&it[0])?,
            tag: UsvTag::from_value(grp, &it[1])?,
        })
    }
}

pub struct Usv<'a, G: Group> {
    pub fs: Fischlin<'a, G>,
}

impl<'a, G: Group> Usv<'a, G> {
    pub fn new(grp: &'a G, oracle: &'a Oracle, params: FischlinParams) -> Result<Self, FischlinError> {
        Ok(Self {
            fs: Fischlin::new(grp, oracle, params)?,
        })
    }

    fn grp(&self) -> &G {
        self.fs.grp
    }

    fn dleq_statement(&self, c: &G::Element, tag: &UsvTag<G>, m: &G::Element) -> DleqStatement<G> {
        DleqStatement {
            a: tag.upsilon - *m,
            b: *c - *m,
        }
    }

    pub fn cert<R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        m: &G::Scalar,
        rng: &mut R,
    ) -> Result<UsvCertificate<G>, UsvError> {
        let g = self.grp();
        if *m == g.zero() {
            return Err(UsvError::ZeroMessage);
        }
        let r = g
            .random_scalar_excluding(rng, &[g.zero(), -*m])
            .expect("two exclusions never exhaust a field of order > 3");
        self.cert_with_randomness(caller, m, &r, rng)
    }

    /// [`Usv::cert`] with caller-chosen `r ∉ {0, −m}`. Used by tests and by the
    /// equivocation reduction demo, which needs to aim two openings at one `C`.
    pub fn cert_with_randomness<R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        m: &G::Scalar,
        r: &G::Scalar,
        rng: &mut R,
    ) -> Result<UsvCertificate<G>, UsvError> {
        let g = self.grp();
        if *m == g.zero() {
            return Err(UsvError::ZeroMessage);
        }
        let big_m = g.mul_base(m);
        let big_r = g.h() * *r;
        let c = big_m + big_r;
        let r_inv = g.invert(r).map_err(|_| UsvError::ZeroMessage)?;
        let nu = *m * r_inv;
        let upsilon = g.mul_base(&(*m + *r));
        let stmt = DleqStatement {
            a: upsilon - big_m,
            b: c - big_m,
        };
        let (proof, _) = self
            .fs
            .prove_retrying::<ChaumPedersen, R>(caller, ctx::DLEQ, &stmt, r, rng, PROVE_ATTEMPTS)
            .map_err(UsvError::Proof)?;
        Ok(UsvCertificate {
            c,
            tag: UsvTag { nu, upsilon, proof },
        })
    }

    /// Deterministic opening; ⊥ iff `ν = −1`.
    pub fn derive(&self, c: &G::Element, tag: &UsvTag<G>) -> Option<VerifiedOpening<G>> {
        let g = self.grp();
        let denom = g.invert(&(tag.nu + g.one())).ok()?;
        let m = tag.upsilon * (tag.nu * denom);
        Some(VerifiedOpening { m, r: *c - m })
    }

    pub fn vcert(&self, caller: &CallerId, c: &G::Element, tag: &UsvTag<G>) -> bool {
        let Some(op) = self.derive(c, tag) else {
            return false;
        };
        let stmt = self.dleq_statement(c, tag, &op.m);
        self.fs.verify::<ChaumPedersen>(caller, ctx::DLEQ, &stmt, &tag.proof)
    }

    pub fn open(&self, caller: &CallerId, c: &G::Element, tag: &UsvTag<G>) -> Option<VerifiedOpening<G>> {
        if self.vcert(caller, c, tag) {
            self.derive(c, tag)
        } else {
            None
        }
    }

    pub fn open_m(&self, caller: &CallerId, c: &G::Element, tag: &UsvTag<G>) -> Option<G::Element> {
        self.open(caller, c, tag).map(|o| o.m)
    }

    /// Builds a verifying tag for `C` that opens to the given `(M, R)`, without knowing `m`.
    pub fn simulate_tag<R: RngCore + CryptoRng + ?Sized>(
        &self,
        c: &G::Element,
        opening: &VerifiedOpening<G>,
        rng: &mut R,
    ) -> Result<UsvTag<G>, UsvError> {
        let g = self.grp();
        if g.is_identity(&opening.m) || opening.m + opening.r != *c {
            return Err(UsvError::SimulationPrecondition);
        }
        let nu = g
            .random_scalar_excluding(rng, &[g.zero(), -g.one()])
            .expect("field of order > 3");
        let nu_inv = g.invert(&nu).expect("nonzero");
        let upsilon = opening.m * (g.one() + nu_inv);
        let stmt = DleqStatement {
            a: upsilon - opening.m,
            b: *c - opening.m,
        };
        let proof = self
            .fs
            .simulate::<ChaumPedersen, R>(ctx::DLEQ, &stmt, rng)
            .map_err(UsvError::Simulation)?;
        Ok(UsvTag { nu, upsilon, proof })
    }

    /// Turns two verifying tags for one `C` with different openings into `log_G H`.
    pub fn equivocation_to_dl(
        &self,
        c: &G::Element,
        tag1: &UsvTag<G>,
        tag2: &UsvTag<G>,
        log: &[LogEntry],
    ) -> Option<G::Scalar> {
        let g = self.grp();
        let verifier = CallerId::new("equivocation-reduction");
        let m1 = self.open_m(&verifier, c, tag1)?;
        let m2 = self.open_m(&verifier, c, tag2)?;
        if m1 == m2 {
            return None;
        }
        let r1 = self.fs.extract::<ChaumPedersen>(ctx::DLEQ, &self.dleq_statement(c, tag1, &m1), &tag1.proof, log)?;
        let r2 = self.fs.extract::<ChaumPedersen>(ctx::DLEQ, &self.dleq_statement(c, tag2, &m2), &tag2.proof, log)?;
        if r1 == r2 {
            return None;
        }
        let s1 = tag1.nu * r1;
        let s2 = tag2.nu * r2;
        let x = (s1 - s2) * g.invert(&(r2 - r1)).ok()?;
        (g.mul_base(&x) == g.h()).then_some(x)
    }
}

/// Index of the handle table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HandleKey {
    pub sid: Vec<u8>,
    pub cid: Vec<u8>,
    pub sender: PartyId,
    pub recipient: PartyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HandleStatus {
    Pending,
    Invalid,
}

#[derive(Debug, Clone)]
struct HandleEntry<G: Group> {
    m: Option<G::Element>,
    d: Digest,
    status: HandleStatus,
}

/// Receipt digest `H_rcpt(⟨sid, cid, Ps, Pr, C, M⟩)` with ⊥ encoded as the reserved tag.
pub fn receipt_digest<G: Group>(
    grp: &G,
    oracle: &Oracle,
    caller: &CallerId,
    key: &HandleKey,
    c: &G::Element,
    m: Option<&G::Element>,
) -> Result<Digest, OracleError> {
    let input = Value::tuple(vec![
        Value::bytes(&key.sid),
        Value::bytes(&key.cid),
        key.sender.value(),
        key.recipient.value(),
        grp.element_value(c),
        m.map_or(Value::Bottom, |m| grp.element_value(m)),
    ]);
    oracle.query(caller, ctx::USV_RCPT, &encode(&input))
}

/// JSON-facing row of the handle table.
#[derive(Debug, Clone, Serialize)]
pub struct HandleRecord {
    pub sid: String,
    pub cid: String,
    pub sender: PartyId,
    pub recipient: PartyId,
    pub m: Option<String>,
    pub d: String,
    pub status: HandleStatus,
}

/// Handle-bound verification table binding `(sid, cid, Ps, Pr)` to one opening.
#[derive(Debug, Clone)]
pub struct UsvHandleTable<G: Group> {
    entries: BTreeMap<HandleKey, HandleEntry<G>>,
}

impl<G: Group> Default for UsvHandleTable<G> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<G: Group> UsvHandleTable<G> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn commit(
        &mut self,
        usv: &Usv<'_, G>,
        caller: &CallerId,
        key: HandleKey,
        c: &G::Element,
        tag: &UsvTag<G>,
    ) -> Result<Digest, OracleError> {
        let m = usv.open_m(caller, c, tag);
        let d = receipt_digest(usv.fs.grp, usv.fs.oracle, caller, &key, c, m.as_ref())?;
        match self.entries.get_mut(&key) {
            Some(existing) => existing.status = HandleStatus::Invalid,
            None => {
                let status = if m.is_some() { HandleStatus::Pending } else { HandleStatus::Invalid };
                self.entries.insert(key, HandleEntry { m, d, status });
            }
        }
        Ok(d)
    }

    /// `None` if no entry; `Some(false)` if invalid or mismatched; `Some(true)` otherwise.
    pub fn verify(
        &self,
        usv: &Usv<'_, G>,
        caller: &CallerId,
        key: &HandleKey,
        c: &G::Element,
        tag: &UsvTag<G>,
    ) -> Option<bool> {
        let entry = self.entries.get(key)?;
        if entry.status == HandleStatus::Invalid {
            return Some(false);
        }
        let Some(m2) = usv.open_m(caller, c, tag) else {
            return Some(false);
        };
        if entry.m != Some(m2) {
            return Some(false);
        }
        let d2 = receipt_digest(usv.fs.grp, usv.fs.oracle, caller, key, c, Some(&m2)).ok()?;
        Some(d2 == entry.d)
    }

    pub fn status(&self, key: &HandleKey) -> Option<HandleStatus> {
        self.entries.get(key).map(|e| e.status)
    }

    pub fn export(&self, grp: &G) -> Vec<HandleRecord> {
        self.entries
            .iter()
            .map(|(k, e)| HandleRecord {
                sid: hex::encode(&k.sid),
                cid: hex::encode(&k.cid),
                sender: k.sender.clone(),
                recipient: k.recipient.clone(),
                m: e.m.map(|m| hex::encode(grp.element_to_bytes(&m))),
                d: hex::encode(e.d),
                status: e.status,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ToyGroup;
    use crate::oracle::OracleMode;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup() -> (ToyGroup, Oracle) {
        (ToyGroup::setup(101, 7).unwrap(), Oracle::new(OracleMode::Ideal, 4))
    }

    #[test]
    fn toy_certificate_values() {
        let (g, o) = setup();
        let usv = Usv::new(&g, &o, FischlinParams::TINY).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let caller = CallerId::new("c");
        let cert = usv.cert_with_randomness(&caller, &g.scalar(3), &g.scalar(5), &mut rng).unwrap();
        assert_eq!(cert.c.value(), 38);
        assert_eq!(cert.tag.nu.value(), 41);
        assert_eq!(cert.tag.upsilon.value(), 8);
        let op = usv.derive(&cert.c, &cert.tag).unwrap();
        assert_eq!((op.m.value(), op.r.value()), (3, 35));
        assert!(usv.vcert(&caller, &cert.c, &cert.tag));
    }

    #[test]
    fn derive_bottom_on_minus_one() {
        let (g, o) = setup();
        let usv = Usv::new(&g, &o, FischlinParams::TINY).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let caller = CallerId::new("c");
        let mut cert = usv.cert(&caller, &g.scalar(9), &mut rng).unwrap();
        cert.tag.nu = -g.one();
        assert!(usv.derive(&cert.c, &cert.tag).is_none());
        assert!(usv.open_m(&caller, &cert.c, &cert.tag).is_none());
        assert_eq!(usv.cert(&caller, &g.zero(), &mut rng), Err(UsvError::ZeroMessage));
    }

    #[test]
    fn handle_table_rules() {
        let (g, o) = setup();
        let usv = Usv::new(&g, &o, FischlinParams::TINY).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let caller = CallerId::new("c");
        let key = HandleKey {
            sid: b"s".to_vec(),
            cid: b"c".to_vec(),
            sender: PartyId::indexed(2),
            recipient: PartyId::indexed(1),
        };
        let cert = usv.cert(&caller, &g.scalar(4), &mut rng).unwrap();
        let mut table = UsvHandleTable::new();
        assert_eq!(table.verify(&usv, &caller, &key, &cert.c, &cert.tag), None);
        table.commit(&usv, &caller, key.clone(), &cert.c, &cert.tag).unwrap();
        assert_eq!(table.status(&key), Some(HandleStatus::Pending));
        assert_eq!(table.verify(&usv, &caller, &key, &cert.c, &cert.tag), Some(true));
        let other = usv.cert(&caller, &g.scalar(5), &mut rng).unwrap();
        assert_eq!(table.verify(&usv, &caller, &key, &other.c, &other.tag), Some(false));
        table.commit(&usv, &caller, key.clone(), &other.c, &other.tag).unwrap();
        assert_eq!(table.status(&key), Some(HandleStatus::Invalid));
        assert_eq!(table.verify(&usv, &caller, &key, &cert.c, &cert.tag), Some(false));

        let mut bad = cert.clone();
        bad.tag.nu = -g.one();
        let k2 = HandleKey { cid: b"c2".to_vec(), ..key };
        table.commit(&usv, &caller, k2.clone(), &bad.c, &bad.tag).unwrap();
        assert_eq!(table.status(&k2), Some(HandleStatus::Invalid));
        assert_eq!(table.export(&g).iter().filter(|r| r.m.is_none()).count(), 1);
    }
}
