//! Schnorr (discrete log) and Chaum–Pedersen (discrete-log equality) Σ-protocols.
//!
//! Challenges are `t`-bit integers embedded into `Z_p`; callers guarantee `2^t < p`.
//! The (sid, label) tag of a DL statement does not enter the Σ-algebra. It is bound
//! only through the Fischlin hash input.

use std::fmt::Debug;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::algebra::Group;
use crate::codec::{CodecError, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("transcripts use equal challenges")]
    EqualChallenges,
    #[error("transcripts do not share a commitment")]
    CommitmentMismatch,
    #[error("a transcript does not verify")]
    InvalidTranscript,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SigmaTranscript<C, S> {
    pub commitment: C,
    pub challenge: u64,
    pub response: S,
}

/// A Σ-protocol whose witness is a single scalar and whose response is `z = j + e·w`.
pub trait SigmaProtocol<G: Group> {
    type Statement: Clone + Debug;
    type Commitment: Copy + Eq + Debug;

    /// Proof-kind byte used in the packed proof encoding.
    const KIND: u8;

    fn commit<R: RngCore + CryptoRng + ?Sized>(
        grp: &G,
        rng: &mut R,
    ) -> (G::Scalar, Self::Commitment);

    fn commitment_for(grp: &G, nonce: &G::Scalar) -> Self::Commitment;

    fn respond(grp: &G, nonce: &G::Scalar, e: u64, witness: &G::Scalar) -> G::Scalar {
        *nonce + grp.scalar(e) * *witness
    }

    fn verify(grp: &G, stmt: &Self::Statement, a: &Self::Commitment, e: u64, z: &G::Scalar) -> bool;

    /// Honest-verifier simulator: uniform `z`, commitment solved from the verification equation.
    fn simulate<R: RngCore + CryptoRng + ?Sized>(
        grp: &G,
        stmt: &Self::Statement,
        e: u64,
        rng: &mut R,
    ) -> (Self::Commitment, G::Scalar);

    fn relation_holds(grp: &G, stmt: &Self::Statement, witness: &G::Scalar) -> bool;

    fn statement_value(grp: &G, stmt: &Self::Statement) -> Value;
    fn commitment_value(grp: &G, a: &Self::Commitment) -> Value;

    /// Fixed width of the packed commitment encoding.
    fn commitment_len(grp: &G) -> usize;
    fn write_commitment(grp: &G, a: &Self::Commitment, out: &mut Vec<u8>);
    fn read_commitment(grp: &G, b: &[u8]) -> Result<Self::Commitment, CodecError>;

    /// Special-soundness extractor `w = (z − z')(e − e')^{-1}`.
    fn extract(
        grp: &G,
        stmt: &Self::Statement,
        t1: &SigmaTranscript<Self::Commitment, G::Scalar>,
        t2: &SigmaTranscript<Self::Commitment, G::Scalar>,
    ) -> Result<G::Scalar, ExtractError> {
        if t1.commitment != t2.commitment {
            return Err(ExtractError::CommitmentMismatch);
        }
        if t1.challenge == t2.challenge {
            return Err(ExtractError::EqualChallenges);
        }
        if !Self::verify(grp, stmt, &t1.commitment, t1.challenge, &t1.response)
            || !Self::verify(grp, stmt, &t2.commitment, t2.challenge, &t2.response)
        {
            return Err(ExtractError::InvalidTranscript);
        }
        Ok(special_soundness(grp, (t1.challenge, t1.response), (t2.challenge, t2.response))
            .expect("distinct t-bit challenges are distinct in Z_p"))
    }
}

/// `(z1 − z2)·(e1 − e2)^{-1}`, or `None` when `e1 ≡ e2`.
pub fn special_soundness<G: Group>(
    grp: &G,
    (e1, z1): (u64, G::Scalar),
    (e2, z2): (u64, G::Scalar),
) -> Option<G::Scalar> {
    let de = grp.scalar(e1) - grp.scalar(e2);
    grp.invert(&de).ok().map(|inv| (z1 - z2) * inv)
}

/// Tagged DL statement `(sid, label, M)`.
///
/// A statement without a label is the untagged `(sid, K)` form used by the KeyBox's
/// one-shot prover.
#[derive(Debug, Clone)]
pub struct DlStatement<G: Group> {
    pub sid: Vec<u8>,
    pub label: Option<Vec<u8>>,
    pub point: G::Element,
}

impl<G: Group> DlStatement<G> {
    pub fn tagged(sid: &[u8], label: &str, point: G::Element) -> Self {
        Self {
            sid: sid.to_vec(),
            label: Some(label.as_bytes().to_vec()),
            point,
        }
    }

    pub fn untagged(sid: &[u8], point: G::Element) -> Self {
        Self {
            sid: sid.to_vec(),
            label: None,
            point,
        }
    }
}

/// DLEQ statement `(A, B)` claiming `A = rG` and `B = rH`.
#[derive(Debug, Clone)]
pub struct DleqStatement<G: Group> {
    pub a: G::Element,
    pub b: G::Element,
}

pub struct Schnorr;
pub struct ChaumPedersen;

impl<G: Group> SigmaProtocol<G> for Schnorr {
    type Statement = DlStatement<G>;
    type Commitment = G::Element;

    const KIND: u8 = 0x01;

    fn commit<R: RngCore + CryptoRng + ?Sized>(grp: &G, rng: &mut R) -> (G::Scalar, G::Element) {
        let j = grp.random_scalar(rng);
        (j, grp.mul_base(&j))
    }

    fn commitment_for(grp: &G, nonce: &G::Scalar) -> G::Element {
        grp.mul_base(nonce)
    }

    fn verify(grp: &G, stmt: &DlStatement<G>, a: &G::Element, e: u64, z: &G::Scalar) -> bool {
        grp.mul_base(z) == *a + stmt.point * grp.scalar(e)
    }

    fn simulate<R: RngCore + CryptoRng + ?Sized>(
        grp: &G,
        stmt: &DlStatement<G>,
        e: u64,
        rng: &mut R,
    ) -> (G::Element, G::Scalar) {
        let z = grp.random_scalar(rng);
        (grp.mul_base(&z) - stmt.point * grp.scalar(e), z)
    }

    fn relation_holds(grp: &G, stmt: &DlStatement<G>, w: &G::Scalar) -> bool {
        grp.mul_base(w) == stmt.point
    }

    fn statement_value(grp: &G, stmt: &DlStatement<G>) -> Value {
        let mut items = vec![Value::bytes(&stmt.sid)];
        if let Some(l) = &stmt.label {
            items.push(Value::Label(l.clone()));
        }
        items.push(grp.element_value(&stmt.point));
        Value::Tuple(items)
    }

    fn commitment_value(grp: &G, a: &G::Element) -> Value {
        grp.element_value(a)
    }

    fn commitment_len(grp: &G) -> usize {
        grp.element_len()
    }

    fn write_commitment(grp: &G, a: &G::Element, out: &mut Vec<u8>) {
        out.extend_from_slice(&grp.element_to_bytes(a));
    }

    fn read_commitment(grp: &G, b: &[u8]) -> Result<G::Element, CodecError> {
        grp.element_from_bytes(b)
    }
}

impl<G: Group> SigmaProtocol<G> for ChaumPedersen {
    type Statement = DleqStatement<G>;
    type Commitment = (G::Element, G::Element);

    const KIND: u8 = 0x02;

    fn commit<R: RngCore + CryptoRng + ?Sized>(
        grp: &G,
        rng: &mut R,
    ) -> (G::Scalar, (G::Element, G::Element)) {
        let j = grp.random_scalar(rng);
        (j, Self::commitment_for(grp, &j))
    }

    fn commitment_for(grp: &G, j: &G::Scalar) -> (G::Element, G::Element) {
        (grp.mul_base(j), grp.h() * *j)
    }

    fn verify(
        grp: &G,
        stmt: &DleqStatement<G>,
        a: &(G::Element, G::Element),
        e: u64,
        z: &G::Scalar,
    ) -> bool {
        if grp.is_identity(&stmt.a) || grp.is_identity(&stmt.b) {
            return false;
        }
        let es = grp.scalar(e);
        grp.mul_base(z) == a.0 + stmt.a * es && grp.h() * *z == a.1 + stmt.b * es
    }

    fn simulate<R: RngCore + CryptoRng + ?Sized>(
        grp: &G,
        stmt: &DleqStatement<G>,
        e: u64,
        rng: &mut R,
    ) -> ((G::Element, G::Element), G::Scalar) {
        let z = grp.random_scalar(rng);
        let es = grp.scalar(e);
        (
            (grp.mul_base(&z) - stmt.a * es, grp.h() * z - stmt.b * es),
            z,
        )
    }

    fn relation_holds(grp: &G, stmt: &DleqStatement<G>, r: &G::Scalar) -> bool {
        !grp.is_identity(&stmt.a)
            && !grp.is_identity(&stmt.b)
            && grp.mul_base(r) == stmt.a
            && grp.h() * *r == stmt.b
    }

    fn statement_value(grp: &G, stmt: &DleqStatement<G>) -> Value {
        Value::tuple(vec![
            grp.element_value(&grp.h()),
            grp.element_value(&stmt.a),
            grp.element_value(&stmt.b),
        ])
    }

    fn commitment_value(grp: &G, a: &(G::Element, G::Element)) -> Value {
        Value::tuple(vec![grp.element_value(&a.0), grp.element_value(&a.1)])
    }

    fn commitment_len(grp: &G) -> usize {
        2 * grp.element_len()
    }

    fn write_commitment(grp: &G, a: &(G::Element, G::Element), out: &mut Vec<u8>) {
        out.extend_from_slice(&grp.element_to_bytes(&a.0));
        out.extend_from_slice(&grp.element_to_bytes(&a.1));
    }

    fn read_commitment(grp: &G, b: &[u8]) -> Result<(G::Element, G::Element), CodecError> {
        let w = grp.element_len();
        if b.len() != 2 * w {
            return Err(CodecError::NonCanonicalElement);
        }
        Ok((grp.element_from_bytes(&b[..w])?, grp.element_from_bytes(&b[w..])?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Secp256k1Group, ToyGroup};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> ToyGroup {
        ToyGroup::setup(101, 7).unwrap()
    }

    fn dl(g: &ToyGroup, m: u64) -> DlStatement<ToyGroup> {
        DlStatement::tagged(b"sid", "lbl", g.mul_base(&g.scalar(m)))
    }

    #[test]
    fn schnorr_toy_values() {
        let g = toy();
        assert_eq!(Schnorr::commitment_for(&g, &g.scalar(4)).value(), 4);
        assert_eq!(Schnorr::commitment_for(&g, &g.zero()), g.identity());
        let z = <Schnorr as SigmaProtocol<ToyGroup>>::respond(&g, &g.scalar(4), 3, &g.scalar(5));
        assert_eq!(z.value(), 19);
        let st = dl(&g, 5);
        assert!(Schnorr::verify(&g, &st, &g.element(4), 3, &z));
        assert!(!Schnorr::verify(&g, &st, &g.element(4), 3, &(z + g.one())));
        let z0 = <Schnorr as SigmaProtocol<ToyGroup>>::respond(&g, &g.scalar(4), 0, &g.scalar(5));
        assert_eq!(z0, g.scalar(4));
    }

    #[test]
    fn schnorr_extract_and_errors() {
        let g = toy();
        let st = dl(&g, 5);
        let j = g.scalar(9);
        let a = Schnorr::commitment_for(&g, &j);
        let tr = |e| SigmaTranscript {
            commitment: a,
            challenge: e,
            response: <Schnorr as SigmaProtocol<ToyGroup>>::respond(&g, &j, e, &g.scalar(5)),
        };
        assert_eq!(Schnorr::extract(&g, &st, &tr(2), &tr(11)).unwrap().value(), 5);
        assert_eq!(Schnorr::extract(&g, &st, &tr(2), &tr(2)), Err(ExtractError::EqualChallenges));
        // simulated pair with inconsistent commitments
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (a1, z1) = Schnorr::simulate(&g, &st, 1, &mut rng);
        let (a2, z2) = loop {
            let s = Schnorr::simulate(&g, &st, 2, &mut rng);
            if s.0 != a1 {
                break s;
            }
        };
        let t1 = SigmaTranscript { commitment: a1, challenge: 1, response: z1 };
        let t2 = SigmaTranscript { commitment: a2, challenge: 2, response: z2 };
        assert_eq!(Schnorr::extract(&g, &st, &t1, &t2), Err(ExtractError::CommitmentMismatch));
    }

    #[test]
    fn schnorr_unique_responses_exhaustive() {
        let g = toy();
        let st = dl(&g, 33);
        for a in [0u64, 4, 50] {
            for e in 0..16 {
                let n = (0..101)
                    .filter(|z| Schnorr::verify(&g, &st, &g.element(a), e, &g.scalar(*z)))
                    .count();
                assert_eq!(n, 1);
            }
        }
    }

    #[test]
    fn schnorr_honest_and_simulated_distributions_match() {
        let g = toy();
        let st = dl(&g, 17);
        for e in [0u64, 1, 7, 15] {
            let mut honest: Vec<(u64, u64)> = (0..101)
                .map(|j| {
                    let j = g.scalar(j);
                    let z = <Schnorr as SigmaProtocol<ToyGroup>>::respond(&g, &j, e, &g.scalar(17));
                    (Schnorr::commitment_for(&g, &j).value(), z.value())
                })
                .collect();
            // simulator run over every possible z
            let mut sim: Vec<(u64, u64)> = (0..101)
                .map(|z| {
                    let z = g.scalar(z);
                    ((g.mul_base(&z) - st.point * g.scalar(e)).value(), z.value())
                })
                .collect();
            honest.sort();
            sim.sort();
            assert_eq!(honest, sim);
        }
    }

    #[test]
    fn simulated_transcripts_verify_off_language() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let g = Secp256k1Group::setup(b"sim");
        let st = DlStatement::<Secp256k1Group>::tagged(b"s", "l", g.h());
        for e in [0u64, 5, 8191] {
            let (a, z) = Schnorr::simulate(&g, &st, e, &mut rng);
            assert!(Schnorr::verify(&g, &st, &a, e, &z));
        }
        let dst = DleqStatement::<Secp256k1Group> { a: g.generator(), b: g.generator() };
        let (a, z) = ChaumPedersen::simulate(&g, &dst, 77, &mut rng);
        assert!(ChaumPedersen::verify(&g, &dst, &a, 77, &z));
    }

    #[test]
    fn special_soundness_random_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let g = Secp256k1Group::setup(b"ss");
        for _ in 0..100 {
            let m = g.random_scalar(&mut rng);
            let st = DlStatement::<Secp256k1Group>::tagged(b"s", "l", g.mul_base(&m));
            let (j, a) = Schnorr::commit(&g, &mut rng);
            let t = |e| SigmaTranscript {
                commitment: a,
                challenge: e,
                response: <Schnorr as SigmaProtocol<Secp256k1Group>>::respond(&g, &j, e, &m),
            };
            assert_eq!(Schnorr::extract(&g, &st, &t(3), &t(4000)).unwrap(), m);

            let r = g.random_scalar(&mut rng);
            let dst = DleqStatement::<Secp256k1Group> { a: g.mul_base(&r), b: g.h() * r };
            let (j, a) = ChaumPedersen::commit(&g, &mut rng);
            let t = |e| SigmaTranscript {
                commitment: a,
                challenge: e,
                response: <ChaumPedersen as SigmaProtocol<Secp256k1Group>>::respond(&g, &j, e, &r),
            };
            assert_eq!(ChaumPedersen::extract(&g, &dst, &t(1), &t(2)).unwrap(), r);
        }
    }

    #[test]
    fn dleq_toy() {
        let g = toy();
        let r = g.scalar(5);
        let st = DleqStatement::<ToyGroup> { a: g.mul_base(&r), b: g.h() * r };
        let j = g.scalar(13);
        let a = ChaumPedersen::commitment_for(&g, &j);
        assert_eq!((a.0.value(), a.1.value()), (13, 91));
        let t = |e| SigmaTranscript {
            commitment: a,
            challenge: e,
            response: <ChaumPedersen as SigmaProtocol<ToyGroup>>::respond(&g, &j, e, &r),
        };
        assert!(ChaumPedersen::verify(&g, &st, &a, 6, &t(6).response));
        assert_eq!(ChaumPedersen::extract(&g, &st, &t(6), &t(9)).unwrap().value(), 5);
        let degenerate = DleqStatement::<ToyGroup> { a: g.identity(), b: st.b };
        assert!(!ChaumPedersen::verify(&g, &degenerate, &a, 0, &j));
        let degenerate = DleqStatement::<ToyGroup> { a: st.a, b: g.identity() };
        assert!(!ChaumPedersen::verify(&g, &degenerate, &a, 0, &j));
    }
}
