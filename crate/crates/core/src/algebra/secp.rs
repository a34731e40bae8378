use k256::elliptic_curve::group::Group as _;
use k256::elliptic_curve::hash2curve::{ExpandMsgXmd, GroupDigest};
use k256::elliptic_curve::sec1::{FromEncodedPoint, ToEncodedPoint};
use k256::elliptic_curve::{Field, PrimeField};
use k256::{AffinePoint, EncodedPoint, FieldBytes, ProjectivePoint, Scalar, Secp256k1};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use super::{Group, MathError};
use crate::codec::{encode, CodecError, Value};

const H2C_DST: &[u8] = b"STARDKG-V1-SECP256K1_XMD:SHA-256_SSWU_RO_";
const POINT_LEN: usize = 33;

/// secp256k1 with `H` derived from a public seed by hash-to-curve.
///
/// `H = H2C(⟨"USV.H", seed, counter⟩)` for the least counter giving `H ∉ {identity, G}`.
/// The discrete log of `H` is never computed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Secp256k1Group {
    h: ProjectivePoint,
    seed: Vec<u8>,
    counter: u64,
}

impl Secp256k1Group {
    pub fn setup(beacon_seed: &[u8]) -> Self {
        let mut counter = 0u64;
        loop {
            let msg = encode(&Value::tuple(vec![
                Value::label("USV.H"),
                Value::bytes(beacon_seed),
                Value::U64(counter),
            ]));
            let h = Secp256k1::hash_from_bytes::<ExpandMsgXmd<Sha256>>(&[&msg], &[H2C_DST])
                .expect("fixed DST and message lengths are within hash-to-curve limits");
            if !bool::from(h.is_identity()) && h != ProjectivePoint::GENERATOR {
                return Self {
                    h,
                    seed: beacon_seed.to_vec(),
                    counter,
                };
            }
            counter += 1;
        }
    }

    pub fn seed(&self) -> &[u8] {
        &self.seed
    }

    /// Resampling counter that produced `H`.
    pub fn counter(&self) -> u64 {
        self.counter
    }
}

impl Group for Secp256k1Group {
    type Scalar = Scalar;
    type Element = ProjectivePoint;

    fn name(&self) -> &'static str {
        "secp256k1"
    }

    fn order_bits(&self) -> u32 {
        256
    }

    fn order_exceeds(&self, _n: u128) -> bool {
        true
    }

    fn scalar_len(&self) -> usize {
        32
    }

    fn element_len(&self) -> usize {
        POINT_LEN
    }

    fn generator(&self) -> ProjectivePoint {
        ProjectivePoint::GENERATOR
    }

    fn h(&self) -> ProjectivePoint {
        self.h
    }

    fn identity(&self) -> ProjectivePoint {
        ProjectivePoint::IDENTITY
    }

    fn scalar(&self, v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn invert(&self, s: &Scalar) -> Result<Scalar, MathError> {
        Option::from(s.invert()).ok_or(MathError::InverseOfZero)
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> Scalar {
        Scalar::random(rng)
    }

    fn scalar_to_bytes(&self, s: &Scalar) -> Vec<u8> {
        s.to_bytes().to_vec()
    }

    fn scalar_from_bytes(&self, b: &[u8]) -> Result<Scalar, CodecError> {
        if b.len() != 32 {
            return Err(CodecError::NonCanonicalScalar);
        }
        Option::from(Scalar::from_repr(*FieldBytes::from_slice(b)))
            .ok_or(CodecError::NonCanonicalScalar)
    }

    /// SEC1 compressed form; the identity is 33 zero bytes so the width stays fixed.
    fn element_to_bytes(&self, e: &ProjectivePoint) -> Vec<u8> {
        if bool::from(e.is_identity()) {
            return vec![0u8; POINT_LEN];
        }
        e.to_affine().to_encoded_point(true).as_bytes().to_vec()
    }

    fn element_from_bytes(&self, b: &[u8]) -> Result<ProjectivePoint, CodecError> {
        if b.len() != POINT_LEN {
            return Err(CodecError::NonCanonicalElement);
        }
        if b.iter().all(|x| *x == 0) {
            return Ok(ProjectivePoint::IDENTITY);
        }
        if b[0] != 0x02 && b[0] != 0x03 {
            return Err(CodecError::NonCanonicalElement);
        }
        let ep = EncodedPoint::from_bytes(b).map_err(|_| CodecError::NonCanonicalElement)?;
        Option::<AffinePoint>::from(AffinePoint::from_encoded_point(&ep))
            .map(ProjectivePoint::from)
            .ok_or(CodecError::NonCanonicalElement)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_is_deterministic() {
        let a = Secp256k1Group::setup(b"seed-a");
        let b = Secp256k1Group::setup(b"seed-a");
        assert_eq!(a.h(), b.h());
        assert_ne!(a.h(), a.identity());
        assert_ne!(a.h(), a.generator());
    }

    #[test]
    fn distinct_seeds_distinct_h() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..100u32 {
            for seed in [format!("a{i}"), format!("b{i}")] {
                let g = Secp256k1Group::setup(seed.as_bytes());
                assert!(seen.insert(g.element_to_bytes(&g.h())));
            }
        }
    }

    #[test]
    fn rejects_non_canonical_encodings() {
        let g = Secp256k1Group::setup(b"x");
        assert!(g.scalar_from_bytes(&[0xff; 32]).is_err());
        assert!(g.scalar_from_bytes(&[0; 31]).is_err());
        let mut bad = g.element_to_bytes(&g.generator());
        bad[0] = 0x04;
        assert!(g.element_from_bytes(&bad).is_err());
        // x-coordinate above the field modulus
        let mut over = vec![0x02];
        over.extend_from_slice(&[0xff; 32]);
        assert!(g.element_from_bytes(&over).is_err());
    }

    #[test]
    fn order_times_generator_is_identity() {
        let g = Secp256k1Group::setup(b"x");
        let n_minus_1 = -g.one();
        assert_eq!(g.mul_base(&n_minus_1) + g.generator(), g.identity());
    }
}
