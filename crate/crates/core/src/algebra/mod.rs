//! Prime-order group abstraction.
//!
//! Two instantiations: [`Secp256k1Group`] for production-size runs and [`ToyGroup`], the
//! additive group `Z_p` for small primes, where every discrete log is trivial and
//! exhaustive oracles are cheap.

mod secp;
mod toy;

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::codec::{CodecError, Value};

pub use secp::Secp256k1Group;
pub use toy::{ToyElement, ToyGroup, ToyScalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MathError {
    #[error("inverse of zero")]
    InverseOfZero,
    #[error("exclusion set covers the whole field")]
    ExclusionsTooLarge,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("{0} is not a prime greater than 3")]
    NotPrime(u64),
    #[error("toy prime {0} must be below 2^20")]
    PrimeTooLarge(u64),
    #[error("trapdoor {0} yields H in {{identity, G}}")]
    DegenerateTrapdoor(u64),
}

pub trait Group: Clone + Debug + Send + Sync + 'static {
    type Scalar: Copy
        + Eq
        + Debug
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;
    type Element: Copy
        + Eq
        + Debug
        + Send
        + Sync
        + Add<Output = Self::Element>
        + Sub<Output = Self::Element>
        + Neg<Output = Self::Element>
        + Mul<Self::Scalar, Output = Self::Element>;

    fn name(&self) -> &'static str;
    /// Bit length of the group order.
    fn order_bits(&self) -> u32;
    /// True iff `n` is strictly below the group order.
    fn order_exceeds(&self, n: u128) -> bool;
    fn scalar_len(&self) -> usize;
    fn element_len(&self) -> usize;

    fn generator(&self) -> Self::Element;
    /// Second generator `H` with unknown discrete log to base `G`.
    fn h(&self) -> Self::Element;
    fn identity(&self) -> Self::Element;

    fn scalar(&self, v: u64) -> Self::Scalar;
    fn invert(&self, s: &Self::Scalar) -> Result<Self::Scalar, MathError>;
    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> Self::Scalar;

    fn scalar_to_bytes(&self, s: &Self::Scalar) -> Vec<u8>;
    fn scalar_from_bytes(&self, b: &[u8]) -> Result<Self::Scalar, CodecError>;
    fn element_to_bytes(&self, e: &Self::Element) -> Vec<u8>;
    fn element_from_bytes(&self, b: &[u8]) -> Result<Self::Element, CodecError>;

    fn zero(&self) -> Self::Scalar {
        self.scalar(0)
    }

    fn one(&self) -> Self::Scalar {
        self.scalar(1)
    }

    fn mul_base(&self, s: &Self::Scalar) -> Self::Element {
        self.generator() * *s
    }

    fn is_identity(&self, e: &Self::Element) -> bool {
        *e == self.identity()
    }

    /// Uniform over `Z_p` minus `exclusions`, by rejection.
    fn random_scalar_excluding<R: RngCore + CryptoRng + ?Sized>(
        &self,
        rng: &mut R,
        exclusions: &[Self::Scalar],
    ) -> Result<Self::Scalar, MathError> {
        if !self.order_exceeds(exclusions.len() as u128) {
            return Err(MathError::ExclusionsTooLarge);
        }
        loop {
            let s = self.random_scalar(rng);
            if !exclusions.contains(&s) {
                return Ok(s);
            }
        }
    }

    fn random_nonzero_scalar<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> Self::Scalar {
        self.random_scalar_excluding(rng, &[self.zero()])
            .expect("a prime field has a nonzero element")
    }

    fn scalar_value(&self, s: &Self::Scalar) -> Value {
        Value::Scalar(self.scalar_to_bytes(s))
    }

    fn element_value(&self, e: &Self::Element) -> Value {
        Value::Element(self.element_to_bytes(e))
    }

    fn parse_scalar(&self, v: &Value) -> Result<Self::Scalar, CodecError> {
        match v {
            Value::Scalar(b) => self.scalar_from_bytes(b),
            _ => Err(CodecError::Shape("expected scalar")),
        }
    }

    fn parse_element(&self, v: &Value) -> Result<Self::Element, CodecError> {
        match v {
            Value::Element(b) => self.element_from_bytes(b),
            _ => Err(CodecError::Shape("expected group element")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn homomorphism<G: Group>(grp: &G, trials: usize) {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..trials {
            let a = grp.random_scalar(&mut rng);
            let b = grp.random_scalar(&mut rng);
            assert_eq!(grp.mul_base(&(a + b)), grp.mul_base(&a) + grp.mul_base(&b));
        }
    }

    #[test]
    fn scalar_mul_is_homomorphic() {
        homomorphism(&ToyGroup::setup(101, 7).unwrap(), 1000);
        homomorphism(&Secp256k1Group::setup(b"homomorphism"), 1000);
    }

    fn encoding_round_trip<G: Group>(grp: &G) {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            let s = grp.random_scalar(&mut rng);
            let e = grp.mul_base(&s);
            assert_eq!(grp.parse_scalar(&grp.scalar_value(&s)).unwrap(), s);
            assert_eq!(grp.parse_element(&grp.element_value(&e)).unwrap(), e);
            assert_eq!(grp.scalar_to_bytes(&s).len(), grp.scalar_len());
            assert_eq!(grp.element_to_bytes(&e).len(), grp.element_len());
        }
        let id = grp.identity();
        assert_eq!(grp.parse_element(&grp.element_value(&id)).unwrap(), id);
    }

    #[test]
    fn encodings_round_trip() {
        encoding_round_trip(&ToyGroup::setup(101, 7).unwrap());
        encoding_round_trip(&Secp256k1Group::setup(b"codec"));
    }

    #[test]
    fn zero_and_order_multiples() {
        let toy = ToyGroup::setup(101, 7).unwrap();
        assert_eq!(toy.generator() * toy.zero(), toy.identity());
        assert_eq!(toy.generator() * toy.scalar(101), toy.identity());
        let secp = Secp256k1Group::setup(b"z");
        assert_eq!(secp.h() * secp.zero(), secp.identity());
    }

    #[test]
    fn excluding_sampler_avoids_set() {
        let toy = ToyGroup::setup(5, 2).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let excl = [toy.scalar(0), toy.scalar(1), toy.scalar(2)];
        for _ in 0..200 {
            let s = toy.random_scalar_excluding(&mut rng, &excl).unwrap();
            assert!(!excl.contains(&s));
        }
        let all: Vec<_> = (0..5).map(|v| toy.scalar(v)).collect();
        assert_eq!(
            toy.random_scalar_excluding(&mut rng, &all),
            Err(MathError::ExclusionsTooLarge)
        );
    }
}
