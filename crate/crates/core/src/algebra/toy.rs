use std::ops::{Add, Mul, Neg, Sub};

use rand::{CryptoRng, Rng, RngCore};

use super::{Group, MathError, ParamError};
use crate::codec::CodecError;

const TOY_PRIME_LIMIT: u64 = 1 << 20;

/// The additive group `Z_p` with `G = 1` and `H = x` for a chosen trapdoor `x`.
///
/// Discrete logs are trivial here. The trapdoor is only readable after
/// [`ToyGroup::expose_trapdoor`] has been called explicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyGroup {
    p: u32,
    h: u32,
    width: usize,
    trapdoor_exposed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyScalar {
    v: u32,
    p: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ToyElement {
    v: u32,
    p: u32,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

impl ToyGroup {
    pub fn setup(prime: u64, trapdoor: u64) -> Result<Self, ParamError> {
        if prime >= TOY_PRIME_LIMIT {
            return Err(ParamError::PrimeTooLarge(prime));
        }
        if prime <= 3 || !is_prime(prime) {
            return Err(ParamError::NotPrime(prime));
        }
        let h = trapdoor % prime;
        if h == 0 || h == 1 {
            return Err(ParamError::DegenerateTrapdoor(trapdoor));
        }
        let bits = 64 - (prime - 1).leading_zeros() as usize;
        Ok(Self {
            p: prime as u32,
            h: h as u32,
            width: bits.div_ceil(8),
            trapdoor_exposed: false,
        })
    }

    /// Opt in to reading the discrete log of `H`. Test tooling only.
    pub fn expose_trapdoor(mut self) -> Self {
        self.trapdoor_exposed = true;
        self
    }

    pub fn trapdoor(&self) -> Option<ToyScalar> {
        self.trapdoor_exposed.then(|| self.scalar(self.h as u64))
    }

    pub fn modulus(&self) -> u64 {
        self.p as u64
    }

    pub fn element(&self, v: u64) -> ToyElement {
        ToyElement {
            v: (v % self.p as u64) as u32,
            p: self.p,
        }
    }
}

impl ToyScalar {
    pub fn value(&self) -> u64 {
        self.v as u64
    }
}

impl ToyElement {
    /// The element's discrete log to base `G = 1`, i.e. its residue.
    pub fn value(&self) -> u64 {
        self.v as u64
    }
}

macro_rules! toy_ring_ops {
    ($t:ty) => {
        impl Add for $t {
            type Output = $t;
            fn add(self, o: $t) -> $t {
                debug_assert_eq!(self.p, o.p);
                Self {
                    v: ((self.v as u64 + o.v as u64) % self.p as u64) as u32,
                    p: self.p,
                }
            }
        }

        impl Sub for $t {
            type Output = $t;
            fn sub(self, o: $t) -> $t {
                debug_assert_eq!(self.p, o.p);
                Self {
                    v: ((self.v as u64 + self.p as u64 - o.v as u64) % self.p as u64) as u32,
                    p: self.p,
                }
            }
        }

        impl Neg for $t {
            type Output = $t;
            fn neg(self) -> $t {
                Self {
                    v: ((self.p - self.v) % self.p),
                    p: self.p,
                }
            }
        }
    };
}

toy_ring_ops!(ToyScalar);
toy_ring_ops!(ToyElement);

impl Mul for ToyScalar {
    type Output = ToyScalar;
    fn mul(self, o: ToyScalar) -> ToyScalar {
        debug_assert_eq!(self.p, o.p);
        ToyScalar {
            v: ((self.v as u64 * o.v as u64) % self.p as u64) as u32,
            p: self.p,
        }
    }
}

impl Mul<ToyScalar> for ToyElement {
    type Output = ToyElement;
    fn mul(self, s: ToyScalar) -> ToyElement {
        debug_assert_eq!(self.p, s.p);
        ToyElement {
            v: ((self.v as u64 * s.v as u64) % self.p as u64) as u32,
            p: self.p,
        }
    }
}

fn to_be(v: u32, width: usize) -> Vec<u8> {
    v.to_be_bytes()[4 - width..].to_vec()
}

fn from_be(b: &[u8], width: usize) -> Option<u64> {
    if b.len() != width {
        return None;
    }
    Some(b.iter().fold(0u64, |acc, x| (acc << 8) | *x as u64))
}

impl Group for ToyGroup {
    type Scalar = ToyScalar;
    type Element = ToyElement;

    fn name(&self) -> &'static str {
        "toy"
    }

    fn order_bits(&self) -> u32 {
        64 - (self.p as u64).leading_zeros()
    }

    fn order_exceeds(&self, n: u128) -> bool {
        n < self.p as u128
    }

    fn scalar_len(&self) -> usize {
        self.width
    }

    fn element_len(&self) -> usize {
        self.width
    }

    fn generator(&self) -> ToyElement {
        self.element(1)
    }

    fn h(&self) -> ToyElement {
        self.element(self.h as u64)
    }

    fn identity(&self) -> ToyElement {
        self.element(0)
    }

    fn scalar(&self, v: u64) -> ToyScalar {
        ToyScalar {
            v: (v % self.p as u64) as u32,
            p: self.p,
        }
    }

    fn invert(&self, s: &ToyScalar) -> Result<ToyScalar, MathError> {
        if s.v == 0 {
            return Err(MathError::InverseOfZero);
        }
        // Extended Euclid over i64.
        let (mut r0, mut r1) = (self.p as i64, s.v as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        Ok(self.scalar(t0.rem_euclid(self.p as i64) as u64))
    }

    fn random_scalar<R: RngCore + CryptoRng + ?Sized>(&self, rng: &mut R) -> ToyScalar {
        self.scalar(rng.gen_range(0..self.p as u64))
    }

    fn scalar_to_bytes(&self, s: &ToyScalar) -> Vec<u8> {
        to_be(s.v, self.width)
    }

    fn scalar_from_bytes(&self, b: &[u8]) -> Result<ToyScalar, CodecError> {
        match from_be(b, self.width) {
            Some(v) if v < self.p as u64 => Ok(self.scalar(v)),
            _ => Err(CodecError::NonCanonicalScalar),
        }
    }

    fn element_to_bytes(&self, e: &ToyElement) -> Vec<u8> {
        to_be(e.v, self.width)
    }

    fn element_from_bytes(&self, b: &[u8]) -> Result<ToyElement, CodecError> {
        match from_be(b, self.width) {
            Some(v) if v < self.p as u64 => Ok(self.element(v)),
            _ => Err(CodecError::NonCanonicalElement),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_toy_101() {
        let g = ToyGroup::setup(101, 7).unwrap();
        assert_eq!(g.modulus(), 101);
        assert_eq!(g.generator().value(), 1);
        assert_eq!(g.h().value(), 7);
        assert_eq!(g.trapdoor(), None);
        assert_eq!(g.expose_trapdoor().trapdoor().unwrap().value(), 7);
    }

    #[test]
    fn setup_rejects_bad_params() {
        assert_eq!(ToyGroup::setup(100, 7), Err(ParamError::NotPrime(100)));
        assert_eq!(ToyGroup::setup(3, 2), Err(ParamError::NotPrime(3)));
        assert!(matches!(ToyGroup::setup(1 << 20, 7), Err(ParamError::PrimeTooLarge(_))));
        assert_eq!(ToyGroup::setup(101, 102), Err(ParamError::DegenerateTrapdoor(102)));
        assert_eq!(ToyGroup::setup(101, 0), Err(ParamError::DegenerateTrapdoor(0)));
    }

    #[test]
    fn inverse_of_five_mod_101() {
        let g = ToyGroup::setup(101, 7).unwrap();
        assert_eq!(g.invert(&g.scalar(5)).unwrap().value(), 81);
        assert_eq!(g.invert(&g.zero()), Err(MathError::InverseOfZero));
        for v in 1..101 {
            let s = g.scalar(v);
            assert_eq!(s * g.invert(&s).unwrap(), g.one());
        }
    }

    #[test]
    fn scalar_mul_is_bijective() {
        for p in [5u64, 101, 1009] {
            let g = ToyGroup::setup(p, 2).unwrap();
            let mut seen = vec![false; p as usize];
            for s in 0..p {
                let e = g.mul_base(&g.scalar(s));
                assert!(!seen[e.value() as usize]);
                seen[e.value() as usize] = true;
            }
            assert!(seen.iter().all(|x| *x));
        }
    }

    #[test]
    fn encoding_width_and_canonicality() {
        let g = ToyGroup::setup(101, 7).unwrap();
        assert_eq!(g.scalar_len(), 1);
        assert_eq!(g.scalar_from_bytes(&[101]), Err(CodecError::NonCanonicalScalar));
        assert_eq!(g.element_from_bytes(&[0, 1]), Err(CodecError::NonCanonicalElement));
        let big = ToyGroup::setup(65537, 3).unwrap();
        assert_eq!(big.scalar_len(), 3);
        assert_eq!(big.scalar_to_bytes(&big.scalar(65536)), vec![1, 0, 0]);
    }
}
