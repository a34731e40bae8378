//! KeyBox-to-KeyBox sealing: ECIES over secp256k1 with HKDF-SHA256 and ChaCha20-Poly1305.
//!
//! Each blob uses a fresh ephemeral key, so the derived AEAD key is unique per message
//! and a fixed nonce is safe. The associated data is bound as AEAD AAD; the digest
//! carried in the blob is informational and never trusted on open.

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use k256::elliptic_curve::group::GroupEncoding;
use k256::elliptic_curve::Field;
use k256::{ProjectivePoint, Scalar};
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

use crate::codec::{CodecError, Value};
use crate::transport::PartyId;

const KDF_INFO: &[u8] = b"stardkg keybox seal v1";

#[derive(Clone)]
pub struct SealingKeypair {
    sk: Scalar,
    pk: ProjectivePoint,
}

impl std::fmt::Debug for SealingKeypair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SealingKeypair").field("pk", &hex::encode(self.pk.to_bytes())).finish_non_exhaustive()
    }
}

impl SealingKeypair {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let sk = loop {
            let s = Scalar::random(&mut *rng);
            if !bool::from(s.is_zero()) {
                break s;
            }
        };
        Self {
            sk,
            pk: ProjectivePoint::GENERATOR * sk,
        }
    }

    pub fn public(&self) -> SealingPublicKey {
        SealingPublicKey(self.pk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SealingPublicKey(ProjectivePoint);

/// Fixed party → sealing-key directory shared by all KeyBoxes of one deployment.
#[derive(Debug, Clone, Default)]
pub struct SealingDirectory {
    keys: BTreeMap<PartyId, SealingPublicKey>,
}

impl SealingDirectory {
    pub fn new(entries: impl IntoIterator<Item = (PartyId, SealingPublicKey)>) -> Self {
        Self {
            keys: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, p: &PartyId) -> Option<&SealingPublicKey> {
        self.keys.get(p)
    }
}

/// Wire form: `Tuple[recipient, kem-ct, dem-ct, ad-digest]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedBlob {
    pub recipient: PartyId,
    pub kem_ct: Vec<u8>,
    pub dem_ct: Vec<u8>,
    pub ad_digest: [u8; 32],
}

impl SealedBlob {
    pub fn to_value(&self) -> Value {
        Value::tuple(vec![
            self.recipient.value(),
            Value::bytes(&self.kem_ct),
            Value::bytes(&self.dem_ct),
            Value::bytes(self.ad_digest),
        ])
    }

    pub fn from_value(v: &Value) -> Result<Self, CodecError> {
        let it = v.as_tuple_of(4)?;
        Ok(Self {
            recipient: PartyId::from_value(&it[0])?,
            kem_ct: it[1].as_bytes()?.to_vec(),
            dem_ct: it[2].as_bytes()?.to_vec(),
            ad_digest: it[3]
                .as_bytes()?
                .try_into()
                .map_err(|_| CodecError::Shape("ad digest length"))?,
        })
    }
}

fn dem_key(shared: &ProjectivePoint, epk: &[u8], pk: &[u8]) -> Key {
    let mut salt = Vec::with_capacity(epk.len() + pk.len());
    salt.extend_from_slice(epk);
    salt.extend_from_slice(pk);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared.to_bytes().as_slice());
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm).expect("32 bytes is a valid HKDF-SHA256 length");
    Key::from(okm)
}

/// Public-key encryption of `plaintext` to `recipient` under associated data `ad`.
pub fn seal<R: RngCore + CryptoRng + ?Sized>(
    rng: &mut R,
    recipient: &PartyId,
    pk: &SealingPublicKey,
    ad: &[u8],
    plaintext: &[u8],
) -> SealedBlob {
    let eph = SealingKeypair::generate(rng);
    let epk = eph.pk.to_bytes();
    let key = dem_key(&(pk.0 * eph.sk), epk.as_slice(), pk.0.to_bytes().as_slice());
    let dem_ct = ChaCha20Poly1305::new(&key)
        .encrypt(&Nonce::default(), Payload { msg: plaintext, aad: ad })
        .expect("ChaCha20-Poly1305 encryption of a short message cannot fail");
    SealedBlob {
        recipient: recipient.clone(),
        kem_ct: epk.to_vec(),
        dem_ct,
        ad_digest: Sha256::digest(ad).into(),
    }
}

/// Returns `None` on any decapsulation or authentication failure.
pub fn open(kp: &SealingKeypair, ad: &[u8], blob: &SealedBlob) -> Option<Vec<u8>> {
    let epk_bytes: [u8; 33] = blob.kem_ct.as_slice().try_into().ok()?;
    let epk = Option::<ProjectivePoint>::from(ProjectivePoint::from_bytes(&epk_bytes.into()))?;
    let key = dem_key(&(epk * kp.sk), &epk_bytes, kp.pk.to_bytes().as_slice());
    ChaCha20Poly1305::new(&key)
        .decrypt(&Nonce::default(), Payload { msg: &blob.dem_ct, aad: ad })
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn round_trip_and_integrity() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let alice = SealingKeypair::generate(&mut rng);
        let bob = SealingKeypair::generate(&mut rng);
        let p = PartyId::new("alice");
        let blob = seal(&mut rng, &p, &alice.public(), b"ad", b"secret");
        assert_eq!(open(&alice, b"ad", &blob).as_deref(), Some(&b"secret"[..]));
        assert!(open(&alice, b"ad2", &blob).is_none());
        assert!(open(&bob, b"ad", &blob).is_none());
        let mut t = blob.clone();
        t.dem_ct[0] ^= 1;
        assert!(open(&alice, b"ad", &t).is_none());
        let again = seal(&mut rng, &p, &alice.public(), b"ad", b"secret");
        assert_ne!(again.dem_ct, blob.dem_ct);
        assert_eq!(SealedBlob::from_value(&blob.to_value()).unwrap(), blob);
    }
}
