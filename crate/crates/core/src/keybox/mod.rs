//! Simulated per-party keystore exposing only the SDKG admissible profile.
//!
//! Resident scalars live in a write-once slot table and never leave the box in the clear.
//! Every entry point is `load` (install a scalar via an allowlisted derivation) or `use_op`
//! (run an allowlisted operation); both return `None` for every failure so that callers
//! cannot distinguish the cause.

pub mod seal;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::Group;
use crate::codec::{decode, encode, Value};
use crate::fischlin::{proof_from_value, proof_value, DlProof, Fischlin, FischlinParams};
use crate::oracle::{ctx, CallerId, Oracle};
use crate::sigma::{DlStatement, Schnorr, SigmaProtocol};
use crate::transport::PartyId;
use crate::usv::{Usv, UsvCertificate};
use seal::{SealedBlob, SealingDirectory, SealingKeypair};

pub mod derivation {
    pub const G12: &str = "g12";
    pub const G13: &str = "g13";
    pub const G2: &str = "g2";
    pub const G3: &str = "g3";
    pub const G31_REG: &str = "g31_reg";
    pub const G32_REG: &str = "g32_reg";
    pub const G23_REG: &str = "g23_reg";
    pub const ALL: [&str; 7] = [G12, G13, G2, G3, G31_REG, G32_REG, G23_REG];
}

pub mod op {
    pub const GET_PUB: &str = "GetPub";
    pub const LEAF_INIT: &str = "SDKG.LeafInit";
    pub const USV_CERT: &str = "USV.Cert";
    pub const FS_START: &str = "FS.Start";
    pub const FS_PROVE: &str = "FS.Prove";
    pub const SEAL_TO_PEER: &str = "SealToPeer";
    pub const OPEN_FROM_PEER: &str = "OpenFromPeer";
    pub const ALL: [&str; 7] = [GET_PUB, LEAF_INIT, USV_CERT, FS_START, FS_PROVE, SEAL_TO_PEER, OPEN_FROM_PEER];
}

/// Slot tags used by the SDKG deployment.
pub mod tag {
    pub const K12: &str = "k12";
    pub const K13: &str = "k13";
    pub const K2: &str = "k2";
    pub const K3: &str = "k3";
    pub const K31: &str = "k31";
    pub const K32: &str = "k32";
    pub const K23: &str = "k23";
}

const HANDLE_LABEL: &str = "hdl";
const FS_HANDLE_LABEL: &str = "fs";
const REG_LABEL: &str = "SDKG.reg";

/// `encode(⟨sid, tag⟩)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotId(Vec<u8>);

impl SlotId {
    pub fn new(sid: &[u8], tag: &str) -> Self {
        Self(encode(&Value::tuple(vec![Value::bytes(sid), Value::label(tag)])))
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    /// `(sid, tag)` if the id has the standard layout.
    pub fn parts(&self) -> Option<(Vec<u8>, String)> {
        let v = decode(&self.0).ok()?;
        let it = v.as_tuple_of(2).ok()?;
        Some((
            it[0].as_bytes().ok()?.to_vec(),
            String::from_utf8(it[1].as_label().ok()?.to_vec()).ok()?,
        ))
    }
}

/// Associated data `⟨SDKG.reg, sid, sender, recipient, tag⟩` for a registration transfer.
pub fn registration_ad(sid: &[u8], sender: &PartyId, recipient: &PartyId, tag: &str) -> Vec<u8> {
    encode(&Value::tuple(vec![
        Value::label(REG_LABEL),
        Value::bytes(sid),
        sender.value(),
        recipient.value(),
        Value::label(tag),
    ]))
}

fn ad_tag(ad: &[u8]) -> Option<Vec<u8>> {
    let v = decode(ad).ok()?;
    let it = v.as_tuple_of(5).ok()?;
    if !it[0].is_label(REG_LABEL) {
        return None;
    }
    it[1].as_bytes().ok()?;
    it[2].as_party().ok()?;
    it[3].as_party().ok()?;
    Some(it[4].as_label().ok()?.to_vec())
}

/// One-shot reference to a buffered `(ad, scalar)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BufHandle(pub [u8; 16]);

impl BufHandle {
    pub fn to_value(&self) -> Value {
        Value::tuple(vec![Value::label(HANDLE_LABEL), Value::bytes(self.0)])
    }

    fn parse(v: &Value) -> Option<Self> {
        let it = v.as_tuple_of(2).ok()?;
        if !it[0].is_label(HANDLE_LABEL) {
            return None;
        }
        Some(Self(it[1].as_bytes().ok()?.try_into().ok()?))
    }
}

/// LinOS session handle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FsHandle(pub [u8; 16]);

impl FsHandle {
    pub fn to_value(&self) -> Value {
        Value::tuple(vec![Value::label(FS_HANDLE_LABEL), Value::bytes(self.0)])
    }

    fn parse(v: &Value) -> Option<Self> {
        let it = v.as_tuple_of(2).ok()?;
        if !it[0].is_label(FS_HANDLE_LABEL) {
            return None;
        }
        Some(Self(it[1].as_bytes().ok()?.try_into().ok()?))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KeyBoxConfig {
    /// Test knob: accept restores of older checkpoints, i.e. a broken state-continuity
    /// assumption. Never set outside adversarial tests.
    pub allow_rollback: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyBoxError {
    #[error("checkpoint epoch {checkpoint} is not newer than current epoch {current}")]
    Rollback { checkpoint: u64, current: u64 },
    #[error("checkpoint belongs to {0}")]
    ForeignCheckpoint(PartyId),
}

#[derive(Clone)]
struct Buffered<G: Group> {
    ad: Vec<u8>,
    s: G::Scalar,
}

#[derive(Clone)]
struct LinOs<G: Group> {
    slot: SlotId,
    stmt: DlStatement<G>,
    nonces: Vec<G::Scalar>,
    commitments: Vec<G::Element>,
    sealed: bool,
}

#[derive(Clone)]
struct State<G: Group> {
    slots: BTreeMap<SlotId, G::Scalar>,
    buf: HashMap<[u8; 16], Buffered<G>>,
    fs: HashMap<[u8; 16], LinOs<G>>,
    epoch: u64,
    rng: ChaCha20Rng,
}

/// Opaque copy of a KeyBox's full internal state, including its randomness.
pub struct Checkpoint<G: Group> {
    owner: PartyId,
    state: State<G>,
}

impl<G: Group> Checkpoint<G> {
    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }
}

/// Owner-visible metadata. Carries no resident scalar, buffered payload or nonce.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct VisibleState {
    pub owner: PartyId,
    pub epoch: u64,
    pub slots: Vec<VisibleSlot>,
    pub fs_handles: Vec<VisibleFsHandle>,
    pub buffered_handles: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct VisibleSlot {
    pub sid: String,
    pub tag: String,
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct VisibleFsHandle {
    pub handle: String,
    pub sealed: bool,
}

/// Output of `SDKG.LeafInit`: a certificate over fresh `m2` and the three evaluations of
/// `f2(x) = m2 + b2·x`.
#[derive(Debug, Clone)]
pub struct LeafInitOutput<G: Group> {
    pub cert: UsvCertificate<G>,
    pub b2: G::Element,
    pub s21: G::Scalar,
    pub s22: G::Scalar,
    pub s23: G::Scalar,
}

pub struct KeyBox<G: Group> {
    owner: PartyId,
    caller: CallerId,
    grp: G,
    oracle: Arc<Oracle>,
    params: FischlinParams,
    sealing: SealingKeypair,
    directory: Arc<SealingDirectory>,
    config: KeyBoxConfig,
    state: State<G>,
}

impl<G: Group> std::fmt::Debug for KeyBox<G> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyBox")
            .field("owner", &self.owner)
            .field("epoch", &self.state.epoch)
            .field("slots", &self.state.slots.len())
            .finish_non_exhaustive()
    }
}

/// Creates one KeyBox per party with a shared sealing-key directory.
pub fn provision<G: Group, R: RngCore + rand::CryptoRng>(
    parties: &[PartyId],
    grp: &G,
    oracle: &Arc<Oracle>,
    params: FischlinParams,
    config: KeyBoxConfig,
    rng: &mut R,
) -> BTreeMap<PartyId, KeyBox<G>> {
    let keys: Vec<_> = parties.iter().map(|p| (p.clone(), SealingKeypair::generate(rng))).collect();
    let directory = Arc::new(SealingDirectory::new(keys.iter().map(|(p, k)| (p.clone(), k.public()))));
    keys.into_iter()
        .map(|(p, kp)| {
            let kb = KeyBox::new(p.clone(), grp.clone(), oracle.clone(), params, kp, directory.clone(), config, rng.gen());
            (p, kb)
        })
        .collect()
}

impl<G: Group> KeyBox<G> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        owner: PartyId,
        grp: G,
        oracle: Arc<Oracle>,
        params: FischlinParams,
        sealing: SealingKeypair,
        directory: Arc<SealingDirectory>,
        config: KeyBoxConfig,
        seed: [u8; 32],
    ) -> Self {
        let caller = CallerId::new(format!("keybox:{}", owner.as_str()));
        Self {
            owner,
            caller,
            grp,
            oracle,
            params,
            sealing,
            directory,
            config,
            state: State {
                slots: BTreeMap::new(),
                buf: HashMap::new(),
                fs: HashMap::new(),
                epoch: 0,
                rng: ChaCha20Rng::from_seed(seed),
            },
        }
    }

    pub fn owner(&self) -> &PartyId {
        &self.owner
    }

    pub fn group(&self) -> &G {
        &self.grp
    }

    /// The public sealing-key directory this box seals against.
    pub fn directory(&self) -> Arc<SealingDirectory> {
        self.directory.clone()
    }

    /// Oracle caller id under which this box's internal queries are logged.
    pub fn caller(&self) -> &CallerId {
        &self.caller
    }

    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }

    pub fn is_occupied(&self, slot: &SlotId) -> bool {
        self.state.slots.contains_key(slot)
    }

    pub fn slot_ids(&self) -> Vec<SlotId> {
        self.state.slots.keys().cloned().collect()
    }

    fn tick(&mut self) {
        self.state.epoch += 1;
    }

    fn fresh_token(&mut self) -> [u8; 16] {
        let mut t = [0u8; 16];
        self.state.rng.fill_bytes(&mut t);
        t
    }

    /// `Load(slot, g, m)`.
    pub fn load(&mut self, slot: &SlotId, g: &str, m: &Value) -> Option<()> {
        self.tick();
        if self.state.slots.contains_key(slot) || !derivation::ALL.contains(&g) {
            return None;
        }
        let resolved = self.resolve(m)?;
        let k = self.derive(g, &resolved)?;
        self.state.slots.insert(slot.clone(), k);
        Some(())
    }

    /// Replaces every top-level handle component by `⟨ad, scalar⟩`, consuming the handles.
    /// All-or-nothing: on failure the buffer is untouched.
    fn resolve(&mut self, m: &Value) -> Option<Vec<Value>> {
        let items = m.as_tuple().ok()?;
        let mut tokens = Vec::new();
        for it in items {
            if let Some(h) = BufHandle::parse(it) {
                if tokens.contains(&h.0) || !self.state.buf.contains_key(&h.0) {
                    return None;
                }
                tokens.push(h.0);
            }
        }
        Some(
            items
                .iter()
                .map(|it| match BufHandle::parse(it) {
                    Some(h) => {
                        let b = self.state.buf.remove(&h.0).expect("checked above");
                        Value::tuple(vec![Value::bytes(b.ad), self.grp.scalar_value(&b.s)])
                    }
                    None => it.clone(),
                })
                .collect(),
        )
    }

    fn derive(&self, g: &str, args: &[Value]) -> Option<G::Scalar> {
        let grp = &self.grp;
        let scalars = |n: usize| -> Option<Vec<G::Scalar>> {
            if args.len() != n {
                return None;
            }
            args.iter().map(|v| grp.parse_scalar(v).ok()).collect()
        };
        let sum = |v: &[G::Scalar]| v.iter().fold(grp.zero(), |a, b| a + *b);
        match g {
            derivation::G12 => {
                let s = scalars(3)?;
                Some(grp.scalar(3) * sum(&s))
            }
            derivation::G13 => {
                let s = scalars(4)?;
                Some(grp.scalar(2) * s[3] - sum(&s[..3]))
            }
            derivation::G2 => {
                let s = scalars(3)?;
                Some(-(grp.scalar(2) * sum(&s)))
            }
            derivation::G3 => {
                if args.len() != 5 {
                    return None;
                }
                let tags = [tag::K23, tag::K32, tag::K31];
                let plain: Option<Vec<_>> = args[..3].iter().map(|v| grp.parse_scalar(v).ok()).collect();
                let s = match plain {
                    Some(s) => s,
                    None => args[..3]
                        .iter()
                        .zip(tags)
                        .map(|(v, t)| self.tagged_scalar(v, t))
                        .collect::<Option<Vec<_>>>()?,
                };
                let big_k = grp.parse_element(&args[3]).ok()?;
                let k13 = grp.parse_element(&args[4]).ok()?;
                let k3 = grp.scalar(2) * (s[0] + grp.scalar(2) * s[2] - s[1]);
                (k13 + grp.mul_base(&k3) == big_k).then_some(k3)
            }
            derivation::G31_REG | derivation::G32_REG | derivation::G23_REG => {
                let t = match g {
                    derivation::G31_REG => tag::K31,
                    derivation::G32_REG => tag::K32,
                    _ => tag::K23,
                };
                if args.len() != 1 {
                    return None;
                }
                grp.parse_scalar(&args[0]).ok().or_else(|| self.tagged_scalar(&args[0], t))
            }
            _ => None,
        }
    }

    /// `⟨ad, σ⟩` with `ad` a registration string whose tag is `expected`.
    fn tagged_scalar(&self, v: &Value, expected: &str) -> Option<G::Scalar> {
        let it = v.as_tuple_of(2).ok()?;
        let tag = ad_tag(it[0].as_bytes().ok()?)?;
        if tag != expected.as_bytes() {
            return None;
        }
        self.grp.parse_scalar(&it[1]).ok()
    }

    /// `Use(slot, f, m)`. Key-independent operations ignore `slot`.
    pub fn use_op(&mut self, slot: &SlotId, f: &str, m: &Value) -> Option<Value> {
        self.tick();
        match f {
            op::GET_PUB => {
                let k = self.state.slots.get(slot)?;
                Some(self.grp.element_value(&self.grp.mul_base(k)))
            }
            op::LEAF_INIT => self.leaf_init_op(m),
            op::USV_CERT => {
                let m = self.grp.random_nonzero_scalar(&mut self.state.rng);
                let cert = self.certify(&m)?;
                Some(cert.to_value(&self.grp, &self.params))
            }
            op::FS_START => self.fs_start_op(slot, m),
            op::FS_PROVE => self.fs_prove_op(slot, m),
            op::SEAL_TO_PEER => self.seal_op(slot, m),
            op::OPEN_FROM_PEER => self.open_op(m),
            _ => None,
        }
    }

    fn certify(&mut self, m: &G::Scalar) -> Option<UsvCertificate<G>> {
        let usv = Usv::new(&self.grp, &self.oracle, self.params).ok()?;
        usv.cert(&self.caller, m, &mut self.state.rng).ok()
    }

    fn leaf_init_op(&mut self, m: &Value) -> Option<Value> {
        m.as_bytes().ok()?;
        let grp = self.grp.clone();
        let m2 = grp.random_nonzero_scalar(&mut self.state.rng);
        let b2 = grp.random_scalar(&mut self.state.rng);
        let f2 = |x: u64| m2 + b2 * grp.scalar(x);
        let (s21, s22, s23) = (f2(2), f2(3), f2(1));
        let cert = self.certify(&m2)?;
        Some(Value::tuple(vec![
            cert.to_value(&grp, &self.params),
            grp.element_value(&grp.mul_base(&b2)),
            grp.scalar_value(&s21),
            grp.scalar_value(&s22),
            grp.scalar_value(&s23),
        ]))
    }

    fn fs_start_op(&mut self, slot: &SlotId, m: &Value) -> Option<Value> {
        let k = *self.state.slots.get(slot)?;
        let it = m.as_tuple_of(2).ok()?;
        let sid = it[0].as_bytes().ok()?.to_vec();
        let big_k = self.grp.parse_element(&it[1]).ok()?;
        if big_k != self.grp.mul_base(&k) {
            return None;
        }
        let grp = self.grp.clone();
        let (nonces, commitments): (Vec<_>, Vec<_>) = (0..self.params.r)
            .map(|_| <Schnorr as SigmaProtocol<G>>::commit(&grp, &mut self.state.rng))
            .unzip();
        let token = self.fresh_token();
        let out = Value::tuple(vec![
            FsHandle(token).to_value(),
            Value::Tuple(commitments.iter().map(|a| grp.element_value(a)).collect()),
        ]);
        self.state.fs.insert(
            token,
            LinOs {
                slot: slot.clone(),
                stmt: DlStatement::untagged(&sid, big_k),
                nonces,
                commitments,
                sealed: false,
            },
        );
        Some(out)
    }

    fn fs_prove_op(&mut self, slot: &SlotId, m: &Value) -> Option<Value> {
        let h = FsHandle::parse(m)?;
        let st = self.state.fs.get_mut(&h.0)?;
        if st.sealed {
            return None;
        }
        st.sealed = true;
        let nonces = std::mem::take(&mut st.nonces);
        if st.slot != *slot {
            return None;
        }
        let st = st.clone();
        let k = *self.state.slots.get(&st.slot)?;
        let fs = Fischlin::new(&self.grp, &self.oracle, self.params).ok()?;
        let (proof, _) = fs
            .respond_all::<Schnorr>(&self.caller, ctx::KEYBOX, &st.stmt, &k, &nonces, &st.commitments)
            .ok()?;
        Some(proof_value::<G, Schnorr>(&self.grp, &self.params, &proof))
    }

    fn seal_op(&mut self, slot: &SlotId, m: &Value) -> Option<Value> {
        let k = *self.state.slots.get(slot)?;
        let it = m.as_tuple_of(2).ok()?;
        let peer = PartyId::from_value(&it[0]).ok()?;
        let ad = it[1].as_bytes().ok()?;
        let pk = self.directory.get(&peer)?;
        let blob = seal::seal(&mut self.state.rng, &peer, pk, ad, &self.grp.scalar_to_bytes(&k));
        Some(blob.to_value())
    }

    fn open_op(&mut self, m: &Value) -> Option<Value> {
        let it = m.as_tuple_of(2).ok()?;
        let blob = SealedBlob::from_value(&it[0]).ok()?;
        let ad = it[1].as_bytes().ok()?.to_vec();
        if blob.recipient != self.owner {
            return None;
        }
        let pt = seal::open(&self.sealing, &ad, &blob)?;
        let s = self.grp.scalar_from_bytes(&pt).ok()?;
        let token = self.fresh_token();
        self.state.buf.insert(token, Buffered { ad, s });
        Some(BufHandle(token).to_value())
    }

    pub fn get_pub(&mut self, slot: &SlotId) -> Option<G::Element> {
        let v = self.use_op(slot, op::GET_PUB, &Value::tuple(vec![]))?;
        self.grp.parse_element(&v).ok()
    }

    pub fn leaf_init(&mut self, sid: &[u8]) -> Option<LeafInitOutput<G>> {
        let v = self.use_op(&SlotId::new(sid, ""), op::LEAF_INIT, &Value::bytes(sid))?;
        let it = v.as_tuple_of(5).ok()?;
        let g = &self.grp;
        Some(LeafInitOutput {
            cert: UsvCertificate::from_value(g, &it[0]).ok()?,
            b2: g.parse_element(&it[1]).ok()?,
            s21: g.parse_scalar(&it[2]).ok()?,
            s22: g.parse_scalar(&it[3]).ok()?,
            s23: g.parse_scalar(&it[4]).ok()?,
        })
    }

    pub fn usv_cert(&mut self) -> Option<UsvCertificate<G>> {
        let v = self.use_op(&SlotId::new(b"", ""), op::USV_CERT, &Value::tuple(vec![]))?;
        UsvCertificate::from_value(&self.grp, &v).ok()
    }

    pub fn fs_start(&mut self, slot: &SlotId, sid: &[u8], big_k: &G::Element) -> Option<(FsHandle, Vec<G::Element>)> {
        let m = Value::tuple(vec![Value::bytes(sid), self.grp.element_value(big_k)]);
        let v = self.use_op(slot, op::FS_START, &m)?;
        let it = v.as_tuple_of(2).ok()?;
        let h = FsHandle::parse(&it[0])?;
        let a = it[1]
            .as_tuple()
            .ok()?
            .iter()
            .map(|e| self.grp.parse_element(e).ok())
            .collect::<Option<Vec<_>>>()?;
        Some((h, a))
    }

    pub fn fs_prove(&mut self, slot: &SlotId, h: &FsHandle) -> Option<DlProof<G>> {
        let v = self.use_op(slot, op::FS_PROVE, &h.to_value())?;
        proof_from_value::<G, Schnorr>(&self.grp, &v).ok()
    }

    pub fn seal_to_peer(&mut self, slot: &SlotId, peer: &PartyId, ad: &[u8]) -> Option<SealedBlob> {
        let m = Value::tuple(vec![peer.value(), Value::bytes(ad)]);
        let v = self.use_op(slot, op::SEAL_TO_PEER, &m)?;
        SealedBlob::from_value(&v).ok()
    }

    pub fn open_from_peer(&mut self, blob: &SealedBlob, ad: &[u8]) -> Option<BufHandle> {
        let m = Value::tuple(vec![blob.to_value(), Value::bytes(ad)]);
        let v = self.use_op(&SlotId::new(b"", ""), op::OPEN_FROM_PEER, &m)?;
        BufHandle::parse(&v)
    }

    /// Runs `f` as one atomic command: if it returns `None`, slots, buffered handles and
    /// LinOS sessions revert. The epoch and randomness keep advancing.
    pub fn atomically<T>(&mut self, f: impl FnOnce(&mut Self) -> Option<T>) -> Option<T> {
        let slots = self.state.slots.clone();
        let buf = self.state.buf.clone();
        let fs = self.state.fs.clone();
        let out = f(self);
        if out.is_none() {
            self.state.slots = slots;
            self.state.buf = buf;
            self.state.fs = fs;
            self.tick();
        }
        out
    }

    pub fn corrupt_snapshot(&self) -> VisibleState {
        let mut fs_handles: Vec<_> = self
            .state
            .fs
            .iter()
            .map(|(t, s)| VisibleFsHandle {
                handle: hex::encode(t),
                sealed: s.sealed,
            })
            .collect();
        fs_handles.sort_by(|a, b| a.handle.cmp(&b.handle));
        VisibleState {
            owner: self.owner.clone(),
            epoch: self.state.epoch,
            slots: self
                .state
                .slots
                .keys()
                .map(|s| match s.parts() {
                    Some((sid, tag)) => VisibleSlot { sid: hex::encode(sid), tag },
                    None => VisibleSlot {
                        sid: hex::encode(s.as_bytes()),
                        tag: String::new(),
                    },
                })
                .collect(),
            fs_handles,
            buffered_handles: self.state.buf.len(),
        }
    }

    /// Copies the full internal state. Only useful together with [`KeyBox::restore`].
    pub fn checkpoint(&self) -> Checkpoint<G> {
        Checkpoint {
            owner: self.owner.clone(),
            state: self.state.clone(),
        }
    }

    /// Reinstalls a checkpoint. Refused unless its epoch is strictly newer, which no
    /// honestly obtained checkpoint ever is, or the rollback test knob is set.
    pub fn restore(&mut self, cp: Checkpoint<G>) -> Result<(), KeyBoxError> {
        if cp.owner != self.owner {
            return Err(KeyBoxError::ForeignCheckpoint(cp.owner));
        }
        if cp.state.epoch <= self.state.epoch && !self.config.allow_rollback {
            return Err(KeyBoxError::Rollback {
                checkpoint: cp.state.epoch,
                current: self.state.epoch,
            });
        }
        self.state = cp.state;
        Ok(())
    }

    /// Canonical encodings of all resident slot scalars, for leak scanning.
    #[cfg(feature = "audit")]
    pub fn audit_resident_encodings(&self) -> Vec<Vec<u8>> {
        self.state.slots.values().map(|k| self.grp.scalar_to_bytes(k)).collect()
    }
}

/// Public LinOS proof check, run outside any KeyBox.
pub fn fs_verify<G: Group>(
    grp: &G,
    oracle: &Oracle,
    params: FischlinParams,
    caller: &CallerId,
    sid: &[u8],
    big_k: &G::Element,
    proof: &DlProof<G>,
) -> bool {
    match Fischlin::new(grp, oracle, params) {
        Ok(fs) => fs.verify::<Schnorr>(caller, ctx::KEYBOX, &DlStatement::untagged(sid, *big_k), proof),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ToyGroup;
    use crate::oracle::OracleMode;

    fn setup(allow_rollback: bool) -> (ToyGroup, Arc<Oracle>, BTreeMap<PartyId, KeyBox<ToyGroup>>) {
        let grp = ToyGroup::setup(101, 7).unwrap();
        let oracle = Arc::new(Oracle::new(OracleMode::Ideal, 3));
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let parties: Vec<_> = (1..=4).map(PartyId::indexed).collect();
        let kbs = provision(&parties, &grp, &oracle, FischlinParams::SMALL, KeyBoxConfig { allow_rollback }, &mut rng);
        (grp, oracle, kbs)
    }

    fn scalars(g: &ToyGroup, v: &[u64]) -> Value {
        Value::Tuple(v.iter().map(|x| g.scalar_value(&g.scalar(*x))).collect())
    }

    #[test]
    fn g12_toy_value_and_write_once() {
        let (g, _, mut kbs) = setup(false);
        let kb = kbs.get_mut(&PartyId::indexed(1)).unwrap();
        let slot = SlotId::new(b"s", tag::K12);
        assert!(kb.load(&slot, derivation::G12, &scalars(&g, &[2, 3, 4])).is_some());
        assert_eq!(kb.get_pub(&slot), Some(g.element(27)));
        assert!(kb.load(&slot, derivation::G12, &scalars(&g, &[1, 1, 1])).is_none());
        assert_eq!(kb.get_pub(&slot), Some(g.element(27)));
    }

    #[test]
    fn g3_rejects_inconsistent_public_key() {
        let (g, _, mut kbs) = setup(false);
        let kb = kbs.get_mut(&PartyId::indexed(3)).unwrap();
        let slot = SlotId::new(b"s", tag::K3);
        // k3 = 2(7 + 8 − 6) = 18; K13 = 82G, K = 100G
        let mut args = scalars(&g, &[7, 6, 4]).as_tuple().unwrap().to_vec();
        args.push(g.element_value(&g.element(99)));
        args.push(g.element_value(&g.element(82)));
        assert!(kb.load(&slot, derivation::G3, &Value::Tuple(args.clone())).is_none());
        assert!(!kb.is_occupied(&slot));
        args[3] = g.element_value(&g.element(100));
        assert!(kb.load(&slot, derivation::G3, &Value::Tuple(args)).is_some());
        assert_eq!(kb.get_pub(&slot), Some(g.element(18)));
    }

    #[test]
    fn seal_open_resolve_once() {
        let (g, _, mut kbs) = setup(false);
        let (p1, p3) = (PartyId::indexed(1), PartyId::indexed(3));
        let src = SlotId::new(b"s", tag::K31);
        let ad = registration_ad(b"s", &p1, &p3, tag::K31);
        let blob = {
            let kb = kbs.get_mut(&p1).unwrap();
            kb.load(&src, derivation::G31_REG, &scalars(&g, &[4])).unwrap();
            let a = kb.seal_to_peer(&src, &p3, &ad).unwrap();
            let b = kb.seal_to_peer(&src, &p3, &ad).unwrap();
            assert_ne!(a.dem_ct, b.dem_ct);
            assert!(kb.seal_to_peer(&src, &PartyId::new("nobody"), &ad).is_none());
            a
        };
        let kb3 = kbs.get_mut(&p3).unwrap();
        assert!(kb3.open_from_peer(&blob, &registration_ad(b"s", &p1, &p3, tag::K32)).is_none());
        let h = kb3.open_from_peer(&blob, &ad).unwrap();
        let dst = SlotId::new(b"s", tag::K31);
        let m = Value::tuple(vec![h.to_value()]);
        assert!(kb3.load(&SlotId::new(b"s", tag::K32), derivation::G32_REG, &m).is_none(), "tag check");
        let h = kb3.open_from_peer(&blob, &ad).unwrap();
        let m = Value::tuple(vec![h.to_value()]);
        assert!(kb3.load(&dst, derivation::G31_REG, &m).is_some());
        assert!(kb3.load(&SlotId::new(b"t", tag::K31), derivation::G31_REG, &m).is_none(), "one-shot");
        assert_eq!(kb3.get_pub(&dst), Some(g.element(4)));
        let kb4 = kbs.get_mut(&PartyId::indexed(4)).unwrap();
        assert!(kb4.open_from_peer(&blob, &ad).is_none());
    }

    #[test]
    fn duplicate_handle_leaves_buffer_intact() {
        let (g, _, mut kbs) = setup(false);
        let p = PartyId::indexed(2);
        let kb = kbs.get_mut(&p).unwrap();
        let src = SlotId::new(b"s", tag::K32);
        kb.load(&src, derivation::G32_REG, &scalars(&g, &[6])).unwrap();
        let blob = kb.seal_to_peer(&src, &p, b"x").unwrap();
        let h = kb.open_from_peer(&blob, b"x").unwrap();
        let dup = Value::tuple(vec![h.to_value(), h.to_value(), h.to_value()]);
        assert!(kb.load(&SlotId::new(b"s", tag::K2), derivation::G2, &dup).is_none());
        assert_eq!(kb.corrupt_snapshot().buffered_handles, 1);
    }

    #[test]
    fn linos_one_shot_and_rollback_guard() {
        let (g, oracle, mut kbs) = setup(false);
        let kb = kbs.get_mut(&PartyId::indexed(1)).unwrap();
        let slot = SlotId::new(b"s", tag::K12);
        assert!(kb.fs_start(&slot, b"s", &g.element(27)).is_none(), "empty slot");
        kb.load(&slot, derivation::G12, &scalars(&g, &[2, 3, 4])).unwrap();
        assert!(kb.fs_start(&slot, b"s", &g.element(28)).is_none(), "K mismatch");
        let cp = kb.checkpoint();
        let (h, _) = kb.fs_start(&slot, b"s", &g.element(27)).unwrap();
        let proof = kb.fs_prove(&slot, &h).unwrap();
        let verifier = CallerId::new("v");
        assert!(fs_verify(&g, &oracle, FischlinParams::SMALL, &verifier, b"s", &g.element(27), &proof));
        assert!(!fs_verify(&g, &oracle, FischlinParams::SMALL, &verifier, b"t", &g.element(27), &proof));
        assert!(kb.fs_prove(&slot, &h).is_none());
        assert!(matches!(kb.restore(cp), Err(KeyBoxError::Rollback { .. })));
        assert!(kb.corrupt_snapshot().fs_handles.iter().all(|h| h.sealed));
    }

    #[test]
    fn profile_closure() {
        let (g, _, mut kbs) = setup(false);
        let kb = kbs.get_mut(&PartyId::indexed(1)).unwrap();
        let slot = SlotId::new(b"s", tag::K12);
        kb.load(&slot, derivation::G12, &scalars(&g, &[2, 3, 4])).unwrap();
        for f in ["Export", "getpub", "FS.Respond", "", "Sign"] {
            assert!(kb.use_op(&slot, f, &Value::tuple(vec![])).is_none());
            assert!(kb.load(&SlotId::new(b"z", f), f, &scalars(&g, &[1])).is_none());
        }
    }

    #[test]
    fn leaf_init_linkage() {
        let (g, oracle, mut kbs) = setup(false);
        let kb = kbs.get_mut(&PartyId::indexed(2)).unwrap();
        let out = kb.leaf_init(b"s").unwrap();
        let usv = Usv::new(&g, &oracle, FischlinParams::SMALL).unwrap();
        let m2 = usv.open_m(&CallerId::new("v"), &out.cert.c, &out.cert.tag).unwrap();
        assert_eq!(g.mul_base(&out.s21) - out.b2 * g.scalar(2), m2);
        assert_eq!(out.s22 - out.s21, out.s21 - out.s23);
    }

    #[test]
    fn snapshot_before_load_is_empty() {
        let (_, _, kbs) = setup(false);
        let snap = kbs[&PartyId::indexed(1)].corrupt_snapshot();
        assert!(snap.slots.is_empty() && snap.fs_handles.is_empty() && snap.buffered_handles == 0);
    }
}
