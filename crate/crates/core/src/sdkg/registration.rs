//! One-shot recovery-device registration and its chained extension to `n` devices.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use serde::Serialize;
use thiserror::Error;

use crate::algebra::Group;
use crate::codec::Value;
use crate::keybox::seal::{self, SealedBlob};
use crate::keybox::{derivation, registration_ad, tag, KeyBox, SlotId};
use crate::transport::{Network, PartyId, Received, Scheduler};

use super::party::Leader;
use super::session::{BaseRun, WireRecord};
use super::{Env, Message, Phase, Reg1, Reg2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegAdversary {
    Honest,
    /// Sponsor seals its `k32` slot under associated data tagged `k31`.
    AdMismatch,
    /// Sponsor encrypts a random scalar under the correct `ad32`.
    WrongScalar,
    /// Center reports `K + G`.
    KMismatch,
    /// Sponsor reports `K13 + G`.
    K13Mismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error, Serialize)]
pub enum RegError {
    #[error("base run not finalized")]
    NotFinalized,
    #[error("joiner already registered")]
    AlreadyRegistered,
    #[error("sponsor is neither the initiating leaf nor a registered device")]
    SponsorNotEligible,
    #[error("unknown device")]
    UnknownDevice,
    #[error("joiner never learned the published key")]
    NoPublicKey,
    #[error("K from the center differs from the published key")]
    KMismatch,
    #[error("K13 from the center and the sponsor differ")]
    K13Mismatch,
    #[error("registration messages not delivered")]
    Stalled,
    #[error("KeyBox installation refused")]
    Install,
    #[error("sender KeyBox refused to seal")]
    Seal,
}

/// A leaf device that takes part only in registration.
pub struct Device<G: Group> {
    id: PartyId,
    kb: KeyBox<G>,
    k_pub: Option<G::Element>,
    k13: Option<G::Element>,
    registered: bool,
}

impl<G: Group> Device<G> {
    pub fn new(id: PartyId, kb: KeyBox<G>) -> Self {
        Self {
            id,
            kb,
            k_pub: None,
            k13: None,
            registered: false,
        }
    }

    pub fn id(&self) -> &PartyId {
        &self.id
    }

    pub fn keybox(&self) -> &KeyBox<G> {
        &self.kb
    }

    pub fn keybox_mut(&mut self) -> &mut KeyBox<G> {
        &mut self.kb
    }

    pub fn is_registered(&self) -> bool {
        self.registered
    }

    pub fn public_key(&self) -> Option<G::Element> {
        self.k_pub
    }

    pub fn k13(&self) -> Option<G::Element> {
        self.k13
    }

    /// Records the first key seen on the public broadcast.
    pub fn observe_public_key(&mut self, k: G::Element) {
        self.k_pub.get_or_insert(k);
    }

    /// Input-consistency checks, then the two-step atomic KeyBox installation.
    pub fn install_registration(
        &mut self,
        sid: &[u8],
        center: &PartyId,
        sponsor: &PartyId,
        reg1: &Reg1<G>,
        reg2: &Reg2<G>,
    ) -> Result<(), RegError> {
        let k = self.k_pub.ok_or(RegError::NoPublicKey)?;
        if reg1.k != k {
            return Err(RegError::KMismatch);
        }
        if reg1.k13 != reg2.k13 {
            return Err(RegError::K13Mismatch);
        }
        let grp = self.kb_group();
        let me = self.id.clone();
        let ad31 = registration_ad(sid, center, &me, tag::K31);
        let ad32 = registration_ad(sid, sponsor, &me, tag::K32);
        let ad23 = registration_ad(sid, sponsor, &me, tag::K23);
        let (kv, k13v) = (grp.element_value(&k), grp.element_value(&reg1.k13));
        self.kb
            .atomically(|kb| {
                let t32 = kb.open_from_peer(&reg2.blob_a, &ad32)?;
                let t23 = kb.open_from_peer(&reg2.blob_b, &ad23)?;
                kb.load(&SlotId::new(sid, tag::K32), derivation::G32_REG, &Value::tuple(vec![t32.to_value()]))?;
                kb.load(&SlotId::new(sid, tag::K23), derivation::G23_REG, &Value::tuple(vec![t23.to_value()]))?;
                let t31 = kb.open_from_peer(&reg1.blob, &ad31)?;
                let t32 = kb.open_from_peer(&reg2.blob_a, &ad32)?;
                let t23 = kb.open_from_peer(&reg2.blob_b, &ad23)?;
                let m = Value::tuple(vec![t23.to_value(), t32.to_value(), t31.to_value(), kv, k13v]);
                kb.load(&SlotId::new(sid, tag::K3), derivation::G3, &m)
            })
            .ok_or(RegError::Install)?;
        self.registered = true;
        self.k13 = Some(reg1.k13);
        Ok(())
    }

    fn kb_group(&self) -> G {
        self.kb.group().clone()
    }
}

/// Keystore and metadata of the party sealing the sponsor-state scalars.
pub struct SponsorRef<'a, G: Group> {
    pub id: PartyId,
    pub kb: &'a mut KeyBox<G>,
    pub k13: G::Element,
}

fn send<G: Group>(env: &Env<G>, net: &mut Network, wire: &mut Vec<WireRecord>, sid: &[u8], from: &PartyId, to: &PartyId, msg: Message<G>) {
    let bytes = msg.encode(&env.grp, &env.params);
    wire.push(WireRecord {
        sender: from.clone(),
        recipient: Some(to.clone()),
        label: if matches!(msg, Message::Reg1(_)) { "Reg1" } else { "Reg2" }.into(),
        bytes: bytes.clone(),
    });
    net.chan_send(sid, from, to, bytes).expect("channel opened");
}

/// Registers `joiner` with the help of the center and `sponsor`.
#[allow(clippy::too_many_arguments)]
pub fn register_device<G: Group, R: RngCore + CryptoRng>(
    env: &Env<G>,
    sid: &[u8],
    net: &mut Network,
    wire: &mut Vec<WireRecord>,
    leader: &mut Leader<G>,
    sponsor: SponsorRef<'_, G>,
    joiner: &mut Device<G>,
    adversary: RegAdversary,
    scheduler: &mut dyn Scheduler,
    rng: &mut R,
) -> Result<(), RegError> {
    if leader.phase() != Phase::Installed {
        return Err(RegError::NotFinalized);
    }
    if joiner.registered {
        return Err(RegError::AlreadyRegistered);
    }
    let grp = &env.grp;
    let (center, jid, sid_v) = (leader.id().clone(), joiner.id.clone(), sid.to_vec());
    let (k, k13) = match (leader.public_key(), leader.k13()) {
        (Some(k), Some(k13)) => (k, k13),
        _ => return Err(RegError::NotFinalized),
    };
    net.open_channel(sid, &center, &jid).map_err(|_| RegError::UnknownDevice)?;
    net.open_channel(sid, &sponsor.id, &jid).map_err(|_| RegError::UnknownDevice)?;
    match adversary {
        RegAdversary::KMismatch => net.corrupt(&center),
        RegAdversary::Honest => {}
        _ => net.corrupt(&sponsor.id),
    }

    let ad31 = registration_ad(sid, &center, &jid, tag::K31);
    let blob = leader
        .keybox_mut()
        .seal_to_peer(&SlotId::new(sid, tag::K31), &jid, &ad31)
        .ok_or(RegError::Seal)?;
    let k_net = if adversary == RegAdversary::KMismatch { k + grp.generator() } else { k };
    let reg1 = Reg1 { sid: sid_v.clone(), blob, k13, k: k_net };
    send(env, net, wire, sid, &center, &jid, Message::Reg1(reg1));

    let ad32 = registration_ad(sid, &sponsor.id, &jid, tag::K32);
    let ad23 = registration_ad(sid, &sponsor.id, &jid, tag::K23);
    let slot32 = SlotId::new(sid, tag::K32);
    let blob_a: SealedBlob = match adversary {
        RegAdversary::AdMismatch => {
            let wrong = registration_ad(sid, &sponsor.id, &jid, tag::K31);
            sponsor.kb.seal_to_peer(&slot32, &jid, &wrong)
        }
        RegAdversary::WrongScalar => {
            let dir = sponsor.kb.directory();
            let pk = dir.get(&jid).ok_or(RegError::UnknownDevice)?;
            let s = grp.random_scalar(rng);
            Some(seal::seal(rng, &jid, pk, &ad32, &grp.scalar_to_bytes(&s)))
        }
        _ => sponsor.kb.seal_to_peer(&slot32, &jid, &ad32),
    }
    .ok_or(RegError::Seal)?;
    let blob_b = sponsor
        .kb
        .seal_to_peer(&SlotId::new(sid, tag::K23), &jid, &ad23)
        .ok_or(RegError::Seal)?;
    let k13_s = if adversary == RegAdversary::K13Mismatch { sponsor.k13 + grp.generator() } else { sponsor.k13 };
    let reg2 = Reg2 { sid: sid_v, blob_a, blob_b, k13: k13_s };
    send(env, net, wire, sid, &sponsor.id, &jid, Message::Reg2(reg2));

    let (mut got1, mut got2) = (None, None);
    while let Some(t) = scheduler.next(&net.pending()) {
        net.deliver(t);
        while let Some(Received { sender, payload, .. }) = net.recv(&jid) {
            match Message::<G>::decode(grp, &payload) {
                Ok(Message::Reg1(m)) if sender == center && m.sid == sid => got1 = got1.or(Some(m)),
                Ok(Message::Reg2(m)) if sender == sponsor.id && m.sid == sid => got2 = got2.or(Some(m)),
                Ok(Message::Pub(p)) if p.sid == sid => joiner.observe_public_key(p.k),
                _ => {}
            }
        }
    }
    match (got1, got2) {
        (Some(r1), Some(r2)) => joiner.install_registration(sid, &center, &sponsor.id, &r1, &r2),
        _ => Err(RegError::Stalled),
    }
}

/// Chained registration state over a finalized base run.
pub struct Rdr<G: Group> {
    pub base: BaseRun<G>,
    registered: BTreeSet<PartyId>,
}

impl<G: Group> Rdr<G> {
    pub fn new(base: BaseRun<G>) -> Result<Self, RegError> {
        if !base.installed() {
            return Err(RegError::NotFinalized);
        }
        Ok(Self {
            base,
            registered: BTreeSet::new(),
        })
    }

    pub fn registered(&self) -> &BTreeSet<PartyId> {
        &self.registered
    }

    pub fn register<R: RngCore + CryptoRng>(
        &mut self,
        joiner: &PartyId,
        sponsor: &PartyId,
        adversary: RegAdversary,
        scheduler: &mut dyn Scheduler,
        rng: &mut R,
    ) -> Result<(), RegError> {
        if self.registered.contains(joiner) {
            return Err(RegError::AlreadyRegistered);
        }
        let leaf_id = self.base.leaf.id().clone();
        if *sponsor != leaf_id && !self.registered.contains(sponsor) {
            return Err(RegError::SponsorNotEligible);
        }
        let mut dev = self.base.devices.remove(joiner).ok_or(RegError::UnknownDevice)?;
        let b = &mut self.base;
        let sponsor_ref = if *sponsor == leaf_id {
            b.leaf.k13().map(|k13| SponsorRef {
                id: leaf_id.clone(),
                kb: b.leaf.keybox_mut(),
                k13,
            })
        } else {
            b.devices.get_mut(sponsor).and_then(|d| {
                let k13 = d.k13?;
                Some(SponsorRef {
                    id: d.id.clone(),
                    kb: &mut d.kb,
                    k13,
                })
            })
        };
        let res = match sponsor_ref {
            Some(s) => register_device(
                &b.env,
                &b.sid,
                &mut b.net,
                &mut b.wire,
                &mut b.leader,
                s,
                &mut dev,
                adversary,
                scheduler,
                rng,
            ),
            None => Err(RegError::SponsorNotEligible),
        };
        self.base.devices.insert(joiner.clone(), dev);
        if res.is_ok() {
            self.registered.insert(joiner.clone());
        }
        res
    }
}
