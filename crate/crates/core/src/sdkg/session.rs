//! Base-run driver: wires the two active parties to the simulated network and lets the
//! scheduler decide every delivery.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::Serialize;

use crate::algebra::Group;
use crate::keybox::KeyBox;
use crate::oracle::CallerId;
use crate::transport::{Network, PartyId, Received, Scheduler};
use crate::usv::UsvHandleTable;

use super::party::{Leader, LeaderFault, Leaf, LeafFault, Programmed};
use super::registration::Device;
use super::{Check, Env, FreshnessGuard, Message};

/// Oracle caller used by the ideal USV handle table.
pub const USV_FUNCTIONALITY: &str = "F_usv";

#[derive(Debug, Clone)]
pub struct BaseConfig<S> {
    pub sid: Vec<u8>,
    pub cid2: Vec<u8>,
    pub leaf_fault: Option<LeafFault>,
    pub leader_fault: Option<LeaderFault>,
    pub lenient_leader: bool,
    pub lenient_leaf: bool,
    pub programmed: Programmed<S>,
    /// Run post-accept installation.
    pub install: bool,
    pub guard: FreshnessGuard,
}

impl<S> BaseConfig<S> {
    pub fn new(sid: &[u8]) -> Self {
        Self {
            sid: sid.to_vec(),
            cid2: b"cid2".to_vec(),
            leaf_fault: None,
            leader_fault: None,
            lenient_leader: false,
            lenient_leaf: false,
            programmed: Programmed::default(),
            install: true,
            guard: FreshnessGuard::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BaseOutcome<E> {
    Accepted { k: E },
    Aborted { party: u8, check: Check },
    /// The scheduler stopped before the center decided.
    Stalled,
}

/// One message as it left its sender.
#[derive(Debug, Clone, Serialize)]
pub struct WireRecord {
    pub sender: PartyId,
    pub recipient: Option<PartyId>,
    pub label: String,
    #[serde(serialize_with = "hex_ser")]
    pub bytes: Vec<u8>,
}

fn hex_ser<S: serde::Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&hex::encode(b))
}

pub struct BaseRun<G: Group> {
    pub env: Env<G>,
    pub sid: Vec<u8>,
    pub leader: Leader<G>,
    pub leaf: Leaf<G>,
    pub devices: BTreeMap<PartyId, Device<G>>,
    pub net: Network,
    pub table: UsvHandleTable<G>,
    pub outcome: BaseOutcome<G::Element>,
    pub install: Option<Result<(), Check>>,
    pub wire: Vec<WireRecord>,
}

impl<G: Group> BaseRun<G> {
    pub fn accepted(&self) -> bool {
        matches!(self.outcome, BaseOutcome::Accepted { .. })
    }

    pub fn installed(&self) -> bool {
        self.install == Some(Ok(()))
    }
}

/// Installs both parties' shares after the center accepted.
pub fn install_base_shares<G: Group>(leader: &mut Leader<G>, leaf: &mut Leaf<G>) -> Result<(), Check> {
    leader.install()?;
    leaf.install()
}

struct Driver<'a, G: Group> {
    env: &'a Env<G>,
    sid: Vec<u8>,
    net: Network,
    wire: Vec<WireRecord>,
}

impl<G: Group> Driver<'_, G> {
    fn send(&mut self, from: &PartyId, to: &PartyId, msg: &Message<G>) {
        let bytes = msg.encode(&self.env.grp, &self.env.params);
        self.record(from, Some(to), msg, &bytes);
        self.net.chan_send(&self.sid, from, to, bytes).expect("channel opened at setup");
    }

    fn publish(&mut self, from: &PartyId, msg: &Message<G>) {
        let bytes = msg.encode(&self.env.grp, &self.env.params);
        self.record(from, None, msg, &bytes);
        self.net.pub_publish(&self.sid, from, bytes).expect("registered sender");
    }

    fn record(&mut self, from: &PartyId, to: Option<&PartyId>, msg: &Message<G>, bytes: &[u8]) {
        let label = match msg {
            Message::R1(_) => "R1",
            Message::R2(_) => "R2",
            Message::R3(_) => "R3",
            Message::Pub(_) => "Pub",
            Message::Reg1(_) => "Reg1",
            Message::Reg2(_) => "Reg2",
        };
        self.wire.push(WireRecord {
            sender: from.clone(),
            recipient: to.cloned(),
            label: label.into(),
            bytes: bytes.to_vec(),
        });
    }
}

/// Runs Rounds 1–3 and verification. `keyboxes` must contain `P1` and `P2`; the rest
/// become passive devices that only observe the published key.
pub fn run_base<G: Group, R: RngCore + CryptoRng>(
    env: &Env<G>,
    cfg: &BaseConfig<G::Scalar>,
    mut keyboxes: BTreeMap<PartyId, KeyBox<G>>,
    scheduler: &mut dyn Scheduler,
    rng: &mut R,
) -> BaseRun<G> {
    let (p1, p2) = (PartyId::indexed(1), PartyId::indexed(2));
    let kb1 = keyboxes.remove(&p1).expect("P1 keybox");
    let kb2 = keyboxes.remove(&p2).expect("P2 keybox");
    let mut parties = vec![p1.clone(), p2.clone()];
    parties.extend(keyboxes.keys().cloned());

    let mut leader = Leader::new(env.clone(), p1.clone(), p2.clone(), &cfg.sid, kb1, cfg.guard.clone());
    leader.fault = cfg.leader_fault;
    leader.lenient = cfg.lenient_leader;
    leader.programmed = cfg.programmed;
    let mut leaf = Leaf::new(env.clone(), p2.clone(), p1.clone(), &cfg.sid, &cfg.cid2, kb2);
    leaf.fault = cfg.leaf_fault;
    leaf.lenient = cfg.lenient_leaf;
    leaf.programmed = cfg.programmed;
    let mut devices: BTreeMap<_, _> = keyboxes.into_iter().map(|(p, kb)| (p.clone(), Device::new(p, kb))).collect();

    let mut d = Driver {
        env,
        sid: cfg.sid.clone(),
        net: Network::new(parties, rng.next_u64()),
        wire: Vec::new(),
    };
    d.net.open_channel(&cfg.sid, &p2, &p1).expect("known parties");
    d.net.open_channel(&cfg.sid, &p1, &p2).expect("known parties");
    if cfg.leaf_fault.is_some() {
        d.net.corrupt(&p2);
    }
    if cfg.leader_fault.is_some() {
        d.net.corrupt(&p1);
    }

    let mut table = UsvHandleTable::new();
    let usv_caller = CallerId::new(USV_FUNCTIONALITY);
    let mut outcome = BaseOutcome::Stalled;
    match leaf.round1(&mut table, &usv_caller, rng) {
        Ok(r1) => d.send(&p2, &p1, &Message::R1(r1)),
        Err(check) => outcome = BaseOutcome::Aborted { party: 2, check },
    }

    while let Some(t) = scheduler.next(&d.net.pending()) {
        for who in d.net.deliver(t) {
            while let Some(rcv) = d.net.recv(&who) {
                let Received { sender, payload, .. } = rcv;
                let msg = Message::<G>::decode(&env.grp, &payload);
                if who == p1 && sender == p2 {
                    let r = match msg {
                        Ok(Message::R1(r1)) => leader.round2(&table, r1, rng).map(|r2| d.send(&p1, &p2, &Message::R2(r2))),
                        Ok(Message::R3(r3)) => leader.finalize(r3).map(|k| outcome = BaseOutcome::Accepted { k }),
                        Ok(Message::Pub(_)) => Ok(()),
                        _ => Err(Check::Parse),
                    };
                    if let Err(check) = r {
                        outcome = BaseOutcome::Aborted { party: 1, check };
                    }
                } else if who == p2 && sender == p1 {
                    let r = match msg {
                        Ok(Message::R2(r2)) => leaf.round3(r2, rng).map(|(r3, k)| {
                            d.send(&p2, &p1, &Message::R3(r3));
                            d.publish(&p2, &Message::Pub(k));
                        }),
                        _ => Err(Check::Parse),
                    };
                    if let Err(check) = r {
                        outcome = BaseOutcome::Aborted { party: 2, check };
                    }
                } else if let (Some(dev), Ok(Message::Pub(p))) = (devices.get_mut(&who), msg) {
                    if sender == p2 && p.sid == cfg.sid {
                        dev.observe_public_key(p.k);
                    }
                }
            }
        }
    }

    let install = (cfg.install && matches!(outcome, BaseOutcome::Accepted { .. }))
        .then(|| install_base_shares(&mut leader, &mut leaf));
    BaseRun {
        env: env.clone(),
        sid: cfg.sid.clone(),
        leader,
        leaf,
        devices,
        net: d.net,
        table,
        outcome,
        install,
        wire: d.wire,
    }
}
