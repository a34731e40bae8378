//! Simulated authenticated channels and public broadcast with adversarial scheduling.
//!
//! Nothing is delivered until the driver (playing the network adversary) releases a
//! ticket. For messages between honest endpoints the adversary view records only the
//! payload length. It records full payloads if an endpoint is corrupted, and always for
//! broadcasts. There is no API that injects a message under an honest sender's identity.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Value;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartyId(String);

impl PartyId {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    /// `P1`, `P2`, …
    pub fn indexed(i: usize) -> Self {
        Self(format!("P{i}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn value(&self) -> Value {
        Value::party(self.0.as_bytes())
    }

    pub fn from_value(v: &Value) -> Result<Self, crate::codec::CodecError> {
        let b = v.as_party()?;
        String::from_utf8(b.to_vec())
            .map(Self)
            .map_err(|_| crate::codec::CodecError::Shape("party id is not utf-8"))
    }
}

impl fmt::Debug for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 128-bit delivery ticket.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ticket(pub u128);

impl fmt::Debug for Ticket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ticket({:032x})", self.0)
    }
}

impl Serialize for Ticket {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:032x}", self.0))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChanError {
    #[error("channel {sender}->{recipient} not initialized for this session")]
    Uninitialized { sender: PartyId, recipient: PartyId },
    #[error("unknown party {0}")]
    UnknownParty(PartyId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Send,
    Deliver,
    Publish,
    PubDeliver,
}

/// One adversary-view record. `payload` is present only where leakage allows it.
#[derive(Debug, Clone, Serialize)]
pub struct ViewEvent {
    pub kind: EventKind,
    #[serde(with = "hex_bytes")]
    pub sid: Vec<u8>,
    pub sender: PartyId,
    pub recipient: Option<PartyId>,
    pub ticket: Ticket,
    pub length: usize,
    #[serde(with = "hex_opt")]
    pub payload: Option<Vec<u8>>,
}

mod hex_bytes {
    pub fn serialize<S: serde::Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }
}

mod hex_opt {
    pub fn serialize<S: serde::Serializer>(b: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match b {
            Some(b) => s.serialize_some(&hex::encode(b)),
            None => s.serialize_none(),
        }
    }
}

/// A message as received by a party.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Received {
    pub sid: Vec<u8>,
    pub sender: PartyId,
    pub broadcast: bool,
    pub payload: Vec<u8>,
}

/// Pending-message metadata the scheduler may inspect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingInfo {
    pub ticket: Ticket,
    pub sid: Vec<u8>,
    pub sender: PartyId,
    /// `None` for broadcasts.
    pub recipient: Option<PartyId>,
    pub length: usize,
}

struct Pending {
    info: PendingInfo,
    payload: Vec<u8>,
}

type ChannelKey = (Vec<u8>, PartyId, PartyId);

/// All channels and the broadcast medium of one simulation.
pub struct Network {
    parties: BTreeSet<PartyId>,
    channels: HashSet<ChannelKey>,
    pending: Vec<Pending>,
    delivered: HashSet<Ticket>,
    inboxes: BTreeMap<PartyId, VecDeque<Received>>,
    corrupted: BTreeSet<PartyId>,
    view: Vec<ViewEvent>,
    rng: ChaCha20Rng,
}

impl Network {
    pub fn new(parties: impl IntoIterator<Item = PartyId>, seed: u64) -> Self {
        let parties: BTreeSet<_> = parties.into_iter().collect();
        Self {
            inboxes: parties.iter().map(|p| (p.clone(), VecDeque::new())).collect(),
            parties,
            channels: HashSet::new(),
            pending: Vec::new(),
            delivered: HashSet::new(),
            corrupted: BTreeSet::new(),
            view: Vec::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn parties(&self) -> impl Iterator<Item = &PartyId> {
        self.parties.iter()
    }

    fn check_party(&self, p: &PartyId) -> Result<(), ChanError> {
        if self.parties.contains(p) {
            Ok(())
        } else {
            Err(ChanError::UnknownParty(p.clone()))
        }
    }

    pub fn open_channel(&mut self, sid: &[u8], sender: &PartyId, recipient: &PartyId) -> Result<(), ChanError> {
        self.check_party(sender)?;
        self.check_party(recipient)?;
        self.channels.insert((sid.to_vec(), sender.clone(), recipient.clone()));
        Ok(())
    }

    pub fn corrupt(&mut self, p: &PartyId) {
        self.corrupted.insert(p.clone());
    }

    pub fn is_corrupted(&self, p: &PartyId) -> bool {
        self.corrupted.contains(p)
    }

    fn fresh_ticket(&mut self) -> Ticket {
        loop {
            let t = Ticket(self.rng.gen());
            if !self.delivered.contains(&t) && self.pending.iter().all(|p| p.info.ticket != t) {
                return t;
            }
        }
    }

    pub fn chan_send(
        &mut self,
        sid: &[u8],
        sender: &PartyId,
        recipient: &PartyId,
        payload: Vec<u8>,
    ) -> Result<Ticket, ChanError> {
        if !self.channels.contains(&(sid.to_vec(), sender.clone(), recipient.clone())) {
            return Err(ChanError::Uninitialized {
                sender: sender.clone(),
                recipient: recipient.clone(),
            });
        }
        let ticket = self.fresh_ticket();
        let leak = self.corrupted.contains(sender).then(|| payload.clone());
        self.view.push(ViewEvent {
            kind: EventKind::Send,
            sid: sid.to_vec(),
            sender: sender.clone(),
            recipient: Some(recipient.clone()),
            ticket,
            length: payload.len(),
            payload: leak,
        });
        self.pending.push(Pending {
            info: PendingInfo {
                ticket,
                sid: sid.to_vec(),
                sender: sender.clone(),
                recipient: Some(recipient.clone()),
                length: payload.len(),
            },
            payload,
        });
        Ok(ticket)
    }

    pub fn pub_publish(&mut self, sid: &[u8], sender: &PartyId, payload: Vec<u8>) -> Result<Ticket, ChanError> {
        self.check_party(sender)?;
        let ticket = self.fresh_ticket();
        self.view.push(ViewEvent {
            kind: EventKind::Publish,
            sid: sid.to_vec(),
            sender: sender.clone(),
            recipient: None,
            ticket,
            length: payload.len(),
            payload: Some(payload.clone()),
        });
        self.pending.push(Pending {
            info: PendingInfo {
                ticket,
                sid: sid.to_vec(),
                sender: sender.clone(),
                recipient: None,
                length: payload.len(),
            },
            payload,
        });
        Ok(ticket)
    }

    /// Delivers a pending message exactly once. Unknown or already-delivered tickets are
    /// a no-op; the return value lists the parties that received it.
    pub fn deliver(&mut self, ticket: Ticket) -> Vec<PartyId> {
        if self.delivered.contains(&ticket) {
            return Vec::new();
        }
        let Some(pos) = self.pending.iter().position(|p| p.info.ticket == ticket) else {
            return Vec::new();
        };
        let Pending { info, payload } = self.pending.remove(pos);
        self.delivered.insert(ticket);
        let recipients: Vec<PartyId> = match &info.recipient {
            Some(r) => vec![r.clone()],
            None => self.parties.iter().cloned().collect(),
        };
        let leak = match &info.recipient {
            None => Some(payload.clone()),
            Some(r) => (self.corrupted.contains(r) || self.corrupted.contains(&info.sender))
                .then(|| payload.clone()),
        };
        self.view.push(ViewEvent {
            kind: if info.recipient.is_some() { EventKind::Deliver } else { EventKind::PubDeliver },
            sid: info.sid.clone(),
            sender: info.sender.clone(),
            recipient: info.recipient.clone(),
            ticket,
            length: info.length,
            payload: leak,
        });
        for r in &recipients {
            self.inboxes.get_mut(r).expect("registered party").push_back(Received {
                sid: info.sid.clone(),
                sender: info.sender.clone(),
                broadcast: info.recipient.is_none(),
                payload: payload.clone(),
            });
        }
        recipients
    }

    pub fn pending(&self) -> Vec<PendingInfo> {
        self.pending.iter().map(|p| p.info.clone()).collect()
    }

    pub fn recv(&mut self, party: &PartyId) -> Option<Received> {
        self.inboxes.get_mut(party)?.pop_front()
    }

    pub fn view(&self) -> &[ViewEvent] {
        &self.view
    }

    /// Delivers according to `scheduler` until it declines or nothing is pending.
    pub fn run(&mut self, scheduler: &mut dyn Scheduler) -> usize {
        let mut n = 0;
        while let Some(t) = scheduler.next(&self.pending()) {
            self.deliver(t);
            n += 1;
        }
        n
    }
}

/// Chooses the next ticket to release, or `None` to stop.
pub trait Scheduler {
    fn next(&mut self, pending: &[PendingInfo]) -> Option<Ticket>;
}

#[derive(Debug, Default)]
pub struct FifoScheduler;

impl Scheduler for FifoScheduler {
    fn next(&mut self, pending: &[PendingInfo]) -> Option<Ticket> {
        pending.first().map(|p| p.ticket)
    }
}

pub struct RandomScheduler {
    rng: ChaCha20Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn next(&mut self, pending: &[PendingInfo]) -> Option<Ticket> {
        pending.choose(&mut self.rng).map(|p| p.ticket)
    }
}

/// One step of a scripted schedule.
#[derive(Debug, Clone)]
pub enum ScriptStep {
    /// Deliver the pending message at this position (in send order).
    DeliverIndex(usize),
    /// Deliver the newest pending message.
    DeliverLast,
    /// Never deliver messages from this sender; skip them.
    Withhold(PartyId),
    /// Deliver the oldest pending message not from a withheld sender.
    DeliverNext,
}

/// Adversarial scripted scheduler. Falls back to FIFO over non-withheld senders once the
/// script is exhausted, unless `stop_after_script` is set.
pub struct ScriptedScheduler {
    steps: VecDeque<ScriptStep>,
    withheld: BTreeSet<PartyId>,
    pub stop_after_script: bool,
}

impl ScriptedScheduler {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        Self {
            steps: steps.into_iter().collect(),
            withheld: BTreeSet::new(),
            stop_after_script: false,
        }
    }

    fn first_allowed(&self, pending: &[PendingInfo]) -> Option<Ticket> {
        pending
            .iter()
            .find(|p| !self.withheld.contains(&p.sender))
            .map(|p| p.ticket)
    }
}

impl Scheduler for ScriptedScheduler {
    fn next(&mut self, pending: &[PendingInfo]) -> Option<Ticket> {
        while let Some(step) = self.steps.pop_front() {
            match step {
                ScriptStep::Withhold(p) => {
                    self.withheld.insert(p);
                }
                ScriptStep::DeliverIndex(i) => {
                    if let Some(p) = pending.get(i) {
                        return Some(p.ticket);
                    }
                }
                ScriptStep::DeliverLast => {
                    if let Some(p) = pending.last() {
                        return Some(p.ticket);
                    }
                }
                ScriptStep::DeliverNext => {
                    if let Some(t) = self.first_allowed(pending) {
                        return Some(t);
                    }
                }
            }
        }
        if self.stop_after_script {
            None
        } else {
            self.first_allowed(pending)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net() -> (Network, PartyId, PartyId, PartyId) {
        let (a, b, c) = (PartyId::indexed(1), PartyId::indexed(2), PartyId::indexed(3));
        let mut n = Network::new([a.clone(), b.clone(), c.clone()], 9);
        n.open_channel(b"s", &a, &b).unwrap();
        (n, a, b, c)
    }

    #[test]
    fn send_leaks_length_only() {
        let (mut n, a, b, _) = net();
        let t1 = n.chan_send(b"s", &a, &b, vec![1, 2, 3]).unwrap();
        let t2 = n.chan_send(b"s", &a, &b, vec![4]).unwrap();
        assert_ne!(t1, t2);
        assert_eq!(n.view()[0].length, 3);
        assert!(n.view().iter().all(|e| e.payload.is_none()));
        assert!(n.recv(&b).is_none());
        // out of order, exactly once
        assert_eq!(n.deliver(t2), vec![b.clone()]);
        assert!(n.deliver(t2).is_empty());
        assert_eq!(n.recv(&b).unwrap().payload, vec![4]);
        n.deliver(t1);
        assert_eq!(n.recv(&b).unwrap().sender, a);
        assert!(n.deliver(Ticket(12345)).is_empty());
    }

    #[test]
    fn corrupted_sender_leaks_payload() {
        let (mut n, a, b, _) = net();
        n.corrupt(&a);
        n.chan_send(b"s", &a, &b, vec![9, 9]).unwrap();
        assert_eq!(n.view()[0].payload.as_deref(), Some(&[9u8, 9][..]));
    }

    #[test]
    fn uninitialized_channel() {
        let (mut n, a, _, c) = net();
        assert!(matches!(n.chan_send(b"s", &a, &c, vec![]), Err(ChanError::Uninitialized { .. })));
        assert!(n.chan_send(b"other", &a, &c, vec![]).is_err());
    }

    #[test]
    fn broadcast_fans_out() {
        let (mut n, a, b, c) = net();
        let t = n.pub_publish(b"s", &b, vec![7]).unwrap();
        assert_eq!(n.view()[0].payload.as_deref(), Some(&[7u8][..]));
        assert_eq!(n.deliver(t).len(), 3);
        for p in [&a, &b, &c] {
            assert!(n.recv(p).unwrap().broadcast);
        }
    }

    #[test]
    fn withheld_sender_never_delivered() {
        let (mut n, a, b, _) = net();
        n.open_channel(b"s", &b, &a).unwrap();
        n.chan_send(b"s", &a, &b, vec![1]).unwrap();
        n.chan_send(b"s", &b, &a, vec![2]).unwrap();
        let mut s = ScriptedScheduler::new([ScriptStep::Withhold(a.clone())]);
        assert_eq!(n.run(&mut s), 1);
        assert!(n.recv(&b).is_none());
        assert_eq!(n.recv(&a).unwrap().payload, vec![2]);
        assert_eq!(n.pending().len(), 1);
    }
}
