//! Commit–reveal randomness beacon over USV certificates.
//!
//! Commit broadcasts `C_i` only; reveal broadcasts `ζ_i`. A public observer checks each
//! reveal through the handle-bound table, sums the openings into `£` and outputs
//! `ρ = H_beacon(⟨sid, £⟩)`. Any missing or invalid reveal stalls the beacon; a second
//! commit under the same handle invalidates it.

use std::collections::BTreeMap;

use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::codec::{encode, Value};
use stardkg::keybox::KeyBoxConfig;
use stardkg::oracle::{ctx, CallerId};
use stardkg::sdkg::Env;
use stardkg::transport::{FifoScheduler, Network, PartyId};
use stardkg::usv::{HandleKey, HandleStatus, UsvCertificate, UsvHandleTable, UsvTag};

use crate::report::{Outcome, RunReport};
use crate::scan::LeakScanner;
use crate::setup::{keyboxes, RunConfig};

const COMMIT: &str = "Beacon.Commit";
const REVEAL: &str = "Beacon.Reveal";
const CID: &[u8] = b"beacon";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BeaconAction {
    /// Commit but never reveal.
    Withhold(usize),
    /// After seeing the other commits, commit again to a fresh certificate.
    Recommit(usize),
    /// Reveal a tag belonging to a different commitment.
    BadReveal(usize),
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct BeaconResult {
    pub status: String,
    pub rho: Option<String>,
    pub pounds: Option<String>,
    pub commits: usize,
    pub reveals: usize,
    pub flagged: BTreeMap<String, String>,
    pub missing: Vec<String>,
}

struct Observer<'a, G: Group> {
    env: &'a Env<G>,
    id: PartyId,
    caller: CallerId,
    sid: Vec<u8>,
    commits: BTreeMap<PartyId, G::Element>,
    status: BTreeMap<PartyId, HandleStatus>,
    opened: BTreeMap<PartyId, G::Element>,
    table: UsvHandleTable<G>,
    flagged: BTreeMap<PartyId, String>,
}

impl<G: Group> Observer<'_, G> {
    fn key(&self, p: &PartyId) -> HandleKey {
        HandleKey {
            sid: self.sid.clone(),
            cid: CID.to_vec(),
            sender: p.clone(),
            recipient: self.id.clone(),
        }
    }

    fn on_message(&mut self, sender: PartyId, payload: &[u8]) {
        let grp = &self.env.grp;
        let Ok(v) = stardkg::codec::decode(payload) else {
            self.flagged.insert(sender, "malformed message".into());
            return;
        };
        let Ok(it) = v.as_tuple_of(3) else {
            self.flagged.insert(sender, "malformed message".into());
            return;
        };
        if it[1].as_bytes().ok() != Some(self.sid.as_slice()) {
            return;
        }
        if it[0].is_label(COMMIT) {
            let Ok(c) = grp.parse_element(&it[2]) else {
                self.flagged.insert(sender, "malformed commitment".into());
                return;
            };
            if self.commits.contains_key(&sender) {
                self.status.insert(sender.clone(), HandleStatus::Invalid);
                self.flagged.insert(sender, "duplicate commit".into());
            } else {
                self.commits.insert(sender.clone(), c);
                self.status.insert(sender, HandleStatus::Pending);
            }
        } else if it[0].is_label(REVEAL) {
            let (Some(c), Ok(tag)) = (self.commits.get(&sender).copied(), UsvTag::<G>::from_value(grp, &it[2])) else {
                self.flagged.insert(sender, "reveal without commit".into());
                return;
            };
            if self.status.get(&sender) == Some(&HandleStatus::Invalid) {
                return;
            }
            let usv = self.env.usv();
            let key = self.key(&sender);
            let committed = self.table.commit(&usv, &self.caller, key.clone(), &c, &tag).is_ok();
            let ok = committed && self.table.verify(&usv, &self.caller, &key, &c, &tag) == Some(true);
            match (ok, usv.open_m(&self.caller, &c, &tag)) {
                (true, Some(m)) => {
                    self.opened.insert(sender, m);
                }
                _ => {
                    self.flagged.insert(sender, "invalid reveal".into());
                }
            }
        }
    }
}

fn message(label: &str, sid: &[u8], body: Value) -> Vec<u8> {
    encode(&Value::tuple(vec![Value::label(label), Value::bytes(sid), body]))
}

pub fn run_beacon<G: Group>(
    env: &Env<G>,
    cfg: &RunConfig,
    parties: usize,
    actions: &[BeaconAction],
    scan: Option<&mut LeakScanner>,
) -> anyhow::Result<RunReport> {
    let grp = &env.grp;
    let sid = format!("sid-beacon-{}", cfg.seed).into_bytes();
    let mut kbs = keyboxes(env, parties, KeyBoxConfig::default(), cfg.seed);
    let observer = PartyId::new("observer");
    let ids = crate::setup::parties(parties);
    let mut net = Network::new(ids.iter().cloned().chain([observer.clone()]), cfg.seed);
    let mut obs = Observer {
        env,
        id: observer.clone(),
        caller: CallerId::new("beacon-observer"),
        sid: sid.clone(),
        commits: BTreeMap::new(),
        status: BTreeMap::new(),
        opened: BTreeMap::new(),
        table: UsvHandleTable::new(),
        flagged: BTreeMap::new(),
    };
    let mut surfaces: Vec<(String, Vec<u8>)> = Vec::new();
    let has = |a: &BeaconAction| actions.contains(a);

    let mut certs: BTreeMap<PartyId, UsvCertificate<G>> = BTreeMap::new();
    for (id, kb) in kbs.iter_mut() {
        let cert = kb.usv_cert().ok_or_else(|| anyhow::anyhow!("USV.Cert refused for {}", id.as_str()))?;
        certs.insert(id.clone(), cert);
    }
    let pump = |net: &mut Network, obs: &mut Observer<'_, G>| {
        net.run(&mut FifoScheduler);
        while let Some(m) = net.recv(&observer) {
            obs.on_message(m.sender, &m.payload);
        }
        for id in &ids {
            while net.recv(id).is_some() {}
        }
    };

    for (id, cert) in &certs {
        let payload = message(COMMIT, &sid, grp.element_value(&cert.c));
        surfaces.push((format!("beacon/commit/{}", id.as_str()), payload.clone()));
        net.pub_publish(&sid, id, payload)?;
    }
    pump(&mut net, &mut obs);
    for (i, id) in ids.iter().enumerate() {
        if has(&BeaconAction::Recommit(i + 1)) {
            let fresh = kbs.get_mut(id).and_then(|kb| kb.usv_cert()).expect("second certificate");
            let payload = message(COMMIT, &sid, grp.element_value(&fresh.c));
            surfaces.push((format!("beacon/recommit/{}", id.as_str()), payload.clone()));
            net.pub_publish(&sid, id, payload)?;
            certs.insert(id.clone(), UsvCertificate { c: certs[id].c, tag: fresh.tag });
        }
    }
    pump(&mut net, &mut obs);
    let commit_set: BTreeMap<PartyId, G::Element> = obs.commits.clone();

    for (i, id) in ids.iter().enumerate() {
        if has(&BeaconAction::Withhold(i + 1)) {
            continue;
        }
        let tag = if has(&BeaconAction::BadReveal(i + 1)) {
            kbs.get_mut(id).and_then(|kb| kb.usv_cert()).expect("decoy certificate").tag
        } else {
            certs[id].tag.clone()
        };
        let payload = message(REVEAL, &sid, tag.to_value(grp, &env.params));
        surfaces.push((format!("beacon/reveal/{}", id.as_str()), payload.clone()));
        net.pub_publish(&sid, id, payload)?;
    }
    pump(&mut net, &mut obs);

    let missing: Vec<String> = ids
        .iter()
        .filter(|p| !obs.opened.contains_key(p) && !obs.flagged.contains_key(p))
        .map(|p| p.as_str().to_string())
        .collect();
    let flagged: BTreeMap<String, String> = obs.flagged.iter().map(|(p, r)| (p.as_str().to_string(), r.clone())).collect();
    let mut result = BeaconResult {
        status: "stalled".into(),
        rho: None,
        pounds: None,
        commits: commit_set.len(),
        reveals: obs.opened.len(),
        flagged,
        missing,
    };
    if result.flagged.is_empty() && result.missing.is_empty() && obs.opened.len() == ids.len() {
        let pounds = obs.opened.values().fold(grp.identity(), |acc, m| acc + *m);
        let input = Value::tuple(vec![Value::bytes(&sid), grp.element_value(&pounds)]);
        let rho = env.oracle.query(&obs.caller, ctx::BEACON, &encode(&input))?;
        result.status = "output".into();
        result.rho = Some(hex::encode(rho));
        result.pounds = Some(hex::encode(grp.element_to_bytes(&pounds)));
    }

    let mut rep = RunReport::new("beacon", grp, env.params, cfg);
    rep.datum("parties", parties);
    rep.datum("actions", actions);
    let withheld = actions.iter().any(|a| matches!(a, BeaconAction::Withhold(_)));
    let expect_output = actions.is_empty();
    rep.check(
        "outcome matches schedule",
        (result.status == "output") == expect_output,
        result.status.clone(),
    );
    rep.check("commit set intact", result.commits == parties, format!("{} commits", result.commits));
    if withheld {
        rep.check("withheld reveal stalls", result.status == "stalled" && !result.missing.is_empty(), "");
    }
    for a in actions {
        if let BeaconAction::Recommit(i) | BeaconAction::BadReveal(i) = a {
            let p = PartyId::indexed(*i);
            rep.check(&format!("{} flagged", p.as_str()), result.flagged.contains_key(p.as_str()), "");
        }
    }
    rep.datum("handles", obs.table.export(grp));
    rep.datum("result", &result);
    rep.outcome = Outcome::status(&result.status);

    if let Some(s) = scan {
        for kb in kbs.values() {
            s.add_resident(kb);
        }
        for (l, b) in surfaces {
            s.add_bytes(l, b);
        }
        s.add_json("beacon/adversary-view", net.view());
        for (id, kb) in &kbs {
            s.add_json(format!("beacon/snapshot/{}", id.as_str()), &kb.corrupt_snapshot());
        }
        s.add_json("beacon/report", &rep);
    }
    Ok(rep)
}
