//! JSON run reports. Every field except `timings_ms` is a deterministic function of the
//! run configuration.

use std::collections::BTreeMap;

use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::fischlin::{proof_value, FischlinParams, ProveStats};
use stardkg::sdkg::{BaseOutcome, SdkgTranscript};
use stardkg::sigma::Schnorr;
use stardkg::transport::PartyId;

use crate::setup::RunConfig;

pub const KIB: f64 = 1024.0;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ProfileInfo {
    pub t: u32,
    pub b: u32,
    pub r: usize,
    pub s: u64,
}

impl From<FischlinParams> for ProfileInfo {
    fn from(p: FischlinParams) -> Self {
        Self {
            t: p.t,
            b: p.b,
            r: p.r,
            s: p.s,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Outcome {
    /// `accepted`, `aborted`, `stalled`, `registered` or `completed`.
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub party: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub public_key: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub registered: Vec<PartyId>,
}

impl Outcome {
    pub fn status(s: &str) -> Self {
        Self {
            status: s.into(),
            ..Self::default()
        }
    }

    pub fn from_base<G: Group>(grp: &G, o: &BaseOutcome<G::Element>) -> Self {
        match o {
            BaseOutcome::Accepted { k } => Self {
                public_key: Some(hex::encode(grp.element_to_bytes(k))),
                ..Self::status("accepted")
            },
            BaseOutcome::Aborted { party, check } => Self {
                party: Some(PartyId::indexed(*party as usize).as_str().to_string()),
                reason: Some(format!("{check:?}: {}", check.describe())),
                ..Self::status("aborted")
            },
            BaseOutcome::Stalled => Self::status("stalled"),
        }
    }
}

/// Canonical encoded sizes in bytes.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Sizes {
    pub pi_dl: usize,
    pub pi_aff: usize,
    pub usv_cert: usize,
    pub round1: usize,
    pub round2: usize,
    pub round3: usize,
    pub total: usize,
}

impl Sizes {
    pub fn of<G: Group>(grp: &G, params: &FischlinParams, t: &SdkgTranscript<G>) -> Self {
        let [round1, round2, round3] = t.round_sizes(grp, params);
        Self {
            pi_dl: proof_value::<G, Schnorr>(grp, params, &t.t2.aff1.y).encoded_len(),
            pi_aff: t.t2.aff1.to_value(grp, params).encoded_len(),
            usv_cert: t.t1.cert_value(grp, params).encoded_len(),
            round1,
            round2,
            round3,
            total: round1 + round2 + round3,
        }
    }

    pub fn kib(bytes: usize) -> f64 {
        bytes as f64 / KIB
    }
}

#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct ProofSummary {
    pub proofs: usize,
    pub repetitions: usize,
    pub mean_trials: f64,
    pub rejected: u64,
}

impl ProofSummary {
    pub fn of<'a>(stats: impl IntoIterator<Item = &'a ProveStats>) -> Self {
        let mut s = Self::default();
        let mut trials = 0u64;
        for st in stats {
            s.proofs += 1;
            s.repetitions += st.trials.len();
            trials += st.total_trials();
            s.rejected += st.rejected;
        }
        if s.repetitions > 0 {
            s.mean_trials = trials as f64 / s.repetitions as f64;
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub group: String,
    pub profile: ProfileInfo,
    pub oracle: String,
    pub seed: u64,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Sizes>,
    pub proofs: ProofSummary,
    pub checks: Vec<CheckResult>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, serde_json::Value>,
    /// Wall-clock measurements; excluded from determinism comparisons.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new<G: Group>(scenario: &str, grp: &G, params: FischlinParams, cfg: &RunConfig) -> Self {
        Self {
            scenario: scenario.into(),
            group: grp.name().into(),
            profile: params.into(),
            oracle: format!("{:?}", cfg.oracle).to_lowercase(),
            seed: cfg.seed,
            outcome: Outcome::status("completed"),
            sizes: None,
            proofs: ProofSummary::default(),
            checks: Vec::new(),
            data: BTreeMap::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) -> bool {
        self.checks.push(CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
        passed
    }

    pub fn datum(&mut self, key: &str, v: impl Serialize) {
        self.data
            .insert(key.into(), serde_json::to_value(v).expect("serializable datum"));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Report with wall-clock data removed, for replay comparisons.
    pub fn without_timings(&self) -> Self {
        Self {
            timings_ms: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
