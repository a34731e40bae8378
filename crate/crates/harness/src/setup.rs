//! Group, profile and oracle selection shared by the CLI and the acceptance suite.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use stardkg::algebra::{Group, Secp256k1Group, ToyGroup};
use stardkg::fischlin::FischlinParams;
use stardkg::keybox::{provision, KeyBox, KeyBoxConfig};
use stardkg::oracle::{Oracle, OracleMode};
use stardkg::sdkg::Env;
use stardkg::transport::PartyId;

/// Beacon seed for the production second generator `H`.
pub const H_SEED: &[u8] = b"stardkg/harness/H";
/// Discrete log of `H` in the toy group. Exposed only to the equivocation demo.
pub const TOY_TRAPDOOR: u64 = 7;
const TOY_PRIMES: [u64; 3] = [101, 65537, 1_048_573];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    Toy,
    Production,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    /// `(4, 2, 4, 4)`.
    Test,
    /// `(6, 2, 12, 12)`.
    Small,
    /// `(13, 8, 32, 32)`.
    Production,
}

impl ProfileMode {
    pub fn params(self) -> FischlinParams {
        match self {
            ProfileMode::Test => FischlinParams::TINY,
            ProfileMode::Small => FischlinParams::SMALL,
            ProfileMode::Production => FischlinParams::PRODUCTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    Ideal,
    Real,
}

impl OracleChoice {
    pub fn mode(self) -> OracleMode {
        match self {
            OracleChoice::Ideal => OracleMode::Ideal,
            OracleChoice::Real => OracleMode::RealHash,
        }
    }
}

/// Everything that identifies a run apart from its scenario-specific script.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RunConfig {
    pub group: GroupMode,
    pub profile: ProfileMode,
    pub oracle: OracleChoice,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(group: GroupMode, profile: ProfileMode, oracle: OracleChoice, seed: u64) -> Self {
        Self { group, profile, oracle, seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Smallest toy prime whose order admits the profile's challenge space.
pub fn toy_group(params: FischlinParams) -> anyhow::Result<ToyGroup> {
    for p in TOY_PRIMES {
        let g = ToyGroup::setup(p, TOY_TRAPDOOR)?;
        if params.validate(&g).is_ok() {
            return Ok(g);
        }
    }
    anyhow::bail!("no toy prime fits t = {}", params.t)
}

pub fn production_group() -> Secp256k1Group {
    Secp256k1Group::setup(H_SEED)
}

pub fn env<G: Group>(grp: G, cfg: &RunConfig) -> anyhow::Result<Env<G>> {
    let oracle = Arc::new(Oracle::new(cfg.oracle.mode(), cfg.seed));
    Ok(Env::new(grp, oracle, cfg.profile.params())?)
}

pub fn toy_env(cfg: &RunConfig) -> anyhow::Result<Env<ToyGroup>> {
    env(toy_group(cfg.profile.params())?, cfg)
}

/// Toy environment whose group reports its trapdoor. Only the equivocation demo uses it.
pub fn toy_trapdoor_env(cfg: &RunConfig) -> anyhow::Result<Env<ToyGroup>> {
    env(toy_group(cfg.profile.params())?.expose_trapdoor(), cfg)
}

pub fn production_env(cfg: &RunConfig) -> anyhow::Result<Env<Secp256k1Group>> {
    env(production_group(), cfg)
}

pub fn parties(n: usize) -> Vec<PartyId> {
    (1..=n).map(PartyId::indexed).collect()
}

pub fn keyboxes<G: Group>(
    env: &Env<G>,
    n: usize,
    config: KeyBoxConfig,
    seed: u64,
) -> BTreeMap<PartyId, KeyBox<G>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x6b62_6f78);
    provision(&parties(n), &env.grp, &env.oracle, env.params, config, &mut rng)
}

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Runs `$body` with `$env` bound to an environment of the configured group.
#[macro_export]
macro_rules! with_env {
    ($cfg:expr, |$env:ident| $body:expr) => {
        match $cfg.group {
            $crate::setup::GroupMode::Toy => {
                let $env = $crate::setup::toy_env(&$cfg)?;
                $body
            }
            $crate::setup::GroupMode::Production => {
                let $env = $crate::setup::production_env(&$cfg)?;
                $body
            }
        }
    };
}
