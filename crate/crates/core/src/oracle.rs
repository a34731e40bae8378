//! Global random oracle with context-restricted programmability.
//!
//! Each context is a separate lazily sampled table. Only contexts registered as
//! programmable accept [`Oracle::sim_program`], and only on points nobody has queried.
//! Every query is appended to the calling party's log, which is what the straight-line
//! extractor reads.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

use crate::codec::{encode, Value};

pub type Digest = [u8; 32];

/// Standard context names.
pub mod ctx {
    pub const UC: &str = "ctx_UC";
    pub const KEYBOX: &str = "ctx_KeyBox";
    pub const DLEQ: &str = "ctx_DLEQ";
    pub const SDKG_S32: &str = "ctx_SDKG.s32";
    pub const USV_RCPT: &str = "ctx_USV.rcpt";
    pub const BEACON: &str = "ctx_beacon";
}

const REAL_HASH_PREFIX: &[u8] = b"gROCRP";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unknown oracle context {0:?}")]
    UnknownContext(String),
    #[error("programming is unavailable in real-hash mode")]
    ProgrammingUnavailable,
    #[error("b = {0} outside 1..=64")]
    RarityWidth(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMode {
    /// Lazily sampled uniform table, seedable.
    Ideal,
    /// SHA-256 with context-name domain separation; no programming.
    RealHash,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleContext {
    pub name: String,
    pub programmable: bool,
}

impl OracleContext {
    pub fn new(name: &str, programmable: bool) -> Self {
        Self {
            name: name.to_string(),
            programmable,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CallerId(Arc<str>);

impl CallerId {
    pub fn new(name: impl AsRef<str>) -> Self {
        Self(Arc::from(name.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for CallerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CallerId({})", self.0)
    }
}

impl From<&str> for CallerId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub ctx: Arc<str>,
    pub input: Arc<[u8]>,
    pub output: Digest,
}

struct State {
    tables: Vec<HashMap<Arc<[u8]>, Digest>>,
    logs: HashMap<CallerId, Vec<LogEntry>>,
    rng: ChaCha20Rng,
}

pub struct Oracle {
    mode: OracleMode,
    contexts: Vec<OracleContext>,
    names: Vec<Arc<str>>,
    index: HashMap<String, usize>,
    state: Mutex<State>,
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("mode", &self.mode)
            .field("contexts", &self.contexts)
            .finish_non_exhaustive()
    }
}

/// The six contexts used by the protocol stack.
pub fn standard_contexts() -> Vec<OracleContext> {
    vec![
        OracleContext::new(ctx::UC, true),
        OracleContext::new(ctx::KEYBOX, true),
        OracleContext::new(ctx::DLEQ, true),
        OracleContext::new(ctx::SDKG_S32, false),
        OracleContext::new(ctx::USV_RCPT, false),
        OracleContext::new(ctx::BEACON, false),
    ]
}

/// `lsb_b` of a digest read as a big-endian integer.
pub fn lsb_bits(d: &Digest, b: u32) -> u64 {
    let mut tail = [0u8; 8];
    tail.copy_from_slice(&d[24..]);
    let v = u64::from_be_bytes(tail);
    if b >= 64 {
        v
    } else {
        v & ((1u64 << b) - 1)
    }
}

impl Oracle {
    pub fn new(mode: OracleMode, seed: u64) -> Self {
        Self::with_contexts(mode, seed, standard_contexts())
    }

    /// Panics on duplicate context names; the partition is fixed here for the oracle's lifetime.
    pub fn with_contexts(mode: OracleMode, seed: u64, contexts: Vec<OracleContext>) -> Self {
        let mut index = HashMap::new();
        for (i, c) in contexts.iter().enumerate() {
            assert!(
                index.insert(c.name.clone(), i).is_none(),
                "duplicate oracle context {}",
                c.name
            );
        }
        let names = contexts.iter().map(|c| Arc::from(c.name.as_str())).collect();
        Self {
            mode,
            state: Mutex::new(State {
                tables: vec![HashMap::new(); contexts.len()],
                logs: HashMap::new(),
                rng: ChaCha20Rng::seed_from_u64(seed),
            }),
            contexts,
            names,
            index,
        }
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    pub fn contexts(&self) -> &[OracleContext] {
        &self.contexts
    }

    pub fn is_programmable(&self, ctx: &str) -> Result<bool, OracleError> {
        Ok(self.contexts[self.ctx_index(ctx)?].programmable)
    }

    fn ctx_index(&self, ctx: &str) -> Result<usize, OracleError> {
        self.index
            .get(ctx)
            .copied()
            .ok_or_else(|| OracleError::UnknownContext(ctx.to_string()))
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn real_hash(ctx: &str, x: &[u8]) -> Digest {
        let framed = encode(&Value::tuple(vec![Value::label(ctx), Value::bytes(x)]));
        let mut h = Sha256::new();
        h.update(REAL_HASH_PREFIX);
        h.update(&framed);
        h.finalize().into()
    }

    pub fn query(&self, caller: &CallerId, ctx: &str, x: &[u8]) -> Result<Digest, OracleError> {
        let ci = self.ctx_index(ctx)?;
        let mut st = self.lock();
        let (input, output) = match self.mode {
            OracleMode::RealHash => (Arc::<[u8]>::from(x), Self::real_hash(ctx, x)),
            OracleMode::Ideal => match st.tables[ci].get_key_value(x) {
                Some((k, v)) => (k.clone(), *v),
                None => {
                    let mut y = [0u8; 32];
                    st.rng.fill_bytes(&mut y);
                    let k = Arc::<[u8]>::from(x);
                    st.tables[ci].insert(k.clone(), y);
                    (k, y)
                }
            },
        };
        st.logs.entry(caller.clone()).or_default().push(LogEntry {
            ctx: self.names[ci].clone(),
            input,
            output,
        });
        Ok(output)
    }

    /// Least-significant `b` bits of [`Oracle::query`], for `1 ≤ b ≤ 64`.
    pub fn hb(&self, caller: &CallerId, ctx: &str, x: &[u8], b: u32) -> Result<u64, OracleError> {
        if !(1..=64).contains(&b) {
            return Err(OracleError::RarityWidth(b));
        }
        Ok(lsb_bits(&self.query(caller, ctx, x)?, b))
    }

    /// Program `T[ctx, x] = y`. Returns `Ok(false)` (⊥) if `ctx` is not programmable or
    /// the point already has a value; state is unchanged in that case.
    pub fn sim_program(&self, ctx: &str, x: &[u8], y: Digest) -> Result<bool, OracleError> {
        let ci = self.ctx_index(ctx)?;
        if self.mode == OracleMode::RealHash {
            return Err(OracleError::ProgrammingUnavailable);
        }
        if !self.contexts[ci].programmable {
            return Ok(false);
        }
        let mut st = self.lock();
        if st.tables[ci].contains_key(x) {
            return Ok(false);
        }
        st.tables[ci].insert(Arc::from(x), y);
        Ok(true)
    }

    /// Snapshot of the caller's log.
    pub fn log(&self, caller: &CallerId) -> Vec<LogEntry> {
        self.lock().logs.get(caller).cloned().unwrap_or_default()
    }

    /// Removes and returns the caller's log. Bounds memory in long statistics runs.
    pub fn take_log(&self, caller: &CallerId) -> Vec<LogEntry> {
        self.lock().logs.remove(caller).unwrap_or_default()
    }

    pub fn log_len(&self, caller: &CallerId) -> usize {
        self.lock().logs.get(caller).map_or(0, Vec::len)
    }

    /// Number of populated cells under `ctx` (ideal mode).
    pub fn table_len(&self, ctx: &str) -> Result<usize, OracleError> {
        let ci = self.ctx_index(ctx)?;
        Ok(self.lock().tables[ci].len())
    }

    /// Current value of a cell without querying (ideal mode), for isolation tests.
    pub fn peek(&self, ctx: &str, x: &[u8]) -> Result<Option<Digest>, OracleError> {
        let ci = self.ctx_index(ctx)?;
        Ok(self.lock().tables[ci].get(x).copied())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caller() -> CallerId {
        CallerId::new("tester")
    }

    #[test]
    fn table_semantics_and_logging() {
        let o = Oracle::new(OracleMode::Ideal, 1);
        let a = o.query(&caller(), ctx::UC, b"x").unwrap();
        let b = o.query(&caller(), ctx::UC, b"x").unwrap();
        assert_eq!(a, b);
        assert_ne!(a, o.query(&caller(), ctx::KEYBOX, b"x").unwrap());
        let log = o.log(&caller());
        assert_eq!(log.len(), 3);
        assert_eq!(&*log[2].ctx, ctx::KEYBOX);
        assert_eq!(&*log[0].input, b"x");
    }

    #[test]
    fn unknown_context() {
        let o = Oracle::new(OracleMode::Ideal, 1);
        assert!(matches!(
            o.query(&caller(), "ctx_nope", b""),
            Err(OracleError::UnknownContext(_))
        ));
    }

    #[test]
    fn programming_rules() {
        let o = Oracle::new(OracleMode::Ideal, 2);
        let y = [7u8; 32];
        assert_eq!(o.sim_program(ctx::UC, b"fresh", y), Ok(true));
        assert_eq!(o.query(&caller(), ctx::UC, b"fresh").unwrap(), y);
        // no overwrite of a programmed cell
        assert_eq!(o.sim_program(ctx::UC, b"fresh", [8u8; 32]), Ok(false));
        assert_eq!(o.sim_program(ctx::SDKG_S32, b"z", y), Ok(false));
        assert_eq!(o.peek(ctx::SDKG_S32, b"z").unwrap(), None);
        let orig = o.query(&caller(), ctx::DLEQ, b"q").unwrap();
        assert_eq!(o.sim_program(ctx::DLEQ, b"q", y), Ok(false));
        assert_eq!(o.query(&caller(), ctx::DLEQ, b"q").unwrap(), orig);
    }

    #[test]
    fn real_hash_mode() {
        let o = Oracle::new(OracleMode::RealHash, 0);
        assert_eq!(
            o.sim_program(ctx::UC, b"x", [0; 32]),
            Err(OracleError::ProgrammingUnavailable)
        );
        let d = o.query(&caller(), ctx::UC, b"abc").unwrap();
        let mut h = Sha256::new();
        h.update(b"gROCRP");
        // Tuple[Label("ctx_UC"), ByteString("abc")]
        h.update([0x10, 0, 0, 0, 19, 0x06, 0, 0, 0, 6]);
        h.update(b"ctx_UC");
        h.update([0x03, 0, 0, 0, 3]);
        h.update(b"abc");
        assert_eq!(d, <[u8; 32]>::from(h.finalize()));
        assert_eq!(o.log_len(&caller()), 1);
    }

    #[test]
    fn hb_is_digest_mod_2b() {
        let o = Oracle::new(OracleMode::Ideal, 3);
        for i in 0..200u32 {
            let x = i.to_be_bytes();
            let d = o.query(&caller(), ctx::UC, &x).unwrap();
            assert_eq!(o.hb(&caller(), ctx::UC, &x, 8).unwrap(), d[31] as u64);
            let v13 = o.hb(&caller(), ctx::UC, &x, 13).unwrap();
            assert_eq!(v13, (((d[30] as u64) << 8) | d[31] as u64) & 0x1fff);
        }
        assert_eq!(o.hb(&caller(), ctx::UC, b"", 0), Err(OracleError::RarityWidth(0)));
    }
}
