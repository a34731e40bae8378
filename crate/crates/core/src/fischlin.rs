//! Fischlin transform with early-break rarity search.
//!
//! For each of `r` repetitions the prover walks challenges `e = 0, 1, …, 2^t − 1`,
//! hashing `⟨stmt, a-vector, i, e, z⟩` to `b` bits, and stops at the first zero. If none
//! is found it keeps the smallest value seen (ties go to the later challenge). A proof
//! is accepted when every Σ-transcript verifies and the `r` rarity values sum to at most
//! `S`. Because the prover has to query the oracle on at least two challenges for
//! almost every repetition, its query log yields the witness by special soundness.

use std::collections::BTreeMap;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::Group;
use crate::codec::{self, CodecError, TupleWriter, Value};
use crate::oracle::{CallerId, Digest, LogEntry, Oracle, OracleError};
use crate::sigma::{special_soundness, DlStatement, Schnorr, SigmaProtocol, SigmaTranscript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FischlinParams {
    /// Challenge bits.
    pub t: u32,
    /// Rarity bits.
    pub b: u32,
    /// Repetitions.
    pub r: usize,
    /// Slack on the rarity sum.
    pub s: u64,
}

impl FischlinParams {
    pub const PRODUCTION: Self = Self { t: 13, b: 8, r: 32, s: 32 };
    /// Fast unit-test profile.
    pub const TINY: Self = Self { t: 4, b: 2, r: 4, s: 4 };
    /// Toy-group profile with `b·r = 24`, so honest extraction fails with probability `2^-24`.
    pub const SMALL: Self = Self { t: 6, b: 2, r: 12, s: 12 };

    pub fn validate<G: Group>(&self, grp: &G) -> Result<(), FischlinError> {
        if self.t == 0 || self.t > 32 {
            return Err(FischlinError::Params("t must lie in 1..=32"));
        }
        if self.b == 0 || self.b > self.t {
            return Err(FischlinError::Params("b must lie in 1..=t"));
        }
        if self.r == 0 {
            return Err(FischlinError::Params("r must be positive"));
        }
        if !grp.order_exceeds(1u128 << self.t) {
            return Err(FischlinError::Params("2^t must be below the group order"));
        }
        Ok(())
    }

    pub fn challenge_space(&self) -> u64 {
        1u64 << self.t
    }

    fn challenge_width(&self) -> usize {
        (self.t as usize).div_ceil(8)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FischlinError {
    #[error("invalid parameters: {0}")]
    Params(&'static str),
    #[error("witness does not satisfy the statement")]
    WitnessMismatch,
    #[error("rarity sum {sum} exceeds slack")]
    HonestReject { sum: u64 },
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("simulation could not program a pre-queried point")]
    SimulationFailed,
    #[error("nonce and commitment counts differ from r")]
    FirstMoveShape,
}

/// `r` Σ-transcripts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FischlinProof<C, S> {
    pub triples: Vec<SigmaTranscript<C, S>>,
}

pub type DlProof<G> = FischlinProof<<G as Group>::Element, <G as Group>::Scalar>;
pub type DleqProof<G> =
    FischlinProof<(<G as Group>::Element, <G as Group>::Element), <G as Group>::Scalar>;

/// Prover-side measurements for one proof.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProveStats {
    /// Challenges tried per repetition.
    pub trials: Vec<u64>,
    /// Selected rarity value per repetition.
    pub rarity: Vec<u64>,
    /// Honest rejections discarded before this proof was produced.
    #[serde(default)]
    pub rejected: u64,
}

impl ProveStats {
    pub fn rarity_sum(&self) -> u64 {
        self.rarity.iter().sum()
    }

    pub fn total_trials(&self) -> u64 {
        self.trials.iter().sum()
    }
}

/// Encoded hash-input layout for one (statement, a-vector) pair.
struct HashLayout {
    prefix: Vec<u8>,
    total_len: usize,
}

impl HashLayout {
    const U64_LEN: usize = codec::HEADER_LEN + 8;

    fn new(stmt: &Value, avec: &Value, scalar_len: usize) -> Self {
        let mut w = TupleWriter::new();
        w.push(stmt).push(avec);
        let body = w.body().len() + 2 * Self::U64_LEN + codec::HEADER_LEN + scalar_len;
        let mut prefix = Vec::with_capacity(codec::HEADER_LEN + w.body().len());
        codec::write_header(&mut prefix, codec::TAG_TUPLE, body);
        prefix.extend_from_slice(w.body());
        Self {
            prefix,
            total_len: codec::HEADER_LEN + body,
        }
    }

    fn fill(&self, out: &mut Vec<u8>, i: u64, e: u64, z: &[u8]) {
        out.clear();
        out.extend_from_slice(&self.prefix);
        codec::encode_into(&Value::U64(i), out);
        codec::encode_into(&Value::U64(e), out);
        codec::write_header(out, codec::TAG_SCALAR, z.len());
        out.extend_from_slice(z);
        debug_assert_eq!(out.len(), self.total_len);
    }

    /// Parses `(i, e, z-bytes)` from an input that carries this layout's prefix.
    fn parse<'a>(&self, input: &'a [u8]) -> Option<(u64, u64, &'a [u8])> {
        if input.len() != self.total_len || !input.starts_with(&self.prefix) {
            return None;
        }
        let rest = &input[self.prefix.len()..];
        let u = |b: &[u8]| -> Option<u64> {
            (b[0] == codec::TAG_U64 && b[1..5] == [0, 0, 0, 8])
                .then(|| u64::from_be_bytes(b[5..13].try_into().unwrap()))
        };
        let i = u(&rest[..Self::U64_LEN])?;
        let e = u(&rest[Self::U64_LEN..2 * Self::U64_LEN])?;
        let zpart = &rest[2 * Self::U64_LEN..];
        (zpart[0] == codec::TAG_SCALAR).then_some(&zpart[codec::HEADER_LEN..])
            .map(|z| (i, e, z))
    }
}

fn low_bits_cleared(mut y: Digest, b: u32) -> Digest {
    let mut bits = b;
    let mut idx = 31;
    while bits >= 8 {
        y[idx] = 0;
        bits -= 8;
        idx -= 1;
    }
    if bits > 0 {
        y[idx] &= !((1u8 << bits) - 1);
    }
    y
}

/// Fischlin prover, verifier, extractor and simulator bound to one group, oracle and profile.
pub struct Fischlin<'a, G: Group> {
    pub grp: &'a G,
    pub oracle: &'a Oracle,
    pub params: FischlinParams,
}

impl<'a, G: Group> Fischlin<'a, G> {
    pub fn new(grp: &'a G, oracle: &'a Oracle, params: FischlinParams) -> Result<Self, FischlinError> {
        params.validate(grp)?;
        Ok(Self { grp, oracle, params })
    }

    fn layout<P: SigmaProtocol<G>>(&self, stmt: &P::Statement, commitments: &[P::Commitment]) -> HashLayout {
        let avec = Value::Tuple(commitments.iter().map(|a| P::commitment_value(self.grp, a)).collect());
        HashLayout::new(&P::statement_value(self.grp, stmt), &avec, self.grp.scalar_len())
    }

    /// Samples the `r` independent first moves.
    pub fn first_moves<P: SigmaProtocol<G>, R: RngCore + CryptoRng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> (Vec<G::Scalar>, Vec<P::Commitment>) {
        (0..self.params.r).map(|_| P::commit(self.grp, rng)).unzip()
    }

    /// Rarity search over precomputed first moves.
    pub fn respond_all<P: SigmaProtocol<G>>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &P::Statement,
        witness: &G::Scalar,
        nonces: &[G::Scalar],
        commitments: &[P::Commitment],
    ) -> Result<(FischlinProof<P::Commitment, G::Scalar>, ProveStats), FischlinError> {
        let r = self.params.r;
        if nonces.len() != r || commitments.len() != r {
            return Err(FischlinError::FirstMoveShape);
        }
        let layout = self.layout::<P>(stmt, commitments);
        let mut buf = Vec::with_capacity(layout.total_len);
        let mut triples = Vec::with_capacity(r);
        let mut stats = ProveStats::default();
        for (idx, (j, a)) in nonces.iter().zip(commitments).enumerate() {
            let i = idx as u64 + 1;
            let mut z = *j;
            let mut best = (u64::MAX, 0u64, z);
            let mut tried = 0;
            for e in 0..self.params.challenge_space() {
                if e > 0 {
                    z = z + *witness;
                }
                tried += 1;
                layout.fill(&mut buf, i, e, &self.grp.scalar_to_bytes(&z));
                let s = self.oracle.hb(caller, ctx, &buf, self.params.b)?;
                if s <= best.0 {
                    best = (s, e, z);
                }
                if s == 0 {
                    break;
                }
            }
            stats.trials.push(tried);
            stats.rarity.push(best.0);
            triples.push(SigmaTranscript {
                commitment: *a,
                challenge: best.1,
                response: best.2,
            });
        }
        let sum = stats.rarity_sum();
        if sum > self.params.s {
            return Err(FischlinError::HonestReject { sum });
        }
        Ok((FischlinProof { triples }, stats))
    }

    pub fn prove<P: SigmaProtocol<G>, R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &P::Statement,
        witness: &G::Scalar,
        rng: &mut R,
    ) -> Result<(FischlinProof<P::Commitment, G::Scalar>, ProveStats), FischlinError> {
        if !P::relation_holds(self.grp, stmt, witness) {
            return Err(FischlinError::WitnessMismatch);
        }
        let (nonces, commitments) = self.first_moves::<P, R>(rng);
        self.respond_all::<P>(caller, ctx, stmt, witness, &nonces, &commitments)
    }

    /// Retries with fresh first moves after an honest rejection, up to `attempts` times.
    pub fn prove_retrying<P: SigmaProtocol<G>, R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &P::Statement,
        witness: &G::Scalar,
        rng: &mut R,
        attempts: usize,
    ) -> Result<(FischlinProof<P::Commitment, G::Scalar>, ProveStats), FischlinError> {
        let mut last = FischlinError::HonestReject { sum: 0 };
        for rejected in 0..attempts.max(1) {
            match self.prove::<P, R>(caller, ctx, stmt, witness, rng) {
                Err(e @ FischlinError::HonestReject { .. }) => last = e,
                Ok((proof, mut stats)) => {
                    stats.rejected = rejected as u64;
                    return Ok((proof, stats));
                }
                other => return other,
            }
        }
        Err(last)
    }

    pub fn verify<P: SigmaProtocol<G>>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &P::Statement,
        proof: &FischlinProof<P::Commitment, G::Scalar>,
    ) -> bool {
        if proof.triples.len() != self.params.r {
            return false;
        }
        let space = self.params.challenge_space();
        for tr in &proof.triples {
            if tr.challenge >= space
                || !P::verify(self.grp, stmt, &tr.commitment, tr.challenge, &tr.response)
            {
                return false;
            }
        }
        let commitments: Vec<_> = proof.triples.iter().map(|t| t.commitment).collect();
        let layout = self.layout::<P>(stmt, &commitments);
        let mut buf = Vec::with_capacity(layout.total_len);
        let mut sum = 0u64;
        for (idx, tr) in proof.triples.iter().enumerate() {
            layout.fill(&mut buf, idx as u64 + 1, tr.challenge, &self.grp.scalar_to_bytes(&tr.response));
            match self.oracle.hb(caller, ctx, &buf, self.params.b) {
                Ok(s) => sum += s,
                Err(_) => return false,
            }
            if sum > self.params.s {
                return false;
            }
        }
        true
    }

    /// Straight-line extraction from the prover's query log.
    pub fn extract<P: SigmaProtocol<G>>(
        &self,
        ctx: &str,
        stmt: &P::Statement,
        proof: &FischlinProof<P::Commitment, G::Scalar>,
        log: &[LogEntry],
    ) -> Option<G::Scalar> {
        let commitments: Vec<_> = proof.triples.iter().map(|t| t.commitment).collect();
        let layout = self.layout::<P>(stmt, &commitments);
        let mut by_rep: BTreeMap<u64, Vec<(u64, G::Scalar)>> = BTreeMap::new();
        for entry in log.iter().filter(|en| &*en.ctx == ctx) {
            let Some((i, e, zb)) = layout.parse(&entry.input) else {
                continue;
            };
            if i == 0 || i as usize > commitments.len() {
                continue;
            }
            let Ok(z) = self.grp.scalar_from_bytes(zb) else {
                continue;
            };
            let a = &commitments[i as usize - 1];
            if !P::verify(self.grp, stmt, a, e, &z) {
                continue;
            }
            let seen = by_rep.entry(i).or_default();
            if let Some(&(e0, z0)) = seen.iter().find(|(e0, _)| *e0 != e) {
                return special_soundness(self.grp, (e, z), (e0, z0));
            }
            seen.push((e, z));
        }
        None
    }

    /// Zero-knowledge simulator via oracle programming; works for any statement.
    pub fn simulate<P: SigmaProtocol<G>, R: RngCore + CryptoRng + ?Sized>(
        &self,
        ctx: &str,
        stmt: &P::Statement,
        rng: &mut R,
    ) -> Result<FischlinProof<P::Commitment, G::Scalar>, FischlinError> {
        let space = self.params.challenge_space();
        let triples: Vec<_> = (0..self.params.r)
            .map(|_| {
                let e = rng.next_u64() % space;
                let (a, z) = P::simulate(self.grp, stmt, e, rng);
                SigmaTranscript { commitment: a, challenge: e, response: z }
            })
            .collect();
        let commitments: Vec<_> = triples.iter().map(|t| t.commitment).collect();
        let layout = self.layout::<P>(stmt, &commitments);
        let mut buf = Vec::with_capacity(layout.total_len);
        for (idx, tr) in triples.iter().enumerate() {
            layout.fill(&mut buf, idx as u64 + 1, tr.challenge, &self.grp.scalar_to_bytes(&tr.response));
            let mut y = [0u8; 32];
            rng.fill_bytes(&mut y);
            if !self.oracle.sim_program(ctx, &buf, low_bits_cleared(y, self.params.b))? {
                return Err(FischlinError::SimulationFailed);
            }
        }
        Ok(FischlinProof { triples })
    }
}

/// Packed wire form: a byte string holding
/// `kind ‖ challenge-width ‖ (commitment ‖ e ‖ z)^r` with fixed-width fields.
pub fn proof_value<G: Group, P: SigmaProtocol<G>>(
    grp: &G,
    params: &FischlinParams,
    proof: &FischlinProof<P::Commitment, G::Scalar>,
) -> Value {
    let ew = params.challenge_width();
    let mut out = Vec::with_capacity(2 + proof.triples.len() * packed_triple_len::<G, P>(grp, ew));
    out.push(P::KIND);
    out.push(ew as u8);
    for tr in &proof.triples {
        P::write_commitment(grp, &tr.commitment, &mut out);
        out.extend_from_slice(&tr.challenge.to_be_bytes()[8 - ew..]);
        out.extend_from_slice(&grp.scalar_to_bytes(&tr.response));
    }
    Value::Bytes(out)
}

fn packed_triple_len<G: Group, P: SigmaProtocol<G>>(grp: &G, ew: usize) -> usize {
    P::commitment_len(grp) + ew + grp.scalar_len()
}

pub fn proof_from_value<G: Group, P: SigmaProtocol<G>>(
    grp: &G,
    v: &Value,
) -> Result<FischlinProof<P::Commitment, G::Scalar>, CodecError> {
    let b = v.as_bytes()?;
    if b.len() < 2 || b[0] != P::KIND {
        return Err(CodecError::Shape("proof kind"));
    }
    let ew = b[1] as usize;
    if ew == 0 || ew > 8 {
        return Err(CodecError::Shape("challenge width"));
    }
    let cl = P::commitment_len(grp);
    let tl = packed_triple_len::<G, P>(grp, ew);
    let body = &b[2..];
    if body.is_empty() || body.len() % tl != 0 {
        return Err(CodecError::Shape("proof length"));
    }
    let mut triples = Vec::with_capacity(body.len() / tl);
    for chunk in body.chunks_exact(tl) {
        let commitment = P::read_commitment(grp, &chunk[..cl])?;
        let challenge = chunk[cl..cl + ew].iter().fold(0u64, |acc, x| (acc << 8) | *x as u64);
        let response = grp.scalar_from_bytes(&chunk[cl + ew..])?;
        triples.push(SigmaTranscript { commitment, challenge, response });
    }
    Ok(FischlinProof { triples })
}

/// `log2` of the soundness bound `(Q+1)·binom(S+r, r) / 2^{b·r}`.
pub fn soundness_bound_log2(params: &FischlinParams, queries: u64) -> f64 {
    let log_binom: f64 = (1..=params.r as u64)
        .map(|k| ((params.s + k) as f64 / k as f64).log2())
        .sum();
    ((queries as f64) + 1.0).log2() + log_binom - (params.b as f64) * params.r as f64
}

pub fn soundness_bound(params: &FischlinParams, queries: u64) -> f64 {
    soundness_bound_log2(params, queries).exp2()
}

/// `log2` of `r·(1 − 2^{-b})^{2^t}`, a union bound on some repetition finding no zero.
pub fn honest_reject_bound_log2(params: &FischlinParams) -> f64 {
    let miss = (-(-(params.b as f64)).exp2()).ln_1p() / std::f64::consts::LN_2;
    (params.r as f64).log2() + (params.challenge_space() as f64) * miss
}

/// Statement `(X, γ, M, B, Δ)` of the affine relation with derived `Y = M + γB`
/// and `D = X − Δ − Y`.
#[derive(Debug, Clone)]
pub struct AffineStatement<G: Group> {
    pub sid: Vec<u8>,
    pub label_y: String,
    pub label_d: String,
    pub x: G::Element,
    pub gamma: G::Scalar,
    pub m: G::Element,
    pub b: G::Element,
    pub delta: G::Element,
}

impl<G: Group> AffineStatement<G> {
    /// Labels are `"{prefix}.Y"` and `"{prefix}.D"`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sid: &[u8],
        prefix: &str,
        x: G::Element,
        gamma: G::Scalar,
        m: G::Element,
        b: G::Element,
        delta: G::Element,
    ) -> Self {
        Self {
            sid: sid.to_vec(),
            label_y: format!("{prefix}.Y"),
            label_d: format!("{prefix}.D"),
            x,
            gamma,
            m,
            b,
            delta,
        }
    }

    pub fn y(&self) -> G::Element {
        self.m + self.b * self.gamma
    }

    pub fn d(&self) -> G::Element {
        self.x - self.delta - self.y()
    }

    pub fn y_statement(&self) -> DlStatement<G> {
        DlStatement::tagged(&self.sid, &self.label_y, self.y())
    }

    pub fn d_statement(&self) -> DlStatement<G> {
        DlStatement::tagged(&self.sid, &self.label_d, self.d())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineProof<G: Group> {
    pub y: DlProof<G>,
    pub d: DlProof<G>,
}

impl<G: Group> AffineProof<G> {
    pub fn to_value(&self, grp: &G, params: &FischlinParams) -> Value {
        Value::tuple(vec![
            proof_value::<G, Schnorr>(grp, params, &self.y),
            proof_value::<G, Schnorr>(grp, params, &self.d),
        ])
    }

    pub fn from_value(grp: &G, v: &Value) -> Result<Self, CodecError> {
        let items = v.as_tuple_of(2)?;
        Ok(Self {
            y: proof_from_value::<G, Schnorr>(grp, &items[0])?,
            d: proof_from_value::<G, Schnorr>(grp, &items[1])?,
        })
    }
}

impl<G: Group> Fischlin<'_, G> {
    /// Two tagged DL proofs for `Y = αG` and `D = δG`.
    pub fn prove_affine<R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &AffineStatement<G>,
        alpha: &G::Scalar,
        delta: &G::Scalar,
        rng: &mut R,
        attempts: usize,
    ) -> Result<AffineProof<G>, FischlinError> {
        self.prove_affine_with_stats(caller, ctx, stmt, alpha, delta, rng, attempts).map(|(p, _)| p)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn prove_affine_with_stats<R: RngCore + CryptoRng + ?Sized>(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &AffineStatement<G>,
        alpha: &G::Scalar,
        delta: &G::Scalar,
        rng: &mut R,
        attempts: usize,
    ) -> Result<(AffineProof<G>, [ProveStats; 2]), FischlinError> {
        let (y, sy) = self.prove_retrying::<Schnorr, R>(caller, ctx, &stmt.y_statement(), alpha, rng, attempts)?;
        let (d, sd) = self.prove_retrying::<Schnorr, R>(caller, ctx, &stmt.d_statement(), delta, rng, attempts)?;
        Ok((AffineProof { y, d }, [sy, sd]))
    }

    pub fn verify_affine(
        &self,
        caller: &CallerId,
        ctx: &str,
        stmt: &AffineStatement<G>,
        proof: &AffineProof<G>,
    ) -> bool {
        self.verify::<Schnorr>(caller, ctx, &stmt.y_statement(), &proof.y)
            && self.verify::<Schnorr>(caller, ctx, &stmt.d_statement(), &proof.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Secp256k1Group, ToyGroup};
    use crate::oracle::{ctx, OracleMode};
    use crate::sigma::{ChaumPedersen, DleqStatement};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn bounds_match_reference_values() {
        let p = FischlinParams::PRODUCTION;
        let lb = soundness_bound_log2(&p, 0);
        assert!((lb - (-195.33)).abs() < 0.01, "{lb}");
        let hr = honest_reject_bound_log2(&p);
        assert!((hr - (-41.26)).abs() < 0.01, "{hr}");
        let single = FischlinParams { t: 8, b: 8, r: 1, s: 0 };
        assert!((soundness_bound(&single, 9) - 10.0 / 256.0).abs() < 1e-12);
    }

    #[test]
    fn params_validation() {
        let toy = ToyGroup::setup(101, 7).unwrap();
        assert!(FischlinParams::TINY.validate(&toy).is_ok());
        assert!(FischlinParams::SMALL.validate(&toy).is_ok());
        assert!(FischlinParams::PRODUCTION.validate(&toy).is_err());
        assert!(FischlinParams { t: 4, b: 5, r: 1, s: 0 }.validate(&toy).is_err());
        let secp = Secp256k1Group::setup(b"p");
        assert!(FischlinParams::PRODUCTION.validate(&secp).is_ok());
    }

    #[test]
    fn low_bits_clearing() {
        let y = low_bits_cleared([0xff; 32], 13);
        assert_eq!(y[31], 0);
        assert_eq!(y[30], 0xe0);
        assert_eq!(crate::oracle::lsb_bits(&y, 13), 0);
        assert_eq!(low_bits_cleared([0xff; 32], 2)[31], 0xfc);
    }

    #[test]
    fn hash_layout_parse_round_trip() {
        let stmt = Value::tuple(vec![Value::bytes(b"s")]);
        let avec = Value::tuple(vec![Value::Element(vec![1, 2])]);
        let l = HashLayout::new(&stmt, &avec, 3);
        let mut buf = Vec::new();
        l.fill(&mut buf, 4, 9, &[7, 7, 7]);
        let expected = codec::encode(&Value::tuple(vec![
            stmt,
            avec,
            Value::U64(4),
            Value::U64(9),
            Value::Scalar(vec![7, 7, 7]),
        ]));
        assert_eq!(buf, expected);
        assert_eq!(l.parse(&buf), Some((4, 9, &[7u8, 7, 7][..])));
    }

    #[test]
    fn dleq_round_trip_and_extract_toy() {
        let g = ToyGroup::setup(101, 7).unwrap();
        let o = Oracle::new(OracleMode::Ideal, 5);
        let f = Fischlin::new(&g, &o, FischlinParams::SMALL).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let caller = CallerId::new("prover");
        let r = g.scalar(5);
        let st = DleqStatement::<ToyGroup> { a: g.mul_base(&r), b: g.h() * r };
        let (pf, _) = f.prove_retrying::<ChaumPedersen, _>(&caller, ctx::DLEQ, &st, &r, &mut rng, 4).unwrap();
        assert!(f.verify::<ChaumPedersen>(&CallerId::new("v"), ctx::DLEQ, &st, &pf));
        let log = o.log(&caller);
        assert_eq!(f.extract::<ChaumPedersen>(ctx::DLEQ, &st, &pf, &log), Some(r));
    }
}
