//! Fischlin prover statistics, extraction runs and the size/time bench.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use stardkg::algebra::Group;
use stardkg::codec::encode;
use stardkg::fischlin::{proof_value, Fischlin, FischlinParams};
use stardkg::oracle::{ctx, CallerId, Oracle};
use stardkg::sdkg::Env;
use stardkg::sigma::{DlStatement, Schnorr};

use crate::report::{Outcome, RunReport};
use crate::setup::{rng, RunConfig};

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RarityStats {
    pub proofs: usize,
    pub repetitions: usize,
    pub mean_trials: f64,
    pub rejected: u64,
    /// Trials per repetition, bucketed by powers of two.
    pub histogram: BTreeMap<u32, usize>,
}

/// Mean rarity-search trials per repetition over at least `min_reps` repetitions. Each
/// proof gets its own oracle so that ideal-mode tables stay small.
pub fn rarity_statistics<G: Group>(env: &Env<G>, min_reps: usize, seed: u64) -> anyhow::Result<RarityStats> {
    let mut r = rng(seed);
    let caller = CallerId::new("rarity-prover");
    let (mut proofs, mut reps, mut trials, mut rejected) = (0, 0, 0u64, 0);
    let mut histogram = BTreeMap::new();
    while reps < min_reps {
        let oracle = Arc::new(Oracle::new(env.oracle.mode(), seed.wrapping_add(proofs as u64)));
        let env = Env::new(env.grp.clone(), oracle, env.params)?;
        let fs = env.fs();
        let w = env.grp.random_scalar(&mut r);
        let stmt = DlStatement::tagged(format!("rarity-{proofs}").as_bytes(), "x", env.grp.mul_base(&w));
        let (_, st) = fs.prove_retrying::<Schnorr, _>(&caller, ctx::UC, &stmt, &w, &mut r, 8)?;
        env.oracle.take_log(&caller);
        proofs += 1;
        reps += st.trials.len();
        trials += st.total_trials();
        rejected += st.rejected;
        for t in &st.trials {
            *histogram.entry(64 - t.leading_zeros()).or_insert(0) += 1;
        }
    }
    Ok(RarityStats {
        proofs,
        repetitions: reps,
        mean_trials: trials as f64 / reps as f64,
        rejected,
        histogram,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct ExtractionStats {
    pub honest: usize,
    pub honest_verified: usize,
    pub extracted_exact: usize,
    pub simulated: usize,
    pub simulated_verified: usize,
    /// Extraction runs on simulator output. The extractor only runs on proofs that come
    /// with a prover query log, which simulated proofs never have.
    pub simulated_attempts: usize,
}

/// Honest proofs under per-proof logged callers, extracted from their own logs, plus
/// simulator-generated proofs that must verify without ever reaching the extractor.
pub fn extraction_statistics<G: Group>(env: &Env<G>, n: usize, seed: u64) -> anyhow::Result<ExtractionStats> {
    let fs = env.fs();
    let mut r = rng(seed);
    let verifier = CallerId::new("extraction-verifier");
    let mut s = ExtractionStats {
        honest: n,
        honest_verified: 0,
        extracted_exact: 0,
        simulated: n,
        simulated_verified: 0,
        simulated_attempts: 0,
    };
    for i in 0..n {
        let caller = CallerId::new(format!("extract-prover-{i}"));
        let w = env.grp.random_scalar(&mut r);
        let stmt = DlStatement::tagged(format!("extract-{i}").as_bytes(), "x", env.grp.mul_base(&w));
        let (proof, _) = fs.prove_retrying::<Schnorr, _>(&caller, ctx::UC, &stmt, &w, &mut r, 8)?;
        let log = env.oracle.take_log(&caller);
        if fs.verify::<Schnorr>(&verifier, ctx::UC, &stmt, &proof) {
            s.honest_verified += 1;
        }
        if !log.is_empty() && fs.extract::<Schnorr>(ctx::UC, &stmt, &proof, &log) == Some(w) {
            s.extracted_exact += 1;
        }
    }
    for i in 0..n {
        let x = env.grp.random_scalar(&mut r);
        let stmt = DlStatement::tagged(format!("simulate-{i}").as_bytes(), "x", env.grp.mul_base(&x));
        let proof = fs.simulate::<Schnorr, _>(ctx::UC, &stmt, &mut r)?;
        if fs.verify::<Schnorr>(&verifier, ctx::UC, &stmt, &proof) {
            s.simulated_verified += 1;
        }
        let prover_log: Vec<stardkg::oracle::LogEntry> = Vec::new();
        if !prover_log.is_empty() {
            s.simulated_attempts += 1;
            let _ = fs.extract::<Schnorr>(ctx::UC, &stmt, &proof, &prover_log);
        }
    }
    env.oracle.take_log(&verifier);
    Ok(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub r: usize,
    pub proof_bytes: usize,
    pub prove_ms: f64,
    pub verify_ms: f64,
    pub mean_trials: f64,
    pub rejected: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Profiles `(t, b, r, r)` for each `r`. Verification times are medians over `iters`
/// interleaved rounds so that background load affects every `r` alike.
pub fn run_bench<G: Group>(grp: &G, cfg: &RunConfig, t: u32, b: u32, rs: &[usize], iters: usize) -> anyhow::Result<RunReport> {
    let oracle = Oracle::new(cfg.oracle.mode(), cfg.seed);
    let mut r = rng(cfg.seed);
    let prover = CallerId::new("bench-prover");
    let verifier = CallerId::new("bench-verifier");
    let profiles: Vec<FischlinParams> = rs.iter().map(|&r| FischlinParams { t, b, r, s: r as u64 }).collect();
    let fss = profiles
        .iter()
        .map(|p| Fischlin::new(grp, &oracle, *p))
        .collect::<Result<Vec<_>, _>>()?;

    let w = grp.random_scalar(&mut r);
    let stmt = DlStatement::tagged(b"bench", "x", grp.mul_base(&w));
    let mut proofs = Vec::new();
    let mut prove_times = vec![Vec::new(); rs.len()];
    let mut stats = vec![(0u64, 0usize, 0u64); rs.len()];
    for (i, fs) in fss.iter().enumerate() {
        for _ in 0..iters.clamp(1, 5) {
            let t0 = Instant::now();
            let (p, st) = fs.prove_retrying::<Schnorr, _>(&prover, ctx::UC, &stmt, &w, &mut r, 8)?;
            prove_times[i].push(ms(t0));
            stats[i].0 += st.total_trials();
            stats[i].1 += st.trials.len();
            stats[i].2 += st.rejected;
            if proofs.len() == i {
                proofs.push(p);
            }
            oracle.take_log(&prover);
        }
    }
    let mut verify_times = vec![Vec::new(); rs.len()];
    let mut all_ok = true;
    for _ in 0..iters.max(1) {
        for (i, fs) in fss.iter().enumerate() {
            let t0 = Instant::now();
            all_ok &= fs.verify::<Schnorr>(&verifier, ctx::UC, &stmt, &proofs[i]);
            verify_times[i].push(ms(t0));
        }
        oracle.take_log(&verifier);
    }

    let rows: Vec<BenchRow> = (0..rs.len())
        .map(|i| BenchRow {
            r: rs[i],
            proof_bytes: encode(&proof_value::<G, Schnorr>(grp, &profiles[i], &proofs[i])).len(),
            prove_ms: median(prove_times[i].clone()),
            verify_ms: median(verify_times[i].clone()),
            mean_trials: stats[i].0 as f64 / stats[i].1.max(1) as f64,
            rejected: stats[i].2,
        })
        .collect();

    let mut rep = RunReport::new("bench", grp, profiles[profiles.len() - 1], cfg);
    rep.check("all bench proofs verify", all_ok, "");
    for w in rows.windows(2) {
        if w[1].r == 2 * w[0].r {
            let ratio = w[1].verify_ms / w[0].verify_ms;
            rep.check(
                &format!("verify time r={} / r={} in [1.5, 2.5]", w[1].r, w[0].r),
                (1.5..=2.5).contains(&ratio),
                format!("{ratio:.3}"),
            );
        }
    }
    if rows.len() >= 3 {
        let per = (rows[1].proof_bytes - rows[0].proof_bytes) / (rows[1].r - rows[0].r);
        let linear = rows.windows(2).all(|w| w[1].proof_bytes - w[0].proof_bytes == per * (w[1].r - w[0].r));
        rep.check("proof size linear in r", linear, format!("{per} bytes per repetition"));
    }
    let total_trials: u64 = stats.iter().map(|s| s.0).sum();
    let total_reps: usize = stats.iter().map(|s| s.1).sum();
    let pooled = total_trials as f64 / total_reps.max(1) as f64;
    let expected = (1u64 << b) as f64;
    rep.check(
        "pooled mean trials within 20% of 2^b",
        (pooled / expected - 1.0).abs() <= 0.2,
        format!("{pooled:.2} over {total_reps} repetitions"),
    );
    rep.datum("expected_trials", expected);
    rep.datum("pooled_mean_trials", pooled);
    rep.datum("rows", &rows);
    for row in &rows {
        rep.timings_ms.insert(format!("prove_r{}", row.r), row.prove_ms);
        rep.timings_ms.insert(format!("verify_r{}", row.r), row.verify_ms);
    }
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    Ok(rep)
}
