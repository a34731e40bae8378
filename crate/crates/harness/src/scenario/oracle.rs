//! Oracle contract: programming rules and context isolation.

use stardkg::oracle::{ctx, CallerId, Digest, Oracle, OracleError, OracleMode};

use crate::report::{Outcome, RunReport};
use crate::setup::{production_group, RunConfig};

/// Per-bit output agreement between two contexts must stay within this distance of 1/2.
pub const AGREEMENT_TOLERANCE: f64 = 0.01;

fn agreement(a: &Digest, b: &Digest) -> u32 {
    a.iter().zip(b).map(|(x, y)| (!(x ^ y)).count_ones()).sum()
}

/// Queries `inputs` points under every context and reports, for each context pair,
/// whether all outputs differ and the fraction of agreeing output bits.
fn cross_context(o: &Oracle, inputs: usize) -> Result<Vec<(String, String, bool, f64)>, OracleError> {
    let caller = CallerId::new("isolation");
    let names: Vec<String> = o.contexts().iter().map(|c| c.name.clone()).collect();
    let mut outs = Vec::new();
    for n in &names {
        let mut v = Vec::with_capacity(inputs);
        for i in 0..inputs {
            v.push(o.query(&caller, n, format!("x-{i}").as_bytes())?);
        }
        outs.push(v);
    }
    o.take_log(&caller);
    let mut rows = Vec::new();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let distinct = outs[i].iter().zip(&outs[j]).all(|(a, b)| a != b);
            let bits: u64 = outs[i].iter().zip(&outs[j]).map(|(a, b)| agreement(a, b) as u64).sum();
            rows.push((names[i].clone(), names[j].clone(), distinct, bits as f64 / (inputs as f64 * 256.0)));
        }
    }
    Ok(rows)
}

pub fn run_oracle_contract(cfg: &RunConfig, inputs: usize) -> anyhow::Result<RunReport> {
    let grp = production_group();
    let mut rep = RunReport::new("oracle-contract", &grp, cfg.profile.params(), cfg);
    let o = Oracle::new(OracleMode::Ideal, cfg.seed);
    let caller = CallerId::new("contract");
    let y = [0x5au8; 32];

    for c in o.contexts().iter().filter(|c| !c.programmable) {
        let res = o.sim_program(&c.name, b"fresh", y);
        let untouched = o.peek(&c.name, b"fresh")? .is_none();
        rep.check(
            &format!("programming refused on {}", c.name),
            res == Ok(false) && untouched,
            format!("{res:?}"),
        );
    }
    for c in o.contexts().iter().filter(|c| c.programmable) {
        let fresh = o.sim_program(&c.name, b"fresh", y);
        let read = o.query(&caller, &c.name, b"fresh")?;
        rep.check(
            &format!("fresh point programmable on {}", c.name),
            fresh == Ok(true) && read == y,
            format!("{fresh:?}"),
        );
        let before = o.query(&caller, &c.name, b"queried")?;
        let again = o.sim_program(&c.name, b"queried", y);
        let after = o.query(&caller, &c.name, b"queried")?;
        rep.check(
            &format!("pre-queried point refused on {}", c.name),
            again == Ok(false) && before == after,
            format!("{again:?}"),
        );
    }
    let iso = o.peek(ctx::KEYBOX, b"isolated")?;
    let programmed = o.sim_program(ctx::UC, b"isolated", y);
    rep.check(
        "programming UC leaves KeyBox untouched",
        programmed == Ok(true) && iso.is_none() && o.peek(ctx::KEYBOX, b"isolated")?.is_none(),
        "",
    );
    rep.check(
        "same input, different contexts, different outputs",
        o.query(&caller, ctx::KEYBOX, b"isolated")? != y,
        "",
    );
    let unknown = o.query(&caller, "ctx_unknown", b"x");
    rep.check("unknown context refused", matches!(unknown, Err(OracleError::UnknownContext(_))), "");
    let real = Oracle::new(OracleMode::RealHash, cfg.seed);
    let rp = real.sim_program(ctx::UC, b"x", y);
    rep.check(
        "real-hash mode refuses programming",
        rp == Err(OracleError::ProgrammingUnavailable),
        format!("{rp:?}"),
    );

    let mut pairs = Vec::new();
    for (mode, or) in [("ideal", &o), ("real", &real)] {
        let rows = cross_context(or, inputs)?;
        let distinct = rows.iter().all(|r| r.2);
        let worst = rows.iter().map(|r| (r.3 - 0.5).abs()).fold(0.0, f64::max);
        rep.check(&format!("{mode}: outputs differ across contexts"), distinct, "");
        rep.check(
            &format!("{mode}: bit agreement within 0.5 ± {AGREEMENT_TOLERANCE}"),
            worst <= AGREEMENT_TOLERANCE,
            format!("max deviation {worst:.5}"),
        );
        pairs.extend(rows.into_iter().map(|(a, b, d, f)| serde_json::json!({
            "mode": mode, "a": a, "b": b, "distinct": d, "agreement": f,
        })));
    }
    rep.datum("cross_context", pairs);
    o.take_log(&caller);
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    Ok(rep)
}
