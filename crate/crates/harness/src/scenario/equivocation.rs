//! Two USV certificates for one commitment with different openings yield `log_G H`.
//! Crafting them needs the trapdoor, so the demo only runs on the toy group with the
//! trapdoor explicitly exposed.

use rand::{CryptoRng, RngCore};
use stardkg::algebra::{Group, ToyGroup, ToyScalar};
use stardkg::oracle::CallerId;
use stardkg::sdkg::Env;

use crate::report::{Outcome, RunReport};
use crate::setup::{rng, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum DemoError {
    #[error("the equivocation demo needs the toy group with its trapdoor exposed")]
    TrapdoorUnavailable,
    #[error("certificate generation failed: {0}")]
    Cert(String),
    #[error("crafted certificates disagree on C")]
    Mismatch,
}

/// Forges one equivocating pair with the trapdoor and runs the reduction on the
/// forger's oracle log. `Ok(None)` means the reduction returned ⊥.
pub fn trial<R: RngCore + CryptoRng>(
    env: &Env<ToyGroup>,
    caller: &CallerId,
    rng: &mut R,
) -> Result<Option<ToyScalar>, DemoError> {
    let grp = &env.grp;
    let x = grp.trapdoor().ok_or(DemoError::TrapdoorUnavailable)?;
    let usv = env.usv();
    let (m, r, m2, r2) = loop {
        let m = grp.random_scalar(rng);
        let r = grp.random_scalar(rng);
        let delta = grp.random_scalar(rng);
        let r2 = r + delta;
        let m2 = m - delta * x;
        let z = grp.zero();
        if m != z && m2 != z && r != z && r2 != z && r != -m && r2 != -m2 && delta != z {
            break (m, r, m2, r2);
        }
    };
    let c1 = usv.cert_with_randomness(caller, &m, &r, rng).map_err(|e| DemoError::Cert(e.to_string()))?;
    let c2 = usv.cert_with_randomness(caller, &m2, &r2, rng).map_err(|e| DemoError::Cert(e.to_string()))?;
    if c1.c != c2.c {
        return Err(DemoError::Mismatch);
    }
    let log = env.oracle.take_log(caller);
    Ok(usv.equivocation_to_dl(&c1.c, &c1.tag, &c2.tag, &log))
}

/// The reduction must refuse a pair that does not equivocate.
pub fn honest_pair_rejected<R: RngCore + CryptoRng>(env: &Env<ToyGroup>, caller: &CallerId, rng: &mut R) -> bool {
    let usv = env.usv();
    let m = env.grp.random_nonzero_scalar(rng);
    let Ok(c) = usv.cert(caller, &m, rng) else {
        return false;
    };
    let log = env.oracle.take_log(caller);
    usv.equivocation_to_dl(&c.c, &c.tag, &c.tag, &log).is_none()
}

pub fn run_demo(env: &Env<ToyGroup>, cfg: &RunConfig, trials: usize) -> Result<RunReport, DemoError> {
    let grp = &env.grp;
    let h = grp.h();
    let mut rep = RunReport::new("equivocation-demo", grp, env.params, cfg);
    let mut r = rng(cfg.seed);
    let caller = CallerId::new("forger");
    let mut recovered = 0;
    for _ in 0..trials {
        if let Some(x) = trial(env, &caller, &mut r)? {
            if grp.mul_base(&x) == h {
                recovered += 1;
            }
        }
    }
    rep.check(
        "x recovered with xG = H",
        recovered == trials,
        format!("{recovered}/{trials}"),
    );
    rep.check("honest pair rejected", honest_pair_rejected(env, &caller, &mut r), "");
    rep.datum("recovered", recovered);
    rep.datum("trials", trials);
    rep.outcome = Outcome::status(if rep.passed() { "completed" } else { "failed" });
    Ok(rep)
}

/// Entry point for groups without a usable trapdoor.
pub fn refuse<G: Group>(_env: &Env<G>) -> DemoError {
    DemoError::TrapdoorUnavailable
}
