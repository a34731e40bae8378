use std::process::Command;

use stardkg_harness::scan::LeakScanner;
use stardkg_harness::scenario::base::{self, execute, expected_ok, SchedulerSpec, ScenarioScript};
use stardkg_harness::scenario::beacon::{run_beacon, BeaconAction};
use stardkg_harness::scenario::equivocation::{trial, DemoError};
use stardkg_harness::scenario::proofs::run_bench;
use stardkg_harness::scenario::registration::{run_registration, ADVERSARIES};
use stardkg_harness::scenario::tamper::run_matrix;
use stardkg_harness::setup::{self, GroupMode, OracleChoice, ProfileMode, RunConfig};
use stardkg::oracle::CallerId;

fn toy(seed: u64) -> RunConfig {
    RunConfig::new(GroupMode::Toy, ProfileMode::Small, OracleChoice::Ideal, seed)
}

fn prod(seed: u64) -> RunConfig {
    RunConfig::new(GroupMode::Production, ProfileMode::Production, OracleChoice::Ideal, seed)
}

#[test]
fn base_report_is_replayable() {
    for cfg in [toy(3), prod(3), toy(4).with_seed(9)] {
        let script = ScenarioScript::default();
        let a = match cfg.group {
            GroupMode::Toy => base::run(&setup::toy_env(&cfg).unwrap(), &cfg, &script, None),
            GroupMode::Production => base::run(&setup::production_env(&cfg).unwrap(), &cfg, &script, None),
        };
        let b = match cfg.group {
            GroupMode::Toy => base::run(&setup::toy_env(&cfg).unwrap(), &cfg, &script, None),
            GroupMode::Production => base::run(&setup::production_env(&cfg).unwrap(), &cfg, &script, None),
        };
        assert!(a.passed(), "{:?}", a.failures());
        assert_eq!(a.without_timings().to_json(), b.without_timings().to_json());
    }
}

#[test]
fn real_hash_oracle_runs_accept() {
    let cfg = RunConfig::new(GroupMode::Production, ProfileMode::Production, OracleChoice::Real, 5);
    let rep = base::run(&setup::production_env(&cfg).unwrap(), &cfg, &ScenarioScript::default(), None);
    assert_eq!(rep.outcome.status, "accepted");
    assert!(rep.passed(), "{:?}", rep.failures());
}

#[test]
fn scheduler_scripts() {
    let cfg = toy(11);
    let env = setup::toy_env(&cfg).unwrap();
    for (spec, status) in [
        (SchedulerSpec::Random(4), "accepted"),
        (SchedulerSpec::Withhold("P1".into()), "stalled"),
        (SchedulerSpec::Withhold("P2".into()), "stalled"),
    ] {
        let script = ScenarioScript {
            scheduler: spec,
            ..ScenarioScript::default()
        };
        let rep = base::run(&env, &cfg, &script, None);
        assert_eq!(rep.outcome.status, status);
        assert!(expected_ok(&rep, &script));
    }
}

#[test]
fn tamper_matrix_on_toy_group() {
    let cfg = toy(12);
    let rep = run_matrix(&setup::toy_env(&cfg).unwrap(), &cfg, None);
    assert!(rep.passed(), "{:?}", rep.failures());
}

#[test]
fn registration_star_and_chain() {
    let cfg = toy(13);
    let env = setup::toy_env(&cfg).unwrap();
    for chain in [true, false] {
        let rep = run_registration(&env, &cfg, 3, chain, &ADVERSARIES, None).unwrap();
        assert!(rep.passed(), "{:?}", rep.failures());
        assert_eq!(rep.outcome.registered.len(), 3);
    }
}

#[test]
fn beacon_variants() {
    let cfg = toy(14);
    let env = setup::toy_env(&cfg).unwrap();
    let honest = run_beacon(&env, &cfg, 3, &[], None).unwrap();
    assert_eq!(honest.outcome.status, "output");
    let again = run_beacon(&setup::toy_env(&cfg).unwrap(), &cfg, 3, &[], None).unwrap();
    assert_eq!(honest.data["result"]["rho"], again.data["result"]["rho"]);
    assert!(honest.data["result"]["rho"].is_string());

    for actions in [
        vec![BeaconAction::Withhold(1)],
        vec![BeaconAction::Recommit(2)],
        vec![BeaconAction::BadReveal(3)],
        vec![BeaconAction::Withhold(1), BeaconAction::Recommit(3)],
    ] {
        let rep = run_beacon(&env, &cfg, 4, &actions, None).unwrap();
        assert_eq!(rep.outcome.status, "stalled", "{actions:?}");
        assert!(rep.passed(), "{actions:?}: {:?}", rep.failures());
        assert_eq!(rep.data["result"]["commits"], 4);
    }
}

#[test]
fn scanner_catches_a_planted_leak() {
    let cfg = prod(15);
    let env = setup::production_env(&cfg).unwrap();
    let script = ScenarioScript::with_sid("sid-plant");
    let mut run = execute(&env, &cfg, &script);
    let rep = base::report("plant", &mut run, &cfg, &script);
    let mut scan = LeakScanner::new();
    base::feed_scanner(&mut scan, "plant", &mut run, &rep);
    assert!(scan.scan().clean());
    let secret = run.leader.keybox().audit_resident_encodings().into_iter().next().unwrap();
    let mut planted = b"prefix".to_vec();
    planted.extend_from_slice(&secret);
    scan.add_bytes("planted/raw", planted);
    scan.add_text("planted/hex", format!("{{\"x\":\"{}\"}}", hex::encode(&secret)));
    let s = scan.scan();
    assert!(!s.clean());
    let surfaces: Vec<_> = s.hits.iter().map(|h| h.surface.as_str()).collect();
    assert_eq!(surfaces, ["planted/raw", "planted/hex"]);
}

#[test]
fn equivocation_needs_exposed_trapdoor() {
    let cfg = toy(16);
    let hidden = setup::toy_env(&cfg).unwrap();
    let r = trial(&hidden, &CallerId::new("f"), &mut setup::rng(1));
    assert!(matches!(r, Err(DemoError::TrapdoorUnavailable)));
    let exposed = setup::toy_trapdoor_env(&cfg).unwrap();
    let x = trial(&exposed, &CallerId::new("f"), &mut setup::rng(1)).unwrap().unwrap();
    assert_eq!(Some(x), exposed.grp.trapdoor());
}

#[test]
fn bench_sizes_are_linear() {
    let cfg = prod(17);
    let rep = run_bench(&setup::production_group(), &cfg, 13, 8, &[8, 16, 32], 3).unwrap();
    for name in ["all bench proofs verify", "proof size linear in r"] {
        assert!(rep.checks.iter().any(|c| c.name == name && c.passed), "{name}");
    }
}

fn cli(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_stardkg")).args(args).output().unwrap();
    (out.status.success(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn cli_exit_codes_and_json() {
    let dir = std::env::temp_dir().join(format!("stardkg-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let json = dir.join("run.json");
    let (ok, out) = cli(&["run-base", "--group", "toy", "--profile", "small", "--json", json.to_str().unwrap()]);
    assert!(ok, "{out}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["outcome"]["status"], "accepted");
    assert!(v["sizes"]["total"].as_u64().unwrap() > 0);

    assert!(cli(&["run-base", "--group", "toy", "--profile", "test", "--scheduler", "withhold:P2"]).0);
    assert!(cli(&["run-base", "--group", "toy", "--profile", "small", "--runs", "3", "--parallel"]).0);
    assert!(!cli(&["equivocation-demo"]).0);
    assert!(cli(&["equivocation-demo", "--group", "toy", "--profile", "small", "--trials", "10"]).0);
    assert!(cli(&["beacon", "--group", "toy", "--profile", "small", "--withhold", "2"]).0);
    assert!(cli(&["register", "--group", "toy", "--profile", "small", "--joiners", "2", "--adversarial"]).0);
    assert!(!cli(&["run-base", "--scheduler", "bogus"]).0);
    std::fs::remove_dir_all(&dir).ok();
}
