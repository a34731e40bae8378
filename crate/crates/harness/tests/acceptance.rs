//! One PASS/FAIL line per acceptance criterion.

use stardkg_harness::acceptance::run_all;

#[test]
fn acceptance() {
    let suite = run_all(true);
    for c in &suite.criteria {
        println!("{}  [{:.1} s]", c.line(), c.elapsed_ms / 1e3);
    }
    for hit in &suite.scan.hits {
        println!("leak: surface {} secret #{} (hex: {})", hit.surface, hit.secret_index, hit.hex);
    }
    let failed: Vec<u8> = suite.criteria.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
