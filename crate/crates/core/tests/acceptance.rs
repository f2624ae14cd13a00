//! Full verification suite: runs every numbered criterion on one and eight
//! workers, prints one verdict line per criterion, and fails if any
//! criterion fails.

use suprema_core::acceptance::{run_suite, DEFAULT_MASTER_SEED};

#[test]
fn acceptance_suite_passes() {
    let output = run_suite(DEFAULT_MASTER_SEED).expect("suite must run to completion");
    let mut failed = Vec::new();
    for c in &output.criteria {
        println!(
            "criterion {:>2} [{}] {} -- {} ({:.1}s)",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail,
            c.seconds,
        );
        if !c.pass {
            failed.push(format!("{} ({}): {}", c.id, c.name, c.detail));
        }
    }
    assert!(
        failed.is_empty(),
        "failed criteria:\n{}",
        failed.join("\n")
    );
}
