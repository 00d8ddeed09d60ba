//! Acceptance gate: runs every criterion of the built-in suite and prints
//! one pass/fail line per criterion. Run with `--nocapture` to see the
//! lines for passing criteria too.

use glduality::acceptance;

#[test]
fn acceptance_criteria() {
    let results = acceptance::run_all();
    assert_eq!(results.len(), 11);
    let mut all_pass = true;
    for c in &results {
        println!("{}", acceptance::format_line(c));
        all_pass &= c.pass;
    }
    assert!(all_pass, "one or more acceptance criteria failed (see lines above)");
}
