// Rebuild the golden fixtures and check every one of them.
//
// `cargo run --example regenerate_fixtures -- <dir>` writes the fixture set
// to `<dir>` (the crate's `fixtures/` directory by default).

use std::path::PathBuf;

use maskvote::fixtures::{verify_fixtures, write_fixtures};

fn check(dir: &std::path::Path) -> anyhow::Result<()> {
    for outcome in verify_fixtures(dir)? {
        println!(
            "{} {}",
            if outcome.passed { "ok  " } else { "FAIL" },
            outcome.name
        );
        anyhow::ensure!(outcome.passed, "{}", outcome.report);
    }
    Ok(())
}

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    write_fixtures(dir.path())?;
    check(dir.path())
}

fn main() -> anyhow::Result<()> {
    let target = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    write_fixtures(&target)?;
    println!("wrote fixtures to {}", target.display());
    check(&target)
}
