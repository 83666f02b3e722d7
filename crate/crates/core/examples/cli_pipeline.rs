// Drive the command-line front end in-process: simulate, correct, evaluate.

use maskvote::cli;
use maskvote::synth::{SimulationConfig, SynthConfig};

fn maskvote(args: &[&str]) -> anyhow::Result<String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(
        std::iter::once("maskvote").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    anyhow::ensure!(code == 0, "exit {code}: {}", String::from_utf8_lossy(&err));
    Ok(String::from_utf8(out)?)
}

pub fn run_example() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path().to_str().expect("utf-8 temp path");
    let config = SimulationConfig {
        sequences: SynthConfig::benchmark_suite(7)
            .into_iter()
            .take(2)
            .collect(),
    };
    std::fs::write(
        format!("{root}/sim.json"),
        serde_json::to_string_pretty(&config)?,
    )?;

    maskvote(&[
        "simulate",
        "--config",
        &format!("{root}/sim.json"),
        "--output",
        &format!("{root}/data"),
    ])?;
    maskvote(&[
        "correct",
        "--detections",
        &format!("{root}/data/detections"),
        "--flows",
        &format!("{root}/data/flow"),
        "--output",
        &format!("{root}/corrected"),
    ])?;
    for (label, det) in [("raw", "data/detections"), ("corrected", "corrected")] {
        let table = maskvote(&[
            "evaluate",
            "--detections",
            &format!("{root}/{det}"),
            "--groundtruth",
            &format!("{root}/data/labels"),
            "--output",
            &format!("{root}/report_{label}"),
        ])?;
        println!("{label}:\n{table}");
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
