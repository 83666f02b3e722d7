// Generate a synthetic dataset on disk and read it back.

use maskvote::ingest::{read_detections, read_flo, read_label_map, DEFAULT_SCORE_THRESHOLD};
use maskvote::synth::{generate, write_dataset, SimulationConfig, SynthConfig};
use maskvote::ClassVocabulary;

pub fn run_example() -> anyhow::Result<()> {
    let config = SimulationConfig {
        sequences: vec![SynthConfig::demo(5)],
    };
    // the same structure the `simulate` command reads
    println!(
        "{}",
        serde_json::to_string_pretty(&config)?
            .lines()
            .take(8)
            .collect::<Vec<_>>()
            .join("\n")
    );

    let sequences = config
        .sequences
        .iter()
        .map(generate)
        .collect::<maskvote::Result<Vec<_>>>()?;
    let dir = tempfile::tempdir()?;
    write_dataset(dir.path(), &sequences)?;

    let vocab = ClassVocabulary::endovis2017();
    let name = &sequences[0].predictions.name;
    let preds = read_detections(
        dir.path().join("detections").join(format!("{name}.json")),
        &vocab,
        DEFAULT_SCORE_THRESHOLD,
    )?;
    assert_eq!(preds, sequences[0].predictions);
    let flow = read_flo(dir.path().join("flow").join(name).join("000001.flo"))?;
    let labels = read_label_map(
        dir.path().join("labels").join(name).join("000000.pgm"),
        &vocab,
    )?;
    println!(
        "{name}: {} frames, flow {}x{}, label map {}x{}",
        preds.frames.len(),
        flow.height(),
        flow.width(),
        labels.height(),
        labels.width()
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
