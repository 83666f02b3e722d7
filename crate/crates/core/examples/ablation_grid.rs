// Sweep IoU threshold, window size, and assignment strategy.

use maskvote::synth::{generate, SynthConfig};
use maskvote::{ablate, AblationGrid, ClassVocabulary, SequenceInput};

pub fn run_example() -> anyhow::Result<()> {
    let data = SynthConfig::benchmark_suite(1)
        .iter()
        .take(3)
        .map(generate)
        .collect::<maskvote::Result<Vec<_>>>()?;
    let inputs: Vec<SequenceInput<'_>> = data
        .iter()
        .map(|d| SequenceInput {
            predictions: &d.predictions,
            flows: &d.flows,
            groundtruth: &d.label_maps,
        })
        .collect();
    let vocab = ClassVocabulary::endovis2017();
    let table = ablate(&inputs, &AblationGrid::default(), &vocab)?;
    print!("{}", table.to_text());
    println!(
        "uncorrected mean class IoU: {:.2}",
        100.0 * table.baseline.mean_class_iou
    );
    assert_eq!(table.rows.len(), 12);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
