// Score predictions against semantic ground truth.

use maskvote::synth::{generate, SynthConfig};
use maskvote::{evaluate, render_semantic, ClassVocabulary, Grid, LabelMap};

pub fn run_example() -> anyhow::Result<()> {
    let vocab = ClassVocabulary::endovis2017();

    // two hand-made 1x4 frames against ground truth [1, 1, 2, 2]
    let gt: LabelMap = Grid::from_vec(1, 4, vec![1, 1, 2, 2])?;
    let p0: LabelMap = Grid::from_vec(1, 4, vec![1, 1, 2, 0])?;
    let p1: LabelMap = Grid::from_vec(1, 4, vec![1, 0, 0, 0])?;
    let report = evaluate(&[(&p0, &gt), (&p1, &gt)], &vocab)?;
    print!("{}", report.to_table(&vocab));
    assert_eq!(report.frame_iou, 0.5);

    // a synthetic sequence: render candidates to label maps, then evaluate
    let data = generate(&SynthConfig::demo(3))?;
    let maps = data
        .predictions
        .frames
        .iter()
        .map(|f| render_semantic(f, data.predictions.height, data.predictions.width))
        .collect::<maskvote::Result<Vec<_>>>()?;
    let pairs: Vec<_> = maps.iter().zip(&data.label_maps).collect();
    let report = evaluate(&pairs, &vocab)?;
    println!(
        "synthetic: challenge IoU {:.4}, mean class IoU {:.4}",
        report.challenge_iou, report.mean_class_iou
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
