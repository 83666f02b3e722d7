// Correct flickering class labels on a synthetic sequence.

use maskvote::synth::{generate, SynthConfig};
use maskvote::{
    correct_sequence, match_window, AssignmentStrategy, FrameDetections, TemporalConfig,
};

fn accuracy(pred: &[FrameDetections], truth: &[FrameDetections]) -> f64 {
    let pairs: Vec<bool> = pred
        .iter()
        .zip(truth)
        .flat_map(|(p, t)| {
            p.candidates
                .iter()
                .zip(&t.candidates)
                .map(|(a, b)| a.class_id == b.class_id)
        })
        .collect();
    pairs.iter().filter(|&&ok| ok).count() as f64 / pairs.len() as f64
}

pub fn run_example() -> anyhow::Result<()> {
    let data = generate(&SynthConfig::demo(11))?;
    let truth = &data.groundtruth.frames;
    let raw = &data.predictions.frames;

    for strategy in [AssignmentStrategy::WeightedMode, AssignmentStrategy::Max] {
        let config = TemporalConfig::new(6, 0.0, strategy)?;
        let fixed = correct_sequence(raw, &data.flows, &config)?;
        println!(
            "{strategy:>13}: class accuracy {:.3} -> {:.3}",
            accuracy(raw, truth),
            accuracy(&fixed, truth)
        );
        // masks and scores are untouched
        assert!(fixed.iter().zip(raw).all(|(a, b)| a
            .candidates
            .iter()
            .zip(&b.candidates)
            .all(|(x, y)| x.mask == y.mask && x.score == y.score)));
    }

    // inspect one window: frame 8 against its 6 predecessors
    let config = TemporalConfig::default();
    let t = 8;
    let flows: Vec<_> = data.flows[t - 6..t].iter().rev().cloned().collect();
    let windows = match_window(&raw[t], &raw[t - 6..t], &flows, &config)?;
    for w in &windows {
        let votes: Vec<String> = w
            .entries()
            .map(|e| format!("{}@{}", e.class_id, e.frame_index))
            .collect();
        println!("candidate {}: {}", w.candidate_index, votes.join(" "));
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    run_example()
}
