//! Parameter sweeps over the temporal module.

use serde::Serialize;

use crate::detections::Sequence;
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::LabelMap;
use crate::metrics::{evaluate, percent, render_semantic, render_table, MetricReport};
use crate::temporal::{correct_sequence, AssignmentStrategy, TemporalConfig};
use crate::vocab::ClassVocabulary;

/// One sequence's predictions, backward flows, and semantic ground truth.
#[derive(Clone, Copy, Debug)]
pub struct SequenceInput<'a> {
    pub predictions: &'a Sequence,
    /// `flows[k]` is the backward flow from frame `k + 1` to frame `k`.
    pub flows: &'a [FlowField],
    /// One label map per prediction frame, same order.
    pub groundtruth: &'a [LabelMap],
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationGrid {
    pub thresholds: Vec<f64>,
    pub windows: Vec<usize>,
    pub strategies: Vec<AssignmentStrategy>,
}

impl Default for AblationGrid {
    /// U in {0, 0.5}, f in {3, 5, 7}, max and weighted mode.
    fn default() -> Self {
        AblationGrid {
            thresholds: vec![0.0, 0.5],
            windows: vec![3, 5, 7],
            strategies: vec![AssignmentStrategy::Max, AssignmentStrategy::WeightedMode],
        }
    }
}

impl AblationGrid {
    /// Cells ordered by threshold, then window, then strategy.
    pub fn cells(&self) -> Result<Vec<TemporalConfig>> {
        let mut cells = Vec::new();
        for &u in &self.thresholds {
            for &f in &self.windows {
                for &s in &self.strategies {
                    cells.push(TemporalConfig::new(f, u, s)?);
                }
            }
        }
        Ok(cells)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub config: TemporalConfig,
    pub report: MetricReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub vocabulary: ClassVocabulary,
    /// Evaluation of the uncorrected predictions.
    pub baseline: MetricReport,
    pub rows: Vec<AblationRow>,
}

/// Evaluate predictions pooled over several sequences.
pub fn evaluate_sequences(
    sequences: &[(&Sequence, &[LabelMap])],
    vocabulary: &ClassVocabulary,
) -> Result<MetricReport> {
    let mut rendered = Vec::new();
    for (seq, gt) in sequences {
        if seq.frames.len() != gt.len() {
            return Err(Error::contract(format!(
                "sequence {}: {} frames but {} ground-truth label maps",
                seq.name,
                seq.frames.len(),
                gt.len()
            )));
        }
        for frame in &seq.frames {
            rendered.push(
                render_semantic(frame, seq.height, seq.width)
                    .map_err(|e| e.in_frame(frame.frame_index))?,
            );
        }
    }
    let truth = sequences.iter().flat_map(|(_, gt)| gt.iter());
    let pairs: Vec<(&LabelMap, &LabelMap)> = rendered.iter().zip(truth).collect();
    evaluate(&pairs, vocabulary)
}

fn corrected(input: &SequenceInput<'_>, config: &TemporalConfig) -> Result<Sequence> {
    let frames = correct_sequence(&input.predictions.frames, input.flows, config)?;
    Ok(Sequence {
        frames,
        ..input.predictions.clone()
    })
}

/// Run the correction for every grid cell and score each against the ground
/// truth.
pub fn ablate(
    inputs: &[SequenceInput<'_>],
    grid: &AblationGrid,
    vocabulary: &ClassVocabulary,
) -> Result<AblationTable> {
    let base: Vec<(&Sequence, &[LabelMap])> = inputs
        .iter()
        .map(|i| (i.predictions, i.groundtruth))
        .collect();
    let baseline = evaluate_sequences(&base, vocabulary)?;
    let mut rows = Vec::new();
    for config in grid.cells()? {
        let fixed = inputs
            .iter()
            .map(|i| corrected(i, &config))
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(&Sequence, &[LabelMap])> = fixed
            .iter()
            .zip(inputs)
            .map(|(s, i)| (s, i.groundtruth))
            .collect();
        rows.push(AblationRow {
            config,
            report: evaluate_sequences(&pairs, vocabulary)?,
        });
    }
    Ok(AblationTable {
        vocabulary: vocabulary.clone(),
        baseline,
        rows,
    })
}

#[derive(Serialize)]
struct RowRecord {
    threshold: f64,
    frames: usize,
    assignment: AssignmentStrategy,
    per_class_iou: Vec<Option<f64>>,
    mean_class_iou: f64,
    challenge_iou: f64,
    iou: f64,
}

#[derive(Serialize)]
struct TableRecord<'a> {
    classes: Vec<&'a str>,
    baseline: RowBaseline,
    rows: Vec<RowRecord>,
}

#[derive(Serialize)]
struct RowBaseline {
    per_class_iou: Vec<Option<f64>>,
    mean_class_iou: f64,
    challenge_iou: f64,
    iou: f64,
}

impl AblationTable {
    pub fn header(&self) -> Vec<String> {
        let mut header = vec![
            "Threshold".to_string(),
            "Number of frames".to_string(),
            "Assignment Strategy".to_string(),
        ];
        header.extend(
            self.vocabulary
                .ids()
                .map(|c| self.vocabulary.name(c).unwrap_or("").to_string()),
        );
        header.push("mean class IoU".to_string());
        header
    }

    fn per_class(&self, report: &MetricReport) -> Vec<Option<f64>> {
        self.vocabulary
            .ids()
            .map(|c| report.per_class_iou.get(&c).copied())
            .collect()
    }

    /// Aligned text table, one line per grid cell; values are percentages.
    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut cells = vec![
                    format!("{}", r.config.iou_threshold),
                    r.config.window.to_string(),
                    r.config.strategy.to_string(),
                ];
                cells.extend(self.per_class(&r.report).into_iter().map(percent));
                cells.push(percent(Some(r.report.mean_class_iou)));
                cells
            })
            .collect();
        render_table(&self.header(), &rows)
    }

    pub fn to_json(&self) -> String {
        let record = TableRecord {
            classes: self
                .vocabulary
                .ids()
                .map(|c| self.vocabulary.name(c).unwrap_or(""))
                .collect(),
            baseline: RowBaseline {
                per_class_iou: self.per_class(&self.baseline),
                mean_class_iou: self.baseline.mean_class_iou,
                challenge_iou: self.baseline.challenge_iou,
                iou: self.baseline.frame_iou,
            },
            rows: self
                .rows
                .iter()
                .map(|r| RowRecord {
                    threshold: r.config.iou_threshold,
                    frames: r.config.window,
                    assignment: r.config.strategy,
                    per_class_iou: self.per_class(&r.report),
                    mean_class_iou: r.report.mean_class_iou,
                    challenge_iou: r.report.challenge_iou,
                    iou: r.report.frame_iou,
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&record).expect("table serializes");
        text.push('\n');
        text
    }
}
