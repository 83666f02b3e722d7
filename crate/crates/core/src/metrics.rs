//! Segmentation metrics over (prediction, ground truth) label-map pairs.
//!
//! A class with no pixels in either map of a frame has no IoU in that frame
//! and is left out of every average. Frames where no class is defined add
//! nothing to the frame count.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::detections::{ClassId, FrameDetections};
use crate::error::{Error, Result};
use crate::grid::LabelMap;
use crate::vocab::ClassVocabulary;

/// Pixel counts of one frame, indexed by class id.
struct FrameCounts {
    intersection: [u64; 256],
    predicted: [u64; 256],
    truth: [u64; 256],
}

impl FrameCounts {
    fn tally(pred: &LabelMap, gt: &LabelMap) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(Error::shape(format!(
                "prediction {}x{} vs ground truth {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let mut counts = FrameCounts {
            intersection: [0; 256],
            predicted: [0; 256],
            truth: [0; 256],
        };
        for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
            counts.predicted[p as usize] += 1;
            counts.truth[g as usize] += 1;
            if p == g {
                counts.intersection[p as usize] += 1;
            }
        }
        Ok(counts)
    }

    fn iou(&self, class: ClassId) -> Option<f64> {
        let c = class.0 as usize;
        let union = self.predicted[c] + self.truth[c] - self.intersection[c];
        if union == 0 {
            None
        } else {
            Some(self.intersection[c] as f64 / union as f64)
        }
    }

    fn in_truth(&self, class: ClassId) -> bool {
        self.truth[class.0 as usize] > 0
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn tally_all(pairs: &[(&LabelMap, &LabelMap)]) -> Result<Vec<FrameCounts>> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, (p, g))| {
            FrameCounts::tally(p, g).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("frame pair {i}: {m}")),
                e => e,
            })
        })
        .collect()
}

/// IoU of `{pred == class}` and `{gt == class}`; `None` when both are empty.
pub fn frame_class_iou(pred: &LabelMap, gt: &LabelMap, class: ClassId) -> Result<Option<f64>> {
    Ok(FrameCounts::tally(pred, gt)?.iou(class))
}

fn frame_average(
    counts: &[FrameCounts],
    classes_of: impl Fn(&FrameCounts) -> Vec<ClassId>,
) -> Option<f64> {
    let per_frame: Vec<f64> = counts
        .iter()
        .filter_map(|fc| {
            let values: Vec<f64> = classes_of(fc)
                .into_iter()
                .filter_map(|c| fc.iou(c))
                .collect();
            mean(&values)
        })
        .collect();
    mean(&per_frame)
}

/// Per-frame mean IoU over `classes`, averaged over frames.
pub fn frame_iou(pairs: &[(&LabelMap, &LabelMap)], classes: &[ClassId]) -> Result<f64> {
    let counts = tally_all(pairs)?;
    frame_average(&counts, |_| classes.to_vec())
        .ok_or_else(|| Error::NoData("no frame has a defined class IoU".into()))
}

/// Like [`frame_iou`], but each frame only averages the classes present in its
/// ground truth.
pub fn challenge_iou(pairs: &[(&LabelMap, &LabelMap)], classes: &[ClassId]) -> Result<f64> {
    let counts = tally_all(pairs)?;
    frame_average(&counts, |fc| {
        classes
            .iter()
            .copied()
            .filter(|&c| fc.in_truth(c))
            .collect()
    })
    .ok_or_else(|| Error::NoData("no frame has a ground-truth instrument".into()))
}

/// Per-class IoU averaged over the frames where it is defined, and the mean
/// of those per-class values.
pub fn mean_class_iou(
    pairs: &[(&LabelMap, &LabelMap)],
    classes: &[ClassId],
) -> Result<(BTreeMap<ClassId, f64>, f64)> {
    let counts = tally_all(pairs)?;
    per_class(&counts, classes)
}

fn per_class(counts: &[FrameCounts], classes: &[ClassId]) -> Result<(BTreeMap<ClassId, f64>, f64)> {
    let mut table = BTreeMap::new();
    for &c in classes {
        let values: Vec<f64> = counts.iter().filter_map(|fc| fc.iou(c)).collect();
        if let Some(m) = mean(&values) {
            table.insert(c, m);
        }
    }
    let values: Vec<f64> = table.values().copied().collect();
    let overall = mean(&values).ok_or_else(|| Error::NoData("no class IoU is defined".into()))?;
    Ok((table, overall))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub challenge_iou: f64,
    pub frame_iou: f64,
    /// Classes never defined in any frame are absent.
    pub per_class_iou: BTreeMap<ClassId, f64>,
    pub mean_class_iou: f64,
    pub frames_evaluated: usize,
}

/// Compute every metric at once over the vocabulary's classes.
pub fn evaluate(
    pairs: &[(&LabelMap, &LabelMap)],
    vocabulary: &ClassVocabulary,
) -> Result<MetricReport> {
    let classes: Vec<ClassId> = vocabulary.ids().collect();
    let counts = tally_all(pairs)?;
    let frame_iou = frame_average(&counts, |_| classes.clone())
        .ok_or_else(|| Error::NoData("no frame has a defined class IoU".into()))?;
    let challenge_iou = frame_average(&counts, |fc| {
        classes
            .iter()
            .copied()
            .filter(|&c| fc.in_truth(c))
            .collect()
    })
    .ok_or_else(|| Error::NoData("no frame has a ground-truth instrument".into()))?;
    let (per_class_iou, mean_class_iou) = per_class(&counts, &classes)?;
    Ok(MetricReport {
        challenge_iou,
        frame_iou,
        per_class_iou,
        mean_class_iou,
        frames_evaluated: pairs.len(),
    })
}

#[derive(Serialize)]
struct ReportRecord<'a> {
    frames_evaluated: usize,
    challenge_iou: f64,
    iou: f64,
    per_class_iou: Vec<ClassRecord<'a>>,
    mean_class_iou: f64,
}

#[derive(Serialize)]
struct ClassRecord<'a> {
    class_id: u8,
    name: &'a str,
    iou: Option<f64>,
}

impl MetricReport {
    pub fn to_json(&self, vocabulary: &ClassVocabulary) -> String {
        let record = ReportRecord {
            frames_evaluated: self.frames_evaluated,
            challenge_iou: self.challenge_iou,
            iou: self.frame_iou,
            per_class_iou: vocabulary
                .ids()
                .map(|c| ClassRecord {
                    class_id: c.0,
                    name: vocabulary.name(c).unwrap_or(""),
                    iou: self.per_class_iou.get(&c).copied(),
                })
                .collect(),
            mean_class_iou: self.mean_class_iou,
        };
        let mut text = serde_json::to_string_pretty(&record).expect("report serializes");
        text.push('\n');
        text
    }

    /// Aligned text table: challenge IoU, IoU, one column per class, mean
    /// class IoU. Values are percentages.
    pub fn to_table(&self, vocabulary: &ClassVocabulary) -> String {
        let mut header = vec!["challenge IoU".to_string(), "IoU".to_string()];
        let mut row = vec![
            percent(Some(self.challenge_iou)),
            percent(Some(self.frame_iou)),
        ];
        for c in vocabulary.ids() {
            header.push(vocabulary.name(c).unwrap_or("").to_string());
            row.push(percent(self.per_class_iou.get(&c).copied()));
        }
        header.push("mean class IoU".to_string());
        row.push(percent(Some(self.mean_class_iou)));
        render_table(&header, &[row])
    }
}

pub(crate) fn percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{:.2}", v * 100.0),
        None => "-".to_string(),
    }
}

pub(crate) fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].len())
                .chain(std::iter::once(header[i].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:>w$}"))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(header);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

/// Paint instance candidates into a semantic label map.
///
/// Where candidates overlap, the highest score wins; equal scores go to the
/// candidate listed first. Uncovered pixels are background.
pub fn render_semantic(frame: &FrameDetections, height: u32, width: u32) -> Result<LabelMap> {
    let mut order: Vec<usize> = (0..frame.candidates.len()).collect();
    order.sort_by(|&a, &b| {
        frame.candidates[b]
            .score
            .total_cmp(&frame.candidates[a].score)
    });
    let mut labels = LabelMap::filled(height, width, 0)?;
    // paint lowest priority first so winners overwrite
    for &i in order.iter().rev() {
        let c = &frame.candidates[i];
        if c.mask.dims() != (height, width) {
            return Err(Error::shape(format!(
                "candidate {i} mask is {}x{}, frame is {height}x{width}",
                c.mask.height(),
                c.mask.width()
            )));
        }
        for (row, col) in c.mask.pixels() {
            labels.set(row, col, c.class_id.0);
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detections::Candidate;
    use crate::mask::BinaryMask;
    use proptest::prelude::*;

    fn grid(rows: &[&[u8]]) -> LabelMap {
        let h = rows.len() as u32;
        let w = rows[0].len() as u32;
        LabelMap::from_vec(h, w, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    fn ids(k: u8) -> Vec<ClassId> {
        (1..=k).map(ClassId).collect()
    }

    // Independent per-pixel reference implementations.
    fn brute_class_iou(p: &LabelMap, g: &LabelMap, c: u8) -> Option<f64> {
        let (mut i, mut u) = (0u32, 0u32);
        for row in 0..p.height() {
            for col in 0..p.width() {
                let a = p.get(row, col) == c;
                let b = g.get(row, col) == c;
                if a && b {
                    i += 1;
                }
                if a || b {
                    u += 1;
                }
            }
        }
        (u > 0).then(|| i as f64 / u as f64)
    }

    fn brute_eq1(pairs: &[(LabelMap, LabelMap)], k: u8, only_gt: bool) -> f64 {
        let mut frame_means = Vec::new();
        for (p, g) in pairs {
            let mut vals = Vec::new();
            for c in 1..=k {
                if only_gt && !g.as_slice().contains(&c) {
                    continue;
                }
                if let Some(v) = brute_class_iou(p, g, c) {
                    vals.push(v);
                }
            }
            if !vals.is_empty() {
                frame_means.push(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        frame_means.iter().sum::<f64>() / frame_means.len() as f64
    }

    fn brute_mean_class(pairs: &[(LabelMap, LabelMap)], k: u8) -> f64 {
        let mut class_means = Vec::new();
        for c in 1..=k {
            let vals: Vec<f64> = pairs
                .iter()
                .filter_map(|(p, g)| brute_class_iou(p, g, c))
                .collect();
            if !vals.is_empty() {
                class_means.push(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        class_means.iter().sum::<f64>() / class_means.len() as f64
    }

    #[test]
    fn frame_class_iou_examples() {
        let g = grid(&[&[1, 1, 0, 0], &[1, 1, 0, 0]]);
        assert_eq!(frame_class_iou(&g, &g, ClassId(1)).unwrap(), Some(1.0));
        assert_eq!(frame_class_iou(&g, &g, ClassId(2)).unwrap(), None);
        let p = grid(&[&[1, 0, 1, 0], &[1, 0, 1, 0]]);
        assert_eq!(
            frame_class_iou(&p, &g, ClassId(1)).unwrap(),
            Some(2.0 / 6.0)
        );
        assert_eq!(brute_class_iou(&p, &g, 1), Some(1.0 / 3.0));
    }

    #[test]
    fn dimension_mismatch() {
        let a = LabelMap::filled(2, 2, 0).unwrap();
        let b = LabelMap::filled(2, 3, 0).unwrap();
        assert!(frame_class_iou(&a, &b, ClassId(1)).unwrap_err().is_shape());
    }

    #[test]
    fn eq1_examples() {
        // class 1 perfect, class 2 at 0.5
        let g1 = grid(&[&[1, 1, 2, 2]]);
        let p1 = grid(&[&[1, 1, 2, 0]]);
        assert_eq!(frame_iou(&[(&p1, &g1)], &ids(2)).unwrap(), 0.75);
        assert_eq!(frame_iou(&[(&g1, &g1), (&g1, &g1)], &ids(2)).unwrap(), 1.0);
        // class 1 at 0.5, class 2 at 0
        let g2 = grid(&[&[1, 1, 2, 2]]);
        let p2 = grid(&[&[1, 0, 0, 0]]);
        assert_eq!(frame_iou(&[(&p2, &g2)], &ids(2)).unwrap(), 0.25);
        assert_eq!(frame_iou(&[(&p1, &g1), (&p2, &g2)], &ids(2)).unwrap(), 0.5);
    }

    #[test]
    fn empty_evaluation_is_an_error() {
        let z = LabelMap::filled(2, 2, 0).unwrap();
        assert!(frame_iou(&[(&z, &z)], &ids(3)).unwrap_err().is_no_data());
        assert!(frame_iou(&[], &ids(3)).unwrap_err().is_no_data());
        assert!(challenge_iou(&[(&z, &z)], &ids(3))
            .unwrap_err()
            .is_no_data());
        assert!(mean_class_iou(&[], &ids(3)).unwrap_err().is_no_data());
    }

    #[test]
    fn challenge_examples() {
        let g = grid(&[&[1, 1, 0, 0]]);
        let p = grid(&[&[1, 1, 0, 2]]);
        assert_eq!(challenge_iou(&[(&p, &g)], &ids(2)).unwrap(), 1.0);
        assert_eq!(frame_iou(&[(&p, &g)], &ids(2)).unwrap(), 0.5);
        let empty = grid(&[&[0, 0, 0, 0]]);
        assert_eq!(challenge_iou(&[(&empty, &g)], &ids(2)).unwrap(), 0.0);
        assert_eq!(challenge_iou(&[(&g, &g)], &ids(2)).unwrap(), 1.0);
    }

    #[test]
    fn mean_class_examples() {
        let g = grid(&[&[1, 1]]);
        let miss = grid(&[&[0, 0]]);
        let (table, m) = mean_class_iou(&[(&g, &g), (&miss, &g)], &ids(1)).unwrap();
        assert_eq!(table.get(&ClassId(1)), Some(&0.5));
        assert_eq!(m, 0.5);
        let (table, m) = mean_class_iou(&[(&g, &g), (&g, &g)], &ids(3)).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(m, 1.0);
        // class 1 at 0.4, class 2 at 0.6
        let g = grid(&[&[1, 1, 1, 1, 1, 2, 2, 2, 2, 2]]);
        let p = grid(&[&[1, 1, 0, 0, 0, 2, 2, 2, 0, 0]]);
        let (table, m) = mean_class_iou(&[(&p, &g)], &ids(2)).unwrap();
        assert_eq!(table[&ClassId(1)], 0.4);
        assert_eq!(table[&ClassId(2)], 0.6);
        assert!((m - 0.5).abs() < 1e-15);
    }

    #[test]
    fn render_semantic_examples() {
        let (h, w) = (2, 3);
        assert_eq!(
            render_semantic(&FrameDetections::empty(0), h, w).unwrap(),
            LabelMap::filled(h, w, 0).unwrap()
        );
        let a = BinaryMask::from_pixels(h, w, [(0, 0), (0, 1)]).unwrap();
        let b = BinaryMask::from_pixels(h, w, [(0, 1), (0, 2)]).unwrap();
        let f = FrameDetections::new(
            0,
            vec![
                Candidate::new(b.clone(), 0.8, ClassId(2)),
                Candidate::new(a.clone(), 0.9, ClassId(1)),
            ],
        );
        assert_eq!(
            render_semantic(&f, h, w).unwrap(),
            grid(&[&[1, 1, 2], &[0, 0, 0]])
        );
        // equal scores: first listed wins
        let f = FrameDetections::new(
            0,
            vec![
                Candidate::new(b, 0.9, ClassId(2)),
                Candidate::new(a, 0.9, ClassId(1)),
            ],
        );
        assert_eq!(
            render_semantic(&f, h, w).unwrap(),
            grid(&[&[1, 2, 2], &[0, 0, 0]])
        );
        let c = BinaryMask::from_pixels(h, w, [(1, 2)]).unwrap();
        let d = BinaryMask::from_pixels(h, w, [(1, 0)]).unwrap();
        let f = FrameDetections::new(
            0,
            vec![
                Candidate::new(c, 0.8, ClassId(3)),
                Candidate::new(d, 0.85, ClassId(4)),
            ],
        );
        assert_eq!(
            render_semantic(&f, h, w).unwrap(),
            grid(&[&[0, 0, 0], &[4, 0, 3]])
        );
    }

    #[test]
    fn report_table_columns() {
        let v = ClassVocabulary::endovis2017();
        let g = grid(&[&[1, 1, 0, 0]]);
        let r = evaluate(&[(&g, &g)], &v).unwrap();
        let table = r.to_table(&v);
        let header = table.lines().next().unwrap();
        assert!(header.contains("challenge IoU"));
        assert!(header.contains("Ultrasound Probe"));
        assert!(header.trim_end().ends_with("mean class IoU |"));
        assert!(table.lines().nth(2).unwrap().contains("100.00"));
        let json = r.to_json(&v);
        assert!(json.contains("\"iou\": null"));
        assert!(json.contains("\"mean_class_iou\": 1.0"));
    }

    fn pair_strategy() -> impl Strategy<Value = Vec<(LabelMap, LabelMap)>> {
        proptest::collection::vec(
            (
                proptest::collection::vec(0u8..=4, 64),
                proptest::collection::vec(0u8..=4, 64),
            ),
            1..6,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(p, g)| {
                    (
                        LabelMap::from_vec(8, 8, p).unwrap(),
                        LabelMap::from_vec(8, 8, g).unwrap(),
                    )
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn metrics_match_brute_force(pairs in pair_strategy()) {
            let refs: Vec<(&LabelMap, &LabelMap)> = pairs.iter().map(|(p, g)| (p, g)).collect();
            let any_defined = pairs.iter().any(|(p, g)| p.as_slice().iter().chain(g.as_slice()).any(|&x| x > 0));
            let any_truth = pairs.iter().any(|(_, g)| g.as_slice().iter().any(|&x| x > 0));
            match frame_iou(&refs, &ids(4)) {
                Ok(v) => prop_assert!((v - brute_eq1(&pairs, 4, false)).abs() < 1e-9),
                Err(_) => prop_assert!(!any_defined),
            }
            match challenge_iou(&refs, &ids(4)) {
                Ok(v) => prop_assert!((v - brute_eq1(&pairs, 4, true)).abs() < 1e-9),
                Err(_) => prop_assert!(!any_truth),
            }
            if let Ok((table, m)) = mean_class_iou(&refs, &ids(4)) {
                prop_assert!((m - brute_mean_class(&pairs, 4)).abs() < 1e-9);
                let avg = table.values().sum::<f64>() / table.len() as f64;
                prop_assert!((avg - m).abs() < 1e-12);
                prop_assert!(table.values().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn frame_order_does_not_matter(pairs in pair_strategy()) {
            let refs: Vec<(&LabelMap, &LabelMap)> = pairs.iter().map(|(p, g)| (p, g)).collect();
            let mut rev = refs.clone();
            rev.reverse();
            let v = ClassVocabulary::new(["a", "b", "c", "d"]).unwrap();
            if let (Ok(a), Ok(b)) = (evaluate(&refs, &v), evaluate(&rev, &v)) {
                prop_assert!((a.frame_iou - b.frame_iou).abs() < 1e-12);
                prop_assert!((a.challenge_iou - b.challenge_iou).abs() < 1e-12);
                prop_assert!((a.mean_class_iou - b.mean_class_iou).abs() < 1e-12);
            }
        }

        #[test]
        fn identity_scores_one(pairs in pair_strategy()) {
            let v = ClassVocabulary::new(["a", "b", "c", "d"]).unwrap();
            let refs: Vec<(&LabelMap, &LabelMap)> = pairs.iter().map(|(_, g)| (g, g)).collect();
            if pairs.iter().any(|(_, g)| g.as_slice().iter().any(|&x| x > 0)) {
                let r = evaluate(&refs, &v).unwrap();
                prop_assert_eq!(r.frame_iou, 1.0);
                prop_assert_eq!(r.challenge_iou, 1.0);
                prop_assert_eq!(r.mean_class_iou, 1.0);
            }
        }
    }
}
