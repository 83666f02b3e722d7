//! Temporal label consistency.
//!
//! For every frame `t`, candidates of the `f` previous frames are warped into
//! frame `t` with backward flow, paired with current candidates by mutual
//! best IoU (one previous frame at a time), and each current candidate's class
//! is re-voted over its matched history. Only class labels change.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detections::{ClassId, FrameDetections};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::mask::{compose_warp, iou, warp, BinaryMask};

/// Score sums closer than this are treated as tied.
pub const SCORE_TIE_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentStrategy {
    /// Class with the largest summed score over the window.
    WeightedMode,
    /// Class of the single highest-scoring window entry.
    Max,
}

impl AssignmentStrategy {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignmentStrategy::WeightedMode => "weighted_mode",
            AssignmentStrategy::Max => "max",
        }
    }
}

impl fmt::Display for AssignmentStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssignmentStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_mode" => Ok(AssignmentStrategy::WeightedMode),
            "max" => Ok(AssignmentStrategy::Max),
            other => Err(Error::config(format!(
                "unknown assignment strategy {other:?} (expected weighted_mode or max)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemporalConfig {
    /// Number of previous frames considered.
    pub window: usize,
    /// Matches need IoU strictly above this.
    pub iou_threshold: f64,
    pub strategy: AssignmentStrategy,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig {
            window: 6,
            iou_threshold: 0.0,
            strategy: AssignmentStrategy::WeightedMode,
        }
    }
}

impl TemporalConfig {
    pub fn new(window: usize, iou_threshold: f64, strategy: AssignmentStrategy) -> Result<Self> {
        let config = TemporalConfig {
            window,
            iou_threshold,
            strategy,
        };
        config.validate()?;
        Ok(config)
    }

    /// 2017 profile: f = 6, U = 0.
    pub fn endovis2017() -> Self {
        Self::default()
    }

    /// 2018 profile: f = 6, U = 0.5.
    pub fn endovis2018() -> Self {
        TemporalConfig {
            iou_threshold: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::config(format!(
                "IoU threshold {} outside [0, 1]",
                self.iou_threshold
            )));
        }
        Ok(())
    }
}

/// One vote in an instance window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowEntry {
    pub frame_index: u32,
    pub class_id: ClassId,
    pub score: f64,
}

/// A current-frame candidate and its matched predecessors.
#[derive(Clone, Debug, PartialEq)]
pub struct InstanceWindow {
    /// Position of the candidate within its frame.
    pub candidate_index: usize,
    pub current: WindowEntry,
    /// At most one per previous frame, ascending by frame index.
    pub predecessors: Vec<WindowEntry>,
}

impl InstanceWindow {
    pub fn singleton(candidate_index: usize, current: WindowEntry) -> Self {
        InstanceWindow {
            candidate_index,
            current,
            predecessors: Vec::new(),
        }
    }

    /// Predecessors oldest first, then the current entry.
    pub fn entries(&self) -> impl DoubleEndedIterator<Item = &WindowEntry> {
        self.predecessors
            .iter()
            .chain(std::iter::once(&self.current))
    }

    pub fn len(&self) -> usize {
        self.predecessors.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Candidates of one earlier frame, already warped into the current frame.
struct WarpedFrame {
    frame_index: u32,
    votes: Vec<(ClassId, f64)>,
    masks: Vec<BinaryMask>,
}

/// Pair current masks with warped masks of one earlier frame.
///
/// Returns, per current candidate, the index of its partner: both must be
/// each other's highest-IoU choice (lowest index wins ties) and their IoU
/// must exceed `threshold`.
pub fn mutual_best_pairs(
    current: &[&BinaryMask],
    previous: &[&BinaryMask],
    threshold: f64,
) -> Result<Vec<Option<usize>>> {
    let n = current.len();
    let m = previous.len();
    let mut matched = vec![None; n];
    if n == 0 || m == 0 {
        return Ok(matched);
    }
    let mut table = vec![0.0f64; n * m];
    for (i, c) in current.iter().enumerate() {
        for (j, p) in previous.iter().enumerate() {
            table[i * m + j] = iou(c, p)?;
        }
    }
    let best_prev: Vec<usize> = (0..n)
        .map(|i| argmax((0..m).map(|j| table[i * m + j])))
        .collect();
    let best_cur: Vec<usize> = (0..m)
        .map(|j| argmax((0..n).map(|i| table[i * m + j])))
        .collect();
    for (i, &j) in best_prev.iter().enumerate() {
        if best_cur[j] == i && table[i * m + j] > threshold {
            matched[i] = Some(j);
        }
    }
    Ok(matched)
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}

fn build_windows(
    current: &FrameDetections,
    history: &[WarpedFrame],
    threshold: f64,
) -> Result<Vec<InstanceWindow>> {
    let mut windows: Vec<InstanceWindow> = current
        .candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            InstanceWindow::singleton(
                i,
                WindowEntry {
                    frame_index: current.frame_index,
                    class_id: c.class_id,
                    score: c.score,
                },
            )
        })
        .collect();
    let current_masks: Vec<&BinaryMask> = current.candidates.iter().map(|c| &c.mask).collect();
    for frame in history {
        let previous: Vec<&BinaryMask> = frame.masks.iter().collect();
        let pairs = mutual_best_pairs(&current_masks, &previous, threshold)?;
        for (window, partner) in windows.iter_mut().zip(pairs) {
            if let Some(j) = partner {
                let (class_id, score) = frame.votes[j];
                window.predecessors.push(WindowEntry {
                    frame_index: frame.frame_index,
                    class_id,
                    score,
                });
            }
        }
    }
    Ok(windows)
}

fn check_contiguous(frames: &[FrameDetections], next: Option<u32>) -> Result<()> {
    for pair in frames.windows(2) {
        if pair[1].frame_index != pair[0].frame_index + 1 {
            return Err(Error::contract(format!(
                "frames must be contiguous and ascending: {} then {}",
                pair[0].frame_index, pair[1].frame_index
            )));
        }
    }
    if let (Some(last), Some(next)) = (frames.last(), next) {
        if last.frame_index + 1 != next {
            return Err(Error::contract(format!(
                "previous frames end at {}, current frame is {next}",
                last.frame_index
            )));
        }
    }
    Ok(())
}

/// Build the instance windows of `current`.
///
/// `previous` holds the frames immediately preceding `current`, ascending;
/// only the trailing `config.window` of them are used. `flows[j]` advances
/// candidates of frame `t - j - 1` one step to frame `t - j`, so frame
/// `t - d` is warped with `flows[d - 1], ..., flows[0]` in that order.
pub fn match_window(
    current: &FrameDetections,
    previous: &[FrameDetections],
    flows: &[FlowField],
    config: &TemporalConfig,
) -> Result<Vec<InstanceWindow>> {
    config.validate()?;
    check_contiguous(previous, Some(current.frame_index))?;
    let used = &previous[previous.len().saturating_sub(config.window)..];
    if flows.len() < used.len() {
        return Err(Error::contract(format!(
            "{} previous frames need {} flows, got {}",
            used.len(),
            used.len(),
            flows.len()
        )));
    }
    let mut history = Vec::with_capacity(used.len());
    for (k, frame) in used.iter().enumerate() {
        let distance = used.len() - k;
        let steps: Vec<FlowField> = flows[..distance].iter().rev().cloned().collect();
        let masks = frame
            .candidates
            .iter()
            .map(|c| compose_warp(&c.mask, &steps))
            .collect::<Result<Vec<_>>>()?;
        history.push(WarpedFrame {
            frame_index: frame.frame_index,
            votes: frame
                .candidates
                .iter()
                .map(|c| (c.class_id, c.score))
                .collect(),
            masks,
        });
    }
    build_windows(current, &history, config.iou_threshold)
}

/// Pick the winning class for one window.
///
/// Ties go to the class of the most recent entry among the tied classes,
/// then to the smaller class id.
pub fn assign_class(window: &InstanceWindow, strategy: AssignmentStrategy) -> ClassId {
    // (class, sum or max of scores, latest frame); windows are short
    let mut tally: Vec<(ClassId, f64, u32)> = Vec::with_capacity(window.len());
    for e in window.entries() {
        match tally.iter_mut().find(|t| t.0 == e.class_id) {
            Some(t) => {
                t.1 = match strategy {
                    AssignmentStrategy::WeightedMode => t.1 + e.score,
                    AssignmentStrategy::Max => t.1.max(e.score),
                };
                t.2 = t.2.max(e.frame_index);
            }
            None => tally.push((e.class_id, e.score, e.frame_index)),
        }
    }
    let best = tally.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    tally
        .iter()
        .filter(|t| t.1 >= best - SCORE_TIE_EPSILON)
        .min_by_key(|t| (std::cmp::Reverse(t.2), t.0))
        .map(|t| t.0)
        .expect("window holds at least the current entry")
}

/// Run matching and assignment over a whole sequence, frame by frame.
///
/// `flows[k]` is the backward flow from frame `k + 1` to frame `k`. Windows
/// see earlier frames with their corrected labels and original scores.
pub fn correct_sequence(
    frames: &[FrameDetections],
    flows: &[FlowField],
    config: &TemporalConfig,
) -> Result<Vec<FrameDetections>> {
    config.validate()?;
    if frames.is_empty() {
        if !flows.is_empty() {
            return Err(Error::contract(format!(
                "no frames but {} flows",
                flows.len()
            )));
        }
        return Ok(Vec::new());
    }
    if flows.len() != frames.len() - 1 {
        return Err(Error::contract(format!(
            "{} frames need {} flows, got {}",
            frames.len(),
            frames.len() - 1,
            flows.len()
        )));
    }
    check_contiguous(frames, None)?;

    let mut corrected = Vec::with_capacity(frames.len());
    let mut history: VecDeque<WarpedFrame> = VecDeque::with_capacity(config.window + 1);
    for (t, frame) in frames.iter().enumerate() {
        let result: Result<FrameDetections> = (|| {
            while history.len() > config.window {
                history.pop_front();
            }
            if t > 0 {
                for past in history.iter_mut() {
                    for mask in past.masks.iter_mut() {
                        *mask = warp(mask, &flows[t - 1])?;
                    }
                }
            }
            let windows = build_windows(frame, history.make_contiguous(), config.iou_threshold)?;
            let mut out = frame.clone();
            for (candidate, window) in out.candidates.iter_mut().zip(&windows) {
                candidate.class_id = assign_class(window, config.strategy);
            }
            Ok(out)
        })();
        let out = result.map_err(|e| e.in_frame(frame.frame_index))?;
        if config.window > 0 {
            history.push_back(WarpedFrame {
                frame_index: out.frame_index,
                votes: out
                    .candidates
                    .iter()
                    .map(|c| (c.class_id, c.score))
                    .collect(),
                masks: out.candidates.iter().map(|c| c.mask.clone()).collect(),
            });
        }
        corrected.push(out);
    }
    Ok(corrected)
}
