//! Per-sequence detection files (JSON).
//!
//! ```json
//! { "sequence": "seq_1", "height": 8, "width": 8,
//!   "frames": [ { "frame_index": 0,
//!                 "candidates": [ { "class_id": 1, "score": 0.9,
//!                                   "rle": { "counts": [10, 4, 50] } } ] } ] }
//! ```
//!
//! Ground-truth instance files use the same schema with `score` 1.0 and an
//! `instance_id` on every candidate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detections::{Candidate, FrameDetections, Sequence};
use crate::error::{Error, Result};
use crate::mask::BinaryMask;
use crate::vocab::ClassVocabulary;

/// Detector confidence a candidate must exceed to be kept.
pub const DEFAULT_SCORE_THRESHOLD: f64 = 0.75;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileRecord {
    sequence: String,
    height: u32,
    width: u32,
    frames: Vec<FrameRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    frame_index: u32,
    candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateRecord {
    class_id: i64,
    score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    instance_id: Option<u32>,
    rle: RleRecord,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RleRecord {
    counts: Vec<u64>,
}

/// Read a detection file, keeping candidates with `score > score_threshold`.
pub fn read_detections(
    path: impl AsRef<Path>,
    vocabulary: &ClassVocabulary,
    score_threshold: f64,
) -> Result<Sequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_detections(&text, vocabulary, score_threshold).map_err(|e| e.in_file(path))
}

pub fn parse_detections(
    text: &str,
    vocabulary: &ClassVocabulary,
    score_threshold: f64,
) -> Result<Sequence> {
    let record: FileRecord = serde_json::from_str(text)
        .map_err(|e| Error::format(format!("malformed detection file: {e}")))?;
    if record.height == 0 || record.width == 0 {
        return Err(Error::format(format!(
            "invalid frame size {}x{}",
            record.height, record.width
        )));
    }
    let mut frames = Vec::with_capacity(record.frames.len());
    for frame in record.frames {
        let index = frame.frame_index;
        let mut candidates = Vec::with_capacity(frame.candidates.len());
        for (i, c) in frame.candidates.into_iter().enumerate() {
            let candidate =
                convert_candidate(c, record.height, record.width, vocabulary).map_err(|e| {
                    Error::Frame {
                        frame: index,
                        source: Box::new(prefix(e, i)),
                    }
                })?;
            if candidate.score > score_threshold {
                candidates.push(candidate);
            }
        }
        frames.push(FrameDetections::new(index, candidates));
    }
    frames.sort_by_key(|f| f.frame_index);
    if let Some(w) = frames
        .windows(2)
        .find(|w| w[0].frame_index == w[1].frame_index)
    {
        return Err(Error::format(format!(
            "frame {} listed more than once",
            w[0].frame_index
        )));
    }
    Ok(Sequence {
        name: record.sequence,
        height: record.height,
        width: record.width,
        frames,
    })
}

fn prefix(e: Error, candidate: usize) -> Error {
    match e {
        Error::Format(m) => Error::Format(format!("candidate {candidate}: {m}")),
        Error::Data(m) => Error::Data(format!("candidate {candidate}: {m}")),
        Error::Vocabulary(m) => Error::Vocabulary(format!("candidate {candidate}: {m}")),
        e => e,
    }
}

fn convert_candidate(
    c: CandidateRecord,
    height: u32,
    width: u32,
    vocabulary: &ClassVocabulary,
) -> Result<Candidate> {
    let class_id = vocabulary.check(c.class_id)?;
    if !c.score.is_finite() || !(0.0..=1.0).contains(&c.score) {
        return Err(Error::data(format!("score {} outside [0, 1]", c.score)));
    }
    let counts = c
        .rle
        .counts
        .iter()
        .map(|&n| u32::try_from(n).map_err(|_| Error::format(format!("RLE count {n} too large"))))
        .collect::<Result<Vec<_>>>()?;
    let mask = BinaryMask::from_counts(height, width, &counts)?;
    Ok(Candidate {
        mask,
        score: c.score,
        class_id,
        instance_id: c.instance_id,
    })
}

pub fn write_detections(sequence: &Sequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_detections(sequence)).map_err(|e| Error::io(path, e))
}

/// Serialize a sequence; the output is a pure function of its input.
pub fn render_detections(sequence: &Sequence) -> String {
    let record = FileRecord {
        sequence: sequence.name.clone(),
        height: sequence.height,
        width: sequence.width,
        frames: sequence
            .frames
            .iter()
            .map(|f| FrameRecord {
                frame_index: f.frame_index,
                candidates: f
                    .candidates
                    .iter()
                    .map(|c| CandidateRecord {
                        class_id: c.class_id.0 as i64,
                        score: c.score,
                        instance_id: c.instance_id,
                        rle: RleRecord {
                            counts: c.mask.counts().iter().map(|&n| n as u64).collect(),
                        },
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&record).expect("detections serialize");
    text.push('\n');
    text
}
