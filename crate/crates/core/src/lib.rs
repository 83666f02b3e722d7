//! Temporal class consistency for video instance segmentation.
//!
//! Detector candidates (mask, score, class) from earlier frames are pulled
//! into the current frame with backward optical flow, matched to current
//! candidates by mutual best IoU, and each current candidate's class is
//! re-voted over its matched history. The crate also carries the
//! segmentation metrics used to score the result, a synthetic sequence
//! generator with exact flow and ground truth, an ablation harness, and the
//! file formats tying them together.
//!
//! ```
//! use maskvote::{correct_sequence, synth, TemporalConfig};
//!
//! let data = synth::generate(&synth::SynthConfig::demo(7)).unwrap();
//! let corrected =
//!     correct_sequence(&data.predictions.frames, &data.flows, &TemporalConfig::default()).unwrap();
//! assert_eq!(corrected.len(), data.predictions.frames.len());
//! ```

pub mod ablation;
pub mod cli;
pub mod detections;
pub mod error;
pub mod fixtures;
pub mod flow;
pub mod grid;
pub mod ingest;
pub mod mask;
pub mod metrics;
pub mod synth;
pub mod temporal;
pub mod vocab;

pub use ablation::{ablate, AblationGrid, AblationRow, AblationTable, SequenceInput};
pub use detections::{Candidate, ClassId, FrameDetections, Sequence};
pub use error::{Error, Result};
pub use flow::FlowField;
pub use grid::{Grid, LabelMap};
pub use mask::{compose_warp, iou, warp, BinaryMask};
pub use metrics::{evaluate, render_semantic, MetricReport};
pub use temporal::{
    assign_class, correct_sequence, match_window, AssignmentStrategy, InstanceWindow,
    TemporalConfig, WindowEntry,
};
pub use vocab::ClassVocabulary;
