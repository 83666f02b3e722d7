use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::BinaryMask;

/// Instrument class id. 0 is background and never labels a candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u8);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One detection in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidate {
    pub mask: BinaryMask,
    pub score: f64,
    pub class_id: ClassId,
    /// Present only in ground-truth files.
    pub instance_id: Option<u32>,
}

impl Candidate {
    pub fn new(mask: BinaryMask, score: f64, class_id: ClassId) -> Self {
        Candidate {
            mask,
            score,
            class_id,
            instance_id: None,
        }
    }

    pub fn with_instance(mut self, instance_id: u32) -> Self {
        self.instance_id = Some(instance_id);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameDetections {
    pub frame_index: u32,
    pub candidates: Vec<Candidate>,
}

impl FrameDetections {
    pub fn new(frame_index: u32, candidates: Vec<Candidate>) -> Self {
        FrameDetections {
            frame_index,
            candidates,
        }
    }

    pub fn empty(frame_index: u32) -> Self {
        Self::new(frame_index, Vec::new())
    }
}

/// All detections of one video sequence, frames in ascending order.
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub height: u32,
    pub width: u32,
    pub frames: Vec<FrameDetections>,
}

impl Sequence {
    /// Check that every mask shares the sequence's frame size and frames
    /// ascend strictly.
    pub fn validate(&self) -> Result<()> {
        let mut last: Option<u32> = None;
        for frame in &self.frames {
            if let Some(prev) = last {
                if frame.frame_index <= prev {
                    return Err(Error::format(format!(
                        "frame {} follows frame {prev}; frame indices must ascend strictly",
                        frame.frame_index
                    )));
                }
            }
            last = Some(frame.frame_index);
            for (i, c) in frame.candidates.iter().enumerate() {
                if c.mask.dims() != (self.height, self.width) {
                    return Err(Error::shape(format!(
                        "candidate {i} mask is {}x{}, sequence is {}x{}",
                        c.mask.height(),
                        c.mask.width(),
                        self.height,
                        self.width
                    ))
                    .in_frame(frame.frame_index));
                }
            }
        }
        Ok(())
    }
}
