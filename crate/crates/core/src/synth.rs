//! Synthetic sequences with exact backward flow and ground truth.
//!
//! Objects translate by integer velocities. The emitted flow carries each
//! object's `(-vx, -vy)` on its frame-`t` support and on the pixels it
//! uncovers (its frame `t - 1` support); it is zero elsewhere. With that
//! field a single backward warp moves every object's mask onto its next
//! position exactly, which the generator verifies before returning.
//!
//! Predictions copy the ground-truth masks; each object-frame's class is
//! flipped to a uniformly drawn wrong class with the configured probability.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detections::{Candidate, ClassId, FrameDetections, Sequence};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::{Grid, LabelMap};
use crate::ingest::{write_detections, write_flo, write_label_map};
use crate::mask::{warp, BinaryMask};
use crate::metrics::render_semantic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub shape: Shape,
    /// `[height, width]` of the bounding box.
    pub size: [u32; 2],
    /// `[row, col]` of the top-left corner at frame 0.
    pub origin: [i64; 2],
    /// `[vx, vy]` in pixels per frame.
    pub velocity: [i64; 2],
    pub class_id: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScoreDistribution {
    Constant { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl ScoreDistribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScoreDistribution::Constant { value } => (0.0..=1.0).contains(&value),
            ScoreDistribution::Uniform { low, high } => {
                (0.0..=1.0).contains(&low) && (0.0..=1.0).contains(&high) && low <= high
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid score distribution {self:?}"
            )))
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            ScoreDistribution::Constant { value } => value,
            ScoreDistribution::Uniform { low, high } if low == high => low,
            ScoreDistribution::Uniform { low, high } => rng.gen_range(low..=high),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Chance that one object-frame's predicted class is wrong.
    pub flip_probability: f64,
    pub correct_score: ScoreDistribution,
    pub flipped_score: ScoreDistribution,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            flip_probability: 0.0,
            correct_score: ScoreDistribution::Constant { value: 0.9 },
            flipped_score: ScoreDistribution::Constant { value: 0.9 },
        }
    }
}

fn default_name() -> String {
    "synthetic".to_string()
}

fn default_classes() -> u8 {
    7
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub frames: u32,
    pub height: u32,
    pub width: u32,
    /// Size of the class vocabulary flips draw from.
    #[serde(default = "default_classes")]
    pub num_classes: u8,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl SynthConfig {
    /// Two instruments crossing a 48x64 frame over 24 frames, 30% flips.
    pub fn demo(seed: u64) -> Self {
        SynthConfig {
            name: format!("demo_{seed}"),
            frames: 24,
            height: 48,
            width: 64,
            num_classes: 7,
            objects: vec![
                ObjectSpec {
                    shape: Shape::Rectangle,
                    size: [8, 12],
                    origin: [4, 2],
                    velocity: [2, 0],
                    class_id: 1,
                },
                ObjectSpec {
                    shape: Shape::Ellipse,
                    size: [10, 10],
                    origin: [25, 50],
                    velocity: [-1, 0],
                    class_id: 6,
                },
            ],
            noise: NoiseConfig {
                flip_probability: 0.3,
                ..NoiseConfig::default()
            },
            seed,
        }
    }

    /// Ten 30-frame sequences, two moving instruments each, 30% flips and
    /// equal scores.
    pub fn benchmark_suite(base_seed: u64) -> Vec<SynthConfig> {
        (0..10u64)
            .map(|i| SynthConfig {
                name: format!("seq_{:02}", i + 1),
                frames: 30,
                height: 64,
                width: 96,
                num_classes: 7,
                objects: vec![
                    ObjectSpec {
                        shape: Shape::Rectangle,
                        size: [10, 14],
                        origin: [6, 4],
                        velocity: [1 + (i % 2) as i64, 0],
                        class_id: 1 + (i % 7) as u8,
                    },
                    ObjectSpec {
                        shape: Shape::Ellipse,
                        size: [12, 12],
                        origin: [40, 78],
                        velocity: [-1 - (i % 2) as i64, if i % 3 == 0 { -1 } else { 0 }],
                        class_id: 1 + ((i + 3) % 7) as u8,
                    },
                ],
                noise: NoiseConfig {
                    flip_probability: 0.3,
                    ..NoiseConfig::default()
                },
                seed: base_seed + i,
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::config("a sequence needs at least one frame"));
        }
        if self.height < 3 || self.width < 3 {
            return Err(Error::config(format!(
                "frame {}x{} too small for a 1 px margin",
                self.height, self.width
            )));
        }
        if !(0.0..=1.0).contains(&self.noise.flip_probability) {
            return Err(Error::config(format!(
                "flip probability {} outside [0, 1]",
                self.noise.flip_probability
            )));
        }
        if self.noise.flip_probability > 0.0 && self.num_classes < 2 {
            return Err(Error::config("class flips need at least two classes"));
        }
        self.noise.correct_score.validate()?;
        self.noise.flipped_score.validate()?;
        let last = self.frames as i64 - 1;
        for (k, o) in self.objects.iter().enumerate() {
            if o.class_id == 0 || o.class_id > self.num_classes {
                return Err(Error::config(format!(
                    "object {k}: class {} not in 1..={}",
                    o.class_id, self.num_classes
                )));
            }
            if o.size[0] == 0 || o.size[1] == 0 {
                return Err(Error::config(format!("object {k}: empty size")));
            }
            for t in [0, last] {
                let row = o.origin[0] + o.velocity[1] * t;
                let col = o.origin[1] + o.velocity[0] * t;
                let inside = row >= 1
                    && col >= 1
                    && row + (o.size[0] as i64) < self.height as i64
                    && col + (o.size[1] as i64) < self.width as i64;
                if !inside {
                    return Err(Error::config(format!(
                        "object {k} leaves the 1 px margin by frame {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Top-level config for writing several sequences at once.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub sequences: Vec<SynthConfig>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSequence {
    /// Noisy detector output, masks identical to the ground truth.
    pub predictions: Sequence,
    /// Instance ground truth: score 1.0 and an instance id per object.
    pub groundtruth: Sequence,
    /// `flows[k]` is the backward flow from frame `k + 1` to frame `k`.
    pub flows: Vec<FlowField>,
    pub label_maps: Vec<LabelMap>,
}

fn object_mask(config: &SynthConfig, o: &ObjectSpec, t: u32) -> Result<BinaryMask> {
    let row0 = o.origin[0] + o.velocity[1] * t as i64;
    let col0 = o.origin[1] + o.velocity[0] * t as i64;
    let [bh, bw] = o.size;
    let grid = Grid::from_fn(config.height, config.width, |r, c| {
        let (lr, lc) = (r as i64 - row0, c as i64 - col0);
        if lr < 0 || lc < 0 || lr >= bh as i64 || lc >= bw as i64 {
            return false;
        }
        match o.shape {
            Shape::Rectangle => true,
            Shape::Ellipse => {
                let dy = (lr as f64 + 0.5 - bh as f64 / 2.0) / (bh as f64 / 2.0);
                let dx = (lc as f64 + 0.5 - bw as f64 / 2.0) / (bw as f64 / 2.0);
                dx * dx + dy * dy <= 1.0
            }
        }
    })?;
    Ok(BinaryMask::encode(&grid))
}

pub fn generate(config: &SynthConfig) -> Result<SyntheticSequence> {
    config.validate()?;
    let (h, w) = (config.height, config.width);
    let masks: Vec<Vec<BinaryMask>> = (0..config.frames)
        .map(|t| {
            config
                .objects
                .iter()
                .map(|o| object_mask(config, o, t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    for (t, frame) in masks.iter().enumerate() {
        for a in 0..frame.len() {
            for b in a + 1..frame.len() {
                if frame[a].intersection_area(&frame[b])? > 0 {
                    return Err(Error::config(format!(
                        "objects {a} and {b} overlap at frame {t}"
                    )));
                }
            }
        }
    }

    let mut flows = Vec::with_capacity(config.frames.saturating_sub(1) as usize);
    for t in 1..config.frames as usize {
        let n = h as usize * w as usize;
        let mut u = vec![0.0f32; n];
        let mut v = vec![0.0f32; n];
        let mut paint = |mask: &BinaryMask, o: &ObjectSpec| {
            for (r, c) in mask.pixels() {
                let i = r as usize * w as usize + c as usize;
                u[i] = -o.velocity[0] as f32;
                v[i] = -o.velocity[1] as f32;
            }
        };
        for (k, o) in config.objects.iter().enumerate() {
            paint(&masks[t - 1][k], o);
        }
        for (k, o) in config.objects.iter().enumerate() {
            paint(&masks[t][k], o);
        }
        let flow = FlowField::new(h, w, u, v)?;
        for (k, (before, after)) in masks[t - 1].iter().zip(&masks[t]).enumerate() {
            if warp(before, &flow)? != *after {
                return Err(Error::config(format!(
                    "object {k} passes too close to another object at frame {t} \
                     for its flow to transport it exactly"
                )));
            }
        }
        flows.push(flow);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut pred_frames = Vec::with_capacity(config.frames as usize);
    let mut gt_frames = Vec::with_capacity(config.frames as usize);
    let mut label_maps = Vec::with_capacity(config.frames as usize);
    for (t, frame_masks) in masks.into_iter().enumerate() {
        let mut preds = Vec::with_capacity(frame_masks.len());
        let mut truth = Vec::with_capacity(frame_masks.len());
        for (k, (o, mask)) in config.objects.iter().zip(frame_masks).enumerate() {
            let flipped = rng.gen_bool(config.noise.flip_probability);
            let (class, score) = if flipped {
                // uniform over the other K - 1 classes
                let mut c = rng.gen_range(1..config.num_classes);
                if c >= o.class_id {
                    c += 1;
                }
                (c, config.noise.flipped_score.sample(&mut rng))
            } else {
                (o.class_id, config.noise.correct_score.sample(&mut rng))
            };
            preds.push(Candidate::new(mask.clone(), score, ClassId(class)));
            truth.push(Candidate::new(mask, 1.0, ClassId(o.class_id)).with_instance(k as u32 + 1));
        }
        let gt_frame = FrameDetections::new(t as u32, truth);
        label_maps.push(render_semantic(&gt_frame, h, w)?);
        gt_frames.push(gt_frame);
        pred_frames.push(FrameDetections::new(t as u32, preds));
    }

    Ok(SyntheticSequence {
        predictions: Sequence {
            name: config.name.clone(),
            height: h,
            width: w,
            frames: pred_frames,
        },
        groundtruth: Sequence {
            name: config.name.clone(),
            height: h,
            width: w,
            frames: gt_frames,
        },
        flows,
        label_maps,
    })
}

/// File name of the flow from `frame` back to `frame - 1`.
pub fn flow_file_name(frame: u32) -> String {
    format!("{frame:06}.flo")
}

pub fn label_file_name(frame: u32) -> String {
    format!("{frame:06}.pgm")
}

/// Write sequences in the dataset layout:
///
/// ```text
/// <root>/detections/<name>.json     noisy predictions
/// <root>/groundtruth/<name>.json    instance ground truth
/// <root>/flow/<name>/<t>.flo        backward flow t -> t-1, t >= 1
/// <root>/labels/<name>/<t>.pgm      semantic ground truth
/// ```
pub fn write_dataset(root: impl AsRef<Path>, sequences: &[SyntheticSequence]) -> Result<()> {
    let root = root.as_ref();
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    for dir in ["detections", "groundtruth", "flow", "labels"] {
        mkdir(&root.join(dir))?;
    }
    for s in sequences {
        let name = &s.predictions.name;
        write_detections(
            &s.predictions,
            root.join("detections").join(format!("{name}.json")),
        )?;
        write_detections(
            &s.groundtruth,
            root.join("groundtruth").join(format!("{name}.json")),
        )?;
        let flow_dir = root.join("flow").join(name);
        let label_dir = root.join("labels").join(name);
        mkdir(&flow_dir)?;
        mkdir(&label_dir)?;
        for (k, flow) in s.flows.iter().enumerate() {
            let frame = s.predictions.frames[k + 1].frame_index;
            write_flo(flow, flow_dir.join(flow_file_name(frame)))?;
        }
        for (frame, labels) in s.predictions.frames.iter().zip(&s.label_maps) {
            write_label_map(labels, label_dir.join(label_file_name(frame.frame_index)))?;
        }
    }
    Ok(())
}
