//! Golden micro-fixtures: tiny inputs, hand-derived expected outputs, and the
//! command that must turn one into the other.
//!
//! On disk each fixture is a directory:
//!
//! ```text
//! <name>/fixture.json   description, oracle note, argv, expected exit code
//! <name>/input/...      files the command reads ({input} in argv)
//! <name>/expected/...   exact files the command must write ({output} in argv)
//! ```
//!
//! [`write_fixtures`] regenerates the shipped set; [`verify_fixtures`] runs
//! every fixture through [`crate::cli::run`] and reports unified diffs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detections::{Candidate, ClassId, FrameDetections, Sequence};
use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::grid::{Grid, LabelMap};
use crate::ingest::{encode_flo, encode_pgm, render_detections};
use crate::mask::BinaryMask;
use crate::metrics::MetricReport;
use crate::synth::{flow_file_name, label_file_name};
use crate::vocab::ClassVocabulary;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureManifest {
    pub description: String,
    /// How the expected output was obtained without running this crate.
    pub oracle: String,
    /// Arguments after the program name; `{input}` and `{output}` expand to
    /// the fixture's input directory and a fresh output directory.
    pub args: Vec<String>,
    #[serde(default)]
    pub exit_code: i32,
}

/// A fixture held in memory, before it is written out.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: String,
    pub manifest: FixtureManifest,
    pub inputs: BTreeMap<PathBuf, Vec<u8>>,
    pub expected: BTreeMap<PathBuf, Vec<u8>>,
}

#[derive(Clone, Debug)]
pub struct FixtureOutcome {
    pub name: String,
    pub passed: bool,
    /// Unified diffs and other mismatch notes; empty on success.
    pub report: String,
}

const H: u32 = 8;
const W: u32 = 10;

fn square(row: u32, col: u32, side: u32) -> Result<BinaryMask> {
    BinaryMask::from_pixels(
        H,
        W,
        (row..row + side).flat_map(move |r| (col..col + side).map(move |c| (r, c))),
    )
}

fn sequence(name: &str, frames: Vec<FrameDetections>) -> Sequence {
    Sequence {
        name: name.into(),
        height: H,
        width: W,
        frames,
    }
}

/// One square per frame at a fixed `(row, col + step * t)`, labelled per frame.
fn single_track(name: &str, labels: &[u8], step: u32) -> Result<Sequence> {
    let frames = labels
        .iter()
        .enumerate()
        .map(|(t, &c)| {
            let mask = square(2, 1 + step * t as u32, 3)?;
            Ok(FrameDetections::new(
                t as u32,
                vec![Candidate::new(mask, 0.9, ClassId(c))],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sequence(name, frames))
}

/// Copy of `seq` with candidate `i` of every frame labelled `labels[i]`.
fn relabel(seq: &Sequence, labels: &[u8]) -> Sequence {
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for (cand, &c) in frame.candidates.iter_mut().zip(labels) {
            cand.class_id = ClassId(c);
        }
    }
    out
}

fn add_flows(inputs: &mut BTreeMap<PathBuf, Vec<u8>>, seq: &Sequence, flow: &FlowField) {
    for f in seq.frames.iter().skip(1) {
        inputs.insert(
            Path::new("flows")
                .join(&seq.name)
                .join(flow_file_name(f.frame_index)),
            encode_flo(flow),
        );
    }
}

fn detections_file(dir: &str, seq: &Sequence) -> (PathBuf, Vec<u8>) {
    (
        Path::new(dir).join(format!("{}.json", seq.name)),
        render_detections(seq).into_bytes(),
    )
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn correct_args(extra: &[&str]) -> Vec<String> {
    let mut a = args(&[
        "correct",
        "--detections",
        "{input}/detections",
        "--flows",
        "{input}/flows",
        "--output",
        "{output}",
    ]);
    a.extend(extra.iter().map(|s| s.to_string()));
    a
}

fn static_flip() -> Result<Fixture> {
    let seq = single_track("static", &[1, 1, 1, 2, 1, 1, 1], 0)?;
    let mut inputs = BTreeMap::from([detections_file("detections", &seq)]);
    add_flows(&mut inputs, &seq, &FlowField::zeros(H, W)?);
    let fixed = relabel(&seq, &[1]);
    Ok(Fixture {
        name: "static_flip".into(),
        manifest: FixtureManifest {
            description: "A static object mislabelled once in seven frames; zero flow, default \
                          window 6, weighted mode."
                .into(),
            oracle: "Hand vote: at frame 3 the window holds six votes for class 1 and one for \
                     class 2, and every later window is dominated by class 1."
                .into(),
            args: correct_args(&[]),
            exit_code: 0,
        },
        inputs,
        expected: BTreeMap::from([detections_file("", &fixed)]),
    })
}

fn translate_window() -> Result<Fixture> {
    let seq = single_track("translate", &[3, 3, 5], 1)?;
    let mut inputs = BTreeMap::from([detections_file("detections", &seq)]);
    // backward flow: pixel p at t samples p + (u, v) at t - 1
    add_flows(&mut inputs, &seq, &FlowField::constant(H, W, -1.0, 0.0)?);
    let fixed = relabel(&seq, &[3]);
    Ok(Fixture {
        name: "translate_window".into(),
        manifest: FixtureManifest {
            description: "A square moving one column per frame, labels 3, 3, 5, exact backward \
                          flow, window 2."
                .into(),
            oracle: "Hand warp: both predecessors land exactly on the frame-2 square (IoU 1), \
                     so frame 2 sees votes 3, 3, 5 with equal scores."
                .into(),
            args: correct_args(&["--frames", "2"]),
            exit_code: 0,
        },
        inputs,
        expected: BTreeMap::from([detections_file("", &fixed)]),
    })
}

fn frames_zero() -> Result<Fixture> {
    let mut fx = static_flip()?;
    let seq = single_track("static", &[1, 1, 1, 2, 1, 1, 1], 0)?;
    fx.name = "frames_zero".into();
    fx.manifest = FixtureManifest {
        description: "The static_flip input with an empty window.".into(),
        oracle: "With no predecessors each object votes alone, so output equals input.".into(),
        args: correct_args(&["--frames", "0"]),
        exit_code: 0,
    };
    fx.expected = BTreeMap::from([detections_file("", &seq)]);
    Ok(fx)
}

fn disjoint_threshold() -> Result<Fixture> {
    let labels: [[u8; 2]; 3] = [[2, 4], [2, 4], [5, 4]];
    let frames = labels
        .iter()
        .enumerate()
        .map(|(t, l)| {
            Ok(FrameDetections::new(
                t as u32,
                vec![
                    Candidate::new(square(0, 0, 3)?, 0.8, ClassId(l[0])),
                    Candidate::new(square(4, 5, 4)?, 0.95, ClassId(l[1])),
                ],
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let seq = sequence("pair", frames);
    let mut inputs = BTreeMap::from([detections_file("detections", &seq)]);
    add_flows(&mut inputs, &seq, &FlowField::zeros(H, W)?);
    let fixed = relabel(&seq, &[2, 4]);
    Ok(Fixture {
        name: "disjoint_threshold".into(),
        manifest: FixtureManifest {
            description: "Two disjoint static objects; the first flips at frame 2. Run with \
                          the 2018 profile (IoU threshold 0.5, 2018 vocabulary)."
                .into(),
            oracle: "Each object overlaps only itself (IoU 1 > 0.5); frame 2 of the first \
                     object votes 2, 2, 5 at equal scores."
                .into(),
            args: correct_args(&["--profile", "endovis2018"]),
            exit_code: 0,
        },
        inputs,
        expected: BTreeMap::from([detections_file("", &fixed)]),
    })
}

fn missing_flow() -> Result<Fixture> {
    let mut fx = static_flip()?;
    fx.name = "missing_flow".into();
    fx.inputs
        .remove(&Path::new("flows").join("static").join(flow_file_name(4)));
    fx.manifest = FixtureManifest {
        description: "The static_flip input with the frame-4 flow file deleted.".into(),
        oracle: "A missing referenced file is a data error: exit code 2, nothing written.".into(),
        args: correct_args(&[]),
        exit_code: 2,
    };
    fx.expected = BTreeMap::new();
    Ok(fx)
}

fn eval_two_frame() -> Result<Fixture> {
    // 1x4 frames; ground truth is [1, 1, 2, 2] in both.
    let mask = |cols: &[u32]| BinaryMask::from_pixels(1, 4, cols.iter().map(|&c| (0, c)));
    let frames = vec![
        FrameDetections::new(
            0,
            vec![
                Candidate::new(mask(&[0, 1])?, 0.9, ClassId(1)),
                Candidate::new(mask(&[2])?, 0.8, ClassId(2)),
            ],
        ),
        FrameDetections::new(1, vec![Candidate::new(mask(&[0])?, 0.9, ClassId(1))]),
    ];
    let seq = Sequence {
        name: "eval".into(),
        height: 1,
        width: 4,
        frames,
    };
    let gt: LabelMap = Grid::from_vec(1, 4, vec![1, 1, 2, 2])?;
    let mut inputs = BTreeMap::from([detections_file("detections", &seq)]);
    for t in 0..2 {
        inputs.insert(
            Path::new("groundtruth")
                .join("eval")
                .join(label_file_name(t)),
            encode_pgm(&gt),
        );
    }
    // frame 0: class 1 -> 1, class 2 -> 1/2; frame 1: class 1 -> 1/2, class 2 -> 0
    let vocab = ClassVocabulary::endovis2017();
    let report = MetricReport {
        challenge_iou: 0.5,
        frame_iou: 0.5,
        per_class_iou: BTreeMap::from([(ClassId(1), 0.75), (ClassId(2), 0.25)]),
        mean_class_iou: 0.5,
        frames_evaluated: 2,
    };
    Ok(Fixture {
        name: "eval_two_frame".into(),
        manifest: FixtureManifest {
            description: "Two 1x4 frames scored against ground truth [1, 1, 2, 2].".into(),
            oracle: "Hand counts: frame IoUs (1 + 1/2)/2 and (1/2 + 0)/2 average to 0.5; \
                     class 1 averages 3/4, class 2 averages 1/4."
                .into(),
            args: args(&[
                "evaluate",
                "--detections",
                "{input}/detections",
                "--groundtruth",
                "{input}/groundtruth",
                "--output",
                "{output}",
            ]),
            exit_code: 0,
        },
        inputs,
        expected: BTreeMap::from([
            (
                PathBuf::from("report.json"),
                report.to_json(&vocab).into_bytes(),
            ),
            (
                PathBuf::from("report.txt"),
                report.to_table(&vocab).into_bytes(),
            ),
        ]),
    })
}

/// The shipped fixture set.
pub fn fixtures() -> Result<Vec<Fixture>> {
    Ok(vec![
        static_flip()?,
        translate_window()?,
        frames_zero()?,
        disjoint_threshold()?,
        missing_flow()?,
        eval_two_frame()?,
    ])
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

impl Fixture {
    pub fn write(&self, root: &Path) -> Result<()> {
        let dir = root.join(&self.name);
        let mut manifest =
            serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        manifest.push('\n');
        write_file(&dir.join("fixture.json"), manifest.as_bytes())?;
        for (rel, bytes) in &self.inputs {
            write_file(&dir.join("input").join(rel), bytes)?;
        }
        let expected = dir.join("expected");
        std::fs::create_dir_all(&expected).map_err(|e| Error::io(&expected, e))?;
        for (rel, bytes) in &self.expected {
            write_file(&expected.join(rel), bytes)?;
        }
        Ok(())
    }
}

/// Write every fixture under `root`, one directory each.
pub fn write_fixtures(root: impl AsRef<Path>) -> Result<()> {
    for fx in fixtures()? {
        fx.write(root.as_ref())?;
    }
    Ok(())
}

/// All files under `dir`, keyed by path relative to it.
pub fn read_tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Result<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(base, &path, out)?;
            } else {
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                out.insert(
                    path.strip_prefix(base).expect("under base").to_path_buf(),
                    bytes,
                );
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    if dir.is_dir() {
        walk(dir, dir, &mut out)?;
    }
    Ok(out)
}

/// Unified diff for text, a size note for binary content.
pub fn diff_bytes(name: &str, expected: &[u8], actual: &[u8]) -> String {
    match (std::str::from_utf8(expected), std::str::from_utf8(actual)) {
        (Ok(e), Ok(a)) => similar::TextDiff::from_lines(e, a)
            .unified_diff()
            .context_radius(3)
            .header(&format!("expected/{name}"), &format!("actual/{name}"))
            .to_string(),
        _ => format!(
            "binary files expected/{name} ({} bytes) and actual/{name} ({} bytes) differ\n",
            expected.len(),
            actual.len()
        ),
    }
}

/// Compare two file trees; returns a report of every difference.
pub fn compare_trees(
    expected: &BTreeMap<PathBuf, Vec<u8>>,
    actual: &BTreeMap<PathBuf, Vec<u8>>,
) -> String {
    let mut report = String::new();
    for (path, want) in expected {
        let name = path.display().to_string();
        match actual.get(path) {
            None => report.push_str(&format!("missing output file {name}\n")),
            Some(got) if got != want => report.push_str(&diff_bytes(&name, want, got)),
            Some(_) => {}
        }
    }
    for path in actual.keys().filter(|p| !expected.contains_key(*p)) {
        report.push_str(&format!("unexpected output file {}\n", path.display()));
    }
    report
}

/// Run one on-disk fixture directory.
pub fn verify_fixture(dir: &Path) -> Result<FixtureOutcome> {
    let manifest_path = dir.join("fixture.json");
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: FixtureManifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(e.to_string()).in_file(&manifest_path))?;
    let scratch = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let output = scratch.path().join("out");
    let input = dir.join("input");
    let argv: Vec<String> = std::iter::once("maskvote".to_string())
        .chain(manifest.args.iter().map(|a| {
            a.replace("{input}", &input.to_string_lossy())
                .replace("{output}", &output.to_string_lossy())
        }))
        .collect();
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = crate::cli::run(argv, &mut stdout, &mut stderr);
    let mut report = String::new();
    if code != manifest.exit_code {
        report.push_str(&format!(
            "exit code {code}, expected {}\nstderr:\n{}",
            manifest.exit_code,
            String::from_utf8_lossy(&stderr)
        ));
    }
    report.push_str(&compare_trees(
        &read_tree(&dir.join("expected"))?,
        &read_tree(&output)?,
    ));
    Ok(FixtureOutcome {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        passed: report.is_empty(),
        report,
    })
}

/// Run every fixture directory under `root`; outcomes are in name order.
pub fn verify_fixtures(root: impl AsRef<Path>) -> Result<Vec<FixtureOutcome>> {
    let root = root.as_ref();
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("fixture.json").is_file())
        .collect();
    dirs.sort();
    dirs.par_iter().map(|d| verify_fixture(d)).collect()
}
