//! Batch front end: `correct`, `evaluate`, `simulate`, `ablate`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error. Independent
//! sequences run on a worker pool capped by `--threads` or `ISINET_THREADS`;
//! outputs do not depend on the pool size.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::ablation::{ablate, evaluate_sequences, AblationGrid, SequenceInput};
use crate::detections::Sequence;
use crate::error::Error;
use crate::flow::FlowField;
use crate::grid::LabelMap;
use crate::ingest::{read_detections, read_flo, read_label_map, write_detections};
use crate::synth::{flow_file_name, generate, label_file_name, write_dataset, SimulationConfig};
use crate::temporal::{correct_sequence, AssignmentStrategy, TemporalConfig};
use crate::vocab::ClassVocabulary;

pub const THREADS_ENV: &str = "ISINET_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "maskvote",
    version,
    about = "Temporal class consistency for instance masks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-label detections using flow-warped predecessors.
    Correct(CorrectArgs),
    /// Score detections against semantic ground-truth label maps.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset from a JSON config.
    Simulate(SimulateArgs),
    /// Sweep threshold, window and strategy; print a per-class table.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Profile {
    /// U = 0, 2017 vocabulary.
    Endovis2017,
    /// U = 0.5, 2018 vocabulary.
    Endovis2018,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Directory of per-sequence detection files (`*.json`).
    #[arg(long)]
    pub detections: PathBuf,
    /// `endovis2017`, `endovis2018`, or a vocabulary file.
    #[arg(long)]
    pub vocab: Option<String>,
    /// Candidates need a score strictly above this.
    #[arg(long, default_value_t = crate::ingest::DEFAULT_SCORE_THRESHOLD)]
    pub score_threshold: f64,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    /// Worker threads; overrides ISINET_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TemporalArgs {
    /// Number of previous frames in the window.
    #[arg(long, default_value_t = 6)]
    pub frames: usize,
    /// Matches need IoU strictly above this.
    #[arg(long)]
    pub iou_threshold: Option<f64>,
    #[arg(long, default_value = "weighted_mode", value_parser = parse_strategy)]
    pub assignment: AssignmentStrategy,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub temporal: TemporalArgs,
    /// Directory holding `<sequence>/<frame>.flo` backward flows.
    #[arg(long)]
    pub flows: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory holding `<sequence>/<frame>.pgm` label maps.
    #[arg(long)]
    pub groundtruth: PathBuf,
    /// Directory for `report.json` and `report.txt`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub flows: PathBuf,
    #[arg(long)]
    pub groundtruth: PathBuf,
    /// Directory for `ablation.json` and `ablation.txt`.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5])]
    pub thresholds: Vec<f64>,
    #[arg(long = "window-sizes", value_delimiter = ',', default_values_t = [3, 5, 7])]
    pub windows: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_strategy,
          default_values = ["max", "weighted_mode"])]
    pub strategies: Vec<AssignmentStrategy>,
}

fn parse_strategy(s: &str) -> Result<AssignmentStrategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure of one command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(m),
            e => CliError::Data(e),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Everything a run reads and writes, checked before any work starts.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub detections: PathBuf,
    pub flows: Option<PathBuf>,
    pub groundtruth: Option<PathBuf>,
    pub vocabulary: ClassVocabulary,
    pub temporal: TemporalConfig,
    pub score_threshold: f64,
    pub output: PathBuf,
    pub threads: Option<usize>,
}

impl RunManifest {
    fn from_common(
        common: &CommonArgs,
        temporal: Option<&TemporalArgs>,
        flows: Option<&Path>,
        groundtruth: Option<&Path>,
        output: &Path,
    ) -> CliResult<Self> {
        let profile = common.profile.unwrap_or(Profile::Endovis2017);
        let vocab_name = common.vocab.clone().unwrap_or_else(|| {
            match profile {
                Profile::Endovis2017 => "endovis2017",
                Profile::Endovis2018 => "endovis2018",
            }
            .to_string()
        });
        let vocabulary = ClassVocabulary::resolve(&vocab_name).map_err(|e| match e {
            Error::Io { .. } => CliError::Usage(format!("vocabulary {e}")),
            e => CliError::Data(e),
        })?;
        let base = match profile {
            Profile::Endovis2017 => TemporalConfig::endovis2017(),
            Profile::Endovis2018 => TemporalConfig::endovis2018(),
        };
        let temporal = match temporal {
            Some(t) => TemporalConfig::new(
                t.frames,
                t.iou_threshold.unwrap_or(base.iou_threshold),
                t.assignment,
            )?,
            None => base,
        };
        if !common.score_threshold.is_finite() {
            return Err(CliError::Usage("score threshold must be finite".into()));
        }
        if common.threads == Some(0) {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        let manifest = RunManifest {
            detections: common.detections.clone(),
            flows: flows.map(Path::to_path_buf),
            groundtruth: groundtruth.map(Path::to_path_buf),
            vocabulary,
            temporal,
            score_threshold: common.score_threshold,
            output: output.to_path_buf(),
            threads: common.threads,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> CliResult<()> {
        let dirs = std::iter::once(("detections", Some(&self.detections))).chain([
            ("flows", self.flows.as_ref()),
            ("groundtruth", self.groundtruth.as_ref()),
        ]);
        for (what, dir) in dirs {
            if let Some(dir) = dir {
                if !dir.is_dir() {
                    return Err(CliError::Usage(format!(
                        "{what} directory {} does not exist",
                        dir.display()
                    )));
                }
            }
        }
        Ok(())
    }

    fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let threads = match self.threads {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| {
                        CliError::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer"))
                    })?,
                Err(_) => 0,
            },
        };
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("worker pool: {e}")))
    }

    /// Detection files in name order.
    fn detection_files(&self) -> CliResult<Vec<PathBuf>> {
        let entries = std::fs::read_dir(&self.detections).map_err(|e| {
            CliError::Data(Error::Io {
                path: self.detections.clone(),
                source: e,
            })
        })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::Usage(format!(
                "no detection files (*.json) in {}",
                self.detections.display()
            )));
        }
        Ok(files)
    }

    fn read_sequences(&self, pool: &rayon::ThreadPool) -> CliResult<Vec<Sequence>> {
        let files = self.detection_files()?;
        let seqs: Vec<Sequence> = pool
            .install(|| {
                files
                    .par_iter()
                    .map(|p| {
                        let s = read_detections(p, &self.vocabulary, self.score_threshold)?;
                        s.validate().map_err(|e| e.in_file(p))?;
                        Ok(s)
                    })
                    .collect::<crate::Result<Vec<_>>>()
            })
            .map_err(CliError::Data)?;
        let mut names: Vec<&str> = seqs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(CliError::Usage(format!(
                "sequence {:?} appears in two files",
                w[0]
            )));
        }
        Ok(seqs)
    }
}

fn read_flows(dir: &Path, seq: &Sequence) -> crate::Result<Vec<FlowField>> {
    let seq_dir = dir.join(&seq.name);
    seq.frames
        .iter()
        .skip(1)
        .map(|f| {
            let path = seq_dir.join(flow_file_name(f.frame_index));
            let flow = read_flo(&path)?;
            if flow.dims() != (seq.height, seq.width) {
                return Err(Error::Shape(format!(
                    "flow is {}x{}, sequence {} is {}x{}",
                    flow.height(),
                    flow.width(),
                    seq.name,
                    seq.height,
                    seq.width
                ))
                .in_file(&path));
            }
            Ok(flow)
        })
        .collect()
}

fn read_labels(
    dir: &Path,
    seq: &Sequence,
    vocab: &ClassVocabulary,
) -> crate::Result<Vec<LabelMap>> {
    let seq_dir = dir.join(&seq.name);
    seq.frames
        .iter()
        .map(|f| {
            let path = seq_dir.join(label_file_name(f.frame_index));
            let labels = read_label_map(&path, vocab)?;
            if labels.dims() != (seq.height, seq.width) {
                return Err(Error::Shape(format!(
                    "label map is {}x{}, sequence {} is {}x{}",
                    labels.height(),
                    labels.width(),
                    seq.name,
                    seq.height,
                    seq.width
                ))
                .in_file(&path));
            }
            Ok(labels)
        })
        .collect()
}

fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| {
        CliError::Data(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

pub fn cmd_correct(args: &CorrectArgs) -> CliResult<Vec<PathBuf>> {
    let m = RunManifest::from_common(
        &args.common,
        Some(&args.temporal),
        Some(&args.flows),
        None,
        &args.output,
    )?;
    let pool = m.pool()?;
    let seqs = m.read_sequences(&pool)?;
    let flow_dir = m.flows.as_deref().expect("correct takes flows");
    let corrected: Vec<Sequence> = pool
        .install(|| {
            seqs.par_iter()
                .map(|s| {
                    let flows = read_flows(flow_dir, s)?;
                    let frames = correct_sequence(&s.frames, &flows, &m.temporal).map_err(|e| {
                        Error::File {
                            path: m.detections.join(format!("{}.json", s.name)),
                            source: Box::new(e),
                        }
                    })?;
                    Ok(Sequence {
                        frames,
                        ..s.clone()
                    })
                })
                .collect::<crate::Result<Vec<_>>>()
        })
        .map_err(CliError::Data)?;
    create_dir(&m.output)?;
    let mut written = Vec::with_capacity(corrected.len());
    for s in &corrected {
        let path = m.output.join(format!("{}.json", s.name));
        write_detections(s, &path).map_err(CliError::Data)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> CliResult<String> {
    let m = RunManifest::from_common(
        &args.common,
        None,
        None,
        Some(&args.groundtruth),
        &args.output,
    )?;
    let pool = m.pool()?;
    let seqs = m.read_sequences(&pool)?;
    let gt_dir = m
        .groundtruth
        .as_deref()
        .expect("evaluate takes ground truth");
    let labels: Vec<Vec<LabelMap>> = pool
        .install(|| {
            seqs.par_iter()
                .map(|s| read_labels(gt_dir, s, &m.vocabulary))
                .collect::<crate::Result<Vec<_>>>()
        })
        .map_err(CliError::Data)?;
    let pairs: Vec<(&Sequence, &[LabelMap])> = seqs
        .iter()
        .zip(&labels)
        .map(|(s, l)| (s, l.as_slice()))
        .collect();
    let report = evaluate_sequences(&pairs, &m.vocabulary).map_err(CliError::Data)?;
    create_dir(&m.output)?;
    let table = report.to_table(&m.vocabulary);
    write_text(
        &m.output.join("report.json"),
        &report.to_json(&m.vocabulary),
    )?;
    write_text(&m.output.join("report.txt"), &table)?;
    Ok(table)
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.config.display())))?;
    let config: SimulationConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Data(Error::Format(format!("simulation config: {e}")).in_file(&args.config))
    })?;
    let sequences = config
        .sequences
        .iter()
        .map(|c| generate(c).map_err(|e| e.in_file(&args.config)))
        .collect::<crate::Result<Vec<_>>>()
        .map_err(|e| match e.root() {
            Error::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e),
        })?;
    let mut names: Vec<&str> = sequences
        .iter()
        .map(|s| s.predictions.name.as_str())
        .collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(CliError::Usage(format!(
            "sequence name {:?} used twice",
            w[0]
        )));
    }
    write_dataset(&args.output, &sequences).map_err(CliError::Data)
}

pub fn cmd_ablate(args: &AblateArgs) -> CliResult<String> {
    let m = RunManifest::from_common(
        &args.common,
        None,
        Some(&args.flows),
        Some(&args.groundtruth),
        &args.output,
    )?;
    if args.thresholds.is_empty() || args.windows.is_empty() || args.strategies.is_empty() {
        return Err(CliError::Usage("ablation grid has an empty axis".into()));
    }
    let grid = AblationGrid {
        thresholds: args.thresholds.clone(),
        windows: args.windows.clone(),
        strategies: args.strategies.clone(),
    };
    grid.cells()?;
    let pool = m.pool()?;
    let seqs = m.read_sequences(&pool)?;
    let (flow_dir, gt_dir) = (
        m.flows.as_deref().unwrap(),
        m.groundtruth.as_deref().unwrap(),
    );
    let loaded: Vec<(Vec<FlowField>, Vec<LabelMap>)> = pool
        .install(|| {
            seqs.par_iter()
                .map(|s| {
                    Ok((
                        read_flows(flow_dir, s)?,
                        read_labels(gt_dir, s, &m.vocabulary)?,
                    ))
                })
                .collect::<crate::Result<Vec<_>>>()
        })
        .map_err(CliError::Data)?;
    let inputs: Vec<SequenceInput<'_>> = seqs
        .iter()
        .zip(&loaded)
        .map(|(s, (f, l))| SequenceInput {
            predictions: s,
            flows: f,
            groundtruth: l,
        })
        .collect();
    let table = pool
        .install(|| ablate(&inputs, &grid, &m.vocabulary))
        .map_err(CliError::Data)?;
    create_dir(&m.output)?;
    let text = table.to_text();
    write_text(&m.output.join("ablation.json"), &table.to_json())?;
    write_text(&m.output.join("ablation.txt"), &text)?;
    Ok(text)
}

/// Parse arguments and run one command. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(stdout, "{rendered}")
            } else {
                write!(stderr, "{rendered}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Correct(a) => cmd_correct(a).map(|files| {
            let _ = writeln!(
                stdout,
                "wrote {} corrected sequence(s) to {}",
                files.len(),
                a.output.display()
            );
        }),
        Command::Evaluate(a) => cmd_evaluate(a).map(|t| {
            let _ = write!(stdout, "{t}");
        }),
        Command::Simulate(a) => cmd_simulate(a).map(|()| {
            let _ = writeln!(stdout, "wrote dataset to {}", a.output.display());
        }),
        Command::Ablate(a) => cmd_ablate(a).map(|t| {
            let _ = write!(stdout, "{t}");
        }),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "maskvote: {e}");
            e.exit_code()
        }
    }
}
