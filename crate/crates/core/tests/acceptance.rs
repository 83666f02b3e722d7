//! Acceptance suite. Each criterion prints one `[PASS]`/`[FAIL]` line; the
//! process fails if any criterion fails. Tolerances and budgets are pinned
//! below. Reference implementations here are written independently of the
//! library's code paths.

use std::path::Path;
use std::time::{Duration, Instant};

use maskvote::ablation::evaluate_sequences;
use maskvote::ingest::{decode_flo, encode_flo, read_flo, write_flo};
use maskvote::metrics;
use maskvote::synth::{generate, write_dataset, SynthConfig, SyntheticSequence};
use maskvote::{
    ablate, assign_class, correct_sequence, evaluate, iou, warp, AblationGrid, AssignmentStrategy,
    BinaryMask, ClassId, ClassVocabulary, FlowField, Grid, InstanceWindow, LabelMap, Sequence,
    SequenceInput, TemporalConfig, WindowEntry,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IOU_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-9;
const SUITE_SEED: u64 = 2017;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    check(took < budget, || {
        format!("took {took:.2?}, budget {budget:?}")
    })?;
    Ok(took)
}

fn random_grid(rng: &mut ChaCha8Rng, h: u32, w: u32) -> Grid<bool> {
    let density: f64 = rng.gen_range(0.0..=1.0);
    Grid::from_fn(h, w, |_, _| rng.gen_bool(density)).unwrap()
}

fn rle_iou_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let (h, w) = (rng.gen_range(1..=64), rng.gen_range(1..=64));
        let (ga, gb) = (random_grid(&mut rng, h, w), random_grid(&mut rng, h, w));
        let (a, b) = (BinaryMask::encode(&ga), BinaryMask::encode(&gb));
        check(a.decode() == ga && b.decode() == gb, || {
            format!("pair {i}: decode differs")
        })?;
        let again = BinaryMask::from_counts(h, w, a.counts()).map_err(|e| e.to_string())?;
        check(again == a, || {
            format!("pair {i}: counts round trip differs")
        })?;
        let (mut inter, mut union) = (0u64, 0u64);
        for (&x, &y) in ga.as_slice().iter().zip(gb.as_slice()) {
            inter += (x && y) as u64;
            union += (x || y) as u64;
        }
        let want = if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        };
        let got = iou(&a, &b).map_err(|e| e.to_string())?;
        worst = worst.max((got - want).abs());
        check((got - want).abs() <= IOU_TOL, || {
            format!("pair {i}: iou {got} vs {want}")
        })?;
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!(
        "1000 pairs, max |err| {worst:e} <= {IOU_TOL:e}, round trips exact, {took:.2?}"
    ))
}

fn warp_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..200 {
        let (h, w) = (rng.gen_range(1..=48), rng.gen_range(1..=48));
        let g = random_grid(&mut rng, h, w);
        let (dx, dy) = (rng.gen_range(-8i64..=8), rng.gen_range(-8i64..=8));
        let flow = FlowField::constant(h, w, dx as f32, dy as f32).unwrap();
        let got = warp(&BinaryMask::encode(&g), &flow)
            .map_err(|e| e.to_string())?
            .decode();
        // output (r, c) reads input (r + dy, c + dx); outside reads empty
        let want = Grid::from_fn(h, w, |r, c| {
            let (sr, sc) = (r as i64 + dy, c as i64 + dx);
            sr >= 0 && sc >= 0 && sr < h as i64 && sc < w as i64 && g.get(sr as u32, sc as u32)
        })
        .unwrap();
        let diff = got
            .as_slice()
            .iter()
            .zip(want.as_slice())
            .filter(|(a, b)| a != b)
            .count();
        check(diff == 0, || {
            format!("mask {i} ({h}x{w}, shift {dx},{dy}): {diff} pixels differ")
        })?;
    }
    let took = within(Duration::from_secs(5), start)?;
    Ok(format!("200 masks, 0 pixel differences, {took:.2?}"))
}

fn flow_format() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (h, w) = (17, 23);
    let n = (h * w) as usize;
    let mut u: Vec<f32> = (0..n).map(|_| rng.gen_range(-40.0..40.0)).collect();
    let v: Vec<f32> = (0..n).map(|_| rng.gen_range(-40.0..40.0)).collect();
    u[0] = -0.0;
    u[1] = f32::MIN_POSITIVE / 2.0; // subnormal
    let flow = FlowField::new(h, w, u, v).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("f.flo");
    write_flo(&flow, &path).map_err(|e| e.to_string())?;
    let back = read_flo(&path).map_err(|e| e.to_string())?;
    let bits =
        |f: &FlowField| -> Vec<u32> { f.u().iter().chain(f.v()).map(|x| x.to_bits()).collect() };
    check(
        back.dims() == flow.dims() && bits(&back) == bits(&flow),
        || "round trip not bit-exact".into(),
    )?;
    let bytes = encode_flo(&flow);
    check(std::fs::read(&path).unwrap() == bytes, || {
        "file differs from encoding".into()
    })?;

    let mut bad_magic = bytes.clone();
    bad_magic[0] ^= 0xff;
    let e = decode_flo(&bad_magic)
        .err()
        .ok_or("corrupt magic accepted")?;
    check(e.is_format(), || {
        format!("corrupt magic: not a format error: {e}")
    })?;
    for cut in [0, 3, 8, 11, bytes.len() - 1] {
        let e = decode_flo(&bytes[..cut])
            .err()
            .ok_or(format!("truncation to {cut} accepted"))?;
        check(e.is_format(), || {
            format!("truncation to {cut}: not a format error: {e}")
        })?;
    }
    Ok(format!(
        "{h}x{w} field bit-exact; bad magic and 5 truncations → format errors"
    ))
}

/// Brute-force vote with scores in twentieths: exact integer sums, ties
/// resolved by the latest tied entry.
fn oracle_vote(classes: &[u8], twentieths: &[u32]) -> u8 {
    let mut sums = [0u32; 4];
    for (&c, &s) in classes.iter().zip(twentieths) {
        sums[c as usize] += s;
    }
    let present = |c: usize| classes.contains(&(c as u8));
    let best = (1..4)
        .filter(|&c| present(c))
        .map(|c| sums[c])
        .max()
        .unwrap();
    let latest = (0..classes.len())
        .rev()
        .find(|&i| sums[classes[i] as usize] == best)
        .unwrap();
    classes[latest]
}

fn window_of(classes: &[u8], twentieths: &[u32]) -> InstanceWindow {
    let mut all: Vec<WindowEntry> = classes
        .iter()
        .zip(twentieths)
        .enumerate()
        .map(|(t, (&c, &s))| WindowEntry {
            frame_index: t as u32,
            class_id: ClassId(c),
            score: f64::from(s) / 20.0,
        })
        .collect();
    let current = all.pop().unwrap();
    InstanceWindow {
        candidate_index: 0,
        current,
        predecessors: all,
    }
}

/// Every window of `len` entries over classes 1..=3 and the given scores.
fn exhaust(len: usize, scores: &[u32]) -> Result<u64, String> {
    let symbols = 3 * scores.len();
    let total = symbols.pow(len as u32);
    let (mut classes, mut tw) = (vec![0u8; len], vec![0u32; len]);
    for code in 0..total {
        let mut k = code;
        for i in 0..len {
            let s = k % symbols;
            k /= symbols;
            classes[i] = 1 + (s % 3) as u8;
            tw[i] = scores[s / 3];
        }
        let window = window_of(&classes, &tw);
        let got = assign_class(&window, AssignmentStrategy::WeightedMode).0;
        let want = oracle_vote(&classes, &tw);
        if got != want {
            return Err(format!(
                "window {classes:?} x {tw:?}/20: got {got}, oracle {want}"
            ));
        }
    }
    Ok(total as u64)
}

fn weighted_mode_exhaustive() -> Outcome {
    let start = Instant::now();
    let full: Vec<u32> = (0..=20).collect();
    let kept: Vec<u32> = (16..=20).collect();
    let mut count = 0;
    for len in 1..=4 {
        count += exhaust(len, &full)?;
    }
    count += exhaust(5, &kept)?;
    let took = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "{count} windows agree (len 1-4 over scores 0.00..1.00, len 5 over 0.80..1.00), {took:.2?}"
    ))
}

fn suite() -> Vec<SyntheticSequence> {
    SynthConfig::benchmark_suite(SUITE_SEED)
        .iter()
        .map(|c| generate(c).unwrap())
        .collect()
}

/// Fraction of object-frames whose predicted class equals the truth.
fn class_accuracy(preds: &[Sequence], truth: &[Sequence]) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, t) in preds.iter().zip(truth) {
        for (pf, tf) in p.frames.iter().zip(&t.frames) {
            for (pc, tc) in pf.candidates.iter().zip(&tf.candidates) {
                assert_eq!(pc.mask, tc.mask);
                hit += (pc.class_id == tc.class_id) as usize;
                total += 1;
            }
        }
    }
    hit as f64 / total as f64
}

fn majority_recovery() -> Outcome {
    let start = Instant::now();
    let data = suite();
    let vocab = ClassVocabulary::endovis2017();
    let config = TemporalConfig::new(6, 0.0, AssignmentStrategy::WeightedMode).unwrap();
    let fixed: Vec<Sequence> = data
        .iter()
        .map(|d| Sequence {
            frames: correct_sequence(&d.predictions.frames, &d.flows, &config).unwrap(),
            ..d.predictions.clone()
        })
        .collect();
    let raw: Vec<Sequence> = data.iter().map(|d| d.predictions.clone()).collect();
    let truth: Vec<Sequence> = data.iter().map(|d| d.groundtruth.clone()).collect();
    let (before, after) = (class_accuracy(&raw, &truth), class_accuracy(&fixed, &truth));
    let eval = |seqs: &[Sequence]| {
        let pairs: Vec<(&Sequence, &[LabelMap])> = seqs
            .iter()
            .zip(&data)
            .map(|(s, d)| (s, d.label_maps.as_slice()))
            .collect();
        evaluate_sequences(&pairs, &vocab).unwrap()
    };
    let (m_before, m_after) = (eval(&raw).mean_class_iou, eval(&fixed).mean_class_iou);
    let detail =
        format!("accuracy {before:.4} -> {after:.4}, mean cIoU {m_before:.4} -> {m_after:.4}");
    check(after >= 0.95, || {
        format!("{detail}: corrected accuracy below 0.95")
    })?;
    check((before - 0.70).abs() <= 0.02, || {
        format!("{detail}: uncorrected outside 0.70 ± 0.02")
    })?;
    check(m_after > m_before, || {
        format!("{detail}: mean cIoU did not improve")
    })?;
    let again: Vec<Sequence> = data
        .iter()
        .map(|d| Sequence {
            frames: correct_sequence(&d.predictions.frames, &d.flows, &config).unwrap(),
            ..d.predictions.clone()
        })
        .collect();
    check(again == fixed && suite() == data, || "rerun differs".into())?;
    let took = within(Duration::from_secs(60), start)?;
    Ok(format!("{detail}, {took:.2?}"))
}

struct Counts {
    inter: [u64; 8],
    pred: [u64; 8],
    gt: [u64; 8],
}

fn brute_counts(p: &LabelMap, g: &LabelMap) -> Counts {
    let mut c = Counts {
        inter: [0; 8],
        pred: [0; 8],
        gt: [0; 8],
    };
    for r in 0..p.height() {
        for col in 0..p.width() {
            let (a, b) = (p.get(r, col) as usize, g.get(r, col) as usize);
            c.pred[a] += 1;
            c.gt[b] += 1;
            if a == b {
                c.inter[a] += 1;
            }
        }
    }
    c
}

fn brute_metrics(pairs: &[(&LabelMap, &LabelMap)]) -> (f64, f64, f64) {
    let iou = |c: &Counts, k: usize| {
        let u = c.pred[k] + c.gt[k] - c.inter[k];
        (u > 0).then(|| c.inter[k] as f64 / u as f64)
    };
    let (mut ch, mut ch_n, mut e1, mut e1_n) = (0.0, 0, 0.0, 0);
    let mut per_class = vec![Vec::new(); 8];
    for (p, g) in pairs {
        let c = brute_counts(p, g);
        let defined: Vec<(usize, f64)> =
            (1..8).filter_map(|k| iou(&c, k).map(|v| (k, v))).collect();
        if !defined.is_empty() {
            e1 += defined.iter().map(|x| x.1).sum::<f64>() / defined.len() as f64;
            e1_n += 1;
        }
        let in_gt: Vec<f64> = defined
            .iter()
            .filter(|x| c.gt[x.0] > 0)
            .map(|x| x.1)
            .collect();
        if !in_gt.is_empty() {
            ch += in_gt.iter().sum::<f64>() / in_gt.len() as f64;
            ch_n += 1;
        }
        for (k, v) in defined {
            per_class[k].push(v);
        }
    }
    let means: Vec<f64> = per_class
        .iter()
        .filter(|v| !v.is_empty())
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    (
        ch / ch_n as f64,
        e1 / e1_n as f64,
        means.iter().sum::<f64>() / means.len() as f64,
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let vocab = ClassVocabulary::endovis2017();
    let mut grids = Vec::new();
    for _ in 0..500 {
        // a few classes per pair, some frames sparse, so absences are common
        let pool: Vec<u8> = (0..rng.gen_range(1..=4))
            .map(|_| rng.gen_range(0..=7))
            .collect();
        let bg: f64 = rng.gen_range(0.0..1.0);
        let draw = |rng: &mut ChaCha8Rng| -> LabelMap {
            Grid::from_fn(16, 16, |_, _| {
                if rng.gen_bool(bg) {
                    0
                } else {
                    pool[rng.gen_range(0..pool.len())]
                }
            })
            .unwrap()
        };
        let p = draw(&mut rng);
        let g = draw(&mut rng);
        grids.push((p, g));
    }
    let refs: Vec<(&LabelMap, &LabelMap)> = grids.iter().map(|(p, g)| (p, g)).collect();
    let mut worst = 0.0f64;
    let mut compared = 0;
    let mut sets: Vec<&[(&LabelMap, &LabelMap)]> = refs.chunks(1).collect();
    sets.push(&refs);
    for set in sets {
        let (ch, e1, mc) = brute_metrics(set);
        let classes: Vec<ClassId> = vocab.ids().collect();
        for (name, got, want) in [
            ("challenge", metrics::challenge_iou(set, &classes), ch),
            ("frame", metrics::frame_iou(set, &classes), e1),
            (
                "mean class",
                metrics::mean_class_iou(set, &classes).map(|m| m.1),
                mc,
            ),
        ] {
            match got {
                Ok(got) => {
                    worst = worst.max((got - want).abs());
                    check((got - want).abs() <= METRIC_TOL, || {
                        format!("{name}: {got} vs oracle {want}")
                    })?;
                }
                Err(e) if e.is_no_data() => {
                    check(want.is_nan(), || {
                        format!("{name}: no-data but oracle has {want}")
                    })?;
                }
                Err(e) => return Err(e.to_string()),
            }
        }
        compared += 1;
    }
    let identity: Vec<(&LabelMap, &LabelMap)> = grids.iter().map(|(_, g)| (g, g)).collect();
    let r = evaluate(&identity, &vocab).map_err(|e| e.to_string())?;
    check(
        r.challenge_iou == 1.0 && r.frame_iou == 1.0 && r.mean_class_iou == 1.0,
        || format!("identity scores {r:?}"),
    )?;
    Ok(format!(
        "{compared} evaluations (500 single pairs + pooled) within {METRIC_TOL:e}, max |err| {worst:e}; identity = 1.0"
    ))
}

fn ablation_shape() -> Outcome {
    let data = suite();
    let vocab = ClassVocabulary::endovis2017();
    let inputs: Vec<SequenceInput<'_>> = data
        .iter()
        .map(|d| SequenceInput {
            predictions: &d.predictions,
            flows: &d.flows,
            groundtruth: &d.label_maps,
        })
        .collect();
    let table = ablate(&inputs, &AblationGrid::default(), &vocab).map_err(|e| e.to_string())?;
    check(table.rows.len() == 12, || {
        format!("{} rows", table.rows.len())
    })?;
    let header = table.header();
    let mut want = vec!["Threshold", "Number of frames", "Assignment Strategy"];
    want.extend(vocab.ids().map(|c| vocab.name(c).unwrap()));
    want.push("mean class IoU");
    check(header == want, || format!("header {header:?}"))?;
    let text = table.to_text();
    let lines: Vec<&str> = text.lines().collect();
    check(lines.len() == 14, || {
        format!("text table has {} lines", lines.len())
    })?;
    for line in lines.iter().skip(2) {
        let cells = line.trim_matches('|').split('|').count();
        check(cells == want.len(), || {
            format!("row has {cells} cells: {line}")
        })?;
    }
    let mut seen = Vec::new();
    for r in &table.rows {
        seen.push((
            r.config.iou_threshold.to_bits(),
            r.config.window,
            r.config.strategy.as_str(),
        ));
    }
    seen.sort();
    seen.dedup();
    check(seen.len() == 12, || "grid cells repeat".into())?;

    let control = AblationGrid {
        thresholds: vec![0.0, 0.5],
        windows: vec![0],
        strategies: vec![AssignmentStrategy::Max, AssignmentStrategy::WeightedMode],
    };
    let identity = ablate(&inputs, &control, &vocab).map_err(|e| e.to_string())?;
    for r in &identity.rows {
        check(r.report == identity.baseline, || {
            format!("f=0 row differs: {:?}", r.config)
        })?;
    }
    check(identity.baseline == table.baseline, || {
        "baselines differ".into()
    })?;
    Ok(format!(
        "12 rows x {} columns; 4 f=0 control rows equal the uncorrected evaluation",
        want.len()
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = maskvote::cli::run(
        std::iter::once("maskvote").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    check(code == 0, || {
        format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&err))
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    write_dataset(root.join("data"), &suite()).map_err(|e| e.to_string())?;
    let s = |p: &Path| p.to_string_lossy().into_owned();
    let data = root.join("data");
    let mut trees = Vec::new();
    for (run, threads) in [(0, "1"), (1, "4"), (2, "1"), (3, "4")] {
        let out = root.join(format!("run{run}"));
        let (det, ev) = (out.join("corrected"), out.join("report"));
        let mut correct = vec![
            "correct".to_string(),
            "--detections".into(),
            s(&data.join("detections")),
            "--flows".into(),
            s(&data.join("flow")),
            "--output".into(),
            s(&det),
        ];
        let mut evaluate = vec![
            "evaluate".to_string(),
            "--detections".into(),
            s(&det),
            "--groundtruth".into(),
            s(&data.join("labels")),
            "--output".into(),
            s(&ev),
        ];
        if run < 2 {
            for a in [&mut correct, &mut evaluate] {
                a.extend(["--threads".to_string(), threads.to_string()]);
            }
        } else {
            std::env::set_var("ISINET_THREADS", threads);
        }
        run_cli(&correct.iter().map(String::as_str).collect::<Vec<_>>())?;
        run_cli(&evaluate.iter().map(String::as_str).collect::<Vec<_>>())?;
        std::env::remove_var("ISINET_THREADS");
        trees.push(maskvote::fixtures::read_tree(&out).map_err(|e| e.to_string())?);
    }
    let files = trees[0].len();
    check(files == 12, || {
        format!("{files} output files, expected 10 sequences + 2 reports")
    })?;
    for (i, t) in trees.iter().enumerate().skip(1) {
        let diff = maskvote::fixtures::compare_trees(&trees[0], t);
        check(diff.is_empty(), || {
            format!("run {i} differs from run 0:\n{diff}")
        })?;
    }
    Ok(format!(
        "4 runs (1/4 threads via flag and ISINET_THREADS), {files} files byte-identical"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("rle-iou-oracle", rle_iou_oracle),
        ("warp-equivalence", warp_equivalence),
        ("flow-format", flow_format),
        ("weighted-mode-exhaustive", weighted_mode_exhaustive),
        ("majority-recovery", majority_recovery),
        ("metrics-oracle", metrics_oracle),
        ("ablation-shape", ablation_shape),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("[PASS] {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("[FAIL] {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("[FAIL] {name}: panicked");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
