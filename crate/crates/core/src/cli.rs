//! Command-line pipeline: corpus generation, training, detection, IoU
//! evaluation, and the SWD vs. fast-path timing benchmark.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::color::{ImageBuffer, BT601};
use crate::dataset::{
    self, diff_mask, extract_patches, save_corpus, synthesize_forgery, GroundTruthMask,
    PatchRecord,
};
use crate::error::{Error, Result};
use crate::localize::{self, fast_scnn, swd, ProbabilityMap};
use crate::model::{self, init_params, load_params, save_params, ScnnParams, TrainConfig};
use crate::pnm;
use crate::postproc::{
    self, components_to_boxes, corpus_accuracy, evaluate, format_result_line, median_filter,
    threshold, BoundingBox, ResultLine,
};
use crate::rng::{derive_seed, Pcg32};

/// Image sizes exercised by the benchmark.
pub const BENCH_SIZES: [usize; 3] = [128, 256, 384];
pub const DEFAULT_BENCH_REPS: usize = 3;

const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Parser, Debug)]
#[command(name = "forgescan", version, about = "Boundary-based image forgery localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic forgery corpus (image pairs, masks, manifest)
    Gen(GenArgs),
    /// Extract patches from a corpus and train the network
    Train(TrainArgs),
    /// Localize forged regions in one image
    Detect(DetectArgs),
    /// Score detection against a corpus' ground-truth masks
    Eval(EvalArgs),
    /// Time the sliding-window and shared-feature back ends
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Swd,
    Fast,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory for images, masks and the manifest
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of tampered/original pairs
    #[arg(long, default_value_t = dataset::DEFAULT_CORPUS_COUNT)]
    pub count: usize,
    /// Square image side in pixels (minimum 128)
    #[arg(long, default_value_t = dataset::DEFAULT_IMAGE_SIZE)]
    pub size: usize,
    /// Chroma offset applied to pasted regions
    #[arg(long, default_value_t = dataset::DEFAULT_CHROMA_SHIFT)]
    pub chroma_shift: f32,
    /// Box-blur radius for the splice boundary band (0 disables)
    #[arg(long, default_value_t = dataset::DEFAULT_BLUR_RADIUS)]
    pub blur: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Corpus directory produced by `gen`
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output directory for weights, metrics and patch sets
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = model::DEFAULT_MAX_EPOCHS)]
    pub epochs: usize,
    #[arg(long, default_value_t = model::DEFAULT_LEARNING_RATE)]
    pub lr: f32,
    #[arg(long, default_value_t = model::DEFAULT_BATCH_SIZE)]
    pub batch: usize,
    #[arg(long, default_value_t = model::DEFAULT_MOMENTUM)]
    pub momentum: f32,
    #[arg(long, default_value_t = model::DEFAULT_DROPOUT_RATE)]
    pub dropout: f32,
    /// Cap per patch class before splitting
    #[arg(long, default_value_t = dataset::DEFAULT_MAX_PER_CLASS)]
    pub cap: usize,
    /// Validation fraction of each class
    #[arg(long, default_value_t = dataset::DEFAULT_VAL_FRACTION)]
    pub val_frac: f64,
    /// Mask-derivation threshold on per-channel differences
    #[arg(long, default_value_t = dataset::DEFAULT_DIFF_TAU)]
    pub tau: f32,
}

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// SCNW weight file
    #[arg(long)]
    pub weights: PathBuf,
    /// Input image (binary PPM)
    #[arg(long)]
    pub image: PathBuf,
    /// Output directory for map, binary map, boxes and overlay
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Backend::Fast)]
    pub backend: Backend,
    #[arg(long, default_value_t = localize::DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = postproc::DEFAULT_THRESHOLD)]
    pub threshold: f32,
    #[arg(long, default_value_t = postproc::DEFAULT_MEDIAN_K)]
    pub median_k: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Corpus directory with tampered images and masks
    #[arg(long)]
    pub corpus: PathBuf,
    /// SCNW weight file
    #[arg(long)]
    pub weights: PathBuf,
    /// Optional output directory for results.txt
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Backend::Fast)]
    pub backend: Backend,
    #[arg(long, default_value_t = localize::DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = postproc::DEFAULT_THRESHOLD)]
    pub threshold: f32,
    #[arg(long, default_value_t = postproc::DEFAULT_MEDIAN_K)]
    pub median_k: usize,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// SCNW weight file
    #[arg(long)]
    pub weights: PathBuf,
    /// Optional output directory for bench.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for the deterministic benchmark images
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Repetitions per image size (median is reported)
    #[arg(long, default_value_t = DEFAULT_BENCH_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = localize::DEFAULT_STRIDE)]
    pub stride: usize,
}

// ---------------------------------------------------------------------------
// Corpus layout on disk
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub id: u32,
    pub original: PathBuf,
    pub tampered: PathBuf,
    pub mask: PathBuf,
}

fn image_names(id: u32) -> (String, String, String) {
    (
        format!("img_{id:03}_orig.ppm"),
        format!("img_{id:03}_tamp.ppm"),
        format!("img_{id:03}_mask.pgm"),
    )
}

pub fn read_manifest(dir: &Path) -> Result<Vec<CorpusEntry>> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(e, &path))?;
    let mut entries = Vec::new();
    for line in text.lines() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(Error::format(format!(
                "manifest line needs 7 fields, got {}: {line:?}",
                fields.len()
            )));
        }
        let id: u32 = fields[0]
            .parse()
            .map_err(|_| Error::format(format!("bad image id {:?}", fields[0])))?;
        entries.push(CorpusEntry {
            id,
            original: dir.join(fields[4]),
            tampered: dir.join(fields[5]),
            mask: dir.join(fields[6]),
        });
    }
    Ok(entries)
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct GenSummary {
    pub count: usize,
    pub out: PathBuf,
}

pub fn cmd_gen(args: &GenArgs) -> Result<GenSummary> {
    if args.size < 128 {
        return Err(Error::Parameter(format!(
            "--size must be at least 128, got {}",
            args.size
        )));
    }
    if !(0.0..=0.2).contains(&args.chroma_shift) {
        return Err(Error::Parameter(format!(
            "--chroma-shift must be in [0, 0.2], got {}",
            args.chroma_shift
        )));
    }
    fs::create_dir_all(&args.out).map_err(|e| Error::io(e, &args.out))?;

    let mut manifest = String::from("# id\thost_seed\tdonor_seed\tregion\torig\ttamp\tmask\n");
    for id in 0..args.count as u32 {
        let spec = dataset::plan_forgery(
            args.seed,
            id,
            args.size,
            args.size,
            args.chroma_shift,
            args.blur,
        );
        let donor_seed = dataset::donor_seed(&spec);
        let host = dataset::generate_scene(spec.host_seed, args.size, args.size);
        let donor = dataset::generate_scene(donor_seed, args.size, args.size);
        let (tampered, mask) = synthesize_forgery(&host, &donor, &spec)?;

        let (orig_name, tamp_name, mask_name) = image_names(id);
        pnm::write_image(&host, args.out.join(&orig_name))?;
        pnm::write_image(&tampered, args.out.join(&tamp_name))?;
        pnm::write_image(&mask.to_image(), args.out.join(&mask_name))?;

        let (rh, rw) = spec.shape.extent();
        let kind = match spec.shape {
            dataset::RegionShape::Rect { .. } => "rect",
            dataset::RegionShape::Ellipse { .. } => "ellipse",
        };
        writeln!(
            manifest,
            "{id}\t{}\t{donor_seed}\t{kind}:{rh}x{rw}@{},{}\t{orig_name}\t{tamp_name}\t{mask_name}",
            spec.host_seed, spec.offset.0, spec.offset.1
        )
        .unwrap();
    }
    let manifest_path = args.out.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest).map_err(|e| Error::io(e, &manifest_path))?;
    Ok(GenSummary {
        count: args.count,
        out: args.out.clone(),
    })
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub weights_path: PathBuf,
    pub epochs: usize,
    pub best_val_accuracy: f64,
    pub final_val_accuracy: f64,
    pub train_patches: usize,
    pub val_patches: usize,
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainSummary> {
    let entries = read_manifest(&args.corpus)?;
    if entries.is_empty() {
        return Err(Error::Data(format!(
            "corpus {} contains no images",
            args.corpus.display()
        )));
    }

    let mut records: Vec<PatchRecord> = Vec::new();
    for entry in &entries {
        let original = pnm::read_image(&entry.original)?;
        let tampered = pnm::read_image(&entry.tampered)?;
        let mask = diff_mask(&tampered, &original, args.tau)?;
        records.extend(extract_patches(
            &tampered,
            &mask,
            dataset::PATCH_STRIDE,
            entry.id,
        )?);
    }

    // Independent seed streams for the split, the weight init and training.
    let mut rng = Pcg32::new(derive_seed(args.seed, 1));
    let (train_set, val_set) =
        dataset::balance_and_split(records, args.cap, args.val_frac, &mut rng)?;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(e, &args.out))?;
    save_corpus(&train_set, args.out.join("patches_train.fpd"))?;
    save_corpus(&val_set, args.out.join("patches_val.fpd"))?;

    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch,
        max_epochs: args.epochs,
        momentum: args.momentum,
        dropout_rate: args.dropout,
        seed: derive_seed(args.seed, 2),
        ..TrainConfig::default()
    };
    let mut init_rng = Pcg32::new(derive_seed(args.seed, 3));
    let params = init_params(&config, &mut init_rng);
    let (trained, history) = model::train(params, &train_set, &val_set, &config)?;

    let weights_path = args.out.join("weights.scnw");
    save_params(&trained, &weights_path)?;

    let mut csv = String::from("epoch,train_loss,val_accuracy\n");
    for stats in &history {
        writeln!(csv, "{},{:.6},{:.6}", stats.epoch, stats.train_loss, stats.val_accuracy).unwrap();
    }
    let csv_path = args.out.join("metrics.csv");
    fs::write(&csv_path, csv).map_err(|e| Error::io(e, &csv_path))?;

    let best = history
        .iter()
        .map(|s| s.val_accuracy)
        .fold(0.0f64, f64::max);
    Ok(TrainSummary {
        weights_path,
        epochs: history.len(),
        best_val_accuracy: best,
        final_val_accuracy: history.last().map(|s| s.val_accuracy).unwrap_or(0.0),
        train_patches: train_set.len(),
        val_patches: val_set.len(),
    })
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

fn run_backend(
    backend: Backend,
    params: &ScnnParams,
    image: &ImageBuffer,
    stride: usize,
) -> Result<ProbabilityMap> {
    match backend {
        Backend::Swd => swd(params, image, stride),
        Backend::Fast => fast_scnn(params, image, stride),
    }
}

/// Grayscale copy of the input with 1-pixel box outlines burned at full
/// intensity.
pub fn overlay_image(image: &ImageBuffer, boxes: &[BoundingBox]) -> ImageBuffer {
    let (h, w) = (image.height, image.width);
    let mut data = Vec::with_capacity(h * w);
    for px in image.data().chunks_exact(image.channels) {
        let luma = match image.channels {
            3 => BT601.kr as f32 * px[0] + BT601.kg as f32 * px[1] + BT601.kb as f32 * px[2],
            _ => px[0],
        };
        data.push(luma);
    }
    let mut out = ImageBuffer::new(h, w, 1, crate::color::ColorSpace::ScalarMask, data)
        .expect("overlay dims");
    for b in boxes {
        let bottom = b.bottom.min(h);
        let right = b.right.min(w);
        for r in b.top..bottom {
            out.pixel_mut(r, b.left)[0] = 1.0;
            out.pixel_mut(r, right - 1)[0] = 1.0;
        }
        for c in b.left..right {
            out.pixel_mut(b.top, c)[0] = 1.0;
            out.pixel_mut(bottom - 1, c)[0] = 1.0;
        }
    }
    out
}

pub fn encode_boxes(boxes: &[BoundingBox]) -> String {
    let mut s = String::new();
    for b in boxes {
        writeln!(s, "{},{},{},{}", b.top, b.left, b.bottom, b.right).unwrap();
    }
    s
}

pub fn decode_boxes(text: &str) -> Result<Vec<BoundingBox>> {
    let mut boxes = Vec::new();
    for line in text.lines() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::format(format!("bad box line {line:?}")));
        }
        let mut vals = [0usize; 4];
        for (v, p) in vals.iter_mut().zip(&parts) {
            *v = p
                .parse()
                .map_err(|_| Error::format(format!("bad box coordinate {p:?}")))?;
        }
        boxes.push(BoundingBox::new(vals[0], vals[1], vals[2], vals[3])?);
    }
    Ok(boxes)
}

#[derive(Clone, Debug)]
pub struct DetectSummary {
    pub boxes: Vec<BoundingBox>,
    pub map_cells: (usize, usize),
    pub out: PathBuf,
}

pub fn cmd_detect(args: &DetectArgs) -> Result<DetectSummary> {
    let params = load_params(&args.weights)?;
    let image = pnm::read_image(&args.image)?;
    let map = run_backend(args.backend, &params, &image, args.stride)?;
    let binary = median_filter(&threshold(&map, args.threshold), args.median_k)?;
    let boxes = components_to_boxes(&binary);

    fs::create_dir_all(&args.out).map_err(|e| Error::io(e, &args.out))?;
    localize::write_map(&map, args.out.join("map.pmap"))?;
    pnm::write_image(&map.to_image(), args.out.join("map.pgm"))?;
    pnm::write_image(&binary.to_image(), args.out.join("binary.pgm"))?;
    let boxes_path = args.out.join("boxes.txt");
    fs::write(&boxes_path, encode_boxes(&boxes)).map_err(|e| Error::io(e, &boxes_path))?;
    pnm::write_image(&overlay_image(&image, &boxes), args.out.join("overlay.pgm"))?;

    Ok(DetectSummary {
        map_cells: (map.rows, map.cols),
        boxes,
        out: args.out.clone(),
    })
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct EvalSummary {
    pub results: Vec<ResultLine>,
    pub accuracy: f64,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<EvalSummary> {
    let entries = read_manifest(&args.corpus)?;
    if entries.is_empty() {
        return Err(Error::Data(format!(
            "corpus {} contains no images",
            args.corpus.display()
        )));
    }
    let params = load_params(&args.weights)?;

    let mut results = Vec::with_capacity(entries.len());
    for entry in &entries {
        let image = pnm::read_image(&entry.tampered)?;
        let mask = GroundTruthMask::from_image(&pnm::read_image(&entry.mask)?)?;
        let map = run_backend(args.backend, &params, &image, args.stride)?;
        let binary = median_filter(&threshold(&map, args.threshold), args.median_k)?;
        let boxes = components_to_boxes(&binary);
        let verdict = evaluate(&boxes, &mask)?;
        results.push(ResultLine {
            image_id: entry.id,
            boxes,
            best_iou: verdict.best_iou,
            correct: verdict.correct,
        });
    }
    let accuracy = corpus_accuracy(&results.iter().map(|r| r.correct).collect::<Vec<_>>())?;

    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(e, out))?;
        let mut text = String::new();
        for line in &results {
            writeln!(text, "{}", format_result_line(line)).unwrap();
        }
        let path = out.join("results.txt");
        fs::write(&path, text).map_err(|e| Error::io(e, &path))?;
    }
    Ok(EvalSummary { results, accuracy })
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct BenchRow {
    pub size: usize,
    pub swd_seconds: f64,
    pub fast_seconds: f64,
    pub ratio: f64,
    pub saved_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub stride: usize,
    pub reps: usize,
    pub rows: Vec<BenchRow>,
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    if args.reps == 0 {
        return Err(Error::Parameter("--reps must be >= 1".into()));
    }
    let params = load_params(&args.weights)?;
    let mut rows = Vec::with_capacity(BENCH_SIZES.len());
    for &size in &BENCH_SIZES {
        let image = dataset::generate_scene(derive_seed(args.seed, size as u64), size, size);
        let mut swd_times = Vec::with_capacity(args.reps);
        let mut fast_times = Vec::with_capacity(args.reps);
        for rep in 0..args.reps {
            let t0 = Instant::now();
            let swd_map = swd(&params, &image, args.stride)?;
            swd_times.push(t0.elapsed().as_secs_f64());

            let t1 = Instant::now();
            let fast_map = fast_scnn(&params, &image, args.stride)?;
            fast_times.push(t1.elapsed().as_secs_f64());

            // Correctness guard: the timed runs must agree.
            if rep == 0 {
                let diff = swd_map
                    .max_abs_diff(&fast_map)
                    .ok_or_else(|| Error::Data("benchmark maps have different shapes".into()))?;
                if diff > 1e-5 {
                    return Err(Error::Data(format!(
                        "back ends disagree at size {size}: max cell diff {diff}"
                    )));
                }
            }
        }
        let swd_seconds = median(swd_times);
        let fast_seconds = median(fast_times);
        rows.push(BenchRow {
            size,
            swd_seconds,
            fast_seconds,
            ratio: fast_seconds / swd_seconds,
            saved_seconds: swd_seconds - fast_seconds,
        });
    }

    if let Some(out) = &args.out {
        fs::create_dir_all(out).map_err(|e| Error::io(e, out))?;
        let mut csv = String::from("size,swd_s,fast_s,ratio,saved_s\n");
        for r in &rows {
            writeln!(
                csv,
                "{},{:.6},{:.6},{:.4},{:.6}",
                r.size, r.swd_seconds, r.fast_seconds, r.ratio, r.saved_seconds
            )
            .unwrap();
        }
        let path = out.join("bench.csv");
        fs::write(&path, csv).map_err(|e| Error::io(e, &path))?;
    }
    Ok(BenchReport {
        stride: args.stride,
        reps: args.reps,
        rows,
    })
}

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(args) => {
            let summary = cmd_gen(&args)?;
            println!("wrote {} image pairs to {}", summary.count, summary.out.display());
        }
        Command::Train(args) => {
            let summary = cmd_train(&args)?;
            println!(
                "trained {} epochs on {} patches ({} val): best val accuracy {:.4}, final {:.4}",
                summary.epochs,
                summary.train_patches,
                summary.val_patches,
                summary.best_val_accuracy,
                summary.final_val_accuracy
            );
            println!("weights: {}", summary.weights_path.display());
        }
        Command::Detect(args) => {
            let summary = cmd_detect(&args)?;
            println!(
                "map {}x{} cells, {} box(es):",
                summary.map_cells.0,
                summary.map_cells.1,
                summary.boxes.len()
            );
            for b in &summary.boxes {
                println!("  {},{},{},{}", b.top, b.left, b.bottom, b.right);
            }
            println!("artifacts in {}", summary.out.display());
        }
        Command::Eval(args) => {
            let summary = cmd_eval(&args)?;
            for line in &summary.results {
                println!("{}", format_result_line(line));
            }
            let correct = summary.results.iter().filter(|r| r.correct).count();
            println!(
                "accuracy {:.4} ({}/{} correct)",
                summary.accuracy,
                correct,
                summary.results.len()
            );
        }
        Command::Bench(args) => {
            let report = cmd_bench(&args)?;
            println!(
                "stride {} | median of {} rep(s) per back end",
                report.stride, report.reps
            );
            println!("{:>6} {:>12} {:>12} {:>8} {:>12}", "size", "swd s/im", "fast s/im", "ratio", "saved s/im");
            for r in &report.rows {
                println!(
                    "{:>6} {:>12.3} {:>12.3} {:>8.3} {:>12.3}",
                    r.size, r.swd_seconds, r.fast_seconds, r.ratio, r.saved_seconds
                );
            }
        }
    }
    Ok(())
}
