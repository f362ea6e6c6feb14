//! Batch command-line front end: synth -> render -> infer -> ingest ->
//! query / eval -> select-model.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. All randomness flows
//! from `--seed` flags, so identical invocations write identical bytes.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::eval::{evaluate_corpora, render_table, EvalConfig, EvalReport, GroupSpec};
use crate::heatmap::{load_heatmaps, render_target_heatmap, save_heatmaps, ClassCatalog, Heatmap};
use crate::noise::{NoiseProfile, SeamLines};
use crate::partition::{infer_with_overlap, CounterConfig};
use crate::peaks::{ThresholdMode, ThresholdPolicy};
use crate::query::{execute, parse_query, QueryAnswer};
use crate::selection::{frame_descriptor, select_model, Registry};
use crate::store::{synthetic_timestamp, FrameCorpus, FrameDocument, DEFAULT_VEHICLE_ID};
use crate::synth::{generate_stream, load_annotations, save_annotations, SceneProfile};

#[derive(Parser)]
#[command(
    name = "pcq",
    version,
    about = "Heatmap-based object counting and count queries over frame streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic annotation stream
    Synth(SynthArgs),
    /// Render target heatmaps (optionally noised into predictions)
    Render(RenderArgs),
    /// Count objects in a heatmap stream and write a predicted corpus
    Infer(InferArgs),
    /// Convert annotations into a ground-truth document corpus
    Ingest(IngestArgs),
    /// Run one query against a corpus
    Query(QueryArgs),
    /// Compare a predicted corpus against ground truth
    Eval(EvalArgs),
    /// Build a model-selection registry, or select per frame with one
    SelectModel(SelectModelArgs),
    /// Re-render a saved evaluation report as a table
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of frames
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 128)]
    height: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scene profile JSON; defaults to the bundled nuScenes-like profile
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Annotation stream output (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth document corpus here
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Annotation stream input (JSONL)
    #[arg(long = "in")]
    input: PathBuf,
    /// Heatmap stream output (PCQH records)
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated class list; defaults to the ten nuScenes classes
    #[arg(long)]
    classes: Option<String>,
    /// Per-center drop probability
    #[arg(long, default_value_t = 0.0)]
    drop_rate: f64,
    /// Per-class spurious-peak probability
    #[arg(long, default_value_t = 0.0)]
    fp_rate: f64,
    /// Gaussian blur sigma in cells
    #[arg(long, default_value_t = 0.0)]
    blur: f64,
    /// Uniform additive noise amplitude
    #[arg(long, default_value_t = 0.0)]
    additive: f64,
    /// Attenuation strength near partition seams
    #[arg(long, default_value_t = 0.0)]
    boundary_bias: f64,
    /// Partition layout whose seams the boundary bias follows
    #[arg(long, default_value_t = 4)]
    seam_pt: usize,
    #[arg(long, default_value_t = 2)]
    seam_halfwidth: usize,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

#[derive(Args)]
struct InferArgs {
    /// Heatmap stream input (PCQH records)
    #[arg(long = "in")]
    input: PathBuf,
    /// Predicted document corpus output (JSONL)
    #[arg(long)]
    out: PathBuf,
    /// Number of partitions
    #[arg(long, default_value_t = 4)]
    pt: usize,
    /// Region expansion ratio
    #[arg(long, default_value_t = 0.2)]
    overlap: f64,
    /// Duplicate-merge radius in cells
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    /// fixed | otsu
    #[arg(long, default_value = "otsu")]
    threshold: String,
    #[arg(long, default_value_t = 0.5)]
    fixed_t: f64,
    #[arg(long)]
    classes: Option<String>,
}

#[derive(Args)]
struct IngestArgs {
    /// Annotation stream input (JSONL)
    #[arg(long)]
    annotations: PathBuf,
    /// Ground-truth document corpus output (JSONL)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    classes: Option<String>,
}

#[derive(Args)]
struct QueryArgs {
    /// Query text: `retrieve car>=3 pedestrian=0`, `count car>=5`,
    /// `agg sum car`, `agg avg car`
    text: String,
    #[arg(long)]
    corpus: PathBuf,
    /// Frame range start:end (half-open)
    #[arg(long)]
    range: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Relative error tolerance
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    /// Random COUNT queries per class
    #[arg(long, default_value_t = 1000)]
    queries: usize,
    /// Random retrieval conditions per class
    #[arg(long, default_value_t = 200)]
    retrieval_queries: usize,
    /// Consecutive-frame groups for aggregation
    #[arg(long, default_value_t = 500)]
    groups: usize,
    /// Group length range min:max
    #[arg(long, default_value = "100:500")]
    len: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SelectModelArgs {
    /// Heatmap stream input (PCQH records)
    #[arg(long = "in")]
    input: PathBuf,
    /// Ground-truth corpus (build mode)
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Candidate configs as comma-separated pt:overlap pairs
    #[arg(long, default_value = "1:0,2:0.1,4:0.2,9:0.2")]
    configs: String,
    #[arg(long, default_value_t = 0.15)]
    epsilon: f64,
    #[arg(long, default_value_t = 4.0)]
    gamma: f64,
    /// fixed | otsu
    #[arg(long, default_value = "otsu")]
    threshold: String,
    #[arg(long, default_value_t = 0.5)]
    fixed_t: f64,
    /// Registry output path (build mode)
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Select with an existing registry instead of building one
    #[arg(long)]
    select_with: Option<PathBuf>,
    /// Per-class descriptor emphasis, e.g. car=2,pedestrian=2
    #[arg(long)]
    emphasis: Option<String>,
    #[arg(long)]
    classes: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Saved evaluation report (JSON)
    #[arg(long = "in")]
    input: PathBuf,
}

fn parse_catalog(classes: &Option<String>) -> Result<ClassCatalog> {
    match classes {
        None => Ok(ClassCatalog::nuscenes()),
        Some(list) => ClassCatalog::new(list.split(',').map(str::trim).filter(|s| !s.is_empty())),
    }
}

fn parse_pair(text: &str, what: &str) -> Result<(usize, usize)> {
    let (a, b) = text
        .split_once(':')
        .ok_or_else(|| Error::InvalidConfig(format!("{what} must look like a:b")))?;
    let a = a
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad {what}: {text}")))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad {what}: {text}")))?;
    Ok((a, b))
}

fn parse_policy(threshold: &str, fixed_t: f64) -> Result<ThresholdPolicy> {
    let mode = match threshold {
        "fixed" => ThresholdMode::Fixed,
        "otsu" | "dynamic" => ThresholdMode::DynamicOtsu,
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown threshold mode {other:?}; expected fixed or otsu"
            )))
        }
    };
    let policy = ThresholdPolicy { mode, fixed_t };
    policy.validate()?;
    Ok(policy)
}

fn parse_configs(text: &str, gamma: f64, policy: ThresholdPolicy) -> Result<Vec<CounterConfig>> {
    let mut configs = Vec::new();
    for token in text.split(',') {
        let (pt, overlap) = token
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("config {token:?} must be pt:overlap")))?;
        let pt: usize = pt
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad pt in {token:?}")))?;
        let overlap: f64 = overlap
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad overlap in {token:?}")))?;
        let cfg = CounterConfig::new(pt, overlap, gamma, policy);
        cfg.validate()?;
        configs.push(cfg);
    }
    if configs.is_empty() {
        return Err(Error::InvalidConfig("no counter configs given".into()));
    }
    Ok(configs)
}

fn corpus_from_heatmaps(
    maps: &[Heatmap],
    cfg: &CounterConfig,
    catalog: &ClassCatalog,
) -> Result<FrameCorpus> {
    let mut docs = Vec::with_capacity(maps.len());
    for (i, hm) in maps.iter().enumerate() {
        let (_, peaks) = infer_with_overlap(hm, cfg)?;
        docs.push(FrameDocument::from_peaks(
            format!("frame_{i:06}"),
            &peaks,
            catalog,
            synthetic_timestamp(i),
            DEFAULT_VEHICLE_ID.into(),
        ));
    }
    Ok(FrameCorpus::new(docs))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let profile = match &args.profile {
        Some(path) => SceneProfile::load(path)?,
        None => SceneProfile::builtin_nuscenes_like(),
    };
    let default_catalog = ClassCatalog::nuscenes();
    // A custom profile may use its own class set.
    let catalog = if profile
        .classes
        .keys()
        .all(|c| default_catalog.index_of(c).is_some())
    {
        default_catalog
    } else {
        profile.catalog()
    };
    let stream = generate_stream(
        &profile,
        &catalog,
        args.frames,
        args.width,
        args.height,
        args.seed,
    )?;
    save_annotations(&args.out, &stream.frames, &catalog)?;
    if let Some(truth_path) = &args.truth {
        let docs: Vec<FrameDocument> = stream
            .frames
            .iter()
            .enumerate()
            .map(|(i, ann)| {
                FrameDocument::from_annotation(
                    ann,
                    &catalog,
                    synthetic_timestamp(i),
                    DEFAULT_VEHICLE_ID.into(),
                )
            })
            .collect();
        FrameCorpus::new(docs).persist(truth_path)?;
    }
    let objects: usize = stream.frames.iter().map(|f| f.centers.len()).sum();
    println!(
        "wrote {} frames ({} objects, {} dropped placements) to {}",
        stream.frames.len(),
        objects,
        stream.dropped_objects,
        args.out.display()
    );
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<()> {
    let catalog = parse_catalog(&args.classes)?;
    let frames = load_annotations(&args.input, &catalog)?;
    let noisy = args.drop_rate > 0.0
        || args.fp_rate > 0.0
        || args.blur > 0.0
        || args.additive > 0.0
        || args.boundary_bias > 0.0;
    let mut maps = Vec::with_capacity(frames.len());
    for (i, ann) in frames.iter().enumerate() {
        let target = render_target_heatmap(ann, &catalog)?;
        if noisy {
            let seams = if args.boundary_bias > 0.0 {
                let mut s = SeamLines::for_partition(ann.width, ann.height, args.seam_pt)?;
                s.halfwidth = args.seam_halfwidth;
                s
            } else {
                SeamLines::default()
            };
            let profile = NoiseProfile {
                blur_sigma: args.blur,
                additive_noise: args.additive,
                drop_rate: args.drop_rate,
                false_positive_rate: args.fp_rate,
                boundary_split_bias: args.boundary_bias,
                seams,
                seed: crate::rng::derive_seed(args.noise_seed, i as u64),
            };
            maps.push(crate::noise::simulate_prediction(
                &target, ann, &catalog, &profile,
            ));
        } else {
            maps.push(target);
        }
    }
    save_heatmaps(&args.out, &maps)?;
    println!("wrote {} heatmaps to {}", maps.len(), args.out.display());
    Ok(())
}

fn cmd_infer(args: InferArgs) -> Result<()> {
    let catalog = parse_catalog(&args.classes)?;
    let policy = parse_policy(&args.threshold, args.fixed_t)?;
    let cfg = CounterConfig::new(args.pt, args.overlap, args.gamma, policy);
    cfg.validate()?;
    let maps = load_heatmaps(&args.input)?;
    for hm in &maps {
        if hm.channels() != catalog.len() {
            return Err(Error::InvalidConfig(format!(
                "heatmap has {} channels but catalog lists {} classes",
                hm.channels(),
                catalog.len()
            )));
        }
    }
    let corpus = corpus_from_heatmaps(&maps, &cfg, &catalog)?;
    corpus.persist(&args.out)?;
    println!(
        "counted {} frames with {} into {}",
        corpus.len(),
        cfg.label(),
        args.out.display()
    );
    Ok(())
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let catalog = parse_catalog(&args.classes)?;
    let frames = load_annotations(&args.annotations, &catalog)?;
    let docs: Vec<FrameDocument> = frames
        .iter()
        .enumerate()
        .map(|(i, ann)| {
            FrameDocument::from_annotation(
                ann,
                &catalog,
                synthetic_timestamp(i),
                DEFAULT_VEHICLE_ID.into(),
            )
        })
        .collect();
    let corpus = FrameCorpus::new(docs);
    corpus.persist(&args.out)?;
    println!(
        "ingested {} frames into {}",
        corpus.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_query(args: QueryArgs) -> Result<()> {
    let range = args
        .range
        .as_deref()
        .map(|r| parse_pair(r, "range"))
        .transpose()?;
    let spec = parse_query(&args.text, range)?;
    let corpus = FrameCorpus::load(&args.corpus)?;
    match execute(&corpus, &spec)? {
        QueryAnswer::Frames(indices) => {
            use std::io::Write;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for i in indices {
                // Stop quietly when the reader (e.g. `head`) hangs up.
                if writeln!(out, "{}", corpus[i].frame_id).is_err() {
                    break;
                }
            }
        }
        QueryAnswer::Count(n) => println!("{n}"),
        QueryAnswer::Sum(s) => println!("{s}"),
        QueryAnswer::Avg(a) => println!("{a}"),
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let pred = FrameCorpus::load(&args.pred)?;
    let truth = FrameCorpus::load(&args.truth)?;
    let (len_min, len_max) = parse_pair(&args.len, "len")?;
    let config = EvalConfig {
        tolerance_rate: args.tolerance,
        retrieval_queries_per_class: args.retrieval_queries,
        count_queries_per_class: args.queries,
        groups: GroupSpec {
            n_groups: args.groups,
            len_min,
            len_max,
        },
        seed: args.seed,
    };
    let report = evaluate_corpora(&pred, &truth, &config)?;
    if let Some(json_path) = &args.json {
        std::fs::write(json_path, serde_json::to_string_pretty(&report)?)?;
    }
    print!("{}", render_table(&report));
    Ok(())
}

fn parse_emphasis(text: &str, catalog: &ClassCatalog) -> Result<Vec<f64>> {
    let mut weights = vec![1.0; catalog.len()];
    for token in text.split(',') {
        let (class, factor) = token.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("emphasis {token:?} must be class=weight"))
        })?;
        let index = catalog
            .index_of(class.trim())
            .ok_or_else(|| Error::UnknownClass(class.trim().to_string()))?;
        weights[index] = factor
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad weight in {token:?}")))?;
    }
    Ok(weights)
}

fn cmd_select_model(args: SelectModelArgs) -> Result<()> {
    let catalog = parse_catalog(&args.classes)?;
    let maps = load_heatmaps(&args.input)?;
    if let Some(registry_path) = &args.select_with {
        let registry = Registry::load(registry_path)?;
        for (i, hm) in maps.iter().enumerate() {
            let descriptor = frame_descriptor(hm, args.fixed_t)?;
            let chosen = select_model(&descriptor, &registry.models)?;
            println!("frame_{i:06} {}", chosen.config.label());
        }
        return Ok(());
    }

    let truth_path = args.truth.as_ref().ok_or_else(|| {
        Error::InvalidConfig("build mode needs --truth (or use --select-with)".into())
    })?;
    let registry_path = args.registry.as_ref().ok_or_else(|| {
        Error::InvalidConfig("build mode needs --registry (or use --select-with)".into())
    })?;
    let policy = parse_policy(&args.threshold, args.fixed_t)?;
    let configs = parse_configs(&args.configs, args.gamma, policy)?;
    let truth = FrameCorpus::load(truth_path)?;
    if truth.len() != maps.len() {
        return Err(Error::InvalidConfig(format!(
            "{} heatmaps but {} truth frames",
            maps.len(),
            truth.len()
        )));
    }
    let truth_counts: Vec<Vec<usize>> = truth
        .iter()
        .map(|doc| {
            catalog
                .names()
                .map(|class| doc.count_of(class) as usize)
                .collect()
        })
        .collect();
    let emphasis = args
        .emphasis
        .as_deref()
        .map(|e| parse_emphasis(e, &catalog))
        .transpose()?;
    let registry = Registry::build(
        &maps,
        &truth_counts,
        &configs,
        args.epsilon,
        emphasis.as_deref(),
        args.fixed_t,
    )?;
    registry.save(registry_path)?;
    for m in &registry.models {
        println!(
            "{}: {} frames, variance {:.4}, confidence {:.4}",
            m.config.label(),
            m.n,
            m.variance,
            m.confidence
        );
    }
    for cfg in &registry.excluded {
        println!("{}: excluded (no frames)", cfg.label());
    }
    println!("registry written to {}", registry_path.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(&args.input)?)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Render(args) => cmd_render(args),
        Command::Infer(args) => cmd_infer(args),
        Command::Ingest(args) => cmd_ingest(args),
        Command::Query(args) => cmd_query(args),
        Command::Eval(args) => cmd_eval(args),
        Command::SelectModel(args) => cmd_select_model(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn init_thread_pool() {
    if let Ok(n) = std::env::var("PCQ_THREADS") {
        if let Ok(n) = n.parse::<usize>() {
            // Ignore failure: the global pool can only be set once.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
}

/// Run the CLI on an argv (without the program name). Returns the exit code.
pub fn run<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    init_thread_pool();
    let argv = std::iter::once("pcq".to_string()).chain(args);
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e @ (Error::InvalidConfig(_) | Error::Query(_) | Error::UnknownClass(_))) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
