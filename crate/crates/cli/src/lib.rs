//! Command-line front end: distortion, dataset building, evaluation and
//! reporting subcommands with a resolved-config audit record per run.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use log::warn;
use serde::Serialize;

use distort_bench::coco::{load_detections, CocoDataset, ImageInfo};
use distort_bench::dataset::{
    build_eval_grid, build_plan, distort_set, materialize, ratio_table_csv, subset_from_manifest,
    GridSpec, SubsetManifest,
};
use distort_bench::distortions::{DistortionKind, SeverityLevel, TargetPolicy};
use distort_bench::eval::coco_map;
use distort_bench::imaging::ImageBuffer;
use distort_bench::report::{chart_svg, violin_summary, RobustnessReport};

pub const RUN_CONFIG_FILE: &str = "run_config.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const VIOLIN_SUMMARY: &str = "violin_summary.json";
pub const CLEAN_DETECTIONS: &str = "clean.json";
pub const THREADS_ENV: &str = "DISTORT_BENCH_THREADS";

/// Level used by `distort` when `--level` is omitted.
pub const DEFAULT_DISTORT_LEVEL: u8 = 5;

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

#[derive(Debug, Parser)]
#[command(name = "distort-bench", version, about = "Severity-graded distortions and detection robustness scoring")]
pub struct Cli {
    /// Worker threads (0 = all cores). Output never depends on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one distortion at one level to an image or a directory.
    Distort(DistortArgs),
    /// Build a mixed training set: a fraction of images per kind, random levels.
    Build(BuildArgs),
    /// Build one distorted copy of the dataset per (kind, level) cell.
    Grid(GridArgs),
    /// Filter annotations by a curated subset manifest; prints the ratio table.
    Subset(SubsetArgs),
    /// Score clean and per-cell detections; writes report JSON and CSV.
    Evaluate(EvaluateArgs),
    /// Render charts, violin-summary statistics and CSV from a report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DistortArgs {
    /// Image file or directory of images.
    #[arg(long)]
    pub images: PathBuf,
    /// COCO annotations; required for local kinds to find targets.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub kind: DistortionKind,
    #[arg(long, default_value_t = DEFAULT_DISTORT_LEVEL, value_parser = clap::value_parser!(u8).range(0..=10))]
    pub level: u8,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of the images assigned to each kind.
    #[arg(long, default_value_t = distort_bench::dataset::DEFAULT_FRACTION)]
    pub fraction: f64,
    /// Kinds to mix in (default: all ten).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<DistortionKind>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Kinds (default: all ten).
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<DistortionKind>,
    /// Levels as a list and/or ranges, e.g. `1,3,5-7` (default: 1-10).
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<Levels>,
}

#[derive(Debug, Args)]
pub struct SubsetArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Subset manifest listing images, kinds and retained annotation ids.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the filtered annotations and the ratio CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    /// Directory holding `clean.json` and `<kind>/<level>.json`.
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Expected kinds; with `--levels`, missing cells are reported absent.
    /// When neither is given, the cells found on disk are scored.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Vec<DistortionKind>,
    #[arg(long, value_parser = parse_levels)]
    pub levels: Option<Levels>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON written by `evaluate`.
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parsed `--levels` value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Levels(pub Vec<SeverityLevel>);

/// Parses comma-separated levels and inclusive `a-b` ranges, each in 0..=10.
pub fn parse_levels(text: &str) -> Result<Levels, String> {
    let level = |s: &str| -> Result<u8, String> {
        let v: u8 = s
            .trim()
            .parse()
            .map_err(|_| format!("invalid level `{}`", s.trim()))?;
        SeverityLevel::new(v).map(|l| l.get()).map_err(|e| e.to_string())
    };
    let mut out = BTreeSet::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (level(a)?, level(b)?);
                if a > b {
                    return Err(format!("empty level range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(level(part)?);
            }
        }
    }
    if out.is_empty() {
        return Err("no levels given".into());
    }
    Ok(Levels(
        out.into_iter()
            .map(|l| SeverityLevel::new(l).expect("checked above"))
            .collect(),
    ))
}

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad path, kind or level (exit 2).
    Usage(String),
    /// Anything that failed while running (exit 1).
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<distort_bench::Error> for CliError {
    fn from(e: distort_bench::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, CliError>;

/// Fully resolved configuration of one run, written as the audit record.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub annotations: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub detections: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kinds: Vec<DistortionKind>,
    pub levels: Vec<u8>,
    pub fraction: Option<f64>,
    pub threads: usize,
    pub target_policy: TargetPolicy,
}

impl RunConfig {
    fn new(subcommand: &str, threads: usize) -> Self {
        Self {
            subcommand: subcommand.into(),
            annotations: None,
            images: None,
            detections: None,
            manifest: None,
            report: None,
            out: None,
            seed: None,
            kinds: Vec::new(),
            levels: Vec::new(),
            fraction: None,
            threads,
            target_policy: TargetPolicy::default(),
        }
    }
}

#[derive(Serialize)]
struct AuditRecord<'a> {
    tool: &'static str,
    version: &'static str,
    /// Seconds since the Unix epoch.
    timestamp: u64,
    config: &'a RunConfig,
}

/// Writes `run_config.json` into `dir`. The timestamp lives only here, so all
/// other outputs stay byte-identical across reruns.
pub fn write_audit_record(dir: &Path, config: &RunConfig) -> anyhow::Result<()> {
    let record = AuditRecord {
        tool: "distort-bench",
        version: env!("CARGO_PKG_VERSION"),
        timestamp: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        config,
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(RUN_CONFIG_FILE);
    fs::write(&path, serde_json::to_string_pretty(&record)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} `{}` is not a file", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> CmdResult {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} `{}` is not a directory", path.display())))
    }
}

fn all_kinds_if_empty(kinds: &[DistortionKind]) -> Vec<DistortionKind> {
    if kinds.is_empty() {
        DistortionKind::ALL.to_vec()
    } else {
        let set: BTreeSet<DistortionKind> = kinds.iter().copied().collect();
        set.into_iter().collect()
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
}

/// Dataset and source directory for `distort`. With annotations, a single
/// file selects its own image record; without, images are numbered 1.. in
/// file-name order and carry no objects.
fn distort_inputs(args: &DistortArgs) -> CmdResult<(CocoDataset, PathBuf)> {
    let (src_dir, files): (PathBuf, Vec<String>) = if args.images.is_file() {
        let name = args
            .images
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .ok_or_else(|| CliError::Usage("image path has no file name".into()))?;
        let parent = args
            .images
            .parent()
            .map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        (parent, vec![name])
    } else if args.images.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&args.images)
            .with_context(|| format!("listing {}", args.images.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| is_image_file(p))
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect();
        names.sort();
        (args.images.clone(), names)
    } else {
        return Err(CliError::Usage(format!(
            "images `{}` does not exist",
            args.images.display()
        )));
    };

    let dataset = match &args.annotations {
        Some(path) => {
            require_file(path, "annotations")?;
            let mut dataset = CocoDataset::load(path)?;
            if args.images.is_file() {
                dataset.images.retain(|i| i.file_name == files[0]);
                if dataset.images.is_empty() {
                    return Err(CliError::Usage(format!(
                        "`{}` is not listed in the annotations",
                        files[0]
                    )));
                }
                let id = dataset.images[0].id;
                dataset.annotations.retain(|a| a.image_id == id);
            }
            dataset
        }
        None => {
            let images = files
                .iter()
                .enumerate()
                .map(|(i, name)| -> anyhow::Result<ImageInfo> {
                    let img = ImageBuffer::load(&src_dir.join(name))?;
                    Ok(ImageInfo {
                        id: i as i64 + 1,
                        file_name: name.clone(),
                        width: img.width() as u32,
                        height: img.height() as u32,
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            CocoDataset {
                images,
                annotations: Vec::new(),
                categories: Vec::new(),
            }
        }
    };
    Ok((dataset, src_dir))
}

pub fn cmd_distort(args: &DistortArgs, threads: usize) -> CmdResult {
    let level = SeverityLevel::new(args.level).map_err(|e| CliError::Usage(e.to_string()))?;
    let (dataset, src_dir) = distort_inputs(args)?;
    let policy = TargetPolicy::default();
    let manifest = distort_set(&dataset, args.kind, level, args.seed, &src_dir, &args.out, &policy)?;
    let skipped = manifest.skipped().count();
    if skipped > 0 {
        warn!("{skipped} image(s) skipped: no eligible target for {}", args.kind);
    }
    let mut config = RunConfig::new("distort", threads);
    config.images = Some(args.images.clone());
    config.annotations = args.annotations.clone();
    config.out = Some(args.out.clone());
    config.seed = Some(args.seed);
    config.kinds = vec![args.kind];
    config.levels = vec![args.level];
    write_audit_record(&args.out, &config)?;
    Ok(())
}

pub fn cmd_build(args: &BuildArgs, threads: usize) -> CmdResult {
    require_file(&args.annotations, "annotations")?;
    require_dir(&args.images, "images")?;
    if !(0.0..=1.0).contains(&args.fraction) {
        return Err(CliError::Usage(format!(
            "fraction {} is outside [0, 1]",
            args.fraction
        )));
    }
    let kinds = all_kinds_if_empty(&args.kinds);
    let dataset = CocoDataset::load(&args.annotations)?;
    let fractions = kinds.iter().map(|&k| (k, args.fraction)).collect();
    let ids: Vec<i64> = dataset.images.iter().map(|i| i.id).collect();
    let plan = build_plan(&ids, &fractions, args.seed)?;
    let policy = TargetPolicy::default();
    let manifest = materialize(&plan, &dataset, &args.images, &args.out, &policy)?;
    log::info!(
        "{} distorted, {} clean, {} skipped",
        manifest.distorted().count(),
        plan.clean_count(),
        manifest.skipped().count()
    );
    let mut config = RunConfig::new("build", threads);
    config.annotations = Some(args.annotations.clone());
    config.images = Some(args.images.clone());
    config.out = Some(args.out.clone());
    config.seed = Some(args.seed);
    config.kinds = kinds;
    config.levels = (1..=SeverityLevel::MAX).collect();
    config.fraction = Some(args.fraction);
    write_audit_record(&args.out, &config)?;
    Ok(())
}

fn levels_or_all(levels: &Option<Levels>) -> Vec<SeverityLevel> {
    levels
        .as_ref()
        .map_or_else(|| SeverityLevel::distorting().collect(), |l| l.0.clone())
}

pub fn cmd_grid(args: &GridArgs, threads: usize) -> CmdResult {
    require_file(&args.annotations, "annotations")?;
    require_dir(&args.images, "images")?;
    let dataset = CocoDataset::load(&args.annotations)?;
    let grid = GridSpec {
        kinds: all_kinds_if_empty(&args.kinds),
        levels: levels_or_all(&args.levels),
        seed: args.seed,
    };
    let policy = TargetPolicy::default();
    let manifests = build_eval_grid(&dataset, &grid, &args.images, &args.out, &policy)?;
    log::info!("{} grid cells written", manifests.len());
    let mut config = RunConfig::new("grid", threads);
    config.annotations = Some(args.annotations.clone());
    config.images = Some(args.images.clone());
    config.out = Some(args.out.clone());
    config.seed = Some(args.seed);
    config.kinds = grid.kinds.clone();
    config.levels = grid.levels.iter().map(|l| l.get()).collect();
    write_audit_record(&args.out, &config)?;
    Ok(())
}

/// Returns the ratio table CSV, which is also printed to stdout.
pub fn cmd_subset(args: &SubsetArgs, threads: usize) -> CmdResult<String> {
    require_file(&args.annotations, "annotations")?;
    require_file(&args.manifest, "manifest")?;
    let dataset = CocoDataset::load(&args.annotations)?;
    let manifest = SubsetManifest::load(&args.manifest)?;
    let (subset, ratios) = subset_from_manifest(&dataset, &manifest)?;
    let csv = ratio_table_csv(&ratios);
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        subset.save(&out.join("annotations.json"))?;
        let path = out.join("ratios.csv");
        fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
        let mut config = RunConfig::new("subset", threads);
        config.annotations = Some(args.annotations.clone());
        config.manifest = Some(args.manifest.clone());
        config.out = Some(out.clone());
        write_audit_record(out, &config)?;
    }
    print!("{csv}");
    Ok(csv)
}

/// Detection file of a grid cell, relative to the detections directory.
pub fn cell_detections(kind: DistortionKind, level: SeverityLevel) -> PathBuf {
    PathBuf::from(kind.slug()).join(format!("{}.json", level.get()))
}

/// Cells with a detection file under `dir`.
fn discover_cells(dir: &Path) -> Vec<(DistortionKind, SeverityLevel)> {
    DistortionKind::ALL
        .iter()
        .flat_map(|&k| SeverityLevel::distorting().map(move |l| (k, l)))
        .filter(|&(k, l)| dir.join(cell_detections(k, l)).is_file())
        .collect()
}

/// Returns the report; its warnings count absent cells and undefined rates.
pub fn cmd_evaluate(args: &EvaluateArgs, threads: usize) -> CmdResult<RobustnessReport> {
    require_file(&args.annotations, "annotations")?;
    require_dir(&args.detections, "detections")?;
    let clean_path = args.detections.join(CLEAN_DETECTIONS);
    require_file(&clean_path, "clean detections")?;
    let dataset = CocoDataset::load(&args.annotations)?;

    let cells = if args.kinds.is_empty() && args.levels.is_none() {
        discover_cells(&args.detections)
    } else {
        let grid = GridSpec {
            kinds: all_kinds_if_empty(&args.kinds),
            levels: levels_or_all(&args.levels),
            seed: 0,
        };
        grid.cells()
    };

    let clean = coco_map(&load_detections(&clean_path)?, &dataset)?;
    let mut scored = Vec::with_capacity(cells.len());
    for &(kind, level) in &cells {
        let path = args.detections.join(cell_detections(kind, level));
        let result = if path.is_file() {
            Some(coco_map(&load_detections(&path)?, &dataset)?)
        } else {
            None
        };
        scored.push((kind, level, result));
    }
    let report = RobustnessReport::from_results(&clean, scored);
    for w in &report.warnings {
        warn!("{w}");
    }
    if !report.warnings.is_empty() {
        eprintln!("{} warning(s)", report.warnings.len());
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let json_path = args.out.join(REPORT_JSON);
    fs::write(&json_path, report.to_json())
        .with_context(|| format!("writing {}", json_path.display()))?;
    let csv_path = args.out.join(REPORT_CSV);
    fs::write(&csv_path, report.to_csv())
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let mut config = RunConfig::new("evaluate", threads);
    config.annotations = Some(args.annotations.clone());
    config.detections = Some(args.detections.clone());
    config.out = Some(args.out.clone());
    config.kinds = report.kinds();
    config.levels = cells
        .iter()
        .map(|&(_, l)| l.get())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    write_audit_record(&args.out, &config)?;
    Ok(report)
}

pub fn cmd_report(args: &ReportArgs, threads: usize) -> CmdResult {
    require_file(&args.report, "report")?;
    let report = RobustnessReport::load(&args.report)?;
    let charts = args.out.join("charts");
    fs::create_dir_all(&charts).with_context(|| format!("creating {}", charts.display()))?;
    for kind in report.kinds() {
        let path = charts.join(format!("{}.svg", kind.slug()));
        fs::write(&path, chart_svg(kind, &report.curve(kind)))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = violin_summary(&report);
    let path = args.out.join(VIOLIN_SUMMARY);
    fs::write(&path, serde_json::to_string_pretty(&summary).context("serializing summary")?)
        .with_context(|| format!("writing {}", path.display()))?;
    let path = args.out.join(REPORT_CSV);
    fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;

    let mut config = RunConfig::new("report", threads);
    config.report = Some(args.report.clone());
    config.out = Some(args.out.clone());
    write_audit_record(&args.out, &config)?;
    Ok(())
}

/// Resolves the thread count: 0 (or unset) means all available cores.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    match requested {
        Some(n) if n > 0 => n,
        _ => std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

/// Runs a parsed command inside a pool of the resolved size.
pub fn execute(cli: &Cli) -> CmdResult {
    let threads = resolve_threads(cli.threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building thread pool")?;
    pool.install(|| match &cli.command {
        Command::Distort(a) => cmd_distort(a, threads),
        Command::Build(a) => cmd_build(a, threads),
        Command::Grid(a) => cmd_grid(a, threads),
        Command::Subset(a) => cmd_subset(a, threads).map(drop),
        Command::Evaluate(a) => cmd_evaluate(a, threads).map(drop),
        Command::Report(a) => cmd_report(a, threads),
    })
}

/// Parses arguments and runs; returns the process exit code
/// (0 success, 1 runtime failure, 2 usage error).
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
