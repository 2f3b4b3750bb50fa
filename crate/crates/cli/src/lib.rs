//! Command-line front end: `inspect`, `corpus` and `synth` subcommands.

use std::f64::consts::{FRAC_PI_2, SQRT_2, TAU};
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use texweave::corpus::{corpus_run_manifest, CorpusOptions};
use texweave::filter_engine::ConvolutionMethod;
use texweave::gabor_bank::{dump_kernels, kernel_size_from_periodicity, make_bank};
use texweave::imaging::{load_grayscale, save_grayscale, save_overlay};
use texweave::synth::{self, DefectKind, Placement, SynthSpec, TextureKind};
use texweave::{inspect, GaborBankConfig, InspectOptions, InspectionReport, PaddingMode, Periodicity, Raster};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit status 2.
    Usage(String),
    /// Failure while running the pipeline; exit status 1.
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Pipeline(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Pipeline(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<texweave::Error> for CliError {
    fn from(e: texweave::Error) -> Self {
        match e {
            texweave::Error::Argument(msg) => CliError::Usage(msg),
            other => CliError::Pipeline(other.to_string()),
        }
    }
}

fn pipeline_err(context: impl fmt::Display) -> impl FnOnce(std::io::Error) -> CliError {
    move |e| CliError::Pipeline(format!("{context}: {e}"))
}

/// Everything one run needs. Serializes to the `--config` JSON format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    /// Rows per periodic unit.
    pub period_rows: Option<usize>,
    /// Columns per periodic unit.
    pub period_cols: Option<usize>,
    pub scales: usize,
    pub orientations: usize,
    pub sigma: f64,
    pub kmax: f64,
    pub spacing: f64,
    pub padding: PaddingMode,
    pub out: PathBuf,
    pub gt: Option<PathBuf>,
    pub min_overlap: f64,
    pub min_separation: Option<f64>,
    pub jobs: Option<usize>,
    pub group: Option<String>,
    pub dump_gabor_space: bool,
    pub dump_features: bool,
    pub dump_dendrogram: bool,
    pub dump_kernels: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            manifest: None,
            period_rows: None,
            period_cols: None,
            scales: 5,
            orientations: 8,
            sigma: TAU,
            kmax: FRAC_PI_2,
            spacing: SQRT_2,
            padding: PaddingMode::Reflect,
            out: PathBuf::from("."),
            gt: None,
            min_overlap: 0.0,
            min_separation: None,
            jobs: None,
            group: None,
            dump_gabor_space: false,
            dump_features: false,
            dump_dendrogram: false,
            dump_kernels: false,
        }
    }
}

impl RunConfig {
    /// Applies the keys of a JSON object on top of `self`.
    pub fn merge_json(&self, overrides: serde_json::Value) -> Result<Self, CliError> {
        let serde_json::Value::Object(overrides) = overrides else {
            return Err(CliError::Usage("config must be a JSON object".into()));
        };
        let mut merged = serde_json::to_value(self).expect("config serializes");
        let fields = merged.as_object_mut().expect("config is an object");
        for (key, value) in overrides {
            fields.insert(key, value);
        }
        serde_json::from_value(merged).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn merge_file(&self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let value = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        self.merge_json(value)
    }

    pub fn periodicity(&self) -> Result<Periodicity, CliError> {
        match (self.period_rows, self.period_cols) {
            (Some(rows), Some(cols)) => Ok(Periodicity::new(rows, cols)?),
            (None, _) => Err(CliError::Usage("--period-rows is required".into())),
            (_, None) => Err(CliError::Usage("--period-cols is required".into())),
        }
    }

    /// Wavelet parameters, with the window left at its default size.
    pub fn bank(&self) -> Result<GaborBankConfig<f64>, CliError> {
        let bank = GaborBankConfig {
            num_scales: self.scales,
            num_orientations: self.orientations,
            sigma: self.sigma,
            k_max: self.kmax,
            spacing: self.spacing,
            ..GaborBankConfig::default()
        };
        bank.validate()?;
        Ok(bank)
    }

    pub fn inspect_options(&self) -> Result<InspectOptions<f64>, CliError> {
        if !(0.0..=1.0).contains(&self.min_overlap) {
            return Err(CliError::Usage(format!("--min-overlap {} outside [0, 1]", self.min_overlap)));
        }
        if let Some(tau) = self.min_separation {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(CliError::Usage(format!("--min-separation {tau} must be non-negative")));
            }
        }
        Ok(InspectOptions {
            padding: self.padding,
            method: ConvolutionMethod::Fft,
            min_separation: self.min_separation,
            min_overlap: self.min_overlap,
            ..InspectOptions::default()
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "texweave", version, about = "Defect detection on periodic textures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect one image and write its overlay, mask and report.
    Inspect(PipelineArgs),
    /// Inspect every row of a CSV manifest and write pooled metrics.
    Corpus(PipelineArgs),
    /// Generate a synthetic texture and its ground-truth mask.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PaddingArg {
    Reflect,
    Wrap,
    Zero,
}

impl From<PaddingArg> for PaddingMode {
    fn from(p: PaddingArg) -> Self {
        match p {
            PaddingArg::Reflect => PaddingMode::Reflect,
            PaddingArg::Wrap => PaddingMode::Wrap,
            PaddingArg::Zero => PaddingMode::Zero,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Input image (PNG or PGM).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV manifest with columns image,period_rows,period_cols,gt,group.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Rows per periodic unit.
    #[arg(long)]
    pub period_rows: Option<usize>,
    /// Columns per periodic unit.
    #[arg(long)]
    pub period_cols: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub scales: usize,
    #[arg(long, default_value_t = 8)]
    pub orientations: usize,
    #[arg(long, default_value_t = TAU)]
    pub sigma: f64,
    #[arg(long, default_value_t = FRAC_PI_2)]
    pub kmax: f64,
    #[arg(long, default_value_t = SQRT_2)]
    pub spacing: f64,
    #[arg(long, value_enum, default_value_t = PaddingArg::Reflect)]
    pub padding: PaddingArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Ground-truth mask; nonzero pixels are defective.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Fraction of a block that must be defective in the ground truth.
    #[arg(long, default_value_t = 0.0)]
    pub min_overlap: f64,
    /// Declare a crop defect-free when its final merge costs at most this
    /// multiple of the median merge cost.
    #[arg(long)]
    pub min_separation: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Only run manifest rows of this group.
    #[arg(long)]
    pub group: Option<String>,
    #[arg(long)]
    pub dump_gabor_space: bool,
    #[arg(long)]
    pub dump_features: bool,
    #[arg(long)]
    pub dump_dendrogram: bool,
    /// Write every kernel's real and imaginary parts under `<out>/kernels`.
    #[arg(long)]
    pub dump_kernels: bool,
    /// JSON file whose keys override the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl PipelineArgs {
    pub fn to_config(&self) -> Result<RunConfig, CliError> {
        let cfg = RunConfig {
            input: self.input.clone(),
            manifest: self.manifest.clone(),
            period_rows: self.period_rows,
            period_cols: self.period_cols,
            scales: self.scales,
            orientations: self.orientations,
            sigma: self.sigma,
            kmax: self.kmax,
            spacing: self.spacing,
            padding: self.padding.into(),
            out: self.out.clone(),
            gt: self.gt.clone(),
            min_overlap: self.min_overlap,
            min_separation: self.min_separation,
            jobs: self.jobs,
            group: self.group.clone(),
            dump_gabor_space: self.dump_gabor_space,
            dump_features: self.dump_features,
            dump_dendrogram: self.dump_dendrogram,
            dump_kernels: self.dump_kernels,
        };
        match &self.config {
            Some(path) => cfg.merge_file(path),
            None => Ok(cfg),
        }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got '{s}'"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("'{v}': {e}"));
    Ok((parse(a)?, parse(b)?))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Checker,
    Stripes,
    Dots,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DefectArg {
    None,
    Bar,
    Hole,
    Blob,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PlacementArg {
    Aligned,
    Straddling,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Checker)]
    pub kind: KindArg,
    /// Units along rows and columns.
    #[arg(long, value_parser = parse_pair, default_value = "8x8")]
    pub periods: (usize, usize),
    /// Periodic unit size in pixels.
    #[arg(long, value_parser = parse_pair, default_value = "25x25")]
    pub unit: (usize, usize),
    #[arg(long, value_enum, default_value_t = DefectArg::None)]
    pub defect: DefectArg,
    #[arg(long, value_enum, default_value_t = PlacementArg::Aligned)]
    pub placement: PlacementArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// File stem; writes `<stem>.png` and `<stem>_gt.png`.
    #[arg(long, default_value = "synth")]
    pub name: String,
}

impl SynthArgs {
    pub fn spec(&self) -> Result<SynthSpec, CliError> {
        Ok(SynthSpec {
            kind: match self.kind {
                KindArg::Checker => TextureKind::Checker,
                KindArg::Stripes => TextureKind::Stripes,
                KindArg::Dots => TextureKind::Dots,
            },
            periods: self.periods,
            unit: Periodicity::new(self.unit.0, self.unit.1)?,
            defect: match self.defect {
                DefectArg::None => DefectKind::None,
                DefectArg::Bar => DefectKind::Bar,
                DefectArg::Hole => DefectKind::Hole,
                DefectArg::Blob => DefectKind::Blob,
            },
            placement: match self.placement {
                PlacementArg::Aligned => Placement::Aligned,
                PlacementArg::Straddling => Placement::Straddling,
            },
            seed: self.seed,
        })
    }
}

/// Runs `f` on a pool of `jobs` threads, or the global pool.
fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Pipeline(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn output_stem(input: &Path) -> String {
    input.file_stem().map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_json<V: Serialize>(value: &V, path: &Path) -> Result<(), CliError> {
    let file = File::create(path).map_err(pipeline_err(path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| CliError::Pipeline(format!("{}: {e}", path.display())))
}

fn write_features(report: &InspectionReport<f64>, path: &Path) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::Pipeline(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["crop", "block_row", "block_col", "energy"]).map_err(err)?;
    for grid in report.grids() {
        for i in 0..grid.rows {
            for j in 0..grid.cols {
                w.write_record([
                    grid.crop.corner.as_str().to_string(),
                    i.to_string(),
                    j.to_string(),
                    grid.energy(i, j).to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(pipeline_err(path.display()))
}

/// Files written by one `inspect` run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectOutputs {
    pub overlay: PathBuf,
    pub mask: PathBuf,
    pub report: PathBuf,
}

pub fn cmd_inspect(cfg: &RunConfig) -> Result<InspectOutputs, CliError> {
    let input = cfg.input.as_ref().ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let period = cfg.periodicity()?;
    let (kh, kw) = kernel_size_from_periodicity(period)?;
    let bank = cfg.bank()?.with_kernel_size(kh, kw);
    let mut opts = cfg.inspect_options()?;

    let image: Raster<f64> = load_grayscale(input)?;
    if let Some(gt) = &cfg.gt {
        let mask: Raster<f64> = load_grayscale(gt)?;
        opts.ground_truth = Some(mask.map(|v| if v > 0.5 { 1.0 } else { 0.0 }));
    }
    log::info!("{}: {}x{}, unit {}x{}", input.display(), image.height(), image.width(), period.rows, period.cols);
    let report = with_jobs(cfg.jobs, || inspect(&image, period, &bank, &opts))??;

    std::fs::create_dir_all(&cfg.out).map_err(pipeline_err(cfg.out.display()))?;
    let stem = output_stem(input);
    let path = |suffix: &str| cfg.out.join(format!("{stem}.{suffix}"));
    let outputs = InspectOutputs {
        overlay: path("overlay.png"),
        mask: path("mask.png"),
        report: path("report.json"),
    };
    save_overlay(&image, &report.edges, &outputs.overlay)?;
    save_grayscale(&report.mask, &outputs.mask)?;
    write_json(&report.summary(), &outputs.report)?;

    if cfg.dump_gabor_space {
        save_grayscale(&report.gabor_space.min_max_normalized(), path("gabor.png"))?;
    }
    if cfg.dump_features {
        write_features(&report, &path("features.csv"))?;
    }
    if cfg.dump_dendrogram {
        for crop in &report.crops {
            let p = path(&format!("dendrogram_{}.csv", crop.grid.crop.corner.as_str()));
            let file = File::create(&p).map_err(pipeline_err(p.display()))?;
            crop.dendrogram.write_csv(BufWriter::new(file))?;
        }
    }
    if cfg.dump_kernels {
        dump_kernels(&make_bank(&bank)?, cfg.out.join("kernels"))?;
    }
    log::info!("{} defective block labels across 4 crops", report.num_defective_blocks());
    Ok(outputs)
}

pub fn cmd_corpus(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let manifest = cfg.manifest.as_ref().ok_or_else(|| CliError::Usage("--manifest is required".into()))?;
    let opts = CorpusOptions { bank: cfg.bank()?, inspect: cfg.inspect_options()?, group: cfg.group.clone() };
    let report = with_jobs(cfg.jobs, || corpus_run_manifest(manifest, &opts))??;
    std::fs::create_dir_all(&cfg.out).map_err(pipeline_err(cfg.out.display()))?;
    let path = cfg.out.join("corpus.report.json");
    write_json(&report, &path)?;
    if report.images.is_empty() {
        return Err(CliError::Pipeline("manifest selected no rows".into()));
    }
    if report.failures > 0 {
        return Err(CliError::Pipeline(format!(
            "{} of {} rows failed; see {}",
            report.failures,
            report.images.len(),
            path.display()
        )));
    }
    Ok(path)
}

/// Writes `<stem>.png` and `<stem>_gt.png`; returns their paths.
pub fn cmd_synth(args: &SynthArgs) -> Result<(PathBuf, PathBuf), CliError> {
    let sample: synth::SynthSample<f64> = synth::generate(&args.spec()?)?;
    std::fs::create_dir_all(&args.out).map_err(pipeline_err(args.out.display()))?;
    let image = args.out.join(format!("{}.png", args.name));
    let gt = args.out.join(format!("{}_gt.png", args.name));
    save_grayscale(&sample.image, &image)?;
    save_grayscale(&sample.ground_truth, &gt)?;
    Ok((image, gt))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Inspect(args) => {
            let out = cmd_inspect(&args.to_config()?)?;
            println!("{}", out.report.display());
        }
        Command::Corpus(args) => {
            let path = cmd_corpus(&args.to_config()?)?;
            println!("{}", path.display());
        }
        Command::Synth(args) => {
            let (image, gt) = cmd_synth(&args)?;
            println!("{}\n{}", image.display(), gt.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn defaults_match_the_reference_bank() {
        let cfg = RunConfig::default();
        let bank = cfg.bank().unwrap();
        let reference = GaborBankConfig::<f64>::default();
        assert_eq!(bank, reference);
        assert_eq!(bank.num_kernels(), 40);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            input: Some("a.png".into()),
            period_rows: Some(25),
            period_cols: Some(30),
            min_separation: Some(1e5),
            ..RunConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::default().merge_json(serde_json::to_value(&cfg).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn json_overrides_flags() {
        let cfg = RunConfig { period_rows: Some(10), scales: 3, ..RunConfig::default() };
        let merged = cfg.merge_json(json!({"period_rows": 20, "padding": "wrap"})).unwrap();
        assert_eq!(merged.period_rows, Some(20));
        assert_eq!(merged.padding, PaddingMode::Wrap);
        assert_eq!(merged.scales, 3);
    }

    #[test]
    fn bad_config_is_a_usage_error() {
        let cfg = RunConfig::default();
        assert!(matches!(cfg.merge_json(json!({"nope": 1})), Err(CliError::Usage(_))));
        assert!(matches!(cfg.merge_json(json!([1, 2])), Err(CliError::Usage(_))));
        assert!(matches!(cfg.periodicity(), Err(CliError::Usage(_))));
        let bad = RunConfig { spacing: 1.0, ..RunConfig::default() };
        assert!(matches!(bad.bank(), Err(CliError::Usage(_))));
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("8x6").unwrap(), (8, 6));
        assert!(parse_pair("8").is_err());
        assert!(parse_pair("ax3").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
