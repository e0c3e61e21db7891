//! Command-line surface: `run`, `serve` and `synth`.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tivy_core::export::{encode_render_binary, render_buffers, summary_document, SummaryDocument};
use tivy_core::extract::CandidateOrder;
use tivy_core::ingest::{load_csv, normalize, CsvOptions, IngestError, Layout, Normalization};
use tivy_core::model::{SummaryParams, TimeSeriesDataset};
use tivy_core::pipeline::{self, PipelineError, PipelineRun};
use tivy_core::synthetic::{six_class_dataset, DurationMix, ShapeClass, ShapeConfig};

#[derive(Debug, Parser)]
#[command(name = "tivy", version, about = "Visual summaries of large time-series collections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a CSV file.
    Run(RunArgs),
    /// Serve datasets and summaries over HTTP.
    Serve(ServeArgs),
    /// Write the six-class synthetic benchmark as CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Rows,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    None,
    Zscore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Random,
    Deterministic,
}

/// Input parsing flags shared by `run` and the service.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long, value_enum, default_value = "rows")]
    pub layout: LayoutArg,
    /// The first line is a header.
    #[arg(long)]
    pub header: bool,
    /// Rows layout: the first column holds series ids.
    #[arg(long)]
    pub id_column: bool,
    #[arg(long)]
    pub trim_trailing_zeros: bool,
    /// Resample every series onto a uniform grid of N points.
    #[arg(long, value_name = "N")]
    pub interpolate: Option<usize>,
    #[arg(long, value_enum, default_value = "none")]
    pub normalize: NormalizeArg,
}

impl InputArgs {
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            layout: match self.layout {
                LayoutArg::Rows => Layout::RowsAreSeries,
                LayoutArg::Long => Layout::Long,
            },
            has_header: self.header,
            id_column: self.id_column,
            trim_trailing_zeros: self.trim_trailing_zeros,
            interpolate: self.interpolate,
        }
    }

    pub fn normalization(&self) -> Normalization {
        match self.normalize {
            NormalizeArg::None => Normalization::None,
            NormalizeArg::Zscore => Normalization::Zscore,
        }
    }
}

/// Summary parameters.
#[derive(Debug, Clone, Args)]
pub struct ParamArgs {
    /// Base window l, in samples.
    #[arg(long, default_value_t = 25)]
    pub window_size: usize,
    /// Clustering strength.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub minsup: usize,
    /// LSH quantization width w.
    #[arg(long, default_value_t = 1.0)]
    pub lsh_width: f64,
    /// Number of ANDed LSH hashes H.
    #[arg(long, default_value_t = 30)]
    pub lsh_hashes: usize,
    #[arg(long, default_value_t = 1)]
    pub samples_per_bucket: usize,
    /// Cluster every segment directly instead of sampling LSH buckets.
    #[arg(long)]
    pub no_lsh: bool,
    #[arg(long, default_value_t = 16)]
    pub max_k: usize,
    #[arg(long, default_value_t = 10)]
    pub gap_references: usize,
    /// Sakoe-Chiba radius for clustering DTW; 0 means unconstrained.
    #[arg(long, default_value_t = 0)]
    pub band_radius: usize,
    /// Search every grouping of base windows into intervals.
    #[arg(long)]
    pub adaptive: bool,
    /// Largest number of base windows the adaptive search accepts.
    #[arg(long, default_value_t = 14)]
    pub max_intervals: usize,
    #[arg(long, value_enum, default_value = "random")]
    pub candidate_order: OrderArg,
    #[arg(long, default_value_t = 64)]
    pub density_rows: usize,
    #[arg(long, default_value_t = 512)]
    pub density_max_cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl ParamArgs {
    pub fn params(&self) -> SummaryParams {
        SummaryParams {
            window_size: self.window_size,
            alpha: self.alpha,
            minsup: self.minsup,
            lsh_width: self.lsh_width,
            lsh_hashes: self.lsh_hashes,
            samples_per_bucket: self.samples_per_bucket,
            seed: self.seed,
            use_lsh: !self.no_lsh,
            max_k: self.max_k,
            gap_references: self.gap_references,
            band_radius: (self.band_radius > 0).then_some(self.band_radius),
            adaptive: self.adaptive,
            max_intervals: self.max_intervals,
            density_rows: self.density_rows,
            density_max_cols: self.density_max_cols,
            candidate_order: match self.candidate_order {
                OrderArg::Random => CandidateOrder::Random,
                OrderArg::Deterministic => CandidateOrder::Deterministic,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub input_args: InputArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Summary JSON destination.
    #[arg(long, default_value = "summary.json")]
    pub output: PathBuf,
    /// Render buffers as JSON.
    #[arg(long)]
    pub render: Option<PathBuf>,
    /// Render buffers in the compact binary form.
    #[arg(long)]
    pub render_binary: Option<PathBuf>,
    /// Include stage timings in the summary JSON.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of CSV files loaded at startup; each file stem becomes a
    /// dataset id.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[command(flatten)]
    pub input_args: InputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MixArg {
    Whole,
    Halves,
    Quarters,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "quarters")]
    pub mix: MixArg,
    #[arg(long, default_value_t = 400)]
    pub length: usize,
    #[arg(long, default_value_t = 100)]
    pub per_combination: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the true class of every sample.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("validation: {0}")]
    Validation(String),
    #[error("pipeline: {0}")]
    Pipeline(PipelineError),
    #[error("io: {0}")]
    Io(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Pipeline(e)
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Ingest(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Pipeline(_) | CliError::Io(_) => 1,
        }
    }

    /// One line, `error: <kind>: <message>`.
    pub fn line(&self) -> String {
        format!("error: {self}").replace(['\n', '\r'], " ")
    }
}

fn io_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn load_input(path: &std::path::Path, args: &InputArgs) -> Result<TimeSeriesDataset, CliError> {
    let ds = load_csv(path, &args.csv_options())?;
    Ok(normalize(&ds, args.normalization())?)
}

pub struct RunReport {
    pub run: PipelineRun,
    pub document: SummaryDocument,
}

pub fn render_json(value: &impl serde::Serialize) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("summary types serialize");
    text.push('\n');
    text
}

/// Executes `tivy run`: writes the summary and any requested buffers.
pub fn run(args: &RunArgs) -> Result<RunReport, CliError> {
    let ds = load_input(&args.input, &args.input_args)?;
    let params = args.params.params();
    let run = pipeline::run(&ds, &params)?;
    let document = summary_document(&run.artifact, &ds, args.timings.then_some(run.timings));
    fs::write(&args.output, render_json(&document)).map_err(|e| io_err(&args.output, e))?;
    if args.render.is_some() || args.render_binary.is_some() {
        let buffers = render_buffers(&run.artifact, &ds);
        if let Some(p) = &args.render {
            fs::write(p, render_json(&buffers)).map_err(|e| io_err(p, e))?;
        }
        if let Some(p) = &args.render_binary {
            fs::write(p, encode_render_binary(&buffers)).map_err(|e| io_err(p, e))?;
        }
    }
    Ok(RunReport { run, document })
}

fn class_name(c: ShapeClass) -> String {
    match serde_json::to_value(c) {
        Ok(serde_json::Value::String(s)) => s,
        _ => format!("{c:?}"),
    }
}

/// Executes `tivy synth`.
pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let mix = match args.mix {
        MixArg::Whole => DurationMix::Whole,
        MixArg::Halves => DurationMix::Halves,
        MixArg::Quarters => DurationMix::Quarters,
    };
    if args.length == 0 || args.length % mix.pieces() != 0 {
        return Err(CliError::Validation(format!(
            "length {} must be a positive multiple of {}",
            args.length,
            mix.pieces()
        )));
    }
    let cfg = ShapeConfig {
        noise: args.noise,
        ..ShapeConfig::default()
    };
    let data = six_class_dataset(mix, args.length, args.per_combination, &cfg, args.seed);
    let mut w = csv::Writer::from_path(&args.output).map_err(|e| io_err(&args.output, e))?;
    for (i, row) in data.dataset.rows().enumerate() {
        let mut rec = vec![format!("s{i}")];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| io_err(&args.output, e))?;
    }
    w.flush().map_err(|e| io_err(&args.output, e))?;
    if let Some(path) = &args.truth {
        let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
        for (i, row) in data.truth.iter().enumerate() {
            let mut rec = vec![format!("s{i}")];
            rec.extend(row.iter().map(|c| class_name(*c)));
            w.write_record(&rec).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> RunArgs {
        let mut argv = vec!["tivy", "run", "--input", "x.csv"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Run(r) => r,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_match_summary_params() {
        assert_eq!(parse(&[]).params.params(), SummaryParams::default());
    }

    #[test]
    fn flags_map_onto_params() {
        let p = parse(&[
            "--window-size", "50", "--alpha", "2", "--minsup", "7", "--lsh-width", "0.5", "--lsh-hashes", "4",
            "--samples-per-bucket", "3", "--no-lsh", "--band-radius", "6", "--adaptive", "--seed", "9",
            "--candidate-order", "deterministic",
        ])
        .params
        .params();
        assert_eq!((p.window_size, p.alpha, p.minsup), (50, 2.0, 7));
        assert_eq!((p.lsh_width, p.lsh_hashes, p.samples_per_bucket), (0.5, 4, 3));
        assert!(!p.use_lsh && p.adaptive);
        assert_eq!(p.band_radius, Some(6));
        assert_eq!(p.seed, 9);
        assert_eq!(p.candidate_order, CandidateOrder::Deterministic);
        assert_eq!(parse(&["--band-radius", "0"]).params.params().band_radius, None);
    }

    #[test]
    fn input_flags_map_onto_csv_options() {
        let r = parse(&["--layout", "long", "--header", "--trim-trailing-zeros", "--interpolate", "64", "--normalize", "zscore"]);
        let o = r.input_args.csv_options();
        assert_eq!(o.layout, Layout::Long);
        assert!(o.has_header && o.trim_trailing_zeros && !o.id_column);
        assert_eq!(o.interpolate, Some(64));
        assert_eq!(r.input_args.normalization(), Normalization::Zscore);
    }

    #[test]
    fn error_lines_and_exit_codes() {
        let e = CliError::Validation("minsup must be >= 1\nsecond".into());
        assert_eq!(e.exit_code(), 3);
        assert_eq!(e.line(), "error: validation: minsup must be >= 1 second");
        assert_eq!(CliError::Io("x".into()).exit_code(), 1);
        let ingest: CliError = IngestError::Empty.into();
        assert_eq!(ingest.exit_code(), 2);
        assert!(ingest.line().starts_with("error: ingest: "));
    }
}
