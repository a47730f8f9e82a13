//! `vapsr` command line.
//!
//! Exit codes: 0 success, 2 usage error, 3 data or format error, 4 numeric failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::archive::{load_weights, save_weights};
use super::png::{read_png, write_png};
use crate::analysis::{calibrate, roadmap_report};
use crate::autograd::{train_toy, AdamConfig, DEFAULT_LEARNING_RATE};
use crate::error::{Error, Result};
use crate::metrics::{bicubic_resize, evaluate_y, ImagePlane};
use crate::model::{presets, ModelConfig, Network};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "vapsr", version, about = "VapSR super-resolution: inference, analysis and toy training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Upscale a PNG with a weight archive or a seeded random preset.
    Upscale(UpscaleArgs),
    /// Parameter, Multi-Adds and receptive-field report.
    Analyze(AnalyzeArgs),
    /// Overfit one image pair and report losses.
    TrainToy(TrainArgs),
    /// Y-channel PSNR and SSIM between two PNGs.
    Compare(CompareArgs),
    /// Re-run the preset calibration search.
    Calibrate(OutputArgs),
    /// Write a freshly initialised weight archive.
    InitWeights(InitArgs),
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Named preset (see `analyze --catalog all`).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Model config JSON file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<Option<ModelConfig>> {
        match (&self.preset, &self.config) {
            (Some(name), _) => presets::preset(name).map(Some),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                ModelConfig::from_json(&text).map(Some)
            }
            (None, None) => Ok(None),
        }
    }

    fn require(&self) -> Result<ModelConfig> {
        self.resolve()?
            .ok_or_else(|| Error::config("one of --preset or --config is required"))
    }
}

#[derive(Args, Debug)]
pub struct UpscaleArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Weight archive; its embedded config must match --preset/--config if given.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Seed for random weights when no archive is given.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Catalog {
    Roadmap,
    Sweeps,
    Main,
    All,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub catalog: Option<Catalog>,
    /// Write CSV here; the aligned text table always goes to stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// HR target image.
    #[arg(long)]
    pub hr_input: PathBuf,
    /// LR input; bicubic-downscaled from the HR image when omitted.
    #[arg(long)]
    pub lr_input: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV of (step, l1_loss).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub weights_out: Option<PathBuf>,
    #[arg(long)]
    pub ema_out: Option<PathBuf>,
    /// Pixels cropped per side before PSNR/SSIM; defaults to the scale.
    #[arg(long)]
    pub border_crop: Option<usize>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Pixels cropped per side; defaults to --scale.
    #[arg(long)]
    pub border_crop: Option<usize>,
    #[arg(long, default_value_t = 4)]
    pub scale: usize,
    /// Round Y to 8-bit levels before measuring.
    #[arg(long)]
    pub quantize: bool,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

/// Formats a PSNR value, with `inf` for identical images.
pub fn format_psnr(p: f64) -> String {
    if p.is_infinite() {
        "inf".to_owned()
    } else {
        format!("{p:.4}")
    }
}

fn upscale(args: &UpscaleArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let expected = args.model.resolve()?;
    let net = match &args.weights {
        Some(path) => load_weights(path, expected.as_ref())?,
        None => {
            let cfg = expected.ok_or_else(|| {
                Error::config("upscale needs --weights or one of --preset/--config")
            })?;
            Network::init(cfg, args.seed)?
        }
    };
    let lr = read_png(&args.input)?;
    let sr = net.forward(&lr.to_tensor())?;
    let sr = ImagePlane::from_tensor(&sr, 0)?;
    write_png(&args.output, &sr)?;
    writeln!(
        out,
        "{}: {}x{} -> {}x{}",
        args.output.display(),
        lr.width(),
        lr.height(),
        sr.width(),
        sr.height()
    )
    .ok();
    Ok(())
}

fn analyze(args: &AnalyzeArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let configs = match (args.catalog, args.model.resolve()?) {
        (Some(_), Some(_)) => {
            return Err(Error::config("--catalog cannot be combined with --preset/--config"))
        }
        (Some(Catalog::Roadmap), None) => presets::roadmap(),
        (Some(Catalog::Sweeps), None) => presets::sweeps(),
        (Some(Catalog::Main), None) => presets::main_models(),
        (Some(Catalog::All), None) => presets::variant_catalog(),
        (None, Some(cfg)) => vec![cfg],
        (None, None) => return Err(Error::config("one of --catalog, --preset or --config is required")),
    };
    let report = roadmap_report(&configs)?;
    if let Some(path) = &args.csv {
        write_file(path, report.to_csv().as_bytes())?;
    }
    write!(out, "{}", report.to_text()).ok();
    Ok(())
}

fn train(args: &TrainArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let cfg = match args.model.resolve()? {
        Some(cfg) => cfg,
        None => presets::tiny(),
    };
    let hr = read_png(&args.hr_input)?;
    let lr = match &args.lr_input {
        Some(path) => read_png(path)?,
        None => {
            let s = cfg.scale;
            if hr.height() % s != 0 || hr.width() % s != 0 {
                return Err(Error::shape(format!(
                    "HR image {}x{} is not divisible by scale {s}",
                    hr.width(),
                    hr.height()
                )));
            }
            bicubic_resize(&hr, hr.height() / s, hr.width() / s)?.quantize8()
        }
    };
    let adam = AdamConfig {
        learning_rate: args.lr,
        ..AdamConfig::default()
    };
    let outcome = train_toy(cfg.clone(), &lr.to_tensor(), &hr.to_tensor(), args.iterations, adam, args.seed)?;

    if let Some(path) = &args.history {
        let mut csv = String::from("step,l1_loss\n");
        for (i, l) in outcome.loss_history.iter().enumerate() {
            csv.push_str(&format!("{i},{l:.9e}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    if let Some(path) = &args.weights_out {
        save_weights(path, &outcome.weights)?;
    }
    if let Some(path) = &args.ema_out {
        save_weights(path, &outcome.ema)?;
    }

    let crop = args.border_crop.unwrap_or(cfg.scale);
    let first = outcome.loss_history.first().copied();
    let last = outcome.loss_history.last().copied();
    if let (Some(f), Some(l)) = (first, last) {
        writeln!(out, "l1 first {f:.6} last {l:.6} ratio {:.4}", l / f).ok();
    }
    for (name, net) in [("raw", &outcome.weights), ("ema", &outcome.ema)] {
        let sr = ImagePlane::from_tensor(&net.forward(&lr.to_tensor())?, 0)?.clamp01();
        let (p, s) = evaluate_y(&sr, &hr, crop, false)?;
        writeln!(out, "{name}: psnr_y {} dB, ssim_y {s:.6}", format_psnr(p)).ok();
    }
    Ok(())
}

fn compare(args: &CompareArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let a = read_png(&args.a)?;
    let b = read_png(&args.b)?;
    let crop = args.border_crop.unwrap_or(args.scale);
    let (p, s) = evaluate_y(&a, &b, crop, args.quantize)?;
    writeln!(out, "psnr_y {}", format_psnr(p)).ok();
    writeln!(out, "ssim_y {s:.6}").ok();
    Ok(())
}

fn calibrate_cmd(args: &OutputArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let text = calibrate().to_text();
    match &args.output {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            write!(out, "{text}").ok();
            Ok(())
        }
    }
}

fn init_weights(args: &InitArgs, out: &mut dyn std::io::Write) -> Result<()> {
    let cfg = args.model.require()?;
    let net = Network::init(cfg, args.seed)?;
    save_weights(&args.output, &net)?;
    writeln!(
        out,
        "{}: {} tensors, {} scalars",
        args.output.display(),
        net.params().len(),
        net.params().scalar_count()
    )
    .ok();
    Ok(())
}

/// Runs a parsed command, writing normal output to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<()> {
    match &cli.command {
        Command::Upscale(a) => upscale(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::TrainToy(a) => train(a, out),
        Command::Compare(a) => compare(a, out),
        Command::Calibrate(a) => calibrate_cmd(a, out),
        Command::InitWeights(a) => init_weights(a, out),
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, S>(args: I) -> ExitCode
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
