use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use plc_noise::config::{InputFormat, RunConfig, Stage};
use plc_noise::ingest::TraceFormat;
use plc_noise::pipeline::{config_model, load_model, run_pipeline, write_synthetic_trace, RunStatus};
use plc_noise::Error;

#[derive(Parser)]
#[command(name = "plcnoise", version, about = "Large-scale PLC noise analysis and synthesis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sampling gap report
    Qa(Common),
    /// Per-frequency summary, regions, global distribution and moving statistics
    Spectrum(Common),
    /// KPSS/ADF tests and chunked stationarity curves
    Stationarity(Common),
    /// Autocorrelation and Ljung-Box tests
    Dependence(Common),
    /// Step-distribution fit and model selection
    Fit(Common),
    /// Burst run-length histograms and geometric fits
    Bursts(Common),
    /// Every analysis stage
    All(Common),
    /// Write a synthetic trace
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Trace files (CSV or packed binary)
    inputs: Vec<PathBuf>,
    /// Run configuration file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// KEY=VALUE override, repeatable
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Report directory
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Input format: auto, csv or packed
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Destination trace; the extension picks the format unless --format is given
    #[arg(short, long)]
    output: PathBuf,
    /// Model JSON or a fit report holding one; defaults to the synth.* keys
    #[arg(short, long)]
    model: Option<PathBuf>,
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(path: Option<&PathBuf>, overrides: &[String]) -> plc_noise::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in overrides {
        cfg.apply_override(o)?;
    }
    Ok(cfg)
}

fn build_config(common: &Common, stages: &[Stage]) -> plc_noise::Result<RunConfig> {
    let mut cfg = load_config(common.config.as_ref(), &common.overrides)?;
    if !common.inputs.is_empty() {
        cfg.inputs = common.inputs.clone();
    }
    if let Some(o) = &common.output {
        cfg.output_dir = o.clone();
    }
    if let Some(f) = &common.format {
        cfg.set("format", f)?;
    }
    if let Some(t) = common.threads {
        cfg.threads = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if !stages.is_empty() {
        cfg.stages = stages.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn analyse(common: &Common, stages: &[Stage]) -> i32 {
    let cfg = match build_config(common, stages) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return RunStatus::ConfigError.exit_code();
        }
    };
    match run_pipeline(&cfg) {
        Ok(outcome) => {
            if let Some(e) = &outcome.manifest.ingest.error {
                eprintln!("ingest failed: {e}");
            }
            for s in outcome.manifest.stages.iter().filter(|s| s.error.is_some()) {
                eprintln!("stage {} failed: {}", s.stage, s.error.as_deref().unwrap_or(""));
            }
            eprintln!("report written to {}", outcome.output_dir.display());
            outcome.status.exit_code()
        }
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            RunStatus::ConfigError.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            RunStatus::StageFailure.exit_code()
        }
    }
}

fn synth(args: &SynthArgs) -> i32 {
    let prepared = (|| {
        let mut cfg = load_config(args.config.as_ref(), &args.overrides)?;
        if let Some(t) = args.ticks {
            cfg.synth_ticks = t;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        let format = match &args.format {
            Some(f) => f.parse::<TraceFormat>()?,
            None => InputFormat::Auto.resolve(&args.output),
        };
        let mut model = match &args.model {
            Some(p) => load_model(p).map_err(|e| Error::Config(format!("model {}: {e}", p.display())))?,
            None => config_model(&cfg)?,
        };
        if args.seed.is_some() || args.model.is_none() {
            model.seed = cfg.seed;
        }
        let freqs: Vec<usize> = if cfg.synth_frequencies.is_empty() {
            (0..model.frequencies()).collect()
        } else {
            cfg.synth_frequencies.clone()
        };
        if let Some(&f) = freqs.iter().find(|&&f| f >= model.frequencies()) {
            return Err(Error::Config(format!("frequency {f} outside the model's grid")));
        }
        Ok((cfg, model, freqs, format))
    })();
    let (cfg, model, freqs, format) = match prepared {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return RunStatus::ConfigError.exit_code();
        }
    };
    match write_synthetic_trace(&model, &freqs, cfg.synth_ticks, cfg.sampling_period_s, &args.output, format) {
        Ok(n) => {
            eprintln!("wrote {n} samples to {}", args.output.display());
            RunStatus::Ok.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            RunStatus::StageFailure.exit_code()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Qa(c) => analyse(c, &[Stage::Qa]),
        Command::Spectrum(c) => analyse(c, &[Stage::Spectrum, Stage::Distribution, Stage::MovingStats]),
        Command::Stationarity(c) => analyse(c, &[Stage::Stationarity]),
        Command::Dependence(c) => analyse(c, &[Stage::Dependence]),
        Command::Fit(c) => analyse(c, &[Stage::Fit]),
        Command::Bursts(c) => analyse(c, &[Stage::Bursts]),
        Command::All(c) => analyse(c, &[]),
        Command::Synth(a) => synth(a),
    };
    ExitCode::from(code as u8)
}
