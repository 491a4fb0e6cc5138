use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use radarode::ecg_ode::{generate_piece_with, PieceOptions, N_SCALES};
use radarode::io::{self, Format};
use radarode::link_budget::{LinkBudgetConfig, LinkBudgetReport};
use radarode::metrics::{delineate, detect_r_peaks, evaluate};
use radarode::ode_fit::{fit_piece, FitConfig, FitReport};
use radarode::pipeline::{channel_energy, consensus, run_pipeline, PipelineConfig, SynthInput};
use radarode::ppi::{estimate_ppi, PpiConfig, PpiReport};
use radarode::signal_model::{synth_long_term, synth_single_cycle, LongTermSpec, MultiChannelSignal};
use radarode::spectral::{cwt, pse, sst, stft, Spectrogram, StftConfig, WaveletConfig};
use radarode::trace::EcgTrace;
use radarode::{Error, Result};

#[derive(Parser)]
#[command(name = "radarode", version, about = "Radar cardiac vibration to ECG toolkit")]
struct Cli {
    /// Random seed for synthesis and fitting.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON file with the subcommand's settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Encoding of tabular outputs.
    #[arg(long, global = true, value_parser = parse_format)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize chest displacement.
    Synth(SynthArgs),
    /// Time-frequency representation of a signal.
    Spec(SpecArgs),
    /// Beat-interval estimation over all channels.
    Ppi(InputArgs),
    /// Generate one ECG piece from the dynamical model.
    EcgGen(EcgGenArgs),
    /// Fit the dynamical model to a target piece.
    Fit(FitArgs),
    /// Compare a reconstructed ECG with a reference.
    Eval(EvalArgs),
    /// Radar link budget.
    Linkbudget,
    /// Full reconstruction run.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// One cycle of this many seconds instead of a long recording.
    #[arg(long)]
    single: Option<f64>,
}

#[derive(Args)]
struct InputArgs {
    /// Multichannel signal CSV.
    #[arg(long)]
    input: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecMethod {
    Stft,
    Cwt,
    Sst,
}

#[derive(Args)]
struct SpecArgs {
    #[arg(value_enum)]
    method: SpecMethod,
    #[arg(long)]
    input: PathBuf,
    /// Channel to transform; the per-sample median of all channels when absent.
    #[arg(long)]
    channel: Option<usize>,
    /// Also report the spectral entropy.
    #[arg(long)]
    pse: bool,
}

#[derive(Args)]
struct EcgGenArgs {
    /// Comma-separated scale vector of 15 values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    p: Option<Vec<f64>>,
    /// Beat interval, seconds.
    #[arg(long, default_value_t = 1.0)]
    ppi: f64,
    /// Shift, seconds within the beat.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
}

#[derive(Args)]
struct FitArgs {
    /// CSV whose last column is the target piece.
    #[arg(long)]
    target: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value = "recon")]
    recon_column: String,
    #[arg(long, default_value = "truth")]
    truth_column: String,
    /// Sample rate of both traces, Hz.
    #[arg(long, default_value_t = 200.0)]
    rate: f64,
}

#[derive(Args)]
struct PipelineArgs {
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct SpecSettings {
    stft: StftConfig,
    wavelet: Option<WaveletConfig>,
    sst_bins: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct PieceSettings {
    p: Option<Vec<f64>>,
    piece: PieceOptions,
}

#[derive(Serialize)]
struct PieceRecord<'a> {
    p: &'a [f64],
    omega: f64,
    tau: f64,
    piece: &'a [f64],
}

#[derive(Serialize)]
struct FitRecord<'a> {
    #[serde(flatten)]
    report: FitReport,
    piece: &'a [f64],
}

fn config<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> Result<T> {
    path.as_deref().map_or_else(|| Ok(T::default()), io::read_json)
}

fn run(cli: Cli) -> Result<()> {
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Synth(a) => synth(&cli.config, cli.seed, a, out),
        Command::Spec(a) => spec(&cli.config, cli.format.unwrap_or(Format::Bin), a, out),
        Command::Ppi(a) => {
            let cfg: PpiConfig = config(&cli.config)?;
            let sig = io::read_signal_csv(&a.input)?;
            let plots = channel_energy(&sig, &WaveletConfig::default(), 64)?;
            let series = estimate_ppi(&plots, &cfg)?;
            let report = PpiReport::new(&series, &cfg);
            match cli.format.unwrap_or_default() {
                Format::Csv => {
                    let (t, p): (Vec<f64>, Vec<f64>) = series.estimates().into_iter().unzip();
                    io::write_columns_csv(&out.join("ppi.csv"), &["t0", "ppi"], &[&t, &p])
                }
                _ => io::write_json(&out.join("ppi.json"), &report),
            }
        }
        Command::EcgGen(a) => {
            let s: PieceSettings = config(&cli.config)?;
            let p = a.p.or(s.p).unwrap_or_else(|| vec![0.0; N_SCALES]);
            if !(a.ppi > 0.0) {
                return Err(Error::Invalid("ppi must be positive".into()));
            }
            let omega = 2.0 * PI / a.ppi;
            let tau = a.tau / a.ppi;
            let piece = generate_piece_with(&p, omega, tau, &s.piece)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Json => io::write_json(
                    &out.join("piece.json"),
                    &PieceRecord {
                        p: &p,
                        omega,
                        tau,
                        piece: &piece,
                    },
                ),
                _ => io::write_piece_csv(&out.join("piece.csv"), &piece),
            }
        }
        Command::Fit(a) => {
            let cfg: FitConfig = config(&cli.config)?;
            let target = io::read_column_csv(&a.target)?;
            let started = std::time::Instant::now();
            let fit = fit_piece(&target, &cfg, cli.seed)?;
            let report = FitReport::new(&fit, Some(started.elapsed().as_secs_f64()));
            io::write_piece_csv(&out.join("fitted.csv"), &fit.piece)?;
            io::write_json(
                &out.join("fit.json"),
                &FitRecord {
                    report,
                    piece: &fit.piece,
                },
            )
        }
        Command::Eval(a) => {
            let load = |path: &Path, col: &str| -> Result<EcgTrace> {
                let t = EcgTrace::new(io::read_named_column(path, col)?, a.rate)?;
                delineate(&t, &detect_r_peaks(&t))
            };
            let report = evaluate(&load(&a.recon, &a.recon_column)?, &load(&a.truth, &a.truth_column)?)?;
            io::write_json(&out.join("metrics.json"), &report)
        }
        Command::Linkbudget => {
            let cfg: LinkBudgetConfig = config(&cli.config)?;
            let report = LinkBudgetReport::new(&cfg)?;
            print!("{}", report.table());
            match cli.format.unwrap_or_default() {
                Format::Csv => io::write_columns_csv(
                    &out.join("linkbudget.csv"),
                    &["range_m", "received_power_dbm", "min_detectable_power_dbm", "max_range_m"],
                    &[
                        &[report.range_m],
                        &[report.received_power_dbm],
                        &[report.min_detectable_power_dbm],
                        &[report.max_range_m],
                    ],
                ),
                _ => io::write_json(&out.join("linkbudget.json"), &report),
            }
        }
        Command::Pipeline(a) => {
            let mut cfg: PipelineConfig = config(&cli.config)?;
            cfg.seed = cli.seed;
            if a.threads.is_some() {
                cfg.threads = a.threads;
            }
            if let Some(f) = cli.format {
                cfg.format = f;
            }
            let summary = run_pipeline(&cfg, out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }
    }
}

fn synth(cfg: &Option<PathBuf>, seed: u64, a: SynthArgs, out: &Path) -> Result<()> {
    let s: SynthInput = config(cfg)?;
    match a.single {
        Some(duration) => {
            let rate = s.long_term.sample_rate;
            let x = synth_single_cycle(&s.model, duration, rate, seed)?;
            io::write_signal_csv(&out.join("signal.csv"), &MultiChannelSignal::new(rate, 0.0, vec![x])?)
        }
        None => {
            let spec = LongTermSpec { seed, ..s.long_term };
            let r = synth_long_term(&s.model, &spec)?;
            io::write_signal_csv(&out.join("signal.csv"), &r.signal)?;
            io::write_json(&out.join("truth.json"), &r.truth)
        }
    }
}

fn spec(cfg: &Option<PathBuf>, format: Format, a: SpecArgs, out: &Path) -> Result<()> {
    let s: SpecSettings = config(cfg)?;
    let sig = io::read_signal_csv(&a.input)?;
    let x = match a.channel {
        Some(c) => sig
            .data
            .get(c)
            .cloned()
            .ok_or_else(|| Error::Invalid(format!("channel {c} out of range ({} channels)", sig.channels())))?,
        None => consensus(&sig),
    };
    let wavelet = s.wavelet.unwrap_or_default();
    let (stem, mut spec): (&str, Spectrogram) = match a.method {
        SpecMethod::Stft => ("stft", stft(&x, sig.sample_rate, &s.stft)?),
        SpecMethod::Cwt => ("cwt", cwt(&x, sig.sample_rate, &wavelet)?),
        SpecMethod::Sst => ("sst", sst(&x, sig.sample_rate, &wavelet, s.sst_bins.unwrap_or(64))?),
    };
    for t in &mut spec.times {
        *t += sig.start_time;
    }
    io::write_spectrogram(out, stem, &spec, format)?;
    if a.pse {
        let h = pse(&spec)?;
        println!("pse={h}");
        io::write_json(&out.join(format!("{stem}_pse.json")), &serde_json::json!({ "pse": h }))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
