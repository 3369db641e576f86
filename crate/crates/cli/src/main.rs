//! `hbcauth` command-line front end.
//!
//! Results go to stdout (CSV for grids, JSON for single records); diagnostics
//! go to stderr. Exit status: 0 success, 1 domain error, 2 usage error.

use std::error::Error;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hbcauth::channel::{hum_sweep, write_sweep_csv, ReceiveMode, SweepConfig};
use hbcauth::cipher::{ctr_crypt, CipherKey};
use hbcauth::codec;
use hbcauth::design::{
    evaluate, figure4_export, table2, write_figure4_csv, Allocation, OnBodyChannel, PowerSource, SensorType,
    SystemConfig, TeLocation,
};
use hbcauth::energy::{EnergyParams, TeVariant};
use hbcauth::fingerprint::{extract_template, read_image, read_raw, synthetic_print, write_pgm, Algorithm};
use hbcauth::matcher::{Decision, Gallery, MatchParams};
use hbcauth::sim::{run_scenario, verify_against_analytic, write_trace_csv, ScenarioFile};

type CliResult = Result<(), Box<dyn Error>>;

#[derive(Parser)]
#[command(
    name = "hbcauth",
    version,
    about = "Energy model, fingerprint pipeline and body-channel tools for wearable authentication"
)]
struct Cli {
    /// TOML file overriding energy parameters (unlisted fields keep defaults).
    #[arg(long, global = true, value_name = "FILE")]
    params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum TeArg {
    Sensor,
    Hub,
    Cloud,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Wban,
    Hbc,
}

#[derive(Clone, Copy, ValueEnum)]
enum SensorArg {
    Capacitive,
    Optical,
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerArg {
    RfHarvest,
    CoinCell,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    High,
    Light,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::High => TeVariant::HighAccuracy,
            AlgoArg::Light => TeVariant::Lightweight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Direct,
    Iad,
}

impl From<ModeArg> for ReceiveMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Direct => ReceiveMode::DirectSample,
            ModeArg::Iad => ReceiveMode::IntegrateAndDump,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sensor retries per hour under RF harvesting, by sensor and allocation (CSV).
    Table2 {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Sensor energy breakdown and lifetime for every sensor-side configuration (CSV).
    Figure4 {
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Lifetime report for one configuration (JSON).
    Explore {
        /// Where template extraction runs.
        #[arg(long, value_enum, default_value = "hub")]
        te: TeArg,
        /// On-body link between sensor and hub.
        #[arg(long, value_enum, default_value = "hbc")]
        channel: ChannelArg,
        #[arg(long, value_enum, default_value = "capacitive")]
        sensor: SensorArg,
        #[arg(long, value_enum, default_value = "rf-harvest")]
        power: PowerArg,
        /// Hub-to-gateway LoRa distance in meters.
        #[arg(long, default_value_t = 1000.0)]
        distance: f64,
        /// Extraction algorithm.
        #[arg(long, value_enum, default_value = "high")]
        algo: AlgoArg,
    },
    /// Extract a minutiae template from a PGM (or raw) image.
    Extract {
        #[arg(long, value_enum, default_value = "high")]
        algo: AlgoArg,
        /// Treat the input as a headerless 8-bit buffer of this size.
        #[arg(long, value_name = "WxH", value_parser = parse_size)]
        raw: Option<(usize, usize)>,
        image: PathBuf,
        #[arg(short, long, value_name = "T.fpt")]
        output: PathBuf,
    },
    /// Add a template to a gallery directory under a label.
    Enroll { label: String, template: PathBuf, gallery: PathBuf },
    /// Score a probe template against every gallery entry (JSON, best first).
    Match {
        probe: PathBuf,
        gallery: PathBuf,
        /// JSON file of matcher parameters.
        #[arg(long, value_name = "FILE")]
        match_params: Option<PathBuf>,
    },
    /// PRESENT-80 counter-mode encryption of a file.
    Encrypt(CryptArgs),
    /// Inverse of `encrypt` (the same keystream operation).
    Decrypt(CryptArgs),
    /// BER and eye opening against hum amplitude for both receivers (CSV).
    ChannelSweep {
        /// Hum amplitudes relative to the signal (comma separated).
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0])]
        hum: Vec<f64>,
        #[arg(long, value_enum, value_delimiter = ',', default_values = ["direct", "iad"])]
        mode: Vec<ModeArg>,
        /// Seeds 1..=N, one payload and noise draw each.
        #[arg(long, default_value_t = 4)]
        seeds: u64,
        /// Gaussian noise standard deviation.
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        /// First-order high-pass cutoff in Hz; 0 disables it.
        #[arg(long, default_value_t = 10_000.0)]
        highpass: f64,
        #[arg(long, default_value_t = 176)]
        payload_len: usize,
    },
    /// Run an end-to-end scenario (JSON report).
    Simulate {
        scenario: PathBuf,
        /// Override the scenario's request limit.
        #[arg(long)]
        requests: Option<u64>,
        /// Write the per-event energy trace as CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Include a comparison with the closed-form model.
        #[arg(long)]
        verify: bool,
    },
    /// Write a seeded synthetic fingerprint as PGM.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "WxH", value_parser = parse_size, default_value = "128x128")]
        size: (usize, usize),
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(clap::Args)]
struct CryptArgs {
    /// 80-bit key as 20 hex digits.
    #[arg(long)]
    key: String,
    /// 64-bit counter-block nonce in hex.
    #[arg(long, default_value = "0")]
    nonce: String,
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WIDTHxHEIGHT")?;
    let n = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v}: {e}"));
    Ok((n(w)?, n(h)?))
}

fn read(path: &Path) -> Result<Vec<u8>, Box<dyn Error>> {
    fs::read(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write(path: &Path, bytes: &[u8]) -> CliResult {
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    let params = match &cli.params {
        Some(p) => EnergyParams::<f64>::load(p)?,
        None => EnergyParams::default(),
    };
    params.validate()?;
    match cli.command {
        Command::Table2 { format } => {
            let t = table2(&params)?;
            match format {
                Format::Csv => t.write_csv(io::stdout().lock())?,
                Format::Json => print_json(&t.to_json())?,
            }
        }
        Command::Figure4 { format } => {
            let records = figure4_export(&params)?;
            match format {
                Format::Csv => write_figure4_csv(&records, io::stdout().lock())?,
                Format::Json => print_json(&records)?,
            }
        }
        Command::Explore { te, channel, sensor, power, distance, algo } => {
            let te = match te {
                TeArg::Sensor => TeLocation::Sensor,
                TeArg::Hub => TeLocation::Hub,
                TeArg::Cloud => TeLocation::Cloud,
            };
            let ch = match channel {
                ChannelArg::Wban => OnBodyChannel::Wban,
                ChannelArg::Hbc => OnBodyChannel::Hbc,
            };
            let sensor = match sensor {
                SensorArg::Capacitive => SensorType::Capacitive,
                SensorArg::Optical => SensorType::Optical,
            };
            let power = match power {
                PowerArg::RfHarvest => PowerSource::RfHarvest,
                PowerArg::CoinCell => PowerSource::CoinCell,
            };
            let mut cfg = SystemConfig::new(Allocation::from_parts(te, ch), sensor, power);
            cfg.lora_distance = distance;
            cfg.te_variant = algo.into();
            print_json(&evaluate(&cfg, &params)?)?;
        }
        Command::Extract { algo, raw, image, output } => {
            let img = match raw {
                Some((w, h)) => read_raw(&image, w, h),
                None => read_image(&image),
            }
            .map_err(|e| format!("{}: {e}", image.display()))?;
            let template = extract_template(&img, algo.into())?;
            let bytes = codec::encode(&template)?;
            write(&output, &bytes)?;
            print_json(&serde_json::json!({
                "minutiae": template.len(),
                "bytes": bytes.len(),
                "compression_ratio": codec::compression_ratio(img.pixels().len() as u64, bytes.len() as u64)?,
            }))?;
        }
        Command::Enroll { label, template, gallery } => {
            let t = codec::decode(&read(&template)?).map_err(|e| format!("{}: {e}", template.display()))?;
            let mut g = Gallery::open(&gallery)?;
            g.enroll(&label, &t)?;
            print_json(&serde_json::json!({ "label": label, "minutiae": t.len(), "gallery_size": g.len() }))?;
        }
        Command::Match { probe, gallery, match_params } => {
            let mp = match match_params {
                Some(p) => {
                    serde_json::from_slice::<MatchParams>(&read(&p)?).map_err(|e| format!("{}: {e}", p.display()))?
                }
                None => MatchParams::default(),
            };
            mp.validate()?;
            let t = codec::decode(&read(&probe)?).map_err(|e| format!("{}: {e}", probe.display()))?;
            let ranked = Gallery::open(&gallery)?.identify(&t, &mp)?;
            let best = ranked.first().filter(|r| r.result.decision == Decision::Accept).map(|r| r.label.clone());
            print_json(&serde_json::json!({
                "decision": if best.is_some() { "accept" } else { "reject" },
                "label": best,
                "ranking": ranked,
            }))?;
        }
        Command::Encrypt(args) | Command::Decrypt(args) => {
            let key = CipherKey::from_hex(&args.key)?;
            let nonce =
                u64::from_str_radix(args.nonce.trim_start_matches("0x"), 16).map_err(|e| format!("nonce: {e}"))?;
            write(&args.output, &ctr_crypt(&read(&args.input)?, key, nonce))?;
        }
        Command::ChannelSweep { hum, mode, seeds, noise, highpass, payload_len } => {
            let mut cfg = SweepConfig::<f64>::default();
            cfg.hum_amplitudes = hum;
            cfg.modes = mode.into_iter().map(Into::into).collect();
            cfg.seeds = (1..=seeds).collect();
            cfg.model.noise_sigma = noise;
            cfg.model.highpass_cutoff = (highpass > 0.0).then_some(highpass);
            cfg.payload_len = payload_len;
            write_sweep_csv(&hum_sweep(&cfg)?, io::stdout().lock())?;
        }
        Command::Simulate { scenario, requests, trace, verify } => {
            let mut sc = ScenarioFile::load(&scenario)?;
            if requests.is_some() {
                sc.requests = requests;
            }
            sc.record_trace = trace.is_some();
            let (report, events) = run_scenario(&sc, &params)?;
            if let Some(path) = trace {
                let mut buf = Vec::new();
                write_trace_csv(&events, &mut buf)?;
                write(&path, &buf)?;
            }
            if verify {
                let v = verify_against_analytic(&report, &params, 1e-9)?;
                #[derive(serde::Serialize)]
                struct Verified<'a> {
                    report: &'a hbcauth::sim::SimReport,
                    verification: hbcauth::sim::Verification,
                }
                print_json(&Verified { report: &report, verification: v })?;
            } else {
                print_json(&report)?;
            }
        }
        Command::Synth { seed, size: (w, h), output } => {
            write_pgm(&synthetic_print(w, h, seed), &output)?;
        }
    }
    Ok(())
}

/// A reader that stopped reading (`| head`) is not a failure.
fn is_broken_pipe(e: &(dyn Error + 'static)) -> bool {
    let mut cur = Some(e);
    while let Some(err) = cur {
        let kind = err
            .downcast_ref::<io::Error>()
            .map(io::Error::kind)
            .or_else(|| err.downcast_ref::<serde_json::Error>().and_then(serde_json::Error::io_error_kind));
        if kind == Some(io::ErrorKind::BrokenPipe) {
            return true;
        }
        cur = err.source();
    }
    false
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(e.as_ref()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hbcauth: {e}");
            ExitCode::from(1)
        }
    }
}
