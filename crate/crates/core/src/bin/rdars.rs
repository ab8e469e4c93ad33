//! `rdars` command-line entry point.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use rdars_core::control::{ControlFrame, DeviceServer, DeviceState, LinkImpairment, MsgType, DEFAULT_PORT};
use rdars_core::harness::output::{write_csv, write_json};
use rdars_core::harness::{run_experiment, ExperimentFile, HarnessError, OutputFormat};
use rdars_core::localization::{estimate_range, Calibration, RangeInputs};

#[derive(Parser)]
#[command(name = "rdars", version, about = "Surface beam-sweep localization simulator and control-link tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write per-trial records.
    Run {
        #[command(flatten)]
        common: ExperimentArgs,
        /// Also write every trial's sweep trace as JSON.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Run stage 1 only for the first trial and emit its RSSI samples.
    Sweep {
        #[command(flatten)]
        common: ExperimentArgs,
    },
    /// Estimate the UE range from measured powers.
    Estimate {
        #[arg(long, allow_hyphen_values = true)]
        p_connected_dbm: f64,
        #[arg(long, allow_hyphen_values = true)]
        p_bs_dbm: f64,
        #[arg(long)]
        theta_deg: f64,
        #[arg(long)]
        d_br: f64,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        offset_db: f64,
    },
    /// Run the UDP device emulator until killed.
    Serve {
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        bind: String,
        #[arg(long, default_value_t = 0.0)]
        drop_incoming: f64,
        #[arg(long, default_value_t = 0.0)]
        drop_outgoing: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Encode or decode a control frame as hex.
    Frame {
        #[command(subcommand)]
        op: FrameOp,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Scenario file; the built-in default scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// `oracle` or `udp:<host:port>`.
    #[arg(long)]
    transport: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameKind {
    PhaseConfig,
    ModeMask,
    Ack,
    Nack,
}

#[derive(Subcommand)]
enum FrameOp {
    Encode {
        #[arg(long = "type", value_enum)]
        kind: FrameKind,
        #[arg(long)]
        seq: u16,
        /// Payload bytes as hex (64 bytes for phase-config, 32 for mode-mask).
        #[arg(long, default_value = "")]
        payload: String,
        /// Status byte for ack/nack.
        #[arg(long, default_value_t = 0)]
        status: u8,
    },
    Decode {
        hex: String,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Input(String),
    #[error("frame: {0}")]
    Frame(#[from] rdars_core::control::FrameError),
    #[error("localization: {0}")]
    Localization(#[from] rdars_core::localization::LocalizationError),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Harness(e) => e.kind(),
            Self::Input(_) => "input",
            Self::Frame(_) => "frame",
            Self::Localization(_) => "localization",
            Self::Io(_) => "io",
        }
    }
}

fn load_spec(args: &ExperimentArgs) -> Result<rdars_core::harness::ExperimentSpec, CliError> {
    let mut file = match &args.scenario {
        Some(p) => ExperimentFile::load(p)?,
        None => ExperimentFile::shipped_default(),
    };
    if let Some(t) = args.trials {
        file.trials = t;
    }
    if let Some(s) = args.seed {
        file.seed = s;
    }
    if let Some(t) = &args.transport {
        file.transport = t.clone();
    }
    Ok(file.to_spec()?)
}

fn write_out(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| HarnessError::io(p, e).into()),
        None => Ok(io::stdout().write_all(bytes)?),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { common, traces } => {
            let spec = load_spec(&common)?;
            let report = run_experiment(&spec)?;
            let mut buf = Vec::new();
            match common.format {
                Format::Csv => write_csv(&report.records, &report.summary, &mut buf)?,
                Format::Json => write_json(&report.records, &report.summary, &mut buf)?,
            }
            write_out(common.out.as_deref(), &buf)?;
            if let Some(p) = traces {
                let doc: Vec<_> = report
                    .records
                    .iter()
                    .zip(&report.traces)
                    .map(|(r, t)| json!({ "trace_ref": r.trace_ref, "sweep": t }))
                    .collect();
                let text = serde_json::to_string(&doc).map_err(|e| CliError::Input(e.to_string()))?;
                fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))?;
            }
            let s = &report.summary;
            eprintln!(
                "trials={} succeeded={} median_angle_error_deg={} median_range_error_m={}",
                s.trials,
                s.succeeded,
                s.angle_error_deg_median.map_or("n/a".into(), |v| format!("{v:.3}")),
                s.range_error_m_median.map_or("n/a".into(), |v| format!("{v:.3}")),
            );
        }
        Command::Sweep { mut common } => {
            common.trials = Some(1);
            let spec = load_spec(&common)?;
            let spec = rdars_core::harness::ExperimentSpec { calibration_references: 0, ..spec };
            let report = run_experiment(&spec)?;
            let trace = report.traces[0]
                .as_ref()
                .ok_or_else(|| CliError::Input(format!("sweep failed: {:?}", report.records[0].error)))?;
            let buf = match common.format {
                Format::Json => {
                    let mut t = serde_json::to_string_pretty(trace).map_err(|e| CliError::Input(e.to_string()))?;
                    t.push('\n');
                    t.into_bytes()
                }
                Format::Csv => {
                    let mut t = String::from("stage,az_deg,el_deg,rssi_dbm\n");
                    for s in &trace.samples {
                        let stage = serde_json::to_value(s.stage).expect("stage serializes");
                        t.push_str(&format!(
                            "{},{},{},{}\n",
                            stage.as_str().unwrap_or_default(),
                            s.angles.azimuth_deg(),
                            s.angles.elevation_deg(),
                            s.rssi.value_dbm
                        ));
                    }
                    t.into_bytes()
                }
            };
            write_out(common.out.as_deref(), &buf)?;
        }
        Command::Estimate { p_connected_dbm, p_bs_dbm, theta_deg, d_br, alpha, offset_db } => {
            let inputs =
                RangeInputs { p_connected_dbm, p_bs_direct_dbm: p_bs_dbm, theta: theta_deg.to_radians(), d_br, alpha };
            let est = estimate_range(&inputs, &Calibration::new(offset_db)?)?;
            println!(
                "{}",
                json!({
                    "d_ur": est.d_ur,
                    "d_ub": est.d_ub,
                    "roots_found": est.roots_found,
                    "ambiguous": est.ambiguous,
                    "alternate_d_ur": est.alternate_d_ur,
                })
            );
        }
        Command::Serve { bind, drop_incoming, drop_outgoing, seed } => {
            let server = DeviceServer::spawn(
                &bind,
                DeviceState::default(),
                LinkImpairment { drop_incoming, drop_outgoing, seed },
            )?;
            eprintln!("listening on {}", server.local_addr());
            server.wait()?;
        }
        Command::Frame { op: FrameOp::Encode { kind, seq, payload, status } } => {
            let frame = match kind {
                FrameKind::Ack => ControlFrame::ack(seq, status),
                FrameKind::Nack => ControlFrame::nack(seq, status),
                FrameKind::PhaseConfig | FrameKind::ModeMask => {
                    let bytes =
                        hex::decode(payload.trim()).map_err(|e| CliError::Input(format!("payload hex: {e}")))?;
                    let t =
                        if matches!(kind, FrameKind::PhaseConfig) { MsgType::PhaseConfig } else { MsgType::ModeMask };
                    ControlFrame::new(t, seq, bytes)?
                }
            };
            println!("{}", hex::encode(frame.encode()));
        }
        Command::Frame { op: FrameOp::Decode { hex: text } } => {
            let bytes = hex::decode(text.trim()).map_err(|e| CliError::Input(format!("frame hex: {e}")))?;
            let frame = ControlFrame::decode(&bytes)?;
            let kind = match frame.msg_type {
                MsgType::PhaseConfig => "phase_config",
                MsgType::ModeMask => "mode_mask",
                MsgType::Ack => "ack",
                MsgType::Nack => "nack",
            };
            println!("{}", json!({ "type": kind, "seq": frame.seq, "payload": hex::encode(&frame.payload) }));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            eprintln!("{}", json!({ "error": { "kind": "usage", "message": first } }));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "kind": e.kind(), "message": e.to_string() } }));
            ExitCode::FAILURE
        }
    }
}
