//! `gaitcore` command-line front end.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 no complete gait cycle,
//! 4 transport unavailable.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc::Receiver;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use gaitcore::events::write_events_csv;
use gaitcore::feedback::write_timeline_csv;
use gaitcore::fusion::write_trajectory_csv;
use gaitcore::params::{write_report_csv, ParamsError};
use gaitcore::pipeline::calibrated_config;
use gaitcore::telemetry::packet::{decode_packet, encode_packet, Payload, TelemetryPacket};
use gaitcore::telemetry::record::RECORDING_MAGIC;
use gaitcore::telemetry::{
    read_recorded_frames, record_frames, replay_trial, topic_for, Device, LoopbackBus, Message, MqttPublisher, Stream,
    TelemetryError, Transport,
};
use gaitcore::types::{read_frames_csv, write_frames_csv, CsvFormatError};
use gaitcore::validation::{compare_trial, summarize};
use gaitcore::{
    analyze, run_stream, synthesize_trial, EngineConfig, GaitEventKind, GaitReport, GroundTruth, SensorFrame,
    SimProfile, Splatter,
};

#[derive(Parser)]
#[command(name = "gaitcore", version, about = "Streaming gait analysis engine")]
struct Cli {
    /// Engine configuration (JSON).
    #[arg(long, global = true, env = "GAITCORE_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a trial: recording, frame CSV and ground truth.
    Simulate {
        /// Simulation profile (JSON); defaults to a 10 s slow walk.
        #[arg(long)]
        profile: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the full pipeline over a trial (recording or frame CSV).
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// What to print on stdout.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare reports against ground truth. Pairs are matched by position.
    Validate {
        #[arg(long, required = true, num_args = 1..)]
        truth: Vec<PathBuf>,
        #[arg(long, required = true, num_args = 1..)]
        report: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Replay a trial through the live engine and publish its output.
    Stream {
        #[arg(long)]
        input: PathBuf,
        /// `loopback` or `mqtt://host:port`.
        #[arg(long, default_value = "loopback")]
        transport: String,
        /// Replay speed multiplier; 0 runs as fast as possible.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Plantar pressure grid at an event or integrated over the trial.
    Heatmap {
        #[arg(long)]
        input: PathBuf,
        /// Event kind (FootStrike, FootFlat, HeelOff, FootOff) or `cumulative`.
        #[arg(long, default_value = "cumulative")]
        at: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also render a Turbo-colored PPM image.
        #[arg(long)]
        image: bool,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Engine(#[from] gaitcore::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] CsvFormatError),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Engine(gaitcore::Error::Params(ParamsError::NoCompleteCycle)) => 3,
            CliError::Engine(gaitcore::Error::Telemetry(TelemetryError::TransportUnavailable(_))) => 4,
            _ => 2,
        }
    }
}

impl From<TelemetryError> for CliError {
    fn from(e: TelemetryError) -> Self {
        CliError::Engine(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).map_err(io_err(&path))?))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(&dir.join(name)))?;
    w.flush().map_err(io_err(&dir.join(name)))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(io_err(path))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Reads a recording (by magic) or a frame CSV.
fn read_trial(path: &Path) -> Result<Vec<SensorFrame>> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(&RECORDING_MAGIC) {
        Ok(read_recorded_frames(&bytes[..])?)
    } else {
        Ok(read_frames_csv(&bytes[..])?)
    }
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    EngineConfig::load(path).map_err(|e| CliError::Engine(e.into()))
}

fn cmd_simulate(profile: Option<&Path>, seed: u64, out: &Path) -> Result<()> {
    let profile: SimProfile = match profile {
        Some(p) => read_json(p)?,
        None => SimProfile::default(),
    };
    let (frames, truth) = synthesize_trial(&profile, seed).map_err(gaitcore::Error::from)?;

    let mut rec = create(out, "trial.gcrec")?;
    record_frames(&frames, &mut rec)?;
    rec.flush().map_err(io_err(out))?;
    write_frames_csv(create(out, "frames.csv")?, &frames)?;
    write_json(out, "truth.json", &truth)?;
    println!(
        "simulated {} frames, {} cycles (trial {}) -> {}",
        frames.len(),
        truth.cycles.len(),
        truth.trial_id,
        out.display()
    );
    Ok(())
}

fn cmd_analyze(cfg: &EngineConfig, input: &Path, out: &Path, format: Format) -> Result<()> {
    let frames = read_trial(input)?;
    let analysis = analyze(&frames, cfg)?;
    let report = &analysis.report;
    let stream = &analysis.stream;

    write_json(out, "report.json", report)?;
    let csv_err = |e: io::Error| io_err(out)(e);
    write_report_csv(create(out, "report.csv")?, report).map_err(csv_err)?;
    write_events_csv(create(out, "events.csv")?, &stream.events).map_err(gaitcore::Error::from)?;
    write_trajectory_csv(create(out, "trajectory.csv")?, &stream.trajectory).map_err(csv_err)?;
    write_timeline_csv(create(out, "feedback.csv")?, &stream.commands).map_err(csv_err)?;

    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(report)?),
        Format::Csv => write_report_csv(io::stdout().lock(), report).map_err(csv_err)?,
        Format::Text => print_summary(report, stream.events.len(), stream.commands.len()),
    }
    Ok(())
}

fn print_summary(report: &GaitReport, events: usize, commands: usize) {
    let s = &report.summary;
    println!(
        "trial {}: {} cycles, {} events, {} feedback commands",
        report.trial_id, s.cycles, events, commands
    );
    println!(
        "  stance   {:.3} ± {:.3} s",
        s.stance_duration_s.mean, s.stance_duration_s.sd
    );
    println!(
        "  swing    {:.3} ± {:.3} s",
        s.swing_duration_s.mean, s.swing_duration_s.sd
    );
    println!(
        "  cycle    {:.3} ± {:.3} s",
        s.cycle_duration_s.mean, s.cycle_duration_s.sd
    );
    println!("  step     {:.3} ± {:.3} m", s.step_length_m.mean, s.step_length_m.sd);
    println!("  stride   {:.3} ± {:.3} m", s.cycle_length_m.mean, s.cycle_length_m.sd);
    println!("  speed    {:.3} m/s", s.gait_speed_mps.mean);
    println!(
        "  cadence  {:.1} cycles/min ({:.1} steps/min)",
        s.cadence.cycles_per_min, s.cadence.steps_per_min
    );
    println!("  pressure {:.3} N/cm^2", s.mean_plantar_pressure_n_cm2);
    println!("  stability {:.3}", s.stability.index);
}

fn cmd_validate(truth: &[PathBuf], reports: &[PathBuf], out: &Path, format: Format) -> Result<()> {
    if truth.len() != reports.len() {
        return Err(CliError::Usage(format!(
            "{} truth files but {} reports",
            truth.len(),
            reports.len()
        )));
    }
    let mut trials = Vec::with_capacity(truth.len());
    for (t, r) in truth.iter().zip(reports) {
        let truth: GroundTruth = read_json(t)?;
        let report: GaitReport = read_json(r)?;
        trials.push(compare_trial(&report, &truth).map_err(gaitcore::Error::from)?);
    }
    let summary = summarize(&trials).map_err(gaitcore::Error::from)?;
    write_json(
        out,
        "accuracy.json",
        &serde_json::json!({ "summary": summary, "trials": trials }),
    )?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary)?),
        Format::Csv => {
            println!("type,parameter,mean_accuracy_pct,sd_accuracy_pct");
            for r in &summary.rows {
                println!(
                    "{},{},{},{}",
                    r.parameter_type, r.parameter, r.mean_accuracy_pct, r.sd_accuracy_pct
                );
            }
        }
        Format::Text => println!("{summary}"),
    }
    Ok(())
}

#[derive(Debug, Default)]
struct StreamTally {
    frames: usize,
    events: usize,
    commands: usize,
}

/// Consumer side: runs the engine on frames from the bus, publishes events
/// and feedback, logs alerts. An empty message ends the stream.
fn consume(
    rx: Receiver<Message>,
    cfg: EngineConfig,
    sinks: Vec<Arc<dyn Transport>>,
) -> std::result::Result<StreamTally, gaitcore::Error> {
    let mut engine = gaitcore::Engine::new(&cfg)?;
    let events_topic = topic_for(Device::Orthosis, Stream::Events);
    let feedback_topic = topic_for(Device::Crutch, Stream::Feedback);
    let mut tally = StreamTally::default();
    let publish = |topic, packet: &TelemetryPacket| -> std::result::Result<(), gaitcore::Error> {
        let bytes = encode_packet(packet)?;
        for s in &sinks {
            s.publish(topic, &bytes)?;
        }
        Ok(())
    };
    for msg in rx {
        if msg.payload.is_empty() {
            break;
        }
        let packet = decode_packet(&msg.payload)?;
        let Payload::Frame(frame) = packet.payload else {
            continue;
        };
        tally.frames += 1;
        let step = engine.process(&frame)?;
        if let Some(event) = step.event {
            tally.events += 1;
            publish(
                &events_topic,
                &TelemetryPacket {
                    device_id: packet.device_id,
                    payload: Payload::Event(event),
                },
            )?;
        }
        for alert in &step.alerts {
            println!(
                "t={} ms {:?}: observed {:.2} > threshold {:.2}",
                alert.timestamp_ms, alert.source, alert.observed_load, alert.threshold
            );
        }
        for cmd in step.commands {
            tally.commands += 1;
            println!(
                "  -> {:?} {:?} intensity {:.2} for {} ms",
                cmd.target, cmd.mode, cmd.intensity, cmd.duration_ms
            );
            publish(
                &feedback_topic,
                &TelemetryPacket {
                    device_id: packet.device_id,
                    payload: Payload::Command(cmd),
                },
            )?;
        }
    }
    Ok(tally)
}

fn cmd_stream(cfg: &EngineConfig, input: &Path, transport: &str, speed: f64) -> Result<()> {
    let bytes = fs::read(input).map_err(io_err(input))?;
    let (frames, recording) = if bytes.starts_with(&RECORDING_MAGIC) {
        (read_recorded_frames(&bytes[..])?, bytes)
    } else {
        let frames = read_frames_csv(&bytes[..])?;
        let mut rec = Vec::new();
        record_frames(&frames, &mut rec)?;
        (frames, rec)
    };
    // The whole recording is at hand, so the still lead-in can calibrate the IMU.
    let cfg = calibrated_config(&frames, cfg);

    let bus = LoopbackBus::new();
    let external: Option<Box<dyn Transport>> = match transport {
        "loopback" => None,
        t if t.starts_with("mqtt://") => Some(Box::new(MqttPublisher::connect(
            t,
            "gaitcore-cli",
            Duration::from_secs(3),
        )?)),
        t => return Err(CliError::Usage(format!("unknown transport `{t}`"))),
    };
    // Frames go to the loopback consumer and, if connected, to MQTT as well.
    // Engine output goes to MQTT when connected, else back onto the loopback.
    let bus_sink: Arc<dyn Transport> = Arc::new(bus.clone());
    let (frame_sinks, consumer_sinks) = match external {
        Some(mqtt) => {
            let mqtt: Arc<dyn Transport> = Arc::from(mqtt);
            (vec![bus_sink, mqtt.clone()], vec![mqtt])
        }
        None => (vec![bus_sink.clone()], vec![bus_sink]),
    };

    let frames_topic = topic_for(Device::Orthosis, Stream::Frames);
    let rx = bus.subscribe(&frames_topic);
    let consumer = thread::spawn(move || consume(rx, cfg, consumer_sinks));

    let mut published = 0usize;
    let produced: Result<()> = (|| {
        for packet in replay_trial(&recording[..], speed)? {
            let packet = packet?;
            for sink in &frame_sinks {
                sink.publish(&frames_topic, &packet)?;
            }
            published += 1;
        }
        Ok(())
    })();
    bus.publish(&frames_topic, &[])?;
    let tally = consumer
        .join()
        .map_err(|_| CliError::Usage("stream consumer panicked".into()))??;
    produced?;
    println!(
        "published {} frames on {}, {} events, {} feedback commands on {}",
        published,
        frames_topic.as_str(),
        tally.events,
        tally.commands,
        topic_for(Device::Crutch, Stream::Feedback).as_str()
    );
    Ok(())
}

fn cmd_heatmap(cfg: &EngineConfig, input: &Path, at: &str, out: &Path, image: bool) -> Result<()> {
    let frames = read_trial(input)?;
    let stream = run_stream(&frames, cfg)?;
    let splatter = Splatter::new(&cfg.region_map, &cfg.heatmap).map_err(gaitcore::Error::from)?;
    let grid = if at.eq_ignore_ascii_case("cumulative") {
        splatter.cumulative(&stream.forces)
    } else {
        let kind: GaitEventKind = at.parse().map_err(CliError::Usage)?;
        splatter
            .at_event(&stream.forces, &stream.events, kind)
            .map_err(gaitcore::Error::from)?
    };
    let io = |e: io::Error| io_err(out)(e);
    let mut csv = create(out, "heatmap.csv")?;
    grid.write_csv(&mut csv).map_err(io)?;
    csv.flush().map_err(io)?;
    if image {
        let mut ppm = create(out, "heatmap.ppm")?;
        grid.write_ppm(&mut ppm).map_err(io)?;
        ppm.flush().map_err(io)?;
    }
    let (col, row) = grid.argmax();
    println!(
        "heatmap {}x{} at {at}: total {:.3}, peak {:.3} at cell ({col}, {row})",
        grid.width,
        grid.height,
        grid.sum(),
        grid.max()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Simulate { profile, seed, out } => cmd_simulate(profile.as_deref(), seed, &out),
        Command::Analyze { input, out, format } => cmd_analyze(&load_config(config)?, &input, &out, format),
        Command::Validate {
            truth,
            report,
            out,
            format,
        } => cmd_validate(&truth, &report, &out, format),
        Command::Stream {
            input,
            transport,
            speed,
        } => cmd_stream(&load_config(config)?, &input, &transport, speed),
        Command::Heatmap { input, at, out, image } => cmd_heatmap(&load_config(config)?, &input, &at, &out, image),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
