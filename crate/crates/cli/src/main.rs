use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bellstore::experiment::{
    self, count_above_threshold, fit_exponential, io, CorrelationTrace, ExperimentConfig, FitResult, OutputFormat,
};
use bellstore::sequence::{cpmg_times, parse_sequence_spec, udd_times, SegmentKind, SequenceSpec};
use bellstore::units::parse_seconds;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Entangled-state storage under CPMG/UDD decoupling.
#[derive(Parser, Debug)]
#[command(name = "bellstore", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML experiment description; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for the ensemble RNG streams.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; results go to stdout when neither this nor the config sets one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Plotdata,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print pulse instants of one period.
    Times {
        #[arg(long, value_parser = ["udd", "cpmg"])]
        scheme: String,
        #[arg(long)]
        order: usize,
        /// Period with unit, e.g. `28.1904ms`.
        #[arg(long)]
        period: String,
    },
    /// Validate a sequence line and print one block of its timeline.
    Compile {
        /// Sequence line; defaults to every sequence in the config.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Run one sequence for its repeats, sampling each block boundary.
    Simulate {
        /// Sequence line; defaults to the first sequence in the config.
        #[arg(long)]
        spec: Option<String>,
    },
    /// Correlation traces for every sequence over the duration grid.
    Scan,
    /// Filter-function coherence of each sequence under each bath.
    Filter,
    /// Spin-lock purification trace.
    Spinlock,
    /// Exponential fits of a trace file.
    Fit {
        /// Trace file written by `scan` (CSV or plot data).
        #[arg(long)]
        input: PathBuf,
        /// Only fit this sequence label.
        #[arg(long)]
        sequence: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.noise.master_seed = seed;
    }
    if let Some(out) = &cli.common.out {
        cfg.outputs.dir = Some(out.clone());
    }
    if let Some(f) = cli.common.format {
        cfg.outputs.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Plotdata => OutputFormat::PlotData,
        };
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("building thread pool")?;
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(command: &Command, cfg: &ExperimentConfig) -> Result<()> {
    match command {
        Command::Times { scheme, order, period } => {
            let period = parse_seconds(period).map_err(anyhow::Error::msg)?;
            let timing = match scheme.as_str() {
                "udd" => udd_times(*order, period)?,
                _ => cpmg_times(*order, period)?,
            };
            let mut out = std::io::stdout().lock();
            writeln!(out, "j,t_s")?;
            for (j, t) in timing.instants().iter().enumerate() {
                writeln!(out, "{},{}", j + 1, io::format_number(*t))?;
            }
            Ok(())
        }
        Command::Compile { spec } => {
            let specs = match spec {
                Some(line) => vec![parse_sequence_spec(line)?],
                None => cfg.sequences.clone(),
            };
            let mut out = std::io::stdout().lock();
            writeln!(out, "sequence,segment,kind,start_s,duration_s,flip_rad,phase_rad,spins")?;
            let mut failures = 0;
            for spec in &specs {
                match spec.compile() {
                    Ok(timeline) => {
                        let mut start = 0.0;
                        for (k, seg) in timeline.segments().iter().enumerate() {
                            let (kind, flip, phase, spins) = match seg.kind {
                                SegmentKind::Delay => ("delay", String::new(), String::new(), String::new()),
                                SegmentKind::Pulse(p) => (
                                    "pulse",
                                    io::format_number(p.flip_angle),
                                    io::format_number(p.phase),
                                    format!("{:?}", p.selectivity).to_lowercase(),
                                ),
                            };
                            writeln!(
                                out,
                                "{},{k},{kind},{},{},{flip},{phase},{spins}",
                                spec.label(),
                                io::format_number(start),
                                io::format_number(seg.duration)
                            )?;
                            start += seg.duration;
                        }
                    }
                    Err(e) => {
                        failures += 1;
                        eprintln!("{}: {e}", spec.label());
                    }
                }
            }
            if failures > 0 {
                bail!("{failures} sequence(s) failed to compile");
            }
            Ok(())
        }
        Command::Simulate { spec } => {
            let spec = match spec {
                Some(line) => parse_sequence_spec(line)?,
                None => first_sequence(cfg)?,
            };
            let trace = experiment::run_single(cfg, &spec)?;
            write_traces(cfg, "simulate", &[trace])
        }
        Command::Scan => {
            let traces = experiment::run_scan(cfg)?;
            report_scan(cfg, &traces);
            write_traces(cfg, "traces", &traces)
        }
        Command::Filter => {
            let rows = experiment::run_filter_comparison(cfg)?;
            for r in &rows {
                if let Some(reason) = &r.failure {
                    eprintln!("{} / {}: {reason}", r.sequence, r.bath);
                }
            }
            match output_path(cfg, "filter") {
                Some(path) => io::emit_filter(&rows, &path, cfg.outputs.format)?,
                None => match cfg.outputs.format {
                    OutputFormat::Csv => io::write_filter_csv(&rows, std::io::stdout().lock())?,
                    OutputFormat::PlotData => io::write_filter_plotdata(&rows, std::io::stdout().lock())?,
                },
            }
            Ok(())
        }
        Command::Spinlock => {
            let trace = experiment::run_spinlock(cfg)?;
            write_traces(cfg, "spinlock", &[trace])
        }
        Command::Fit { input, sequence } => {
            let traces = io::read_traces(input)?;
            let fits = fit_traces(&traces, sequence.as_deref())?;
            match output_path(cfg, "fits") {
                Some(path) => io::emit_fits(&fits, &path, cfg.outputs.format)?,
                None => match cfg.outputs.format {
                    OutputFormat::Csv => io::write_fits_csv(&fits, std::io::stdout().lock())?,
                    OutputFormat::PlotData => io::write_fits_plotdata(&fits, std::io::stdout().lock())?,
                },
            }
            Ok(())
        }
    }
}

fn first_sequence(cfg: &ExperimentConfig) -> Result<SequenceSpec> {
    match cfg.sequences.first() {
        Some(s) => Ok(s.clone()),
        None => bail!("no sequence given and none in the config"),
    }
}

fn output_path(cfg: &ExperimentConfig, stem: &str) -> Option<PathBuf> {
    cfg.outputs
        .dir
        .as_deref()
        .map(|dir: &Path| dir.join(format!("{stem}.{}", cfg.outputs.format.extension())))
}

fn write_traces(cfg: &ExperimentConfig, stem: &str, traces: &[CorrelationTrace]) -> Result<()> {
    match output_path(cfg, stem) {
        Some(path) => {
            io::emit_traces(traces, &path, cfg.outputs.format)?;
            eprintln!("wrote {}", path.display());
        }
        None => match cfg.outputs.format {
            OutputFormat::Csv => io::write_traces_csv(traces, std::io::stdout().lock())?,
            OutputFormat::PlotData => io::write_traces_plotdata(traces, std::io::stdout().lock())?,
        },
    }
    Ok(())
}

/// Threshold counts and failures go to stderr so stdout stays machine-readable.
fn report_scan(cfg: &ExperimentConfig, traces: &[CorrelationTrace]) {
    for tr in traces {
        match &tr.status {
            experiment::TraceStatus::Ok => eprintln!(
                "{:>8}: {} of {} points above {}",
                tr.sequence,
                count_above_threshold(tr, cfg.threshold),
                tr.points.len(),
                cfg.threshold
            ),
            experiment::TraceStatus::Failed(reason) => eprintln!("{:>8}: failed: {reason}", tr.sequence),
        }
    }
}

fn fit_traces(traces: &[CorrelationTrace], only: Option<&str>) -> Result<Vec<(String, FitResult)>> {
    let mut fits = Vec::new();
    for tr in traces {
        if only.is_some_and(|s| s != tr.sequence) || !tr.is_ok() {
            continue;
        }
        let points: Vec<(f64, f64)> = tr.points.iter().map(|p| (p.time, p.correlation)).collect();
        match fit_exponential(&points) {
            Ok(fit) => fits.push((tr.sequence.clone(), fit)),
            Err(e) => eprintln!("{}: {e}", tr.sequence),
        }
    }
    if fits.is_empty() {
        bail!("no trace could be fitted");
    }
    Ok(fits)
}
