use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use onebit_sync::experiment::scenario::{Overrides, Scenario};
use onebit_sync::experiment::sync_rmse::metric_trace;
use onebit_sync::experiment::{self, ExperimentKind, ExperimentSpec};
use onebit_sync::par::{with_threads, Execution};
use onebit_sync::{DacMode, SystemConfig};

#[derive(Parser, Debug)]
#[command(name = "onebit-sync", version, about = "1-bit massive MU-MIMO-OFDM downlink synchronization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment and write its CSV table.
    Run(RunArgs),
    /// Check a scenario and print the resolved configuration.
    Validate(CommonArgs),
    /// Write the timing metric (tau, Gamma) of one terminal as CSV.
    DumpMetric(DumpArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    SindrSweep,
    SyncRmse,
    BerCurve,
}

impl From<Kind> for ExperimentKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::SindrSweep => ExperimentKind::SindrSweep,
            Kind::SyncRmse => ExperimentKind::SyncRmse,
            Kind::BerCurve => ExperimentKind::BerCurve,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dac {
    OneBit,
    Infinite,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Experiment kind; overrides the scenario's `experiment` key.
    #[arg(long, value_enum)]
    experiment: Option<Kind>,
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Start from the full-size configuration (B = 128, N = 2048, S = 1200, G = 144).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Output CSV; defaults to the scenario's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Run trials one after another on the calling thread.
    #[arg(long, conflicts_with = "threads")]
    sequential: bool,
}

#[derive(Args, Debug)]
struct DumpArgs {
    /// Scenario file (TOML); its `[system]` table is used.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paper_scale: bool,
    /// Trial index.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Terminal index.
    #[arg(long, default_value_t = 0)]
    user: usize,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    snr_db: f64,
    #[arg(long, value_enum, default_value_t = Dac::OneBit)]
    dac: Dac,
    /// Output CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: Option<&Path>) -> Result<Scenario> {
    match path {
        Some(p) => Scenario::load(p).with_context(|| format!("reading scenario {}", p.display())),
        None => Ok(Scenario::default()),
    }
}

fn resolve(c: &CommonArgs, output: Option<PathBuf>) -> Result<(ExperimentSpec, SystemConfig)> {
    let sc = load(c.scenario.as_deref())?;
    let ov = Overrides {
        experiment: c.experiment.map(Into::into),
        seed: c.seed,
        trials: c.trials,
        output,
        paper_scale: c.paper_scale,
    };
    sc.resolve(&ov).context("resolving the scenario")
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn describe(spec: &ExperimentSpec, cfg: &SystemConfig) -> String {
    let mut s = format!(
        "experiment {}\nB = {}, U = {}, N = {}, |S| = {} (OSR {:.3}), G = {}, L = {}, P = {}, D = {}\nN0 = {}, gain {:?}, {} trials, seed {}\n",
        spec.kind,
        cfg.antennas,
        cfg.users,
        cfg.fft_size,
        cfg.used.len(),
        cfg.osr(),
        cfg.cp_len,
        cfg.taps,
        cfg.training,
        cfg.data,
        cfg.noise_var,
        cfg.gain_mode,
        cfg.trials,
        cfg.master_seed
    );
    let modes: Vec<&str> = spec.dac_modes.iter().map(|m| m.label()).collect();
    s.push_str(&format!("DAC modes: {}\n", modes.join(", ")));
    match spec.kind {
        ExperimentKind::SindrSweep => s.push_str(&format!(
            "{} dtau x {} deps grid, CFO sweep {} dtau x {} deps\n",
            spec.dtau.len(),
            spec.deps.len(),
            spec.cfo_sweep_dtau.len(),
            spec.cfo_sweep_deps.len()
        )),
        _ => s.push_str(&format!("{} SNR points\n", spec.snr_db.len())),
    }
    s
}

fn run(args: RunArgs) -> Result<()> {
    let (spec, cfg) = resolve(&args.common, args.out.clone())?;
    let exec = if args.sequential { Execution::Sequential } else { Execution::Parallel };
    let table = with_threads(args.threads, || experiment::run(&spec, &cfg, exec))?
        .with_context(|| format!("running {}", spec.kind))?;
    let mut w = open_out(spec.output.as_deref())?;
    table.write_csv(&mut w).context("writing CSV")?;
    w.flush()?;
    if let Some(p) = &spec.output {
        log::info!("wrote {}", p.display());
    }
    Ok(())
}

fn dump(args: DumpArgs) -> Result<()> {
    let common = CommonArgs {
        experiment: Some(Kind::SyncRmse),
        scenario: args.scenario,
        seed: args.seed,
        trials: None,
        paper_scale: args.paper_scale,
    };
    let (_, cfg) = resolve(&common, None)?;
    let dac = match args.dac {
        Dac::OneBit => DacMode::OneBit,
        Dac::Infinite => DacMode::Infinite,
    };
    let m = metric_trace(&cfg, args.trial, args.user, args.snr_db, dac).context("computing the timing metric")?;
    let mut w = open_out(args.out.as_deref())?;
    m.write_trace_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Validate(c) => resolve(&c, None).map(|(spec, cfg)| print!("{}", describe(&spec, &cfg))),
        Command::DumpMetric(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
