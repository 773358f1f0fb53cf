use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ffsi::config::{validate_spec, ConfigFile};
use ffsi::harness::experiments::{run_experiment, ExperimentKind};
use ffsi::harness::output::Dataset;
use ffsi::harness::Method;
use ffsi::scenario::RfcLimits;

/// Far-field self-interference experiments for a full-duplex MIMO OFDM base station.
#[derive(Parser, Debug)]
#[command(name = "ffsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep the angle of a single scatterer.
    SweepAngle(Common),
    /// Fixed users and scatterers from the config file.
    Scenario(Common),
    /// Random deployments, median of the per-deployment worst user.
    RandomMc(Common),
    /// Random deployments over a grid of INR values.
    SweepInr(Common),
    /// Random deployments over a grid of scatterer counts.
    SweepCount(Common),
    /// Detection, recovery and angle estimation of a new scatterer.
    Emergence(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method to run; repeat for several. Defaults to every standard method.
    #[arg(long = "method")]
    methods: Vec<String>,
    /// Frames per sweep point, or deployments per point for random runs.
    #[arg(long)]
    trials: Option<usize>,
    /// Frames per random deployment.
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Per-cell false-alarm probability of the detector.
    #[arg(long)]
    pfa: Option<f64>,
    /// RF-chain limits such as `rx=2,tx=2`, applied to `proposed-limited`.
    #[arg(long)]
    limits: Option<String>,
    /// Bootstrap resamples for confidence intervals.
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Main CSV output; auxiliary tables go next to it. Stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn kind_and_args(cmd: Command) -> (ExperimentKind, Common) {
    match cmd {
        Command::SweepAngle(c) => (ExperimentKind::AngleSweep, c),
        Command::Scenario(c) => (ExperimentKind::Scenario, c),
        Command::RandomMc(c) => (ExperimentKind::RandomMc, c),
        Command::SweepInr(c) => (ExperimentKind::InrSweep, c),
        Command::SweepCount(c) => (ExperimentKind::CountSweep, c),
        Command::Emergence(c) => (ExperimentKind::Emergence, c),
    }
}

fn aux_path(main: &Path, name: &str) -> PathBuf {
    let stem = main.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    main.with_file_name(format!("{stem}.{name}.csv"))
}

fn write_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    ds.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = kind_and_args(cli.command);
    let file = match &args.config {
        Some(p) => ConfigFile::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ConfigFile::default(),
    };
    let (mut spec, mut consts) = file.resolve(kind)?;

    if !args.methods.is_empty() {
        spec.methods = args
            .methods
            .iter()
            .map(|m| m.parse::<Method>())
            .collect::<ffsi::Result<_>>()?;
    }
    if let Some(l) = &args.limits {
        let limits: RfcLimits = l.parse()?;
        consts.rfc_limits = limits;
        let mut applied = false;
        for m in spec.methods.iter_mut() {
            if let Method::ProposedLimited(cur) = m {
                if cur.is_unlimited() {
                    *cur = limits;
                }
                applied = true;
            }
        }
        if !applied {
            spec.methods.push(Method::ProposedLimited(limits));
        }
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(f) = args.frames {
        spec.frames_per_scenario = f;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(p) = args.pfa {
        spec.p_fa = p;
    }
    if let Some(b) = args.bootstrap {
        spec.bootstrap = b;
    }
    validate_spec(&spec, &consts)?;

    let out = run_experiment(&spec, &consts)?;
    match &args.out {
        Some(path) => {
            write_dataset(&out.main, path)?;
            for ds in &out.extras {
                write_dataset(ds, &aux_path(path, &ds.name))?;
            }
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            out.main.write(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
