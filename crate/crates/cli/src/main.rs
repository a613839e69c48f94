use std::io::IsTerminal;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stark_core::config::{Scenario, SweepConfig};
use stark_core::report::{emit_report_with, REPORT_TXT};
use stark_core::sweep::Runner;
use stark_core::Error;

/// Stark-probe sensing sweeps: Fisher information, gaps and scaling fits.
#[derive(Parser)]
#[command(name = "stark", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// Configuration file (`key = value` lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Bootstrap seed
    #[arg(long)]
    seed: Option<u64>,
    /// Half grid density and small sizes
    #[arg(long)]
    quick: bool,
    /// Include the largest many-body size
    #[arg(long)]
    full: bool,
    /// Probe family when no config file sets it
    #[arg(long)]
    family: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Energy levels
    Spectrum(RunArgs),
    /// Single-parameter QFI over a field grid
    QfiSweep(RunArgs),
    /// Two-parameter QFI matrix over an (h1, h2) grid
    QfiMatrix(RunArgs),
    /// Classical Fisher matrix for the computational-basis measurement
    CfiSweep(RunArgs),
    /// Spectral gaps and their size exponents
    GapSweep(RunArgs),
    /// QFI sweep followed by a finite-size scaling collapse
    Collapse(RunArgs),
    /// Peak exponents beta and the linear law beta(gamma)
    FitBetaGamma(RunArgs),
    /// Minimum of Tr[F^-1] and its size exponent
    MultiparamTrace(RunArgs),
    /// Recompute the data behind a figure (fig1, fig2, fig3, fig5, fig6, fig7)
    Reproduce {
        figure: String,
        #[command(flatten)]
        args: RunArgs,
    },
    /// Summarize an output directory
    Report {
        /// Output directory of earlier runs
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Protocol repetitions of a separable strategy
        #[arg(long, default_value_t = 1.0)]
        repetitions: f64,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NOTHING: u8 = 2;
const EXIT_FAILURES: u8 = 3;

fn fail(code: u8, err: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(code)
}

fn scenario_of(text: &str) -> Option<String> {
    text.lines()
        .filter_map(|l| l.split('#').next()?.split_once('='))
        .find(|(k, _)| k.trim() == "scenario")
        .map(|(_, v)| v.trim().to_string())
}

/// Config text from the file (if any) with the subcommand's scenario filled in.
fn config_text(name: &str, figure: Option<&str>, args: &RunArgs) -> Result<String, String> {
    let mut text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?,
        None => String::new(),
    };
    match scenario_of(&text) {
        Some(s) if s != name => return Err(format!("config sets scenario `{s}` but the command is `{name}`")),
        Some(_) => {}
        None => text = format!("scenario = {name}\n{text}"),
    }
    if let Some(fig) = figure {
        if !text.lines().any(|l| l.split('#').next().and_then(|l| l.split_once('=')).is_some_and(|(k, _)| k.trim() == "figure")) {
            text.push_str(&format!("\nfigure = {fig}\n"));
        }
    }
    if let Some(family) = &args.family {
        if args.config.is_some() {
            return Err("--family cannot be combined with --config; set `family` in the file".into());
        }
        text.push_str(&format!("\nfamily = {family}\n"));
    }
    Ok(text)
}

fn build_config(name: &str, figure: Option<&str>, args: &RunArgs) -> Result<SweepConfig, Error> {
    let text = config_text(name, figure, args).map_err(|e| Error::Config(vec![e]))?;
    let mut cfg = SweepConfig::parse(&text)?;
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.quick |= args.quick;
    cfg.full |= args.full;
    let problems = cfg.problems();
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    Ok(cfg)
}

fn run(name: &str, figure: Option<&str>, args: &RunArgs) -> ExitCode {
    let cfg = match build_config(name, figure, args) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let reproduce = matches!(cfg.scenario, Scenario::Reproduce(_));
    let out = cfg.out.clone();
    let mut runner = match Runner::new(cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    runner.progress = std::io::stderr().is_terminal();
    let summary = match runner.run() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    println!(
        "config {}: {} rows computed, {} reused, {} with solver failures",
        summary.config_hash, summary.computed, summary.reused, summary.failures
    );
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    if reproduce {
        match emit_report_with(&out, 1.0) {
            Ok(_) => {
                if let Ok(text) = std::fs::read_to_string(out.join(REPORT_TXT)) {
                    print!("{text}");
                }
            }
            Err(e) => eprintln!("warning: report not written: {e}"),
        }
    }
    if summary.failures > 0 {
        eprintln!("{} rows carry solver-failure flags", summary.failures);
        return ExitCode::from(EXIT_FAILURES);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Spectrum(a) => ("spectrum", a),
        Command::QfiSweep(a) => ("qfi-sweep", a),
        Command::QfiMatrix(a) => ("qfi-matrix", a),
        Command::CfiSweep(a) => ("cfi-sweep", a),
        Command::GapSweep(a) => ("gap-sweep", a),
        Command::Collapse(a) => ("collapse", a),
        Command::FitBetaGamma(a) => ("fit-beta-gamma", a),
        Command::MultiparamTrace(a) => ("multiparam-trace", a),
        Command::Reproduce { figure, args } => return run("reproduce", Some(figure), args),
        Command::Report { out, repetitions } => {
            return match emit_report_with(out, *repetitions) {
                Ok(files) => {
                    if let Ok(text) = std::fs::read_to_string(out.join(REPORT_TXT)) {
                        print!("{text}");
                    }
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e @ (Error::NothingToReport(_) | Error::MissingInputs(_))) => fail(EXIT_NOTHING, e),
                Err(e) => fail(EXIT_CONFIG, e),
            };
        }
    };
    run(name, None, args)
}
