//! Command-line front end: scenario synthesis, single trials, sweeps, and
//! report regeneration.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use windpass::grid::build_grid;
use windpass::harness::{
    emit_reports, emit_summary, run_trial, EstimatorKind, Scenario, TrialConfig, TrialResult,
};
use windpass::windfield::{generate_signal, FreqMode, SignalParams, WindField};
use windpass::{Error, Result};

#[derive(Parser)]
#[command(name = "windpass", version, about = "Sequential SUAV passes in unknown wind")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a wind scenario and write it as JSON.
    Synth(SynthArgs),
    /// Run one trial and write its reports.
    Run(RunArgs),
    /// Run a grid of trials over seeds and write summary.csv.
    Sweep(SweepArgs),
    /// Regenerate CSV reports from a stored result.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigOverrides {
    /// JSON file with a trial configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Lattice columns.
    #[arg(long)]
    n1: Option<usize>,
    /// Lattice rows including the two boundary rows.
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    dx1: Option<f64>,
    #[arg(long)]
    dx2: Option<f64>,
    /// Scenario case: 1 static, 2 static+noise, 3 varying, 4 varying+noise.
    #[arg(long)]
    case: Option<u8>,
    /// stitch | kf
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    u0: Option<f64>,
    #[arg(long)]
    w_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_terms: Option<usize>,
    /// literal | period
    #[arg(long)]
    freq_mode: Option<String>,
    #[arg(long)]
    freq_lo: Option<f64>,
    #[arg(long)]
    freq_hi: Option<f64>,
    #[arg(long)]
    noise_variance: Option<f64>,
    #[arg(long)]
    max_passes: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<TrialConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => TrialConfig::default(),
        };
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = self.$field {
                    config.$field = v;
                }
            };
        }
        take!(n1);
        take!(n2);
        take!(dx1);
        take!(dx2);
        take!(case);
        take!(u0);
        take!(w_max);
        take!(dt);
        take!(n_terms);
        take!(freq_lo);
        take!(freq_hi);
        take!(noise_variance);
        take!(max_passes);
        take!(seed);
        if let Some(kind) = &self.estimator {
            config.estimator = match kind.as_str() {
                "stitch" => EstimatorKind::Stitch,
                "kf" => EstimatorKind::Kf,
                other => {
                    return Err(Error::InvalidConfig(format!("unknown estimator '{other}'")))
                }
            };
        }
        if let Some(mode) = &self.freq_mode {
            config.freq_mode = match mode.as_str() {
                "literal" => FreqMode::Literal,
                "period" => FreqMode::Period,
                other => return Err(Error::InvalidConfig(format!("unknown freq_mode '{other}'"))),
            };
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Output file for the scenario JSON.
    #[arg(long, default_value = "scenario.json")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Directory for passes.csv, signal.csv, scenario.json, result.json.
    #[arg(long, default_value = "runs/trial")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: ConfigOverrides,
    /// Traversable-block labels, e.g. 5x5,7x7,9x9; the lattice adds the two
    /// boundary rows.
    #[arg(long, default_value = "5x5,7x7,9x9", value_delimiter = ',')]
    grids: Vec<String>,
    /// Cases to run.
    #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
    cases: Vec<u8>,
    /// Seeds 1..=N per cell.
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value = "runs/sweep")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Stored result.json of an earlier run.
    #[arg(long)]
    result: PathBuf,
    /// Directory for the regenerated CSVs.
    #[arg(long)]
    out_dir: PathBuf,
}

fn parse_grid_label(label: &str) -> Result<(String, usize, usize)> {
    let parts: Vec<&str> = label.split('x').collect();
    let bad = || Error::InvalidConfig(format!("grid label '{label}' is not WxH"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let w: usize = parts[0].parse().map_err(|_| bad())?;
    let h: usize = parts[1].parse().map_err(|_| bad())?;
    if w < 3 || h < 1 {
        return Err(bad());
    }
    Ok((label.to_string(), w, h + 2))
}

fn synth(args: &SynthArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let graph = Arc::new(build_grid(config.n1, config.n2, config.dx1, config.dx2)?);
    let signal = match config.case {
        1 | 2 => SignalParams::constant(config.effective_noise()),
        _ => generate_signal(
            config.n_terms,
            config.freq_mode,
            (config.freq_lo, config.freq_hi),
            config.effective_noise(),
            &mut rng,
        ),
    };
    let field = WindField::synthesize(graph, signal, config.w_max, &mut rng)?;
    let scenario = Scenario {
        n1: config.n1,
        n2: config.n2,
        dx1: config.dx1,
        dx2: config.dx2,
        w_max: config.w_max,
        resistances: field.resistances().to_vec(),
        coeffs: field.coeffs().to_vec(),
        signal: field.signal().clone(),
    };
    let text = serde_json::to_string_pretty(&scenario)
        .map_err(|e| Error::Io(format!("scenario serialization: {e}")))?;
    std::fs::write(&args.out, text)
        .map_err(|e| Error::Io(format!("{}: {e}", args.out.display())))?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let config = args.overrides.resolve()?;
    let result = run_trial(&config)?;
    emit_reports(&result, &args.out_dir)?;
    let convergence = result
        .convergence_pass
        .map_or("none".to_string(), |p| p.to_string());
    println!(
        "case {} seed {} grid {}: convergence pass {}, oracle cost {}",
        config.case,
        config.seed,
        config.grid_label(),
        convergence,
        windpass::harness::fmt_sig(result.oracle_cost)
    );
    println!("reports in {}", args.out_dir.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let template = args.overrides.resolve()?;
    let grids = args
        .grids
        .iter()
        .map(|label| parse_grid_label(label))
        .collect::<Result<Vec<_>>>()?;
    let rows = windpass::harness::run_sweep(&template, &grids, &args.cases, args.seeds)?;
    emit_summary(&rows, &args.out_dir)?;
    for row in &rows {
        println!(
            "{} case {}: median {} ({}:{} converged)",
            row.grid,
            row.case,
            row.median_passes
                .map_or("none".to_string(), windpass::harness::fmt_sig),
            row.converged,
            row.trials
        );
    }
    println!("summary in {}", args.out_dir.join("summary.csv").display());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.result)
        .map_err(|e| Error::Io(format!("{}: {e}", args.result.display())))?;
    let result: TrialResult = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", args.result.display())))?;
    emit_reports(&result, &args.out_dir)?;
    println!("reports in {}", args.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Synth(args) => synth(args),
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Report(args) => report(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
