use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use frontlab::config::{parse_config, ExperimentConfig, RawConfig};
use frontlab::format::fmt_f64;
use frontlab::harness::{check_subsolution, output_root, run_experiment, sweep, sweep_csv, SpeedsRow, SweepAxis};
use frontlab::hypotheses::check_hypotheses;
use frontlab::{Error, Result};

#[derive(Parser)]
#[command(name = "frontlab", version, about = "Spreading and persistence experiments for a nonlocal predator-prey system on a shifting habitat")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the prey and predator spreading speeds.
    Speeds { config: PathBuf },
    /// Run one experiment and write its CSV bundle.
    Simulate {
        config: PathBuf,
        /// Output directory (default: $FRONTLAB_OUT/<run.label>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per value of a parameter.
    Sweep {
        config: PathBuf,
        /// One of s, a, b, d1, d2, eta.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Treat values as multiples of the base s̲.
        #[arg(long)]
        relative: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the standing assumptions.
    CheckHypotheses {
        config: PathBuf,
        /// Exit with status 2 when a clause fails.
        #[arg(long)]
        strict: bool,
    },
    /// Build and verify the moving-window sub-solution.
    VerifySubsolution {
        config: PathBuf,
        /// Exit with status 2 when a clause fails.
        #[arg(long)]
        strict: bool,
    },
}

fn run_dir(config: &ExperimentConfig, out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| output_root().join(&config.label))
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Speeds { config } => {
            print!("{}", SpeedsRow::compute(&parse_config(&config)?)?.to_csv());
        }
        Command::Simulate { config, out } => {
            let cfg = parse_config(&config)?;
            let dir = run_dir(&cfg, out);
            let summary = run_experiment(&cfg, &dir)?;
            if !summary.in_scope() {
                eprintln!(
                    "warning: assumptions {:?} fail; verdicts are outside their scope",
                    summary.hypotheses.failures()
                );
            }
            for w in &summary.trajectory.diagnostics.warnings {
                eprintln!("warning: {w}");
            }
            println!("species,eta,epsilon,band_min,verdict");
            for r in [&summary.prey, &summary.predator] {
                println!(
                    "{},{},{},{},{}",
                    r.species.label(),
                    fmt_f64(r.eta),
                    fmt_f64(r.epsilon),
                    fmt_f64(r.band_min),
                    r.verdict.name()
                );
            }
            eprintln!("wrote {}", dir.display());
        }
        Command::Sweep { config, axis, values, workers, relative, out } => {
            let text = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let raw = RawConfig::parse(&text)?;
            let base = config.parent().unwrap_or_else(|| Path::new("."));
            let label = ExperimentConfig::resolve(&raw, base)?.label;
            let dir = out.unwrap_or_else(|| output_root().join(label).join("sweep"));
            let rows = sweep(&raw, base, SweepAxis::parse(&axis)?, &values, relative, workers, &dir)?;
            print!("{}", sweep_csv(&rows)?);
        }
        Command::CheckHypotheses { config, strict } => {
            let cfg = parse_config(&config)?;
            let (j1, j2) = cfg.kernels()?;
            let report = check_hypotheses(&cfg.params, &cfg.habitat.build()?, &j1, &j2)?;
            print!("{}", report.to_csv());
            if strict && !report.all_ok() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::VerifySubsolution { config, strict } => {
            let cfg = parse_config(&config)?;
            let (wave, report) = check_subsolution(&cfg)?;
            print!("{}", report.to_csv());
            println!(
                "# R = {}, beta = {}, eta = {}, c = {}, m = {}",
                fmt_f64(wave.r_window),
                fmt_f64(wave.beta),
                fmt_f64(wave.eta_amp),
                fmt_f64(wave.c),
                fmt_f64(wave.m)
            );
            println!(
                "# {} (worst margin {})",
                if report.passed() { "PASS" } else { "FAIL" },
                fmt_f64(report.worst_margin())
            );
            if strict && !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::UnknownKey(_) = e {
                eprintln!("hint: keys take the form `section.key`, see README");
            }
            ExitCode::from(1)
        }
    }
}
