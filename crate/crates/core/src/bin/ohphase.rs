use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use ohphase::config::{OutputFormat, RunConfig};
use ohphase::driver::{run_critical, run_sweep, run_verify, CheckStatus};
use ohphase::phase::ZeroTarget;
use ohphase::report::gnuplot_script;
use ohphase::Error;

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_TRACKING: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "ohphase", version, about = "Geometric phases of OH in rotating electric and magnetic fields")]
struct Cli {
    /// Directory for output files (overrides the config).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Output format (overrides the config).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for grid evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate energies and phases over the configured rotation-rate grid.
    Sweep { config: PathBuf },
    /// Locate zero-phase rotation rates.
    Critical { config: PathBuf },
    /// Run the consistency checks and write a pass/fail report.
    Verify { config: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn from_error(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => EXIT_CONFIG,
            Error::TrackingBreakdown { .. } => EXIT_TRACKING,
            _ => EXIT_OTHER,
        };
        Self { code, message: e.to_string() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self { code: EXIT_OTHER, message: format!("cannot write {}: {e}", path.display()) }
    }
}

struct Output {
    dir: PathBuf,
    basename: String,
    format: OutputFormat,
}

impl Output {
    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.basename))
    }

    fn write(&self, suffix: &str, contents: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Failure::io(&self.dir, e))?;
        let path = self.path(suffix);
        std::fs::write(&path, contents).map_err(|e| Failure::io(&path, e))?;
        info!("wrote {}", path.display());
        Ok(path)
    }
}

fn load(cli: &Cli, config: &Path) -> Result<(RunConfig, Output), Failure> {
    let cfg = RunConfig::from_path(config).map_err(|e| Failure { code: EXIT_CONFIG, message: e.to_string() })?;
    let dir = cli.output_dir.clone().or_else(|| cfg.output.directory.clone()).unwrap_or_else(|| PathBuf::from("."));
    let format = match cli.format {
        Some(Format::Csv) => OutputFormat::Csv,
        Some(Format::Json) => OutputFormat::Json,
        None => cfg.output.format,
    };
    let out = Output { dir, basename: cfg.output.basename.clone(), format };
    Ok((cfg, out))
}

fn sweep(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let outcome = run_sweep(cfg).map_err(Failure::from_error)?;
    let report = &outcome.report;
    for w in &report.annotations.warnings {
        warn!("{w}");
    }
    let tail = if outcome.breakdown.is_some() { ".partial" } else { "" };
    match out.format {
        OutputFormat::Csv => {
            out.write(&format!(".csv{tail}"), &report.rows_csv())?;
            out.write(&format!(".annotations.json{tail}"), &report.annotations_json())?;
            if cfg.output.gnuplot {
                out.write(".gp", &gnuplot_script(&format!("{}.csv{tail}", out.basename)))?;
            }
        }
        OutputFormat::Json => {
            out.write(&format!(".json{tail}"), &report.to_json())?;
            if cfg.output.gnuplot {
                warn!("gnuplot stub needs csv output; skipped");
            }
        }
    }
    if let Some(d) = report.annotations.max_closed_form_deviation {
        info!("max deviation from the pure-B closed form: {d:.3e} rad");
    }
    for o in report.annotations.oracle.iter().filter(|o| !o.passed) {
        warn!("oracle identity defect {:.3e} at omega_r = {:e}", o.identity_defect, o.omega_r);
    }
    match outcome.breakdown {
        Some(e) => Err(Failure { code: EXIT_TRACKING, message: format!("{e}; partial output kept") }),
        None => Ok(()),
    }
}

fn critical(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let report = run_critical(cfg).map_err(Failure::from_error)?;
    for w in &report.warnings {
        warn!("{w}");
    }
    match (report.closed_form, &report.closed_form_note) {
        (Some(w), _) => println!("closed form critical rate: {w:.16e} rad/s"),
        (None, Some(note)) => println!("{note}"),
        (None, None) => {}
    }
    if let Some(d) = report.closed_form_relative_deviation {
        println!("max relative deviation of state zeros from closed form: {d:.3e}");
    }
    println!("state zeros: {}", report.state_zeros.len());
    for z in &report.state_zeros {
        if let ZeroTarget::State { label } = z.target {
            println!("  {label} {:.16e}", z.omega_r);
        }
    }
    println!("pair zeros: {}", report.pair_zeros.len());
    for z in &report.pair_zeros {
        if let ZeroTarget::Pair { first, second } = z.target {
            println!("  {first} {second} {:.16e}", z.omega_r);
        }
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write(".critical.json", &json)?;
    Ok(())
}

fn verify(cfg: &RunConfig, out: &Output) -> Result<(), Failure> {
    let report = run_verify(cfg);
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped => "SKIP",
        };
        match c.value {
            Some(v) => println!("{status} {} {v:.3e} (tol {:.1e}) {}", c.name, c.tolerance.unwrap_or(f64::NAN), c.detail),
            None => println!("{status} {} {}", c.name, c.detail),
        }
    }
    for a in &report.advisories {
        println!("NOTE {} {:.6e} vs {:.6e} (relative {:.3e}) {}", a.name, a.value, a.reference, a.relative_deviation, a.detail);
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    out.write(".verify.json", &json)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure { code: EXIT_VERIFY, message: "verification failed".into() })
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("--threads: {e}") })?;
    }
    match &cli.command {
        Command::Sweep { config } => {
            let (cfg, out) = load(cli, config)?;
            sweep(&cfg, &out)
        }
        Command::Critical { config } => {
            let (cfg, out) = load(cli, config)?;
            critical(&cfg, &out)
        }
        Command::Verify { config } => {
            let (cfg, out) = load(cli, config)?;
            verify(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            error!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
