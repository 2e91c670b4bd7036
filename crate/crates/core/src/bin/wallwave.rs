//! Batch front end: geometry export, phase tables, packing, solving and experiments.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wallwave::field::Field;
use wallwave::harness::config::{invalid, ConfigError, ExperimentConfig};
use wallwave::harness::{pack, read_report, run_experiment, solve, tally, write_report, ReportRow};
use wallwave::spectral::{write_branch_table, ModelSpec};
use wallwave::Error;

#[derive(Parser)]
#[command(name = "wallwave", version, about = "Edge wavepackets along curved domain walls")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the wall and write its frame table to `curve.csv`.
    Trace,
    /// Write eikonal tables to `phase.csv` and the branch to `branch.csv`.
    Phase {
        /// Number of x̃ samples across the valid range.
        #[arg(long, default_value_t = 101)]
        samples: usize,
    },
    /// Build the configured wavepacket on the solver grid and write `pack.bin`.
    Pack {
        /// Time at which the packet is evaluated.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Run the reference solver from a packed field through the configured times.
    Solve {
        /// Initial field in the binary field format.
        #[arg(long)]
        init: PathBuf,
    },
    /// Run the configured experiment and write `report.csv`.
    Experiment,
    /// Aggregate report files (or directories holding `report.csv`).
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
    Rejected,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Expr(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Rejected) => ExitCode::from(1),
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Usage("--config <file> is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Failure::Usage(format!("output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Trace => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let (_, curve) = cfg.require_wall()?.trace()?;
            curve.write_csv(create(&dir.join("curve.csv"))?).map_err(Error::from)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("curve_summary.csv"))?);
            let length = curve.total_length().unwrap_or(curve.s_range().1 - curve.s_range().0);
            w.write_record(["closed", "total_length", "winding", "min_slope", "max_abs_curvature"]).map_err(Error::from)?;
            w.write_record([
                curve.is_closed().to_string(),
                format!("{length:.17e}"),
                format!("{:.17e}", curve.winding()),
                format!("{:.17e}", curve.min_slope()),
                format!("{:.17e}", curve.max_abs_curvature()),
            ])
            .map_err(Error::from)?;
            w.flush()?;
            println!("closed={} total_length={length:.12}", curve.is_closed());
            Ok(())
        }
        Command::Phase { samples } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let (_, curve) = cfg.require_wall()?.trace()?;
            let mc = cfg.require_model()?;
            let model = ModelSpec::new(mc.kind, mc.epsilon[0]).map_err(Error::from)?;
            let branch = cfg.require_branch()?.build(model.model())?;
            let x0 = cfg.x0.unwrap_or(0.0);
            let range = match curve.total_length() {
                Some(l) => (x0 - l, x0 + l),
                None => curve.s_range(),
            };
            let env = cfg.require_envelope()?.envelope()?;
            let mu0 = curve.slope(x0).map_err(Error::from)?;
            let spec = wallwave::harness::config::build_packet(&model, &branch, curve, x0, env, range)?;
            let (lo, hi) = spec.phase.valid_range();
            let n = (*samples).max(2);
            let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
            let xis = spec.phase.xi_grid(9);
            spec.phase.write_csv(create(&dir.join("phase.csv"))?, &xs, &xis)?;
            write_branch_table(create(&dir.join("branch.csv"))?, &model, &branch, mu0, &xis)?;
            println!("valid_range=({lo:.9}, {hi:.9})");
            Ok(())
        }
        Command::Pack { time } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let eps = cfg.require_model()?.epsilon[0];
            let field = pack(&cfg, eps, *time)?;
            field.write_binary(create(&dir.join("pack.bin"))?).map_err(Error::from)?;
            println!("grid={}x{} norm={:.9e}", field.grid.nx, field.grid.ny, field.l2_norm());
            Ok(())
        }
        Command::Solve { init } => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let file = File::open(init).map_err(|e| Failure::Usage(format!("{}: {e}", init.display())))?;
            let field = Field::read_binary(BufReader::new(file)).map_err(|e| Failure::Usage(e.to_string()))?;
            let ts: Vec<f64> = match &cfg.times {
                Some(ts) => ts.iter().copied().filter(|&t| t > field.time).collect(),
                None => return Err(invalid("times", "missing").into()),
            };
            let last = solve(&cfg, field, &ts, Some(&dir.join("observables.csv")))?;
            last.write_binary(create(&dir.join("solution.bin"))?).map_err(Error::from)?;
            println!("t={:.9} norm={:.9e}", last.time, last.l2_norm());
            Ok(())
        }
        Command::Experiment => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let rows = run_experiment(&cfg, Some(&dir))?;
            summarize(&rows)
        }
        Command::Report { inputs } => {
            let mut rows = Vec::new();
            for p in inputs {
                let path = if p.is_dir() { p.join("report.csv") } else { p.clone() };
                let f = File::open(&path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                rows.extend(read_report(BufReader::new(f)).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?);
            }
            if let Some(o) = &cli.out {
                fs::create_dir_all(o)?;
                write_report(create(&o.join("report.csv"))?, &rows).map_err(Error::from)?;
            }
            summarize(&rows)
        }
    }
}

fn summarize(rows: &[ReportRow]) -> Result<(), Failure> {
    for r in rows {
        println!(
            "{} {:<5} {:<44} {:>16} {:<32} eps={} t={}",
            if r.pass { "PASS" } else { "FAIL" },
            r.experiment,
            r.metric,
            r.value,
            r.tolerance,
            r.epsilon,
            r.t
        );
    }
    let (pass, fail) = tally(rows);
    println!("{pass} passed, {fail} failed");
    if fail > 0 {
        Err(Failure::Rejected)
    } else {
        Ok(())
    }
}
