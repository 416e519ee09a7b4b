//! `epgauss`: parameter sweeps for the lossy three-resonator chain.
//!
//! Exit codes: 0 success, 2 invalid configuration or parameters, 3 numerical
//! failure, 4 I/O failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use epgauss_core::sweep::{self, Experiment, ExperimentConfig};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Parser)]
#[command(name = "epgauss", version, about = "Exceptional-point sweeps for a lossy three-resonator chain")]
struct Args {
    /// evolve, epmap, stabilize, reset-grid, reset-time, reset-squeeze or bounds
    experiment: String,
    /// Flat JSON object with configuration keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set kappa1=1e-3` or `--set tau_r=[2,6]`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores if omitted
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

enum Failure {
    Parameter(String),
    Numerical(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parameter(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parameter(m) | Failure::Numerical(m) | Failure::Io(m) => m,
        }
    }
}

impl From<epgauss_core::Error> for Failure {
    fn from(e: epgauss_core::Error) -> Self {
        if e.is_parameter_error() {
            Failure::Parameter(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

fn load_config(args: &Args, experiment: Experiment) -> Result<ExperimentConfig, Failure> {
    let mut given = Map::new();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(m)) => given = m,
            Ok(_) => return Err(Failure::Parameter(format!("{}: config must be a JSON object", path.display()))),
            Err(e) => return Err(Failure::Parameter(format!("{}: {e}", path.display()))),
        }
    }
    for s in &args.set {
        let (k, v) = sweep::parse_set(s)?;
        given.insert(k, v);
    }
    Ok(ExperimentConfig::new(experiment, &given)?)
}

fn execute(args: &Args) -> Result<(), Failure> {
    let experiment: Experiment = args.experiment.parse()?;
    let cfg = load_config(args, experiment)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(Failure::Parameter("--threads must be ≥ 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Failure::Numerical(e.to_string()))?;

    let start = Instant::now();
    let table = pool.install(|| sweep::run(&cfg))?;
    let elapsed = start.elapsed();

    let write = |w: &mut dyn Write| -> io::Result<()> {
        match args.format {
            Format::Csv => table.write_csv(&mut *w)?,
            Format::Jsonl => table.write_jsonl(&mut *w)?,
        }
        w.flush()
    };
    let io_err = |e: io::Error| Failure::Io(e.to_string());
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            write(&mut BufWriter::new(file)).map_err(io_err)?;
        }
        None => write(&mut BufWriter::new(io::stdout().lock())).map_err(io_err)?,
    }
    eprintln!("{}: {} rows in {:.3} s", experiment, table.rows().len(), elapsed.as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("epgauss: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
