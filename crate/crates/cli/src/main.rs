use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robin_fhbvm::bench::{csv_table, run_case, sweep_spatial, sweep_time, write_atomic, RunConfig};
use robin_fhbvm::weighted_jacobi::build_tables;

#[derive(Parser)]
#[command(
    name = "fhbvm",
    version,
    about = "Time-fractional reaction-diffusion benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write a CSV row
    Run {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "M")]
        big_m: Option<usize>,
        /// surface file `x t u_num u_exact abs_err`
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Vary the spatial degree N
    SweepSpace {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long = "N", value_delimiter = ',', default_values_t = [1, 3, 5, 7, 9, 10, 11, 12, 13, 14])]
        n: Vec<usize>,
        #[arg(long = "M")]
        big_m: Option<usize>,
    },
    /// Vary the number of uniform steps M
    SweepTime {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long = "M", value_delimiter = ',', default_values_t = [2, 3, 4, 5, 6])]
        big_m: Vec<usize>,
    },
    /// Dump the precomputed quadrature and memory tables
    Tables {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long = "M")]
        big_m: Option<usize>,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// example1, example2 or example3
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// graded steps replacing the first m uniform ones
    #[arg(long = "m")]
    m: Option<usize>,
    /// refinement level of the graded part
    #[arg(long = "v")]
    v: Option<usize>,
    /// Gauss-Jacobi nodes
    #[arg(long = "k")]
    k: Option<usize>,
    /// Jacobi polynomials in the field expansion
    #[arg(long = "s")]
    s: Option<usize>,
    #[arg(long = "T")]
    t_final: Option<f64>,
    /// output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// flat `key = value` file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// report zero seconds so output is reproducible byte for byte
    #[arg(long)]
    no_timing: bool,
}

impl CaseArgs {
    fn resolve(&self, n: Option<usize>, big_m: Option<usize>) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_config_file(path)
                .map_err(|e| format!("{}: {e}", path.display()))?;
        }
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        macro_rules! set {
            ($($field:ident = $value:expr),*) => { $(if let Some(v) = $value { cfg.$field = v; })* };
        }
        set!(
            alpha = self.alpha,
            m = self.m,
            v = self.v,
            k = self.k,
            s = self.s,
            t_final = self.t_final
        );
        set!(n = n, big_m = big_m);
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        cfg.no_timing |= self.no_timing;
        Ok(cfg)
    }
}

fn emit(cfg: &RunConfig, text: &str) -> Result<(), String> {
    match &cfg.out {
        Some(path) => write_atomic(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run {
            case,
            n,
            big_m,
            grid,
        } => {
            let mut cfg = case.resolve(n, big_m)?;
            if grid.is_some() {
                cfg.grid = grid;
            }
            let result = run_case(&cfg).map_err(|e| e.to_string())?;
            emit(&cfg, &csv_table(&[result]))
        }
        Command::SweepSpace { case, n, big_m } => {
            let cfg = case.resolve(None, big_m)?;
            let results = sweep_spatial(&cfg, &n).map_err(|e| e.to_string())?;
            emit(&cfg, &csv_table(&results))
        }
        Command::SweepTime { case, n, big_m } => {
            let cfg = case.resolve(n, None)?;
            let results = sweep_time(&cfg, &big_m).map_err(|e| e.to_string())?;
            emit(&cfg, &csv_table(&results))
        }
        Command::Tables { case, big_m } => {
            let cfg = case.resolve(None, big_m)?;
            let mesh = cfg.mesh().map_err(|e| e.to_string())?;
            let tables = build_tables(cfg.alpha, cfg.k, cfg.s, &mesh).map_err(|e| e.to_string())?;
            emit(&cfg, &tables.dump())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
