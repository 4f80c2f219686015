//! Experiment driver.
//!
//! `run` and `batch` execute the full pipeline from a TOML config and write
//! JSON reports; `check-lemmas` cross-validates the annihilation routines
//! against exhaustive oracles; `norms` estimates the operator norm of a
//! matrix in the shared text format; `order` prints the two-parameter
//! enumeration order.  Exit code is 0 iff every verdict passes.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use factorlab::harness::{self, config::parse_space_str};
use factorlab::harness::config::{BatchConfig, RunConfig};
use factorlab::opnorm::{matrix_from_file, op_norm, OperatorRep};
use factorlab::oracle::lemma_suite;
use factorlab::seqspace::precede_unrank;

#[derive(Parser)]
#[command(name = "factorlab", version, about = "factorization experiment driver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one run config and write its report
    Run {
        #[arg(long)]
        config: PathBuf,
        /// override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// directory for report files (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
        /// recheck certificates in exact rational arithmetic
        #[arg(long)]
        exact: bool,
    },
    /// Execute every run in a batch config and write a summary
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        exact: bool,
    },
    /// Randomized annihilation suite against exhaustive oracles
    CheckLemmas {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Operator norm of a matrix in the shared text format
    Norms {
        /// matrix file: "rows cols" header then row-major entries
        matrix: PathBuf,
        /// domain space, e.g. linf:8, lp:2:16, lpsum:1:16:inf:512
        #[arg(long)]
        domain: String,
        /// codomain space (default: same as domain)
        #[arg(long)]
        codomain: Option<String>,
    },
    /// Print the first COUNT ranks of the two-parameter order
    Order {
        #[arg(default_value_t = 36)]
        count: usize,
    },
}

fn write_report(out: &Option<PathBuf>, name: &str, body: &str) -> Result<(), String> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| format!("{}: {e}", path.display()))?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn cmd_run(
    config: &PathBuf,
    seed: Option<u64>,
    out: &Option<PathBuf>,
    exact: bool,
) -> Result<bool, String> {
    let text = fs::read_to_string(config).map_err(|e| format!("{}: {e}", config.display()))?;
    let mut cfg = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.exact |= exact;
    let report = harness::run(&cfg);
    write_report(out, &format!("run-{:016x}.json", cfg.seed), &report.to_json())?;
    Ok(report.verdict)
}

fn cmd_batch(config: &PathBuf, out: &Option<PathBuf>, exact: bool) -> Result<bool, String> {
    let text = fs::read_to_string(config).map_err(|e| format!("{}: {e}", config.display()))?;
    let mut cfg = BatchConfig::from_toml(&text).map_err(|e| e.to_string())?;
    for run in &mut cfg.runs {
        run.exact |= exact;
    }
    let (reports, summary) = harness::batch(&cfg.runs);
    for (i, r) in reports.iter().enumerate() {
        write_report(out, &format!("run-{i:04}.json", ), &r.to_json())?;
    }
    write_report(out, "batch-summary.json", &summary.to_json())?;
    eprintln!("{}/{} runs passed", summary.passed, summary.total);
    Ok(summary.passed == summary.total)
}

fn cmd_check_lemmas(cases: usize, seed: u64) -> bool {
    let r = lemma_suite(cases, seed);
    println!(
        "{} cases: {} past checks, {} future checks, {} discrepancies",
        r.cases,
        r.past_checked,
        r.future_checked,
        r.discrepancies.len()
    );
    for d in &r.discrepancies {
        println!("  {d}");
    }
    r.discrepancies.is_empty()
}

fn cmd_norms(matrix: &PathBuf, domain: &str, codomain: Option<&str>) -> Result<bool, String> {
    let m = matrix_from_file(matrix).map_err(|e| e.to_string())?;
    let dom = parse_space_str(domain).map_err(|e| e.to_string())?;
    let cod = match codomain {
        Some(s) => parse_space_str(s).map_err(|e| e.to_string())?,
        None => dom.clone(),
    };
    let a = OperatorRep::new(m, dom, cod).map_err(|e| e.to_string())?;
    let e = op_norm(&a);
    if e.exact {
        println!("norm = {} (exact)", e.upper);
    } else {
        println!("norm in [{}, {}]", e.lower, e.upper);
    }
    Ok(true)
}

fn cmd_order(count: usize) {
    for rank in 1..=count {
        let ix = precede_unrank(rank);
        println!("{rank}: ({}, {})", ix.i, ix.j);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run { config, seed, out, exact } => cmd_run(config, *seed, out, *exact),
        Cmd::Batch { config, out, exact } => cmd_batch(config, out, *exact),
        Cmd::CheckLemmas { cases, seed } => Ok(cmd_check_lemmas(*cases, *seed)),
        Cmd::Norms { matrix, domain, codomain } => {
            cmd_norms(matrix, domain, codomain.as_deref())
        }
        Cmd::Order { count } => {
            cmd_order(*count);
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
