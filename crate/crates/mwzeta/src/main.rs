//! Command-line entry point: run one point-counting job described by a
//! TOML/JSON file and/or flags, print the result as JSON.
//!
//! Exit codes: 0 success (all validations pass), 2 invalid input,
//! 3 precision failure, 4 validation failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use mwzeta::job::{self, JobSpec};
use mwzeta::Error;

#[derive(Parser, Debug)]
#[command(
    name = "mwzeta",
    about = "Zeta functions of hyperelliptic curves y^2 = Q(x) over F_q (q odd) \
             via the Frobenius action on rigid cohomology with compact support"
)]
struct Cli {
    /// Job file (TOML, or JSON starting with '{'); flags override its fields.
    job: Option<PathBuf>,

    /// Characteristic (odd prime).
    #[arg(long)]
    p: Option<u64>,

    /// Extension degree of F_q over F_p.
    #[arg(long)]
    n: Option<usize>,

    /// Monic modulus of F_q, comma-separated integers, constant first
    /// (e.g. "-2,0,1" for x^2 - 2). Generated deterministically if absent.
    #[arg(long, allow_hyphen_values = true)]
    modulus: Option<String>,

    /// Branch points: elements of F_q separated by ';', each a
    /// comma-separated coordinate list in the generator (e.g. "0;1;4"
    /// over F_5, or "0,1;1,1;2,1" over F_25).
    #[arg(long)]
    lambdas: Option<String>,

    /// Coefficients of Q(x) (must split with distinct roots over F_q),
    /// same element syntax as --lambdas, constant coefficient first.
    #[arg(long = "Q")]
    q_poly: Option<String>,

    /// Analytic precision override.
    #[arg(long)]
    p1: Option<usize>,

    /// p-adic precision override.
    #[arg(long)]
    p2: Option<usize>,

    /// Use short, empirically validated precisions instead of the
    /// guaranteed bound.
    #[arg(long)]
    empirical_precision: bool,

    /// Verify the counts against brute-force enumeration.
    #[arg(long)]
    verify: bool,

    /// Dump the cohomology basis instead of running the zeta pipeline.
    #[arg(long)]
    emit_basis: bool,

    /// Compact machine output (one JSON object, no pretty-printing).
    #[arg(long)]
    json: bool,

    /// Number of point counts N_1..N_r to report.
    #[arg(long)]
    r_max: Option<usize>,

    /// off, error, or info (also via the MWZETA_LOG variable).
    #[arg(long, default_value = "error")]
    log_level: String,
}

fn parse_elements(text: &str) -> Result<Vec<Vec<u64>>, Error> {
    text.split(';')
        .map(|el| {
            el.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::InvalidInput(format!("bad coordinate {c:?}: {e}")))
                })
                .collect()
        })
        .collect()
}

fn build_job(cli: &Cli) -> Result<JobSpec, Error> {
    let mut job = match &cli.job {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {path:?}: {e}")))?;
            JobSpec::from_str_auto(&text)?
        }
        None => JobSpec {
            p: 0,
            n: 1,
            modulus: None,
            lambdas: None,
            q_poly: None,
            p1: None,
            p2: None,
            empirical_precision: false,
            verify: false,
            r_max: 2,
        },
    };
    if let Some(p) = cli.p {
        job.p = p;
    }
    if let Some(n) = cli.n {
        job.n = n;
    }
    if let Some(m) = &cli.modulus {
        let coeffs = m
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<i64>()
                    .map_err(|e| Error::InvalidInput(format!("bad modulus coefficient: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        job.modulus = Some(coeffs);
    }
    if let Some(ls) = &cli.lambdas {
        job.lambdas = Some(parse_elements(ls)?);
    }
    if let Some(qs) = &cli.q_poly {
        job.q_poly = Some(parse_elements(qs)?);
    }
    if cli.p1.is_some() {
        job.p1 = cli.p1;
    }
    if cli.p2.is_some() {
        job.p2 = cli.p2;
    }
    if cli.empirical_precision {
        job.empirical_precision = true;
    }
    if cli.verify {
        job.verify = true;
    }
    if let Some(r) = cli.r_max {
        job.r_max = r;
    }
    if job.p == 0 {
        return Err(Error::InvalidInput(
            "no characteristic given (set --p or provide a job file)".into(),
        ));
    }
    Ok(job)
}

fn emit_error(err: &Error) -> ExitCode {
    let code = job::exit_code_for(err);
    eprintln!(
        "{}",
        serde_json::json!({
            "error": err.to_string(),
            "exit_code": code,
        })
    );
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log_level = std::env::var("MWZETA_LOG").unwrap_or_else(|_| cli.log_level.clone());
    let verbose = log_level == "info";

    let job = match build_job(&cli) {
        Ok(j) => j,
        Err(e) => return emit_error(&e),
    };
    if verbose {
        eprintln!("job: {}", serde_json::to_string(&job).unwrap());
    }

    let print = |v: &serde_json::Value| {
        if cli.json {
            println!("{v}");
        } else {
            println!("{}", serde_json::to_string_pretty(v).unwrap());
        }
    };

    if cli.emit_basis {
        return match job::emit_basis(&job) {
            Ok(dump) => {
                print(&serde_json::to_value(&dump).unwrap());
                ExitCode::SUCCESS
            }
            Err(e) => emit_error(&e),
        };
    }

    match job::run(&job) {
        Ok(out) => {
            print(&serde_json::to_value(&out).unwrap());
            let f = &out.result.validated;
            let ok = f.functional_equation
                && f.count_bounds
                && f.oracle_agreement.unwrap_or(true);
            if ok {
                ExitCode::SUCCESS
            } else {
                if verbose {
                    eprintln!("validation failed: {f:?}");
                }
                ExitCode::from(4)
            }
        }
        Err(e) => emit_error(&e),
    }
}
