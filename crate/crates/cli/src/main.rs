use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lp_dolbeault::fiber::solve::SolverCase;
use lp_dolbeault::report::{band_table, render_csv, render_json, render_markdown};
use lp_dolbeault::riemann_roch::{h0, h1, vanishing_threshold};
use lp_dolbeault::verify::{self, Suite, VerifyOptions};
use lp_dolbeault::{CurveData, DimTable, DimensionData, Exponent, IndexBundle};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "lpdolbeault", version, about = "L^p Dolbeault obstruction bands, index tables and solver checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact indices a, c, s, k(p,s), w(p), ν range and breakpoints.
    Indices {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        q: u32,
        #[arg(long)]
        dim: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Band table for dim H^q over all p.
    Report {
        #[arg(long, default_value_t = 0)]
        genus: u32,
        /// e = −deg(N|_X).
        #[arg(long, default_value_t = 1)]
        degree: u32,
        #[arg(long, default_value_t = 2)]
        dim: u32,
        #[arg(long, default_value_t = 1)]
        q: u32,
        /// JSON table of h0/h1 per μ, required for genus ≥ 2 and for d ≥ 3.
        #[arg(long)]
        dimtable: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// h0 and h1 of N^{-μ} on a genus-0 or genus-1 curve.
    RiemannRoch {
        #[arg(long, default_value_t = 0)]
        genus: u32,
        #[arg(long, default_value_t = 1)]
        degree: u32,
        #[arg(long, default_value_t = -5, allow_hyphen_values = true)]
        from: i64,
        /// Defaults to the vanishing threshold.
        #[arg(long, allow_hyphen_values = true)]
        to: Option<i64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a solver case file.
    Solve {
        case: PathBuf,
        /// Single level n = 64, tolerance scaled by 256/64.
        #[arg(long)]
        fast: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a verification suite and print a JSON summary.
    Verify {
        #[arg(long, default_value = "all", value_parser = parse_suite)]
        suite: Suite,
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

fn parse_exponent(text: &str) -> Result<Exponent, String> {
    text.parse().map_err(|e: lp_dolbeault::IndexError| e.to_string())
}

fn parse_suite(text: &str) -> Result<Suite, String> {
    text.parse()
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Verification(String),
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    text
}

fn indices(p: Exponent, q: u32, d: u32, output: &Output) -> Result<(), Failure> {
    let bundle = IndexBundle::new(p, q, d)?;
    let value = serde_json::to_value(&bundle).expect("serializable bundle");
    let fields: Vec<(String, String)> = value
        .as_object()
        .expect("bundle renders as an object")
        .iter()
        .map(|(k, v)| {
            let text = match v {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| i.as_str().unwrap_or_default().to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect();
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&bundle),
        Format::Csv => {
            let mut s = String::from("key,value\n");
            for (k, v) in &fields {
                let _ = writeln!(s, "{k},{v}");
            }
            s
        }
        Format::Md => {
            let mut s = String::from("| key | value |\n| --- | --- |\n");
            for (k, v) in &fields {
                let _ = writeln!(s, "| {k} | {v} |");
            }
            s
        }
    };
    emit(&text, output.out.as_deref())
}

fn report(genus: u32, degree: u32, d: u32, q: u32, dimtable: Option<&Path>, output: &Output) -> Result<(), Failure> {
    let dims = match dimtable {
        Some(path) => DimensionData::Table(DimTable::load(path)?),
        None => DimensionData::Curve(CurveData::new(genus, degree)?),
    };
    let rows = band_table(&dims, d, q)?;
    let text = match output.format.unwrap_or(Format::Md) {
        Format::Md => render_markdown(&rows),
        Format::Csv => render_csv(&rows),
        Format::Json => render_json(&rows),
    };
    emit(&text, output.out.as_deref())
}

#[derive(Serialize)]
struct RrRow {
    mu: i64,
    degree: i64,
    h0: u64,
    h1: u64,
}

fn riemann_roch(genus: u32, degree: u32, from: i64, to: Option<i64>, output: &Output) -> Result<(), Failure> {
    let curve = CurveData::new(genus, degree)?;
    let to = match to {
        Some(to) => to,
        None => vanishing_threshold(curve)?,
    };
    if to < from {
        return Err(Failure::Usage(format!("empty range {from}..={to}")));
    }
    let rows = (from..=to)
        .map(|mu| {
            Ok(RrRow {
                mu,
                degree: curve.degree(mu),
                h0: h0(curve, mu)?,
                h1: h1(curve, mu)?,
            })
        })
        .collect::<Result<Vec<_>, lp_dolbeault::RiemannRochError>>()?;
    let text = match output.format.unwrap_or(Format::Md) {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut s = String::from("mu,degree,h0,h1\n");
            for r in &rows {
                let _ = writeln!(s, "{},{},{},{}", r.mu, r.degree, r.h0, r.h1);
            }
            s
        }
        Format::Md => {
            let mut s = String::from("| μ | deg | h0 | h1 |\n| --- | --- | --- | --- |\n");
            for r in &rows {
                let _ = writeln!(s, "| {} | {} | {} | {} |", r.mu, r.degree, r.h0, r.h1);
            }
            s
        }
    };
    emit(&text, output.out.as_deref())
}

fn solve(path: &Path, fast: bool, seed: Option<u64>, output: &Output) -> Result<(), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut case: SolverCase =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if fast {
        case.tolerance *= 256.0 / 64.0;
        case.grid.levels = vec![64];
    }
    if seed.is_some() {
        case.seed = seed;
    }
    let result = if fast { case.run_resolved()? } else { case.run()? };
    let text = match output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&result),
        Format::Csv => {
            let mut s = String::from("n,inner,outer,residual_l1,omega_l1,relative_residual,eta_lp\n");
            for level in &result.levels {
                for a in &level.annuli {
                    let _ = writeln!(
                        s,
                        "{},{},{},{:e},{:e},{:e},{:e}",
                        level.n, a.inner, a.outer, a.residual_l1, a.omega_l1, a.relative_residual, a.eta_lp
                    );
                }
            }
            s
        }
        Format::Md => return Err(Failure::Usage("solve supports --format json or csv".into())),
    };
    emit(&text, output.out.as_deref())?;
    if result.passed {
        Ok(())
    } else {
        Err(Failure::Verification(format!(
            "residual above tolerance {} at the finest level",
            result.tolerance
        )))
    }
}

fn run_verify(suite: Suite, fast: bool, seed: u64, out: Option<&Path>) -> Result<(), Failure> {
    let summary = verify::run(suite, VerifyOptions { fast, seed });
    emit(&to_json(&summary), out)?;
    if summary.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Indices { p, q, dim, output } => indices(*p, *q, *dim, output),
        Command::Report {
            genus,
            degree,
            dim,
            q,
            dimtable,
            output,
        } => report(*genus, *degree, *dim, *q, dimtable.as_deref(), output),
        Command::RiemannRoch {
            genus,
            degree,
            from,
            to,
            output,
        } => riemann_roch(*genus, *degree, *from, *to, output),
        Command::Solve {
            case,
            fast,
            seed,
            output,
        } => solve(case, *fast, *seed, output),
        Command::Verify { suite, fast, seed, out } => run_verify(*suite, *fast, *seed, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
