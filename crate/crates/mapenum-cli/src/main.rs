//! Command-line front end: every computation as a scriptable command with
//! JSON (or CSV) output.
//!
//! Exit codes: 0 success, 1 computation error or failed verification,
//! 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mapenum::asymptotics_enum::{asymptotic_estimate, convergence_report, disc_series, map_series};
use mapenum::char_system::{solve_characteristic, verify_schema};
use mapenum::sampler_limit::{limit_check, sample_records, CountTables};
use mapenum::scheme_constants::scheme_table;
use mapenum::surface::Surface;
use mapenum::tree_gf::{legs_series_int, tree_series_int, DegreeSet};
use mapenum::verification::{run_all, VerifyOptions};
use serde_json::{json, Value};

const SCHEMA: u32 = 1;

#[derive(Parser)]
#[command(name = "mapenum", version, about = "Counting, asymptotics and sampling of maps and dissections on surfaces with boundary")]
struct Cli {
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic constants τ, ρ, γ of a degree set.
    Constants {
        #[command(flatten)]
        degrees: DegreesArg,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
    },
    /// Coefficients of the tree series, or of trees with legs.
    TreeCoeffs {
        #[command(flatten)]
        degrees: DegreesArg,
        #[arg(long)]
        order: usize,
        /// Number of legs; 0 gives the plain tree series.
        #[arg(long, default_value_t = 0)]
        legs: usize,
    },
    /// Cubic-scheme counts a(S) for all surfaces up to the given genus and boundary count.
    SchemeTable {
        #[arg(long)]
        max_genus: u32,
        #[arg(long)]
        max_boundaries: u32,
        #[arg(long, conflicts_with = "non_orientable")]
        orientable: bool,
        #[arg(long)]
        non_orientable: bool,
    },
    /// Exact counts of leaf-rooted maps by number of leaves.
    ExactSeries {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        order: usize,
    },
    /// Asymptotic estimate, with exact/estimate ratios at the listed sizes.
    Asymptotic {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
    },
    /// Uniform samples: structuring edges and dissection status per sample.
    Sample {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: u64,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Skip the dissection check (the column is left empty).
        #[arg(long)]
        no_dissection_check: bool,
    },
    /// Empirical moments of structuring edges against the limit law.
    LimitCheck {
        #[command(flatten)]
        target: TargetArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 4)]
        rmax: u32,
        #[command(flatten)]
        run: RunArgs,
        /// Also sample at 4n and report the non-dissection fraction ratio.
        #[arg(long)]
        decay: bool,
    },
    /// Run every cross-check; exits 1 if any fails.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Monte-Carlo samples per size.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
}

#[derive(Args)]
struct DegreesArg {
    /// Allowed face degrees, comma separated, each at least 3.
    #[arg(long, value_parser = parse_degrees)]
    degrees: DegreeSet,
}

#[derive(Args)]
struct TargetArgs {
    /// `O<g>.<b>`, `N<g>.<b>`, `disc`, `cylinder` or `moebius`.
    #[arg(long)]
    surface: Surface,
    #[command(flatten)]
    degrees: DegreesArg,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_degrees(s: &str) -> Result<DegreeSet, String> {
    let list = s
        .split(',')
        .map(|x| x.trim().parse::<u32>().map_err(|e| format!("bad degree {x:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    DegreeSet::new(&list).map_err(|e| e.to_string())
}

/// Integers as JSON numbers when they fit in `i64`, as strings otherwise.
fn big(v: &impl ToString) -> Value {
    let s = v.to_string();
    s.parse::<i64>().map_or(Value::String(s), Value::from)
}

struct Failure {
    kind: &'static str,
    message: String,
}

fn fail(kind: &'static str, e: impl ToString) -> Failure {
    Failure { kind, message: e.to_string() }
}

enum Output {
    Json(Value),
    Text(String),
}

fn run(command: Command) -> Result<(Output, bool), Failure> {
    let ok = |v: Value| Ok((Output::Json(v), true));
    match command {
        Command::Constants { degrees, tol } => {
            let delta = degrees.degrees;
            let c = solve_characteristic(&delta, tol).map_err(|e| fail("characteristic", e))?;
            let schema = verify_schema(&delta, &c, 1e-10);
            ok(json!({
                "schema": SCHEMA,
                "degrees": delta.degrees(),
                "tau": c.tau,
                "rho": c.rho,
                "gamma": c.gamma,
                "p": c.period,
                "residual": c.residual,
                "schemaCheck": schema,
            }))
        }
        Command::TreeCoeffs { degrees, order, legs } => {
            let delta = degrees.degrees;
            let s = if legs == 0 { tree_series_int(&delta, order) } else { legs_series_int(&delta, legs, order) };
            ok(json!({
                "schema": SCHEMA,
                "degrees": delta.degrees(),
                "legs": legs,
                "coeffs": s.coeffs().iter().map(big).collect::<Vec<_>>(),
            }))
        }
        Command::SchemeTable { max_genus, max_boundaries, non_orientable, .. } => {
            let table = scheme_table(!non_orientable, max_genus, max_boundaries).map_err(|e| fail("scheme", e))?;
            let entries: Vec<Value> = table
                .iter()
                .map(|e| {
                    json!({
                        "surface": e.surface.to_string(),
                        "genus": e.surface.genus,
                        "boundaries": e.surface.boundaries,
                        "chi": e.surface.chi(),
                        "a": big(&e.a),
                    })
                })
                .collect();
            ok(json!({ "schema": SCHEMA, "orientable": !non_orientable, "entries": entries }))
        }
        Command::ExactSeries { target, order } => {
            let (s, delta) = (target.surface, target.degrees.degrees);
            let coeffs: Vec<Value> = if s.is_disc() {
                if delta.degrees() != [3] {
                    return Err(fail("unsupported", "the disc is only counted for triangulations (degrees 3)"));
                }
                disc_series(order).coeffs().iter().map(big).collect()
            } else {
                let a = map_series(&s, &delta, order).map_err(|e| fail("series", e))?;
                a.coeffs(order).iter().map(big).collect()
            };
            ok(json!({ "schema": SCHEMA, "surface": s.to_string(), "degrees": delta.degrees(), "coeffs": coeffs }))
        }
        Command::Asymptotic { target, n } => {
            let (s, delta) = (target.surface, target.degrees.degrees);
            let est = asymptotic_estimate(&s, &delta).map_err(|e| fail("asymptotics", e))?;
            let rows = if n.is_empty() {
                Vec::new()
            } else {
                convergence_report(&s, &delta, &n).map_err(|e| fail("asymptotics", e))?
            };
            ok(json!({
                "schema": SCHEMA,
                "surface": s.to_string(),
                "degrees": delta.degrees(),
                "a": big(&est.a),
                "constant": est.constant,
                "base": est.base,
                "polyExponent": est.poly_exponent(),
                "period": est.period,
                "residue": est.residue,
                "convergence": rows,
            }))
        }
        Command::Sample { target, n, count, run, format, no_dissection_check } => {
            let (s, delta) = (target.surface, target.degrees.degrees);
            let tables = CountTables::build(&s, &delta, n).map_err(|e| fail("sampler", e))?;
            let records = sample_records(&tables, run.seed, count, run.threads as usize, !no_dissection_check);
            match format {
                Format::Csv => {
                    let mut text = String::from("sampleIndex,structuringEdges,isDissection\n");
                    for r in &records {
                        let dis = r.is_dissection.map_or(String::new(), |b| b.to_string());
                        text.push_str(&format!("{},{},{}\n", r.index, r.structuring_edges, dis));
                    }
                    Ok((Output::Text(text), true))
                }
                Format::Json => ok(json!({
                    "schema": SCHEMA,
                    "surface": s.to_string(),
                    "degrees": delta.degrees(),
                    "n": n,
                    "seed": run.seed,
                    "total": big(tables.total()),
                    "samples": records,
                })),
            }
        }
        Command::LimitCheck { target, n, samples, rmax, run, decay } => {
            let (s, delta) = (target.surface, target.degrees.degrees);
            let threads = run.threads as usize;
            let report = limit_check(&s, &delta, n, samples, rmax, run.seed, threads).map_err(|e| fail("sampler", e))?;
            let decay = if decay {
                let far = limit_check(&s, &delta, 4 * n, samples, 0, run.seed, threads).map_err(|e| fail("sampler", e))?;
                json!({
                    "n": 4 * n,
                    "nonDissectionFraction": far.non_dissection_fraction,
                    "ratio": report.non_dissection_fraction / far.non_dissection_fraction,
                })
            } else {
                Value::Null
            };
            ok(json!({ "schema": SCHEMA, "report": report, "decay": decay }))
        }
        Command::Verify { run, samples } => {
            let opts = VerifyOptions { seed: run.seed, threads: run.threads as usize, samples };
            let checks = run_all(&opts, |c| {
                let status = if c.passed { "PASS" } else { "FAIL" };
                eprintln!("{status} {}: {}", c.name, c.detail);
            });
            let all = checks.iter().all(|c| c.passed);
            Ok((Output::Json(json!({ "schema": SCHEMA, "passed": all, "checks": checks })), all))
        }
    }
}

fn emit(out: Option<&PathBuf>, output: &Output) -> io::Result<()> {
    let mut w: Box<dyn Write> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match output {
        Output::Json(v) => {
            serde_json::to_writer_pretty(&mut w, v)?;
            writeln!(w)?;
        }
        Output::Text(t) => w.write_all(t.as_bytes())?,
    }
    w.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (output, success) = match run(cli.command) {
        Ok(r) => r,
        Err(f) => {
            let v = json!({ "schema": SCHEMA, "error": { "kind": f.kind, "message": f.message } });
            println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            return ExitCode::from(1);
        }
    };
    if let Err(e) = emit(cli.out.as_ref(), &output) {
        let v = json!({ "schema": SCHEMA, "error": { "kind": "io", "message": e.to_string() } });
        println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
        return ExitCode::from(1);
    }
    if success {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
