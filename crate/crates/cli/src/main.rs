//! `qbounds`: bound panels, parameter sweeps, projective-measurement search and self-test.

mod source;

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use qbounds_core::checks;
use qbounds_core::conic::{Backend, SolverOptions};
use qbounds_core::hcrb::{self, HcrbOptions};
use qbounds_core::json;
use qbounds_core::measurement::{self, NelderMeadOptions, SearchOptions};
use qbounds_core::report::{self, compute_report, CSV_HEADER};
use qbounds_core::Error;

use source::{resolve_povm, Builtin, ModelArgs, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "qbounds", version, about = "Holevo Cramér-Rao bound and companion estimation bounds")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Solver tolerance on residuals and duality gap.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the primary output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute C_H, C_S, C_R, ||D||_F and optionally a classical bound for one model.
    Bounds {
        #[command(flatten)]
        model: ModelArgs,
        /// POVM file (list of complex matrices) or `phase-sld`.
        #[arg(long)]
        povm: Option<String>,
        /// Also write the model in the JSON model schema.
        #[arg(long)]
        export_model: Option<PathBuf>,
    },
    /// Evaluate the bound panel on a one-parameter grid and emit CSV.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// `<param>:<start>:<stop>:<points>`, param one of eta, phase, c1sq, gamma, phi1..phi3.
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        povm: Option<String>,
    },
    /// Search projective measurements for the smallest classical bound.
    OptimizeProjective {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Simplex-diameter tolerance of each Nelder-Mead run.
        #[arg(long, default_value_t = measurement::DEFAULT_SIMPLEX_TOL)]
        simplex_tol: f64,
        #[arg(long, default_value_t = measurement::DEFAULT_MAX_ITER)]
        max_iter: usize,
        /// Per-restart trace as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the acceptance checks.
    Selftest {
        /// Include the slow checks.
        #[arg(long)]
        full: bool,
    },
}

/// Failure carried to the process exit code.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            kind: report::error_status(&e),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::Io(e).into()
    }
}

/// Errors raised while reading or building a model are always input errors.
fn input(e: Error) -> Failure {
    Failure {
        code: 1,
        ..e.into()
    }
}

/// 2 for failures of the numerics, 1 for bad input.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::SolverFailure(_)
        | Error::GapTooLarge { .. }
        | Error::InvariantViolation(_)
        | Error::EigSolverFailure
        | Error::AllRestartsFailed
        | Error::IllConditionedOutcome { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let msg = json::to_string(&json!({ "error": f.message, "kind": f.kind })).expect("error serialization");
            eprintln!("{msg}");
            ExitCode::from(f.code)
        }
    }
}

fn hcrb_options(g: &Global) -> Result<HcrbOptions, Failure> {
    if !(g.tol > 0.0 && g.tol.is_finite()) {
        return Err(Error::InvalidArgument("--tol must be positive".into()).into());
    }
    Backend::from_env()?;
    Ok(HcrbOptions {
        solver: SolverOptions::with_tol(g.tol),
        ..HcrbOptions::default()
    })
}

fn thread_pool(g: &Global) -> Result<rayon::ThreadPool, Failure> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = g.jobs {
        if j == 0 {
            return Err(Error::InvalidArgument("--jobs must be at least 1".into()).into());
        }
        b = b.num_threads(j);
    }
    b.build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")).into())
}

fn emit(g: &Global, text: &str) -> Result<(), Failure> {
    match &g.out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let g = &cli.global;
    match &cli.command {
        Command::Bounds {
            model,
            povm,
            export_model,
        } => {
            let options = hcrb_options(g)?;
            let src = model.build(None).map_err(input)?;
            if let Some(path) = export_model {
                src.model.save(path)?;
            }
            let povm = povm.as_deref().map(|p| resolve_povm(p, &src)).transpose().map_err(input)?;
            let r = compute_report(&src.model, src.descriptor.clone(), povm.as_ref(), &options)?;
            emit(g, &(json::to_string(&r).expect("report serialization") + "\n"))?;
            Ok(0)
        }
        Command::Sweep { model, sweep, povm } => {
            let options = hcrb_options(g)?;
            let spec = SweepSpec::parse(sweep)?;
            if model.model.is_some() {
                return Err(Error::InvalidArgument("sweeps need a --builtin model".into()).into());
            }
            if model.builtin.is_none() {
                return Err(Error::InvalidArgument("give --builtin <name> to sweep".into()).into());
            }
            // Reject unknown parameter names before any work.
            model.with_param(&spec.param, spec.values[0])?;
            let pool = thread_pool(g)?;
            let rows: Vec<_> = pool.install(|| {
                spec.values
                    .par_iter()
                    .map(|&v| {
                        let point = model.with_param(&spec.param, v)?;
                        let src = point.build(None)?;
                        let povm = povm.as_deref().map(|p| resolve_povm(p, &src)).transpose()?;
                        compute_report(&src.model, src.descriptor, povm.as_ref(), &options)
                    })
                    .collect()
            });
            let failed = rows.iter().filter(|r| r.is_err()).count();
            let text = if g.json {
                let items: Vec<_> = spec
                    .values
                    .iter()
                    .zip(&rows)
                    .map(|(v, r)| match r {
                        Ok(rep) => json!({ "param_name": spec.param, "param_value": v, "report": rep }),
                        Err(e) => json!({ "param_name": spec.param, "param_value": v, "error": e.to_string(), "status": report::error_status(e) }),
                    })
                    .collect();
                json::to_string(&items).expect("sweep serialization") + "\n"
            } else {
                let mut text = String::from(CSV_HEADER);
                text.push('\n');
                for (v, r) in spec.values.iter().zip(&rows) {
                    match r {
                        Ok(rep) => text.push_str(&rep.csv_row(&spec.param, *v)),
                        Err(e) => text.push_str(&report::failed_csv_row(&spec.param, *v, e)),
                    }
                    text.push('\n');
                }
                text
            };
            emit(g, &text)?;
            if failed > 0 {
                let first = rows.into_iter().find_map(|r| r.err()).expect("counted failure");
                eprintln!(
                    "{}",
                    json::to_string(&json!({
                        "error": format!("{failed} of {} grid points failed; first: {first}", spec.values.len()),
                        "kind": report::error_status(&first),
                    }))
                    .expect("error serialization")
                );
                return Ok(exit_code(&first));
            }
            Ok(0)
        }
        Command::OptimizeProjective {
            model,
            restarts,
            simplex_tol,
            max_iter,
            trace,
        } => {
            let options = hcrb_options(g)?;
            if *restarts == 0 {
                return Err(Error::InvalidArgument("--restarts must be at least 1".into()).into());
            }
            let src = model.build(Some(Builtin::Magnetometry)).map_err(input)?;
            let search = SearchOptions {
                restarts: *restarts,
                seed: g.seed,
                nelder_mead: NelderMeadOptions {
                    simplex_tol: *simplex_tol,
                    max_iter: *max_iter,
                    ..NelderMeadOptions::default()
                },
            };
            let pool = thread_pool(g)?;
            let result = pool.install(|| measurement::optimize_projective(&src.model, &search))?;
            let c_h = hcrb::solve_hcrb(&src.model, &options)?.value;
            if let Some(path) = trace {
                result.write_trace_csv(File::create(path)?)?;
            }
            let out = json!({
                "model": src.descriptor,
                "C_H": c_h,
                "best_value": result.best_value,
                "reldiff": 1.0 - c_h / result.best_value,
                "best_x": result.best_x.x,
                "best_restart": result.best_restart,
                "restarts_used": result.restarts_used,
                "seed": result.seed,
                "trace": result.trace,
            });
            emit(g, &(json::to_string(&out).expect("search serialization") + "\n"))?;
            Ok(0)
        }
        Command::Selftest { full } => {
            let outcomes = checks::run(*full);
            let all_pass = outcomes.iter().all(|o| o.pass);
            let text = if g.json {
                json::to_string(&json!({ "pass": all_pass, "checks": outcomes })).expect("selftest serialization") + "\n"
            } else {
                let mut t: String = outcomes.iter().map(|o| o.line() + "\n").collect();
                let failed = outcomes.iter().filter(|o| !o.pass).count();
                t.push_str(&format!("{} checks, {failed} failed\n", outcomes.len()));
                t
            };
            emit(g, &text)?;
            Ok(if all_pass { 0 } else { 1 })
        }
    }
}
