use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lambdav::assign::check_assign_with;
use lambdav::assign::CheckOptions;
use lambdav::formula::{parse_form, FormEnv};
use lambdav::pretty::rendered_change_points;
use lambdav::props::{run_suite, SuiteConfig, SUITES};
use lambdav::reduce::{explore, format_trace, parse_trace, replay, ExploreOptions};
use lambdav::{corpus, surface, Error, Expr, SymbolTable};

// stdout may be a closed pipe, e.g. when piped into `head`
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_TOP: u8 = 2;
const EXIT_NOT_FOUND: u8 = 3;
const EXIT_PROPERTY: u8 = 4;

#[derive(Parser)]
#[command(name = "lambdav", version, about = "Run, explore and check streaming lambda programs")]
struct Cli {
    /// Symbol join table, one `a b -> c` per line.
    #[arg(long, global = true)]
    sym_table: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "pretty")]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum Format {
    Pretty,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the observations at which the result changes.
    Observe {
        /// Source file, or the name of a bundled program.
        source: String,
        #[arg(long, default_value_t = 64)]
        max_fuel: u32,
    },
    /// Enumerate results reachable by explicit reduction.
    Explore {
        source: String,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        #[arg(long, default_value_t = 20_000)]
        frontier_cap: usize,
        #[arg(long, default_value_t = 16)]
        max_fuel: u32,
        #[arg(long)]
        allow_truncate: bool,
        /// Replay a saved trace instead of exploring.
        #[arg(long)]
        replay: Option<PathBuf>,
        /// Write each result's trace to DIR/result-N.trace.
        #[arg(long, value_name = "DIR")]
        save_traces: Option<PathBuf>,
    },
    /// Search for a derivation assigning a formula to the program.
    Check {
        source: String,
        #[arg(long)]
        formula: String,
        /// Height bound on formulae used in the search.
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Run the property suites.
    Test {
        #[arg(long)]
        suite: Option<String>,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Random terms for the expansion suite.
        #[arg(long, default_value_t = 1000)]
        terms: usize,
    },
}

fn color() -> bool {
    std::env::var("LAMBDAV_COLOR").is_ok_and(|v| v == "1")
}

fn paint(s: &str, code: &str) -> String {
    if color() {
        format!("\x1b[{code}m{s}\x1b[0m")
    } else {
        s.to_string()
    }
}

fn load_source(source: &str) -> Result<String, Error> {
    match std::fs::read_to_string(source) {
        Ok(s) => Ok(s),
        Err(io) => corpus::source(source)
            .map(str::to_string)
            .ok_or_else(|| Error::Usage(format!("cannot read {source}: {io}"))),
    }
}

fn load_table(path: &Option<PathBuf>) -> Result<SymbolTable, Error> {
    match path {
        None => Ok(SymbolTable::discrete()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?;
            let t = SymbolTable::parse(&text)?;
            t.check_laws()?;
            Ok(t)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Error> {
    let table = load_table(&cli.sym_table)?;
    let program = |src: &str| -> Result<Expr, Error> { surface::compile(&load_source(src)?) };
    match &cli.cmd {
        Cmd::Observe { source, max_fuel } => {
            let e = program(source)?;
            let points = rendered_change_points(&e, *max_fuel, &table);
            for (o, shown) in &points {
                match cli.format {
                    Format::Json => emit!("{}", json!({"fuel": o.fuel, "result": shown})),
                    Format::Pretty if matches!(o.result, Expr::Top) => {
                        emit!("fuel {}: {}", o.fuel, paint(shown, "31"))
                    }
                    Format::Pretty => emit!("fuel {}: {shown}", o.fuel),
                }
            }
            let last_top = points.last().is_some_and(|(o, _)| matches!(o.result, Expr::Top));
            Ok(if last_top { EXIT_TOP } else { EXIT_OK })
        }
        Cmd::Explore {
            source,
            budget,
            frontier_cap,
            max_fuel,
            allow_truncate,
            replay: trace_file,
            save_traces,
        } => {
            let e = program(source)?;
            if let Some(path) = trace_file {
                let text = std::fs::read_to_string(path)
                    .map_err(|err| Error::Usage(format!("cannot read {}: {err}", path.display())))?;
                let trace = parse_trace(&text)?;
                let r = replay(&e, &trace, &table)?;
                match cli.format {
                    Format::Json => emit!("{}", json!({"steps": trace.len(), "result": r.to_string()})),
                    Format::Pretty => emit!("{r}"),
                }
                return Ok(EXIT_OK);
            }
            let opts = ExploreOptions {
                budget: *budget,
                frontier_cap: *frontier_cap,
                max_drive_fuel: *max_fuel,
            };
            let out = explore(&e, &opts, &table);
            if out.truncated {
                eprintln!("warning: frontier cap {frontier_cap} reached after {} states", out.states);
                if !allow_truncate {
                    return Ok(EXIT_USAGE);
                }
            }
            for (i, r) in out.results.iter().enumerate() {
                let trace = format_trace(&r.trace);
                if let Some(dir) = save_traces {
                    let path = dir.join(format!("result-{i}.trace"));
                    std::fs::write(&path, &trace)
                        .map_err(|err| Error::Usage(format!("cannot write {}: {err}", path.display())))?;
                }
                match cli.format {
                    Format::Json => emit!(
                        "{}",
                        json!({"result": r.result.to_string(), "steps": r.trace.len(), "trace": trace})
                    ),
                    Format::Pretty => {
                        emit!("result: {}", r.result);
                        emit!("  steps: {}", r.trace.len());
                        emit!("  trace: {}", trace.trim_end().replace('\n', " "));
                    }
                }
            }
            if cli.format == Format::Pretty {
                emit!(
                    "{} results, {} states{}",
                    out.results.len(),
                    out.states,
                    if out.truncated { " (truncated)" } else { "" }
                );
            }
            Ok(EXIT_OK)
        }
        Cmd::Check {
            source,
            formula,
            depth,
        } => {
            let e = program(source)?;
            let phi = parse_form(formula)?;
            let opts = CheckOptions::with_height(*depth);
            match check_assign_with(&FormEnv::new(), &e, &phi, &opts, &table) {
                Some(d) => {
                    match cli.format {
                        Format::Json => emit!(
                            "{}",
                            json!({"found": true, "formula": phi.to_string(), "rule": d.rule.to_string(), "nodes": d.node_count()})
                        ),
                        Format::Pretty => emit!("{}", d.to_string().trim_end()),
                    }
                    Ok(EXIT_OK)
                }
                None => {
                    match cli.format {
                        Format::Json => emit!("{}", json!({"found": false, "formula": phi.to_string(), "depth": depth})),
                        Format::Pretty => emit!("no derivation of {phi} found within depth {depth}"),
                    }
                    Ok(EXIT_NOT_FOUND)
                }
            }
        }
        Cmd::Test {
            suite,
            seed,
            depth,
            terms,
        } => {
            let names: Vec<&str> = match suite {
                Some(s) if SUITES.contains(&s.as_str()) => vec![s.as_str()],
                Some(s) => return Err(Error::Usage(format!("unknown suite {s}; known: {}", SUITES.join(", ")))),
                None => SUITES.to_vec(),
            };
            let cfg = SuiteConfig {
                seed: *seed,
                depth: *depth,
                terms: *terms,
                ..Default::default()
            };
            let mut failed = 0;
            for name in names {
                let rep = run_suite(name, &cfg).expect("known suite");
                let status = if rep.passed() { paint("PASS", "32") } else { paint("FAIL", "31") };
                match cli.format {
                    Format::Json => emit!(
                        "{}",
                        json!({"suite": rep.name, "passed": rep.passed(), "cases": rep.cases,
                               "failures": rep.failures, "seed": rep.seed, "ms": rep.elapsed.as_millis() as u64})
                    ),
                    Format::Pretty => {
                        emit!(
                            "{status} {}: {} cases, {} failures, seed {}, {:.2?}",
                            rep.name,
                            rep.cases,
                            rep.failures.len(),
                            rep.seed,
                            rep.elapsed
                        );
                        for f in &rep.failures {
                            emit!("  {f}");
                        }
                    }
                }
                if !rep.passed() {
                    failed += 1;
                }
            }
            Ok(if failed == 0 { EXIT_OK } else { EXIT_PROPERTY })
        }
    }
}
