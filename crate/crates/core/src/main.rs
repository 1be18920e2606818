//! Command-line front end for the firstify pipeline.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use firstify::analysis::{check_extended_fragment, is_first_order};
use firstify::ast::{Goal, Program};
use firstify::corpus::{run_bench, BenchMetrics, BenchMode, BenchSpec, Family};
use firstify::emitter::{defunctionalize_reynolds, emit_prolog, program_to_hl, EmitOptions};
use firstify::interp::{check_equivalence, solve_topdown, AnswerSet, EngineLimits};
use firstify::parser::{load_goal, load_program};
use firstify::specializer::{firstify_with, FirstifyOptions};
use firstify::{Error, Result};

#[derive(Parser)]
#[command(name = "firstify", version, about = "Compiles higher-order logic programs to first-order Prolog by predicate specialization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct LimitArgs {
    /// Maximum derivation depth for the top-down engine
    #[arg(long, default_value_t = 512)]
    max_depth: usize,
    /// Step budget for the interpreters
    #[arg(long, default_value_t = 1_000_000)]
    max_steps: u64,
}

impl LimitArgs {
    fn limits(&self) -> EngineLimits {
        EngineLimits { max_depth: self.max_depth, max_steps: self.max_steps }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    Specialized,
    Reynolds,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, type-check, and fragment-check a program
    Check {
        input: PathBuf,
        /// Also check that this goal is well-typed and closed
        #[arg(long)]
        query: Option<String>,
    },
    /// Specialize a program for a query and emit first-order Prolog
    Firstify {
        input: PathBuf,
        #[arg(long)]
        query: String,
        /// Write the program here instead of standard output
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Include a main/0 driver that prints all answers
        #[arg(long)]
        driver: bool,
        /// Tolerate residual predicate-typed parameters in the output
        #[arg(long)]
        residual: bool,
        /// Report iteration counts and timing on standard error
        #[arg(long)]
        stats: bool,
    },
    /// Defunctionalize a program with the Reynolds-style encoding
    Defun {
        input: PathBuf,
        #[arg(long)]
        query: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        driver: bool,
        #[arg(long)]
        stats: bool,
    },
    /// Run a query against a program and print the answers
    Solve {
        input: PathBuf,
        #[arg(long)]
        query: String,
        /// Unify with the occurs check enabled
        #[arg(long)]
        occurs_check: bool,
        #[command(flatten)]
        limits: LimitArgs,
        #[arg(long)]
        stats: bool,
    },
    /// Check that a transformation preserves the answers of a query
    Equiv {
        input: PathBuf,
        #[arg(long)]
        query: String,
        /// Transformation to compare against the original program
        #[arg(long, value_enum, default_value = "specialized")]
        baseline: Baseline,
        #[command(flatten)]
        limits: LimitArgs,
    },
    /// Run benchmark instances and print CSV rows
    Bench {
        /// Benchmark family; runs every family when omitted
        #[arg(long)]
        family: Option<Family>,
        /// Instance size (facts per relation, chain length, ...)
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// original, specialized, or reynolds; all three when omitted
        #[arg(long)]
        mode: Option<BenchMode>,
        /// Recorded in the instance spec for randomized variants
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Maximum derivation depth for the top-down engine
        #[arg(long, default_value_t = 512)]
        max_depth: usize,
        /// Step budget; roomier than the solve default because the nested
        /// preference families rederive subqueries cubically
        #[arg(long, default_value_t = 20_000_000)]
        max_steps: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn read_input(path: &Path) -> Result<(String, Program)> {
    let src = fs::read_to_string(path)?;
    let program = load_program(&src)?;
    Ok((src, program))
}

fn write_or_print(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn show_answers(goal: &Goal, answers: &AnswerSet) -> String {
    let mut out = String::new();
    if goal.vars().is_empty() {
        out.push_str(if answers.bindings.is_empty() { "no\n" } else { "yes\n" });
        return out;
    }
    if answers.bindings.is_empty() {
        out.push_str("no\n");
        return out;
    }
    for binding in &answers.bindings {
        let row: Vec<String> = binding.iter().map(|(v, t)| format!("{v} = {t}")).collect();
        let _ = writeln!(out, "{}", row.join(", "));
    }
    out
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Check { input, query } => {
            let (_, mut program) = read_input(&input)?;
            let report = check_extended_fragment(&program);
            if !report.is_admitted() {
                eprintln!("{}", report.render(&input.display().to_string()));
                return Ok(ExitCode::from(1));
            }
            if let Some(q) = query {
                let goal = load_goal(&q, &mut program)?;
                let open: Vec<String> = goal
                    .vars()
                    .iter()
                    .filter(|v| v.ty().is_predicate())
                    .filter_map(|v| v.var_name().map(String::from))
                    .collect();
                if !open.is_empty() {
                    return Err(Error::OpenGoal { vars: open });
                }
            }
            println!(
                "ok: {} clauses, {} predicates",
                program.clauses.len(),
                program.pred_sigs.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Firstify { input, query, output, driver, residual, stats } => {
            let (src, mut program) = read_input(&input)?;
            let goal = load_goal(&query, &mut program)?;
            let start = Instant::now();
            let opts = FirstifyOptions { allow_residual: residual };
            let out = firstify_with(&program, &goal, opts)?;
            let elapsed = start.elapsed();
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for (atom, entry) in out.table.entries() {
                let params: Vec<String> = entry.params.iter().map(|p| p.to_string()).collect();
                println!("{atom} -> {}({})", entry.name, params.join(","));
            }
            println!("{goal} -> {}", out.goal);
            let text = if is_first_order(&out.program) {
                let opts = EmitOptions { source: Some(&src), driver };
                let goal_for_driver = driver.then_some(&out.goal);
                emit_prolog(&out.program, goal_for_driver, &opts)?.to_string()
            } else {
                program_to_hl(&out.program)
            };
            if output.is_none() {
                println!();
            }
            write_or_print(output.as_deref(), &text)?;
            if stats {
                eprintln!(
                    "iterations={} specializations={} transform_ms={:.3}",
                    out.iterations,
                    out.table.entries().count(),
                    elapsed.as_secs_f64() * 1e3
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Defun { input, query, output, driver, stats } => {
            let (src, mut program) = read_input(&input)?;
            let goal = load_goal(&query, &mut program)?;
            let start = Instant::now();
            let (fo, fo_goal) = defunctionalize_reynolds(&program, &goal)?;
            let elapsed = start.elapsed();
            println!("{goal} -> {fo_goal}");
            let opts = EmitOptions { source: Some(&src), driver };
            let goal_for_driver = driver.then_some(&fo_goal);
            let text = emit_prolog(&fo, goal_for_driver, &opts)?.to_string();
            if output.is_none() {
                println!();
            }
            write_or_print(output.as_deref(), &text)?;
            if stats {
                eprintln!("transform_ms={:.3}", elapsed.as_secs_f64() * 1e3);
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve { input, query, occurs_check, limits, stats } => {
            let (_, mut program) = read_input(&input)?;
            let goal = load_goal(&query, &mut program)?;
            let start = Instant::now();
            let answers = solve_topdown(&program, &goal, limits.limits(), occurs_check)?;
            print!("{}", show_answers(&goal, &answers));
            if stats {
                eprintln!(
                    "answers={} steps={} solve_ms={:.3}",
                    answers.bindings.len(),
                    answers.steps,
                    start.elapsed().as_secs_f64() * 1e3
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Equiv { input, query, baseline, limits } => {
            let (_, mut program) = read_input(&input)?;
            let goal = load_goal(&query, &mut program)?;
            let (fo, fo_goal) = match baseline {
                Baseline::Specialized => {
                    let out = firstify_with(&program, &goal, FirstifyOptions::default())?;
                    (out.program, out.goal)
                }
                Baseline::Reynolds => defunctionalize_reynolds(&program, &goal)?,
            };
            let report = check_equivalence(&program, &goal, &fo, &fo_goal, limits.limits())?;
            println!("{report}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Bench { family, n, mode, seed, max_depth, max_steps } => {
            let limits = EngineLimits { max_depth, max_steps };
            let families: Vec<Family> = match family {
                Some(f) => vec![f],
                None => Family::ALL.to_vec(),
            };
            let modes: Vec<BenchMode> = match mode {
                Some(m) => vec![m],
                None => vec![BenchMode::Original, BenchMode::Specialized, BenchMode::Reynolds],
            };
            println!("{}", BenchMetrics::CSV_HEADER);
            for f in families {
                let spec = BenchSpec { family: f, n, seed };
                for m in &modes {
                    let row = run_bench(&spec, *m, limits)?;
                    println!("{row}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
