use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ggv_core::blame::BlameLabel;
use ggv_core::config::Proc;
use ggv_core::load::{load_typed, load_untyped, Error, Loaded};
use ggv_core::parser::parse_type;
use ggv_core::relations;
use ggv_core::runtime::{run_with, Outcome, RunOptions, Scheduler, Stuck};
use ggv_core::types::Type;

#[derive(Parser)]
#[command(name = "ggv", version, about = "Gradual session types: check, elaborate and run programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Typecheck a program and print its type.
    Check { file: PathBuf },
    /// Print the cast-calculus term a program elaborates to.
    Elaborate {
        #[arg(long)]
        untyped: bool,
        /// Append a table of cast labels and their source spans.
        #[arg(long)]
        labels: bool,
        #[arg(long)]
        json: bool,
        file: PathBuf,
    },
    /// Elaborate and run a program.
    Run {
        #[arg(long)]
        untyped: bool,
        /// Use the seeded random scheduler instead of round-robin.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        typecheck_each_step: bool,
        #[arg(long)]
        run_to_quiescence: bool,
        file: PathBuf,
    },
    /// Decide a relation between two types.
    Rel { rel: Rel, left: String, right: String },
}

#[derive(Clone, Copy, ValueEnum)]
enum Rel {
    Sub,
    Csub,
    Pos,
    Neg,
    Prec,
    Join,
    Meet,
}

fn load(file: &PathBuf, untyped: bool) -> Result<Loaded, Error> {
    if untyped {
        load_untyped(file)
    } else {
        load_typed(file)
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("{}", e);
    ExitCode::from(e.exit_code() as u8)
}

fn cast_source(prog: &Loaded, p: BlameLabel) -> String {
    match prog.label(p.id) {
        Some(info) => prog.render_span(&info.file, info.span),
        None => "?".to_string(),
    }
}

fn blame_report(prog: &Loaded, b: &Proc, step: usize) -> String {
    let set = |lin: &std::collections::BTreeSet<u32>| {
        lin.iter().map(|c| format!("c{}", c)).collect::<Vec<_>>().join(",")
    };
    match b {
        Proc::Blame { p, q, lin } => format!(
            "blame {} {} {{{}}} at step {}, casts from {} and {}",
            p,
            q,
            set(lin),
            step,
            cast_source(prog, *p),
            cast_source(prog, *q)
        ),
        Proc::BlameGc { p, lin } => {
            format!("blame {} {{{}}} at step {}, cast from {}", p, set(lin), step, cast_source(prog, *p))
        }
        _ => unreachable!("not a blame process"),
    }
}

fn rel(r: Rel, left: &str, right: &str) -> ExitCode {
    let (t, u) = match (parse_type(left), parse_type(right)) {
        (Ok(t), Ok(u)) => (t, u),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("parse error: {}", e);
            return ExitCode::from(1);
        }
    };
    let decide = |f: fn(&Type, &Type) -> bool| f(&t, &u).to_string();
    let combine = |f: fn(&Type, &Type) -> Option<Type>| match f(&t, &u) {
        Some(v) => v.to_string(),
        None => "undefined".to_string(),
    };
    let out = match r {
        Rel::Sub => decide(relations::sub),
        Rel::Csub => decide(relations::consistent_sub),
        Rel::Pos => decide(relations::pos_sub),
        Rel::Neg => decide(relations::neg_sub),
        Rel::Prec => decide(relations::precision),
        Rel::Join => combine(relations::join),
        Rel::Meet => combine(relations::meet),
    };
    println!("{}", out);
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Check { file } => match load_typed(&file) {
            Ok(prog) => {
                println!(": {}", prog.ty);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::Elaborate { untyped, labels, json, file } => {
            let prog = match load(&file, untyped) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            if json {
                let out = serde_json::json!({ "type": prog.ty, "term": prog.term, "labels": prog.labels });
                println!("{}", serde_json::to_string_pretty(&out).expect("terms serialize"));
                return ExitCode::SUCCESS;
            }
            println!("{}", prog.term);
            if labels {
                for info in &prog.labels {
                    println!("{}  {}  {} => {}", info.label, prog.render_span(&info.file, info.span), info.from, info.to);
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Run { untyped, seed, max_steps, trace, typecheck_each_step, run_to_quiescence, file } => {
            let prog = match load(&file, untyped) {
                Ok(p) => p,
                Err(e) => return fail(e),
            };
            let sched = seed.map_or_else(Scheduler::round_robin, Scheduler::seeded);
            let opts = RunOptions { max_steps, run_to_quiescence, typecheck_each_step };
            let result = run_with(prog.term.clone(), sched, &opts, |info, cfg| {
                if trace {
                    println!("#{}  {}  {}", info.index, info.rule, cfg);
                }
            });
            match result.outcome {
                Outcome::Quiescent { result: value } => {
                    match value {
                        Some(v) => println!("{}", v),
                        None => println!("{}", result.config),
                    }
                    ExitCode::SUCCESS
                }
                Outcome::Blamed { blames, step } => {
                    for b in &blames {
                        println!("{}", blame_report(&prog, b, step));
                    }
                    ExitCode::from(10)
                }
                Outcome::Stuck(reason) => {
                    match reason {
                        Stuck::Deadlock => println!("stuck: deadlock"),
                        Stuck::OpenName(x) => println!("stuck: open name {}", x),
                        Stuck::Error(e) => println!("stuck: {}", e),
                    }
                    println!("{}", result.config);
                    ExitCode::from(11)
                }
                Outcome::StepLimit => {
                    println!("step limit reached after {} steps", result.steps);
                    ExitCode::from(12)
                }
                Outcome::IllTyped { step, error } => {
                    eprintln!("internal error: configuration at step {} is ill-typed: {}", step, error);
                    ExitCode::from(3)
                }
            }
        }
        Cmd::Rel { rel: r, left, right } => rel(r, &left, &right),
    }
}
