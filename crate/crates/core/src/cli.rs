//! Command line driver: `check`, `synth` and `unify` on problem files.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::kernel::{Locals, DEFAULT_FUEL};
use crate::problem::{parse_problem, Problem, Task};
use crate::pts::{check_context, Checker, Mode as CheckMode};
use crate::search::{
    ground_unify, synthesize, universal_signature, Budget, Heuristics, Mode, Options, SearchError,
    TraceLine,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NO_PROOF: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "cube-synth",
    version,
    about = "Proof synthesis in the lambda cube"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Type-check the declarations and the task of a problem file
    Check { file: PathBuf },
    /// Search for a proof of the goal
    Synth {
        file: PathBuf,
        #[command(flatten)]
        flags: SearchFlags,
    },
    /// Search for ground unifiers of the equation
    Unify {
        file: PathBuf,
        #[command(flatten)]
        flags: SearchFlags,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Strong,
    Weak,
}

#[derive(Args, Debug)]
struct SearchFlags {
    #[arg(long, value_enum, default_value = "strong")]
    mode: ModeArg,
    #[arg(long, default_value_t = 100_000)]
    max_nodes: usize,
    #[arg(long, default_value_t = 50)]
    max_depth: usize,
    #[arg(long, default_value_t = 2)]
    max_splitting: usize,
    /// Print every solution found within the budget
    #[arg(long)]
    all: bool,
    /// Print search steps and derivations on stderr
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    no_simplify: bool,
    #[arg(long)]
    no_heuristics: bool,
}

impl SearchFlags {
    fn options(&self) -> Options {
        Options {
            mode: match self.mode {
                ModeArg::Strong => Mode::Strong,
                ModeArg::Weak => Mode::Weak,
            },
            budget: Budget {
                max_nodes: self.max_nodes,
                max_depth: self.max_depth,
                max_splitting: self.max_splitting,
                fuel: DEFAULT_FUEL,
            },
            heuristics: if self.no_heuristics {
                Heuristics::none()
            } else {
                Heuristics::all()
            },
            simplify: !self.no_simplify,
            verify_steps: false,
        }
    }
}

fn load(file: &PathBuf, err: &mut dyn Write) -> Result<Problem, i32> {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", file.display());
            return Err(EXIT_INPUT);
        }
    };
    parse_problem(&text).map_err(|e| {
        let _ = writeln!(err, "error: {}:{e}", file.display());
        EXIT_INPUT
    })
}

fn check(p: &Problem) -> Result<(), String> {
    let spec = p.spec();
    let ctx = p.full_context();
    let as_universals = crate::context::QContext::from_entries(
        ctx.entries()
            .iter()
            .map(|e| match e.declaration() {
                Some((n, t)) => crate::context::Entry::universal(n.clone(), t.clone()),
                None => e.clone(),
            })
            .collect(),
    );
    check_context(
        &spec,
        &as_universals,
        CheckMode::WithoutConstraints,
        DEFAULT_FUEL,
    )
    .map_err(|e| e.to_string())?;
    let sig = universal_signature(&as_universals, DEFAULT_FUEL);
    let ch = Checker::new(&spec, &sig, DEFAULT_FUEL);
    match &p.task {
        Task::Goal(g) => {
            ch.infer_sort(&mut Locals::new(), g)
                .map_err(|e| format!("goal {g}: {e}"))?;
        }
        Task::Unify { lhs, rhs, .. } => {
            let a = ch
                .infer(&mut Locals::new(), lhs)
                .map_err(|e| format!("{lhs}: {e}"))?;
            let b = ch
                .infer(&mut Locals::new(), rhs)
                .map_err(|e| format!("{rhs}: {e}"))?;
            if a != b {
                return Err(format!("sides have different types {a} and {b}"));
            }
        }
    }
    Ok(())
}

fn report(e: SearchError, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    match e {
        SearchError::InternalSoundnessFailure { .. } => EXIT_INTERNAL,
        SearchError::IllFormed(_) => EXIT_INPUT,
    }
}

/// Runs the command line and returns the exit code.
pub fn run<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match cli.command {
        Command::Check { file } => {
            let p = match load(&file, err) {
                Ok(p) => p,
                Err(c) => return c,
            };
            match check(&p) {
                Ok(()) => {
                    let _ = writeln!(out, "ok");
                    EXIT_OK
                }
                Err(m) => {
                    let _ = writeln!(err, "error: {m}");
                    EXIT_INPUT
                }
            }
        }
        Command::Synth { file, flags } => {
            let p = match load(&file, err) {
                Ok(p) => p,
                Err(c) => return c,
            };
            let Task::Goal(goal) = &p.task else {
                let _ = writeln!(err, "error: {}: not a goal problem", file.display());
                return EXIT_INPUT;
            };
            let spec = p.spec();
            let search = match synthesize(&spec, &p.context(), goal, flags.options()) {
                Ok(s) => s,
                Err(e) => return report(e, err),
            };
            let mut msgs = Vec::new();
            let (code, exhausted, nodes) = {
                let mut search = if flags.trace {
                    let sink: &mut dyn Write = &mut *err;
                    search.with_trace(Box::new(move |l: &TraceLine| {
                        let _ = writeln!(sink, "{l}");
                    }))
                } else {
                    search
                };
                let mut code = Ok(false);
                for item in search.by_ref() {
                    match item {
                        Ok(f) => {
                            let _ = writeln!(out, "{}", f.proof());
                            if flags.trace {
                                msgs.push(format!("derivation {}", f.derivation.to_json()));
                            }
                            code = Ok(true);
                            if !flags.all {
                                break;
                            }
                        }
                        Err(e) => {
                            code = Err(e);
                            break;
                        }
                    }
                }
                (code, search.budget_exhausted(), search.nodes())
            };
            finish(code, exhausted, nodes, &msgs, "proof", err)
        }
        Command::Unify { file, flags } => {
            let p = match load(&file, err) {
                Ok(p) => p,
                Err(c) => return c,
            };
            let Task::Unify { lhs, rhs, .. } = &p.task else {
                let _ = writeln!(err, "error: {}: not a unification problem", file.display());
                return EXIT_INPUT;
            };
            let spec = p.spec();
            let unifier = match ground_unify(&spec, &p.full_context(), lhs, rhs, flags.options()) {
                Ok(u) => u,
                Err(e) => return report(e, err),
            };
            let mut msgs = Vec::new();
            let (code, exhausted, nodes) = {
                let mut unifier = if flags.trace {
                    let sink: &mut dyn Write = &mut *err;
                    unifier.with_trace(Box::new(move |l: &TraceLine| {
                        let _ = writeln!(sink, "{l}");
                    }))
                } else {
                    unifier
                };
                let mut code = Ok(false);
                while let Some(item) = unifier.search_mut().next() {
                    match item {
                        Ok(f) => {
                            let _ = writeln!(out, "{}", f.substitution());
                            if flags.trace {
                                msgs.push(format!("derivation {}", f.derivation.to_json()));
                            }
                            code = Ok(true);
                            if !flags.all {
                                break;
                            }
                        }
                        Err(e) => {
                            code = Err(e);
                            break;
                        }
                    }
                }
                (code, unifier.budget_exhausted(), unifier.search().nodes())
            };
            finish(code, exhausted, nodes, &msgs, "unifier", err)
        }
    }
}

fn finish(
    code: Result<bool, SearchError>,
    exhausted: bool,
    nodes: usize,
    msgs: &[String],
    what: &str,
    err: &mut dyn Write,
) -> i32 {
    for m in msgs {
        let _ = writeln!(err, "{m}");
    }
    match code {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            let why = if exhausted {
                "within budget"
            } else {
                "(search space exhausted)"
            };
            let _ = writeln!(err, "no {what} found {why} after {nodes} nodes");
            EXIT_NO_PROOF
        }
        Err(e) => report(e, err),
    }
}
