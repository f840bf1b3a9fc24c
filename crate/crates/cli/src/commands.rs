//! Subcommand dispatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use sst_core::compose::{compose_dsst_with, compose_nsst_with};
use sst_core::eliminate::{compose_and_eliminate_with, decompose, to_copyless_with};
use sst_core::flow::{copyful_transition, find_diamond};
use sst_core::verify::{equiv_bounded_with, functionality_witness};
use sst_core::{Error, Limits, Requirement, Sst, Symbol};

use crate::format::{
    parse, render_assignment, render_step, serialize_machine, FormatError, SstDocument,
};
use crate::parallel;

/// Exit status for a property that does not hold.
pub const EXIT_FALSE: i32 = 1;
/// Exit status for usage, file and machine errors.
pub const EXIT_USAGE: i32 = 2;
/// Exit status for exhausted budgets.
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "sst",
    version,
    about = "Streaming string transducers: evaluation, composition, copy elimination"
)]
struct Cli {
    /// Worker threads for bounded enumeration.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Machine {
    file: PathBuf,
    name: String,
}

#[derive(Args, Debug)]
struct Pair {
    file: PathBuf,
    first: String,
    second: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prints every output on WORD, one per line.
    Eval {
        #[command(flatten)]
        machine: Machine,
        /// Input word: whitespace-separated symbols, or symbols written together; `-` is the empty word.
        word: String,
    },
    /// Prints every input/output pair with inputs up to the bound.
    Relation {
        #[command(flatten)]
        machine: Machine,
        #[arg(long)]
        max_len: usize,
    },
    /// Composes two copyless machines.
    Compose {
        #[command(flatten)]
        pair: Pair,
        /// Use the nondeterministic construction.
        #[arg(long)]
        nondet: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Checks a property; exits 1 when it fails.
    Check {
        #[command(subcommand)]
        property: Property,
    },
    /// Prints the decomposition of the assignments on STATE reading SYMBOL.
    Decompose {
        #[command(flatten)]
        machine: Machine,
        state: String,
        symbol: String,
    },
    /// Converts a diamond-free machine into a copyless one.
    ToCopyless {
        #[command(flatten)]
        machine: Machine,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Composes two copyless machines and removes the copies.
    Pipeline {
        #[command(flatten)]
        pair: Pair,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compares two machines on every input up to the bound.
    Equiv {
        #[command(flatten)]
        pair: Pair,
        #[arg(long)]
        max_len: usize,
    },
}

#[derive(Subcommand, Debug)]
enum Property {
    Copyless {
        #[command(flatten)]
        machine: Machine,
    },
    DiamondFree {
        #[command(flatten)]
        machine: Machine,
        /// Print the flow graph of a diamond witness as DOT.
        #[arg(long)]
        dot: bool,
    },
    Deterministic {
        #[command(flatten)]
        machine: Machine,
    },
    Functional {
        #[command(flatten)]
        machine: Machine,
        #[arg(long)]
        max_len: usize,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Format { path: String, source: FormatError },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Library(#[from] Error),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Library(e) if e.is_budget() => EXIT_BUDGET,
            _ => EXIT_USAGE,
        }
    }
}

type Outcome = Result<i32, Failure>;

/// Limits from `SST_BUDGET`: either one number for the word budget, or
/// comma-separated `key=value` pairs with keys `words`, `symbols`, `value`,
/// `choices`, `states`, `runs`.
pub fn limits_from_env(value: Option<&str>) -> Result<Limits, String> {
    let mut limits = Limits::default();
    let Some(value) = value.map(str::trim).filter(|v| !v.is_empty()) else {
        return Ok(limits);
    };
    let number = |s: &str| -> Result<u64, String> {
        s.trim()
            .replace('_', "")
            .parse::<u64>()
            .map_err(|_| format!("SST_BUDGET: `{s}` is not a number"))
    };
    if !value.contains('=') {
        limits.max_words = number(value)?;
        return Ok(limits);
    }
    for part in value.split(',') {
        let (key, n) = part
            .split_once('=')
            .ok_or_else(|| format!("SST_BUDGET: expected key=value, found `{part}`"))?;
        let n = number(n)?;
        let size = usize::try_from(n).unwrap_or(usize::MAX);
        match key.trim() {
            "words" => limits.max_words = n,
            "symbols" => limits.max_symbols = n,
            "value" => limits.max_value_len = size,
            "choices" => limits.max_choices = size,
            "states" => limits.max_states = size,
            "runs" => limits.max_runs = n,
            other => return Err(format!("SST_BUDGET: unknown key `{other}`")),
        }
    }
    Ok(limits)
}

/// Runs the command line `args` and returns the exit status.
pub fn run(
    args: impl IntoIterator<Item = OsString>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let limits = match limits_from_env(std::env::var("SST_BUDGET").ok().as_deref()) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let ctx = Context {
        limits,
        jobs: cli.jobs.max(1),
    };
    match ctx.dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.code()
        }
    }
}

struct Context {
    limits: Limits,
    jobs: usize,
}

fn load(path: &Path) -> Result<SstDocument, Failure> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| Failure::Io {
        path: shown.clone(),
        source,
    })?;
    parse(&text).map_err(|source| Failure::Format {
        path: shown,
        source,
    })
}

fn machine<'a>(doc: &'a SstDocument, name: &str, path: &Path) -> Result<&'a Sst, Failure> {
    doc.get(name).ok_or_else(|| {
        let known: Vec<&str> = doc.names().collect();
        Failure::Usage(format!(
            "{}: no machine `{name}` (defined: {})",
            path.display(),
            known.join(", ")
        ))
    })
}

/// Splits `word` into input symbols: on whitespace if present, otherwise by
/// longest match against the alphabet. `-` is the empty word.
pub fn parse_input(word: &str, alphabet: &[Symbol]) -> Result<Vec<Symbol>, String> {
    let word = word.trim();
    if word.is_empty() || word == "-" {
        return Ok(Vec::new());
    }
    if word.contains(char::is_whitespace) {
        return Ok(word.split_whitespace().map(Symbol::new).collect());
    }
    let mut rest = word;
    let mut symbols = Vec::new();
    while !rest.is_empty() {
        let best = alphabet
            .iter()
            .filter(|s| rest.starts_with(s.as_str()))
            .max_by_key(|s| s.as_str().len())
            .ok_or_else(|| format!("cannot split `{rest}` into input symbols"))?;
        rest = &rest[best.as_str().len()..];
        symbols.push(best.clone());
    }
    Ok(symbols)
}

/// Symbols written together when every symbol of the alphabet is one character, otherwise spaced; `-` for the empty word.
pub fn render_symbols(w: &[Symbol], alphabet: &[Symbol]) -> String {
    if w.is_empty() {
        return String::from("-");
    }
    let sep = if alphabet.iter().all(|s| s.as_str().chars().count() == 1) {
        ""
    } else {
        " "
    };
    w.iter().map(Symbol::as_str).collect::<Vec<_>>().join(sep)
}

/// Length first, then position of each symbol in `alphabet`.
fn length_lex_key(w: &[Symbol], alphabet: &[Symbol]) -> (usize, Vec<usize>) {
    let pos = w
        .iter()
        .map(|s| alphabet.iter().position(|a| a == s).unwrap_or(usize::MAX))
        .collect();
    (w.len(), pos)
}

fn write_machine(
    out: &mut dyn Write,
    path: Option<&Path>,
    name: &str,
    t: &Sst,
) -> Result<(), Failure> {
    let text = serialize_machine(name, t);
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| Failure::Io {
            path: p.display().to_string(),
            source,
        }),
        None => out
            .write_all(text.as_bytes())
            .map_err(|source| Failure::Io {
                path: String::from("<stdout>"),
                source,
            }),
    }
}

macro_rules! say {
    ($out:expr, $($arg:tt)*) => {
        writeln!($out, $($arg)*).map_err(|source| Failure::Io { path: String::from("<stdout>"), source })?
    };
}

impl Context {
    fn dispatch(&self, command: Command, out: &mut dyn Write) -> Outcome {
        match command {
            Command::Eval { machine: m, word } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                let input = parse_input(&word, t.input()).map_err(Failure::Usage)?;
                let mut outputs: Vec<Vec<Symbol>> =
                    t.evaluate_with(&input, &self.limits)?.into_iter().collect();
                outputs.sort_by_key(|u| length_lex_key(u, t.output()));
                for u in &outputs {
                    say!(out, "{}", render_symbols(u, t.output()));
                }
                Ok(0)
            }
            Command::Relation {
                machine: m,
                max_len,
            } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                let mut pairs = if self.jobs > 1 {
                    parallel::relation(t, max_len, self.jobs, &self.limits)?
                } else {
                    t.relation_with(max_len, &self.limits)?
                        .pairs
                        .into_iter()
                        .collect()
                };
                pairs.sort_by_key(|(w, u)| {
                    (length_lex_key(w, t.input()), length_lex_key(u, t.output()))
                });
                for (w, u) in &pairs {
                    say!(
                        out,
                        "{}\t{}",
                        render_symbols(w, t.input()),
                        render_symbols(u, t.output())
                    );
                }
                Ok(0)
            }
            Command::Compose {
                pair,
                nondet,
                output,
            } => {
                let doc = load(&pair.file)?;
                let t12 = machine(&doc, &pair.first, &pair.file)?;
                let t23 = machine(&doc, &pair.second, &pair.file)?;
                let comp = if nondet {
                    compose_nsst_with(t12, t23, &self.limits)?
                } else {
                    compose_dsst_with(t12, t23, &self.limits)?
                };
                let name = format!("{}_{}", pair.first, pair.second);
                write_machine(out, output.as_deref(), &name, &comp.machine)?;
                Ok(0)
            }
            Command::Check { property } => self.check(property, out),
            Command::Decompose {
                machine: m,
                state,
                symbol,
            } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                let found: Vec<_> = t
                    .transitions()
                    .iter()
                    .filter(|tr| tr.src.as_str() == state && tr.symbol.as_str() == symbol)
                    .collect();
                if found.is_empty() {
                    return Err(Failure::Usage(format!(
                        "`{}` has no transition from `{state}` on `{symbol}`",
                        m.name
                    )));
                }
                for tr in found {
                    let d = decompose(&tr.assign)?;
                    say!(
                        out,
                        "# trans {} {}",
                        render_step(tr),
                        render_assignment(&tr.assign, t.vars())
                    );
                    for member in d.iter() {
                        say!(out, "{}", render_assignment(member, t.vars()));
                    }
                }
                Ok(0)
            }
            Command::ToCopyless { machine: m, output } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                let e = to_copyless_with(t, &self.limits)?;
                write_machine(
                    out,
                    output.as_deref(),
                    &format!("{}_copyless", m.name),
                    &e.machine,
                )?;
                Ok(0)
            }
            Command::Pipeline { pair, output } => {
                let doc = load(&pair.file)?;
                let t12 = machine(&doc, &pair.first, &pair.file)?;
                let t23 = machine(&doc, &pair.second, &pair.file)?;
                let p = compose_and_eliminate_with(t12, t23, &self.limits)?;
                let name = format!("{}_{}_copyless", pair.first, pair.second);
                write_machine(out, output.as_deref(), &name, &p.eliminated.machine)?;
                Ok(0)
            }
            Command::Equiv { pair, max_len } => {
                let doc = load(&pair.file)?;
                let a = machine(&doc, &pair.first, &pair.file)?;
                let b = machine(&doc, &pair.second, &pair.file)?;
                let witness = if self.jobs > 1 {
                    let sa: std::collections::BTreeSet<_> = a.input().iter().collect();
                    let sb: std::collections::BTreeSet<_> = b.input().iter().collect();
                    if sa != sb {
                        return Err(Failure::Library(Error::Precondition {
                            requirement: Requirement::SameInputAlphabet,
                            subject: "machines",
                            detail: String::from("the input alphabets differ"),
                        }));
                    }
                    parallel::first_difference(a, b, max_len, self.jobs, &self.limits)?
                } else {
                    equiv_bounded_with(a, b, max_len, &self.limits)?.witness
                };
                match witness {
                    None => {
                        say!(out, "equivalent on inputs up to length {max_len}");
                        Ok(0)
                    }
                    Some((w, oa, ob)) => {
                        say!(out, "differ on\t{}", render_symbols(&w, a.input()));
                        for (name, t, outs) in [(&pair.first, a, oa), (&pair.second, b, ob)] {
                            let mut outs: Vec<_> = outs.into_iter().collect();
                            outs.sort_by_key(|u| length_lex_key(u, t.output()));
                            let shown: Vec<String> =
                                outs.iter().map(|u| render_symbols(u, t.output())).collect();
                            say!(out, "{name}\t{{{}}}", shown.join(", "));
                        }
                        Ok(EXIT_FALSE)
                    }
                }
            }
        }
    }

    fn check(&self, property: Property, out: &mut dyn Write) -> Outcome {
        match property {
            Property::Copyless { machine: m } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                match copyful_transition(t) {
                    None => {
                        say!(out, "copyless");
                        Ok(0)
                    }
                    Some(tr) => {
                        say!(
                            out,
                            "copyful transition: trans {} {}",
                            render_step(tr),
                            render_assignment(&tr.assign, t.vars())
                        );
                        Ok(EXIT_FALSE)
                    }
                }
            }
            Property::DiamondFree { machine: m, dot } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                match find_diamond(t) {
                    None => {
                        say!(out, "diamond-free");
                        Ok(0)
                    }
                    Some(w) => {
                        let steps: Vec<String> = w
                            .run
                            .symbols
                            .iter()
                            .zip(w.run.states.windows(2))
                            .map(|(s, qs)| format!("{} -{}-> {}", qs[0], s, qs[1]))
                            .collect();
                        say!(out, "diamond on run: {}", steps.join(", "));
                        if let Some(word) = &w.output {
                            say!(
                                out,
                                "merged by output: {}",
                                crate::format::render_word(word)
                            );
                        }
                        if dot {
                            write!(out, "{}", w.flow_graph().to_dot()).map_err(|source| {
                                Failure::Io {
                                    path: String::from("<stdout>"),
                                    source,
                                }
                            })?;
                        }
                        Ok(EXIT_FALSE)
                    }
                }
            }
            Property::Deterministic { machine: m } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                if t.is_deterministic() {
                    say!(out, "deterministic");
                    return Ok(0);
                }
                for q in t.states() {
                    for s in t.input() {
                        let n = t.transitions_from(q, s).count();
                        if n > 1 {
                            say!(out, "nondeterministic: {n} transitions from {q} on {s}");
                            return Ok(EXIT_FALSE);
                        }
                    }
                }
                say!(
                    out,
                    "nondeterministic: an accepting state has several output words"
                );
                Ok(EXIT_FALSE)
            }
            Property::Functional {
                machine: m,
                max_len,
            } => {
                let doc = load(&m.file)?;
                let t = machine(&doc, &m.name, &m.file)?;
                match functionality_witness(t, max_len, &self.limits)? {
                    None => {
                        say!(out, "functional on inputs up to length {max_len}");
                        Ok(0)
                    }
                    Some(w) => {
                        let mut outs: Vec<_> =
                            t.evaluate_with(&w, &self.limits)?.into_iter().collect();
                        outs.sort_by_key(|u| length_lex_key(u, t.output()));
                        let shown: Vec<String> =
                            outs.iter().map(|u| render_symbols(u, t.output())).collect();
                        say!(
                            out,
                            "not functional on {}: {{{}}}",
                            render_symbols(&w, t.input()),
                            shown.join(", ")
                        );
                        Ok(EXIT_FALSE)
                    }
                }
            }
        }
    }
}
