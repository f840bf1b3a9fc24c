use alloc::string::String;
use core::fmt;

/// Shorthand used throughout the crate.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// A structural property an operation requires of its operands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Requirement {
    /// Every transition assignment is copyless.
    Copyless,
    /// At most one transition per (state, symbol) and singleton output sets.
    Deterministic,
    /// The first machine's output alphabet is contained in the second's input alphabet.
    AlphabetCompatible,
    /// No run (including its final output) merges two copies of a variable.
    DiamondFree,
    /// Both machines read the same input alphabet.
    SameInputAlphabet,
}

impl fmt::Display for Requirement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Requirement::Copyless => "copyless",
            Requirement::Deterministic => "deterministic",
            Requirement::AlphabetCompatible => "alphabet-compatible",
            Requirement::DiamondFree => "diamond-free",
            Requirement::SameInputAlphabet => "same input alphabet",
        })
    }
}

/// Which resource ran out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetKind {
    /// Evaluated input words.
    Words,
    /// Produced output symbols.
    Symbols,
    /// Length of the values held by one configuration.
    ValueLength,
    /// Choice functions in nondeterministic composition.
    Choices,
    /// Discovered states of a construction.
    States,
    /// Enumerated runs.
    Runs,
}

impl fmt::Display for BudgetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetKind::Words => "evaluated words",
            BudgetKind::Symbols => "produced symbols",
            BudgetKind::ValueLength => "value length",
            BudgetKind::Choices => "choice functions per state",
            BudgetKind::States => "constructed states",
            BudgetKind::Runs => "enumerated runs",
        })
    }
}

/// Errors reported by the library.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    /// A word mentions a variable outside the assignment's domain.
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    /// Two assignments that must share a variable set do not.
    #[error("assignments are over different variable sets")]
    VariableSetMismatch,
    /// An input word uses a symbol outside the input alphabet.
    #[error("symbol `{0}` is not in the input alphabet")]
    UnknownSymbol(String),
    /// A machine description violates a structural invariant.
    #[error("invalid machine: {0}")]
    Invalid(String),
    /// An operand does not satisfy an operation's precondition.
    #[error("{subject} is not {requirement}: {detail}")]
    Precondition {
        /// The property that failed.
        requirement: Requirement,
        /// Which operand failed it.
        subject: &'static str,
        /// Human-readable witness.
        detail: String,
    },
    /// A variable occurs twice inside one right-hand side.
    #[error("variable `{0}` occurs twice in a single right-hand side")]
    WithinWordCopy(String),
    /// A state summary walked into a missing transition.
    #[error("no transition from `{state}` on `{symbol}` while summarizing")]
    UndefinedSummary {
        /// State of the second machine.
        state: String,
        /// Symbol that had no transition.
        symbol: String,
    },
    /// A shape or assignment generator received a non-copyless argument.
    #[error("`{0}` occurs more than once across the summarized words")]
    NotCopylessSummary(String),
    /// A relation composition needs an intermediate word the second relation does not cover.
    #[error("intermediate word `{word}` is longer than the covered bound {max_len}")]
    Coverage {
        /// The uncovered word, space separated.
        word: String,
        /// Bound the second relation was computed under.
        max_len: usize,
    },
    /// A resource limit was hit.
    #[error("budget exceeded ({kind}, limit {limit}); {progress}")]
    Budget {
        /// The exhausted resource.
        kind: BudgetKind,
        /// The limit in force.
        limit: u64,
        /// What had been completed when the limit was hit.
        progress: String,
    },
}

impl Error {
    pub(crate) fn budget(kind: BudgetKind, limit: impl TryInto<u64>, progress: String) -> Error {
        Error::Budget {
            kind,
            limit: limit.try_into().unwrap_or(u64::MAX),
            progress,
        }
    }

    /// True for [`Error::Budget`].
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}
