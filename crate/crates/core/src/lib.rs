//! Streaming string transducers (SSTs) over finite words.
//!
//! An SST reads its input once, left to right, and keeps fragments of its
//! eventual output in a finite set of string variables. Every transition
//! rewrites the variables with an [`Assignment`]: each variable becomes a
//! concatenation of output symbols and (previous values of) variables.
//!
//! The crate is organised around four layers:
//!
//! * [`machine`] and [`semantics`]: the data model and its run-based
//!   meaning, including bounded enumeration of the relation a machine defines.
//! * [`flow`]: copylessness, flow graphs of runs, and a decision procedure
//!   for diamond-freeness (no two copies of a variable are ever merged).
//! * [`compose`]: composition of copyless machines through state and shape
//!   summaries. The composite is in general copyful but diamond-free.
//! * [`eliminate`]: decomposition of copyful assignments into copyless ones
//!   and the conversion of a diamond-free machine into a copyless one.
//!
//! [`verify`] holds the brute-force oracles used to check every construction
//! on bounded inputs.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod compose;
pub mod eliminate;
mod error;
pub mod flow;
pub mod machine;
mod name;
pub mod semantics;
pub mod verify;
mod word;

pub use crate::error::{BudgetKind, Error, Requirement, Result};
pub use crate::machine::{OutputRule, Sst, SstBuilder, Transition};
pub use crate::name::{StateId, Symbol, Var};
pub use crate::semantics::{BoundedRelation, Run};
pub use crate::word::{apply_morphism, sequential_compose, Assignment, Item, Register, Word};

/// Resource limits shared by every enumeration and construction.
///
/// Exceeding a limit is always a hard [`Error::Budget`]; nothing is silently
/// truncated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Limits {
    /// Input words evaluated by a single bounded enumeration.
    pub max_words: u64,
    /// Output symbols produced by a single bounded enumeration.
    pub max_symbols: u64,
    /// Total symbols held by one configuration (all variables together).
    pub max_value_len: usize,
    /// Choice functions enumerated per source state in nondeterministic composition.
    pub max_choices: usize,
    /// States discovered by a worklist construction.
    pub max_states: usize,
    /// Runs enumerated by run-based oracles.
    pub max_runs: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_words: 1_000_000,
            max_symbols: 100_000_000,
            max_value_len: 1 << 20,
            max_choices: 100_000,
            max_states: 1_000_000,
            max_runs: 1_000_000,
        }
    }
}
