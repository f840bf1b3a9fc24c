//! The machine description and its validation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::name::{valid_token, StateId, Symbol, Var};
use crate::word::{Assignment, Item, Word};

/// One element of the transition relation.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Transition {
    /// Source state.
    pub src: StateId,
    /// Input symbol read.
    pub symbol: Symbol,
    /// Simultaneous variable update.
    pub assign: Assignment,
    /// Target state.
    pub dst: StateId,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} -{}-> {} {}",
            self.src, self.symbol, self.dst, self.assign
        )
    }
}

/// The output words of one accepting state. A deterministic machine has exactly one.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct OutputRule {
    /// The accepting state.
    pub state: StateId,
    /// Words over output symbols and variables.
    pub words: BTreeSet<Word>,
}

/// Raw parts of a machine, validated by [`Sst::new`].
#[derive(Clone, Debug, Default)]
pub struct SstParts {
    /// Input alphabet in declared order.
    pub input: Vec<Symbol>,
    /// Output alphabet in declared order.
    pub output: Vec<Symbol>,
    /// States in declared order.
    pub states: Vec<StateId>,
    /// Initial state.
    pub initial: Option<StateId>,
    /// Variables in declared order.
    pub vars: Vec<Var>,
    /// Transition relation; duplicates are merged.
    pub transitions: Vec<Transition>,
    /// Output rules; several rules for one state are merged.
    pub outputs: Vec<OutputRule>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Atom {
    Sym(u32),
    Var(u32),
}

#[derive(Clone, Debug)]
pub(crate) struct CompiledTransition {
    pub dst: usize,
    /// Right-hand side per variable, in declared variable order.
    pub rhs: Vec<Vec<Atom>>,
}

/// Index-based mirror of the named description, used by the hot loops.
#[derive(Clone, Debug, Default)]
pub(crate) struct Compiled {
    pub init: usize,
    pub input_index: BTreeMap<Symbol, usize>,
    pub output_index: BTreeMap<Symbol, usize>,
    pub var_index: BTreeMap<Var, usize>,
    pub state_index: BTreeMap<StateId, usize>,
    /// `delta[state][symbol]` lists transition indices.
    pub delta: Vec<Vec<Vec<usize>>>,
    pub trans: Vec<CompiledTransition>,
    /// Output words per state; empty for non-accepting states.
    pub outputs: Vec<Vec<Vec<Atom>>>,
}

/// A streaming string transducer.
///
/// Alphabets, states and variables keep their declared order, which fixes
/// enumeration order and every derived naming. Transitions are stored as a
/// set in canonical order.
#[derive(Clone)]
pub struct Sst {
    input: Vec<Symbol>,
    output: Vec<Symbol>,
    states: Vec<StateId>,
    initial: StateId,
    vars: Vec<Var>,
    transitions: Vec<Transition>,
    outputs: BTreeMap<StateId, BTreeSet<Word>>,
    pub(crate) compiled: Compiled,
}

impl PartialEq for Sst {
    fn eq(&self, other: &Self) -> bool {
        self.input == other.input
            && self.output == other.output
            && self.states == other.states
            && self.initial == other.initial
            && self.vars == other.vars
            && self.transitions == other.transitions
            && self.outputs == other.outputs
    }
}

impl Eq for Sst {}

impl fmt::Debug for Sst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Sst")
            .field("input", &self.input)
            .field("output", &self.output)
            .field("states", &self.states)
            .field("initial", &self.initial)
            .field("vars", &self.vars)
            .field("transitions", &self.transitions)
            .field("outputs", &self.outputs)
            .finish()
    }
}

fn index_of<T: Ord + Clone + fmt::Display>(items: &[T], what: &str) -> Result<BTreeMap<T, usize>> {
    let mut index = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        if !valid_token(&item.to_string()) {
            return Err(Error::Invalid(format!(
                "{what} `{item}` is not a valid token"
            )));
        }
        if index.insert(item.clone(), i).is_some() {
            return Err(Error::Invalid(format!("{what} `{item}` declared twice")));
        }
    }
    Ok(index)
}

fn compile_word(
    w: &Word,
    output_index: &BTreeMap<Symbol, usize>,
    var_index: &BTreeMap<Var, usize>,
    context: &dyn Fn() -> String,
) -> Result<Vec<Atom>> {
    w.items()
        .iter()
        .map(|item| match item {
            Item::Sym(s) => output_index
                .get(s)
                .map(|&i| Atom::Sym(i as u32))
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "symbol `{s}` in {} is not an output symbol",
                        context()
                    ))
                }),
            Item::Var(v) => var_index
                .get(v)
                .map(|&i| Atom::Var(i as u32))
                .ok_or_else(|| Error::Invalid(format!("unknown variable `{v}` in {}", context()))),
        })
        .collect()
}

impl Sst {
    /// Validates `parts` and builds the machine.
    pub fn new(parts: SstParts) -> Result<Sst> {
        let SstParts {
            input,
            output,
            states,
            initial,
            vars,
            transitions,
            outputs,
        } = parts;
        let input_index = index_of(&input, "input symbol")?;
        let output_index = index_of(&output, "output symbol")?;
        let state_index = index_of(&states, "state")?;
        let var_index = index_of(&vars, "variable")?;
        for v in &vars {
            let as_sym = Symbol::new(v.as_str());
            if input_index.contains_key(&as_sym) || output_index.contains_key(&as_sym) {
                return Err(Error::Invalid(format!(
                    "variable `{v}` clashes with an alphabet symbol"
                )));
            }
        }
        let initial = initial.ok_or_else(|| Error::Invalid("no initial state".into()))?;
        let init = *state_index
            .get(&initial)
            .ok_or_else(|| Error::Invalid(format!("initial state `{initial}` is not declared")))?;

        let mut transitions = transitions;
        for t in &transitions {
            for (st, role) in [(&t.src, "source"), (&t.dst, "target")] {
                if !state_index.contains_key(st) {
                    return Err(Error::Invalid(format!(
                        "{role} state `{st}` of `{t}` is not declared"
                    )));
                }
            }
            if !input_index.contains_key(&t.symbol) {
                return Err(Error::Invalid(format!(
                    "symbol `{}` of `{t}` is not an input symbol",
                    t.symbol
                )));
            }
            if t.assign.len() != vars.len() || !t.assign.domain().all(|v| var_index.contains_key(v))
            {
                return Err(Error::Invalid(format!(
                    "assignment of `{t}` is not total over the declared variables"
                )));
            }
        }
        let key = |t: &Transition| {
            (
                state_index[&t.src],
                input_index[&t.symbol],
                state_index[&t.dst],
            )
        };
        transitions.sort_by(|a, b| key(a).cmp(&key(b)).then_with(|| a.assign.cmp(&b.assign)));
        transitions.dedup();

        let mut out_map: BTreeMap<StateId, BTreeSet<Word>> = BTreeMap::new();
        for rule in outputs {
            if !state_index.contains_key(&rule.state) {
                return Err(Error::Invalid(format!(
                    "output rule for undeclared state `{}`",
                    rule.state
                )));
            }
            if !rule.words.is_empty() {
                out_map.entry(rule.state).or_default().extend(rule.words);
            }
        }

        let mut delta = alloc::vec![alloc::vec![Vec::new(); input.len()]; states.len()];
        let mut compiled_trans = Vec::with_capacity(transitions.len());
        for (i, t) in transitions.iter().enumerate() {
            let (src, sym, dst) = key(t);
            let rhs = vars
                .iter()
                .map(|v| {
                    compile_word(t.assign.get(v).unwrap(), &output_index, &var_index, &|| {
                        format!("`{t}`")
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            delta[src][sym].push(i);
            compiled_trans.push(CompiledTransition { dst, rhs });
        }
        let mut compiled_outputs = alloc::vec![Vec::new(); states.len()];
        for (st, words) in &out_map {
            for w in words {
                compiled_outputs[state_index[st]].push(compile_word(
                    w,
                    &output_index,
                    &var_index,
                    &|| format!("output of `{st}`"),
                )?);
            }
        }

        let compiled = Compiled {
            init,
            input_index,
            output_index,
            var_index,
            state_index,
            delta,
            trans: compiled_trans,
            outputs: compiled_outputs,
        };
        Ok(Sst {
            input,
            output,
            states,
            initial,
            vars,
            transitions,
            outputs: out_map,
            compiled,
        })
    }

    /// Starts a string-based builder.
    pub fn builder() -> SstBuilder {
        SstBuilder::default()
    }

    /// Input alphabet in declared order.
    pub fn input(&self) -> &[Symbol] {
        &self.input
    }

    /// Output alphabet in declared order.
    pub fn output(&self) -> &[Symbol] {
        &self.output
    }

    /// States in declared order.
    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    /// The initial state.
    pub fn initial(&self) -> &StateId {
        &self.initial
    }

    /// Variables in declared order.
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    /// The transition relation in canonical order.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Transitions leaving `state` on `symbol`.
    pub fn transitions_from<'a>(
        &'a self,
        state: &StateId,
        symbol: &Symbol,
    ) -> impl Iterator<Item = &'a Transition> + 'a {
        let indices: &[usize] = match (
            self.compiled.state_index.get(state),
            self.compiled.input_index.get(symbol),
        ) {
            (Some(&q), Some(&s)) => &self.compiled.delta[q][s],
            _ => &[],
        };
        indices.iter().map(move |&i| &self.transitions[i])
    }

    /// Output words of `state`, if it is accepting.
    pub fn outputs_of(&self, state: &StateId) -> Option<&BTreeSet<Word>> {
        self.outputs.get(state)
    }

    /// Output rules, one per accepting state, in declared state order.
    pub fn output_rules(&self) -> impl Iterator<Item = OutputRule> + '_ {
        self.states.iter().filter_map(move |q| {
            self.outputs.get(q).map(|words| OutputRule {
                state: q.clone(),
                words: words.clone(),
            })
        })
    }

    /// True if `state` has at least one output word.
    pub fn is_accepting(&self, state: &StateId) -> bool {
        self.outputs.contains_key(state)
    }

    /// Position of a state in declared order.
    pub fn state_index(&self, state: &StateId) -> Option<usize> {
        self.compiled.state_index.get(state).copied()
    }

    /// Position of a variable in declared order.
    pub fn var_index(&self, v: &Var) -> Option<usize> {
        self.compiled.var_index.get(v).copied()
    }

    /// Position of an input symbol in declared order.
    pub fn input_index(&self, s: &Symbol) -> Option<usize> {
        self.compiled.input_index.get(s).copied()
    }

    /// True if `s` is in the output alphabet.
    pub fn has_output_symbol(&self, s: &Symbol) -> bool {
        self.compiled.output_index.contains_key(s)
    }

    /// At most one transition per (state, symbol) and at most one output word per state.
    ///
    /// Missing transitions are allowed; see [`Sst::missing_transitions`].
    pub fn is_deterministic(&self) -> bool {
        self.compiled
            .delta
            .iter()
            .all(|row| row.iter().all(|ts| ts.len() <= 1))
            && self.outputs.values().all(|words| words.len() <= 1)
    }

    /// (state, symbol) pairs without any outgoing transition.
    pub fn missing_transitions(&self) -> Vec<(StateId, Symbol)> {
        let mut missing = Vec::new();
        for (q, row) in self.compiled.delta.iter().enumerate() {
            for (s, ts) in row.iter().enumerate() {
                if ts.is_empty() {
                    missing.push((self.states[q].clone(), self.input[s].clone()));
                }
            }
        }
        missing
    }

    /// True if every (state, symbol) pair has a transition.
    pub fn is_total(&self) -> bool {
        self.missing_transitions().is_empty()
    }

    /// The same machine with every output rule removed.
    pub fn without_outputs(&self) -> Sst {
        let mut parts = self.to_parts();
        parts.outputs.clear();
        Sst::new(parts).expect("removing outputs keeps a machine valid")
    }

    /// Decomposes the machine back into raw parts.
    pub fn to_parts(&self) -> SstParts {
        SstParts {
            input: self.input.clone(),
            output: self.output.clone(),
            states: self.states.clone(),
            initial: Some(self.initial.clone()),
            vars: self.vars.clone(),
            transitions: self.transitions.clone(),
            outputs: self.output_rules().collect(),
        }
    }
}

/// Builds an [`Sst`] from string tokens.
///
/// Right-hand sides are whitespace-separated tokens; a token naming a
/// declared variable is a variable, anything else an output symbol. Variables
/// not mentioned by a transition keep their value.
///
/// ```
/// use sst_core::Sst;
/// let t1 = Sst::builder()
///     .input(["a"])
///     .output(["a", "b"])
///     .states(["q0"])
///     .initial("q0")
///     .vars(["x"])
///     .transition("q0", "a", "q0", &[("x", "a b x")])
///     .output_word("q0", "x")
///     .build()
///     .unwrap();
/// assert!(t1.is_deterministic());
/// ```
#[derive(Clone, Debug, Default)]
pub struct SstBuilder {
    input: Vec<String>,
    output: Vec<String>,
    states: Vec<String>,
    initial: Option<String>,
    vars: Vec<String>,
    transitions: Vec<(String, String, String, Vec<(String, String)>)>,
    outputs: Vec<(String, String)>,
}

fn owned<'a>(items: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    items.into_iter().map(String::from).collect()
}

impl SstBuilder {
    /// Input alphabet.
    pub fn input<'a>(mut self, symbols: impl IntoIterator<Item = &'a str>) -> Self {
        self.input = owned(symbols);
        self
    }

    /// Output alphabet.
    pub fn output<'a>(mut self, symbols: impl IntoIterator<Item = &'a str>) -> Self {
        self.output = owned(symbols);
        self
    }

    /// States.
    pub fn states<'a>(mut self, states: impl IntoIterator<Item = &'a str>) -> Self {
        self.states = owned(states);
        self
    }

    /// Initial state.
    pub fn initial(mut self, state: &str) -> Self {
        self.initial = Some(state.into());
        self
    }

    /// Variables.
    pub fn vars<'a>(mut self, vars: impl IntoIterator<Item = &'a str>) -> Self {
        self.vars = owned(vars);
        self
    }

    /// Adds a transition; `updates` pairs a variable with its right-hand side.
    pub fn transition(
        mut self,
        src: &str,
        symbol: &str,
        dst: &str,
        updates: &[(&str, &str)],
    ) -> Self {
        self.transitions.push((
            src.into(),
            symbol.into(),
            dst.into(),
            updates
                .iter()
                .map(|(v, w)| ((*v).into(), (*w).into()))
                .collect(),
        ));
        self
    }

    /// Adds an output word for `state`.
    pub fn output_word(mut self, state: &str, word: &str) -> Self {
        self.outputs.push((state.into(), word.into()));
        self
    }

    /// Validates and builds.
    pub fn build(self) -> Result<Sst> {
        let vars: BTreeSet<&str> = self.vars.iter().map(String::as_str).collect();
        let parse = |text: &str| Word::parse(text, |t| vars.contains(t));
        let mut transitions = Vec::new();
        for (src, sym, dst, updates) in &self.transitions {
            let mut assign = Assignment::identity(self.vars.iter().map(|v| Var::new(v)));
            for (v, rhs) in updates {
                if !vars.contains(v.as_str()) {
                    return Err(Error::Invalid(format!(
                        "update of undeclared variable `{v}`"
                    )));
                }
                assign.set(Var::new(v), parse(rhs));
            }
            transitions.push(Transition {
                src: StateId::new(src),
                symbol: Symbol::new(sym),
                assign,
                dst: StateId::new(dst),
            });
        }
        let outputs = self
            .outputs
            .iter()
            .map(|(q, w)| OutputRule {
                state: StateId::new(q),
                words: [parse(w)].into_iter().collect(),
            })
            .collect();
        Sst::new(SstParts {
            input: self.input.iter().map(|s| Symbol::new(s)).collect(),
            output: self.output.iter().map(|s| Symbol::new(s)).collect(),
            states: self.states.iter().map(|s| StateId::new(s)).collect(),
            initial: self.initial.as_deref().map(StateId::new),
            vars: self.vars.iter().map(|s| Var::new(s)).collect(),
            transitions,
            outputs,
        })
    }
}
