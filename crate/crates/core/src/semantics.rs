//! Runs, valuations, outputs and bounded relations.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{BudgetKind, Error, Result};
use crate::machine::{Atom, CompiledTransition, Sst};
use crate::name::{StateId, Symbol};
use crate::word::{sequential_compose, Assignment, Word};
use crate::Limits;

/// A run `q0 -(w1, α1)-> q1 … -(wn, αn)-> qn`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Run {
    /// `q0..qn`; `q0` is the initial state unless the run was started elsewhere.
    pub states: Vec<StateId>,
    /// `w1..wn`.
    pub symbols: Vec<Symbol>,
    /// `α1..αn`.
    pub assigns: Vec<Assignment>,
}

impl Run {
    /// Number of transitions taken.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    /// True for the run on ε.
    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Final state.
    pub fn last_state(&self) -> &StateId {
        self.states.last().expect("a run has at least one state")
    }
}

/// The pairs `(w, u)` with `|w| ≤ max_len` and `u` an output of the machine on `w`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct BoundedRelation {
    /// Input/output pairs.
    pub pairs: BTreeSet<(Vec<Symbol>, Vec<Symbol>)>,
    /// The input-length bound the relation was computed under.
    pub max_len: usize,
}

impl BoundedRelation {
    /// Number of pairs.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// True when no input of length at most `max_len` is accepted.
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Outputs related to `input`.
    pub fn outputs_of<'a>(
        &'a self,
        input: &'a [Symbol],
    ) -> impl Iterator<Item = &'a Vec<Symbol>> + 'a {
        self.pairs
            .iter()
            .filter(move |(w, _)| w.as_slice() == input)
            .map(|(_, u)| u)
    }

    /// Length of the longest output, 0 for the empty relation.
    pub fn max_output_len(&self) -> usize {
        self.pairs.iter().map(|(_, u)| u.len()).max().unwrap_or(0)
    }

    /// Keeps the pairs whose input is at most `max_len` long.
    pub fn restrict(&self, max_len: usize) -> BoundedRelation {
        BoundedRelation {
            pairs: self
                .pairs
                .iter()
                .filter(|(w, _)| w.len() <= max_len)
                .cloned()
                .collect(),
            max_len: max_len.min(self.max_len),
        }
    }
}

/// Words over `alphabet` of length at most `max_len`, shortest first and
/// lexicographic in the order of `alphabet` within one length.
#[derive(Clone, Debug)]
pub struct LengthLex<'a> {
    alphabet: &'a [Symbol],
    max_len: usize,
    current: Option<Vec<usize>>,
}

impl<'a> LengthLex<'a> {
    /// Starts at ε.
    pub fn new(alphabet: &'a [Symbol], max_len: usize) -> Self {
        LengthLex {
            alphabet,
            max_len,
            current: Some(Vec::new()),
        }
    }
}

impl Iterator for LengthLex<'_> {
    type Item = Vec<Symbol>;

    fn next(&mut self) -> Option<Vec<Symbol>> {
        let digits = self.current.as_mut()?;
        let word = digits.iter().map(|&i| self.alphabet[i].clone()).collect();
        let base = self.alphabet.len();
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                if digits.len() >= self.max_len || base == 0 {
                    self.current = None;
                } else {
                    let n = digits.len() + 1;
                    *digits = alloc::vec![0; n];
                }
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < base {
                break;
            }
            digits[pos] = 0;
        }
        Some(word)
    }
}

/// Variable values of one configuration, as output-symbol indices.
pub(crate) type Env = Vec<Vec<u32>>;

pub(crate) fn step_env(t: &CompiledTransition, env: &Env) -> Env {
    t.rhs
        .iter()
        .map(|rhs| {
            let mut value = Vec::new();
            for atom in rhs {
                match *atom {
                    Atom::Sym(s) => value.push(s),
                    Atom::Var(v) => value.extend_from_slice(&env[v as usize]),
                }
            }
            value
        })
        .collect()
}

pub(crate) fn read_env(word: &[Atom], env: &Env) -> Vec<u32> {
    let mut out = Vec::new();
    for atom in word {
        match *atom {
            Atom::Sym(s) => out.push(s),
            Atom::Var(v) => out.extend_from_slice(&env[v as usize]),
        }
    }
    out
}

fn env_size(env: &Env) -> usize {
    env.iter().map(Vec::len).sum()
}

impl Sst {
    pub(crate) fn encode_input(&self, w: &[Symbol]) -> Result<Vec<usize>> {
        w.iter()
            .map(|s| {
                self.input_index(s)
                    .ok_or_else(|| Error::UnknownSymbol(s.to_string()))
            })
            .collect()
    }

    pub(crate) fn decode_output(&self, u: &[u32]) -> Vec<Symbol> {
        u.iter()
            .map(|&i| self.output()[i as usize].clone())
            .collect()
    }

    pub(crate) fn initial_configs(&self) -> BTreeSet<(usize, Env)> {
        let env = alloc::vec![Vec::new(); self.vars().len()];
        [(self.compiled.init, env)].into_iter().collect()
    }

    pub(crate) fn step_configs(
        &self,
        configs: &BTreeSet<(usize, Env)>,
        symbol: usize,
        limits: &Limits,
    ) -> Result<BTreeSet<(usize, Env)>> {
        let mut next = BTreeSet::new();
        for (q, env) in configs {
            for &ti in &self.compiled.delta[*q][symbol] {
                let t = &self.compiled.trans[ti];
                let env2 = step_env(t, env);
                if env_size(&env2) > limits.max_value_len {
                    return Err(Error::budget(
                        BudgetKind::ValueLength,
                        limits.max_value_len,
                        format!(
                            "a configuration at `{}` outgrew the cap",
                            self.states()[t.dst]
                        ),
                    ));
                }
                next.insert((t.dst, env2));
            }
        }
        Ok(next)
    }

    pub(crate) fn outputs_of_configs(
        &self,
        configs: &BTreeSet<(usize, Env)>,
    ) -> BTreeSet<Vec<u32>> {
        let mut out = BTreeSet::new();
        for (q, env) in configs {
            for word in &self.compiled.outputs[*q] {
                out.insert(read_env(word, env));
            }
        }
        out
    }

    /// All runs on `w`. A deterministic machine has at most one.
    pub fn runs(&self, w: &[Symbol]) -> Result<Vec<Run>> {
        self.runs_with(w, &Limits::default())
    }

    /// [`Sst::runs`] under explicit limits.
    pub fn runs_with(&self, w: &[Symbol], limits: &Limits) -> Result<Vec<Run>> {
        self.runs_from(self.initial(), w, limits)
    }

    /// Runs on `w` starting in `state` instead of the initial state.
    pub fn runs_from(&self, state: &StateId, w: &[Symbol], limits: &Limits) -> Result<Vec<Run>> {
        let start = self
            .state_index(state)
            .ok_or_else(|| Error::Invalid(format!("`{state}` is not a state")))?;
        let input = self.encode_input(w)?;
        let mut runs = Vec::new();
        let mut path = Vec::new();
        self.collect_runs(start, start, &input, &mut path, &mut runs, limits)?;
        Ok(runs)
    }

    #[allow(clippy::too_many_arguments)]
    fn collect_runs(
        &self,
        start: usize,
        q: usize,
        rest: &[usize],
        path: &mut Vec<usize>,
        runs: &mut Vec<Run>,
        limits: &Limits,
    ) -> Result<()> {
        let Some((&s, tail)) = rest.split_first() else {
            if runs.len() as u64 >= limits.max_runs {
                return Err(Error::budget(
                    BudgetKind::Runs,
                    limits.max_runs,
                    format!("{} runs enumerated", runs.len()),
                ));
            }
            runs.push(self.run_along(start, path));
            return Ok(());
        };
        for &ti in &self.compiled.delta[q][s] {
            path.push(ti);
            self.collect_runs(start, self.compiled.trans[ti].dst, tail, path, runs, limits)?;
            path.pop();
        }
        Ok(())
    }

    pub(crate) fn run_from_path(&self, path: &[usize]) -> Run {
        self.run_along(self.compiled.init, path)
    }

    pub(crate) fn run_along(&self, start: usize, path: &[usize]) -> Run {
        let mut states = alloc::vec![self.states()[start].clone()];
        let mut symbols = Vec::new();
        let mut assigns = Vec::new();
        for &ti in path {
            let t = &self.transitions()[ti];
            states.push(t.dst.clone());
            symbols.push(t.symbol.clone());
            assigns.push(t.assign.clone());
        }
        Run {
            states,
            symbols,
            assigns,
        }
    }

    /// `α1 ∘ … ∘ αn`, the identity for the empty run.
    ///
    /// `valuation(run)(x)` expresses the final value of `x` in terms of the
    /// values before the run.
    pub fn valuation(&self, run: &Run) -> Result<Assignment> {
        let mut acc = Assignment::identity(self.vars().iter().cloned());
        for a in &run.assigns {
            acc = sequential_compose(&acc, a)?;
        }
        Ok(acc)
    }

    /// The output of an accepting run for each word of its final state's output rule.
    pub fn run_outputs(&self, run: &Run) -> Result<BTreeSet<Vec<Symbol>>> {
        let Some(words) = self.outputs_of(run.last_state()) else {
            return Ok(BTreeSet::new());
        };
        let v = self.valuation(run)?;
        words.iter().map(|w| Ok(v.apply(w)?.erase_vars())).collect()
    }

    /// Outputs on `w`, computed by stepping variable values forward.
    ///
    /// Variables start empty. Copyful machines may grow exponentially, so the
    /// total value length per configuration is capped by [`Limits::max_value_len`].
    pub fn evaluate(&self, w: &[Symbol]) -> Result<BTreeSet<Vec<Symbol>>> {
        self.evaluate_with(w, &Limits::default())
    }

    /// [`Sst::evaluate`] under explicit limits.
    pub fn evaluate_with(&self, w: &[Symbol], limits: &Limits) -> Result<BTreeSet<Vec<Symbol>>> {
        let input = self.encode_input(w)?;
        let mut configs = self.initial_configs();
        for &s in &input {
            configs = self.step_configs(&configs, s, limits)?;
            if configs.is_empty() {
                break;
            }
        }
        Ok(self
            .outputs_of_configs(&configs)
            .iter()
            .map(|u| self.decode_output(u))
            .collect())
    }

    /// Outputs on `w` through run valuations: `Er ∘ V(ρ) ∘ F(qn)` per accepting run.
    pub fn evaluate_by_valuation(
        &self,
        w: &[Symbol],
        limits: &Limits,
    ) -> Result<BTreeSet<Vec<Symbol>>> {
        let mut out = BTreeSet::new();
        for run in self.runs_with(w, limits)? {
            out.extend(self.run_outputs(&run)?);
        }
        Ok(out)
    }

    /// Every `(w, u)` with `|w| ≤ max_len`.
    pub fn relation(&self, max_len: usize) -> Result<BoundedRelation> {
        self.relation_with(max_len, &Limits::default())
    }

    /// [`Sst::relation`] under explicit limits.
    pub fn relation_with(&self, max_len: usize, limits: &Limits) -> Result<BoundedRelation> {
        let mut walk = RelationWalk {
            t: self,
            limits,
            max_len,
            word: Vec::new(),
            words: 0,
            symbols: 0,
            pairs: BTreeSet::new(),
        };
        walk.visit(&self.initial_configs())?;
        Ok(BoundedRelation {
            pairs: walk.pairs,
            max_len,
        })
    }
}

struct RelationWalk<'a> {
    t: &'a Sst,
    limits: &'a Limits,
    max_len: usize,
    word: Vec<usize>,
    words: u64,
    symbols: u64,
    pairs: BTreeSet<(Vec<Symbol>, Vec<Symbol>)>,
}

impl RelationWalk<'_> {
    fn progress(&self) -> alloc::string::String {
        format!(
            "{} words evaluated, {} pairs found, current prefix length {}",
            self.words,
            self.pairs.len(),
            self.word.len()
        )
    }

    fn visit(&mut self, configs: &BTreeSet<(usize, Env)>) -> Result<()> {
        self.words += 1;
        if self.words > self.limits.max_words {
            return Err(Error::budget(
                BudgetKind::Words,
                self.limits.max_words,
                self.progress(),
            ));
        }
        let outputs = self.t.outputs_of_configs(configs);
        if !outputs.is_empty() {
            let w: Vec<Symbol> = self
                .word
                .iter()
                .map(|&i| self.t.input()[i].clone())
                .collect();
            for u in outputs {
                self.symbols += u.len() as u64;
                if self.symbols > self.limits.max_symbols {
                    return Err(Error::budget(
                        BudgetKind::Symbols,
                        self.limits.max_symbols,
                        self.progress(),
                    ));
                }
                self.pairs.insert((w.clone(), self.t.decode_output(&u)));
            }
        }
        if self.word.len() == self.max_len || configs.is_empty() {
            return Ok(());
        }
        for s in 0..self.t.input().len() {
            let next = self.t.step_configs(configs, s, self.limits)?;
            if next.is_empty() {
                // Every extension is rejected; account for the skipped words.
                self.words +=
                    skipped_words(self.t.input().len(), self.max_len - self.word.len() - 1);
                continue;
            }
            self.word.push(s);
            self.visit(&next)?;
            self.word.pop();
        }
        Ok(())
    }
}

/// `Σ_{k=0}^{depth} base^k`, saturating.
fn skipped_words(base: usize, depth: usize) -> u64 {
    let mut total: u64 = 0;
    let mut power: u64 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(power);
        power = power.saturating_mul(base as u64);
    }
    total
}

/// Evaluates every input of the length-lex enumeration and pairs it with its outputs.
pub fn outputs_by_word(
    t: &Sst,
    max_len: usize,
    limits: &Limits,
) -> Result<Vec<(Vec<Symbol>, BTreeSet<Vec<Symbol>>)>> {
    let mut out = Vec::new();
    for (i, w) in LengthLex::new(t.input(), max_len).enumerate() {
        if i as u64 >= limits.max_words {
            return Err(Error::budget(
                BudgetKind::Words,
                limits.max_words,
                format!("{i} words evaluated"),
            ));
        }
        let outputs = t.evaluate_with(&w, limits)?;
        out.push((w, outputs));
    }
    Ok(out)
}

/// Renders a symbol sequence space separated, `ε` when empty.
pub fn render_symbols(w: &[Symbol]) -> alloc::string::String {
    Word::<crate::Var>::from_items(w.iter().cloned().map(crate::Item::Sym).collect()).to_string()
}
