//! Brute-force oracles over bounded inputs.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{BudgetKind, Error, Requirement, Result};
use crate::flow::copyful_transition;
use crate::machine::Sst;
use crate::name::Symbol;
use crate::semantics::{render_symbols, BoundedRelation, Env};
use crate::Limits;

/// Composes two bounded relations.
///
/// Every intermediate word must be no longer than `r23.max_len`, otherwise
/// the second relation does not cover it and [`Error::Coverage`] names it.
pub fn relation_compose(r12: &BoundedRelation, r23: &BoundedRelation) -> Result<BoundedRelation> {
    let mut by_input: BTreeMap<&[Symbol], Vec<&Vec<Symbol>>> = BTreeMap::new();
    for (v, u) in &r23.pairs {
        by_input.entry(v.as_slice()).or_default().push(u);
    }
    let mut pairs = BTreeSet::new();
    for (w, v) in &r12.pairs {
        if v.len() > r23.max_len {
            return Err(Error::Coverage {
                word: render_symbols(v),
                max_len: r23.max_len,
            });
        }
        for u in by_input.get(v.as_slice()).into_iter().flatten() {
            pairs.insert((w.clone(), (*u).clone()));
        }
    }
    Ok(BoundedRelation {
        pairs,
        max_len: r12.max_len,
    })
}

/// Feeds every output of `r12` to `t23`, evaluating each intermediate word once.
pub fn relation_through(
    r12: &BoundedRelation,
    t23: &Sst,
    limits: &Limits,
) -> Result<BoundedRelation> {
    let mut cache: BTreeMap<&Vec<Symbol>, BTreeSet<Vec<Symbol>>> = BTreeMap::new();
    let mut pairs = BTreeSet::new();
    for (w, v) in &r12.pairs {
        if !cache.contains_key(v) {
            if cache.len() as u64 >= limits.max_words {
                return Err(Error::budget(
                    BudgetKind::Words,
                    limits.max_words,
                    format!("{} intermediate words evaluated", cache.len()),
                ));
            }
            cache.insert(v, t23.evaluate_with(v, limits)?);
        }
        for u in &cache[v] {
            pairs.insert((w.clone(), u.clone()));
        }
    }
    Ok(BoundedRelation {
        pairs,
        max_len: r12.max_len,
    })
}

/// Outcome of a bounded equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceVerdict {
    /// True when the machines agree on every input up to the bound.
    pub equal: bool,
    /// The least disagreeing input in length-lexicographic order, with both output sets.
    pub witness: Option<(Vec<Symbol>, BTreeSet<Vec<Symbol>>, BTreeSet<Vec<Symbol>>)>,
}

type Configs = BTreeSet<(usize, Env)>;

/// Compares the outputs of `a` and `b` on every input of length at most `max_len`.
///
/// Inputs are visited in length-lexicographic order over `a`'s declared
/// input alphabet, so the witness is the least disagreeing input.
pub fn equiv_bounded(a: &Sst, b: &Sst, max_len: usize) -> Result<EquivalenceVerdict> {
    equiv_bounded_with(a, b, max_len, &Limits::default())
}

/// [`equiv_bounded`] under explicit limits.
pub fn equiv_bounded_with(
    a: &Sst,
    b: &Sst,
    max_len: usize,
    limits: &Limits,
) -> Result<EquivalenceVerdict> {
    let sa: BTreeSet<&Symbol> = a.input().iter().collect();
    let sb: BTreeSet<&Symbol> = b.input().iter().collect();
    if sa != sb {
        return Err(Error::Precondition {
            requirement: Requirement::SameInputAlphabet,
            subject: "machines",
            detail: String::from("the input alphabets differ"),
        });
    }
    // Symbol positions in each machine, following a's order.
    let order: Vec<(usize, usize)> = a
        .input()
        .iter()
        .map(|s| (a.input_index(s).unwrap(), b.input_index(s).unwrap()))
        .collect();
    let mut level: Vec<(Vec<usize>, Configs, Configs)> =
        alloc::vec![(Vec::new(), a.initial_configs(), b.initial_configs())];
    let mut words = 0u64;
    let mut symbols = 0u64;
    for len in 0..=max_len {
        for (w, ca, cb) in &level {
            words += 1;
            if words > limits.max_words {
                return Err(Error::budget(
                    BudgetKind::Words,
                    limits.max_words,
                    format!("all inputs shorter than {len} agree"),
                ));
            }
            let oa = a.outputs_of_configs(ca);
            let ob = b.outputs_of_configs(cb);
            symbols += oa.iter().chain(&ob).map(|u| u.len() as u64).sum::<u64>();
            if symbols > limits.max_symbols {
                return Err(Error::budget(
                    BudgetKind::Symbols,
                    limits.max_symbols,
                    format!("all inputs shorter than {len} agree"),
                ));
            }
            let oa: BTreeSet<Vec<Symbol>> = oa.iter().map(|u| a.decode_output(u)).collect();
            let ob: BTreeSet<Vec<Symbol>> = ob.iter().map(|u| b.decode_output(u)).collect();
            if oa != ob {
                let input = w.iter().map(|&i| a.input()[i].clone()).collect();
                return Ok(EquivalenceVerdict {
                    equal: false,
                    witness: Some((input, oa, ob)),
                });
            }
        }
        if len == max_len {
            break;
        }
        let mut next = Vec::new();
        for (w, ca, cb) in &level {
            for (k, &(ia, ib)) in order.iter().enumerate() {
                let na = a.step_configs(ca, ia, limits)?;
                let nb = b.step_configs(cb, ib, limits)?;
                if na.is_empty() && nb.is_empty() {
                    continue;
                }
                let mut w2 = w.clone();
                w2.push(k);
                next.push((w2, na, nb));
            }
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    Ok(EquivalenceVerdict {
        equal: true,
        witness: None,
    })
}

/// True if no input of length at most `max_len` has two different outputs.
pub fn is_functional_bounded(t: &Sst, max_len: usize) -> Result<bool> {
    is_functional_bounded_with(t, max_len, &Limits::default())
}

/// [`is_functional_bounded`] under explicit limits.
pub fn is_functional_bounded_with(t: &Sst, max_len: usize, limits: &Limits) -> Result<bool> {
    Ok(functionality_witness(t, max_len, limits)?.is_none())
}

/// The first input, by relation order, with two or more outputs.
pub fn functionality_witness(
    t: &Sst,
    max_len: usize,
    limits: &Limits,
) -> Result<Option<Vec<Symbol>>> {
    let r = t.relation_with(max_len, limits)?;
    let mut prev: Option<&Vec<Symbol>> = None;
    for (w, _) in &r.pairs {
        if prev == Some(w) {
            return Ok(Some(w.clone()));
        }
        prev = Some(w);
    }
    Ok(None)
}

/// `max(total right-hand-side length over transitions, output word length)`.
pub fn growth_constant(t: &Sst) -> usize {
    let trans = t.transitions().iter().map(|tr| tr.assign.total_len());
    let outs = t
        .output_rules()
        .flat_map(|r| r.words.into_iter().map(|w| w.len()))
        .collect::<Vec<_>>();
    trans.chain(outs).max().unwrap_or(0)
}

/// Checks `|u| ≤ C·(|w| + 1)` for every pair with `|w| ≤ max_len`; requires a copyless machine.
pub fn growth_check(t: &Sst, max_len: usize) -> Result<bool> {
    growth_check_with(t, max_len, &Limits::default())
}

/// [`growth_check`] under explicit limits.
pub fn growth_check_with(t: &Sst, max_len: usize, limits: &Limits) -> Result<bool> {
    if let Some(tr) = copyful_transition(t) {
        return Err(Error::Precondition {
            requirement: Requirement::Copyless,
            subject: "machine",
            detail: format!("transition `{tr}`"),
        });
    }
    let c = growth_constant(t);
    let r = t.relation_with(max_len, limits)?;
    Ok(r.pairs.iter().all(|(w, u)| u.len() <= c * (w.len() + 1)))
}
