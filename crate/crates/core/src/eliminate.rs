//! Copy elimination for diamond-free machines.
//!
//! A copyful but diamond-free assignment is split into copyless members,
//! each keeping every copied variable in exactly one of its targets. The
//! converted machine guesses a member on every step and remembers which
//! variables the guess emptied. Those variables are dead: their value no
//! longer matches the original machine until they are overwritten.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::compose::{compose_dsst_with, compose_nsst_with, Composite};
use crate::error::{BudgetKind, Error, Requirement, Result};
use crate::flow::{find_diamond, is_copyless_assignment};
use crate::machine::{OutputRule, Sst, SstParts, Transition};
use crate::name::{StateId, Var};
use crate::word::{Assignment, Register, Word};
use crate::Limits;

/// The copyless members covering one assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionSet<V: Register = Var> {
    /// Members in canonical order.
    pub members: BTreeSet<Assignment<V>>,
}

impl<V: Register> DecompositionSet<V> {
    /// Number of members.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    /// True when there is no member, which only happens for an empty search.
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = &Assignment<V>> + '_ {
        self.members.iter()
    }
}

fn within_word_copy<V: Register>(a: &Assignment<V>) -> Option<V> {
    a.iter().find_map(|(_, w)| {
        let mut seen = BTreeSet::new();
        w.vars().find(|v| !seen.insert(*v)).cloned()
    })
}

fn first_copied<V: Register>(a: &Assignment<V>, order: &[V]) -> Option<V> {
    order
        .iter()
        .find(|x| a.iter().filter(|(_, w)| w.contains_var(x)).count() >= 2)
        .cloned()
}

/// Splits `a` into copyless assignments; copied variables are chosen in domain order.
///
/// For a chosen copied `x`, every target `y` of `x` is kept once while each
/// other target is emptied in turn, recursing until the result is copyless.
/// A variable repeated inside one right-hand side cannot be split this way
/// and is reported as [`Error::WithinWordCopy`].
pub fn decompose<V: Register>(a: &Assignment<V>) -> Result<DecompositionSet<V>> {
    let order: Vec<V> = a.domain().cloned().collect();
    decompose_in_order(a, &order)
}

/// [`decompose`] choosing copied variables in the given order.
pub fn decompose_in_order<V: Register>(
    a: &Assignment<V>,
    order: &[V],
) -> Result<DecompositionSet<V>> {
    if let Some(v) = within_word_copy(a) {
        return Err(Error::WithinWordCopy(v.to_string()));
    }
    let mut members = BTreeSet::new();
    let mut visited = BTreeSet::new();
    split(a.clone(), order, &mut members, &mut visited);
    Ok(DecompositionSet { members })
}

fn split<V: Register>(
    alpha: Assignment<V>,
    order: &[V],
    members: &mut BTreeSet<Assignment<V>>,
    visited: &mut BTreeSet<Assignment<V>>,
) {
    if !visited.insert(alpha.clone()) {
        return;
    }
    let Some(x) = first_copied(&alpha, order) else {
        members.insert(alpha);
        return;
    };
    let targets: Vec<V> = alpha
        .iter()
        .filter(|(_, w)| w.contains_var(&x))
        .map(|(y, _)| y.clone())
        .collect();
    for y in &targets {
        for z in targets.iter().filter(|z| *z != y) {
            let mut beta = alpha.clone();
            beta.set(z.clone(), Word::empty());
            if is_copyless_assignment(&beta) {
                members.insert(beta);
            } else {
                split(beta, order, members, visited);
            }
        }
    }
}

/// Variables `y` whose right-hand side `beta` dropped although `alpha(y)` reads a variable.
pub fn killed_by<V: Register>(alpha: &Assignment<V>, beta: &Assignment<V>) -> BTreeSet<V> {
    alpha
        .iter()
        .filter(|(y, w)| {
            let kept = beta.get(y);
            w.vars().any(|x| !kept.is_some_and(|b| b.contains_var(x)))
        })
        .map(|(y, _)| y.clone())
        .collect()
}

/// Variables whose value after `beta` is unreliable: killed ones and those reading a dead variable.
pub fn dead_after<V: Register>(
    alpha: &Assignment<V>,
    beta: &Assignment<V>,
    dead: &BTreeSet<V>,
) -> BTreeSet<V> {
    let mut out = killed_by(alpha, beta);
    for (y, w) in beta.iter() {
        if w.vars().any(|x| dead.contains(x)) {
            out.insert(y.clone());
        }
    }
    out
}

/// A set of dead variables, the second component of a converted state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct DeadSet {
    /// The dead variables.
    pub vars: BTreeSet<Var>,
}

/// The copyless machine and the meaning of its states.
#[derive(Clone, Debug)]
pub struct Eliminated {
    /// The copyless machine.
    pub machine: Sst,
    /// `(original state, dead set)` per state, in the machine's state order.
    pub states: Vec<(StateId, DeadSet)>,
}

impl Eliminated {
    /// Position of the state standing for `(q, dead)`.
    pub fn find(&self, q: &str, dead: &[&str]) -> Option<usize> {
        let dead: BTreeSet<Var> = dead.iter().map(|v| Var::new(v)).collect();
        self.states
            .iter()
            .position(|(s, d)| s.as_str() == q && d.vars == dead)
    }
}

type Node = (usize, Vec<bool>);

struct Edge {
    src: usize,
    trans: usize,
    member: usize,
    dst: usize,
    strict: bool,
}

fn reads_dead(w: &Word, dead: &[bool], t: &Sst) -> bool {
    w.vars()
        .any(|v| dead[t.var_index(v).expect("validated variable")])
}

fn dead_name(q: &StateId, dead: &[bool], vars: &[Var]) -> String {
    let names: Vec<&str> = vars
        .iter()
        .zip(dead)
        .filter(|(_, &d)| d)
        .map(|(v, _)| v.as_str())
        .collect();
    format!("{q}[{}]", names.join(","))
}

/// Converts a diamond-free machine into an equivalent copyless one.
///
/// States pair an original state with a dead set. A step picks a member `β`
/// of the decomposition of the original assignment `α`; the new dead set
/// holds the variables `β` emptied and those whose update reads a dead
/// variable. Output words reading a dead variable are dropped.
///
/// Steps that read no dead variable are always kept. A step reading a dead
/// variable is kept only if its target can still reach an output; without
/// such steps a value copied earlier could be unreachable on every branch,
/// for instance when an identity step follows the copy.
pub fn to_copyless(t: &Sst) -> Result<Eliminated> {
    to_copyless_with(t, &Limits::default())
}

/// [`to_copyless`] under explicit limits.
pub fn to_copyless_with(t: &Sst, limits: &Limits) -> Result<Eliminated> {
    if let Some(w) = find_diamond(t) {
        let steps: Vec<String> = w
            .run
            .symbols
            .iter()
            .zip(w.run.states.windows(2))
            .map(|(s, qs)| format!("{} -{}-> {}", qs[0], s, qs[1]))
            .collect();
        let at_output = match &w.output {
            Some(word) => format!(", merged by output `{word}`"),
            None => String::new(),
        };
        return Err(Error::Precondition {
            requirement: Requirement::DiamondFree,
            subject: "machine",
            detail: format!("run [{}]{at_output}", steps.join(", ")),
        });
    }
    let vars = t.vars();
    let m = vars.len();

    // States of `t` that can still reach an output.
    let c = &t.compiled;
    let mut useful: Vec<bool> = c.outputs.iter().map(|o| !o.is_empty()).collect();
    loop {
        let mut changed = false;
        for (q, rows) in c.delta.iter().enumerate() {
            if !useful[q] && rows.iter().flatten().any(|&ti| useful[c.trans[ti].dst]) {
                useful[q] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    // Transitions leaving reachable states towards useful ones.
    let mut reachable = alloc::vec![false; c.delta.len()];
    reachable[c.init] = true;
    let mut stack = alloc::vec![c.init];
    while let Some(q) = stack.pop() {
        for &ti in c.delta[q].iter().flatten() {
            let d = c.trans[ti].dst;
            if !reachable[d] {
                reachable[d] = true;
                stack.push(d);
            }
        }
    }
    let mut needed = alloc::vec![false; c.trans.len()];
    for (q, rows) in c.delta.iter().enumerate() {
        for &ti in rows.iter().flatten() {
            needed[ti] = reachable[q] && useful[c.trans[ti].dst];
        }
    }

    // Decompositions, shared between transitions with equal assignments.
    let mut cache: BTreeMap<&Assignment, Vec<Assignment>> = BTreeMap::new();
    let mut members: Vec<Vec<Assignment>> = Vec::with_capacity(t.transitions().len());
    for (ti, tr) in t.transitions().iter().enumerate() {
        if !needed[ti] {
            members.push(Vec::new());
            continue;
        }
        if !cache.contains_key(&tr.assign) {
            let d = decompose(&tr.assign)?;
            if d.len() > limits.max_choices {
                return Err(Error::budget(
                    BudgetKind::Choices,
                    limits.max_choices,
                    format!("decomposition of `{tr}` has {} members", d.len()),
                ));
            }
            cache.insert(&tr.assign, d.members.into_iter().collect());
        }
        members.push(cache[&tr.assign].clone());
    }
    let killed: Vec<Vec<Vec<bool>>> = t
        .transitions()
        .iter()
        .zip(&members)
        .map(|(tr, ms)| {
            ms.iter()
                .map(|beta| {
                    let k = killed_by(&tr.assign, beta);
                    vars.iter().map(|v| k.contains(v)).collect()
                })
                .collect()
        })
        .collect();

    // Forward exploration over every step, tainting readers of dead variables.
    let root: Node = (c.init, alloc::vec![false; m]);
    let mut nodes = alloc::vec![root.clone()];
    let mut index: BTreeMap<Node, usize> = BTreeMap::new();
    index.insert(root, 0);
    let mut edges: Vec<Edge> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        let (q, dead) = nodes[n].clone();
        for row in &c.delta[q] {
            for &ti in row {
                for (mi, beta) in members[ti].iter().enumerate() {
                    let mut next = killed[ti][mi].clone();
                    let mut strict = true;
                    for (yi, y) in vars.iter().enumerate() {
                        if reads_dead(beta.get(y).expect("total assignment"), &dead, t) {
                            next[yi] = true;
                            strict = false;
                        }
                    }
                    let key = (c.trans[ti].dst, next);
                    let dst = match index.get(&key) {
                        Some(&i) => i,
                        None => {
                            if nodes.len() >= limits.max_states {
                                return Err(Error::budget(
                                    BudgetKind::States,
                                    limits.max_states,
                                    format!("{} (state, dead set) pairs explored", nodes.len()),
                                ));
                            }
                            index.insert(key.clone(), nodes.len());
                            nodes.push(key);
                            queue.push_back(nodes.len() - 1);
                            nodes.len() - 1
                        }
                    };
                    edges.push(Edge {
                        src: n,
                        trans: ti,
                        member: mi,
                        dst,
                        strict,
                    });
                }
            }
        }
    }

    let outputs: Vec<BTreeSet<Word>> = nodes
        .iter()
        .map(|(q, dead)| {
            t.outputs_of(&t.states()[*q])
                .map(|ws| {
                    ws.iter()
                        .filter(|w| !reads_dead(w, dead, t))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default()
        })
        .collect();

    // Nodes from which some output is reachable.
    let mut incoming: Vec<Vec<usize>> = alloc::vec![Vec::new(); nodes.len()];
    for e in &edges {
        incoming[e.dst].push(e.src);
    }
    let mut live: Vec<bool> = outputs.iter().map(|o| !o.is_empty()).collect();
    let mut stack: Vec<usize> = (0..nodes.len()).filter(|&i| live[i]).collect();
    while let Some(n) = stack.pop() {
        for &src in &incoming[n] {
            if !live[src] {
                live[src] = true;
                stack.push(src);
            }
        }
    }

    // Keep the part reachable through kept steps.
    let kept: Vec<&Edge> = edges.iter().filter(|e| e.strict || live[e.dst]).collect();
    let mut outgoing: Vec<Vec<&Edge>> = alloc::vec![Vec::new(); nodes.len()];
    for e in &kept {
        outgoing[e.src].push(e);
    }
    let mut order = alloc::vec![0usize];
    let mut reached = alloc::vec![false; nodes.len()];
    reached[0] = true;
    let mut i = 0;
    while i < order.len() {
        for e in &outgoing[order[i]] {
            if !reached[e.dst] {
                reached[e.dst] = true;
                order.push(e.dst);
            }
        }
        i += 1;
    }

    let names: BTreeMap<usize, StateId> = order
        .iter()
        .map(|&n| {
            let (q, dead) = &nodes[n];
            (n, StateId::new(&dead_name(&t.states()[*q], dead, vars)))
        })
        .collect();
    let transitions = kept
        .iter()
        .filter(|e| reached[e.src])
        .map(|e| Transition {
            src: names[&e.src].clone(),
            symbol: t.transitions()[e.trans].symbol.clone(),
            assign: members[e.trans][e.member].clone(),
            dst: names[&e.dst].clone(),
        })
        .collect();
    let output_rules = order
        .iter()
        .map(|&n| OutputRule {
            state: names[&n].clone(),
            words: outputs[n].clone(),
        })
        .collect();
    let machine = Sst::new(SstParts {
        input: t.input().to_vec(),
        output: t.output().to_vec(),
        states: order.iter().map(|n| names[n].clone()).collect(),
        initial: Some(names[&0].clone()),
        vars: vars.to_vec(),
        transitions,
        outputs: output_rules,
    })?;
    let states = order
        .iter()
        .map(|&n| {
            let (q, dead) = &nodes[n];
            let vars = vars
                .iter()
                .zip(dead)
                .filter(|(_, &d)| d)
                .map(|(v, _)| v.clone())
                .collect();
            (t.states()[*q].clone(), DeadSet { vars })
        })
        .collect();
    Ok(Eliminated { machine, states })
}

/// The composite of two machines and its copyless conversion.
#[derive(Clone, Debug)]
pub struct Pipeline {
    /// The composite, copyful in general.
    pub composite: Composite,
    /// The copyless conversion of the composite.
    pub eliminated: Eliminated,
}

/// Composes two copyless machines and removes the copies from the composite.
///
/// Deterministic inputs go through the deterministic composition, giving a
/// functional copyless machine; otherwise the nondeterministic one is used.
pub fn compose_and_eliminate(t12: &Sst, t23: &Sst) -> Result<Pipeline> {
    compose_and_eliminate_with(t12, t23, &Limits::default())
}

/// [`compose_and_eliminate`] under explicit limits.
pub fn compose_and_eliminate_with(t12: &Sst, t23: &Sst, limits: &Limits) -> Result<Pipeline> {
    let composite = if t12.is_deterministic() && t23.is_deterministic() {
        compose_dsst_with(t12, t23, limits)?
    } else {
        compose_nsst_with(t12, t23, limits)?
    };
    let eliminated = to_copyless_with(&composite.machine, limits)?;
    Ok(Pipeline {
        composite,
        eliminated,
    })
}
