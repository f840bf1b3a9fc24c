//! Copylessness, flow graphs and diamond detection.
//!
//! A run's flow graph has one layer of variables per position and an edge
//! `(k-1, x) → (k, y)` for every occurrence of `x` in `αk(y)`. A diamond is a
//! pair of vertices joined by two distinct paths; parallel edges count. When
//! a run ends in an accepting state its output word is treated as one more
//! vertex fed once by every variable it mentions, so merging two copies in
//! the output is a diamond as well.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use num_bigint::BigUint;

use crate::error::{BudgetKind, Error, Result};
use crate::machine::{Atom, Sst, Transition};
use crate::name::{StateId, Var};
use crate::semantics::Run;
use crate::word::{Assignment, Register, Word};
use crate::Limits;

/// True if no variable of `vars` occurs twice in `w`.
pub fn is_copyless_word<V: Register>(w: &Word<V>, vars: &BTreeSet<V>) -> bool {
    let mut seen = BTreeSet::new();
    w.vars()
        .filter(|v| vars.contains(*v))
        .all(|v| seen.insert(v))
}

/// A variable used more than once across the right-hand sides of `a`.
pub fn copied_variable<V: Register>(a: &Assignment<V>) -> Option<V> {
    let mut seen = BTreeSet::new();
    a.iter()
        .flat_map(|(_, w)| w.vars())
        .find(|v| !seen.insert(*v))
        .cloned()
}

/// True if the concatenation of all right-hand sides is copyless.
pub fn is_copyless_assignment<V: Register>(a: &Assignment<V>) -> bool {
    copied_variable(a).is_none()
}

/// The first transition, in canonical order, whose assignment is copyful.
pub fn copyful_transition(t: &Sst) -> Option<&Transition> {
    t.transitions()
        .iter()
        .find(|tr| !is_copyless_assignment(&tr.assign))
}

/// True if every transition assignment is copyless.
pub fn is_copyless_sst(t: &Sst) -> bool {
    copyful_transition(t).is_none()
}

/// The layered flow graph of a sequence of assignments.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowGraph<V = Var> {
    vars: Vec<V>,
    layers: usize,
    /// `steps[k]` maps (source index in layer k, target index in layer k+1) to a multiplicity.
    steps: Vec<BTreeMap<(usize, usize), usize>>,
    sink: Option<BTreeSet<usize>>,
}

/// Builds `G(α1 … αn)`. All assignments must share one domain.
pub fn flow_graph<V: Register>(assigns: &[Assignment<V>]) -> Result<FlowGraph<V>> {
    let vars: Vec<V> = match assigns.first() {
        Some(a) => a.domain().cloned().collect(),
        None => Vec::new(),
    };
    let index: BTreeMap<&V, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let mut steps = Vec::with_capacity(assigns.len());
    for a in assigns {
        if !a.domain().eq(vars.iter()) {
            return Err(Error::VariableSetMismatch);
        }
        let mut edges = BTreeMap::new();
        for (y, w) in a.iter() {
            for x in w.vars() {
                let xi = *index
                    .get(x)
                    .ok_or_else(|| Error::UnknownVariable(format!("{x}")))?;
                *edges.entry((xi, index[y])).or_insert(0) += 1;
            }
        }
        steps.push(edges);
    }
    Ok(FlowGraph {
        layers: assigns.len() + 1,
        vars,
        steps,
        sink: None,
    })
}

impl<V: Register> FlowGraph<V> {
    /// Number of layers, one more than the number of assignments.
    pub fn layer_count(&self) -> usize {
        self.layers
    }

    /// Variables of every layer, in ascending order.
    pub fn vars(&self) -> &[V] {
        &self.vars
    }

    /// Edges as `(layer, source, target, multiplicity)`, the target living in `layer + 1`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, &V, &V, usize)> + '_ {
        self.steps.iter().enumerate().flat_map(move |(k, edges)| {
            edges
                .iter()
                .map(move |(&(x, y), &m)| (k, &self.vars[x], &self.vars[y], m))
        })
    }

    /// Sum of all multiplicities, sink edges excluded.
    pub fn edge_count(&self) -> usize {
        self.steps.iter().flat_map(|e| e.values()).sum()
    }

    /// Adds an output vertex after the last layer, fed once by each distinct variable of `w`.
    pub fn with_output(mut self, w: &Word<V>) -> Self {
        let sink = w
            .vars()
            .filter_map(|v| self.vars.iter().position(|u| u == v))
            .collect();
        self.sink = Some(sink);
        self
    }

    /// True if the graph has an output vertex.
    pub fn has_output(&self) -> bool {
        self.sink.is_some()
    }

    /// Graphviz text, as a debugging aid.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph flow {\n  rankdir=LR;\n");
        for k in 0..self.layers {
            for v in &self.vars {
                let _ = writeln!(out, "  \"{k}:{v}\" [label=\"{v}\"];");
            }
        }
        for (k, x, y, m) in self.edges() {
            for _ in 0..m {
                let _ = writeln!(out, "  \"{k}:{x}\" -> \"{}:{y}\";", k + 1);
            }
        }
        if let Some(sink) = &self.sink {
            let _ = writeln!(out, "  out [shape=box];");
            for &x in sink {
                let _ = writeln!(out, "  \"{}:{}\" -> out;", self.layers - 1, self.vars[x]);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// True if two vertices are joined by at least two distinct paths.
///
/// Path counts from every source vertex are propagated layer by layer and
/// capped at 2.
pub fn has_diamond<V: Register>(g: &FlowGraph<V>) -> bool {
    let m = g.vars.len();
    for start in 0..g.layers {
        for u in 0..m {
            let mut counts = alloc::vec![0u8; m];
            counts[u] = 1;
            for edges in &g.steps[start..] {
                let mut next = alloc::vec![0u8; m];
                for (&(x, y), &mult) in edges {
                    if counts[x] > 0 {
                        let add = (counts[x] as usize * mult).min(2) as u8;
                        next[y] = (next[y] + add).min(2);
                    }
                }
                if next.iter().any(|&c| c >= 2) {
                    return true;
                }
                counts = next;
            }
            if let Some(sink) = &g.sink {
                let total: usize = sink.iter().map(|&x| counts[x] as usize).sum();
                if total >= 2 {
                    return true;
                }
            }
        }
    }
    false
}

/// True if `G(α α)` has no diamond.
pub fn is_diamond_free_assignment<V: Register>(a: &Assignment<V>) -> bool {
    let g = flow_graph(&[a.clone(), a.clone()]).expect("an assignment shares its own domain");
    !has_diamond(&g)
}

/// A reachable node of the divergence fixpoint: a state together with the
/// unordered pairs of distinct variables that hold copies of one common value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct DivergenceState {
    /// State of the analysed machine.
    pub state: StateId,
    /// Pairs `(u, v)` with `u < v` in declared variable order.
    pub pairs: BTreeSet<(Var, Var)>,
}

/// A run whose flow graph has a diamond.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiamondWitness {
    /// The offending run.
    pub run: Run,
    /// The output word whose vertex closes the diamond, if the merge happens at output.
    pub output: Option<Word>,
}

impl DiamondWitness {
    /// The flow graph of the witness, with its output vertex when relevant.
    pub fn flow_graph(&self) -> FlowGraph {
        let g =
            flow_graph(&self.run.assigns).expect("run assignments share the machine's variables");
        match &self.output {
            Some(w) => g.with_output(w),
            None => g,
        }
    }
}

type Pairs = Vec<(u32, u32)>;

fn pair(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn distinct_vars(word: &[Atom]) -> (Vec<u32>, bool) {
    let mut vars: Vec<u32> = word
        .iter()
        .filter_map(|a| match *a {
            Atom::Var(v) => Some(v),
            Atom::Sym(_) => None,
        })
        .collect();
    let n = vars.len();
    vars.sort_unstable();
    vars.dedup();
    let repeated = vars.len() != n;
    (vars, repeated)
}

/// Merge check and successor pairs for one transition; `None` on a diamond.
fn advance(rhs: &[Vec<Atom>], pairs: &Pairs, m: usize) -> Option<Pairs> {
    let mut targets: Vec<Vec<u32>> = alloc::vec![Vec::new(); m];
    let mut reads: Vec<Vec<u32>> = Vec::with_capacity(m);
    for (y, word) in rhs.iter().enumerate() {
        let (vars, repeated) = distinct_vars(word);
        if repeated {
            return None;
        }
        for &x in &vars {
            targets[x as usize].push(y as u32);
        }
        reads.push(vars);
    }
    for &(u, v) in pairs {
        if reads
            .iter()
            .any(|r| r.binary_search(&u).is_ok() && r.binary_search(&v).is_ok())
        {
            return None;
        }
    }
    let mut next = BTreeSet::new();
    for ts in &targets {
        for (i, &a) in ts.iter().enumerate() {
            for &b in &ts[i + 1..] {
                next.insert(pair(a, b));
            }
        }
    }
    for &(u, v) in pairs {
        for &a in &targets[u as usize] {
            for &b in &targets[v as usize] {
                // a == b was ruled out by the merge check above.
                next.insert(pair(a, b));
            }
        }
    }
    Some(next.into_iter().collect())
}

fn output_merges(word: &[Atom], pairs: &Pairs) -> bool {
    let (vars, _) = distinct_vars(word);
    pairs
        .iter()
        .any(|&(u, v)| vars.binary_search(&u).is_ok() && vars.binary_search(&v).is_ok())
}

struct Fixpoint {
    nodes: Vec<(usize, Pairs)>,
    /// Parent node and transition index, `None` for the root.
    parent: Vec<Option<(usize, usize)>>,
    witness: Option<(usize, Option<usize>, Option<usize>)>,
}

/// Explores reachable (state, pairs) nodes breadth first and stops at the first diamond.
///
/// A witness is (node, transition that merges, output word index that merges).
fn explore(t: &Sst) -> Fixpoint {
    let c = &t.compiled;
    let m = t.vars().len();
    let root = (c.init, Pairs::new());
    let mut fp = Fixpoint {
        nodes: alloc::vec![root.clone()],
        parent: alloc::vec![None],
        witness: None,
    };
    let mut index: BTreeMap<(usize, Pairs), usize> = BTreeMap::new();
    index.insert(root, 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        let (q, pairs) = fp.nodes[n].clone();
        for (wi, word) in c.outputs[q].iter().enumerate() {
            if output_merges(word, &pairs) {
                fp.witness = Some((n, None, Some(wi)));
                return fp;
            }
        }
        for row in &c.delta[q] {
            for &ti in row {
                let tr = &c.trans[ti];
                let Some(next) = advance(&tr.rhs, &pairs, m) else {
                    fp.witness = Some((n, Some(ti), None));
                    return fp;
                };
                let key = (tr.dst, next);
                if !index.contains_key(&key) {
                    index.insert(key.clone(), fp.nodes.len());
                    fp.nodes.push(key);
                    fp.parent.push(Some((n, ti)));
                    queue.push_back(fp.nodes.len() - 1);
                }
            }
        }
    }
    fp
}

/// Decides whether every run, output included, is diamond-free.
///
/// The search tracks which pairs of distinct variables currently hold copies
/// of one common value. The node space is bounded by `|Q|·2^(m(m-1)/2)`, so
/// the search always terminates.
pub fn is_diamond_free_sst(t: &Sst) -> bool {
    explore(t).witness.is_none()
}

/// A shortest run (plus output word, if the merge happens there) exhibiting a diamond.
pub fn find_diamond(t: &Sst) -> Option<DiamondWitness> {
    let fp = explore(t);
    let (node, trans, output) = fp.witness?;
    let mut path = Vec::new();
    if let Some(ti) = trans {
        path.push(ti);
    }
    let mut cur = node;
    while let Some((p, ti)) = fp.parent[cur] {
        path.push(ti);
        cur = p;
    }
    path.reverse();
    let run = t.run_from_path(&path);
    let output = output.map(|wi| {
        t.outputs_of(run.last_state())
            .and_then(|ws| ws.iter().nth(wi))
            .cloned()
            .expect("witness output index is in range")
    });
    Some(DiamondWitness { run, output })
}

/// The reachable nodes of the divergence fixpoint, or `None` if a diamond is reachable.
pub fn divergence_states(t: &Sst) -> Option<Vec<DivergenceState>> {
    let fp = explore(t);
    if fp.witness.is_some() {
        return None;
    }
    let vars = t.vars();
    Some(
        fp.nodes
            .into_iter()
            .map(|(q, pairs)| DivergenceState {
                state: t.states()[q].clone(),
                pairs: pairs
                    .into_iter()
                    .map(|(u, v)| (vars[u as usize].clone(), vars[v as usize].clone()))
                    .collect(),
            })
            .collect(),
    )
}

/// Checks every run of length at most `max_len` by building its flow graph.
pub fn is_diamond_free_bounded(t: &Sst, max_len: usize) -> Result<bool> {
    Ok(find_diamond_bounded(t, max_len, &Limits::default())?.is_none())
}

/// The first run, in depth-first transition order, of length at most
/// `max_len` whose flow graph has a diamond.
pub fn find_diamond_bounded(
    t: &Sst,
    max_len: usize,
    limits: &Limits,
) -> Result<Option<DiamondWitness>> {
    let mut path = Vec::new();
    let mut visited = 0u64;
    bounded_visit(t, t.compiled.init, max_len, limits, &mut path, &mut visited)
}

fn bounded_visit(
    t: &Sst,
    q: usize,
    depth: usize,
    limits: &Limits,
    path: &mut Vec<usize>,
    visited: &mut u64,
) -> Result<Option<DiamondWitness>> {
    *visited += 1;
    if *visited > limits.max_runs {
        return Err(Error::budget(
            BudgetKind::Runs,
            limits.max_runs,
            format!("{} runs checked", *visited - 1),
        ));
    }
    let run = t.run_from_path(path);
    let g = flow_graph(&run.assigns)?;
    if has_diamond(&g) {
        return Ok(Some(DiamondWitness { run, output: None }));
    }
    // An empty run cannot merge anything at its output: every variable feeds the output vertex once.
    if let (Some(words), false) = (t.outputs_of(&t.states()[q]), run.is_empty()) {
        for w in words {
            if has_diamond(&g.clone().with_output(w)) {
                return Ok(Some(DiamondWitness {
                    run,
                    output: Some(w.clone()),
                }));
            }
        }
    }
    if depth == 0 {
        return Ok(None);
    }
    for row in &t.compiled.delta[q] {
        for &ti in row {
            path.push(ti);
            let found = bounded_visit(
                t,
                t.compiled.trans[ti].dst,
                depth - 1,
                limits,
                path,
                visited,
            )?;
            path.pop();
            if found.is_some() {
                return Ok(found);
            }
        }
    }
    Ok(None)
}

/// Number of copyless strings over `n` letters: `Σ_{k=0}^{n} n!/(n-k)!`.
pub fn copyless_count(n: u32) -> BigUint {
    let mut total = BigUint::from(0u32);
    let mut term = BigUint::from(1u32);
    for k in 0..=n {
        total += &term;
        term *= n - k;
    }
    total
}

/// `⌊e · n!⌋`, evaluated exactly from rational bounds on the series for `e`.
///
/// With `S_K = Σ_{k≤K} n!/k!`, the tail satisfies `0 < e·n! − S_K < n!/(K!·K)`;
/// `K` grows until both bounds have the same floor.
pub fn floor_e_factorial(n: u32) -> BigUint {
    let n_fact: BigUint = (1..=n).map(BigUint::from).product();
    let mut k_max = n + 2;
    loop {
        let k_fact: BigUint = (1..=k_max).map(BigUint::from).product();
        // S_K · K! = Σ_k n! · K!/k!
        let mut numer = BigUint::from(0u32);
        let mut ratio = BigUint::from(1u32); // K!/k! for k = K down to 0
        for k in (0..=k_max).rev() {
            numer += &n_fact * &ratio;
            ratio *= BigUint::from(k.max(1));
        }
        let lower = &numer / &k_fact;
        // Upper bound: (numer · K + n!) / (K! · K)
        let upper = (&numer * k_max + &n_fact) / (&k_fact * k_max);
        if lower == upper {
            return lower;
        }
        k_max += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Sst;

    fn w(text: &str) -> Word {
        Word::parse(text, |t| {
            t.starts_with('z') || ["x", "y", "u", "v"].contains(&t)
        })
    }

    fn asg(pairs: &[(&str, &str)]) -> Assignment {
        Assignment::from_pairs(pairs.iter().map(|(v, rhs)| (Var::new(v), w(rhs))))
    }

    fn gamma2() -> Assignment {
        asg(&[
            ("z1", "z3"),
            ("z2", "a b z4"),
            ("z3", "z3"),
            ("z4", "a b z4"),
        ])
    }

    #[test]
    fn copyless_words_and_assignments() {
        let x: BTreeSet<Var> = [Var::new("x")].into();
        assert!(!is_copyless_word(&w("x a x"), &x));
        assert!(is_copyless_word(&w(""), &x));
        assert!(!is_copyless_assignment(&gamma2()));
        assert_eq!(copied_variable(&gamma2()), Some(Var::new("z3")));
        assert!(is_copyless_assignment(&asg(&[("z1", ""), ("z2", "a b")])));
    }

    #[test]
    fn gamma2_flow_graph() {
        let g = flow_graph(&[gamma2(), gamma2()]).unwrap();
        assert_eq!(g.layer_count(), 3);
        assert_eq!(g.edge_count(), 8);
        assert!(!has_diamond(&g));
        assert!(is_diamond_free_assignment(&gamma2()));
        assert!(!is_diamond_free_assignment(&asg(&[("x", "x a x")])));
        assert!(has_diamond(
            &flow_graph(&[asg(&[("x", "y y"), ("y", "")])]).unwrap()
        ));
        let empty = flow_graph::<Var>(&[]).unwrap();
        assert_eq!(empty.layer_count(), 1);
        assert!(!has_diamond(&empty));
    }

    #[test]
    fn merging_later_is_a_diamond() {
        let t = Sst::builder()
            .input(["a", "b"])
            .states(["q0", "q1", "q2"])
            .initial("q0")
            .vars(["x", "y"])
            .transition("q0", "a", "q1", &[("x", "x"), ("y", "x")])
            .transition("q1", "b", "q2", &[("x", "x y"), ("y", "")])
            .build()
            .unwrap();
        for tr in t.transitions() {
            assert!(is_diamond_free_assignment(&tr.assign));
        }
        assert!(!is_diamond_free_sst(&t));
        let witness = find_diamond(&t).unwrap();
        assert_eq!(witness.run.len(), 2);
        assert!(has_diamond(&witness.flow_graph()));
        assert!(!is_diamond_free_bounded(&t, 2).unwrap());
        assert!(is_diamond_free_bounded(&t, 1).unwrap());
    }

    #[test]
    fn output_merge_is_a_diamond() {
        let t = Sst::builder()
            .input(["a"])
            .output(["a"])
            .states(["q0", "q1"])
            .initial("q0")
            .vars(["x", "y"])
            .transition("q0", "a", "q1", &[("x", "x"), ("y", "x")])
            .output_word("q1", "x y")
            .build()
            .unwrap();
        assert!(!is_diamond_free_sst(&t));
        let witness = find_diamond(&t).unwrap();
        assert!(witness.output.is_some());
        assert!(has_diamond(&witness.flow_graph()));
        assert!(!is_diamond_free_bounded(&t, 1).unwrap());
    }

    #[test]
    fn counts() {
        let expected = [1u32, 2, 5, 16, 65, 326, 1957];
        for (n, &e) in expected.iter().enumerate() {
            assert_eq!(copyless_count(n as u32), BigUint::from(e));
        }
        for n in 1..=12 {
            assert_eq!(copyless_count(n), floor_e_factorial(n));
        }
        assert_eq!(floor_e_factorial(3), BigUint::from(16u32));
    }
}
