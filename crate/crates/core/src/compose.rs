//! Composition of copyless machines through state and shape summaries.
//!
//! For `T12` (states `Q`, variables `X`) feeding `T23` (states `P`,
//! variables `Y`), the composite simulates `T12` and records, for every
//! `p ∈ P` and `x ∈ X`,
//!
//! * `f(p, x)`: the `T23` state reached by reading the current content of `x` from `p`;
//! * `g(p, x, y)`: the shape of `y` after that read, a copyless word over `Y`
//!   and the composite variables `z^{p,x}_{y,b}`, which hold the symbol
//!   segments the shape abstracts away.
//!
//! Summaries left undefined by a partial `T23` are kept as `None` entries.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;

use crate::error::{BudgetKind, Error, Requirement, Result};
use crate::flow::{copyful_transition, floor_e_factorial};
use crate::machine::{OutputRule, Sst, SstParts, Transition};
use crate::name::{StateId, Var};
use crate::word::{Assignment, Item, Word};
use crate::Limits;

/// The composite variable `z^{p,x}_{y,b}`, by declared positions of `p`, `x` and `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZVar {
    /// State of `T23`.
    pub p: usize,
    /// Variable of `T12`.
    pub x: usize,
    /// Variable of `T23`.
    pub y: usize,
    /// 0 for the segment before `y`, 1 for the trailing segment.
    pub b: u8,
}

/// A register of a shape: a `T23` variable or a composite variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reg {
    /// The `T23` variable at this position.
    Y(usize),
    /// A composite variable.
    Z(ZVar),
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reg::Y(y) => write!(f, "y#{y}"),
            Reg::Z(z) => write!(f, "z#{}.{}.{}.{}", z.p, z.x, z.y, z.b),
        }
    }
}

/// One word per `T23` variable, in declared order.
pub type Shape = Vec<Word<Reg>>;

/// `f : P × X → P`, with `None` where reading the variable gets stuck.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateSummary {
    nx: usize,
    entries: Vec<Option<usize>>,
}

impl StateSummary {
    /// `f(p, x)`.
    pub fn get(&self, p: usize, x: usize) -> Option<usize> {
        self.entries[p * self.nx + x]
    }
}

/// `g : P × X × Y → ⟨Y ∪ Z⟩`, with `None` where reading the variable gets stuck.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShapeSummary {
    nx: usize,
    entries: Vec<Option<Shape>>,
}

impl ShapeSummary {
    /// `g(p, x, ·)`.
    pub fn get(&self, p: usize, x: usize) -> Option<&Shape> {
        self.entries[p * self.nx + x].as_ref()
    }
}

/// A state `(q, f, g)` of the composite.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeState {
    /// Simulated state of `T12`, by position.
    pub q: usize,
    /// State summary.
    pub f: StateSummary,
    /// Shape summary.
    pub g: ShapeSummary,
}

/// The composite machine together with the meaning of its states and variables.
#[derive(Clone, Debug)]
pub struct Composite {
    /// The composite; state `ri` stands for `states[i]`.
    pub machine: Sst,
    /// Summaries of each state, in the machine's state order.
    pub states: Vec<CompositeState>,
    /// Composite variables, in the machine's variable order.
    pub zvars: Vec<ZVar>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum XAtom {
    Sym(usize),
    Var(usize),
}

/// A pair of `T23` state and assignment summary produced by [`Composer::summarize_nondet`].
pub type SummaryChoice = BTreeSet<(usize, Shape)>;

/// The summary operators for one pair of machines.
#[derive(Clone, Debug)]
pub struct Composer<'a> {
    t12: &'a Sst,
    t23: &'a Sst,
    np: usize,
    nx: usize,
    ny: usize,
    /// `delta[p][s]` lists `(p', β)` with `β` over `Y` and `T23` output symbols.
    delta: Vec<Vec<Vec<(usize, Shape)>>>,
    /// Right-hand sides of `T12`'s transitions, in its canonical order.
    alphas: Vec<Vec<Vec<XAtom>>>,
    /// `T12` output words per state.
    out12: Vec<Vec<Vec<XAtom>>>,
    /// `T23` output words per state.
    out23: Vec<Vec<Word<Reg>>>,
    znames: Vec<Var>,
}

fn subst(acc: &[Word<Reg>], w: &Word<Reg>) -> Word<Reg> {
    let mut out = Word::empty();
    for item in w.items() {
        match item {
            Item::Var(Reg::Y(y)) => out.extend_from(&acc[*y]),
            _ => out.push(item.clone()),
        }
    }
    out
}

fn zrank(z: ZVar, nx: usize, ny: usize) -> usize {
    ((z.p * nx + z.x) * ny + z.y) * 2 + z.b as usize
}

fn z_prefix(taken: &BTreeSet<String>, count: usize) -> String {
    let mut prefix = String::from("z");
    while (1..=count).any(|i| taken.contains(&format!("{prefix}{i}"))) {
        prefix.push('_');
    }
    prefix
}

impl<'a> Composer<'a> {
    /// Checks that both machines are copyless and that `T12`'s output alphabet is read by `T23`.
    pub fn new(t12: &'a Sst, t23: &'a Sst) -> Result<Composer<'a>> {
        for (t, subject) in [(t12, "first machine"), (t23, "second machine")] {
            if let Some(tr) = copyful_transition(t) {
                return Err(Error::Precondition {
                    requirement: Requirement::Copyless,
                    subject,
                    detail: format!("transition `{tr}`"),
                });
            }
        }
        let mut sym_map = BTreeMap::new();
        for s in t12.output() {
            let i = t23.input_index(s).ok_or_else(|| Error::Precondition {
                requirement: Requirement::AlphabetCompatible,
                subject: "first machine",
                detail: format!("output symbol `{s}` is not read by the second machine"),
            })?;
            sym_map.insert(s.clone(), i);
        }
        let np = t23.states().len();
        let nx = t12.vars().len();
        let ny = t23.vars().len();
        let y_word = |w: &Word| -> Word<Reg> {
            w.map_vars(|v| Reg::Y(t23.var_index(v).expect("validated variable")))
        };
        let mut delta = alloc::vec![alloc::vec![Vec::new(); t23.input().len()]; np];
        for tr in t23.transitions() {
            let p = t23.state_index(&tr.src).expect("validated state");
            let s = t23.input_index(&tr.symbol).expect("validated symbol");
            let beta = t23
                .vars()
                .iter()
                .map(|y| y_word(tr.assign.get(y).expect("total assignment")))
                .collect();
            delta[p][s].push((t23.state_index(&tr.dst).expect("validated state"), beta));
        }
        let x_word = |w: &Word| -> Vec<XAtom> {
            w.items()
                .iter()
                .map(|item| match item {
                    Item::Sym(s) => XAtom::Sym(sym_map[s]),
                    Item::Var(v) => XAtom::Var(t12.var_index(v).expect("validated variable")),
                })
                .collect()
        };
        let alphas = t12
            .transitions()
            .iter()
            .map(|tr| {
                t12.vars()
                    .iter()
                    .map(|x| x_word(tr.assign.get(x).expect("total assignment")))
                    .collect()
            })
            .collect();
        let out12 = t12
            .states()
            .iter()
            .map(|q| {
                t12.outputs_of(q)
                    .map(|ws| ws.iter().map(&x_word).collect())
                    .unwrap_or_default()
            })
            .collect();
        let out23 = t23
            .states()
            .iter()
            .map(|p| {
                t23.outputs_of(p)
                    .map(|ws| ws.iter().map(&y_word).collect())
                    .unwrap_or_default()
            })
            .collect();
        let count = 2 * np * nx * ny;
        let taken: BTreeSet<String> = t12
            .input()
            .iter()
            .chain(t23.output())
            .map(|s| s.as_str().to_string())
            .collect();
        let prefix = z_prefix(&taken, count);
        let znames = (1..=count)
            .map(|i| Var::new(&format!("{prefix}{i}")))
            .collect();
        Ok(Composer {
            t12,
            t23,
            np,
            nx,
            ny,
            delta,
            alphas,
            out12,
            out23,
            znames,
        })
    }

    /// Every composite variable, in naming order.
    pub fn zvars(&self) -> Vec<ZVar> {
        let mut out = Vec::with_capacity(self.znames.len());
        for p in 0..self.np {
            for x in 0..self.nx {
                for y in 0..self.ny {
                    for b in 0..2 {
                        out.push(ZVar { p, x, y, b });
                    }
                }
            }
        }
        out
    }

    /// The printed name of `z`: `z1, z2, …` in `(p, x, y, b)` order.
    pub fn zname(&self, z: ZVar) -> &Var {
        &self.znames[zrank(z, self.nx, self.ny)]
    }

    /// Inverse of [`Composer::zname`].
    pub fn zvar_of(&self, v: &Var) -> Option<ZVar> {
        let rank = self.znames.iter().position(|n| n == v)?;
        let b = (rank % 2) as u8;
        let rest = rank / 2;
        let y = rest % self.ny;
        let rest = rest / self.ny;
        Some(ZVar {
            p: rest / self.nx,
            x: rest % self.nx,
            y,
            b,
        })
    }

    /// Renders a shape word with `T23` variable names and composite variable names.
    pub fn render(&self, w: &Word<Reg>) -> Word {
        w.map_vars(|r| match *r {
            Reg::Y(y) => self.t23.vars()[y].clone(),
            Reg::Z(z) => self.zname(z).clone(),
        })
    }

    /// Renders a per-`y` map as an assignment keyed by `T23` variable names.
    pub fn render_shape(&self, h: &[Word<Reg>]) -> Assignment {
        Assignment::from_pairs(
            self.t23
                .vars()
                .iter()
                .zip(h)
                .map(|(y, w)| (y.clone(), self.render(w))),
        )
    }

    /// Renders the slice produced by [`Composer::assignment_of`].
    pub fn render_slice(&self, slice: &[(ZVar, Word<Reg>)]) -> Assignment {
        Assignment::from_pairs(
            slice
                .iter()
                .map(|(z, w)| (self.zname(*z).clone(), self.render(w))),
        )
    }

    /// `f0(p, x) = p`.
    pub fn initial_state_summary(&self) -> StateSummary {
        StateSummary {
            nx: self.nx,
            entries: (0..self.np)
                .flat_map(|p| (0..self.nx).map(move |_| Some(p)))
                .collect(),
        }
    }

    /// `g0(p, x, y) = y`.
    pub fn initial_shape_summary(&self) -> ShapeSummary {
        let identity: Shape = (0..self.ny).map(|y| Word::var(Reg::Y(y))).collect();
        ShapeSummary {
            nx: self.nx,
            entries: alloc::vec![Some(identity); self.np * self.nx],
        }
    }

    /// `(q0, f0, g0)`.
    pub fn initial_state(&self) -> CompositeState {
        CompositeState {
            q: self
                .t12
                .state_index(self.t12.initial())
                .expect("validated state"),
            f: self.initial_state_summary(),
            g: self.initial_shape_summary(),
        }
    }

    fn encode(&self, xw: &Word) -> Result<Vec<XAtom>> {
        xw.items()
            .iter()
            .map(|item| match item {
                Item::Sym(s) => self
                    .t23
                    .input_index(s)
                    .map(XAtom::Sym)
                    .ok_or_else(|| Error::UnknownSymbol(s.to_string())),
                Item::Var(v) => self
                    .t12
                    .var_index(v)
                    .map(XAtom::Var)
                    .ok_or_else(|| Error::UnknownVariable(v.to_string())),
            })
            .collect()
    }

    fn state_pos(&self, p: &StateId) -> Result<usize> {
        self.t23
            .state_index(p)
            .ok_or_else(|| Error::Invalid(format!("`{p}` is not a state of the second machine")))
    }

    fn var_pos(&self, x: &Var) -> Result<usize> {
        self.t12
            .var_index(x)
            .ok_or_else(|| Error::UnknownVariable(x.to_string()))
    }

    fn single_step(&self, p: usize, s: usize) -> Option<&(usize, Shape)> {
        match self.delta[p][s].as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }

    fn undefined(&self, p: usize, xs: &[XAtom], f: &StateSummary) -> Error {
        // Replay to find where the walk got stuck.
        let mut cur = p;
        for a in xs {
            match *a {
                XAtom::Sym(s) => match self.single_step(cur, s) {
                    Some((next, _)) => cur = *next,
                    None => {
                        return Error::UndefinedSummary {
                            state: self.t23.states()[cur].to_string(),
                            symbol: self.t23.input()[s].to_string(),
                        }
                    }
                },
                XAtom::Var(x) => match f.get(cur, x) {
                    Some(next) => cur = next,
                    None => {
                        return Error::UndefinedSummary {
                            state: self.t23.states()[cur].to_string(),
                            symbol: self.t12.vars()[x].to_string(),
                        }
                    }
                },
            }
        }
        Error::UndefinedSummary {
            state: self.t23.states()[cur].to_string(),
            symbol: String::from("ε"),
        }
    }

    fn state_walk(&self, p: usize, xs: &[XAtom], f: &StateSummary) -> Option<usize> {
        let mut cur = p;
        for a in xs {
            cur = match *a {
                XAtom::Sym(s) => self.single_step(cur, s)?.0,
                XAtom::Var(x) => f.get(cur, x)?,
            };
        }
        Some(cur)
    }

    fn assignment_walk(
        &self,
        p: usize,
        xs: &[XAtom],
        f: &StateSummary,
        g: &ShapeSummary,
    ) -> Option<Shape> {
        let mut cur = p;
        let mut acc: Shape = (0..self.ny).map(|y| Word::var(Reg::Y(y))).collect();
        for a in xs {
            let (next, m) = match *a {
                XAtom::Sym(s) => {
                    let (next, beta) = self.single_step(cur, s)?;
                    (*next, beta)
                }
                XAtom::Var(x) => (f.get(cur, x)?, g.get(cur, x)?),
            };
            acc = m.iter().map(|w| subst(&acc, w)).collect();
            cur = next;
        }
        Some(acc)
    }

    fn nondet_walk(
        &self,
        p: usize,
        xs: &[XAtom],
        f: &StateSummary,
        g: &ShapeSummary,
    ) -> SummaryChoice {
        let identity: Shape = (0..self.ny).map(|y| Word::var(Reg::Y(y))).collect();
        let mut configs: SummaryChoice = [(p, identity)].into_iter().collect();
        for a in xs {
            let mut next = BTreeSet::new();
            for (cur, acc) in &configs {
                match *a {
                    XAtom::Sym(s) => {
                        for (dst, beta) in &self.delta[*cur][s] {
                            next.insert((*dst, beta.iter().map(|w| subst(acc, w)).collect()));
                        }
                    }
                    XAtom::Var(x) => {
                        if let (Some(dst), Some(shape)) = (f.get(*cur, x), g.get(*cur, x)) {
                            next.insert((dst, shape.iter().map(|w| subst(acc, w)).collect()));
                        }
                    }
                }
            }
            configs = next;
        }
        configs
    }

    /// The `T23` state reached from `p` by reading `xw`, stepping through `f` at variables.
    pub fn summarize_state(&self, p: &StateId, xw: &Word, f: &StateSummary) -> Result<StateId> {
        let p = self.state_pos(p)?;
        let xs = self.encode(xw)?;
        self.state_walk(p, &xs, f)
            .map(|q| self.t23.states()[q].clone())
            .ok_or_else(|| self.undefined(p, &xs, f))
    }

    /// The combined `T23` update for reading `xw` from `p`: transition
    /// assignments at symbols and shapes `g(p', x, ·)` at variables, composed
    /// left to right.
    pub fn summarize_assignment(
        &self,
        p: &StateId,
        xw: &Word,
        f: &StateSummary,
        g: &ShapeSummary,
    ) -> Result<Shape> {
        let p = self.state_pos(p)?;
        let xs = self.encode(xw)?;
        self.assignment_walk(p, &xs, f, g)
            .ok_or_else(|| self.undefined(p, &xs, f))
    }

    /// All `(p', h)` over the runs of `T23` on `xw` from `p`, for nondeterministic `T23`.
    pub fn summarize_nondet(
        &self,
        p: &StateId,
        xw: &Word,
        f: &StateSummary,
        g: &ShapeSummary,
    ) -> Result<SummaryChoice> {
        let p = self.state_pos(p)?;
        let xs = self.encode(xw)?;
        Ok(self.nondet_walk(p, &xs, f, g))
    }

    fn check_copyless(h: &[Word<Reg>]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for w in h {
            for r in w.vars() {
                if !seen.insert(*r) {
                    return Err(Error::NotCopylessSummary(r.to_string()));
                }
            }
        }
        Ok(())
    }

    fn shape_at(&self, p: usize, x: usize, h: &[Word<Reg>]) -> Result<Shape> {
        Self::check_copyless(h)?;
        Ok(h.iter()
            .enumerate()
            .map(|(y, w)| {
                let mut out = Word::empty();
                for r in w.vars() {
                    if let Reg::Y(yk) = *r {
                        out.push(Item::Var(Reg::Z(ZVar { p, x, y: yk, b: 0 })));
                        out.push(Item::Var(Reg::Y(yk)));
                    }
                }
                out.push(Item::Var(Reg::Z(ZVar { p, x, y, b: 1 })));
                out
            })
            .collect())
    }

    fn slice_at(&self, p: usize, x: usize, h: &[Word<Reg>]) -> Result<Vec<(ZVar, Word<Reg>)>> {
        Self::check_copyless(h)?;
        let mut before: Vec<Word<Reg>> = alloc::vec![Word::empty(); self.ny];
        let mut trailing: Vec<Word<Reg>> = alloc::vec![Word::empty(); self.ny];
        for (y, w) in h.iter().enumerate() {
            let mut segment = Word::empty();
            for item in w.items() {
                match item {
                    Item::Var(Reg::Y(yk)) => {
                        before[*yk] = core::mem::take(&mut segment);
                    }
                    _ => segment.push(item.clone()),
                }
            }
            trailing[y] = segment;
        }
        let mut out = Vec::with_capacity(2 * self.ny);
        for y in 0..self.ny {
            out.push((ZVar { p, x, y, b: 0 }, core::mem::take(&mut before[y])));
            out.push((ZVar { p, x, y, b: 1 }, core::mem::take(&mut trailing[y])));
        }
        Ok(out)
    }

    /// The shape of `h`: each symbol segment replaced by one composite variable indexed `(p, x)`.
    pub fn shape_of(&self, p: &StateId, x: &Var, h: &[Word<Reg>]) -> Result<Shape> {
        self.shape_at(self.state_pos(p)?, self.var_pos(x)?, h)
    }

    /// The update of the `(p, x)` composite variables that fills the shape of `h` back in.
    ///
    /// `z^{p,x}_{y,0}` receives the segment right before `y` in whichever word
    /// contains `y` (ε if none does) and `z^{p,x}_{y,1}` the trailing segment of `h(y)`.
    pub fn assignment_of(
        &self,
        p: &StateId,
        x: &Var,
        h: &[Word<Reg>],
    ) -> Result<Vec<(ZVar, Word<Reg>)>> {
        self.slice_at(self.state_pos(p)?, self.var_pos(x)?, h)
    }

    fn zword(&self, w: &Word<Reg>) -> Word {
        w.filter_map_vars(|r| match *r {
            Reg::Z(z) => Some(self.zname(z).clone()),
            Reg::Y(_) => None,
        })
    }

    fn output_words(&self, state: &CompositeState, nondet: bool) -> BTreeSet<Word> {
        let p0 = self
            .t23
            .state_index(self.t23.initial())
            .expect("validated state");
        let mut words = BTreeSet::new();
        for xs in &self.out12[state.q] {
            let ends: Vec<(usize, Shape)> = if nondet {
                self.nondet_walk(p0, xs, &state.f, &state.g)
                    .into_iter()
                    .collect()
            } else {
                match (
                    self.state_walk(p0, xs, &state.f),
                    self.assignment_walk(p0, xs, &state.f, &state.g),
                ) {
                    (Some(p), Some(h)) => alloc::vec![(p, h)],
                    _ => Vec::new(),
                }
            };
            for (p, h) in ends {
                for out in &self.out23[p] {
                    // Er_Y ∘ h ∘ F23(p)
                    words.insert(self.zword(&subst(&h, out)));
                }
            }
        }
        words
    }

    fn successor(
        &self,
        q_next: usize,
        picks: &[Option<(usize, Shape)>],
    ) -> Result<(CompositeState, Assignment)> {
        let mut f = Vec::with_capacity(picks.len());
        let mut g = Vec::with_capacity(picks.len());
        let mut gamma = BTreeMap::new();
        for (i, pick) in picks.iter().enumerate() {
            let (p, x) = (i / self.nx, i % self.nx);
            match pick {
                Some((dst, h)) => {
                    f.push(Some(*dst));
                    g.push(Some(self.shape_at(p, x, h)?));
                    for (z, w) in self.slice_at(p, x, h)? {
                        gamma.insert(self.zname(z).clone(), self.zword(&w));
                    }
                }
                None => {
                    f.push(None);
                    g.push(None);
                    for y in 0..self.ny {
                        for b in 0..2 {
                            gamma.insert(self.zname(ZVar { p, x, y, b }).clone(), Word::empty());
                        }
                    }
                }
            }
        }
        let next = CompositeState {
            q: q_next,
            f: StateSummary {
                nx: self.nx,
                entries: f,
            },
            g: ShapeSummary {
                nx: self.nx,
                entries: g,
            },
        };
        Ok((next, Assignment::from_pairs(gamma)))
    }

    /// Builds the reachable part of the composite.
    fn build(&self, nondet: bool, limits: &Limits) -> Result<Composite> {
        let c12 = &self.t12.compiled;
        let root = self.initial_state();
        let mut states = alloc::vec![root.clone()];
        let mut index: BTreeMap<CompositeState, usize> = BTreeMap::new();
        index.insert(root, 0);
        let mut queue = VecDeque::from([0usize]);
        let mut edges: Vec<(usize, usize, Assignment, usize)> = Vec::new();
        while let Some(r) = queue.pop_front() {
            let state = states[r].clone();
            let mut emitted = 0usize;
            for (s, row) in c12.delta[state.q].iter().enumerate() {
                for &ti in row {
                    let alpha = &self.alphas[ti];
                    let q_next = c12.trans[ti].dst;
                    let mut options: Vec<Vec<Option<(usize, Shape)>>> =
                        Vec::with_capacity(self.np * self.nx);
                    for p in 0..self.np {
                        for xs in alpha {
                            let opts: Vec<_> = if nondet {
                                self.nondet_walk(p, xs, &state.f, &state.g)
                                    .into_iter()
                                    .map(Some)
                                    .collect()
                            } else {
                                match (
                                    self.state_walk(p, xs, &state.f),
                                    self.assignment_walk(p, xs, &state.f, &state.g),
                                ) {
                                    (Some(d), Some(h)) => alloc::vec![Some((d, h))],
                                    _ => Vec::new(),
                                }
                            };
                            options.push(if opts.is_empty() {
                                alloc::vec![None]
                            } else {
                                opts
                            });
                        }
                    }
                    let product = options
                        .iter()
                        .try_fold(1usize, |acc, o| acc.checked_mul(o.len()))
                        .unwrap_or(usize::MAX);
                    emitted = emitted.saturating_add(product);
                    if emitted > limits.max_choices {
                        return Err(Error::budget(
                            BudgetKind::Choices,
                            limits.max_choices,
                            format!(
                                "state r{r} needs {emitted} or more transitions after {} states; try smaller machines",
                                states.len()
                            ),
                        ));
                    }
                    let mut digits = alloc::vec![0usize; options.len()];
                    loop {
                        let picks: Vec<_> = digits
                            .iter()
                            .zip(&options)
                            .map(|(&d, o)| o[d].clone())
                            .collect();
                        let (next, gamma) = self.successor(q_next, &picks)?;
                        let dst = match index.get(&next) {
                            Some(&i) => i,
                            None => {
                                if states.len() >= limits.max_states {
                                    return Err(Error::budget(
                                        BudgetKind::States,
                                        limits.max_states,
                                        format!("{} composite states discovered", states.len()),
                                    ));
                                }
                                index.insert(next.clone(), states.len());
                                states.push(next);
                                queue.push_back(states.len() - 1);
                                states.len() - 1
                            }
                        };
                        edges.push((r, s, gamma, dst));
                        // Odometer over the choice product.
                        let mut pos = digits.len();
                        loop {
                            if pos == 0 {
                                break;
                            }
                            pos -= 1;
                            digits[pos] += 1;
                            if digits[pos] < options[pos].len() {
                                break;
                            }
                            digits[pos] = 0;
                        }
                        if digits.iter().all(|&d| d == 0) {
                            break;
                        }
                    }
                }
            }
        }
        let names: Vec<StateId> = (0..states.len())
            .map(|i| StateId::new(&format!("r{i}")))
            .collect();
        let transitions = edges
            .into_iter()
            .map(|(src, s, assign, dst)| Transition {
                src: names[src].clone(),
                symbol: self.t12.input()[s].clone(),
                assign,
                dst: names[dst].clone(),
            })
            .collect();
        let outputs = states
            .iter()
            .enumerate()
            .map(|(i, st)| OutputRule {
                state: names[i].clone(),
                words: self.output_words(st, nondet),
            })
            .collect();
        let machine = Sst::new(SstParts {
            input: self.t12.input().to_vec(),
            output: self.t23.output().to_vec(),
            states: names.clone(),
            initial: Some(names[0].clone()),
            vars: self.znames.clone(),
            transitions,
            outputs,
        })?;
        Ok(Composite {
            machine,
            states,
            zvars: self.zvars(),
        })
    }
}

/// Composes two copyless deterministic machines; the result is deterministic.
///
/// Only states reachable from `(q0, f0, g0)` are built. The output at
/// `(q, f, g)` is defined when `F12(q)` is, the summaries along it are, and
/// `T23` accepts in the state reached.
pub fn compose_dsst(t12: &Sst, t23: &Sst) -> Result<Composite> {
    compose_dsst_with(t12, t23, &Limits::default())
}

/// [`compose_dsst`] under explicit limits.
pub fn compose_dsst_with(t12: &Sst, t23: &Sst, limits: &Limits) -> Result<Composite> {
    for (t, subject) in [(t12, "first machine"), (t23, "second machine")] {
        if !t.is_deterministic() {
            return Err(Error::Precondition {
                requirement: Requirement::Deterministic,
                subject,
                detail: String::from(
                    "a (state, symbol) pair or an output rule has several choices",
                ),
            });
        }
    }
    Composer::new(t12, t23)?.build(false, limits)
}

/// Composes two copyless, possibly nondeterministic, machines.
///
/// Each `T12` transition yields one composite transition per combination of
/// per-`(p, x)` choices from [`Composer::summarize_nondet`]; a pair with no
/// choice becomes an undefined summary entry.
pub fn compose_nsst(t12: &Sst, t23: &Sst) -> Result<Composite> {
    compose_nsst_with(t12, t23, &Limits::default())
}

/// [`compose_nsst`] under explicit limits.
pub fn compose_nsst_with(t12: &Sst, t23: &Sst, limits: &Limits) -> Result<Composite> {
    Composer::new(t12, t23)?.build(true, limits)
}

/// Worst-case size of the composite: `(state bound, variable count)`.
///
/// With `k = |Q|`, `l = |X|`, `n = |P|`, `m = |Y|`, the state bound is
/// `k · n^(ln) · ⌊e (m + 2lnm)!⌋^(lnm)` and the variable count `2lnm`.
pub fn theoretical_bounds(t12: &Sst, t23: &Sst) -> (BigUint, usize) {
    let k = t12.states().len();
    let l = t12.vars().len();
    let n = t23.states().len();
    let m = t23.vars().len();
    let lnm = l * n * m;
    let var_count = 2 * lnm;
    let shapes = floor_e_factorial((m + var_count) as u32);
    let bound = BigUint::from(k) * BigUint::from(n).pow((l * n) as u32) * shapes.pow(lnm as u32);
    (bound, var_count)
}
