//! Fixtures, a seeded machine generator and lemma checkers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sst_core::compose::{Composer, Composite, Reg, ZVar};
use sst_core::eliminate::{decompose, Eliminated};
use sst_core::semantics::LengthLex;
use sst_core::{Assignment, Item, Limits, Run, Sst, StateId, Symbol, Var, Word};

pub fn syms(text: &str) -> Vec<Symbol> {
    text.split_whitespace().map(Symbol::new).collect()
}

pub fn a_pow(n: usize) -> Vec<Symbol> {
    vec![Symbol::new("a"); n]
}

pub fn ab_pow(n: usize) -> Vec<Symbol> {
    syms(&"a b ".repeat(n))
}

/// Parses a word whose variables are the tokens starting with `x`, `y` or `z`.
pub fn w(text: &str) -> Word {
    Word::parse(text, |t| t.starts_with(['x', 'y', 'z']))
}

pub fn asg(pairs: &[(&str, &str)]) -> Assignment {
    Assignment::from_pairs(pairs.iter().map(|(v, rhs)| (Var::new(v), w(rhs))))
}

pub fn t1() -> Sst {
    Sst::builder()
        .input(["a"])
        .output(["a", "b"])
        .states(["q0"])
        .initial("q0")
        .vars(["x"])
        .transition("q0", "a", "q0", &[("x", "a b x")])
        .output_word("q0", "x")
        .build()
        .unwrap()
}

pub fn t2() -> Sst {
    Sst::builder()
        .input(["a", "b"])
        .output(["a", "b"])
        .states(["p0", "p1"])
        .initial("p0")
        .vars(["y"])
        .transition("p0", "a", "p0", &[("y", "y a")])
        .transition("p0", "b", "p1", &[("y", "y b")])
        .transition("p1", "a", "p0", &[("y", "y a")])
        .transition("p1", "b", "p1", &[("y", "y")])
        .output_word("p1", "y")
        .build()
        .unwrap()
}

pub fn gamma1() -> Assignment {
    asg(&[("z1", ""), ("z2", "a b"), ("z3", ""), ("z4", "a b")])
}

pub fn gamma2() -> Assignment {
    asg(&[
        ("z1", "z3"),
        ("z2", "a b z4"),
        ("z3", "z3"),
        ("z4", "a b z4"),
    ])
}

pub fn t3() -> Sst {
    Sst::builder()
        .input(["a"])
        .output(["a", "b"])
        .states(["r0", "r1"])
        .initial("r0")
        .vars(["z1", "z2", "z3", "z4"])
        .transition(
            "r0",
            "a",
            "r1",
            &[("z1", ""), ("z2", "a b"), ("z3", ""), ("z4", "a b")],
        )
        .transition(
            "r1",
            "a",
            "r1",
            &[
                ("z1", "z3"),
                ("z2", "a b z4"),
                ("z3", "z3"),
                ("z4", "a b z4"),
            ],
        )
        .output_word("r1", "z1 z2")
        .build()
        .unwrap()
}

/// `x ↦ x a x`, output `x a`: `aᵏ ↦ a^(2^k)`.
pub fn doubler() -> Sst {
    Sst::builder()
        .input(["a"])
        .output(["a"])
        .states(["q"])
        .initial("q")
        .vars(["x"])
        .transition("q", "a", "q", &[("x", "x a x")])
        .output_word("q", "x a")
        .build()
        .unwrap()
}

/// Two a-levels of branching; leaf `pi` is reached by `βj ∘ βk` and emits `y`.
pub fn branching() -> Sst {
    Sst::builder()
        .input(["a", "b"])
        .output(["b1", "b2", "b3", "b4", "b5", "b6"])
        .states(["p1", "p2", "p3", "p4", "p5", "p6", "p7"])
        .initial("p1")
        .vars(["y"])
        .transition("p1", "a", "p2", &[("y", "y b1")])
        .transition("p1", "a", "p3", &[("y", "y b2")])
        .transition("p2", "a", "p4", &[("y", "y b3")])
        .transition("p2", "a", "p5", &[("y", "y b4")])
        .transition("p3", "a", "p6", &[("y", "y b5")])
        .transition("p3", "a", "p7", &[("y", "y b6")])
        .output_word("p4", "y")
        .output_word("p5", "y")
        .output_word("p6", "y")
        .output_word("p7", "y")
        .build()
        .unwrap()
}

/// `a ↦ a`, `b ↦ b` with one variable.
pub fn identity_ab() -> Sst {
    Sst::builder()
        .input(["a", "b"])
        .output(["a", "b"])
        .states(["s"])
        .initial("s")
        .vars(["v"])
        .transition("s", "a", "s", &[("v", "v a")])
        .transition("s", "b", "s", &[("v", "v b")])
        .output_word("s", "v")
        .build()
        .unwrap()
}

/// Every assignment diamond-free, the machine not: the copies of `x` meet again.
pub fn merge_machine() -> Sst {
    Sst::builder()
        .input(["a", "b"])
        .output(["a"])
        .states(["q0", "q1", "q2"])
        .initial("q0")
        .vars(["x", "y"])
        .transition("q0", "a", "q1", &[("x", "x"), ("y", "x")])
        .transition("q1", "b", "q2", &[("x", "x y"), ("y", "")])
        .output_word("q2", "x")
        .build()
        .unwrap()
}

#[derive(Clone, Debug)]
pub struct GenParams {
    pub max_states: usize,
    pub max_vars: usize,
    pub input: &'static [&'static str],
    /// Inputs use a prefix of `input` at least this long.
    pub min_input: usize,
    pub output: &'static [&'static str],
    pub max_rhs: usize,
    pub copyless: bool,
    pub deterministic: bool,
    pub var_prefix: &'static str,
}

impl GenParams {
    pub fn copyless(var_prefix: &'static str) -> GenParams {
        GenParams {
            max_states: 3,
            max_vars: 3,
            input: &["a", "b"],
            min_input: 1,
            output: &["a", "b"],
            max_rhs: 3,
            copyless: true,
            deterministic: true,
            var_prefix,
        }
    }

    /// Reads every symbol the `x` machines of [`GenParams::copyless`] can write.
    pub fn second() -> GenParams {
        GenParams {
            min_input: 2,
            ..GenParams::copyless("y")
        }
    }

    pub fn flow() -> GenParams {
        GenParams {
            max_rhs: 4,
            copyless: false,
            deterministic: false,
            ..GenParams::copyless("x")
        }
    }
}

fn random_item(rng: &mut ChaCha8Rng, vars: &[String], symbols: &[&str]) -> String {
    if !vars.is_empty() && rng.gen_bool(0.5) {
        vars.choose(rng).unwrap().clone()
    } else {
        symbols.choose(rng).unwrap().to_string()
    }
}

/// Right-hand sides for every variable; each variable is read at most once when `copyless`.
fn random_rhs(rng: &mut ChaCha8Rng, vars: &[String], p: &GenParams) -> Vec<String> {
    if p.copyless {
        let mut words: Vec<Vec<String>> = vec![Vec::new(); vars.len()];
        for v in vars {
            if rng.gen_bool(0.75) {
                words[rng.gen_range(0..vars.len())].push(v.clone());
            }
        }
        for word in &mut words {
            for _ in 0..rng.gen_range(0..=p.max_rhs) {
                word.push(p.output.choose(rng).unwrap().to_string());
            }
            word.shuffle(rng);
            word.truncate(p.max_rhs);
        }
        words.into_iter().map(|w| w.join(" ")).collect()
    } else {
        vars.iter()
            .map(|_| {
                (0..rng.gen_range(0..=p.max_rhs))
                    .map(|_| random_item(rng, vars, p.output))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }
}

fn random_output(rng: &mut ChaCha8Rng, vars: &[String], p: &GenParams) -> String {
    let mut word: Vec<String> = vars.iter().filter(|_| rng.gen_bool(0.6)).cloned().collect();
    if !p.copyless && !vars.is_empty() && rng.gen_bool(0.2) {
        word.push(vars.choose(rng).unwrap().clone());
    }
    for _ in 0..rng.gen_range(0..=1) {
        word.push(p.output.choose(rng).unwrap().to_string());
    }
    word.shuffle(rng);
    word.join(" ")
}

pub fn random_sst(rng: &mut ChaCha8Rng, p: &GenParams) -> Sst {
    let n_states = rng.gen_range(1..=p.max_states);
    let n_vars = rng.gen_range(1..=p.max_vars);
    let n_input = rng.gen_range(p.min_input..=p.input.len());
    let states: Vec<String> = (0..n_states).map(|i| format!("q{i}")).collect();
    let vars: Vec<String> = (1..=n_vars)
        .map(|i| format!("{}{i}", p.var_prefix))
        .collect();
    let input = &p.input[..n_input];
    let mut b = Sst::builder()
        .input(input.iter().copied())
        .output(p.output.iter().copied())
        .states(states.iter().map(String::as_str))
        .initial(&states[0])
        .vars(vars.iter().map(String::as_str));
    for q in &states {
        for s in input {
            let count = if p.deterministic {
                usize::from(rng.gen_bool(0.85))
            } else {
                rng.gen_range(0..=2)
            };
            for _ in 0..count {
                let dst = states.choose(rng).unwrap();
                let rhs = random_rhs(rng, &vars, p);
                let updates: Vec<(&str, &str)> = vars
                    .iter()
                    .zip(&rhs)
                    .map(|(v, r)| (v.as_str(), r.as_str()))
                    .collect();
                b = b.transition(q, s, dst, &updates);
            }
        }
        if rng.gen_bool(0.6) {
            b = b.output_word(q, &random_output(rng, &vars, p));
            if !p.deterministic && rng.gen_bool(0.2) {
                b = b.output_word(q, &random_output(rng, &vars, p));
            }
        }
    }
    b.build().unwrap()
}

pub type Check = Result<(), String>;

fn erase(w: &Word) -> Word {
    w.symbols().map(|s| Item::Sym(s.clone())).collect()
}

fn run_values(t: &Sst, run: &Run) -> Assignment {
    let v = t.valuation(run).unwrap();
    Assignment::from_pairs(v.iter().map(|(k, w)| (k.clone(), erase(w))))
}

fn composite_state_of(comp: &Composite, run: &Run) -> usize {
    comp.machine.state_index(run.last_state()).unwrap()
}

/// State and shape summaries against direct simulation of the second machine.
///
/// For every composite run on inputs up to `max_len`, every `(p, x)` and the
/// content `v` of `x` in the matching run of the first machine:
/// `f(p, x)` is where the second machine ends on `v` from `p`, and
/// `g(p, x, y)` with the composite's variable values filled in equals the
/// valuation of `y` along that run. The first machine must be deterministic.
pub fn check_summaries(comp: &Composite, t12: &Sst, t23: &Sst, max_len: usize) -> Check {
    let c = Composer::new(t12, t23).map_err(|e| e.to_string())?;
    let limits = Limits::default();
    for input in LengthLex::new(t12.input(), max_len) {
        let runs12 = t12.runs(&input).unwrap();
        for run13 in comp.machine.runs(&input).unwrap() {
            let st = &comp.states[composite_state_of(comp, &run13)];
            let run12 = runs12
                .iter()
                .find(|r| t12.state_index(r.last_state()) == Some(st.q))
                .ok_or_else(|| {
                    format!("no run of the first machine matches the composite on {input:?}")
                })?;
            let content = run_values(t12, run12);
            let zvals = run_values(&comp.machine, &run13);
            for (pi, p) in t23.states().iter().enumerate() {
                for (xi, x) in t12.vars().iter().enumerate() {
                    let v = content.get(x).unwrap().erase_vars();
                    let taus = t23.runs_from(p, &v, &limits).unwrap();
                    let (Some(fp), Some(shape)) = (st.f.get(pi, xi), st.g.get(pi, xi)) else {
                        if st.f.get(pi, xi).is_some() || st.g.get(pi, xi).is_some() {
                            return Err(format!("f and g disagree on definedness at ({p}, {x})"));
                        }
                        if !taus.is_empty() && t23.is_deterministic() {
                            return Err(format!("f({p}, {x}) undefined but `{v:?}` has a run"));
                        }
                        continue;
                    };
                    let fits = taus.iter().any(|tau| {
                        if t23.state_index(tau.last_state()) != Some(fp) {
                            return false;
                        }
                        let val = t23.valuation(tau).unwrap();
                        t23.vars().iter().enumerate().all(|(yi, y)| {
                            zvals.substitute(&c.render(&shape[yi])) == *val.get(y).unwrap()
                        })
                    });
                    if !fits {
                        return Err(format!(
                            "summary at ({p}, {x}) after {input:?} does not match any run on {v:?}"
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

fn subst_reg(slice: &[(ZVar, Word<Reg>)], w: &Word<Reg>) -> Word<Reg> {
    Assignment::from_pairs(slice.iter().map(|(z, v)| (Reg::Z(*z), v.clone()))).substitute(w)
}

/// Each composite transition refills the shapes it records, and the slot discipline holds.
///
/// Checks `G = γ(S)` per `(p, x)` against some transition of the first
/// machine, the class and multiplicity conditions on every shape summary, and
/// the source and target conditions on every composite assignment.
pub fn check_transitions(comp: &Composite, t12: &Sst, t23: &Sst) -> Check {
    let c = Composer::new(t12, t23).map_err(|e| e.to_string())?;
    let np = t23.states().len();
    let nx = t12.vars().len();
    for st in &comp.states {
        for p in 0..np {
            for x in 0..nx {
                let Some(shape) = st.g.get(p, x) else {
                    continue;
                };
                let mut seen = BTreeSet::new();
                for word in shape {
                    for r in word.vars() {
                        match r {
                            Reg::Z(z) if (z.p, z.x) != (p, x) => {
                                return Err(format!("{r} sits in the shape of ({p}, {x})"))
                            }
                            Reg::Z(_) if !seen.insert(*r) => {
                                return Err(format!("{r} occurs twice in the shapes of ({p}, {x})"))
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }
    for tr in comp.machine.transitions() {
        let src = &comp.states[comp.machine.state_index(&tr.src).unwrap()];
        let dst = &comp.states[comp.machine.state_index(&tr.dst).unwrap()];
        let q = &t12.states()[src.q];
        let fits_some = t12
            .transitions_from(q, &tr.symbol)
            .filter(|t| t12.state_index(&t.dst) == Some(dst.q))
            .any(|t| transition_fits(&c, t23, &t.assign, t12.vars(), src, dst, &tr.assign).is_ok());
        if !fits_some {
            let first = t12
                .transitions_from(q, &tr.symbol)
                .map(|t| transition_fits(&c, t23, &t.assign, t12.vars(), src, dst, &tr.assign))
                .find_map(Result::err)
                .unwrap_or_else(|| String::from("no transition of the first machine"));
            return Err(format!("composite transition `{tr}`: {first}"));
        }
        slot_discipline(&c, &tr.assign).map_err(|e| format!("composite transition `{tr}`: {e}"))?;
    }
    Ok(())
}

fn transition_fits(
    c: &Composer<'_>,
    t23: &Sst,
    alpha: &Assignment,
    xs: &[Var],
    src: &sst_core::compose::CompositeState,
    dst: &sst_core::compose::CompositeState,
    gamma: &Assignment,
) -> Check {
    for (pi, p) in t23.states().iter().enumerate() {
        for (xi, x) in xs.iter().enumerate() {
            let xw = alpha.get(x).unwrap();
            let choices = c.summarize_nondet(p, xw, &src.f, &src.g).unwrap();
            let zs = |b: &dyn Fn(ZVar) -> bool| {
                c.zvars()
                    .into_iter()
                    .filter(|z| z.p == pi && z.x == xi)
                    .all(b)
            };
            match (dst.f.get(pi, xi), dst.g.get(pi, xi)) {
                (None, None) => {
                    if !choices.is_empty() {
                        return Err(format!("({p}, {x}) left undefined although {xw} has a run"));
                    }
                    if !zs(&|z| gamma.get(c.zname(z)).is_some_and(Word::is_empty)) {
                        return Err(format!("undefined ({p}, {x}) keeps a nonempty slot"));
                    }
                }
                (Some(fp), Some(shape)) => {
                    let ok = choices.iter().any(|(d, h)| {
                        let s = c.shape_of(p, x, h).unwrap();
                        let slice = c.assignment_of(p, x, h).unwrap();
                        *d == fp
                            && s == *shape
                            && s.iter().zip(h).all(|(sy, hy)| subst_reg(&slice, sy) == *hy)
                            && slice
                                .iter()
                                .all(|(z, v)| gamma.get(c.zname(*z)) == Some(&c.render(v)))
                    });
                    if !ok {
                        return Err(format!("({p}, {x}) does not refill any summary of {xw}"));
                    }
                    if !t23.is_deterministic() {
                        continue;
                    }
                    let h = c.summarize_assignment(p, xw, &src.f, &src.g).unwrap();
                    if c.summarize_state(p, xw, &src.f).ok() != Some(t23.states()[fp].clone())
                        || c.shape_of(p, x, &h).unwrap() != *shape
                    {
                        return Err(format!(
                            "deterministic summary operators disagree at ({p}, {x})"
                        ));
                    }
                }
                _ => return Err(format!("f and g disagree on definedness at ({p}, {x})")),
            }
        }
    }
    Ok(())
}

fn slot_discipline(c: &Composer<'_>, gamma: &Assignment) -> Check {
    let z = |v: &Var| {
        c.zvar_of(v)
            .ok_or_else(|| format!("`{v}` is not a composite variable"))
    };
    let mut sources: std::collections::BTreeMap<ZVar, Vec<ZVar>> = Default::default();
    for (target, word) in gamma.iter() {
        let t = z(target)?;
        let inside: Vec<ZVar> = word.vars().map(z).collect::<Result<_, _>>()?;
        for (i, a) in inside.iter().enumerate() {
            for b in &inside[i + 1..] {
                if a == b {
                    return Err(format!(
                        "{} repeats inside one right-hand side",
                        c.zname(*a)
                    ));
                }
                if (a.p, a.x) != (b.p, b.x) && a.x == b.x {
                    return Err(format!(
                        "{} and {} share a target but not a class",
                        c.zname(*a),
                        c.zname(*b)
                    ));
                }
            }
            sources.entry(*a).or_default().push(t);
        }
    }
    for (s, targets) in sources {
        for (i, a) in targets.iter().enumerate() {
            for b in &targets[i + 1..] {
                if a.x != b.x || a.p == b.p {
                    return Err(format!(
                        "{} flows into {} and {}",
                        c.zname(s),
                        c.zname(*a),
                        c.zname(*b)
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Every member copyless, and the members together cover `a` edge-wise.
pub fn check_decomposition(a: &Assignment) -> Check {
    let d = decompose(a).map_err(|e| e.to_string())?;
    for m in d.iter() {
        if !sst_core::flow::is_copyless_assignment(m) {
            return Err(format!("member {m} of {a} is copyful"));
        }
        if !m.same_domain(a) {
            return Err(format!("member {m} of {a} has another domain"));
        }
    }
    for (y, word) in a.iter() {
        let images: BTreeSet<&Word> = d.iter().map(|m| m.get(y).unwrap()).collect();
        if images.iter().any(|i| !i.is_empty() && *i != word) {
            return Err(format!("a member maps {y} outside {{{word}, ε}}"));
        }
        if !images.contains(word) {
            return Err(format!("no member of D({a}) keeps {y} ↦ {word}"));
        }
    }
    Ok(())
}

fn is_subsequence(small: &[Item], big: &[Item]) -> bool {
    let mut it = big.iter();
    small.iter().all(|x| it.any(|y| y == x))
}

/// Runs of the original machine against member sequences and runs of the conversion.
///
/// For every run of length at most `max_len` and every variable `y`, some
/// sequence of decomposition members reproduces `𝒱(y)` and every sequence
/// yields a subsequence of it; every output of the run is produced by some
/// run of the conversion following the same original states.
pub fn check_member_runs(t: &Sst, e: &Eliminated, max_len: usize, max_sequences: usize) -> Check {
    for input in LengthLex::new(t.input(), max_len) {
        let converted = e.machine.runs(&input).unwrap();
        for run in t.runs(&input).unwrap() {
            let val = t.valuation(&run).unwrap();
            let members: Vec<Vec<Assignment>> = run
                .assigns
                .iter()
                .map(|a| decompose(a).unwrap().members.into_iter().collect())
                .collect();
            let total = members.iter().map(Vec::len).product::<usize>();
            if total > max_sequences {
                return Err(format!(
                    "{total} member sequences on {input:?}; lower the bound"
                ));
            }
            let mut reproduced: BTreeSet<&Var> = BTreeSet::new();
            let mut digits = vec![0usize; members.len()];
            for _ in 0..total {
                let mut acc = Assignment::identity(t.vars().iter().cloned());
                for (k, &d) in digits.iter().enumerate() {
                    acc = sst_core::sequential_compose(&acc, &members[k][d]).unwrap();
                }
                for y in t.vars() {
                    let (mine, theirs) = (acc.get(y).unwrap(), val.get(y).unwrap());
                    if mine == theirs {
                        reproduced.insert(y);
                    } else if !is_subsequence(mine.items(), theirs.items()) {
                        return Err(format!(
                            "member sequence gives {y} ↦ {mine}, not inside {theirs}"
                        ));
                    }
                }
                for pos in (0..digits.len()).rev() {
                    digits[pos] += 1;
                    if digits[pos] < members[pos].len() {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
            if let Some(y) = t.vars().iter().find(|y| !reproduced.contains(y)) {
                return Err(format!("no member sequence reproduces {y} on {input:?}"));
            }
            let wanted = t.run_outputs(&run).unwrap();
            let mut got = BTreeSet::new();
            for r in &converted {
                let states: Vec<&StateId> = r
                    .states
                    .iter()
                    .map(|s| &e.states[e.machine.state_index(s).unwrap()].0)
                    .collect();
                if states.iter().copied().eq(run.states.iter()) {
                    got.extend(e.machine.run_outputs(r).unwrap());
                }
            }
            if !wanted.is_subset(&got) {
                return Err(format!(
                    "outputs of the run on {input:?} are lost by the conversion"
                ));
            }
        }
    }
    Ok(())
}
