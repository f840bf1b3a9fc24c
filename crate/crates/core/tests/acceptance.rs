//! One PASS/FAIL line per acceptance criterion.
//!
//! Every machine built along the way also goes through the lemma checks of
//! `common`; their tally is the last criterion.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sst_core::compose::{compose_dsst, Composer, Composite};
use sst_core::eliminate::{compose_and_eliminate, decompose, to_copyless};
use sst_core::flow::{
    copyful_transition, copyless_count, floor_e_factorial, is_copyless_assignment, is_copyless_sst,
    is_diamond_free_assignment, is_diamond_free_bounded, is_diamond_free_sst,
};
use sst_core::verify::{equiv_bounded, is_functional_bounded, relation_compose, relation_through};
use sst_core::{sequential_compose, Assignment, Limits, Sst, StateId, Var, Word};

#[derive(Default)]
struct Lemmas {
    checks: usize,
    violations: Vec<String>,
}

impl Lemmas {
    fn record(&mut self, what: &str, result: Check) {
        self.checks += 1;
        if let Err(e) = result {
            self.violations.push(format!("{what}: {e}"));
        }
    }

    fn composite(&mut self, what: &str, comp: &Composite, t12: &Sst, t23: &Sst, max_len: usize) {
        if t12.is_deterministic() {
            self.record(what, check_summaries(comp, t12, t23, max_len));
        }
        self.record(what, check_transitions(comp, t12, t23));
        self.machine(what, &comp.machine);
    }

    /// Decomposition covers every copyful diamond-free assignment, and updates on disjoint
    /// variable sets commute.
    fn machine(&mut self, what: &str, t: &Sst) {
        let mut copyful = 0;
        for tr in t.transitions() {
            if !is_copyless_assignment(&tr.assign)
                && is_diamond_free_assignment(&tr.assign)
                && copyful < 8
            {
                copyful += 1;
                self.record(what, check_decomposition(&tr.assign));
            }
        }
        if let [first, .., last] = t.transitions() {
            self.record(what, disjoint_updates_commute(&first.assign, &last.assign));
        }
    }
}

fn disjoint_updates_commute(g: &Assignment, h: &Assignment) -> Check {
    let h = h.map_vars(|v| Var::new(&format!("{}'", v.as_str())));
    let extend = |a: &Assignment, others: &Assignment| {
        let mut full = a.clone();
        for v in others.domain() {
            full.set(v.clone(), Word::var(v.clone()));
        }
        full
    };
    let (gf, hf) = (extend(g, &h), extend(&h, g));
    let gh = sequential_compose(&gf, &hf).map_err(|e| e.to_string())?;
    let hg = sequential_compose(&hf, &gf).map_err(|e| e.to_string())?;
    if gh != hg {
        return Err(format!("{g} and {h} do not commute"));
    }
    Ok(())
}

struct Outcome {
    failures: Vec<String>,
}

fn criterion(
    out: &mut Outcome,
    lemmas: &mut Lemmas,
    id: u32,
    name: &str,
    limit: Duration,
    body: impl FnOnce(&mut Lemmas),
) {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(|| body(lemmas)));
    let took = start.elapsed();
    let verdict = match result {
        Ok(()) if took <= limit => "PASS",
        _ => "FAIL",
    };
    println!("{verdict} {id:>2} {name} ({took:.2?}, limit {limit:?})");
    if verdict == "FAIL" {
        out.failures.push(format!("{id} {name}"));
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn p(name: &str) -> StateId {
    StateId::new(name)
}

fn a_copier() -> Sst {
    Sst::builder()
        .input(["a"])
        .output(["a"])
        .states(["q"])
        .initial("q")
        .vars(["x"])
        .transition("q", "a", "q", &[("x", "a x")])
        .output_word("q", "x")
        .build()
        .unwrap()
}

fn main() {
    let mut out = Outcome {
        failures: Vec::new(),
    };
    let mut lemmas = Lemmas::default();

    criterion(
        &mut out,
        &mut lemmas,
        1,
        "composite of T1 and T2",
        secs(1),
        |l| {
            let comp = compose_dsst(&t1(), &t2()).unwrap();
            assert_eq!(comp.machine.vars().len(), 4);
            assert_eq!(comp.machine.states().len(), 2);
            let assigns: Vec<_> = comp
                .machine
                .transitions()
                .iter()
                .map(|t| t.assign.clone())
                .collect();
            assert_eq!(assigns, [gamma1(), gamma2()]);
            l.composite("T1;T2", &comp, &t1(), &t2(), 5);
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        2,
        "composite relation up to length 8",
        secs(5),
        |_| {
            let comp = compose_dsst(&t1(), &t2()).unwrap();
            let expected: BTreeSet<_> = (1..=8).map(|n| (a_pow(n), ab_pow(n))).collect();
            let got = comp.machine.relation(8).unwrap();
            assert_eq!(got.pairs, expected);
            let oracle =
                relation_compose(&t1().relation(8).unwrap(), &t2().relation(16).unwrap()).unwrap();
            assert_eq!(got, oracle);
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        3,
        "composite copyful but diamond-free",
        secs(1),
        |_| {
            let comp = compose_dsst(&t1(), &t2()).unwrap();
            assert!(!is_copyless_sst(&comp.machine));
            assert_eq!(copyful_transition(&comp.machine).unwrap().assign, gamma2());
            assert!(is_diamond_free_sst(&comp.machine));
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        4,
        "decomposition of gamma2",
        secs(1),
        |l| {
            let expected: BTreeSet<Assignment> = [
                asg(&[("z1", "z3"), ("z2", "a b z4"), ("z3", ""), ("z4", "")]),
                asg(&[("z1", "z3"), ("z2", ""), ("z3", ""), ("z4", "a b z4")]),
                asg(&[("z1", ""), ("z2", "a b z4"), ("z3", "z3"), ("z4", "")]),
                asg(&[("z1", ""), ("z2", ""), ("z3", "z3"), ("z4", "a b z4")]),
            ]
            .into_iter()
            .collect();
            assert_eq!(decompose(&gamma2()).unwrap().members, expected);
            l.record("gamma2", check_decomposition(&gamma2()));
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        5,
        "copyless conversion of T3",
        secs(5),
        |l| {
            let e = to_copyless(&t3()).unwrap();
            let m = &e.machine;
            let dead_sets: [&[&str]; 6] = [
                &[],
                &[],
                &["z3", "z4"],
                &["z2", "z3"],
                &["z1", "z4"],
                &["z1", "z2"],
            ];
            let bases = ["r0", "r1", "r1", "r1", "r1", "r1"];
            let found: BTreeSet<usize> = bases
                .iter()
                .zip(dead_sets)
                .map(|(q, d)| e.find(q, d).expect("state of the conversion"))
                .collect();
            assert_eq!(found.len(), 6);
            assert_eq!(m.states().len(), 6);
            assert!(is_copyless_sst(m));
            let accepting: BTreeSet<usize> =
                (0..6).filter(|&i| m.is_accepting(&m.states()[i])).collect();
            let (clean, late) = (
                e.find("r1", &[]).unwrap(),
                e.find("r1", &["z3", "z4"]).unwrap(),
            );
            assert_eq!(accepting, BTreeSet::from([clean, late]));
            for i in [clean, late] {
                assert_eq!(
                    m.outputs_of(&m.states()[i]).unwrap(),
                    &BTreeSet::from([w("z1 z2")])
                );
            }
            assert!(m.transitions().iter().all(|t| t.src != m.states()[late]));
            assert!(m.states().len() <= 2 * 16);
            assert!(equiv_bounded(&t3(), m, 8).unwrap().equal);
            assert!(is_functional_bounded(m, 8).unwrap());
            l.record("T3", check_member_runs(&t3(), &e, 5, 100_000));
            l.machine("T3", &t3());
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        6,
        "pipeline T1 then T2",
        secs(5),
        |l| {
            let p = compose_and_eliminate(&t1(), &t2()).unwrap();
            assert!(is_copyless_sst(&p.eliminated.machine));
            assert!(
                equiv_bounded(&t3(), &p.eliminated.machine, 8)
                    .unwrap()
                    .equal
            );
            l.record(
                "pipeline T1;T2",
                check_member_runs(&p.composite.machine, &p.eliminated, 5, 100_000),
            );
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        7,
        "copyless strings and floor(e n!)",
        secs(5),
        |_| {
            for (n, want) in (2..=6u32).zip([5u32, 16, 65, 326, 1957]) {
                assert_eq!(enumerate_copyless(n as usize), u64::from(want));
                assert_eq!(copyless_count(n), want.into());
                assert_eq!(floor_e_factorial(n), rational_floor_e_factorial(n));
                assert_eq!(copyless_count(n), rational_floor_e_factorial(n));
            }
        },
    );

    criterion(&mut out, &mut lemmas, 8, "copyful doubling", secs(1), |l| {
        for k in 0..=10 {
            assert_eq!(
                doubler().evaluate(&a_pow(k)).unwrap(),
                BTreeSet::from([a_pow(1 << k)])
            );
        }
        l.machine("doubler", &doubler());
    });

    criterion(
        &mut out,
        &mut lemmas,
        9,
        "synchronized nondeterministic summary",
        secs(1),
        |l| {
            let (t12, t23) = (a_copier(), branching());
            let c = Composer::new(&t12, &t23).unwrap();
            let (f0, g0) = (c.initial_state_summary(), c.initial_shape_summary());
            let h = c.summarize_nondet(&p("p1"), &w("a a"), &f0, &g0).unwrap();
            let got: BTreeSet<(String, String)> = h
                .iter()
                .map(|(q, sh)| (t23.states()[*q].to_string(), c.render(&sh[0]).to_string()))
                .collect();
            let expected: BTreeSet<(String, String)> = [
                ("p4", "y b1 b3"),
                ("p5", "y b1 b4"),
                ("p6", "y b2 b5"),
                ("p7", "y b2 b6"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
            assert_eq!(got, expected);
            assert!(!got.contains(&(String::from("p4"), String::from("y b2 b6"))));
            let comp = sst_core::compose::compose_nsst(&t12, &t23).unwrap();
            l.composite("copier;branching", &comp, &t12, &t23, 3);
        },
    );

    criterion(
        &mut out,
        &mut lemmas,
        10,
        "random property suite",
        secs(300),
        |l| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xacc_0010);
            let limits = Limits::default();
            for i in 0..120 {
                let t12 = random_sst(&mut rng, &GenParams::copyless("x"));
                let t23 = random_sst(&mut rng, &GenParams::second());
                let ctx = format!("pair {i}");
                let comp = compose_dsst(&t12, &t23).unwrap();
                assert!(is_diamond_free_sst(&comp.machine), "{ctx}");
                let r12 = t12.relation(4).unwrap();
                let want = relation_through(&r12, &t23, &limits).unwrap();
                assert_eq!(comp.machine.relation(4).unwrap(), want, "{ctx}");
                if r12.max_output_len() <= 10 {
                    let r23 = t23.relation(r12.max_output_len()).unwrap();
                    assert_eq!(relation_compose(&r12, &r23).unwrap(), want, "{ctx}");
                }
                let p = compose_and_eliminate(&t12, &t23).unwrap();
                assert!(is_copyless_sst(&p.eliminated.machine), "{ctx}");
                assert!(
                    equiv_bounded(&comp.machine, &p.eliminated.machine, 4)
                        .unwrap()
                        .equal,
                    "{ctx}"
                );
                l.machine(&ctx, &t12);
                l.machine(&ctx, &t23);
                l.composite(&ctx, &comp, &t12, &t23, 3);
                l.record(
                    &ctx,
                    check_member_runs(&comp.machine, &p.eliminated, 2, 100_000),
                );
            }
            let mut rng = ChaCha8Rng::seed_from_u64(0xacc_0011);
            for i in 0..500 {
                let t = random_sst(&mut rng, &GenParams::flow());
                let exact = is_diamond_free_sst(&t);
                assert_eq!(
                    exact,
                    is_diamond_free_bounded(&t, 6).unwrap(),
                    "machine {i}"
                );
                l.machine(&format!("machine {i}"), &t);
                if exact {
                    let e = to_copyless(&t).unwrap();
                    l.record(
                        &format!("machine {i}"),
                        check_member_runs(&t, &e, 3, 100_000),
                    );
                }
            }
        },
    );

    let lemma_limit = secs(1);
    let (checks, violations) = (lemmas.checks, lemmas.violations.clone());
    criterion(
        &mut out,
        &mut lemmas,
        11,
        "lemma invariants on every machine",
        lemma_limit,
        |_| {
            for v in violations.iter().take(10) {
                println!("     violation: {v}");
            }
            assert!(
                violations.is_empty(),
                "{} of {checks} checks failed",
                violations.len()
            );
            assert!(checks > 1000, "only {checks} checks ran");
        },
    );
    println!("     {checks} lemma checks");

    assert!(out.failures.is_empty(), "failed: {:?}", out.failures);
}

fn enumerate_copyless(n: usize) -> u64 {
    fn extend(used: &mut Vec<bool>) -> u64 {
        let mut count = 1;
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                count += extend(used);
                used[i] = false;
            }
        }
        count
    }
    extend(&mut vec![false; n])
}

/// `⌊e·n!⌋` pinned between `Σ_{j≤k} n!/j!` and that sum plus `n!/(k!·k)`.
fn rational_floor_e_factorial(n: u32) -> num_bigint::BigUint {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let fact = |m: u32| -> BigInt { (1..=m).map(BigInt::from).product() };
    let nf = BigRational::from_integer(fact(n));
    let mut k = n + 3;
    loop {
        let partial: BigRational = (0..=k)
            .map(|j| &nf / BigRational::from_integer(fact(j)))
            .sum();
        let tail = &nf / BigRational::from_integer(fact(k) * BigInt::from(k));
        let (lo, hi) = (partial.floor(), (&partial + tail).floor());
        if lo == hi {
            return lo.to_integer().to_biguint().unwrap();
        }
        k += 1;
    }
}
