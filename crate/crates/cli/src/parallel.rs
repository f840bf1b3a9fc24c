//! Word-parallel bounded enumeration for `--jobs N`.
//!
//! Inputs are split into contiguous slices of the length-lexicographic order
//! and evaluated on scoped threads. Results are merged before any verdict is
//! taken, so the output does not depend on the schedule.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;

use sst_core::semantics::LengthLex;
use sst_core::{BudgetKind, Error, Limits, Sst, Symbol};

type Outputs = BTreeSet<Vec<Symbol>>;

fn word_count(alphabet: usize, max_len: usize) -> u64 {
    (0..=max_len as u32).fold(0u64, |acc, k| {
        acc.saturating_add((alphabet as u64).saturating_pow(k))
    })
}

/// Evaluates `eval` on every input up to `max_len`, in length-lexicographic order.
fn evaluate_all<F>(
    alphabet: &[Symbol],
    max_len: usize,
    jobs: usize,
    limits: &Limits,
    eval: F,
) -> Result<Vec<(Vec<Symbol>, Vec<Outputs>)>, Error>
where
    F: Fn(&[Symbol]) -> Result<Vec<Outputs>, Error> + Sync,
{
    let total = word_count(alphabet.len(), max_len);
    if total > limits.max_words {
        return Err(Error::Budget {
            kind: BudgetKind::Words,
            limit: limits.max_words,
            progress: format!("{total} inputs up to length {max_len}; nothing evaluated"),
        });
    }
    let words: Vec<Vec<Symbol>> = LengthLex::new(alphabet, max_len).collect();
    let symbols = AtomicU64::new(0);
    let chunk = words.len().div_ceil(jobs.max(1)).max(1);
    let parts: Vec<Result<Vec<Vec<Outputs>>, Error>> = thread::scope(|scope| {
        let handles: Vec<_> = words
            .chunks(chunk)
            .map(|slice| {
                let (eval, symbols) = (&eval, &symbols);
                scope.spawn(move || {
                    let mut out = Vec::with_capacity(slice.len());
                    for w in slice {
                        let results = eval(w)?;
                        let produced: u64 = results.iter().flatten().map(|u| u.len() as u64).sum();
                        let so_far = symbols.fetch_add(produced, Ordering::Relaxed) + produced;
                        if so_far > limits.max_symbols {
                            return Err(Error::Budget {
                                kind: BudgetKind::Symbols,
                                limit: limits.max_symbols,
                                progress: format!("{so_far} output symbols produced"),
                            });
                        }
                        out.push(results);
                    }
                    Ok(out)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut merged = Vec::with_capacity(words.len());
    let mut it = words.into_iter();
    for part in parts {
        for results in part? {
            merged.push((it.next().unwrap(), results));
        }
    }
    Ok(merged)
}

/// Every `(input, output)` pair up to `max_len`, in length-lexicographic order of inputs.
pub fn relation(
    t: &Sst,
    max_len: usize,
    jobs: usize,
    limits: &Limits,
) -> Result<Vec<(Vec<Symbol>, Vec<Symbol>)>, Error> {
    let all = evaluate_all(t.input(), max_len, jobs, limits, |w| {
        Ok(vec![t.evaluate_with(w, limits)?])
    })?;
    Ok(all
        .into_iter()
        .flat_map(|(w, mut outs)| {
            let outs = outs.pop().unwrap();
            outs.into_iter().map(move |u| (w.clone(), u))
        })
        .collect())
}

/// The least input where `a` and `b` differ, with both output sets.
pub fn first_difference(
    a: &Sst,
    b: &Sst,
    max_len: usize,
    jobs: usize,
    limits: &Limits,
) -> Result<Option<(Vec<Symbol>, Outputs, Outputs)>, Error> {
    let all = evaluate_all(a.input(), max_len, jobs, limits, |w| {
        Ok(vec![
            a.evaluate_with(w, limits)?,
            b.evaluate_with(w, limits)?,
        ])
    })?;
    Ok(all.into_iter().find_map(|(w, mut outs)| {
        let ob = outs.pop().unwrap();
        let oa = outs.pop().unwrap();
        (oa != ob).then_some((w, oa, ob))
    }))
}
