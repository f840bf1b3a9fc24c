use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::name::{Symbol, Var};

/// Anything usable as a variable: ordered, cloneable and printable.
pub trait Register: Ord + Clone + fmt::Display {}

impl<T: Ord + Clone + fmt::Display> Register for T {}

/// One position of a [`Word`]: a symbol or a variable.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Item<V = Var> {
    /// An output symbol; morphisms leave it unchanged.
    Sym(Symbol),
    /// A variable; morphisms substitute it.
    Var(V),
}

/// A finite sequence of symbols and variables.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word<V = Var>(Vec<Item<V>>);

impl<V> Default for Word<V> {
    fn default() -> Self {
        Word(Vec::new())
    }
}

impl<V> Word<V> {
    /// The empty word.
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// A word from its items.
    pub fn from_items(items: Vec<Item<V>>) -> Self {
        Word(items)
    }

    /// The single-variable word `v`.
    pub fn var(v: V) -> Self {
        Word(alloc::vec![Item::Var(v)])
    }

    /// Items in order.
    pub fn items(&self) -> &[Item<V>] {
        &self.0
    }

    /// Consumes the word.
    pub fn into_items(self) -> Vec<Item<V>> {
        self.0
    }

    /// Number of items, symbols and variables alike.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True for ε.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends one item.
    pub fn push(&mut self, item: Item<V>) {
        self.0.push(item);
    }

    /// Variables in order of occurrence, with repetitions.
    pub fn vars(&self) -> impl Iterator<Item = &V> + '_ {
        self.0.iter().filter_map(|item| match item {
            Item::Var(v) => Some(v),
            Item::Sym(_) => None,
        })
    }

    /// Symbols in order of occurrence.
    pub fn symbols(&self) -> impl Iterator<Item = &Symbol> + '_ {
        self.0.iter().filter_map(|item| match item {
            Item::Sym(s) => Some(s),
            Item::Var(_) => None,
        })
    }

    /// Drops every variable: the eraser applied as a morphism.
    pub fn erase_vars(&self) -> Vec<Symbol> {
        self.symbols().cloned().collect()
    }

    /// Renames every variable through `f`.
    pub fn map_vars<W>(&self, mut f: impl FnMut(&V) -> W) -> Word<W> {
        Word(
            self.0
                .iter()
                .map(|item| match item {
                    Item::Sym(s) => Item::Sym(s.clone()),
                    Item::Var(v) => Item::Var(f(v)),
                })
                .collect(),
        )
    }

    /// Keeps symbols and the variables `f` maps to `Some`.
    pub fn filter_map_vars<W>(&self, mut f: impl FnMut(&V) -> Option<W>) -> Word<W> {
        Word(
            self.0
                .iter()
                .filter_map(|item| match item {
                    Item::Sym(s) => Some(Item::Sym(s.clone())),
                    Item::Var(v) => f(v).map(Item::Var),
                })
                .collect(),
        )
    }
}

impl<V: PartialEq> Word<V> {
    /// Number of occurrences of `v`.
    pub fn occurrences(&self, v: &V) -> usize {
        self.vars().filter(|w| *w == v).count()
    }

    /// True if `v` occurs at least once.
    pub fn contains_var(&self, v: &V) -> bool {
        self.vars().any(|w| w == v)
    }
}

impl<V: Clone> Word<V> {
    /// Appends a copy of `other`.
    pub fn extend_from(&mut self, other: &Word<V>) {
        self.0.extend_from_slice(&other.0);
    }

    /// `self · other`.
    pub fn concat(&self, other: &Word<V>) -> Word<V> {
        let mut out = self.clone();
        out.extend_from(other);
        out
    }
}

impl Word<Var> {
    /// Parses whitespace-separated tokens; `is_var` decides which tokens are variables.
    ///
    /// ```
    /// use sst_core::Word;
    /// let w = Word::parse("a b x", |t| t == "x");
    /// assert_eq!(w.len(), 3);
    /// assert_eq!(w.to_string(), "a b x");
    /// ```
    pub fn parse(text: &str, is_var: impl Fn(&str) -> bool) -> Word {
        Word(
            text.split_whitespace()
                .map(|tok| {
                    if is_var(tok) {
                        Item::Var(Var::new(tok))
                    } else {
                        Item::Sym(Symbol::new(tok))
                    }
                })
                .collect(),
        )
    }
}

impl<V> FromIterator<Item<V>> for Word<V> {
    fn from_iter<I: IntoIterator<Item = Item<V>>>(iter: I) -> Self {
        Word(iter.into_iter().collect())
    }
}

impl<V: fmt::Display> fmt::Display for Word<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, item) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match item {
                Item::Sym(s) => write!(f, "{s}")?,
                Item::Var(v) => write!(f, "{v}")?,
            }
        }
        Ok(())
    }
}

impl<V: fmt::Display> fmt::Debug for Word<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

/// A finite map from variables to words, read as a simultaneous update.
///
/// An assignment extends to a morphism on words: symbols map to themselves
/// and every variable `v` is replaced by `self[v]`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment<V: Ord = Var> {
    map: BTreeMap<V, Word<V>>,
}

impl<V: Ord> Default for Assignment<V> {
    fn default() -> Self {
        Assignment {
            map: BTreeMap::new(),
        }
    }
}

impl<V: Register> Assignment<V> {
    /// `v ↦ v` for every variable.
    pub fn identity(vars: impl IntoIterator<Item = V>) -> Self {
        Assignment {
            map: vars
                .into_iter()
                .map(|v| (v.clone(), Word::var(v)))
                .collect(),
        }
    }

    /// `v ↦ ε` for every variable.
    pub fn eraser(vars: impl IntoIterator<Item = V>) -> Self {
        Assignment {
            map: vars.into_iter().map(|v| (v, Word::empty())).collect(),
        }
    }

    /// Builds an assignment from `(variable, word)` pairs; later pairs win.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (V, Word<V>)>) -> Self {
        Assignment {
            map: pairs.into_iter().collect(),
        }
    }

    /// The word assigned to `v`.
    pub fn get(&self, v: &V) -> Option<&Word<V>> {
        self.map.get(v)
    }

    /// Overwrites the word assigned to `v`.
    pub fn set(&mut self, v: V, w: Word<V>) {
        self.map.insert(v, w);
    }

    /// Variables in ascending order.
    pub fn domain(&self) -> impl Iterator<Item = &V> + '_ {
        self.map.keys()
    }

    /// `(variable, word)` pairs in ascending variable order.
    pub fn iter(&self) -> impl Iterator<Item = (&V, &Word<V>)> + '_ {
        self.map.iter()
    }

    /// Number of variables in the domain.
    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// True when the domain is empty.
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// True if both assignments have the same domain.
    pub fn same_domain(&self, other: &Assignment<V>) -> bool {
        self.map.len() == other.map.len() && self.map.keys().eq(other.map.keys())
    }

    /// Applies the assignment as a morphism; every variable of `w` must be in the domain.
    pub fn apply(&self, w: &Word<V>) -> Result<Word<V>> {
        let mut out = Word::empty();
        for item in w.items() {
            match item {
                Item::Sym(s) => out.push(Item::Sym(s.clone())),
                Item::Var(v) => match self.map.get(v) {
                    Some(image) => out.extend_from(image),
                    None => return Err(Error::UnknownVariable(v.to_string())),
                },
            }
        }
        Ok(out)
    }

    /// Applies the assignment as a morphism, leaving variables outside the domain in place.
    pub fn substitute(&self, w: &Word<V>) -> Word<V> {
        let mut out = Word::empty();
        for item in w.items() {
            match item {
                Item::Var(v) => match self.map.get(v) {
                    Some(image) => out.extend_from(image),
                    None => out.push(item.clone()),
                },
                Item::Sym(_) => out.push(item.clone()),
            }
        }
        out
    }

    /// Total number of items over all right-hand sides.
    pub fn total_len(&self) -> usize {
        self.map.values().map(Word::len).sum()
    }

    /// Renames variables on both sides.
    pub fn map_vars<W: Register>(&self, mut f: impl FnMut(&V) -> W) -> Assignment<W> {
        Assignment {
            map: self
                .map
                .iter()
                .map(|(k, w)| (f(k), w.map_vars(&mut f)))
                .collect(),
        }
    }
}

impl<V: Register> fmt::Display for Assignment<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, w)) in self.map.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, " {v} ↦ {w}")?;
        }
        f.write_str(" }")
    }
}

impl<V: Register> fmt::Debug for Assignment<V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Applies `a` to `w` as a morphism.
pub fn apply_morphism<V: Register>(a: &Assignment<V>, w: &Word<V>) -> Result<Word<V>> {
    a.apply(w)
}

/// `first ∘ second`: the assignment `x ↦ first(second(x))`.
///
/// Running `first` and then `second` on a machine's variables yields the
/// values given by this composite, read against the values before `first`.
pub fn sequential_compose<V: Register>(
    first: &Assignment<V>,
    second: &Assignment<V>,
) -> Result<Assignment<V>> {
    if !first.same_domain(second) {
        return Err(Error::VariableSetMismatch);
    }
    let map = second
        .map
        .iter()
        .map(|(v, w)| Ok((v.clone(), first.apply(w)?)))
        .collect::<Result<_>>()?;
    Ok(Assignment { map })
}
