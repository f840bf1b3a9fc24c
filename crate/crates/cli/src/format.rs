//! The `.sst` text format.
//!
//! ```text
//! sst T1 {
//!   input: a;
//!   output: a b;
//!   states: q0;
//!   initial: q0;
//!   vars: x;
//!   trans q0 -a-> q0 { x = 'a' 'b' x; }
//!   out q0 = x;
//! }
//! ```
//!
//! Names are bare tokens, or double-quoted when they contain whitespace,
//! punctuation or a leading `-`. Output symbols inside right-hand sides are
//! single-quoted. Variables a transition does not mention keep their value.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use sst_core::machine::SstParts;
use sst_core::{Assignment, Item, OutputRule, Sst, StateId, Symbol, Transition, Var, Word};

/// A problem with a `.sst` file.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    /// The text does not follow the grammar.
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// A machine is well formed but invalid.
    #[error("machine `{machine}`: {message}")]
    Semantic { machine: String, message: String },
}

/// Named machines in file order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SstDocument {
    machines: Vec<(String, Sst)>,
}

impl SstDocument {
    pub fn new() -> Self {
        SstDocument::default()
    }

    /// Adds a machine; fails if the name is taken.
    pub fn insert(&mut self, name: &str, machine: Sst) -> Result<(), FormatError> {
        if self.get(name).is_some() {
            return Err(FormatError::Semantic {
                machine: name.to_string(),
                message: String::from("defined twice"),
            });
        }
        self.machines.push((name.to_string(), machine));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Sst> {
        self.machines
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.machines.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Sst)> + '_ {
        self.machines.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Quoted(String),
    Sym(String),
    Arrow(String),
    Punct(char),
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::Sym(s) => write!(f, "'{s}'"),
            Tok::Arrow(s) => write!(f, "-{s}->"),
            Tok::Punct(c) => write!(f, "`{c}`"),
        }
    }
}

const PUNCT: &[char] = &['{', '}', ';', ':', '='];

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !PUNCT.contains(&c) && !matches!(c, '\'' | '"' | '#')
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    column: usize,
}

type Spanned = (Tok, usize, usize);

impl Lexer {
    fn new(text: &str) -> Self {
        Lexer {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn at_arrow_end(&self) -> bool {
        self.chars.get(self.pos..self.pos + 2) == Some(&['-', '>'])
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::Syntax {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    fn quoted(&mut self, close: char) -> Result<String, FormatError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.error("unterminated quote")),
                Some('\\') => match self.bump() {
                    Some(c @ ('\\' | '\'' | '"')) => s.push(c),
                    _ => return Err(self.error("unknown escape")),
                },
                Some(c) if c == close => return Ok(s),
                Some(c) => s.push(c),
            }
        }
    }

    /// `-SYMBOL->` with the leading `-` already consumed.
    fn arrow(&mut self) -> Result<String, FormatError> {
        let sym = if self.peek() == Some('"') {
            self.bump();
            self.quoted('"')?
        } else {
            let mut s = String::new();
            while !self.at_arrow_end() {
                match self.peek() {
                    Some(c) if is_name_char(c) => s.push(c),
                    _ => return Err(self.error("expected `->`")),
                }
                self.bump();
            }
            s
        };
        if !self.at_arrow_end() {
            return Err(self.error("expected `->`"));
        }
        self.bump();
        self.bump();
        if sym.is_empty() {
            return Err(self.error("missing symbol between `-` and `->`"));
        }
        Ok(sym)
    }

    fn tokens(mut self) -> Result<Vec<Spanned>, FormatError> {
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            let (line, column) = (self.line, self.column);
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if PUNCT.contains(&c) {
                self.bump();
                out.push((Tok::Punct(c), line, column));
            } else if c == '\'' || c == '"' {
                self.bump();
                let s = self.quoted(c)?;
                let tok = if c == '\'' {
                    Tok::Sym(s)
                } else {
                    Tok::Quoted(s)
                };
                out.push((tok, line, column));
            } else if c == '-' {
                self.bump();
                out.push((Tok::Arrow(self.arrow()?), line, column));
            } else {
                let mut s = String::new();
                while self.peek().is_some_and(is_name_char) {
                    s.push(self.bump().unwrap());
                }
                out.push((Tok::Name(s), line, column));
            }
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn error_at(&self, pos: usize, message: String) -> FormatError {
        let (line, column) = self
            .toks
            .get(pos)
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or(self.end);
        FormatError::Syntax {
            line,
            column,
            message,
        }
    }

    fn unexpected(&self, wanted: &str) -> FormatError {
        let found = match self.toks.get(self.pos) {
            Some((t, _, _)) => t.to_string(),
            None => String::from("end of file"),
        };
        self.error_at(self.pos, format!("expected {wanted}, found {found}"))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }

    fn punct(&mut self, c: char) -> Result<(), FormatError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        let hit = self.peek() == Some(&Tok::Punct(c));
        self.pos += usize::from(hit);
        hit
    }

    fn name(&mut self, what: &str) -> Result<String, FormatError> {
        match self.peek() {
            Some(Tok::Name(s) | Tok::Quoted(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), FormatError> {
        match self.peek() {
            Some(Tok::Name(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.unexpected(&format!("`{kw}`"))),
        }
    }

    /// Names up to the closing `;`.
    fn name_list(&mut self, what: &str) -> Result<Vec<String>, FormatError> {
        let mut names = Vec::new();
        while !self.eat(';') {
            names.push(self.name(what)?);
        }
        Ok(names)
    }

    /// Quoted symbols and bare variables up to the closing `;`.
    fn word(&mut self) -> Result<Word, FormatError> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Punct(';')) => {
                    self.pos += 1;
                    return Ok(Word::from_items(items));
                }
                Some(Tok::Sym(s)) => items.push(Item::Sym(Symbol::new(s))),
                Some(Tok::Name(s) | Tok::Quoted(s)) => items.push(Item::Var(Var::new(s))),
                _ => return Err(self.unexpected("a quoted symbol, a variable or `;`")),
            }
            self.pos += 1;
        }
    }

    fn machine(&mut self) -> Result<(String, Sst), FormatError> {
        self.keyword("sst")?;
        let name = self.name("a machine name")?;
        self.punct('{')?;
        let mut parts = SstParts::default();
        let mut seen: BTreeSet<&'static str> = BTreeSet::new();
        let mut updates: Vec<(usize, StateId, Symbol, StateId, Vec<(Var, Word)>)> = Vec::new();
        while !self.eat('}') {
            let at = self.pos;
            let field = match self.peek() {
                Some(Tok::Name(s)) => s.clone(),
                _ => return Err(self.unexpected("a field, `trans`, `out` or `}`")),
            };
            self.pos += 1;
            let key: &'static str = match field.as_str() {
                "input" => "input",
                "output" => "output",
                "states" => "states",
                "initial" => "initial",
                "vars" => "vars",
                "trans" => {
                    let src = StateId::new(&self.name("a source state")?);
                    let symbol = match self.peek() {
                        Some(Tok::Arrow(s)) => Symbol::new(s),
                        _ => return Err(self.unexpected("`-SYMBOL->`")),
                    };
                    self.pos += 1;
                    let dst = StateId::new(&self.name("a target state")?);
                    self.punct('{')?;
                    let mut rhs = Vec::new();
                    while !self.eat('}') {
                        let v = Var::new(&self.name("a variable")?);
                        self.punct('=')?;
                        rhs.push((v, self.word()?));
                    }
                    updates.push((at, src, symbol, dst, rhs));
                    continue;
                }
                "out" => {
                    let state = StateId::new(&self.name("a state")?);
                    self.punct('=')?;
                    let word = self.word()?;
                    parts.outputs.push(OutputRule {
                        state,
                        words: BTreeSet::from([word]),
                    });
                    continue;
                }
                other => {
                    return Err(self.error_at(at, format!("unknown field `{other}`")));
                }
            };
            if !seen.insert(key) {
                return Err(self.error_at(at, format!("field `{key}` given twice")));
            }
            self.punct(':')?;
            match key {
                "input" => {
                    parts.input = self
                        .name_list("a symbol")?
                        .iter()
                        .map(|s| Symbol::new(s))
                        .collect()
                }
                "output" => {
                    parts.output = self
                        .name_list("a symbol")?
                        .iter()
                        .map(|s| Symbol::new(s))
                        .collect()
                }
                "states" => {
                    parts.states = self
                        .name_list("a state")?
                        .iter()
                        .map(|s| StateId::new(s))
                        .collect()
                }
                "vars" => {
                    parts.vars = self
                        .name_list("a variable")?
                        .iter()
                        .map(|s| Var::new(s))
                        .collect()
                }
                _ => {
                    parts.initial = Some(StateId::new(&self.name("a state")?));
                    self.punct(';')?;
                }
            }
        }
        let semantic = |message: String| FormatError::Semantic {
            machine: name.clone(),
            message,
        };
        let declared: BTreeSet<&Var> = parts.vars.iter().collect();
        for (at, src, symbol, dst, rhs) in updates {
            let mut assign = Assignment::identity(parts.vars.iter().cloned());
            let mut given = BTreeSet::new();
            for (v, w) in rhs {
                if !declared.contains(&v) {
                    return Err(semantic(format!(
                        "unknown variable `{v}` in `trans {src} -{symbol}-> {dst}`"
                    )));
                }
                if !given.insert(v.clone()) {
                    let (line, column) = (self.toks[at].1, self.toks[at].2);
                    return Err(FormatError::Syntax {
                        line,
                        column,
                        message: format!("variable `{v}` updated twice"),
                    });
                }
                assign.set(v, w);
            }
            parts.transitions.push(Transition {
                src,
                symbol,
                assign,
                dst,
            });
        }
        let machine = Sst::new(parts).map_err(|e| semantic(e.to_string()))?;
        Ok((name, machine))
    }
}

/// Parses a whole file.
pub fn parse(text: &str) -> Result<SstDocument, FormatError> {
    let lexer = Lexer::new(text);
    let toks = lexer.tokens()?;
    let end = text.lines().count().max(1);
    let end_col = text.lines().last().map_or(1, |l| l.chars().count() + 1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (end, end_col),
    };
    let mut doc = SstDocument::new();
    while p.pos < p.toks.len() {
        let (name, machine) = p.machine()?;
        doc.insert(&name, machine)?;
    }
    Ok(doc)
}

fn needs_quotes(s: &str) -> bool {
    s.is_empty()
        || s.starts_with('-')
        || !s.chars().all(is_name_char)
        || matches!(
            s,
            "sst" | "trans" | "out" | "input" | "output" | "states" | "initial" | "vars"
        )
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\")
        .replace('\'', "\\'")
        .replace('"', "\\\"")
}

fn name(s: &str) -> String {
    if needs_quotes(s) {
        format!("\"{}\"", escape(s))
    } else {
        s.to_string()
    }
}

fn arrow(s: &str) -> String {
    if needs_quotes(s) || s.contains("->") {
        format!("-\"{}\"->", escape(s))
    } else {
        format!("-{s}->")
    }
}

/// A word in file syntax: quoted symbols, bare variables.
pub fn render_word(w: &Word) -> String {
    w.items()
        .iter()
        .map(|item| match item {
            Item::Sym(s) => format!("'{}'", escape(s.as_str())),
            Item::Var(v) => name(v.as_str()),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn rhs_line(v: &Var, w: &Word) -> String {
    if w.is_empty() {
        format!("{} = ;", name(v.as_str()))
    } else {
        format!("{} = {};", name(v.as_str()), render_word(w))
    }
}

/// An assignment as the body of a `trans` block, every variable listed in `order`.
pub fn render_assignment(a: &Assignment, order: &[Var]) -> String {
    let body: Vec<String> = order
        .iter()
        .filter_map(|v| a.get(v).map(|w| rhs_line(v, w)))
        .collect();
    if body.is_empty() {
        String::from("{ }")
    } else {
        format!("{{ {} }}", body.join(" "))
    }
}

/// The header of a transition, `src -a-> dst`.
pub fn render_step(t: &Transition) -> String {
    format!(
        "{} {} {}",
        name(t.src.as_str()),
        arrow(t.symbol.as_str()),
        name(t.dst.as_str())
    )
}

fn list(names: impl Iterator<Item = String>) -> String {
    names.map(|n| format!(" {n}")).collect()
}

/// One machine block.
pub fn serialize_machine(machine_name: &str, t: &Sst) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "sst {} {{", name(machine_name));
    let _ = writeln!(
        s,
        "  input:{};",
        list(t.input().iter().map(|x| name(x.as_str())))
    );
    let _ = writeln!(
        s,
        "  output:{};",
        list(t.output().iter().map(|x| name(x.as_str())))
    );
    let _ = writeln!(
        s,
        "  states:{};",
        list(t.states().iter().map(|x| name(x.as_str())))
    );
    let _ = writeln!(s, "  initial: {};", name(t.initial().as_str()));
    let _ = writeln!(
        s,
        "  vars:{};",
        list(t.vars().iter().map(|x| name(x.as_str())))
    );
    for tr in t.transitions() {
        let _ = writeln!(
            s,
            "  trans {} {}",
            render_step(tr),
            render_assignment(&tr.assign, t.vars())
        );
    }
    for rule in t.output_rules() {
        for w in &rule.words {
            let word = render_word(w);
            let sep = if word.is_empty() { "" } else { " " };
            let _ = writeln!(s, "  out {} ={sep}{word};", name(rule.state.as_str()));
        }
    }
    s.push_str("}\n");
    s
}

/// The whole document, machines in insertion order separated by blank lines.
pub fn serialize(d: &SstDocument) -> String {
    d.iter()
        .map(|(n, t)| serialize_machine(n, t))
        .collect::<Vec<_>>()
        .join("\n")
}
