//! Concepts and formulas of the multi-modal description logic, together with
//! the s-expression front end, negation normal form and closure sets.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Index of a modal operator; always at least 1.
pub type Modality = u32;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Concept {
    Atomic(String),
    Top,
    Bot,
    Not(Box<Concept>),
    And(Box<Concept>, Box<Concept>),
    Or(Box<Concept>, Box<Concept>),
    Exists(String, Box<Concept>),
    Forall(String, Box<Concept>),
    Necessarily(Modality, Box<Concept>),
    Possibly(Modality, Box<Concept>),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    /// Concept inclusion `C ⊑ D`.
    Sub(Concept, Concept),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Necessarily(Modality, Box<Formula>),
    Possibly(Modality, Box<Formula>),
}

// Short constructors, used heavily by tests and the corpus generator.
impl Concept {
    pub fn atom(name: impl Into<String>) -> Self {
        Concept::Atomic(name.into())
    }
    pub fn not(c: Concept) -> Self {
        Concept::Not(Box::new(c))
    }
    pub fn and(a: Concept, b: Concept) -> Self {
        Concept::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Concept, b: Concept) -> Self {
        Concept::Or(Box::new(a), Box::new(b))
    }
    pub fn some(role: impl Into<String>, c: Concept) -> Self {
        Concept::Exists(role.into(), Box::new(c))
    }
    pub fn all(role: impl Into<String>, c: Concept) -> Self {
        Concept::Forall(role.into(), Box::new(c))
    }
    pub fn nec(i: Modality, c: Concept) -> Self {
        Concept::Necessarily(i, Box::new(c))
    }
    pub fn poss(i: Modality, c: Concept) -> Self {
        Concept::Possibly(i, Box::new(c))
    }
}

impl Formula {
    pub fn sub(c: Concept, d: Concept) -> Self {
        Formula::Sub(c, d)
    }
    /// `⊤ ⊑ C`
    pub fn global(c: Concept) -> Self {
        Formula::Sub(Concept::Top, c)
    }
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }
    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn nec(i: Modality, f: Formula) -> Self {
        Formula::Necessarily(i, Box::new(f))
    }
    pub fn poss(i: Modality, f: Formula) -> Self {
        Formula::Possibly(i, Box::new(f))
    }
    /// `⊥ ⊑ ⊤`
    pub fn truth() -> Self {
        Formula::Sub(Concept::Bot, Concept::Top)
    }

    /// Conjunction of a non-empty list, folded to the right.
    pub fn conjunction(mut parts: Vec<Formula>) -> Option<Formula> {
        let mut acc = parts.pop()?;
        while let Some(f) = parts.pop() {
            acc = Formula::and(f, acc);
        }
        Some(acc)
    }
}

// ---------------------------------------------------------------------------
// Negation normal form
// ---------------------------------------------------------------------------

impl Concept {
    pub fn nnf(&self) -> Concept {
        match self {
            Concept::Atomic(_) | Concept::Top | Concept::Bot => self.clone(),
            Concept::Not(inner) => inner.nnf().neg_nnf(),
            Concept::And(a, b) => Concept::and(a.nnf(), b.nnf()),
            Concept::Or(a, b) => Concept::or(a.nnf(), b.nnf()),
            Concept::Exists(r, c) => Concept::some(r.clone(), c.nnf()),
            Concept::Forall(r, c) => Concept::all(r.clone(), c.nnf()),
            Concept::Necessarily(i, c) => Concept::nec(*i, c.nnf()),
            Concept::Possibly(i, c) => Concept::poss(*i, c.nnf()),
        }
    }

    /// Negation pushed through to the atoms. Expects an NNF argument.
    pub fn neg_nnf(&self) -> Concept {
        match self {
            Concept::Atomic(_) => Concept::not(self.clone()),
            Concept::Top => Concept::Bot,
            Concept::Bot => Concept::Top,
            Concept::Not(inner) => match inner.as_ref() {
                Concept::Atomic(_) => (**inner).clone(),
                // not NNF; normalise on the way
                other => other.nnf(),
            },
            Concept::And(a, b) => Concept::or(a.neg_nnf(), b.neg_nnf()),
            Concept::Or(a, b) => Concept::and(a.neg_nnf(), b.neg_nnf()),
            Concept::Exists(r, c) => Concept::all(r.clone(), c.neg_nnf()),
            Concept::Forall(r, c) => Concept::some(r.clone(), c.neg_nnf()),
            Concept::Necessarily(i, c) => Concept::poss(*i, c.neg_nnf()),
            Concept::Possibly(i, c) => Concept::nec(*i, c.neg_nnf()),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Concept::Atomic(_) | Concept::Top | Concept::Bot => true,
            Concept::Not(inner) => matches!(inner.as_ref(), Concept::Atomic(_)),
            Concept::And(a, b) | Concept::Or(a, b) => a.is_nnf() && b.is_nnf(),
            Concept::Exists(_, c)
            | Concept::Forall(_, c)
            | Concept::Necessarily(_, c)
            | Concept::Possibly(_, c) => c.is_nnf(),
        }
    }

    pub fn weight(&self) -> usize {
        match self {
            Concept::Atomic(_) | Concept::Top | Concept::Bot | Concept::Not(_) => 0,
            Concept::And(a, b) | Concept::Or(a, b) => a.weight() + b.weight() + 1,
            Concept::Exists(_, c)
            | Concept::Forall(_, c)
            | Concept::Necessarily(_, c)
            | Concept::Possibly(_, c) => c.weight() + 1,
        }
    }

    /// True if a box or diamond occurs anywhere in the concept.
    pub fn is_modalised(&self) -> bool {
        match self {
            Concept::Atomic(_) | Concept::Top | Concept::Bot => false,
            Concept::Not(c) | Concept::Exists(_, c) | Concept::Forall(_, c) => c.is_modalised(),
            Concept::And(a, b) | Concept::Or(a, b) => a.is_modalised() || b.is_modalised(),
            Concept::Necessarily(..) | Concept::Possibly(..) => true,
        }
    }

    fn collect_subterms(&self, out: &mut BTreeSet<Concept>) {
        if !out.insert(self.clone()) {
            return;
        }
        match self {
            Concept::Atomic(_) | Concept::Top | Concept::Bot => {}
            Concept::Not(c)
            | Concept::Exists(_, c)
            | Concept::Forall(_, c)
            | Concept::Necessarily(_, c)
            | Concept::Possibly(_, c) => c.collect_subterms(out),
            Concept::And(a, b) | Concept::Or(a, b) => {
                a.collect_subterms(out);
                b.collect_subterms(out);
            }
        }
    }

    fn collect_signature(&self, sig: &mut Signature) {
        match self {
            Concept::Atomic(a) => {
                sig.concepts.insert(a.clone());
            }
            Concept::Top | Concept::Bot => {}
            Concept::Not(c) => c.collect_signature(sig),
            Concept::And(a, b) | Concept::Or(a, b) => {
                a.collect_signature(sig);
                b.collect_signature(sig);
            }
            Concept::Exists(r, c) | Concept::Forall(r, c) => {
                sig.roles.insert(r.clone());
                c.collect_signature(sig);
            }
            Concept::Necessarily(i, c) | Concept::Possibly(i, c) => {
                sig.modalities = sig.modalities.max(*i);
                c.collect_signature(sig);
            }
        }
    }
}

impl Formula {
    pub fn nnf(&self) -> Formula {
        match self {
            Formula::Sub(c, d) => Formula::Sub(c.nnf(), d.nnf()),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Sub(c, d) => Formula::not(Formula::Sub(c.nnf(), d.nnf())),
                other => other.nnf().neg_nnf(),
            },
            Formula::And(a, b) => Formula::and(a.nnf(), b.nnf()),
            Formula::Or(a, b) => Formula::or(a.nnf(), b.nnf()),
            Formula::Necessarily(i, f) => Formula::nec(*i, f.nnf()),
            Formula::Possibly(i, f) => Formula::poss(*i, f.nnf()),
        }
    }

    /// Negation pushed down to the concept inclusions. Expects an NNF argument.
    pub fn neg_nnf(&self) -> Formula {
        match self {
            Formula::Sub(..) => Formula::not(self.clone()),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Sub(..) => (**inner).clone(),
                other => other.nnf(),
            },
            Formula::And(a, b) => Formula::or(a.neg_nnf(), b.neg_nnf()),
            Formula::Or(a, b) => Formula::and(a.neg_nnf(), b.neg_nnf()),
            Formula::Necessarily(i, f) => Formula::poss(*i, f.neg_nnf()),
            Formula::Possibly(i, f) => Formula::nec(*i, f.neg_nnf()),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::Sub(c, d) => c.is_nnf() && d.is_nnf(),
            Formula::Not(inner) => match inner.as_ref() {
                Formula::Sub(c, d) => c.is_nnf() && d.is_nnf(),
                _ => false,
            },
            Formula::And(a, b) | Formula::Or(a, b) => a.is_nnf() && b.is_nnf(),
            Formula::Necessarily(_, f) | Formula::Possibly(_, f) => f.is_nnf(),
        }
    }

    /// NNF with every inclusion in the form `⊤ ⊑ C`.
    pub fn is_normalized(&self) -> bool {
        self.is_nnf()
            && self
                .inclusions()
                .iter()
                .all(|(lhs, _)| **lhs == Concept::Top)
    }

    pub fn weight(&self) -> usize {
        match self {
            Formula::Sub(..) | Formula::Not(_) => 0,
            Formula::And(a, b) | Formula::Or(a, b) => a.weight() + b.weight() + 1,
            Formula::Necessarily(_, f) | Formula::Possibly(_, f) => f.weight() + 1,
        }
    }

    /// Every concept inclusion occurring in the formula, left to right.
    pub fn inclusions(&self) -> Vec<(&Concept, &Concept)> {
        let mut out = Vec::new();
        self.walk_inclusions(&mut out);
        out
    }

    fn walk_inclusions<'a>(&'a self, out: &mut Vec<(&'a Concept, &'a Concept)>) {
        match self {
            Formula::Sub(c, d) => out.push((c, d)),
            Formula::Not(f) | Formula::Necessarily(_, f) | Formula::Possibly(_, f) => {
                f.walk_inclusions(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.walk_inclusions(out);
                b.walk_inclusions(out);
            }
        }
    }

    /// Length of the longest chain of nested formula-level modal operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::Sub(..) => 0,
            Formula::Not(f) => f.modal_depth(),
            Formula::And(a, b) | Formula::Or(a, b) => a.modal_depth().max(b.modal_depth()),
            Formula::Necessarily(_, f) | Formula::Possibly(_, f) => f.modal_depth() + 1,
        }
    }

    pub fn signature(&self) -> Signature {
        let mut sig = Signature::default();
        self.collect_signature(&mut sig);
        sig
    }

    fn collect_signature(&self, sig: &mut Signature) {
        match self {
            Formula::Sub(c, d) => {
                c.collect_signature(sig);
                d.collect_signature(sig);
            }
            Formula::Not(f) => f.collect_signature(sig),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_signature(sig);
                b.collect_signature(sig);
            }
            Formula::Necessarily(i, f) | Formula::Possibly(i, f) => {
                sig.modalities = sig.modalities.max(*i);
                f.collect_signature(sig);
            }
        }
    }

    fn collect_subterms(&self, formulas: &mut BTreeSet<Formula>, concepts: &mut BTreeSet<Concept>) {
        if !formulas.insert(self.clone()) {
            return;
        }
        match self {
            Formula::Sub(c, d) => {
                c.collect_subterms(concepts);
                d.collect_subterms(concepts);
            }
            Formula::Not(f) | Formula::Necessarily(_, f) | Formula::Possibly(_, f) => {
                f.collect_subterms(formulas, concepts)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_subterms(formulas, concepts);
                b.collect_subterms(formulas, concepts);
            }
        }
    }
}

/// Rewrites every inclusion `C ⊑ D` to `⊤ ⊑ ¬C ⊔ D` and puts the result in
/// negation normal form. Inclusions that already have `⊤` on the left keep
/// their right-hand side.
pub fn normalize(phi: &Formula) -> Formula {
    fn internalise(f: &Formula) -> Formula {
        match f {
            Formula::Sub(Concept::Top, d) => Formula::global(d.nnf()),
            Formula::Sub(c, d) => Formula::global(Concept::or(c.nnf().neg_nnf(), d.nnf())),
            Formula::Not(g) => Formula::not(internalise(g)),
            Formula::And(a, b) => Formula::and(internalise(a), internalise(b)),
            Formula::Or(a, b) => Formula::or(internalise(a), internalise(b)),
            Formula::Necessarily(i, g) => Formula::nec(*i, internalise(g)),
            Formula::Possibly(i, g) => Formula::poss(*i, internalise(g)),
        }
    }
    internalise(phi).nnf()
}

/// Concept names, role names and the largest modality index of a formula.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub concepts: BTreeSet<String>,
    pub roles: BTreeSet<String>,
    pub modalities: Modality,
}

/// The closure sets `con¬`, `for¬` and `rol` of a normalized formula.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Closure {
    pub con_neg: BTreeSet<Concept>,
    pub for_neg: BTreeSet<Formula>,
    pub rol: BTreeSet<String>,
}

impl Closure {
    pub fn fg_size(&self) -> usize {
        self.con_neg.len() + self.for_neg.len() + self.rol.len()
    }
}

pub fn closure(phi: &Formula) -> Closure {
    let mut formulas = BTreeSet::new();
    let mut concepts = BTreeSet::new();
    phi.collect_subterms(&mut formulas, &mut concepts);
    let for_neg = formulas
        .iter()
        .flat_map(|f| [f.clone(), f.neg_nnf()])
        .collect();
    let con_neg = concepts
        .iter()
        .flat_map(|c| [c.clone(), c.neg_nnf()])
        .collect();
    Closure {
        con_neg,
        for_neg,
        rol: phi.signature().roles,
    }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

impl fmt::Display for Concept {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concept::Atomic(a) => write!(f, "(atom {a})"),
            Concept::Top => f.write_str("top"),
            Concept::Bot => f.write_str("bot"),
            Concept::Not(c) => write!(f, "(not {c})"),
            Concept::And(a, b) => write!(f, "(and {a} {b})"),
            Concept::Or(a, b) => write!(f, "(or {a} {b})"),
            Concept::Exists(r, c) => write!(f, "(some {r} {c})"),
            Concept::Forall(r, c) => write!(f, "(all {r} {c})"),
            Concept::Necessarily(i, c) => write!(f, "(box {i} {c})"),
            Concept::Possibly(i, c) => write!(f, "(dia {i} {c})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Sub(c, d) => write!(f, "(sub {c} {d})"),
            Formula::Not(g) => write!(f, "(not {g})"),
            Formula::And(a, b) => write!(f, "(and {a} {b})"),
            Formula::Or(a, b) => write!(f, "(or {a} {b})"),
            Formula::Necessarily(i, g) => write!(f, "(box {i} {g})"),
            Formula::Possibly(i, g) => write!(f, "(dia {i} {g})"),
        }
    }
}

pub fn serialize(phi: &Formula) -> String {
    phi.to_string()
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Open,
    Close,
    Word(String),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut column = 1;
    let mut chars = text.chars().peekable();
    while let Some(&ch) = chars.peek() {
        let (l, c) = (line, column);
        match ch {
            '(' | ')' => {
                chars.next();
                column += 1;
                out.push(Token {
                    tok: if ch == '(' { Tok::Open } else { Tok::Close },
                    line: l,
                    column: c,
                });
            }
            '\n' => {
                chars.next();
                line += 1;
                column = 1;
            }
            ch if ch.is_whitespace() => {
                chars.next();
                column += 1;
            }
            _ => {
                let mut word = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch == '(' || ch == ')' || ch.is_whitespace() {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                    column += 1;
                }
                out.push(Token {
                    tok: Tok::Word(word),
                    line: l,
                    column: c,
                });
            }
        }
    }
    out
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Self {
        let tokens = tokenize(text);
        let lines: Vec<&str> = text.split('\n').collect();
        let end = (
            lines.len(),
            lines.last().map_or(0, |l| l.chars().count()) + 1,
        );
        Parser {
            tokens,
            pos: 0,
            end,
        }
    }

    fn error_at(&self, pos: usize, message: impl Into<String>) -> ParseError {
        let (line, column) = self
            .tokens
            .get(pos)
            .map_or(self.end, |t| (t.line, t.column));
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }

    fn next(&mut self, what: &str) -> Result<Tok, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.tok.clone())
            }
            None => Err(self.error_at(
                self.pos,
                format!("unexpected end of input, expected {what}"),
            )),
        }
    }

    fn expect_close(&mut self) -> Result<(), ParseError> {
        let at = self.pos;
        match self.next("`)`")? {
            Tok::Close => Ok(()),
            _ => Err(self.error_at(at, "expected `)`")),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        let at = self.pos;
        match self.next(what)? {
            Tok::Word(w) => Ok((w, at)),
            _ => Err(self.error_at(at, format!("expected {what}"))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let (w, at) = self.word("identifier")?;
        let mut chars = w.chars();
        let valid = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if !valid {
            return Err(self.error_at(at, format!("invalid identifier `{w}`")));
        }
        Ok(w)
    }

    fn modality(&mut self) -> Result<Modality, ParseError> {
        let (w, at) = self.word("modality index")?;
        match w.parse::<i64>() {
            Ok(i) if i >= 1 && i <= i64::from(Modality::MAX) => Ok(i as Modality),
            Ok(_) => Err(self.error_at(at, format!("modality index must be at least 1, got {w}"))),
            Err(_) => Err(self.error_at(at, format!("expected modality index, found `{w}`"))),
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let at = self.pos;
        match self.next("formula")? {
            Tok::Open => {}
            Tok::Close => return Err(self.error_at(at, "expected formula, found `)`")),
            Tok::Word(w) if w == "top" || w == "bot" => {
                return Err(self.error_at(at, format!("`{w}` is a concept, expected a formula")))
            }
            Tok::Word(w) => return Err(self.error_at(at, format!("expected formula, found `{w}`"))),
        }
        let (head, head_at) = self.word("keyword")?;
        let f = match head.as_str() {
            "sub" => {
                let c = self.concept()?;
                let d = self.concept()?;
                Formula::Sub(c, d)
            }
            "not" => Formula::not(self.formula()?),
            "and" => {
                let a = self.formula()?;
                Formula::and(a, self.formula()?)
            }
            "or" => {
                let a = self.formula()?;
                Formula::or(a, self.formula()?)
            }
            "box" => {
                let i = self.modality()?;
                Formula::nec(i, self.formula()?)
            }
            "dia" => {
                let i = self.modality()?;
                Formula::poss(i, self.formula()?)
            }
            "atom" | "some" | "all" => {
                return Err(self.error_at(
                    head_at,
                    format!("`{head}` builds a concept, expected a formula"),
                ))
            }
            other => return Err(self.error_at(head_at, format!("unknown keyword `{other}`"))),
        };
        self.expect_close()?;
        Ok(f)
    }

    fn concept(&mut self) -> Result<Concept, ParseError> {
        let at = self.pos;
        match self.next("concept")? {
            Tok::Open => {}
            Tok::Close => return Err(self.error_at(at, "expected concept, found `)`")),
            Tok::Word(w) if w == "top" => return Ok(Concept::Top),
            Tok::Word(w) if w == "bot" => return Ok(Concept::Bot),
            Tok::Word(w) => return Err(self.error_at(at, format!("expected concept, found `{w}`"))),
        }
        let (head, head_at) = self.word("keyword")?;
        let c = match head.as_str() {
            "atom" => Concept::Atomic(self.ident()?),
            "not" => Concept::not(self.concept()?),
            "and" => {
                let a = self.concept()?;
                Concept::and(a, self.concept()?)
            }
            "or" => {
                let a = self.concept()?;
                Concept::or(a, self.concept()?)
            }
            "some" => {
                let r = self.ident()?;
                Concept::some(r, self.concept()?)
            }
            "all" => {
                let r = self.ident()?;
                Concept::all(r, self.concept()?)
            }
            "box" => {
                let i = self.modality()?;
                Concept::nec(i, self.concept()?)
            }
            "dia" => {
                let i = self.modality()?;
                Concept::poss(i, self.concept()?)
            }
            "sub" => {
                return Err(self.error_at(head_at, "`sub` builds a formula, expected a concept"))
            }
            other => return Err(self.error_at(head_at, format!("unknown keyword `{other}`"))),
        };
        self.expect_close()?;
        Ok(c)
    }

    fn finish(&self) -> Result<(), ParseError> {
        if self.pos < self.tokens.len() {
            return Err(self.error_at(self.pos, "trailing input after formula"));
        }
        Ok(())
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text);
    let f = p.formula()?;
    p.finish()?;
    Ok(f)
}

pub fn parse_concept(text: &str) -> Result<Concept, ParseError> {
    let mut p = Parser::new(text);
    let c = p.concept()?;
    p.finish()?;
    Ok(c)
}
