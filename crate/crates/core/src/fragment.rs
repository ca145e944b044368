//! Constant-domain satisfiability for formulas without modalised concepts,
//! for the classes C and N.
//!
//! Each distinct inclusion becomes a propositional letter. A valuation fixes
//! the letters and the boxes of the abstraction; it is consistent when the
//! inclusions it asserts and denies have a common ALC model. Valuations are
//! then eliminated until every surviving one has, for each box it falsifies,
//! witnesses among the survivors, and the formula is satisfiable iff some
//! survivor makes it true.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::semantics::FrameClass;
use crate::syntax::{normalize, Formula, Modality};
use crate::tableau::{self, SolveOptions, TableauError, Verdict};

/// Letter counts from here on are refused.
pub const MAX_LETTERS: usize = 20;
/// Most letters plus boxes a valuation may range over.
pub const MAX_ATOMS: usize = 22;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FragmentError {
    #[error("formula has a modalised concept: {0}")]
    ModalisedConcept(String),
    #[error("{0} distinct inclusions, at most {max} are supported", max = MAX_LETTERS - 1)]
    TooManyLetters(usize),
    #[error("{0} letters and boxes, at most {MAX_ATOMS} are supported")]
    TooManyAtoms(usize),
    #[error("logic {0} is not decided on constant domains, only C and N are")]
    UnsupportedLogic(FrameClass),
    #[error("ALC consistency check failed: {0}")]
    Tableau(#[from] TableauError),
}

/// True iff no box or diamond occurs inside a concept.
pub fn check_g_fragment(phi: &Formula) -> bool {
    phi.inclusions()
        .iter()
        .all(|(c, d)| !c.is_modalised() && !d.is_modalised())
}

/// The propositional skeleton of a formula, letters standing for inclusions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Prop {
    Letter(usize),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Box(Modality, Box<Prop>),
    Dia(Modality, Box<Prop>),
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prop::Letter(l) => write!(f, "p{}", l + 1),
            Prop::Not(p) => write!(f, "(not {p})"),
            Prop::And(a, b) => write!(f, "(and {a} {b})"),
            Prop::Or(a, b) => write!(f, "(or {a} {b})"),
            Prop::Box(i, p) => write!(f, "(box {i} {p})"),
            Prop::Dia(i, p) => write!(f, "(dia {i} {p})"),
        }
    }
}

/// Node of the shared subformula graph. `Or` and `Dia` are expressed through
/// `Not`, `And` and `Box`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Letter(usize),
    Not(usize),
    And(usize, usize),
    Box(Modality, usize),
}

#[derive(Clone, Debug)]
pub struct Abstraction {
    pub prop: Prop,
    /// Letter `i` (printed `p{i+1}`) stands for `letters[i]`.
    pub letters: Vec<Formula>,
    nodes: Vec<Node>,
    index: HashMap<Node, usize>,
    root: usize,
}

#[derive(Serialize)]
struct AbstractionJson {
    formula: String,
    letters: BTreeMap<String, String>,
}

impl Abstraction {
    pub fn letter_name(&self, l: usize) -> String {
        format!("p{}", l + 1)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let letters = self
            .letters
            .iter()
            .enumerate()
            .map(|(l, ci)| (self.letter_name(l), ci.to_string()))
            .collect();
        serde_json::to_value(AbstractionJson {
            formula: self.prop.to_string(),
            letters,
        })
        .expect("abstraction serializes")
    }

    /// Number of distinct subformulas after desugaring.
    pub fn subformulas(&self) -> usize {
        self.nodes.len()
    }

    fn intern(&mut self, node: Node) -> usize {
        if let Node::Not(inner) = node {
            if let Node::Not(back) = self.nodes[inner] {
                return back;
            }
        }
        if let Some(&id) = self.index.get(&node) {
            return id;
        }
        self.nodes.push(node);
        self.index.insert(node, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    fn lower(&mut self, p: &Prop) -> usize {
        match p {
            Prop::Letter(l) => self.intern(Node::Letter(*l)),
            Prop::Not(q) => {
                let q = self.lower(q);
                self.intern(Node::Not(q))
            }
            Prop::And(a, b) => {
                let (a, b) = (self.lower(a), self.lower(b));
                self.intern(Node::And(a, b))
            }
            Prop::Or(a, b) => {
                let (a, b) = (self.lower(a), self.lower(b));
                let (na, nb) = (self.intern(Node::Not(a)), self.intern(Node::Not(b)));
                let and = self.intern(Node::And(na, nb));
                self.intern(Node::Not(and))
            }
            Prop::Box(i, q) => {
                let q = self.lower(q);
                self.intern(Node::Box(*i, q))
            }
            Prop::Dia(i, q) => {
                let q = self.lower(q);
                let nq = self.intern(Node::Not(q));
                let b = self.intern(Node::Box(*i, nq));
                self.intern(Node::Not(b))
            }
        }
    }

    /// Letters and boxes: the nodes a valuation chooses freely.
    fn atoms(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&n| matches!(self.nodes[n], Node::Letter(_) | Node::Box(..)))
            .collect()
    }
}

/// Replaces every inclusion of the normalized formula by a letter, equal
/// inclusions sharing one.
pub fn prop_abstraction(phi: &Formula) -> Result<Abstraction, FragmentError> {
    if !check_g_fragment(phi) {
        return Err(FragmentError::ModalisedConcept(phi.to_string()));
    }
    let phi = normalize(phi);
    let mut letters = Vec::new();
    let prop = skeleton(&phi, &mut letters);
    let mut abs = Abstraction {
        prop,
        letters,
        nodes: Vec::new(),
        index: HashMap::new(),
        root: 0,
    };
    let prop = abs.prop.clone();
    abs.root = abs.lower(&prop);
    Ok(abs)
}

fn skeleton(phi: &Formula, letters: &mut Vec<Formula>) -> Prop {
    match phi {
        Formula::Sub(..) => {
            let l = letters.iter().position(|f| f == phi).unwrap_or_else(|| {
                letters.push(phi.clone());
                letters.len() - 1
            });
            Prop::Letter(l)
        }
        Formula::Not(f) => Prop::Not(Box::new(skeleton(f, letters))),
        Formula::And(a, b) => Prop::And(
            Box::new(skeleton(a, letters)),
            Box::new(skeleton(b, letters)),
        ),
        Formula::Or(a, b) => Prop::Or(
            Box::new(skeleton(a, letters)),
            Box::new(skeleton(b, letters)),
        ),
        Formula::Necessarily(i, f) => Prop::Box(*i, Box::new(skeleton(f, letters))),
        Formula::Possibly(i, f) => Prop::Dia(*i, Box::new(skeleton(f, letters))),
    }
}

/// Truth values for every subformula, fixed by the letters and boxes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Valuation {
    values: FixedBitSet,
    letters: u32,
}

impl Valuation {
    fn new(abs: &Abstraction, atoms: &[usize], mask: u32) -> Self {
        let mut values = FixedBitSet::with_capacity(abs.nodes.len());
        for (k, &a) in atoms.iter().enumerate() {
            values.set(a, mask & (1 << k) != 0);
        }
        let mut letters = 0;
        // children are interned before their parents
        for (n, node) in abs.nodes.iter().enumerate() {
            match *node {
                Node::Letter(l) => {
                    if values[n] {
                        letters |= 1 << l;
                    }
                }
                Node::Not(a) => values.set(n, !values[a]),
                Node::And(a, b) => values.set(n, values[a] && values[b]),
                Node::Box(..) => {}
            }
        }
        Valuation { values, letters }
    }

    pub fn value(&self, node: usize) -> bool {
        self.values[node]
    }

    /// Bitmap of the letters set to 1.
    pub fn letters(&self) -> u32 {
        self.letters
    }
}

/// Evaluates `(⋀ conj) ≠ other` under a valuation; an empty conjunction is
/// true.
fn differs(v: &Valuation, conj: &[usize], other: usize) -> bool {
    conj.iter().all(|&n| v.value(n)) != v.value(other)
}

/// Decides the ALC satisfiability of the inclusions a letter bitmap asserts
/// and denies, memoized by bitmap.
pub struct AlcOracle<'a> {
    letters: &'a [Formula],
    memo: HashMap<u32, bool>,
    opts: SolveOptions,
}

impl<'a> AlcOracle<'a> {
    pub fn new(letters: &'a [Formula]) -> Self {
        AlcOracle {
            letters,
            memo: HashMap::new(),
            opts: SolveOptions::default(),
        }
    }

    pub fn consistent(&mut self, bitmap: u32) -> Result<bool, TableauError> {
        if let Some(&v) = self.memo.get(&bitmap) {
            return Ok(v);
        }
        let parts = self
            .letters
            .iter()
            .enumerate()
            .map(|(l, ci)| {
                if bitmap & (1 << l) != 0 {
                    ci.clone()
                } else {
                    ci.neg_nnf()
                }
            })
            .collect();
        let phi = Formula::conjunction(parts).unwrap_or_else(Formula::truth);
        let v = tableau::solve(&phi, FrameClass::E, &self.opts)?.verdict == Verdict::Sat;
        self.memo.insert(bitmap, v);
        Ok(v)
    }

    pub fn checks(&self) -> usize {
        self.memo.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FragmentStats {
    pub letters: usize,
    pub atoms: usize,
    pub consistent_valuations: usize,
    pub surviving_valuations: usize,
    pub rounds: usize,
    pub alc_checks: usize,
}

#[derive(Clone, Debug)]
pub struct FragmentOutcome {
    pub verdict: Verdict,
    pub stats: FragmentStats,
}

/// A witness requirement: some valuation must make `⋀ conj` and `other`
/// differ.
type Pattern = (Vec<usize>, usize);

fn patterns(abs: &Abstraction, class: FrameClass, v: &Valuation) -> Vec<Pattern> {
    let mut by_modality: BTreeMap<Modality, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for node in &abs.nodes {
        if let Node::Box(i, arg) = *node {
            let (ones, zeros) = by_modality.entry(i).or_default();
            let n = abs.index[node];
            if v.value(n) {
                ones.push(arg);
            } else {
                zeros.push(arg);
            }
        }
    }
    let mut out = Vec::new();
    for (ones, zeros) in by_modality.values() {
        for &z in zeros {
            match class {
                FrameClass::N => {
                    out.push((Vec::new(), z));
                    out.extend(ones.iter().map(|&o| (vec![o], z)));
                }
                _ => {
                    for mask in 1u64..(1 << ones.len()) {
                        let s = (0..ones.len())
                            .filter(|k| mask & (1 << k) != 0)
                            .map(|k| ones[k])
                            .collect();
                        out.push((s, z));
                    }
                }
            }
        }
    }
    out
}

/// Decides constant-domain satisfiability under C or N.
pub fn solve_fragment(phi: &Formula, class: FrameClass) -> Result<FragmentOutcome, FragmentError> {
    if !matches!(class, FrameClass::C | FrameClass::N) {
        return Err(FragmentError::UnsupportedLogic(class));
    }
    let abs = prop_abstraction(phi)?;
    if abs.letters.len() >= MAX_LETTERS {
        return Err(FragmentError::TooManyLetters(abs.letters.len()));
    }
    let atoms = abs.atoms();
    if atoms.len() > MAX_ATOMS {
        return Err(FragmentError::TooManyAtoms(atoms.len()));
    }
    let mut alc = AlcOracle::new(&abs.letters);
    let mut current = Vec::new();
    for mask in 0..(1u32 << atoms.len()) {
        let v = Valuation::new(&abs, &atoms, mask);
        if alc.consistent(v.letters)? {
            current.push(v);
        }
    }
    let consistent_valuations = current.len();
    let requirements: Vec<Vec<Pattern>> =
        current.iter().map(|v| patterns(&abs, class, v)).collect();
    let mut alive = vec![true; current.len()];
    let mut rounds = 0;
    loop {
        rounds += 1;
        let mut met: HashMap<&Pattern, bool> = HashMap::new();
        let mut next = alive.clone();
        for (k, reqs) in requirements.iter().enumerate() {
            if !alive[k] {
                continue;
            }
            for p in reqs {
                let ok = *met.entry(p).or_insert_with(|| {
                    current
                        .iter()
                        .zip(&alive)
                        .any(|(w, &a)| a && differs(w, &p.0, p.1))
                });
                if !ok {
                    next[k] = false;
                    break;
                }
            }
        }
        if next == alive {
            break;
        }
        alive = next;
    }
    let surviving: Vec<&Valuation> = current
        .iter()
        .zip(&alive)
        .filter(|(_, &a)| a)
        .map(|(v, _)| v)
        .collect();
    let sat = surviving.iter().any(|v| v.value(abs.root));
    Ok(FragmentOutcome {
        verdict: if sat { Verdict::Sat } else { Verdict::Unsat },
        stats: FragmentStats {
            letters: abs.letters.len(),
            atoms: atoms.len(),
            consistent_valuations,
            surviving_valuations: surviving.len(),
            rounds,
            alc_checks: alc.checks(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CorpusConfig, Generator};
    use crate::oracle::{brute_force_sat, OracleBounds, OracleVerdict};
    use crate::syntax::{parse_formula, Concept};

    fn ci(name: &str) -> Formula {
        Formula::global(Concept::atom(name))
    }

    fn verdict(phi: &Formula, class: FrameClass) -> Verdict {
        solve_fragment(phi, class).unwrap().verdict
    }

    #[test]
    fn fragment_membership() {
        assert!(check_g_fragment(&Formula::nec(1, ci("A"))));
        assert!(!check_g_fragment(&Formula::global(Concept::nec(
            1,
            Concept::atom("A")
        ))));
        let nested = parse_formula("(box 1 (not (sub (atom A) (dia 2 (atom B)))))").unwrap();
        assert!(!check_g_fragment(&nested));
        assert!(matches!(
            prop_abstraction(&nested),
            Err(FragmentError::ModalisedConcept(_))
        ));
    }

    #[test]
    fn abstraction_shares_letters() {
        let abs = prop_abstraction(&Formula::and(ci("A"), Formula::nec(1, ci("A")))).unwrap();
        assert_eq!(abs.prop.to_string(), "(and p1 (box 1 p1))");
        assert_eq!(abs.letters.len(), 1);
        let abs = prop_abstraction(&Formula::not(ci("A"))).unwrap();
        assert_eq!(abs.prop.to_string(), "(not p1)");
        let abs = prop_abstraction(&Formula::or(ci("A"), ci("B"))).unwrap();
        assert_eq!(abs.letters.len(), 2);
        assert_eq!(
            abs.to_json().to_string(),
            r#"{"formula":"(or p1 p2)","letters":{"p1":"(sub top (atom A))","p2":"(sub top (atom B))"}}"#
        );
    }

    #[test]
    fn desugaring_collapses_double_negation() {
        // ◇¬p becomes ¬□p and reuses the box node of □p
        let phi = Formula::and(
            Formula::nec(1, ci("A")),
            Formula::poss(1, Formula::not(ci("A"))),
        );
        let abs = prop_abstraction(&phi).unwrap();
        assert_eq!(abs.atoms().len(), 2);
    }

    #[test]
    fn alc_consistency() {
        let letters = vec![ci("A"), Formula::global(Concept::not(Concept::atom("A")))];
        let mut alc = AlcOracle::new(&letters);
        assert!(!alc.consistent(0b11).unwrap());
        assert!(alc.consistent(0b00).unwrap());
        let letters = vec![ci("A"), ci("B")];
        let mut alc = AlcOracle::new(&letters);
        assert!(alc.consistent(0b01).unwrap());
        assert_eq!(alc.checks(), 1);
    }

    #[test]
    fn eval_witnesses() {
        let abs = prop_abstraction(&Formula::and(ci("A"), Formula::not(ci("B")))).unwrap();
        let atoms = abs.atoms();
        let v = Valuation::new(&abs, &atoms, 0b01);
        assert!(v.value(abs.root));
        assert!(differs(&v, &[atoms[0]], atoms[1]));
        assert!(!differs(&v, &[], atoms[0]));
        assert!(differs(&v, &[], atoms[1]));
    }

    #[test]
    fn reference_verdicts() {
        let (p, q) = (ci("A"), ci("B"));
        let b = Formula::conjunction(vec![
            Formula::nec(1, p.clone()),
            Formula::nec(1, q.clone()),
            Formula::not(Formula::nec(1, Formula::and(p.clone(), q))),
        ])
        .unwrap();
        assert_eq!(verdict(&b, FrameClass::C), Verdict::Unsat);
        assert_eq!(verdict(&b, FrameClass::N), Verdict::Sat);
        let c = Formula::poss(1, Formula::not(Formula::truth()));
        assert_eq!(verdict(&c, FrameClass::N), Verdict::Unsat);
        assert_eq!(verdict(&c, FrameClass::C), Verdict::Sat);
        for class in [FrameClass::C, FrameClass::N] {
            assert_eq!(verdict(&Formula::nec(1, p.clone()), class), Verdict::Sat);
        }
        assert!(matches!(
            solve_fragment(&p, FrameClass::M),
            Err(FragmentError::UnsupportedLogic(FrameClass::M))
        ));
    }

    #[test]
    fn elimination_is_decreasing() {
        let phi =
            parse_formula("(and (box 1 (sub top (atom A))) (dia 1 (sub top (not (atom A)))))")
                .unwrap();
        let out = solve_fragment(&phi, FrameClass::N).unwrap();
        assert!(out.stats.surviving_valuations <= out.stats.consistent_valuations);
        assert!(out.stats.rounds <= out.stats.consistent_valuations + 1);
    }

    #[test]
    fn agrees_with_constant_domain_oracle() {
        let mut g = Generator::new(29, CorpusConfig::g_fragment());
        for _ in 0..40 {
            let phi = g.normalized();
            for class in [FrameClass::C, FrameClass::N] {
                let ours = verdict(&phi, class);
                let oracle = brute_force_sat(&phi, class, OracleBounds::constant(2, 2)).unwrap();
                if oracle.verdict == OracleVerdict::Sat {
                    assert_eq!(ours, Verdict::Sat, "{phi} {class}");
                }
            }
        }
    }
}
