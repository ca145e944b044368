//! Labelled tableau for the four logics.
//!
//! Concepts, formulas and role names of the closure of the input are interned
//! once; constraint systems store ids in bitsets. The search is a depth-first
//! walk over branch choices with chronological backtracking: the completion
//! set is snapshotted at every branching point.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::extraction::{self, ExtractionError};
use crate::logic::{logic_for, ModalLogic};
use crate::semantics::{FrameClass, NeighbourhoodModel};
use crate::syntax::{closure, normalize, Closure, Concept, Formula, Modality};

pub type ConceptId = u32;
pub type FormulaId = u32;
pub type RoleId = u32;
pub type Var = u32;
pub type Label = usize;

pub const DEFAULT_CAP_STEPS: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableauError {
    #[error("step cap of {0} rule applications exceeded")]
    StepCap(u64),
    #[error("label count {labels} exceeds the termination bound {bound}")]
    LabelBound { labels: usize, bound: u128 },
    #[error("label {label} holds {size} constraints, above the cap {cap}")]
    ConstraintCap {
        label: Label,
        size: usize,
        cap: u128,
    },
    #[error("{boxes} box constraints of one modality exceed what the {logic} rule can enumerate")]
    TooManyBoxes { boxes: usize, logic: &'static str },
    #[error("branch {branch} out of range for a rule with {count} branches")]
    BranchOutOfRange { branch: usize, count: usize },
    #[error("rule instance is no longer applicable")]
    StaleInstance,
    #[error("extraction failed: {0}")]
    Extraction(#[from] ExtractionError),
    #[error("extracted model does not validate")]
    ValidationFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConceptKind {
    Top,
    Bot,
    Atom,
    NegAtom,
    And(ConceptId, ConceptId),
    Or(ConceptId, ConceptId),
    Exists(RoleId, ConceptId),
    Forall(RoleId, ConceptId),
    Box(Modality, ConceptId),
    Dia(Modality, ConceptId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormulaKind {
    /// `⊤ ⊑ C`
    Ci(ConceptId),
    /// `¬(⊤ ⊑ C)`
    NegCi(ConceptId),
    And(FormulaId, FormulaId),
    Or(FormulaId, FormulaId),
    Box(Modality, FormulaId),
    Dia(Modality, FormulaId),
}

/// The interned closure of a normalized formula.
#[derive(Debug)]
pub struct Symbols {
    concepts: Vec<Concept>,
    concept_kinds: Vec<ConceptKind>,
    concept_neg: Vec<ConceptId>,
    formulas: Vec<Formula>,
    formula_kinds: Vec<FormulaKind>,
    formula_neg: Vec<FormulaId>,
    roles: Vec<String>,
    top: ConceptId,
    bot: ConceptId,
    root: FormulaId,
    closure: Closure,
}

impl Symbols {
    /// Interns the closure of `phi`, which must be normalized.
    pub fn new(phi: &Formula) -> Self {
        let closure = closure(phi);
        let mut concept_set: BTreeSet<Concept> = closure.con_neg.clone();
        concept_set.insert(Concept::Top);
        concept_set.insert(Concept::Bot);
        let concepts: Vec<Concept> = concept_set.into_iter().collect();
        let cidx: HashMap<&Concept, ConceptId> = concepts
            .iter()
            .enumerate()
            .map(|(i, c)| (c, i as ConceptId))
            .collect();
        let roles: Vec<String> = closure.rol.iter().cloned().collect();
        let ridx = |r: &String| roles.iter().position(|x| x == r).unwrap() as RoleId;
        let concept_kinds = concepts
            .iter()
            .map(|c| match c {
                Concept::Top => ConceptKind::Top,
                Concept::Bot => ConceptKind::Bot,
                Concept::Atomic(_) => ConceptKind::Atom,
                Concept::Not(_) => ConceptKind::NegAtom,
                Concept::And(a, b) => ConceptKind::And(cidx[&**a], cidx[&**b]),
                Concept::Or(a, b) => ConceptKind::Or(cidx[&**a], cidx[&**b]),
                Concept::Exists(r, d) => ConceptKind::Exists(ridx(r), cidx[&**d]),
                Concept::Forall(r, d) => ConceptKind::Forall(ridx(r), cidx[&**d]),
                Concept::Necessarily(i, d) => ConceptKind::Box(*i, cidx[&**d]),
                Concept::Possibly(i, d) => ConceptKind::Dia(*i, cidx[&**d]),
            })
            .collect();
        let concept_neg = concepts.iter().map(|c| cidx[&c.neg_nnf()]).collect();

        let formulas: Vec<Formula> = closure.for_neg.iter().cloned().collect();
        let fidx: HashMap<&Formula, FormulaId> = formulas
            .iter()
            .enumerate()
            .map(|(i, f)| (f, i as FormulaId))
            .collect();
        let formula_kinds = formulas
            .iter()
            .map(|f| match f {
                Formula::Sub(_, c) => FormulaKind::Ci(cidx[c]),
                Formula::Not(inner) => match &**inner {
                    Formula::Sub(_, c) => FormulaKind::NegCi(cidx[c]),
                    _ => unreachable!("closure of a normalized formula is in NNF"),
                },
                Formula::And(a, b) => FormulaKind::And(fidx[&**a], fidx[&**b]),
                Formula::Or(a, b) => FormulaKind::Or(fidx[&**a], fidx[&**b]),
                Formula::Necessarily(i, g) => FormulaKind::Box(*i, fidx[&**g]),
                Formula::Possibly(i, g) => FormulaKind::Dia(*i, fidx[&**g]),
            })
            .collect();
        let formula_neg = formulas.iter().map(|f| fidx[&f.neg_nnf()]).collect();
        let top = cidx[&Concept::Top];
        let bot = cidx[&Concept::Bot];
        let root = fidx[phi];
        Symbols {
            concepts,
            concept_kinds,
            concept_neg,
            formulas,
            formula_kinds,
            formula_neg,
            roles,
            top,
            bot,
            root,
            closure,
        }
    }

    pub fn concept(&self, id: ConceptId) -> &Concept {
        &self.concepts[id as usize]
    }
    pub fn concept_kind(&self, id: ConceptId) -> ConceptKind {
        self.concept_kinds[id as usize]
    }
    pub fn concept_neg(&self, id: ConceptId) -> ConceptId {
        self.concept_neg[id as usize]
    }
    pub fn concept_id(&self, c: &Concept) -> Option<ConceptId> {
        self.concepts.binary_search(c).ok().map(|i| i as ConceptId)
    }
    pub fn concept_count(&self) -> usize {
        self.concepts.len()
    }
    pub fn formula(&self, id: FormulaId) -> &Formula {
        &self.formulas[id as usize]
    }
    pub fn formula_kind(&self, id: FormulaId) -> FormulaKind {
        self.formula_kinds[id as usize]
    }
    pub fn formula_neg(&self, id: FormulaId) -> FormulaId {
        self.formula_neg[id as usize]
    }
    pub fn formula_id(&self, f: &Formula) -> Option<FormulaId> {
        self.formulas.binary_search(f).ok().map(|i| i as FormulaId)
    }
    pub fn formula_count(&self) -> usize {
        self.formulas.len()
    }
    pub fn role(&self, id: RoleId) -> &str {
        &self.roles[id as usize]
    }
    pub fn role_id(&self, name: &str) -> Option<RoleId> {
        self.roles
            .iter()
            .position(|r| r == name)
            .map(|i| i as RoleId)
    }
    pub fn top(&self) -> ConceptId {
        self.top
    }
    pub fn bot(&self) -> ConceptId {
        self.bot
    }
    pub fn root(&self) -> FormulaId {
        self.root
    }
    pub fn closure(&self) -> &Closure {
        &self.closure
    }
    pub fn fg_size(&self) -> usize {
        self.closure.fg_size()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constraint {
    Formula(Label, FormulaId),
    Concept(Label, ConceptId, Var),
    Role(Label, RoleId, Var, Var),
}

impl Constraint {
    pub fn label(&self) -> Label {
        match *self {
            Constraint::Formula(n, _) | Constraint::Concept(n, _, _) | Constraint::Role(n, ..) => n,
        }
    }

    /// Text form, e.g. `0: (atom A)(x3)` or `1: r(x0,x1)`.
    pub fn describe(&self, symbols: &Symbols) -> String {
        match *self {
            Constraint::Formula(n, f) => format!("{n}: {}", symbols.formula(f)),
            Constraint::Concept(n, c, x) => format!("{n}: {}(x{x})", symbols.concept(c)),
            Constraint::Role(n, r, x, y) => format!("{n}: {}(x{x},x{y})", symbols.role(r)),
        }
    }
}

/// The constraints of one label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    formulas: FixedBitSet,
    concepts: BTreeMap<Var, FixedBitSet>,
    roles: BTreeSet<(RoleId, Var, Var)>,
    size: usize,
}

impl ConstraintSystem {
    fn new(symbols: &Symbols) -> Self {
        ConstraintSystem {
            formulas: FixedBitSet::with_capacity(symbols.formula_count()),
            concepts: BTreeMap::new(),
            roles: BTreeSet::new(),
            size: 0,
        }
    }

    pub fn has_formula(&self, f: FormulaId) -> bool {
        self.formulas.contains(f as usize)
    }

    pub fn has_concept(&self, c: ConceptId, x: Var) -> bool {
        self.concepts
            .get(&x)
            .is_some_and(|s| s.contains(c as usize))
    }

    pub fn has_role(&self, r: RoleId, x: Var, y: Var) -> bool {
        self.roles.contains(&(r, x, y))
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        match *c {
            Constraint::Formula(_, f) => self.has_formula(f),
            Constraint::Concept(_, c, x) => self.has_concept(c, x),
            Constraint::Role(_, r, x, y) => self.has_role(r, x, y),
        }
    }

    pub fn formulas(&self) -> impl Iterator<Item = FormulaId> + '_ {
        self.formulas.ones().map(|f| f as FormulaId)
    }

    /// Variables occurring in the system, in creation order.
    pub fn variables(&self) -> impl Iterator<Item = Var> + '_ {
        self.concepts.keys().copied()
    }

    pub fn occurs(&self, x: Var) -> bool {
        self.concepts.contains_key(&x)
    }

    pub fn concepts_of(&self, x: Var) -> Option<&FixedBitSet> {
        self.concepts.get(&x)
    }

    pub fn roles(&self) -> impl Iterator<Item = (RoleId, Var, Var)> + '_ {
        self.roles.iter().copied()
    }

    /// `r`-successors of `x`.
    pub fn successors(&self, r: RoleId, x: Var) -> impl Iterator<Item = Var> + '_ {
        self.roles
            .range((r, x, 0)..=(r, x, Var::MAX))
            .map(|&(_, _, y)| y)
    }

    /// Number of constraints in the system.
    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// The `<`-minimal variable blocking `x`, if any.
    pub fn blocker(&self, x: Var) -> Option<Var> {
        let own = self.concepts.get(&x)?;
        self.concepts
            .range(..x)
            .find(|(_, cs)| own.is_subset(cs))
            .map(|(&y, _)| y)
    }

    /// Every variable blocking `x`.
    pub fn blockers(&self, x: Var) -> Vec<Var> {
        let Some(own) = self.concepts.get(&x) else {
            return Vec::new();
        };
        self.concepts
            .range(..x)
            .filter(|(_, cs)| own.is_subset(cs))
            .map(|(&y, _)| y)
            .collect()
    }

    pub fn is_blocked(&self, x: Var) -> bool {
        self.blocker(x).is_some()
    }
}

/// The tableau's search state: one constraint system per label.
#[derive(Clone, Debug)]
pub struct CompletionSet {
    symbols: Arc<Symbols>,
    systems: Vec<ConstraintSystem>,
    next_var: Var,
    clash: bool,
}

impl CompletionSet {
    pub fn symbols(&self) -> &Arc<Symbols> {
        &self.symbols
    }

    pub fn labels(&self) -> usize {
        self.systems.len()
    }

    pub fn system(&self, n: Label) -> &ConstraintSystem {
        &self.systems[n]
    }

    pub fn systems(&self) -> &[ConstraintSystem] {
        &self.systems
    }

    /// Number of variables allocated so far.
    pub fn variables(&self) -> usize {
        self.next_var as usize
    }

    pub fn contains(&self, c: &Constraint) -> bool {
        self.systems.get(c.label()).is_some_and(|s| s.contains(c))
    }

    /// Whether some label holds a constraint and its negation, or `⊥(x)`.
    pub fn has_clash(&self) -> bool {
        let sym = &self.symbols;
        self.systems.iter().any(|s| {
            s.formulas().any(|f| s.has_formula(sym.formula_neg(f)))
                || s.concepts.values().any(|cs| {
                    cs.contains(sym.bot() as usize)
                        || cs
                            .ones()
                            .any(|c| cs.contains(sym.concept_neg(c as ConceptId) as usize))
                })
        })
    }

    /// Every constraint, label by label.
    pub fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        for (n, s) in self.systems.iter().enumerate() {
            out.extend(s.formulas().map(|f| Constraint::Formula(n, f)));
            for (&x, cs) in &s.concepts {
                out.extend(cs.ones().map(|c| Constraint::Concept(n, c as ConceptId, x)));
            }
            out.extend(s.roles().map(|(r, x, y)| Constraint::Role(n, r, x, y)));
        }
        out
    }

    /// Adds a constraint, creating its label when it is the next unused one,
    /// and `⊤(x)` for variables new to the label. Returns what was new.
    fn add(&mut self, c: Constraint, added: &mut Vec<Constraint>) {
        let n = c.label();
        if n == self.systems.len() {
            self.systems.push(ConstraintSystem::new(&self.symbols));
        }
        match c {
            Constraint::Formula(_, f) => {
                let sys = &mut self.systems[n];
                if !sys.formulas.put(f as usize) {
                    sys.size += 1;
                    added.push(c);
                    if sys.has_formula(self.symbols.formula_neg(f)) {
                        self.clash = true;
                    }
                }
            }
            Constraint::Concept(_, cid, x) => {
                self.touch(n, x, added);
                self.put_concept(n, cid, x, added);
            }
            Constraint::Role(_, r, x, y) => {
                self.touch(n, x, added);
                self.touch(n, y, added);
                let sys = &mut self.systems[n];
                if sys.roles.insert((r, x, y)) {
                    sys.size += 1;
                    added.push(c);
                }
            }
        }
    }

    fn touch(&mut self, n: Label, x: Var, added: &mut Vec<Constraint>) {
        self.next_var = self.next_var.max(x + 1);
        if !self.systems[n].occurs(x) {
            let width = self.symbols.concept_count();
            self.systems[n]
                .concepts
                .insert(x, FixedBitSet::with_capacity(width));
            self.put_concept(n, self.symbols.top(), x, added);
        }
    }

    fn put_concept(&mut self, n: Label, c: ConceptId, x: Var, added: &mut Vec<Constraint>) {
        let sym = &self.symbols;
        let sys = &mut self.systems[n];
        let cs = sys.concepts.get_mut(&x).expect("variable touched first");
        if !cs.put(c as usize) {
            sys.size += 1;
            added.push(Constraint::Concept(n, c, x));
            if c == sym.bot() || cs.contains(sym.concept_neg(c) as usize) {
                self.clash = true;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Rule {
    And,
    Or,
    Sqcap,
    Sqcup,
    Exists,
    Forall,
    Eq,
    Neq,
    Modal,
}

impl Rule {
    pub const ALL: [Rule; 9] = [
        Rule::And,
        Rule::Or,
        Rule::Sqcap,
        Rule::Sqcup,
        Rule::Exists,
        Rule::Forall,
        Rule::Eq,
        Rule::Neq,
        Rule::Modal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::And => "R_and",
            Rule::Or => "R_or",
            Rule::Sqcap => "R_sqcap",
            Rule::Sqcup => "R_sqcup",
            Rule::Exists => "R_exists",
            Rule::Forall => "R_forall",
            Rule::Eq => "R_eq",
            Rule::Neq => "R_neq",
            Rule::Modal => "R_L",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A rule together with its premises and the constraints each branch adds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleInstance {
    pub rule: Rule,
    pub label: Label,
    pub premises: Vec<Constraint>,
    pub branches: Vec<Vec<Constraint>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: u64,
    pub rule: &'static str,
    pub label: Label,
    pub branch: usize,
    pub added: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveStats {
    pub steps: u64,
    pub rule_applications: BTreeMap<&'static str, u64>,
    pub backtracks: u64,
    /// Labels of the final completion set (on SAT) or the largest seen.
    pub labels: usize,
    pub variables: usize,
    pub max_labels: usize,
    pub max_label_constraints: usize,
    pub fg_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
}

impl Verdict {
    pub fn is_sat(self) -> bool {
        self == Verdict::Sat
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub cap_steps: u64,
    /// Exponent factor `c` of the per-label cap `2^(c·fg)`.
    pub label_size_factor: u32,
    pub record_trace: bool,
    pub extract_model: bool,
    pub validate: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            cap_steps: DEFAULT_CAP_STEPS,
            label_size_factor: 2,
            record_trace: false,
            extract_model: false,
            validate: true,
        }
    }
}

impl SolveOptions {
    pub fn with_model() -> Self {
        SolveOptions {
            extract_model: true,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub verdict: Verdict,
    /// The complete, clash-free completion set on SAT.
    pub completion: Option<CompletionSet>,
    pub model: Option<NeighbourhoodModel>,
    pub stats: SolveStats,
    pub trace: Vec<TraceEvent>,
}

/// One formula and one logic, ready to run.
#[derive(Debug, Clone)]
pub struct Tableau {
    input: Formula,
    symbols: Arc<Symbols>,
    logic: Arc<dyn ModalLogic>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Deterministic,
    Branching,
    Generating,
    Modal,
}

const PHASES: [Phase; 4] = [
    Phase::Deterministic,
    Phase::Branching,
    Phase::Generating,
    Phase::Modal,
];

/// A box or diamond argument: a formula, or a concept at a variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Arg {
    F(FormulaId),
    C(ConceptId, Var),
}

struct Finder {
    first_only: bool,
    out: Vec<RuleInstance>,
    err: Option<TableauError>,
}

impl Finder {
    fn done(&self) -> bool {
        self.err.is_some() || (self.first_only && !self.out.is_empty())
    }
}

impl Tableau {
    /// Normalizes `phi` and interns its closure.
    pub fn new(phi: &Formula, logic: Arc<dyn ModalLogic>) -> Self {
        let normalized = normalize(phi);
        Tableau {
            input: phi.clone(),
            symbols: Arc::new(Symbols::new(&normalized)),
            logic,
        }
    }

    /// An engine over an already interned closure.
    pub fn from_symbols(symbols: Arc<Symbols>, logic: Arc<dyn ModalLogic>) -> Self {
        Tableau {
            input: symbols.formula(symbols.root()).clone(),
            symbols,
            logic,
        }
    }

    pub fn for_class(phi: &Formula, class: FrameClass) -> Self {
        Self::new(phi, logic_for(class))
    }

    pub fn symbols(&self) -> &Arc<Symbols> {
        &self.symbols
    }

    pub fn logic(&self) -> &Arc<dyn ModalLogic> {
        &self.logic
    }

    pub fn input(&self) -> &Formula {
        &self.input
    }

    /// `{0: φ, 0: ⊤(x0)}`
    pub fn init(&self) -> CompletionSet {
        let mut t = CompletionSet {
            symbols: self.symbols.clone(),
            systems: Vec::new(),
            next_var: 0,
            clash: false,
        };
        let mut sink = Vec::new();
        t.add(Constraint::Formula(0, self.symbols.root()), &mut sink);
        t.add(Constraint::Concept(0, self.symbols.top(), 0), &mut sink);
        t
    }

    pub fn find_applicable(&self, t: &CompletionSet) -> Result<Vec<RuleInstance>, TableauError> {
        let mut finder = Finder {
            first_only: false,
            out: Vec::new(),
            err: None,
        };
        for phase in PHASES {
            self.scan(t, phase, &mut finder);
        }
        match finder.err {
            Some(e) => Err(e),
            None => Ok(finder.out),
        }
    }

    /// The first applicable instance by rule priority.
    pub fn next_instance(&self, t: &CompletionSet) -> Result<Option<RuleInstance>, TableauError> {
        let mut finder = Finder {
            first_only: true,
            out: Vec::new(),
            err: None,
        };
        for phase in PHASES {
            self.scan(t, phase, &mut finder);
            if let Some(e) = finder.err {
                return Err(e);
            }
            if let Some(inst) = finder.out.pop() {
                return Ok(Some(inst));
            }
        }
        Ok(None)
    }

    pub fn is_complete(&self, t: &CompletionSet) -> Result<bool, TableauError> {
        Ok(self.next_instance(t)?.is_none())
    }

    /// Applies one branch of an instance to a copy of `t`.
    pub fn apply(
        &self,
        t: &CompletionSet,
        inst: &RuleInstance,
        branch: usize,
    ) -> Result<CompletionSet, TableauError> {
        if branch >= inst.branches.len() {
            return Err(TableauError::BranchOutOfRange {
                branch,
                count: inst.branches.len(),
            });
        }
        if !self.find_applicable(t)?.contains(inst) {
            return Err(TableauError::StaleInstance);
        }
        let mut next = t.clone();
        let mut added = Vec::new();
        for &c in &inst.branches[branch] {
            next.add(c, &mut added);
        }
        Ok(next)
    }

    fn scan(&self, t: &CompletionSet, phase: Phase, finder: &mut Finder) {
        for n in 0..t.systems.len() {
            if finder.done() {
                return;
            }
            match phase {
                Phase::Deterministic => self.scan_deterministic(t, n, finder),
                Phase::Branching => self.scan_branching(t, n, finder),
                Phase::Generating => self.scan_generating(t, n, finder),
                Phase::Modal => self.scan_modal(t, n, finder),
            }
        }
    }

    fn scan_deterministic(&self, t: &CompletionSet, n: Label, finder: &mut Finder) {
        let sym = &*self.symbols;
        let s = &t.systems[n];
        for f in s.formulas() {
            match sym.formula_kind(f) {
                FormulaKind::And(a, b) if !(s.has_formula(a) && s.has_formula(b)) => {
                    finder.out.push(RuleInstance {
                        rule: Rule::And,
                        label: n,
                        premises: vec![Constraint::Formula(n, f)],
                        branches: vec![vec![Constraint::Formula(n, a), Constraint::Formula(n, b)]],
                    });
                }
                FormulaKind::Ci(c) => {
                    for x in s.variables() {
                        if !s.has_concept(c, x) {
                            finder.out.push(RuleInstance {
                                rule: Rule::Eq,
                                label: n,
                                premises: vec![Constraint::Formula(n, f)],
                                branches: vec![vec![Constraint::Concept(n, c, x)]],
                            });
                            if finder.done() {
                                return;
                            }
                        }
                    }
                }
                _ => {}
            }
            if finder.done() {
                return;
            }
        }
        for (&x, cs) in &s.concepts {
            for c in cs.ones() {
                let c = c as ConceptId;
                match sym.concept_kind(c) {
                    ConceptKind::And(a, b)
                        if !(cs.contains(a as usize) && cs.contains(b as usize)) =>
                    {
                        finder.out.push(RuleInstance {
                            rule: Rule::Sqcap,
                            label: n,
                            premises: vec![Constraint::Concept(n, c, x)],
                            branches: vec![vec![
                                Constraint::Concept(n, a, x),
                                Constraint::Concept(n, b, x),
                            ]],
                        });
                    }
                    ConceptKind::Forall(r, d) => {
                        for y in s.successors(r, x) {
                            if !s.has_concept(d, y) {
                                finder.out.push(RuleInstance {
                                    rule: Rule::Forall,
                                    label: n,
                                    premises: vec![
                                        Constraint::Concept(n, c, x),
                                        Constraint::Role(n, r, x, y),
                                    ],
                                    branches: vec![vec![Constraint::Concept(n, d, y)]],
                                });
                                if finder.done() {
                                    return;
                                }
                            }
                        }
                    }
                    _ => {}
                }
                if finder.done() {
                    return;
                }
            }
        }
    }

    fn scan_branching(&self, t: &CompletionSet, n: Label, finder: &mut Finder) {
        let sym = &*self.symbols;
        let s = &t.systems[n];
        for f in s.formulas() {
            if let FormulaKind::Or(a, b) = sym.formula_kind(f) {
                if !s.has_formula(a) && !s.has_formula(b) {
                    finder.out.push(RuleInstance {
                        rule: Rule::Or,
                        label: n,
                        premises: vec![Constraint::Formula(n, f)],
                        branches: vec![
                            vec![Constraint::Formula(n, a)],
                            vec![Constraint::Formula(n, b)],
                        ],
                    });
                    if finder.done() {
                        return;
                    }
                }
            }
        }
        for (&x, cs) in &s.concepts {
            for c in cs.ones() {
                let c = c as ConceptId;
                if let ConceptKind::Or(a, b) = sym.concept_kind(c) {
                    if !cs.contains(a as usize) && !cs.contains(b as usize) {
                        finder.out.push(RuleInstance {
                            rule: Rule::Sqcup,
                            label: n,
                            premises: vec![Constraint::Concept(n, c, x)],
                            branches: vec![
                                vec![Constraint::Concept(n, a, x)],
                                vec![Constraint::Concept(n, b, x)],
                            ],
                        });
                        if finder.done() {
                            return;
                        }
                    }
                }
            }
        }
    }

    fn scan_generating(&self, t: &CompletionSet, n: Label, finder: &mut Finder) {
        let sym = &*self.symbols;
        let s = &t.systems[n];
        let fresh = t.next_var;
        for (&x, cs) in &s.concepts {
            let mut blocked = None;
            for c in cs.ones() {
                let c = c as ConceptId;
                let ConceptKind::Exists(r, d) = sym.concept_kind(c) else {
                    continue;
                };
                if *blocked.get_or_insert_with(|| s.is_blocked(x)) {
                    break;
                }
                if s.successors(r, x).any(|y| s.has_concept(d, y)) {
                    continue;
                }
                finder.out.push(RuleInstance {
                    rule: Rule::Exists,
                    label: n,
                    premises: vec![Constraint::Concept(n, c, x)],
                    branches: vec![vec![
                        Constraint::Role(n, r, x, fresh),
                        Constraint::Concept(n, d, fresh),
                        Constraint::Concept(n, sym.top(), fresh),
                    ]],
                });
                if finder.done() {
                    return;
                }
            }
        }
        for f in s.formulas() {
            let FormulaKind::NegCi(c) = sym.formula_kind(f) else {
                continue;
            };
            let nc = sym.concept_neg(c);
            if s.concepts.values().any(|cs| cs.contains(nc as usize)) {
                continue;
            }
            finder.out.push(RuleInstance {
                rule: Rule::Neq,
                label: n,
                premises: vec![Constraint::Formula(n, f)],
                branches: vec![vec![
                    Constraint::Concept(n, nc, fresh),
                    Constraint::Concept(n, sym.top(), fresh),
                ]],
            });
            if finder.done() {
                return;
            }
        }
    }

    fn arg_constraint(&self, arg: Arg, label: Label, negate: bool) -> Constraint {
        match arg {
            Arg::F(f) => {
                let f = if negate {
                    self.symbols.formula_neg(f)
                } else {
                    f
                };
                Constraint::Formula(label, f)
            }
            Arg::C(c, x) => {
                let c = if negate {
                    self.symbols.concept_neg(c)
                } else {
                    c
                };
                Constraint::Concept(label, c, x)
            }
        }
    }

    /// Box and diamond constraints of label `n`, grouped by modality.
    #[allow(clippy::type_complexity)]
    fn modal_constraints(
        &self,
        s: &ConstraintSystem,
        n: Label,
    ) -> BTreeMap<Modality, (Vec<(Arg, Constraint)>, Vec<(Arg, Constraint)>)> {
        let sym = &*self.symbols;
        let mut by_mod: BTreeMap<Modality, (Vec<_>, Vec<_>)> = BTreeMap::new();
        for f in s.formulas() {
            match sym.formula_kind(f) {
                FormulaKind::Box(i, g) => by_mod
                    .entry(i)
                    .or_default()
                    .0
                    .push((Arg::F(g), Constraint::Formula(n, f))),
                FormulaKind::Dia(i, g) => by_mod
                    .entry(i)
                    .or_default()
                    .1
                    .push((Arg::F(g), Constraint::Formula(n, f))),
                _ => {}
            }
        }
        for (&x, cs) in &s.concepts {
            for c in cs.ones() {
                let c = c as ConceptId;
                match sym.concept_kind(c) {
                    ConceptKind::Box(i, d) => by_mod
                        .entry(i)
                        .or_default()
                        .0
                        .push((Arg::C(d, x), Constraint::Concept(n, c, x))),
                    ConceptKind::Dia(i, d) => by_mod
                        .entry(i)
                        .or_default()
                        .1
                        .push((Arg::C(d, x), Constraint::Concept(n, c, x))),
                    _ => {}
                }
            }
        }
        by_mod
    }

    fn scan_modal(&self, t: &CompletionSet, n: Label, finder: &mut Finder) {
        let s = &t.systems[n];
        let m = t.systems.len();
        for (boxes, diamonds) in self.modal_constraints(s, n).into_values() {
            if diamonds.is_empty() {
                continue;
            }
            let shapes = self.logic.rule_shapes(boxes.len());
            if shapes.is_empty() && !boxes.is_empty() {
                finder.err = Some(TableauError::TooManyBoxes {
                    boxes: boxes.len(),
                    logic: self.logic.name(),
                });
                return;
            }
            for shape in &shapes {
                for &(delta, delta_premise) in &diamonds {
                    let mut branch0: Vec<Constraint> = shape
                        .boxes
                        .iter()
                        .map(|&b| self.arg_constraint(boxes[b].0, m, false))
                        .collect();
                    branch0.push(self.arg_constraint(delta, m, false));
                    let mut branches = vec![branch0];
                    if shape.negative_branches {
                        for &b in &shape.boxes {
                            branches.push(vec![
                                self.arg_constraint(boxes[b].0, m, true),
                                self.arg_constraint(delta, m, true),
                            ]);
                        }
                    }
                    let witnessed = t
                        .systems
                        .iter()
                        .any(|o| branches.iter().any(|br| br.iter().all(|c| o.contains(c))));
                    if witnessed {
                        continue;
                    }
                    // every world needs an element: a branch that copies no
                    // variable starts its label at a fresh one
                    for br in branches.iter_mut() {
                        if br.iter().all(|c| matches!(c, Constraint::Formula(..))) {
                            br.push(Constraint::Concept(m, self.symbols.top(), t.next_var));
                        }
                    }
                    let mut premises: Vec<Constraint> =
                        shape.boxes.iter().map(|&b| boxes[b].1).collect();
                    premises.push(delta_premise);
                    finder.out.push(RuleInstance {
                        rule: Rule::Modal,
                        label: n,
                        premises,
                        branches,
                    });
                    if finder.done() {
                        return;
                    }
                }
            }
        }
    }

    fn label_cap(&self, opts: &SolveOptions) -> u128 {
        let exp = opts.label_size_factor as u128 * self.symbols.fg_size() as u128;
        if exp >= 127 {
            u128::MAX
        } else {
            1u128 << exp
        }
    }

    fn step(
        &self,
        t: &mut CompletionSet,
        inst: &RuleInstance,
        branch: usize,
        stats: &mut SolveStats,
        opts: &SolveOptions,
        on_step: &mut dyn FnMut(&TraceEvent),
        recorded: &mut Vec<TraceEvent>,
    ) -> Result<(), TableauError> {
        stats.steps += 1;
        if stats.steps > opts.cap_steps {
            return Err(TableauError::StepCap(opts.cap_steps));
        }
        *stats.rule_applications.entry(inst.rule.name()).or_default() += 1;
        let mut added = Vec::new();
        for &c in &inst.branches[branch] {
            t.add(c, &mut added);
        }
        stats.max_labels = stats.max_labels.max(t.systems.len());
        let bound = self.logic.label_bound(self.symbols.fg_size());
        if t.systems.len() as u128 > bound {
            return Err(TableauError::LabelBound {
                labels: t.systems.len(),
                bound,
            });
        }
        let cap = self.label_cap(opts);
        for &c in &added {
            let n = c.label();
            let size = t.systems[n].len();
            stats.max_label_constraints = stats.max_label_constraints.max(size);
            if size as u128 > cap {
                return Err(TableauError::ConstraintCap {
                    label: n,
                    size,
                    cap,
                });
            }
        }
        let event = TraceEvent {
            step: stats.steps,
            rule: inst.rule.name(),
            label: inst.label,
            branch,
            added: added.iter().map(|c| c.describe(&self.symbols)).collect(),
        };
        on_step(&event);
        if opts.record_trace {
            recorded.push(event);
        }
        Ok(())
    }

    /// Runs the search, streaming each rule application to `on_step`.
    pub fn solve_streaming(
        &self,
        opts: &SolveOptions,
        on_step: &mut dyn FnMut(&TraceEvent),
    ) -> Result<SolveResult, TableauError> {
        struct Choice {
            snapshot: CompletionSet,
            inst: RuleInstance,
            next: usize,
        }
        let mut stats = SolveStats {
            fg_size: self.symbols.fg_size(),
            ..SolveStats::default()
        };
        let mut recorded = Vec::new();
        let mut current = self.init();
        stats.max_labels = 1;
        let mut stack: Vec<Choice> = Vec::new();
        loop {
            if !current.clash {
                match self.next_instance(&current)? {
                    None => {
                        stats.labels = current.labels();
                        stats.variables = current.variables();
                        return self.finish_sat(current, stats, recorded, opts);
                    }
                    Some(inst) => {
                        if inst.branches.len() > 1 {
                            stack.push(Choice {
                                snapshot: current.clone(),
                                inst: inst.clone(),
                                next: 1,
                            });
                        }
                        self.step(
                            &mut current,
                            &inst,
                            0,
                            &mut stats,
                            opts,
                            on_step,
                            &mut recorded,
                        )?;
                        continue;
                    }
                }
            }
            // backtrack to the most recent open choice
            loop {
                let Some(top) = stack.last_mut() else {
                    stats.labels = stats.max_labels;
                    stats.variables = current.variables();
                    return Ok(SolveResult {
                        verdict: Verdict::Unsat,
                        completion: None,
                        model: None,
                        stats,
                        trace: recorded,
                    });
                };
                if top.next < top.inst.branches.len() {
                    let branch = top.next;
                    top.next += 1;
                    let inst;
                    if top.next == top.inst.branches.len() {
                        let choice = stack.pop().expect("non-empty stack");
                        current = choice.snapshot;
                        inst = choice.inst;
                    } else {
                        current = top.snapshot.clone();
                        inst = top.inst.clone();
                    }
                    stats.backtracks += 1;
                    self.step(
                        &mut current,
                        &inst,
                        branch,
                        &mut stats,
                        opts,
                        on_step,
                        &mut recorded,
                    )?;
                    break;
                }
                stack.pop();
            }
        }
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<SolveResult, TableauError> {
        self.solve_streaming(opts, &mut |_| {})
    }

    fn finish_sat(
        &self,
        t: CompletionSet,
        stats: SolveStats,
        trace: Vec<TraceEvent>,
        opts: &SolveOptions,
    ) -> Result<SolveResult, TableauError> {
        let model = if opts.extract_model {
            let model = extraction::extract_model(&t, &self.logic)?;
            if opts.validate
                && !extraction::model_validates(&model, &self.input, self.logic.class())
            {
                return Err(TableauError::ValidationFailed);
            }
            Some(model)
        } else {
            None
        };
        Ok(SolveResult {
            verdict: Verdict::Sat,
            completion: Some(t),
            model,
            stats,
            trace,
        })
    }
}

/// Decides `phi` under `class` with the built-in strategy.
pub fn solve(
    phi: &Formula,
    class: FrameClass,
    opts: &SolveOptions,
) -> Result<SolveResult, TableauError> {
    Tableau::for_class(phi, class).solve(opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_formula;

    fn tab(text: &str, class: FrameClass) -> Tableau {
        Tableau::for_class(&parse_formula(text).unwrap(), class)
    }

    fn describe_all(t: &CompletionSet) -> Vec<String> {
        t.constraints()
            .iter()
            .map(|c| c.describe(t.symbols()))
            .collect()
    }

    fn verdict(text: &str, class: FrameClass) -> Verdict {
        tab(text, class)
            .solve(&SolveOptions::default())
            .unwrap()
            .verdict
    }

    #[test]
    fn init_holds_root_and_top() {
        let tb = tab("(sub top (atom A))", FrameClass::E);
        let t = tb.init();
        assert_eq!(t.labels(), 1);
        assert_eq!(t.variables(), 1);
        assert_eq!(
            describe_all(&t),
            vec!["0: (sub top (atom A))", "0: top(x0)"]
        );
    }

    #[test]
    fn clash_detection() {
        let tb = tab("(sub top (and (atom A) (not (atom A))))", FrameClass::E);
        let mut t = tb.init();
        let sym = tb.symbols().clone();
        let a = sym.concept_id(&Concept::atom("A")).unwrap();
        let na = sym.concept_neg(a);
        let mut sink = Vec::new();
        t.add(Constraint::Concept(0, a, 0), &mut sink);
        assert!(!t.has_clash());
        t.add(Constraint::Concept(1, na, 0), &mut sink);
        assert!(!t.has_clash() && !t.clash);
        t.add(Constraint::Concept(0, na, 0), &mut sink);
        assert!(t.has_clash() && t.clash);

        let mut t = tb.init();
        t.add(Constraint::Concept(0, sym.bot(), 0), &mut sink);
        assert!(t.has_clash() && t.clash);
    }

    #[test]
    fn subset_blocking() {
        let tb = tab("(sub top (atom A))", FrameClass::E);
        let mut t = tb.init();
        let a = tb.symbols().concept_id(&Concept::atom("A")).unwrap();
        let mut sink = Vec::new();
        t.add(Constraint::Concept(0, a, 0), &mut sink);
        t.add(Constraint::Concept(0, tb.symbols().top(), 1), &mut sink);
        assert_eq!(t.system(0).blocker(1), Some(0));
        assert!(!t.system(0).is_blocked(0));
    }

    #[test]
    fn existential_chain_is_blocked() {
        let tb = tab("(sub top (some r (atom A)))", FrameClass::E);
        let res = tb.solve(&SolveOptions::default()).unwrap();
        assert_eq!(res.verdict, Verdict::Sat);
        let t = res.completion.unwrap();
        // x0 generates x1; x1 has the same concepts as x0 plus A, so x1
        // generates x2, whose concept set equals x1's and is blocked
        let s = t.system(0);
        assert_eq!(s.variables().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(s.blocker(2), Some(1));
        assert_eq!(s.blocker(1), None);
    }

    #[test]
    fn conjunction_gives_single_instance() {
        let tb = tab("(and (sub top (atom A)) (sub top (atom B)))", FrameClass::E);
        let all = tb.find_applicable(&tb.init()).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].rule, Rule::And);
    }

    fn saturate_label0(tb: &Tableau) -> CompletionSet {
        let mut t = tb.init();
        while let Some(inst) = tb.next_instance(&t).unwrap() {
            if inst.rule == Rule::Modal {
                break;
            }
            t = tb.apply(&t, &inst, 0).unwrap();
        }
        t
    }

    #[test]
    fn monotone_rule_has_one_branch() {
        let tb = tab(
            "(and (box 1 (sub top (atom A))) (dia 1 (sub top (atom B))))",
            FrameClass::M,
        );
        let t = saturate_label0(&tb);
        let modal: Vec<_> = tb
            .find_applicable(&t)
            .unwrap()
            .into_iter()
            .filter(|i| i.rule == Rule::Modal)
            .collect();
        assert_eq!(modal.len(), 1);
        assert_eq!(modal[0].branches.len(), 1);
    }

    #[test]
    fn intersection_rule_ranges_over_subsets() {
        let tb = tab(
            "(and (and (box 1 (sub top (atom A))) (box 1 (sub top (atom B)))) (dia 1 (sub top (atom C))))",
            FrameClass::C,
        );
        let t = saturate_label0(&tb);
        let modal: Vec<_> = tb
            .find_applicable(&t)
            .unwrap()
            .into_iter()
            .filter(|i| i.rule == Rule::Modal)
            .collect();
        assert_eq!(modal.len(), 3);
        assert_eq!(
            modal.iter().map(|i| i.branches.len()).collect::<Vec<_>>(),
            vec![2, 2, 3]
        );
    }

    #[test]
    fn modal_rule_branches_at_fresh_label() {
        let tb = tab(
            "(sub top (and (box 1 (atom A)) (dia 1 (atom B))))",
            FrameClass::E,
        );
        let t = saturate_label0(&tb);
        let inst = tb.next_instance(&t).unwrap().unwrap();
        assert_eq!(inst.rule, Rule::Modal);
        let t1 = tb.apply(&t, &inst, 1).unwrap();
        let added: Vec<String> = describe_all(&t1)
            .into_iter()
            .filter(|s| s.starts_with("1:"))
            .collect();
        assert_eq!(
            added,
            vec![
                "1: top(x0)",
                "1: (not (atom A))(x0)",
                "1: (not (atom B))(x0)"
            ]
        );
        assert!(matches!(
            tb.apply(&t1, &inst, 0),
            Err(TableauError::StaleInstance)
        ));
        assert!(matches!(
            tb.apply(&t, &inst, 7),
            Err(TableauError::BranchOutOfRange { .. })
        ));
    }

    #[test]
    fn rule_applications() {
        let tb = tab("(sub top (and (atom A) (atom B)))", FrameClass::E);
        let t = tb
            .apply(
                &tb.init(),
                &tb.next_instance(&tb.init()).unwrap().unwrap(),
                0,
            )
            .unwrap();
        let inst = tb.next_instance(&t).unwrap().unwrap();
        assert_eq!(inst.rule, Rule::Sqcap);
        let t = tb.apply(&t, &inst, 0).unwrap();
        let s = describe_all(&t);
        assert!(s.contains(&"0: (atom A)(x0)".to_string()));
        assert!(s.contains(&"0: (atom B)(x0)".to_string()));

        let tb = tab("(not (sub top (atom A)))", FrameClass::E);
        let inst = tb.next_instance(&tb.init()).unwrap().unwrap();
        assert_eq!(inst.rule, Rule::Neq);
        let t = tb.apply(&tb.init(), &inst, 0).unwrap();
        assert!(describe_all(&t).contains(&"0: (not (atom A))(x1)".to_string()));
    }

    #[test]
    fn completeness_checks() {
        let tb = tab("(sub top top)", FrameClass::E);
        let t = tb.init();
        assert!(tb.is_complete(&t).unwrap());
        let tb = tab("(dia 1 (not (sub top top)))", FrameClass::E);
        let res = tb.solve(&SolveOptions::default()).unwrap();
        assert!(res.verdict.is_sat());
        assert_eq!(res.completion.unwrap().labels(), 1);
    }

    #[test]
    fn reference_verdicts() {
        use FrameClass::*;
        let p = "(sub top (atom A))";
        let q = "(sub top (atom B))";
        let a = format!("(and (box 1 {p}) (dia 1 (not {p})))");
        let b = format!("(and (and (box 1 {p}) (box 1 {q})) (not (box 1 (and {p} {q}))))");
        let c = "(dia 1 (not (sub top top)))".to_string();
        let d = format!("(and (box 1 (and {p} {q})) (dia 1 (not {p})))");
        let expected = [
            (&a, [false, false, false, false]),
            (&b, [true, true, false, true]),
            (&c, [true, true, true, false]),
            (&d, [true, false, true, true]),
        ];
        for (text, row) in expected {
            for (class, want) in [E, M, C, N].into_iter().zip(row) {
                assert_eq!(verdict(text, class).is_sat(), want, "{text} under {class}");
            }
        }
    }

    #[test]
    fn step_cap_is_enforced() {
        let tb = tab("(sub top (some r (atom A)))", FrameClass::E);
        let opts = SolveOptions {
            cap_steps: 2,
            ..SolveOptions::default()
        };
        assert_eq!(tb.solve(&opts).unwrap_err(), TableauError::StepCap(2));
    }

    #[test]
    fn trace_lines_name_rules() {
        // □p ∧ ◇¬̇p clashes syntactically before any modal rule fires
        let tb = tab(
            "(and (box 1 (sub top (atom A))) (dia 1 (not (sub top (atom A)))))",
            FrameClass::E,
        );
        let opts = SolveOptions {
            record_trace: true,
            ..SolveOptions::default()
        };
        let res = tb.solve(&opts).unwrap();
        assert_eq!(res.verdict, Verdict::Unsat);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.trace[0].rule, "R_and");

        // branch (0) clashes in the new label, branch (1) survives
        let tb = tab(
            "(and (box 1 (sub top (atom A))) (dia 1 (sub top (not (atom A)))))",
            FrameClass::E,
        );
        let res = tb.solve(&opts).unwrap();
        assert_eq!(res.verdict, Verdict::Sat);
        let modal: Vec<_> = res.trace.iter().filter(|e| e.rule == "R_L").collect();
        assert_eq!(modal.len(), 2);
        assert_eq!((modal[0].branch, modal[1].branch), (0, 1));
        assert_eq!(
            serde_json::to_string(modal[1]).unwrap(),
            format!(
                r#"{{"step":{},"rule":"R_L","label":0,"branch":1,"added":["1: (not (sub top (atom A)))","1: (not (sub top (not (atom A))))","1: top(x1)"]}}"#,
                modal[1].step
            )
        );
    }
}
