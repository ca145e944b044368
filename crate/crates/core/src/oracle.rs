//! Exhaustive search for small neighbourhood models.
//!
//! [`enumerate_models`] lists every model within the bounds by a plain
//! odometer and is only usable for tiny signatures. [`brute_force_sat`]
//! explores the same space for a single formula but reads model bits lazily:
//! the formula is evaluated at world `w0` and whenever it needs a bit that is
//! still open, the search branches on that bit. Bits never read are never
//! branched on, so a SAT leaf holds for every completion of the open bits.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::semantics::{
    full_set, intersection_closure, supersets, FrameClass, NeighbourhoodModel, WorldSet,
};
use crate::syntax::{Concept, Formula, Modality};

pub const DEFAULT_CANDIDATE_CAP: u128 = 100_000_000;
pub const DEFAULT_NODE_CAP: u64 = 20_000_000;

pub const MAX_CONCEPT_NAMES: usize = 3;
pub const MAX_ROLE_NAMES: usize = 2;
pub const MAX_MODALITIES: usize = 2;
pub const MAX_BOUND: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainMode {
    #[default]
    Varying,
    Constant,
}

impl fmt::Display for DomainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainMode::Varying => "varying",
            DomainMode::Constant => "constant",
        })
    }
}

impl FromStr for DomainMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "varying" => Ok(DomainMode::Varying),
            "constant" => Ok(DomainMode::Constant),
            _ => Err(format!(
                "unknown domain mode `{s}` (expected varying or constant)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleBounds {
    pub max_worlds: usize,
    pub max_domain: usize,
    pub domain_mode: DomainMode,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds {
            max_worlds: 2,
            max_domain: 2,
            domain_mode: DomainMode::Varying,
        }
    }
}

impl OracleBounds {
    pub fn constant(max_worlds: usize, max_domain: usize) -> Self {
        OracleBounds {
            max_worlds,
            max_domain,
            domain_mode: DomainMode::Constant,
        }
    }

    fn check(&self) -> Result<(), OracleError> {
        for (what, v) in [
            ("max worlds", self.max_worlds),
            ("max domain", self.max_domain),
        ] {
            if v == 0 || v > MAX_BOUND {
                return Err(OracleError::InvalidBounds(format!(
                    "{what} is {v}, expected 1..={MAX_BOUND}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("signature too large for the oracle: {0}")]
    SignatureTooLarge(String),
    #[error("bounds too large: {candidates} candidate models exceed the cap of {cap}")]
    BoundsTooLarge { candidates: u128, cap: u128 },
    #[error("search exceeded {0} nodes")]
    NodeCap(u64),
    #[error("witness failed the independent model check: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OracleVerdict {
    #[serde(rename = "sat")]
    Sat,
    #[serde(rename = "unsat-within-bounds")]
    UnsatWithinBounds,
}

impl fmt::Display for OracleVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleVerdict::Sat => "sat",
            OracleVerdict::UnsatWithinBounds => "unsat-within-bounds",
        })
    }
}

#[derive(Clone, Debug)]
pub struct OracleOutcome {
    pub verdict: OracleVerdict,
    /// A model satisfying the formula at its first world, on SAT.
    pub model: Option<NeighbourhoodModel>,
    pub nodes: u64,
}

/// The vocabulary models are built over.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleSignature {
    pub concepts: Vec<String>,
    pub roles: Vec<String>,
    pub modalities: Vec<Modality>,
}

impl OracleSignature {
    /// Modalities `1..=count`.
    pub fn new(concepts: &[&str], roles: &[&str], count: Modality) -> Self {
        OracleSignature {
            concepts: concepts.iter().map(|s| s.to_string()).collect(),
            roles: roles.iter().map(|s| s.to_string()).collect(),
            modalities: (1..=count).collect(),
        }
    }

    pub fn of(phi: &Formula) -> Self {
        let sig = phi.signature();
        let mut modalities = BTreeSet::new();
        collect_modalities(phi, &mut modalities);
        OracleSignature {
            concepts: sig.concepts.into_iter().collect(),
            roles: sig.roles.into_iter().collect(),
            modalities: modalities.into_iter().collect(),
        }
    }

    fn check(&self) -> Result<(), OracleError> {
        let limits = [
            ("concept names", self.concepts.len(), MAX_CONCEPT_NAMES),
            ("role names", self.roles.len(), MAX_ROLE_NAMES),
            ("modalities", self.modalities.len(), MAX_MODALITIES),
        ];
        for (what, n, max) in limits {
            if n > max {
                return Err(OracleError::SignatureTooLarge(format!(
                    "{n} {what}, at most {max}"
                )));
            }
        }
        Ok(())
    }
}

fn collect_modalities(phi: &Formula, out: &mut BTreeSet<Modality>) {
    fn concept(c: &Concept, out: &mut BTreeSet<Modality>) {
        match c {
            Concept::Atomic(_) | Concept::Top | Concept::Bot => {}
            Concept::Not(d) | Concept::Exists(_, d) | Concept::Forall(_, d) => concept(d, out),
            Concept::And(a, b) | Concept::Or(a, b) => {
                concept(a, out);
                concept(b, out);
            }
            Concept::Necessarily(i, d) | Concept::Possibly(i, d) => {
                out.insert(*i);
                concept(d, out);
            }
        }
    }
    match phi {
        Formula::Sub(c, d) => {
            concept(c, out);
            concept(d, out);
        }
        Formula::Not(f) => collect_modalities(f, out),
        Formula::And(a, b) | Formula::Or(a, b) => {
            collect_modalities(a, out);
            collect_modalities(b, out);
        }
        Formula::Necessarily(i, f) | Formula::Possibly(i, f) => {
            out.insert(*i);
            collect_modalities(f, out);
        }
    }
}

fn world_names(n: usize) -> Vec<String> {
    (0..n).map(|w| format!("w{w}")).collect()
}

fn element_names(n: usize) -> Vec<String> {
    (0..n).map(|e| format!("e{e}")).collect()
}

// ---------------------------------------------------------------------------
// Plain enumeration
// ---------------------------------------------------------------------------

fn radices(sig: &OracleSignature, bounds: &OracleBounds, worlds: usize) -> Vec<u64> {
    let d = bounds.max_domain as u32;
    let mut out = Vec::new();
    match bounds.domain_mode {
        DomainMode::Varying => out.extend(std::iter::repeat_n((1u64 << d) - 1, worlds)),
        DomainMode::Constant => out.push((1u64 << d) - 1),
    }
    for _ in 0..worlds {
        out.extend(std::iter::repeat_n(1u64 << d, sig.concepts.len()));
        out.extend(std::iter::repeat_n(1u64 << (d * d), sig.roles.len()));
    }
    let nb = 1u64 << (1u32 << worlds);
    out.extend(std::iter::repeat_n(nb, sig.modalities.len() * worlds));
    out
}

/// Raw size of the enumeration space before filtering.
pub fn candidate_count(sig: &OracleSignature, bounds: &OracleBounds) -> u128 {
    (1..=bounds.max_worlds)
        .map(|w| {
            radices(sig, bounds, w)
                .into_iter()
                .fold(1u128, |acc, r| acc.saturating_mul(r as u128))
        })
        .fold(0u128, |acc, n| acc.saturating_add(n))
}

/// Every model within `bounds` whose neighbourhoods belong to `class`, in
/// odometer order: world count, then domains, then concept and role
/// extensions, then neighbourhoods, the last digit turning fastest.
pub fn enumerate_models(
    sig: &OracleSignature,
    bounds: OracleBounds,
    class: FrameClass,
) -> Result<Models, OracleError> {
    enumerate_models_capped(sig, bounds, class, DEFAULT_CANDIDATE_CAP)
}

pub fn enumerate_models_capped(
    sig: &OracleSignature,
    bounds: OracleBounds,
    class: FrameClass,
    cap: u128,
) -> Result<Models, OracleError> {
    bounds.check()?;
    sig.check()?;
    let candidates = candidate_count(sig, &bounds);
    if candidates > cap {
        return Err(OracleError::BoundsTooLarge { candidates, cap });
    }
    Ok(Models {
        sig: sig.clone(),
        bounds,
        class,
        worlds: 1,
        digits: vec![0; radices(sig, &bounds, 1).len()],
        radices: radices(sig, &bounds, 1),
        done: false,
    })
}

pub struct Models {
    sig: OracleSignature,
    bounds: OracleBounds,
    class: FrameClass,
    worlds: usize,
    digits: Vec<u64>,
    radices: Vec<u64>,
    done: bool,
}

impl Models {
    fn advance(&mut self) {
        for i in (0..self.digits.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.radices[i] {
                return;
            }
            self.digits[i] = 0;
        }
        if self.worlds == self.bounds.max_worlds {
            self.done = true;
            return;
        }
        self.worlds += 1;
        self.radices = radices(&self.sig, &self.bounds, self.worlds);
        self.digits = vec![0; self.radices.len()];
    }

    fn build(&self) -> Option<NeighbourhoodModel> {
        let w = self.worlds;
        let d = self.bounds.max_domain;
        let mut digits = self.digits.iter().copied();
        let doms: Vec<u64> = match self.bounds.domain_mode {
            DomainMode::Varying => (0..w).map(|_| digits.next().unwrap() + 1).collect(),
            DomainMode::Constant => vec![digits.next().unwrap() + 1; w],
        };
        let mut m = NeighbourhoodModel::empty(world_names(w), element_names(d));
        m.constant_domain = self.bounds.domain_mode == DomainMode::Constant;
        for (wi, &dom) in doms.iter().enumerate() {
            m.domains[wi] = mask_bits(dom, d);
            for a in &self.sig.concepts {
                let ext = digits.next().unwrap();
                if ext & !dom != 0 {
                    return None;
                }
                m.concepts[wi].insert(a.clone(), mask_bits(ext, d));
            }
            for r in &self.sig.roles {
                let pairs = digits.next().unwrap();
                let mut set = BTreeSet::new();
                for bit in 0..d * d {
                    if pairs & (1 << bit) != 0 {
                        let (x, y) = (bit / d, bit % d);
                        if dom & (1 << x) == 0 || dom & (1 << y) == 0 {
                            return None;
                        }
                        set.insert((x, y));
                    }
                }
                m.roles[wi].insert(r.clone(), set);
            }
        }
        for &i in &self.sig.modalities {
            let mut per_world = Vec::with_capacity(w);
            for _ in 0..w {
                let code = digits.next().unwrap();
                let nb: BTreeSet<WorldSet> =
                    (0..1u64 << w).filter(|s| code & (1 << s) != 0).collect();
                if !self.class.admits(&nb, w) {
                    return None;
                }
                per_world.push(nb);
            }
            m.neighbourhoods.insert(i, per_world);
        }
        Some(m)
    }
}

impl Iterator for Models {
    type Item = NeighbourhoodModel;

    fn next(&mut self) -> Option<NeighbourhoodModel> {
        while !self.done {
            let m = self.build();
            self.advance();
            if m.is_some() {
                return m;
            }
        }
        None
    }
}

fn mask_bits(mask: u64, width: usize) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(width);
    for x in 0..width {
        out.set(x, mask & (1 << x) != 0);
    }
    out
}

// ---------------------------------------------------------------------------
// Lazy search
// ---------------------------------------------------------------------------

enum C {
    Atom(usize),
    Top,
    Bot,
    Not(Box<C>),
    And(Box<C>, Box<C>),
    Or(Box<C>, Box<C>),
    Exists(usize, Box<C>),
    Forall(usize, Box<C>),
    Nec(usize, Box<C>),
    Poss(usize, Box<C>),
}

enum F {
    Sub(C, C),
    Not(Box<F>),
    And(Box<F>, Box<F>),
    Or(Box<F>, Box<F>),
    Nec(usize, Box<F>),
    Poss(usize, Box<F>),
}

struct Compiler<'a> {
    sig: &'a OracleSignature,
}

impl Compiler<'_> {
    fn index(names: &[String], x: &str) -> usize {
        names.iter().position(|n| n == x).unwrap()
    }

    fn modality(&self, i: Modality) -> usize {
        self.sig.modalities.iter().position(|&m| m == i).unwrap()
    }

    fn concept(&self, c: &Concept) -> C {
        match c {
            Concept::Atomic(a) => C::Atom(Self::index(&self.sig.concepts, a)),
            Concept::Top => C::Top,
            Concept::Bot => C::Bot,
            Concept::Not(d) => C::Not(Box::new(self.concept(d))),
            Concept::And(a, b) => C::And(Box::new(self.concept(a)), Box::new(self.concept(b))),
            Concept::Or(a, b) => C::Or(Box::new(self.concept(a)), Box::new(self.concept(b))),
            Concept::Exists(r, d) => {
                C::Exists(Self::index(&self.sig.roles, r), Box::new(self.concept(d)))
            }
            Concept::Forall(r, d) => {
                C::Forall(Self::index(&self.sig.roles, r), Box::new(self.concept(d)))
            }
            Concept::Necessarily(i, d) => C::Nec(self.modality(*i), Box::new(self.concept(d))),
            Concept::Possibly(i, d) => C::Poss(self.modality(*i), Box::new(self.concept(d))),
        }
    }

    fn formula(&self, f: &Formula) -> F {
        match f {
            Formula::Sub(c, d) => F::Sub(self.concept(c), self.concept(d)),
            Formula::Not(g) => F::Not(Box::new(self.formula(g))),
            Formula::And(a, b) => F::And(Box::new(self.formula(a)), Box::new(self.formula(b))),
            Formula::Or(a, b) => F::Or(Box::new(self.formula(a)), Box::new(self.formula(b))),
            Formula::Necessarily(i, g) => F::Nec(self.modality(*i), Box::new(self.formula(g))),
            Formula::Possibly(i, g) => F::Poss(self.modality(*i), Box::new(self.formula(g))),
        }
    }
}

/// An open bit the evaluation needs, as an index into the bit table.
struct Need(usize);

type Eval = Result<bool, Need>;

/// Partial model: domains fixed, every other bit open or decided.
struct Partial {
    class: FrameClass,
    worlds: usize,
    elements: usize,
    domains: Vec<u64>,
    concepts: usize,
    roles: usize,
    bits: Vec<Option<bool>>,
}

impl Partial {
    fn new(sig: &OracleSignature, class: FrameClass, domains: Vec<u64>, elements: usize) -> Self {
        let worlds = domains.len();
        let (c, r, m) = (sig.concepts.len(), sig.roles.len(), sig.modalities.len());
        let size = worlds * (c * elements + r * elements * elements) + m * worlds * (1 << worlds);
        Partial {
            class,
            worlds,
            elements,
            domains,
            concepts: c,
            roles: r,
            bits: vec![None; size],
        }
    }

    fn concept_bit(&self, w: usize, a: usize, x: usize) -> usize {
        (w * self.concepts + a) * self.elements + x
    }

    fn role_bit(&self, w: usize, r: usize, x: usize, y: usize) -> usize {
        self.worlds * self.concepts * self.elements
            + ((w * self.roles + r) * self.elements + x) * self.elements
            + y
    }

    fn nb_base(&self) -> usize {
        self.worlds * (self.concepts * self.elements + self.roles * self.elements * self.elements)
    }

    fn nb_bit(&self, i: usize, w: usize, set: WorldSet) -> usize {
        self.nb_base() + ((i * self.worlds + w) << self.worlds) + set as usize
    }

    fn read(&self, bit: usize) -> Eval {
        self.bits[bit].ok_or(Need(bit))
    }

    fn in_domain(&self, w: usize, x: usize) -> bool {
        self.domains[w] & (1 << x) != 0
    }

    fn holds(&self, w: usize, x: usize, c: &C) -> Eval {
        Ok(match c {
            C::Atom(a) => self.read(self.concept_bit(w, *a, x))?,
            C::Top => true,
            C::Bot => false,
            C::Not(d) => !self.holds(w, x, d)?,
            C::And(a, b) => self.holds(w, x, a)? && self.holds(w, x, b)?,
            C::Or(a, b) => self.holds(w, x, a)? || self.holds(w, x, b)?,
            C::Exists(r, d) => {
                for y in 0..self.elements {
                    if self.in_domain(w, y)
                        && self.read(self.role_bit(w, *r, x, y))?
                        && self.holds(w, y, d)?
                    {
                        return Ok(true);
                    }
                }
                false
            }
            C::Forall(r, d) => {
                for y in 0..self.elements {
                    if self.in_domain(w, y)
                        && self.read(self.role_bit(w, *r, x, y))?
                        && !self.holds(w, y, d)?
                    {
                        return Ok(false);
                    }
                }
                true
            }
            C::Nec(i, d) => {
                let ts = self.element_truth_set(x, d, false)?;
                self.read(self.nb_bit(*i, w, ts))?
            }
            C::Poss(i, d) => {
                let ts = self.element_truth_set(x, d, true)?;
                !self.read(self.nb_bit(*i, w, ts))?
            }
        })
    }

    /// Worlds whose domain holds `x` and where `x` is (or with `negated`,
    /// is not) in `c`.
    fn element_truth_set(&self, x: usize, c: &C, negated: bool) -> Result<WorldSet, Need> {
        let mut ts = 0;
        for v in 0..self.worlds {
            if self.in_domain(v, x) && self.holds(v, x, c)? != negated {
                ts |= 1 << v;
            }
        }
        Ok(ts)
    }

    fn satisfies(&self, w: usize, f: &F) -> Eval {
        Ok(match f {
            F::Sub(c, d) => {
                for x in 0..self.elements {
                    if self.in_domain(w, x) && self.holds(w, x, c)? && !self.holds(w, x, d)? {
                        return Ok(false);
                    }
                }
                true
            }
            F::Not(g) => !self.satisfies(w, g)?,
            F::And(a, b) => self.satisfies(w, a)? && self.satisfies(w, b)?,
            F::Or(a, b) => self.satisfies(w, a)? || self.satisfies(w, b)?,
            F::Nec(i, g) => {
                let ts = self.formula_truth_set(g)?;
                self.read(self.nb_bit(*i, w, ts))?
            }
            F::Poss(i, g) => {
                let ts = full_set(self.worlds) & !self.formula_truth_set(g)?;
                !self.read(self.nb_bit(*i, w, ts))?
            }
        })
    }

    fn formula_truth_set(&self, f: &F) -> Result<WorldSet, Need> {
        let mut ts = 0;
        for v in 0..self.worlds {
            if self.satisfies(v, f)? {
                ts |= 1 << v;
            }
        }
        Ok(ts)
    }

    /// Decided members and non-members of one neighbourhood.
    fn decided(&self, i: usize, w: usize) -> (Vec<WorldSet>, Vec<WorldSet>) {
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for set in 0..1u64 << self.worlds {
            match self.bits[self.nb_bit(i, w, set)] {
                Some(true) => ins.push(set),
                Some(false) => outs.push(set),
                None => {}
            }
        }
        (ins, outs)
    }

    /// Whether the decided bits of the neighbourhood of `(i, w)` extend to a
    /// neighbourhood of the class.
    fn completable(&self, i: usize, w: usize) -> bool {
        let (ins, outs) = self.decided(i, w);
        let full = full_set(self.worlds);
        match self.class {
            FrameClass::E => true,
            FrameClass::M => !ins.iter().any(|&a| outs.iter().any(|&o| a & !o == 0)),
            FrameClass::C => outs.iter().all(|&o| {
                let above: Vec<_> = ins.iter().filter(|&&a| o & !a == 0).collect();
                above.is_empty() || above.iter().fold(full, |acc, &&a| acc & a) != o
            }),
            FrameClass::N => !outs.contains(&full),
        }
    }

    /// The least neighbourhood of the class containing the decided members.
    fn completion(&self, i: usize, w: usize) -> BTreeSet<WorldSet> {
        let ins: BTreeSet<WorldSet> = self.decided(i, w).0.into_iter().collect();
        let full = full_set(self.worlds);
        match self.class {
            FrameClass::E => ins,
            FrameClass::M => supersets(&ins, full),
            FrameClass::C => intersection_closure(&ins),
            FrameClass::N => {
                let mut out = ins;
                out.insert(full);
                out
            }
        }
    }

    fn nb_owner(&self, bit: usize) -> Option<(usize, usize)> {
        let rel = bit.checked_sub(self.nb_base())? >> self.worlds;
        Some((rel / self.worlds, rel % self.worlds))
    }

    /// Model with open bits false and neighbourhoods completed, elements
    /// outside every domain dropped.
    fn to_model(&self, sig: &OracleSignature, constant: bool) -> NeighbourhoodModel {
        let used: Vec<usize> = (0..self.elements)
            .filter(|&x| self.domains.iter().any(|d| d & (1 << x) != 0))
            .collect();
        let n = used.len();
        let mut m = NeighbourhoodModel::empty(world_names(self.worlds), element_names(n));
        m.constant_domain = constant;
        for w in 0..self.worlds {
            let mut dom = FixedBitSet::with_capacity(n);
            for (k, &x) in used.iter().enumerate() {
                dom.set(k, self.in_domain(w, x));
            }
            m.domains[w] = dom;
            for (a, name) in sig.concepts.iter().enumerate() {
                let mut ext = FixedBitSet::with_capacity(n);
                for (k, &x) in used.iter().enumerate() {
                    let on =
                        self.in_domain(w, x) && self.bits[self.concept_bit(w, a, x)] == Some(true);
                    ext.set(k, on);
                }
                m.concepts[w].insert(name.clone(), ext);
            }
            for (r, name) in sig.roles.iter().enumerate() {
                let mut pairs = BTreeSet::new();
                for (k, &x) in used.iter().enumerate() {
                    for (l, &y) in used.iter().enumerate() {
                        let on = self.in_domain(w, x)
                            && self.in_domain(w, y)
                            && self.bits[self.role_bit(w, r, x, y)] == Some(true);
                        if on {
                            pairs.insert((k, l));
                        }
                    }
                }
                m.roles[w].insert(name.clone(), pairs);
            }
        }
        for (i, &modality) in sig.modalities.iter().enumerate() {
            let per_world = (0..self.worlds).map(|w| self.completion(i, w)).collect();
            m.neighbourhoods.insert(modality, per_world);
        }
        m
    }
}

struct Search<'a> {
    root: &'a F,
    nodes: u64,
    cap: u64,
}

impl Search<'_> {
    fn run(&mut self, p: &mut Partial) -> Result<bool, OracleError> {
        self.nodes += 1;
        if self.nodes > self.cap {
            return Err(OracleError::NodeCap(self.cap));
        }
        let bit = match p.satisfies(0, self.root) {
            Ok(v) => return Ok(v),
            Err(Need(bit)) => bit,
        };
        let owner = p.nb_owner(bit);
        for value in [false, true] {
            p.bits[bit] = Some(value);
            let ok = owner.is_none_or(|(i, w)| p.completable(i, w));
            if ok && self.run(p)? {
                return Ok(true);
            }
        }
        p.bits[bit] = None;
        Ok(false)
    }
}

/// Domain tuples for `worlds` worlds over a pool of `pool` elements, one per
/// orbit under renaming elements.
fn domain_tuples(worlds: usize, pool: usize, mode: DomainMode) -> Vec<Vec<u64>> {
    if mode == DomainMode::Constant {
        return (1..=pool).map(|s| vec![(1u64 << s) - 1; worlds]).collect();
    }
    let perms = permutations(pool);
    let subsets = (1u64 << pool) - 1;
    let mut out = Vec::new();
    let mut tuple = vec![1u64; worlds];
    loop {
        let canonical = perms.iter().all(|p| {
            let image: Vec<u64> = tuple.iter().map(|&d| permute(d, p)).collect();
            image >= tuple
        });
        if canonical {
            out.push(tuple.clone());
        }
        let mut i = worlds;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if tuple[i] < subsets {
                tuple[i] += 1;
                break;
            }
            tuple[i] = 1;
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn permute(mask: u64, p: &[usize]) -> u64 {
    (0..p.len())
        .filter(|&x| mask & (1 << x) != 0)
        .fold(0, |acc, x| acc | (1 << p[x]))
}

/// Searches for a model within `bounds` whose first world satisfies `phi`.
pub fn brute_force_sat(
    phi: &Formula,
    class: FrameClass,
    bounds: OracleBounds,
) -> Result<OracleOutcome, OracleError> {
    brute_force_sat_capped(phi, class, bounds, DEFAULT_NODE_CAP)
}

pub fn brute_force_sat_capped(
    phi: &Formula,
    class: FrameClass,
    bounds: OracleBounds,
    node_cap: u64,
) -> Result<OracleOutcome, OracleError> {
    bounds.check()?;
    let sig = OracleSignature::of(phi);
    sig.check()?;
    let root = Compiler { sig: &sig }.formula(phi);
    let mut search = Search {
        root: &root,
        nodes: 0,
        cap: node_cap,
    };
    let constant = bounds.domain_mode == DomainMode::Constant;
    for worlds in 1..=bounds.max_worlds {
        for domains in domain_tuples(worlds, bounds.max_domain, bounds.domain_mode) {
            let mut p = Partial::new(&sig, class, domains, bounds.max_domain);
            if search.run(&mut p)? {
                let model = p.to_model(&sig, constant);
                check_witness(&model, phi, class)?;
                return Ok(OracleOutcome {
                    verdict: OracleVerdict::Sat,
                    model: Some(model),
                    nodes: search.nodes,
                });
            }
        }
    }
    Ok(OracleOutcome {
        verdict: OracleVerdict::UnsatWithinBounds,
        model: None,
        nodes: search.nodes,
    })
}

fn check_witness(
    m: &NeighbourhoodModel,
    phi: &Formula,
    class: FrameClass,
) -> Result<(), OracleError> {
    m.check_invariants()
        .map_err(|e| OracleError::Inconsistent(e.to_string()))?;
    if !m.check_frame_class(class) {
        return Err(OracleError::Inconsistent(format!(
            "witness is not a {class} model"
        )));
    }
    match m.satisfies(0, phi) {
        Ok(true) => Ok(()),
        Ok(false) => Err(OracleError::Inconsistent(
            "witness does not satisfy the formula".into(),
        )),
        Err(e) => Err(OracleError::Inconsistent(e.to_string())),
    }
}

/// Satisfiability by plain enumeration: some model has a world satisfying
/// `phi`. Only usable for tiny signatures and bounds.
pub fn enumeration_sat(
    phi: &Formula,
    class: FrameClass,
    bounds: OracleBounds,
) -> Result<bool, OracleError> {
    let sig = OracleSignature::of(phi);
    for m in enumerate_models(&sig, bounds, class)? {
        let ts = m
            .truth_set(phi)
            .map_err(|e| OracleError::Inconsistent(e.to_string()))?;
        if ts != 0 {
            return Ok(true);
        }
    }
    Ok(false)
}
