//! Finite neighbourhood models with per-world ALC interpretations.
//!
//! Worlds are indexed by position and sets of worlds are bitmasks, so a
//! model holds at most 64 worlds. Elements form one global pool; each world
//! owns a subset of it as its domain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::syntax::{Concept, Formula, Modality};

/// A set of worlds, bit `i` standing for world `i`.
pub type WorldSet = u64;

pub const MAX_WORLDS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FrameClass {
    /// All neighbourhood frames.
    E,
    /// Supplemented frames.
    M,
    /// Frames closed under intersection.
    C,
    /// Frames containing the unit.
    N,
}

impl FrameClass {
    pub const ALL: [FrameClass; 4] = [FrameClass::E, FrameClass::M, FrameClass::C, FrameClass::N];

    pub fn name(self) -> &'static str {
        match self {
            FrameClass::E => "E",
            FrameClass::M => "M",
            FrameClass::C => "C",
            FrameClass::N => "N",
        }
    }

    /// Whether a single neighbourhood `nb` over `worlds` worlds satisfies the
    /// closure condition of the class.
    pub fn admits(self, nb: &BTreeSet<WorldSet>, worlds: usize) -> bool {
        let full = full_set(worlds);
        match self {
            FrameClass::E => true,
            // closure under one-world extensions gives closure under supersets
            FrameClass::M => nb.iter().all(|&a| {
                (0..worlds)
                    .filter(|v| a & (1 << v) == 0)
                    .all(|v| nb.contains(&(a | (1 << v))))
            }),
            FrameClass::C => nb
                .iter()
                .all(|&a| nb.iter().all(|&b| nb.contains(&(a & b)))),
            FrameClass::N => nb.contains(&full),
        }
    }
}

impl fmt::Display for FrameClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown frame class `{0}` (expected E, M, C or N)")]
pub struct UnknownFrameClass(pub String);

impl FromStr for FrameClass {
    type Err = UnknownFrameClass;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "E" | "e" => Ok(FrameClass::E),
            "M" | "m" => Ok(FrameClass::M),
            "C" | "c" => Ok(FrameClass::C),
            "N" | "n" => Ok(FrameClass::N),
            other => Err(UnknownFrameClass(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("world index {0} out of range")]
    WorldOutOfRange(usize),
    #[error("modality {0} is not interpreted by the model")]
    ModalityOutOfRange(Modality),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("a model needs at least one world")]
    NoWorlds,
    #[error("too many worlds: {0} (at most {MAX_WORLDS})")]
    TooManyWorlds(usize),
    #[error("duplicate world id `{0}`")]
    DuplicateWorld(String),
    #[error("world `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("unknown world `{0}`")]
    UnknownWorld(String),
    #[error("element `{element}` is not in the domain of world `{world}`")]
    ElementOutsideDomain { world: String, element: String },
    #[error("modality index must be a positive integer, got `{0}`")]
    BadModality(String),
    #[error("model is marked constant-domain but domains differ")]
    DomainsDiffer,
    #[error("inconsistent model layout: {0}")]
    Layout(String),
    #[error("invalid model JSON: {0}")]
    Json(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighbourhoodModel {
    pub worlds: Vec<String>,
    pub elements: Vec<String>,
    pub constant_domain: bool,
    /// Per world, the set of element indices in its domain.
    pub domains: Vec<FixedBitSet>,
    /// Per world, concept name to extension. Missing names are empty.
    pub concepts: Vec<BTreeMap<String, FixedBitSet>>,
    /// Per world, role name to a set of element-index pairs.
    pub roles: Vec<BTreeMap<String, BTreeSet<(usize, usize)>>>,
    /// Per modality, per world, the neighbourhood.
    pub neighbourhoods: BTreeMap<Modality, Vec<BTreeSet<WorldSet>>>,
}

pub fn full_set(worlds: usize) -> WorldSet {
    if worlds >= 64 {
        u64::MAX
    } else {
        (1u64 << worlds) - 1
    }
}

impl NeighbourhoodModel {
    /// A model with the given worlds and elements, every world owning every
    /// element, empty interpretations and no modalities.
    pub fn empty(worlds: Vec<String>, elements: Vec<String>) -> Self {
        let w = worlds.len();
        let mut all = FixedBitSet::with_capacity(elements.len());
        all.insert_range(..);
        NeighbourhoodModel {
            domains: vec![all; w],
            concepts: vec![BTreeMap::new(); w],
            roles: vec![BTreeMap::new(); w],
            worlds,
            elements,
            constant_domain: false,
            neighbourhoods: BTreeMap::new(),
        }
    }

    pub fn world_count(&self) -> usize {
        self.worlds.len()
    }

    pub fn all_worlds(&self) -> WorldSet {
        full_set(self.worlds.len())
    }

    pub fn world_index(&self, id: &str) -> Result<usize, SemanticsError> {
        self.worlds
            .iter()
            .position(|w| w == id)
            .ok_or_else(|| SemanticsError::UnknownWorld(id.to_string()))
    }

    pub fn element_index(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e == id)
    }

    /// Checks the structural invariants every model must satisfy.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let w = self.worlds.len();
        if w == 0 {
            return Err(ModelError::NoWorlds);
        }
        if w > MAX_WORLDS {
            return Err(ModelError::TooManyWorlds(w));
        }
        let mut seen = BTreeSet::new();
        for id in &self.worlds {
            if !seen.insert(id) {
                return Err(ModelError::DuplicateWorld(id.clone()));
            }
        }
        if self.domains.len() != w || self.concepts.len() != w || self.roles.len() != w {
            return Err(ModelError::Layout(
                "per-world tables do not match the world list".into(),
            ));
        }
        for (wi, dom) in self.domains.iter().enumerate() {
            if dom.len() != self.elements.len() {
                return Err(ModelError::Layout(
                    "domain bitset has the wrong width".into(),
                ));
            }
            if dom.is_clear() {
                return Err(ModelError::EmptyDomain(self.worlds[wi].clone()));
            }
            for ext in self.concepts[wi].values() {
                if let Some(d) = ext.ones().find(|&d| !dom.contains(d)) {
                    return Err(self.outside(wi, d));
                }
            }
            for pairs in self.roles[wi].values() {
                for &(d, e) in pairs {
                    for x in [d, e] {
                        if x >= self.elements.len() || !dom.contains(x) {
                            return Err(self.outside(wi, x));
                        }
                    }
                }
            }
        }
        if self.constant_domain && self.domains.iter().any(|d| *d != self.domains[0]) {
            return Err(ModelError::DomainsDiffer);
        }
        let full = self.all_worlds();
        for per_world in self.neighbourhoods.values() {
            if per_world.len() != w {
                return Err(ModelError::Layout(
                    "neighbourhood table does not match the world list".into(),
                ));
            }
            if per_world.iter().flatten().any(|a| a & !full != 0) {
                return Err(ModelError::Layout(
                    "neighbourhood member mentions an unknown world".into(),
                ));
            }
        }
        Ok(())
    }

    fn outside(&self, world: usize, element: usize) -> ModelError {
        ModelError::ElementOutsideDomain {
            world: self.worlds[world].clone(),
            element: self
                .elements
                .get(element)
                .cloned()
                .unwrap_or_else(|| format!("#{element}")),
        }
    }

    fn nb(&self, i: Modality) -> Result<&Vec<BTreeSet<WorldSet>>, SemanticsError> {
        self.neighbourhoods
            .get(&i)
            .ok_or(SemanticsError::ModalityOutOfRange(i))
    }

    fn check_world(&self, w: usize) -> Result<(), SemanticsError> {
        if w < self.worlds.len() {
            Ok(())
        } else {
            Err(SemanticsError::WorldOutOfRange(w))
        }
    }

    /// Extension of `c` at every world at once.
    pub fn extensions(&self, c: &Concept) -> Result<Vec<FixedBitSet>, SemanticsError> {
        let n = self.elements.len();
        Ok(match c {
            Concept::Atomic(a) => (0..self.worlds.len())
                .map(|w| {
                    self.concepts[w]
                        .get(a)
                        .cloned()
                        .unwrap_or_else(|| FixedBitSet::with_capacity(n))
                })
                .collect(),
            Concept::Top => self.domains.clone(),
            Concept::Bot => vec![FixedBitSet::with_capacity(n); self.worlds.len()],
            Concept::Not(inner) => {
                let mut ext = self.extensions(inner)?;
                for (w, e) in ext.iter_mut().enumerate() {
                    e.toggle_range(..);
                    e.intersect_with(&self.domains[w]);
                }
                ext
            }
            Concept::And(a, b) => {
                let mut ext = self.extensions(a)?;
                for (e, f) in ext.iter_mut().zip(self.extensions(b)?) {
                    e.intersect_with(&f);
                }
                ext
            }
            Concept::Or(a, b) => {
                let mut ext = self.extensions(a)?;
                for (e, f) in ext.iter_mut().zip(self.extensions(b)?) {
                    e.union_with(&f);
                }
                ext
            }
            Concept::Exists(r, d) | Concept::Forall(r, d) => {
                let inner = self.extensions(d)?;
                let exists = matches!(c, Concept::Exists(..));
                (0..self.worlds.len())
                    .map(|w| {
                        let mut out = FixedBitSet::with_capacity(n);
                        let pairs = self.roles[w].get(r);
                        for x in self.domains[w].ones() {
                            let mut succ = pairs
                                .into_iter()
                                .flat_map(|p| p.range((x, 0)..(x + 1, 0)))
                                .map(|&(_, y)| inner[w].contains(y));
                            let holds = if exists {
                                succ.any(|b| b)
                            } else {
                                succ.all(|b| b)
                            };
                            out.set(x, holds);
                        }
                        out
                    })
                    .collect()
            }
            Concept::Necessarily(i, d) => {
                let nb = self.nb(*i)?;
                let inner = self.extensions(d)?;
                self.modal_extension(&inner, |w, set| nb[w].contains(&set), false)
            }
            Concept::Possibly(i, d) => {
                // (◇D)^w = Δ_w ∖ {x | ⟦¬D⟧_x ∈ N_i(w)}
                let nb = self.nb(*i)?;
                let mut neg = self.extensions(d)?;
                for (w, e) in neg.iter_mut().enumerate() {
                    e.toggle_range(..);
                    e.intersect_with(&self.domains[w]);
                }
                self.modal_extension(&neg, |w, set| nb[w].contains(&set), true)
            }
        })
    }

    fn modal_extension(
        &self,
        inner: &[FixedBitSet],
        member: impl Fn(usize, WorldSet) -> bool,
        complement: bool,
    ) -> Vec<FixedBitSet> {
        (0..self.worlds.len())
            .map(|w| {
                let mut out = FixedBitSet::with_capacity(self.elements.len());
                for x in self.domains[w].ones() {
                    let ts = truth_mask(inner, x);
                    out.set(x, member(w, ts) != complement);
                }
                out
            })
            .collect()
    }

    pub fn interpret_concept(&self, w: usize, c: &Concept) -> Result<FixedBitSet, SemanticsError> {
        self.check_world(w)?;
        Ok(self.extensions(c)?.swap_remove(w))
    }

    /// `⟦C⟧_d`: the worlds at which element `d` belongs to `C`. Worlds whose
    /// domain lacks `d` are never included.
    pub fn truth_set_concept(&self, d: usize, c: &Concept) -> Result<WorldSet, SemanticsError> {
        Ok(truth_mask(&self.extensions(c)?, d))
    }

    /// `⟦φ⟧`: the worlds satisfying `φ`.
    pub fn truth_set(&self, phi: &Formula) -> Result<WorldSet, SemanticsError> {
        let full = self.all_worlds();
        Ok(match phi {
            Formula::Sub(c, d) => {
                let (ce, de) = (self.extensions(c)?, self.extensions(d)?);
                let mut out = 0;
                for w in 0..self.worlds.len() {
                    if ce[w].is_subset(&de[w]) {
                        out |= 1 << w;
                    }
                }
                out
            }
            Formula::Not(f) => full & !self.truth_set(f)?,
            Formula::And(a, b) => self.truth_set(a)? & self.truth_set(b)?,
            Formula::Or(a, b) => self.truth_set(a)? | self.truth_set(b)?,
            Formula::Necessarily(i, f) => {
                let nb = self.nb(*i)?;
                let ts = self.truth_set(f)?;
                (0..self.worlds.len())
                    .filter(|&w| nb[w].contains(&ts))
                    .fold(0, |acc, w| acc | (1 << w))
            }
            Formula::Possibly(i, f) => {
                let nb = self.nb(*i)?;
                let neg = full & !self.truth_set(f)?;
                (0..self.worlds.len())
                    .filter(|&w| !nb[w].contains(&neg))
                    .fold(0, |acc, w| acc | (1 << w))
            }
        })
    }

    pub fn satisfies(&self, w: usize, phi: &Formula) -> Result<bool, SemanticsError> {
        self.check_world(w)?;
        Ok(self.truth_set(phi)? & (1 << w) != 0)
    }

    pub fn check_frame_class(&self, class: FrameClass) -> bool {
        let w = self.worlds.len();
        self.neighbourhoods
            .values()
            .all(|per_world| per_world.iter().all(|nb| class.admits(nb, w)))
    }

    fn map_neighbourhoods(&self, f: impl Fn(&BTreeSet<WorldSet>) -> BTreeSet<WorldSet>) -> Self {
        let mut out = self.clone();
        for per_world in out.neighbourhoods.values_mut() {
            for nb in per_world.iter_mut() {
                *nb = f(nb);
            }
        }
        out
    }

    pub fn close_supplementation(&self) -> Self {
        let full = self.all_worlds();
        self.map_neighbourhoods(|nb| supersets(nb, full))
    }

    pub fn close_intersection(&self) -> Self {
        self.map_neighbourhoods(intersection_closure)
    }

    pub fn add_unit(&self) -> Self {
        let full = self.all_worlds();
        self.map_neighbourhoods(|nb| {
            let mut nb = nb.clone();
            nb.insert(full);
            nb
        })
    }
}

fn truth_mask(ext: &[FixedBitSet], d: usize) -> WorldSet {
    ext.iter()
        .enumerate()
        .filter(|(_, e)| e.contains(d))
        .fold(0, |acc, (w, _)| acc | (1 << w))
}

/// Every set in `nb` together with all of its supersets within `full`.
pub fn supersets(nb: &BTreeSet<WorldSet>, full: WorldSet) -> BTreeSet<WorldSet> {
    let mut out = BTreeSet::new();
    for &a in nb {
        if out.contains(&a) {
            continue;
        }
        let free = full & !a;
        let mut sub = free;
        loop {
            out.insert(a | sub);
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
    }
    out
}

pub fn intersection_closure(nb: &BTreeSet<WorldSet>) -> BTreeSet<WorldSet> {
    let mut out = nb.clone();
    loop {
        let snapshot: Vec<WorldSet> = out.iter().copied().collect();
        let before = out.len();
        for (k, &a) in snapshot.iter().enumerate() {
            for &b in &snapshot[k + 1..] {
                out.insert(a & b);
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RawModel {
    worlds: Vec<String>,
    #[serde(default)]
    constant_domain: bool,
    domains: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    concepts: BTreeMap<String, BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    roles: BTreeMap<String, BTreeMap<String, Vec<(String, String)>>>,
    #[serde(default)]
    neighbourhoods: BTreeMap<String, BTreeMap<String, Vec<Vec<String>>>>,
}

impl NeighbourhoodModel {
    fn world_names(&self, set: WorldSet) -> Vec<String> {
        let mut names: Vec<String> = (0..self.worlds.len())
            .filter(|w| set & (1 << w) != 0)
            .map(|w| self.worlds[w].clone())
            .collect();
        names.sort();
        names
    }

    fn element_names(&self, set: &FixedBitSet) -> Vec<String> {
        let mut names: Vec<String> = set.ones().map(|e| self.elements[e].clone()).collect();
        names.sort();
        names
    }

    fn to_raw(&self) -> RawModel {
        let mut raw = RawModel {
            worlds: self.worlds.clone(),
            constant_domain: self.constant_domain,
            domains: BTreeMap::new(),
            concepts: BTreeMap::new(),
            roles: BTreeMap::new(),
            neighbourhoods: BTreeMap::new(),
        };
        for (w, id) in self.worlds.iter().enumerate() {
            raw.domains
                .insert(id.clone(), self.element_names(&self.domains[w]));
            let concepts = self.concepts[w]
                .iter()
                .map(|(a, ext)| (a.clone(), self.element_names(ext)))
                .collect();
            raw.concepts.insert(id.clone(), concepts);
            let roles = self.roles[w]
                .iter()
                .map(|(r, pairs)| {
                    let mut named: Vec<(String, String)> = pairs
                        .iter()
                        .map(|&(d, e)| (self.elements[d].clone(), self.elements[e].clone()))
                        .collect();
                    named.sort();
                    (r.clone(), named)
                })
                .collect();
            raw.roles.insert(id.clone(), roles);
        }
        for (i, per_world) in &self.neighbourhoods {
            let table = self
                .worlds
                .iter()
                .zip(per_world)
                .map(|(id, nb)| {
                    let mut sets: Vec<Vec<String>> =
                        nb.iter().map(|&a| self.world_names(a)).collect();
                    sets.sort();
                    (id.clone(), sets)
                })
                .collect();
            raw.neighbourhoods.insert(i.to_string(), table);
        }
        raw
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.to_raw()).expect("model serialization cannot fail")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("model serialization cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let raw: RawModel =
            serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self, ModelError> {
        let raw: RawModel =
            serde_json::from_value(value.clone()).map_err(|e| ModelError::Json(e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawModel) -> Result<Self, ModelError> {
        let w = raw.worlds.len();
        if w == 0 {
            return Err(ModelError::NoWorlds);
        }
        if w > MAX_WORLDS {
            return Err(ModelError::TooManyWorlds(w));
        }
        let world_of = |id: &str| {
            raw.worlds
                .iter()
                .position(|x| x == id)
                .ok_or_else(|| ModelError::UnknownWorld(id.to_string()))
        };
        for id in raw
            .domains
            .keys()
            .chain(raw.concepts.keys())
            .chain(raw.roles.keys())
        {
            world_of(id)?;
        }
        let elements: Vec<String> = raw
            .domains
            .values()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_str(), i))
            .collect();
        let mut model = NeighbourhoodModel {
            domains: vec![FixedBitSet::with_capacity(elements.len()); w],
            concepts: vec![BTreeMap::new(); w],
            roles: vec![BTreeMap::new(); w],
            worlds: raw.worlds.clone(),
            elements: elements.clone(),
            constant_domain: raw.constant_domain,
            neighbourhoods: BTreeMap::new(),
        };
        let lookup = |world: &str, e: &str| {
            index
                .get(e)
                .copied()
                .ok_or_else(|| ModelError::ElementOutsideDomain {
                    world: world.to_string(),
                    element: e.to_string(),
                })
        };
        for (id, dom) in &raw.domains {
            let wi = world_of(id)?;
            for e in dom {
                model.domains[wi].insert(lookup(id, e)?);
            }
        }
        for (id, table) in &raw.concepts {
            let wi = world_of(id)?;
            for (a, ext) in table {
                let mut set = FixedBitSet::with_capacity(elements.len());
                for e in ext {
                    set.insert(lookup(id, e)?);
                }
                model.concepts[wi].insert(a.clone(), set);
            }
        }
        for (id, table) in &raw.roles {
            let wi = world_of(id)?;
            for (r, pairs) in table {
                let mut set = BTreeSet::new();
                for (d, e) in pairs {
                    set.insert((lookup(id, d)?, lookup(id, e)?));
                }
                model.roles[wi].insert(r.clone(), set);
            }
        }
        for (key, table) in &raw.neighbourhoods {
            let i: Modality = key
                .parse()
                .ok()
                .filter(|&i| i >= 1)
                .ok_or_else(|| ModelError::BadModality(key.clone()))?;
            let mut per_world = vec![BTreeSet::new(); w];
            for (id, sets) in table {
                let wi = world_of(id)?;
                for members in sets {
                    let mut mask = 0;
                    for m in members {
                        mask |= 1 << world_of(m)?;
                    }
                    per_world[wi].insert(mask);
                }
            }
            model.neighbourhoods.insert(i, per_world);
        }
        model.check_invariants()?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(bits: &[usize], n: usize) -> FixedBitSet {
        let mut s = FixedBitSet::with_capacity(n);
        for &b in bits {
            s.insert(b);
        }
        s
    }

    fn single_world(a: &[usize], nb: &[WorldSet]) -> NeighbourhoodModel {
        let mut m = NeighbourhoodModel::empty(vec!["w".into()], vec!["d".into()]);
        m.concepts[0].insert("A".into(), set(a, 1));
        m.neighbourhoods
            .insert(1, vec![nb.iter().copied().collect()]);
        m
    }

    /// Two worlds w, v; elements d, e. Δ_w = {d, e}, Δ_v = {e}.
    /// A^w = {e}, A^v = {e}; r^w = {(d, e)}, r^v = {(e, e)}.
    fn two_worlds() -> NeighbourhoodModel {
        let mut m =
            NeighbourhoodModel::empty(vec!["w".into(), "v".into()], vec!["d".into(), "e".into()]);
        m.domains[1] = set(&[1], 2);
        m.concepts[0].insert("A".into(), set(&[1], 2));
        m.concepts[1].insert("A".into(), set(&[1], 2));
        m.roles[0].insert("r".into(), [(0, 1)].into_iter().collect());
        m.roles[1].insert("r".into(), [(1, 1)].into_iter().collect());
        m.neighbourhoods
            .insert(1, vec![[0b10].into_iter().collect(), BTreeSet::new()]);
        m
    }

    #[test]
    fn complement_and_box_on_one_world() {
        let m = single_world(&[0], &[0b1]);
        assert!(m
            .interpret_concept(0, &Concept::not(Concept::atom("A")))
            .unwrap()
            .is_clear());
        let boxed = m
            .interpret_concept(0, &Concept::nec(1, Concept::atom("A")))
            .unwrap();
        assert_eq!(boxed.ones().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn exists_on_two_worlds() {
        // (∃r.A)^w = {d}, (∃r.A)^v = {e}
        let m = two_worlds();
        let c = Concept::some("r", Concept::atom("A"));
        assert_eq!(m.interpret_concept(0, &c).unwrap(), set(&[0], 2));
        assert_eq!(m.interpret_concept(1, &c).unwrap(), set(&[1], 2));
        // e has no r-successor at w, so it satisfies ∀r.¬A vacuously
        let c = Concept::all("r", Concept::not(Concept::atom("A")));
        assert_eq!(m.interpret_concept(0, &c).unwrap(), set(&[1], 2));
        assert!(m.interpret_concept(1, &c).unwrap().is_clear());
    }

    #[test]
    fn truth_sets_respect_varying_domains() {
        let m = two_worlds();
        assert_eq!(m.truth_set_concept(0, &Concept::Top).unwrap(), 0b01);
        assert_eq!(m.truth_set_concept(1, &Concept::Top).unwrap(), 0b11);
        assert_eq!(m.truth_set_concept(0, &Concept::Bot).unwrap(), 0);
        // d is not A at w and absent at v; e is A everywhere
        assert_eq!(m.truth_set_concept(0, &Concept::atom("A")).unwrap(), 0);
        assert_eq!(m.truth_set_concept(1, &Concept::atom("A")).unwrap(), 0b11);
        // ⟦¬A⟧_d = {w}: v is excluded since d ∉ Δ_v
        assert_eq!(
            m.truth_set_concept(0, &Concept::not(Concept::atom("A")))
                .unwrap(),
            0b01
        );
        // N_1(w) = {{v}}: □₁A holds of neither element at w
        let boxed = m
            .interpret_concept(0, &Concept::nec(1, Concept::atom("A")))
            .unwrap();
        assert!(boxed.is_clear());
        // ⟦¬A⟧_e = ∅ ∉ N_1(w) so ◇₁A holds of e; ⟦¬A⟧_d = {w} ∉ N_1(w) so of d too
        let dia = m
            .interpret_concept(0, &Concept::poss(1, Concept::atom("A")))
            .unwrap();
        assert_eq!(dia, set(&[0, 1], 2));
    }

    #[test]
    fn formula_clauses() {
        let m = single_world(&[0], &[]);
        assert!(m.satisfies(0, &Formula::truth()).unwrap());
        let psi = Formula::global(Concept::atom("A"));
        assert!(m.satisfies(0, &Formula::poss(1, psi.clone())).unwrap());
        assert!(m
            .satisfies(0, &Formula::poss(1, Formula::not(psi.clone())))
            .unwrap());
        let m = single_world(&[0], &[0b1]);
        assert!(m.satisfies(0, &Formula::nec(1, psi.clone())).unwrap());
        assert!(!m.satisfies(0, &Formula::nec(1, Formula::not(psi))).unwrap());
    }

    #[test]
    fn errors_on_unknown_modality_and_world() {
        let m = single_world(&[], &[]);
        let f = Formula::nec(2, Formula::truth());
        assert_eq!(
            m.satisfies(0, &f),
            Err(SemanticsError::ModalityOutOfRange(2))
        );
        assert_eq!(
            m.satisfies(3, &Formula::truth()),
            Err(SemanticsError::WorldOutOfRange(3))
        );
        assert!(m.world_index("nowhere").is_err());
    }

    fn nb_model(worlds: usize, nb: &[WorldSet]) -> NeighbourhoodModel {
        let ids = (0..worlds).map(|w| format!("w{w}")).collect();
        let mut m = NeighbourhoodModel::empty(ids, vec!["d".into()]);
        let mut per_world = vec![BTreeSet::new(); worlds];
        per_world[0] = nb.iter().copied().collect();
        m.neighbourhoods.insert(1, per_world);
        m
    }

    #[test]
    fn frame_class_checks() {
        let m = nb_model(2, &[0b01]);
        assert!(m.check_frame_class(FrameClass::E));
        assert!(!m.check_frame_class(FrameClass::M));
        let m = nb_model(2, &[0b01, 0b10]);
        assert!(!m.check_frame_class(FrameClass::C));
        let mut m = nb_model(2, &[0, 1, 2, 3]);
        m.neighbourhoods.get_mut(&1).unwrap()[1] = (0..4).collect();
        for class in FrameClass::ALL {
            assert!(m.check_frame_class(class), "{class}");
        }
    }

    #[test]
    fn closures() {
        let m = nb_model(2, &[0b01, 0b10]).close_intersection();
        assert_eq!(
            m.neighbourhoods[&1][0],
            [0, 0b01, 0b10].into_iter().collect()
        );
        let m = nb_model(2, &[0b01]).close_supplementation();
        assert_eq!(m.neighbourhoods[&1][0], [0b01, 0b11].into_iter().collect());
        let m = nb_model(2, &[]).add_unit();
        assert_eq!(m.neighbourhoods[&1][0], [0b11].into_iter().collect());
        assert!(m.check_frame_class(FrameClass::N));
    }

    #[test]
    fn json_round_trip_is_canonical() {
        let m = two_worlds();
        let text = m.to_json_string();
        assert_eq!(
            text,
            r#"{"worlds":["w","v"],"constant_domain":false,"domains":{"v":["e"],"w":["d","e"]},"concepts":{"v":{"A":["e"]},"w":{"A":["e"]}},"roles":{"v":{"r":[["e","e"]]},"w":{"r":[["d","e"]]}},"neighbourhoods":{"1":{"v":[],"w":[["v"]]}}}"#
        );
        let back = NeighbourhoodModel::from_json_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_broken_models() {
        let bad = r#"{"worlds":["w"],"domains":{"w":[]}}"#;
        assert!(matches!(
            NeighbourhoodModel::from_json_str(bad),
            Err(ModelError::EmptyDomain(_))
        ));
        let bad = r#"{"worlds":["w"],"domains":{"w":["d"]},"concepts":{"w":{"A":["z"]}}}"#;
        assert!(NeighbourhoodModel::from_json_str(bad).is_err());
        let bad = r#"{"worlds":["w","v"],"constant_domain":true,"domains":{"w":["d"],"v":["e"]}}"#;
        assert_eq!(
            NeighbourhoodModel::from_json_str(bad),
            Err(ModelError::DomainsDiffer)
        );
        let bad = r#"{"worlds":["w"],"domains":{"w":["d"]},"neighbourhoods":{"1":{"w":[["q"]]}}}"#;
        assert!(NeighbourhoodModel::from_json_str(bad).is_err());
    }
}
