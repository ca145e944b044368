//! The four non-normal modal logics as interchangeable strategies.
//!
//! A strategy decides which premise shapes the modal rule accepts, how many
//! labels a terminating run may create, and how the extracted model builds
//! its neighbourhoods from truth-set approximations.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::extraction::TruthApproximation;
use crate::semantics::{full_set, FrameClass, WorldSet};

/// Widest free window (`ceil ∖ floor`) a neighbourhood may be materialized over.
pub const MAX_WINDOW_BITS: u32 = 20;

/// Most box constraints of one modality whose subsets are enumerated.
pub const MAX_SUBSET_BOXES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeighbourhoodError {
    #[error("neighbourhood window spans {0} free worlds, too large to materialize")]
    WindowTooLarge(u32),
    #[error("{0} box constraints of one modality, too many subsets to enumerate")]
    TooManyBoxes(usize),
}

/// One premise shape for the modal rule: the chosen box constraints (indices
/// into the label's boxes of one modality) paired with a single diamond.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModalShape {
    pub boxes: Vec<usize>,
    /// Whether branches `(1)..(k)` exist besides branch `(0)`.
    pub negative_branches: bool,
}

pub trait ModalLogic: Send + Sync + fmt::Debug {
    fn class(&self) -> FrameClass;

    fn name(&self) -> &'static str {
        self.class().name()
    }

    /// Premise shapes for a label holding `boxes` box constraints of some
    /// modality together with a diamond of the same modality.
    fn rule_shapes(&self, boxes: usize) -> Vec<ModalShape>;

    /// Largest number of labels a run on a formula with closure size `fg`
    /// may create.
    fn label_bound(&self, fg: usize) -> u128 {
        (fg as u128).saturating_mul(fg as u128)
    }

    /// The neighbourhood of one world for one modality, built from the
    /// approximations of the box constraints of that modality at the world.
    fn neighbourhood(
        &self,
        boxes: &[TruthApproximation],
        worlds: usize,
    ) -> Result<BTreeSet<WorldSet>, NeighbourhoodError>;
}

fn singles(boxes: usize, negative_branches: bool) -> Vec<ModalShape> {
    (0..boxes)
        .map(|b| ModalShape {
            boxes: vec![b],
            negative_branches,
        })
        .collect()
}

/// All sets between `floor` and `ceil` inclusive.
pub fn window(floor: WorldSet, ceil: WorldSet) -> Result<Vec<WorldSet>, NeighbourhoodError> {
    if floor & !ceil != 0 {
        return Ok(Vec::new());
    }
    let free = ceil & !floor;
    if free.count_ones() > MAX_WINDOW_BITS {
        return Err(NeighbourhoodError::WindowTooLarge(free.count_ones()));
    }
    let mut out = Vec::with_capacity(1 << free.count_ones());
    let mut sub = free;
    loop {
        out.push(floor | sub);
        if sub == 0 {
            return Ok(out);
        }
        sub = (sub - 1) & free;
    }
}

fn windows_union(boxes: &[TruthApproximation]) -> Result<BTreeSet<WorldSet>, NeighbourhoodError> {
    let mut out = BTreeSet::new();
    for b in boxes {
        out.extend(window(b.floor, b.ceil)?);
    }
    Ok(out)
}

#[derive(Debug, Default)]
pub struct LogicE;

impl ModalLogic for LogicE {
    fn class(&self) -> FrameClass {
        FrameClass::E
    }

    fn rule_shapes(&self, boxes: usize) -> Vec<ModalShape> {
        singles(boxes, true)
    }

    fn neighbourhood(
        &self,
        boxes: &[TruthApproximation],
        _worlds: usize,
    ) -> Result<BTreeSet<WorldSet>, NeighbourhoodError> {
        windows_union(boxes)
    }
}

#[derive(Debug, Default)]
pub struct LogicM;

impl ModalLogic for LogicM {
    fn class(&self) -> FrameClass {
        FrameClass::M
    }

    fn rule_shapes(&self, boxes: usize) -> Vec<ModalShape> {
        singles(boxes, false)
    }

    fn neighbourhood(
        &self,
        boxes: &[TruthApproximation],
        worlds: usize,
    ) -> Result<BTreeSet<WorldSet>, NeighbourhoodError> {
        let full = full_set(worlds);
        let mut out = BTreeSet::new();
        for b in boxes {
            out.extend(window(b.floor, full)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Default)]
pub struct LogicC;

impl LogicC {
    /// Non-empty subsets of `0..n`, by size and then lexicographically.
    pub fn subsets(n: usize) -> Vec<Vec<usize>> {
        let mut all: Vec<Vec<usize>> = (1u32..(1 << n))
            .map(|mask| (0..n).filter(|b| mask & (1 << b) != 0).collect())
            .collect();
        all.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        all
    }
}

impl ModalLogic for LogicC {
    fn class(&self) -> FrameClass {
        FrameClass::C
    }

    fn rule_shapes(&self, boxes: usize) -> Vec<ModalShape> {
        if boxes > MAX_SUBSET_BOXES {
            // the engine reports this through its resource checks
            return Vec::new();
        }
        Self::subsets(boxes)
            .into_iter()
            .map(|boxes| ModalShape {
                boxes,
                negative_branches: true,
            })
            .collect()
    }

    fn label_bound(&self, fg: usize) -> u128 {
        let pow = if fg >= 120 { u128::MAX } else { 1u128 << fg };
        pow.saturating_mul(fg as u128)
    }

    fn neighbourhood(
        &self,
        boxes: &[TruthApproximation],
        worlds: usize,
    ) -> Result<BTreeSet<WorldSet>, NeighbourhoodError> {
        if boxes.len() > MAX_SUBSET_BOXES {
            return Err(NeighbourhoodError::TooManyBoxes(boxes.len()));
        }
        // windows [⋂ floors, ⋂ ceils] of every non-empty combination; their
        // union is already closed under intersection
        let full = full_set(worlds);
        let mut out = BTreeSet::new();
        for mask in 1u32..(1 << boxes.len()) {
            let (mut floor, mut ceil) = (full, full);
            for (b, approx) in boxes.iter().enumerate() {
                if mask & (1 << b) != 0 {
                    floor &= approx.floor;
                    ceil &= approx.ceil;
                }
            }
            out.extend(window(floor, ceil)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Default)]
pub struct LogicN;

impl ModalLogic for LogicN {
    fn class(&self) -> FrameClass {
        FrameClass::N
    }

    fn rule_shapes(&self, boxes: usize) -> Vec<ModalShape> {
        let mut shapes = singles(boxes, true);
        shapes.push(ModalShape {
            boxes: Vec::new(),
            negative_branches: false,
        });
        shapes
    }

    fn neighbourhood(
        &self,
        boxes: &[TruthApproximation],
        worlds: usize,
    ) -> Result<BTreeSet<WorldSet>, NeighbourhoodError> {
        let mut out = windows_union(boxes)?;
        out.insert(full_set(worlds));
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no logic registered under `{0}`")]
pub struct UnknownLogic(pub String);

/// Logics registered by name.
#[derive(Debug, Clone, Default)]
pub struct LogicRegistry {
    logics: BTreeMap<String, Arc<dyn ModalLogic>>,
}

impl LogicRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::new();
        reg.register(Arc::new(LogicE));
        reg.register(Arc::new(LogicM));
        reg.register(Arc::new(LogicC));
        reg.register(Arc::new(LogicN));
        reg
    }

    pub fn register(&mut self, logic: Arc<dyn ModalLogic>) {
        self.logics.insert(logic.name().to_string(), logic);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ModalLogic>, UnknownLogic> {
        self.logics
            .get(name)
            .cloned()
            .ok_or_else(|| UnknownLogic(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.logics.keys().map(String::as_str).collect()
    }
}

/// The built-in strategy for a frame class.
pub fn logic_for(class: FrameClass) -> Arc<dyn ModalLogic> {
    match class {
        FrameClass::E => Arc::new(LogicE),
        FrameClass::M => Arc::new(LogicM),
        FrameClass::C => Arc::new(LogicC),
        FrameClass::N => Arc::new(LogicN),
    }
}
