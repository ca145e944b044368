//! Neighbourhood models read off complete, clash-free completion sets.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::logic::{ModalLogic, NeighbourhoodError};
use crate::semantics::{full_set, FrameClass, NeighbourhoodModel, WorldSet, MAX_WORLDS};
use crate::syntax::{Concept, Formula, Modality};
use crate::tableau::{CompletionSet, ConceptId, ConceptKind, FormulaId, FormulaKind, Tableau, Var};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractionError {
    #[error("completion set contains a clash")]
    Clash,
    #[error("completion set is not complete: a rule is still applicable")]
    Incomplete,
    #[error("{0} labels exceed the {MAX_WORLDS}-world model limit")]
    TooManyLabels(usize),
    #[error(transparent)]
    Neighbourhood(#[from] NeighbourhoodError),
}

/// `⌊γ⌋_x` and `⌈γ⌉_x` as world sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruthApproximation {
    pub floor: WorldSet,
    pub ceil: WorldSet,
}

/// What an approximation is taken of.
#[derive(Clone, Copy, Debug)]
pub enum Target<'a> {
    Formula(&'a Formula),
    Concept(&'a Concept, Var),
}

fn approx_formula(t: &CompletionSet, f: FormulaId) -> TruthApproximation {
    let neg = t.symbols().formula_neg(f);
    let mut a = TruthApproximation {
        floor: 0,
        ceil: full_set(t.labels()),
    };
    for (n, s) in t.systems().iter().enumerate() {
        if s.has_formula(f) {
            a.floor |= 1 << n;
        }
        if s.has_formula(neg) {
            a.ceil &= !(1 << n);
        }
    }
    a
}

fn approx_concept(t: &CompletionSet, c: ConceptId, x: Var) -> TruthApproximation {
    let neg = t.symbols().concept_neg(c);
    let mut a = TruthApproximation {
        floor: 0,
        ceil: full_set(t.labels()),
    };
    for (n, s) in t.systems().iter().enumerate() {
        if s.has_concept(c, x) {
            a.floor |= 1 << n;
        }
        if s.has_concept(neg, x) {
            a.ceil &= !(1 << n);
        }
    }
    a
}

/// Floor: labels asserting `γ` (at `x`); ceiling: labels not asserting `¬̇γ`.
/// Terms outside the closure are asserted nowhere.
pub fn floors_ceilings(t: &CompletionSet, target: Target) -> TruthApproximation {
    let sym = t.symbols();
    let nowhere = TruthApproximation {
        floor: 0,
        ceil: full_set(t.labels()),
    };
    match target {
        Target::Formula(f) => sym
            .formula_id(f)
            .map_or(nowhere, |id| approx_formula(t, id)),
        Target::Concept(c, x) => sym
            .concept_id(c)
            .map_or(nowhere, |id| approx_concept(t, id, x)),
    }
}

/// The canonical model of a complete, clash-free completion set.
pub fn extract_model(
    t: &CompletionSet,
    logic: &Arc<dyn ModalLogic>,
) -> Result<NeighbourhoodModel, ExtractionError> {
    if t.has_clash() {
        return Err(ExtractionError::Clash);
    }
    let engine = Tableau::from_symbols(t.symbols().clone(), logic.clone());
    if !engine
        .is_complete(t)
        .map_err(|_| ExtractionError::Incomplete)?
    {
        return Err(ExtractionError::Incomplete);
    }
    let labels = t.labels();
    if labels > MAX_WORLDS {
        return Err(ExtractionError::TooManyLabels(labels));
    }
    let sym = t.symbols();

    let vars: BTreeSet<Var> = t.systems().iter().flat_map(|s| s.variables()).collect();
    let index: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let elements: Vec<String> = vars.iter().map(|v| format!("x{v}")).collect();
    let worlds: Vec<String> = (0..labels).map(|n| n.to_string()).collect();
    let mut model = NeighbourhoodModel::empty(worlds, elements);

    let atoms: Vec<(ConceptId, &str)> = (0..sym.concept_count() as ConceptId)
        .filter_map(|c| match sym.concept(c) {
            Concept::Atomic(a) => Some((c, a.as_str())),
            _ => None,
        })
        .collect();

    for (n, s) in t.systems().iter().enumerate() {
        let mut dom = FixedBitSet::with_capacity(vars.len());
        for x in s.variables() {
            dom.insert(index[&x]);
        }
        model.domains[n] = dom;
        for &(c, name) in &atoms {
            let mut ext = FixedBitSet::with_capacity(vars.len());
            for x in s.variables().filter(|&x| s.has_concept(c, x)) {
                ext.insert(index[&x]);
            }
            model.concepts[n].insert(name.to_string(), ext);
        }
        let mut roles: BTreeMap<String, BTreeSet<(usize, usize)>> = sym
            .closure()
            .rol
            .iter()
            .map(|r| (r.clone(), BTreeSet::new()))
            .collect();
        for (r, x, y) in s.roles() {
            roles
                .get_mut(sym.role(r))
                .expect("role in closure")
                .insert((index[&x], index[&y]));
        }
        // a blocked variable borrows the successors of its blockers
        for x in s.variables() {
            for z in s.blockers(x) {
                for (r, from, y) in s.roles() {
                    if from == z {
                        roles
                            .get_mut(sym.role(r))
                            .expect("role in closure")
                            .insert((index[&x], index[&y]));
                    }
                }
            }
        }
        model.roles[n] = roles;
    }

    let modalities: BTreeSet<Modality> = (1..=max_modality(t)).collect();
    for i in modalities {
        let mut per_world = Vec::with_capacity(labels);
        for n in 0..labels {
            let boxes = box_approximations(t, n, i);
            per_world.push(logic.neighbourhood(&boxes, labels)?);
        }
        model.neighbourhoods.insert(i, per_world);
    }
    Ok(model)
}

fn max_modality(t: &CompletionSet) -> Modality {
    let sym = t.symbols();
    let from_formulas =
        (0..sym.formula_count() as FormulaId).filter_map(|f| match sym.formula_kind(f) {
            FormulaKind::Box(i, _) | FormulaKind::Dia(i, _) => Some(i),
            _ => None,
        });
    let from_concepts =
        (0..sym.concept_count() as ConceptId).filter_map(|c| match sym.concept_kind(c) {
            ConceptKind::Box(i, _) | ConceptKind::Dia(i, _) => Some(i),
            _ => None,
        });
    from_formulas.chain(from_concepts).max().unwrap_or(0)
}

/// Approximations of the arguments of all `□_i` constraints in label `n`.
pub fn box_approximations(t: &CompletionSet, n: usize, i: Modality) -> Vec<TruthApproximation> {
    let sym = t.symbols();
    let s = t.system(n);
    let mut out = Vec::new();
    for f in s.formulas() {
        if let FormulaKind::Box(j, g) = sym.formula_kind(f) {
            if j == i {
                out.push(approx_formula(t, g));
            }
        }
    }
    for x in s.variables() {
        let cs = s.concepts_of(x).expect("occurring variable");
        for c in cs.ones() {
            if let ConceptKind::Box(j, d) = sym.concept_kind(c as ConceptId) {
                if j == i {
                    out.push(approx_concept(t, d, x));
                }
            }
        }
    }
    out
}

/// Whether `model` is well formed, lies in `class` and satisfies `phi` at its
/// first world.
pub fn model_validates(model: &NeighbourhoodModel, phi: &Formula, class: FrameClass) -> bool {
    model.check_invariants().is_ok()
        && model.check_frame_class(class)
        && model.satisfies(0, phi).unwrap_or(false)
}

/// Extracts the model of `t` and checks it against `phi` and the class.
pub fn validate(
    t: &CompletionSet,
    phi: &Formula,
    logic: &Arc<dyn ModalLogic>,
) -> Result<bool, ExtractionError> {
    let model = extract_model(t, logic)?;
    Ok(model_validates(&model, phi, logic.class()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::logic_for;
    use crate::syntax::parse_formula;
    use crate::tableau::{SolveOptions, Tableau};

    fn completion(text: &str, class: FrameClass) -> (Formula, CompletionSet) {
        let phi = parse_formula(text).unwrap();
        let res = Tableau::for_class(&phi, class)
            .solve(&SolveOptions::default())
            .unwrap();
        (phi, res.completion.expect("sat"))
    }

    #[test]
    fn approximation_extremes() {
        let (_, t) = completion("(sub top (atom A))", FrameClass::E);
        let a = floors_ceilings(&t, Target::Concept(&Concept::Top, 0));
        assert_eq!(a, TruthApproximation { floor: 1, ceil: 1 });
        let b = floors_ceilings(&t, Target::Concept(&Concept::atom("Z"), 0));
        assert_eq!(b, TruthApproximation { floor: 0, ceil: 1 });
    }

    #[test]
    fn two_label_approximations() {
        // ◇₁p with □₁p: the modal rule opens label 1 with p in branch (0)
        let (_, t) = completion(
            "(and (box 1 (sub top (atom A))) (dia 1 (sub top (atom A))))",
            FrameClass::E,
        );
        assert_eq!(t.labels(), 2);
        let p = parse_formula("(sub top (atom A))").unwrap();
        let a = floors_ceilings(&t, Target::Formula(&p));
        assert_eq!(
            a,
            TruthApproximation {
                floor: 0b10,
                ceil: 0b11
            }
        );
        let model = extract_model(&t, &logic_for(FrameClass::E)).unwrap();
        assert_eq!(
            model.neighbourhoods[&1][0],
            [0b10, 0b11].into_iter().collect()
        );
        assert!(model.neighbourhoods[&1][1].is_empty());
    }

    #[test]
    fn diamond_without_box_gives_empty_neighbourhood() {
        let (phi, t) = completion("(dia 1 (not (sub top (atom A))))", FrameClass::E);
        let model = extract_model(&t, &logic_for(FrameClass::E)).unwrap();
        assert_eq!(model.world_count(), 1);
        assert!(model.neighbourhoods[&1][0].is_empty());
        assert!(model.satisfies(0, &phi).unwrap());
    }

    #[test]
    fn blocked_variable_borrows_successor() {
        let (phi, t) = completion("(sub top (some r (atom A)))", FrameClass::E);
        let model = extract_model(&t, &logic_for(FrameClass::E)).unwrap();
        let x = |name: &str| model.element_index(name).unwrap();
        // x2 is blocked by x1, whose successor is x2
        assert_eq!(
            model.roles[0]["r"],
            [(x("x0"), x("x1")), (x("x1"), x("x2")), (x("x2"), x("x2"))]
                .into_iter()
                .collect()
        );
        assert!(model.satisfies(0, &phi).unwrap());
    }

    #[test]
    fn unit_is_always_present_for_n() {
        let (phi, t) = completion(
            "(and (box 1 (sub top (atom A))) (dia 1 (sub top (atom B))))",
            FrameClass::N,
        );
        let model = extract_model(&t, &logic_for(FrameClass::N)).unwrap();
        let full = model.all_worlds();
        assert!(model.neighbourhoods[&1].iter().all(|nb| nb.contains(&full)));
        assert!(model_validates(&model, &phi, FrameClass::N));
    }

    #[test]
    fn validation_and_negative_control() {
        let text = "(and (box 1 (sub top (atom A))) (dia 1 (sub top (atom B))))";
        for class in FrameClass::ALL {
            let (phi, t) = completion(text, class);
            let logic = logic_for(class);
            assert!(validate(&t, &phi, &logic).unwrap(), "{class}");
        }
        let (phi, t) = completion(text, FrameClass::E);
        let mut model = extract_model(&t, &logic_for(FrameClass::E)).unwrap();
        let p = parse_formula("(sub top (atom A))").unwrap();
        let truth = model.truth_set(&p).unwrap();
        assert!(model.neighbourhoods.get_mut(&1).unwrap()[0].remove(&truth));
        assert!(!model_validates(&model, &phi, FrameClass::E));
    }

    #[test]
    fn rejects_incomplete_sets() {
        let phi = parse_formula("(sub top (atom A))").unwrap();
        let tb = Tableau::for_class(&phi, FrameClass::E);
        assert_eq!(
            extract_model(&tb.init(), &logic_for(FrameClass::E)),
            Err(ExtractionError::Incomplete)
        );
    }
}
