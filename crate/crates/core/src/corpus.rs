//! Seeded random formulas for differential testing.
//!
//! Two shapes are produced. Normalized formulas are built directly in
//! negation normal form with every inclusion of the form `⊤ ⊑ C`, under a
//! shared weight budget. Arbitrary formulas use every constructor, including
//! general inclusions and nested negations, and exercise the syntax
//! transformations.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{Concept, Formula, Modality};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusConfig {
    pub concepts: Vec<String>,
    pub roles: Vec<String>,
    /// Modalities are drawn from `1..=modalities`.
    pub modalities: Modality,
    /// Bound on the formula weight plus the weights of its inclusion concepts.
    pub max_weight: usize,
    /// Forbid boxes and diamonds inside concepts.
    pub g_fragment: bool,
    /// With `g_fragment`, the number of distinct inclusions to draw from.
    pub max_inclusions: usize,
    pub max_modal_depth: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            concepts: vec!["A".into(), "B".into()],
            roles: vec!["r".into()],
            modalities: 2,
            max_weight: 6,
            g_fragment: false,
            max_inclusions: 4,
            max_modal_depth: usize::MAX,
        }
    }
}

impl CorpusConfig {
    /// Formulas without modalised concepts over at most four distinct
    /// inclusions and modal depth two.
    pub fn g_fragment() -> Self {
        CorpusConfig {
            g_fragment: true,
            max_modal_depth: 2,
            ..Self::default()
        }
    }
}

pub struct Generator {
    rng: ChaCha8Rng,
    config: CorpusConfig,
}

impl Generator {
    pub fn new(seed: u64, config: CorpusConfig) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
            config,
        }
    }

    /// A normalized formula within the configured budget, signature and
    /// fragment restrictions.
    pub fn normalized(&mut self) -> Formula {
        loop {
            let budget = self.rng.gen_range(0..=self.config.max_weight);
            let phi = if self.config.g_fragment {
                let pool = self.inclusion_pool();
                self.fragment_formula(budget, &pool)
            } else {
                self.formula(budget).0
            };
            if phi.modal_depth() <= self.config.max_modal_depth {
                return phi;
            }
        }
    }

    fn inclusion_pool(&mut self) -> Vec<Concept> {
        let n = self.rng.gen_range(1..=self.config.max_inclusions.max(1));
        (0..n)
            .map(|_| {
                let b = self.rng.gen_range(0..=2);
                self.concept(b).0
            })
            .collect()
    }

    fn modality(&mut self) -> Modality {
        self.rng.gen_range(1..=self.config.modalities.max(1))
    }

    fn name(&mut self, names: &[String]) -> String {
        names
            .choose(&mut self.rng)
            .cloned()
            .unwrap_or_else(|| "A".into())
    }

    /// Returns the formula and the budget it consumed.
    fn formula(&mut self, budget: usize) -> (Formula, usize) {
        if budget == 0 || self.rng.gen_bool(0.25) {
            let (c, w) = self.concept(budget);
            let ci = Formula::global(c);
            let f = if self.rng.gen_bool(0.35) {
                Formula::not(ci)
            } else {
                ci
            };
            return (f, w);
        }
        match self.rng.gen_range(0..4) {
            0 | 1 => {
                let left = self.rng.gen_range(0..budget);
                let (a, wa) = self.formula(left);
                let (b, wb) = self.formula(budget - 1 - wa);
                let f = if self.rng.gen_bool(0.5) {
                    Formula::and(a, b)
                } else {
                    Formula::or(a, b)
                };
                (f, wa + wb + 1)
            }
            2 => {
                let i = self.modality();
                let (f, w) = self.formula(budget - 1);
                (Formula::nec(i, f), w + 1)
            }
            _ => {
                let i = self.modality();
                let (f, w) = self.formula(budget - 1);
                (Formula::poss(i, f), w + 1)
            }
        }
    }

    fn fragment_formula(&mut self, budget: usize, pool: &[Concept]) -> Formula {
        if budget == 0 || self.rng.gen_bool(0.25) {
            let ci = Formula::global(pool.choose(&mut self.rng).cloned().unwrap_or(Concept::Top));
            return if self.rng.gen_bool(0.35) {
                Formula::not(ci)
            } else {
                ci
            };
        }
        match self.rng.gen_range(0..4) {
            0 | 1 => {
                let left = self.rng.gen_range(0..budget);
                let a = self.fragment_formula(left, pool);
                let b = self.fragment_formula(budget - 1 - left, pool);
                if self.rng.gen_bool(0.5) {
                    Formula::and(a, b)
                } else {
                    Formula::or(a, b)
                }
            }
            2 => {
                let i = self.modality();
                Formula::nec(i, self.fragment_formula(budget - 1, pool))
            }
            _ => {
                let i = self.modality();
                Formula::poss(i, self.fragment_formula(budget - 1, pool))
            }
        }
    }

    /// An NNF concept of weight at most `budget`.
    fn concept(&mut self, budget: usize) -> (Concept, usize) {
        if budget == 0 || self.rng.gen_bool(0.3) {
            let c = match self.rng.gen_range(0..10) {
                0 => Concept::Top,
                1 => Concept::Bot,
                2..=5 => Concept::atom(self.name(&self.config.concepts.clone())),
                _ => Concept::not(Concept::atom(self.name(&self.config.concepts.clone()))),
            };
            return (c, 0);
        }
        let kinds = if self.config.g_fragment || self.config.modalities == 0 {
            4
        } else {
            6
        };
        match self.rng.gen_range(0..kinds) {
            0 | 1 => {
                let left = self.rng.gen_range(0..budget);
                let (a, wa) = self.concept(left);
                let (b, wb) = self.concept(budget - 1 - wa);
                let c = if self.rng.gen_bool(0.5) {
                    Concept::and(a, b)
                } else {
                    Concept::or(a, b)
                };
                (c, wa + wb + 1)
            }
            2 | 3 if !self.config.roles.is_empty() => {
                let r = self.name(&self.config.roles.clone());
                let (c, w) = self.concept(budget - 1);
                let c = if self.rng.gen_bool(0.5) {
                    Concept::some(r, c)
                } else {
                    Concept::all(r, c)
                };
                (c, w + 1)
            }
            2 | 3 => self.concept(0),
            _ => {
                let i = self.modality();
                let (c, w) = self.concept(budget - 1);
                let c = if self.rng.gen_bool(0.5) {
                    Concept::nec(i, c)
                } else {
                    Concept::poss(i, c)
                };
                (c, w + 1)
            }
        }
    }

    /// A formula of depth at most `depth` using every constructor, not
    /// necessarily in normal form.
    pub fn arbitrary(&mut self, depth: usize) -> Formula {
        if depth == 0 || self.rng.gen_bool(0.2) {
            let c = self.arbitrary_concept(depth.min(2));
            let d = self.arbitrary_concept(depth.min(2));
            return Formula::sub(c, d);
        }
        let d = depth - 1;
        match self.rng.gen_range(0..5) {
            0 => Formula::not(self.arbitrary(d)),
            1 => Formula::and(self.arbitrary(d), self.arbitrary(d)),
            2 => Formula::or(self.arbitrary(d), self.arbitrary(d)),
            3 => Formula::nec(self.modality(), self.arbitrary(d)),
            _ => Formula::poss(self.modality(), self.arbitrary(d)),
        }
    }

    pub fn arbitrary_concept(&mut self, depth: usize) -> Concept {
        if depth == 0 || self.rng.gen_bool(0.25) {
            return match self.rng.gen_range(0..6) {
                0 => Concept::Top,
                1 => Concept::Bot,
                _ => Concept::atom(self.name(&self.config.concepts.clone())),
            };
        }
        let d = depth - 1;
        match self.rng.gen_range(0..8) {
            0 => Concept::not(self.arbitrary_concept(d)),
            1 => Concept::and(self.arbitrary_concept(d), self.arbitrary_concept(d)),
            2 => Concept::or(self.arbitrary_concept(d), self.arbitrary_concept(d)),
            3 => Concept::some(
                self.name(&self.config.roles.clone()),
                self.arbitrary_concept(d),
            ),
            4 => Concept::all(
                self.name(&self.config.roles.clone()),
                self.arbitrary_concept(d),
            ),
            5 => Concept::nec(self.modality(), self.arbitrary_concept(d)),
            6 => Concept::poss(self.modality(), self.arbitrary_concept(d)),
            _ => Concept::not(Concept::not(self.arbitrary_concept(d))),
        }
    }
}

/// Total weight counted against the corpus budget: the formula weight plus
/// the weight of every inclusion concept.
pub fn budget_weight(phi: &Formula) -> usize {
    phi.weight()
        + phi
            .inclusions()
            .iter()
            .map(|(c, d)| c.weight() + d.weight())
            .sum::<usize>()
}

/// `count` normalized formulas from `seed`.
pub fn corpus(seed: u64, count: usize, config: CorpusConfig) -> Vec<Formula> {
    let mut g = Generator::new(seed, config);
    (0..count).map(|_| g.normalized()).collect()
}
