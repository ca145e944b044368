use nnmdl::corpus::{CorpusConfig, Generator};
use nnmdl::syntax::{closure, parse_concept, serialize};
use nnmdl::{normalize, parse_formula};
use proptest::prelude::*;

fn arbitrary(seed: u64) -> nnmdl::Formula {
    Generator::new(seed, CorpusConfig::default()).arbitrary(4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn nnf_is_idempotent(seed in any::<u64>()) {
        let nnf = arbitrary(seed).nnf();
        prop_assert!(nnf.is_nnf());
        prop_assert_eq!(nnf.nnf(), nnf);
    }

    #[test]
    fn negation_is_an_involution_preserving_weight(seed in any::<u64>()) {
        let nnf = arbitrary(seed).nnf();
        prop_assert_eq!(nnf.neg_nnf().neg_nnf(), nnf.clone());
        prop_assert_eq!(nnf.neg_nnf().weight(), nnf.weight());
    }

    #[test]
    fn serialization_round_trips(seed in any::<u64>()) {
        let phi = arbitrary(seed);
        prop_assert_eq!(parse_formula(&serialize(&phi)).unwrap(), phi);
        let c = Generator::new(seed, CorpusConfig::default()).arbitrary_concept(4);
        prop_assert_eq!(parse_concept(&c.to_string()).unwrap(), c);
    }

    #[test]
    fn normalization_is_stable(seed in any::<u64>()) {
        let n = normalize(&arbitrary(seed));
        prop_assert!(n.is_normalized());
        prop_assert_eq!(normalize(&n), n.clone());
    }

    #[test]
    fn closure_is_closed_under_negation(seed in any::<u64>()) {
        let n = normalize(&arbitrary(seed));
        let cl = closure(&n);
        for f in &cl.for_neg {
            prop_assert!(cl.for_neg.contains(&f.neg_nnf()));
        }
        for c in &cl.con_neg {
            prop_assert!(cl.con_neg.contains(&c.neg_nnf()));
        }
        prop_assert!(cl.for_neg.contains(&n));
    }
}
