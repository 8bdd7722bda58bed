//! Randomized invariants tying the search engine, the theory layer, and the
//! brute-force reference together.

mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{random_colored, rng, GenConfig};
use mdpsynth::dt::pad_tree;
use mdpsynth::ingest::{canonical_json, gen_beetle, parse_problem};
use mdpsynth::model::value_mc;
use mdpsynth::oracle::{brute_feasible, brute_robust, DEFAULT_CAP};
use mdpsynth::params::{enumerate_space, eval_formula, Kleene, ParamKind, PartialAssignment};
use mdpsynth::robust::{solve_robust, verify_assignment, RobustConfig};
use mdpsynth::solver::{solve, SearchProblem, SolverConfig};
use mdpsynth::theory::{as_hook, theory_check, Polarity, TheoryCache, TheoryQuery, TheorySettings};

const PRECISION: f64 = 1e-6;

fn engine_feasible(c: &mdpsynth::colored::ColoredMdp, nu: f64) -> (mdpsynth::solver::Verdict, Option<PartialAssignment>) {
    let problem = SearchProblem::over_all(&c.params, &c.tau);
    let mut cache = TheoryCache::new(true);
    let settings = TheorySettings::new(nu, PRECISION);
    let mut hook = as_hook(c, settings, Polarity::Positive, Some(&mut cache));
    let out = solve(&problem, &mut hook, &SolverConfig::default()).unwrap();
    (out.verdict, out.witness)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    // The engine's verdict and witness agree with exhaustive enumeration.
    #[test]
    fn engine_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (c, nu) = random_colored(&mut r, &GenConfig::default());
        let oracle = brute_feasible(&c, nu, PRECISION, DEFAULT_CAP).unwrap();
        let (verdict, witness) = engine_feasible(&c, nu);
        prop_assert_eq!(verdict, oracle.verdict);
        if let Some(w) = witness {
            let (viable, _) = verify_assignment(&c, nu, &w, PRECISION).unwrap();
            prop_assert!(viable, "engine witness failed re-verification");
        }
    }

    // A positive-polarity theory conflict admits no viable total extension,
    // and restricting it to the dependent parameters preserves conflict.
    #[test]
    fn conflicts_are_sound_and_restriction_preserves(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (c, nu) = random_colored(&mut r, &GenConfig::default());
        // Query a random partial assignment.
        let ids: Vec<_> = c.params.ids().collect();
        let mut k = PartialAssignment::new();
        for &p in &ids {
            if r.gen_bool(0.5) {
                let d = c.params.get(p);
                k.set(p, r.gen_range(d.lo..=d.hi));
            }
        }
        let q = TheoryQuery { literals: k.clone(), polarity: Polarity::Positive };
        let Some(nogood) = theory_check(&c, nu, &q, PRECISION, None).unwrap() else {
            return Ok(());
        };
        prop_assert!(nogood.literals.subset_of(&k));
        for theta in enumerate_space(&c.params, &mdpsynth::params::Formula::True) {
            let total = theta.as_partial();
            if !nogood.literals.subset_of(&total) {
                continue;
            }
            let mc = c.induce(&total).unwrap();
            let value = value_mc(&mc, PRECISION).unwrap().at_initial(&mc);
            prop_assert!(
                value < nu - PRECISION,
                "viable extension {} of conflict {}", total.display(&c.params), nogood.literals.display(&c.params)
            );
        }
        let q2 = TheoryQuery { literals: nogood.literals.clone(), polarity: Polarity::Positive };
        let again = theory_check(&c, nu, &q2, PRECISION, None).unwrap();
        prop_assert!(again.is_some(), "restricted conflict no longer conflicts");
    }

    // Caching never changes a theory verdict.
    #[test]
    fn cache_is_transparent(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (c, nu) = random_colored(&mut r, &GenConfig::default());
        let mut cache = TheoryCache::new(true);
        let ids: Vec<_> = c.params.ids().collect();
        for _ in 0..12 {
            let mut k = PartialAssignment::new();
            for &p in &ids {
                if r.gen_bool(0.6) {
                    let d = c.params.get(p);
                    k.set(p, r.gen_range(d.lo..=d.hi));
                }
            }
            let q = TheoryQuery { literals: k, polarity: Polarity::Positive };
            let cached = theory_check(&c, nu, &q, PRECISION, Some(&mut cache)).unwrap();
            let fresh = theory_check(&c, nu, &q, PRECISION, None).unwrap();
            prop_assert_eq!(cached.is_some(), fresh.is_some());
            if let (Some(a), Some(b)) = (cached, fresh) {
                prop_assert_eq!(a.literals, b.literals);
            }
        }
    }

    // The quantified engine agrees with grouped enumeration, and a sat
    // witness survives every compatible completion.
    #[test]
    fn robust_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = GenConfig { max_states: 10, max_params: 4, uncontrollable: 2, ..Default::default() };
        let (c, nu) = random_colored(&mut r, &cfg);
        if c.params.of_kind(ParamKind::Controllable).is_empty() {
            return Ok(());
        }
        let oracle = brute_robust(&c, nu, PRECISION, DEFAULT_CAP).unwrap();
        let config = RobustConfig { precision: PRECISION, ..Default::default() };
        let out = solve_robust(&c, nu, &config).unwrap();
        prop_assert_eq!(out.verdict, oracle.verdict);
        if let Some(w) = out.witness_x {
            for theta in enumerate_space(&c.params, &c.tau) {
                let total = theta.as_partial();
                if !w.subset_of(&total) {
                    continue;
                }
                let (viable, _) = verify_assignment(&c, nu, &total, PRECISION).unwrap();
                prop_assert!(viable, "completion {} refutes the witness", total.display(&c.params));
            }
        }
    }

    // Every counterexample the robust loop records genuinely refutes its
    // candidate.
    #[test]
    fn counterexamples_refute(seed in any::<u64>()) {
        let mut r = rng(seed);
        let cfg = GenConfig { max_states: 10, max_params: 3, uncontrollable: 1, ..Default::default() };
        let (c, nu) = random_colored(&mut r, &cfg);
        if c.params.of_kind(ParamKind::Controllable).is_empty() {
            return Ok(());
        }
        let config = RobustConfig { precision: PRECISION, ..Default::default() };
        let out = solve_robust(&c, nu, &config).unwrap();
        for (candidate, completion) in &out.counterexample_trace {
            let total = candidate.union(completion);
            prop_assert_eq!(eval_formula(&c.tau, &c.params, &total).unwrap(), Kleene::True);
            let (viable, _) = verify_assignment(&c, nu, &total, PRECISION).unwrap();
            prop_assert!(!viable, "recorded counterexample does not refute");
        }
    }

    // Padding a decision tree to a larger frame never changes its outputs.
    #[test]
    fn padding_preserves_semantics(
        prop in 0usize..3,
        cut in -2i64..6,
        lo in 0i64..4,
        hi in 0i64..4,
        probes in proptest::collection::vec(proptest::collection::vec(-3i64..8, 3), 1..12),
    ) {
        use mdpsynth::dt::DtNode;
        let tree = mdpsynth::dt::DecisionTree {
            nodes: vec![
                DtNode::Decision { feature: prop, threshold: cut, no: 1, yes: 2 },
                DtNode::Leaf { action: lo },
                DtNode::Leaf { action: hi },
            ],
        };
        let padded = pad_tree(&tree);
        prop_assert!(padded.leaf_count() > tree.leaf_count());
        for probe in &probes {
            prop_assert_eq!(tree.eval(probe).unwrap(), padded.eval(probe).unwrap());
        }
    }
}

#[test]
fn canonical_form_is_idempotent() {
    for multi in [false, true] {
        let file = gen_beetle(multi);
        let text = canonical_json(&file);
        let reparsed = parse_problem(&text).unwrap();
        assert_eq!(canonical_json(&reparsed), text);
    }
}

#[test]
fn tau_filters_enumeration() {
    let (c, _) = mdpsynth::ingest::build_problem(&gen_beetle(false)).unwrap();
    let mut count = 0u64;
    for theta in enumerate_space(&c.params, &c.tau) {
        assert_eq!(eval_formula(&c.tau, &c.params, &theta.as_partial()).unwrap(), Kleene::True);
        count += 1;
    }
    assert_eq!(count, 192);
}

#[test]
fn distinct_seeds_generate_valid_models() {
    let mut sat = 0;
    for seed in 0..40u64 {
        let mut r = rng(seed);
        let (c, nu) = random_colored(&mut r, &GenConfig::default());
        let report = brute_feasible(&c, nu, PRECISION, DEFAULT_CAP).unwrap();
        if report.verdict == mdpsynth::solver::Verdict::Sat {
            sat += 1;
        }
        let _ = c;
    }
    // The generator must produce a healthy mix of sat and unsat instances.
    assert!(sat >= 5, "only {sat}/40 sat");
    assert!(sat <= 35, "{sat}/40 sat");
}
