use std::sync::Arc;

use aec_core::environment::derive_seed;
use aec_core::store::{EpistemicState, GroundedFact, StoreError};
use aec_core::trace::{gate_violations, leakage_violations, Trace};
use aec_core::*;
use proptest::prelude::*;

fn household() -> (EnvInstanceConfig, Arc<Instance>) {
    let cfg = EnvInstanceConfig::default();
    let inst = Arc::new(cfg.instance().unwrap());
    (cfg, inst)
}

fn true_facts(world: &HiddenWorld) -> Vec<GroundedFact> {
    let inst = world.instance();
    (0..inst.num_predicates())
        .filter_map(|i| {
            world
                .truth()
                .get(i)
                .map(|v| GroundedFact::new(inst.predicate(i).clone(), v, Provenance::InitialObservation))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // Anything entailed from a subset of the truth agrees with the truth.
    #[test]
    fn entailment_is_sound_against_the_world(seed in any::<u64>(), keep in prop::collection::vec(any::<bool>(), 256)) {
        let (cfg, inst) = household();
        let world = sample_world(&cfg, inst.clone(), seed).unwrap();
        let facts = true_facts(&world);
        let store = GroundedStore::from_facts(
            facts.iter().zip(keep.iter().cycle()).filter(|(_, k)| **k).map(|(f, _)| f.clone()),
        );
        for (i, p) in inst.predicates().iter().enumerate() {
            if let Some(v) = inst.entails(&store, p).unwrap() {
                prop_assert_eq!(Some(v), world.truth().get(i), "{} entailed wrongly", p);
            }
        }
    }

    // Entailment does not depend on the order facts were recorded.
    #[test]
    fn entailment_ignores_fact_order(seed in any::<u64>(), rot in 0usize..64) {
        let (cfg, inst) = household();
        let world = sample_world(&cfg, inst.clone(), seed).unwrap();
        let mut facts: Vec<_> = true_facts(&world).into_iter().step_by(3).collect();
        let a = GroundedStore::from_facts(facts.clone());
        let n = facts.len().max(1);
        facts.rotate_left(rot % n);
        facts.reverse();
        let b = GroundedStore::from_facts(facts);
        for p in inst.predicates() {
            prop_assert_eq!(inst.entails(&a, p).unwrap(), inst.entails(&b, p).unwrap());
        }
    }

    #[test]
    fn plan_application_composes(picks in prop::collection::vec(any::<prop::sample::Index>(), 0..8), split in any::<prop::sample::Index>()) {
        let (cfg, inst) = household();
        let world = sample_world(&cfg, inst.clone(), 1).unwrap();
        let store = GroundedStore::from_facts(true_facts(&world));
        let plan: Vec<GroundAction> = picks.iter().map(|i| inst.actions()[i.index(inst.actions().len())].action.clone()).collect();
        let k = split.index(plan.len() + 1);
        let whole = inst.apply_plan(&plan, &store).unwrap();
        let staged = inst.apply_plan(&plan[k..], &inst.apply_plan(&plan[..k], &store).unwrap()).unwrap();
        prop_assert_eq!(whole.snapshot(), staged.snapshot());
    }

    // Beliefs and grounded facts never share a predicate, whatever the order
    // of predictions and query results.
    #[test]
    fn stores_stay_disjoint(ops in prop::collection::vec((any::<bool>(), any::<prop::sample::Index>(), any::<bool>(), 0.0f64..=1.0), 1..60)) {
        let (_, inst) = household();
        let preds = inst.predicates();
        let mut state = EpistemicState::default();
        for (query, idx, v, sigma) in ops {
            let p = &preds[idx.index(preds.len())];
            if query {
                state.ground(p, v, &[], true).unwrap();
            } else {
                match state.insert_belief(p, v, sigma) {
                    Ok(()) => prop_assert!(!state.grounded.contains(p)),
                    Err(StoreError::Disjointness(q)) => prop_assert_eq!(&q, p),
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
            }
            prop_assert!(state.is_disjoint());
        }
    }

    #[test]
    fn predictions_are_probabilities(accuracy in 0.0f64..=1.0, noise in 0.0f64..3.0, seed in any::<u64>(), truth in any::<bool>()) {
        let mut m = SyntheticPredictor::new(SyntheticPredictorConfig { accuracy, noise_scale: noise, seed, ..Default::default() });
        let pr = m.predict_value(truth);
        prop_assert!((0.0..=1.0).contains(&pr.mu));
        prop_assert!((0.0..=1.0).contains(&pr.sigma));
    }
}

#[test]
fn perfect_noiseless_predictor_is_certain_and_right() {
    let mut m = SyntheticPredictor::new(SyntheticPredictorConfig { accuracy: 1.0, noise_scale: 0.0, seed: 3, ..Default::default() });
    for truth in [true, false, true] {
        let pr = m.predict_value(truth);
        assert_eq!(pr.mu > 0.5, truth);
        assert_eq!(pr.sigma, 0.0);
    }
}

// End to end with an exact oracle: every committed plan is feasible in the
// hidden world, the trace round-trips and passes both audits.
#[test]
fn exact_oracle_episodes_commit_only_feasible_plans() {
    for (cfg, domain) in [(EnvInstanceConfig::default(), "household"), (EnvInstanceConfig::micro(), "micro")] {
        let inst = Arc::new(cfg.instance().unwrap());
        for e in 0..300 {
            let world = sample_world(&cfg, inst.clone(), derive_seed(5, e, 0)).unwrap();
            let goal = world.goal().clone();
            let mut env = SimEnv::new(world, &cfg.visibility, OracleConfig::uniform(0.0), derive_seed(5, e, 1));
            let mut model = SyntheticPredictor::new(SyntheticPredictorConfig {
                accuracy: 0.6,
                seed: derive_seed(5, e, 2),
                ..Default::default()
            });
            let out = run_episode(&mut env, &inst, &goal, &mut model, &ControllerConfig::default());
            assert!(out.success, "{domain} episode {e} failed: {:?}", out.failure);
            assert!(env.commit_feasibility().iter().all(|&ok| ok), "{domain} episode {e}");
            let text = out.trace.to_jsonl();
            let back = Trace::from_jsonl(&text).unwrap();
            assert_eq!(back, out.trace);
            assert!(leakage_violations(&back).is_empty());
            assert!(gate_violations(&back).is_empty());
        }
    }
}
