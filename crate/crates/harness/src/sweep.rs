//! Verifier soundness sweeps: every plan the verifier accepts from a correct
//! grounded store must be feasible in the hidden world.

use std::sync::Arc;
use std::time::{Duration, Instant};

use aec_core::domain::{GoalConstraints, GroundAction, Instance, RuleSet};
use aec_core::environment::{derive_seed, enumerate_worlds, sample_world, EnvInstanceConfig, HiddenWorld};
use aec_core::hypotheses::{generate_hypotheses, GeneratorConfig, Hypothesis};
use aec_core::store::{GroundedFact, GroundedStore, PredicateId, Provenance};
use aec_core::verifier::verify;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

const STREAM_SWEEP: u64 = 3;
const MAX_EXAMPLES: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub worlds: usize,
    pub stores: usize,
    pub checked: usize,
    pub verified: usize,
    pub violations: usize,
    pub examples: Vec<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SweepReport {
    pub fn sound(&self) -> bool {
        self.violations == 0
    }

    fn check(&mut self, h: &Hypothesis, w: &GroundedStore, goal: &GoalConstraints, inst: &Instance, world: &HiddenWorld) {
        self.checked += 1;
        let Ok(v) = verify(h, w, goal, inst) else {
            return;
        };
        if !v.passed {
            return;
        }
        self.verified += 1;
        if !world.plan_feasible(&h.plan, goal) {
            self.violations += 1;
            if self.examples.len() < MAX_EXAMPLES {
                self.examples.push(format!(
                    "plan [{}] for {goal} verified from {{{}}} but infeasible",
                    h.plan_text().join(", "),
                    w.facts().map(|f| f.to_string()).collect::<Vec<_>>().join(", ")
                ));
            }
        }
    }
}

fn all_plans(inst: &Instance, max_len: usize) -> Vec<Vec<GroundAction>> {
    let actions: Vec<GroundAction> = inst.actions().iter().map(|a| a.action.clone()).collect();
    let mut out: Vec<Vec<GroundAction>> = Vec::new();
    let mut frontier: Vec<Vec<GroundAction>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for p in &frontier {
            for a in &actions {
                let mut q = p.clone();
                q.push(a.clone());
                next.push(q);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn truth_facts(world: &HiddenWorld) -> Vec<GroundedFact> {
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

/// Exhaustive sweep of the two-object, two-container world: every hidden
/// state, every subset of its true facts as the grounded store, every
/// single-literal goal; candidates are the generator's hypotheses plus every
/// plan of up to `max_plan_len` actions.
pub fn exhaustive_micro(rules: &RuleSet, max_plan_len: usize) -> Result<SweepReport, ConfigError> {
    let started = Instant::now();
    let env = EnvInstanceConfig::micro();
    let world_inst = Arc::new(env.instance().map_err(|e| ConfigError::Invalid(e.to_string()))?);
    let ctrl = world_inst
        .with_rules(rules.clone())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let items: Vec<String> = world_inst.objects_of_type("object").map(String::from).collect();
    let boxes: Vec<String> = world_inst.objects_of_type("receptacle").map(String::from).collect();
    let mut goals = Vec::new();
    for o in &items {
        goals.push(GoalConstraints::new([(PredicateId::new("holding", &[o]), true)]));
        for c in &boxes {
            goals.push(GoalConstraints::new([(PredicateId::new("in", &[o, c]), true)]));
        }
    }
    let bare: Vec<Hypothesis> = all_plans(&ctrl, max_plan_len)
        .into_iter()
        .enumerate()
        .map(|(i, plan)| Hypothesis::new(format!("p{i}"), plan, Default::default(), 0))
        .collect();
    let gen = GeneratorConfig::default();

    let mut report = SweepReport::default();
    for truth in enumerate_worlds(&world_inst) {
        report.worlds += 1;
        let world = HiddenWorld::new(world_inst.clone(), truth, GoalConstraints::default());
        let facts = truth_facts(&world);
        for mask in 0u64..(1 << facts.len()) {
            let w = GroundedStore::from_facts(
                facts
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, f)| f.clone()),
            );
            report.stores += 1;
            for goal in &goals {
                let generated = generate_hypotheses(&ctrl, &w, goal, 64, &gen)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                for h in generated.iter().chain(&bare) {
                    report.check(h, &w, goal, &ctrl, &world);
                }
            }
        }
    }
    report.elapsed = started.elapsed();
    Ok(report)
}

/// Sampled sweep: for each sampled world, a random subset of its true facts
/// and the full truth serve as grounded stores for the world's own goal.
pub fn sampled_sweep(env: &EnvInstanceConfig, rules: &RuleSet, worlds: usize, seed: u64) -> Result<SweepReport, ConfigError> {
    let started = Instant::now();
    let world_inst = Arc::new(env.instance().map_err(|e| ConfigError::Invalid(e.to_string()))?);
    let ctrl = world_inst
        .with_rules(rules.clone())
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let gen = GeneratorConfig::default();
    let mut report = SweepReport::default();
    for k in 0..worlds as u64 {
        let world = sample_world(env, world_inst.clone(), derive_seed(seed, k, STREAM_SWEEP))
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let goal = world.goal().clone();
        let facts = truth_facts(&world);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k, STREAM_SWEEP + 1));
        let partial = GroundedStore::from_facts(facts.iter().filter(|_| rng.random::<bool>()).cloned());
        let full = GroundedStore::from_facts(facts.iter().cloned());
        report.worlds += 1;
        for w in [partial, full] {
            report.stores += 1;
            let hs = generate_hypotheses(&ctrl, &w, &goal, 64, &gen).map_err(|e| ConfigError::Invalid(e.to_string()))?;
            for h in &hs {
                report.check(h, &w, &goal, &ctrl, &world);
            }
        }
    }
    report.elapsed = started.elapsed();
    Ok(report)
}
