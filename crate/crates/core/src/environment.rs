//! Simulated partially observable worlds, the noisy query oracle and action
//! execution with feedback.
//!
//! The hidden world is a complete truth assignment. Schema rules act as world
//! laws: after every action their conclusions are forced (a chilled object
//! placed in a fridge stays cold, a placed object is no longer held).

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DomainError, DomainSchema, GoalConstraints, GroundAction, Instance, RevealTarget, State,
};
use crate::predictor::HiddenTruth;
use crate::store::{GroundedFact, PredicateId, Provenance};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("invalid environment configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Micro,
    Household,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HouseholdLayout {
    pub rooms: usize,
    pub objects: usize,
    /// Closable containers besides the fridge.
    pub cabinets: usize,
    pub countertops: usize,
    pub fridge: bool,
    pub sinkbasin: bool,
}

impl Default for HouseholdLayout {
    fn default() -> Self {
        HouseholdLayout {
            rooms: 3,
            objects: 3,
            cabinets: 2,
            countertops: 1,
            fridge: true,
            sinkbasin: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VisibilityRules {
    /// Observe the whole world at the start (full observability).
    pub everything: bool,
    /// Predicates observed for every argument.
    pub always: Vec<String>,
    /// Object attributes, each observed with `attribute_fraction` probability
    /// when the object sits in an open receptacle.
    pub attributes: Vec<String>,
    pub attribute_fraction: f64,
}

impl Default for VisibilityRules {
    fn default() -> Self {
        VisibilityRules {
            everything: false,
            always: vec!["open".into(), "holding".into(), "handempty".into()],
            attributes: vec!["clean".into(), "cold".into()],
            attribute_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvInstanceConfig {
    pub domain: DomainKind,
    pub layout: HouseholdLayout,
    pub visibility: VisibilityRules,
    /// Chance that a closable container starts open.
    pub open_probability: f64,
    pub clean_probability: f64,
    pub cold_probability: f64,
}

impl Default for EnvInstanceConfig {
    fn default() -> Self {
        EnvInstanceConfig {
            domain: DomainKind::Household,
            layout: HouseholdLayout::default(),
            visibility: VisibilityRules::default(),
            open_probability: 0.3,
            clean_probability: 0.5,
            cold_probability: 0.3,
        }
    }
}

impl EnvInstanceConfig {
    pub fn micro() -> Self {
        EnvInstanceConfig {
            domain: DomainKind::Micro,
            open_probability: 0.5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(EnvError::Config(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        unit("open_probability", self.open_probability)?;
        unit("clean_probability", self.clean_probability)?;
        unit("cold_probability", self.cold_probability)?;
        unit("attribute_fraction", self.visibility.attribute_fraction)?;
        if self.domain == DomainKind::Household {
            let l = &self.layout;
            if l.objects == 0 || l.rooms == 0 {
                return Err(EnvError::Config("household needs at least one object and one room".into()));
            }
            let receptacles = l.cabinets + l.countertops + usize::from(l.fridge) + usize::from(l.sinkbasin);
            if receptacles < 2 {
                return Err(EnvError::Config("household needs at least two receptacles".into()));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> DomainSchema {
        match self.domain {
            DomainKind::Micro => DomainSchema::micro(),
            DomainKind::Household => DomainSchema::household(),
        }
    }

    /// Typed object list, in a fixed order.
    pub fn objects(&self) -> Vec<(String, String)> {
        match self.domain {
            DomainKind::Micro => vec![
                ("o1".into(), "object".into()),
                ("o2".into(), "object".into()),
                ("c1".into(), "container".into()),
                ("c2".into(), "container".into()),
            ],
            DomainKind::Household => {
                const NAMES: [&str; 8] = ["apple", "mug", "plate", "bread", "knife", "egg", "tomato", "spoon"];
                let l = &self.layout;
                let mut out: Vec<(String, String)> = (0..l.objects)
                    .map(|i| {
                        let base = NAMES[i % NAMES.len()];
                        let name = if i < NAMES.len() {
                            base.to_string()
                        } else {
                            format!("{base}-{}", i / NAMES.len())
                        };
                        (name, "object".into())
                    })
                    .collect();
                if l.fridge {
                    out.push(("fridge".into(), "fridge".into()));
                }
                for i in 0..l.cabinets {
                    out.push((format!("cabinet-{i}"), "container".into()));
                }
                for i in 0..l.countertops {
                    out.push((format!("countertop-{i}"), "surface".into()));
                }
                if l.sinkbasin {
                    out.push(("sinkbasin".into(), "sinkbasin".into()));
                }
                out
            }
        }
    }

    /// Grounds the schema with its own rules as world laws.
    pub fn instance(&self) -> Result<Instance, EnvError> {
        self.validate()?;
        let schema = Arc::new(self.schema());
        let rules = schema.rule_set();
        Ok(Instance::new(schema, &self.objects(), rules)?)
    }
}

/// Per-predicate oracle error rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub default_error: f64,
    /// Keyed by full predicate text (`in(apple,fridge)`) or predicate name.
    pub overrides: BTreeMap<String, f64>,
    /// Side-effect facts of a query are also subject to error.
    pub delta_errors: bool,
    /// Repeating a query returns the first answer instead of a fresh draw.
    pub persistent_errors: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            default_error: 0.0,
            overrides: BTreeMap::new(),
            delta_errors: false,
            persistent_errors: false,
        }
    }
}

impl OracleConfig {
    pub fn uniform(error: f64) -> Self {
        OracleConfig {
            default_error: error,
            ..Self::default()
        }
    }

    pub fn error_for(&self, p: &PredicateId) -> f64 {
        self.overrides
            .get(&p.to_string())
            .or_else(|| self.overrides.get(&p.name))
            .copied()
            .unwrap_or(self.default_error)
    }

    /// True when no query answer can be wrong.
    pub fn is_exact(&self) -> bool {
        self.default_error == 0.0 && self.overrides.values().all(|&e| e == 0.0)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let rates = std::iter::once(&self.default_error).chain(self.overrides.values());
        for &e in rates {
            if !(0.0..=0.5).contains(&e) {
                return Err(EnvError::Config(format!("oracle error rate must lie in [0, 0.5], got {e}")));
            }
        }
        Ok(())
    }
}

/// Ground truth for one episode plus the task goal.
#[derive(Debug, Clone)]
pub struct HiddenWorld {
    instance: Arc<Instance>,
    truth: State,
    goal: GoalConstraints,
    rooms: HashMap<String, usize>,
    agent_room: usize,
}

impl HiddenWorld {
    /// `truth` must assign every predicate of `instance`.
    pub fn new(instance: Arc<Instance>, truth: State, goal: GoalConstraints) -> Self {
        HiddenWorld {
            instance,
            truth,
            goal,
            rooms: HashMap::new(),
            agent_room: 0,
        }
    }

    pub fn with_rooms(mut self, rooms: HashMap<String, usize>) -> Self {
        self.rooms = rooms;
        self
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn truth(&self) -> &State {
        &self.truth
    }

    pub fn goal(&self) -> &GoalConstraints {
        &self.goal
    }

    pub fn value(&self, p: &PredicateId) -> Option<bool> {
        self.instance.index_of(p).and_then(|i| self.truth.get(i))
    }

    pub fn goal_holds(&self, goal: &GoalConstraints) -> bool {
        goal.required
            .iter()
            .all(|(p, &v)| self.value(p) == Some(v))
    }

    /// Steps to walk to the receptacle's room, moving the agent there.
    fn travel(&mut self, receptacle: Option<&str>) -> u32 {
        let Some(room) = receptacle.and_then(|r| self.rooms.get(r)).copied() else {
            return 0;
        };
        let d = room.abs_diff(self.agent_room) as u32;
        self.agent_room = room;
        d
    }

    /// Runs one action against the truth. On success returns the changed
    /// predicate indices (effects and forced consequences); on failure the
    /// violated preconditions, leaving the world untouched.
    pub fn apply_action(&mut self, a: &GroundAction) -> Result<Result<Vec<usize>, Vec<usize>>, DomainError> {
        let ca = self.instance.require_action(a)?;
        let violated: Vec<usize> = ca
            .pre
            .iter()
            .filter(|&&(i, v)| !self.truth.holds(i, v))
            .map(|&(i, _)| i)
            .collect();
        if !violated.is_empty() {
            return Ok(Err(violated));
        }
        let before = self.truth;
        self.truth.apply(&ca.add, &ca.del);
        self.instance.ramify(&mut self.truth);
        Ok(Ok((0..self.instance.num_predicates())
            .filter(|&i| before.get(i) != self.truth.get(i))
            .collect()))
    }

    /// Executes the plan on a copy of the truth: every step's preconditions
    /// must hold when it runs and the goal must hold at the end.
    pub fn plan_feasible(&self, plan: &[GroundAction], goal: &GoalConstraints) -> bool {
        let mut sim = self.clone();
        for a in plan {
            match sim.apply_action(a) {
                Ok(Ok(_)) => {}
                _ => return false,
            }
        }
        sim.goal_holds(goal)
    }

    /// Receptacle whose contents a query for `p` reveals, with the action
    /// used to reveal it.
    fn reveal_target(&self, p: &PredicateId) -> Option<(String, String)> {
        let schema = self.instance.schema();
        let policy = schema.query_policy(&p.name)?;
        let arg_of = |var: &str| {
            policy
                .atom
                .args
                .iter()
                .position(|t| matches!(t, crate::domain::Term::Var(v) if v == var))
                .and_then(|pos| p.args.get(pos).cloned())
        };
        match &policy.reveal {
            RevealTarget::Observe => None,
            RevealTarget::Receptacle { var, via } => arg_of(var).map(|r| (r, via.clone())),
            RevealTarget::LocationOf { var, via } => {
                let obj = arg_of(var)?;
                self.location_of(&obj).map(|r| (r, via.clone()))
            }
        }
    }

    fn location_of(&self, object: &str) -> Option<String> {
        let loc = self.instance.schema().location_predicate()?;
        self.instance
            .predicates()
            .iter()
            .enumerate()
            .find(|(i, p)| p.name == loc.name && p.args[0] == object && self.truth.holds(*i, true))
            .map(|(_, p)| p.args[1].clone())
    }

    fn is_visible_receptacle(&self, r: &str) -> bool {
        let Some(vis) = self.instance.schema().visibility_predicate() else {
            return true;
        };
        self.value(&PredicateId::new(vis.name.clone(), &[r])).unwrap_or(true)
    }

    /// Location facts for every object with respect to `r`.
    fn contents(&self, r: &str) -> Vec<usize> {
        let Some(loc) = self.instance.schema().location_predicate() else {
            return Vec::new();
        };
        self.instance
            .predicates()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.name == loc.name && p.args[1] == r)
            .map(|(i, _)| i)
            .collect()
    }
}

impl HiddenTruth for HiddenWorld {
    fn hidden_value(&self, p: &PredicateId) -> Option<bool> {
        self.value(p)
    }
}

/// Mixes a global seed, an episode index and a stream tag into one seed.
pub fn derive_seed(global: u64, episode: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(global) ^ episode) ^ stream)
}

/// Samples a hidden world and a goal that does not already hold.
pub fn sample_world(config: &EnvInstanceConfig, instance: Arc<Instance>, seed: u64) -> Result<HiddenWorld, EnvError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = instance.schema().clone();
    let items: Vec<String> = instance.objects_of_type("object").map(String::from).collect();
    let receptacles: Vec<String> = instance.objects_of_type("receptacle").map(String::from).collect();
    if items.is_empty() || receptacles.len() < 2 {
        return Err(EnvError::Config("world needs objects and at least two receptacles".into()));
    }
    let idx = |name: &str, args: &[&str]| instance.require_index(&PredicateId::new(name, args));

    let mut truth = State::default();
    for i in 0..instance.num_predicates() {
        truth.set(i, false);
    }
    for r in &receptacles {
        let closable = schema.is_subtype(instance.object_type(r).unwrap_or(""), "container");
        let open = !closable || rng.random::<f64>() < config.open_probability;
        truth.set(idx("open", &[r])?, open);
    }
    let mut location = HashMap::new();
    for o in &items {
        let r = receptacles.choose(&mut rng).expect("non-empty").clone();
        truth.set(idx("in", &[o, &r])?, true);
        location.insert(o.clone(), r);
        if config.domain == DomainKind::Household {
            truth.set(idx("clean", &[o])?, rng.random::<f64>() < config.clean_probability);
            truth.set(idx("cold", &[o])?, rng.random::<f64>() < config.cold_probability);
        }
    }
    truth.set(idx("handempty", &[])?, true);
    instance.ramify(&mut truth);

    let o = items.choose(&mut rng).expect("non-empty").clone();
    let here = location[&o].clone();
    let elsewhere: Vec<&String> = receptacles.iter().filter(|r| **r != here).collect();
    let target = (*elsewhere.choose(&mut rng).expect("two receptacles")).clone();
    let place = (PredicateId::new("in", &[&o, &target]), true);
    let goal = match config.domain {
        DomainKind::Micro => {
            if rng.random::<bool>() {
                GoalConstraints::new([(PredicateId::new("holding", &[&o]), true)])
            } else {
                GoalConstraints::new([place])
            }
        }
        DomainKind::Household => match rng.random_range(0..10) {
            0..4 => GoalConstraints::new([place]),
            4..7 => GoalConstraints::new([place, (PredicateId::new("clean", &[&o]), true)]),
            _ => GoalConstraints::new([place, (PredicateId::new("cold", &[&o]), true)]),
        },
    };

    let rooms_n = match config.domain {
        DomainKind::Micro => 1,
        DomainKind::Household => config.layout.rooms,
    };
    let rooms = receptacles
        .iter()
        .enumerate()
        .map(|(i, r)| (r.clone(), i % rooms_n))
        .collect();
    Ok(HiddenWorld::new(instance, truth, goal).with_rooms(rooms))
}

/// Every hidden state of a world with the schema's laws in force: each object
/// in exactly one receptacle, any open/closed pattern for closable containers,
/// any attribute values, nothing held. Attribute-free schemas (micro) give
/// `|receptacles|^|objects| * 2^|containers|` states.
pub fn enumerate_worlds(instance: &Instance) -> Vec<State> {
    let schema = instance.schema();
    let items: Vec<&str> = instance.objects_of_type("object").collect();
    let receptacles: Vec<&str> = instance.objects_of_type("receptacle").collect();
    let closable: Vec<&str> = receptacles
        .iter()
        .copied()
        .filter(|r| schema.is_subtype(instance.object_type(r).unwrap_or(""), "container"))
        .collect();
    let attrs: Vec<usize> = instance
        .predicates()
        .iter()
        .enumerate()
        .filter(|(_, p)| p.name == "clean" || p.name == "cold")
        .map(|(i, _)| i)
        .collect();
    let idx = |name: &str, args: &[&str]| instance.index_of(&PredicateId::new(name, args));

    let mut out = Vec::new();
    let loc_combos = receptacles.len().pow(items.len() as u32);
    for loc in 0..loc_combos {
        for open_mask in 0u64..(1 << closable.len()) {
            for attr_mask in 0u64..(1 << attrs.len()) {
                let mut s = State::default();
                for i in 0..instance.num_predicates() {
                    s.set(i, false);
                }
                let mut rest = loc;
                for o in &items {
                    let r = receptacles[rest % receptacles.len()];
                    rest /= receptacles.len();
                    if let Some(i) = idx("in", &[o, r]) {
                        s.set(i, true);
                    }
                }
                for r in &receptacles {
                    let open = match closable.iter().position(|c| c == r) {
                        Some(j) => open_mask >> j & 1 == 1,
                        None => true,
                    };
                    if let Some(i) = idx("open", &[r]) {
                        s.set(i, open);
                    }
                }
                for (j, &i) in attrs.iter().enumerate() {
                    s.set(i, attr_mask >> j & 1 == 1);
                }
                if let Some(i) = idx("handempty", &[]) {
                    s.set(i, true);
                }
                instance.ramify(&mut s);
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub value: bool,
    /// Side-effect facts `Δw` (never includes the queried predicate).
    pub delta: Vec<GroundedFact>,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionOutcome {
    pub success: bool,
    pub feedback: Vec<GroundedFact>,
    pub steps: u32,
}

/// What the controller may do to the world.
pub trait Environment: HiddenTruth {
    fn initial_observation(&self) -> Vec<GroundedFact>;
    /// Answer for `p` plus any facts the query revealed on the way.
    fn query(&mut self, p: &PredicateId) -> QueryOutcome;
    fn execute_action(&mut self, a: &GroundAction) -> ExecutionOutcome;
    /// Whether the goal holds now, with the observed goal predicate values.
    fn observe_goal(&mut self, goal: &GoalConstraints) -> (bool, Vec<GroundedFact>);
    /// Called once per committed plan, before execution starts.
    fn on_commit(&mut self, _plan: &[GroundAction]) {}
}

/// Simulated environment over a [`HiddenWorld`].
#[derive(Debug, Clone)]
pub struct SimEnv {
    world: HiddenWorld,
    oracle: OracleConfig,
    rng: ChaCha8Rng,
    initial: Vec<GroundedFact>,
    answers: HashMap<PredicateId, bool>,
    commits: Vec<bool>,
}

impl SimEnv {
    pub fn new(world: HiddenWorld, visibility: &VisibilityRules, oracle: OracleConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let initial = observe_initial(&world, visibility, &mut rng);
        SimEnv {
            world,
            oracle,
            rng,
            initial,
            answers: HashMap::new(),
            commits: Vec::new(),
        }
    }

    pub fn world(&self) -> &HiddenWorld {
        &self.world
    }

    /// Ground-truth feasibility of each committed plan, evaluated on the
    /// world as it was at commit time.
    pub fn commit_feasibility(&self) -> &[bool] {
        &self.commits
    }

    fn fact(&self, i: usize, provenance: Provenance) -> GroundedFact {
        let inst = self.world.instance();
        GroundedFact::new(inst.predicate(i).clone(), self.world.truth.value.get(i), provenance)
    }

    fn noisy(&mut self, p: &PredicateId, truth: bool) -> bool {
        if self.oracle.persistent_errors {
            if let Some(&v) = self.answers.get(p) {
                return v;
            }
        }
        let e = self.oracle.error_for(p);
        let v = if e > 0.0 && self.rng.random::<f64>() < e { !truth } else { truth };
        if self.oracle.persistent_errors {
            self.answers.insert(p.clone(), v);
        }
        v
    }
}

fn observe_initial(world: &HiddenWorld, vis: &VisibilityRules, rng: &mut ChaCha8Rng) -> Vec<GroundedFact> {
    let inst = world.instance();
    let loc = inst.schema().location_predicate().map(|d| d.name.clone());
    let mut out = Vec::new();
    for (i, p) in inst.predicates().iter().enumerate() {
        let v = world.truth.value.get(i);
        let visible = if vis.everything || vis.always.contains(&p.name) {
            true
        } else if Some(&p.name) == loc.as_ref() {
            world.is_visible_receptacle(&p.args[1])
        } else if vis.attributes.contains(&p.name) {
            let placed_visibly = world
                .location_of(&p.args[0])
                .is_some_and(|r| world.is_visible_receptacle(&r));
            placed_visibly && rng.random::<f64>() < vis.attribute_fraction
        } else {
            false
        };
        if visible {
            out.push(GroundedFact::new(p.clone(), v, Provenance::InitialObservation));
        }
    }
    out
}

impl HiddenTruth for SimEnv {
    fn hidden_value(&self, p: &PredicateId) -> Option<bool> {
        self.world.value(p)
    }
}

impl Environment for SimEnv {
    fn initial_observation(&self) -> Vec<GroundedFact> {
        self.initial.clone()
    }

    fn query(&mut self, p: &PredicateId) -> QueryOutcome {
        let mut steps = 1;
        let mut delta: BTreeMap<usize, ()> = BTreeMap::new();
        if let Some((r, via)) = self.world.reveal_target(p) {
            steps += self.world.travel(Some(&r));
            if !self.world.is_visible_receptacle(&r) {
                let act = GroundAction::new(via, &[&r]);
                if let Ok(Ok(changed)) = self.world.apply_action(&act) {
                    delta.extend(changed.into_iter().map(|i| (i, ())));
                }
            }
            if self.world.is_visible_receptacle(&r) {
                delta.extend(self.world.contents(&r).into_iter().map(|i| (i, ())));
            }
        }
        let truth = self.world.value(p).unwrap_or(false);
        let value = self.noisy(p, truth);
        let own = self.world.instance().index_of(p);
        let ids: Vec<usize> = delta.into_keys().filter(|&i| Some(i) != own).collect();
        let mut facts = Vec::with_capacity(ids.len());
        for i in ids {
            let mut f = self.fact(i, Provenance::QuerySideEffect);
            if self.oracle.delta_errors {
                let e = self.oracle.error_for(&f.predicate);
                if e > 0.0 && self.rng.random::<f64>() < e {
                    f.value = !f.value;
                }
            }
            facts.push(f);
        }
        QueryOutcome {
            value,
            delta: facts,
            steps,
        }
    }

    fn execute_action(&mut self, a: &GroundAction) -> ExecutionOutcome {
        let inst = self.world.instance().clone();
        let receptacle = a
            .args
            .iter()
            .find(|x| {
                inst.object_type(x)
                    .is_some_and(|t| inst.schema().is_subtype(t, "receptacle"))
            })
            .cloned();
        let steps = 1 + self.world.travel(receptacle.as_deref());
        let mut seen: BTreeMap<usize, ()> = BTreeMap::new();
        let success = match self.world.apply_action(a) {
            Ok(Ok(changed)) => {
                seen.extend(changed.into_iter().map(|i| (i, ())));
                if let Some(ca) = inst.action(a) {
                    seen.extend(ca.add_list.iter().chain(&ca.del_list).map(|&i| (i, ())));
                }
                if let Some(r) = &receptacle {
                    if self.world.is_visible_receptacle(r) {
                        seen.extend(self.world.contents(r).into_iter().map(|i| (i, ())));
                    }
                }
                true
            }
            Ok(Err(violated)) => {
                seen.extend(violated.into_iter().map(|i| (i, ())));
                false
            }
            Err(_) => false,
        };
        let feedback = seen
            .into_keys()
            .map(|i| self.fact(i, Provenance::ExecutionFeedback))
            .collect();
        ExecutionOutcome {
            success,
            feedback,
            steps,
        }
    }

    fn observe_goal(&mut self, goal: &GoalConstraints) -> (bool, Vec<GroundedFact>) {
        let facts = goal
            .required
            .keys()
            .filter_map(|p| {
                self.world
                    .value(p)
                    .map(|v| GroundedFact::new(p.clone(), v, Provenance::ExecutionFeedback))
            })
            .collect();
        (self.world.goal_holds(goal), facts)
    }

    fn on_commit(&mut self, plan: &[GroundAction]) {
        let goal = self.world.goal.clone();
        let ok = self.world.plan_feasible(plan, &goal);
        self.commits.push(ok);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PredicateId {
        s.parse().unwrap()
    }

    fn micro_world(seed: u64) -> HiddenWorld {
        let cfg = EnvInstanceConfig::micro();
        let inst = Arc::new(cfg.instance().unwrap());
        sample_world(&cfg, inst, seed).unwrap()
    }

    #[test]
    fn micro_enumeration_has_sixteen_worlds() {
        let inst = EnvInstanceConfig::micro().instance().unwrap();
        assert_eq!(enumerate_worlds(&inst).len(), 16);
    }

    #[test]
    fn sampled_micro_worlds_cover_every_state() {
        let inst = Arc::new(EnvInstanceConfig::micro().instance().unwrap());
        let all = enumerate_worlds(&inst);
        let mut seen = std::collections::HashSet::new();
        for seed in 0..400 {
            let w = sample_world(&EnvInstanceConfig::micro(), inst.clone(), seed).unwrap();
            assert!(all.contains(w.truth()));
            assert!(!w.goal_holds(w.goal()));
            seen.insert(*w.truth());
        }
        assert_eq!(seen.len(), all.len());
    }

    #[test]
    fn household_laws_hold_after_sampling() {
        let cfg = EnvInstanceConfig::default();
        let inst = Arc::new(cfg.instance().unwrap());
        for seed in 0..50 {
            let w = sample_world(&cfg, inst.clone(), seed).unwrap();
            for o in ["apple", "mug", "plate"] {
                if w.value(&PredicateId::new("in", &[o, "fridge"])) == Some(true) {
                    assert_eq!(w.value(&PredicateId::new("cold", &[o])), Some(true));
                }
            }
            assert!(!w.goal_holds(w.goal()));
        }
    }

    #[test]
    fn error_free_query_returns_truth_and_reveals_contents() {
        let w = micro_world(7);
        let mut env = SimEnv::new(w.clone(), &VisibilityRules::default(), OracleConfig::default(), 1);
        let q = p("in(o1,c1)");
        let out = env.query(&q);
        assert_eq!(Some(out.value), w.value(&q));
        assert!(out.delta.iter().all(|f| f.predicate != q));
        assert_eq!(env.world().value(&p("open(c1)")), Some(true));
        assert!(out.delta.iter().any(|f| f.predicate == p("in(o2,c1)")));
        for f in &out.delta {
            assert_eq!(env.world().value(&f.predicate), Some(f.value));
        }
    }

    #[test]
    fn persistent_errors_repeat_the_first_answer() {
        let w = micro_world(3);
        let oracle = OracleConfig {
            default_error: 0.5,
            persistent_errors: true,
            ..OracleConfig::default()
        };
        let mut env = SimEnv::new(w, &VisibilityRules::default(), oracle, 5);
        let q = p("holding(o1)");
        let first = env.query(&q).value;
        for _ in 0..20 {
            assert_eq!(env.query(&q).value, first);
        }
    }

    #[test]
    fn failed_action_reports_violated_preconditions() {
        let w = micro_world(11);
        let mut env = SimEnv::new(w, &VisibilityRules::default(), OracleConfig::default(), 0);
        let out = env.execute_action(&"put(o1,c1)".parse().unwrap());
        assert!(!out.success);
        assert!(out.feedback.iter().any(|f| f.predicate == p("holding(o1)") && !f.value));
    }

    #[test]
    fn initial_observation_respects_visibility() {
        for seed in 0..30 {
            let w = micro_world(seed);
            let env = SimEnv::new(w.clone(), &VisibilityRules::default(), OracleConfig::default(), seed);
            for f in env.initial_observation() {
                assert_eq!(w.value(&f.predicate), Some(f.value));
                if f.predicate.name == "in" {
                    assert_eq!(w.value(&PredicateId::new("open", &[&f.predicate.args[1]])), Some(true));
                }
            }
        }
    }

    #[test]
    fn derived_seeds_differ_across_streams() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }
}
