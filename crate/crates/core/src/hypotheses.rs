//! Candidate plans and the preconditions each one assumes.
//!
//! The generator enumerates assignments to the unknown predicates that bear on
//! the goal, plans under each assignment with a breadth-first search, and
//! records which initial facts the plan relies on. Two assignments that lead
//! to the same plan with the same reliance collapse into one hypothesis.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::domain::{Bits, DomainError, GoalConstraints, GroundAction, Instance, State};
use crate::store::{GroundedStore, PredicateId};

/// A candidate plan with its expected precondition values.
///
/// The preconditions are the key set of `expected`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: String,
    pub plan: Vec<GroundAction>,
    pub expected: BTreeMap<PredicateId, bool>,
    /// Preconditions that were assumed rather than known when generated.
    pub assumptions: usize,
}

impl Hypothesis {
    pub fn new(
        id: impl Into<String>,
        plan: Vec<GroundAction>,
        expected: BTreeMap<PredicateId, bool>,
        assumptions: usize,
    ) -> Self {
        Hypothesis {
            id: id.into(),
            plan,
            expected,
            assumptions,
        }
    }

    pub fn preconditions(&self) -> impl Iterator<Item = &PredicateId> {
        self.expected.keys()
    }

    pub fn expected(&self, p: &PredicateId) -> Option<bool> {
        self.expected.get(p).copied()
    }

    /// Shorter plans first, then fewer assumptions.
    pub fn score(&self) -> f64 {
        -(self.plan.len() as f64) - self.assumptions as f64 / 1000.0
    }

    pub fn plan_text(&self) -> Vec<String> {
        self.plan.iter().map(|a| a.to_string()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Unknown predicates enumerated jointly (2^n assignments).
    pub max_assumptions: usize,
    pub max_depth: usize,
    /// Search nodes expanded per assignment before giving up.
    pub max_expansions: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            max_assumptions: 6,
            max_depth: 20,
            max_expansions: 20_000,
        }
    }
}

/// Plan length, assumption count, plan text, expected values.
type RankKey = (usize, usize, Vec<String>, Vec<(PredicateId, bool)>);

/// Candidate plans from the initial store to the goal.
///
/// Only non-empty plans are produced: a goal that already holds needs no
/// hypothesis. Output is sorted by plan length, assumption count and plan text,
/// ids are `h000`, `h001`, ... in that order, and at most `limit` are kept.
pub fn generate_hypotheses(
    inst: &Instance,
    initial: &GroundedStore,
    goal: &GoalConstraints,
    limit: usize,
    cfg: &GeneratorConfig,
) -> Result<Vec<Hypothesis>, DomainError> {
    let known = inst.state_of(initial)?;
    let goal_lits = inst.compile_goal(goal)?;
    let base_closure = inst.closure(&known);
    let known_closed = base_closure.state;

    let goal_objects: Vec<&str> = goal.objects().collect();
    let item_type = inst
        .schema()
        .location_predicate()
        .map(|d| d.params[0].clone());
    let is_item = |name: &str| match (&item_type, inst.object_type(name)) {
        (Some(it), Some(t)) => inst.schema().is_subtype(t, it),
        _ => false,
    };
    let relevant_args = |args: &[String]| {
        args.iter()
            .all(|a| !is_item(a) || goal_objects.contains(&a.as_str()))
    };

    let actions: Vec<usize> = inst
        .actions()
        .iter()
        .enumerate()
        .filter(|(_, ca)| relevant_args(&ca.action.args))
        .map(|(i, _)| i)
        .collect();

    let mut needed = Bits::default();
    for &a in &actions {
        let ca = &inst.actions()[a];
        needed = needed.union(&ca.pre_pos).union(&ca.pre_neg);
    }
    for &(i, _) in &goal_lits {
        needed.set(i);
    }

    let mut candidates: Vec<(usize, usize)> = (0..inst.num_predicates())
        .filter(|&i| known_closed.get(i).is_none() && needed.get(i))
        .filter(|&i| relevant_args(&inst.predicate(i).args))
        .map(|i| {
            let shared = inst
                .predicate(i)
                .args
                .iter()
                .filter(|a| goal_objects.contains(&a.as_str()))
                .count();
            (i, shared)
        })
        .collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    candidates.truncate(cfg.max_assumptions);
    let candidates: Vec<usize> = candidates.into_iter().map(|(i, _)| i).collect();

    let slots = unique_slots(inst);
    let baseline: Vec<(usize, String)> = base_closure
        .contradictions
        .iter()
        .map(|c| (c.predicate, c.rule_id.clone()))
        .collect();

    let mut found: BTreeMap<RankKey, Hypothesis> = BTreeMap::new();
    for mask in 0u64..(1u64 << candidates.len()) {
        let mut assumed = State::default();
        for (j, &i) in candidates.iter().enumerate() {
            assumed.set(i, mask >> j & 1 == 1);
        }
        let mut start = known;
        for i in assumed.known.ones() {
            start.set(i, assumed.value.get(i));
        }
        if !slots_consistent(&slots, &start) {
            continue;
        }
        let cl = inst.closure(&start);
        if !cl.conflicts.is_empty()
            || cl
                .contradictions
                .iter()
                .any(|c| !baseline.contains(&(c.predicate, c.rule_id.clone())))
        {
            continue;
        }
        let Some(plan) = search(inst, &start, &goal_lits, &actions, cfg) else {
            continue;
        };
        if plan.is_empty() {
            continue;
        }
        let expected = annotate(inst, &plan, &start, &cl.state, &assumed, &goal_lits, &slots);
        let assumptions = expected
            .keys()
            .filter(|&&i| known_closed.get(i).is_none())
            .count();
        let plan: Vec<GroundAction> = plan
            .iter()
            .map(|&a| inst.actions()[a].action.clone())
            .collect();
        let expected: BTreeMap<PredicateId, bool> = expected
            .into_iter()
            .map(|(i, v)| (inst.predicate(i).clone(), v))
            .collect();
        let key = (
            plan.len(),
            assumptions,
            plan.iter().map(|a| a.to_string()).collect(),
            expected.iter().map(|(p, v)| (p.clone(), *v)).collect(),
        );
        found
            .entry(key)
            .or_insert_with(|| Hypothesis::new(String::new(), plan, expected, assumptions));
    }

    Ok(found
        .into_values()
        .take(limit)
        .enumerate()
        .map(|(idx, mut h)| {
            h.id = format!("h{idx:03}");
            h
        })
        .collect())
}

/// Drops candidates expecting the opposite value for `p`.
pub fn filter_hypotheses(hs: &[Hypothesis], p: &PredicateId, v: bool) -> Vec<Hypothesis> {
    hs.iter()
        .filter(|h| h.expected(p).is_none_or(|e| e == v))
        .cloned()
        .collect()
}

/// Keeps candidates whose expectations agree with every value known in `state`
/// (grounded or entailed).
pub fn filter_consistent(inst: &Instance, hs: &[Hypothesis], state: &State) -> Vec<Hypothesis> {
    hs.iter()
        .filter(|h| {
            h.expected.iter().all(|(p, &v)| match inst.index_of(p) {
                Some(i) => state.get(i).is_none_or(|s| s == v),
                None => true,
            })
        })
        .cloned()
        .collect()
}

/// Highest score; ties go to the lexicographically smallest id.
pub fn best(hs: &[Hypothesis]) -> Option<&Hypothesis> {
    hs.iter().min_by(|a, b| {
        b.score()
            .total_cmp(&a.score())
            .then_with(|| a.id.cmp(&b.id))
    })
}

/// Groups of predicate indices that may hold at most one true member.
fn unique_slots(inst: &Instance) -> Vec<Vec<usize>> {
    let mut groups: HashMap<(String, String), Vec<usize>> = HashMap::new();
    for (i, p) in inst.predicates().iter().enumerate() {
        let unique = inst.schema().predicate(&p.name).is_some_and(|d| d.unique);
        if unique && !p.args.is_empty() {
            groups
                .entry((p.name.clone(), p.args[0].clone()))
                .or_default()
                .push(i);
        }
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort();
    out
}

fn slots_consistent(slots: &[Vec<usize>], s: &State) -> bool {
    slots
        .iter()
        .all(|g| g.iter().filter(|&&i| s.holds(i, true)).count() <= 1)
}

fn applicable(inst: &Instance, s: &State, a: usize, closed: &mut Option<State>) -> bool {
    let ca = &inst.actions()[a];
    if s.satisfies(&ca.pre_pos, &ca.pre_neg) {
        return true;
    }
    if ca.pre.iter().any(|&(i, v)| s.get(i) == Some(!v)) {
        return false;
    }
    let c = closed.get_or_insert_with(|| inst.closure(s).state);
    c.satisfies(&ca.pre_pos, &ca.pre_neg)
}

/// Breadth-first search over symbolic states. Returns action indices.
fn search(
    inst: &Instance,
    start: &State,
    goal: &[(usize, bool)],
    actions: &[usize],
    cfg: &GeneratorConfig,
) -> Option<Vec<usize>> {
    if inst.state_goal_satisfied(start, goal) {
        return Some(Vec::new());
    }
    // node: (state, parent node, action, depth)
    let mut nodes: Vec<(State, usize, usize, usize)> = vec![(*start, usize::MAX, usize::MAX, 0)];
    let mut seen: HashMap<State, ()> = HashMap::new();
    seen.insert(*start, ());
    let mut queue = VecDeque::from([0usize]);
    let mut expanded = 0;
    while let Some(n) = queue.pop_front() {
        let (s, _, _, depth) = nodes[n];
        if depth >= cfg.max_depth {
            continue;
        }
        expanded += 1;
        if expanded > cfg.max_expansions {
            return None;
        }
        let mut closed = None;
        for &a in actions {
            if !applicable(inst, &s, a, &mut closed) {
                continue;
            }
            let ca = &inst.actions()[a];
            let mut next = s;
            next.apply(&ca.add, &ca.del);
            if seen.insert(next, ()).is_some() {
                continue;
            }
            nodes.push((next, n, a, depth + 1));
            let id = nodes.len() - 1;
            if inst.state_goal_satisfied(&next, goal) {
                let mut plan = Vec::new();
                let mut cur = id;
                while cur != 0 {
                    plan.push(nodes[cur].2);
                    cur = nodes[cur].1;
                }
                plan.reverse();
                return Some(plan);
            }
            queue.push_back(id);
        }
    }
    None
}

/// Preconditions and goal literals the plan takes from the initial state
/// rather than from its own effects, plus the assumed slot-mates of any
/// assumed location fact.
fn annotate(
    inst: &Instance,
    plan: &[usize],
    start: &State,
    start_closed: &State,
    assumed: &State,
    goal: &[(usize, bool)],
    slots: &[Vec<usize>],
) -> BTreeMap<usize, bool> {
    let mut out = BTreeMap::new();
    let mut produced = Bits::default();
    let take = |produced: &Bits, i: usize, v: bool, out: &mut BTreeMap<usize, bool>| {
        if !produced.get(i) && (start.holds(i, v) || start_closed.holds(i, v)) {
            out.insert(i, v);
        }
    };
    for &a in plan {
        let ca = &inst.actions()[a];
        for &(i, v) in &ca.pre {
            take(&produced, i, v, &mut out);
        }
        produced = produced.union(&ca.add).union(&ca.del);
    }
    for &(i, v) in goal {
        take(&produced, i, v, &mut out);
    }
    let assumed_true: Vec<usize> = out
        .iter()
        .filter(|&(&i, &v)| v && assumed.known.get(i))
        .map(|(&i, _)| i)
        .collect();
    for i in assumed_true {
        if let Some(group) = slots.iter().find(|g| g.contains(&i)) {
            for &j in group {
                if j != i {
                    if let Some(v) = assumed.get(j) {
                        out.insert(j, v);
                    }
                }
            }
        }
    }
    out
}
