use std::collections::HashMap;
use std::sync::Arc;

use super::{
    Atom, DomainError, DomainSchema, GoalConstraints, GroundAction, Guard, Literal, RuleSet, Term,
};
use crate::store::{GroundedStore, PredicateId, Provenance};

const WORDS: usize = 4;
pub const MAX_PREDICATES: usize = WORDS * 64;

/// Fixed-width bitset over predicate indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bits([u64; WORDS]);

impl Bits {
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    #[inline]
    pub fn clear(&mut self, i: usize) {
        self.0[i / 64] &= !(1 << (i % 64));
    }

    #[inline]
    pub fn is_subset_of(&self, other: &Bits) -> bool {
        (0..WORDS).all(|w| self.0[w] & !other.0[w] == 0)
    }

    #[inline]
    pub fn union(&self, other: &Bits) -> Bits {
        let mut out = *self;
        for w in 0..WORDS {
            out.0[w] |= other.0[w];
        }
        out
    }

    #[inline]
    pub fn minus(&self, other: &Bits) -> Bits {
        let mut out = *self;
        for w in 0..WORDS {
            out.0[w] &= !other.0[w];
        }
        out
    }

    pub fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..MAX_PREDICATES).filter(move |&i| self.get(i))
    }
}

/// Partial assignment over an instance's predicates: `known` marks the
/// domain, `value` carries truth values for known bits (unknown bits are zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct State {
    pub known: Bits,
    pub value: Bits,
}

impl State {
    #[inline]
    pub fn get(&self, i: usize) -> Option<bool> {
        if self.known.get(i) {
            Some(self.value.get(i))
        } else {
            None
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        self.known.set(i);
        if v {
            self.value.set(i);
        } else {
            self.value.clear(i);
        }
    }

    #[inline]
    pub fn forget(&mut self, i: usize) {
        self.known.clear(i);
        self.value.clear(i);
    }

    #[inline]
    pub fn holds(&self, i: usize, v: bool) -> bool {
        self.get(i) == Some(v)
    }

    /// All of `pos` known true and all of `neg` known false.
    #[inline]
    pub fn satisfies(&self, pos: &Bits, neg: &Bits) -> bool {
        pos.is_subset_of(&self.value) && neg.is_subset_of(&self.known.minus(&self.value))
    }

    /// STRIPS update: add effects become true, delete effects false.
    #[inline]
    pub fn apply(&mut self, add: &Bits, del: &Bits) {
        self.known = self.known.union(add).union(del);
        self.value = self.value.union(add).minus(del);
    }

    pub fn known_count(&self) -> usize {
        self.known.count()
    }
}

#[derive(Debug, Clone)]
pub struct CompiledAction {
    pub action: GroundAction,
    pub template: usize,
    pub pre: Vec<(usize, bool)>,
    pub pre_pos: Bits,
    pub pre_neg: Bits,
    pub add: Bits,
    pub del: Bits,
    pub add_list: Vec<usize>,
    pub del_list: Vec<usize>,
}

#[derive(Debug, Clone)]
struct GroundRule {
    rule: usize,
    premises: Vec<(usize, bool)>,
    pos: Bits,
    neg: Bits,
    conclusion: (usize, bool),
}

/// A rule concluded the opposite of a fact in the base state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleContradiction {
    pub predicate: usize,
    pub rule_id: String,
    pub derived: bool,
}

/// Two rules derived opposite values for one predicate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleConflict {
    pub predicate: usize,
    pub first_rule: String,
    pub second_rule: String,
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub state: State,
    pub contradictions: Vec<RuleContradiction>,
    pub conflicts: Vec<RuleConflict>,
}

/// A schema grounded over a concrete object set.
#[derive(Debug, Clone)]
pub struct Instance {
    schema: Arc<DomainSchema>,
    objects: Vec<(String, String)>,
    predicates: Vec<PredicateId>,
    index: HashMap<PredicateId, usize>,
    actions: Vec<CompiledAction>,
    action_index: HashMap<GroundAction, usize>,
    rules: RuleSet,
    ground_rules: Vec<GroundRule>,
}

type Binding = HashMap<String, String>;

impl Instance {
    pub fn new<S: AsRef<str>>(
        schema: Arc<DomainSchema>,
        objects: &[(S, S)],
        rules: RuleSet,
    ) -> Result<Instance, DomainError> {
        let objects: Vec<(String, String)> = objects
            .iter()
            .map(|(n, t)| (n.as_ref().to_string(), t.as_ref().to_string()))
            .collect();
        for (name, ty) in &objects {
            if !schema.has_type(ty) {
                return Err(DomainError::Undeclared {
                    kind: "type",
                    name: ty.clone(),
                });
            }
            if objects.iter().filter(|(n, _)| n == name).count() > 1 {
                return Err(DomainError::Duplicate(name.clone()));
            }
        }

        let mut predicates = Vec::new();
        for decl in &schema.predicates {
            let vars: Vec<(String, Vec<String>)> = decl
                .params
                .iter()
                .enumerate()
                .map(|(i, t)| (format!("a{i}"), vec![t.clone()]))
                .collect();
            for b in bindings(&schema, &objects, &vars) {
                let args = (0..decl.params.len())
                    .map(|i| b[&format!("a{i}")].clone())
                    .collect();
                predicates.push(PredicateId {
                    name: decl.name.clone(),
                    args,
                });
            }
        }
        if predicates.len() > MAX_PREDICATES {
            return Err(DomainError::TooLarge(predicates.len()));
        }
        let index: HashMap<PredicateId, usize> = predicates
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, p)| (p, i))
            .collect();

        let mut inst = Instance {
            schema: schema.clone(),
            objects,
            predicates,
            index,
            actions: Vec::new(),
            action_index: HashMap::new(),
            rules: RuleSet::empty(),
            ground_rules: Vec::new(),
        };

        for (t_idx, tmpl) in schema.actions.iter().enumerate() {
            let vars: Vec<(String, Vec<String>)> = tmpl
                .params
                .iter()
                .map(|p| (p.var.clone(), vec![p.ty.clone()]))
                .collect();
            for b in bindings(&schema, &inst.objects, &vars) {
                let args: Vec<String> = tmpl.params.iter().map(|p| b[&p.var].clone()).collect();
                let action = GroundAction {
                    template: tmpl.name.clone(),
                    args,
                };
                let mut ca = CompiledAction {
                    action: action.clone(),
                    template: t_idx,
                    pre: Vec::new(),
                    pre_pos: Bits::default(),
                    pre_neg: Bits::default(),
                    add: Bits::default(),
                    del: Bits::default(),
                    add_list: Vec::new(),
                    del_list: Vec::new(),
                };
                let mut ok = true;
                for lit in &tmpl.preconditions {
                    match inst.ground_atom(&lit.atom, &b) {
                        Some(i) => {
                            ca.pre.push((i, lit.value));
                            if lit.value {
                                ca.pre_pos.set(i)
                            } else {
                                ca.pre_neg.set(i)
                            }
                        }
                        None => ok = false,
                    }
                }
                for a in &tmpl.add_effects {
                    match inst.ground_atom(a, &b) {
                        Some(i) => {
                            ca.add.set(i);
                            ca.add_list.push(i);
                        }
                        None => ok = false,
                    }
                }
                for a in &tmpl.delete_effects {
                    match inst.ground_atom(a, &b) {
                        Some(i) => {
                            ca.del.set(i);
                            ca.del_list.push(i);
                        }
                        None => ok = false,
                    }
                }
                if !ok {
                    continue;
                }
                if ca.add_list.iter().any(|i| ca.del.get(*i)) {
                    return Err(DomainError::EffectOverlap(action.to_string()));
                }
                inst.action_index.insert(action, inst.actions.len());
                inst.actions.push(ca);
            }
        }

        inst.set_rules(rules)?;
        Ok(inst)
    }

    /// Same grounding, different entailment rules.
    pub fn with_rules(&self, rules: RuleSet) -> Result<Instance, DomainError> {
        let mut inst = self.clone();
        inst.set_rules(rules)?;
        Ok(inst)
    }

    fn set_rules(&mut self, rules: RuleSet) -> Result<(), DomainError> {
        let mut ground = Vec::new();
        for (r_idx, rule) in rules.rules().iter().enumerate() {
            self.schema.check_rule(rule)?;
            if !rule.enabled {
                continue;
            }
            let vars = rule_vars(&self.schema, &rule.premises, &rule.conclusion, &rule.guards);
            'binding: for b in bindings(&self.schema, &self.objects, &vars) {
                for g in &rule.guards {
                    if let Guard::Distinct(x, y) = g {
                        if b[x] == b[y] {
                            continue 'binding;
                        }
                    }
                }
                let mut gr = GroundRule {
                    rule: r_idx,
                    premises: Vec::new(),
                    pos: Bits::default(),
                    neg: Bits::default(),
                    conclusion: (0, rule.conclusion.value),
                };
                for lit in &rule.premises {
                    let Some(i) = self.ground_atom(&lit.atom, &b) else {
                        continue 'binding;
                    };
                    gr.premises.push((i, lit.value));
                    if lit.value {
                        gr.pos.set(i)
                    } else {
                        gr.neg.set(i)
                    }
                }
                let Some(c) = self.ground_atom(&rule.conclusion.atom, &b) else {
                    continue;
                };
                if gr.premises.iter().any(|&(i, _)| i == c) {
                    continue;
                }
                gr.conclusion.0 = c;
                ground.push(gr);
            }
        }
        self.rules = rules;
        self.ground_rules = ground;
        Ok(())
    }

    fn ground_atom(&self, atom: &Atom, b: &Binding) -> Option<usize> {
        let args = atom
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => b.get(v).cloned(),
                Term::Const(c) => Some(c.clone()),
            })
            .collect::<Option<Vec<_>>>()?;
        self.index
            .get(&PredicateId {
                name: atom.predicate.clone(),
                args,
            })
            .copied()
    }

    pub fn schema(&self) -> &Arc<DomainSchema> {
        &self.schema
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    pub fn objects(&self) -> &[(String, String)] {
        &self.objects
    }

    pub fn object_type(&self, name: &str) -> Option<&str> {
        self.objects
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.as_str())
    }

    pub fn objects_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |(_, t)| self.schema.is_subtype(t, ty))
            .map(|(n, _)| n.as_str())
    }

    pub fn num_predicates(&self) -> usize {
        self.predicates.len()
    }

    pub fn predicates(&self) -> &[PredicateId] {
        &self.predicates
    }

    pub fn predicate(&self, i: usize) -> &PredicateId {
        &self.predicates[i]
    }

    pub fn index_of(&self, p: &PredicateId) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn require_index(&self, p: &PredicateId) -> Result<usize, DomainError> {
        self.index_of(p)
            .ok_or_else(|| DomainError::UnknownPredicate(p.clone()))
    }

    pub fn actions(&self) -> &[CompiledAction] {
        &self.actions
    }

    pub fn action(&self, a: &GroundAction) -> Option<&CompiledAction> {
        self.action_index.get(a).map(|&i| &self.actions[i])
    }

    pub fn require_action(&self, a: &GroundAction) -> Result<&CompiledAction, DomainError> {
        self.action(a)
            .ok_or_else(|| DomainError::UnknownAction(a.to_string()))
    }

    /// Instantiated preconditions of a ground action.
    pub fn preconditions_of(&self, a: &GroundAction) -> Result<Vec<(PredicateId, bool)>, DomainError> {
        let ca = self.require_action(a)?;
        Ok(ca
            .pre
            .iter()
            .map(|&(i, v)| (self.predicates[i].clone(), v))
            .collect())
    }

    pub fn state_of(&self, store: &GroundedStore) -> Result<State, DomainError> {
        let mut s = State::default();
        for f in store.facts() {
            s.set(self.require_index(&f.predicate)?, f.value);
        }
        Ok(s)
    }

    pub fn store_of(&self, state: &State, provenance: Provenance) -> GroundedStore {
        GroundedStore::from_facts(state.known.ones().map(|i| {
            crate::store::GroundedFact::new(self.predicates[i].clone(), state.value.get(i), provenance)
        }))
    }

    pub fn compile_goal(&self, goal: &GoalConstraints) -> Result<Vec<(usize, bool)>, DomainError> {
        goal.required
            .iter()
            .map(|(p, v)| Ok((self.require_index(p)?, *v)))
            .collect()
    }

    /// Forward-chains enabled rules to fixpoint. Facts in `base` are never
    /// overridden; a rule concluding against one is reported as a
    /// contradiction, and two rules concluding opposite values as a conflict.
    /// Rules fire in id order, so the result is deterministic.
    pub fn closure(&self, base: &State) -> Closure {
        let mut cur = *base;
        let mut contradictions: Vec<RuleContradiction> = Vec::new();
        let mut conflicts: Vec<RuleConflict> = Vec::new();
        let mut derived_by: Vec<(usize, usize)> = Vec::new();
        loop {
            let mut changed = false;
            for gr in &self.ground_rules {
                if !cur.satisfies(&gr.pos, &gr.neg) {
                    continue;
                }
                let (c, v) = gr.conclusion;
                if let Some(bv) = base.get(c) {
                    if bv != v {
                        let rule_id = &self.rules.rules()[gr.rule].id;
                        if !contradictions
                            .iter()
                            .any(|x| x.predicate == c && &x.rule_id == rule_id)
                        {
                            contradictions.push(RuleContradiction {
                                predicate: c,
                                rule_id: rule_id.clone(),
                                derived: v,
                            });
                        }
                    }
                    continue;
                }
                match cur.get(c) {
                    Some(cv) if cv != v => {
                        let first = derived_by
                            .iter()
                            .find(|(p, _)| *p == c)
                            .map(|&(_, r)| r)
                            .unwrap_or(gr.rule);
                        let first_rule = self.rules.rules()[first].id.clone();
                        let second_rule = self.rules.rules()[gr.rule].id.clone();
                        if !conflicts.iter().any(|x| x.predicate == c) {
                            conflicts.push(RuleConflict {
                                predicate: c,
                                first_rule,
                                second_rule,
                            });
                        }
                    }
                    Some(_) => {}
                    None => {
                        cur.set(c, v);
                        derived_by.push((c, gr.rule));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Closure {
            state: cur,
            contradictions,
            conflicts,
        }
    }

    /// Uses the enabled rules as state constraints on a complete state: each
    /// rule whose premises hold forces its conclusion, overwriting the old
    /// value. Returns the indices whose value changed.
    pub fn ramify(&self, state: &mut State) -> Vec<usize> {
        let before = *state;
        for _ in 0..=self.ground_rules.len() {
            let mut changed = false;
            for gr in &self.ground_rules {
                let (c, v) = gr.conclusion;
                if state.satisfies(&gr.pos, &gr.neg) && !state.holds(c, v) {
                    state.set(c, v);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..self.predicates.len())
            .filter(|&i| before.get(i) != state.get(i))
            .collect()
    }

    /// The value of `p` after forward chaining, or `None` (abstain).
    pub fn entails(&self, store: &GroundedStore, p: &PredicateId) -> Result<Option<bool>, DomainError> {
        let i = self.require_index(p)?;
        let base = self.state_of(store)?;
        if let Some(v) = base.get(i) {
            return Ok(Some(v));
        }
        let cl = self.closure(&base);
        if let Some(c) = cl.conflicts.iter().find(|c| c.predicate == i) {
            return Err(DomainError::RuleConflict {
                predicate: p.clone(),
                first: c.first_rule.clone(),
                second: c.second_rule.clone(),
            });
        }
        Ok(cl.state.get(i))
    }

    /// Effects of each action in sequence. Preconditions are
    /// not checked here.
    pub fn apply_plan(&self, plan: &[GroundAction], store: &GroundedStore) -> Result<GroundedStore, DomainError> {
        let mut out = store.clone();
        for a in plan {
            let ca = self.require_action(a)?;
            for &i in &ca.add_list {
                out.set_symbolic(self.predicates[i].clone(), true);
            }
            for &i in &ca.del_list {
                out.set_symbolic(self.predicates[i].clone(), false);
            }
        }
        Ok(out)
    }

    /// Every goal literal holds in the store, directly or by entailment.
    pub fn goal_satisfied(&self, store: &GroundedStore, goal: &GoalConstraints) -> bool {
        let (Ok(state), Ok(g)) = (self.state_of(store), self.compile_goal(goal)) else {
            return false;
        };
        self.state_goal_satisfied(&state, &g)
    }

    pub fn state_goal_satisfied(&self, state: &State, goal: &[(usize, bool)]) -> bool {
        if goal.iter().all(|&(i, v)| state.holds(i, v)) {
            return true;
        }
        if goal.iter().any(|&(i, v)| state.get(i) == Some(!v)) {
            return false;
        }
        let cl = self.closure(state);
        goal.iter().all(|&(i, v)| cl.state.holds(i, v))
    }
}

/// Variables of a rule with the types each must satisfy.
fn rule_vars(
    schema: &DomainSchema,
    premises: &[Literal],
    conclusion: &Literal,
    guards: &[Guard],
) -> Vec<(String, Vec<String>)> {
    let mut vars: Vec<(String, Vec<String>)> = Vec::new();
    for lit in premises.iter().chain(std::iter::once(conclusion)) {
        let Some(decl) = schema.predicate(&lit.atom.predicate) else {
            continue;
        };
        for (pos, t) in lit.atom.args.iter().enumerate() {
            if let Term::Var(v) = t {
                let ty = decl.params[pos].clone();
                match vars.iter_mut().find(|(n, _)| n == v) {
                    Some((_, tys)) => tys.push(ty),
                    None => vars.push((v.clone(), vec![ty])),
                }
            }
        }
    }
    for g in guards {
        if let Guard::HasType(v, ty) = g {
            if let Some((_, tys)) = vars.iter_mut().find(|(n, _)| n == v) {
                tys.push(ty.clone());
            }
        }
    }
    vars
}

/// All assignments of objects to variables respecting the type constraints,
/// in object order.
fn bindings(
    schema: &DomainSchema,
    objects: &[(String, String)],
    vars: &[(String, Vec<String>)],
) -> Vec<Binding> {
    let candidates: Vec<Vec<&str>> = vars
        .iter()
        .map(|(_, tys)| {
            objects
                .iter()
                .filter(|(_, ot)| tys.iter().all(|t| schema.is_subtype(ot, t)))
                .map(|(n, _)| n.as_str())
                .collect()
        })
        .collect();
    let mut out = vec![Binding::new()];
    for ((name, _), cands) in vars.iter().zip(&candidates) {
        let mut next = Vec::with_capacity(out.len() * cands.len());
        for b in &out {
            for c in cands {
                let mut nb = b.clone();
                nb.insert(name.clone(), c.to_string());
                next.push(nb);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::GroundedFact;

    fn p(s: &str) -> PredicateId {
        s.parse().unwrap()
    }

    fn fact(s: &str, v: bool) -> GroundedFact {
        GroundedFact::new(p(s), v, Provenance::InitialObservation)
    }

    fn household() -> Instance {
        let schema = Arc::new(DomainSchema::household());
        let rules = schema.rule_set();
        Instance::new(
            schema,
            &[
                ("apple", "object"),
                ("fridge", "fridge"),
                ("cabinet", "container"),
                ("table", "surface"),
            ],
            rules,
        )
        .unwrap()
    }

    #[test]
    fn grounds_typed_predicates_and_actions() {
        let inst = household();
        // in: 1 object x 3 receptacles; open: 3; holding, clean, cold: 1 each; handempty
        assert_eq!(inst.num_predicates(), 3 + 3 + 1 + 1 + 1 + 1);
        assert!(inst.action(&GroundAction::new("open", &["fridge"])).is_some());
        assert!(inst.action(&GroundAction::new("open", &["table"])).is_none());
        assert!(inst.action(&GroundAction::new("chill", &["apple", "fridge"])).is_some());
        assert!(inst.action(&GroundAction::new("chill", &["apple", "cabinet"])).is_none());
    }

    #[test]
    fn single_rule_modus_ponens() {
        let inst = household();
        let w = GroundedStore::from_facts([fact("in(apple,fridge)", true)]);
        assert_eq!(inst.entails(&w, &p("cold(apple)")).unwrap(), Some(true));
        assert_eq!(inst.entails(&w, &p("in(apple,table)")).unwrap(), Some(false));
        assert_eq!(inst.entails(&w, &p("holding(apple)")).unwrap(), Some(false));
    }

    #[test]
    fn abstains_without_applicable_rule() {
        let inst = household();
        let w = GroundedStore::from_facts([fact("open(cabinet)", true)]);
        assert_eq!(inst.entails(&w, &p("clean(apple)")).unwrap(), None);
        assert!(inst.entails(&w, &p("nothing(here)")).is_err());
    }

    #[test]
    fn grounded_value_wins_over_rule() {
        let inst = household();
        let w = GroundedStore::from_facts([fact("in(apple,fridge)", true), fact("cold(apple)", false)]);
        assert_eq!(inst.entails(&w, &p("cold(apple)")).unwrap(), Some(false));
        let cl = inst.closure(&inst.state_of(&w).unwrap());
        assert_eq!(cl.contradictions.len(), 1);
        assert_eq!(cl.contradictions[0].rule_id, "r04-fridge-cold");
    }

    #[test]
    fn apply_plan_sets_effects_and_carries_the_rest() {
        let inst = household();
        let w = GroundedStore::from_facts([fact("open(cabinet)", false), fact("clean(apple)", true)]);
        let out = inst
            .apply_plan(&[GroundAction::new("open", &["cabinet"])], &w)
            .unwrap();
        assert_eq!(out.get(&p("open(cabinet)")), Some(true));
        assert_eq!(out.entry(&p("open(cabinet)")).unwrap().provenance, Provenance::Symbolic);
        assert_eq!(out.entry(&p("clean(apple)")).unwrap().provenance, Provenance::InitialObservation);
        assert_eq!(inst.apply_plan(&[], &w).unwrap(), w);
    }

    #[test]
    fn goal_satisfaction_uses_entailment() {
        let inst = household();
        let empty = GoalConstraints::default();
        assert!(inst.goal_satisfied(&GroundedStore::new(), &empty));
        let goal: GoalConstraints = "cold(apple)=1".parse().unwrap();
        let direct = GroundedStore::from_facts([fact("cold(apple)", true)]);
        assert!(inst.goal_satisfied(&direct, &goal));
        let via_rule = GroundedStore::from_facts([fact("in(apple,fridge)", true)]);
        assert!(inst.goal_satisfied(&via_rule, &goal));
        assert!(!inst.goal_satisfied(&GroundedStore::new(), &goal));
    }

    #[test]
    fn disabled_rules_do_not_fire() {
        let inst = household();
        let mut rules = inst.rules().clone();
        rules.set_enabled("r04-fridge-cold", false);
        let tight = inst.with_rules(rules).unwrap();
        let w = GroundedStore::from_facts([fact("in(apple,fridge)", true)]);
        assert_eq!(tight.entails(&w, &p("cold(apple)")).unwrap(), None);
    }

    #[test]
    fn state_bit_operations() {
        let mut s = State::default();
        s.set(3, true);
        s.set(200, false);
        assert_eq!(s.get(3), Some(true));
        assert_eq!(s.get(200), Some(false));
        assert_eq!(s.get(4), None);
        let mut pos = Bits::default();
        pos.set(3);
        let mut neg = Bits::default();
        neg.set(200);
        assert!(s.satisfies(&pos, &neg));
        s.forget(3);
        assert!(!s.satisfies(&pos, &neg));
        assert_eq!(s.known_count(), 1);
    }
}
