//! Plan certification against the grounded store only.
//!
//! Beliefs never reach this module: every function takes a [`GroundedStore`]
//! and the instance's entailment rules, nothing else.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{Bits, DomainError, GoalConstraints, Instance, RuleSet, State};
use crate::environment::HiddenWorld;
use crate::hypotheses::Hypothesis;
use crate::store::{GroundedStore, PredicateId, Provenance};

/// How a required literal was (or was not) established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Evidence {
    Grounded,
    Entailed,
    /// Produced by an earlier step of the plan.
    Effect,
    Missing,
    Contradicted,
}

impl Evidence {
    pub fn passes(self) -> bool {
        matches!(self, Evidence::Grounded | Evidence::Entailed | Evidence::Effect)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Precondition,
    Step,
    Goal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub check: Check,
    /// Plan step index for step checks.
    pub step: Option<usize>,
    pub predicate: PredicateId,
    pub required: bool,
    pub evidence: Evidence,
}

impl fmt::Display for AuditEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let check = match self.check {
            Check::Precondition => "pre".to_string(),
            Check::Step => format!("step {}", self.step.unwrap_or(0)),
            Check::Goal => "goal".to_string(),
        };
        write!(
            f,
            "{check}: {}={} {:?}",
            self.predicate,
            u8::from(self.required),
            self.evidence
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub audit: Vec<AuditEntry>,
}

impl Verdict {
    /// Predicates whose value is simply unknown; querying them may let the
    /// plan pass.
    pub fn uncovered(&self) -> Vec<PredicateId> {
        let mut out: Vec<PredicateId> = self
            .audit
            .iter()
            .filter(|e| e.evidence == Evidence::Missing)
            .map(|e| e.predicate.clone())
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn contradicted(&self) -> bool {
        self.audit.iter().any(|e| e.evidence == Evidence::Contradicted)
    }
}

/// Lazily computed entailment closure of a fixed state.
struct Lazy<'a> {
    inst: &'a Instance,
    base: State,
    closed: Option<State>,
}

impl<'a> Lazy<'a> {
    fn new(inst: &'a Instance, base: State) -> Self {
        Lazy {
            inst,
            base,
            closed: None,
        }
    }

    /// `(direct value, value after closure)`.
    fn value(&mut self, i: usize) -> (Option<bool>, Option<bool>) {
        if let Some(v) = self.base.get(i) {
            return (Some(v), Some(v));
        }
        let inst = self.inst;
        let base = self.base;
        let c = self.closed.get_or_insert_with(|| inst.closure(&base).state);
        (None, c.get(i))
    }
}

fn classify(direct: Option<bool>, closed: Option<bool>, required: bool, produced: bool) -> Evidence {
    match (direct, closed) {
        (Some(v), _) if v == required => {
            if produced {
                Evidence::Effect
            } else {
                Evidence::Grounded
            }
        }
        (Some(_), _) => Evidence::Contradicted,
        (None, Some(v)) if v == required => Evidence::Entailed,
        (None, Some(_)) => Evidence::Contradicted,
        (None, None) => Evidence::Missing,
    }
}

/// Every expected precondition value is grounded or
/// entailed by `w`.
pub fn check_pre(h: &Hypothesis, grounded: &GroundedStore, inst: &Instance) -> Result<Verdict, DomainError> {
    let mut lazy = Lazy::new(inst, inst.state_of(grounded)?);
    let mut audit = Vec::with_capacity(h.expected.len());
    for (p, &v) in &h.expected {
        let i = inst.require_index(p)?;
        let (direct, closed) = lazy.value(i);
        audit.push(AuditEntry {
            check: Check::Precondition,
            step: None,
            predicate: p.clone(),
            required: v,
            evidence: classify(direct, closed, v, false),
        });
    }
    Ok(Verdict {
        passed: audit.iter().all(|e| e.evidence.passes()),
        audit,
    })
}

/// Symbolically executes the plan from `w`.
/// Each step's preconditions must hold in the state reached so far, directly
/// or by entailment, and the goal must hold at the end. Stops at the first
/// failing step.
pub fn pullback_verify(
    h: &Hypothesis,
    grounded: &GroundedStore,
    goal: &GoalConstraints,
    inst: &Instance,
) -> Result<Verdict, DomainError> {
    let mut cur = inst.state_of(grounded)?;
    let mut produced = Bits::default();
    let mut audit = Vec::new();
    for (step, a) in h.plan.iter().enumerate() {
        let ca = inst.require_action(a)?;
        let mut lazy = Lazy::new(inst, cur);
        let mut ok = true;
        for &(i, v) in &ca.pre {
            let (direct, closed) = lazy.value(i);
            let evidence = classify(direct, closed, v, produced.get(i));
            ok &= evidence.passes();
            audit.push(AuditEntry {
                check: Check::Step,
                step: Some(step),
                predicate: inst.predicate(i).clone(),
                required: v,
                evidence,
            });
        }
        if !ok {
            return Ok(Verdict { passed: false, audit });
        }
        cur.apply(&ca.add, &ca.del);
        produced = produced.union(&ca.add).union(&ca.del);
    }
    let mut lazy = Lazy::new(inst, cur);
    let mut ok = true;
    for (p, &v) in &goal.required {
        let i = inst.require_index(p)?;
        let (direct, closed) = lazy.value(i);
        let evidence = classify(direct, closed, v, produced.get(i));
        ok &= evidence.passes();
        audit.push(AuditEntry {
            check: Check::Goal,
            step: None,
            predicate: p.clone(),
            required: v,
            evidence,
        });
    }
    Ok(Verdict { passed: ok, audit })
}

/// Precondition check, then plan simulation, short-circuiting
/// on the first failure.
pub fn verify(
    h: &Hypothesis,
    grounded: &GroundedStore,
    goal: &GoalConstraints,
    inst: &Instance,
) -> Result<Verdict, DomainError> {
    let pre = check_pre(h, grounded, inst)?;
    if !pre.passed {
        return Ok(pre);
    }
    let mut pull = pullback_verify(h, grounded, goal, inst)?;
    let mut audit = pre.audit;
    audit.append(&mut pull.audit);
    Ok(Verdict {
        passed: pull.passed,
        audit,
    })
}

/// Ground-truth feasibility of the plan in the hidden world.
pub fn brute_force_feasible(h: &Hypothesis, hidden: &HiddenWorld, goal: &GoalConstraints) -> bool {
    hidden.plan_feasible(&h.plan, goal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterexampleKind {
    /// Two pieces of evidence disagree about a grounded predicate.
    GroundingConflict,
    /// A rule derived a value that a grounded fact contradicts.
    EntailmentContradiction,
    /// Execution feedback contradicts what the plan relied on.
    ExecutionContradiction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub kind: CounterexampleKind,
    pub predicate: PredicateId,
    pub expected: bool,
    pub observed: bool,
    pub rule_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairPolicy {
    /// Contradictions attributed to one rule before it is disabled.
    pub disable_threshold: usize,
}

impl Default for RepairPolicy {
    fn default() -> Self {
        RepairPolicy { disable_threshold: 2 }
    }
}

/// Evidence override for conflicting observations, and
/// disabling of rules with at least `disable_threshold` attributed
/// contradictions.
pub fn repair(
    counterexamples: &[Counterexample],
    rules: &RuleSet,
    grounded: &GroundedStore,
    policy: RepairPolicy,
) -> (RuleSet, GroundedStore) {
    let mut w = grounded.clone();
    let mut per_rule: BTreeMap<&str, usize> = BTreeMap::new();
    for c in counterexamples {
        match c.kind {
            CounterexampleKind::GroundingConflict => {
                w.overwrite(&c.predicate, c.observed, Provenance::QueryResult)
            }
            CounterexampleKind::ExecutionContradiction => {
                w.overwrite(&c.predicate, c.observed, Provenance::ExecutionFeedback)
            }
            CounterexampleKind::EntailmentContradiction => {
                if let Some(r) = &c.rule_id {
                    *per_rule.entry(r.as_str()).or_default() += 1;
                }
            }
        }
    }
    let mut out = rules.clone();
    for (rule, n) in per_rule {
        if n >= policy.disable_threshold {
            out.set_enabled(rule, false);
        }
    }
    (out, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DomainSchema, GroundAction};
    use crate::store::GroundedFact;
    use std::sync::Arc;

    fn p(s: &str) -> PredicateId {
        s.parse().unwrap()
    }

    fn micro() -> Instance {
        let schema = Arc::new(DomainSchema::micro());
        let rules = schema.rule_set();
        Instance::new(
            schema,
            &[("o1", "object"), ("o2", "object"), ("c1", "container"), ("c2", "container")],
            rules,
        )
        .unwrap()
    }

    fn store(facts: &[(&str, bool)]) -> GroundedStore {
        GroundedStore::from_facts(
            facts
                .iter()
                .map(|(s, v)| GroundedFact::new(p(s), *v, Provenance::InitialObservation)),
        )
    }

    fn take_from_c1() -> Hypothesis {
        let plan: Vec<GroundAction> = vec!["open(c1)".parse().unwrap(), "take(o1,c1)".parse().unwrap()];
        let expected = BTreeMap::from([
            (p("open(c1)"), false),
            (p("in(o1,c1)"), true),
            (p("handempty()"), true),
        ]);
        Hypothesis::new("h", plan, expected, 1)
    }

    fn goal() -> GoalConstraints {
        GoalConstraints::new([(p("holding(o1)"), true)])
    }

    #[test]
    fn passes_when_everything_is_grounded() {
        let inst = micro();
        let w = store(&[("open(c1)", false), ("in(o1,c1)", true), ("handempty()", true)]);
        let v = verify(&take_from_c1(), &w, &goal(), &inst).unwrap();
        assert!(v.passed, "{:?}", v.audit);
        assert!(v.audit.iter().any(|e| e.evidence == Evidence::Effect));
    }

    #[test]
    fn missing_precondition_is_uncovered() {
        let inst = micro();
        let w = store(&[("open(c1)", false), ("handempty()", true)]);
        let v = verify(&take_from_c1(), &w, &goal(), &inst).unwrap();
        assert!(!v.passed);
        assert!(!v.contradicted());
        assert_eq!(v.uncovered(), vec![p("in(o1,c1)")]);
    }

    #[test]
    fn entailed_negative_precondition_counts() {
        let inst = micro();
        let plan = vec!["open(c2)".parse().unwrap()];
        let h = Hypothesis::new("h", plan, BTreeMap::from([(p("in(o1,c2)"), false)]), 0);
        let w = store(&[("in(o1,c1)", true), ("open(c2)", false)]);
        let g = GoalConstraints::new([(p("open(c2)"), true)]);
        let v = verify(&h, &w, &g, &inst).unwrap();
        assert!(v.passed);
        assert_eq!(v.audit[0].evidence, Evidence::Entailed);
    }

    #[test]
    fn contradiction_fails_check_pre() {
        let inst = micro();
        let w = store(&[("open(c1)", false), ("in(o1,c1)", false), ("handempty()", true)]);
        let v = check_pre(&take_from_c1(), &w, &inst).unwrap();
        assert!(!v.passed);
        assert!(v.contradicted());
    }

    #[test]
    fn pullback_stops_at_first_failing_step() {
        let inst = micro();
        let w = store(&[("open(c1)", true), ("in(o1,c1)", true), ("handempty()", true)]);
        let v = pullback_verify(&take_from_c1(), &w, &goal(), &inst).unwrap();
        assert!(!v.passed);
        assert!(v.audit.iter().all(|e| e.step == Some(0)));
    }

    #[test]
    fn repair_overrides_and_disables_at_threshold() {
        let schema = DomainSchema::micro();
        let rules = schema.rule_set();
        let w = store(&[("in(o1,c1)", true)]);
        let cex = |kind, pred: &str, rule: Option<&str>| Counterexample {
            kind,
            predicate: p(pred),
            expected: true,
            observed: false,
            rule_id: rule.map(String::from),
        };
        let id = rules.rules()[0].id.clone();
        let cs = vec![
            cex(CounterexampleKind::ExecutionContradiction, "in(o1,c1)", None),
            cex(CounterexampleKind::EntailmentContradiction, "in(o2,c1)", Some(&id)),
        ];
        let (r1, w1) = repair(&cs, &rules, &w, RepairPolicy::default());
        assert_eq!(w1.get(&p("in(o1,c1)")), Some(false));
        assert!(r1.disabled_ids().is_empty());
        let mut more = cs.clone();
        more.push(cex(CounterexampleKind::EntailmentContradiction, "in(o2,c2)", Some(&id)));
        let (r2, _) = repair(&more, &rules, &w, RepairPolicy::default());
        assert_eq!(r2.disabled_ids(), vec![id]);
    }
}
