//! Grounded fact store, belief store and the epistemic state triple.
//!
//! The two stores are kept strictly disjoint: grounding a predicate evicts
//! any belief about it, and inserting a belief about a grounded predicate is
//! rejected. Predicates absent from the grounded store are unknown, never
//! false.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypotheses::Hypothesis;

/// A ground predicate symbol: name plus ordered object arguments.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PredicateId {
    pub name: String,
    pub args: Vec<String>,
}

impl PredicateId {
    pub fn new(name: impl Into<String>, args: &[&str]) -> Self {
        PredicateId {
            name: name.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }

    pub fn mentions(&self, object: &str) -> bool {
        self.args.iter().any(|a| a == object)
    }
}

impl fmt::Display for PredicateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.name, self.args.join(","))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed predicate `{0}`")]
pub struct ParsePredicateError(pub String);

impl FromStr for PredicateId {
    type Err = ParsePredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ParsePredicateError(s.to_string());
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        if name.is_empty() || !name.chars().all(is_ident_char) {
            return Err(bad());
        }
        let inner = &s[open + 1..s.len() - 1];
        let args: Vec<String> = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner.split(',').map(|a| a.trim().to_string()).collect()
        };
        if args.iter().any(|a| a.is_empty() || !a.chars().all(is_ident_char)) {
            return Err(bad());
        }
        Ok(PredicateId {
            name: name.to_string(),
            args,
        })
    }
}

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Where a grounded value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    InitialObservation,
    QueryResult,
    ExecutionFeedback,
    QuerySideEffect,
    /// Produced by symbolic plan application; never present in a real grounded store.
    Symbolic,
}

impl Provenance {
    pub fn token(self) -> &'static str {
        match self {
            Provenance::InitialObservation => "initial",
            Provenance::QueryResult => "query",
            Provenance::ExecutionFeedback => "feedback",
            Provenance::QuerySideEffect => "side-effect",
            Provenance::Symbolic => "symbolic",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        Some(match tok {
            "initial" => Provenance::InitialObservation,
            "query" => Provenance::QueryResult,
            "feedback" => Provenance::ExecutionFeedback,
            "side-effect" => Provenance::QuerySideEffect,
            "symbolic" => Provenance::Symbolic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroundedFact {
    pub predicate: PredicateId,
    pub value: bool,
    pub provenance: Provenance,
}

impl GroundedFact {
    pub fn new(predicate: PredicateId, value: bool, provenance: Provenance) -> Self {
        GroundedFact {
            predicate,
            value,
            provenance,
        }
    }
}

impl fmt::Display for GroundedFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}={} @{}",
            self.predicate,
            u8::from(self.value),
            self.provenance.token()
        )
    }
}

impl FromStr for GroundedFact {
    type Err = ParsePredicateError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let bad = || ParsePredicateError(line.to_string());
        let (lhs, prov) = line.rsplit_once('@').ok_or_else(bad)?;
        let provenance = Provenance::from_token(prov.trim()).ok_or_else(bad)?;
        let (pred, val) = lhs.trim().rsplit_once('=').ok_or_else(bad)?;
        let value = match val.trim() {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        Ok(GroundedFact {
            predicate: pred.parse()?,
            value,
            provenance,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("grounding conflict on {predicate}: query result says {existing}, new evidence says {incoming}")]
    GroundingConflict {
        predicate: PredicateId,
        existing: bool,
        incoming: bool,
    },
    #[error("belief insertion on grounded predicate {0} would break store disjointness")]
    Disjointness(PredicateId),
    #[error("uncertainty {0} outside [0,1]")]
    Uncertainty(f64),
    #[error("line {line}: {source}")]
    Snapshot {
        line: usize,
        source: ParsePredicateError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactEntry {
    pub value: bool,
    pub provenance: Provenance,
}

/// The grounded store `w`. One entry per predicate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedStore {
    facts: BTreeMap<PredicateId, FactEntry>,
}

impl GroundedStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Initial grounding: observation facts enter with their own provenance.
    pub fn from_facts<I: IntoIterator<Item = GroundedFact>>(facts: I) -> Self {
        let mut store = GroundedStore::new();
        for f in facts {
            store.facts.insert(
                f.predicate,
                FactEntry {
                    value: f.value,
                    provenance: f.provenance,
                },
            );
        }
        store
    }

    pub fn get(&self, p: &PredicateId) -> Option<bool> {
        self.facts.get(p).map(|e| e.value)
    }

    pub fn entry(&self, p: &PredicateId) -> Option<FactEntry> {
        self.facts.get(p).copied()
    }

    pub fn contains(&self, p: &PredicateId) -> bool {
        self.facts.contains_key(p)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    /// `dom(w)`.
    pub fn domain(&self) -> impl Iterator<Item = &PredicateId> {
        self.facts.keys()
    }

    pub fn facts(&self) -> impl Iterator<Item = GroundedFact> + '_ {
        self.facts
            .iter()
            .map(|(p, e)| GroundedFact::new(p.clone(), e.value, e.provenance))
    }

    /// Query update `w <- w ∪ {(p,v)} ∪ Δw`.
    ///
    /// The queried fact takes `QueryResult` provenance and side-effect facts
    /// take `QuerySideEffect`. A new value that contradicts an existing
    /// `QueryResult` fact is a conflict unless `evidence_override` is set;
    /// the update is all-or-nothing.
    pub fn ground_update(
        &mut self,
        p: &PredicateId,
        v: bool,
        delta: &[GroundedFact],
        evidence_override: bool,
    ) -> Result<(), StoreError> {
        let incoming = std::iter::once((p, v, Provenance::QueryResult)).chain(
            delta
                .iter()
                .filter(|f| &f.predicate != p)
                .map(|f| (&f.predicate, f.value, Provenance::QuerySideEffect)),
        );
        let incoming: Vec<_> = incoming.collect();
        if !evidence_override {
            for (q, val, _) in &incoming {
                self.check_conflict(q, *val)?;
            }
        }
        for (q, val, prov) in incoming {
            self.facts.insert(
                q.clone(),
                FactEntry {
                    value: val,
                    provenance: prov,
                },
            );
        }
        Ok(())
    }

    /// Records an execution-feedback observation, with the same conflict rule.
    pub fn record_feedback(
        &mut self,
        fact: &GroundedFact,
        evidence_override: bool,
    ) -> Result<(), StoreError> {
        if !evidence_override {
            self.check_conflict(&fact.predicate, fact.value)?;
        }
        self.facts.insert(
            fact.predicate.clone(),
            FactEntry {
                value: fact.value,
                provenance: fact.provenance,
            },
        );
        Ok(())
    }

    /// Evidence override: unconditionally sets `p` to `value`.
    pub fn overwrite(&mut self, p: &PredicateId, value: bool, provenance: Provenance) {
        self.facts
            .insert(p.clone(), FactEntry { value, provenance });
    }

    pub(crate) fn set_symbolic(&mut self, p: PredicateId, value: bool) {
        self.facts.insert(
            p,
            FactEntry {
                value,
                provenance: Provenance::Symbolic,
            },
        );
    }

    fn check_conflict(&self, p: &PredicateId, v: bool) -> Result<(), StoreError> {
        match self.facts.get(p) {
            Some(e) if e.provenance == Provenance::QueryResult && e.value != v => {
                Err(StoreError::GroundingConflict {
                    predicate: p.clone(),
                    existing: e.value,
                    incoming: v,
                })
            }
            _ => Ok(()),
        }
    }

    /// Line-oriented snapshot, one `pred(args)=0|1 @provenance` per line.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for f in self.facts() {
            out.push_str(&f.to_string());
            out.push('\n');
        }
        out
    }

    pub fn snapshot_lines(&self) -> Vec<String> {
        self.facts().map(|f| f.to_string()).collect()
    }

    pub fn parse_snapshot(text: &str) -> Result<Self, StoreError> {
        let mut facts = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fact = line
                .parse::<GroundedFact>()
                .map_err(|source| StoreError::Snapshot { line: i + 1, source })?;
            facts.push(fact);
        }
        Ok(GroundedStore::from_facts(facts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub value: bool,
    pub uncertainty: f64,
}

/// Discretized predictions with uncertainty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BeliefStore {
    beliefs: BTreeMap<PredicateId, Belief>,
}

impl BeliefStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, p: &PredicateId) -> Option<Belief> {
        self.beliefs.get(p).copied()
    }

    pub fn contains(&self, p: &PredicateId) -> bool {
        self.beliefs.contains_key(p)
    }

    pub fn domain(&self) -> impl Iterator<Item = &PredicateId> {
        self.beliefs.keys()
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }

    /// Adds a belief; a later prediction for the same predicate wins.
    pub fn insert(
        &mut self,
        grounded: &GroundedStore,
        p: &PredicateId,
        value: bool,
        sigma: f64,
    ) -> Result<(), StoreError> {
        if grounded.contains(p) {
            return Err(StoreError::Disjointness(p.clone()));
        }
        if !(0.0..=1.0).contains(&sigma) || sigma.is_nan() {
            return Err(StoreError::Uncertainty(sigma));
        }
        self.beliefs.insert(
            p.clone(),
            Belief {
                value,
                uncertainty: sigma,
            },
        );
        Ok(())
    }

    pub fn evict(&mut self, p: &PredicateId) -> Option<Belief> {
        self.beliefs.remove(p)
    }

    pub fn clear(&mut self) {
        self.beliefs.clear();
    }
}

/// Preconditions of `h` that are neither grounded nor believed.
pub fn unresolved_set(
    grounded: &GroundedStore,
    beliefs: &BeliefStore,
    h: &Hypothesis,
) -> BTreeSet<PredicateId> {
    h.preconditions()
        .filter(|p| !grounded.contains(p) && !beliefs.contains(p))
        .cloned()
        .collect()
}

/// Grounded facts, beliefs and the surviving hypotheses.
#[derive(Debug, Clone, Default)]
pub struct EpistemicState {
    pub grounded: GroundedStore,
    pub beliefs: BeliefStore,
    pub hypotheses: Vec<Hypothesis>,
}

impl EpistemicState {
    pub fn new(grounded: GroundedStore, hypotheses: Vec<Hypothesis>) -> Self {
        EpistemicState {
            grounded,
            beliefs: BeliefStore::new(),
            hypotheses,
        }
    }

    /// Union of unresolved sets over the surviving hypotheses.
    pub fn union_unresolved(&self) -> BTreeSet<PredicateId> {
        let mut out = BTreeSet::new();
        for h in &self.hypotheses {
            out.extend(unresolved_set(&self.grounded, &self.beliefs, h));
        }
        out
    }

    /// Applies a query result and evicts beliefs on every newly grounded predicate.
    pub fn ground(
        &mut self,
        p: &PredicateId,
        v: bool,
        delta: &[GroundedFact],
        evidence_override: bool,
    ) -> Result<(), StoreError> {
        self.grounded.ground_update(p, v, delta, evidence_override)?;
        self.beliefs.evict(p);
        for f in delta {
            self.beliefs.evict(&f.predicate);
        }
        Ok(())
    }

    pub fn record_feedback(
        &mut self,
        fact: &GroundedFact,
        evidence_override: bool,
    ) -> Result<(), StoreError> {
        self.grounded.record_feedback(fact, evidence_override)?;
        self.beliefs.evict(&fact.predicate);
        Ok(())
    }

    pub fn insert_belief(&mut self, p: &PredicateId, v: bool, sigma: f64) -> Result<(), StoreError> {
        self.beliefs.insert(&self.grounded, p, v, sigma)
    }

    pub fn is_disjoint(&self) -> bool {
        self.beliefs.domain().all(|p| !self.grounded.contains(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::Hypothesis;
    use std::collections::BTreeMap;

    fn p(s: &str) -> PredicateId {
        s.parse().unwrap()
    }

    fn hyp(pre: &[(&str, bool)]) -> Hypothesis {
        let expected: BTreeMap<_, _> = pre.iter().map(|(s, v)| (p(s), *v)).collect();
        Hypothesis::new("h", vec!["noop()".parse().unwrap()], expected, 0)
    }

    #[test]
    fn unresolved_is_set_difference() {
        let w = GroundedStore::from_facts([GroundedFact::new(p("a(x)"), true, Provenance::InitialObservation)]);
        let mut b = BeliefStore::new();
        b.insert(&w, &p("b(x)"), false, 0.1).unwrap();
        let h = hyp(&[("a(x)", true), ("b(x)", true), ("c(x)", true)]);
        let u = unresolved_set(&w, &b, &h);
        assert_eq!(u.into_iter().collect::<Vec<_>>(), vec![p("c(x)")]);
    }

    #[test]
    fn unresolved_empty_and_full() {
        let w = GroundedStore::new();
        let b = BeliefStore::new();
        assert!(unresolved_set(&w, &b, &hyp(&[])).is_empty());
        let u = unresolved_set(&w, &b, &hyp(&[("a(x)", true), ("b(x)", false)]));
        assert_eq!(u.len(), 2);
    }

    #[test]
    fn union_over_hypotheses() {
        let mut s = EpistemicState::new(GroundedStore::new(), vec![hyp(&[("a()", true)]), hyp(&[("b()", true)])]);
        assert_eq!(s.union_unresolved().len(), 2);
        s.hypotheses.clear();
        assert!(s.union_unresolved().is_empty());
        s.grounded.overwrite(&p("a()"), true, Provenance::InitialObservation);
        s.hypotheses.push(hyp(&[("a()", true)]));
        assert!(s.union_unresolved().is_empty());
    }

    #[test]
    fn ground_update_adds_query_and_side_effects() {
        let mut w = GroundedStore::new();
        let delta = [GroundedFact::new(p("p2()"), false, Provenance::QuerySideEffect)];
        w.ground_update(&p("p1()"), true, &delta, false).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w.entry(&p("p1()")).unwrap().provenance, Provenance::QueryResult);
        assert_eq!(w.entry(&p("p2()")).unwrap().provenance, Provenance::QuerySideEffect);
        w.ground_update(&p("p3()"), false, &[], false).unwrap();
        assert_eq!(w.len(), 3);
    }

    #[test]
    fn regrounding_same_value_upgrades_provenance_only() {
        let before = GroundedStore::from_facts([
            GroundedFact::new(p("p1()"), true, Provenance::InitialObservation),
            GroundedFact::new(p("q()"), false, Provenance::InitialObservation),
        ]);
        let mut after = before.clone();
        after.ground_update(&p("p1()"), true, &[], false).unwrap();
        let strip = |s: &GroundedStore| s.facts().map(|f| (f.predicate, f.value)).collect::<Vec<_>>();
        assert_eq!(strip(&before), strip(&after));
        assert_eq!(after.entry(&p("p1()")).unwrap().provenance, Provenance::QueryResult);
    }

    #[test]
    fn conflicting_query_result_is_an_error_without_override() {
        let mut w = GroundedStore::new();
        w.ground_update(&p("p()"), true, &[], false).unwrap();
        let err = w.ground_update(&p("p()"), false, &[], false).unwrap_err();
        assert!(matches!(err, StoreError::GroundingConflict { .. }));
        assert_eq!(w.get(&p("p()")), Some(true));
        w.ground_update(&p("p()"), false, &[], true).unwrap();
        assert_eq!(w.get(&p("p()")), Some(false));
    }

    #[test]
    fn belief_overwrite_and_disjointness() {
        let mut s = EpistemicState::default();
        s.insert_belief(&p("p1()"), true, 0.1).unwrap();
        s.insert_belief(&p("p1()"), false, 0.2).unwrap();
        assert_eq!(s.beliefs.get(&p("p1()")).unwrap(), Belief { value: false, uncertainty: 0.2 });
        s.ground(&p("p1()"), true, &[], false).unwrap();
        assert!(!s.beliefs.contains(&p("p1()")));
        assert!(matches!(s.insert_belief(&p("p1()"), true, 0.1), Err(StoreError::Disjointness(_))));
        assert!(matches!(s.insert_belief(&p("p9()"), true, 1.5), Err(StoreError::Uncertainty(_))));
        assert!(s.is_disjoint());
    }

    #[test]
    fn snapshot_text_format() {
        let w = GroundedStore::from_facts([
            GroundedFact::new(p("in(apple,fridge)"), true, Provenance::QueryResult),
            GroundedFact::new(p("handempty()"), false, Provenance::InitialObservation),
        ]);
        let text = w.snapshot();
        assert_eq!(text, "handempty()=0 @initial\nin(apple,fridge)=1 @query\n");
        assert_eq!(GroundedStore::parse_snapshot(&text).unwrap(), w);
        assert!(GroundedStore::parse_snapshot("in(a=1 @query").is_err());
    }
}
