//! Symbolic planning domain: typed predicate schema, STRIPS action templates,
//! guarded Horn entailment rules and goal constraints.
//!
//! A [`DomainSchema`] is lifted (variables, types). An [`Instance`] grounds it
//! over a concrete object set and compiles everything to bitset form for the
//! planner, verifier and simulator.

mod instance;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store::PredicateId;

pub use instance::{Bits, Closure, CompiledAction, Instance, RuleConflict, RuleContradiction, State, MAX_PREDICATES};

pub const MICRO_SCHEMA: &str = include_str!("../../schemas/micro.domain");
pub const HOUSEHOLD_SCHEMA: &str = include_str!("../../schemas/household.domain");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("schema line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("undeclared {kind} `{name}`")]
    Undeclared { kind: &'static str, name: String },
    #[error("`{0}` declared more than once")]
    Duplicate(String),
    #[error("arity mismatch for {pred}: expected {expected}, got {got}")]
    Arity { pred: String, expected: usize, got: usize },
    #[error("object `{object}` of type `{ty}` does not fit parameter type `{expected}`")]
    TypeMismatch { object: String, ty: String, expected: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("unknown predicate instance {0}")]
    UnknownPredicate(PredicateId),
    #[error("unknown action {0}")]
    UnknownAction(String),
    #[error("instance grounds {0} predicates, more than the supported {MAX_PREDICATES}")]
    TooLarge(usize),
    #[error("rule `{0}`: {1}")]
    BadRule(String, String),
    #[error("rules {first} and {second} derive opposite values for {predicate}")]
    RuleConflict {
        predicate: PredicateId,
        first: String,
        second: String,
    },
    #[error("action `{0}`: add and delete effects overlap after instantiation")]
    EffectOverlap(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<String> = self.args.iter().map(|t| t.to_string()).collect();
        write!(f, "{}({})", self.predicate, args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub atom: Atom,
    pub value: bool,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.value {
            f.write_str("!")?;
        }
        write!(f, "{}", self.atom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeDecl {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub name: String,
    pub params: Vec<String>,
    /// At most one true instance per first argument (object location).
    pub unique: bool,
    /// Contents of a receptacle are observable while this holds for it.
    pub visibility: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub var: String,
    pub ty: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub name: String,
    pub params: Vec<Param>,
    pub preconditions: Vec<Literal>,
    pub add_effects: Vec<Atom>,
    pub delete_effects: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guard {
    Distinct(String, String),
    HasType(String, String),
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Guard::Distinct(a, b) => write!(f, "?{a} != ?{b}"),
            Guard::HasType(v, t) => write!(f, "?{v} : {t}"),
        }
    }
}

/// Guarded Horn rule `premises, guards => conclusion`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntailmentRule {
    pub id: String,
    pub premises: Vec<Literal>,
    pub conclusion: Literal,
    pub guards: Vec<Guard>,
    pub enabled: bool,
}

impl fmt::Display for EntailmentRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut lhs: Vec<String> = self.premises.iter().map(|l| l.to_string()).collect();
        lhs.extend(self.guards.iter().map(|g| g.to_string()));
        write!(f, "rule {}: {} => {}", self.id, lhs.join(", "), self.conclusion)
    }
}

/// What a query macro-action does beyond reading the queried value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RevealTarget {
    /// Read the value only.
    Observe,
    /// Make the receptacle bound to this variable observable using the named action.
    Receptacle { var: String, via: String },
    /// Same, for the receptacle currently holding the object bound to `var`.
    LocationOf { var: String, via: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPolicy {
    pub atom: Atom,
    pub reveal: RevealTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub name: String,
    pub types: Vec<TypeDecl>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionTemplate>,
    pub rules: Vec<EntailmentRule>,
    pub queries: Vec<QueryPolicy>,
}

impl DomainSchema {
    pub fn parse(text: &str) -> Result<DomainSchema, DomainError> {
        parse::parse_schema(text)
    }

    pub fn micro() -> DomainSchema {
        Self::parse(MICRO_SCHEMA).expect("built-in micro schema")
    }

    pub fn household() -> DomainSchema {
        Self::parse(HOUSEHOLD_SCHEMA).expect("built-in household schema")
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionTemplate> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn has_type(&self, name: &str) -> bool {
        self.types.iter().any(|t| t.name == name)
    }

    /// True when `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = Some(ty);
        let mut hops = 0;
        while let Some(t) = cur {
            if t == ancestor {
                return true;
            }
            cur = self
                .types
                .iter()
                .find(|d| d.name == t)
                .and_then(|d| d.parent.as_deref());
            hops += 1;
            if hops > self.types.len() {
                break;
            }
        }
        false
    }

    pub fn location_predicate(&self) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.unique)
    }

    pub fn visibility_predicate(&self) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.visibility)
    }

    pub fn query_policy(&self, predicate: &str) -> Option<&QueryPolicy> {
        self.queries.iter().find(|q| q.atom.predicate == predicate)
    }

    /// Rule set containing the schema's own rules.
    pub fn rule_set(&self) -> RuleSet {
        RuleSet::new(self.rules.clone())
    }

    /// Parses one rule line (`[rule] id: premises => conclusion`) against
    /// this schema's declarations.
    pub fn parse_rule(&self, text: &str) -> Result<EntailmentRule, DomainError> {
        let text = text.trim();
        let body = text.strip_prefix("rule ").unwrap_or(text);
        let r = parse::rule(1, body)?;
        self.check_rule(&r)?;
        Ok(r)
    }

    /// Checks that an extra rule only references declared predicates and types.
    pub fn check_rule(&self, rule: &EntailmentRule) -> Result<(), DomainError> {
        parse::check_rule(self, rule)
    }
}

/// An ordered, mutable-between-episodes collection of entailment rules.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: Vec<EntailmentRule>,
}

impl RuleSet {
    pub fn new(mut rules: Vec<EntailmentRule>) -> Self {
        rules.sort_by(|a, b| a.id.cmp(&b.id));
        RuleSet { rules }
    }

    pub fn empty() -> Self {
        RuleSet { rules: Vec::new() }
    }

    pub fn rules(&self) -> &[EntailmentRule] {
        &self.rules
    }

    pub fn get(&self, id: &str) -> Option<&EntailmentRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn with_rule(mut self, rule: EntailmentRule) -> Self {
        self.rules.retain(|r| r.id != rule.id);
        self.rules.push(rule);
        self.rules.sort_by(|a, b| a.id.cmp(&b.id));
        self
    }

    pub fn set_enabled(&mut self, id: &str, enabled: bool) -> bool {
        match self.rules.iter_mut().find(|r| r.id == id) {
            Some(r) => {
                r.enabled = enabled;
                true
            }
            None => false,
        }
    }

    pub fn enabled_ids(&self) -> Vec<String> {
        self.rules
            .iter()
            .filter(|r| r.enabled)
            .map(|r| r.id.clone())
            .collect()
    }

    pub fn disabled_ids(&self) -> Vec<String> {
        self.rules
            .iter()
            .filter(|r| !r.enabled)
            .map(|r| r.id.clone())
            .collect()
    }
}

/// Action with every parameter bound, e.g. `take(apple,fridge)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroundAction {
    pub template: String,
    pub args: Vec<String>,
}

impl GroundAction {
    pub fn new(template: impl Into<String>, args: &[&str]) -> Self {
        GroundAction {
            template: template.into(),
            args: args.iter().map(|a| a.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.template, self.args.join(","))
    }
}

impl std::str::FromStr for GroundAction {
    type Err = crate::store::ParsePredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let p: PredicateId = s.parse()?;
        Ok(GroundAction {
            template: p.name,
            args: p.args,
        })
    }
}

/// Required predicate values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalConstraints {
    pub required: BTreeMap<PredicateId, bool>,
}

impl GoalConstraints {
    pub fn new<I: IntoIterator<Item = (PredicateId, bool)>>(items: I) -> Self {
        GoalConstraints {
            required: items.into_iter().collect(),
        }
    }

    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.required
            .keys()
            .flat_map(|p| p.args.iter().map(|s| s.as_str()))
    }
}

impl fmt::Display for GoalConstraints {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .required
            .iter()
            .map(|(p, v)| format!("{p}={}", u8::from(*v)))
            .collect();
        f.write_str(&parts.join(" & "))
    }
}

impl std::str::FromStr for GoalConstraints {
    type Err = crate::store::ParsePredicateError;

    /// Parses `in(a,b)=1 & clean(a)=1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut required = BTreeMap::new();
        for part in s.split('&').map(str::trim).filter(|p| !p.is_empty()) {
            let (pred, val) = part
                .rsplit_once('=')
                .ok_or_else(|| crate::store::ParsePredicateError(part.to_string()))?;
            let v = match val.trim() {
                "1" | "true" => true,
                "0" | "false" => false,
                _ => return Err(crate::store::ParsePredicateError(part.to_string())),
            };
            required.insert(pred.trim().parse()?, v);
        }
        Ok(GoalConstraints { required })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_schemas_parse() {
        let m = DomainSchema::micro();
        assert_eq!(m.name, "micro");
        assert!(m.action("take").is_some());
        assert!(m.location_predicate().is_some());
        let h = DomainSchema::household();
        assert!(h.is_subtype("fridge", "receptacle"));
        assert!(!h.is_subtype("surface", "container"));
        assert!(h.rules.iter().any(|r| r.id.contains("fridge")));
    }

    #[test]
    fn goal_text_round_trip() {
        let g: GoalConstraints = "in(apple,table)=1 & clean(apple)=0".parse().unwrap();
        assert_eq!(g.required.len(), 2);
        let again: GoalConstraints = g.to_string().parse().unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn parses_a_standalone_rule() {
        let h = DomainSchema::household();
        let r = h
            .parse_rule("rule x: in(?o, ?s), ?s : sinkbasin => !clean(?o)")
            .unwrap();
        assert_eq!(r.id, "x");
        assert!(!r.conclusion.value);
        assert!(h.parse_rule("y: in(?o, ?s) => wet(?o)").is_err());
        assert!(DomainSchema::micro()
            .parse_rule("z: in(?o, ?s), ?s : sinkbasin => holding(?o)")
            .is_err());
    }

    #[test]
    fn rule_set_orders_by_id_and_toggles() {
        let m = DomainSchema::micro();
        let mut rs = m.rule_set();
        let ids: Vec<_> = rs.rules().iter().map(|r| r.id.clone()).collect();
        let mut sorted = ids.clone();
        sorted.sort();
        assert_eq!(ids, sorted);
        assert!(rs.set_enabled(&ids[0], false));
        assert_eq!(rs.disabled_ids(), vec![ids[0].clone()]);
        assert!(!rs.set_enabled("nope", false));
    }
}
