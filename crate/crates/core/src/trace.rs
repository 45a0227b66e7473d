//! Structured per-episode event log, serialised as JSON lines.
//!
//! Every record carries a sequence number, the planning round and the steps
//! used so far; these are logical clocks, so identical seeds give
//! byte-identical traces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::predictor::is_ambiguous;
use crate::store::{GroundedFact, PredicateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateRule {
    /// Query iff the prediction is ambiguous or too uncertain.
    Threshold,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryReason {
    Gate,
    /// Queried because the verifier found it uncovered.
    Coverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplanReason {
    HypothesesExhausted,
    VerificationFailed,
    ActionFailed,
    ObservationContradiction,
    GoalUnmet,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailReason {
    NoHypotheses,
    StepCap,
    ReplanCap,
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub id: String,
    pub plan: Vec<String>,
    pub expected: Vec<String>,
    pub assumptions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Init {
        goal: String,
        grounded: Vec<String>,
    },
    Generate {
        hypotheses: Vec<HypothesisSummary>,
    },
    Predict {
        predicate: String,
        /// Grounded facts visible to the model at call time.
        input: Vec<String>,
        /// Belief-store domain at call time.
        beliefs: Vec<String>,
        mu: f64,
        sigma: f64,
        epsilon: f64,
        tau: f64,
        gate: GateRule,
        queried: bool,
    },
    Query {
        predicate: String,
        value: bool,
        delta: Vec<String>,
        /// Steps charged for this query.
        cost: u32,
        reason: QueryReason,
    },
    Simulate {
        predicate: String,
        value: bool,
        sigma: f64,
    },
    Filter {
        predicate: Option<String>,
        value: Option<bool>,
        before: usize,
        after: usize,
    },
    Verify {
        hypothesis: String,
        /// Grounded facts handed to the verifier.
        input: Vec<String>,
        beliefs: Vec<String>,
        passed: bool,
        audit: Vec<String>,
    },
    Commit {
        hypothesis: String,
        plan: Vec<String>,
        verified: bool,
        /// Facts grounded after the initial observation.
        acquired: Vec<String>,
    },
    Execute {
        action: String,
        success: bool,
        feedback: Vec<String>,
        cost: u32,
    },
    Counterexample {
        kind: String,
        predicate: String,
        expected: bool,
        observed: bool,
        rule: Option<String>,
    },
    Replan {
        reason: ReplanReason,
    },
    Fail {
        reason: FailReason,
    },
    Success,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: u64,
    pub round: u32,
    pub steps: u32,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn push(&mut self, round: u32, steps: u32, event: Event) {
        let seq = self.records.len() as u64;
        self.records.push(TraceRecord {
            seq,
            round,
            steps,
            event,
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("trace records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, serde_json::Error> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Trace { records })
    }

    pub fn events(&self) -> impl Iterator<Item = &Event> {
        self.records.iter().map(|r| &r.event)
    }
}

fn input_predicates(input: &[String]) -> BTreeSet<PredicateId> {
    input
        .iter()
        .filter_map(|l| l.parse::<GroundedFact>().ok().map(|f| f.predicate))
        .collect()
}

/// Records where a belief predicate also appears among the grounded facts
/// handed to the model or verifier. A clean trace returns an empty list.
pub fn leakage_violations(trace: &Trace) -> Vec<u64> {
    let mut out = Vec::new();
    for r in &trace.records {
        let (input, beliefs) = match &r.event {
            Event::Predict { input, beliefs, .. } | Event::Verify { input, beliefs, .. } => (input, beliefs),
            _ => continue,
        };
        let grounded = input_predicates(input);
        let malformed = grounded.len() != input.len();
        let overlap = beliefs
            .iter()
            .filter_map(|b| b.parse::<PredicateId>().ok())
            .any(|b| grounded.contains(&b));
        if malformed || overlap {
            out.push(r.seq);
        }
    }
    out
}

/// Predict records whose branch disagrees with the declared gate rule.
pub fn gate_violations(trace: &Trace) -> Vec<u64> {
    trace
        .records
        .iter()
        .filter(|r| match &r.event {
            Event::Predict {
                mu,
                sigma,
                epsilon,
                tau,
                gate,
                queried,
                ..
            } => {
                let should = match gate {
                    GateRule::Threshold => is_ambiguous(*mu, *epsilon) || *sigma > *tau,
                    GateRule::Always => true,
                    GateRule::Never => false,
                };
                should != *queried
            }
            _ => false,
        })
        .map(|r| r.seq)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn predict(input: &[&str], beliefs: &[&str], mu: f64, sigma: f64, queried: bool) -> Event {
        Event::Predict {
            predicate: "x()".into(),
            input: input.iter().map(|s| s.to_string()).collect(),
            beliefs: beliefs.iter().map(|s| s.to_string()).collect(),
            mu,
            sigma,
            epsilon: 0.1,
            tau: 0.2,
            gate: GateRule::Threshold,
            queried,
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = Trace::default();
        t.push(0, 0, Event::Init { goal: "holding(o1)=1".into(), grounded: vec!["open(c1)=0 @initial".into()] });
        t.push(0, 1, predict(&[], &[], 0.7, 0.1, false));
        t.push(
            0,
            2,
            Event::Query { predicate: "open(c1)".into(), value: true, delta: vec![], cost: 1, reason: QueryReason::Gate },
        );
        t.push(1, 3, Event::Fail { reason: FailReason::Domain("x".into()) });
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().contains("\"event\":\"init\""));
        assert_eq!(Trace::from_jsonl(&text).unwrap(), t);
    }

    #[test]
    fn detects_belief_in_model_input() {
        let mut t = Trace::default();
        t.push(0, 0, predict(&["a()=1 @query"], &["b()"], 0.9, 0.0, false));
        t.push(0, 0, predict(&["a()=1 @query"], &["a()"], 0.9, 0.0, false));
        assert_eq!(leakage_violations(&t), vec![1]);
    }

    #[test]
    fn gate_rule_audit() {
        let mut t = Trace::default();
        t.push(0, 0, predict(&[], &[], 0.55, 0.0, true));
        t.push(0, 0, predict(&[], &[], 0.9, 0.3, true));
        t.push(0, 0, predict(&[], &[], 0.9, 0.1, false));
        t.push(0, 0, predict(&[], &[], 0.9, 0.1, true));
        t.push(0, 0, predict(&[], &[], 0.6, 0.0, false));
        assert_eq!(gate_violations(&t), vec![3]);
    }
}
