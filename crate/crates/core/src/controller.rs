//! The control loop: generate candidate plans, resolve the preconditions that
//! separate them by querying or predicting, certify the winner against
//! grounded facts, then execute with monitoring and replan on surprises.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::domain::{DomainError, GoalConstraints, GroundAction, Instance, State};
use crate::environment::Environment;
use crate::hypotheses::{
    best, filter_consistent, filter_hypotheses, generate_hypotheses, GeneratorConfig, Hypothesis,
};
use crate::predictor::{is_ambiguous, Prediction, PredictionOutcome, WorldModel};
use crate::store::{EpistemicState, GroundedFact, GroundedStore, PredicateId, Provenance, StoreError};
use crate::trace::{
    Event, FailReason, GateRule, HypothesisSummary, QueryReason, ReplanReason, Trace,
};
use crate::verifier::{verify, Counterexample, CounterexampleKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Gated querying plus verification.
    Aec,
    /// Commit to the best initial candidate without queries or checks.
    Direct,
    /// Query every discriminating precondition.
    QueryOnly,
    /// Gated querying, but commit without verification.
    NoVerification,
    /// Never query from the gate; rely on predictions, then verify.
    NoGating,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Aec,
        Mode::Direct,
        Mode::QueryOnly,
        Mode::NoVerification,
        Mode::NoGating,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Aec => "aec",
            Mode::Direct => "direct",
            Mode::QueryOnly => "query-only",
            Mode::NoVerification => "no-verification",
            Mode::NoGating => "no-gating",
        }
    }

    fn gate(self) -> GateRule {
        match self {
            Mode::QueryOnly => GateRule::Always,
            Mode::NoGating => GateRule::Never,
            _ => GateRule::Threshold,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    /// Uncertainty above which a prediction is not trusted.
    pub tau: f64,
    /// Margin around 1/2 inside which a prediction is ambiguous.
    pub epsilon: f64,
    /// Query budget per planning round.
    pub max_queries: usize,
    pub mode: Mode,
    pub replan_cap: u32,
    /// Environment steps (queries plus actions) per episode.
    pub step_cap: u32,
    pub hypothesis_limit: usize,
    pub evidence_override: bool,
    pub generator: GeneratorConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            tau: 0.15,
            epsilon: 0.15,
            max_queries: 8,
            mode: Mode::Aec,
            replan_cap: 10,
            step_cap: 100,
            hypothesis_limit: 32,
            evidence_override: true,
            generator: GeneratorConfig::default(),
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if !(0.0..=0.5).contains(&self.epsilon) {
            return Err(format!("epsilon must lie in [0, 0.5], got {}", self.epsilon));
        }
        if self.hypothesis_limit == 0 {
            return Err("hypothesis_limit must be positive".into());
        }
        if self.generator.max_assumptions > 16 {
            return Err("generator.max_assumptions above 16 is not supported".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommittedPlan {
    pub hypothesis: String,
    pub plan: Vec<GroundAction>,
    pub verified: bool,
    /// Facts grounded after the initial observation, at commit time.
    pub acquired: Vec<GroundedFact>,
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub success: bool,
    /// Rounds used on success; the cap on failure.
    pub replanning_rounds: u32,
    pub queries_used: usize,
    pub steps_used: u32,
    pub committed: Vec<CommittedPlan>,
    pub final_state: GroundedStore,
    pub trace: Trace,
    pub counterexamples: Vec<Counterexample>,
    pub prediction_outcomes: Vec<PredictionOutcome>,
    pub failure: Option<FailReason>,
}

/// The predicate that best splits the
/// candidates, i.e. maximises (#expect true) x (#expect false). Ties go to
/// the predicate more candidates mention, then to the smallest name.
pub fn select_precondition(unresolved: &BTreeSet<PredicateId>, hs: &[Hypothesis]) -> Option<PredicateId> {
    let mut best: Option<(&PredicateId, (usize, usize))> = None;
    for p in unresolved {
        let t = hs.iter().filter(|h| h.expected(p) == Some(true)).count();
        let f = hs.iter().filter(|h| h.expected(p) == Some(false)).count();
        let key = (t * f, t + f);
        if best.is_none_or(|(_, k)| key > k) {
            best = Some((p, key));
        }
    }
    best.map(|(p, _)| p.clone())
}

enum RoundEnd {
    Commit(Hypothesis, bool),
    Replan(ReplanReason),
    Fail(FailReason),
}

enum ExecEnd {
    Success,
    Replan(ReplanReason),
    Fail(FailReason),
}

struct Run<'a, E: Environment, M: WorldModel> {
    env: &'a mut E,
    inst: &'a Instance,
    goal: &'a GoalConstraints,
    model: &'a mut M,
    cfg: &'a ControllerConfig,
    state: EpistemicState,
    trace: Trace,
    round: u32,
    steps: u32,
    queries: usize,
    budget: usize,
    committed: Vec<CommittedPlan>,
    counterexamples: Vec<Counterexample>,
    outcomes: Vec<PredictionOutcome>,
    pending_predictions: BTreeMap<PredicateId, (bool, f64)>,
    reported: BTreeSet<(PredicateId, String)>,
}

/// Runs one episode to success or failure.
pub fn run_episode<E: Environment, M: WorldModel>(
    env: &mut E,
    inst: &Instance,
    goal: &GoalConstraints,
    model: &mut M,
    cfg: &ControllerConfig,
) -> EpisodeOutcome {
    let initial = GroundedStore::from_facts(env.initial_observation());
    let mut run = Run {
        env,
        inst,
        goal,
        model,
        cfg,
        state: EpistemicState::new(initial, Vec::new()),
        trace: Trace::default(),
        round: 0,
        steps: 0,
        queries: 0,
        budget: cfg.max_queries,
        committed: Vec::new(),
        counterexamples: Vec::new(),
        outcomes: Vec::new(),
        pending_predictions: BTreeMap::new(),
        reported: BTreeSet::new(),
    };
    run.emit(Event::Init {
        goal: goal.to_string(),
        grounded: run.state.grounded.snapshot_lines(),
    });
    run.absorb_contradictions();
    let failure = run.episode();
    let success = failure.is_none();
    match &failure {
        None => run.emit(Event::Success),
        Some(reason) => run.emit(Event::Fail {
            reason: reason.clone(),
        }),
    }
    EpisodeOutcome {
        success,
        replanning_rounds: if success { run.round } else { cfg.replan_cap },
        queries_used: run.queries,
        steps_used: run.steps,
        committed: run.committed,
        final_state: run.state.grounded,
        trace: run.trace,
        counterexamples: run.counterexamples,
        prediction_outcomes: run.outcomes,
        failure,
    }
}

impl<E: Environment, M: WorldModel> Run<'_, E, M> {
    fn emit(&mut self, event: Event) {
        self.trace.push(self.round, self.steps, event);
    }

    fn episode(&mut self) -> Option<FailReason> {
        loop {
            let reason = match self.plan_round() {
                RoundEnd::Fail(r) => return Some(r),
                RoundEnd::Replan(r) => r,
                RoundEnd::Commit(h, verified) => match self.execute(&h, verified) {
                    ExecEnd::Success => return None,
                    ExecEnd::Fail(r) => return Some(r),
                    ExecEnd::Replan(r) => r,
                },
            };
            if self.round >= self.cfg.replan_cap {
                return Some(FailReason::ReplanCap);
            }
            self.round += 1;
            self.emit(Event::Replan { reason });
        }
    }

    /// Grounded values plus everything they entail.
    fn known(&self) -> Result<State, DomainError> {
        let base = self.inst.state_of(&self.state.grounded)?;
        Ok(self.inst.closure(&base).state)
    }

    fn pending(&self, known: &State) -> BTreeSet<PredicateId> {
        self.state
            .union_unresolved()
            .into_iter()
            .filter(|p| self.inst.index_of(p).is_none_or(|i| known.get(i).is_none()))
            .collect()
    }

    fn plan_round(&mut self) -> RoundEnd {
        self.state.beliefs.clear();
        self.pending_predictions.clear();
        self.budget = self.cfg.max_queries;
        let generated = match generate_hypotheses(
            self.inst,
            &self.state.grounded,
            self.goal,
            self.cfg.hypothesis_limit,
            &self.cfg.generator,
        ) {
            Ok(h) => h,
            Err(e) => return RoundEnd::Fail(FailReason::Domain(e.to_string())),
        };
        self.emit(Event::Generate {
            hypotheses: generated.iter().map(summary).collect(),
        });
        self.state.hypotheses = generated;
        if self.state.hypotheses.is_empty() {
            return RoundEnd::Fail(FailReason::NoHypotheses);
        }
        if self.cfg.mode == Mode::Direct {
            let h = best(&self.state.hypotheses).expect("non-empty").clone();
            return RoundEnd::Commit(h, false);
        }

        loop {
            if let Err(end) = self.resolve_preconditions() {
                return end;
            }
            let Some(h) = best(&self.state.hypotheses).cloned() else {
                return RoundEnd::Replan(ReplanReason::HypothesesExhausted);
            };
            if self.cfg.mode == Mode::NoVerification {
                return RoundEnd::Commit(h, false);
            }
            let verdict = match verify(&h, &self.state.grounded, self.goal, self.inst) {
                Ok(v) => v,
                Err(e) => return RoundEnd::Fail(FailReason::Domain(e.to_string())),
            };
            self.emit(Event::Verify {
                hypothesis: h.id.clone(),
                input: self.state.grounded.snapshot_lines(),
                beliefs: self.state.beliefs.domain().map(|p| p.to_string()).collect(),
                passed: verdict.passed,
                audit: verdict.audit.iter().map(|e| e.to_string()).collect(),
            });
            if verdict.passed {
                return RoundEnd::Commit(h, true);
            }
            let uncovered = verdict.uncovered();
            if verdict.contradicted() || uncovered.is_empty() {
                let before = self.state.hypotheses.len();
                self.state.hypotheses.retain(|c| c.id != h.id);
                let after = self.state.hypotheses.len();
                self.emit(Event::Filter {
                    predicate: None,
                    value: None,
                    before,
                    after,
                });
                continue;
            }
            if self.budget == 0 {
                return RoundEnd::Replan(ReplanReason::VerificationFailed);
            }
            for p in uncovered {
                if self.budget == 0 {
                    break;
                }
                if let Err(end) = self.query(&p, QueryReason::Coverage, None) {
                    return end;
                }
            }
        }
    }

    /// Inner loop: while some surviving candidate has an unresolved,
    /// non-entailed precondition and budget remains, pick the most
    /// discriminating one and either query it or accept the prediction.
    fn resolve_preconditions(&mut self) -> Result<(), RoundEnd> {
        loop {
            if self.state.hypotheses.is_empty() || self.budget == 0 {
                return Ok(());
            }
            let known = self.known().map_err(|e| RoundEnd::Fail(FailReason::Domain(e.to_string())))?;
            let unresolved = self.pending(&known);
            let Some(p) = select_precondition(&unresolved, &self.state.hypotheses) else {
                return Ok(());
            };
            let pred = self.model.predict(&self.state.grounded, &p, &*self.env);
            let gate = self.cfg.mode.gate();
            let queried = match gate {
                GateRule::Always => true,
                GateRule::Never => false,
                GateRule::Threshold => is_ambiguous(pred.mu, self.cfg.epsilon) || pred.sigma > self.cfg.tau,
            };
            self.emit(Event::Predict {
                predicate: p.to_string(),
                input: self.state.grounded.snapshot_lines(),
                beliefs: self.state.beliefs.domain().map(|b| b.to_string()).collect(),
                mu: pred.mu,
                sigma: pred.sigma,
                epsilon: self.cfg.epsilon,
                tau: self.cfg.tau,
                gate,
                queried,
            });
            if queried {
                self.query(&p, QueryReason::Gate, Some(pred))?;
            } else {
                self.simulate(&p, pred);
            }
        }
    }

    fn simulate(&mut self, p: &PredicateId, pred: Prediction) {
        let v = pred.mu >= 0.5;
        if self.state.insert_belief(p, v, pred.sigma).is_err() {
            return;
        }
        self.pending_predictions.insert(p.clone(), (v, pred.sigma));
        self.emit(Event::Simulate {
            predicate: p.to_string(),
            value: v,
            sigma: pred.sigma,
        });
        self.filter(p, v);
    }

    fn filter(&mut self, p: &PredicateId, v: bool) {
        let before = self.state.hypotheses.len();
        self.state.hypotheses = filter_hypotheses(&self.state.hypotheses, p, v);
        let after = self.state.hypotheses.len();
        self.emit(Event::Filter {
            predicate: Some(p.to_string()),
            value: Some(v),
            before,
            after,
        });
    }

    /// Drops candidates contradicted by grounded or entailed values.
    fn prune_inconsistent(&mut self) {
        let Ok(known) = self.known() else { return };
        let before = self.state.hypotheses.len();
        self.state.hypotheses = filter_consistent(self.inst, &self.state.hypotheses, &known);
        let after = self.state.hypotheses.len();
        if after != before {
            self.emit(Event::Filter {
                predicate: None,
                value: None,
                before,
                after,
            });
        }
    }

    fn query(&mut self, p: &PredicateId, reason: QueryReason, pred: Option<Prediction>) -> Result<(), RoundEnd> {
        if self.steps >= self.cfg.step_cap {
            return Err(RoundEnd::Fail(FailReason::StepCap));
        }
        let out = self.env.query(p);
        self.steps += out.steps;
        self.budget = self.budget.saturating_sub(1);
        self.queries += 1;
        match self.state.ground(p, out.value, &out.delta, false) {
            Ok(()) => {}
            Err(StoreError::GroundingConflict {
                predicate,
                existing,
                incoming,
            }) => {
                self.counterexample(Counterexample {
                    kind: CounterexampleKind::GroundingConflict,
                    predicate,
                    expected: existing,
                    observed: incoming,
                    rule_id: None,
                });
                if self.cfg.evidence_override {
                    let _ = self.state.ground(p, out.value, &out.delta, true);
                }
            }
            Err(_) => {}
        }
        if let Some(pred) = pred {
            self.outcomes.push(PredictionOutcome {
                predicate: p.clone(),
                predicted: pred.mu >= 0.5,
                actual: out.value,
                sigma: pred.sigma,
            });
        }
        self.resolve_prediction(p);
        for f in &out.delta {
            self.resolve_prediction(&f.predicate);
        }
        self.emit(Event::Query {
            predicate: p.to_string(),
            value: out.value,
            delta: out.delta.iter().map(|f| f.to_string()).collect(),
            cost: out.steps,
            reason,
        });
        if let Some(v) = self.state.grounded.get(p) {
            self.filter(p, v);
        }
        self.prune_inconsistent();
        self.absorb_contradictions();
        Ok(())
    }

    /// Pairs an earlier accepted prediction with the value now grounded.
    fn resolve_prediction(&mut self, p: &PredicateId) {
        if let (Some((v, sigma)), Some(actual)) = (
            self.pending_predictions.get(p).copied(),
            self.state.grounded.get(p),
        ) {
            self.pending_predictions.remove(p);
            self.outcomes.push(PredictionOutcome {
                predicate: p.clone(),
                predicted: v,
                actual,
                sigma,
            });
        }
    }

    fn counterexample(&mut self, c: Counterexample) {
        self.emit(Event::Counterexample {
            kind: serde_json::to_value(c.kind)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            predicate: c.predicate.to_string(),
            expected: c.expected,
            observed: c.observed,
            rule: c.rule_id.clone(),
        });
        self.counterexamples.push(c);
    }

    /// Reports each rule conclusion that a grounded fact contradicts, once.
    fn absorb_contradictions(&mut self) {
        let Ok(base) = self.inst.state_of(&self.state.grounded) else {
            return;
        };
        let cl = self.inst.closure(&base);
        for c in cl.contradictions {
            let p = self.inst.predicate(c.predicate).clone();
            if !self.reported.insert((p.clone(), c.rule_id.clone())) {
                continue;
            }
            let observed = base.get(c.predicate).unwrap_or(!c.derived);
            self.counterexample(Counterexample {
                kind: CounterexampleKind::EntailmentContradiction,
                predicate: p,
                expected: c.derived,
                observed,
                rule_id: Some(c.rule_id),
            });
        }
    }

    fn record_feedback(&mut self, f: &GroundedFact) {
        if let Err(StoreError::GroundingConflict {
            predicate,
            existing,
            incoming,
        }) = self.state.record_feedback(f, false)
        {
            self.counterexample(Counterexample {
                kind: CounterexampleKind::ExecutionContradiction,
                predicate,
                expected: existing,
                observed: incoming,
                rule_id: None,
            });
            if self.cfg.evidence_override {
                let _ = self.state.record_feedback(f, true);
            }
        }
        self.resolve_prediction(&f.predicate);
    }

    /// Grounded state after `a` succeeds: its effects plus what the rules
    /// force. Feedback matching it is a change the action caused.
    fn predicted_after(&self, a: &GroundAction) -> Option<State> {
        let mut st = self.inst.state_of(&self.state.grounded).ok()?;
        let ca = self.inst.action(a)?;
        st.apply(&ca.add, &ca.del);
        self.inst.ramify(&mut st);
        Some(st)
    }

    /// Some remaining step needs a value the grounded store now contradicts.
    fn remaining_contradicted(&self, rest: &[GroundAction]) -> bool {
        let Ok(mut cur) = self.inst.state_of(&self.state.grounded) else {
            return true;
        };
        for a in rest {
            let Some(ca) = self.inst.action(a) else {
                return true;
            };
            if ca.pre.iter().any(|&(i, v)| cur.get(i) == Some(!v)) {
                return true;
            }
            cur.apply(&ca.add, &ca.del);
        }
        false
    }

    fn execute(&mut self, h: &Hypothesis, verified: bool) -> ExecEnd {
        self.env.on_commit(&h.plan);
        let acquired: Vec<GroundedFact> = self
            .state
            .grounded
            .facts()
            .filter(|f| f.provenance != Provenance::InitialObservation)
            .collect();
        self.emit(Event::Commit {
            hypothesis: h.id.clone(),
            plan: h.plan_text(),
            verified,
            acquired: acquired.iter().map(|f| f.to_string()).collect(),
        });
        self.committed.push(CommittedPlan {
            hypothesis: h.id.clone(),
            plan: h.plan.clone(),
            verified,
            acquired,
        });

        for (k, a) in h.plan.iter().enumerate() {
            if self.steps >= self.cfg.step_cap {
                return ExecEnd::Fail(FailReason::StepCap);
            }
            let predicted = self.predicted_after(a);
            let out = self.env.execute_action(a);
            self.steps += out.steps;
            self.emit(Event::Execute {
                action: a.to_string(),
                success: out.success,
                feedback: out.feedback.iter().map(|f| f.to_string()).collect(),
                cost: out.steps,
            });
            for f in &out.feedback {
                let caused = out.success
                    && predicted
                        .as_ref()
                        .zip(self.inst.index_of(&f.predicate))
                        .is_some_and(|(st, i)| st.get(i) == Some(f.value));
                if caused {
                    let before = self.state.grounded.get(&f.predicate);
                    let _ = self.state.record_feedback(f, true);
                    if before == Some(f.value) {
                        self.resolve_prediction(&f.predicate);
                    } else {
                        // The prediction was about the value before the action.
                        self.pending_predictions.remove(&f.predicate);
                    }
                } else {
                    self.record_feedback(f);
                }
            }
            if !out.success {
                if let Some(ca) = self.inst.action(a) {
                    for f in &out.feedback {
                        let required = self
                            .inst
                            .index_of(&f.predicate)
                            .and_then(|i| ca.pre.iter().find(|&&(j, _)| j == i))
                            .map(|&(_, v)| v);
                        if let Some(req) = required.filter(|&r| r != f.value) {
                            self.counterexample(Counterexample {
                                kind: CounterexampleKind::ExecutionContradiction,
                                predicate: f.predicate.clone(),
                                expected: req,
                                observed: f.value,
                                rule_id: None,
                            });
                        }
                    }
                }
                self.absorb_contradictions();
                return ExecEnd::Replan(ReplanReason::ActionFailed);
            }
            self.absorb_contradictions();
            if self.remaining_contradicted(&h.plan[k + 1..]) {
                return ExecEnd::Replan(ReplanReason::ObservationContradiction);
            }
        }
        let (done, facts) = self.env.observe_goal(self.goal);
        for f in &facts {
            self.record_feedback(f);
        }
        self.absorb_contradictions();
        if done {
            ExecEnd::Success
        } else {
            ExecEnd::Replan(ReplanReason::GoalUnmet)
        }
    }
}

fn summary(h: &Hypothesis) -> HypothesisSummary {
    HypothesisSummary {
        id: h.id.clone(),
        plan: h.plan_text(),
        expected: h
            .expected
            .iter()
            .map(|(p, v)| format!("{p}={}", u8::from(*v)))
            .collect(),
        assumptions: h.assumptions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> PredicateId {
        s.parse().unwrap()
    }

    fn hyp(id: &str, pre: &[(&str, bool)]) -> Hypothesis {
        let expected = pre.iter().map(|(s, v)| (p(s), *v)).collect();
        Hypothesis::new(id, vec!["noop()".parse().unwrap()], expected, 0)
    }

    #[test]
    fn selects_the_most_balanced_split() {
        let hs = vec![
            hyp("a", &[("x()", true), ("y()", true), ("z()", true)]),
            hyp("b", &[("x()", true), ("y()", false), ("z()", true)]),
            hyp("c", &[("x()", false), ("y()", false), ("z()", true)]),
            hyp("d", &[("x()", false), ("y()", true)]),
        ];
        let u: BTreeSet<PredicateId> = ["x()", "y()", "z()"].iter().map(|s| p(s)).collect();
        // x and y both split 2/2; tie on coverage too, so the smaller name wins.
        assert_eq!(select_precondition(&u, &hs), Some(p("x()")));
        let u2: BTreeSet<PredicateId> = ["y()", "z()"].iter().map(|s| p(s)).collect();
        assert_eq!(select_precondition(&u2, &hs), Some(p("y()")));
    }

    #[test]
    fn non_discriminating_ties_break_on_coverage() {
        let hs = vec![
            hyp("a", &[("b()", true), ("a()", true)]),
            hyp("b", &[("b()", true)]),
        ];
        let u: BTreeSet<PredicateId> = ["a()", "b()"].iter().map(|s| p(s)).collect();
        assert_eq!(select_precondition(&u, &hs), Some(p("b()")));
        assert_eq!(select_precondition(&BTreeSet::new(), &hs), None);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("bogus".parse::<Mode>().is_err());
    }
}
