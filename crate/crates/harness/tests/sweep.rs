use aec_core::domain::DomainSchema;
use aec_core::environment::EnvInstanceConfig;
use aec_harness::sweep::{exhaustive_micro, sampled_sweep};

#[test]
fn sampled_sweep_passes_with_schema_rules() {
    for env in [EnvInstanceConfig::micro(), EnvInstanceConfig::default()] {
        let rules = env.schema().rule_set();
        let r = sampled_sweep(&env, &rules, 100, 9).unwrap();
        assert_eq!(r.worlds, 100);
        assert!(r.verified > 0);
        assert!(r.sound(), "{:?}", r.examples);
    }
}

// A rule that claims every occupied box is open lets the verifier accept
// `take` from closed boxes; the sweep must notice.
#[test]
fn sweeps_catch_an_unsound_rule() {
    let schema = DomainSchema::micro();
    let bad = schema.parse_rule("rule bad: in(?o, ?c) => open(?c)").unwrap();
    let rules = schema.rule_set().with_rule(bad);
    let sampled = sampled_sweep(&EnvInstanceConfig::micro(), &rules, 200, 9).unwrap();
    assert!(!sampled.sound());
    assert!(!sampled.examples.is_empty());
    let exhaustive = exhaustive_micro(&rules, 1).unwrap();
    assert!(exhaustive.violations > 0);
    assert_eq!(exhaustive.worlds, 16);
}

#[test]
fn sweep_report_is_deterministic() {
    let env = EnvInstanceConfig::default();
    let rules = env.schema().rule_set();
    let a = sampled_sweep(&env, &rules, 50, 4).unwrap();
    let b = sampled_sweep(&env, &rules, 50, 4).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}
