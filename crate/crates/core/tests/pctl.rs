mod common;

use std::collections::BTreeMap;

use decsynth::lang::{build_source, BuildOptions};
use decsynth::markov::ControllerAssignment;
use decsynth::models;
use decsynth::pctl::{parse_query, pmc, satisfies, state_values};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const O1: &str = r#"P=? [ !"collision" U "done" ]"#;
const O2: &str = r#"R{"time"}=? [ F "done" ]"#;

fn robot(wait1: f64, wait2: f64) -> decsynth::markov::ExplicitPdtmc {
    let m = build_source(models::ROBOT, &BuildOptions::default()).unwrap();
    let named: BTreeMap<String, f64> =
        [("x1_wait", wait1), ("x1_go", 1.0 - wait1), ("x2_wait", wait2), ("x2_go", 1.0 - wait2)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
    m.instantiate(&ControllerAssignment::from_named(&m, &named)).unwrap()
}

#[test]
fn robot_always_go() {
    // A collision happens iff a collider is present and on course: 0.5 * 0.5.
    let m = robot(0.0, 0.0);
    assert!((pmc(&parse_query(O1).unwrap(), &m).unwrap() - 0.75).abs() < 1e-12);
    // Travel once, plus the collision delay on a quarter of journeys.
    let expected = 9.95 + 0.25 * 2.57;
    assert!((pmc(&parse_query(O2).unwrap(), &m).unwrap() - expected).abs() < 1e-9);
}

#[test]
fn robot_wait_when_collision_is_predicted() {
    let m = robot(0.0, 1.0);
    assert!((pmc(&parse_query(O1).unwrap(), &m).unwrap() - 1.0).abs() < 1e-12);
    // T = 0.75 * 9.95 + 0.25 * (5 + T).
    let expected = (0.75 * 9.95 + 0.25 * 5.0) / 0.75;
    assert!((pmc(&parse_query(O2).unwrap(), &m).unwrap() - expected).abs() < 1e-9);
    assert!(satisfies(&parse_query(r#"P>=0.75 [ !"collision" U "done" ]"#).unwrap(), &m).unwrap());
    assert!(!satisfies(&parse_query(r#"R{"time"}<=0 [ F "done" ]"#).unwrap(), &m).unwrap());
}

#[test]
fn robot_constraint_threshold() {
    // Waiting on predicted collisions with probability w gives 1 - 0.25 (1 - w) / (1 - 0.25 w).
    for (w, holds) in [(0.1, true), (0.0, true)] {
        let m = robot(0.0, w);
        let v = pmc(&parse_query(O1).unwrap(), &m).unwrap();
        let expected = 1.0 - 0.25 * (1.0 - w) / (1.0 - 0.25 * w);
        assert!((v - expected).abs() < 1e-12);
        assert_eq!(satisfies(&parse_query(r#"P>=0.75 [ !"collision" U "done" ]"#).unwrap(), &m).unwrap(), holds);
    }
    let m = robot(1.0, 0.0);
    // Waiting whenever no collision is predicted: wait forever when k=1.
    let v = pmc(&parse_query(O1).unwrap(), &m).unwrap();
    assert!(v < 0.75);
    assert!(!satisfies(&parse_query(r#"P>=0.75 [ !"collision" U "done" ]"#).unwrap(), &m).unwrap());
}

#[test]
fn next_true_is_one_everywhere() {
    let m = robot(0.3, 0.6);
    assert!(state_values(&parse_query("P=? [ X true ]").unwrap(), &m).unwrap().iter().all(|v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn oracle_agreement_on_random_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rand::Rng::gen_range(&mut rng, 1..=8);
        let c = common::random_chain(&mut rng, n);
        let until = state_values(&parse_query(r#"P=? [ "a" U "b" ]"#).unwrap(), &c.model).unwrap();
        let reach = state_values(&parse_query(r#"R{"r"}=? [ F "b" ]"#).unwrap(), &c.model).unwrap();
        let oracle_u = common::oracle_until(&c);
        let oracle_r = common::oracle_reach_reward(&c);
        for s in 0..n {
            assert!(common::gap(until[s], oracle_u[s]) < 1e-9);
            assert!(common::gap(reach[s], oracle_r[s]) < 1e-9, "{} vs {}", reach[s], oracle_r[s]);
        }
        for k in 1..=6 {
            let q = parse_query(&format!(r#"P=? [ "a" U<={k} "b" ]"#)).unwrap();
            let c_q = parse_query(&format!(r#"R{{"r"}}=? [ C<={k} ]"#)).unwrap();
            let (bu, cu) = (state_values(&q, &c.model).unwrap(), state_values(&c_q, &c.model).unwrap());
            for s in 0..n {
                assert!((bu[s] - common::enumerate_bounded_until(&c, s, k)).abs() < 1e-9);
                assert!((cu[s] - common::enumerate_cumulative(&c, s, k)).abs() < 1e-9);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bounded_until_increases_to_the_unbounded_value(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_chain(&mut rng, n);
        let limit = pmc(&parse_query(r#"P=? [ "a" U "b" ]"#).unwrap(), &c.model).unwrap();
        prop_assert!((0.0..=1.0 + 1e-9).contains(&limit));
        let mut previous = 0.0;
        for k in [1u64, 2, 4, 8, 16, 64, 256, 4096] {
            let v = pmc(&parse_query(&format!(r#"P=? [ "a" U<={k} "b" ]"#)).unwrap(), &c.model).unwrap();
            prop_assert!(v + 1e-12 >= previous);
            prop_assert!(v <= limit + 1e-9);
            previous = v;
        }
        // Transient mass in random chains decays geometrically, so 4096 steps is ample.
        prop_assert!((limit - previous).abs() < 1e-6);
    }

    #[test]
    fn cumulative_reward_is_monotone(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_chain(&mut rng, n);
        let mut previous = 0.0;
        for k in 1..=12u64 {
            let v = pmc(&parse_query(&format!("R=? [ C<={k} ]")).unwrap(), &c.model).unwrap();
            prop_assert!(v + 1e-12 >= previous);
            previous = v;
        }
    }

    #[test]
    fn graph_classes_are_exact(seed in any::<u64>(), n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = common::random_chain(&mut rng, n);
        let classes = decsynth::pctl::until_classes(&c.model, &c.a, &c.b);
        let values = state_values(&parse_query(r#"P=? [ "a" U "b" ]"#).unwrap(), &c.model).unwrap();
        for s in 0..n {
            if classes.prob0[s] {
                prop_assert_eq!(values[s], 0.0);
            }
            if classes.prob1[s] {
                prop_assert_eq!(values[s], 1.0);
            }
        }
    }
}
