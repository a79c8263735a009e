use coach_ope_wasm::{archetype_slices, compare_policies, episode_trace};
use serde_json::Value;

#[test]
fn comparison_lists_three_policies_and_is_deterministic() {
    let a = compare_policies(30, 0.1, 2, 5).unwrap();
    assert_eq!(a, compare_policies(30, 0.1, 2, 5).unwrap());
    let rows: Vec<Value> = serde_json::from_str(&a).unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["policy"].as_str().unwrap()).collect();
    assert_eq!(names, ["heuristic", "personalized", "curiosity"]);
}

#[test]
fn slices_cover_all_archetypes_with_truth() {
    let rows: Vec<Value> = serde_json::from_str(&archetype_slices("subgroup_harm", 300, 2).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["true_delta_objective"].is_f64()));
    assert!(rows[3]["true_delta_objective"].as_f64().unwrap() < 0.0);
}

#[test]
fn trace_carries_a_normalized_posterior_each_turn() {
    let t: Value = serde_json::from_str(&episode_trace("curiosity", 0.5, 4, 3, 0).unwrap()).unwrap();
    let turns = t["turns"].as_array().unwrap();
    assert!(!turns.is_empty());
    for turn in turns {
        let p = turn["posterior"]["probs"].as_array().unwrap();
        let s: f64 = p.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9, "{turn}");
    }
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(compare_policies(0, 0.1, 2, 1).is_err());
    assert!(compare_policies(10, -1.0, 2, 1).is_err());
    assert!(archetype_slices("nope", 100, 1).is_err());
    assert!(archetype_slices("default", 5, 1).is_err());
    assert!(episode_trace("greedy", 0.1, 2, 1, 0).is_err());
}
