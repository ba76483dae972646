use serde_json::Value;

use solvorder_wasm::{fixtures_json, refinement_json, run_experiment_json, sampler_histogram_json};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.expect("call succeeds")).unwrap()
}

#[test]
fn fixture_catalog() {
    let v = parse(fixtures_json());
    assert!(v.as_array().unwrap().iter().any(|f| f["spec"] == "cyclic:12" && f["order"] == 12));
}

#[test]
fn campaign() {
    let v = parse(run_experiment_json("cyclic:12", "2msg", "honest", "2, 3", 50, 1, 1));
    assert_eq!(v["counts"]["correct_order"], 50);
    let v = parse(run_experiment_json("cyclic:12", "2msg", "guess_inflate", "2,3", 400, 1, 1));
    assert_eq!(v["counts"]["correct_order"], 0);
    // primes are ignored for 3msg
    let v = parse(run_experiment_json("perm:3:(1 2),(1 2 3)", "3msg", "honest", "2,3", 10, 1, 0));
    assert_eq!(v["counts"]["correct_order"], 10);
    assert!(run_experiment_json("cyclic:12", "2msg", "honest", "", 10, 1, 0).is_err());
    assert!(run_experiment_json("cyclic:12", "2msg", "honest", "2,x", 10, 1, 0).is_err());
    assert!(run_experiment_json("cyclic:12", "3msg", "honest", "", 1_000_000, 1, 0).is_err());
}

#[test]
fn histogram() {
    let v = parse(sampler_histogram_json("perm:3:(1 2),(1 2 3)", "exact", 0.0, 6000, 2));
    let bars = v["bars"].as_array().unwrap();
    assert_eq!(bars.len(), 6);
    assert_eq!(bars.iter().map(|b| b["count"].as_u64().unwrap()).sum::<u64>(), 6000);
    assert_eq!(bars[0]["element"], "()");
    let v = parse(sampler_histogram_json("cyclic:12", "subproduct", 1.0 / 256.0, 20_000, 2));
    assert!(v["tv_distance"].as_f64().unwrap() < 0.05);
    assert!(sampler_histogram_json("cyclic:12", "subproduct", 0.0, 10, 0).is_err());
    assert!(sampler_histogram_json("cyclic:12", "exact", 0.0, 0, 0).is_err());
}

#[test]
fn refinement_view() {
    let v = parse(refinement_json("cyclic:12", ""));
    assert_eq!(v["primes"], serde_json::json!([2, 3]));
    assert_eq!(v["refined"].as_array().unwrap().len(), 8);
    assert!(refinement_json("cyclic:12", "3").is_err());
}
