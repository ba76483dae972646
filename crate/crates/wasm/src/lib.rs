//! Browser bindings. Every export takes plain arguments and returns a JSON
//! string; the `*_json` functions are the same operations for native callers.

use std::collections::HashMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use solvorder_core::group::{enumerate_closure, make_group, ElementCode, DEFAULT_CLOSURE_CAP};
use solvorder_core::harness::{cmd_fixtures, cmd_run, pcgs_view, ExperimentConfig};
use solvorder_core::protocol::ProtocolKind;
use solvorder_core::prover::ProverKind;
use solvorder_core::sampling::{
    chi_square_statistic, tv_distance_empirical, ExactSampler, Sampler, SamplerMode, SubproductSampler,
};

/// Keeps the page responsive: the demo refuses anything bigger.
const DEMO_CAP: usize = 100_000;
const MAX_TRIALS: u64 = 20_000;
const MAX_DRAWS: u64 = 1_000_000;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn parse_primes(csv: &str) -> Result<Option<Vec<u64>>, String> {
    let csv = csv.trim();
    if csv.is_empty() {
        return Ok(None);
    }
    csv.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|e| format!("bad prime {p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

pub fn fixtures_json() -> Result<String, String> {
    cmd_fixtures(DEFAULT_CLOSURE_CAP).map(|f| to_json(&f)).map_err(|e| e.to_string())
}

/// A soundness or completeness campaign; returns the report.
pub fn run_experiment_json(
    group: &str,
    protocol: &str,
    prover: &str,
    primes: &str,
    trials: u64,
    repetitions: usize,
    seed: u64,
) -> Result<String, String> {
    if trials > MAX_TRIALS {
        return Err(format!("at most {MAX_TRIALS} trials in the browser"));
    }
    let protocol: ProtocolKind = protocol.parse()?;
    let mut config = ExperimentConfig::new(group, protocol, prover.parse::<ProverKind>()?);
    config.primes = match protocol {
        ProtocolKind::TwoMessage => parse_primes(primes)?,
        ProtocolKind::ThreeMessage => None,
    };
    config.trials = trials;
    config.repetitions = repetitions;
    config.seed = seed;
    config.protocol_config.cap = DEMO_CAP;
    let (report, _) = cmd_run(&config).map_err(|e| e.to_string())?;
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct Bar {
    element: String,
    code: ElementCode,
    count: u64,
}

#[derive(Serialize)]
struct Histogram {
    mode: SamplerMode,
    epsilon: f64,
    draws: u64,
    order: usize,
    tv_distance: f64,
    chi_square: f64,
    queries_per_draw: f64,
    bars: Vec<Bar>,
}

/// Draws from the whole group and returns per-element counts.
pub fn sampler_histogram_json(group: &str, mode: &str, epsilon: f64, draws: u64, seed: u64) -> Result<String, String> {
    if draws == 0 || draws > MAX_DRAWS {
        return Err(format!("draws must be in 1..={MAX_DRAWS}"));
    }
    let mode: SamplerMode = mode.parse()?;
    let g = make_group(&group.parse().map_err(|e: solvorder_core::group::GroupError| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let whole = enumerate_closure(&g.fork(), g.generators(), DEMO_CAP).map_err(|e| e.to_string())?;
    let oracle = g.fork();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = match mode {
        SamplerMode::Exact => Sampler::Exact(ExactSampler::from_elements(whole.iter().copied().collect())),
        SamplerMode::Subproduct => Sampler::Subproduct(
            SubproductSampler::new(&oracle, g.generators(), epsilon, DEMO_CAP, &mut rng).map_err(|e| e.to_string())?,
        ),
    };
    let setup = oracle.queries().total();
    let mut counts: HashMap<ElementCode, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sampler.draw(&oracle, &mut rng)).or_default() += 1;
    }
    let bars = whole
        .iter()
        .map(|&code| Bar {
            element: g.concrete(code).to_string(),
            code,
            count: counts.get(&code).copied().unwrap_or(0),
        })
        .collect();
    Ok(to_json(&Histogram {
        mode,
        epsilon,
        draws,
        order: whole.len(),
        tv_distance: tv_distance_empirical(&counts, &whole).map_err(|e| e.to_string())?,
        chi_square: chi_square_statistic(&counts, &whole).map_err(|e| e.to_string())?,
        queries_per_draw: (oracle.queries().total() - setup) as f64 / draws as f64,
        bars,
    }))
}

/// The PCGS and its refinement by the given primes (all primes of `|G|` when empty).
pub fn refinement_json(group: &str, primes: &str) -> Result<String, String> {
    let primes = parse_primes(primes)?;
    pcgs_view(group, primes.as_deref(), DEMO_CAP).map(|v| to_json(&v)).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn fixtures() -> Result<String, JsValue> {
    fixtures_json().map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn run_experiment(
    group: &str,
    protocol: &str,
    prover: &str,
    primes: &str,
    trials: u32,
    repetitions: u32,
    seed: u32,
) -> Result<String, JsValue> {
    run_experiment_json(group, protocol, prover, primes, trials.into(), repetitions as usize, seed.into())
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sampler_histogram(group: &str, mode: &str, epsilon: f64, draws: u32, seed: u32) -> Result<String, JsValue> {
    sampler_histogram_json(group, mode, epsilon, draws.into(), seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn refinement(group: &str, primes: &str) -> Result<String, JsValue> {
    refinement_json(group, primes).map_err(|e| JsValue::from_str(&e))
}
