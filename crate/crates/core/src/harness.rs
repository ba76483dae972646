//! Monte-Carlo experiment driver and the fixture catalog.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{derive_seed, prime_factors};
use crate::group::{enumerate_closure, make_group, ConcreteGroupSpec, ElementCode, GroupError, GroupOracle};
use crate::polycyclic::{compute_pcgs, refine_with_primes, validate_refinement, NormalForm, PcgsError};
use crate::protocol::{execute, run_repeated, Combiner, Outcome, ProtocolConfig, ProtocolKind, Transcript};
use crate::prover::ProverKind;
use crate::sampling::{sampler_test, SamplerConfig, SamplerReport, SamplingError};

const TRIAL_STREAM: u64 = 4;

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pcgs(#[from] PcgsError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub group: String,
    pub protocol: ProtocolKind,
    pub prover: ProverKind,
    /// Required for 2msg, rejected for 3msg.
    pub primes: Option<Vec<u64>>,
    pub trials: u64,
    pub repetitions: usize,
    pub combiner: Combiner,
    pub seed: u64,
    pub protocol_config: ProtocolConfig,
}

impl ExperimentConfig {
    pub fn new(group: &str, protocol: ProtocolKind, prover: ProverKind) -> Self {
        ExperimentConfig {
            group: group.to_string(),
            protocol,
            prover,
            primes: None,
            trials: 100,
            repetitions: 1,
            combiner: Combiner::Unanimous,
            seed: 0,
            protocol_config: ProtocolConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<ConcreteGroupSpec, HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(HarnessError::Config("repetitions must be at least 1".into()));
        }
        match (self.protocol, &self.primes) {
            (ProtocolKind::TwoMessage, None) => {
                return Err(HarnessError::Config("2msg needs --primes".into()));
            }
            (ProtocolKind::ThreeMessage, Some(_)) => {
                return Err(HarnessError::Config("3msg takes no primes; the prover commits to them".into()));
            }
            _ => {}
        }
        Ok(self.group.parse()?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialClass {
    CorrectOrder,
    WrongOrder,
    Abort,
}

pub fn classify(outcome: &Outcome, order: &BigUint) -> TrialClass {
    match outcome.order() {
        Some(v) if v == order => TrialClass::CorrectOrder,
        Some(_) => TrialClass::WrongOrder,
        None => TrialClass::Abort,
    }
}

/// One line of the per-run log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub class: TrialClass,
    pub outcome: Outcome,
    pub transcripts: Vec<Transcript>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub correct_order: u64,
    pub wrong_order: u64,
    pub abort: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.correct_order + self.wrong_order + self.abort
    }

    pub fn add(&mut self, class: TrialClass) {
        match class {
            TrialClass::CorrectOrder => self.correct_order += 1,
            TrialClass::WrongOrder => self.wrong_order += 1,
            TrialClass::Abort => self.abort += 1,
        }
    }
}

/// A rate with its 95% Wilson score interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

pub fn wilson_interval(successes: u64, n: u64) -> Rate {
    if n == 0 {
        return Rate { rate: 0.0, low: 0.0, high: 1.0 };
    }
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == n { 1.0 } else { (center + half).min(1.0) };
    Rate { rate: p, low, high }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub correct_order: Rate,
    pub wrong_order: Rate,
    pub abort: Rate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: f64,
    pub mean_trial_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub group: String,
    pub protocol: ProtocolKind,
    pub prover: ProverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<u64>>,
    pub trials: u64,
    pub repetitions: usize,
    pub combiner: Combiner,
    pub seed: u64,
    /// `|G|` by closure enumeration.
    pub group_order: String,
    pub counts: OutcomeCounts,
    pub rates: Rates,
    /// Abort stage names with counts.
    pub abort_reasons: BTreeMap<String, u64>,
    /// Wrong orders with counts.
    pub wrong_orders: BTreeMap<String, u64>,
    pub mean_verifier_queries: f64,
    pub mean_prover_queries: f64,
    pub mean_message_bytes: f64,
    /// Wall-clock figures; only filled when asked for, since they break
    /// reproducibility of the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl Report {
    /// Rebuilds the report from per-run records.
    pub fn from_records(config: &ExperimentConfig, order: &BigUint, records: &[TrialRecord]) -> Report {
        let mut counts = OutcomeCounts::default();
        let mut abort_reasons = BTreeMap::new();
        let mut wrong_orders = BTreeMap::new();
        let (mut vq, mut pq, mut bytes) = (0u64, 0u64, 0u64);
        for r in records {
            counts.add(r.class);
            match &r.outcome {
                Outcome::Abort(reason) => *abort_reasons.entry(abort_stage(reason)).or_default() += 1,
                Outcome::Order(v) if r.class == TrialClass::WrongOrder => {
                    *wrong_orders.entry(v.to_string()).or_default() += 1
                }
                Outcome::Order(_) => {}
            }
            for t in &r.transcripts {
                vq += t.verifier_queries.total();
                pq += t.prover_queries.total();
                bytes += t.message_bytes() as u64;
            }
        }
        let n = counts.total();
        let mean = |x: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        Report {
            group: config.group.clone(),
            protocol: config.protocol,
            prover: config.prover,
            primes: config.primes.clone(),
            trials: config.trials,
            repetitions: config.repetitions,
            combiner: config.combiner,
            seed: config.seed,
            group_order: order.to_string(),
            counts,
            rates: Rates {
                correct_order: wilson_interval(counts.correct_order, n),
                wrong_order: wilson_interval(counts.wrong_order, n),
                abort: wilson_interval(counts.abort, n),
            },
            abort_reasons,
            wrong_orders,
            mean_verifier_queries: mean(vq),
            mean_prover_queries: mean(pq),
            mean_message_bytes: mean(bytes),
            timing: None,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

fn abort_stage(reason: &crate::protocol::AbortReason) -> String {
    match serde_json::to_value(reason) {
        Ok(serde_json::Value::Object(map)) => {
            map.get("stage").and_then(|s| s.as_str()).unwrap_or("unknown").to_string()
        }
        _ => "unknown".into(),
    }
}

pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    derive_seed(seed, TRIAL_STREAM, trial)
}

/// One trial: a single execution, or a repetition block when `repetitions > 1`.
pub fn run_trial(config: &ExperimentConfig, group: &GroupOracle, order: &BigUint, trial: u64) -> TrialRecord {
    let seed = trial_seed(config.seed, trial);
    let primes = config.primes.as_deref().unwrap_or_default();
    let (outcome, transcripts) = if config.repetitions == 1 {
        let (o, t) = execute(config.protocol, group, primes, config.prover, seed, &config.protocol_config);
        (o, vec![t])
    } else {
        run_repeated(
            config.protocol,
            group,
            primes,
            config.prover,
            config.repetitions,
            config.combiner,
            seed,
            &config.protocol_config,
        )
    };
    TrialRecord { trial, seed, class: classify(&outcome, order), outcome, transcripts }
}

fn run_trials(config: &ExperimentConfig, group: &GroupOracle, order: &BigUint) -> Vec<TrialRecord> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..config.trials).into_par_iter().map(|i| run_trial(config, group, order, i)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..config.trials).map(|i| run_trial(config, group, order, i)).collect()
    }
}

/// `|G|` by closure enumeration on a private fork.
pub fn group_order(group: &GroupOracle, cap: usize) -> Result<u64, GroupError> {
    Ok(enumerate_closure(&group.fork(), group.generators(), cap)?.len() as u64)
}

/// Runs the campaign; records come back in trial order whatever the
/// scheduling.
pub fn cmd_run(config: &ExperimentConfig) -> Result<(Report, Vec<TrialRecord>), HarnessError> {
    let spec = config.validate()?;
    let group = make_group(&spec)?;
    let order = BigUint::from(group_order(&group, config.protocol_config.cap)?);
    let records = run_trials(config, &group, &order);
    Ok((Report::from_records(config, &order, &records), records))
}

/// Newline-delimited JSON, one record per line.
pub fn records_to_ndjson(records: &[TrialRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records always serialize"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub spec: &'static str,
    pub description: &'static str,
}

pub const FIXTURES: &[Fixture] = &[
    Fixture { name: "trivial", spec: "cyclic:1", description: "trivial group" },
    Fixture { name: "c12", spec: "cyclic:12", description: "cyclic group of order 12" },
    Fixture { name: "c3xc9", spec: "direct:cyclic:3,cyclic:9", description: "abelian 3-group of order 27" },
    Fixture { name: "s3", spec: "perm:3:(1 2),(1 2 3)", description: "symmetric group S3" },
    Fixture { name: "s4", spec: "perm:4:(1 2),(1 2 3 4)", description: "symmetric group S4" },
    Fixture { name: "d4", spec: "perm:4:(1 2 3 4),(1 3)", description: "dihedral group of order 8" },
    Fixture { name: "c12-relabeled", spec: "cyclic:12@seed=7", description: "c12 under a random relabeling" },
    Fixture {
        name: "s4-relabeled",
        spec: "perm:4:(1 2),(1 2 3 4)@seed=11",
        description: "s4 under a random relabeling",
    },
    Fixture { name: "a5", spec: "perm:5:(1 2 3),(1 2 3 4 5)", description: "alternating group A5, not solvable" },
];

/// Fixtures used by the protocol campaigns.
pub const PROTOCOL_FIXTURES: [&str; 5] = ["c12", "c3xc9", "s3", "s4", "d4"];

pub fn fixture(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureInfo {
    pub name: String,
    pub spec: String,
    pub description: String,
    pub order: u64,
    pub solvable: bool,
    pub primes: Vec<u64>,
    pub encoding_length: u32,
    pub generators: usize,
}

pub fn fixture_info(f: &Fixture, cap: usize) -> Result<FixtureInfo, HarnessError> {
    let group = make_group(&f.spec.parse()?)?;
    let order = group_order(&group, cap)?;
    let solvable = match compute_pcgs(&group.fork(), cap) {
        Ok(_) => true,
        Err(PcgsError::NotSolvable { .. }) => false,
        Err(e) => return Err(e.into()),
    };
    Ok(FixtureInfo {
        name: f.name.into(),
        spec: f.spec.into(),
        description: f.description.into(),
        order,
        solvable,
        primes: prime_factors(order),
        encoding_length: group.encoding_length(),
        generators: group.generators().len(),
    })
}

/// The built-in catalog with orders and solvability.
pub fn cmd_fixtures(cap: usize) -> Result<Vec<FixtureInfo>, HarnessError> {
    FIXTURES.iter().map(|f| fixture_info(f, cap)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub code: ElementCode,
    pub element: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prime: Option<u64>,
    pub quotient_order: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcgsView {
    pub group: String,
    pub order: u64,
    pub encoding_length: u32,
    pub primes: Vec<u64>,
    pub pcgs: Vec<SequenceEntry>,
    pub refined: Vec<SequenceEntry>,
}

fn entries(group: &GroupOracle, nf: &NormalForm, primes: Option<&[u64]>) -> Vec<SequenceEntry> {
    nf.generators()
        .iter()
        .zip(nf.quotient_orders())
        .enumerate()
        .map(|(i, (&code, &m))| SequenceEntry {
            code,
            element: group.concrete(code).to_string(),
            prime: primes.map(|p| p[i]),
            quotient_order: m,
        })
        .collect()
}

/// The PCGS and its refinement by `primes` (default: the primes of `|G|`),
/// validated against the quotient-order invariant.
pub fn pcgs_view(spec: &str, primes: Option<&[u64]>, cap: usize) -> Result<PcgsView, HarnessError> {
    let group = make_group(&spec.parse()?)?;
    let order = group_order(&group, cap)?;
    let primes = primes.map_or_else(|| prime_factors(order), <[u64]>::to_vec);
    let pcgs = compute_pcgs(&group, cap)?;
    let refined = refine_with_primes(&group, &pcgs, &primes, group.encoding_length())?;
    let r = refined.primes.clone().unwrap_or_default();
    let base_nf = NormalForm::build(&group, &pcgs.elements, cap)?;
    let nf = NormalForm::build(&group, &refined.elements, cap)?;
    validate_refinement(&nf, &r)?;
    let mut sorted = primes;
    sorted.sort_unstable();
    Ok(PcgsView {
        group: group.spec().to_string(),
        order,
        encoding_length: group.encoding_length(),
        primes: sorted,
        pcgs: entries(&group, &base_nf, None),
        refined: entries(&group, &nf, Some(&r)),
    })
}

/// Sampler diagnostics on the group's own generators.
pub fn cmd_sampler_test(
    spec: &str,
    config: &SamplerConfig,
    draws: u64,
    cap: usize,
) -> Result<SamplerReport, HarnessError> {
    let group = make_group(&spec.parse()?)?;
    Ok(sampler_test(&group, group.generators(), config, draws, cap)?)
}
