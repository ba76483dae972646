//! Verifier state machines for the 2-message and 3-message order protocols,
//! the message codec, transcripts and parallel repetition.
//!
//! Every message crosses the party boundary as canonical JSON: element codes
//! are hex strings, exponents and primes are decimal numbers. The receiver
//! decodes the text it was handed, so a shape or type error on the wire
//! becomes an abort rather than a panic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arith::{derive_seed, is_prime};
use crate::group::{ElementCode, Exponent, GroupError, GroupOracle, QueryCounts, DEFAULT_CLOSURE_CAP};
use crate::polycyclic::{compute_pcgs, refine_with_primes, validate_refinement, NormalForm};
use crate::prover::{Commitment, Prover, ProverKind, Response};
use crate::sampling::SubproductSampler;

const VERIFIER_STREAM: u64 = 1;
const PROVER_STREAM: u64 = 2;
const REPETITION_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "2msg")]
    TwoMessage,
    #[serde(rename = "3msg")]
    ThreeMessage,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolKind::TwoMessage => "2msg",
            ProtocolKind::ThreeMessage => "3msg",
        })
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2msg" | "2" => Ok(ProtocolKind::TwoMessage),
            "3msg" | "3" => Ok(ProtocolKind::ThreeMessage),
            other => Err(format!("unknown protocol {other:?} (expected 2msg or 3msg)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Enumeration cap for the brute-force stand-ins.
    pub cap: usize,
    /// Subgroups up to this size are sampled exactly; larger ones use random
    /// subproducts with `epsilon = 2^{-2n}`.
    pub exact_sampler_limit: usize,
    /// `c` in the 3-message length bound `t <= c * n * s * ceil(log2 cap)`.
    pub round_bound_factor: u64,
    /// Keep full message bodies in transcripts.
    pub keep_bodies: bool,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            cap: DEFAULT_CLOSURE_CAP,
            exact_sampler_limit: 10_000,
            round_bound_factor: 8,
            keep_bodies: false,
        }
    }
}

impl ProtocolConfig {
    /// Largest committed sequence the 3-message verifier accepts.
    pub fn round_bound(&self, n: u32, generators: usize) -> u64 {
        let cap_bits = (self.cap.max(2) as f64).log2().ceil() as u64;
        self.round_bound_factor * u64::from(n.max(1)) * generators.max(1) as u64 * cap_bits
    }
}

/// Second message. In the 2-message protocol it also carries the sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Challenge {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elements: Option<Vec<ElementCode>>,
    pub masked: Vec<ElementCode>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Commitment,
    Challenge,
    Response,
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MessageKind::Commitment => "commitment",
            MessageKind::Challenge => "challenge",
            MessageKind::Response => "response",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CommitmentFailure {
    #[error("bad shape: {detail}")]
    Shape { detail: String },
    #[error("element {index} is not a well-formed code")]
    NotWellFormed { index: usize },
    #[error("{t} elements exceed the bound {bound}")]
    TooManyRounds { t: usize, bound: u64 },
    #[error("r_{index} = {value} is not prime")]
    NotPrime { index: usize, value: u64 },
    #[error("{table} exponent exceeds 2^n")]
    ExponentTooLarge { table: String },
    #[error("generator {index} does not match its alpha word")]
    Generator { index: usize },
    #[error("h_{index}^r_{index} does not match its beta word")]
    Power { index: usize },
    #[error("conjugate of h_{other} by h_{index} does not match its gamma word")]
    Conjugate { index: usize, other: usize },
}

/// Why the verifier output ⊥.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum AbortReason {
    #[error("verifier setup failed: {detail}")]
    Setup { detail: String },
    #[error("prover failed: {detail}")]
    Prover { detail: String },
    #[error("malformed {message}: {detail}")]
    Malformed { message: MessageKind, detail: String },
    #[error("commitment rejected: {failure}")]
    Commitment { failure: CommitmentFailure },
    #[error("round {round}: no valid decomposition and b != s")]
    Round { round: usize },
    #[error("repetitions disagree")]
    Disagreement { orders: Vec<String>, aborts: usize },
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(D::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Order(#[serde(with = "decimal")] BigUint),
    Abort(AbortReason),
}

impl Outcome {
    pub fn order(&self) -> Option<&BigUint> {
        match self {
            Outcome::Order(v) => Some(v),
            Outcome::Abort(_) => None,
        }
    }

    pub fn is_abort(&self) -> bool {
        matches!(self, Outcome::Abort(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Order(v) => write!(f, "order {v}"),
            Outcome::Abort(r) => write!(f, "abort ({r})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Party {
    Verifier,
    Prover,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub from: Party,
    pub kind: MessageKind,
    pub bytes: usize,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub protocol: ProtocolKind,
    pub group: String,
    pub encoding_length: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prover: Option<String>,
    pub seed: u64,
    pub messages: Vec<MessageRecord>,
    pub verifier_queries: QueryCounts,
    pub prover_queries: QueryCounts,
    pub outcome: Outcome,
}

impl Transcript {
    fn new(protocol: ProtocolKind, group: &GroupOracle, seed: u64) -> Self {
        Transcript {
            protocol,
            group: group.spec().to_string(),
            encoding_length: group.encoding_length(),
            prover: None,
            seed,
            messages: Vec::new(),
            verifier_queries: QueryCounts::default(),
            prover_queries: QueryCounts::default(),
            outcome: Outcome::Order(BigUint::from(1u8)),
        }
    }

    pub fn message_bytes(&self) -> usize {
        self.messages.iter().map(|m| m.bytes).sum()
    }

    /// Canonical single-line JSON.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("transcripts always serialize")
    }

    /// Encodes `msg`, logs it, and returns the wire text.
    fn send<T: Serialize>(&mut self, from: Party, kind: MessageKind, msg: &T, keep_body: bool) -> String {
        let text = encode_message(msg);
        self.messages.push(MessageRecord {
            from,
            kind,
            bytes: text.len(),
            sha256: format!("{:x}", Sha256::digest(text.as_bytes())),
            body: keep_body.then(|| text.clone()),
        });
        text
    }
}

/// Canonical wire form of a message.
pub fn encode_message<T: Serialize>(msg: &T) -> String {
    serde_json::to_string(msg).expect("messages always serialize")
}

/// Parses a wire message; failures are the caller's abort.
pub fn decode_message<T: DeserializeOwned>(kind: MessageKind, text: &str) -> Result<T, AbortReason> {
    serde_json::from_str(text).map_err(|e| AbortReason::Malformed { message: kind, detail: e.to_string() })
}

/// How the verifier treats response exponents before evaluating words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExponentPolicy {
    /// Reduce `a_{i,j}` modulo the known `m_j`.
    Reduce(Vec<u64>),
    /// Reject any exponent `>= 2^n`.
    Bounded(u32),
}

impl ExponentPolicy {
    fn apply(&self, row: &[Exponent]) -> Result<Vec<Exponent>, String> {
        match self {
            ExponentPolicy::Reduce(m) => Ok(row.iter().zip(m).map(|(&a, &m)| a % Exponent::from(m.max(1))).collect()),
            ExponentPolicy::Bounded(n) => {
                if row.iter().all(|&a| exponent_fits(a, *n)) {
                    Ok(row.to_vec())
                } else {
                    Err(format!("exponent exceeds 2^{n}"))
                }
            }
        }
    }
}

fn exponent_fits(a: Exponent, n: u32) -> bool {
    n >= 128 || a >> n == 0
}

/// Verifier's private state between the challenge and the response.
#[derive(Clone, Debug)]
pub struct VerifierState {
    elements: Vec<ElementCode>,
    primes: Vec<u64>,
    secret_bits: Vec<bool>,
    masks: Vec<ElementCode>,
    policy: ExponentPolicy,
}

impl VerifierState {
    pub fn elements(&self) -> &[ElementCode] {
        &self.elements
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// The bits `s_i`.
    pub fn secret_bits(&self) -> &[bool] {
        &self.secret_bits
    }

    /// The uniform elements `x_i`.
    pub fn masks(&self) -> &[ElementCode] {
        &self.masks
    }

    pub fn policy(&self) -> &ExponentPolicy {
        &self.policy
    }
}

/// Source of the `x_i`.
enum RoundSampler {
    Table(NormalForm),
    Subproduct { epsilon: f64, cap: usize },
}

impl RoundSampler {
    fn choose(group: &GroupOracle, table: Option<NormalForm>, config: &ProtocolConfig) -> Self {
        match table {
            Some(nf) if nf.order() <= config.exact_sampler_limit => RoundSampler::Table(nf),
            _ => RoundSampler::Subproduct { epsilon: 2f64.powi(-2 * group.encoding_length() as i32), cap: config.cap },
        }
    }
}

/// Draws `s_i` and `x_i ∈ H_{i-1}` for every round and masks `h_i^{s_i} x_i`.
fn issue_challenge(
    group: &GroupOracle,
    elements: &[ElementCode],
    sampler: &RoundSampler,
    rng: &mut ChaCha8Rng,
) -> (Vec<bool>, Vec<ElementCode>, Vec<ElementCode>) {
    let t = elements.len();
    let mut bits = Vec::with_capacity(t);
    let mut masks = Vec::with_capacity(t);
    let mut masked = Vec::with_capacity(t);
    for (i, &h) in elements.iter().enumerate() {
        let s: bool = rng.gen();
        let x = match sampler {
            RoundSampler::Table(nf) => {
                let sub = nf.subgroup(i);
                sub[rng.gen_range(0..sub.len())]
            }
            RoundSampler::Subproduct { epsilon, cap } => {
                SubproductSampler::new(group, &elements[..i], *epsilon, *cap, rng)
                    .expect("epsilon is in (0, 1)")
                    .draw(group, rng)
            }
        };
        bits.push(s);
        masks.push(x);
        masked.push(if s { group.product(h, x) } else { x });
    }
    (bits, masks, masked)
}

fn verifier_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, VERIFIER_STREAM, 0))
}

fn setup_failure(e: impl fmt::Display) -> AbortReason {
    AbortReason::Setup { detail: e.to_string() }
}

/// Fig. 1 Steps 1–3: refine a PCGS with `primes`, then mask.
pub fn verifier_setup_2msg(
    group: &GroupOracle,
    primes: &[u64],
    seed: u64,
    config: &ProtocolConfig,
) -> Result<(VerifierState, Challenge), AbortReason> {
    let pcgs = compute_pcgs(group, config.cap).map_err(setup_failure)?;
    let refined = refine_with_primes(group, &pcgs, primes, group.encoding_length()).map_err(setup_failure)?;
    let elements = refined.elements;
    let r = refined.primes.unwrap_or_default();
    let table = match NormalForm::build(group, &elements, config.cap) {
        Ok(nf) => {
            validate_refinement(&nf, &r).map_err(setup_failure)?;
            Some(nf)
        }
        Err(GroupError::ClosureOverflow { .. }) => None,
        Err(e) => return Err(setup_failure(e)),
    };
    let policy = match &table {
        Some(nf) => ExponentPolicy::Reduce(nf.quotient_orders().to_vec()),
        None => ExponentPolicy::Bounded(group.encoding_length()),
    };
    let sampler = RoundSampler::choose(group, table, config);
    let (secret_bits, masks, masked) = issue_challenge(group, &elements, &sampler, &mut verifier_rng(seed));
    let challenge = Challenge { elements: Some(elements.clone()), masked };
    Ok((VerifierState { elements, primes: r, secret_bits, masks, policy }, challenge))
}

fn check_shape(c: &Commitment, s: usize) -> Result<(), String> {
    let t = c.elements.len();
    if c.primes.len() != t {
        return Err(format!("{} primes for {t} elements", c.primes.len()));
    }
    if c.alpha.len() != s || c.alpha.iter().any(|row| row.len() != t) {
        return Err(format!("alpha must be {s} rows of {t}"));
    }
    if c.beta.len() != t || c.beta.iter().enumerate().any(|(i, row)| row.len() != i) {
        return Err("beta row i must have i entries".into());
    }
    let gamma_ok = c.gamma.len() == t
        && c.gamma.iter().enumerate().all(|(i, rows)| rows.len() == i && rows.iter().all(|row| row.len() == i));
    if !gamma_ok {
        return Err("gamma row i must be i words of i entries".into());
    }
    Ok(())
}

/// Fig. 2 Step 1.
pub fn verifier_check_commitment(
    group: &GroupOracle,
    c: &Commitment,
    config: &ProtocolConfig,
) -> Result<(), CommitmentFailure> {
    let gens = group.generators();
    let n = group.encoding_length();
    check_shape(c, gens.len()).map_err(|detail| CommitmentFailure::Shape { detail })?;
    let t = c.elements.len();
    let bound = config.round_bound(n, gens.len());
    if t as u64 > bound {
        return Err(CommitmentFailure::TooManyRounds { t, bound });
    }
    if let Some(index) = c.elements.iter().position(|&h| !group.is_well_formed(h)) {
        return Err(CommitmentFailure::NotWellFormed { index: index + 1 });
    }
    if let Some((i, &value)) = c.primes.iter().enumerate().find(|(_, &r)| !is_prime(r)) {
        return Err(CommitmentFailure::NotPrime { index: i + 1, value });
    }
    let too_large = |table: &str| CommitmentFailure::ExponentTooLarge { table: table.into() };
    if !c.alpha.iter().flatten().all(|&a| exponent_fits(a, n)) {
        return Err(too_large("alpha"));
    }
    if !c.beta.iter().flatten().all(|&a| exponent_fits(a, n)) {
        return Err(too_large("beta"));
    }
    if !c.gamma.iter().flatten().flatten().all(|&a| exponent_fits(a, n)) {
        return Err(too_large("gamma"));
    }
    let h = &c.elements;
    let word = |len: usize, exps: &[Exponent]| group.eval_word(&h[..len], exps).expect("shape checked");
    for (i, (&g, row)) in gens.iter().zip(&c.alpha).enumerate() {
        if word(t, row) != g {
            return Err(CommitmentFailure::Generator { index: i + 1 });
        }
    }
    for (i, (&h_i, &r_i)) in h.iter().zip(&c.primes).enumerate() {
        if group.power(h_i, Exponent::from(r_i)) != word(i, &c.beta[i]) {
            return Err(CommitmentFailure::Power { index: i + 1 });
        }
    }
    for i in 1..t {
        let inv = group.inverse(h[i]);
        for l in 0..i {
            if group.product(group.product(h[i], h[l]), inv) != word(i, &c.gamma[i][l]) {
                return Err(CommitmentFailure::Conjugate { index: i + 1, other: l + 1 });
            }
        }
    }
    Ok(())
}

/// Fig. 2 Steps 2–3 on an accepted commitment.
pub fn verifier_challenge_3msg(
    group: &GroupOracle,
    c: &Commitment,
    seed: u64,
    config: &ProtocolConfig,
) -> (VerifierState, Challenge) {
    let table = NormalForm::build(group, &c.elements, config.exact_sampler_limit).ok();
    let sampler = RoundSampler::choose(group, table, config);
    let (secret_bits, masks, masked) = issue_challenge(group, &c.elements, &sampler, &mut verifier_rng(seed));
    let state = VerifierState {
        elements: c.elements.clone(),
        primes: c.primes.clone(),
        secret_bits,
        masks,
        policy: ExponentPolicy::Bounded(group.encoding_length()),
    };
    (state, Challenge { elements: None, masked })
}

fn check_response_shape(resp: &Response, t: usize) -> Result<(), String> {
    if resp.bits.len() != t || resp.exponents.len() != t {
        return Err(format!("expected {t} bits and {t} exponent rows"));
    }
    if resp.bits.iter().any(|&b| b > 1) {
        return Err("bits must be 0 or 1".into());
    }
    if let Some(i) = resp.exponents.iter().enumerate().position(|(i, row)| row.len() != i) {
        return Err(format!("exponent row {} must have {i} entries", i + 1));
    }
    Ok(())
}

/// Fig. 1 Steps 5–6.
pub fn verifier_finalize(group: &GroupOracle, state: &VerifierState, resp: &Response) -> Outcome {
    let t = state.elements.len();
    let malformed = |detail: String| Outcome::Abort(AbortReason::Malformed { message: MessageKind::Response, detail });
    if let Err(detail) = check_response_shape(resp, t) {
        return malformed(detail);
    }
    let mut order = BigUint::from(1u8);
    for i in 0..t {
        let exps = match state.policy.apply(&resp.exponents[i]) {
            Ok(e) => e,
            Err(detail) => return malformed(detail),
        };
        let word = group.eval_word(&state.elements[..i], &exps).expect("shape checked");
        if word == state.elements[i] {
            continue;
        }
        if (resp.bits[i] == 1) == state.secret_bits[i] {
            order *= state.primes[i];
        } else {
            return Outcome::Abort(AbortReason::Round { round: i + 1 });
        }
    }
    Outcome::Order(order)
}

/// Prover-side handling of a challenge text.
fn prover_answer(
    prover: &mut dyn Prover,
    group: &GroupOracle,
    elements: Option<&[ElementCode]>,
    text: &str,
) -> Result<Response, AbortReason> {
    let challenge: Challenge = decode_message(MessageKind::Challenge, text)?;
    let elements = elements.or(challenge.elements.as_deref()).unwrap_or_default();
    prover.respond(group, elements, &challenge.masked).map_err(|e| AbortReason::Prover { detail: e.to_string() })
}

struct Parties {
    verifier: GroupOracle,
    prover: GroupOracle,
}

impl Parties {
    fn new(group: &GroupOracle) -> Self {
        Parties { verifier: group.fork(), prover: group.fork() }
    }

    fn close(&self, mut transcript: Transcript, outcome: Outcome) -> (Outcome, Transcript) {
        transcript.verifier_queries = self.verifier.queries();
        transcript.prover_queries = self.prover.queries();
        transcript.outcome = outcome.clone();
        (outcome, transcript)
    }
}

/// Figure 1: the verifier knows the primes dividing `|G|`.
pub fn run_protocol_2msg(
    group: &GroupOracle,
    primes: &[u64],
    prover: &mut dyn Prover,
    seed: u64,
    config: &ProtocolConfig,
) -> (Outcome, Transcript) {
    let parties = Parties::new(group);
    let mut transcript = Transcript::new(ProtocolKind::TwoMessage, group, seed);
    let (state, challenge) = match verifier_setup_2msg(&parties.verifier, primes, seed, config) {
        Ok(v) => v,
        Err(reason) => return parties.close(transcript, Outcome::Abort(reason)),
    };
    let text = transcript.send(Party::Verifier, MessageKind::Challenge, &challenge, config.keep_bodies);
    let response = match prover_answer(prover, &parties.prover, None, &text) {
        Ok(r) => r,
        Err(reason) => return parties.close(transcript, Outcome::Abort(reason)),
    };
    let text = transcript.send(Party::Prover, MessageKind::Response, &response, config.keep_bodies);
    let outcome = match decode_message::<Response>(MessageKind::Response, &text) {
        Ok(resp) => verifier_finalize(&parties.verifier, &state, &resp),
        Err(reason) => Outcome::Abort(reason),
    };
    parties.close(transcript, outcome)
}

/// Figure 2: the prover commits to the sequence, primes and certificates.
pub fn run_protocol_3msg(
    group: &GroupOracle,
    prover: &mut dyn Prover,
    seed: u64,
    config: &ProtocolConfig,
) -> (Outcome, Transcript) {
    let parties = Parties::new(group);
    let mut transcript = Transcript::new(ProtocolKind::ThreeMessage, group, seed);
    let commitment = match prover.commit(&parties.prover) {
        Ok(c) => c,
        Err(e) => return parties.close(transcript, Outcome::Abort(AbortReason::Prover { detail: e.to_string() })),
    };
    let text = transcript.send(Party::Prover, MessageKind::Commitment, &commitment, config.keep_bodies);
    let received: Commitment = match decode_message(MessageKind::Commitment, &text) {
        Ok(c) => c,
        Err(reason) => return parties.close(transcript, Outcome::Abort(reason)),
    };
    if let Err(failure) = verifier_check_commitment(&parties.verifier, &received, config) {
        return parties.close(transcript, Outcome::Abort(AbortReason::Commitment { failure }));
    }
    let (state, challenge) = verifier_challenge_3msg(&parties.verifier, &received, seed, config);
    let text = transcript.send(Party::Verifier, MessageKind::Challenge, &challenge, config.keep_bodies);
    let response = match prover_answer(prover, &parties.prover, Some(&commitment.elements), &text) {
        Ok(r) => r,
        Err(reason) => return parties.close(transcript, Outcome::Abort(reason)),
    };
    let text = transcript.send(Party::Prover, MessageKind::Response, &response, config.keep_bodies);
    let outcome = match decode_message::<Response>(MessageKind::Response, &text) {
        Ok(resp) => verifier_finalize(&parties.verifier, &state, &resp),
        Err(reason) => Outcome::Abort(reason),
    };
    parties.close(transcript, outcome)
}

/// One execution with a freshly built prover seeded from `seed`.
pub fn execute(
    protocol: ProtocolKind,
    group: &GroupOracle,
    primes: &[u64],
    prover: ProverKind,
    seed: u64,
    config: &ProtocolConfig,
) -> (Outcome, Transcript) {
    let mut p = prover.build(derive_seed(seed, PROVER_STREAM, 0), config.cap);
    let (outcome, mut transcript) = match protocol {
        ProtocolKind::TwoMessage => run_protocol_2msg(group, primes, p.as_mut(), seed, config),
        ProtocolKind::ThreeMessage => run_protocol_3msg(group, p.as_mut(), seed, config),
    };
    transcript.prover = Some(prover.name().to_string());
    (outcome, transcript)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    /// Every execution returns the same order, else ⊥.
    #[default]
    Unanimous,
    /// An order returned by a strict majority of executions, else ⊥.
    Majority,
}

impl FromStr for Combiner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unanimous" => Ok(Combiner::Unanimous),
            "majority" => Ok(Combiner::Majority),
            other => Err(format!("unknown combiner {other:?} (expected unanimous or majority)")),
        }
    }
}

impl fmt::Display for Combiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Combiner::Unanimous => "unanimous",
            Combiner::Majority => "majority",
        })
    }
}

/// Seed of execution `j` out of a repetition block seeded with `seed`; the
/// first execution uses `seed` itself.
pub fn repetition_seed(seed: u64, j: usize) -> u64 {
    if j == 0 {
        seed
    } else {
        derive_seed(seed, REPETITION_STREAM, j as u64)
    }
}

/// Folds the outcomes of independent executions.
pub fn combine(outcomes: &[Outcome], combiner: Combiner) -> Outcome {
    if let [single] = outcomes {
        return single.clone();
    }
    let mut tally: Vec<(&BigUint, usize)> = Vec::new();
    let mut aborts = 0;
    for o in outcomes {
        match o.order() {
            Some(v) => match tally.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += 1,
                None => tally.push((v, 1)),
            },
            None => aborts += 1,
        }
    }
    let winner = match combiner {
        Combiner::Unanimous => tally.first().filter(|(_, c)| *c == outcomes.len()),
        Combiner::Majority => tally.iter().find(|(_, c)| 2 * c > outcomes.len()),
    };
    match winner {
        Some((v, _)) => Outcome::Order((*v).clone()),
        None => Outcome::Abort(AbortReason::Disagreement {
            orders: tally.iter().map(|(v, _)| v.to_string()).collect(),
            aborts,
        }),
    }
}

/// `k` independent executions folded by `combiner`.
#[allow(clippy::too_many_arguments)]
pub fn run_repeated(
    protocol: ProtocolKind,
    group: &GroupOracle,
    primes: &[u64],
    prover: ProverKind,
    k: usize,
    combiner: Combiner,
    seed: u64,
    config: &ProtocolConfig,
) -> (Outcome, Vec<Transcript>) {
    assert!(k >= 1, "at least one repetition");
    let (outcomes, transcripts): (Vec<_>, Vec<_>) =
        (0..k).map(|j| execute(protocol, group, primes, prover, repetition_seed(seed, j), config)).unzip();
    (combine(&outcomes, combiner), transcripts)
}

/// Exact distribution of `h_{i+1}^{bit} x` for `x` uniform over `H_i`, as
/// counts over the enumerated subgroup.
pub fn masked_distribution(group: &GroupOracle, nf: &NormalForm, i: usize, bit: bool) -> BTreeMap<ElementCode, usize> {
    let h = nf.generators()[i];
    let mut out = BTreeMap::new();
    for &x in nf.subgroup(i) {
        let y = if bit { group.product(h, x) } else { x };
        *out.entry(y).or_default() += 1;
    }
    out
}

/// Total-variation distance between two count distributions.
pub fn variational_distance(p: &BTreeMap<ElementCode, usize>, q: &BTreeMap<ElementCode, usize>) -> f64 {
    let np: usize = p.values().sum();
    let nq: usize = q.values().sum();
    let keys: std::collections::BTreeSet<_> = p.keys().chain(q.keys()).collect();
    keys.into_iter()
        .map(|k| {
            let a = *p.get(k).unwrap_or(&0) as f64 / np.max(1) as f64;
            let b = *q.get(k).unwrap_or(&0) as f64 / nq.max(1) as f64;
            (a - b).abs()
        })
        .sum::<f64>()
        / 2.0
}
