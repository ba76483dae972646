//! Provers: the honest one, simulated with brute-force stand-ins for the
//! order, factoring, decomposition and membership algorithms, and a set of
//! cheating strategies used to measure soundness.
//!
//! Table layouts use 0-based rows. Row `i` of `beta`, `gamma` and the
//! response exponents belongs to `h_{i+1}` and has exactly `i` entries, one
//! per earlier element. Row 0 is therefore empty, and the `beta` check on it
//! reads `h_1^{r_1} = e`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{is_prime, prime_factors};
use crate::group::{enumerate_closure, ElementCode, Exponent, GroupError, GroupOracle};
use crate::polycyclic::{compute_pcgs, refine_with_primes, NormalForm, PcgsError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProverError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Pcgs(#[from] PcgsError),
    #[error("challenge has {got} entries, sequence has {expected}")]
    ChallengeLength { expected: usize, got: usize },
    #[error("element {0} has no decomposition over the committed sequence")]
    Undecomposable(ElementCode),
}

/// First message of the 3-message protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commitment {
    pub elements: Vec<ElementCode>,
    pub primes: Vec<u64>,
    /// `alpha[i]`: decomposition of generator `g_{i+1}` over `H_t` (`t` entries).
    pub alpha: Vec<Vec<Exponent>>,
    /// `beta[i]`: decomposition of `h_{i+1}^{r_{i+1}}` over `H_i` (`i` entries).
    pub beta: Vec<Vec<Exponent>>,
    /// `gamma[i][l]`: decomposition of `h_{i+1} h_{l+1} h_{i+1}^{-1}` over `H_i`.
    pub gamma: Vec<Vec<Vec<Exponent>>>,
}

/// Prover's answer to the challenge.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    /// One bit per round, 0 or 1.
    pub bits: Vec<u8>,
    /// `exponents[i]` has `i` entries: a claimed decomposition of `h_{i+1}` over `H_i`.
    pub exponents: Vec<Vec<Exponent>>,
}

pub trait Prover {
    /// Step 0 of the 3-message protocol.
    fn commit(&mut self, group: &GroupOracle) -> Result<Commitment, ProverError>;

    /// Answers the masked elements for the sequence `elements`.
    fn respond(
        &mut self,
        group: &GroupOracle,
        elements: &[ElementCode],
        challenge: &[ElementCode],
    ) -> Result<Response, ProverError>;
}

/// Order, prime set, refined sequence and normal-form tables, all by
/// enumeration.
fn honest_setup(group: &GroupOracle, cap: usize, extra_prime: bool) -> Result<(Vec<u64>, NormalForm), ProverError> {
    let order = enumerate_closure(group, group.generators(), cap)?.len() as u64;
    let mut primes = prime_factors(order);
    if extra_prime {
        let q = (2u64..).find(|&q| is_prime(q) && !order.is_multiple_of(q)).expect("primes are unbounded");
        primes.push(q);
    }
    let pcgs = compute_pcgs(group, cap)?;
    let refined = refine_with_primes(group, &pcgs, &primes, group.encoding_length())?;
    let nf = NormalForm::build(group, &refined.elements, cap)?;
    Ok((refined.primes.unwrap_or_default(), nf))
}

fn decompose(nf: &NormalForm, j: usize, h: ElementCode) -> Result<Vec<Exponent>, ProverError> {
    nf.decompose(j, h).map(|d| d.exponents).ok_or(ProverError::Undecomposable(h))
}

/// The α/β/γ tables for a sequence whose normal form is `nf`.
pub fn commitment_tables(group: &GroupOracle, nf: &NormalForm, primes: &[u64]) -> Result<Commitment, ProverError> {
    let h = nf.generators();
    let t = h.len();
    let alpha = group.generators().iter().map(|&g| decompose(nf, t, g)).collect::<Result<Vec<_>, _>>()?;
    let mut beta = Vec::with_capacity(t);
    let mut gamma = Vec::with_capacity(t);
    for i in 0..t {
        beta.push(decompose(nf, i, group.power(h[i], Exponent::from(primes[i])))?);
        let row = if i == 0 {
            Vec::new()
        } else {
            let inv = group.inverse(h[i]);
            (0..i)
                .map(|l| decompose(nf, i, group.product(group.product(h[i], h[l]), inv)))
                .collect::<Result<Vec<_>, _>>()?
        };
        gamma.push(row);
    }
    Ok(Commitment { elements: h.to_vec(), primes: primes.to_vec(), alpha, beta, gamma })
}

/// The honest first message, with the tables used to build it.
pub fn honest_commit(group: &GroupOracle, cap: usize) -> Result<(Commitment, NormalForm), ProverError> {
    let (primes, nf) = honest_setup(group, cap, false)?;
    Ok((commitment_tables(group, &nf, &primes)?, nf))
}

/// Honest answer: a masked element inside `H_{i-1}` gets bit 0 and the
/// decomposition of `h_i` over `H_{i-1}` (all zeros when there is none); one
/// outside gets bit 1 and all-zero exponents.
pub fn honest_respond(nf: &NormalForm, challenge: &[ElementCode]) -> Result<Response, ProverError> {
    let h = nf.generators();
    if challenge.len() != h.len() {
        return Err(ProverError::ChallengeLength { expected: h.len(), got: challenge.len() });
    }
    let mut response = Response { bits: Vec::with_capacity(h.len()), exponents: Vec::with_capacity(h.len()) };
    for (i, &masked) in challenge.iter().enumerate() {
        if nf.is_member(i, masked) {
            response.bits.push(0);
            response.exponents.push(nf.decompose(i, h[i]).map_or_else(|| vec![0; i], |d| d.exponents));
        } else {
            response.bits.push(1);
            response.exponents.push(vec![0; i]);
        }
    }
    Ok(response)
}

/// Cheating strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversaryStrategy {
    /// On one trivial round, hide the decomposition and guess the verifier's bit.
    GuessInflate,
    /// On nontrivial rounds, send random exponents and bit 0, trying to get the round counted as 1.
    Deflate,
    /// Honest commitment with one α/β/γ entry altered.
    GarbageCommitment,
    /// Honest exponents, uniformly random bits.
    RandomBits,
    /// Commits with one spurious extra prime (3-message) and guesses on every
    /// eligible trivial round, so forging needs every guess to land.
    OrderForger,
}

impl AdversaryStrategy {
    pub const ALL: [AdversaryStrategy; 5] = [
        AdversaryStrategy::GuessInflate,
        AdversaryStrategy::Deflate,
        AdversaryStrategy::GarbageCommitment,
        AdversaryStrategy::RandomBits,
        AdversaryStrategy::OrderForger,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryStrategy::GuessInflate => "guess_inflate",
            AdversaryStrategy::Deflate => "deflate",
            AdversaryStrategy::GarbageCommitment => "garbage_commitment",
            AdversaryStrategy::RandomBits => "random_bits",
            AdversaryStrategy::OrderForger => "order_forger",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            AdversaryStrategy::GuessInflate => "claims r_i on one trivial round by guessing the verifier's bit",
            AdversaryStrategy::Deflate => "claims 1 on nontrivial rounds with random exponents",
            AdversaryStrategy::GarbageCommitment => "tampers one alpha/beta/gamma entry of an honest commitment",
            AdversaryStrategy::RandomBits => "uniformly random bits with honest exponents",
            AdversaryStrategy::OrderForger => "commits with a spurious prime and guesses on every eligible round",
        }
    }
}

/// Who answers the verifier. Serialized as its name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ProverKind {
    Honest,
    Adversary(AdversaryStrategy),
}

impl ProverKind {
    pub fn name(self) -> &'static str {
        match self {
            ProverKind::Honest => "honest",
            ProverKind::Adversary(s) => s.name(),
        }
    }

    pub fn all() -> Vec<ProverKind> {
        std::iter::once(ProverKind::Honest)
            .chain(AdversaryStrategy::ALL.iter().map(|&s| ProverKind::Adversary(s)))
            .collect()
    }

    /// A fresh prover whose randomness is fixed by `seed`.
    pub fn build(self, seed: u64, cap: usize) -> Box<dyn Prover + Send> {
        match self {
            ProverKind::Honest => Box::new(HonestProver::new(cap)),
            ProverKind::Adversary(strategy) => Box::new(AdversarialProver::new(strategy, seed, cap)),
        }
    }
}

impl fmt::Display for ProverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<ProverKind> for String {
    fn from(k: ProverKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for ProverKind {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for ProverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProverKind::all().into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ProverKind::all().iter().map(|k| k.name()).collect();
            format!("unknown prover {s:?} (expected one of {})", names.join(", "))
        })
    }
}

/// Cache of the normal-form table for the last sequence seen.
#[derive(Debug, Default)]
struct Tables {
    current: Option<NormalForm>,
}

impl Tables {
    fn get(&mut self, group: &GroupOracle, elements: &[ElementCode], cap: usize) -> Result<&NormalForm, ProverError> {
        let stale = self.current.as_ref().is_none_or(|nf| nf.generators() != elements);
        if stale {
            self.current = Some(NormalForm::build(group, elements, cap)?);
        }
        Ok(self.current.as_ref().expect("just filled"))
    }
}

#[derive(Debug)]
pub struct HonestProver {
    cap: usize,
    tables: Tables,
}

impl HonestProver {
    pub fn new(cap: usize) -> Self {
        HonestProver { cap, tables: Tables::default() }
    }
}

impl Prover for HonestProver {
    fn commit(&mut self, group: &GroupOracle) -> Result<Commitment, ProverError> {
        let (commitment, nf) = honest_commit(group, self.cap)?;
        self.tables.current = Some(nf);
        Ok(commitment)
    }

    fn respond(
        &mut self,
        group: &GroupOracle,
        elements: &[ElementCode],
        challenge: &[ElementCode],
    ) -> Result<Response, ProverError> {
        let nf = self.tables.get(group, elements, self.cap)?;
        honest_respond(nf, challenge)
    }
}

#[derive(Debug)]
pub struct AdversarialProver {
    strategy: AdversaryStrategy,
    rng: ChaCha8Rng,
    cap: usize,
    target: Option<usize>,
    tables: Tables,
    /// Positions (0-based) whose committed prime is the spurious one.
    forged_rounds: Option<Vec<bool>>,
}

impl AdversarialProver {
    pub fn new(strategy: AdversaryStrategy, seed: u64, cap: usize) -> Self {
        AdversarialProver {
            strategy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cap,
            target: None,
            tables: Tables::default(),
            forged_rounds: None,
        }
    }

    /// Pins the round (0-based) attacked by `guess_inflate`; ignored when
    /// that round is not eligible.
    pub fn with_target(mut self, round: usize) -> Self {
        self.target = Some(round);
        self
    }

    pub fn strategy(&self) -> AdversaryStrategy {
        self.strategy
    }
}

/// Rounds where the quotient is trivial yet a wrong word exists: `h_i ∈ H_{i-1}`
/// and `|H_{i-1}| >= 2`.
pub fn inflatable_rounds(nf: &NormalForm) -> Vec<usize> {
    let h = nf.generators();
    (0..h.len()).filter(|&i| nf.is_member(i, h[i]) && nf.subgroup_order(i) >= 2).collect()
}

/// Exponents over `H_i` that evaluate to something other than `h_{i+1}`.
fn wrong_word(nf: &NormalForm, i: usize) -> Vec<Exponent> {
    let target = nf.generators()[i];
    let decoy = nf.subgroup(i).iter().copied().find(|&y| y != target).expect("eligible rounds have |H_i| >= 2");
    nf.decompose(i, decoy).expect("decoy lies in H_i").exponents
}

impl Prover for AdversarialProver {
    fn commit(&mut self, group: &GroupOracle) -> Result<Commitment, ProverError> {
        match self.strategy {
            AdversaryStrategy::OrderForger => {
                let (primes, nf) = honest_setup(group, self.cap, true)?;
                let spurious = *primes.iter().max().expect("at least the spurious prime");
                let commitment = commitment_tables(group, &nf, &primes)?;
                self.forged_rounds = Some(commitment.primes.iter().map(|&r| r == spurious).collect());
                self.tables.current = Some(nf);
                Ok(commitment)
            }
            AdversaryStrategy::GarbageCommitment => {
                let (mut commitment, nf) = honest_commit(group, self.cap)?;
                tamper(group, &mut commitment);
                self.tables.current = Some(nf);
                Ok(commitment)
            }
            _ => {
                let (commitment, nf) = honest_commit(group, self.cap)?;
                self.tables.current = Some(nf);
                Ok(commitment)
            }
        }
    }

    fn respond(
        &mut self,
        group: &GroupOracle,
        elements: &[ElementCode],
        challenge: &[ElementCode],
    ) -> Result<Response, ProverError> {
        let cap = self.cap;
        let nf = self.tables.get(group, elements, cap)?;
        let mut response = honest_respond(nf, challenge)?;
        let h = nf.generators();
        match self.strategy {
            AdversaryStrategy::GuessInflate | AdversaryStrategy::OrderForger => {
                let eligible = inflatable_rounds(nf);
                let targets: Vec<usize> = if self.strategy == AdversaryStrategy::GuessInflate {
                    self.target
                        .filter(|t| eligible.contains(t))
                        .or_else(|| eligible.first().copied())
                        .into_iter()
                        .collect()
                } else {
                    match &self.forged_rounds {
                        Some(forged) => eligible.into_iter().filter(|&i| forged.get(i) == Some(&true)).collect(),
                        None => eligible,
                    }
                };
                for i in targets {
                    response.bits[i] = self.rng.gen_range(0..=1);
                    response.exponents[i] = wrong_word(nf, i);
                }
            }
            AdversaryStrategy::Deflate => {
                let orders = nf.quotient_orders().to_vec();
                for i in 0..h.len() {
                    if !nf.is_member(i, h[i]) {
                        response.bits[i] = 0;
                        response.exponents[i] =
                            orders[..i].iter().map(|&m| self.rng.gen_range(0..Exponent::from(m.max(1)))).collect();
                    }
                }
            }
            AdversaryStrategy::RandomBits => {
                for bit in &mut response.bits {
                    *bit = self.rng.gen_range(0..=1);
                }
            }
            AdversaryStrategy::GarbageCommitment => {}
        }
        Ok(response)
    }
}

/// Alters the commitment so that some Step 1 equality fails: bumps the first
/// `alpha` entry whose base is not the identity, or breaks the table shape
/// when no such entry exists.
fn tamper(group: &GroupOracle, commitment: &mut Commitment) {
    let e = group.identity();
    let column = commitment.elements.iter().position(|&h| h != e);
    match (column, commitment.alpha.first_mut()) {
        (Some(j), Some(row)) => row[j] += 1,
        _ => commitment.alpha.push(vec![1; commitment.elements.len() + 1]),
    }
}
