//! Polycyclic generating sequences.
//!
//! A sequence `(h_1, ..., h_t)` with `H_j = <h_1, ..., h_j>` is polycyclic when
//! `H_t` is the whole group and each `H_{j-1}` is normal in `H_j`. Every
//! element of `H_j` then has a unique normal form `h_1^{a_1} ... h_j^{a_j}`
//! with `0 <= a_i < m_i`, where `m_i = |H_i / H_{i-1}|`.
//!
//! [`refine_with_primes`] replaces each element `k` of a sequence by the
//! powers `k^{mu(1)}, ..., k^{mu(l*n)}`, where `mu` lists
//! `p_i^{n-a} * p_{i+1}^n * ... * p_l^n` for `i = 1..l`, `a = 1..n`. When the
//! primes cover every prime factor of the group order and `|G| <= 2^n`,
//! every quotient of the refined sequence has order 1 or a known prime `r_i`.
//!
//! Computing the initial sequence and decomposing elements are done here by
//! brute-force enumeration, which stands in for the randomized and quantum
//! algorithms a real prover or verifier would run.

use std::collections::HashMap;

use indexmap::IndexSet;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::is_prime;
use crate::group::{closure_extend, enumerate_closure, ElementCode, Exponent, GroupError, GroupOracle};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PcgsError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("group is not solvable: derived series stalls at order {order}")]
    NotSolvable { order: usize },
    #[error("invalid prime set: {0}")]
    InvalidPrimes(String),
    #[error("quotient {index} has order {quotient}, expected 1 or {prime}")]
    QuotientMismatch { index: usize, quotient: u64, prime: u64 },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolycyclicSequence {
    pub elements: Vec<ElementCode>,
    /// `r_1..r_t` for refined sequences.
    pub primes: Option<Vec<u64>>,
    /// `m_1..m_t`, when known.
    pub quotient_orders: Option<Vec<u64>>,
}

impl PolycyclicSequence {
    pub fn new(elements: Vec<ElementCode>) -> Self {
        PolycyclicSequence { elements, primes: None, quotient_orders: None }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Exponents `(a_1, ..., a_j)` of an element over `H_j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decomposition {
    pub exponents: Vec<Exponent>,
}

fn commutator(
    group: &GroupOracle,
    a: ElementCode,
    a_inv: ElementCode,
    b: ElementCode,
    b_inv: ElementCode,
) -> ElementCode {
    let ab = group.product(a, b);
    let aba = group.product(ab, a_inv);
    group.product(aba, b_inv)
}

/// Generators and elements of the derived subgroup of `<gens>`: the normal
/// closure of the commutators of the generators.
fn derived_subgroup(
    group: &GroupOracle,
    gens: &[ElementCode],
    cap: usize,
) -> Result<(Vec<ElementCode>, IndexSet<ElementCode>), GroupError> {
    let inverses: Vec<ElementCode> = gens.iter().map(|&g| group.inverse(g)).collect();
    let mut sub_gens: Vec<ElementCode> = Vec::new();
    let mut sub = IndexSet::from([group.identity()]);
    let add = |c: ElementCode,
               sub_gens: &mut Vec<ElementCode>,
               sub: &mut IndexSet<ElementCode>|
     -> Result<bool, GroupError> {
        if sub.contains(&c) {
            return Ok(false);
        }
        *sub = closure_extend(group, sub, sub_gens, c, cap)?;
        sub_gens.push(c);
        Ok(true)
    };
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            let c = commutator(group, gens[i], inverses[i], gens[j], inverses[j]);
            add(c, &mut sub_gens, &mut sub)?;
        }
    }
    // Conjugation by the generators maps a finite subgroup into itself iff it
    // normalizes it.
    let mut changed = true;
    while changed {
        changed = false;
        for (g, g_inv) in gens.iter().zip(&inverses) {
            let mut k = 0;
            while k < sub_gens.len() {
                let c = group.product(group.product(*g, sub_gens[k]), *g_inv);
                changed |= add(c, &mut sub_gens, &mut sub)?;
                k += 1;
            }
        }
    }
    Ok((sub_gens, sub))
}

/// Smallest `a >= 1` with `g^a` in `sub`.
fn order_modulo(
    group: &GroupOracle,
    g: ElementCode,
    sub: &IndexSet<ElementCode>,
    cap: usize,
) -> Result<u64, GroupError> {
    let mut x = g;
    let mut a = 1u64;
    while !sub.contains(&x) {
        if a as usize > cap {
            return Err(GroupError::ClosureOverflow { cap });
        }
        x = group.product(x, g);
        a += 1;
    }
    Ok(a)
}

/// A polycyclic generating sequence of the whole group, computed by brute
/// force along the derived series.
///
/// Starting from the bottom of the series, each step adds the element of the
/// current derived subgroup with the largest order modulo what has been
/// generated so far. Any subgroup containing `[D, D]` is normal in `D`, so
/// each prefix is normal in the next.
pub fn compute_pcgs(group: &GroupOracle, cap: usize) -> Result<PolycyclicSequence, PcgsError> {
    let e = group.identity();
    let mut gens: Vec<ElementCode> = Vec::new();
    for &g in group.generators() {
        if g != e && !gens.contains(&g) {
            gens.push(g);
        }
    }
    let whole = enumerate_closure(group, &gens, cap)?;
    let mut series = vec![whole];
    let mut current_gens = gens;
    while series.last().is_some_and(|s| s.len() > 1) {
        let (next_gens, next) = derived_subgroup(group, &current_gens, cap)?;
        let order = series.last().map_or(0, IndexSet::len);
        if next.len() == order {
            return Err(PcgsError::NotSolvable { order });
        }
        series.push(next);
        current_gens = next_gens;
    }

    let mut chain = IndexSet::from([e]);
    let mut elements: Vec<ElementCode> = Vec::new();
    let mut orders = Vec::new();
    for level in series.iter().rev().skip(1) {
        while chain.len() < level.len() {
            let mut best: Option<(ElementCode, u64)> = None;
            for &x in level {
                if chain.contains(&x) {
                    continue;
                }
                let a = order_modulo(group, x, &chain, cap)?;
                if best.is_none_or(|(_, b)| a > b) {
                    best = Some((x, a));
                }
            }
            let (x, a) = best.expect("level strictly larger than chain");
            chain = closure_extend(group, &chain, &elements, x, cap)?;
            elements.push(x);
            orders.push(a);
        }
    }
    Ok(PolycyclicSequence { elements, primes: None, quotient_orders: Some(orders) })
}

fn canonical_primes(primes: &[u64]) -> Result<Vec<u64>, PcgsError> {
    let mut sorted = primes.to_vec();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(PcgsError::InvalidPrimes(format!("{} repeated", w[0])));
    }
    if let Some(p) = sorted.iter().find(|&&p| !is_prime(p)) {
        return Err(PcgsError::InvalidPrimes(format!("{p} is not prime")));
    }
    Ok(sorted)
}

/// The strictly decreasing sequence `mu(1), ..., mu(l*n)`.
///
/// Primes are taken in ascending order regardless of input order.
pub fn mu_sequence(primes: &[u64], n: u32) -> Result<Vec<BigUint>, PcgsError> {
    let primes = canonical_primes(primes)?;
    if primes.is_empty() {
        return Err(PcgsError::InvalidPrimes("empty prime set".into()));
    }
    if n == 0 {
        return Err(PcgsError::InvalidPrimes("encoding length must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(primes.len() * n as usize);
    for i in 0..primes.len() {
        let tail: BigUint = primes[i + 1..].iter().map(|&p| BigUint::from(p).pow(n)).product();
        for a in 1..=n {
            out.push(BigUint::from(primes[i]).pow(n - a) * &tail);
        }
    }
    Ok(out)
}

/// Consecutive ratios `mu(j-1)/mu(j)` for `j = 2..l*n`, preceded by `p_1`:
/// the prime attached to each position of a refined block.
fn block_primes(primes: &[u64], n: u32) -> Vec<u64> {
    let mut out = Vec::with_capacity(primes.len() * n as usize);
    out.push(primes[0]);
    for (i, &p) in primes.iter().enumerate() {
        let count = if i == 0 { n - 1 } else { n };
        out.extend(std::iter::repeat_n(p, count as usize));
    }
    out
}

/// Refines `pcgs` with the prime set `primes` at encoding length `n`.
///
/// Returns `l*n*t'` elements with their primes `r_i` attached. The element
/// `k^{mu(j)}` is computed as `(k^{mu(j+1)})^{r}` going down the block, which
/// yields the same element as a direct power at a fraction of the queries.
pub fn refine_with_primes(
    group: &GroupOracle,
    pcgs: &PolycyclicSequence,
    primes: &[u64],
    n: u32,
) -> Result<PolycyclicSequence, PcgsError> {
    let primes = canonical_primes(primes)?;
    if pcgs.is_empty() {
        return Ok(PolycyclicSequence { elements: Vec::new(), primes: Some(Vec::new()), quotient_orders: None });
    }
    if primes.is_empty() {
        return Err(PcgsError::InvalidPrimes("empty prime set for a nontrivial group".into()));
    }
    if n == 0 {
        return Err(PcgsError::InvalidPrimes("encoding length must be at least 1".into()));
    }
    let ratios = block_primes(&primes, n);
    let block = ratios.len();
    let mut elements = Vec::with_capacity(block * pcgs.len());
    let mut out_primes = Vec::with_capacity(block * pcgs.len());
    for &k in &pcgs.elements {
        let mut powers = vec![k; block];
        for j in (0..block - 1).rev() {
            powers[j] = group.power(powers[j + 1], Exponent::from(ratios[j + 1]));
        }
        elements.extend(powers);
        out_primes.extend_from_slice(&ratios);
    }
    Ok(PolycyclicSequence { elements, primes: Some(out_primes), quotient_orders: None })
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    level: usize,
    exponent: Exponent,
    rest: usize,
}

/// Normal-form table for a polycyclic sequence.
///
/// Every element of `H_t` is stored once, in order of its level (the least
/// `j` with the element in `H_j`), together with its last exponent and the
/// element of `H_{j-1}` it was built from. The first `|H_j|` stored elements
/// are exactly `H_j`.
#[derive(Clone, Debug)]
pub struct NormalForm {
    generators: Vec<ElementCode>,
    codes: Vec<ElementCode>,
    entries: Vec<Entry>,
    index: HashMap<ElementCode, usize>,
    sizes: Vec<usize>,
    quotient_orders: Vec<u64>,
}

impl NormalForm {
    /// Enumerates `H_1 ⊆ ... ⊆ H_t` as unions of cosets `H_{j-1} h_j^a`.
    ///
    /// Requires a polycyclic sequence: when some `H_{j-1}` is not normal in
    /// `H_j` the table describes the sets `H_{j-1} <h_j>` instead.
    pub fn build(group: &GroupOracle, elements: &[ElementCode], cap: usize) -> Result<NormalForm, GroupError> {
        let e = group.identity();
        let mut nf = NormalForm {
            generators: elements.to_vec(),
            codes: vec![e],
            entries: vec![Entry { level: 0, exponent: 0, rest: 0 }],
            index: HashMap::from([(e, 0)]),
            sizes: vec![1],
            quotient_orders: Vec::with_capacity(elements.len()),
        };
        for (j, &h) in elements.iter().enumerate() {
            let level = j + 1;
            let prev = nf.codes.len();
            let mut power = h;
            let mut a: Exponent = 1;
            while !nf.index.contains_key(&power) {
                if prev * (a as usize + 1) > cap {
                    return Err(GroupError::ClosureOverflow { cap });
                }
                for x in 0..prev {
                    let y = group.product(nf.codes[x], power);
                    nf.index.insert(y, nf.codes.len());
                    nf.codes.push(y);
                    nf.entries.push(Entry { level, exponent: a, rest: x });
                }
                power = group.product(power, h);
                a += 1;
            }
            nf.quotient_orders.push(a as u64);
            nf.sizes.push(nf.codes.len());
        }
        Ok(nf)
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[ElementCode] {
        &self.generators
    }

    /// `|H_t|`.
    pub fn order(&self) -> usize {
        self.codes.len()
    }

    /// `|H_j|`, with `|H_0| = 1`.
    pub fn subgroup_order(&self, j: usize) -> usize {
        self.sizes[j]
    }

    /// Elements of `H_j`.
    pub fn subgroup(&self, j: usize) -> &[ElementCode] {
        &self.codes[..self.sizes[j]]
    }

    pub fn quotient_orders(&self) -> &[u64] {
        &self.quotient_orders
    }

    /// The least `j` with `h ∈ H_j`, or `None` outside `H_t`.
    pub fn level(&self, h: ElementCode) -> Option<usize> {
        self.index.get(&h).map(|&i| self.entries[i].level)
    }

    /// Membership in `H_j`.
    pub fn is_member(&self, j: usize, h: ElementCode) -> bool {
        self.level(h).is_some_and(|level| level <= j)
    }

    /// The decomposition of `h` over `H_j`, or `None` when `h ∉ H_j`.
    pub fn decompose(&self, j: usize, h: ElementCode) -> Option<Decomposition> {
        let mut at = *self.index.get(&h)?;
        if self.entries[at].level > j {
            return None;
        }
        let mut exponents = vec![0; j];
        while self.entries[at].level > 0 {
            let entry = self.entries[at];
            exponents[entry.level - 1] = entry.exponent;
            at = entry.rest;
        }
        Some(Decomposition { exponents })
    }

    /// The sequence with its quotient orders filled in.
    pub fn annotate(&self, mut seq: PolycyclicSequence) -> PolycyclicSequence {
        seq.quotient_orders = Some(self.quotient_orders.clone());
        seq
    }
}

/// Checks `m_i ∈ {1, r_i}` for every position of a refined sequence.
pub fn validate_refinement(normal_form: &NormalForm, primes: &[u64]) -> Result<(), PcgsError> {
    for (i, (&m, &r)) in normal_form.quotient_orders().iter().zip(primes).enumerate() {
        if m != 1 && m != r {
            return Err(PcgsError::QuotientMismatch { index: i + 1, quotient: m, prime: r });
        }
    }
    Ok(())
}

/// Brute-force check of the polycyclic conditions against `target`, using
/// independent closure enumerations rather than a normal-form table.
pub fn verify_pcgs(
    group: &GroupOracle,
    elements: &[ElementCode],
    target: &IndexSet<ElementCode>,
    cap: usize,
) -> Result<(), String> {
    let all = enumerate_closure(group, elements, cap).map_err(|e| e.to_string())?;
    if all.len() != target.len() || !all.iter().all(|x| target.contains(x)) {
        return Err(format!("sequence generates {} elements, target has {}", all.len(), target.len()));
    }
    for j in 1..elements.len() {
        let below = enumerate_closure(group, &elements[..j], cap).map_err(|e| e.to_string())?;
        let h = elements[j];
        let h_inv = group.inverse(h);
        for (k, &g) in elements[..j].iter().enumerate() {
            let c = group.product(group.product(h, g), h_inv);
            if !below.contains(&c) {
                return Err(format!("H_{j} is not normal in H_{}: conjugate of h_{} escapes", j + 1, k + 1));
            }
        }
    }
    Ok(())
}
