//! Black-box groups.
//!
//! A [`GroupOracle`] hands out opaque [`ElementCode`]s and answers product and
//! inverse queries on them, counting every query. Callers above this module
//! never look inside a code; the only structure they may rely on is equality.

mod backend;
mod code;
mod spec;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use indexmap::IndexSet;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::Concrete;
use backend::{Backend, Relabel};
pub use code::{ElementCode, MAX_ENCODING_BITS};
pub use spec::{cycle_notation, images_from_cycles, ConcreteGroupSpec, GroupVariant};

/// Default bound on brute-force subgroup enumeration.
pub const DEFAULT_CLOSURE_CAP: usize = 1_000_000;

/// Exponent type used in words, decompositions and protocol messages.
pub type Exponent = u128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid group spec: {0}")]
    InvalidSpec(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error("encoding needs {bits} bits, more than the supported {MAX_ENCODING_BITS}")]
    EncodingTooLong { bits: u32 },
    #[error("element {0} does not belong to this backend")]
    InvalidElement(String),
    #[error("closure exceeds cap of {cap} elements")]
    ClosureOverflow { cap: usize },
    #[error("word has {bases} bases but {exponents} exponents")]
    LengthMismatch { bases: usize, exponents: usize },
}

/// Snapshot of oracle usage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryCounts {
    pub product: u64,
    pub inverse: u64,
}

impl QueryCounts {
    pub fn total(&self) -> u64 {
        self.product + self.inverse
    }
}

impl std::ops::Sub for QueryCounts {
    type Output = QueryCounts;

    fn sub(self, rhs: QueryCounts) -> QueryCounts {
        QueryCounts { product: self.product - rhs.product, inverse: self.inverse - rhs.inverse }
    }
}

impl std::ops::Add for QueryCounts {
    type Output = QueryCounts;

    fn add(self, rhs: QueryCounts) -> QueryCounts {
        QueryCounts { product: self.product + rhs.product, inverse: self.inverse + rhs.inverse }
    }
}

#[derive(Debug, Default)]
struct QueryCounter {
    product: AtomicU64,
    inverse: AtomicU64,
}

#[derive(Debug)]
struct GroupInner {
    spec: ConcreteGroupSpec,
    backend: Backend,
    relabel: Option<Relabel>,
    encoding_length: u32,
    identity: ElementCode,
    generators: Vec<ElementCode>,
}

/// Handle on a black-box group.
///
/// Clones share the same query counters. [`GroupOracle::fork`] returns a
/// handle on the same group with fresh counters, which is how separate
/// parties (or separate protocol executions) get their own accounting.
#[derive(Clone, Debug)]
pub struct GroupOracle {
    inner: Arc<GroupInner>,
    counter: Arc<QueryCounter>,
}

/// Instantiates the black box for a concrete fixture.
pub fn make_group(spec: &ConcreteGroupSpec) -> Result<GroupOracle, GroupError> {
    spec.validate()?;
    let backend = Backend::from_variant(&spec.variant)?;
    let encoding_length = backend.encoding_length();
    let relabel = spec.relabel_seed.map(|seed| Relabel::new(encoding_length, seed));
    let encode = |c: u128| ElementCode::from_bits(relabel.as_ref().map_or(c, |r| r.encode(c)));
    let identity = encode(backend.identity());
    let generators = backend.generators().into_iter().map(encode).collect();
    Ok(GroupOracle {
        inner: Arc::new(GroupInner { spec: spec.clone(), backend, relabel, encoding_length, identity, generators }),
        counter: Arc::default(),
    })
}

impl GroupOracle {
    pub fn spec(&self) -> &ConcreteGroupSpec {
        &self.inner.spec
    }

    /// The encoding length `n`: every code is an `n`-bit string.
    pub fn encoding_length(&self) -> u32 {
        self.inner.encoding_length
    }

    pub fn identity(&self) -> ElementCode {
        self.inner.identity
    }

    pub fn generators(&self) -> &[ElementCode] {
        &self.inner.generators
    }

    /// Same group, fresh counters.
    pub fn fork(&self) -> GroupOracle {
        GroupOracle { inner: Arc::clone(&self.inner), counter: Arc::default() }
    }

    pub fn queries(&self) -> QueryCounts {
        QueryCounts {
            product: self.counter.product.load(Ordering::Relaxed),
            inverse: self.counter.inverse.load(Ordering::Relaxed),
        }
    }

    fn to_canonical(&self, code: ElementCode) -> u128 {
        match &self.inner.relabel {
            Some(r) => r.decode(code.bits()),
            None => code.bits(),
        }
    }

    fn code_of(&self, value: u128) -> ElementCode {
        ElementCode::from_bits(match &self.inner.relabel {
            Some(r) => r.encode(value),
            None => value,
        })
    }

    /// Product oracle: the code of `gh`.
    pub fn product(&self, g: ElementCode, h: ElementCode) -> ElementCode {
        self.counter.product.fetch_add(1, Ordering::Relaxed);
        let out = self.inner.backend.product(self.to_canonical(g), self.to_canonical(h));
        self.code_of(out)
    }

    /// Inverse oracle: the code of `g^{-1}`.
    pub fn inverse(&self, g: ElementCode) -> ElementCode {
        self.counter.inverse.fetch_add(1, Ordering::Relaxed);
        let out = self.inner.backend.inverse(self.to_canonical(g));
        self.code_of(out)
    }

    /// `g^k` by left-to-right square-and-multiply.
    ///
    /// Costs `(bitlen(k) - 1) + (popcount(k) - 1)` product queries for `k > 0`
    /// and nothing for `k = 0`.
    pub fn power(&self, g: ElementCode, k: Exponent) -> ElementCode {
        if k == 0 {
            return self.identity();
        }
        let top = 127 - k.leading_zeros();
        self.power_bits(g, (0..top).rev().map(|i| (k >> i) & 1 == 1))
    }

    pub fn power_big(&self, g: ElementCode, k: &BigUint) -> ElementCode {
        let bits = k.bits();
        if bits == 0 {
            return self.identity();
        }
        self.power_bits(g, (0..bits - 1).rev().map(|i| k.bit(i)))
    }

    // `bits` lists the exponent bits below the leading one, most significant first.
    fn power_bits(&self, g: ElementCode, bits: impl Iterator<Item = bool>) -> ElementCode {
        let mut acc = g;
        for bit in bits {
            acc = self.product(acc, acc);
            if bit {
                acc = self.product(acc, g);
            }
        }
        acc
    }

    /// `bases[0]^exps[0] * bases[1]^exps[1] * ...`, left to right.
    ///
    /// Zero exponents and the leading identity are skipped without queries.
    pub fn eval_word(&self, bases: &[ElementCode], exps: &[Exponent]) -> Result<ElementCode, GroupError> {
        if bases.len() != exps.len() {
            return Err(GroupError::LengthMismatch { bases: bases.len(), exponents: exps.len() });
        }
        let mut acc: Option<ElementCode> = None;
        for (&b, &k) in bases.iter().zip(exps) {
            if k == 0 {
                continue;
            }
            let p = self.power(b, k);
            acc = Some(match acc {
                None => p,
                Some(a) => self.product(a, p),
            });
        }
        Ok(acc.unwrap_or_else(|| self.identity()))
    }

    /// Whether `g` is a well-formed `n`-bit code. Says nothing about membership.
    pub fn is_well_formed(&self, g: ElementCode) -> bool {
        g.fits(self.encoding_length())
    }

    /// Codes a concrete element. Fixture-side helper; protocols never call it.
    pub fn element(&self, concrete: &Concrete) -> Result<ElementCode, GroupError> {
        Ok(self.code_of(self.inner.backend.canonical(concrete)?))
    }

    /// Decodes a code into its concrete element. Fixture-side helper.
    pub fn concrete(&self, g: ElementCode) -> Concrete {
        self.inner.backend.concrete(self.to_canonical(g))
    }

    /// Convenience for permutation fixtures: element from 1-based cycles.
    pub fn permutation(&self, cycles: &[&[usize]]) -> Result<ElementCode, GroupError> {
        let degree = match &self.inner.spec.variant {
            GroupVariant::Permutation { degree, .. } => *degree,
            _ => return Err(GroupError::InvalidElement("not a permutation group".into())),
        };
        let images = images_from_cycles(degree, cycles.iter().map(|c| c.to_vec()))?;
        self.element(&Concrete::Permutation(images))
    }

    /// Convenience for cyclic fixtures: the code of residue `r`.
    pub fn residue(&self, r: u64) -> Result<ElementCode, GroupError> {
        self.element(&Concrete::Residue(r))
    }
}

/// Breadth-first closure of `gens` under the product oracle.
///
/// Finite groups are closed under products alone, so no inverse queries are
/// made. Costs `|<gens>| * |gens|` product queries. The result is in discovery
/// order, which is deterministic.
pub fn enumerate_closure(
    group: &GroupOracle,
    gens: &[ElementCode],
    cap: usize,
) -> Result<IndexSet<ElementCode>, GroupError> {
    let mut base = IndexSet::new();
    base.insert(group.identity());
    let mut gens_so_far: Vec<ElementCode> = Vec::new();
    for &g in gens {
        base = closure_extend(group, &base, &gens_so_far, g, cap)?;
        gens_so_far.push(g);
    }
    Ok(base)
}

/// Closure of `base ∪ {new}` where `base` is already the subgroup generated
/// by `base_gens`.
pub fn closure_extend(
    group: &GroupOracle,
    base: &IndexSet<ElementCode>,
    base_gens: &[ElementCode],
    new: ElementCode,
    cap: usize,
) -> Result<IndexSet<ElementCode>, GroupError> {
    let mut set = base.clone();
    if set.contains(&new) {
        return Ok(set);
    }
    // Old elements are closed under the old generators already.
    let mut frontier = Vec::new();
    for &x in base {
        let y = group.product(x, new);
        if set.insert(y) {
            frontier.push(y);
        }
    }
    let mut cursor = 0;
    while cursor < frontier.len() {
        if set.len() > cap {
            return Err(GroupError::ClosureOverflow { cap });
        }
        let x = frontier[cursor];
        cursor += 1;
        for &g in base_gens.iter().chain(std::iter::once(&new)) {
            let y = group.product(x, g);
            if set.insert(y) {
                frontier.push(y);
            }
        }
    }
    if set.len() > cap {
        return Err(GroupError::ClosureOverflow { cap });
    }
    Ok(set)
}

/// Order of `g`, by iterated products. Costs `ord(g) - 1` queries.
pub fn element_order(group: &GroupOracle, g: ElementCode, cap: usize) -> Result<u64, GroupError> {
    let e = group.identity();
    let mut x = g;
    let mut k = 1u64;
    while x != e {
        if k as usize >= cap {
            return Err(GroupError::ClosureOverflow { cap });
        }
        x = group.product(x, g);
        k += 1;
    }
    Ok(k)
}
