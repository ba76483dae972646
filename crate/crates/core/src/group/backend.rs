//! Concrete group laws on canonical codes.
//!
//! Canonical encodings: a cyclic residue is stored as its binary value; a
//! permutation of degree `k` is the concatenation of its `k` images, each in
//! `w = ceil(log2 k)` bits with point `x` at bit offset `x*w`; a direct
//! product concatenates its factors, first factor in the low bits.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::code::MAX_ENCODING_BITS;
use super::spec::{cycle_notation, GroupVariant};
use super::GroupError;

const MAX_DEGREE: usize = 32;

#[derive(Clone, Debug)]
pub(crate) enum Backend {
    Cyclic { order: u64 },
    Direct { parts: Vec<(Backend, u32)> },
    Permutation { degree: usize, width: u32, generators: Vec<Vec<usize>> },
}

fn bits_for(max_value: u128) -> u32 {
    (128 - max_value.leading_zeros()).max(1)
}

fn mask(n: u32) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

impl Backend {
    pub(crate) fn from_variant(variant: &GroupVariant) -> Result<Backend, GroupError> {
        let backend = match variant {
            GroupVariant::Cyclic(order) => Backend::Cyclic { order: *order },
            GroupVariant::DirectProduct(parts) => Backend::Direct {
                parts: parts
                    .iter()
                    .map(|p| {
                        let b = Backend::from_variant(p)?;
                        let n = b.encoding_length();
                        Ok((b, n))
                    })
                    .collect::<Result<_, GroupError>>()?,
            },
            GroupVariant::Permutation { degree, generators } => {
                if *degree > MAX_DEGREE {
                    return Err(GroupError::EncodingTooLong { bits: *degree as u32 * bits_for(*degree as u128 - 1) });
                }
                Backend::Permutation {
                    degree: *degree,
                    width: bits_for(*degree as u128 - 1),
                    generators: generators.clone(),
                }
            }
        };
        let n = backend.encoding_length();
        if n > MAX_ENCODING_BITS {
            return Err(GroupError::EncodingTooLong { bits: n });
        }
        Ok(backend)
    }

    pub(crate) fn encoding_length(&self) -> u32 {
        match self {
            Backend::Cyclic { order } => bits_for(u128::from(*order) - 1),
            Backend::Direct { parts } => parts.iter().map(|(_, n)| n).sum(),
            Backend::Permutation { degree, width, .. } => *degree as u32 * width,
        }
    }

    pub(crate) fn identity(&self) -> u128 {
        match self {
            Backend::Cyclic { .. } => 0,
            Backend::Direct { parts } => {
                let mut out = 0;
                let mut offset = 0;
                for (part, n) in parts {
                    out |= part.identity() << offset;
                    offset += n;
                }
                out
            }
            Backend::Permutation { degree, width, .. } => pack(&(0..*degree).collect::<Vec<_>>(), *width),
        }
    }

    pub(crate) fn generators(&self) -> Vec<u128> {
        match self {
            Backend::Cyclic { order } => {
                if *order > 1 {
                    vec![1]
                } else {
                    Vec::new()
                }
            }
            Backend::Direct { parts } => {
                let identity = self.identity();
                let mut out = Vec::new();
                let mut offset = 0;
                for (part, n) in parts {
                    let cleared = identity & !(mask(*n) << offset);
                    for g in part.generators() {
                        out.push(cleared | (g << offset));
                    }
                    offset += n;
                }
                out
            }
            Backend::Permutation { width, generators, .. } => generators.iter().map(|g| pack(g, *width)).collect(),
        }
    }

    /// Group law; defined (but meaningless) on codes outside the group.
    pub(crate) fn product(&self, a: u128, b: u128) -> u128 {
        match self {
            Backend::Cyclic { order } => {
                let m = u128::from(*order);
                ((a % m) + (b % m)) % m
            }
            Backend::Direct { parts } => {
                let mut out = 0;
                let mut offset = 0;
                for (part, n) in parts {
                    let m = mask(*n);
                    out |= part.product((a >> offset) & m, (b >> offset) & m) << offset;
                    offset += n;
                }
                out
            }
            Backend::Permutation { degree, width, .. } => {
                let (sigma, tau) = (unpack(a, *degree, *width), unpack(b, *degree, *width));
                let mut out = [0usize; MAX_DEGREE];
                for x in 0..*degree {
                    out[x] = sigma[tau[x]];
                }
                pack(&out[..*degree], *width)
            }
        }
    }

    pub(crate) fn inverse(&self, a: u128) -> u128 {
        match self {
            Backend::Cyclic { order } => {
                let m = u128::from(*order);
                (m - a % m) % m
            }
            Backend::Direct { parts } => {
                let mut out = 0;
                let mut offset = 0;
                for (part, n) in parts {
                    out |= part.inverse((a >> offset) & mask(*n)) << offset;
                    offset += n;
                }
                out
            }
            Backend::Permutation { degree, width, .. } => {
                let sigma = unpack(a, *degree, *width);
                let mut out = [0usize; MAX_DEGREE];
                for x in 0..*degree {
                    out[sigma[x]] = x;
                }
                pack(&out[..*degree], *width)
            }
        }
    }

    pub(crate) fn canonical(&self, element: &Concrete) -> Result<u128, GroupError> {
        let bad = || GroupError::InvalidElement(element.to_string());
        match (self, element) {
            (Backend::Cyclic { order }, Concrete::Residue(r)) if r < order => Ok(u128::from(*r)),
            (Backend::Permutation { degree, width, .. }, Concrete::Permutation(images)) => {
                if images.len() != *degree {
                    return Err(bad());
                }
                let mut seen = vec![false; *degree];
                for &y in images {
                    if y >= *degree || std::mem::replace(&mut seen[y], true) {
                        return Err(bad());
                    }
                }
                Ok(pack(images, *width))
            }
            (Backend::Direct { parts }, Concrete::Tuple(items)) if items.len() == parts.len() => {
                let mut out = 0;
                let mut offset = 0;
                for ((part, n), item) in parts.iter().zip(items) {
                    out |= part.canonical(item)? << offset;
                    offset += n;
                }
                Ok(out)
            }
            _ => Err(bad()),
        }
    }

    pub(crate) fn concrete(&self, code: u128) -> Concrete {
        match self {
            Backend::Cyclic { order } => Concrete::Residue((code % u128::from(*order)) as u64),
            Backend::Permutation { degree, width, .. } => {
                Concrete::Permutation(unpack(code, *degree, *width)[..*degree].to_vec())
            }
            Backend::Direct { parts } => {
                let mut items = Vec::with_capacity(parts.len());
                let mut offset = 0;
                for (part, n) in parts {
                    items.push(part.concrete((code >> offset) & mask(*n)));
                    offset += n;
                }
                Concrete::Tuple(items)
            }
        }
    }
}

fn pack(images: &[usize], width: u32) -> u128 {
    images.iter().enumerate().fold(0u128, |acc, (x, &y)| acc | ((y as u128) << (x as u32 * width)))
}

fn unpack(code: u128, degree: usize, width: u32) -> [usize; MAX_DEGREE] {
    let m = mask(width);
    let mut out = [0usize; MAX_DEGREE];
    for (x, slot) in out.iter_mut().enumerate().take(degree) {
        // Out-of-range images only arise from strings outside the group.
        *slot = ((code >> (x as u32 * width)) & m) as usize % degree;
    }
    out
}

/// Human-readable element of a concrete backend.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Concrete {
    Residue(u64),
    /// 0-based image list.
    Permutation(Vec<usize>),
    Tuple(Vec<Concrete>),
}

impl fmt::Display for Concrete {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Concrete::Residue(r) => write!(f, "{r}"),
            Concrete::Permutation(images) => write!(f, "{}", cycle_notation(images)),
            Concrete::Tuple(items) => {
                write!(f, "[")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{item}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Seeded bijection of `{0,1}^n` used to hide canonical code structure.
///
/// Each round is `x -> ((x * a) mod 2^n) ^ (.. >> shift) + b mod 2^n` with `a`
/// odd, all of which are invertible on n-bit words.
#[derive(Clone, Debug)]
pub(crate) struct Relabel {
    bits: u32,
    mask: u128,
    rounds: Vec<RelabelRound>,
}

#[derive(Clone, Debug)]
struct RelabelRound {
    mul: u128,
    mul_inv: u128,
    shift: u32,
    add: u128,
}

impl Relabel {
    pub(crate) fn new(bits: u32, seed: u64) -> Relabel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mask = mask(bits);
        let rounds = (0..3)
            .map(|_| {
                let mul = (rng.gen::<u128>() | 1) & mask;
                let lo = bits.div_ceil(2).max(1);
                let hi = bits.saturating_sub(1).max(lo);
                RelabelRound {
                    mul,
                    mul_inv: odd_inverse(mul) & mask,
                    shift: rng.gen_range(lo..=hi),
                    add: rng.gen::<u128>() & mask,
                }
            })
            .collect();
        Relabel { bits, mask, rounds }
    }

    pub(crate) fn encode(&self, mut x: u128) -> u128 {
        for r in &self.rounds {
            x = x.wrapping_mul(r.mul) & self.mask;
            x ^= x >> r.shift;
            x = x.wrapping_add(r.add) & self.mask;
        }
        x
    }

    pub(crate) fn decode(&self, mut y: u128) -> u128 {
        y &= self.mask;
        for r in self.rounds.iter().rev() {
            y = y.wrapping_sub(r.add) & self.mask;
            let mut x = y;
            for _ in 0..self.bits.div_ceil(r.shift) {
                x = y ^ (x >> r.shift);
            }
            y = x.wrapping_mul(r.mul_inv) & self.mask;
        }
        y
    }
}

/// Inverse of an odd number modulo 2^128 by Newton iteration.
fn odd_inverse(a: u128) -> u128 {
    let mut x = a;
    for _ in 0..7 {
        x = x.wrapping_mul(2u128.wrapping_sub(a.wrapping_mul(x)));
    }
    x
}
