//! Fixture definitions behind the black box, and the textual spec grammar:
//!
//! ```text
//! cyclic:12
//! direct:cyclic:4,cyclic:3
//! perm:4:(1 2),(1 2 3 4)
//! perm:4:(1 2)(3 4),(1 3)@seed=7
//! ```
//!
//! Permutation points are 1-based in the grammar and 0-based internally.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::GroupError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupVariant {
    Cyclic(u64),
    DirectProduct(Vec<GroupVariant>),
    /// `images[g][x]` is the image of point `x` under generator `g`.
    Permutation {
        degree: usize,
        generators: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteGroupSpec {
    pub variant: GroupVariant,
    /// When set, element codes are passed through a seeded injective relabeling.
    pub relabel_seed: Option<u64>,
}

impl ConcreteGroupSpec {
    pub fn new(variant: GroupVariant) -> Self {
        ConcreteGroupSpec { variant, relabel_seed: None }
    }

    pub fn cyclic(m: u64) -> Self {
        Self::new(GroupVariant::Cyclic(m))
    }

    pub fn direct(parts: Vec<GroupVariant>) -> Self {
        Self::new(GroupVariant::DirectProduct(parts))
    }

    /// Permutation group from 1-based cycle lists, one list of cycles per generator.
    pub fn permutation(degree: usize, generators: &[&[&[usize]]]) -> Result<Self, GroupError> {
        let generators = generators
            .iter()
            .map(|cycles| images_from_cycles(degree, cycles.iter().map(|c| c.to_vec())))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(GroupVariant::Permutation { degree, generators }))
    }

    pub fn with_relabel(mut self, seed: u64) -> Self {
        self.relabel_seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<(), GroupError> {
        self.variant.validate()
    }
}

impl GroupVariant {
    pub fn validate(&self) -> Result<(), GroupError> {
        match self {
            GroupVariant::Cyclic(0) => Err(GroupError::InvalidSpec("cyclic order must be at least 1".into())),
            GroupVariant::Cyclic(_) => Ok(()),
            GroupVariant::DirectProduct(parts) => {
                if parts.is_empty() {
                    return Err(GroupError::InvalidSpec("direct product needs at least one factor".into()));
                }
                parts.iter().try_for_each(GroupVariant::validate)
            }
            GroupVariant::Permutation { degree, generators } => {
                if *degree == 0 {
                    return Err(GroupError::InvalidSpec("permutation degree must be at least 1".into()));
                }
                for (idx, images) in generators.iter().enumerate() {
                    check_bijection(*degree, images)
                        .map_err(|msg| GroupError::InvalidPermutation(format!("generator {}: {msg}", idx + 1)))?;
                }
                Ok(())
            }
        }
    }
}

fn check_bijection(degree: usize, images: &[usize]) -> Result<(), String> {
    if images.len() != degree {
        return Err(format!("expected {degree} images, got {}", images.len()));
    }
    let mut seen = vec![false; degree];
    for &y in images {
        if y >= degree {
            return Err(format!("image {} outside 1..={degree}", y + 1));
        }
        if std::mem::replace(&mut seen[y], true) {
            return Err(format!("point {} hit twice", y + 1));
        }
    }
    Ok(())
}

/// Converts 1-based cycles into a 0-based image vector. Cycles are composed
/// right to left, matching the product convention `(στ)(x) = σ(τ(x))`.
pub fn images_from_cycles<I>(degree: usize, cycles: I) -> Result<Vec<usize>, GroupError>
where
    I: IntoIterator<Item = Vec<usize>>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut images: Vec<usize> = (0..degree).collect();
    for cycle in cycles.into_iter().rev() {
        let mut seen = Vec::with_capacity(cycle.len());
        for &p in &cycle {
            if p == 0 || p > degree {
                return Err(GroupError::InvalidPermutation(format!("point {p} outside 1..={degree}")));
            }
            if seen.contains(&p) {
                return Err(GroupError::InvalidPermutation(format!("point {p} repeated in cycle")));
            }
            seen.push(p);
        }
        if cycle.len() < 2 {
            continue;
        }
        let mut step: Vec<usize> = (0..degree).collect();
        for w in 0..cycle.len() {
            step[cycle[w] - 1] = cycle[(w + 1) % cycle.len()] - 1;
        }
        images = images.iter().map(|&x| step[x]).collect();
    }
    Ok(images)
}

/// 1-based cycle notation, `()` for the identity.
pub fn cycle_notation(images: &[usize]) -> String {
    let mut seen = vec![false; images.len()];
    let mut out = String::new();
    for start in 0..images.len() {
        if seen[start] || images[start] == start {
            continue;
        }
        out.push('(');
        let mut x = start;
        let mut first = true;
        while !seen[x] {
            seen[x] = true;
            if !first {
                out.push(' ');
            }
            first = false;
            out.push_str(&(x + 1).to_string());
            x = images[x];
        }
        out.push(')');
    }
    if out.is_empty() {
        out.push_str("()");
    }
    out
}

fn parse_cycles(degree: usize, text: &str) -> Result<Vec<usize>, GroupError> {
    let text = text.trim();
    let bad = || GroupError::InvalidSpec(format!("malformed permutation {text:?}"));
    if !text.starts_with('(') || !text.ends_with(')') {
        return Err(bad());
    }
    let mut cycles = Vec::new();
    for chunk in text[1..text.len() - 1].split(')') {
        let chunk = chunk.trim().strip_prefix('(').unwrap_or(chunk.trim());
        if chunk.contains('(') {
            return Err(bad());
        }
        let points = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        cycles.push(points);
    }
    images_from_cycles(degree, cycles)
}

const KEYWORDS: [&str; 3] = ["cyclic:", "perm:", "direct:"];

fn parse_variant(text: &str) -> Result<GroupVariant, GroupError> {
    let text = text.trim();
    if let Some(m) = text.strip_prefix("cyclic:") {
        let m =
            m.trim().parse::<u64>().map_err(|_| GroupError::InvalidSpec(format!("bad cyclic order in {text:?}")))?;
        return Ok(GroupVariant::Cyclic(m));
    }
    if let Some(rest) = text.strip_prefix("perm:") {
        let (degree, gens) = rest.split_once(':').unwrap_or((rest, ""));
        let degree = degree
            .trim()
            .parse::<usize>()
            .map_err(|_| GroupError::InvalidSpec(format!("bad permutation degree in {text:?}")))?;
        let mut generators = Vec::new();
        let mut depth = 0usize;
        let mut current = String::new();
        for ch in gens.chars() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            if ch == ',' && depth == 0 {
                generators.push(parse_cycles(degree, &current)?);
                current.clear();
            } else {
                current.push(ch);
            }
        }
        if !current.trim().is_empty() {
            generators.push(parse_cycles(degree, &current)?);
        }
        return Ok(GroupVariant::Permutation { degree, generators });
    }
    if let Some(body) = text.strip_prefix("direct:") {
        // Split on commas that start a new factor; commas inside a permutation
        // generator list are followed by '('.
        let mut parts = Vec::new();
        let mut start = 0;
        for (idx, _) in body.match_indices(',') {
            let tail = body[idx + 1..].trim_start();
            if KEYWORDS.iter().any(|k| tail.starts_with(k)) {
                parts.push(&body[start..idx]);
                start = idx + 1;
            }
        }
        parts.push(&body[start..]);
        let parts = parts.into_iter().map(parse_variant).collect::<Result<Vec<_>, _>>()?;
        return Ok(GroupVariant::DirectProduct(parts));
    }
    Err(GroupError::InvalidSpec(format!("unknown group spec {text:?}")))
}

impl FromStr for ConcreteGroupSpec {
    type Err = GroupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (body, relabel_seed) = match s.rsplit_once('@') {
            Some((body, suffix)) => {
                let seed = suffix
                    .trim()
                    .strip_prefix("seed=")
                    .and_then(|v| v.trim().parse::<u64>().ok())
                    .ok_or_else(|| GroupError::InvalidSpec(format!("bad relabel suffix {suffix:?}")))?;
                (body, Some(seed))
            }
            None => (s, None),
        };
        let spec = ConcreteGroupSpec { variant: parse_variant(body)?, relabel_seed };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GroupVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupVariant::Cyclic(m) => write!(f, "cyclic:{m}"),
            GroupVariant::DirectProduct(parts) => {
                write!(f, "direct:")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            GroupVariant::Permutation { degree, generators } => {
                write!(f, "perm:{degree}:")?;
                for (i, g) in generators.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", cycle_notation(g))?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for ConcreteGroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.variant)?;
        if let Some(seed) = self.relabel_seed {
            write!(f, "@seed={seed}")?;
        }
        Ok(())
    }
}
