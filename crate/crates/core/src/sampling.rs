//! Random elements of black-box subgroups.
//!
//! [`ExactSampler`] enumerates the subgroup and draws uniformly from it.
//! [`SubproductSampler`] only uses oracle queries: it grows a list from the
//! generators by appending random subproducts of the list, then draws one
//! more random subproduct per sample. Its list has
//! `s + ceil(log2 cap) + ceil(log2 1/epsilon)` entries, so a draw costs a
//! number of queries linear in `log(1/epsilon)`. Closeness to uniform is
//! checked empirically, not proven.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexSet;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{enumerate_closure, ElementCode, GroupError, GroupOracle, QueryCounts, DEFAULT_CLOSURE_CAP};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("epsilon must lie in (0, 1), got {0}")]
    InvalidEpsilon(f64),
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("sampled element {0} lies outside the subgroup")]
    OutsideSubgroup(ElementCode),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Exact,
    Subproduct,
}

impl FromStr for SamplerMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SamplerMode::Exact),
            "subproduct" => Ok(SamplerMode::Subproduct),
            other => Err(format!("unknown sampler mode {other:?} (expected exact or subproduct)")),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerMode::Exact => "exact",
            SamplerMode::Subproduct => "subproduct",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub epsilon: f64,
    pub mode: SamplerMode,
    pub rng_seed: u64,
}

impl SamplerConfig {
    /// The exact sampler has `epsilon = 0`; any value below 1 is accepted for it.
    pub fn validate(&self) -> Result<(), SamplingError> {
        match self.mode {
            SamplerMode::Exact if (0.0..1.0).contains(&self.epsilon) => Ok(()),
            _ => check_epsilon(self.epsilon),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<(), SamplingError> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(SamplingError::InvalidEpsilon(epsilon))
    }
}

/// Uniform sampler over an enumerated subgroup.
#[derive(Clone, Debug)]
pub struct ExactSampler {
    elements: Vec<ElementCode>,
}

impl ExactSampler {
    pub fn new(group: &GroupOracle, gens: &[ElementCode], cap: usize) -> Result<Self, GroupError> {
        Ok(ExactSampler { elements: enumerate_closure(group, gens, cap)?.into_iter().collect() })
    }

    /// Sampler over an already-enumerated subgroup. `elements` must be nonempty.
    pub fn from_elements(elements: Vec<ElementCode>) -> Self {
        assert!(!elements.is_empty(), "a subgroup contains at least the identity");
        ExactSampler { elements }
    }

    pub fn support(&self) -> &[ElementCode] {
        &self.elements
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> ElementCode {
        self.elements[rng.gen_range(0..self.elements.len())]
    }
}

/// Random-subproduct sampler; see the module docs.
#[derive(Clone, Debug)]
pub struct SubproductSampler {
    list: Vec<ElementCode>,
    identity: ElementCode,
}

impl SubproductSampler {
    /// Number of subproducts appended to the generator list.
    pub fn rounds(epsilon: f64, cap: usize) -> usize {
        let cap_bits = (cap.max(2) as f64).log2().ceil() as usize;
        let eps_bits = (1.0 / epsilon).log2().ceil().max(0.0) as usize;
        cap_bits + eps_bits
    }

    pub fn new<R: Rng + ?Sized>(
        group: &GroupOracle,
        gens: &[ElementCode],
        epsilon: f64,
        cap: usize,
        rng: &mut R,
    ) -> Result<Self, SamplingError> {
        check_epsilon(epsilon)?;
        let mut sampler = SubproductSampler { list: gens.to_vec(), identity: group.identity() };
        if gens.is_empty() {
            return Ok(sampler);
        }
        for _ in 0..Self::rounds(epsilon, cap) {
            let x = sampler.draw(group, rng);
            sampler.list.push(x);
        }
        Ok(sampler)
    }

    pub fn list_len(&self) -> usize {
        self.list.len()
    }

    pub fn draw<R: Rng + ?Sized>(&self, group: &GroupOracle, rng: &mut R) -> ElementCode {
        let mut acc: Option<ElementCode> = None;
        for &x in &self.list {
            if rng.gen::<bool>() {
                acc = Some(match acc {
                    None => x,
                    Some(a) => group.product(a, x),
                });
            }
        }
        acc.unwrap_or(self.identity)
    }
}

/// Either sampler behind one interface.
#[derive(Clone, Debug)]
pub enum Sampler {
    Exact(ExactSampler),
    Subproduct(SubproductSampler),
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, group: &GroupOracle, rng: &mut R) -> ElementCode {
        match self {
            Sampler::Exact(s) => s.draw(rng),
            Sampler::Subproduct(s) => s.draw(group, rng),
        }
    }
}

/// One exactly uniform element of `<gens>`.
pub fn sample_exact(group: &GroupOracle, gens: &[ElementCode], seed: u64) -> Result<ElementCode, GroupError> {
    let sampler = ExactSampler::new(group, gens, DEFAULT_CLOSURE_CAP)?;
    Ok(sampler.draw(&mut ChaCha8Rng::seed_from_u64(seed)))
}

/// One nearly uniform element of `<gens>`, using oracle queries only.
pub fn sample_near_uniform(
    group: &GroupOracle,
    gens: &[ElementCode],
    epsilon: f64,
    seed: u64,
) -> Result<ElementCode, SamplingError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = SubproductSampler::new(group, gens, epsilon, DEFAULT_CLOSURE_CAP, &mut rng)?;
    Ok(sampler.draw(group, &mut rng))
}

fn checked_total(counts: &HashMap<ElementCode, u64>, subgroup: &IndexSet<ElementCode>) -> Result<f64, SamplingError> {
    if let Some(outside) = counts.keys().filter(|c| !subgroup.contains(*c)).min() {
        return Err(SamplingError::OutsideSubgroup(*outside));
    }
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(SamplingError::EmptyHistogram);
    }
    Ok(total as f64)
}

/// `(1/2) * sum_h |count(h)/N - 1/|H||` over the subgroup `H`.
pub fn tv_distance_empirical(
    counts: &HashMap<ElementCode, u64>,
    subgroup: &IndexSet<ElementCode>,
) -> Result<f64, SamplingError> {
    let total = checked_total(counts, subgroup)?;
    let uniform = 1.0 / subgroup.len() as f64;
    let sum: f64 = subgroup.iter().map(|h| (counts.get(h).copied().unwrap_or(0) as f64 / total - uniform).abs()).sum();
    Ok(sum / 2.0)
}

/// Pearson statistic of the histogram against the uniform distribution on
/// the subgroup (`|H| - 1` degrees of freedom).
pub fn chi_square_statistic(
    counts: &HashMap<ElementCode, u64>,
    subgroup: &IndexSet<ElementCode>,
) -> Result<f64, SamplingError> {
    let total = checked_total(counts, subgroup)?;
    let expected = total / subgroup.len() as f64;
    Ok(subgroup
        .iter()
        .map(|h| {
            let d = counts.get(h).copied().unwrap_or(0) as f64 - expected;
            d * d / expected
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub mode: SamplerMode,
    pub epsilon: f64,
    pub draws: u64,
    pub subgroup_order: usize,
    pub tv_distance: f64,
    pub chi_square: f64,
    /// Oracle queries spent building the sampler and drawing, excluding the
    /// enumeration used for scoring.
    pub queries: u64,
    pub setup_queries: u64,
    pub queries_per_draw: f64,
}

/// Draws `draws` samples from `<gens>` and scores them against the
/// enumerated subgroup.
pub fn sampler_test(
    group: &GroupOracle,
    gens: &[ElementCode],
    config: &SamplerConfig,
    draws: u64,
    cap: usize,
) -> Result<SamplerReport, SamplingError> {
    config.validate()?;
    let scoring = group.fork();
    let subgroup = enumerate_closure(&scoring, gens, cap)?;
    let oracle = group.fork();
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let sampler = match config.mode {
        SamplerMode::Exact => Sampler::Exact(ExactSampler::from_elements(subgroup.iter().copied().collect())),
        SamplerMode::Subproduct => {
            Sampler::Subproduct(SubproductSampler::new(&oracle, gens, config.epsilon, cap, &mut rng)?)
        }
    };
    let setup = oracle.queries();
    let mut counts: HashMap<ElementCode, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(sampler.draw(&oracle, &mut rng)).or_default() += 1;
    }
    let used: QueryCounts = oracle.queries();
    let draw_queries = (used - setup).total();
    Ok(SamplerReport {
        mode: config.mode,
        epsilon: config.epsilon,
        draws,
        subgroup_order: subgroup.len(),
        tv_distance: tv_distance_empirical(&counts, &subgroup)?,
        chi_square: chi_square_statistic(&counts, &subgroup)?,
        queries: used.total(),
        setup_queries: setup.total(),
        queries_per_draw: if draws == 0 { 0.0 } else { draw_queries as f64 / draws as f64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{make_group, ConcreteGroupSpec};

    fn group(spec: &str) -> GroupOracle {
        make_group(&spec.parse().unwrap()).unwrap()
    }

    #[test]
    fn empty_generators_give_identity() {
        let g = group("cyclic:12");
        for seed in 0..20 {
            assert_eq!(sample_exact(&g, &[], seed).unwrap(), g.identity());
            assert_eq!(sample_near_uniform(&g, &[], 0.5, seed).unwrap(), g.identity());
        }
    }

    #[test]
    fn exact_sampler_on_cyclic_2_is_balanced() {
        let g = make_group(&ConcreteGroupSpec::cyclic(2)).unwrap();
        let s = ExactSampler::new(&g, g.generators(), 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ones = (0..10_000).filter(|_| s.draw(&mut rng) != g.identity()).count();
        let freq = ones as f64 / 10_000.0;
        assert!((0.47..=0.53).contains(&freq), "{freq}");
    }

    #[test]
    fn near_uniform_stays_in_subgroup() {
        let g = group("cyclic:12");
        let four = g.residue(4).unwrap();
        let sub = enumerate_closure(&g, &[four], 100).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = SubproductSampler::new(&g, &[four], 2f64.powi(-8), 100, &mut rng).unwrap();
        for _ in 0..1000 {
            assert!(sub.contains(&s.draw(&g, &mut rng)));
        }
    }

    #[test]
    fn tv_distance_formula() {
        let g = make_group(&ConcreteGroupSpec::cyclic(2)).unwrap();
        let sub = enumerate_closure(&g, g.generators(), 10).unwrap();
        let one = g.residue(1).unwrap();
        let uniform = HashMap::from([(g.identity(), 5), (one, 5)]);
        assert_eq!(tv_distance_empirical(&uniform, &sub).unwrap(), 0.0);
        let point = HashMap::from([(one, 7)]);
        assert_eq!(tv_distance_empirical(&point, &sub).unwrap(), 0.5);
        assert_eq!(tv_distance_empirical(&HashMap::new(), &sub), Err(SamplingError::EmptyHistogram));
    }

    #[test]
    fn tv_distance_flags_escapes() {
        let g = group("cyclic:12");
        let sub = enumerate_closure(&g, &[g.residue(6).unwrap()], 10).unwrap();
        let three = g.residue(3).unwrap();
        let counts = HashMap::from([(three, 1)]);
        assert_eq!(tv_distance_empirical(&counts, &sub), Err(SamplingError::OutsideSubgroup(three)));
    }

    #[test]
    fn epsilon_is_validated() {
        let g = group("cyclic:12");
        for eps in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(sample_near_uniform(&g, g.generators(), eps, 0), Err(SamplingError::InvalidEpsilon(_))));
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("exact".parse::<SamplerMode>().unwrap(), SamplerMode::Exact);
        assert_eq!("subproduct".parse::<SamplerMode>().unwrap(), SamplerMode::Subproduct);
        assert!("pra".parse::<SamplerMode>().is_err());
    }

    #[test]
    fn sampler_test_is_reproducible() {
        let g = group("perm:3:(1 2),(1 2 3)");
        let cfg = SamplerConfig { epsilon: 2f64.powi(-8), mode: SamplerMode::Subproduct, rng_seed: 5 };
        let a = sampler_test(&g, g.generators(), &cfg, 2000, 100).unwrap();
        let b = sampler_test(&g, g.generators(), &cfg, 2000, 100).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.subgroup_order, 6);
        assert!(a.queries_per_draw > 0.0);
    }
}
