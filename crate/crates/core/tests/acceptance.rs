//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits nonzero on any FAIL.

// `!(x <= y)` is deliberate: NaN must fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use indexmap::IndexSet;
use num_bigint::BigUint;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use solvorder_core::arith::prime_factors;
use solvorder_core::group::{enumerate_closure, make_group, ElementCode, Exponent, GroupOracle, DEFAULT_CLOSURE_CAP};
use solvorder_core::harness::{
    cmd_run, fixture, fixture_info, group_order, run_trial, ExperimentConfig, TrialClass, TrialRecord, FIXTURES,
    PROTOCOL_FIXTURES,
};
use solvorder_core::polycyclic::{compute_pcgs, refine_with_primes, NormalForm};
use solvorder_core::protocol::{
    execute, masked_distribution, verifier_challenge_3msg, verifier_setup_2msg, AbortReason, Outcome, ProtocolConfig,
    ProtocolKind,
};
use solvorder_core::prover::{honest_commit, inflatable_rounds, AdversaryStrategy, ProverKind};
use solvorder_core::sampling::{sampler_test, SamplerConfig, SamplerMode};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

struct Fx {
    name: &'static str,
    spec: &'static str,
    group: GroupOracle,
    order: u64,
    primes: Vec<u64>,
}

fn load(name: &str) -> Fx {
    let f = fixture(name).expect("known fixture");
    let group = make_group(&f.spec.parse().unwrap()).unwrap();
    let order = group_order(&group, DEFAULT_CLOSURE_CAP).unwrap();
    Fx { name: f.name, spec: f.spec, group, order, primes: prime_factors(order) }
}

fn protocol_fixtures() -> Vec<Fx> {
    PROTOCOL_FIXTURES.iter().map(|n| load(n)).collect()
}

fn solvable_fixtures() -> Vec<Fx> {
    FIXTURES.iter().filter(|f| fixture_info(f, DEFAULT_CLOSURE_CAP).unwrap().solvable).map(|f| load(f.name)).collect()
}

fn campaign(fx: &Fx, protocol: ProtocolKind, prover: ProverKind, trials: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        primes: (protocol == ProtocolKind::TwoMessage).then(|| fx.primes.clone()),
        trials,
        seed,
        ..ExperimentConfig::new(fx.spec, protocol, prover)
    }
}

/// The refined sequence by the verifier's own route, with quotient orders
/// from independent closure enumerations.
fn refined_with_closure_orders(fx: &Fx) -> (Vec<ElementCode>, Vec<u64>, Vec<u64>) {
    let g = &fx.group;
    let pcgs = compute_pcgs(g, DEFAULT_CLOSURE_CAP).unwrap();
    let refined = refine_with_primes(g, &pcgs, &fx.primes, g.encoding_length()).unwrap();
    let h = refined.elements;
    let mut sizes = vec![1u64];
    for i in 1..=h.len() {
        sizes.push(enumerate_closure(g, &h[..i], DEFAULT_CLOSURE_CAP).unwrap().len() as u64);
    }
    let m = sizes.windows(2).map(|w| w[1] / w[0]).collect();
    (h, refined.primes.unwrap(), m)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut details = Vec::new();
    for fx in protocol_fixtures() {
        let (report, _) = cmd_run(&campaign(&fx, ProtocolKind::TwoMessage, ProverKind::Honest, 200, 101)).unwrap();
        let rate = report.counts.correct_order as f64 / 200.0;
        ensure!(rate >= 0.99, "{}: Order(|G|) rate {rate} < 0.99", fx.name);
        details.push(format!("{}={}/200", fx.name, report.counts.correct_order));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "runtime {secs:.2}s >= 10s");
    Ok(format!("{} in {secs:.2}s", details.join(" ")))
}

fn criterion_2() -> Verdict {
    let mut details = Vec::new();
    for fx in protocol_fixtures() {
        let (report, records) =
            cmd_run(&campaign(&fx, ProtocolKind::ThreeMessage, ProverKind::Honest, 50, 202)).unwrap();
        let step1_pass = records
            .iter()
            .filter(|r| !matches!(r.outcome, Outcome::Abort(AbortReason::Commitment { .. })))
            .filter(|r| r.transcripts[0].messages.len() == 3)
            .count();
        ensure!(step1_pass == 50, "{}: Step 1 passed in {step1_pass}/50", fx.name);
        let rate = report.counts.correct_order as f64 / 50.0;
        ensure!(rate >= 0.98, "{}: Order(|G|) rate {rate} < 0.98", fx.name);
        details.push(format!("{}={}/50", fx.name, report.counts.correct_order));
    }
    Ok(format!("step 1 passed 50/50 on every fixture; {}", details.join(" ")))
}

fn inflation_target(fx: &Fx) -> Result<(usize, u64), String> {
    let (commitment, nf) = honest_commit(&fx.group, DEFAULT_CLOSURE_CAP).unwrap();
    let rounds = inflatable_rounds(&nf);
    let first = *rounds.first().ok_or("no trivial round with |H_{i-1}| >= 2")?;
    Ok((first, commitment.primes[first]))
}

fn criterion_3() -> Verdict {
    let fx = load("c12");
    let (target, r) = inflation_target(&fx)?;
    let adversary = ProverKind::Adversary(AdversaryStrategy::GuessInflate);
    let (report, records) = cmd_run(&campaign(&fx, ProtocolKind::TwoMessage, adversary, 2000, 303)).unwrap();
    let wrong = report.counts.wrong_order as f64 / 2000.0;
    let abort = report.counts.abort as f64 / 2000.0;
    let inflated = BigUint::from(fx.order * r);
    for rec in &records {
        match &rec.outcome {
            Outcome::Order(v) if rec.class == TrialClass::WrongOrder => {
                ensure!(*v == inflated, "wrong order {v} is not |G|*r_{}", target + 1)
            }
            Outcome::Abort(AbortReason::Round { round }) => {
                ensure!(*round == target + 1, "abort at round {round}, target was {}", target + 1)
            }
            Outcome::Order(_) => return Err("correct order despite the forged round".into()),
            Outcome::Abort(other) => return Err(format!("unexpected abort {other}")),
        }
    }
    ensure!((0.42..=0.54).contains(&wrong), "wrong-order rate {wrong} outside [0.42, 0.54]");
    ensure!((0.46..=0.58).contains(&abort), "abort rate {abort} outside [0.46, 0.58]");
    Ok(format!(
        "c12 round {} (r={r}): wrong={wrong:.4} [{:.3},{:.3}] abort={abort:.4}",
        target + 1,
        report.rates.wrong_order.low,
        report.rates.wrong_order.high
    ))
}

fn criterion_4() -> Verdict {
    let fx = load("c12");
    let adversary = ProverKind::Adversary(AdversaryStrategy::GuessInflate);
    let config = ExperimentConfig { repetitions: 3, ..campaign(&fx, ProtocolKind::TwoMessage, adversary, 4000, 404) };
    let (report, _) = cmd_run(&config).unwrap();
    let wrong = report.counts.wrong_order as f64 / 4000.0;
    ensure!(wrong <= 0.18, "wrong-order rate {wrong} > 0.18");
    Ok(format!("k=3 unanimous: wrong={wrong:.4} (expected ~0.125)"))
}

fn criterion_5() -> Verdict {
    let deflate = ProverKind::Adversary(AdversaryStrategy::Deflate);
    let mut nontrivial_checked = 0;
    let mut runs = 0;
    for fx in solvable_fixtures() {
        let (h, _, m) = refined_with_closure_orders(&fx);
        for i in (0..h.len()).filter(|&i| m[i] > 1) {
            let below: IndexSet<ElementCode> = enumerate_closure(&fx.group, &h[..i], DEFAULT_CLOSURE_CAP).unwrap();
            ensure!(!below.contains(&h[i]), "{}: h_{} lies in H_{}", fx.name, i + 1, i);
            nontrivial_checked += 1;
        }
        for protocol in [ProtocolKind::TwoMessage, ProtocolKind::ThreeMessage] {
            let (report, _) = cmd_run(&campaign(&fx, protocol, deflate, 1000, 505)).unwrap();
            ensure!(
                report.counts.wrong_order == 0,
                "{} {protocol}: {} wrong orders",
                fx.name,
                report.counts.wrong_order
            );
            runs += 1000;
        }
    }
    Ok(format!("0 wrong orders in {runs} runs; h_i outside H_(i-1) on all {nontrivial_checked} nontrivial rounds"))
}

fn criterion_6() -> Verdict {
    let mut rounds = 0;
    for fx in solvable_fixtures() {
        let (h, r, m) = refined_with_closure_orders(&fx);
        for i in 0..h.len() {
            ensure!(m[i] == 1 || m[i] == r[i], "{}: m_{} = {} with r = {}", fx.name, i + 1, m[i], r[i]);
        }
        let product: u64 = m.iter().product();
        ensure!(product == fx.order, "{}: product of quotients {product} != {}", fx.name, fx.order);
        rounds += h.len();
        if fx.name == "c12" {
            let mut nontrivial: Vec<u64> = m.iter().copied().filter(|&x| x > 1).collect();
            nontrivial.sort_unstable();
            ensure!(nontrivial == vec![2, 2, 3], "c12 nontrivial quotients {nontrivial:?}");
        }
    }
    Ok(format!("m_i in {{1, r_i}} and product = |G| over {rounds} positions; c12 gives {{2,2,3}}"))
}

fn check_bijection(g: &GroupOracle, h: &[ElementCode], m: &[u64], order: u64) -> Result<(), String> {
    let whole = enumerate_closure(g, g.generators(), DEFAULT_CLOSURE_CAP).unwrap();
    let tuples: u64 = m.iter().product();
    if tuples != order {
        return Err(format!("{tuples} tuples for order {order}"));
    }
    let mut image = IndexSet::new();
    let mut exps: Vec<Exponent> = vec![0; h.len()];
    for _ in 0..tuples {
        let x = g.eval_word(h, &exps).unwrap();
        if !whole.contains(&x) || !image.insert(x) {
            return Err(format!("tuple {exps:?} collides or leaves G"));
        }
        for (a, &mi) in exps.iter_mut().zip(m) {
            *a += 1;
            if *a < Exponent::from(mi) {
                break;
            }
            *a = 0;
        }
    }
    if image.len() as u64 != order {
        return Err("image is not all of G".into());
    }
    Ok(())
}

fn criterion_7() -> Verdict {
    let mut checked = Vec::new();
    for fx in solvable_fixtures().into_iter().filter(|f| f.order <= 10_000) {
        let (h, _, m) = refined_with_closure_orders(&fx);
        check_bijection(&fx.group, &h, &m, fx.order).map_err(|e| format!("{} refined: {e}", fx.name))?;
        let pcgs = compute_pcgs(&fx.group, DEFAULT_CLOSURE_CAP).unwrap();
        let base = NormalForm::build(&fx.group, &pcgs.elements, DEFAULT_CLOSURE_CAP).unwrap();
        check_bijection(&fx.group, &pcgs.elements, base.quotient_orders(), fx.order)
            .map_err(|e| format!("{} pcgs: {e}", fx.name))?;
        checked.push(fx.name);
    }
    Ok(format!("bijective on {}", checked.join(", ")))
}

fn criterion_8() -> Verdict {
    let mut details = Vec::new();
    for name in ["c12", "s3"] {
        let fx = load(name);
        let g = &fx.group;
        let exact = SamplerConfig { epsilon: 0.0, mode: SamplerMode::Exact, rng_seed: 808 };
        let rep = sampler_test(g, g.generators(), &exact, 100_000, 1000).map_err(|e| e.to_string())?;
        let critical = ChiSquared::new((rep.subgroup_order - 1) as f64).unwrap().inverse_cdf(0.99);
        ensure!(rep.chi_square <= critical, "{name}: chi-square {} > {critical:.3}", rep.chi_square);

        let sub = SamplerConfig { epsilon: 2f64.powi(-8), mode: SamplerMode::Subproduct, rng_seed: 809 };
        let rep_sub = sampler_test(g, g.generators(), &sub, 100_000, 1000).map_err(|e| e.to_string())?;
        ensure!(rep_sub.tv_distance <= 0.05, "{name}: subproduct TV {} > 0.05", rep_sub.tv_distance);

        let mut per_draw = Vec::new();
        let mut totals = Vec::new();
        for k in 4..=12 {
            let cfg = SamplerConfig { epsilon: 2f64.powi(-k), mode: SamplerMode::Subproduct, rng_seed: 810 + k as u64 };
            let r = sampler_test(g, g.generators(), &cfg, 10_000, 1000).map_err(|e| e.to_string())?;
            per_draw.push((k as f64, r.queries_per_draw));
            totals.push((k as f64, r.queries as f64));
        }
        for (label, series) in [("per-draw", &per_draw), ("total", &totals)] {
            let (k0, q0) = series[0];
            for &(k, q) in series.iter() {
                ensure!(
                    q <= q0 * k / k0 * 1.05,
                    "{name}: {label} queries {q:.1} at log(1/eps)={k} exceed linear bound {:.1}",
                    q0 * k / k0 * 1.05
                );
            }
        }
        details.push(format!(
            "{name}: chi2={:.2}<={critical:.2} tv={:.4} q/draw {:.1}..{:.1}",
            rep.chi_square,
            rep_sub.tv_distance,
            per_draw[0].1,
            per_draw[per_draw.len() - 1].1
        ));
    }
    Ok(details.join("; "))
}

fn criterion_9() -> Verdict {
    let config = ProtocolConfig::default();
    let mut rounds = 0;
    for fx in protocol_fixtures() {
        let (state, _) = verifier_setup_2msg(&fx.group, &fx.primes, 909, &config).map_err(|e| e.to_string())?;
        let nf = NormalForm::build(&fx.group, state.elements(), DEFAULT_CLOSURE_CAP).unwrap();
        for i in (0..nf.len()).filter(|&i| nf.quotient_orders()[i] == 1) {
            let zero: BTreeMap<ElementCode, usize> = masked_distribution(&fx.group, &nf, i, false);
            let one = masked_distribution(&fx.group, &nf, i, true);
            ensure!(zero == one, "{}: round {} distributions differ", fx.name, i + 1);
            rounds += 1;
        }
    }
    Ok(format!("identical s=0/s=1 distributions on {rounds} trivial rounds"))
}

fn hand_counted_micro_run() -> Result<(), String> {
    // cyclic:2, one generator g, n = 1, primes {2}: the refined sequence is (g)
    // with r_1 = 2.
    let g = make_group(&"cyclic:2".parse().unwrap()).unwrap();
    let config = ProtocolConfig::default();

    // 3msg verifier: beta check g^2 (1 product), exact-sampler table for (g)
    // (2 products), masking g*x when s_1 = 1 (1 product). Alpha word g^1 and
    // the empty response word are free.
    let (_, t3) = execute(ProtocolKind::ThreeMessage, &g, &[], ProverKind::Honest, 17, &config);
    let (commitment, _) = honest_commit(&g.fork(), DEFAULT_CLOSURE_CAP).unwrap();
    let (state, _) = verifier_challenge_3msg(&g.fork(), &commitment, 17, &config);
    let s1 = u64::from(state.secret_bits()[0]);
    if (t3.verifier_queries.product, t3.verifier_queries.inverse) != (3 + s1, 0) {
        return Err(format!("3msg verifier {:?}, expected {} products", t3.verifier_queries, 3 + s1));
    }
    // 3msg prover: order by closure (2), PCGS (5 products, 1 inverse for the
    // commutator inverses), normal-form table (2), beta power (1).
    if (t3.prover_queries.product, t3.prover_queries.inverse) != (10, 1) {
        return Err(format!("3msg prover {:?}, expected 10 products and 1 inverse", t3.prover_queries));
    }

    // 2msg verifier: PCGS (5 + 1 inverse), table (2), mask (s_1).
    let (_, t2) = execute(ProtocolKind::TwoMessage, &g, &[2], ProverKind::Honest, 18, &config);
    let (state, _) = verifier_setup_2msg(&g.fork(), &[2], 18, &config).unwrap();
    let s1 = u64::from(state.secret_bits()[0]);
    if (t2.verifier_queries.product, t2.verifier_queries.inverse) != (7 + s1, 1) {
        return Err(format!("2msg verifier {:?}, expected {} products and 1 inverse", t2.verifier_queries, 7 + s1));
    }
    // 2msg prover: only the normal-form table for the received sequence.
    if (t2.prover_queries.product, t2.prover_queries.inverse) != (2, 0) {
        return Err(format!("2msg prover {:?}, expected 2 products", t2.prover_queries));
    }
    Ok(())
}

fn criterion_10() -> Verdict {
    let keep = ProtocolConfig { keep_bodies: true, ..ProtocolConfig::default() };
    let mut compared = 0;
    for fx in protocol_fixtures() {
        for protocol in [ProtocolKind::TwoMessage, ProtocolKind::ThreeMessage] {
            for prover in ProverKind::all() {
                for seed in [0, 1, 0xdead_beef] {
                    let a = execute(protocol, &fx.group, &fx.primes, prover, seed, &keep).1.to_json();
                    let b = execute(protocol, &fx.group, &fx.primes, prover, seed, &keep).1.to_json();
                    ensure!(a == b, "{} {protocol} {prover} seed {seed}: transcripts differ", fx.name);
                    compared += 1;
                }
            }
        }
    }
    let fx = load("s4");
    let config =
        campaign(&fx, ProtocolKind::TwoMessage, ProverKind::Adversary(AdversaryStrategy::RandomBits), 40, 1010);
    let (ra, la) = cmd_run(&config).unwrap();
    let (rb, lb) = cmd_run(&config).unwrap();
    ensure!(ra.to_json_pretty() == rb.to_json_pretty(), "reports differ between identical campaigns");
    let order = BigUint::from(fx.order);
    let sequential: Vec<TrialRecord> = (0..40).map(|i| run_trial(&config, &fx.group, &order, i)).collect();
    ensure!(la == lb && la == sequential, "parallel and sequential records differ");
    hand_counted_micro_run()?;
    Ok(format!("{compared} transcript pairs byte-identical; reports reproducible; micro-run counts match"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("completeness, 2-message", criterion_1),
        ("completeness, 3-message", criterion_2),
        ("soundness, inflation", criterion_3),
        ("soundness, amplification", criterion_4),
        ("soundness, deflation", criterion_5),
        ("refinement quotient orders", criterion_6),
        ("normal-form bijection", criterion_7),
        ("samplers", criterion_8),
        ("challenge hiding", criterion_9),
        ("determinism and accounting", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
