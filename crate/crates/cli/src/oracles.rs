// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic ground-truth checks. `netloc bench` runs them at a reduced
//! scale; the acceptance tests run them at full scale.

use std::time::{Duration, Instant};

use netloc_core::effects::{
    atoms_design, atoms_subset_search, beta_regression_fit, evaluate_ablation_predictions, loo_compare, BetaLikelihood,
    DesignMatrix, Frame, Term,
};
use netloc_core::generalization::{kfold_generalization, GeneralizationOptions};
use netloc_core::localizer::{conjunctive_statistic, localize, simple_statistic, LocalizerConfig, StatOptions};
use netloc_core::stats::{bh_fdr, paired_t, student_t_sf, welch_t};
use netloc_core::store::{Method, UnitId};
use netloc_core::synthetic::{
    generate_behavior, generate_effect_log, generate_planted_suite, recovery_score, BehaviorSpec, EffectLogSpec,
    PartialPlant, PlantSpec,
};
use netloc_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// Repetition counts for each check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scale {
    pub recovery_seeds: u64,
    pub null_seeds: u64,
    pub selectivity_seeds: u64,
    pub crossval_null_seeds: u64,
    pub kernel_instances: u64,
    pub beta_simulations: u64,
    pub gradient_points: u64,
    pub engine_seeds: u64,
    pub loo_runs: u64,
    pub atoms_seeds: u64,
}

impl Scale {
    pub const FULL: Scale = Scale {
        recovery_seeds: 20,
        null_seeds: 100,
        selectivity_seeds: 20,
        crossval_null_seeds: 100,
        kernel_instances: 1000,
        beta_simulations: 100,
        gradient_points: 100,
        engine_seeds: 100,
        loo_runs: 100,
        atoms_seeds: 100,
    };

    pub const QUICK: Scale = Scale {
        recovery_seeds: 5,
        null_seeds: 20,
        selectivity_seeds: 5,
        crossval_null_seeds: 10,
        kernel_instances: 200,
        beta_simulations: 20,
        gradient_points: 20,
        engine_seeds: 10,
        loo_runs: 20,
        atoms_seeds: 5,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// Wall time of the timed part, when the check has one.
    pub elapsed: Option<Duration>,
}

impl Outcome {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Outcome { name, passed, detail, elapsed: None }
    }
}

/// `count >= ceil(fraction * total)`.
fn at_least(count: u64, fraction: f64, total: u64) -> bool {
    count as f64 >= (fraction * total as f64).ceil()
}

fn simple_opts() -> StatOptions {
    StatOptions { exec: Execution::Sequential, ..StatOptions::default() }
}

/// Ten 2-sigma units in L=8, d=128 with 100 stimuli per condition.
pub fn recovery(scale: &Scale) -> Outcome {
    let start = Instant::now();
    let (mut min_p, mut min_r) = (1.0f64, 1.0f64);
    for seed in 0..scale.recovery_seeds {
        let spec = PlantSpec::new(8, 128, 100, 2.0, seed).with_random_units(10);
        let planted = generate_planted_suite(&spec, 1, 1).expect("valid spec");
        let cfg = LocalizerConfig::for_suite("planted", &planted.suite, Method::Simple);
        let loc = localize(&planted.tensors, &cfg, &simple_opts(), 0.01).expect("localizes");
        let r = recovery_score(&loc.target, &planted.truth);
        min_p = min_p.min(r.precision);
        min_r = min_r.min(r.recall);
    }
    let mut out = Outcome::new(
        "planted-subnetwork recovery",
        min_p >= 0.9 && min_r >= 0.9,
        format!("min precision {min_p:.3}, min recall {min_r:.3} over {} seeds", scale.recovery_seeds),
    );
    out.elapsed = Some(start.elapsed());
    out
}

pub fn null_calibration(scale: &Scale) -> Outcome {
    let (mut any, mut overlap) = (0u64, 0u64);
    for seed in 0..scale.null_seeds {
        let spec = PlantSpec::new(8, 128, 100, 0.0, 1000 + seed);
        let planted = generate_planted_suite(&spec, 1, 1).expect("valid spec");
        let cfg = LocalizerConfig::for_suite("null", &planted.suite, Method::Simple);
        let loc = localize(&planted.tensors, &cfg, &simple_opts(), 0.01).expect("localizes");
        any += (loc.stats.n_significant() > 0) as u64;
        overlap += !loc.target.is_disjoint(&loc.control) as u64;
    }
    let rate = any as f64 / scale.null_seeds as f64;
    Outcome::new(
        "null calibration",
        rate <= 0.10 && overlap == 0,
        format!("{any}/{} seeds with a significant unit, {overlap} overlapping mask pairs", scale.null_seeds),
    )
}

/// Exact equality of the two statistics on one-target, one-control suites.
pub fn conjunction_reduction(_scale: &Scale) -> Outcome {
    let mut mismatches = Vec::new();
    for (paired, seed) in [(false, 1), (true, 2), (false, 3), (true, 4)] {
        let mut spec = PlantSpec::new(4, 64, 40, 1.0, seed).with_random_units(5);
        spec.paired = paired;
        let planted = generate_planted_suite(&spec, 1, 1).expect("valid spec");
        let opts = simple_opts();
        let simple = LocalizerConfig::for_suite("x", &planted.suite, Method::Simple);
        let conj = LocalizerConfig::for_suite("x", &planted.suite, Method::Conjunctive);
        let a = simple_statistic(&planted.tensors, &simple, &opts).expect("simple");
        let b = conjunctive_statistic(&planted.tensors, &conj, &opts).expect("conjunctive");
        if a.m != b.m || a.p != b.p || a.df != b.df || a.significant != b.significant {
            mismatches.push(format!("seed {seed} paired={paired}"));
        }
    }
    Outcome::new(
        "conjunction reduction",
        mismatches.is_empty(),
        if mismatches.is_empty() { "arrays equal on 4 suites".into() } else { mismatches.join("; ") },
    )
}

/// A unit planted in only one of two target sets.
pub fn conjunction_selectivity(scale: &Scale) -> Outcome {
    let mut hits = 0u64;
    for seed in 0..scale.selectivity_seeds {
        let mut spec = PlantSpec::new(8, 128, 100, 2.0, 2000 + seed).with_random_units(5);
        let distractor = (0..8 * 128)
            .map(|f| UnitId::from_flat((f * 37 + seed as usize * 11) % (8 * 128), 128))
            .find(|u| !spec.planted_units.contains(u))
            .expect("free unit");
        spec.partial = vec![PartialPlant { unit: distractor, target_sets: vec![0] }];
        let planted = generate_planted_suite(&spec, 2, 1).expect("valid spec");
        let opts = simple_opts();
        let mask = |method| {
            let cfg = LocalizerConfig::for_suite("x", &planted.suite, method);
            localize(&planted.tensors, &cfg, &opts, 0.01).expect("localizes").target
        };
        hits += (mask(Method::Simple).contains(distractor) && !mask(Method::Conjunctive).contains(distractor)) as u64;
    }
    Outcome::new(
        "conjunction selectivity",
        at_least(hits, 0.9, scale.selectivity_seeds),
        format!("{hits}/{} seeds: distractor in the simple mask only", scale.selectivity_seeds),
    )
}

pub fn cross_validation(scale: &Scale) -> Outcome {
    let run = |effect: f64, seed: u64| {
        let spec = PlantSpec::new(8, 128, 100, effect, seed).with_random_units(10);
        let planted = generate_planted_suite(&spec, 1, 1).expect("valid spec");
        let cfg = LocalizerConfig::for_suite("planted", &planted.suite, Method::Simple);
        let opts = GeneralizationOptions { stat: simple_opts(), ..GeneralizationOptions::default() };
        kfold_generalization(&planted.tensors, &cfg, 10, seed, &opts).expect("folds").n_significant()
    };
    let planted = run(2.0, 7);
    let total: usize = (0..scale.crossval_null_seeds).map(|s| run(0.0, 3000 + s)).sum();
    let mean = total as f64 / scale.crossval_null_seeds as f64;
    Outcome::new(
        "cross-validation",
        planted >= 9 && mean <= 1.5,
        format!("planted {planted}/10 folds; null mean {mean:.2} over {} seeds", scale.crossval_null_seeds),
    )
}

/// `P(|T| <= t)` for integer degrees of freedom by the finite series in
/// `theta = atan(t / sqrt(df))`.
pub fn t_central_mass(t: f64, df: u32) -> f64 {
    let theta = (t.abs() / (df as f64).sqrt()).atan();
    let (s, c2) = (theta.sin(), theta.cos().powi(2));
    if df % 2 == 1 {
        let mut term = 1.0;
        let mut sum = if df > 1 { 1.0 } else { 0.0 };
        for k in (3..df).step_by(2) {
            term *= (k - 1) as f64 / k as f64 * c2;
            sum += term;
        }
        let tail = if df > 1 { s * theta.cos() * sum } else { 0.0 };
        2.0 / std::f64::consts::PI * (theta + tail)
    } else {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in (2..df).step_by(2) {
            term *= (k - 1) as f64 / k as f64 * c2;
            sum += term;
        }
        s * sum
    }
}

fn bh_by_definition(p: &[f64], q: f64) -> Vec<bool> {
    let m = p.len() as f64;
    p.iter()
        .map(|&pi| {
            p.iter().any(|&pj| {
                let rank = p.iter().filter(|&&pk| pk <= pj).count() as f64;
                pj >= pi && pj <= q * rank / m
            })
        })
        .collect()
}

fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (mean, x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Kernels against textbook formulas and the closed-form t distribution.
pub fn kernels(scale: &Scale) -> Outcome {
    const TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut bh_mismatch = 0u64;
    for _ in 0..scale.kernel_instances {
        let n = rng.random_range(3..30);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| 0.5 + rng.random_range(-2.0..2.0)).collect();
        let ((mx, vx), (my, vy)) = (moments(&x), moments(&y));
        let nf = n as f64;
        let w = welch_t(&x, &y).expect("welch");
        let se2 = vx / nf + vy / nf;
        worst = worst.max((w.t - (mx - my) / se2.sqrt()).abs());
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let (md, vd) = moments(&d);
        let p = paired_t(&x, &y).expect("paired");
        worst = worst.max((p.t - md / (vd / nf).sqrt()).abs());
        let df = (n - 1) as u32;
        let reference = 1.0 - t_central_mass(p.t, df);
        worst = worst.max((p.p_two_sided - reference).abs());
        worst = worst.max((2.0 * student_t_sf(p.t.abs(), df as f64) - reference).abs());

        let pv: Vec<f64> = (0..rng.random_range(1..40))
            .map(|_| if rng.random_bool(0.3) { rng.random_range(0.0..0.005) } else { rng.random::<f64>() })
            .collect();
        bh_mismatch += (bh_fdr(&pv, 0.05).expect("bh") != bh_by_definition(&pv, 0.05)) as u64;
    }
    Outcome::new(
        "statistics kernels",
        worst <= TOL && bh_mismatch == 0,
        format!("max abs error {worst:.2e} over {} instances, {bh_mismatch} BH mismatches", scale.kernel_instances),
    )
}

fn beta_data(n: usize, beta: [f64; 2], phi: f64, rng: &mut ChaCha8Rng) -> DesignMatrix {
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            let mu = 1.0 / (1.0 + (-(beta[0] + beta[1] * v)).exp());
            Beta::new(mu * phi, (1.0 - mu) * phi).expect("shape").sample(rng)
        })
        .collect();
    let frame = Frame::new(n).numeric("x", &x).expect("frame");
    DesignMatrix::build(&frame, &[Term::Intercept, Term::numeric("x")], &y).expect("design")
}

/// Coverage of each of `(beta0, beta1, ln phi)` by +/- 2 SE, and the
/// analytic gradient against central differences.
pub fn beta_regression(scale: &Scale) -> Outcome {
    let (beta, phi) = ([0.4, -0.7], 25.0);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut covered = [0u64; 3];
    for _ in 0..scale.beta_simulations {
        let d = beta_data(300, beta, phi, &mut rng);
        let fit = beta_regression_fit(&d).expect("fit");
        let theta = fit.theta();
        let truth = [beta[0], beta[1], phi.ln()];
        for j in 0..3 {
            covered[j] += ((theta[j] - truth[j]).abs() <= 2.0 * fit.std_error(j)) as u64;
        }
    }
    let d = beta_data(80, beta, phi, &mut rng);
    let lik = BetaLikelihood::new(&d.x, &d.y);
    let mut worst = 0.0f64;
    for _ in 0..scale.gradient_points {
        let theta = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(0.0..5.0)];
        let g = lik.gradient(&theta);
        for j in 0..3 {
            let h = 1e-5 * (1.0 + theta[j].abs());
            let (mut up, mut dn) = (theta, theta);
            up[j] += h;
            dn[j] -= h;
            let fd = (lik.value(&up) - lik.value(&dn)) / (2.0 * h);
            worst = worst.max((g[j] - fd).abs() / fd.abs().max(1.0));
        }
    }
    let min_cov = *covered.iter().min().expect("three");
    Outcome::new(
        "beta regression",
        at_least(min_cov, 0.9, scale.beta_simulations) && worst <= 1e-6,
        format!(
            "coverage b0 {}, b1 {}, ln phi {} of {}; max gradient error {worst:.2e}",
            covered[0], covered[1], covered[2], scale.beta_simulations
        ),
    )
}

pub fn prediction_engine(scale: &Scale) -> Outcome {
    let mut all = 0u64;
    for seed in 0..scale.engine_seeds {
        let log = generate_effect_log(&EffectLogSpec::new(0.8, 0.15, 0.15, 0.0, 0.03, 6, 4, 4000 + seed)).expect("log");
        let r = evaluate_ablation_predictions(&log.records, &log.models).expect("report");
        all += r.contrasts.iter().all(|c| c.supported) as u64;
    }
    let null = generate_effect_log(&EffectLogSpec::constant(0.75, 6, 4)).expect("log");
    let r = evaluate_ablation_predictions(&null.records, &null.models).expect("report");
    let supported: Vec<&str> = r.contrasts.iter().filter(|c| c.supported).map(|c| c.name.as_str()).collect();
    Outcome::new(
        "prediction engine",
        at_least(all, 0.9, scale.engine_seeds) && supported == ["P3.1"],
        format!("all six supported in {all}/{} seeds; null log supports {}", scale.engine_seeds, supported.join(" ")),
    )
}

fn loo_data(n: usize, rng: &mut ChaCha8Rng) -> (DesignMatrix, DesignMatrix) {
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|v| {
            let mu = 1.0 / (1.0 + (-(0.2 + 0.5 * v)).exp());
            Beta::new(mu * 30.0, (1.0 - mu) * 30.0).expect("shape").sample(rng)
        })
        .collect();
    let frame = Frame::new(n).numeric("x", &x).expect("frame");
    (
        DesignMatrix::build(&frame, &[Term::Intercept], &y).expect("design"),
        DesignMatrix::build(&frame, &[Term::Intercept, Term::numeric("x")], &y).expect("design"),
    )
}

pub fn loo_comparison(scale: &Scale) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut wins = 0u64;
    let mut identical_zero = true;
    for run in 0..scale.loo_runs {
        let (m0, m1) = loo_data(100, &mut rng);
        wins += (loo_compare(&m0, &m1, Execution::Parallel).expect("loo").elpd_diff > 0.0) as u64;
        if run < 3 {
            let same = loo_compare(&m1, &m1, Execution::Parallel).expect("loo");
            identical_zero &= same.elpd_diff == 0.0 && same.se_diff == 0.0;
        }
    }
    let mut atoms_ok = 0u64;
    for seed in 0..scale.atoms_seeds {
        let mut spec = BehaviorSpec::new(4, 12, true, 5000 + seed);
        spec.atoms = true;
        spec.percepts_effect = 1.5;
        let data = generate_behavior(&spec).expect("data");
        let (base, flags) = atoms_design(&data.cells, &data.models, &data.datasets).expect("design");
        let ranked = atoms_subset_search(&base, &flags, Execution::Parallel).expect("search");
        let base_rank = ranked.iter().find(|m| m.subset == 0).expect("base").rank;
        atoms_ok += ranked.iter().filter(|m| m.contains(5)).all(|m| m.rank < base_rank) as u64;
    }
    Outcome::new(
        "leave-one-out comparison",
        at_least(wins, 0.95, scale.loo_runs) && identical_zero && at_least(atoms_ok, 0.9, scale.atoms_seeds),
        format!(
            "true predictor wins {wins}/{}; identical designs tie exactly: {identical_zero}; percepts models above base in {atoms_ok}/{} seeds",
            scale.loo_runs, scale.atoms_seeds
        ),
    )
}

/// Every check, in report order.
pub fn run_all(scale: &Scale) -> Vec<Outcome> {
    vec![
        recovery(scale),
        null_calibration(scale),
        conjunction_reduction(scale),
        conjunction_selectivity(scale),
        cross_validation(scale),
        kernels(scale),
        beta_regression(scale),
        prediction_engine(scale),
        loo_comparison(scale),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_t_mass_hand_values() {
        // df = 1 is Cauchy: P(|T| <= 1) = 1/2
        assert!((t_central_mass(1.0, 1) - 0.5).abs() < 1e-15);
        // df = 2: P(|T| <= t) = t / sqrt(2 + t^2)
        assert!((t_central_mass(2.0, 2) - 2.0 / 6f64.sqrt()).abs() < 1e-15);
        assert_eq!(t_central_mass(0.0, 7), 0.0);
    }

    #[test]
    fn fractions_round_up() {
        assert!(at_least(18, 0.9, 20));
        assert!(!at_least(17, 0.9, 20));
        assert!(at_least(5, 0.9, 5));
        assert!(!at_least(4, 0.9, 5));
    }
}
