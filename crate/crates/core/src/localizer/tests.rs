// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::tests::standard_suites;
use super::*;
use crate::par::Execution;
use crate::store::{ActivationTensor, Method, UnitId};
use crate::synthetic::{generate_planted_suite, recovery_score, PartialPlant, PlantSpec};

// Textbook formulas, kept apart from the crate's summary arithmetic.
fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn p_oracle(t: f64, df: f64) -> f64 {
    2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t.abs())
}

fn welch_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    (t, df)
}

fn paired_oracle(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (m, v) = mean_var(&diff);
    (m / (v / diff.len() as f64).sqrt(), diff.len() as f64 - 1.0)
}

fn column(set: &ActivationSet, key: &crate::store::ConditionKey, unit: usize) -> Vec<f64> {
    let t = set.get(&key.suite, &key.condition).unwrap();
    (0..t.n_stimuli()).map(|s| t.row(s)[unit] as f64).collect()
}

fn pooled(set: &ActivationSet, keys: &[crate::store::ConditionKey], unit: usize) -> Vec<f64> {
    keys.iter().flat_map(|k| column(set, k, unit)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn planted(spec: &PlantSpec, nt: usize, nc: usize, method: Method) -> (ActivationSet, LocalizerConfig) {
    let p = generate_planted_suite(spec, nt, nc).unwrap();
    let cfg = LocalizerConfig::for_suite("planted", &p.suite, method);
    (p.tensors, cfg)
}

fn sequential() -> StatOptions {
    StatOptions { exec: Execution::Sequential, ..Default::default() }
}

/// Random activations for every condition of the four standard suites.
fn standard_tensors(n: usize, seed: u64) -> ActivationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ActivationSet::new();
    for suite in standard_suites() {
        for (_, s) in suite.sets() {
            set.insert(ActivationTensor {
                model_id: "toy".into(),
                suite_name: suite.name.clone(),
                condition_name: s.condition_name.clone(),
                stimulus_ids: (0..n).map(|i| format!("{i}")).collect(),
                n_layers: 2,
                hidden_dim: 6,
                values: (0..n * 12).map(|_| rng.random_range(-2.0f32..2.0)).collect(),
                provenance: String::new(),
            })
            .unwrap();
        }
    }
    set
}

#[test]
fn simple_matches_pooled_welch() {
    let spec = PlantSpec::new(2, 8, 30, 1.0, 4).with_random_units(2);
    let (set, cfg) = planted(&spec, 2, 3, Method::Simple);
    let stats = simple_statistic(&set, &cfg, &sequential()).unwrap();
    for u in 0..stats.n_units() {
        let (t, df) = welch_oracle(&pooled(&set, &cfg.target_keys(), u), &pooled(&set, &cfg.control_keys(), u));
        assert!(close(stats.m[u], t, 1e-10), "unit {u}: {} vs {t}", stats.m[u]);
        assert!(close(stats.df[u], df, 1e-10));
        assert!(close(stats.p[u], p_oracle(t, df), 1e-9));
    }
}

#[test]
fn paired_simple_matches_difference_test() {
    let mut spec = PlantSpec::new(2, 8, 25, 0.8, 9).with_random_units(3);
    spec.paired = true;
    let (set, cfg) = planted(&spec, 1, 1, Method::Simple);
    assert!(cfg.paired);
    let stats = simple_statistic(&set, &cfg, &sequential()).unwrap();
    let (tk, ck) = (&cfg.target_keys()[0], &cfg.control_keys()[0]);
    for u in 0..stats.n_units() {
        let (t, df) = paired_oracle(&column(&set, tk, u), &column(&set, ck, u));
        assert!(close(stats.m[u], t, 1e-10));
        assert_eq!(stats.df[u], df);
        assert!(close(stats.p[u], p_oracle(t, df), 1e-9));
    }
}

#[test]
fn conjunctive_is_minimum_over_pairs() {
    let spec = PlantSpec::new(2, 8, 20, 1.5, 12).with_random_units(4);
    let (set, cfg) = planted(&spec, 2, 3, Method::Conjunctive);
    for conj in [ConjunctionP::MinimizingPair, ConjunctionP::MaxP] {
        let opts = StatOptions { conjunction_p: conj, ..sequential() };
        let stats = conjunctive_statistic(&set, &cfg, &opts).unwrap();
        for u in 0..stats.n_units() {
            let pairs: Vec<(f64, f64)> = cfg
                .target_keys()
                .iter()
                .flat_map(|t| cfg.control_keys().into_iter().map(move |c| (t.clone(), c)))
                .map(|(t, c)| welch_oracle(&column(&set, &t, u), &column(&set, &c, u)))
                .collect();
            assert_eq!(pairs.len(), 6);
            let &(t, df) = pairs.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
            assert!(close(stats.m[u], t, 1e-10));
            let p = match conj {
                ConjunctionP::MinimizingPair => p_oracle(t, df),
                ConjunctionP::MaxP if pairs.iter().any(|x| x.0 > 0.0) && pairs.iter().any(|x| x.0 < 0.0) => 1.0,
                ConjunctionP::MaxP => pairs.iter().map(|&(t, df)| p_oracle(t, df)).fold(0.0, f64::max),
            };
            assert!(close(stats.p[u], p, 1e-9), "unit {u}: {} vs {p}", stats.p[u]);
        }
    }
}

#[test]
fn conjunction_reduces_to_simple_exactly() {
    for paired in [false, true] {
        let mut spec = PlantSpec::new(3, 16, 40, 1.0, 21).with_random_units(5);
        spec.paired = paired;
        let (set, simple) = planted(&spec, 1, 1, Method::Simple);
        let conj = LocalizerConfig { method: Method::Conjunctive, ..simple.clone() };
        let a = localize(&set, &simple, &StatOptions::default(), 0.05).unwrap();
        let b = localize(&set, &conj, &StatOptions::default(), 0.05).unwrap();
        assert_eq!(a.stats.m, b.stats.m);
        assert_eq!(a.stats.p, b.stats.p);
        assert_eq!(a.target.units, b.target.units);
    }
}

#[test]
fn conjunction_ignores_unit_driven_by_one_target_set() {
    let mut spec = PlantSpec::new(2, 32, 100, 2.0, 31);
    spec.planted_units = vec![UnitId::new(0, 3)];
    let partial = UnitId::new(1, 7);
    spec.partial = vec![PartialPlant { unit: partial, target_sets: vec![0] }];
    let (set, simple) = planted(&spec, 2, 2, Method::Simple);
    let conj = LocalizerConfig { method: Method::Conjunctive, ..simple.clone() };
    let s = localize(&set, &simple, &StatOptions::default(), 0.05).unwrap();
    let c = localize(&set, &conj, &StatOptions::default(), 0.05).unwrap();
    assert!(s.target.contains(partial));
    assert!(!c.target.contains(partial));
    assert!(c.target.contains(UnitId::new(0, 3)));
    // one strong pair cannot lift the minimum
    let f = partial.flat(32);
    assert!(c.stats.m[f] < 3.0 && s.stats.m[f] > 5.0, "{} {}", c.stats.m[f], s.stats.m[f]);
}

#[test]
fn misaligned_pairs_rejected() {
    let mut spec = PlantSpec::new(1, 4, 10, 0.0, 1);
    spec.paired = true;
    let (set, cfg) = planted(&spec, 1, 1, Method::Simple);
    let mut shuffled = ActivationSet::new();
    for t in set.iter() {
        let mut t = t.clone();
        if t.condition_name.starts_with("Control") {
            t.stimulus_ids.swap(2, 5);
        }
        shuffled.insert(t).unwrap();
    }
    let err = simple_statistic(&shuffled, &cfg, &sequential()).unwrap_err().to_string();
    assert!(err.contains("not aligned") && err.contains("item 2"), "{err}");
    let conj = LocalizerConfig { method: Method::Conjunctive, ..cfg };
    assert!(conjunctive_statistic(&shuffled, &conj, &sequential()).is_err());
}

#[test]
fn missing_or_tiny_conditions_rejected() {
    let spec = PlantSpec::new(1, 4, 10, 0.0, 1);
    let (set, cfg) = planted(&spec, 1, 2, Method::Simple);
    let mut partial = ActivationSet::new();
    for t in set.iter().filter(|t| t.condition_name != "Control1") {
        partial.insert(t.clone()).unwrap();
    }
    let err = simple_statistic(&partial, &cfg, &sequential()).unwrap_err();
    assert!(err.to_string().contains("Planted/Control1"), "{err}");

    let mut tiny = ActivationSet::new();
    for t in set.iter() {
        tiny.insert(if t.condition_name == "Target0" { t.select_rows(&[0]) } else { t.clone() }).unwrap();
    }
    assert!(simple_statistic(&tiny, &cfg, &sequential()).is_err());
}

#[test]
fn cross_suite_pairs_follow_the_flag() {
    let set = standard_tensors(6, 5);
    let configs = enumerate_localizers(&standard_suites()).unwrap();
    let lb_ci = &configs[7];
    for cross in [false, true] {
        let opts = StatOptions { cross_suite_pairs: cross, ..sequential() };
        let stats = conjunctive_statistic(&set, lb_ci, &opts).unwrap();
        let mut pairs = Vec::new();
        if cross {
            for t in lb_ci.target_keys() {
                for c in lb_ci.control_keys() {
                    pairs.push((t.clone(), c));
                }
            }
        } else {
            for m in &lb_ci.members {
                for t in m.target_keys() {
                    for c in m.control_keys() {
                        pairs.push((t.clone(), c));
                    }
                }
            }
        }
        assert_eq!(pairs.len(), if cross { 24 } else { 12 });
        for u in 0..stats.n_units() {
            let min = pairs
                .iter()
                .map(|(t, c)| welch_oracle(&column(&set, t, u), &column(&set, c, u)).0)
                .fold(f64::INFINITY, f64::min);
            assert!(close(stats.m[u], min, 1e-10));
        }
    }
}

#[test]
fn all_eight_standard_localizers_run() {
    let set = standard_tensors(6, 8);
    for cfg in enumerate_localizers(&standard_suites()).unwrap() {
        let loc = localize(&set, &cfg, &StatOptions::default(), 0.25).unwrap();
        assert_eq!(loc.target.len(), loc.control.len());
        assert!(loc.target.is_disjoint(&loc.control));
    }
}

#[test]
fn stimulus_order_does_not_matter() {
    let spec = PlantSpec::new(2, 16, 30, 1.0, 77).with_random_units(3);
    let (set, cfg) = planted(&spec, 2, 2, Method::Simple);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut permuted = ActivationSet::new();
    for t in set.iter() {
        let mut rows: Vec<usize> = (0..t.n_stimuli()).collect();
        rand::seq::SliceRandom::shuffle(rows.as_mut_slice(), &mut rng);
        permuted.insert(t.select_rows(&rows)).unwrap();
    }
    for method in [Method::Simple, Method::Conjunctive] {
        let cfg = LocalizerConfig { method, ..cfg.clone() };
        let a = localizer_statistic(&set, &cfg, &sequential()).unwrap();
        let b = localizer_statistic(&permuted, &cfg, &sequential()).unwrap();
        for u in 0..a.n_units() {
            assert!(close(a.m[u], b.m[u], 1e-9));
        }
        assert_eq!(a.significant, b.significant);
    }
}

#[test]
fn shifting_all_activations_changes_nothing() {
    // eighths are exact in f32, as are their sums with small integers
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut spec = PlantSpec::new(1, 8, 12, 0.0, 0);
    spec.planted_units = vec![UnitId::new(0, 1)];
    let (set, cfg) = planted(&spec, 2, 2, Method::Simple);
    let build = |shift: f32, rng: &mut ChaCha8Rng| {
        let mut out = ActivationSet::new();
        for t in set.iter() {
            let mut t = t.clone();
            for v in &mut t.values {
                *v = rng.random_range(-16i32..16) as f32 / 8.0 + shift;
            }
            out.insert(t).unwrap();
        }
        out
    };
    let base = build(0.0, &mut rng.clone());
    let shifted = build(5.0, &mut rng);
    for method in [Method::Simple, Method::Conjunctive] {
        let cfg = LocalizerConfig { method, ..cfg.clone() };
        let a = localizer_statistic(&base, &cfg, &sequential()).unwrap();
        let b = localizer_statistic(&shifted, &cfg, &sequential()).unwrap();
        for u in 0..a.n_units() {
            assert!(close(a.m[u], b.m[u], 1e-9), "{} vs {}", a.m[u], b.m[u]);
        }
    }
}

#[test]
fn execution_modes_agree_bitwise() {
    let spec = PlantSpec::new(4, 300, 20, 1.0, 2).with_random_units(6);
    for (nt, method) in [(2, Method::Simple), (2, Method::Conjunctive)] {
        let (set, cfg) = planted(&spec, nt, 2, method);
        let a = localize(&set, &cfg, &sequential(), 0.01).unwrap();
        let b = localize(&set, &cfg, &StatOptions { exec: Execution::Parallel, ..Default::default() }, 0.01).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn planted_units_recovered() {
    let spec = PlantSpec::new(4, 128, 100, 2.0, 40).with_random_units(5);
    let p = generate_planted_suite(&spec, 1, 1).unwrap();
    let cfg = LocalizerConfig::for_suite("planted", &p.suite, Method::Simple);
    let loc = localize(&p.tensors, &cfg, &StatOptions::default(), 0.01).unwrap();
    let r = recovery_score(&loc.target, &p.truth);
    assert_eq!(r.recall, 1.0);
    // the cap of 6 leaves room for one stray unit; the planted five rank first
    let mut by_m: Vec<usize> = (0..loc.stats.n_units()).collect();
    by_m.sort_by(|&a, &b| loc.stats.m[b].abs().total_cmp(&loc.stats.m[a].abs()));
    let mut top: Vec<UnitId> = by_m[..5].iter().map(|&f| UnitId::from_flat(f, 128)).collect();
    top.sort();
    assert_eq!(top, p.truth);
    assert!(loc.control.units.iter().all(|u| !p.truth.contains(u)));
}

fn arb_set() -> impl Strategy<Value = (ActivationSet, LocalizerConfig)> {
    (1usize..3, 1usize..6, 4usize..12, any::<u64>(), 0.0f64..3.0).prop_map(|(l, d, n, seed, effect)| {
        let spec = PlantSpec::new(l, d, n, effect, seed).with_random_units(1);
        planted(&spec, 1, 1, Method::Simple)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_pair_conjunction_is_simple((set, cfg) in arb_set()) {
        let conj = LocalizerConfig { method: Method::Conjunctive, ..cfg.clone() };
        let a = localizer_statistic(&set, &cfg, &sequential()).unwrap();
        let b = localizer_statistic(&set, &conj, &sequential()).unwrap();
        prop_assert_eq!(a.m, b.m);
        prop_assert_eq!(a.p, b.p);
    }

    #[test]
    fn masks_are_canonical((set, cfg) in arb_set(), cap in 0.05f64..1.0) {
        let stats = localizer_statistic(&set, &cfg, &StatOptions::default()).unwrap();
        let target = select_target_subnetwork(&stats, 0.05, cap).unwrap();
        prop_assert!(target.validate().is_ok());
        prop_assert!(target.units.iter().all(|u| stats.significant[u.flat(stats.hidden_dim)]));
        match select_least_active(&stats, target.len()) {
            Ok(control) => {
                prop_assert!(control.validate().is_ok());
                prop_assert!(target.is_disjoint(&control));
            }
            // tiny models can run out of non-significant units
            Err(_) => prop_assert!(stats.n_units() - stats.n_significant() < target.len()),
        }
    }

    #[test]
    fn swapping_roles_negates((set, cfg) in arb_set()) {
        let swapped = LocalizerConfig {
            members: cfg.members.iter().map(|m| SuiteRoles {
                targets: m.controls.clone(),
                controls: m.targets.clone(),
                ..m.clone()
            }).collect(),
            ..cfg.clone()
        };
        let a = localizer_statistic(&set, &cfg, &sequential()).unwrap();
        let b = localizer_statistic(&set, &swapped, &sequential()).unwrap();
        for u in 0..a.n_units() {
            prop_assert!(close(a.m[u], -b.m[u], 1e-12));
            prop_assert!(close(a.p[u], b.p[u], 1e-12));
        }
    }
}
