use std::sync::OnceLock;

use billingsley::convergence::{
    box_admissible, distance_to_complement, inf_density_on_box, run_criterion, BoxCriterion,
    Method, RunOptions,
};
use billingsley::dickman::DickmanTable;
use billingsley::montecarlo::stream_rng;
use billingsley::pd_process::{pd_box_probability, pd_density, pd_sample, pd_sample_box_frequency};
use billingsley::region::{in_region, BoxSpec};
use billingsley::Error;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn table() -> &'static DickmanTable {
    static T: OnceLock<DickmanTable> = OnceLock::new();
    T.get_or_init(|| DickmanTable::build(20.0, 1e-4).unwrap())
}

/// A random box inside U of dimension k, built around a point of U.
fn random_box(rng: &mut ChaCha8Rng, k: usize, max_width: f64) -> BoxSpec {
    loop {
        let mut t: Vec<f64> = (0..k).map(|_| 0.06 + rng.random::<f64>() * 0.64).collect();
        t.sort_by(|a, b| b.total_cmp(a));
        let dt: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * max_width).collect();
        let b = BoxSpec::new(t, dt).unwrap();
        if b.inside_region() && distance_to_complement(&b).unwrap() > 0.01 {
            return b;
        }
    }
}

fn clamp_distance(b: &BoxSpec, x: &[f64]) -> f64 {
    (0..b.k())
        .map(|i| {
            let lo = b.lower()[i];
            let hi = b.upper(i);
            let d = if x[i] < lo {
                lo - x[i]
            } else if x[i] > hi {
                x[i] - hi
            } else {
                0.0
            };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[test]
fn distance_matches_rejection_sampling() {
    let mut rng = stream_rng(7, 0);
    for case in 0..20 {
        let k = 1 + case % 3;
        let b = random_box(&mut rng, k, 0.08);
        let d = distance_to_complement(&b).unwrap();
        let reach = d + 0.02;
        let mut best = f64::INFINITY;
        for _ in 0..100_000 {
            let x: Vec<f64> = (0..k)
                .map(|i| b.lower()[i] - reach + rng.random::<f64>() * (b.widths()[i] + 2.0 * reach))
                .collect();
            if !in_region(&x) {
                best = best.min(clamp_distance(&b, &x));
            }
        }
        assert!(best >= d - 1e-12, "box {b}: sampled {best} below exact {d}");
        assert!(best - d < 1e-3, "box {b}: sampled {best}, exact {d}");
    }
}

#[test]
fn infimum_is_a_certified_bound() {
    let mut rng = stream_rng(8, 0);
    for case in 0..30 {
        let k = 1 + case % 3;
        let b = random_box(&mut rng, k, 0.1);
        for m in [1, 4] {
            let inf = inf_density_on_box(table(), &b, m).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..k)
                    .map(|i| b.lower()[i] + rng.random::<f64>() * b.widths()[i])
                    .collect();
                let f = pd_density(table(), &x).unwrap();
                assert!(
                    inf <= f * (1.0 + 1e-12),
                    "box {b}: inf {inf} > f {f} at {x:?}"
                );
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn shrinking_preserves_admissibility(seed in 0u64..1_000_000, k in 1usize..=3, factor in 0.0f64..=1.0, eps in 0.05f64..0.9) {
        let mut rng = stream_rng(seed, 0);
        let b = random_box(&mut rng, k, 0.05);
        let crit = BoxCriterion::new(eps, k).unwrap();
        if box_admissible(&b, &crit).unwrap() {
            let s = b.shrink(factor).unwrap();
            prop_assert!(box_admissible(&s, &crit).unwrap());
        }
    }

    #[test]
    fn pd_sample_structure(seed in any::<u64>(), trunc in 1usize..100) {
        let s = pd_sample(&mut stream_rng(seed, 0), trunc).unwrap();
        prop_assert_eq!(s.components.len(), trunc);
        prop_assert!(s.components.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(s.components.iter().all(|&c| c > 0.0));
        let total: f64 = s.components.iter().sum::<f64>() + s.tail_mass;
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(s.tail_mass >= 0.0);
    }
}

#[test]
fn density_vanishes_off_region() {
    let mut rng = stream_rng(9, 0);
    for _ in 0..100 {
        let a = 0.05 + 0.4 * rng.random::<f64>();
        let b = 0.05 + 0.4 * rng.random::<f64>();
        let (hi, lo) = if a > b { (a, b) } else { (b, a) };
        // ordering violated
        assert_eq!(pd_density(table(), &[lo, hi]).unwrap(), 0.0);
        // positivity violated
        assert_eq!(pd_density(table(), &[hi, -lo]).unwrap(), 0.0);
        // simplex violated
        let big = 0.5 + 0.5 * rng.random::<f64>();
        assert_eq!(
            pd_density(table(), &[big, 1.0 - big + 1e-9 + lo * (1.0 - big)]).unwrap(),
            0.0
        );
    }
}

#[test]
fn sampler_agrees_with_density() {
    let boxes: [&[(f64, f64)]; 5] = [
        &[(0.5, 0.1)],
        &[(0.3, 0.1)],
        &[(0.45, 0.1), (0.15, 0.1)],
        &[(0.5, 0.15), (0.2, 0.1)],
        &[(0.35, 0.1), (0.1, 0.15)],
    ];
    for (i, pairs) in boxes.iter().enumerate() {
        let b = BoxSpec::from_pairs(pairs).unwrap();
        let q = pd_box_probability(table(), &b, 400).unwrap();
        let e = pd_sample_box_frequency(&b, 1_000_000, 100 + i as u64, 60).unwrap();
        assert!(
            (e.p_hat - q.value).abs() < 4.0 * e.std_err,
            "box {b}: sampler {} vs quadrature {}",
            e.p_hat,
            q.value
        );
    }
}

#[test]
fn k1_harness_example_passes() {
    let b = BoxSpec::from_pairs(&[(0.5, 0.1)]).unwrap();
    let crit = BoxCriterion::new(0.25, 1).unwrap();
    let rep = run_criterion(
        table(),
        &[10_000, 100_000, 1_000_000],
        &b,
        &crit,
        &RunOptions::default(),
    )
    .unwrap();
    assert!(rep
        .entries
        .iter()
        .all(|e| e.method == Method::Exact && e.verdict));
    assert!(rep.entries.iter().all(|e| e.p > 1.2f64.ln() * 0.75));
}

#[test]
fn k2_harness_monte_carlo_entry_passes() {
    let b = BoxSpec::from_pairs(&[(0.49, 0.03), (0.21, 0.025)]).unwrap();
    let crit = BoxCriterion::new(0.25, 2).unwrap();
    let opts = RunOptions {
        samples: 1_000_000,
        exact_threshold: 100_000,
        ..RunOptions::default()
    };
    let rep = run_criterion(table(), &[100_000, 1_000_000], &b, &crit, &opts).unwrap();
    assert_eq!(rep.entries[1].method, Method::Mc);
    assert!(rep.all_pass(), "{rep:?}");
    let json = serde_json::to_value(&rep).unwrap();
    for key in [
        "box",
        "epsilon",
        "R",
        "admissible",
        "lower_bound",
        "entries",
        "trend",
    ] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert!(json["entries"][0].get("std_err").is_none());
    assert!(json["entries"][1].get("std_err").is_some());
}

#[test]
fn harness_rejects_boxes_outside_region() {
    let b = BoxSpec::from_pairs(&[(1.05, 0.1)]).unwrap();
    let crit = BoxCriterion::new(0.25, 1).unwrap();
    let err = run_criterion(table(), &[10_000], &b, &crit, &RunOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}
