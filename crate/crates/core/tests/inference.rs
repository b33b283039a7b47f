use std::collections::HashSet;

use durations::fp_model::{fit_powers, FitOptions, FpPowers, DEFAULT_POWERS};
use durations::inference::{recommend, round_up_strict};
use durations::{
    bootstrap_resample, delta_diff_ci, Error, generate_dataset, recommend_boot_duration, recommend_conf_bands,
    recommend_delta, solve_dstar, BootstrapConfig, EstimationTarget, FittedCurve, Method, Record, RngStream,
    ScenarioId, TrialDataset, TrialDesign,
};
use proptest::prelude::*;

fn scenario(id: u32) -> ScenarioId {
    ScenarioId::new(id).unwrap()
}

fn small_boot(m: usize) -> BootstrapConfig {
    BootstrapConfig { m, jackknife_groups: 20, ..BootstrapConfig::default() }
}

/// A fitted curve with genuine sampling covariance.
fn fitted_curve() -> impl Strategy<Value = FittedCurve> {
    (1u32..=16, any::<u64>(), prop::sample::select(DEFAULT_POWERS.to_vec()), prop::sample::select(DEFAULT_POWERS.to_vec()))
        .prop_filter_map("fit must converge", |(id, seed, p1, p2)| {
            let data = generate_dataset(scenario(id), &TrialDesign::standard(), RngStream::new(seed)).ok()?;
            let fit = fit_powers(&data.grouped(), FpPowers::fp2(p1, p2), &FitOptions::default()).ok()?;
            fit.converged.then_some(fit)
        })
}

#[test]
fn resample_keeps_about_63_percent_of_records() {
    let records: Vec<Record> = (0..500).map(|i| Record { duration: 8.0 + (i % 7) as f64 * 2.0, cure: (i % 2) as u8 }).collect();
    // Tag each record by making its duration unique.
    let tagged = TrialDataset {
        records: records.iter().enumerate().map(|(i, r)| Record { duration: r.duration + i as f64 * 1e-6, cure: r.cure }).collect(),
    };
    let reps = 400;
    let mut frac = 0.0;
    for m in 0..reps {
        let b = bootstrap_resample(&tagged, RngStream::new(77).child(m));
        assert_eq!(b.len(), 500);
        let distinct: HashSet<u64> = b.records.iter().map(|r| r.duration.to_bits()).collect();
        frac += distinct.len() as f64 / 500.0;
    }
    frac /= reps as f64;
    let expected = 1.0 - (1.0 - 1.0 / 500.0f64).powi(500);
    assert!((frac - expected).abs() < 0.005, "{frac} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn delta_width_grows_with_level(curve in fitted_curve(), d in 8u32..20, l1 in 0.5f64..0.99, l2 in 0.5f64..0.99) {
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let a = delta_diff_ci(&curve, 20.0, f64::from(d), lo);
        let b = delta_diff_ci(&curve, 20.0, f64::from(d), hi);
        prop_assert!(b.upper - b.lower >= a.upper - a.lower - 1e-15);
    }

    #[test]
    fn conf_bands_round_strictly_up(curve in fitted_curve(), delta in 0.02f64..0.2) {
        let design = TrialDesign::standard();
        let target = EstimationTarget::risk_difference(delta);
        let rec = recommend_conf_bands(&curve, &target, &design, 0.95).unwrap();
        prop_assert!((8..=20).contains(&rec.d_recommended));
        match rec.d_star_hat {
            Some(cut) if cut > 8.0 => prop_assert!(f64::from(rec.d_recommended) > cut || rec.d_recommended == 20),
            Some(_) => prop_assert_eq!(rec.d_recommended, 8),
            None => prop_assert_eq!(rec.d_recommended, 20),
        }
    }

    #[test]
    fn zero_covariance_bands_are_the_point_estimate(curve in fitted_curve(), delta in 0.02f64..0.2) {
        let design = TrialDesign::standard();
        let target = EstimationTarget::risk_difference(delta);
        let k = curve.dim();
        let point = curve.clone().with_covariance(vec![0.0; k * k]);
        let rec = recommend_conf_bands(&point, &target, &design, 0.95).unwrap();
        let expected = match solve_dstar(&point, &target, &design).value() {
            Some(d) => round_up_strict(d, 8.0, 20.0).0,
            None => 20,
        };
        prop_assert_eq!(rec.d_recommended, expected);
    }

    #[test]
    fn delta_recommendation_is_in_range(curve in fitted_curve(), delta in 0.02f64..0.2) {
        let rec = recommend_delta(&curve, &EstimationTarget::risk_difference(delta), &TrialDesign::standard(), 0.95).unwrap();
        prop_assert!((8..=20).contains(&rec.d_recommended));
        let first = rec.per_duration.iter().find(|b| b.passes && b.duration < 20).map_or(20, |b| b.duration);
        prop_assert_eq!(rec.d_recommended, first);
    }
}

#[test]
fn larger_margin_never_lengthens_flat_scenario_recommendation() {
    let design = TrialDesign::standard();
    let cfg = small_boot(100);
    let narrow = EstimationTarget::risk_difference(0.05);
    let wide = EstimationTarget::risk_difference(0.10);
    for seed in 0..6 {
        let data = generate_dataset(scenario(4), &design, RngStream::new(seed)).unwrap();
        for method in [Method::Delta, Method::BootDiff, Method::BootDuration] {
            let s = RngStream::new(1000 + seed);
            let a = recommend(method, &data, &narrow, &design, &cfg, s).unwrap();
            let b = recommend(method, &data, &wide, &design, &cfg, s).unwrap();
            assert!(b.d_recommended <= a.d_recommended, "{method} seed {seed}: {} > {}", b.d_recommended, a.d_recommended);
        }
    }
}

#[test]
fn bootstrap_is_independent_of_thread_count() {
    let design = TrialDesign::standard();
    let data = generate_dataset(scenario(1), &design, RngStream::new(3)).unwrap();
    let target = EstimationTarget::risk_difference(0.10);
    let cfg = small_boot(150);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                (
                    recommend_boot_duration(&data, &target, &design, &cfg, RngStream::new(9)).unwrap(),
                    recommend(Method::BootDiff, &data, &target, &design, &cfg, RngStream::new(9)).unwrap(),
                )
            })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn boot_duration_interval_brackets_its_mean() {
    let design = TrialDesign::standard();
    let data = generate_dataset(scenario(9), &design, RngStream::new(8)).unwrap();
    let rec = recommend_boot_duration(&data, &EstimationTarget::risk_difference(0.10), &design, &small_boot(200), RngStream::new(1)).unwrap();
    let (lo, hi) = rec.ci;
    let mean = rec.d_star_hat.unwrap();
    assert!(lo <= mean && mean <= hi);
    assert_eq!(rec.bootstrap_dstar.len() + rec.diagnostics.boot_dropped, 200);
    assert_eq!(rec.d_recommended, round_up_strict(hi, 8.0, 20.0).0);
}

#[test]
fn separated_resamples_exhaust_the_bootstrap() {
    // Every patient cured at the two shortest arms and a dip after them: the
    // likelihood has no finite maximum for any power pair.
    let mut records = Vec::new();
    for (d, n, c) in [(8.0, 4, 4), (10.0, 4, 4), (12.0, 30, 15), (14.0, 30, 20)] {
        for j in 0..n {
            records.push(Record { duration: d, cure: u8::from(j < c) });
        }
    }
    let data = TrialDataset::new(records).unwrap();
    let design = TrialDesign::from_dataset(&data).unwrap();
    let rec = recommend_boot_duration(&data, &EstimationTarget::risk_difference(0.10), &design, &small_boot(20), RngStream::new(4));
    assert!(matches!(rec, Err(Error::BootstrapExhausted)), "{rec:?}");
}
