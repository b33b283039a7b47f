use durations::fp_model::{
    build_design_matrix, closed_test_trace, fit_powers, select_fp2_grouped, FitOptions, FpPowers, GroupedData,
    DEFAULT_POWERS,
};
use durations::{
    curve_gradient, generate_dataset, select_fp2_exhaustive, FittedCurve, Record, RngStream, ScenarioId, TrialDataset,
    TrialDesign,
};
use proptest::prelude::*;

const ARMS: [f64; 7] = [8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];

fn power() -> impl Strategy<Value = f64> {
    prop::sample::select(DEFAULT_POWERS.to_vec())
}

/// Seven arms with cure counts drawn around a smooth increasing curve.
fn grouped_data() -> impl Strategy<Value = GroupedData> {
    (prop::collection::vec(30u32..120, 7), 0.2f64..0.8, 0.0f64..0.25, prop::collection::vec(-0.04f64..0.04, 7)).prop_map(
        |(n, base, rise, noise)| {
            let mut g = GroupedData::default();
            for i in 0..7 {
                let p = (base + rise * i as f64 / 6.0 + noise[i]).clamp(0.05, 0.97);
                g.durations.push(ARMS[i]);
                g.trials.push(f64::from(n[i]));
                g.cures.push((f64::from(n[i]) * p).round());
            }
            g
        },
    )
}

fn score_max(curve: &FittedCurve, g: &GroupedData) -> f64 {
    let k = curve.dim();
    (0..k)
        .map(|j| {
            g.durations
                .iter()
                .enumerate()
                .map(|(i, &d)| curve.design_row(d)[j] * (g.cures[i] - g.trials[i] * curve.prob(d)))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

fn records_from(g: &GroupedData) -> Vec<Record> {
    let mut out = Vec::new();
    for i in 0..g.durations.len() {
        for j in 0..g.trials[i] as usize {
            out.push(Record { duration: g.durations[i], cure: u8::from((j as f64) < g.cures[i]) });
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn swapped_powers_give_permuted_columns_and_same_fit(p1 in power(), p2 in power(), g in grouped_data()) {
        prop_assume!(p1 != p2);
        let a = build_design_matrix(&ARMS, &FpPowers::Fp2 { p1, p2 }).unwrap();
        let b = build_design_matrix(&ARMS, &FpPowers::Fp2 { p1: p2, p2: p1 }).unwrap();
        for i in 0..7 {
            prop_assert_eq!(a.get(i, 0), b.get(i, 0));
            prop_assert_eq!(a.get(i, 1), b.get(i, 2));
            prop_assert_eq!(a.get(i, 2), b.get(i, 1));
        }
        let opts = FitOptions::default();
        let fa = fit_powers(&g, FpPowers::Fp2 { p1, p2 }, &opts).unwrap();
        let fb = fit_powers(&g, FpPowers::Fp2 { p1: p2, p2: p1 }, &opts).unwrap();
        if fa.converged && fb.converged {
            prop_assert!((fa.deviance - fb.deviance).abs() < 1e-8);
        }
    }

    #[test]
    fn score_vanishes_at_converged_fit(p1 in power(), p2 in power(), g in grouped_data()) {
        let fit = fit_powers(&g, FpPowers::fp2(p1, p2), &FitOptions::default()).unwrap();
        if fit.converged {
            let n = g.trials.iter().sum::<f64>();
            let s = score_max(&fit, &g);
            prop_assert!(s < 1e-6 * n, "score {} for {:?}", s, fit.powers);
        }
    }

    #[test]
    fn covariance_is_symmetric_psd(p1 in power(), p2 in power(), g in grouped_data(), v in prop::collection::vec(-1.0f64..1.0, 3)) {
        let fit = fit_powers(&g, FpPowers::fp2(p1, p2), &FitOptions::default()).unwrap();
        let k = fit.dim();
        for a in 0..k {
            for b in 0..k {
                let (x, y) = (fit.cov(a, b), fit.cov(b, a));
                prop_assert!((x - y).abs() <= 1e-10 * (x.abs() + y.abs() + 1e-300));
            }
        }
        // v' S v over random directions plus the 2x2 minors' determinant.
        let q: f64 = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| v[a] * fit.cov(a, b) * v[b]).sum();
        let scale: f64 = (0..k).map(|a| fit.cov(a, a).abs()).sum::<f64>();
        prop_assert!(q >= -1e-8 * scale.max(1.0));
        for a in 0..k {
            prop_assert!(fit.cov(a, a) >= -1e-8);
        }
    }

    #[test]
    fn gradient_matches_central_differences(
        p1 in power(), p2 in power(),
        b0 in -2.0f64..2.0, b1 in -1.0f64..1.0, b2 in -1.0f64..1.0,
        d in 8.0f64..20.0,
    ) {
        let powers = FpPowers::fp2(p1, p2);
        // Keep the linear predictor moderate over [8, 20].
        let zero = FittedCurve::from_coefficients(powers, vec![0.0; 3]);
        let row_max = ARMS.iter().map(|&x| {
            let r = zero.design_row(x);
            r[1].abs().max(r[2].abs())
        }).fold(1.0, f64::max);
        let curve = FittedCurve::from_coefficients(powers, vec![b0, b1 / row_max, b2 / row_max]);
        let h = 1e-5;
        let fd = (curve.prob(d + h) - curve.prob(d - h)) / (2.0 * h);
        let g = curve_gradient(&curve, d).unwrap();
        prop_assert!((g - fd).abs() <= 1e-6 * g.abs().max(1e-4), "{} vs {}", g, fd);
    }

    #[test]
    fn exhaustive_selection_is_the_minimum(g in grouped_data()) {
        let opts = FitOptions::default();
        let best = select_fp2_grouped(&g, &DEFAULT_POWERS, &opts).unwrap();
        for pair in FpPowers::fp2_pairs(&DEFAULT_POWERS) {
            let f = fit_powers(&g, pair, &opts).unwrap();
            if f.converged {
                prop_assert!(best.deviance <= f.deviance + 1e-8);
            }
        }
    }

    #[test]
    fn row_order_does_not_matter(g in grouped_data(), p in power(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let records = records_from(&g);
        let mut shuffled = records.clone();
        shuffled.shuffle(&mut RngStream::new(seed).rng());
        let a = TrialDataset::new(records).unwrap();
        let b = TrialDataset::new(shuffled).unwrap();
        let opts = FitOptions::default();
        let fa = fit_powers(&a.grouped(), FpPowers::fp2(p, p), &opts).unwrap();
        let fb = fit_powers(&b.grouped(), FpPowers::fp2(p, p), &opts).unwrap();
        prop_assert_eq!(fa, fb);
        prop_assert_eq!(select_fp2_exhaustive(&a).unwrap(), select_fp2_exhaustive(&b).unwrap());
    }

    #[test]
    fn closed_test_follows_its_p_values(g in grouped_data()) {
        let opts = FitOptions::default();
        let (curve, trace) = closed_test_trace(&g, 0.05, &DEFAULT_POWERS, &opts).unwrap();
        if trace.p_vs_null > 0.05 {
            prop_assert_eq!(curve.powers, FpPowers::Null);
        } else {
            prop_assert!(curve.powers != FpPowers::Null);
        }
        let (always, _) = closed_test_trace(&g, 1.0, &DEFAULT_POWERS, &opts).unwrap();
        let is_fp2 = matches!(always.powers, FpPowers::Fp2 { .. });
        prop_assert!(is_fp2);
    }
}

#[test]
fn large_sample_linear_fit_recovers_scenario_one() {
    let design = TrialDesign::standard_with_n(100_000);
    let data = generate_dataset(ScenarioId::new(1).unwrap(), &design, RngStream::new(2024)).unwrap();
    let fit = fit_powers(&data.grouped(), FpPowers::linear(), &FitOptions::default()).unwrap();
    assert!((fit.coef[0] - (0.85 - 0.17 * 8.0)).abs() < 0.02, "{:?}", fit.coef);
    assert!((fit.coef[1] - 0.17).abs() < 0.02, "{:?}", fit.coef);
}

#[test]
fn large_sample_selection_keeps_a_steep_trend() {
    let design = TrialDesign::standard_with_n(100_000);
    let data = generate_dataset(ScenarioId::new(1).unwrap(), &design, RngStream::new(5)).unwrap();
    let (curve, trace) = closed_test_trace(&data.grouped(), 0.05, &DEFAULT_POWERS, &FitOptions::default()).unwrap();
    assert!(trace.p_vs_null < 1e-6);
    assert!(curve.powers != FpPowers::Null);
}
