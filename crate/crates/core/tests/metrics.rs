#![allow(clippy::needless_range_loop)]

mod common;

use common::{generated, ledgers, run_logged};
use online_recal::metrics::CalibrationLedger;
use online_recal::{CalibrationLedgerF64, ForecastDistributionF64, ProbabilityGrid};
use proptest::prelude::*;

fn grid(n: usize) -> ProbabilityGrid {
    ProbabilityGrid::new(n).unwrap()
}

#[test]
fn hand_computed_calibration_errors() {
    let l = CalibrationLedgerF64::from_sums(grid(2), vec![2.0, 0.0, 2.0], vec![0.0, 0.0, 1.0], 4).unwrap();
    assert!((l.calibration_error().unwrap() - 0.125).abs() < 1e-15);
    assert_eq!(l.rho(1), None);

    let worst = CalibrationLedgerF64::from_sums(grid(1), vec![0.0, 5.0], vec![0.0, 0.0], 5).unwrap();
    assert_eq!(worst.calibration_error().unwrap(), 1.0);

    let perfect = CalibrationLedgerF64::from_sums(grid(4), vec![4.0, 0.0, 2.0, 0.0, 1.0], vec![0.0, 0.0, 1.0, 0.0, 1.0], 7).unwrap();
    assert_eq!(perfect.calibration_error().unwrap(), 0.0);
}

#[test]
fn rho_is_the_weighted_quotient() {
    let mut w = vec![0.0; 11];
    let mut o = vec![0.0; 11];
    w[3] = 4.0;
    o[3] = 1.0;
    let l = CalibrationLedgerF64::from_sums(grid(10), w, o, 4).unwrap();
    assert_eq!(l.rho(3), Some(0.25));
}

#[test]
fn l2_regret_arithmetic() {
    let mut l = CalibrationLedgerF64::new(grid(1));
    let mass = ForecastDistributionF64::point_mass(2, 1);
    // emitted 1 vs y=0 costs 1, raw 0 costs 0; then both exact
    l.record(&mass, 0, 1.0, 0.0).unwrap();
    l.record(&mass, 1, 1.0, 1.0).unwrap();
    assert_eq!(l.l2_regret().unwrap(), 0.5);
}

#[test]
fn report_metrics_match_transcript_recomputation() {
    for kind in ["miscalibrated-link", "sign-flip-adversary", "drifting:2000", "expert-panel:3"] {
        let n = 10;
        let exp = run_logged(generated(kind, n, 20_000, 13));
        let log = exp.transcript().unwrap();
        let (e, r, raw) = ledgers(n, log);
        let report = exp.report(0.0).unwrap();
        for (got, want) in [
            (report.calibration_error_expected, e.calibration_error()),
            (report.calibration_error_sampled, r.calibration_error()),
            (report.calibration_error_raw, raw.calibration_error()),
            (report.l2_regret, common::l2_regret(n, log)),
        ] {
            assert!((got - want).abs() <= 1e-10, "{kind}: {got} vs {want}");
        }

        let total: f64 = e.weight.iter().sum();
        let occupied: Vec<usize> = (0..=n).filter(|&i| e.weight[i] > 0.0).collect();
        assert_eq!(report.reliability.len(), occupied.len());
        for (row, &i) in report.reliability.iter().zip(&occupied) {
            assert_eq!(row.grid_value, i as f64 / n as f64);
            assert!((row.weight_share - e.weight[i] / total).abs() <= 1e-12);
            assert!((row.rho - e.outcome[i] / e.weight[i]).abs() <= 1e-10);
        }
        // realized counts are integers, so they match exactly
        for row in &report.reliability_sampled {
            let i = (row.grid_value * n as f64).round() as usize;
            assert_eq!(row.count, r.weight[i]);
        }
    }
}

#[test]
fn sampled_and_expected_calibration_agree_on_long_runs() {
    let report = run_logged(generated("miscalibrated-link", 10, 60_000, 3)).report(0.0).unwrap();
    let gap = (report.calibration_error_sampled - report.calibration_error_expected).abs();
    assert!(gap <= 0.01, "gap {gap}");
}

#[test]
fn reliability_rows_of_a_single_point_ledger() {
    let mut l = CalibrationLedgerF64::new(grid(10));
    for y in [1, 0, 1] {
        l.record_point(5, y, 0.5, 0.5).unwrap();
    }
    let rows = l.reliability_bins();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].weight_share, 1.0);
    assert_eq!(rows[0].grid_value, 0.5);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn calibration_error_is_a_bounded_weighted_gap(
        n in 1usize..15,
        plays in prop::collection::vec((prop::collection::vec(0.0f64..1.0, 16), 0u8..=1), 1..60),
    ) {
        let mut l = CalibrationLedger::<f64>::new(grid(n));
        let mut w_sum = vec![0.0; n + 1];
        let mut o_sum = vec![0.0; n + 1];
        for (raw, y) in &plays {
            let mut w: Vec<f64> = raw[..=n].to_vec();
            let s: f64 = w.iter().sum::<f64>() + 1e-3;
            w.iter_mut().for_each(|x| *x /= s);
            w[0] += 1.0 - w.iter().sum::<f64>();
            let d = ForecastDistributionF64::new(w.clone()).unwrap();
            l.record(&d, *y, 0.5, 0.5).unwrap();
            for i in 0..=n {
                w_sum[i] += w[i];
                o_sum[i] += w[i] * *y as f64;
            }
        }
        let c = l.calibration_error().unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c));
        let rows = l.reliability_bins();
        prop_assert!(rows.windows(2).all(|p| p[0].grid_value < p[1].grid_value));
        let shares: f64 = rows.iter().map(|r| r.weight_share).sum();
        prop_assert!((shares - 1.0).abs() <= 1e-9);
        for i in 0..=n {
            prop_assert!(l.outcome_weight()[i] <= l.weight()[i] + 1e-12);
            prop_assert!((l.weight()[i] - w_sum[i]).abs() <= 1e-12);
        }
        let t = plays.len() as f64;
        let oracle: f64 = (0..=n)
            .filter(|&i| w_sum[i] > 0.0)
            .map(|i| (o_sum[i] / w_sum[i] - i as f64 / n as f64).powi(2) * w_sum[i] / t)
            .sum();
        prop_assert!((c - oracle).abs() <= 1e-10);
    }
}
