mod common;

use common::{ledgers, Sums};
use online_recal::calibrator::{sample_forecast, CalibratorState, ForecastDistribution};
use online_recal::metrics::per_bucket_decomposition;
use online_recal::recalibrator::bucket_seed;
use online_recal::rng::StreamRng;
use online_recal::transcript::TranscriptRecord;
use online_recal::{bucket_index, Error, ProbabilityGrid, RecalibratorF32, RecalibratorF64, UpdateMode};
use proptest::prelude::*;

/// A raw-forecast stream with outcomes drawn from a distorted link.
fn stream(seed: u64, t: usize) -> Vec<(f64, u8)> {
    let mut rng = StreamRng::new(seed);
    (0..t)
        .map(|_| {
            let p = rng.unit();
            let q = (p * p * 0.8 + 0.1).min(1.0);
            (p, u8::from(rng.unit() < q))
        })
        .collect()
}

fn run(rec: &mut RecalibratorF64, data: &[(f64, u8)], log: &mut Vec<TranscriptRecord>) -> Vec<f64> {
    let mut emitted = Vec::new();
    for &(p, y) in data {
        emitted.push(rec.step(p).unwrap());
        let pending = rec.pending().unwrap();
        log.push(TranscriptRecord {
            t: log.len() as u64 + 1,
            distribution: pending.distribution.probabilities().to_vec(),
            sampled: pending.sampled,
            y,
            bucket: Some(pending.bucket),
            raw: Some(p),
        });
        rec.observe(y).unwrap();
    }
    emitted
}

/// Replays the routed subsequence of `bucket` through a standalone subroutine.
fn standalone(n: usize, master: u64, mode: UpdateMode, bucket: usize, data: &[(f64, u8)]) -> CalibratorState<f64> {
    let mut state = CalibratorState::new(ProbabilityGrid::new(n).unwrap());
    let mut rng = StreamRng::new(bucket_seed(master, bucket));
    for &(p, y) in data {
        if bucket_index(p, n).unwrap() != bucket {
            continue;
        }
        let dist = state.forecast_distribution().unwrap();
        let s = sample_forecast(&dist, &mut rng);
        match mode {
            UpdateMode::Expected => state.update(&dist, s, y).unwrap(),
            UpdateMode::Sampled => state.update(&ForecastDistribution::point_mass(n + 1, s), s, y).unwrap(),
        }
    }
    state
}

#[test]
fn buckets_evolve_as_isolated_subroutines() {
    let n = 8;
    let data = stream(1, 6_000);
    for mode in [UpdateMode::Expected, UpdateMode::Sampled] {
        let mut rec = RecalibratorF64::new(n, 99, mode).unwrap();
        run(&mut rec, &data, &mut Vec::new());
        for (&j, inst) in rec.instances() {
            assert_eq!(inst.state, standalone(n, 99, mode, j, &data), "bucket {j} in {mode:?} mode");
        }
    }
}

#[test]
fn ledgers_match_transcript_recomputation() {
    let n = 10;
    let data = stream(2, 8_000);
    let mut rec = RecalibratorF64::new(n, 4, UpdateMode::Expected).unwrap();
    let mut log = Vec::new();
    run(&mut rec, &data, &mut log);
    let (e, r, raw) = ledgers(n, &log);
    for (ledger, oracle) in [
        (rec.expected_ledger(), &e),
        (rec.realized_ledger(), &r),
        (rec.raw_ledger(), &raw),
    ] {
        assert!((ledger.calibration_error().unwrap() - oracle.calibration_error()).abs() <= 1e-10);
        for i in 0..=n {
            assert!((ledger.weight()[i] - oracle.weight[i]).abs() <= 1e-10);
            assert!((ledger.outcome_weight()[i] - oracle.outcome[i]).abs() <= 1e-10);
        }
    }
    assert_eq!(rec.realized_ledger().weight(), &r.weight[..]);
    let l2 = rec.expected_ledger().l2_regret().unwrap();
    assert!((l2 - common::l2_regret(n, &log)).abs() <= 1e-10);
}

#[test]
fn snapshot_round_trip_is_byte_identical() {
    let mut rec = RecalibratorF64::new(10, 5, UpdateMode::Expected).unwrap();
    let fresh = rec.snapshot().unwrap();
    assert_eq!(RecalibratorF64::restore(&fresh).unwrap().instances().len(), 0);

    run(&mut rec, &stream(3, 2_000), &mut Vec::new());
    let text = rec.snapshot().unwrap();
    let back = RecalibratorF64::restore(&text).unwrap();
    assert_eq!(back.snapshot().unwrap(), text);
    assert_eq!(back, rec);
}

#[test]
fn split_run_reproduces_unsplit_run_exactly() {
    let data = stream(4, 10_000);
    let mut whole = RecalibratorF64::new(10, 8, UpdateMode::Expected).unwrap();
    let emitted_whole = run(&mut whole, &data, &mut Vec::new());

    let mut first = RecalibratorF64::new(10, 8, UpdateMode::Expected).unwrap();
    let mut emitted = run(&mut first, &data[..5_000], &mut Vec::new());
    let mut second = RecalibratorF64::restore(&first.snapshot().unwrap()).unwrap();
    emitted.extend(run(&mut second, &data[5_000..], &mut Vec::new()));

    assert_eq!(emitted, emitted_whole);
    assert_eq!(
        second.expected_ledger().calibration_error().unwrap(),
        whole.expected_ledger().calibration_error().unwrap()
    );
    assert_eq!(second.snapshot().unwrap(), whole.snapshot().unwrap());
}

#[test]
fn constant_bucket_with_positive_outcomes_converges_to_one() {
    let mut rng = StreamRng::new(6);
    let mut rec = RecalibratorF64::new(10, 6, UpdateMode::Expected).unwrap();
    let mut ones = 0;
    for t in 0..50_000 {
        let p = 0.3 + 0.1 * rng.unit();
        let emitted = rec.step(p.min(0.399_999)).unwrap();
        rec.observe(1).unwrap();
        if t >= 40_000 && emitted == 1.0 {
            ones += 1;
        }
    }
    assert_eq!(rec.routing_counts()[3], 50_000);
    assert!(ones as f64 / 10_000.0 >= 0.95, "{ones} of the last 10000 emitted 1.0");
}

#[test]
fn equal_seeds_and_streams_emit_identical_sequences() {
    let data = stream(7, 3_000);
    let a = run(&mut RecalibratorF64::new(10, 1, UpdateMode::Sampled).unwrap(), &data, &mut Vec::new());
    let b = run(&mut RecalibratorF64::new(10, 1, UpdateMode::Sampled).unwrap(), &data, &mut Vec::new());
    assert_eq!(a, b);
}

#[test]
fn protocol_order_is_enforced() {
    let mut rec = RecalibratorF64::new(10, 1, UpdateMode::Expected).unwrap();
    assert!(matches!(rec.observe(1), Err(Error::ProtocolOrder(_))));
    rec.step(0.72).unwrap();
    assert!(matches!(rec.step(0.1), Err(Error::ProtocolOrder(_))));
    assert!(matches!(rec.snapshot(), Err(Error::ProtocolOrder(_))));
    rec.observe(1).unwrap();
    assert!(matches!(rec.observe(1), Err(Error::ProtocolOrder(_))));
    assert_eq!(rec.routing_counts()[7], 1);
    assert_eq!(rec.instances().len(), 1);
}

#[test]
fn excess_loss_over_raw_respects_the_grid_bound() {
    let n = 10;
    let data = stream(9, 30_000);
    let mut rec = RecalibratorF64::new(n, 2, UpdateMode::Expected).unwrap();
    let mut log = Vec::new();
    run(&mut rec, &data, &mut log);
    let l2 = rec.expected_ledger().l2_regret().unwrap();
    let slack = rec.anchor_regret_slack().unwrap();
    assert!(l2 < 1.0 / n as f64 + slack.max(0.0), "l2 {l2}, slack {slack}");

    // slack oracle: each round's loss against its bucket's nominal value
    let mut oracle = 0.0;
    for r in &log {
        let y = r.y as f64;
        let anchor = r.bucket.unwrap() as f64 / n as f64;
        oracle += (y - r.sampled as f64 / n as f64).powi(2) - (y - anchor).powi(2);
    }
    assert!((oracle / log.len() as f64 - slack).abs() <= 1e-10);
}

#[test]
fn equal_frequency_buckets_make_the_convexity_bound_tight() {
    // every round plays the same point mass in two buckets with identical outcome mixes
    let n = 2;
    let mut rec = RecalibratorF64::new(n, 0, UpdateMode::Expected).unwrap();
    for t in 0..4 {
        let p = if t < 2 { 0.1 } else { 0.9 };
        rec.step(p).unwrap();
        rec.observe(u8::from(t % 2 == 0)).unwrap();
    }
    let d = per_bucket_decomposition(&rec).unwrap();
    for b in &d.targets {
        assert!((b.aggregate - b.weighted_sum).abs() <= 1e-12, "{b:?}");
    }
}

#[test]
fn differing_bucket_frequencies_make_the_convexity_bound_strict() {
    // both buckets start at the midpoint; one sees only 1s, the other only 0s
    let n = 2;
    let mut rec = RecalibratorF64::new(n, 0, UpdateMode::Expected).unwrap();
    rec.step(0.1).unwrap();
    rec.observe(1).unwrap();
    rec.step(0.9).unwrap();
    rec.observe(0).unwrap();
    let d = per_bucket_decomposition(&rec).unwrap();
    let mid = d.targets.iter().find(|b| b.target == 1).unwrap();
    // aggregate: frequency ½ at point ½ → 0; parts: ½·(1−½)² + ½·(0−½)² = ¼
    assert_eq!(mid.aggregate, 0.0);
    assert!((mid.weighted_sum - 0.25).abs() < 1e-15);
}

#[test]
fn single_precision_recalibrator_runs_the_protocol() {
    let mut rec = RecalibratorF32::new(10, 3, UpdateMode::Expected).unwrap();
    for &(p, y) in &stream(10, 2_000) {
        let e = rec.step(p as f32).unwrap();
        assert!((0.0..=1.0).contains(&e));
        rec.observe(y).unwrap();
    }
    assert_eq!(rec.routing_counts().iter().sum::<u64>(), 2_000);
    let c = rec.expected_ledger().calibration_error().unwrap();
    assert!((0.0..=1.0).contains(&c));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bucket_index_is_a_monotone_partition(n in 1usize..50, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (i, j) = (bucket_index(lo, n).unwrap(), bucket_index(hi, n).unwrap());
        prop_assert!(i <= j && j < n);
        let k = i as f64;
        prop_assert!(lo >= k / n as f64);
        prop_assert!(lo < (k + 1.0) / n as f64 || i == n - 1);
    }

    #[test]
    fn routing_counts_conserve_steps(
        n in 1usize..12,
        seed in any::<u64>(),
        rounds in prop::collection::vec((0.0f64..=1.0, 0u8..=1), 1..150),
    ) {
        let mut rec = RecalibratorF64::new(n, seed, UpdateMode::Expected).unwrap();
        for (t, &(p, y)) in rounds.iter().enumerate() {
            rec.step(p).unwrap();
            rec.observe(y).unwrap();
            prop_assert_eq!(rec.routing_counts().iter().sum::<u64>(), t as u64 + 1);
        }
        let d = per_bucket_decomposition(&rec).unwrap();
        prop_assert!(d.max_violation() <= 1e-9);

        let mut sums = Sums::new(n);
        for inst in rec.instances().values() {
            for i in 0..=n {
                sums.weight[i] += inst.state.weighted_count()[i];
                sums.outcome[i] += inst.state.weighted_outcome()[i];
            }
        }
        sums.steps = rounds.len() as u64;
        let c = rec.expected_ledger().calibration_error().unwrap();
        prop_assert!((c - sums.calibration_error()).abs() <= 1e-10);
        prop_assert!((0.0..=1.0).contains(&c));
    }
}
