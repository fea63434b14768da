use proptest::prelude::*;

use slmarkov::ident::{run, step, Windows};
use slmarkov::sim::{reference_scenario, MatrixSpec, Segment};
use slmarkov::{Identifier, IdentifierConfig, Opinion, ScenarioSpec, State, WindowStats};

fn constant_chain(p_gg: f64, p_bb: f64, packets: usize, seed: u64) -> ScenarioSpec {
    let mut spec = reference_scenario();
    spec.total_packets = packets;
    spec.seed = seed;
    spec.segments = vec![Segment {
        start: 0,
        matrix: MatrixSpec::Constant {
            matrix: vec![vec![p_gg, 1.0 - p_gg], vec![1.0 - p_bb, p_bb]],
        },
    }];
    spec
}

fn stats(counts: Vec<u64>, idx: usize) -> WindowStats {
    let n = (counts.len() as f64).sqrt() as usize;
    WindowStats::from_counts(n, counts, idx).unwrap()
}

#[test]
fn uncertainty_decreases_on_constant_chain_without_discount() {
    let cfg = IdentifierConfig::new(2)
        .with_threshold(f64::INFINITY)
        .with_discounts(1.0, 1.0);
    let trace = constant_chain(0.9, 0.6, 50_000, 3).generate().unwrap();
    let outs = run(trace.states.iter().copied(), &cfg).unwrap();
    assert_eq!(outs.len(), 500);
    assert!(outs.iter().all(|o| o.reset_rows.is_empty()));
    for pair in outs.windows(2) {
        for i in 0..2 {
            let (a, b) = (
                pair[0].opinions.row(i).uncertainty(),
                pair[1].opinions.row(i).uncertainty(),
            );
            assert!(b <= a, "window {}: u {b} > {a}", pair[1].window_index);
        }
    }
}

#[test]
fn uncertainty_only_rises_on_reset_windows() {
    // The sparse bad-state row sees ~20 transitions per window, so noise
    // alone can cross the default threshold; between resets u must fall.
    let cfg = IdentifierConfig::new(2).with_discounts(1.0, 1.0);
    let trace = constant_chain(0.9, 0.6, 50_000, 3).generate().unwrap();
    let outs = run(trace.states.iter().copied(), &cfg).unwrap();
    for pair in outs.windows(2) {
        for i in 0..2 {
            let (a, b) = (
                pair[0].opinions.row(i).uncertainty(),
                pair[1].opinions.row(i).uncertainty(),
            );
            assert!(b <= a || pair[1].reset_rows.contains(&i));
        }
    }
}

#[test]
fn default_discounts_hold_uncertainty_at_a_floor() {
    let cfg = IdentifierConfig::new(2);
    let trace = constant_chain(0.9, 0.6, 100_000, 4).generate().unwrap();
    let outs = run(trace.states.iter().copied(), &cfg).unwrap();
    let late: Vec<f64> = outs[500..]
        .iter()
        .map(|o| o.opinions.row(0).uncertainty())
        .collect();
    let min = late.iter().copied().fold(f64::INFINITY, f64::min);
    // Discounting keeps the retained evidence bounded, unlike plain fusion.
    assert!(min > 1e-3, "u floor {min}");
}

#[test]
fn no_conflict_threshold_pools_all_evidence() {
    let cfg = IdentifierConfig::new(3)
        .with_threshold(f64::INFINITY)
        .with_discounts(1.0, 1.0);
    let mut totals = [0u64; 9];
    let mut prev = None;
    let windows = [
        vec![5, 3, 1, 0, 8, 2, 4, 0, 6],
        vec![0, 0, 9, 7, 1, 1, 0, 5, 5],
        vec![30, 0, 0, 0, 0, 1, 0, 2, 0],
    ];
    for (idx, counts) in windows.into_iter().enumerate() {
        for (t, c) in totals.iter_mut().zip(&counts) {
            *t += c;
        }
        let out = step(prev.as_ref(), &stats(counts, idx), &cfg).unwrap();
        for i in 0..3 {
            let row: Vec<f64> = totals[i * 3..i * 3 + 3].iter().map(|&c| c as f64).collect();
            let sum: f64 = row.iter().sum();
            let u_oracle = 2.0 / (2.0 + sum);
            let b_oracle: Vec<f64> = row.iter().map(|r| r / (2.0 + sum)).collect();
            let got = out.opinions.row(i);
            assert!((got.uncertainty() - u_oracle).abs() < 1e-12);
            for (b, o) in got.belief().iter().zip(&b_oracle) {
                assert!((b - o).abs() < 1e-12);
            }
        }
        prev = Some(out.opinions);
    }
}

#[test]
fn tiny_threshold_degenerates_to_windowed_estimate() {
    let cfg = IdentifierConfig::new(2)
        .with_threshold(1e-12)
        .with_discounts(1.0, 1.0);
    let trace = constant_chain(0.9, 0.6, 20_000, 9).generate().unwrap();
    let outs = run(trace.states.iter().copied(), &cfg).unwrap();
    for (out, w) in outs
        .iter()
        .zip(Windows::new(trace.states.iter().copied(), &cfg))
        .skip(1)
    {
        let w = w.unwrap();
        for i in 0..2 {
            let row = w.row(i);
            let total = (row[0] + row[1]) as f64;
            // Any noise triggers a reset; the row is then exactly this window.
            if out.reset_rows.contains(&i) {
                let expected = (row[0] as f64 + 1.0) / (total + 2.0);
                assert!((out.transition.get(i, 0) - expected).abs() < 1e-12);
            }
        }
    }
    let resets: usize = outs.iter().map(|o| o.reset_rows.len()).sum();
    let possible = 2 * (outs.len() - 1);
    assert!(
        resets * 100 >= possible * 95,
        "{resets} of {possible} possible resets"
    );
}

#[test]
fn jumps_trigger_resets_on_the_affected_row() {
    let spec = reference_scenario();
    let trace = spec.generate().unwrap();
    let cfg = IdentifierConfig::new(2);
    let outs = run(trace.states.iter().copied(), &cfg).unwrap();
    let first = outs
        .iter()
        .skip(190)
        .find(|o| o.reset_rows.contains(&0))
        .map(|o| o.window_index)
        .unwrap();
    assert!(first <= 193, "first reset after the jump at window {first}");
}

#[test]
fn push_interface_matches_batch_run() {
    let cfg = IdentifierConfig::new(2).with_window_len(37);
    let trace = constant_chain(0.7, 0.3, 5_000, 1).generate().unwrap();
    let batch = run(trace.states.iter().copied(), &cfg).unwrap();
    let mut ident = Identifier::new(cfg).unwrap();
    let pushed: Vec<_> = trace
        .states
        .iter()
        .filter_map(|&s| ident.push(s).unwrap())
        .collect();
    assert_eq!(pushed, batch);
}

#[test]
fn out_of_range_state_reports_position() {
    let cfg = IdentifierConfig::new(2).with_window_len(10);
    let mut states: Vec<State> = (0..25).map(|_| State::new(1).unwrap()).collect();
    states[13] = State::new(3).unwrap();
    let err = run(states, &cfg).unwrap_err();
    assert!(matches!(
        err,
        slmarkov::Error::Observation {
            id: 3,
            window: 1,
            offset: 3,
            ..
        }
    ));
}

fn count_vec(n: usize) -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..60, n * n)
}

proptest! {
    #[test]
    fn outputs_are_row_stochastic(
        windows in prop::collection::vec(count_vec(3), 1..12),
        theta in 0.0f64..1.0,
        d_prev in 0.5f64..=1.0,
        d_new in 0.5f64..=1.0,
    ) {
        let cfg = IdentifierConfig::new(3).with_threshold(theta).with_discounts(d_prev, d_new);
        let mut prev = None;
        for (idx, counts) in windows.into_iter().enumerate() {
            let out = step(prev.as_ref(), &stats(counts, idx), &cfg).unwrap();
            for row in out.transition.to_rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|p| (0.0..=1.0).contains(p)));
            }
            for o in out.opinions.rows() {
                let mass: f64 = o.belief().iter().sum::<f64>() + o.uncertainty();
                prop_assert!((mass - 1.0).abs() < 1e-9);
                prop_assert!(o.uncertainty() > 0.0 && o.uncertainty() <= 1.0);
            }
            if let Some(dc) = &out.conflicts {
                prop_assert!(dc.iter().all(|c| (0.0..=1.0).contains(c)));
                for (i, c) in dc.iter().enumerate() {
                    prop_assert_eq!(out.reset_rows.contains(&i), *c > theta);
                }
            }
            prev = Some(out.opinions);
        }
    }

    #[test]
    fn fusing_never_raises_uncertainty_without_discount(
        windows in prop::collection::vec(count_vec(2), 2..10),
    ) {
        let cfg = IdentifierConfig::new(2)
            .with_threshold(f64::INFINITY)
            .with_discounts(1.0, 1.0);
        let mut prev: Option<slmarkov::OpinionMatrix> = None;
        for (idx, counts) in windows.into_iter().enumerate() {
            let out = step(prev.as_ref(), &stats(counts, idx), &cfg).unwrap();
            if let Some(p) = &prev {
                for i in 0..2 {
                    prop_assert!(out.opinions.row(i).uncertainty() <= p.row(i).uncertainty() + 1e-15);
                }
            }
            prev = Some(out.opinions);
        }
    }

    #[test]
    fn window_opinion_matches_dirichlet_mean(counts in count_vec(2)) {
        let cfg = IdentifierConfig::new(2);
        let out = step(None, &stats(counts.clone(), 0), &cfg).unwrap();
        for i in 0..2 {
            let (a, b) = (counts[2 * i] as f64, counts[2 * i + 1] as f64);
            let mean = (a + 1.0) / (a + b + 2.0);
            prop_assert!((out.transition.get(i, 0) - mean).abs() < 1e-12);
            let o: &Opinion = out.opinions.row(i);
            prop_assert!((o.uncertainty() - 2.0 / (a + b + 2.0)).abs() < 1e-12);
        }
    }
}
