use std::ffi::{CStr, CString};
use std::ptr;

use slmarkov_ffi::*;

fn opinion(belief: &[f64], u: f64, base_rate: &[f64]) -> SlmOpinion {
    SlmOpinion {
        k: belief.len(),
        belief: belief.as_ptr(),
        uncertainty: u,
        base_rate: base_rate.as_ptr(),
    }
}

fn last_error() -> String {
    let p = slm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn opinion_operators_match_hand_values() {
    let a = [0.5, 0.5];
    let (b1, b2) = ([0.7, 0.1], [0.5, 0.3]);
    let prev = opinion(&b1, 0.2, &a);
    let new = opinion(&b2, 0.2, &a);
    unsafe {
        let mut p = [0.0; 2];
        assert_eq!(slm_opinion_project(&prev, p.as_mut_ptr()), SlmStatus::Ok);
        assert!((p[0] - 0.8).abs() < 1e-15 && (p[1] - 0.2).abs() < 1e-15);

        let (mut fb, mut fu, mut fa) = ([0.0; 2], 0.0, [0.0; 2]);
        let s = slm_opinion_fuse(&prev, &new, fb.as_mut_ptr(), &mut fu, fa.as_mut_ptr());
        assert_eq!(s, SlmStatus::Ok);
        // Evidence (7, 1) + (5, 3) = (12, 4) under W = 2.
        assert!((fb[0] - 12.0 / 18.0).abs() < 1e-12);
        assert!((fu - 2.0 / 18.0).abs() < 1e-12);
        assert_eq!(fa, a);

        let (mut db, mut du) = ([0.0; 2], 0.0);
        assert_eq!(
            slm_opinion_discount(&prev, 0.5, db.as_mut_ptr(), &mut du),
            SlmStatus::Ok
        );
        assert!((db[0] - 0.35).abs() < 1e-15 && (du - 0.6).abs() < 1e-15);

        let (pb, nb) = ([0.85, 0.05], [0.6, 0.2]);
        let mut dc = f64::NAN;
        let s =
            slm_opinion_degree_of_conflict(&opinion(&pb, 0.1, &a), &opinion(&nb, 0.2, &a), &mut dc);
        assert_eq!(s, SlmStatus::Ok);
        assert!((dc - 0.144).abs() < 1e-12);

        let ev = [8.0, 2.0];
        let (mut eb, mut eu) = ([0.0; 2], 0.0);
        let s =
            slm_opinion_from_evidence(2, ev.as_ptr(), 2.0, ptr::null(), eb.as_mut_ptr(), &mut eu);
        assert_eq!(s, SlmStatus::Ok);
        assert!((eb[0] - 8.0 / 12.0).abs() < 1e-15 && (eu - 2.0 / 12.0).abs() < 1e-15);
    }
}

#[test]
fn errors_set_status_and_message() {
    let a = [0.5, 0.5];
    let bad = [0.9, 0.9];
    unsafe {
        let mut p = [0.0; 2];
        assert_eq!(
            slm_opinion_project(&opinion(&bad, 0.2, &a), p.as_mut_ptr()),
            SlmStatus::Data
        );
        assert!(!last_error().is_empty());

        assert_eq!(
            slm_opinion_project(ptr::null(), p.as_mut_ptr()),
            SlmStatus::NullPointer
        );
        assert!(last_error().contains("null"));

        let vac = [0.0, 0.0];
        let ok = [0.5, 0.3];
        let (mut fb, mut fu) = ([0.0; 2], 0.0);
        let s = slm_opinion_fuse(
            &opinion(&vac, 1.0, &a),
            &opinion(&ok, 0.2, &a),
            fb.as_mut_ptr(),
            &mut fu,
            ptr::null_mut(),
        );
        assert_eq!(s, SlmStatus::Data);

        let mut params = std::mem::zeroed::<SlmIdentifierParams>();
        assert_eq!(slm_identifier_default_params(2, &mut params), SlmStatus::Ok);
        params.window_len = 0;
        let mut h = ptr::null_mut();
        assert_eq!(
            slm_identifier_new(&params, &mut h),
            SlmStatus::InvalidArgument
        );
        assert!(h.is_null());
    }
}

#[test]
fn identifier_handle_lifecycle() {
    unsafe {
        let mut params = std::mem::zeroed::<SlmIdentifierParams>();
        assert_eq!(slm_identifier_default_params(2, &mut params), SlmStatus::Ok);
        assert_eq!(params.window_len, 100);
        assert_eq!(params.conflict_threshold, 0.15);
        params.window_len = 4;
        let mut h = ptr::null_mut();
        assert_eq!(slm_identifier_new(&params, &mut h), SlmStatus::Ok);

        let mut t = [0.0; 4];
        assert_eq!(
            slm_identifier_transition(h, t.as_mut_ptr(), 4),
            SlmStatus::Unavailable
        );

        let mut done = 9u8;
        for (i, id) in [1u32, 1, 2, 1].into_iter().enumerate() {
            assert_eq!(slm_identifier_push(h, id, &mut done), SlmStatus::Ok);
            assert_eq!(done, u8::from(i == 3));
        }
        assert_eq!(
            slm_identifier_transition(h, t.as_mut_ptr(), 4),
            SlmStatus::Ok
        );
        // Row 1 saw 1→1 once and 1→2 once; row 2 saw 2→1 once.
        assert!((t[0] - 0.5).abs() < 1e-15);
        assert!((t[2] - 2.0 / 3.0).abs() < 1e-15);
        let mut dc = [0.0; 2];
        assert_eq!(
            slm_identifier_conflicts(h, dc.as_mut_ptr(), 2),
            SlmStatus::Unavailable
        );

        let counts = [40u64, 0, 0, 40];
        assert_eq!(
            slm_identifier_step_counts(h, counts.as_ptr(), 4),
            SlmStatus::Ok
        );
        let mut windows = 0;
        assert_eq!(slm_identifier_windows(h, &mut windows), SlmStatus::Ok);
        assert_eq!(windows, 2);
        assert_eq!(
            slm_identifier_conflicts(h, dc.as_mut_ptr(), 2),
            SlmStatus::Ok
        );
        let mut resets = [7u8; 2];
        assert_eq!(
            slm_identifier_resets(h, resets.as_mut_ptr(), 2),
            SlmStatus::Ok
        );
        for (d, r) in dc.iter().zip(resets) {
            assert_eq!(r, u8::from(*d > 0.15));
        }
        let mut u = [0.0; 1];
        assert_eq!(
            slm_identifier_uncertainty(h, u.as_mut_ptr(), 1),
            SlmStatus::BufferTooSmall
        );
        assert_eq!(slm_identifier_push(h, 0, ptr::null_mut()), SlmStatus::Data);
        assert_eq!(slm_identifier_push(h, 3, ptr::null_mut()), SlmStatus::Data);
        assert!(last_error().contains("out of range"));
        slm_identifier_free(h);
        slm_identifier_free(ptr::null_mut());
    }
}

#[test]
fn traces_match_the_rust_simulator() {
    unsafe {
        let mut t = ptr::null_mut();
        assert_eq!(slm_trace_reference(42, &mut t), SlmStatus::Ok);
        let mut len = 0;
        assert_eq!(slm_trace_len(t, &mut len), SlmStatus::Ok);
        assert_eq!(len, 100_000);
        let mut states = vec![0u32; len];
        assert_eq!(slm_trace_states(t, states.as_mut_ptr(), len), SlmStatus::Ok);
        slm_trace_free(t);
        let expected: Vec<u32> = slmarkov::reference_scenario()
            .generate()
            .unwrap()
            .states
            .iter()
            .map(|s| s.id())
            .collect();
        assert_eq!(states, expected);

        let json = CString::new(
            r#"{"states": 2, "total_packets": 10, "seed": 1,
                "segments": [{"start": 0, "kind": "constant", "matrix": [[1, 0], [0, 1]]}]}"#,
        )
        .unwrap();
        assert_eq!(
            slm_trace_from_spec_json(json.as_ptr(), &mut t),
            SlmStatus::Ok
        );
        let mut few = [0u32; 10];
        assert_eq!(
            slm_trace_states(t, few.as_mut_ptr(), 5),
            SlmStatus::BufferTooSmall
        );
        assert_eq!(slm_trace_states(t, few.as_mut_ptr(), 10), SlmStatus::Ok);
        assert_eq!(few, [1; 10]);
        slm_trace_free(t);

        let bad = CString::new("{").unwrap();
        assert_eq!(
            slm_trace_from_spec_json(bad.as_ptr(), &mut t),
            SlmStatus::InvalidArgument
        );
    }
}

#[test]
fn delay_classification() {
    let delays: Vec<f64> = (0..200)
        .map(|i| {
            if i % 10 == 9 {
                27.0
            } else if i == 50 {
                80.0
            } else {
                20.0
            }
        })
        .collect();
    let mut states = vec![0u32; delays.len()];
    unsafe {
        assert_eq!(
            slm_delay_classify(
                delays.as_ptr(),
                delays.len(),
                ptr::null(),
                states.as_mut_ptr()
            ),
            SlmStatus::Ok
        );
        let mut cfg = std::mem::zeroed::<SlmThresholdConfig>();
        assert_eq!(slm_threshold_default(&mut cfg), SlmStatus::Ok);
        assert_eq!((cfg.margin_ms, cfg.harq_offset_ms), (3.0, 7.0));
        cfg.average_window = 0;
        let s = slm_delay_classify(delays.as_ptr(), delays.len(), &cfg, states.as_mut_ptr());
        assert_eq!(s, SlmStatus::InvalidArgument);
    }
    assert_eq!(states[9], 2);
    assert_eq!(states[50], 3);
    assert_eq!(states.iter().filter(|&&s| s == 1).count(), 179);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(slm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
