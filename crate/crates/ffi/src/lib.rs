//! C ABI over `slmarkov`.
//!
//! Conventions:
//! - Every fallible function returns an [`SlmStatus`]; on failure a message
//!   is available from [`slm_last_error_message`] on the same thread.
//! - Handles ([`SlmIdentifier`], [`SlmTrace`]) are opaque, created by a
//!   `*_new`/constructor function and released with the matching `*_free`.
//! - Output buffers are caller-allocated; lengths are passed explicitly and
//!   checked. Matrices are row-major.
//! - Panics never cross the boundary; they surface as `SLM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use slmarkov::delay::{self, DelayRecord, ThresholdConfig};
use slmarkov::{
    EvidenceVector, Identifier, IdentifierConfig, IdentifierOutput, Opinion, ScenarioSpec, State,
    WindowStats,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Parameters or configuration rejected.
    InvalidArgument = 2,
    /// Input data rejected (bad opinion, observation out of range, ...).
    Data = 3,
    Io = 4,
    /// An output buffer is shorter than required.
    BufferTooSmall = 5,
    /// Requested value does not exist yet (for example before the first window).
    Unavailable = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(SlmStatus, String);

impl From<slmarkov::Error> for Fail {
    fn from(e: slmarkov::Error) -> Self {
        let status = match e.class() {
            slmarkov::ErrorClass::Config => SlmStatus::InvalidArgument,
            slmarkov::ErrorClass::Io => SlmStatus::Io,
            slmarkov::ErrorClass::Data => SlmStatus::Data,
        };
        Fail(status, e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Fail>;

fn guard<F: FnOnce() -> FfiResult>(f: F) -> SlmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlmStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(format!("internal panic: {msg}"));
            SlmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(SlmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

fn copy_into(dst: &mut [f64], src: &[f64], what: &str) -> FfiResult {
    if dst.len() < src.len() {
        return Err(Fail(
            SlmStatus::BufferTooSmall,
            format!("{what} needs {} elements, got {}", src.len(), dst.len()),
        ));
    }
    dst[..src.len()].copy_from_slice(src);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn slm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Borrowed view of an opinion over `k` outcomes.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlmOpinion {
    pub k: usize,
    /// `k` belief masses.
    pub belief: *const f64,
    pub uncertainty: f64,
    /// `k` base rates.
    pub base_rate: *const f64,
}

unsafe fn read_opinion(p: *const SlmOpinion, what: &str) -> FfiResult<Opinion> {
    let v = p.as_ref().ok_or_else(|| null(what))?;
    let b = slice(v.belief, v.k, "belief")?.to_vec();
    let a = slice(v.base_rate, v.k, "base_rate")?.to_vec();
    Ok(Opinion::new(b, v.uncertainty, a)?)
}

/// Writes an opinion into caller buffers of length `k`; `out_base_rate`
/// may be null.
unsafe fn write_opinion(
    o: &Opinion,
    k: usize,
    out_belief: *mut f64,
    out_uncertainty: *mut f64,
    out_base_rate: *mut f64,
) -> FfiResult {
    copy_into(
        slice_mut(out_belief, k, "out_belief")?,
        o.belief(),
        "out_belief",
    )?;
    *out_ref(out_uncertainty, "out_uncertainty")? = o.uncertainty();
    if !out_base_rate.is_null() {
        copy_into(
            slice_mut(out_base_rate, k, "out_base_rate")?,
            o.base_rate(),
            "out_base_rate",
        )?;
    }
    Ok(())
}

/// Projected probability `b + a·u` into `out_projection[0..k]`.
///
/// # Safety
/// `opinion` must point to a valid view; `out_projection` to `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn slm_opinion_project(
    opinion: *const SlmOpinion,
    out_projection: *mut f64,
) -> SlmStatus {
    guard(|| {
        let o = read_opinion(opinion, "opinion")?;
        copy_into(
            slice_mut(out_projection, o.cardinality(), "out_projection")?,
            &o.project(),
            "out_projection",
        )
    })
}

/// Opinion equivalent to `k` evidence counts under prior weight
/// `prior_weight`. `base_rate` may be null for a uniform base rate.
///
/// # Safety
/// `evidence` must hold `k` doubles, `base_rate` `k` doubles or be null,
/// `out_belief` room for `k` doubles.
#[no_mangle]
pub unsafe extern "C" fn slm_opinion_from_evidence(
    k: usize,
    evidence: *const f64,
    prior_weight: f64,
    base_rate: *const f64,
    out_belief: *mut f64,
    out_uncertainty: *mut f64,
) -> SlmStatus {
    guard(|| {
        let r = slice(evidence, k, "evidence")?.to_vec();
        let a = if base_rate.is_null() {
            vec![1.0 / k.max(1) as f64; k]
        } else {
            slice(base_rate, k, "base_rate")?.to_vec()
        };
        let o = Opinion::from_evidence(&EvidenceVector::new(r, prior_weight, a)?);
        write_opinion(&o, k, out_belief, out_uncertainty, ptr::null_mut())
    })
}

/// Cumulative fusion of two non-vacuous, non-dogmatic opinions.
///
/// # Safety
/// Input views must be valid; output buffers hold `k` doubles
/// (`out_base_rate` may be null).
#[no_mangle]
pub unsafe extern "C" fn slm_opinion_fuse(
    a: *const SlmOpinion,
    b: *const SlmOpinion,
    out_belief: *mut f64,
    out_uncertainty: *mut f64,
    out_base_rate: *mut f64,
) -> SlmStatus {
    guard(|| {
        let (a, b) = (read_opinion(a, "a")?, read_opinion(b, "b")?);
        let fused = a.cumulative_fuse(&b)?;
        write_opinion(
            &fused,
            fused.cardinality(),
            out_belief,
            out_uncertainty,
            out_base_rate,
        )
    })
}

/// Trust discount by `discount` in [0, 1].
///
/// # Safety
/// As for [`slm_opinion_fuse`].
#[no_mangle]
pub unsafe extern "C" fn slm_opinion_discount(
    opinion: *const SlmOpinion,
    discount: f64,
    out_belief: *mut f64,
    out_uncertainty: *mut f64,
) -> SlmStatus {
    guard(|| {
        let o = read_opinion(opinion, "opinion")?.trust_discount(discount)?;
        write_opinion(
            &o,
            o.cardinality(),
            out_belief,
            out_uncertainty,
            ptr::null_mut(),
        )
    })
}

/// Degree of conflict between two opinions, in [0, 1].
///
/// # Safety
/// Input views must be valid; `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn slm_opinion_degree_of_conflict(
    a: *const SlmOpinion,
    b: *const SlmOpinion,
    out: *mut f64,
) -> SlmStatus {
    guard(|| {
        let dc = read_opinion(a, "a")?.degree_of_conflict(&read_opinion(b, "b")?)?;
        *out_ref(out, "out")? = dc;
        Ok(())
    })
}

/// Identifier parameters; discounts apply to every row and base rates are
/// uniform.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlmIdentifierParams {
    pub num_states: usize,
    pub window_len: usize,
    pub prior_weight: f64,
    pub discount_prev: f64,
    pub discount_new: f64,
    /// Degree-of-conflict threshold; `INFINITY` disables resets.
    pub conflict_threshold: f64,
}

/// Fills `out` with the defaults for `num_states` states.
///
/// # Safety
/// `out` must point to writable params.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_default_params(
    num_states: usize,
    out: *mut SlmIdentifierParams,
) -> SlmStatus {
    guard(|| {
        let cfg = IdentifierConfig::new(num_states);
        *out_ref(out, "out")? = SlmIdentifierParams {
            num_states,
            window_len: cfg.window_len,
            prior_weight: cfg.prior_weight,
            discount_prev: slmarkov::ident::DEFAULT_DISCOUNT,
            discount_new: slmarkov::ident::DEFAULT_DISCOUNT,
            conflict_threshold: cfg.conflict_threshold,
        };
        Ok(())
    })
}

/// Opaque online identifier.
pub struct SlmIdentifier {
    inner: Identifier,
    last: Option<IdentifierOutput>,
}

/// Creates an identifier; release it with [`slm_identifier_free`].
///
/// # Safety
/// `params` must be valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_new(
    params: *const SlmIdentifierParams,
    out: *mut *mut SlmIdentifier,
) -> SlmStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ref(out, "out")?;
        let cfg = IdentifierConfig::new(p.num_states)
            .with_window_len(p.window_len)
            .with_prior_weight(p.prior_weight)
            .with_discounts(p.discount_prev, p.discount_new)
            .with_threshold(p.conflict_threshold);
        let inner = Identifier::new(cfg)?;
        *out = Box::into_raw(Box::new(SlmIdentifier { inner, last: None }));
        Ok(())
    })
}

/// Releases an identifier. Null is ignored.
///
/// # Safety
/// `ident` must come from [`slm_identifier_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_free(ident: *mut SlmIdentifier) {
    if !ident.is_null() {
        drop(Box::from_raw(ident));
    }
}

unsafe fn ident_ref<'a>(p: *const SlmIdentifier) -> FfiResult<&'a SlmIdentifier> {
    p.as_ref().ok_or_else(|| null("identifier"))
}

unsafe fn ident_mut<'a>(p: *mut SlmIdentifier) -> FfiResult<&'a mut SlmIdentifier> {
    p.as_mut().ok_or_else(|| null("identifier"))
}

/// Feeds one observed state (1-based id). `out_window_done` (nullable) is
/// set to 1 when this observation completed a window, else 0.
///
/// # Safety
/// `ident` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_push(
    ident: *mut SlmIdentifier,
    state_id: u32,
    out_window_done: *mut u8,
) -> SlmStatus {
    guard(|| {
        let h = ident_mut(ident)?;
        let state = State::new(state_id)
            .ok_or_else(|| Fail(SlmStatus::Data, "state ids are 1-based".into()))?;
        let done = match h.inner.push(state)? {
            Some(out) => {
                h.last = Some(out);
                1
            }
            None => 0,
        };
        if !out_window_done.is_null() {
            *out_window_done = done;
        }
        Ok(())
    })
}

/// Applies one window given as `num_states²` row-major transition counts.
///
/// # Safety
/// `counts` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_step_counts(
    ident: *mut SlmIdentifier,
    counts: *const u64,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let h = ident_mut(ident)?;
        let counts = slice(counts, len, "counts")?.to_vec();
        let stats = WindowStats::from_counts(
            h.inner.config().num_states,
            counts,
            h.inner.windows_processed(),
        )?;
        h.last = Some(h.inner.step_window(&stats)?);
        Ok(())
    })
}

/// Number of windows processed so far.
///
/// # Safety
/// `ident` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_windows(
    ident: *const SlmIdentifier,
    out: *mut usize,
) -> SlmStatus {
    guard(|| {
        *out_ref(out, "out")? = ident_ref(ident)?.inner.windows_processed();
        Ok(())
    })
}

unsafe fn last_output<'a>(ident: *const SlmIdentifier) -> FfiResult<&'a IdentifierOutput> {
    ident_ref(ident)?
        .last
        .as_ref()
        .ok_or_else(|| Fail(SlmStatus::Unavailable, "no window has completed yet".into()))
}

/// Latest projected transition matrix, `num_states²` doubles row-major.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_transition(
    ident: *const SlmIdentifier,
    out: *mut f64,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let last = last_output(ident)?;
        copy_into(
            slice_mut(out, len, "out")?,
            last.transition.as_flat(),
            "out",
        )
    })
}

/// Latest per-row uncertainty, `num_states` doubles.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_uncertainty(
    ident: *const SlmIdentifier,
    out: *mut f64,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let last = last_output(ident)?;
        copy_into(
            slice_mut(out, len, "out")?,
            &last.opinions.uncertainties(),
            "out",
        )
    })
}

/// Latest per-row degree of conflict. Returns `SLM_STATUS_UNAVAILABLE`
/// after the first window, which has nothing to compare against.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_conflicts(
    ident: *const SlmIdentifier,
    out: *mut f64,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let dc = last_output(ident)?.conflicts.as_ref().ok_or_else(|| {
            Fail(
                SlmStatus::Unavailable,
                "no conflicts for the first window".into(),
            )
        })?;
        copy_into(slice_mut(out, len, "out")?, dc, "out")
    })
}

/// Latest reset flags, one byte per row (1 = row was reset).
///
/// # Safety
/// `out` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn slm_identifier_resets(
    ident: *const SlmIdentifier,
    out: *mut u8,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let last = last_output(ident)?;
        let n = last.transition.num_states();
        let dst = slice_mut(out, len, "out")?;
        if dst.len() < n {
            return Err(Fail(
                SlmStatus::BufferTooSmall,
                format!("out needs {n} elements, got {len}"),
            ));
        }
        dst[..n].fill(0);
        for &r in &last.reset_rows {
            dst[r] = 1;
        }
        Ok(())
    })
}

/// Opaque simulated observation trace.
pub struct SlmTrace {
    states: Vec<u32>,
}

fn box_trace(spec: &ScenarioSpec, seed: u64, out: &mut *mut SlmTrace) -> FfiResult {
    let trace = spec.generate_with_seed(seed)?;
    let states = trace.states.iter().map(|s| s.id()).collect();
    *out = Box::into_raw(Box::new(SlmTrace { states }));
    Ok(())
}

/// Simulates the built-in two-state scenario with `seed`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slm_trace_reference(seed: u64, out: *mut *mut SlmTrace) -> SlmStatus {
    guard(|| box_trace(&slmarkov::reference_scenario(), seed, out_ref(out, "out")?))
}

/// Simulates a scenario given as nul-terminated JSON, using its own seed.
///
/// # Safety
/// `json` must be a valid C string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slm_trace_from_spec_json(
    json: *const c_char,
    out: *mut *mut SlmTrace,
) -> SlmStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| {
            Fail(
                SlmStatus::InvalidArgument,
                format!("json is not UTF-8: {e}"),
            )
        })?;
        let spec = ScenarioSpec::from_json(text)?;
        box_trace(&spec, spec.seed, out_ref(out, "out")?)
    })
}

/// Number of observations in a trace.
///
/// # Safety
/// `trace` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn slm_trace_len(trace: *const SlmTrace, out: *mut usize) -> SlmStatus {
    guard(|| {
        *out_ref(out, "out")? = trace.as_ref().ok_or_else(|| null("trace"))?.states.len();
        Ok(())
    })
}

/// Copies the 1-based state ids into `out`.
///
/// # Safety
/// `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn slm_trace_states(
    trace: *const SlmTrace,
    out: *mut u32,
    len: usize,
) -> SlmStatus {
    guard(|| {
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let dst = slice_mut(out, len, "out")?;
        if dst.len() < t.states.len() {
            return Err(Fail(
                SlmStatus::BufferTooSmall,
                format!("out needs {} elements, got {len}", t.states.len()),
            ));
        }
        dst[..t.states.len()].copy_from_slice(&t.states);
        Ok(())
    })
}

/// Releases a trace. Null is ignored.
///
/// # Safety
/// `trace` must come from a trace constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn slm_trace_free(trace: *mut SlmTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Delay classification parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlmThresholdConfig {
    pub margin_ms: f64,
    pub harq_offset_ms: f64,
    pub average_window: usize,
    pub warmup_inliers: usize,
}

impl From<ThresholdConfig> for SlmThresholdConfig {
    fn from(c: ThresholdConfig) -> Self {
        SlmThresholdConfig {
            margin_ms: c.margin_ms,
            harq_offset_ms: c.harq_offset_ms,
            average_window: c.average_window,
            warmup_inliers: c.warmup_inliers,
        }
    }
}

/// Fills `out` with the default delay thresholds.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn slm_threshold_default(out: *mut SlmThresholdConfig) -> SlmStatus {
    guard(|| {
        *out_ref(out, "out")? = ThresholdConfig::default().into();
        Ok(())
    })
}

/// Classifies `len` consecutive packet delays (ms) into states 1..=3.
/// `cfg` may be null for defaults.
///
/// # Safety
/// `delays_ms` and `out_states` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn slm_delay_classify(
    delays_ms: *const f64,
    len: usize,
    cfg: *const SlmThresholdConfig,
    out_states: *mut u32,
) -> SlmStatus {
    guard(|| {
        let cfg = match cfg.as_ref() {
            Some(c) => ThresholdConfig {
                margin_ms: c.margin_ms,
                harq_offset_ms: c.harq_offset_ms,
                average_window: c.average_window,
                warmup_inliers: c.warmup_inliers,
            },
            None => ThresholdConfig::default(),
        };
        let records: Vec<DelayRecord> = slice(delays_ms, len, "delays_ms")?
            .iter()
            .enumerate()
            .map(|(i, &d)| DelayRecord {
                packet_index: i as u64,
                delay_ms: d,
            })
            .collect();
        let states = delay::pipeline(&records, &cfg)?;
        let dst = slice_mut(out_states, len, "out_states")?;
        for (o, s) in dst.iter_mut().zip(&states) {
            *o = s.id();
        }
        Ok(())
    })
}
