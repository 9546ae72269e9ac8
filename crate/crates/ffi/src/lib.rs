//! C ABI for the dp-topk library.
//!
//! Histograms are opaque handles created from a dense count array and freed
//! by the caller. Selection results land in a caller-provided index buffer;
//! a refusal comes back as `DP_TOPK_STATUS_BOTTOM` with zero indices written.
//! All functions return a status code and never unwind across the boundary.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};

use dp_topk::accountant::{calibrate, DpBudget, MechanismSpec};
use dp_topk::error::Error;
use dp_topk::histogram::{Histogram, SelectionOutcome};

/// Opaque histogram handle owned by the caller.
pub struct DpTopkHistogram(Histogram);
use dp_topk::mechanisms::{
    em_top_k_peel, ptr_gaussian, ptr_laplace, stable_top_k_adaptive, stable_top_k_fixed,
    Regularizer,
};
use dp_topk::noise::RngStream;
use dp_topk::sensitivity;

/// Result codes for every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpTopkStatus {
    Ok = 0,
    /// The stability test refused; no indices were produced.
    Bottom = 1,
    NullPointer = 2,
    InvalidArgument = 3,
    BufferTooSmall = 4,
    BudgetExhausted = 5,
    CalibrationFailed = 6,
    Internal = 7,
}

fn status_of(err: &Error) -> DpTopkStatus {
    match err {
        Error::BudgetExhausted(_) => DpTopkStatus::BudgetExhausted,
        Error::Calibration(_) => DpTopkStatus::CalibrationFailed,
        Error::Io(_) | Error::Internal(_) => DpTopkStatus::Internal,
        _ => DpTopkStatus::InvalidArgument,
    }
}

/// Mechanism selector for `dp_topk_calibrate`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpTopkMechanism {
    AdaptiveStableTopK = 0,
    FixedStableTopK = 1,
    EmPeel = 2,
    PtrGaussian = 3,
    PtrLaplace = 4,
}

/// Calibrated noise parameters; unused fields are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DpTopkCalibration {
    pub rho: f64,
    pub sigma: f64,
    pub eps_em: f64,
    pub eps_pure: f64,
    pub achieved_eps: f64,
    pub achieved_delta: f64,
}

/// Creates a histogram from `m` dense counts. On success `*out` owns the
/// handle; release it with `dp_topk_histogram_free`.
///
/// # Safety
/// `counts` must point to `m` readable `uint64_t`s and `out` must be a valid
/// destination pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_histogram_new(
    counts: *const u64,
    m: usize,
    out: *mut *mut DpTopkHistogram,
) -> DpTopkStatus {
    if counts.is_null() || out.is_null() {
        return DpTopkStatus::NullPointer;
    }
    let slice = std::slice::from_raw_parts(counts, m);
    match Histogram::from_counts(slice.to_vec()) {
        Ok(h) => {
            *out = Box::into_raw(Box::new(DpTopkHistogram(h)));
            DpTopkStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Frees a histogram handle. A null handle is a no-op.
///
/// # Safety
/// `h` must be a pointer previously returned by `dp_topk_histogram_new`.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_histogram_free(h: *mut DpTopkHistogram) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn write_outcome(
    outcome: &SelectionOutcome,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    match outcome {
        SelectionOutcome::Bottom => {
            *out_len = 0;
            DpTopkStatus::Bottom
        }
        SelectionOutcome::Indices(set) => write_set(set, out_indices, capacity, out_len),
    }
}

unsafe fn write_set(
    set: &BTreeSet<usize>,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    if set.len() > capacity {
        *out_len = set.len();
        return DpTopkStatus::BufferTooSmall;
    }
    for (slot, &id) in (0..set.len()).zip(set.iter()) {
        *out_indices.add(slot) = id;
    }
    *out_len = set.len();
    DpTopkStatus::Ok
}

macro_rules! ffi_guard {
    ($body:expr) => {
        match catch_unwind(AssertUnwindSafe(|| $body)) {
            Ok(status) => status,
            Err(_) => DpTopkStatus::Internal,
        }
    };
}

/// Stable top-k with a data-chosen k (zero regularizer).
///
/// Writes the released indices (at most `capacity`) and the chosen rank.
/// Returns `Bottom` when the stability test refuses.
///
/// # Safety
/// `h`, `out_indices`, `out_len`, and `out_chosen_k` must be valid; the index
/// buffer must hold at least `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_stable_adaptive(
    h: *const DpTopkHistogram,
    rho: f64,
    delta_t: f64,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
    out_chosen_k: *mut usize,
) -> DpTopkStatus {
    if h.is_null() || out_indices.is_null() || out_len.is_null() || out_chosen_k.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let mut rng = RngStream::new(seed);
        match stable_top_k_adaptive(&(*h).0, &Regularizer::Zero, rho, delta_t, &mut rng) {
            Ok(receipt) => {
                *out_chosen_k = receipt.chosen_k.unwrap_or(0);
                write_outcome(&receipt.outcome, out_indices, capacity, out_len)
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Stable top-k returning exactly `k` indices.
///
/// # Safety
/// As for `dp_topk_stable_adaptive`; the buffer needs room for `k` entries.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_stable_fixed(
    h: *const DpTopkHistogram,
    k: usize,
    lambda: f64,
    rho: f64,
    delta_t: f64,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    if h.is_null() || out_indices.is_null() || out_len.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let mut rng = RngStream::new(seed);
        match stable_top_k_fixed(&(*h).0, k, lambda, rho, delta_t, &mut rng) {
            Ok(receipt) => write_outcome(&receipt.outcome, out_indices, capacity, out_len),
            Err(e) => status_of(&e),
        }
    })
}

/// One-shot Gumbel top-k with per-round parameter `eps_round`.
///
/// # Safety
/// As for `dp_topk_stable_adaptive`.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_em_top_k(
    h: *const DpTopkHistogram,
    k: usize,
    eps_round: f64,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    if h.is_null() || out_indices.is_null() || out_len.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let mut rng = RngStream::new(seed);
        match em_top_k_peel(&(*h).0, k, eps_round, &mut rng) {
            Ok((set, _)) => write_set(&set, out_indices, capacity, out_len),
            Err(e) => status_of(&e),
        }
    })
}

/// Gaussian stability test at rank `k`.
///
/// # Safety
/// As for `dp_topk_stable_adaptive`.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_ptr_gaussian(
    h: *const DpTopkHistogram,
    k: usize,
    sigma: f64,
    delta_t: f64,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    if h.is_null() || out_indices.is_null() || out_len.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let mut rng = RngStream::new(seed);
        match ptr_gaussian(&(*h).0.sorted(), k, sigma, delta_t, &mut rng) {
            Ok((outcome, _)) => write_outcome(&outcome, out_indices, capacity, out_len),
            Err(e) => status_of(&e),
        }
    })
}

/// Laplace stability test at rank `k`.
///
/// # Safety
/// As for `dp_topk_stable_adaptive`.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_ptr_laplace(
    h: *const DpTopkHistogram,
    k: usize,
    eps: f64,
    delta_t: f64,
    seed: u64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> DpTopkStatus {
    if h.is_null() || out_indices.is_null() || out_len.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let mut rng = RngStream::new(seed);
        match ptr_laplace(&(*h).0.sorted(), k, eps, delta_t, &mut rng) {
            Ok((outcome, _)) => write_outcome(&outcome, out_indices, capacity, out_len),
            Err(e) => status_of(&e),
        }
    })
}

/// Calibrates mechanism noise against a target budget over `queries`
/// composed invocations. `rounds` only matters for `EmPeel`.
///
/// # Safety
/// `out` must be a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_calibrate(
    mechanism: DpTopkMechanism,
    eps: f64,
    delta: f64,
    delta_t: f64,
    queries: u32,
    rounds: u32,
    out: *mut DpTopkCalibration,
) -> DpTopkStatus {
    if out.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        let spec = match mechanism {
            DpTopkMechanism::AdaptiveStableTopK => MechanismSpec::AdaptiveStableTopK,
            DpTopkMechanism::FixedStableTopK => MechanismSpec::FixedStableTopK,
            DpTopkMechanism::EmPeel => MechanismSpec::EmPeel { rounds },
            DpTopkMechanism::PtrGaussian => MechanismSpec::PtrGaussian,
            DpTopkMechanism::PtrLaplace => MechanismSpec::PtrLaplace,
        };
        let target = match DpBudget::new(eps, delta) {
            Ok(t) => t,
            Err(e) => return status_of(&e),
        };
        match calibrate(target, delta_t, queries, spec) {
            Ok(cal) => {
                *out = DpTopkCalibration {
                    rho: cal.params.rho,
                    sigma: cal.params.sigma.unwrap_or(f64::NAN),
                    eps_em: cal.params.eps_em.unwrap_or(f64::NAN),
                    eps_pure: cal.params.eps_pure.unwrap_or(f64::NAN),
                    achieved_eps: cal.achieved.eps,
                    achieved_delta: cal.achieved.delta,
                };
                DpTopkStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Local sensitivity of the top-k release.
///
/// # Safety
/// `h` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_local_sensitivity(
    h: *const DpTopkHistogram,
    k: usize,
    out: *mut u64,
) -> DpTopkStatus {
    if h.is_null() || out.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        match sensitivity::local_sensitivity(&(*h).0.sorted(), k) {
            Ok(v) => {
                *out = v;
                DpTopkStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Smooth-sensitivity upper envelope with shortcut horizon `d0`.
///
/// # Safety
/// `h` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn dp_topk_smooth_sensitivity(
    h: *const DpTopkHistogram,
    k: usize,
    beta: f64,
    d0: usize,
    out: *mut f64,
) -> DpTopkStatus {
    if h.is_null() || out.is_null() {
        return DpTopkStatus::NullPointer;
    }
    ffi_guard!({
        match sensitivity::smooth_sensitivity(&(*h).0.sorted(), k, beta, d0) {
            Ok(v) => {
                *out = v;
                DpTopkStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}
