//! C ABI over `ohphase`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns an [`OhpStatus`]
//! and leaves a message for [`ohp_last_error_message`] on failure.
//!
//! State slots in the `[8]` output arrays follow the state index: the four
//! `e` states by ascending `M`, then the four `f` states.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ohphase::model::KV_PER_CM;
use ohphase::phase::{critical_rotation_magnetic, phases_at, sweep_phases, PhaseRecord};
use ohphase::spectrum::{labelled_spectrum, track_sweep};
use ohphase::{Error, FieldProtocol, MoleculeParams, Parity, StateLabel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OhpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    NonCancellation = 3,
    NotHermitian = 4,
    ConvergenceFailure = 5,
    AmbiguousLabel = 6,
    TrackingBreakdown = 7,
    LabelMismatch = 8,
    NotPureMagnetic = 9,
    NotPureElectric = 10,
    NoCriticalRate = 11,
    RegimeUndefined = 12,
    DegenerateBareSpectrum = 13,
    StepCountTooSmall = 14,
    IndexOutOfRange = 15,
    Panic = 16,
}

impl From<&Error> for OhpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidParameter(_) => OhpStatus::InvalidParameter,
            Error::NonCancellation { .. } => OhpStatus::NonCancellation,
            Error::NotHermitian { .. } => OhpStatus::NotHermitian,
            Error::ConvergenceFailure { .. } => OhpStatus::ConvergenceFailure,
            Error::AmbiguousLabel(_) => OhpStatus::AmbiguousLabel,
            Error::TrackingBreakdown { .. } => OhpStatus::TrackingBreakdown,
            Error::LabelMismatch => OhpStatus::LabelMismatch,
            Error::NotPureMagnetic => OhpStatus::NotPureMagnetic,
            Error::NotPureElectric => OhpStatus::NotPureElectric,
            Error::NoCriticalRate { .. } => OhpStatus::NoCriticalRate,
            Error::RegimeUndefined(_) => OhpStatus::RegimeUndefined,
            Error::DegenerateBareSpectrum => OhpStatus::DegenerateBareSpectrum,
            Error::StepCountTooSmall { .. } => OhpStatus::StepCountTooSmall,
        }
    }
}

/// Molecule constants plus a field protocol.
pub struct OhpModel {
    params: MoleculeParams,
    fields: FieldProtocol,
}

/// Phases along a tracked rotation-rate sweep.
pub struct OhpSweep {
    records: Vec<PhaseRecord>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: OhpStatus, msg: impl Into<String>) -> OhpStatus {
    set_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), OhpStatus>) -> OhpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OhpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(OhpStatus::Panic, "internal panic"),
    }
}

fn lib(e: Error) -> OhpStatus {
    let status = OhpStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn model_ref<'a>(m: *const OhpModel) -> Result<&'a OhpModel, OhpStatus> {
    m.as_ref().ok_or_else(|| fail(OhpStatus::NullPointer, "model handle is null"))
}

unsafe fn out_array<'a>(out: *mut f64) -> Result<&'a mut [f64; 8], OhpStatus> {
    out.cast::<[f64; 8]>().as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "output array is null"))
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length without the NUL, or
/// 0 when there is no message.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ohp_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// New model with the built-in OH constants and no fields.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ohp_model_new_oh(out: *mut *mut OhpModel) -> OhpStatus {
    guard(|| {
        let slot = out.as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "output handle is null"))?;
        let model = OhpModel { params: MoleculeParams::oh(), fields: FieldProtocol::new(0.0, 0.0, 0.0, 0.0, 0.0) };
        *slot = Box::into_raw(Box::new(model));
        Ok(())
    })
}

/// New model with explicit constants: `delta` in rad/s, `mu_e` in C·m,
/// `mu_b` in J/T, `hbar` in J·s.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ohp_model_new(delta: f64, mu_e: f64, mu_b: f64, hbar: f64, out: *mut *mut OhpModel) -> OhpStatus {
    guard(|| {
        let slot = out.as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "output handle is null"))?;
        let params = MoleculeParams { delta, mu_e, mu_b, hbar };
        params.validate().map_err(lib)?;
        *slot = Box::into_raw(Box::new(OhpModel { params, fields: FieldProtocol::new(0.0, 0.0, 0.0, 0.0, 0.0) }));
        Ok(())
    })
}

/// Sets the co-rotating fields: `b_tesla`, `e_kv_per_cm`, cone angles in
/// radians.
///
/// # Safety
/// `model` must be a live handle from `ohp_model_new*`.
#[no_mangle]
pub unsafe extern "C" fn ohp_model_set_fields(
    model: *mut OhpModel,
    b_tesla: f64,
    theta_m: f64,
    e_kv_per_cm: f64,
    theta_e: f64,
) -> OhpStatus {
    guard(|| {
        let m = model.as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "model handle is null"))?;
        let fields = FieldProtocol::new(b_tesla, theta_m, e_kv_per_cm * KV_PER_CM, theta_e, 0.0);
        fields.validate().map_err(lib)?;
        m.fields = fields;
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ohp_model_free(model: *mut OhpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Dressed energies (J) at `omega_r`, by state index.
///
/// # Safety
/// `model` must be a live handle and `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn ohp_dressed_energies(model: *const OhpModel, omega_r: f64, out: *mut f64) -> OhpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_array(out)?;
        let s = labelled_spectrum(&m.params, &m.fields.with_omega_r(omega_r)).map_err(lib)?;
        *out = s.energies_by_label();
        Ok(())
    })
}

/// Geometric phases (rad) at `omega_r`, by state index.
///
/// # Safety
/// `model` must be a live handle and `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn ohp_geometric_phases(model: *const OhpModel, omega_r: f64, out: *mut f64) -> OhpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out_array(out)?;
        *out = phases_at(&m.params, &m.fields.with_omega_r(omega_r)).map_err(lib)?.geometric();
        Ok(())
    })
}

/// `2ω_L cosθ_m` for a pure magnetic model.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ohp_critical_rate(model: *const OhpModel, out: *mut f64) -> OhpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let out = out.as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "output is null"))?;
        *out = critical_rotation_magnetic(&m.params, &m.fields).map_err(lib)?;
        Ok(())
    })
}

/// `M` times two and parity (0 for e, 1 for f) of a state index.
///
/// # Safety
/// Both output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn ohp_state_label(index: usize, m_times_2: *mut i8, parity: *mut u8) -> OhpStatus {
    guard(|| {
        if index >= 8 {
            return Err(fail(OhpStatus::IndexOutOfRange, format!("state index {index} is not below 8")));
        }
        let (m, p) = match (m_times_2.as_mut(), parity.as_mut()) {
            (Some(m), Some(p)) => (m, p),
            _ => return Err(fail(OhpStatus::NullPointer, "output is null")),
        };
        let label = StateLabel::from_index(index);
        *m = label.m_times_2;
        *p = match label.parity {
            Parity::E => 0,
            Parity::F => 1,
        };
        Ok(())
    })
}

/// Tracks a sweep over `len` ascending rotation rates.
///
/// # Safety
/// `model` must be a live handle, `grid` must point to `len` doubles and
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn ohp_sweep_new(
    model: *const OhpModel,
    grid: *const f64,
    len: usize,
    out: *mut *mut OhpSweep,
) -> OhpStatus {
    guard(|| {
        let m = model_ref(model)?;
        let slot = out.as_mut().ok_or_else(|| fail(OhpStatus::NullPointer, "output handle is null"))?;
        if grid.is_null() || len == 0 {
            return Err(fail(OhpStatus::NullPointer, "grid is null or empty"));
        }
        let grid = std::slice::from_raw_parts(grid, len);
        let sweep = track_sweep(&m.params, &m.fields, grid).map_err(lib)?;
        let records = sweep_phases(&sweep).map_err(lib)?;
        *slot = Box::into_raw(Box::new(OhpSweep { records }));
        Ok(())
    })
}

/// Number of grid points in the sweep, 0 for a null handle.
///
/// # Safety
/// `sweep` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ohp_sweep_len(sweep: *const OhpSweep) -> usize {
    sweep.as_ref().map_or(0, |s| s.records.len())
}

/// Geometric phases at grid point `k`, by state index.
///
/// # Safety
/// `sweep` must be a live handle and `out` must hold 8 doubles.
#[no_mangle]
pub unsafe extern "C" fn ohp_sweep_phases(sweep: *const OhpSweep, k: usize, out: *mut f64) -> OhpStatus {
    guard(|| {
        let s = sweep.as_ref().ok_or_else(|| fail(OhpStatus::NullPointer, "sweep handle is null"))?;
        let out = out_array(out)?;
        let r = s
            .records
            .get(k)
            .ok_or_else(|| fail(OhpStatus::IndexOutOfRange, format!("grid index {k} out of {}", s.records.len())))?;
        *out = r.geometric();
        Ok(())
    })
}

/// # Safety
/// `sweep` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ohp_sweep_free(sweep: *mut OhpSweep) {
    if !sweep.is_null() {
        drop(Box::from_raw(sweep));
    }
}
