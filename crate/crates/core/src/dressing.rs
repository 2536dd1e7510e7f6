//! Co-rotating transformation that turns the periodically driven Hamiltonian
//! into a time-independent dressed matrix.
//!
//! With `W(t) = diag(e^{-iω_k t})` and `D = ħ diag(ω_k)`, the transformed
//! generator is `W⁻¹ H_M(t) W - D`. For fields precessing at a common rate the
//! choice `ω_k = (k - 3/2) ω_r` in each parity block cancels every phase, and
//! the result equals `H_M(0) + ħ ω_r M̂` with `M̂ = diag(3/2 - k)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{self, c, CMat8};
use crate::model::{self, FieldProtocol, MoleculeParams};
use crate::{Error, Result};

/// Time-dependence left after dressing above this level is an error.
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Sample points used for the residual check.
pub const RESIDUAL_SAMPLES: usize = 16;

/// Multiples of `ω_r` making up the dressing frequencies, in basis order.
pub const DRESSING_MULTIPLES: [f64; 8] = [-1.5, -0.5, 0.5, 1.5, -1.5, -0.5, 0.5, 1.5];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DressingFrequencies {
    pub omega: [f64; 8],
}

impl DressingFrequencies {
    pub fn new(omega_r: f64) -> Self {
        Self { omega: DRESSING_MULTIPLES.map(|m| m * omega_r) }
    }

    /// `W(t)`.
    pub fn w(&self, t: f64) -> CMat8 {
        CMat8::from_diagonal(&self.omega.map(|w| Complex64::from_polar(1.0, -w * t)).into())
    }

    /// `D` in joules.
    pub fn d(&self, hbar: f64) -> CMat8 {
        CMat8::from_diagonal(&self.omega.map(|w| c(hbar * w, 0.0)).into())
    }

    /// `W⁻¹ A W - D` without forming the diagonal products.
    fn transform(&self, a: &CMat8, t: f64, hbar: f64) -> CMat8 {
        let mut out = *a;
        for i in 0..8 {
            for j in 0..8 {
                out[(i, j)] *= Complex64::from_polar(1.0, (self.omega[i] - self.omega[j]) * t);
            }
            out[(i, i)] -= c(hbar * self.omega[i], 0.0);
        }
        out
    }
}

/// The projection operator `M̂` whose dressed contribution is `ħ ω_r M̂`.
pub fn m_hat() -> CMat8 {
    CMat8::from_diagonal(&DRESSING_MULTIPLES.map(|m| c(-m, 0.0)).into())
}

/// Diagonal of [`m_hat`].
pub const M_HAT_DIAGONAL: [f64; 8] = [1.5, 0.5, -0.5, -1.5, 1.5, 0.5, -0.5, -1.5];

#[derive(Debug, Clone, PartialEq)]
pub struct DressedMatrix {
    /// `H_d` in joules.
    pub entries: CMat8,
    /// Largest surviving time dependence relative to `‖H_d‖_max`.
    pub residual: f64,
    pub omega_r: f64,
}

/// Build `H_d` and certify it is time-independent.
pub fn dress(params: &MoleculeParams, fields: &FieldProtocol) -> Result<DressedMatrix> {
    let omega_r = fields.omega_r;
    let freqs = DressingFrequencies::new(omega_r);
    let h0 = model::build_hamiltonian(params, fields, 0.0).entries;
    let entries = freqs.transform(&h0, 0.0, params.hbar);
    if omega_r == 0.0 {
        return Ok(DressedMatrix { entries, residual: 0.0, omega_r });
    }
    let scale = linalg::max_abs(&entries);
    let period = 2.0 * PI / omega_r;
    let mut worst = 0.0_f64;
    for k in 0..RESIDUAL_SAMPLES {
        let t = period * k as f64 / RESIDUAL_SAMPLES as f64;
        let h = model::build_hamiltonian(params, fields, t).entries;
        let diff = freqs.transform(&h, t, params.hbar) - entries;
        worst = worst.max(linalg::max_abs(&diff));
    }
    let residual = if scale > 0.0 { worst / scale } else { worst };
    if residual >= RESIDUAL_TOL || !residual.is_finite() {
        return Err(Error::NonCancellation { residual });
    }
    Ok(DressedMatrix { entries, residual, omega_r })
}

/// `H_d(ω_r) = H_static + ω_r ħ M̂` for one field configuration, with the
/// co-rotation check done once up front.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedFamily {
    pub params: MoleculeParams,
    pub fields: FieldProtocol,
    /// `H_M(0)`.
    pub h_static: CMat8,
}

impl DressedFamily {
    pub fn new(params: &MoleculeParams, fields: &FieldProtocol) -> Result<Self> {
        params.validate()?;
        fields.validate()?;
        let probe = if fields.omega_r > 0.0 {
            fields.omega_r
        } else {
            model::frequency_scale(params, fields)
        };
        dress(params, &fields.with_omega_r(probe))?;
        Ok(Self {
            params: *params,
            fields: *fields,
            h_static: model::build_hamiltonian(params, fields, 0.0).entries,
        })
    }

    pub fn at(&self, omega_r: f64) -> CMat8 {
        let mut h = self.h_static;
        let hw = self.params.hbar * omega_r;
        for (k, m) in M_HAT_DIAGONAL.iter().enumerate() {
            h[(k, k)] += c(hw * m, 0.0);
        }
        h
    }

    /// `max(ω_L, ω_e, Δ)`.
    pub fn frequency_scale(&self) -> f64 {
        model::frequency_scale(&self.params, &self.fields)
    }
}

/// `W(T)` collapsed to a scalar. Every `ω_k T` is an odd multiple of π, so the
/// value is exactly `-1`.
pub fn antiperiodicity_factor(fields: &FieldProtocol) -> Result<Complex64> {
    if !(fields.omega_r > 0.0) {
        return Err(Error::InvalidParameter("antiperiodicity needs omega_r > 0".into()));
    }
    // ω_k T / π = 2 × multiple, an odd integer
    let odd = (2.0 * DRESSING_MULTIPLES[0]).round() as i64;
    Ok(if odd.rem_euclid(2) == 1 { c(-1.0, 0.0) } else { c(1.0, 0.0) })
}
