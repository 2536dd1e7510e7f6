//! Direct propagation of `iħ ∂ψ/∂t = H_M(t) ψ` over one rotation period.
//!
//! This path never touches the dressing transformation, so comparing its
//! one-period propagator with `−exp(−i H_d T/ħ)` checks the model, the
//! dressed matrix and the eigensolver together.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dressing::{antiperiodicity_factor, dress};
use crate::linalg::{self, c, eigh8, exp_minus_i, CMat8};
use crate::model::{build_hamiltonian, frequency_scale, FieldProtocol, MoleculeParams};
use crate::{Error, Result};

pub const MIN_STEPS: usize = 256;
pub const DEFAULT_STEPS: usize = 4096;
/// Largest phase `δ‖H‖/ħ` allowed per substep when choosing step counts.
pub const MAX_PHASE_PER_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// `exp(−i H(t_k + δ/2) δ/ħ)`, second order.
    Midpoint,
    /// Two-exponential commutator-free Magnus scheme with Gauss–Legendre
    /// nodes, fourth order.
    Magnus4,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorResult {
    pub u: CMat8,
    pub step_count: usize,
    pub integrator: Integrator,
    /// `‖U†U − I‖_max`.
    pub unitarity_defect: f64,
    pub period: f64,
}

fn unitarity_defect(u: &CMat8) -> f64 {
    linalg::max_abs(&(u.adjoint() * u - CMat8::identity()))
}

/// Step count from [`DEFAULT_STEPS`], raised until every substep turns the
/// phase by less than [`MAX_PHASE_PER_STEP`].
pub fn default_steps(params: &MoleculeParams, fields: &FieldProtocol) -> usize {
    if !(fields.omega_r > 0.0) {
        return DEFAULT_STEPS;
    }
    let period = 2.0 * PI / fields.omega_r;
    // ‖H‖ ≤ ħ(Δ/2 + 2ω_L + 2ω_e) bounds every entry-sum norm
    let norm = params.hbar * 3.0 * frequency_scale(params, fields);
    let needed = (period * norm / params.hbar / MAX_PHASE_PER_STEP).ceil() as usize;
    needed.max(DEFAULT_STEPS)
}

pub fn propagate_period(
    params: &MoleculeParams,
    fields: &FieldProtocol,
    steps: usize,
    integrator: Integrator,
) -> Result<PropagatorResult> {
    if steps < MIN_STEPS {
        return Err(Error::StepCountTooSmall { steps, min: MIN_STEPS });
    }
    params.validate()?;
    fields.validate()?;
    if !(fields.omega_r > 0.0) {
        return Err(Error::InvalidParameter("propagation needs omega_r > 0".into()));
    }
    let period = 2.0 * PI / fields.omega_r;
    let dt = period / steps as f64;
    let s = dt / params.hbar;
    let h = |t: f64| build_hamiltonian(params, fields, t).entries;
    let mut u = CMat8::identity();
    match integrator {
        Integrator::Midpoint => {
            for k in 0..steps {
                let t = (k as f64 + 0.5) * dt;
                u = exp_minus_i(&h(t), s)? * u;
            }
        }
        Integrator::Magnus4 => {
            let r3 = 3.0_f64.sqrt();
            let (c1, c2) = (0.5 - r3 / 6.0, 0.5 + r3 / 6.0);
            let (a1, a2) = (0.25 + r3 / 6.0, 0.25 - r3 / 6.0);
            for k in 0..steps {
                let t = k as f64 * dt;
                let h1 = h(t + c1 * dt);
                let h2 = h(t + c2 * dt);
                let first = h2 * c(a2, 0.0) + h1 * c(a1, 0.0);
                let second = h2 * c(a1, 0.0) + h1 * c(a2, 0.0);
                u = exp_minus_i(&second, s)? * exp_minus_i(&first, s)? * u;
            }
        }
    }
    Ok(PropagatorResult { unitarity_defect: unitarity_defect(&u), u, step_count: steps, integrator, period })
}

/// `W(T) · exp(−i H_d T/ħ)`, the one-period propagator implied by the dressed
/// matrix.
pub fn dressed_propagator(params: &MoleculeParams, fields: &FieldProtocol) -> Result<CMat8> {
    let hd = dress(params, fields)?;
    let period = 2.0 * PI / fields.omega_r;
    let w = antiperiodicity_factor(fields)?;
    Ok(exp_minus_i(&hd.entries, period / params.hbar)? * w)
}

/// `‖U(T) − W(T) exp(−i H_d T/ħ)‖_max`.
pub fn identity_defect(params: &MoleculeParams, fields: &FieldProtocol, result: &PropagatorResult) -> Result<f64> {
    let dressed = dressed_propagator(params, fields)?;
    Ok(linalg::max_abs(&(result.u - dressed)))
}

/// Quasi-energies from the propagator's eigenphases `φ_k`:
/// `ε_k = −ħ(φ_k − π)/T`, reduced to `[0, ħω_r)` and sorted.
pub fn quasi_energies(result: &PropagatorResult, omega_r: f64, hbar: f64) -> Result<[f64; 8]> {
    let phases = eigenphases(&result.u)?;
    let zone = hbar * omega_r;
    let mut out = phases.map(|phi| (-hbar * (phi - PI) / result.period).rem_euclid(zone));
    for e in out.iter_mut() {
        if *e >= zone {
            *e -= zone;
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Dressed eigenvalues reduced to the same zone as [`quasi_energies`].
pub fn zone_reduced(eigenvalues: &[f64; 8], omega_r: f64, hbar: f64) -> [f64; 8] {
    let zone = hbar * omega_r;
    let mut out = eigenvalues.map(|e| e.rem_euclid(zone));
    out.sort_by(f64::total_cmp);
    out
}

/// Largest distance on the unit circle between the eigenvalues of `U` and
/// the set `{−e^{−iẼ_jT/ħ}}`, matched optimally.
pub fn eigenphase_mismatch(result: &PropagatorResult, dressed_eigenvalues: &[f64; 8], hbar: f64) -> Result<f64> {
    let u_phases = eigenphases(&result.u)?;
    let predicted: [Complex64; 8] =
        dressed_eigenvalues.map(|e| -Complex64::from_polar(1.0, -e * result.period / hbar));
    let got: [Complex64; 8] = u_phases.map(|p| Complex64::from_polar(1.0, p));
    let mut weights = [[0.0; 8]; 8];
    for i in 0..8 {
        for j in 0..8 {
            weights[i][j] = -(got[i] - predicted[j]).norm();
        }
    }
    let assign = linalg::max_weight_assignment(&weights);
    Ok((0..8).map(|i| (got[i] - predicted[assign[i]]).norm()).fold(0.0, f64::max))
}

/// Eigenphases in `(−π, π]` of a unitary matrix.
///
/// `U` is normal, so it shares eigenvectors with the Hermitian matrix
/// `(e^{−iα}U + e^{iα}U†)/2`, whose eigenvalues are `cos(φ − α)`. The rotation
/// `α` is chosen among 16 candidates to keep those cosines as far apart as
/// possible; the phases are then read off as `arg⟨v|U|v⟩`.
pub fn eigenphases(u: &CMat8) -> Result<[f64; 8]> {
    let mut best: Option<(f64, linalg::Eigh)> = None;
    for k in 0..16 {
        let alpha = 2.0 * PI * (k as f64 + 0.5) / 16.0;
        let rot = Complex64::from_polar(1.0, -alpha);
        let k_mat = (u * rot + u.adjoint() * rot.conj()) * c(0.5, 0.0);
        let eig = eigh8(&k_mat)?;
        let gap = eig.values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|(g, _)| gap > *g) {
            best = Some((gap, eig));
        }
    }
    let (_, eig) = best.expect("16 candidates");
    let mut out = [0.0; 8];
    for (k, phi) in out.iter_mut().enumerate() {
        let v = eig.vectors.column(k);
        let z = v.dotc(&(u * v));
        *phi = z.arg();
    }
    Ok(out)
}
