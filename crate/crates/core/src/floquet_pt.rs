//! Small-angle Floquet perturbation theory for the most energetic state.
//!
//! The unperturbed problem is the diagonal `H_u` (Λ-doubling plus the axial
//! Zeeman shift); `V_s` and `V_±` are treated as perturbations. In the dressed
//! frame `V_±` become static couplings between states whose `M̂` differ by one,
//! so the second-order shift of a bare level `n` is
//!
//! `Σ_m |V₊_mn|²/(E_nm − ħω_r) + |V₋_mn|²/(E_nm + ħω_r) + |V_s,mn|²/E_nm`
//!
//! and the geometric phase correction is `2π/(ħω_r)` times its change from
//! `ω_r = 0`. In the adiabatic limit this becomes
//! `2π Σ_m (|V₊_mn|² − |V₋_mn|²)/E_nm²`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dressing::M_HAT_DIAGONAL;
use crate::linalg::eigh8;
use crate::model::{build_hamiltonian, decompose_monochromatic, derived_frequencies, FieldProtocol, MoleculeParams};
use crate::phase::adiabatic_limit;
use crate::spectrum::{labelled_static, Parity, StateLabel};
use crate::{Error, Result};

/// Angles above this are flagged as outside the small-angle regime.
pub const SMALL_ANGLE_LIMIT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PtOptions {
    /// Use `(5Δ + 5ω_L cosθ_m)²` in the electric second-order term, the value
    /// of the explicit second-order sum, instead of the printed
    /// `(5Δ + ω_L cosθ_m)²`.
    pub corrected_electric_denominator: bool,
    /// Replace the `(3/2)ω_L cos²θ_m` numerator term of the third-order
    /// formula by `(3/2)ω_L² cos²θ_m`.
    pub pt3_omega_l_squared: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFlags {
    pub theta_m_small: bool,
    pub theta_e_small: bool,
    pub nondegenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResult {
    pub order2_phase: f64,
    pub order3_phase: f64,
    pub validity_flags: ValidityFlags,
}

fn frequencies(params: &MoleculeParams, fields: &FieldProtocol) -> Result<(f64, f64)> {
    let f = derived_frequencies(params, fields);
    if f.omega_l == 0.0 {
        return Err(Error::DegenerateBareSpectrum);
    }
    Ok((f.omega_l, f.omega_e))
}

/// Second-order phase from explicit frequencies; any real angles allowed.
pub fn pt2_formula(delta: f64, omega_l: f64, omega_e: f64, theta_m: f64, theta_e: f64, opts: PtOptions) -> f64 {
    let k = if opts.corrected_electric_denominator { 5.0 } else { 1.0 };
    let den = 5.0 * delta + k * omega_l * theta_m.cos();
    let electric = 3.0 * (omega_e * theta_e.sin()).powi(2) / (den * den);
    2.0 * PI * (0.75 * theta_m.tan().powi(2) + electric)
}

/// Third-order phase from explicit frequencies; any real angles allowed.
pub fn pt3_formula(delta: f64, omega_l: f64, omega_e: f64, theta_m: f64, theta_e: f64, opts: PtOptions) -> f64 {
    if omega_e == 0.0 {
        return 0.0;
    }
    let cm = theta_m.cos();
    let d5 = 5.0 * delta;
    let last = if opts.pt3_omega_l_squared { 1.5 * omega_l * omega_l * cm * cm } else { 1.5 * omega_l * cm * cm };
    let num = d5 * d5 + 2.0 * d5 * omega_l * cm + last;
    let den = (d5 + omega_l * cm).powi(3);
    2.0 * PI * theta_m.sin() * (2.0 * theta_e).sin() * (2.0 * omega_e * omega_e / (d5 * omega_l)) * num / den
}

pub fn pt2_phase(params: &MoleculeParams, fields: &FieldProtocol, opts: PtOptions) -> Result<f64> {
    let (wl, we) = frequencies(params, fields)?;
    Ok(pt2_formula(params.delta, wl, we, fields.theta_m, fields.theta_e, opts))
}

pub fn pt3_phase(params: &MoleculeParams, fields: &FieldProtocol, opts: PtOptions) -> Result<f64> {
    let (wl, we) = frequencies(params, fields)?;
    Ok(pt3_formula(params.delta, wl, we, fields.theta_m, fields.theta_e, opts))
}

pub fn perturbation(params: &MoleculeParams, fields: &FieldProtocol, opts: PtOptions) -> Result<PerturbationResult> {
    Ok(PerturbationResult {
        order2_phase: pt2_phase(params, fields, opts)?,
        order3_phase: pt3_phase(params, fields, opts)?,
        validity_flags: ValidityFlags {
            theta_m_small: fields.theta_m.abs() <= SMALL_ANGLE_LIMIT,
            theta_e_small: fields.theta_e.abs() <= SMALL_ANGLE_LIMIT,
            nondegenerate: true,
        },
    })
}

/// Bare level of highest energy (the diagonal of `H_u`).
pub fn most_energetic_bare_state(params: &MoleculeParams, fields: &FieldProtocol) -> Result<usize> {
    let parts = decompose_monochromatic(params, fields)?;
    Ok((0..8).max_by(|&a, &b| parts.h_u[(a, a)].re.total_cmp(&parts.h_u[(b, b)].re)).expect("8 states"))
}

/// `⟨n|V_s + V₋ + V₊|n⟩` for a bare level.
pub fn first_order_shift(params: &MoleculeParams, fields: &FieldProtocol, bare_state: usize) -> Result<f64> {
    let parts = decompose_monochromatic(params, fields)?;
    let n = bare_state;
    Ok((parts.v_s[(n, n)] + parts.v_minus[(n, n)] + parts.v_plus[(n, n)]).norm())
}

/// Second-order correction to the geometric phase of a bare level at
/// `omega_r`; `omega_r = 0` gives the adiabatic limit.
pub fn second_order_sum(params: &MoleculeParams, fields: &FieldProtocol, bare_state: usize, omega_r: f64) -> Result<f64> {
    if fields.b_mag == 0.0 {
        return Err(Error::DegenerateBareSpectrum);
    }
    let parts = decompose_monochromatic(params, fields)?;
    let n = bare_state;
    let e = |k: usize| parts.h_u[(k, k)].re;
    let hw = params.hbar * omega_r;
    let mut total = 0.0;
    for m in 0..8 {
        if m == n {
            continue;
        }
        let vp = parts.v_plus[(m, n)].norm_sqr();
        let vm = parts.v_minus[(m, n)].norm_sqr();
        let vs = parts.v_s[(m, n)].norm_sqr();
        if vp == 0.0 && vm == 0.0 && vs == 0.0 {
            continue;
        }
        let d = e(n) - e(m);
        if d == 0.0 || (vp > 0.0 && d == hw) || (vm > 0.0 && d == -hw) {
            return Err(Error::DegenerateBareSpectrum);
        }
        total += if omega_r == 0.0 {
            2.0 * PI * (vp - vm) / (d * d)
        } else {
            let shift = vp / (d - hw) + vm / (d + hw) - (vp + vm) / d;
            2.0 * PI * shift / hw
        };
    }
    Ok(total)
}

/// The state the printed formulas describe.
pub fn most_energetic_label() -> StateLabel {
    StateLabel::new(3, Parity::F)
}

/// Exact adiabatic phase of `(3/2, f)` measured from its value with both
/// cone angles set to zero.
///
/// The axial reference is the static eigenstate with the largest overlap
/// with the tilted one, so no labelling is needed at exactly zero angle.
pub fn exact_adiabatic_offset_phase(params: &MoleculeParams, fields: &FieldProtocol) -> Result<f64> {
    let label = most_energetic_label();
    let tilted = labelled_static(params, fields)?;
    let at = adiabatic_limit(&tilted)[label.index()];
    let v = tilted.vector(tilted.column_of(label));
    let mut axial = *fields;
    axial.theta_m = 0.0;
    axial.theta_e = 0.0;
    let eig = eigh8(&build_hamiltonian(params, &axial.with_omega_r(0.0), 0.0).entries)?;
    let k = (0..8)
        .max_by(|&a, &b| v.dotc(&eig.vector(a)).norm_sqr().total_cmp(&v.dotc(&eig.vector(b)).norm_sqr()))
        .expect("eight states");
    let u = eig.vector(k);
    let base: f64 = 2.0 * PI * (0..8).map(|i| u[i].norm_sqr() * M_HAT_DIAGONAL[i]).sum::<f64>();
    Ok(at - base)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleScan {
    /// Vary `θ_m`, keep `θ_e` from the protocol.
    Magnetic,
    /// Vary `θ_e`, keep `θ_m` from the protocol.
    Electric,
    /// Set both angles to the scanned value.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtRow {
    pub theta: f64,
    pub perturbative: f64,
    pub exact: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtReport {
    pub rows: Vec<PtRow>,
    /// Least-squares slope of `ln|residual|` against `ln θ` over rows with
    /// nonzero values; `None` with fewer than two such rows.
    pub log_log_slope: Option<f64>,
}

/// Tabulate `|pt2 + pt3 − exact|` along a scan of cone angles.
pub fn pt_vs_exact_report(
    params: &MoleculeParams,
    fields: &FieldProtocol,
    angle_grid: &[f64],
    scan: AngleScan,
    opts: PtOptions,
) -> Result<PtReport> {
    let mut rows = Vec::with_capacity(angle_grid.len());
    for &theta in angle_grid {
        let mut f = *fields;
        match scan {
            AngleScan::Magnetic => f.theta_m = theta,
            AngleScan::Electric => f.theta_e = theta,
            AngleScan::Both => {
                f.theta_m = theta;
                f.theta_e = theta;
            }
        }
        let perturbative = pt2_phase(params, &f, opts)? + pt3_phase(params, &f, opts)?;
        let exact = exact_adiabatic_offset_phase(params, &f)?;
        rows.push(PtRow { theta, perturbative, exact, residual: (perturbative - exact).abs() });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.theta > 0.0 && r.residual > 0.0)
        .map(|r| (r.theta.ln(), r.residual.ln()))
        .collect();
    Ok(PtReport { log_log_slope: fit_slope(&pts), rows })
}

/// Ordinary least-squares slope.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}
