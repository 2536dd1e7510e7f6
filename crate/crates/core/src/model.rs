//! Physical constants, field protocols and the 8×8 Stark–Zeeman Hamiltonian.
//!
//! Basis ordering: indices 0–3 are the `e` parity states and 4–7 the `f`
//! parity states. Within a block, row `k` couples to row `k + 1` through
//! `F_x + i F_y` above the diagonal, so the rotating frame assigns row `k` the
//! projection `M = k - 3/2`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::linalg::{self, c, CMat8};
use crate::{Error, Result};

/// Reduced Planck constant, CODATA 2018 (J·s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Bohr magneton, CODATA 2018 (J/T).
pub const BOHR_MAGNETON: f64 = 9.274_010_078_3e-24;
/// One debye in C·m.
pub const DEBYE: f64 = 3.335_64e-30;
/// One kV/cm in V/m.
pub const KV_PER_CM: f64 = 1.0e5;
/// Λ-doubling splitting of OH X²Π₃/₂ J = 3/2, quoted as an ordinary
/// frequency (Hz).
pub const OH_LAMBDA_DOUBLING_HZ: f64 = 1.66e9;
/// Electric dipole moment of OH in debye.
pub const OH_DIPOLE_DEBYE: f64 = 1.667;

/// Fields below these magnitudes fall outside the accuracy range of the
/// model (hyperfine structure starts to matter).
pub const MIN_ACCURATE_E_V_PER_M: f64 = 1.0 * KV_PER_CM;
pub const MIN_ACCURATE_B_TESLA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoleculeParams {
    /// Λ-doubling splitting Δ as an angular frequency (rad/s).
    pub delta: f64,
    /// Electric dipole moment (C·m).
    pub mu_e: f64,
    /// Bohr magneton (J/T).
    pub mu_b: f64,
    /// Reduced Planck constant (J·s).
    pub hbar: f64,
}

impl MoleculeParams {
    /// OH ground manifold with the 1.66 GHz Λ-doubling read as Δ/2π.
    pub fn oh() -> Self {
        Self::oh_with_convention(false)
    }

    /// OH ground manifold; with `delta_is_angular` the 1.66e9 figure is taken
    /// as Δ in rad/s instead of Δ/2π in Hz.
    pub fn oh_with_convention(delta_is_angular: bool) -> Self {
        let delta = if delta_is_angular {
            OH_LAMBDA_DOUBLING_HZ
        } else {
            2.0 * PI * OH_LAMBDA_DOUBLING_HZ
        };
        Self { delta, mu_e: OH_DIPOLE_DEBYE * DEBYE, mu_b: BOHR_MAGNETON, hbar: HBAR }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {x}")))
            }
        };
        positive("delta", self.delta)?;
        positive("mu_e", self.mu_e)?;
        positive("mu_b", self.mu_b)?;
        positive("hbar", self.hbar)
    }
}

impl Default for MoleculeParams {
    fn default() -> Self {
        Self::oh()
    }
}

/// Magnetic and electric fields precessing about `z` at a common rate.
///
/// `B = B (sinθ_m cos ω_r t, sinθ_m sin ω_r t, cosθ_m)` and likewise for `E`.
/// `e_rotation_ratio` scales the electric rotation rate relative to `ω_r`; it
/// exists only to exercise the non-co-rotating failure path and is 1 for every
/// physical protocol in this crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldProtocol {
    /// Magnetic field magnitude (T).
    pub b_mag: f64,
    /// Cone half-angle of the magnetic field (rad).
    pub theta_m: f64,
    /// Electric field magnitude (V/m).
    pub e_mag: f64,
    /// Cone half-angle of the electric field (rad).
    pub theta_e: f64,
    /// Rotation rate (rad/s).
    pub omega_r: f64,
    pub e_rotation_ratio: f64,
}

impl FieldProtocol {
    pub fn new(b_mag: f64, theta_m: f64, e_mag: f64, theta_e: f64, omega_r: f64) -> Self {
        Self { b_mag, theta_m, e_mag, theta_e, omega_r, e_rotation_ratio: 1.0 }
    }

    pub fn magnetic(b_mag: f64, theta_m: f64) -> Self {
        Self::new(b_mag, theta_m, 0.0, 0.0, 0.0)
    }

    pub fn electric(e_mag: f64, theta_e: f64) -> Self {
        Self::new(0.0, 0.0, e_mag, theta_e, 0.0)
    }

    pub fn with_omega_r(mut self, omega_r: f64) -> Self {
        self.omega_r = omega_r;
        self
    }

    pub fn is_pure_magnetic(&self) -> bool {
        self.e_mag == 0.0
    }

    pub fn is_pure_electric(&self) -> bool {
        self.b_mag == 0.0
    }

    pub fn is_co_rotating(&self) -> bool {
        self.e_rotation_ratio == 1.0 || self.e_mag == 0.0 || self.theta_e.sin() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(Error::InvalidParameter(msg)) };
        check(self.b_mag >= 0.0 && self.b_mag.is_finite(), format!("b_mag must be >= 0, got {}", self.b_mag))?;
        check(self.e_mag >= 0.0 && self.e_mag.is_finite(), format!("e_mag must be >= 0, got {}", self.e_mag))?;
        check(
            (0.0..=PI).contains(&self.theta_m),
            format!("theta_m must lie in [0, pi], got {}", self.theta_m),
        )?;
        check(
            (0.0..=PI).contains(&self.theta_e),
            format!("theta_e must lie in [0, pi], got {}", self.theta_e),
        )?;
        check(
            self.omega_r >= 0.0 && self.omega_r.is_finite(),
            format!("omega_r must be >= 0, got {}", self.omega_r),
        )?;
        check(
            self.e_rotation_ratio.is_finite(),
            format!("e_rotation_ratio must be finite, got {}", self.e_rotation_ratio),
        )
    }

    /// Fields that are nonzero but weaker than the model's accuracy range.
    pub fn validity_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.e_mag > 0.0 && self.e_mag < MIN_ACCURATE_E_V_PER_M {
            out.push(format!(
                "electric field {:.4} kV/cm is below 1 kV/cm; hyperfine structure is not negligible",
                self.e_mag / KV_PER_CM
            ));
        }
        if self.b_mag > 0.0 && self.b_mag < MIN_ACCURATE_B_TESLA {
            out.push(format!(
                "magnetic field {:.4} G is below 100 G; hyperfine structure is not negligible",
                self.b_mag * 1e4
            ));
        }
        out
    }

    /// Cartesian magnetic field at time `t`.
    pub fn b_at(&self, t: f64) -> [f64; 3] {
        cone(self.b_mag, self.theta_m, self.omega_r * t)
    }

    /// Cartesian electric field at time `t`.
    pub fn e_at(&self, t: f64) -> [f64; 3] {
        cone(self.e_mag, self.theta_e, self.e_rotation_ratio * self.omega_r * t)
    }
}

fn cone(mag: f64, theta: f64, phase: f64) -> [f64; 3] {
    if mag == 0.0 {
        return [0.0; 3];
    }
    let (s, co) = theta.sin_cos();
    [mag * s * phase.cos(), mag * s * phase.sin(), mag * co]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisOrder {
    /// `e` block (P rows) then `f` block (R rows).
    ParityMajor,
}

/// 8×8 Hermitian matrix in joules.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    pub entries: CMat8,
    pub basis: BasisOrder,
}

impl HamiltonianMatrix {
    pub fn new(entries: CMat8) -> Self {
        Self { entries, basis: BasisOrder::ParityMajor }
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.entries)
    }
}

/// Δ-free coupling coefficients of one 4×4 block, in printed row order.
const ZEEMAN_DIAG: [f64; 4] = [-6.0 / 5.0, -2.0 / 5.0, 2.0 / 5.0, 6.0 / 5.0];
const STARK_DIAG: [f64; 4] = [3.0 / 5.0, 1.0 / 5.0, -1.0 / 5.0, -3.0 / 5.0];

fn zeeman_off(k: usize) -> f64 {
    // couples rows k and k+1
    match k {
        0 | 2 => 2.0 * 3.0_f64.sqrt() / 5.0,
        _ => 4.0 / 5.0,
    }
}

fn stark_off(k: usize) -> f64 {
    match k {
        0 | 2 => -(3.0_f64.sqrt()) / 5.0,
        _ => -2.0 / 5.0,
    }
}

/// Circular field components entering the matrix, with `plus = F_x + i F_y`
/// and `minus = F_x - i F_y` kept independent so the same routine also builds
/// the Fourier coefficient matrices.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Components {
    pub lambda_doubling: bool,
    pub bz: f64,
    pub b_plus: Complex64,
    pub b_minus: Complex64,
    pub ez: f64,
    pub e_plus: Complex64,
    pub e_minus: Complex64,
}

impl Components {
    fn from_fields(b: [f64; 3], e: [f64; 3]) -> Self {
        Self {
            lambda_doubling: true,
            bz: b[2],
            b_plus: c(b[0], b[1]),
            b_minus: c(b[0], -b[1]),
            ez: e[2],
            e_plus: c(e[0], e[1]),
            e_minus: c(e[0], -e[1]),
        }
    }
}

/// `[[P, Q], [Q†, R]]` with `R = P + ħΔ I₄`.
pub(crate) fn assemble(params: &MoleculeParams, f: &Components) -> CMat8 {
    let mut h = CMat8::zeros();
    let half_split = if f.lambda_doubling { 0.5 * params.hbar * params.delta } else { 0.0 };
    let mb = params.mu_b;
    let me = params.mu_e;
    for (block, sign) in [(0usize, -1.0), (4usize, 1.0)] {
        for k in 0..4 {
            h[(block + k, block + k)] = c(sign * half_split + ZEEMAN_DIAG[k] * mb * f.bz, 0.0);
        }
        for k in 0..3 {
            h[(block + k, block + k + 1)] = f.b_plus * (zeeman_off(k) * mb);
            h[(block + k + 1, block + k)] = f.b_minus * (zeeman_off(k) * mb);
        }
    }
    // Q is Hermitian in structure, so the lower-left block Q† has the same
    // layout as Q.
    for (row0, col0) in [(0usize, 4usize), (4, 0)] {
        for k in 0..4 {
            h[(row0 + k, col0 + k)] = c(STARK_DIAG[k] * me * f.ez, 0.0);
        }
        for k in 0..3 {
            h[(row0 + k, col0 + k + 1)] = f.e_plus * (stark_off(k) * me);
            h[(row0 + k + 1, col0 + k)] = f.e_minus * (stark_off(k) * me);
        }
    }
    h
}

/// `H_M(t)` for the given field protocol.
pub fn build_hamiltonian(params: &MoleculeParams, fields: &FieldProtocol, t: f64) -> HamiltonianMatrix {
    let comps = Components::from_fields(fields.b_at(t), fields.e_at(t));
    HamiltonianMatrix::new(assemble(params, &comps))
}

/// Static part plus the Fourier coefficients of `e^{∓iω_r t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonochromaticParts {
    /// Diagonal: Λ-doubling and the Zeeman shift of `B_z`.
    pub h_u: CMat8,
    /// Static `e`–`f` coupling from `E_z`.
    pub v_s: CMat8,
    /// Coefficient of `e^{-iω_r t}`.
    pub v_minus: CMat8,
    /// Coefficient of `e^{+iω_r t}`.
    pub v_plus: CMat8,
}

impl MonochromaticParts {
    pub fn reconstruct(&self, omega_r: f64, t: f64) -> CMat8 {
        let ph = Complex64::from_polar(1.0, omega_r * t);
        self.h_u + self.v_s + self.v_minus * ph.conj() + self.v_plus * ph
    }
}

/// Split `H_M(t) = H_u + V_s + V_- e^{-iω_r t} + V_+ e^{+iω_r t}`.
pub fn decompose_monochromatic(params: &MoleculeParams, fields: &FieldProtocol) -> Result<MonochromaticParts> {
    if !fields.is_co_rotating() {
        return Err(Error::InvalidParameter(
            "monochromatic decomposition needs co-rotating magnetic and electric fields".into(),
        ));
    }
    let b_l = fields.b_mag * fields.theta_m.sin();
    let e_l = fields.e_mag * fields.theta_e.sin();
    let b_z = fields.b_mag * fields.theta_m.cos();
    let e_z = fields.e_mag * fields.theta_e.cos();
    let h_u = assemble(params, &Components { lambda_doubling: true, bz: b_z, ..Default::default() });
    let v_s = assemble(params, &Components { ez: e_z, ..Default::default() });
    let v_plus = assemble(
        params,
        &Components { b_plus: c(b_l, 0.0), e_plus: c(e_l, 0.0), ..Default::default() },
    );
    let v_minus = assemble(
        params,
        &Components { b_minus: c(b_l, 0.0), e_minus: c(e_l, 0.0), ..Default::default() },
    );
    Ok(MonochromaticParts { h_u, v_s, v_minus, v_plus })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedFrequencies {
    /// Larmor frequency `(4/5) μ_B B / ħ` (rad/s).
    pub omega_l: f64,
    /// Electric analogue `μ_e E / ħ` (rad/s).
    pub omega_e: f64,
}

pub fn derived_frequencies(params: &MoleculeParams, fields: &FieldProtocol) -> DerivedFrequencies {
    DerivedFrequencies {
        omega_l: 0.8 * params.mu_b * fields.b_mag / params.hbar,
        omega_e: params.mu_e * fields.e_mag / params.hbar,
    }
}

/// Largest of `ω_L`, `ω_e` and `Δ`; the natural frequency scale of a protocol.
pub fn frequency_scale(params: &MoleculeParams, fields: &FieldProtocol) -> f64 {
    let f = derived_frequencies(params, fields);
    f.omega_l.max(f.omega_e).max(params.delta)
}
