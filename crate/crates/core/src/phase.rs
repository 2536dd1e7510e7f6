//! Total, dynamical and geometric phases over one rotation period, the
//! closed forms of the pure magnetic case, low- and high-rate expansions, and
//! zero-phase rotation rates.

use std::f64::consts::PI;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dressing::DressedFamily;
use crate::model::{derived_frequencies, FieldProtocol, MoleculeParams};
use crate::spectrum::{track_sweep, DressedSpectrum, StateLabel, TrackedSweep};
use crate::{Error, Result};

/// Below `OMEGA_FLOOR_FACTOR × max(ω_L, ω_e, Δ)` the geometric phase is taken
/// from its `ω_r → 0` limit.
pub const OMEGA_FLOOR_FACTOR: f64 = 1e-6;
/// Relative bracket width at which zero-phase bisection stops.
pub const ZERO_BRACKET_TOL: f64 = 1e-12;
/// Phases smaller than this (rad) count as zero when looking for sign
/// changes.
pub const PHASE_ZERO_TOL: f64 = 1e-10;
/// Pair differences below this everywhere on the grid are identically zero
/// and carry no crossing.
pub const IDENTICAL_PAIR_TOL: f64 = 1e-9;
/// Validity inequalities `a ≪ b` are taken to hold when `a ≤ VALIDITY_MARGIN b`.
pub const VALIDITY_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePhase {
    pub label: StateLabel,
    /// Dressed energy at `ω_r` (J).
    pub energy: f64,
    /// Dressed energy of the same state at `ω_r = 0` (J).
    pub static_energy: f64,
    pub total_phase: f64,
    pub dynamical_phase: f64,
    pub geometric_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub omega_r: f64,
    /// Canonical label order.
    pub states: [StatePhase; 8],
}

impl PhaseRecord {
    pub fn get(&self, label: StateLabel) -> &StatePhase {
        &self.states[label.index()]
    }

    pub fn geometric(&self) -> [f64; 8] {
        self.states.map(|s| s.geometric_phase)
    }

    /// `max_i |s_i + s_{7-i}|` over the sorted geometric phases: zero when the
    /// phase multiset is symmetric about zero.
    pub fn reflection_defect(&self) -> f64 {
        let mut g = self.geometric();
        g.sort_by(f64::total_cmp);
        (0..4).map(|i| (g[i] + g[7 - i]).abs()).fold(0.0, f64::max)
    }
}

/// `ω_floor` for a protocol.
pub fn omega_floor(params: &MoleculeParams, fields: &FieldProtocol) -> f64 {
    OMEGA_FLOOR_FACTOR * crate::model::frequency_scale(params, fields)
}

/// `lim_{ω_r→0} Δγ = 2π dẼ/dω_r|₀ / ħ = 2π⟨M̂⟩` for each state of the
/// labelled static spectrum, in canonical order.
pub fn adiabatic_limit(zero: &DressedSpectrum) -> [f64; 8] {
    let mut out = [0.0; 8];
    for (k, l) in zero.labels.iter().enumerate() {
        out[l.index()] = 2.0 * PI * zero.m_expectation(k);
    }
    out
}

fn same_label_set(a: &DressedSpectrum, b: &DressedSpectrum) -> bool {
    a.has_label_permutation() && b.has_label_permutation()
}

/// Phases of every state at `at.omega_r`, with the dynamical phase taken from
/// the labelled static spectrum `zero`.
pub fn geometric_phase(
    params: &MoleculeParams,
    fields: &FieldProtocol,
    at: &DressedSpectrum,
    zero: &DressedSpectrum,
) -> Result<PhaseRecord> {
    if !same_label_set(at, zero) {
        return Err(Error::LabelMismatch);
    }
    if zero.omega_r != 0.0 {
        return Err(Error::InvalidParameter("reference spectrum must be taken at omega_r = 0".into()));
    }
    let w = at.omega_r;
    if !(w > 0.0) {
        return Err(Error::InvalidParameter(
            "geometric phase needs omega_r > 0; use adiabatic_limit for omega_r = 0".into(),
        ));
    }
    let period = 2.0 * PI / w;
    let limit = adiabatic_limit(zero);
    let below_floor = w <= omega_floor(params, fields);
    let e_now = at.energies_by_label();
    let e_zero = zero.energies_by_label();
    let states = std::array::from_fn(|i| {
        let total_phase = e_now[i] / params.hbar * period;
        let dynamical_phase = e_zero[i] / params.hbar * period;
        let geometric_phase = if below_floor {
            limit[i]
        } else {
            (e_now[i] - e_zero[i]) / params.hbar * period
        };
        StatePhase {
            label: StateLabel::from_index(i),
            energy: e_now[i],
            static_energy: e_zero[i],
            total_phase,
            dynamical_phase,
            geometric_phase,
        }
    });
    Ok(PhaseRecord { omega_r: w, states })
}

/// Phase records at every point of a sweep; points at `ω_r = 0` carry the
/// adiabatic limit and no total or dynamical phase (NaN).
pub fn sweep_phases(sweep: &TrackedSweep) -> Result<Vec<PhaseRecord>> {
    let params = &sweep.family.params;
    let fields = &sweep.family.fields;
    sweep
        .spectra
        .iter()
        .map(|s| {
            if s.omega_r == 0.0 {
                let limit = adiabatic_limit(&sweep.zero);
                let e = sweep.zero.energies_by_label();
                Ok(PhaseRecord {
                    omega_r: 0.0,
                    states: std::array::from_fn(|i| StatePhase {
                        label: StateLabel::from_index(i),
                        energy: e[i],
                        static_energy: e[i],
                        total_phase: f64::NAN,
                        dynamical_phase: f64::NAN,
                        geometric_phase: limit[i],
                    }),
                })
            } else {
                geometric_phase(params, fields, s, &sweep.zero)
            }
        })
        .collect()
}

/// Geometric phases at a single rotation rate.
pub fn phases_at(params: &MoleculeParams, fields: &FieldProtocol) -> Result<PhaseRecord> {
    let sweep = track_sweep(params, &fields.with_omega_r(0.0), &[fields.omega_r])?;
    Ok(sweep_phases(&sweep)?.remove(0))
}

/// `Δγ/M` of the pure magnetic problem for `M = -3/2, -1/2, 1/2, 3/2`.
pub fn magnetic_phase_closed_form(params: &MoleculeParams, fields: &FieldProtocol, omega_r: f64) -> Result<[f64; 4]> {
    if !fields.is_pure_magnetic() {
        return Err(Error::NotPureMagnetic);
    }
    let wl = derived_frequencies(params, fields).omega_l;
    let value = magnetic_phase_per_m(wl, fields.theta_m, omega_r);
    Ok([value; 4])
}

/// `(2π/ω_r)(√(ω_L² + ω_r² − 2ω_Lω_r cosθ) − ω_L)`, rationalized so that it
/// stays accurate as `ω_r → 0`.
pub fn magnetic_phase_per_m(omega_l: f64, theta_m: f64, omega_r: f64) -> f64 {
    let root = (omega_l * omega_l + omega_r * omega_r - 2.0 * omega_l * omega_r * theta_m.cos()).sqrt();
    let den = root + omega_l;
    if den == 0.0 {
        return 2.0 * PI;
    }
    2.0 * PI * (omega_r - 2.0 * omega_l * theta_m.cos()) / den
}

/// Closed-form dressed energy `(ε/2)ħΔ + Mħ√(ω_L² + ω_r² − 2ω_Lω_r cosθ_m)`.
pub fn magnetic_energy_closed_form(params: &MoleculeParams, fields: &FieldProtocol, omega_r: f64, label: StateLabel) -> f64 {
    let wl = derived_frequencies(params, fields).omega_l;
    let root = (wl * wl + omega_r * omega_r - 2.0 * wl * omega_r * fields.theta_m.cos()).sqrt();
    0.5 * label.parity.sign() * params.hbar * params.delta + label.m() * params.hbar * root
}

/// `ω_{r,c} = 2ω_L cosθ_m`, the rate at which every geometric phase vanishes.
pub fn critical_rotation_magnetic(params: &MoleculeParams, fields: &FieldProtocol) -> Result<f64> {
    if !fields.is_pure_magnetic() {
        return Err(Error::NotPureMagnetic);
    }
    let cos = fields.theta_m.cos();
    if fields.theta_m >= PI / 2.0 || cos <= 0.0 {
        return Err(Error::NoCriticalRate { theta_m: fields.theta_m });
    }
    Ok(2.0 * derived_frequencies(params, fields).omega_l * cos)
}

/// Adding `2πM` gives the textbook `2πM(1 − cosθ)` normalization of the Berry
/// phase.
pub fn standard_convention(geometric_phase: f64, label: StateLabel) -> f64 {
    geometric_phase + 2.0 * PI * label.m()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    MagneticAdiabatic,
    MagneticFast,
    ElectricWeak,
    ElectricStrong,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::MagneticAdiabatic => "magnetic_adiabatic",
            Regime::MagneticFast => "magnetic_fast",
            Regime::ElectricWeak => "electric_weak",
            Regime::ElectricStrong => "electric_strong",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnetic_adiabatic" => Ok(Regime::MagneticAdiabatic),
            "magnetic_fast" => Ok(Regime::MagneticFast),
            "electric_weak" => Ok(Regime::ElectricWeak),
            "electric_strong" => Ok(Regime::ElectricStrong),
            other => Err(Error::RegimeUndefined(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpansionVariable {
    /// `Δγ ≈ leading + correction · ω_r`.
    OmegaR,
    /// `Δγ ≈ leading + correction / ω_r`.
    InverseOmegaR,
}

/// Two-term expansion of a geometric phase.
///
/// Magnetic regimes give `Δγ/M` (any state); electric regimes give `Δγ` of
/// the `(3/2, f)` state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub regime: Regime,
    pub leading: f64,
    pub correction: f64,
    pub variable: ExpansionVariable,
    pub per_unit_m: bool,
    /// False when a validity inequality fails at the protocol's `ω_r` or
    /// field strength.
    pub valid: bool,
    pub warnings: Vec<String>,
}

impl Expansion {
    pub fn evaluate(&self, omega_r: f64) -> f64 {
        match self.variable {
            ExpansionVariable::OmegaR => self.leading + self.correction * omega_r,
            ExpansionVariable::InverseOmegaR => self.leading + self.correction / omega_r,
        }
    }
}

fn require_much_less(warnings: &mut Vec<String>, what: &str, a: f64, b: f64) {
    if !(a <= VALIDITY_MARGIN * b) {
        warnings.push(format!("{what} is not satisfied ({a:.4e} vs {b:.4e})"));
    }
}

/// Expansion coefficients for one regime; validity is judged at
/// `fields.omega_r`.
pub fn asymptotic_phases(params: &MoleculeParams, fields: &FieldProtocol, regime: Regime) -> Result<Expansion> {
    let f = derived_frequencies(params, fields);
    let (wl, we, d, wr) = (f.omega_l, f.omega_e, params.delta, fields.omega_r);
    let mut warnings = Vec::new();
    let (leading, correction, variable, per_unit_m) = match regime {
        Regime::MagneticAdiabatic | Regime::MagneticFast => {
            if !fields.is_pure_magnetic() {
                return Err(Error::NotPureMagnetic);
            }
            if wl == 0.0 {
                return Err(Error::InvalidParameter("magnetic expansions need B > 0".into()));
            }
            let (s, c) = fields.theta_m.sin_cos();
            if regime == Regime::MagneticAdiabatic {
                require_much_less(&mut warnings, "omega_r << omega_L", wr, wl);
                (-2.0 * PI * c, 2.0 * PI * s * s / (2.0 * wl), ExpansionVariable::OmegaR, true)
            } else {
                require_much_less(&mut warnings, "omega_L << omega_r", wl, wr);
                (2.0 * PI, -2.0 * PI * (1.0 + c) * wl, ExpansionVariable::InverseOmegaR, true)
            }
        }
        Regime::ElectricWeak | Regime::ElectricStrong => {
            if !fields.is_pure_electric() {
                return Err(Error::NotPureElectric);
            }
            if we == 0.0 {
                return Err(Error::InvalidParameter("electric expansions need E > 0".into()));
            }
            let (s, c) = fields.theta_e.sin_cos();
            let berry = 2.0 * PI * 1.5 * c;
            if regime == Regime::ElectricWeak {
                require_much_less(&mut warnings, "weak field omega_e << Delta", we, d);
                require_much_less(&mut warnings, "omega_r << omega_e^2/Delta", wr, we * we / d);
                require_much_less(&mut warnings, "omega_r << Delta", wr, d);
                require_much_less(&mut warnings, "omega_r << Delta^3/omega_e^2", wr, d * d * d / (we * we));
                let k = 75.0 * d / (32.0 * we * we) + 9.0 / (16.0 * d) + 81.0 * we * we / (400.0 * d * d * d);
                (berry, 2.0 * PI * k * s * s, ExpansionVariable::OmegaR, false)
            } else {
                require_much_less(&mut warnings, "strong field Delta << omega_e", d, we);
                require_much_less(&mut warnings, "omega_r << omega_e", wr, we);
                require_much_less(&mut warnings, "omega_r << omega_e^3/Delta^2", wr, we * we * we / (d * d));
                let k = 15.0 / (8.0 * we) + 125.0 * d * d / (96.0 * we * we * we);
                (berry, 2.0 * PI * k * s * s, ExpansionVariable::OmegaR, false)
            }
        }
    };
    Ok(Expansion { regime, leading, correction, variable, per_unit_m, valid: warnings.is_empty(), warnings })
}

/// Low-rate behaviour of the exact phases: the `ω_r → 0` limit and the
/// initial slope, both in canonical label order.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericExpansion {
    /// Richardson extrapolation of `Δγ(h)`, `Δγ(2h)` to `ω_r = 0`.
    pub extrapolated: [f64; 8],
    /// Exact limit `2π⟨M̂⟩` from the static eigenvectors.
    pub limit: [f64; 8],
    /// `dΔγ/dω_r` at `ω_r = 0` (rad per rad/s).
    pub slope: [f64; 8],
    pub step: f64,
}

/// Step used by [`numeric_expansion`] relative to the frequency scale.
pub const SLOPE_STEP_FACTOR: f64 = 1e-4;

/// Low-rate expansion of the exact geometric phases using three points
/// `h, 2h, 4h` with `h = SLOPE_STEP_FACTOR × max(ω_L, ω_e, Δ)`.
pub fn numeric_expansion(params: &MoleculeParams, fields: &FieldProtocol) -> Result<NumericExpansion> {
    let h = SLOPE_STEP_FACTOR * crate::model::frequency_scale(params, fields);
    numeric_expansion_with_step(params, fields, h)
}

pub fn numeric_expansion_with_step(params: &MoleculeParams, fields: &FieldProtocol, h: f64) -> Result<NumericExpansion> {
    if !(h > omega_floor(params, fields)) {
        return Err(Error::InvalidParameter("slope step must exceed omega_floor".into()));
    }
    let sweep = track_sweep(params, &fields.with_omega_r(0.0), &[h, 2.0 * h, 4.0 * h])?;
    let rec = sweep_phases(&sweep)?;
    let (g1, g2, g4) = (rec[0].geometric(), rec[1].geometric(), rec[2].geometric());
    let limit = adiabatic_limit(&sweep.zero);
    let mut extrapolated = [0.0; 8];
    let mut slope = [0.0; 8];
    for i in 0..8 {
        // quadratic through h, 2h, 4h evaluated at 0 and differentiated there
        extrapolated[i] = (8.0 * g1[i] - 6.0 * g2[i] + g4[i]) / 3.0;
        slope[i] = (-12.0 * g1[i] + 15.0 * g2[i] - 3.0 * g4[i]) / (6.0 * h);
    }
    Ok(NumericExpansion { extrapolated, limit, slope, step: h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroMode {
    SingleState,
    Relative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ZeroTarget {
    State { label: StateLabel },
    Pair { first: StateLabel, second: StateLabel },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseZero {
    pub target: ZeroTarget,
    pub omega_r: f64,
}

/// Zeros of single-state geometric phases or of pairwise differences,
/// bracketed on the sweep grid and refined by bisection; sorted by `ω_r`.
pub fn find_zero_phase(sweep: &TrackedSweep, phases: &[PhaseRecord], mode: ZeroMode) -> Result<Vec<PhaseZero>> {
    if phases.len() != sweep.spectra.len() {
        return Err(Error::InvalidParameter("phase records do not match the sweep".into()));
    }
    let targets: Vec<(ZeroTarget, Box<dyn Fn(&[f64; 8]) -> f64>)> = match mode {
        ZeroMode::SingleState => (0..8)
            .map(|i| {
                let t = ZeroTarget::State { label: StateLabel::from_index(i) };
                let f: Box<dyn Fn(&[f64; 8]) -> f64> = Box::new(move |g| g[i]);
                (t, f)
            })
            .collect(),
        ZeroMode::Relative => {
            let mut v = Vec::new();
            for i in 0..8 {
                for j in (i + 1)..8 {
                    let t = ZeroTarget::Pair { first: StateLabel::from_index(i), second: StateLabel::from_index(j) };
                    let f: Box<dyn Fn(&[f64; 8]) -> f64> = Box::new(move |g| g[i] - g[j]);
                    v.push((t, f));
                }
            }
            v
        }
    };
    let values: Vec<[f64; 8]> = phases.iter().map(|r| r.geometric()).collect();
    let params = &sweep.family.params;
    let fields = &sweep.family.fields;
    let mut out = Vec::new();
    for (target, f) in &targets {
        let y: Vec<f64> = values.iter().map(|g| f(g)).map(|x| if x.abs() < PHASE_ZERO_TOL { 0.0 } else { x }).collect();
        if y.iter().all(|x| x.abs() < IDENTICAL_PAIR_TOL) {
            continue;
        }
        for k in 0..y.len() {
            if y[k] == 0.0 {
                if sweep.grid[k] > 0.0 && (k == 0 || y[k - 1] != 0.0) {
                    out.push(PhaseZero { target: *target, omega_r: sweep.grid[k] });
                }
                continue;
            }
            if k + 1 >= y.len() || y[k + 1] == 0.0 || y[k].signum() == y[k + 1].signum() {
                continue;
            }
            let (mut lo, mut hi, ylo) = (sweep.grid[k], sweep.grid[k + 1], y[k]);
            let eval = |w: f64| -> Result<f64> {
                let s = sweep.spectrum_near(k, w)?;
                let rec = geometric_phase(params, fields, &s, &sweep.zero)?;
                Ok(f(&rec.geometric()))
            };
            while hi - lo > ZERO_BRACKET_TOL * hi {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let ym = eval(mid)?;
                if ym == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if ym.signum() == ylo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(PhaseZero { target: *target, omega_r: 0.5 * (lo + hi) });
        }
    }
    out.sort_by(|a, b| a.omega_r.total_cmp(&b.omega_r));
    Ok(out)
}

/// Geometric phases straight from a [`DressedFamily`] at a list of rates,
/// continued from `ω_r = 0`.
pub fn phases_along(family: &DressedFamily, grid: &[f64]) -> Result<Vec<PhaseRecord>> {
    let sweep = track_sweep(&family.params, &family.fields, grid)?;
    sweep_phases(&sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KV_PER_CM;

    fn oh() -> MoleculeParams {
        MoleculeParams::oh()
    }

    #[test]
    fn axial_closed_form_below_larmor() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 0.0);
        let wl = derived_frequencies(&p, &f).omega_l;
        for wr in [0.1 * wl, 0.5 * wl, 0.99 * wl] {
            for v in magnetic_phase_closed_form(&p, &f, wr).unwrap() {
                assert!((v + 2.0 * PI).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nearly_axial_exact_phase_below_larmor() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 1e-4);
        let wl = derived_frequencies(&p, &f).omega_l;
        let rec = phases_at(&p, &f.with_omega_r(0.5 * wl)).unwrap();
        for s in rec.states {
            assert!((s.geometric_phase / s.label.m() + 2.0 * PI).abs() < 1e-6, "{}", s.label);
        }
    }

    #[test]
    fn closed_form_values() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, PI / 2.0);
        let wl = derived_frequencies(&p, &f).omega_l;
        let v = magnetic_phase_closed_form(&p, &f, wl).unwrap()[0];
        assert!((v - 2.0 * PI * (2.0_f64.sqrt() - 1.0)).abs() < 1e-12);
        let f = FieldProtocol::magnetic(0.1, PI / 8.0);
        let wc = critical_rotation_magnetic(&p, &f).unwrap();
        assert!(magnetic_phase_closed_form(&p, &f, wc).unwrap()[0].abs() < 1e-12);
        assert!((magnetic_phase_per_m(wl, PI / 8.0, 0.0) + 2.0 * PI * (PI / 8.0).cos()).abs() < 1e-15);
        let mixed = FieldProtocol::new(0.1, 0.2, 1e5, 0.1, 0.0);
        assert_eq!(magnetic_phase_closed_form(&p, &mixed, 1e9), Err(Error::NotPureMagnetic));
    }

    #[test]
    fn closed_form_near_berry_limit_at_slow_rotation() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, PI / 8.0);
        let wl = derived_frequencies(&p, &f).omega_l;
        let v = magnetic_phase_closed_form(&p, &f, 1e8).unwrap()[0];
        let e = asymptotic_phases(&p, &f.with_omega_r(1e8), Regime::MagneticAdiabatic).unwrap();
        assert!(((v - e.evaluate(1e8)) / v).abs() < 1e-2);
        assert!(e.valid);
        assert!((e.leading + 5.8049).abs() < 1e-4);
        assert!((e.correction - 2.0 * PI * (PI / 8.0).sin().powi(2) / (2.0 * wl)).abs() < 1e-25);
    }

    #[test]
    fn critical_rate() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, PI / 8.0);
        let wc = critical_rotation_magnetic(&p, &f).unwrap();
        // 2 × 7.035280047e9 × cos(π/8)
        assert!((wc / 1.299_950_248_2e10 - 1.0).abs() < 1e-10);
        let f2 = FieldProtocol::magnetic(0.2, PI / 8.0);
        assert!((critical_rotation_magnetic(&p, &f2).unwrap() / wc - 2.0).abs() < 1e-15);
        assert!(matches!(
            critical_rotation_magnetic(&p, &FieldProtocol::magnetic(0.1, PI / 2.0)),
            Err(Error::NoCriticalRate { .. })
        ));
    }

    #[test]
    fn regimes_parse() {
        assert_eq!("electric_weak".parse::<Regime>().unwrap(), Regime::ElectricWeak);
        assert!(matches!("electric_medium".parse::<Regime>(), Err(Error::RegimeUndefined(_))));
        for r in [Regime::MagneticAdiabatic, Regime::MagneticFast, Regime::ElectricWeak, Regime::ElectricStrong] {
            assert_eq!(r.as_str().parse::<Regime>().unwrap(), r);
        }
    }

    #[test]
    fn electric_berry_term() {
        let p = oh();
        let f = FieldProtocol::electric(2.0 * KV_PER_CM, PI / 8.0).with_omega_r(1e6);
        let e = asymptotic_phases(&p, &f, Regime::ElectricWeak).unwrap();
        assert!((e.leading - 3.0 * PI * (PI / 8.0).cos()).abs() < 1e-15);
        // the 2 kV/cm field is not weak compared with the Λ-doubling
        assert!(!e.valid);
        assert!(asymptotic_phases(&p, &FieldProtocol::magnetic(0.1, 0.1), Regime::ElectricWeak).is_err());
    }

    #[test]
    fn geometric_phase_needs_consistent_labels() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 0.3);
        let sweep = track_sweep(&p, &f, &[1e9]).unwrap();
        let mut bad = sweep.spectra[0].clone();
        bad.labels[1] = bad.labels[0];
        assert_eq!(geometric_phase(&p, &f, &bad, &sweep.zero), Err(Error::LabelMismatch));
        assert!(geometric_phase(&p, &f, &sweep.spectra[0], &sweep.zero).is_ok());
    }

    #[test]
    fn floor_uses_adiabatic_limit() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, PI / 8.0);
        let floor = omega_floor(&p, &f);
        let rec = phases_at(&p, &f.with_omega_r(0.5 * floor)).unwrap();
        for s in rec.states {
            assert!((s.geometric_phase / s.label.m() + 2.0 * PI * (PI / 8.0).cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn offset_identity_keeps_relative_phases() {
        let p = oh();
        let rec = phases_at(&p, &FieldProtocol::new(0.1, PI / 3.0, 2e5, PI / 8.0, 5e9)).unwrap();
        for a in rec.states {
            for b in rec.states {
                let raw = a.geometric_phase - b.geometric_phase;
                let shifted = standard_convention(a.geometric_phase, a.label) - standard_convention(b.geometric_phase, b.label);
                // the shift is a whole number of turns
                let turns = (shifted - raw) / (2.0 * PI);
                assert!((turns - turns.round()).abs() < 1e-12);
            }
        }
    }
}
