//! Dressed spectra, `(M, ε)` state labels and continuation along `ω_r`.
//!
//! A label names the state it connects to in the fast-rotation limit, where
//! `H_d ≈ ħ ω_r M̂` makes `M` a good quantum number and the two states sharing
//! an `M` are split by the Λ-doubling (the lower one is `e`). Labels are
//! carried to any finite `ω_r` by following eigenvectors through maximal
//! overlap, starting from `ω_r = 0` where exactly degenerate static levels are
//! first resolved by diagonalizing `M̂` inside each degenerate cluster. For a
//! pure magnetic field this reproduces the labels of the closed-form spectrum.

use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dressing::{DressedFamily, M_HAT_DIAGONAL};
pub use crate::linalg::{eigh8, Eigh};
use crate::linalg::{self, c, CMat8, CVec8};
use crate::model::{FieldProtocol, MoleculeParams};
use crate::{Error, Result};

/// Overlap magnitude below which a link between neighbouring points is
/// refused.
pub const OVERLAP_THRESHOLD: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// Bisection floor relative to the span of the continuation.
pub const MIN_STEP_FRACTION: f64 = 1e-9;
/// Default crossing/avoided-crossing threshold relative to the largest
/// `|eigenvalue|` of the sweep.
pub const GAP_TOL_FRACTION: f64 = 1e-6;
/// Static levels closer than this (relative to the largest `|eigenvalue|`)
/// are treated as one degenerate cluster.
pub const CLUSTER_TOL: f64 = 1e-9;
/// Eigenvalue gaps below this (relative) make static labels ambiguous.
pub const AMBIGUITY_TOL: f64 = 1e-6;
/// Interior minima must dip below both neighbours by this fraction of the
/// largest eigenvalue magnitude.
pub const MINIMUM_NOISE_FRACTION: f64 = 1e-12;
/// The labelling continuation runs out to this multiple of the frequency
/// scale.
pub const FAST_LIMIT_FACTOR: f64 = 1e4;
/// Points per decade on the labelling continuation.
const CHAIN_POINTS_PER_DECADE: usize = 24;
/// Start of the labelling continuation relative to the frequency scale.
const CHAIN_START_FACTOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    #[serde(rename = "e")]
    E,
    #[serde(rename = "f")]
    F,
}

impl Parity {
    /// `ε = -1` for `e` and `+1` for `f`.
    pub fn sign(self) -> f64 {
        match self {
            Parity::E => -1.0,
            Parity::F => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::E => "e",
            Parity::F => "f",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateLabel {
    /// `2M`, one of -3, -1, 1, 3.
    pub m_times_2: i8,
    pub parity: Parity,
}

impl StateLabel {
    pub fn new(m_times_2: i8, parity: Parity) -> Self {
        debug_assert!(matches!(m_times_2, -3 | -1 | 1 | 3));
        Self { m_times_2, parity }
    }

    pub fn m(self) -> f64 {
        f64::from(self.m_times_2) / 2.0
    }

    /// Canonical index: `e` states first, ascending `M` within a block.
    pub fn index(self) -> usize {
        let block = match self.parity {
            Parity::E => 0,
            Parity::F => 4,
        };
        block + ((self.m_times_2 + 3) / 2) as usize
    }

    pub fn from_index(k: usize) -> Self {
        assert!(k < 8);
        let parity = if k < 4 { Parity::E } else { Parity::F };
        Self::new(2 * (k % 4) as i8 - 3, parity)
    }

    pub fn all() -> [StateLabel; 8] {
        std::array::from_fn(Self::from_index)
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.m_times_2 < 0 { '-' } else { '+' };
        write!(f, "({sign}{}/2, {})", self.m_times_2.abs(), self.parity.as_str())
    }
}

/// Labelled eigendecomposition of `H_d` at one rotation rate.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedSpectrum {
    pub omega_r: f64,
    /// Ascending eigenvalues (J).
    pub eigenvalues: [f64; 8],
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: CMat8,
    /// `labels[k]` names column `k`.
    pub labels: [StateLabel; 8],
}

impl DressedSpectrum {
    pub fn vector(&self, k: usize) -> CVec8 {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn column_of(&self, label: StateLabel) -> usize {
        self.labels.iter().position(|&l| l == label).expect("labels form a permutation")
    }

    pub fn energy_of(&self, label: StateLabel) -> f64 {
        self.eigenvalues[self.column_of(label)]
    }

    /// Energies indexed by canonical label index.
    pub fn energies_by_label(&self) -> [f64; 8] {
        let mut out = [0.0; 8];
        for (k, l) in self.labels.iter().enumerate() {
            out[l.index()] = self.eigenvalues[k];
        }
        out
    }

    /// `⟨M̂⟩` of column `k`.
    pub fn m_expectation(&self, k: usize) -> f64 {
        m_expectation(&self.eigenvectors, k)
    }

    /// Largest `‖H v − λ v‖₂` relative to the spectral norm of `h`.
    pub fn residual(&self, h: &CMat8) -> f64 {
        let norm = self.eigenvalues.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
        let mut worst = 0.0_f64;
        for k in 0..8 {
            let v = self.vector(k);
            let r = h * v - v * c(self.eigenvalues[k], 0.0);
            worst = worst.max(r.norm());
        }
        if norm > 0.0 {
            worst / norm
        } else {
            worst
        }
    }

    pub fn has_label_permutation(&self) -> bool {
        let mut seen = [false; 8];
        for l in &self.labels {
            if seen[l.index()] {
                return false;
            }
            seen[l.index()] = true;
        }
        true
    }
}

fn m_expectation(vectors: &CMat8, k: usize) -> f64 {
    (0..8).map(|i| vectors[(i, k)].norm_sqr() * M_HAT_DIAGONAL[i]).sum()
}

fn max_abs_value(values: &[f64; 8]) -> f64 {
    values.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Eigendecomposition whose columns are tied to persistent states.
#[derive(Debug, Clone)]
struct Frame {
    omega: f64,
    eig: Eigh,
    /// Persistent state carried by column `k`.
    state_of_col: [usize; 8],
}

impl Frame {
    fn col_of_state(&self) -> [usize; 8] {
        let mut out = [0; 8];
        for (k, &s) in self.state_of_col.iter().enumerate() {
            out[s] = k;
        }
        out
    }

    fn energy_of_state(&self) -> [f64; 8] {
        let cols = self.col_of_state();
        cols.map(|k| self.eig.values[k])
    }
}

enum LinkOutcome {
    Accepted(Frame),
    Refine { overlap: f64 },
}

/// Continuation of eigenvectors of one dressed family along `ω_r`.
struct Tracker<'a> {
    family: &'a DressedFamily,
    min_step: f64,
    energy_tol: f64,
}

impl<'a> Tracker<'a> {
    fn eig(&self, omega: f64) -> Result<Eigh> {
        eigh8(&self.family.at(omega))
    }

    fn try_link(&self, from: &Frame, omega: f64, eig: Eigh, floor: bool) -> LinkOutcome {
        let cols = from.col_of_state();
        let mut weights = [[0.0; 8]; 8];
        for s in 0..8 {
            let a = from.eig.vectors.column(cols[s]);
            for j in 0..8 {
                weights[s][j] = a.dotc(&eig.vectors.column(j)).norm_sqr();
            }
        }
        let assign = linalg::max_weight_assignment(&weights);
        let overlap = (0..8).map(|s| weights[s][assign[s]].sqrt()).fold(1.0_f64, f64::min);
        if overlap < OVERLAP_THRESHOLD {
            return LinkOutcome::Refine { overlap };
        }
        let e_from = from.energy_of_state();
        let reordered = (0..8).any(|s| {
            (0..8).any(|t| {
                e_from[s] < e_from[t] - self.energy_tol
                    && eig.values[assign[s]] > eig.values[assign[t]] + self.energy_tol
            })
        });
        if reordered && !floor {
            return LinkOutcome::Refine { overlap };
        }
        let mut state_of_col = [0; 8];
        for s in 0..8 {
            state_of_col[assign[s]] = s;
        }
        LinkOutcome::Accepted(Frame { omega, eig, state_of_col })
    }

    /// Follow the states of `from` to `omega`, bisecting where needed.
    fn advance(&self, from: &Frame, omega: f64, eig: Option<Eigh>) -> Result<Frame> {
        let eig = match eig {
            Some(e) => e,
            None => self.eig(omega)?,
        };
        let floor = (omega - from.omega).abs() <= self.min_step;
        match self.try_link(from, omega, eig, floor) {
            LinkOutcome::Accepted(frame) => Ok(frame),
            LinkOutcome::Refine { overlap } => {
                if floor {
                    return Err(Error::TrackingBreakdown {
                        lo: from.omega.min(omega),
                        hi: from.omega.max(omega),
                        overlap,
                    });
                }
                let mid = 0.5 * (from.omega + omega);
                let half = self.advance(from, mid, None)?;
                self.advance(&half, omega, None)
            }
        }
    }
}

/// Static eigendecomposition with exactly degenerate clusters rotated onto
/// eigenvectors of `M̂` (the `ω_r → 0⁺` limit of the dressed eigenvectors).
/// Fails with `AmbiguousLabel` if `M̂` cannot split a cluster.
fn resolved_static(family: &DressedFamily) -> Result<Eigh> {
    let mut eig = eigh8(&family.at(0.0))?;
    let tol = CLUSTER_TOL * max_abs_value(&eig.values).max(f64::MIN_POSITIVE);
    let mut i = 0;
    while i < 8 {
        let mut j = i;
        while j + 1 < 8 && eig.values[j + 1] - eig.values[i] <= tol {
            j += 1;
        }
        if j > i {
            let n = j - i + 1;
            let mut g = vec![Complex64::default(); n * n];
            for a in 0..n {
                for b in 0..n {
                    g[a * n + b] = (0..8)
                        .map(|r| eig.vectors[(r, i + a)].conj() * M_HAT_DIAGONAL[r] * eig.vectors[(r, i + b)])
                        .sum();
                }
            }
            let (gv, rot, _) = linalg::jacobi_sorted(&mut g, n)?;
            if gv.windows(2).any(|w| w[1] - w[0] < AMBIGUITY_TOL) {
                return Err(Error::AmbiguousLabel(format!(
                    "static levels {i}..={j} stay degenerate under the rotation generator"
                )));
            }
            let block: Vec<CVec8> = (0..n).map(|a| eig.vector(i + a)).collect();
            for b in 0..n {
                let mut col = CVec8::zeros();
                for a in 0..n {
                    col += &block[a] * rot[a * n + b];
                }
                eig.vectors.set_column(i + b, &col);
            }
        }
        i = j + 1;
    }
    Ok(eig)
}

/// Label the fast-limit frame: `M` from `⟨M̂⟩`, parity from the energy order
/// inside each `M` pair.
fn fast_limit_labels(frame: &Frame) -> Result<[StateLabel; 8]> {
    let mut by_m: [Vec<usize>; 4] = Default::default();
    for k in 0..8 {
        let m = m_expectation(&frame.eig.vectors, k);
        let m2 = (2.0 * m).round();
        if (2.0 * m - m2).abs() > 0.5 || !matches!(m2 as i64, -3 | -1 | 1 | 3) {
            return Err(Error::AmbiguousLabel(format!(
                "<M> = {m:.4} at omega_r = {:.4e} is not near a half-integer",
                frame.omega
            )));
        }
        by_m[((m2 as i64 + 3) / 2) as usize].push(k);
    }
    let mut labels = [StateLabel::new(-3, Parity::E); 8];
    for (slot, cols) in by_m.iter().enumerate() {
        if cols.len() != 2 {
            return Err(Error::AmbiguousLabel(format!(
                "{} states share M = {}/2 in the fast-rotation limit",
                cols.len(),
                2 * slot as i64 - 3
            )));
        }
        let (lo, hi) = if frame.eig.values[cols[0]] <= frame.eig.values[cols[1]] {
            (cols[0], cols[1])
        } else {
            (cols[1], cols[0])
        };
        let m2 = 2 * slot as i8 - 3;
        labels[frame.state_of_col[lo]] = StateLabel::new(m2, Parity::E);
        labels[frame.state_of_col[hi]] = StateLabel::new(m2, Parity::F);
    }
    Ok(labels)
}

fn log_chain(lo: f64, hi: f64) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * CHAIN_POINTS_PER_DECADE as f64).ceil().max(2.0) as usize;
    (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n as f64)).collect()
}

fn frame_to_spectrum(frame: &Frame, labels: &[StateLabel; 8]) -> DressedSpectrum {
    DressedSpectrum {
        omega_r: frame.omega,
        eigenvalues: frame.eig.values,
        eigenvectors: frame.eig.vectors,
        labels: frame.state_of_col.map(|s| labels[s]),
    }
}

fn energy_tol(family: &DressedFamily) -> f64 {
    1e-12 * family.params.hbar * family.frequency_scale()
}

/// Labelled static spectrum of a validated family.
fn labelled_zero(family: &DressedFamily) -> Result<(Frame, [StateLabel; 8])> {
    let eig = resolved_static(family)?;
    let zero = Frame { omega: 0.0, eig, state_of_col: std::array::from_fn(|k| k) };
    let scale = family.frequency_scale();
    let hi = FAST_LIMIT_FACTOR * scale;
    let tracker = Tracker { family, min_step: MIN_STEP_FRACTION * hi, energy_tol: energy_tol(family) };
    let mut frame = zero.clone();
    for w in log_chain(CHAIN_START_FACTOR * scale, hi) {
        frame = tracker.advance(&frame, w, None)?;
    }
    let labels = fast_limit_labels(&frame)?;
    Ok((zero, labels))
}

/// Unlabelled eigendecomposition of `H_d` at the protocol's `ω_r`.
pub fn dressed_eigh(params: &MoleculeParams, fields: &FieldProtocol) -> Result<Eigh> {
    let family = DressedFamily::new(params, fields)?;
    eigh8(&family.at(fields.omega_r))
}

/// Attach `(M, ε)` labels to the static (`ω_r = 0`) spectrum.
///
/// Fails with `AmbiguousLabel` when the static spectrum has levels closer
/// than `AMBIGUITY_TOL` relative; sweeps handle that case through
/// [`track_sweep`], which resolves the degeneracy with the rotation
/// generator instead.
pub fn label_states(spectrum_at_zero: &Eigh, params: &MoleculeParams, fields: &FieldProtocol) -> Result<DressedSpectrum> {
    let fields = fields.with_omega_r(0.0);
    let family = DressedFamily::new(params, &fields)?;
    let scale = max_abs_value(&spectrum_at_zero.values);
    if let Some(w) = spectrum_at_zero.values.windows(2).find(|w| w[1] - w[0] < AMBIGUITY_TOL * scale) {
        return Err(Error::AmbiguousLabel(format!(
            "static levels {:.6e} J and {:.6e} J are degenerate",
            w[0], w[1]
        )));
    }
    let (zero, labels) = labelled_zero(&family)?;
    // carry the labels onto the caller's eigenvectors
    let tracker = Tracker { family: &family, min_step: f64::INFINITY, energy_tol: energy_tol(&family) };
    match tracker.try_link(&zero, 0.0, spectrum_at_zero.clone(), true) {
        LinkOutcome::Accepted(linked) => Ok(frame_to_spectrum(&linked, &labels)),
        LinkOutcome::Refine { overlap } => Err(Error::AmbiguousLabel(format!(
            "supplied static eigenvectors overlap the reference by only {overlap:.3}"
        ))),
    }
}

/// Labelled static spectrum; exactly degenerate levels are resolved with the
/// rotation generator rather than rejected.
pub fn labelled_static(params: &MoleculeParams, fields: &FieldProtocol) -> Result<DressedSpectrum> {
    let family = DressedFamily::new(params, &fields.with_omega_r(0.0))?;
    let (zero, labels) = labelled_zero(&family)?;
    Ok(frame_to_spectrum(&zero, &labels))
}

/// Labelled dressed spectrum at a single rotation rate, continued from
/// `ω_r = 0`.
pub fn labelled_spectrum(params: &MoleculeParams, fields: &FieldProtocol) -> Result<DressedSpectrum> {
    let sweep = track_sweep(params, &fields.with_omega_r(0.0), &[fields.omega_r])?;
    Ok(sweep.spectra.into_iter().next().expect("one grid point"))
}

/// Labelled spectra along an ascending `ω_r` grid.
#[derive(Debug, Clone)]
pub struct TrackedSweep {
    pub family: DressedFamily,
    pub grid: Vec<f64>,
    pub spectra: Vec<DressedSpectrum>,
    /// Labelled static spectrum the continuation starts from.
    pub zero: DressedSpectrum,
}

impl TrackedSweep {
    /// Energy of `label` at each grid point.
    pub fn energy_curve(&self, label: StateLabel) -> Vec<f64> {
        self.spectra.iter().map(|s| s.energy_of(label)).collect()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.spectra
            .iter()
            .chain(std::iter::once(&self.zero))
            .map(|s| max_abs_value(&s.eigenvalues))
            .fold(0.0, f64::max)
    }

    fn min_step(&self) -> f64 {
        MIN_STEP_FRACTION * self.grid.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE)
    }

    fn frame_at(&self, k: usize) -> Frame {
        let s = &self.spectra[k];
        Frame {
            omega: s.omega_r,
            eig: Eigh { values: s.eigenvalues, vectors: s.eigenvectors, sweeps: 0 },
            state_of_col: s.labels.map(|l| l.index()),
        }
    }

    /// Continue from grid point `k` to an off-grid rate.
    pub fn spectrum_near(&self, k: usize, omega: f64) -> Result<DressedSpectrum> {
        let tracker = Tracker { family: &self.family, min_step: self.min_step(), energy_tol: energy_tol(&self.family) };
        let frame = tracker.advance(&self.frame_at(k), omega, None)?;
        Ok(frame_to_spectrum(&frame, &StateLabel::all()))
    }
}

/// Track the eight dressed states along `grid`.
pub fn track_sweep(params: &MoleculeParams, fields: &FieldProtocol, grid: &[f64]) -> Result<TrackedSweep> {
    let (sweep, err) = track_sweep_partial(params, fields, grid)?;
    match err {
        Some(e) => Err(e),
        None => Ok(sweep),
    }
}

/// Like [`track_sweep`], but a tracking failure returns the points linked so
/// far together with the error.
pub fn track_sweep_partial(
    params: &MoleculeParams,
    fields: &FieldProtocol,
    grid: &[f64],
) -> Result<(TrackedSweep, Option<Error>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("sweep grid is empty".into()));
    }
    if grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("sweep grid values must be finite and >= 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sweep grid must be strictly ascending".into()));
    }
    let family = DressedFamily::new(params, &fields.with_omega_r(0.0))?;
    let (zero, labels) = labelled_zero(&family)?;
    // state index == canonical label index from here on
    let relabel = |frame: Frame| Frame {
        state_of_col: frame.state_of_col.map(|s| labels[s].index()),
        ..frame
    };
    let zero = relabel(zero);
    let identity = StateLabel::all();

    let eigs: Vec<Result<Eigh>> = grid.par_iter().map(|&w| eigh8(&family.at(w))).collect();
    let span = *grid.last().expect("non-empty");
    let tracker = Tracker {
        family: &family,
        min_step: MIN_STEP_FRACTION * span.max(f64::MIN_POSITIVE),
        energy_tol: energy_tol(&family),
    };
    let mut spectra = Vec::with_capacity(grid.len());
    let mut frame = zero.clone();
    let mut failure = None;
    for (&w, eig) in grid.iter().zip(eigs) {
        let step = match eig {
            Ok(eig) if w == 0.0 => tracker.try_link(&frame, 0.0, eig, true),
            Ok(eig) => match tracker.advance(&frame, w, Some(eig)) {
                Ok(f) => LinkOutcome::Accepted(f),
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            },
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        match step {
            LinkOutcome::Accepted(next) => frame = next,
            LinkOutcome::Refine { overlap } => {
                failure = Some(Error::TrackingBreakdown { lo: 0.0, hi: 0.0, overlap });
                break;
            }
        }
        spectra.push(frame_to_spectrum(&frame, &identity));
    }
    let sweep = TrackedSweep {
        grid: grid[..spectra.len()].to_vec(),
        spectra,
        zero: frame_to_spectrum(&zero, &identity),
        family,
    };
    Ok((sweep, failure))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    Crossing,
    AvoidedCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapEvent {
    pub pair: (StateLabel, StateLabel),
    pub omega_r: f64,
    /// `|Ẽ_i − Ẽ_j|` at the refined position (J).
    pub gap: f64,
    pub kind: GapKind,
}

/// Local minima of `|Ẽ_i − Ẽ_j|` for every pair of tracked states, using the
/// default threshold.
pub fn find_spectrum_gaps(sweep: &TrackedSweep) -> Result<Vec<GapEvent>> {
    find_spectrum_gaps_with_tol(sweep, GAP_TOL_FRACTION * sweep.max_abs_eigenvalue())
}

pub fn find_spectrum_gaps_with_tol(sweep: &TrackedSweep, gap_tol: f64) -> Result<Vec<GapEvent>> {
    let n = sweep.grid.len();
    let curves: Vec<[f64; 8]> = sweep.spectra.iter().map(|s| s.energies_by_label()).collect();
    let mut events = Vec::new();
    if n < 2 {
        return Ok(events);
    }
    // flat differences jitter at round-off level; ignore dips below this
    let noise = MINIMUM_NOISE_FRACTION * sweep.max_abs_eigenvalue();
    for i in 0..8 {
        for j in (i + 1)..8 {
            let d: Vec<f64> = curves.iter().map(|e| e[i] - e[j]).collect();
            let pair = (StateLabel::from_index(i), StateLabel::from_index(j));
            let diff_at = |k: usize, w: f64| -> Result<f64> {
                let s = sweep.spectrum_near(k, w)?;
                let e = s.energies_by_label();
                Ok(e[i] - e[j])
            };
            for k in 0..n - 1 {
                if d[k] == 0.0 || d[k].signum() != d[k + 1].signum() && d[k + 1] != 0.0 {
                    // sign change: bisect on the tracked difference
                    let (mut lo, mut hi) = (sweep.grid[k], sweep.grid[k + 1]);
                    let (mut dlo, mut dhi) = (d[k], d[k + 1]);
                    if dlo != 0.0 {
                        for _ in 0..200 {
                            if hi - lo <= 1e-13 * hi.abs().max(1.0) {
                                break;
                            }
                            let mid = 0.5 * (lo + hi);
                            let dm = diff_at(k, mid)?;
                            if dm == 0.0 {
                                lo = mid;
                                hi = mid;
                                dlo = 0.0;
                                dhi = 0.0;
                                break;
                            }
                            if dm.signum() == dlo.signum() {
                                lo = mid;
                                dlo = dm;
                            } else {
                                hi = mid;
                                dhi = dm;
                            }
                        }
                    }
                    let (w, gap) = if dlo.abs() <= dhi.abs() { (lo, dlo.abs()) } else { (hi, dhi.abs()) };
                    events.push(GapEvent { pair, omega_r: w, gap, kind: classify(gap, gap_tol) });
                } else if k >= 1
                    && d[k - 1].signum() == d[k].signum()
                    && d[k + 1].signum() == d[k].signum()
                    && d[k - 1].abs() - d[k].abs() > noise
                    && d[k + 1].abs() - d[k].abs() > noise
                {
                    // interior minimum without sign change: parabola through
                    // the three magnitudes
                    let (x0, x1, x2) = (sweep.grid[k - 1], sweep.grid[k], sweep.grid[k + 1]);
                    let (y0, y1, y2) = (d[k - 1].abs(), d[k].abs(), d[k + 1].abs());
                    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
                    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
                    let mut w = if den != 0.0 { x1 - 0.5 * num / den } else { x1 };
                    if !(w > x0 && w < x2) {
                        w = x1;
                    }
                    let g = diff_at(k, w)?.abs();
                    let (w, gap) = if g <= y1 { (w, g) } else { (x1, y1) };
                    events.push(GapEvent { pair, omega_r: w, gap, kind: classify(gap, gap_tol) });
                }
            }
        }
    }
    events.sort_by(|a, b| a.omega_r.total_cmp(&b.omega_r).then(a.pair.cmp(&b.pair)));
    Ok(events)
}

fn classify(gap: f64, tol: f64) -> GapKind {
    if gap < tol {
        GapKind::Crossing
    } else {
        GapKind::AvoidedCrossing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dressing::dress;
    use crate::model::KV_PER_CM;
    use std::f64::consts::PI;

    fn oh() -> MoleculeParams {
        MoleculeParams::oh()
    }

    fn closed_form(p: &MoleculeParams, b: f64, th: f64, wr: f64, label: StateLabel) -> f64 {
        let wl = 0.8 * p.mu_b * b / p.hbar;
        let root = (wl * wl + wr * wr - 2.0 * wl * wr * th.cos()).sqrt();
        0.5 * label.parity.sign() * p.hbar * p.delta + label.m() * p.hbar * root
    }

    #[test]
    fn label_indexing_round_trips() {
        for k in 0..8 {
            assert_eq!(StateLabel::from_index(k).index(), k);
        }
        assert_eq!(StateLabel::from_index(7), StateLabel::new(3, Parity::F));
        assert_eq!(StateLabel::new(-1, Parity::E).to_string(), "(-1/2, e)");
    }

    #[test]
    fn field_free_spectrum() {
        let p = oh();
        let e = dressed_eigh(&p, &FieldProtocol::magnetic(0.0, 0.0)).unwrap();
        let half = 0.5 * p.hbar * p.delta;
        for k in 0..8 {
            let want = if k < 4 { -half } else { half };
            assert!((e.values[k] - want).abs() < 1e-15 * half);
        }
    }

    #[test]
    fn magnetic_spectrum_matches_closed_form() {
        let p = oh();
        let (b, th, wr) = (0.1, PI / 8.0, 1e9);
        let f = FieldProtocol::magnetic(b, th).with_omega_r(wr);
        let s = labelled_spectrum(&p, &f).unwrap();
        let scale = max_abs_value(&s.eigenvalues);
        for (k, &l) in s.labels.iter().enumerate() {
            let want = closed_form(&p, b, th, wr, l);
            assert!((s.eigenvalues[k] - want).abs() < 1e-12 * scale, "{l}");
        }
        let h = dress(&p, &f).unwrap().entries;
        assert!(s.residual(&h) < 1e-12);
    }

    #[test]
    fn nearly_axial_magnetic_labels_follow_closed_form() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 1e-3);
        let e = dressed_eigh(&p, &f).unwrap();
        let s = label_states(&e, &p, &f).unwrap();
        // the lowest static e level sits on row 0 and carries M = -3/2
        assert_eq!(s.labels[0], StateLabel::new(-3, Parity::E));
        assert!(s.eigenvectors[(0, 0)].norm() > 0.999);
        assert_eq!(s.labels[7], StateLabel::new(3, Parity::F));
    }

    #[test]
    fn exactly_axial_magnetic_labels_cross_diabatically() {
        // with no transverse field the levels cross exactly at ω_r = ω_L and
        // row 0 continues to the M = +3/2 fast-rotation state
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 0.0);
        let e = dressed_eigh(&p, &f).unwrap();
        let s = label_states(&e, &p, &f).unwrap();
        assert_eq!(s.labels[0], StateLabel::new(3, Parity::E));
    }

    #[test]
    fn degenerate_static_spectrum_is_ambiguous() {
        let p = oh();
        let f = FieldProtocol::electric(2.0 * KV_PER_CM, 0.0);
        let e = dressed_eigh(&p, &f).unwrap();
        assert!(matches!(label_states(&e, &p, &f), Err(Error::AmbiguousLabel(_))));
        // sweeps still label it through the rotation generator
        let sweep = track_sweep(&p, &f, &[0.0, 1e8, 1e9]).unwrap();
        assert!(sweep.spectra.iter().all(|s| s.has_label_permutation()));
    }

    #[test]
    fn combined_fields_label_uniquely() {
        let p = oh();
        let f = FieldProtocol::new(0.1, PI / 3.0, 2.0 * KV_PER_CM, PI / 8.0, 0.0);
        let e = dressed_eigh(&p, &f).unwrap();
        let s = label_states(&e, &p, &f).unwrap();
        assert!(s.has_label_permutation());
    }

    #[test]
    fn top_electric_state_is_three_halves_f() {
        let p = oh();
        let f = FieldProtocol::electric(2.0 * KV_PER_CM, PI / 8.0);
        let sweep = track_sweep(&p, &f, &[1e3]).unwrap();
        assert_eq!(sweep.zero.labels[7], StateLabel::new(3, Parity::F));
    }

    #[test]
    fn axial_fields_give_straight_lines() {
        let p = oh();
        let f = FieldProtocol::new(0.2, 0.0, 2.0 * KV_PER_CM, 0.0, 0.0);
        let grid: Vec<f64> = (0..40).map(|k| 1e9 * k as f64).collect();
        let sweep = track_sweep(&p, &f, &grid).unwrap();
        for l in StateLabel::all() {
            let e = sweep.energy_curve(l);
            let e0 = sweep.zero.energy_of(l);
            // slope along the line is ħ times the conserved ⟨M̂⟩
            let col = sweep.zero.column_of(l);
            let slope = p.hbar * sweep.zero.m_expectation(col);
            for (k, &w) in grid.iter().enumerate() {
                assert!((e[k] - e0 - slope * w).abs() < 1e-12 * p.hbar * 4e10, "{l} at {w}");
            }
        }
    }

    #[test]
    fn magnetic_minimum_gaps() {
        let p = oh();
        let (b, th) = (0.1, PI / 8.0);
        let wl = 0.8 * p.mu_b * b / p.hbar;
        let grid: Vec<f64> = (1..=300).map(|k| 1e8 * k as f64).collect();
        let sweep = track_sweep(&p, &FieldProtocol::magnetic(b, th), &grid).unwrap();
        let events = find_spectrum_gaps(&sweep).unwrap();
        let same_parity: Vec<_> = events.iter().filter(|e| e.pair.0.parity == e.pair.1.parity).collect();
        assert_eq!(same_parity.len(), 12);
        for e in same_parity {
            let dm = (e.pair.0.m() - e.pair.1.m()).abs();
            assert!((e.omega_r / (wl * th.cos()) - 1.0).abs() < 1e-3);
            let want = dm * p.hbar * wl * th.sin();
            assert!((e.gap / want - 1.0).abs() < 1e-6);
            assert_eq!(e.kind, GapKind::AvoidedCrossing);
        }
    }

    #[test]
    fn electric_axial_crossings_are_exact() {
        let p = oh();
        let grid: Vec<f64> = (1..=200).map(|k| 2.5e8 * k as f64).collect();
        let sweep = track_sweep(&p, &FieldProtocol::electric(2.0 * KV_PER_CM, 0.0), &grid).unwrap();
        let events = find_spectrum_gaps(&sweep).unwrap();
        let scale = sweep.max_abs_eigenvalue();
        let crossings: Vec<_> = events.iter().filter(|e| e.pair.0.m_times_2 != e.pair.1.m_times_2).collect();
        assert!(!crossings.is_empty());
        for e in crossings {
            assert!(e.gap < 1e-12 * scale, "{:?}", e);
            assert_eq!(e.kind, GapKind::Crossing);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let p = oh();
        let f = FieldProtocol::magnetic(0.1, 0.3);
        assert!(track_sweep(&p, &f, &[]).is_err());
        assert!(track_sweep(&p, &f, &[2.0, 1.0]).is_err());
        assert!(track_sweep(&p, &f, &[-1.0, 1.0]).is_err());
    }
}
