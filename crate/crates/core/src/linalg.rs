//! Fixed-size complex linear algebra for the 8-level problem.
//!
//! The eigensolver is a cyclic Jacobi method for complex Hermitian matrices:
//! each step applies a unitary plane rotation that annihilates one
//! off-diagonal pair. It works on row-major slices of any order `n`, which
//! lets the same code serve the 8×8 Hamiltonians and the small cluster
//! matrices used when resolving static degeneracies.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type CMat8 = SMatrix<Complex64, 8, 8>;
pub type CVec8 = SVector<Complex64, 8>;

/// Sweep cap of the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm relative to the
/// full Frobenius norm.
pub const OFF_DIAGONAL_TOL: f64 = 1e-15;
/// Inputs whose Hermiticity defect exceeds this are rejected.
pub const HERMITIAN_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn max_abs(m: &CMat8) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Largest `|m_ij - conj(m_ji)|` relative to the largest entry.
pub fn hermiticity_defect(m: &CMat8) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0_f64;
    for i in 0..8 {
        for j in 0..8 {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

/// An eigendecomposition with ascending eigenvalues; column `k` of `vectors`
/// belongs to `values[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigh {
    pub values: [f64; 8],
    pub vectors: CMat8,
    pub sweeps: usize,
}

impl Eigh {
    pub fn vector(&self, k: usize) -> CVec8 {
        self.vectors.column(k).into_owned()
    }

    /// `V diag(f(λ)) V†`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> Complex64) -> CMat8 {
        let mut scaled = self.vectors;
        for k in 0..8 {
            let fk = f(self.values[k]);
            for i in 0..8 {
                scaled[(i, k)] *= fk;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Diagonalize an 8×8 complex Hermitian matrix.
pub fn eigh8(m: &CMat8) -> Result<Eigh> {
    let defect = hermiticity_defect(m);
    if defect > HERMITIAN_TOL || !defect.is_finite() {
        return Err(Error::NotHermitian { defect });
    }
    let mut a = [Complex64::default(); 64];
    for i in 0..8 {
        for j in 0..8 {
            // symmetrize away sub-tolerance noise
            a[i * 8 + j] = 0.5 * (m[(i, j)] + m[(j, i)].conj());
        }
    }
    let (values, vecs, sweeps) = jacobi_sorted(&mut a, 8)?;
    let mut vectors = CMat8::zeros();
    for i in 0..8 {
        for j in 0..8 {
            vectors[(i, j)] = vecs[i * 8 + j];
        }
    }
    let mut out = [0.0; 8];
    out.copy_from_slice(&values);
    Ok(Eigh { values: out, vectors, sweeps })
}

/// Jacobi diagonalization of a row-major `n×n` Hermitian matrix held in `a`.
///
/// Returns ascending eigenvalues, the row-major eigenvector matrix (columns are
/// eigenvectors, each phase-fixed so its largest component is real and
/// positive) and the number of sweeps used.
pub fn jacobi_sorted(a: &mut [Complex64], n: usize) -> Result<(Vec<f64>, Vec<Complex64>, usize)> {
    assert_eq!(a.len(), n * n);
    let mut v = vec![Complex64::default(); n * n];
    for i in 0..n {
        v[i * n + i] = c(1.0, 0.0);
    }
    let sweeps = jacobi_in_place(a, &mut v, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x * n + x].re.total_cmp(&a[y * n + y].re));
    let values: Vec<f64> = order.iter().map(|&k| a[k * n + k].re).collect();
    let mut vectors = vec![Complex64::default(); n * n];
    for (col, &k) in order.iter().enumerate() {
        let mut peak = 0.0_f64;
        for i in 0..n {
            peak = peak.max(v[i * n + k].norm());
        }
        let anchor = (0..n)
            .find(|&i| v[i * n + k].norm() >= peak * (1.0 - 1e-9))
            .unwrap_or(0);
        let z = v[anchor * n + k];
        let phase = if z.norm() > 0.0 { z.conj() / z.norm() } else { c(1.0, 0.0) };
        for i in 0..n {
            vectors[i * n + col] = v[i * n + k] * phase;
        }
    }
    Ok((values, vectors, sweeps))
}

fn off_norm(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[i * n + j].norm_sqr();
            }
        }
    }
    s.sqrt()
}

fn jacobi_in_place(a: &mut [Complex64], v: &mut [Complex64], n: usize) -> Result<usize> {
    let fro = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if fro == 0.0 {
        return Ok(0);
    }
    for sweep in 0..MAX_SWEEPS {
        if off_norm(a, n) <= OFF_DIAGONAL_TOL * fro {
            return Ok(sweep);
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = apq.norm();
                if g == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                if sweep > 3 && app.abs() + 100.0 * g == app.abs() && aqq.abs() + 100.0 * g == aqq.abs() {
                    a[p * n + q] = Complex64::default();
                    a[q * n + p] = Complex64::default();
                    continue;
                }
                rotated = true;
                let phase = apq / g;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let ph_c = phase.conj();
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * cs - akq * ph_c * sn;
                    a[k * n + q] = akp * sn + akq * ph_c * cs;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = apk * cs - aqk * phase * sn;
                    a[q * n + k] = apk * sn + aqk * phase * cs;
                }
                a[p * n + q] = Complex64::default();
                a[q * n + p] = Complex64::default();
                a[p * n + p] = c(app - t * g, 0.0);
                a[q * n + q] = c(aqq + t * g, 0.0);
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * cs - vkq * ph_c * sn;
                    v[k * n + q] = vkp * sn + vkq * ph_c * cs;
                }
            }
        }
        if !rotated {
            return Ok(sweep + 1);
        }
    }
    let off = off_norm(a, n);
    if off <= OFF_DIAGONAL_TOL * fro {
        Ok(MAX_SWEEPS)
    } else {
        Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS, off_norm: off / fro })
    }
}

/// `exp(-i H s)` for Hermitian `H` and real `s`, via the eigendecomposition.
pub fn exp_minus_i(h: &CMat8, s: f64) -> Result<CMat8> {
    let e = eigh8(h)?;
    Ok(e.apply_fn(|lambda| Complex64::from_polar(1.0, -lambda * s)))
}

/// Maximum-weight perfect matching on a square weight matrix (Hungarian
/// method). Returns, for every row, the column it is matched to.
pub fn max_weight_assignment<const N: usize>(weights: &[[f64; N]; N]) -> [usize; N] {
    // minimize cost = -weight; 1-based potentials
    let inf = f64::INFINITY;
    let mut u = [0.0_f64; N];
    let mut u0 = 0.0_f64;
    let mut v = vec![0.0_f64; N + 1];
    let mut p = vec![0_usize; N + 1];
    let mut way = vec![0_usize; N + 1];
    let cost = |i: usize, j: usize| -weights[i - 1][j - 1];
    for i in 1..=N {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; N + 1];
        let mut used = vec![false; N + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=N {
                if !used[j] {
                    let ui0 = if i0 == 0 { u0 } else { u[i0 - 1] };
                    let cur = cost(i0, j) - ui0 - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=N {
                if used[j] {
                    let pj = p[j];
                    if pj == 0 {
                        u0 += delta;
                    } else {
                        u[pj - 1] += delta;
                    }
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = [0_usize; N];
    for j in 1..=N {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}
