use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use ohphase::dressing::{dress, m_hat, DressingFrequencies};
use ohphase::floquet_pt::{pt2_formula, PtOptions};
use ohphase::linalg::{eigh8, hermiticity_defect, max_abs, max_weight_assignment, CMat8};
use ohphase::model::{build_hamiltonian, decompose_monochromatic, frequency_scale, KV_PER_CM};
use ohphase::phase::phases_at;
use ohphase::{FieldProtocol, MoleculeParams};

fn protocol() -> impl Strategy<Value = FieldProtocol> {
    (0.0..1.5f64, 0.0..PI, 0.0..5.0f64, 0.0..PI, 0.05..5.0f64).prop_map(|(b, tm, e, te, w)| {
        let f = FieldProtocol::new(b, tm, e * KV_PER_CM, te, 0.0);
        f.with_omega_r(w * frequency_scale(&MoleculeParams::oh(), &f))
    })
}

fn hermitian() -> impl Strategy<Value = CMat8> {
    proptest::collection::vec(-1.0..1.0f64, 128).prop_map(|v| {
        let a = CMat8::from_fn(|i, j| Complex64::new(v[8 * i + j], v[64 + 8 * i + j]));
        (a + a.adjoint()) * Complex64::new(0.5, 0.0)
    })
}

/// Unitary from the exponential of a random Hermitian generator.
fn unitary() -> impl Strategy<Value = CMat8> {
    hermitian().prop_map(|g| eigh8(&g).unwrap().apply_fn(|x| Complex64::from_polar(1.0, -3.0 * x)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hamiltonian_is_hermitian_and_periodic(f in protocol(), t in 0.0..1.0f64) {
        let p = MoleculeParams::oh();
        let period = 2.0 * PI / f.omega_r;
        let h = build_hamiltonian(&p, &f, t * period).entries;
        let scale = max_abs(&h);
        prop_assert!(hermiticity_defect(&h) <= 1e-14 * scale);
        let later = build_hamiltonian(&p, &f, (t + 1.0) * period).entries;
        prop_assert!(max_abs(&(h - later)) <= 1e-9 * scale);
    }

    #[test]
    fn monochromatic_parts_reconstruct(f in protocol(), t in 0.0..1.0f64) {
        let p = MoleculeParams::oh();
        let time = t * 2.0 * PI / f.omega_r;
        let parts = decompose_monochromatic(&p, &f).unwrap();
        let h = build_hamiltonian(&p, &f, time).entries;
        prop_assert!(max_abs(&(parts.reconstruct(f.omega_r, time) - h)) <= 1e-12 * max_abs(&h));
    }

    #[test]
    fn dressing_removes_time_dependence(f in protocol(), t in 0.0..1.0f64) {
        let p = MoleculeParams::oh();
        let d = dress(&p, &f).unwrap();
        prop_assert!(d.residual < 1e-12);
        // W† H(t) W - i hbar W† dW/dt = H_d, with W = exp(-i omega_r M t)
        let time = t * 2.0 * PI / f.omega_r;
        let w = DressingFrequencies::new(f.omega_r).w(time);
        let rotated = w.adjoint() * build_hamiltonian(&p, &f, time).entries * w
            - m_hat() * Complex64::new(-p.hbar * f.omega_r, 0.0);
        prop_assert!(max_abs(&(rotated - d.entries)) <= 1e-12 * max_abs(&d.entries));
    }

    #[test]
    fn eigenvalues_are_unitarily_invariant(h in hermitian(), u in unitary()) {
        let a = eigh8(&h).unwrap();
        let b = eigh8(&(u * h * u.adjoint())).unwrap();
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_decomposition_is_consistent(h in hermitian()) {
        let e = eigh8(&h).unwrap();
        let trace: f64 = (0..8).map(|i| h[(i, i)].re).sum();
        prop_assert!((trace - e.values.iter().sum::<f64>()).abs() < 1e-12);
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let v = e.vectors;
        prop_assert!(max_abs(&(v.adjoint() * v - CMat8::identity())) < 1e-13);
        let back = e.apply_fn(|x| Complex64::new(x, 0.0));
        prop_assert!(max_abs(&(back - h)) < 1e-13);
    }

    #[test]
    fn assignment_is_a_permutation(w in proptest::collection::vec(0.0..1.0f64, 64)) {
        let weights: [[f64; 8]; 8] = std::array::from_fn(|i| std::array::from_fn(|j| w[8 * i + j]));
        let a = max_weight_assignment(&weights);
        let mut seen = [false; 8];
        for &j in &a {
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
        // no pairwise swap improves the total
        for i in 0..8 {
            for k in (i + 1)..8 {
                let now = weights[i][a[i]] + weights[k][a[k]];
                let swapped = weights[i][a[k]] + weights[k][a[i]];
                prop_assert!(swapped <= now + 1e-12);
            }
        }
    }

    #[test]
    fn second_order_phase_is_even_in_angles(tm in -0.3..0.3f64, te in -0.3..0.3f64, fix in any::<bool>()) {
        let (d, wl, we) = (1.043e10, 7.04e10, 1.05e10);
        let o = PtOptions { corrected_electric_denominator: fix, pt3_omega_l_squared: false };
        let v = pt2_formula(d, wl, we, tm, te, o);
        prop_assert_eq!(v, pt2_formula(d, wl, we, -tm, te, o));
        prop_assert_eq!(v, pt2_formula(d, wl, we, tm, -te, o));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn phases_reflect_about_zero(f in protocol()) {
        let rec = phases_at(&MoleculeParams::oh(), &f).unwrap();
        prop_assert!(rec.reflection_defect() < 1e-8, "defect {}", rec.reflection_defect());
    }

    #[test]
    fn pure_magnetic_phases_ignore_parity(b in 0.05..1.5f64, tm in 0.05..3.0f64, w in 0.05..5.0f64) {
        let f0 = FieldProtocol::magnetic(b, tm);
        let f = f0.with_omega_r(w * frequency_scale(&MoleculeParams::oh(), &f0));
        let g = phases_at(&MoleculeParams::oh(), &f).unwrap().geometric();
        for m in 0..4 {
            prop_assert!((g[m] - g[m + 4]).abs() < 1e-10);
        }
    }
}
