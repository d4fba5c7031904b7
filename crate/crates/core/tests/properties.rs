//! Randomized invariants.

use std::f64::consts::PI;

use proptest::prelude::*;
use spinphase::berry::{berry_phase_adiabatic, gauge_invariance_check, DEFAULT_QUAD_POINTS};
use spinphase::dynamics::{lab_hamiltonian, propagate, rotating_hamiltonian, to_lab_frame, State};
use spinphase::entangle::{collective_hamiltonian, total_m, DIM};
use spinphase::hamiltonian::{instantaneous_spectrum, level, polarization, polarization_hf, energy, ReducedHamiltonian};
use spinphase::nonadiabatic::{delta_p, q_coefficient, transverse_second_order};
use spinphase::schedule::Start;
use spinphase::{Complex64, CycleSchedule, DMatrix, EulerAngles, Integrator, PulseShape, Segment, SpinRep};

fn rep(two_s: i64) -> SpinRep {
    SpinRep::new(two_s).unwrap()
}

fn max_entry(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn angles() -> impl Strategy<Value = EulerAngles> {
    (0.0..PI, -PI..PI, -PI..PI).prop_map(|(t, p, a)| EulerAngles::new(t, p, a))
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

proptest! {
    #[test]
    fn rotation_conjugates_spin_vector(two_s in 1i64..=8, e in angles()) {
        let r = rep(two_s);
        let u = r.rotation_unitary(&e);
        let rot = e.rotation_matrix();
        let s = r.sigma_complex();
        for k in 0..3 {
            let lhs = u.adjoint() * &s[k] * &u;
            let rhs = (0..3).fold(DMatrix::zeros(r.dim(), r.dim()), |acc, j| acc + &s[j] * c(rot[(k, j)]));
            prop_assert!(max_entry(&(lhs - rhs)) < 1e-10);
        }
        prop_assert!(max_entry(&(u.adjoint() * &u - DMatrix::identity(r.dim(), r.dim()))) < 1e-12);
    }

    #[test]
    fn rotations_compose(two_s in 1i64..=8, e1 in angles(), e2 in angles()) {
        let r = rep(two_s);
        let prod = r.rotation_unitary(&e1) * r.rotation_unitary(&e2);
        let e3 = EulerAngles::from_rotation_matrix(&(e1.rotation_matrix() * e2.rotation_matrix()));
        let u3 = r.rotation_unitary(&e3);
        // half-integer spins represent SO(3) only up to sign
        let res = max_entry(&(&prod - &u3)).min(max_entry(&(&prod + &u3)));
        prop_assert!(res < 1e-10, "residual {res}");
    }

    #[test]
    fn polarizations_sum_to_zero(two_s in 1i64..=8, lambda in -2.0..2.0f64) {
        let r = rep(two_s);
        let sum: f64 = r.m_values().iter().map(|&m| polarization(&r, m, lambda).unwrap()).sum();
        prop_assert!(sum.abs() < 1e-10);
    }

    #[test]
    fn reflection_symmetry(two_s in 1i64..=8, lambda in -2.0..2.0f64) {
        let r = rep(two_s);
        for m in r.m_values() {
            prop_assert!((energy(&r, m, lambda).unwrap() + energy(&r, -m, -lambda).unwrap()).abs() < 1e-10);
            prop_assert!((polarization(&r, m, lambda).unwrap() + polarization(&r, -m, -lambda).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn hellmann_feynman(two_s in 1i64..=8, lambda in -2.0..2.0f64) {
        let r = rep(two_s);
        for m in r.m_values() {
            let d = (polarization_hf(&r, m, lambda).unwrap() - polarization(&r, m, lambda).unwrap()).abs();
            prop_assert!(d < 1e-8, "m = {m}: {d}");
        }
    }

    #[test]
    fn eigenpairs_are_real_orthonormal(two_s in 1i64..=8, lambda in -2.0..2.0f64) {
        let r = rep(two_s);
        let h = ReducedHamiltonian::new(&r, lambda).unwrap();
        let spec = instantaneous_spectrum(&r, lambda).unwrap();
        let v = spec.eigvec_matrix();
        let gram = v.transpose() * &v - DMatrix::identity(r.dim(), r.dim());
        prop_assert!(gram.amax() < 1e-12);
        let sx = r.sigma_x();
        let sy = r.sigma_y_imag();
        for e in &spec.entries {
            let res = (&h.matrix * &e.eigvec - &e.eigvec * e.energy).amax();
            prop_assert!(res < 1e-12);
            // off-diagonal alignment tensor ⟨{Σx, Σz}⟩/2; the Σy ones vanish for real vectors
            let xz = (&e.eigvec.transpose() * (sx * r.sigma_z() + r.sigma_z() * sx) * &e.eigvec)[(0, 0)] / 2.0;
            let xy = (&e.eigvec.transpose() * (sx * sy + sy * sx) * &e.eigvec)[(0, 0)] / 2.0;
            prop_assert!(xz.abs() < 1e-10 && xy.abs() < 1e-10);
        }
    }

    #[test]
    fn parity_blocks_do_not_couple(two_s in 1i64..=8, lambda in -5.0..5.0f64) {
        let r = rep(two_s);
        let h = ReducedHamiltonian::new(&r, lambda).unwrap();
        for i in 0..r.dim() {
            for j in 0..r.dim() {
                if (i + j) % 2 == 1 {
                    prop_assert_eq!(h.matrix[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn delta_p_is_even_in_eta(two_s in 2i64..=8, k in 0usize..9, lambda in -1.5..1.5f64, eta in 1e-4..0.6f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let plus = delta_p(&r, m, lambda, eta).unwrap();
        let minus = delta_p(&r, m, lambda, -eta).unwrap();
        prop_assert!((plus - minus).abs() < 1e-12);
    }

    #[test]
    fn small_eta_limit(two_s in 2i64..=8, k in 0usize..9, lambda in 0.1..1.5f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let eta = 1e-3;
        let q = q_coefficient(&r, m, lambda).unwrap();
        let ratio = delta_p(&r, m, lambda, eta).unwrap() / (eta * eta);
        prop_assert!((ratio - q).abs() <= 1e-3 * q.abs().max(1.0), "{ratio} vs {q}");
    }

    #[test]
    fn transverse_cross_terms_cancel(two_s in 2i64..=8, k in 0usize..9, lambda in -1.5..1.5f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        if let Ok(t) = transverse_second_order(&r, m, lambda) {
            prop_assert!(t.cross.abs() < 1e-12);
        }
    }

    #[test]
    fn collective_hamiltonian_mixes_m_by_two(lambda in -2.0..2.0f64) {
        let h = collective_hamiltonian(lambda);
        for i in 0..DIM {
            for j in 0..DIM {
                let dm = (total_m(i) - total_m(j)).abs();
                if (dm - 1.0).abs() < 1e-9 || (dm - 3.0).abs() < 1e-9 {
                    prop_assert_eq!(h[(i, j)], 0.0);
                }
            }
        }
    }
}

fn cycle(lambda: f64, theta: f64, phi_turns: i32, alpha_half_turns: i32) -> CycleSchedule {
    CycleSchedule::from_segments(
        Start { lambda, theta, ..Start::default() },
        &[Segment::rotate(phi_turns, alpha_half_turns, 20.0, PulseShape::Blackman)],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn berry_phase_flips_under_mirror(two_s in 1i64..=6, k in 0usize..7, lambda in -1.2..1.2f64,
                                      theta in 0.1..3.0f64, nphi in -2i32..=2, nalpha in -3i32..=3) {
        prop_assume!(nphi != 0 || nalpha != 0);
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let s = cycle(lambda, theta, nphi, nalpha);
        let fwd = berry_phase_adiabatic(&r, m, &s, DEFAULT_QUAD_POINTS).unwrap().beta;
        let img = berry_phase_adiabatic(&r, m, &s.mirrored(), DEFAULT_QUAD_POINTS).unwrap().beta;
        prop_assert!((fwd + img).abs() < 1e-9);
    }

    #[test]
    fn berry_phase_ignores_field_strength(two_s in 1i64..=6, k in 0usize..7, lambda in -1.2..1.2f64, xi in 0.05..20.0f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let s = cycle(lambda, 0.7, 1, 1);
        let a = berry_phase_adiabatic(&r, m, &s, DEFAULT_QUAD_POINTS).unwrap();
        let b = berry_phase_adiabatic(&r, m, &s.with_b_scaled(xi), DEFAULT_QUAD_POINTS).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn berry_phase_quadrature_converged(two_s in 1i64..=6, k in 0usize..7, lambda in -1.2..1.2f64, theta in 0.1..3.0f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let s = cycle(lambda, theta, 1, 2);
        let a = berry_phase_adiabatic(&r, m, &s, DEFAULT_QUAD_POINTS).unwrap().beta;
        let b = berry_phase_adiabatic(&r, m, &s, 2 * DEFAULT_QUAD_POINTS).unwrap().beta;
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn loop_integral_is_gauge_invariant(two_s in 1i64..=4, k in 0usize..5, lambda in -1.0..1.0f64,
                                        a1 in -1.0..1.0f64, a2 in -1.0..1.0f64, a3 in -1.0..1.0f64) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let s = CycleSchedule::from_segments(
            Start { lambda, theta: 0.6, ..Start::default() },
            &[
                Segment { theta: Some(1.2), ..Segment::ramp(lambda + 0.3, 5.0, PulseShape::Blackman) },
                Segment::rotate(1, 1, 10.0, PulseShape::Blackman),
                Segment { theta: Some(0.6), ..Segment::ramp(lambda, 5.0, PulseShape::Blackman) },
            ],
        )
        .unwrap();
        let g = move |phi: f64, theta: f64, alpha: f64, lam: f64| {
            a1 * phi.sin() * theta.cos() + a2 * (2.0 * alpha).cos() * lam + a3 * (phi + 2.0 * alpha).sin() * lam * lam
        };
        prop_assert!(gauge_invariance_check(&r, m, &s, &g, DEFAULT_QUAD_POINTS).unwrap() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn evolution_is_unitary(two_s in 1i64..=8, seed in proptest::collection::vec(-1.0..1.0f64, 2 * 81)) {
        let r = rep(two_s);
        let n = r.dim();
        // random Hermitian drive added to the reduced Hamiltonian
        let a = DMatrix::from_fn(n, n, |i, j| Complex64::new(seed[i * 9 + j], seed[81 + i * 9 + j]));
        let drive = (&a + a.adjoint()) * c(0.5);
        let h0 = spinphase::linalg::to_complex(&ReducedHamiltonian::new(&r, 0.6).unwrap().matrix);
        let mut init = State::zeros(n);
        init[0] = c(1.0);
        for integ in [Integrator::Midpoint, Integrator::Magnus4] {
            let p = propagate(|t| &h0 + &drive * c(t.sin()), &init, 0.0, 5.0, 500, integ, |_, _, _| Ok(())).unwrap();
            prop_assert!(p.norm_drift < 1e-12, "{integ:?}: {}", p.norm_drift);
        }
    }

    #[test]
    fn rotating_frame_reproduces_lab_frame(two_s in 1i64..=4, k in 0usize..5, lambda in -1.0..1.0f64,
                                           theta in 0.2..2.8f64, phi in -PI..PI, alpha in -PI..PI) {
        let r = rep(two_s);
        let m = r.m_at(k % r.dim());
        let s = CycleSchedule::from_segments(
            Start { lambda, theta, phi, alpha, b: 1.0 },
            &[
                Segment { theta: Some(theta * 0.8), ..Segment::ramp(lambda + 0.4, 2.0, PulseShape::Blackman) },
                Segment::rotate(1, 1, 3.0, PulseShape::Blackman),
            ],
        )
        .unwrap();
        let init: State = level(&r, m, lambda).unwrap().1.map(c);
        let n = 4000;
        let rot = propagate(|t| rotating_hamiltonian(&r, &s.at(t)), &init, 0.0, s.duration, n, Integrator::Magnus4, |_, _, _| Ok(())).unwrap();
        let lab0 = to_lab_frame(&r, &s.at(0.0), &init);
        let lab = propagate(|t| lab_hamiltonian(&r, &s.at(t)), &lab0, 0.0, s.duration, n, Integrator::Magnus4, |_, _, _| Ok(())).unwrap();
        let back = to_lab_frame(&r, &s.at(s.duration), &rot.final_state);
        let d = (back - lab.final_state).norm();
        prop_assert!(d < 1e-9, "{d}");
    }
}
