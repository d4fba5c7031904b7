//! Non-adiabatic corrections from the rotating-frame analysis: longitudinal (η) kernel,
//! magic couplings λ*(S,η), and second-order transverse (μ) coefficients.
//!
//! The transverse formulas assume ⟨cos²α⟩ = ⟨sin²α⟩ = 1/2 over the cycle. Schedules with
//! fast-varying α̇ are outside that contract. The magic-λ cancellation is only guaranteed
//! for cycles where α is the sole varying angle; cycles with φ̇ ≠ 0 are computed the same
//! way without that guarantee.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::berry::integrate_schedule;
use crate::error::{Error, Result};
use crate::hamiltonian::{energy, energy_derivatives, instantaneous_spectrum, polarization};
use crate::linalg::hermitian_eigenvalues;
use crate::roots::{bisect_secant, scan_bracket};
use crate::schedule::CycleSchedule;
use crate::spin::SpinRep;

/// Perturbation denominators below this are an error.
pub const GAP_ERROR: f64 = 1e-6;
/// Denominators below this (and above GAP_ERROR) flag a large correction.
pub const GAP_WARN: f64 = 1e-2;
/// Below this |η| the kernel switches to its q·η² limit.
const ETA_LIMIT: f64 = 1e-5;

/// Coriolis field ratios in the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoriolisParams {
    /// η = (cosθ φ̇ + α̇)/(γ_S B)
    pub eta: f64,
    /// μ = sinθ φ̇/(γ_S B)
    pub mu: f64,
    /// μ/(1 − η)
    pub mu_tilde: f64,
}

impl CoriolisParams {
    pub fn new(eta: f64, mu: f64) -> Result<Self> {
        if !(eta.abs() < 1.0) {
            return Err(Error::EtaOutOfRange(eta.abs()));
        }
        Ok(Self { eta, mu, mu_tilde: mu / (1.0 - eta) })
    }

    /// From field rates: θ, φ̇, α̇ and b = B/B₀ (time unit 1/(γ_S B₀)).
    pub fn from_rates(theta: f64, phi_dot: f64, alpha_dot: f64, b: f64) -> Result<Self> {
        Self::new((theta.cos() * phi_dot + alpha_dot) / b, theta.sin() * phi_dot / b)
    }
}

/// q(m,λ) = −(λ³E‴ + 3λ²E″)/6.
pub fn q_coefficient(rep: &SpinRep, m: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        rep.index_of(m)?;
        return Ok(0.0);
    }
    let d = energy_derivatives(rep, m, lambda)?;
    Ok(-(lambda.powi(3) * d.d3 + 3.0 * lambda * lambda * d.d2) / 6.0)
}

/// Δp(m,λ,η) = [(1+η)E(m,λ/(1+η)) − (1−η)E(m,λ/(1−η))]/(2η) − p(m,λ).
///
/// Even in η. For |η| < 1e-5 the limit q(m,λ)·η² is returned.
pub fn delta_p(rep: &SpinRep, m: f64, lambda: f64, eta: f64) -> Result<f64> {
    if !(eta.abs() < 1.0) {
        return Err(Error::EtaOutOfRange(eta.abs()));
    }
    if lambda == 0.0 {
        rep.index_of(m)?;
        return Ok(0.0);
    }
    if eta.abs() < ETA_LIMIT {
        return Ok(q_coefficient(rep, m, lambda)? * eta * eta);
    }
    let e = eta.abs();
    let plus = (1.0 + e) * energy(rep, m, lambda / (1.0 + e))?;
    let minus = (1.0 - e) * energy(rep, m, lambda / (1.0 - e))?;
    Ok((plus - minus) / (2.0 * e) - polarization(rep, m, lambda)?)
}

/// Polynomial fits of λ*(S,η) for S = 2 and S = 4.
pub fn magic_fit(two_s: u32, eta: f64) -> Option<f64> {
    let c: [f64; 5] = match two_s {
        4 => [0.838213, -0.0837823, -0.0431478, -0.0231887, -0.0207986],
        8 => [0.509982, -0.0900927, -0.0349985, -0.0436495, 0.0373634],
        _ => return None,
    };
    let x = eta * eta;
    Some(c.iter().rev().fold(0.0, |acc, ci| acc * x + ci))
}

/// Magic coupling λ*(S,η): root of Δp(0,λ,η) = 0.
///
/// Brackets [0.3, 1.2] for S = 2 and [0.2, 0.8] for S = 4. Other integer spins scan
/// (0.02, 2] for the first sign change. The root is located on Δp/η² (q at η = 0),
/// which has the same zeros and stays well scaled as η → 0.
pub fn magic_lambda(rep: &SpinRep, eta: f64) -> Result<f64> {
    if rep.two_s() % 2 != 0 || rep.two_s() == 0 {
        return Err(Error::InvalidArgument("magic lambda needs an integer spin S >= 1 with an m = 0 level".into()));
    }
    if !(eta.abs() < 1.0) {
        return Err(Error::EtaOutOfRange(eta.abs()));
    }
    let kernel = |l: f64| -> f64 {
        let v = if eta.abs() < ETA_LIMIT {
            q_coefficient(rep, 0.0, l)
        } else {
            delta_p(rep, 0.0, l, eta).map(|d| d / (eta * eta))
        };
        v.unwrap_or(f64::NAN)
    };
    let (lo, hi) = match rep.two_s() {
        4 => (0.3, 1.2),
        8 => (0.2, 0.8),
        _ => scan_bracket(kernel, 0.02, 2.0, 200).ok_or(Error::NoRootInBracket { lo: 0.02, hi: 2.0 })?,
    };
    bisect_secant(kernel, lo, hi, 1e-13)
}

/// Second-order transverse energy shift and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransverseShift {
    /// E⊥⁽²⁾ = (E_x⁽²⁾ + E_y⁽²⁾)/2
    pub e_perp: f64,
    pub e_x: f64,
    pub e_y: f64,
    /// Σx–Σy cross contribution (vanishes for real eigenvectors).
    pub cross: f64,
    /// Smallest |E(m) − E(n)| over opposite-parity levels.
    pub min_gap: f64,
    pub large_correction: bool,
}

/// A transverse coefficient with its large-correction flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flagged {
    pub value: f64,
    pub large_correction: bool,
}

struct Couplings {
    // (E_m − E_n, ⟨n|Σx|m⟩, b_n) with ⟨n|Σy|m⟩ = i·b_n
    terms: Vec<(f64, f64, f64)>,
    min_gap: f64,
}

fn couplings(rep: &SpinRep, m: f64, lambda: f64) -> Result<Couplings> {
    let k = rep.index_of(m)?;
    let spec = instantaneous_spectrum(rep, lambda)?;
    let me = &spec.entries[k];
    let sx_m = rep.sigma_x() * &me.eigvec;
    let sy_m = rep.sigma_y_imag() * &me.eigvec;
    let mut terms = Vec::new();
    let mut min_gap = f64::INFINITY;
    for (n, other) in spec.entries.iter().enumerate() {
        if (n + k) % 2 == 0 {
            continue;
        }
        let gap = me.energy - other.energy;
        if gap.abs() < GAP_ERROR {
            return Err(Error::NearDegeneracy { m, n: other.m, gap: gap.abs() });
        }
        min_gap = min_gap.min(gap.abs());
        terms.push((gap, other.eigvec.dot(&sx_m), other.eigvec.dot(&sy_m)));
    }
    Ok(Couplings { terms, min_gap })
}

/// E⊥⁽²⁾(m,λ) by sum over states with odd |n − m|.
pub fn transverse_second_order(rep: &SpinRep, m: f64, lambda: f64) -> Result<TransverseShift> {
    let c = couplings(rep, m, lambda)?;
    let (mut ex, mut ey, mut cross) = (0.0, 0.0, 0.0);
    for &(gap, a, b) in &c.terms {
        ex += a * a / gap;
        ey += b * b / gap;
        let x = Complex64::new(a, 0.0);
        let y = Complex64::new(0.0, b);
        cross += 2.0 * (x.conj() * y).re / gap;
    }
    Ok(TransverseShift {
        e_perp: 0.5 * (ex + ey),
        e_x: ex,
        e_y: ey,
        cross,
        min_gap: c.min_gap,
        large_correction: c.min_gap < GAP_WARN,
    })
}

/// E⊥⁽²⁾ from the auxiliary spectra of H(λ) − μΣ_i, Richardson-extrapolated to μ → 0.
pub fn transverse_second_order_aux(rep: &SpinRep, m: f64, lambda: f64) -> Result<TransverseShift> {
    let k = rep.index_of(m)?;
    let spec = instantaneous_spectrum(rep, lambda)?;
    let e0 = spec.entries[k].energy;
    let mut gap_all = f64::INFINITY;
    let mut min_gap = f64::INFINITY;
    for (n, other) in spec.entries.iter().enumerate() {
        if n == k {
            continue;
        }
        let g = (e0 - other.energy).abs();
        gap_all = gap_all.min(g);
        if (n + k) % 2 == 1 {
            if g < GAP_ERROR {
                return Err(Error::NearDegeneracy { m, n: other.m, gap: g });
            }
            min_gap = min_gap.min(g);
        }
    }
    let mu1 = 1e-2 * gap_all.min(1.0);
    let h = (rep.sigma_z() + rep.sigma_x_squared() * lambda).map(|x| Complex64::new(x, 0.0));
    let [sx, sy, _] = rep.sigma_complex();
    let shift = |op: &DMatrix<Complex64>, mu: f64| -> Result<f64> {
        let ev = hermitian_eigenvalues(&(&h - op * Complex64::new(mu, 0.0)))?;
        let nearest = ev.iter().copied().min_by(|a, b| (a - e0).abs().total_cmp(&(b - e0).abs())).unwrap();
        Ok((nearest - e0) / (mu * mu))
    };
    let extrapolate = |op: &DMatrix<Complex64>| -> Result<f64> {
        // E(μ) is even in μ: two Richardson levels remove the μ² and μ⁴ terms
        let (s1, s2, s4) = (shift(op, mu1)?, shift(op, 2.0 * mu1)?, shift(op, 4.0 * mu1)?);
        let (r1, r2) = ((4.0 * s1 - s2) / 3.0, (4.0 * s2 - s4) / 3.0);
        Ok((16.0 * r1 - r2) / 15.0)
    };
    let ex = extrapolate(&sx)?;
    let ey = extrapolate(&sy)?;
    Ok(TransverseShift {
        e_perp: 0.5 * (ex + ey),
        e_x: ex,
        e_y: ey,
        cross: 0.0,
        min_gap,
        large_correction: min_gap < GAP_WARN,
    })
}

/// p⁽²⁾(m,λ) = (1 + λ∂λ)E⊥⁽²⁾, derivative by central differences with one Richardson level.
pub fn p2_coefficient(rep: &SpinRep, m: f64, lambda: f64) -> Result<Flagged> {
    let base = transverse_second_order(rep, m, lambda)?;
    if lambda == 0.0 {
        return Ok(Flagged { value: base.e_perp, large_correction: base.large_correction });
    }
    let f = |l: f64| transverse_second_order(rep, m, l).map(|t| t.e_perp);
    let h = 1e-3 * lambda.abs().max(1.0);
    let d = |h: f64| -> Result<f64> { Ok((f(lambda + h)? - f(lambda - h)?) / (2.0 * h)) };
    let deriv = (4.0 * d(h / 2.0)? - d(h)?) / 3.0;
    Ok(Flagged { value: base.e_perp + lambda * deriv, large_correction: base.large_correction })
}

/// C_xy(m,λ) = Im⟨ψ_y⁽¹⁾|ψ_x⁽¹⁾⟩ with ψ_i⁽¹⁾ = Σ_n ⟨n|Σ_i|m⟩/(E_m − E_n) |n⟩.
pub fn cxy_coefficient(rep: &SpinRep, m: f64, lambda: f64) -> Result<Flagged> {
    let c = couplings(rep, m, lambda)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(gap, a, b) in &c.terms {
        let y = Complex64::new(0.0, b);
        acc += y.conj() * a / (gap * gap);
    }
    Ok(Flagged { value: acc.im, large_correction: c.min_gap < GAP_WARN })
}

/// Rotating-frame longitudinal dynamical phases of one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LongitudinalPhase {
    /// φ̃(η) = −∫ b(1−η)E(m, λ/(1−η)) dt
    pub full: f64,
    /// Same with η → −η (the image cycle).
    pub full_mirror: f64,
    /// [φ̃(η) − φ̃(−η)]/2, all odd orders in η.
    pub odd: f64,
    /// [φ̃(η) + φ̃(−η)]/2, all even orders in η.
    pub even: f64,
    /// First-order part ∫ b η p dt, equal to β − φ(m).
    pub first_order: f64,
}

/// Longitudinal phase with η(t) = (cosθ φ̇ + α̇)/b read from the schedule.
pub fn longitudinal_phase(rep: &SpinRep, m: f64, schedule: &CycleSchedule, quad_points: usize) -> Result<LongitudinalPhase> {
    rep.index_of(m)?;
    let phase = |sign: f64| {
        integrate_schedule(schedule, quad_points, |s| {
            let eta = sign * s.eta();
            if !(eta.abs() < 1.0) {
                return Err(Error::EtaOutOfRange(eta.abs()));
            }
            Ok(-s.b * (1.0 - eta) * energy(rep, m, s.lambda / (1.0 - eta))?)
        })
    };
    let full = phase(1.0)?;
    let full_mirror = phase(-1.0)?;
    let first_order = integrate_schedule(schedule, quad_points, |s| {
        let eta = s.eta();
        if eta == 0.0 {
            return Ok(0.0);
        }
        Ok(s.b * eta * polarization(rep, m, s.lambda)?)
    })?;
    Ok(LongitudinalPhase {
        full,
        full_mirror,
        odd: 0.5 * (full - full_mirror),
        even: 0.5 * (full + full_mirror),
        first_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::berry::{berry_phase_adiabatic, DEFAULT_QUAD_POINTS};
    use crate::schedule::{PulseShape, Segment, Start};
    use std::f64::consts::PI;

    fn rep(two_s: i64) -> SpinRep {
        SpinRep::new(two_s).unwrap()
    }

    #[test]
    fn q_vanishes_at_zero_lambda() {
        for two_s in 1..=8 {
            let r = rep(two_s);
            for m in r.m_values() {
                assert_eq!(q_coefficient(&r, m, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn q_matches_two_level_closed_form() {
        let r = rep(4);
        for k in 1..=14 {
            let l = 0.1 * k as f64;
            let q = 9.0 * l * l + 4.0;
            for sgn in [1.0, -1.0] {
                let e2 = sgn * 18.0 / q.powf(1.5);
                let e3 = sgn * (-486.0 * l) / q.powf(2.5);
                let expect = -(l.powi(3) * e3 + 3.0 * l * l * e2) / 6.0;
                let got = q_coefficient(&r, sgn, l).unwrap();
                assert!((got - expect).abs() < 1e-6, "m={sgn} l={l}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn q_changes_sign_for_m0() {
        let r = rep(4);
        assert!(q_coefficient(&r, 0.0, 0.6).unwrap().signum() != q_coefficient(&r, 0.0, 1.0).unwrap().signum());
    }

    #[test]
    fn delta_p_small_eta_limit() {
        let r = rep(4);
        for (m, l) in [(0.0, 0.5), (1.0, 1.0), (-2.0, 0.7), (2.0, -1.3)] {
            let q = q_coefficient(&r, m, l).unwrap();
            let d = delta_p(&r, m, l, 1e-4).unwrap();
            assert!((d - q * 1e-8).abs() < 1e-2 * (q * 1e-8).abs(), "m={m} l={l}");
        }
    }

    #[test]
    fn delta_p_even_and_zero_at_lambda_zero() {
        let r = rep(6);
        for m in r.m_values() {
            assert_eq!(delta_p(&r, m, 0.0, 0.3).unwrap(), 0.0);
            let a = delta_p(&r, m, 0.9, 0.37).unwrap();
            let b = delta_p(&r, m, 0.9, -0.37).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(delta_p(&r, 0.0, 1.0, 1.0), Err(Error::EtaOutOfRange(_))));
    }

    #[test]
    fn magic_values() {
        let l2 = magic_lambda(&rep(4), 0.0).unwrap();
        assert!((l2 - 0.838213).abs() < 1e-4);
        let l4 = magic_lambda(&rep(8), 0.0).unwrap();
        assert!((l4 - 0.509982).abs() < 1e-4);
        let l2h = magic_lambda(&rep(4), 0.5).unwrap();
        assert!((l2h - 0.814127).abs() < 1e-3);
        assert!(delta_p(&rep(4), 0.0, l2h, 0.5).unwrap().abs() < 1e-10);
        assert!(magic_lambda(&rep(3), 0.1).is_err());
        // S = 3 through the scanning bracket
        let l3 = magic_lambda(&rep(6), 0.2).unwrap();
        assert!(delta_p(&rep(6), 0.0, l3, 0.2).unwrap().abs() < 1e-10);
    }

    #[test]
    fn magic_fit_endpoints() {
        assert_eq!(magic_fit(4, 0.0), Some(0.838213));
        assert!((magic_fit(4, 0.5).unwrap() - 0.814127).abs() < 1e-6);
        assert_eq!(magic_fit(6, 0.1), None);
    }

    #[test]
    fn transverse_at_zero_lambda() {
        // H(0) − μΣx has eigenvalues m√(1+μ²): E_x⁽²⁾ = E_y⁽²⁾ = m/2
        let r = rep(4);
        for m in r.m_values() {
            let t = transverse_second_order(&r, m, 0.0).unwrap();
            assert!((t.e_x - m / 2.0).abs() < 1e-12);
            assert!((t.e_y - m / 2.0).abs() < 1e-12);
            assert!((t.e_perp - m / 2.0).abs() < 1e-12);
            assert_eq!(t.cross, 0.0);
            let a = transverse_second_order_aux(&r, m, 0.0).unwrap();
            assert!((a.e_perp - t.e_perp).abs() < 1e-6);
        }
        assert!((transverse_second_order(&r, 2.0, 0.0).unwrap().e_perp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_over_states_matches_auxiliary_spectra() {
        for two_s in [1, 2, 3, 4, 6, 8] {
            let r = rep(two_s);
            for &l in &[-1.1, 0.35, 0.75, 1.2] {
                for m in r.m_values() {
                    let a = transverse_second_order(&r, m, l).unwrap();
                    if a.min_gap < 1e-3 {
                        continue;
                    }
                    let b = transverse_second_order_aux(&r, m, l).unwrap();
                    let tol = 1e-6 * a.e_perp.abs().max(1.0);
                    assert!((a.e_perp - b.e_perp).abs() < tol, "S={} m={m} l={l}: {} vs {}", r.s(), a.e_perp, b.e_perp);
                    assert!(a.cross.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn m1_grows_as_doublet_closes() {
        let r = rep(4);
        let peak = (0..=60)
            .map(|k| 1.6 + 0.01 * k as f64)
            .map(|l| transverse_second_order(&r, 1.0, l).unwrap().e_perp.abs())
            .fold(0.0, f64::max);
        assert!(peak > 100.0, "peak {peak}");
        for k in 0..=10 {
            let l = 0.7 + 0.05 * k as f64;
            assert!(p2_coefficient(&r, 0.0, l).unwrap().value.abs() < 10.0);
            assert!(cxy_coefficient(&r, 0.0, l).unwrap().value.abs() < 10.0);
        }
    }

    #[test]
    fn p2_at_zero_lambda_and_cxy_convention() {
        let r = rep(4);
        assert_eq!(p2_coefficient(&r, 1.0, 0.0).unwrap().value, transverse_second_order(&r, 1.0, 0.0).unwrap().e_perp);
        for m in r.m_values() {
            assert!((cxy_coefficient(&r, m, 0.0).unwrap().value + m / 2.0).abs() < 1e-12);
        }
        let half = rep(1);
        let c = cxy_coefficient(&half, 0.5, 0.8).unwrap();
        assert!(c.value.is_finite());
        assert!((c.value + 0.25).abs() < 1e-12);
    }

    #[test]
    fn longitudinal_zero_eta() {
        let r = rep(4);
        let s = CycleSchedule::from_segments(Start { lambda: 0.6, ..Start::default() }, &[Segment::hold(4.0)]).unwrap();
        let lp = longitudinal_phase(&r, 1.0, &s, 257).unwrap();
        assert_eq!(lp.first_order, 0.0);
        let e = energy(&r, 1.0, 0.6).unwrap();
        assert!((lp.full + 4.0 * e).abs() < 1e-12);
    }

    #[test]
    fn longitudinal_first_order_is_berry_minus_winding() {
        let r = rep(4);
        let s = CycleSchedule::from_segments(
            Start { lambda: 1.0, ..Start::default() },
            &[Segment::rotate(0, 1, 10.0 * PI, PulseShape::Linear)],
        )
        .unwrap();
        let lp = longitudinal_phase(&r, 0.0, &s, DEFAULT_QUAD_POINTS).unwrap();
        let b = berry_phase_adiabatic(&r, 0.0, &s, DEFAULT_QUAD_POINTS).unwrap();
        assert!((lp.first_order - b.geometric).abs() < 1e-10);
        // constant η = 0.1: odd part beyond first order ≈ π q(0,1) η²
        let q = q_coefficient(&r, 0.0, 1.0).unwrap();
        let excess = lp.odd - b.geometric;
        assert!((excess - PI * q * 0.01).abs() < 0.05 * (PI * q * 0.01).abs(), "{excess} vs {}", PI * q * 0.01);
    }

    #[test]
    fn magic_coupling_cancels_odd_orders() {
        let r = rep(4);
        let eta = 0.2;
        let l = magic_lambda(&r, eta).unwrap();
        let s = CycleSchedule::from_segments(
            Start { lambda: l, ..Start::default() },
            &[Segment::rotate(0, 1, PI / eta, PulseShape::Linear)],
        )
        .unwrap();
        let lp = longitudinal_phase(&r, 0.0, &s, DEFAULT_QUAD_POINTS).unwrap();
        let b = berry_phase_adiabatic(&r, 0.0, &s, DEFAULT_QUAD_POINTS).unwrap();
        assert!((lp.odd - b.geometric).abs() < 1e-9);
    }

    #[test]
    fn eta_out_of_range_is_an_error() {
        let s = CycleSchedule::from_segments(Start::default(), &[Segment::rotate(0, 1, 1.0, PulseShape::Linear)]).unwrap();
        assert!(matches!(longitudinal_phase(&rep(4), 0.0, &s, 65), Err(Error::EtaOutOfRange(_))));
        assert!(CoriolisParams::new(1.2, 0.0).is_err());
        let c = CoriolisParams::from_rates(PI / 3.0, 0.2, 0.1, 1.0).unwrap();
        assert!((c.eta - 0.2).abs() < 1e-15);
        assert!((c.mu_tilde - c.mu / 0.8).abs() < 1e-15);
    }
}
