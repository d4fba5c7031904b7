//! Adiabatic Berry phase of a parameter cycle and the Abelian gauge field.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::polarization;
use crate::linalg::wrap_phase;
use crate::quadrature::simpson;
use crate::schedule::{CycleSchedule, ScheduleState};
use crate::spin::SpinRep;

pub const DEFAULT_QUAD_POINTS: usize = 4097;
const MIN_NODES_PER_PIECE: usize = 33;

/// Berry phase β(m), un-wrapped, with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerryPhase {
    /// β(m) = −∫(m − p cosθ)φ̇ dt − ∫(m − p)α̇ dt.
    pub beta: f64,
    /// β reduced to (−π, π].
    pub beta_mod: f64,
    /// Winding phase φ(m) = −m(Δφ + Δα).
    pub winding: f64,
    /// β − φ(m) = ∫p cosθ φ̇ dt + ∫p α̇ dt.
    pub geometric: f64,
}

/// Gauge field components (A_φ, A_α) at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeField {
    pub a_phi: f64,
    pub a_alpha: f64,
}

/// A_φ = −m + p cosθ, A_α = −m + p.
pub fn gauge_field(rep: &SpinRep, m: f64, lambda: f64, theta: f64) -> Result<GaugeField> {
    let p = polarization(rep, m, lambda)?;
    Ok(GaugeField { a_phi: -m + p * theta.cos(), a_alpha: -m + p })
}

/// A_α on the sphere chart λ = −2 cot θ̃, 0 < θ̃ < π.
pub fn gauge_field_sphere(rep: &SpinRep, m: f64, theta_tilde: f64) -> Result<f64> {
    if !(theta_tilde > 0.0 && theta_tilde < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("theta_tilde = {theta_tilde} must lie strictly inside (0, pi)")));
    }
    let lambda = sphere_lambda(theta_tilde);
    Ok(polarization(rep, m, lambda)? - m)
}

/// λ = −2 cot θ̃.
pub fn sphere_lambda(theta_tilde: f64) -> f64 {
    -2.0 * theta_tilde.cos() / theta_tilde.sin()
}

/// Integrate `f` over the schedule, Simpson on each piece between breakpoints with
/// nodes allocated in proportion to piece length.
pub(crate) fn integrate_schedule<F>(schedule: &CycleSchedule, quad_points: usize, mut f: F) -> Result<f64>
where
    F: FnMut(&ScheduleState) -> Result<f64>,
{
    let bp = schedule.breakpoints();
    let total = schedule.duration;
    let mut acc = 0.0;
    let mut err = None;
    for w in bp.windows(2) {
        let (a, b) = (w[0], w[1]);
        let nodes = ((quad_points as f64) * (b - a) / total).ceil() as usize;
        acc += simpson(
            |t| match f(&schedule.at(t)) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
            nodes.max(MIN_NODES_PER_PIECE),
        );
    }
    match err {
        Some(e) => Err(e),
        None => Ok(acc),
    }
}

fn validate(rep: &SpinRep, m: f64, schedule: &CycleSchedule) -> Result<()> {
    rep.index_of(m)?;
    schedule.check_boundary()
}

/// β(m) for an adiabatic cycle. Never reads b(t).
pub fn berry_phase_adiabatic(rep: &SpinRep, m: f64, schedule: &CycleSchedule, quad_points: usize) -> Result<BerryPhase> {
    validate(rep, m, schedule)?;
    let geometric = integrate_schedule(schedule, quad_points, |s| {
        if s.phi_dot == 0.0 && s.alpha_dot == 0.0 {
            return Ok(0.0);
        }
        let p = polarization(rep, m, s.lambda)?;
        Ok(p * s.theta.cos() * s.phi_dot + p * s.alpha_dot)
    })?;
    let winding = -m * schedule.winding_angle();
    let beta = winding + geometric;
    Ok(BerryPhase { beta, beta_mod: wrap_phase(beta), winding, geometric })
}

/// A point of the (θ, φ, α, λ) parameter space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugePoint {
    pub phi: f64,
    pub theta: f64,
    pub alpha: f64,
    pub lambda: f64,
}

/// Scalar gauge function g(φ, θ, α, λ), 2π-periodic in φ and π-periodic in α.
pub trait GaugeFunction {
    fn value(&self, x: &GaugePoint) -> f64;

    /// (∂φ, ∂θ, ∂α, ∂λ) g. Default: fourth-order central differences.
    fn gradient(&self, x: &GaugePoint) -> [f64; 4] {
        let h = 1e-3;
        let mut out = [0.0; 4];
        for (k, o) in out.iter_mut().enumerate() {
            let at = |d: f64| {
                let mut y = *x;
                match k {
                    0 => y.phi += d,
                    1 => y.theta += d,
                    2 => y.alpha += d,
                    _ => y.lambda += d,
                }
                self.value(&y)
            };
            *o = (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
        }
        out
    }
}

impl<F: Fn(f64, f64, f64, f64) -> f64> GaugeFunction for F {
    fn value(&self, x: &GaugePoint) -> f64 {
        self(x.phi, x.theta, x.alpha, x.lambda)
    }
}

/// |β_g − β| where β_g integrates the gauge-shifted field A + ∇g along the same cycle.
pub fn gauge_invariance_check(
    rep: &SpinRep,
    m: f64,
    schedule: &CycleSchedule,
    g: &dyn GaugeFunction,
    quad_points: usize,
) -> Result<f64> {
    let beta = berry_phase_adiabatic(rep, m, schedule, quad_points)?.beta;
    let gauged = integrate_schedule(schedule, quad_points, |s| {
        let a = gauge_field(rep, m, s.lambda, s.theta)?;
        let x = GaugePoint { phi: s.phi, theta: s.theta, alpha: s.alpha, lambda: s.lambda };
        let [gp, gt, ga, gl] = g.gradient(&x);
        Ok((a.a_phi + gp) * s.phi_dot + gt * s.theta_dot + (a.a_alpha + ga) * s.alpha_dot + gl * s.lambda_dot)
    })?;
    Ok((gauged - beta).abs())
}
