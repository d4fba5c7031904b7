//! Time-dependent Schrödinger integration in the lab and rotating frames, ramp
//! fidelity, and geometric-phase extraction from mirror cycles.
//!
//! Time is measured in 1/(γ_S B₀) and b(t) = B(t)/B₀ multiplies the static Hamiltonian.

use std::str::FromStr;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::berry::{berry_phase_adiabatic, integrate_schedule, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::hamiltonian::{energy, instantaneous_spectrum, labeled_spectrum, level, polarization, DEFAULT_GRID_STEP};
use crate::linalg::{expm_hermitian, hermitian_residual, max_abs, to_complex, wrap_phase};
use crate::schedule::{CycleSchedule, ScheduleState};
use crate::spin::{EulerAngles, SpinRep};

pub use crate::schedule::{blackman, PulseShape};

pub type State = DVector<Complex64>;

pub const DEFAULT_STEPS_PER_UNIT: f64 = 200.0;
/// Leakage above this marks a phase extraction as untrusted.
pub const LEAKAGE_WARN: f64 = 0.01;
const HERMITIAN_TOL: f64 = 1e-10;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One-step propagator rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    /// exp(−i H(t + dt/2) dt), second order.
    #[default]
    Midpoint,
    /// Two-point Gauss Magnus expansion with its commutator term, fourth order.
    Magnus4,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "midpoint" => Ok(Self::Midpoint),
            "magnus4" => Ok(Self::Magnus4),
            _ => Err(Error::InvalidArgument(format!("unknown integrator '{s}' (midpoint|magnus4)"))),
        }
    }
}

fn checked<H: Fn(f64) -> DMatrix<Complex64>>(h: &H, t: f64) -> Result<DMatrix<Complex64>> {
    let m = h(t);
    let residual = hermitian_residual(&m);
    if residual > HERMITIAN_TOL * max_abs(&m).max(1.0) || m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonHermitian { t, residual });
    }
    Ok(m)
}

/// Propagator over [t, t + dt].
pub fn step_propagator<H>(h: &H, t: f64, dt: f64, integrator: Integrator) -> Result<DMatrix<Complex64>>
where
    H: Fn(f64) -> DMatrix<Complex64>,
{
    match integrator {
        Integrator::Midpoint => expm_hermitian(&checked(h, t + 0.5 * dt)?, dt),
        Integrator::Magnus4 => {
            let c = 3f64.sqrt() / 6.0;
            let h1 = checked(h, t + (0.5 - c) * dt)?;
            let h2 = checked(h, t + (0.5 + c) * dt)?;
            // Ω = −i dt K with K = (H1 + H2)/2 − i (√3/12) dt [H2, H1]
            let comm = &h2 * &h1 - &h1 * &h2;
            let k = (&h1 + &h2) * Complex64::new(0.5, 0.0) - comm * (I * (3f64.sqrt() / 12.0 * dt));
            expm_hermitian(&k, dt)
        }
    }
}

/// Outcome of a fixed-step propagation.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub final_state: State,
    /// | ‖ψ(T)‖ − ‖ψ(0)‖ |
    pub norm_drift: f64,
    pub steps: usize,
}

/// Propagate `initial` over [t0, t0 + duration] in `steps` equal steps. The observer sees
/// the state after every step (step index from 1, time at the step end).
pub fn propagate<H, O>(
    h: H,
    initial: &State,
    t0: f64,
    duration: f64,
    steps: usize,
    integrator: Integrator,
    mut observer: O,
) -> Result<Propagation>
where
    H: Fn(f64) -> DMatrix<Complex64>,
    O: FnMut(usize, f64, &State) -> Result<()>,
{
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    let dt = duration / steps as f64;
    let mut psi = initial.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        psi = step_propagator(&h, t, dt, integrator)? * psi;
        observer(k + 1, t0 + (k + 1) as f64 * dt, &psi)?;
    }
    let norm_drift = (psi.norm() - initial.norm()).abs();
    Ok(Propagation { final_state: psi, norm_drift, steps })
}

/// Full propagator over [t0, t0 + duration].
pub fn propagator<H>(h: H, t0: f64, duration: f64, steps: usize, integrator: Integrator) -> Result<DMatrix<Complex64>>
where
    H: Fn(f64) -> DMatrix<Complex64>,
{
    if steps < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 steps, got {steps}")));
    }
    let dt = duration / steps as f64;
    let n = h(t0).nrows();
    let mut u = DMatrix::<Complex64>::identity(n, n);
    for k in 0..steps {
        u = step_propagator(&h, t0 + k as f64 * dt, dt, integrator)? * u;
    }
    Ok(u)
}

/// Trajectory plus the dt-halving convergence test.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub final_state: State,
    /// (t, ψ(t)) at t = 0 and after every coarse step.
    pub trajectory: Vec<(f64, State)>,
    pub norm_drift: f64,
    /// ‖ψ_dt(T) − ψ_{dt/2}(T)‖
    pub halving_change: f64,
    pub converged: bool,
}

/// Evolve with `steps` and `2·steps`; `converged` records whether the final states differ
/// by less than `tol`.
pub fn evolve<H>(h: H, initial: &State, duration: f64, steps: usize, integrator: Integrator, tol: f64) -> Result<Evolution>
where
    H: Fn(f64) -> DMatrix<Complex64> + Sync,
{
    let mut trajectory = vec![(0.0, initial.clone())];
    let (coarse, fine) = rayon::join(
        || {
            propagate(&h, initial, 0.0, duration, steps, integrator, |_, t, psi| {
                trajectory.push((t, psi.clone()));
                Ok(())
            })
        },
        || propagate(&h, initial, 0.0, duration, 2 * steps, integrator, |_, _, _| Ok(())),
    );
    let (coarse, fine) = (coarse?, fine?);
    let halving_change = (&coarse.final_state - &fine.final_state).norm();
    let converged = halving_change < tol;
    if !converged {
        warn!("dt-halving changed the final state by {halving_change:.3e} (tolerance {tol:.1e})");
    }
    Ok(Evolution {
        final_state: coarse.final_state,
        trajectory,
        norm_drift: coarse.norm_drift,
        halving_change,
        converged,
    })
}

fn angles(s: &ScheduleState) -> EulerAngles {
    EulerAngles::new(s.theta, s.phi, s.alpha)
}

/// Lab-frame H = b·U Ĥ(λ) U† with U = exp(−iΣzφ)exp(−iΣyθ)exp(−iΣzα).
pub fn lab_hamiltonian(rep: &SpinRep, s: &ScheduleState) -> DMatrix<Complex64> {
    let u = rep.rotation_unitary(&angles(s));
    let h = to_complex(&((rep.sigma_z() + rep.sigma_x_squared() * s.lambda) * s.b));
    &u * h * u.adjoint()
}

/// Rotating-frame H̃ = bĤ(λ) − α̇Σz − φ̇D_φ − θ̇D_θ with
/// D_φ = cosθΣz − sinθcosαΣx + sinθsinαΣy and D_θ = sinαΣx + cosαΣy.
pub fn rotating_hamiltonian(rep: &SpinRep, s: &ScheduleState) -> DMatrix<Complex64> {
    let static_part = (rep.sigma_z() + rep.sigma_x_squared() * s.lambda) * s.b;
    if s.phi_dot == 0.0 && s.theta_dot == 0.0 {
        return to_complex(&(static_part - rep.sigma_z() * s.alpha_dot));
    }
    let (st, ct) = s.theta.sin_cos();
    let (sa, ca) = s.alpha.sin_cos();
    let re = static_part - rep.sigma_z() * (s.alpha_dot + s.phi_dot * ct)
        + rep.sigma_x() * (s.phi_dot * st * ca - s.theta_dot * sa);
    let im = rep.sigma_y_imag() * (-(s.phi_dot * st * sa) - s.theta_dot * ca);
    DMatrix::from_fn(re.nrows(), re.ncols(), |i, j| Complex64::new(re[(i, j)], im[(i, j)]))
}

/// Lab state from a rotating-frame state: Φ = U Φ̃.
pub fn to_lab_frame(rep: &SpinRep, s: &ScheduleState, rotating: &State) -> State {
    rep.rotation_unitary(&angles(s)) * rotating
}

/// Rotating-frame state from a lab state: Φ̃ = U† Φ.
pub fn to_rotating_frame(rep: &SpinRep, s: &ScheduleState, lab: &State) -> State {
    rep.rotation_unitary(&angles(s)).adjoint() * lab
}

/// Controls shared by the cycle-level runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub steps_per_unit: f64,
    pub integrator: Integrator,
    /// Run the dt-halving check with this tolerance on the final state.
    pub convergence_tol: Option<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { steps_per_unit: DEFAULT_STEPS_PER_UNIT, integrator: Integrator::Midpoint, convergence_tol: None }
    }
}

impl RunOptions {
    pub fn steps_for(&self, duration: f64) -> usize {
        ((duration * self.steps_per_unit).ceil() as usize).max(2)
    }
}

/// Result of integrating one schedule from an instantaneous eigenstate.
#[derive(Debug, Clone, Serialize)]
pub struct CycleResult {
    pub m: f64,
    /// Final lab-frame state.
    #[serde(skip)]
    pub final_state: State,
    /// Unwrapped phase of the final state against the continued eigenstate, plus the winding
    /// phase. For a closed cycle this is arg⟨Φ(0)|Φ(T)⟩.
    pub total_phase: f64,
    pub total_phase_mod: f64,
    /// Adiabatic dynamical phase −∫ b E(m,λ) dt.
    pub dynamical_phase: f64,
    /// total_phase − dynamical_phase from this single run.
    pub geometric_phase: f64,
    /// 1 − |⟨ψ̂(m, λ(T))|Φ̃(T)⟩|²
    pub leakage: f64,
    /// ⟨Σ·n⟩ along the final field direction (the lab ⟨Σz⟩ when θ = 0).
    pub sz_expectation: f64,
    pub norm_drift: f64,
    pub steps: usize,
    pub halving_change: Option<f64>,
    pub converged: Option<bool>,
}

// Follows arg⟨ψ̂(m,λ(t))|Φ̃(t)⟩ with the eigenvector sign kept continuous.
struct PhaseTracker {
    vec: DVector<f64>,
    overlap: Complex64,
    phase: f64,
}

impl PhaseTracker {
    fn new(v: DVector<f64>, psi: &State) -> Self {
        let overlap = real_dot(&v, psi);
        Self { vec: v, overlap, phase: overlap.arg() }
    }

    fn update(&mut self, mut v: DVector<f64>, psi: &State) {
        if v.dot(&self.vec) < 0.0 {
            v.neg_mut();
        }
        let o = real_dot(&v, psi);
        self.phase += (o * self.overlap.conj()).arg();
        self.overlap = o;
        self.vec = v;
    }
}

fn real_dot(v: &DVector<f64>, psi: &State) -> Complex64 {
    v.iter().zip(psi.iter()).map(|(a, z)| z * *a).sum()
}

fn real_to_state(v: &DVector<f64>) -> State {
    v.map(|x| Complex64::new(x, 0.0))
}

fn integrate(rep: &SpinRep, m: f64, schedule: &CycleSchedule, opts: &RunOptions) -> Result<(CycleResult, State)> {
    rep.index_of(m)?;
    let steps = opts.steps_for(schedule.duration);
    let (_, v0) = level(rep, m, schedule.at(0.0).lambda)?;
    let init = real_to_state(&v0);
    let mut tracker = PhaseTracker::new(v0, &init);
    let h = |t: f64| rotating_hamiltonian(rep, &schedule.at(t));
    let prop = propagate(h, &init, 0.0, schedule.duration, steps, opts.integrator, |_, t, psi| {
        let (_, v) = level(rep, m, schedule.at(t).lambda)?;
        tracker.update(v, psi);
        Ok(())
    })?;
    let end = schedule.at(schedule.duration);
    let (_, v_end) = level(rep, m, end.lambda)?;
    if v_end.dot(&tracker.vec) < 0.0 {
        tracker.phase += std::f64::consts::PI;
    }
    let psi = prop.final_state;
    let leakage = (1.0 - tracker.overlap.norm_sqr()).clamp(0.0, 1.0);
    let sz = (psi.adjoint() * to_complex(rep.sigma_z()) * &psi)[(0, 0)].re;
    let dynamical_phase = integrate_schedule(schedule, DEFAULT_QUAD_POINTS, |s| Ok(-s.b * energy(rep, m, s.lambda)?))?;
    let total_phase = tracker.phase - m * schedule.winding_angle();

    let (halving_change, converged) = match opts.convergence_tol {
        Some(tol) => {
            let h = |t: f64| rotating_hamiltonian(rep, &schedule.at(t));
            let fine = propagate(h, &init, 0.0, schedule.duration, 2 * steps, opts.integrator, |_, _, _| Ok(()))?;
            let change = (&fine.final_state - &psi).norm();
            if change >= tol {
                warn!("dt-halving changed the final state by {change:.3e} (tolerance {tol:.1e})");
            }
            (Some(change), Some(change < tol))
        }
        None => (None, None),
    };
    let result = CycleResult {
        m,
        final_state: to_lab_frame(rep, &end, &psi),
        total_phase,
        total_phase_mod: wrap_phase(total_phase),
        dynamical_phase,
        geometric_phase: total_phase - dynamical_phase,
        leakage,
        sz_expectation: sz,
        norm_drift: prop.norm_drift,
        steps,
        halving_change,
        converged,
    };
    Ok((result, psi))
}

/// Integrate `schedule` in the rotating frame from ψ̂(m, λ(0)).
pub fn run_cycle(rep: &SpinRep, m: f64, schedule: &CycleSchedule, opts: &RunOptions) -> Result<CycleResult> {
    integrate(rep, m, schedule, opts).map(|(r, _)| r)
}

/// End-of-ramp polarization against the adiabatic prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RampOutcome {
    pub sz_final: f64,
    pub sz_adiabatic: f64,
    /// sz_final − sz_adiabatic
    pub deviation: f64,
    pub leakage: f64,
    /// Phase of the final state against ψ̂(m, λ₀).
    pub dynamical_phase_exact: f64,
    /// −∫E(m, λ(t)) dt
    pub dynamical_phase_adiabatic: f64,
}

impl RampOutcome {
    pub fn relative_deviation(&self) -> f64 {
        self.deviation / self.sz_adiabatic.abs()
    }

    pub fn phase_error(&self) -> f64 {
        self.dynamical_phase_exact - self.dynamical_phase_adiabatic
    }
}

/// Ramp λ: 0 → λ₀ over T from |S,m⟩ with the full (2S+1)-level Hamiltonian.
pub fn ramp_fidelity(
    rep: &SpinRep,
    m: f64,
    lambda0: f64,
    duration: f64,
    shape: PulseShape,
    opts: &RunOptions,
) -> Result<RampOutcome> {
    if !lambda0.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda0 must be finite, got {lambda0}")));
    }
    let schedule = CycleSchedule::ramp(lambda0, duration, shape)?;
    let r = run_cycle(rep, m, &schedule, opts)?;
    let p = polarization(rep, m, lambda0)?;
    Ok(RampOutcome {
        sz_final: r.sz_expectation,
        sz_adiabatic: p,
        deviation: r.sz_expectation - p,
        leakage: r.leakage,
        dynamical_phase_exact: r.total_phase,
        dynamical_phase_adiabatic: r.dynamical_phase,
    })
}

/// Geometric phase from a cycle and its image circuit.
#[derive(Debug, Clone, Serialize)]
pub struct MirrorPhase {
    /// ½(total(forward) − total(mirror))
    pub extracted: f64,
    /// Quadrature value of β(m).
    pub adiabatic: f64,
    pub forward: CycleResult,
    pub mirror: CycleResult,
    /// false when either run leaks more than 1%.
    pub trusted: bool,
}

/// Run the cycle and its image (φ, α negated) in parallel and subtract the phases.
pub fn mirror_phase_difference(rep: &SpinRep, m: f64, schedule: &CycleSchedule, opts: &RunOptions) -> Result<MirrorPhase> {
    let adiabatic = berry_phase_adiabatic(rep, m, schedule, DEFAULT_QUAD_POINTS)?.beta;
    let image = schedule.mirrored();
    let (fwd, mir) = rayon::join(|| run_cycle(rep, m, schedule, opts), || run_cycle(rep, m, &image, opts));
    let (forward, mirror) = (fwd?, mir?);
    let trusted = forward.leakage <= LEAKAGE_WARN && mirror.leakage <= LEAKAGE_WARN;
    if !trusted {
        warn!(
            "leakage {:.3e} / {:.3e} exceeds {LEAKAGE_WARN}: mirror extraction is untrusted",
            forward.leakage, mirror.leakage
        );
    }
    Ok(MirrorPhase { extracted: 0.5 * (forward.total_phase - mirror.total_phase), adiabatic, forward, mirror, trusted })
}

/// V_S(λ) = Σ_m |ψ̂(m,λ)⟩⟨S m|, columns in descending m.
pub fn rotating_basis_transform(rep: &SpinRep, lambda: f64) -> Result<DMatrix<f64>> {
    Ok(labeled_spectrum(rep, lambda, DEFAULT_GRID_STEP)?.eigvec_matrix())
}

/// ΔH̃ in the instantaneous eigenbasis: E_a δ_ab − i λ̇ ⟨a|Σx²|b⟩/(E_b − E_a).
pub fn adiabatic_frame_hamiltonian(rep: &SpinRep, lambda: f64, lambda_dot: f64) -> Result<DMatrix<Complex64>> {
    let spec = instantaneous_spectrum(rep, lambda)?;
    let n = rep.dim();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        let ea = &spec.entries[a];
        h[(a, a)] = Complex64::new(ea.energy, 0.0);
        let x_a = rep.sigma_x_squared() * &ea.eigvec;
        for b in (a + 2..n).step_by(2) {
            let eb = &spec.entries[b];
            let gap = eb.energy - ea.energy;
            if gap.abs() < 1e-12 {
                return Err(Error::NearDegeneracy { m: ea.m, n: eb.m, gap: gap.abs() });
            }
            let v = -I * (lambda_dot * eb.eigvec.dot(&x_a) / gap);
            h[(a, b)] = v;
            h[(b, a)] = v.conj();
        }
    }
    Ok(h)
}

/// The two M = ±1 odd-parity levels of S = 1 or S = 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoLevelBranch {
    S1,
    S2,
}

impl TwoLevelBranch {
    /// (tan ζ, ζ̇, offset)
    pub fn angles(self, lambda: f64, lambda_dot: f64) -> (f64, f64, f64) {
        match self {
            TwoLevelBranch::S2 => (1.5 * lambda, 6.0 * lambda_dot / (9.0 * lambda * lambda + 4.0), 2.5 * lambda),
            TwoLevelBranch::S1 => (0.5 * lambda, 2.0 * lambda_dot / (lambda * lambda + 4.0), 0.5 * lambda),
        }
    }

    pub fn two_s(self) -> i64 {
        match self {
            TwoLevelBranch::S1 => 2,
            TwoLevelBranch::S2 => 4,
        }
    }
}

/// H̃ = offset·σ₀ + sec ζ σz − ½ζ̇ σy in the basis of the instantaneous m = ±1 levels.
pub fn two_level_rotating_hamiltonian(branch: TwoLevelBranch, lambda: f64, lambda_dot: f64) -> DMatrix<Complex64> {
    let (tan_z, zeta_dot, offset) = branch.angles(lambda, lambda_dot);
    let sec = (1.0 + tan_z * tan_z).sqrt();
    let c = |x: f64| Complex64::new(x, 0.0);
    // −½ζ̇σy = [[0, iζ̇/2], [−iζ̇/2, 0]]
    DMatrix::from_row_slice(
        2,
        2,
        &[c(offset + sec), I * (0.5 * zeta_dot), -I * (0.5 * zeta_dot), c(offset - sec)],
    )
}

/// Columns of the two-level eigenbasis in the (m = 1, m = −1) product states: rotation by ζ/2.
pub fn two_level_basis(branch: TwoLevelBranch, lambda: f64) -> DMatrix<f64> {
    let (tan_z, _, _) = branch.angles(lambda, 0.0);
    let (s, c) = (0.5 * tan_z.atan()).sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}
