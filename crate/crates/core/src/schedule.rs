//! Time-parameterized cycles θ(t), φ(t), α(t), λ(t), B(t)/B₀ on [0, T].

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spline::CubicSpline;

/// Boundary conditions are checked to this absolute tolerance.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Largest accepted spline roughness for tabulated channels.
pub const MAX_ROUGHNESS: f64 = 0.05;

/// Blackman window value f(s) = 0.42 − 0.5 cos 2πs + 0.08 cos 4πs on [0, 1].
pub fn blackman(s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!("blackman argument {s} outside [0, 1]")));
    }
    Ok(blackman_unchecked(s))
}

fn blackman_unchecked(s: f64) -> f64 {
    0.42 - 0.5 * (2.0 * PI * s).cos() + 0.08 * (4.0 * PI * s).cos()
}

/// Time profile of a parameter rate over a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    /// Constant rate (sharp edges).
    Linear,
    /// Rate ∝ Blackman window, normalized by ∫₀¹ f = 0.42 so the segment reaches its target.
    #[default]
    Blackman,
}

impl PulseShape {
    /// Normalized rate profile g(s) with ∫₀¹ g = 1.
    pub fn rate(self, s: f64) -> f64 {
        match self {
            PulseShape::Linear => 1.0,
            PulseShape::Blackman => blackman_unchecked(s) / 0.42,
        }
    }

    /// G(s) = ∫₀ˢ g, with G(0) = 0 and G(1) = 1.
    pub fn integral(self, s: f64) -> f64 {
        match self {
            PulseShape::Linear => s,
            PulseShape::Blackman => {
                (0.42 * s - 0.5 * (2.0 * PI * s).sin() / (2.0 * PI) + 0.08 * (4.0 * PI * s).sin() / (4.0 * PI)) / 0.42
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PulseShape::Linear => "linear",
            PulseShape::Blackman => "blackman",
        }
    }
}

impl std::str::FromStr for PulseShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(PulseShape::Linear),
            "blackman" => Ok(PulseShape::Blackman),
            other => Err(Error::InvalidArgument(format!("unknown pulse shape '{other}'"))),
        }
    }
}

/// One shaped transition `from → to` over `[t0, t1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub from: f64,
    pub to: f64,
    pub shape: PulseShape,
}

impl Piece {
    fn s(&self, t: f64) -> f64 {
        ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.from + (self.to - self.from) * self.shape.integral(self.s(t))
    }

    pub fn rate(&self, t: f64) -> f64 {
        if self.to == self.from {
            return 0.0;
        }
        (self.to - self.from) / (self.t1 - self.t0) * self.shape.rate(self.s(t))
    }
}

/// A scalar function of time: contiguous shaped pieces or a tabulated spline.
#[derive(Debug, Clone, PartialEq)]
pub enum Channel {
    Pieces(Vec<Piece>),
    Table(CubicSpline),
}

impl Channel {
    pub fn constant(value: f64, duration: f64) -> Self {
        Channel::Pieces(vec![Piece { t0: 0.0, t1: duration, from: value, to: value, shape: PulseShape::Linear }])
    }

    fn piece_at(pieces: &[Piece], t: f64) -> &Piece {
        let k = pieces.partition_point(|p| p.t1 < t);
        &pieces[k.min(pieces.len() - 1)]
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Channel::Pieces(p) => Self::piece_at(p, t).value(t),
            Channel::Table(s) => s.eval(t),
        }
    }

    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Channel::Pieces(p) => Self::piece_at(p, t).rate(t),
            Channel::Table(s) => s.derivative(t),
        }
    }

    fn breakpoints(&self, out: &mut Vec<f64>) {
        if let Channel::Pieces(p) = self {
            for piece in p {
                out.push(piece.t0);
                out.push(piece.t1);
            }
        }
    }

    fn negated(&self) -> Self {
        match self {
            Channel::Pieces(p) => {
                Channel::Pieces(p.iter().map(|x| Piece { from: -x.from, to: -x.to, ..*x }).collect())
            }
            Channel::Table(s) => Channel::Table(
                CubicSpline::not_a_knot(s.knots().to_vec(), s.values().iter().map(|v| -v).collect())
                    .expect("negating valid spline data"),
            ),
        }
    }

    fn scaled(&self, xi: f64) -> Self {
        match self {
            Channel::Pieces(p) => {
                Channel::Pieces(p.iter().map(|x| Piece { from: xi * x.from, to: xi * x.to, ..*x }).collect())
            }
            Channel::Table(s) => Channel::Table(
                CubicSpline::not_a_knot(s.knots().to_vec(), s.values().iter().map(|v| xi * v).collect())
                    .expect("scaling valid spline data"),
            ),
        }
    }
}

/// Parameters and their rates at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScheduleState {
    pub t: f64,
    pub theta: f64,
    pub phi: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub b: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
    pub alpha_dot: f64,
    pub lambda_dot: f64,
}

impl ScheduleState {
    /// Longitudinal Coriolis ratio η = (cosθ φ̇ + α̇)/b.
    pub fn eta(&self) -> f64 {
        (self.theta.cos() * self.phi_dot + self.alpha_dot) / self.b
    }

    /// Transverse ratio μ = sinθ φ̇/b.
    pub fn mu(&self) -> f64 {
        self.theta.sin() * self.phi_dot / self.b
    }
}

/// Cycle of the field parameters with declared windings n_φ, n_α.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSchedule {
    pub duration: f64,
    pub theta: Channel,
    pub phi: Channel,
    pub alpha: Channel,
    pub lambda: Channel,
    pub b: Channel,
    pub n_phi: i32,
    pub n_alpha: i32,
}

/// Initial parameter values for segment-built schedules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Start {
    pub lambda: f64,
    pub theta: f64,
    pub phi: f64,
    pub alpha: f64,
    pub b: f64,
}

impl Default for Start {
    fn default() -> Self {
        Self { lambda: 0.0, theta: 0.0, phi: 0.0, alpha: 0.0, b: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Move λ and/or θ to new values.
    Ramp,
    /// Advance φ by 2π·phi_turns and/or α by π·alpha_half_turns.
    Rotate,
    /// Keep every parameter fixed.
    Hold,
}

/// One segment of a schedule file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    #[serde(default)]
    pub shape: PulseShape,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
    #[serde(default)]
    pub phi_turns: i32,
    #[serde(default)]
    pub alpha_half_turns: i32,
}

impl Segment {
    pub fn ramp(lambda: f64, duration: f64, shape: PulseShape) -> Self {
        Self { kind: SegmentKind::Ramp, duration, shape, lambda: Some(lambda), theta: None, phi_turns: 0, alpha_half_turns: 0 }
    }

    pub fn rotate(phi_turns: i32, alpha_half_turns: i32, duration: f64, shape: PulseShape) -> Self {
        Self { kind: SegmentKind::Rotate, duration, shape, lambda: None, theta: None, phi_turns, alpha_half_turns }
    }

    pub fn hold(duration: f64) -> Self {
        Self {
            kind: SegmentKind::Hold,
            duration,
            shape: PulseShape::Linear,
            lambda: None,
            theta: None,
            phi_turns: 0,
            alpha_half_turns: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default)]
    start: Start,
    segment: Vec<Segment>,
}

impl CycleSchedule {
    /// Build a piecewise schedule from consecutive segments.
    pub fn from_segments(start: Start, segments: &[Segment]) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Schedule("no segments".into()));
        }
        if !(start.b > 0.0) || ![start.lambda, start.theta, start.phi, start.alpha, start.b].iter().all(|v| v.is_finite()) {
            return Err(Error::Schedule("start values must be finite with b > 0".into()));
        }
        let mut t = 0.0;
        let (mut lam, mut th, mut ph, mut al) = (start.lambda, start.theta, start.phi, start.alpha);
        let (mut pl, mut pt, mut pp, mut pa) = (vec![], vec![], vec![], vec![]);
        let (mut n_phi, mut n_alpha) = (0, 0);
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.duration > 0.0) || !seg.duration.is_finite() {
                return Err(Error::Schedule(format!("segment {i}: duration must be positive")));
            }
            let turns = seg.phi_turns != 0 || seg.alpha_half_turns != 0;
            let targets = seg.lambda.is_some() || seg.theta.is_some();
            match seg.kind {
                SegmentKind::Ramp if !targets || turns => {
                    return Err(Error::Schedule(format!("segment {i}: ramp needs a lambda or theta target and no turns")))
                }
                SegmentKind::Rotate if !turns || targets => {
                    return Err(Error::Schedule(format!("segment {i}: rotate needs turns and no targets")))
                }
                SegmentKind::Hold if turns || targets => {
                    return Err(Error::Schedule(format!("segment {i}: hold takes no targets or turns")))
                }
                _ => {}
            }
            let t1 = t + seg.duration;
            let lam1 = seg.lambda.unwrap_or(lam);
            let th1 = seg.theta.unwrap_or(th);
            if !lam1.is_finite() || !th1.is_finite() {
                return Err(Error::Schedule(format!("segment {i}: targets must be finite")));
            }
            let ph1 = ph + 2.0 * PI * seg.phi_turns as f64;
            let al1 = al + PI * seg.alpha_half_turns as f64;
            let mk = |from, to| Piece { t0: t, t1, from, to, shape: seg.shape };
            pl.push(mk(lam, lam1));
            pt.push(mk(th, th1));
            pp.push(mk(ph, ph1));
            pa.push(mk(al, al1));
            n_phi += seg.phi_turns;
            n_alpha += seg.alpha_half_turns;
            (lam, th, ph, al, t) = (lam1, th1, ph1, al1, t1);
        }
        Ok(Self {
            duration: t,
            theta: Channel::Pieces(pt),
            phi: Channel::Pieces(pp),
            alpha: Channel::Pieces(pa),
            lambda: Channel::Pieces(pl),
            b: Channel::constant(start.b, t),
            n_phi,
            n_alpha,
        })
    }

    /// Parse the TOML schedule format: an optional `[start]` table and `[[segment]]` entries.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScheduleFile = toml::from_str(text).map_err(|e| Error::Schedule(e.to_string()))?;
        Self::from_segments(file.start, &file.segment)
    }

    /// Tabulated schedule through not-a-knot splines on common sample times.
    #[allow(clippy::too_many_arguments)]
    pub fn tabulated(
        times: Vec<f64>,
        theta: Vec<f64>,
        phi: Vec<f64>,
        alpha: Vec<f64>,
        lambda: Vec<f64>,
        b: Option<Vec<f64>>,
        n_phi: i32,
        n_alpha: i32,
    ) -> Result<Self> {
        if times.first().copied() != Some(0.0) {
            return Err(Error::Schedule("tabulated schedule must start at t = 0".into()));
        }
        let duration = *times.last().unwrap();
        let mk = |y: Vec<f64>, name: &str| -> Result<Channel> {
            let s = CubicSpline::not_a_knot(times.clone(), y)?;
            let r = s.roughness();
            if r > MAX_ROUGHNESS {
                return Err(Error::Schedule(format!("channel {name} is not smooth (roughness {r:.3e})")));
            }
            Ok(Channel::Table(s))
        };
        let b = match b {
            Some(v) => {
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::Schedule("b(t) must stay positive".into()));
                }
                mk(v, "b")?
            }
            None => Channel::constant(1.0, duration),
        };
        Ok(Self {
            duration,
            theta: mk(theta, "theta")?,
            phi: mk(phi, "phi")?,
            alpha: mk(alpha, "alpha")?,
            lambda: mk(lambda, "lambda")?,
            b,
            n_phi,
            n_alpha,
        })
    }

    /// Open ramp λ: 0 → λ₀ over T, everything else fixed (not a cycle).
    pub fn ramp(lambda0: f64, duration: f64, shape: PulseShape) -> Result<Self> {
        Self::from_segments(Start::default(), &[Segment::ramp(lambda0, duration, shape)])
    }

    pub fn at(&self, t: f64) -> ScheduleState {
        ScheduleState {
            t,
            theta: self.theta.value(t),
            phi: self.phi.value(t),
            alpha: self.alpha.value(t),
            lambda: self.lambda.value(t),
            b: self.b.value(t),
            theta_dot: self.theta.rate(t),
            phi_dot: self.phi.rate(t),
            alpha_dot: self.alpha.rate(t),
            lambda_dot: self.lambda.rate(t),
        }
    }

    /// Sorted segment boundaries including 0 and T.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v = vec![0.0, self.duration];
        for c in [&self.theta, &self.phi, &self.alpha, &self.lambda, &self.b] {
            c.breakpoints(&mut v);
        }
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12 * self.duration.max(1.0));
        v
    }

    /// θ(T)=θ(0), λ(T)=λ(0), φ(T)=φ(0)+2πn_φ, α(T)=α(0)+πn_α.
    pub fn check_boundary(&self) -> Result<()> {
        let (a, z) = (self.at(0.0), self.at(self.duration));
        let checks = [
            ("theta", z.theta - a.theta),
            ("lambda", z.lambda - a.lambda),
            ("phi", z.phi - a.phi - 2.0 * PI * self.n_phi as f64),
            ("alpha", z.alpha - a.alpha - PI * self.n_alpha as f64),
        ];
        for (name, r) in checks {
            if r.abs() > BOUNDARY_TOL {
                return Err(Error::Boundary(format!("{name} mismatch {r:.3e}")));
            }
        }
        Ok(())
    }

    /// Δφ + Δα over the cycle.
    pub fn winding_angle(&self) -> f64 {
        let (a, z) = (self.at(0.0), self.at(self.duration));
        (z.phi - a.phi) + (z.alpha - a.alpha)
    }

    /// Image circuit with φ → −φ and α → −α.
    pub fn mirrored(&self) -> Self {
        Self {
            phi: self.phi.negated(),
            alpha: self.alpha.negated(),
            n_phi: -self.n_phi,
            n_alpha: -self.n_alpha,
            ..self.clone()
        }
    }

    /// Same path with b(t) multiplied by ξ.
    pub fn with_b_scaled(&self, xi: f64) -> Self {
        Self { b: self.b.scaled(xi), ..self.clone() }
    }

    /// max |η(t)| on a uniform probe of `n` points.
    pub fn max_abs_eta(&self, n: usize) -> f64 {
        (0..=n).map(|k| self.at(self.duration * k as f64 / n as f64).eta().abs()).fold(0.0, f64::max)
    }
}
