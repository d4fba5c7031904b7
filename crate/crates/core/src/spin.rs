//! Spin matrices in the |S,m⟩ basis (descending m) and Euler-angle rotation unitaries.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;

/// Spin representation Σ = S/ℏ for a given S = two_s/2.
///
/// Σx and Σz are stored as real matrices. Σy is purely imaginary and is stored through
/// its real factor `sy_im`, with Σy = i·sy_im.
#[derive(Debug, Clone)]
pub struct SpinRep {
    two_s: u32,
    sx: DMatrix<f64>,
    sy_im: DMatrix<f64>,
    sz: DMatrix<f64>,
    sx2: DMatrix<f64>,
    // eigenvectors and eigenvalues of Σx, used for exp(-iθΣy)
    wx: DMatrix<f64>,
    wx_vals: Vec<f64>,
}

/// Euler angles of the rotation `U = exp(-iΣzφ) exp(-iΣyθ) exp(-iΣzα)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerAngles {
    pub theta: f64,
    pub phi: f64,
    pub alpha: f64,
}

impl EulerAngles {
    pub fn new(theta: f64, phi: f64, alpha: f64) -> Self {
        Self { theta, phi, alpha }
    }

    /// The 3×3 rotation `Rz(φ) Ry(θ) Rz(α)` acting on spin vectors.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        rz(self.phi) * ry(self.theta) * rz(self.alpha)
    }

    /// zyz angles of an orthogonal matrix, θ in [0, π].
    pub fn from_rotation_matrix(r: &Matrix3<f64>) -> Self {
        let theta = r[(2, 2)].clamp(-1.0, 1.0).acos();
        if theta.sin().abs() < 1e-12 {
            // gimbal lock: only φ ± α is defined
            let phi = if r[(2, 2)] > 0.0 {
                r[(1, 0)].atan2(r[(0, 0)])
            } else {
                (-r[(1, 0)]).atan2(-r[(0, 0)])
            };
            return Self { theta, phi, alpha: 0.0 };
        }
        let phi = r[(1, 2)].atan2(r[(0, 2)]);
        let alpha = r[(2, 1)].atan2(-r[(2, 0)]);
        Self { theta, phi, alpha }
    }
}

fn rz(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn ry(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

impl SpinRep {
    /// Build the spin matrices from the ladder elements √(S(S+1) − m(m±1)).
    pub fn new(two_s: i64) -> Result<Self> {
        if two_s < 0 || two_s > 4096 {
            return Err(Error::InvalidSpin(two_s));
        }
        let two_s = two_s as u32;
        let dim = two_s as usize + 1;
        let s = two_s as f64 / 2.0;
        let m_of = |k: usize| s - k as f64;

        // S+ |m⟩ = √(S(S+1) − m(m+1)) |m+1⟩ ; index k−1 holds m+1
        let mut sp = DMatrix::<f64>::zeros(dim, dim);
        for k in 1..dim {
            let m = m_of(k);
            sp[(k - 1, k)] = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
        }
        let sm = sp.transpose();
        let sx = (&sp + &sm) * 0.5;
        // Σy = (S+ − S−)/(2i) = i·(S− − S+)/2
        let sy_im = (&sm - &sp) * 0.5;
        let sz = DMatrix::from_fn(dim, dim, |i, j| if i == j { m_of(i) } else { 0.0 });
        let sx2 = &sx * &sx;

        let eig = jacobi_eigen(&sx).map_err(|_| Error::InvalidSpin(two_s as i64))?;
        Ok(Self {
            two_s,
            wx_vals: eig.values.iter().copied().collect(),
            wx: eig.vectors,
            sx,
            sy_im,
            sz,
            sx2,
        })
    }

    pub fn two_s(&self) -> u32 {
        self.two_s
    }

    pub fn s(&self) -> f64 {
        self.two_s as f64 / 2.0
    }

    pub fn dim(&self) -> usize {
        self.two_s as usize + 1
    }

    /// Magnetic numbers in basis order S, S−1, …, −S.
    pub fn m_values(&self) -> Vec<f64> {
        (0..self.dim()).map(|k| self.m_at(k)).collect()
    }

    pub fn m_at(&self, k: usize) -> f64 {
        self.s() - k as f64
    }

    /// Basis index of magnetic number `m`.
    pub fn index_of(&self, m: f64) -> Result<usize> {
        let k = self.s() - m;
        let kr = k.round();
        if (k - kr).abs() > 1e-9 || kr < 0.0 || kr as usize >= self.dim() {
            return Err(Error::InvalidM { s: self.s(), m });
        }
        Ok(kr as usize)
    }

    pub fn sigma_x(&self) -> &DMatrix<f64> {
        &self.sx
    }

    pub fn sigma_z(&self) -> &DMatrix<f64> {
        &self.sz
    }

    /// Real factor `A` with Σy = iA.
    pub fn sigma_y_imag(&self) -> &DMatrix<f64> {
        &self.sy_im
    }

    pub fn sigma_x_squared(&self) -> &DMatrix<f64> {
        &self.sx2
    }

    pub fn sigma_y(&self) -> DMatrix<Complex64> {
        self.sy_im.map(|a| Complex64::new(0.0, a))
    }

    /// Complex copies of (Σx, Σy, Σz).
    pub fn sigma_complex(&self) -> [DMatrix<Complex64>; 3] {
        let c = |a: &DMatrix<f64>| a.map(|x| Complex64::new(x, 0.0));
        [c(&self.sx), self.sigma_y(), c(&self.sz)]
    }

    /// exp(-iθΣy), a real orthogonal matrix (Wigner small-d).
    ///
    /// Uses Σy = D Σx D† with D = exp(-iπΣz/2) and the cached eigenbasis of Σx.
    pub fn small_d(&self, theta: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut out = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..n {
                    acc += Complex64::from_polar(self.wx[(j, l)] * self.wx[(k, l)], -theta * self.wx_vals[l]);
                }
                let ph = Complex64::from_polar(1.0, -0.5 * std::f64::consts::PI * (self.m_at(j) - self.m_at(k)));
                out[(j, k)] = (ph * acc).re;
            }
        }
        out
    }

    /// U = exp(-iΣzφ)·exp(-iΣyθ)·exp(-iΣzα).
    pub fn rotation_unitary(&self, e: &EulerAngles) -> DMatrix<Complex64> {
        let d = self.small_d(e.theta);
        let n = self.dim();
        DMatrix::from_fn(n, n, |j, k| {
            Complex64::from_polar(d[(j, k)], -e.phi * self.m_at(j) - e.alpha * self.m_at(k))
        })
    }

    /// (−1)^(S−m).
    pub fn m_parity(&self, m: f64) -> Result<i32> {
        let k = self.index_of(m)?;
        Ok(if k % 2 == 0 { 1 } else { -1 })
    }
}

/// (−1)^(S−m) for S = two_s/2.
pub fn m_parity(two_s: i64, m: f64) -> Result<i32> {
    if two_s < 0 {
        return Err(Error::InvalidSpin(two_s));
    }
    let s = two_s as f64 / 2.0;
    let k = s - m;
    let kr = k.round();
    if (k - kr).abs() > 1e-9 || kr < 0.0 || kr > two_s as f64 {
        return Err(Error::InvalidM { s, m });
    }
    Ok(if (kr as i64) % 2 == 0 { 1 } else { -1 })
}
