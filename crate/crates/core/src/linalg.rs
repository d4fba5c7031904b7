//! Small dense linear algebra: cyclic Jacobi for real symmetric matrices and
//! exponentials of Hermitian generators.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Eigen-decomposition `a = v · diag(values) · vᵀ` with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm falls below
/// `1e-14 · max(1, ‖a‖)`.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymEigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigen needs a square matrix");
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = a.norm().max(1.0);
    let tol = 1e-14 * scale;

    let off = |a: &DMatrix<f64>| {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&a) > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(sweeps));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // rotation angle from the 2x2 subproblem (Numerical Recipes 11.1)
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &v.column(i));
    }
    Ok(SymEigen { values, vectors })
}

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<Complex64> {
    a.map(|x| Complex64::new(x, 0.0))
}

/// Largest entry of `|h - h†|`.
pub fn hermitian_residual(h: &DMatrix<Complex64>) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..h.nrows() {
        for j in i..h.ncols() {
            r = r.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    r
}

pub fn max_abs(h: &DMatrix<Complex64>) -> f64 {
    h.iter().fold(0.0, |m, z| m.max(z.norm()))
}

// Real symmetric embedding [[A, −B], [B, A]] of the Hermitian A + iB.
fn real_embedding(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `exp(-i h dt)` for Hermitian `h`, through Jacobi on `h` when it is real and on its
/// real symmetric embedding otherwise.
pub fn expm_hermitian(h: &DMatrix<Complex64>, dt: f64) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    if h.iter().all(|z| z.im == 0.0) {
        let eig = jacobi_eigen(&h.map(|z| z.re))?;
        let w = &eig.vectors;
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        for k in 0..n {
            let ph = Complex64::from_polar(1.0, -eig.values[k] * dt);
            for i in 0..n {
                let wik = w[(i, k)] * ph;
                for j in 0..n {
                    out[(i, j)] += wik * w[(j, k)];
                }
            }
        }
        return Ok(polish_unitary(out));
    }
    // cos(h dt) − i sin(h dt); f(embedding) = embedding of f(h) for real f
    let eig = jacobi_eigen(&real_embedding(h))?;
    let w = &eig.vectors;
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..2 * n {
        let (s, c) = (eig.values[k] * dt).sin_cos();
        for i in 0..n {
            let (top, bottom) = (w[(i, k)], w[(i + n, k)]);
            for j in 0..n {
                let wj = w[(j, k)];
                // top-left block gives the real part, bottom-left the imaginary part
                let (re, im) = (top * wj, bottom * wj);
                out[(i, j)] += Complex64::new(c * re + s * im, c * im - s * re);
            }
        }
    }
    Ok(polish_unitary(out))
}

// One Newton–Schulz step toward the unitary polar factor, U(3 − U†U)/2.
fn polish_unitary(u: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = u.nrows();
    let defect = DMatrix::<Complex64>::identity(n, n) - u.adjoint() * &u;
    &u + &u * defect * Complex64::new(0.5, 0.0)
}

/// Sorted (descending) eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    if h.iter().all(|z| z.im == 0.0) {
        return Ok(jacobi_eigen(&h.map(|z| z.re))?.values.iter().copied().collect());
    }
    // each eigenvalue appears twice in the embedding
    Ok(jacobi_eigen(&real_embedding(h))?.values.iter().copied().step_by(2).collect())
}

/// Kronecker product.
pub fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Wrap an angle into (-π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}
