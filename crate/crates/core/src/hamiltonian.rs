//! Reduced Hamiltonian `Σz + λΣx²`, its m-parity blocks, labeled spectra and polarizations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;
use crate::spin::SpinRep;

/// Default λ increment for label continuation.
pub const DEFAULT_GRID_STEP: f64 = 0.01;
/// Overlaps closer than this make a continuation step ambiguous.
pub const AMBIGUITY_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct ReducedHamiltonian {
    pub rep: SpinRep,
    pub lambda: f64,
    pub matrix: DMatrix<f64>,
}

impl ReducedHamiltonian {
    pub fn new(rep: &SpinRep, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
        }
        let matrix = rep.sigma_z() + rep.sigma_x_squared() * lambda;
        Ok(Self { rep: rep.clone(), lambda, matrix })
    }

    /// Split into the even and odd (−1)^(S−m) blocks.
    pub fn parity_blocks(&self) -> (ParityBlock, ParityBlock) {
        (self.block(1), self.block(-1))
    }

    /// The block of the given parity (+1 even, −1 odd).
    pub fn block(&self, parity: i32) -> ParityBlock {
        let start = if parity > 0 { 0 } else { 1 };
        let indices: Vec<usize> = (start..self.rep.dim()).step_by(2).collect();
        let n = indices.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| self.matrix[(indices[i], indices[j])]);
        ParityBlock {
            parity,
            lambda: self.lambda,
            m_values: indices.iter().map(|&k| self.rep.m_at(k)).collect(),
            indices,
            matrix,
        }
    }
}

/// A parity block with its basis-index map. `m_values` is descending.
#[derive(Debug, Clone)]
pub struct ParityBlock {
    pub parity: i32,
    pub lambda: f64,
    pub indices: Vec<usize>,
    pub m_values: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl ParityBlock {
    pub fn order(&self) -> usize {
        self.indices.len()
    }

    /// Monic characteristic polynomial det(x·1 − B), coefficients in descending powers of x.
    pub fn characteristic_polynomial(&self) -> Vec<f64> {
        characteristic_polynomial(&self.matrix)
    }
}

/// Faddeev–LeVerrier coefficients of det(x·1 − a), descending powers, leading 1.
pub fn characteristic_polynomial(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut c = vec![0.0; n + 1];
    c[0] = 1.0;
    if n == 0 {
        return c;
    }
    let id = DMatrix::<f64>::identity(n, n);
    let mut mk = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        mk = a * &mk + &id * c[k - 1];
        c[k] = -(a * &mk).trace() / k as f64;
    }
    c
}

/// One labeled level.
#[derive(Debug, Clone)]
pub struct SpectrumEntry {
    pub m: f64,
    pub energy: f64,
    /// Real coefficients on the |S,m⟩ basis, positive on the parent state |S, m⟩.
    pub eigvec: DVector<f64>,
}

/// All 2S+1 levels at one λ, ordered by descending label m.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub lambda: f64,
    pub entries: Vec<SpectrumEntry>,
}

impl LabeledSpectrum {
    pub fn get(&self, m: f64) -> Option<&SpectrumEntry> {
        self.entries.iter().find(|e| (e.m - m).abs() < 1e-9)
    }

    /// Columns ψ̂(m) in descending m.
    pub fn eigvec_matrix(&self) -> DMatrix<f64> {
        let n = self.entries.len();
        let mut v = DMatrix::zeros(n, n);
        for (k, e) in self.entries.iter().enumerate() {
            v.set_column(k, &e.eigvec);
        }
        v
    }
}

fn embed(dim: usize, indices: &[usize], col: nalgebra::DVectorView<f64>) -> DVector<f64> {
    let mut v = DVector::zeros(dim);
    for (i, &k) in indices.iter().enumerate() {
        v[k] = col[i];
    }
    v
}

fn fix_sign(v: &mut DVector<f64>, parent: usize) {
    if v[parent] < 0.0 {
        v.neg_mut();
    }
}

/// Spectrum at λ labeled by energy order inside each parity block.
///
/// Each block is an unreduced tridiagonal matrix for λ ≠ 0, so its levels never cross
/// and the k-th highest energy continues to the k-th highest m at λ = 0.
pub fn instantaneous_spectrum(rep: &SpinRep, lambda: f64) -> Result<LabeledSpectrum> {
    let h = ReducedHamiltonian::new(rep, lambda)?;
    let mut entries = Vec::with_capacity(rep.dim());
    for block in [h.block(1), h.block(-1)] {
        if block.order() == 0 {
            continue;
        }
        let eig = jacobi_eigen(&block.matrix)?;
        for (pos, &m) in block.m_values.iter().enumerate() {
            let mut v = embed(rep.dim(), &block.indices, eig.vectors.column(pos));
            fix_sign(&mut v, block.indices[pos]);
            entries.push(SpectrumEntry { m, energy: eig.values[pos], eigvec: v });
        }
    }
    entries.sort_by(|a, b| b.m.total_cmp(&a.m));
    Ok(LabeledSpectrum { lambda, entries })
}

/// Energy and eigenvector of level `m` (energy-order labeling, single block solve).
pub fn level(rep: &SpinRep, m: f64, lambda: f64) -> Result<(f64, DVector<f64>)> {
    let parent = rep.index_of(m)?;
    let h = ReducedHamiltonian::new(rep, lambda)?;
    let block = h.block(if parent % 2 == 0 { 1 } else { -1 });
    let pos = parent / 2;
    let eig = jacobi_eigen(&block.matrix)?;
    let mut v = embed(rep.dim(), &block.indices, eig.vectors.column(pos));
    fix_sign(&mut v, parent);
    Ok((eig.values[pos], v))
}

pub fn energy(rep: &SpinRep, m: f64, lambda: f64) -> Result<f64> {
    let parent = rep.index_of(m)?;
    let h = ReducedHamiltonian::new(rep, lambda)?;
    let block = h.block(if parent % 2 == 0 { 1 } else { -1 });
    Ok(jacobi_eigen(&block.matrix)?.values[parent / 2])
}

/// Spectrum at λ labeled by continuation from λ = 0 along a grid of spacing ≤ `grid_step`,
/// matching each level to the eigenvector of maximal overlap within its parity block.
pub fn labeled_spectrum(rep: &SpinRep, lambda: f64, grid_step: f64) -> Result<LabeledSpectrum> {
    if !(grid_step > 0.0) {
        return Err(Error::InvalidArgument(format!("grid_step must be positive, got {grid_step}")));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("lambda must be finite, got {lambda}")));
    }
    let dim = rep.dim();
    let steps = (lambda.abs() / grid_step).ceil().max(1.0) as usize;
    let dl = lambda / steps as f64;

    // tracked[k] follows the level whose parent is basis state k
    let mut tracked: Vec<DVector<f64>> = (0..dim)
        .map(|k| {
            let mut v = DVector::zeros(dim);
            v[k] = 1.0;
            v
        })
        .collect();
    let mut energies: Vec<f64> = rep.m_values();

    for step in 1..=steps {
        let lam = dl * step as f64;
        let h = ReducedHamiltonian::new(rep, lam)?;
        for block in [h.block(1), h.block(-1)] {
            if block.order() == 0 {
                continue;
            }
            let eig = jacobi_eigen(&block.matrix)?;
            let cols: Vec<DVector<f64>> =
                (0..block.order()).map(|c| embed(dim, &block.indices, eig.vectors.column(c))).collect();
            let mut taken = vec![false; cols.len()];
            for &parent in &block.indices {
                let prev = &tracked[parent];
                let mut ov: Vec<(f64, usize)> = cols.iter().enumerate().map(|(c, v)| (prev.dot(v).abs(), c)).collect();
                ov.sort_by(|a, b| b.0.total_cmp(&a.0));
                if ov.len() > 1 && ov[0].0 - ov[1].0 < AMBIGUITY_THRESHOLD {
                    return Err(Error::AmbiguousLabel { lambda: lam, first: ov[0].0, second: ov[1].0 });
                }
                let c = ov[0].1;
                if taken[c] {
                    return Err(Error::AmbiguousLabel { lambda: lam, first: ov[0].0, second: ov[0].0 });
                }
                taken[c] = true;
                let mut v = cols[c].clone();
                if prev.dot(&v) < 0.0 {
                    v.neg_mut();
                }
                tracked[parent] = v;
                energies[parent] = eig.values[c];
            }
        }
    }

    let entries = (0..dim)
        .map(|k| {
            let mut v = tracked[k].clone();
            fix_sign(&mut v, k);
            SpectrumEntry { m: rep.m_at(k), energy: energies[k], eigvec: v }
        })
        .collect();
    Ok(LabeledSpectrum { lambda, entries })
}

/// p(m,λ) = ⟨ψ̂(m,λ)|Σz|ψ̂(m,λ)⟩.
pub fn polarization(rep: &SpinRep, m: f64, lambda: f64) -> Result<f64> {
    let (_, v) = level(rep, m, lambda)?;
    Ok(v.iter().enumerate().map(|(k, c)| c * c * rep.m_at(k)).sum())
}

/// E(m,λ) and its first three λ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDerivatives {
    pub e: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Central differences with one Richardson level. E′ and E″ use h = 1e-3·max(1,|λ|);
/// E‴ uses h = 1e-2·max(1,|λ|) since its rounding floor grows like ε/h³.
pub fn energy_derivatives(rep: &SpinRep, m: f64, lambda: f64) -> Result<EnergyDerivatives> {
    let e = |x: f64| energy(rep, m, x);
    let e0 = e(lambda)?;
    let scale = lambda.abs().max(1.0);

    let h = 1e-3 * scale;
    let d12 = |h: f64| -> Result<(f64, f64)> {
        let (ep, em) = (e(lambda + h)?, e(lambda - h)?);
        Ok(((ep - em) / (2.0 * h), (ep - 2.0 * e0 + em) / (h * h)))
    };
    let (a1, a2) = d12(h)?;
    let (b1, b2) = d12(h / 2.0)?;

    let h3 = 1e-2 * scale;
    let d3 = |h: f64| -> Result<f64> {
        Ok((e(lambda + 2.0 * h)? - 2.0 * e(lambda + h)? + 2.0 * e(lambda - h)? - e(lambda - 2.0 * h)?)
            / (2.0 * h * h * h))
    };
    let (c3, f3) = (d3(h3)?, d3(h3 / 2.0)?);

    Ok(EnergyDerivatives {
        e: e0,
        d1: (4.0 * b1 - a1) / 3.0,
        d2: (4.0 * b2 - a2) / 3.0,
        d3: (4.0 * f3 - c3) / 3.0,
    })
}

/// Hellmann–Feynman form p = E − λ ∂E/∂λ.
pub fn polarization_hf(rep: &SpinRep, m: f64, lambda: f64) -> Result<f64> {
    let d = energy_derivatives(rep, m, lambda)?;
    Ok(d.e - lambda * d.d1)
}

/// Leading small-λ polarization of the m = 0 level, λ³S(S+2)(S²−1)/8.
///
/// Useful for |λ| ≲ 0.4 at S = 2 and |λ| ≲ 0.12 at S = 3.
pub fn perturbative_polarization_m0(rep: &SpinRep, lambda: f64) -> Result<f64> {
    if rep.two_s() % 2 != 0 || rep.two_s() < 4 {
        return Err(Error::InvalidArgument(format!(
            "the m = 0 cubic formula needs integer S >= 2, got S = {}",
            rep.s()
        )));
    }
    let s = rep.s();
    Ok(lambda.powi(3) * s * (s + 2.0) * (s * s - 1.0) / 8.0)
}
