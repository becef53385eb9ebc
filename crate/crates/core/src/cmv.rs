//! The five-diagonal CMV matrix of multiplication by `e^{iλ}` in the basis
//! `χ_k`, its symmetric/antisymmetric split, and string-equation residuals.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::verblunsky::{OrthonormalBasis, VerblunskySequence};

/// `C_{j,l}` = coefficient of `χ_l` in `e^{iλ}χ_j`, rows and columns `0..size`.
#[derive(Debug, Clone, PartialEq)]
pub struct CmvMatrix {
    pub n: usize,
    pub size: usize,
    pub matrix: DMatrix<f64>,
}

/// `M = (C + Cᵀ)/2`, `L = (C − Cᵀ)/2`; `[cos λ] = M`, `[sin λ] = −iL`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetrizedPair {
    pub m: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

/// Truncated CMV matrix of dimension `size ≤ kmax − 1`.
pub fn build_cmv(vs: &VerblunskySequence, size: usize) -> Result<CmvMatrix> {
    if size + 1 > vs.kmax {
        return Err(Error::IndexDeficit {
            requested: size,
            available: vs.kmax.saturating_sub(1),
        });
    }
    let a = |k: usize| vs.alpha(k);
    let r = |k: usize| vs.rho(k);
    let mut c = DMatrix::zeros(size, size);
    let mut set = |i: usize, j: usize, v: f64| {
        if i < size && j < size {
            c[(i, j)] = v;
        }
    };
    set(0, 0, -a(1));
    set(0, 1, r(1));
    let mut k = 1;
    while 2 * k - 1 < size {
        let odd = 2 * k - 1;
        set(odd, 2 * k - 2, -a(2 * k) * r(2 * k - 1));
        set(odd, 2 * k - 1, -a(2 * k) * a(2 * k - 1));
        if 2 * k < size {
            set(odd, 2 * k, -a(2 * k + 1) * r(2 * k));
            set(odd, 2 * k + 1, r(2 * k) * r(2 * k + 1));
            let even = 2 * k;
            set(even, 2 * k - 2, r(2 * k) * r(2 * k - 1));
            set(even, 2 * k - 1, a(2 * k - 1) * r(2 * k));
            set(even, 2 * k, -a(2 * k + 1) * a(2 * k));
            set(even, 2 * k + 1, a(2 * k) * r(2 * k + 1));
        }
        k += 1;
    }
    Ok(CmvMatrix {
        n: vs.n,
        size,
        matrix: c,
    })
}

impl CmvMatrix {
    pub fn symmetrize(&self) -> SymmetrizedPair {
        let t = self.matrix.transpose();
        SymmetrizedPair {
            m: (&self.matrix + &t) * 0.5,
            l: (&self.matrix - &t) * 0.5,
        }
    }

    /// Largest deviation of `CCᵀ` and `CᵀC` from the identity on the block of
    /// rows and columns at least two away from the truncation edge.
    pub fn interior_unitarity_defect(&self) -> f64 {
        if self.size < 3 {
            return 0.0;
        }
        let inner = self.size - 2;
        let c = &self.matrix;
        let cct = c * c.transpose();
        let ctc = c.transpose() * c;
        let mut worst = 0f64;
        for i in 0..inner {
            for j in 0..inner {
                let id = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((cct[(i, j)] - id).abs()).max((ctc[(i, j)] - id).abs());
            }
        }
        worst
    }

    /// Largest `|i − j|` over nonzero entries.
    pub fn bandwidth(&self) -> usize {
        let mut w = 0;
        for i in 0..self.size {
            for j in 0..self.size {
                if self.matrix[(i, j)] != 0.0 {
                    w = w.max(i.abs_diff(j));
                }
            }
        }
        w
    }
}

/// Right-hand side `i(−1)^{k−1}(k/n)(α_k/ρ_k)` of the integral string equation.
pub fn string_rhs(vs: &VerblunskySequence, k: usize) -> Complex64 {
    let sign = if (k - 1).is_multiple_of(2) { 1.0 } else { -1.0 };
    Complex64::new(0.0, sign * k as f64 / vs.n as f64 * vs.alpha(k) / vs.rho(k))
}

/// `∫ sin λ V'(cos λ) χ_k conj(χ_{k−1}) e^{-nV} dλ − i(−1)^{k−1}(k/n)(α_k/ρ_k)`
/// for `k = 1..=upto`, sharing one adaptive quadrature grid.
pub fn string_residuals_integral(basis: &OrthonormalBasis, vs: &VerblunskySequence, upto: usize) -> Result<Vec<Complex64>> {
    assert!(upto <= basis.kmax && upto >= 1);
    let p = basis.potential();
    let lhs_at = |nodes: usize| -> Vec<Complex64> {
        let mut acc = vec![Complex64::new(0.0, 0.0); upto];
        for m in 0..nodes {
            let lam = -PI + 2.0 * PI * m as f64 / nodes as f64;
            let f = lam.sin() * p.derivative(lam.cos());
            let chi = basis.weighted_values(lam, upto).chi;
            for k in 1..=upto {
                acc[k - 1] += f * chi[k] * chi[k - 1].conj();
            }
        }
        let h = 2.0 * PI / nodes as f64;
        acc.iter().map(|z| z * h).collect()
    };
    let mut nodes = 64.max(4 * (upto + p.degree() * basis.n));
    let mut prev = lhs_at(nodes);
    for _ in 0..10 {
        nodes *= 2;
        let next = lhs_at(nodes);
        let change = next.iter().zip(&prev).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prev = next;
        if change < 1e-13 {
            return Ok((1..=upto).map(|k| prev[k - 1] - string_rhs(vs, k)).collect());
        }
    }
    Err(Error::NonConverged { doublings: 10 })
}

pub fn string_residual_integral(basis: &OrthonormalBasis, vs: &VerblunskySequence, k: usize) -> Result<Complex64> {
    Ok(string_residuals_integral(basis, vs, k)?[k - 1])
}

/// `{L V'(M)}_{N,N−1}` on the window `[N − w, N + w]`.
fn windowed_entry(vs: &VerblunskySequence, p: &Potential, index: usize, window: usize) -> Result<f64> {
    let lo = index.saturating_sub(window);
    let hi = index + window + 1;
    let cmv = build_cmv(vs, hi)?;
    let pair = cmv.symmetrize();
    let dim = hi - lo;
    let m = pair.m.view((lo, lo), (dim, dim)).into_owned();
    let l = pair.l.view((lo, lo), (dim, dim)).into_owned();
    let eig = SymmetricEigen::new(m);
    let dv = eig.eigenvalues.map(|x| p.derivative(x));
    let vp = &eig.eigenvectors * DMatrix::from_diagonal(&dv) * eig.eigenvectors.transpose();
    let prod = l * vp;
    Ok(prod[(index - lo, index - 1 - lo)])
}

/// `|{L V'(M)}_{N,N−1} − (−1)^N (N/n)(α_N/ρ_N)|` for the absolute index `N`.
///
/// The window is certified by comparing against a doubled window when the
/// sequence is long enough, otherwise against a halved one.
pub fn string_residual_matrix(vs: &VerblunskySequence, p: &Potential, index: usize, window: usize) -> Result<f64> {
    assert!(index >= 1 && window >= 1);
    let sign = if index.is_multiple_of(2) { 1.0 } else { -1.0 };
    let rhs = sign * index as f64 / vs.n as f64 * vs.alpha(index) / vs.rho(index);
    let value = windowed_entry(vs, p, index, window)?;
    let residual = (value - rhs).abs();
    let other = if index + 2 * window + 2 <= vs.kmax {
        windowed_entry(vs, p, index, 2 * window)?
    } else if window >= 2 {
        windowed_entry(vs, p, index, window / 2)?
    } else {
        value
    };
    let change = (other - value).abs();
    let floor = 64.0 * f64::EPSILON * value.abs().max(1.0);
    if change > residual.max(floor) {
        return Err(Error::WindowTooSmall { window, change });
    }
    Ok(residual)
}
