//! Verblunsky coefficients by Levinson recursion on the moment table, a dense
//! Gram–Schmidt oracle, and the orthonormal system `P_k`, `Q_k`, `χ_k`, `ψ_k`.

use num_complex::Complex64;
use rug::{Assign, Complex, Float};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{decimal_string, parse_decimal, trig_moments, MomentTable};

pub const MAX_PRECISION: u32 = 16384;

/// Starting precision for weight index `n`: `max(128, 10n)` bits.
pub fn default_precision(n: usize) -> u32 {
    (10 * n as u32).max(128)
}

/// Real Verblunsky coefficients `α_1..α_K`, `ρ_1..ρ_K` of `e^{-nV(cos λ)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct VerblunskySequence {
    pub n: usize,
    pub kmax: usize,
    /// `alphas[k-1] = α_k`.
    pub alphas: Vec<Float>,
    /// `rhos[k-1] = ρ_k`.
    pub rhos: Vec<Float>,
    /// `leading_coeffs[k] = c_{k,k}` for `k = 0..=K`.
    pub leading_coeffs: Vec<Float>,
    pub precision_used: u32,
    /// `max_k |α_k² + ρ_k² − 1|`.
    pub max_residual: f64,
}

impl VerblunskySequence {
    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k - 1].to_f64()
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rhos[k - 1].to_f64()
    }

    pub fn alphas_f64(&self) -> Vec<f64> {
        self.alphas.iter().map(Float::to_f64).collect()
    }

    /// `‖Φ_k‖² = 1/c_{k,k}²`.
    pub fn norm_squared(&self, k: usize) -> Float {
        let c = &self.leading_coeffs[k];
        Float::with_val(self.precision_used, c * c).recip()
    }

    /// Residual budget `2^{-precision/4}`.
    pub fn residual_bound(&self) -> f64 {
        2f64.powi(-(self.precision_used as i32) / 4)
    }
}

#[derive(Serialize, Deserialize)]
struct SequenceRepr {
    n: usize,
    kmax: usize,
    precision_used: u32,
    max_residual: f64,
    alphas: Vec<String>,
    rhos: Vec<String>,
    leading_coeffs: Vec<String>,
}

impl Serialize for VerblunskySequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SequenceRepr {
            n: self.n,
            kmax: self.kmax,
            precision_used: self.precision_used,
            max_residual: self.max_residual,
            alphas: self.alphas.iter().map(decimal_string).collect(),
            rhos: self.rhos.iter().map(decimal_string).collect(),
            leading_coeffs: self.leading_coeffs.iter().map(decimal_string).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for VerblunskySequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = SequenceRepr::deserialize(d)?;
        let parse = |v: &[String]| {
            v.iter()
                .map(|s| parse_decimal(s, r.precision_used).map_err(serde::de::Error::custom))
                .collect::<std::result::Result<Vec<_>, D::Error>>()
        };
        Ok(VerblunskySequence {
            n: r.n,
            kmax: r.kmax,
            alphas: parse(&r.alphas)?,
            rhos: parse(&r.rhos)?,
            leading_coeffs: parse(&r.leading_coeffs)?,
            precision_used: r.precision_used,
            max_residual: r.max_residual,
        })
    }
}

/// Levinson recursion on the Toeplitz matrix of `mt`.
///
/// Monic `Φ_{k+1}(z) = zΦ_k(z) + α_{k+1}Φ_k^*(z)` with `α_{k+1} = Φ_{k+1}(0)`,
/// so `α_k = c_{k,0}/c_{k,k}` for the orthonormal `P_k = c_{k,k}Φ_k`. The norms
/// `‖Φ_k‖² = Σ_j φ_{k,j} c_{k−j}` are formed directly from the moments, which
/// makes `α_k² + ρ_k² = 1` a genuine check. Fails with `PrecisionExhausted`
/// when that residual exceeds `2^{-precision/4}`.
pub fn levinson(mt: &MomentTable, kmax: usize, precision: u32) -> Result<VerblunskySequence> {
    if kmax > mt.k_max {
        return Err(Error::MomentDeficit {
            requested: kmax,
            available: mt.k_max,
        });
    }
    let precision = precision.max(mt.precision);
    let c: Vec<Float> = mt.moments.iter().map(|m| Float::with_val(precision, m)).collect();
    let bound = 2f64.powi(-(precision as i32) / 4);
    let exhausted = |residual: f64| Error::PrecisionExhausted {
        residual,
        max_precision: precision,
    };

    let mut phi = vec![Float::with_val(precision, 1)];
    let mut e_rec = c[0].clone();
    let mut norms = vec![c[0].clone()];
    let mut alphas = Vec::with_capacity(kmax);
    let mut acc = Float::new(precision);
    let mut term = Float::new(precision);
    for k in 0..kmax {
        acc.assign(0);
        for (j, f) in phi.iter().enumerate() {
            term.assign(f * &c[j + 1]);
            acc += &term;
        }
        let alpha = -Float::with_val(precision, &acc / &e_rec);
        if alpha.clone().abs() >= 1 || !alpha.is_finite() {
            return Err(exhausted(f64::INFINITY));
        }
        let mut next = Vec::with_capacity(k + 2);
        next.push(Float::with_val(precision, &alpha * &phi[k]));
        for j in 1..=k {
            let mut v = Float::with_val(precision, &alpha * &phi[k - j]);
            v += &phi[j - 1];
            next.push(v);
        }
        next.push(Float::with_val(precision, 1));
        phi = next;
        let one_minus = Float::with_val(precision, 1 - Float::with_val(precision, alpha.square_ref()));
        e_rec *= &one_minus;

        acc.assign(0);
        for (j, f) in phi.iter().enumerate() {
            term.assign(f * &c[k + 1 - j]);
            acc += &term;
        }
        if acc <= 0 {
            return Err(exhausted(f64::INFINITY));
        }
        norms.push(acc.clone());
        alphas.push(alpha);
    }

    let mut rhos = Vec::with_capacity(kmax);
    let mut max_residual = 0f64;
    for k in 1..=kmax {
        let rho = Float::with_val(precision, &norms[k] / &norms[k - 1]).sqrt();
        let mut r = Float::with_val(precision, alphas[k - 1].square_ref());
        r += Float::with_val(precision, rho.square_ref());
        r -= 1;
        max_residual = max_residual.max(r.to_f64().abs());
        rhos.push(rho);
    }
    if max_residual > bound {
        return Err(exhausted(max_residual));
    }
    let leading_coeffs = norms.iter().map(|e| Float::with_val(precision, e.sqrt_ref()).recip()).collect();
    Ok(VerblunskySequence {
        n: mt.n,
        kmax,
        alphas,
        rhos,
        leading_coeffs,
        precision_used: precision,
        max_residual,
    })
}

/// Moments plus Levinson, doubling the precision until the `α² + ρ² = 1`
/// residual clears `2^{-precision/4}` or `max_precision` is passed.
pub fn compute_sequence(
    p: &Potential,
    n: usize,
    kmax: usize,
    precision: u32,
    max_precision: u32,
) -> Result<VerblunskySequence> {
    let mut prec = precision.max(53);
    loop {
        let attempt = trig_moments(p, n, kmax, prec).and_then(|mt| levinson(&mt, kmax, prec));
        match attempt {
            Ok(vs) => return Ok(vs),
            Err(Error::PrecisionExhausted { .. }) | Err(Error::NonConverged { .. })
                if prec * 2 <= max_precision =>
            {
                prec *= 2
            }
            Err(Error::PrecisionExhausted { residual, .. }) => {
                return Err(Error::PrecisionExhausted {
                    residual,
                    max_precision: prec,
                })
            }
            Err(e) => return Err(e),
        }
    }
}

/// Verblunsky sequence at the default precision schedule.
pub fn verblunsky(p: &Potential, n: usize, kmax: usize) -> Result<VerblunskySequence> {
    compute_sequence(p, n, kmax, default_precision(n), MAX_PRECISION)
}

/// Orthonormalizes `1, z, ..., z^K` against a Gram matrix assembled from its
/// own quadrature node sums, with modified Gram–Schmidt and one
/// reorthogonalization pass.
pub fn gram_schmidt_oracle(p: &Potential, n: usize, kmax: usize, precision: u32) -> Result<VerblunskySequence> {
    assert!(kmax <= 16, "the dense oracle is limited to kmax <= 16");
    let gram = oracle_gram(p, n, kmax, precision)?;
    let dim = kmax + 1;
    let inner = |u: &[Float], v: &[Float]| {
        let mut s = Float::with_val(precision, 0);
        for j in 0..dim {
            if u[j].is_zero() {
                continue;
            }
            for l in 0..dim {
                s += Float::with_val(precision, &u[j] * &v[l]) * &gram[j][l];
            }
        }
        s
    };
    let mut basis: Vec<Vec<Float>> = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut v: Vec<Float> = (0..dim).map(|j| Float::with_val(precision, (j == k) as u32)).collect();
        for _pass in 0..2 {
            for q in &basis {
                let proj = inner(&v, q);
                for (vj, qj) in v.iter_mut().zip(q) {
                    *vj -= Float::with_val(precision, &proj * qj);
                }
            }
        }
        let norm = inner(&v, &v);
        if norm <= 0 {
            return Err(Error::PrecisionExhausted {
                residual: f64::INFINITY,
                max_precision: precision,
            });
        }
        let norm = norm.sqrt();
        for vj in v.iter_mut() {
            *vj /= &norm;
        }
        basis.push(v);
    }
    let leading: Vec<Float> = (0..dim).map(|k| basis[k][k].clone()).collect();
    let mut alphas = Vec::with_capacity(kmax);
    let mut rhos = Vec::with_capacity(kmax);
    let mut max_residual = 0f64;
    for k in 1..=kmax {
        let alpha = Float::with_val(precision, &basis[k][0] / &leading[k]);
        let rho = Float::with_val(precision, &leading[k - 1] / &leading[k]);
        let mut r = Float::with_val(precision, alpha.square_ref());
        r += Float::with_val(precision, rho.square_ref());
        r -= 1;
        max_residual = max_residual.max(r.to_f64().abs());
        alphas.push(alpha);
        rhos.push(rho);
    }
    Ok(VerblunskySequence {
        n,
        kmax,
        alphas,
        rhos,
        leading_coeffs: leading,
        precision_used: precision,
        max_residual,
    })
}

/// `G_{jl} = ∫ e^{i(j−l)λ} w dλ` from node sums of `Re(z^j z̄^l) w`, doubling
/// the node count until the matrix is stable.
fn oracle_gram(p: &Potential, n: usize, kmax: usize, precision: u32) -> Result<Vec<Vec<Float>>> {
    let dim = kmax + 1;
    let assemble = |nodes: usize| -> Result<Vec<Vec<Float>>> {
        let pi = Float::with_val(precision, rug::float::Constant::Pi);
        let mut g = vec![vec![Float::with_val(precision, 0); dim]; dim];
        for m in 0..nodes {
            let lambda = Float::with_val(precision, &pi * (2 * m) as u32) / nodes as u32;
            let w = p.weight_mp(n, &lambda)?;
            let (s, c) = lambda.sin_cos(Float::new(precision));
            let z = Complex::with_val(precision, (c, s));
            let mut powers = Vec::with_capacity(dim);
            let mut zp = Complex::with_val(precision, 1);
            for _ in 0..dim {
                powers.push(zp.clone());
                zp *= &z;
            }
            let conj: Vec<Complex> = powers.iter().map(|z| Complex::with_val(precision, z.conj_ref())).collect();
            for j in 0..dim {
                for l in 0..dim {
                    let prod = Complex::with_val(precision, &powers[j] * &conj[l]);
                    g[j][l] += Float::with_val(precision, prod.real() * &w);
                }
            }
        }
        let scale = Float::with_val(precision, &pi * 2u32) / nodes as u32;
        for row in g.iter_mut() {
            for v in row.iter_mut() {
                *v *= &scale;
            }
        }
        Ok(g)
    };
    let mut nodes = 64 + 4 * kmax;
    let mut g = assemble(nodes)?;
    for _ in 0..12 {
        nodes *= 2;
        let next = assemble(nodes)?;
        let tol = Float::with_val(precision, &next[0][0]) >> (precision as i32 - 32);
        let stable = g
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .all(|(a, b)| Float::with_val(precision, a - b).abs() <= tol);
        g = next;
        if stable {
            return Ok(g);
        }
    }
    Err(Error::NonConverged { doublings: 12 })
}

/// Orthonormal polynomials `P_k`, reversed `Q_k = P_k^*`, the alternating
/// system `χ_k`, and the weighted functions `ψ_k = P_k e^{-nV/2}`.
#[derive(Debug, Clone)]
pub struct OrthonormalBasis {
    pub n: usize,
    pub kmax: usize,
    potential: Potential,
    alphas: Vec<Float>,
    leading: Vec<Float>,
    precision: u32,
    /// `coeffs[k][l] = c_{k,l}`, coefficient of `z^l` in `P_k`.
    coeffs: Vec<Vec<Float>>,
}

/// Values of the system at one angle, each multiplied by `e^{-nV(cos λ)/2}`.
#[derive(Debug, Clone)]
pub struct WeightedValues {
    /// `ψ_k = P_k e^{-nV/2}`.
    pub p: Vec<Complex64>,
    /// `Q_k e^{-nV/2}`.
    pub q: Vec<Complex64>,
    /// `χ_k e^{-nV/2}`.
    pub chi: Vec<Complex64>,
}

impl OrthonormalBasis {
    pub fn new(p: &Potential, vs: &VerblunskySequence) -> Self {
        let prec = vs.precision_used;
        let mut monic = vec![vec![Float::with_val(prec, 1)]];
        for k in 0..vs.kmax {
            let phi = &monic[k];
            let alpha = &vs.alphas[k];
            let mut next = Vec::with_capacity(k + 2);
            next.push(Float::with_val(prec, alpha * &phi[k]));
            for j in 1..=k {
                next.push(Float::with_val(prec, alpha * &phi[k - j]) + &phi[j - 1]);
            }
            next.push(Float::with_val(prec, 1));
            monic.push(next);
        }
        let coeffs = monic
            .into_iter()
            .zip(&vs.leading_coeffs)
            .map(|(row, c)| row.into_iter().map(|v| v * c).collect())
            .collect();
        OrthonormalBasis {
            n: vs.n,
            kmax: vs.kmax,
            potential: p.clone(),
            alphas: vs.alphas.clone(),
            leading: vs.leading_coeffs.clone(),
            precision: vs.precision_used,
            coeffs,
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `c_{k,l}`.
    pub fn coefficient(&self, k: usize, l: usize) -> &Float {
        &self.coeffs[k][l]
    }

    /// Szegő recursion at `z = e^{iλ}` for `k ≤ upto`, scaled by `scale`.
    fn szego(&self, lambda: f64, upto: usize, scale: &Float) -> (Vec<Complex>, Vec<Complex>) {
        assert!(upto <= self.kmax, "index {upto} beyond kmax {}", self.kmax);
        let prec = self.precision;
        let lam = Float::with_val(prec, lambda);
        let (s, c) = lam.sin_cos(Float::new(prec));
        let z = Complex::with_val(prec, (c, s));
        let mut phi = Complex::with_val(prec, 1);
        let mut phis = Complex::with_val(prec, 1);
        let mut ps = Vec::with_capacity(upto + 1);
        let mut qs = Vec::with_capacity(upto + 1);
        let mut zphi = Complex::new(prec);
        for k in 0..=upto {
            let norm = Float::with_val(prec, &self.leading[k] * scale);
            ps.push(Complex::with_val(prec, &phi * &norm));
            qs.push(Complex::with_val(prec, &phis * &norm));
            if k == upto {
                break;
            }
            let alpha = &self.alphas[k];
            zphi.assign(&z * &phi);
            phi.assign(&phis * alpha);
            phi += &zphi;
            phis += Complex::with_val(prec, &zphi * alpha);
        }
        (ps, qs)
    }

    fn half_weight(&self, lambda: f64) -> Float {
        let prec = self.precision;
        let x = Float::with_val(prec, Float::with_val(prec, lambda).cos_ref());
        let v = self.potential.eval_mp(&x) * (self.n as f64) / 2u32;
        (-v).exp()
    }

    /// `P_k, Q_k, χ_k` times `e^{-nV(cos λ)/2}` for `k ≤ upto`.
    pub fn weighted_values(&self, lambda: f64, upto: usize) -> WeightedValues {
        let hw = self.half_weight(lambda);
        let (ps, qs) = self.szego(lambda, upto, &hw);
        let p: Vec<Complex64> = ps.iter().map(to_c64).collect();
        let q: Vec<Complex64> = qs.iter().map(to_c64).collect();
        let chi = (0..=upto).map(|k| chi_from(&p, &q, k, lambda)).collect();
        WeightedValues { p, q, chi }
    }

    pub fn eval_p(&self, k: usize, lambda: f64) -> Complex64 {
        let one = Float::with_val(self.precision, 1);
        to_c64(&self.szego(lambda, k, &one).0[k])
    }

    /// `Q_k = P_k^*`, equal to `e^{ikλ} P_k(−λ)` on the circle for real coefficients.
    pub fn eval_q(&self, k: usize, lambda: f64) -> Complex64 {
        let one = Float::with_val(self.precision, 1);
        to_c64(&self.szego(lambda, k, &one).1[k])
    }

    /// `χ_{2j} = e^{-ijλ} Q_{2j}`, `χ_{2j+1} = e^{-ijλ} P_{2j+1}`.
    pub fn eval_chi(&self, k: usize, lambda: f64) -> Complex64 {
        let one = Float::with_val(self.precision, 1);
        let (ps, qs) = self.szego(lambda, k, &one);
        let p: Vec<Complex64> = ps.iter().map(to_c64).collect();
        let q: Vec<Complex64> = qs.iter().map(to_c64).collect();
        chi_from(&p, &q, k, lambda)
    }

    /// `ψ_k = P_k e^{-nV/2}`.
    pub fn eval_psi(&self, k: usize, lambda: f64) -> Complex64 {
        self.weighted_values(lambda, k).p[k]
    }

    /// `K_{k,n}(λ, μ) = Σ_{l<k} ψ_l(λ) conj(ψ_l(μ))`.
    pub fn kernel(&self, k: usize, lambda: f64, mu: f64) -> Complex64 {
        let a = self.weighted_values(lambda, k.saturating_sub(1)).p;
        let b = self.weighted_values(mu, k.saturating_sub(1)).p;
        a.iter().zip(&b).take(k).map(|(x, y)| x * y.conj()).sum()
    }

    /// `ρ_{k,n}(λ) = K_{k,n}(λ, λ)/n`.
    pub fn kernel_density(&self, k: usize, lambda: f64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        let v = self.weighted_values(lambda, k - 1).p;
        v.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.n as f64
    }
}

fn chi_from(p: &[Complex64], q: &[Complex64], k: usize, lambda: f64) -> Complex64 {
    let j = (k / 2) as f64;
    let phase = Complex64::from_polar(1.0, -j * lambda);
    if k.is_multiple_of(2) {
        phase * q[k]
    } else {
        phase * p[k]
    }
}

fn to_c64(z: &Complex) -> Complex64 {
    Complex64::new(z.real().to_f64(), z.imag().to_f64())
}
