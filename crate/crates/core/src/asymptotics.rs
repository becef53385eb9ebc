//! Fourier data of `V'` on the arc, lacunary `B` coefficients, the Toeplitz
//! symbol `δ(φ)`, and the two-term law `α_{n+m} ≈ (−1)^{n+m} s cos(θ/2 + κ m/n)`.

use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::equilibrium::{arc_constants, least_squares, EquilibriumMeasure};
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::verblunsky::VerblunskySequence;

/// Default half-width `ε₁` of the asymptotic window, as a fraction of `n`.
pub const DEFAULT_EPSILON1: f64 = 0.25;
const TAIL_TOL: f64 = 1e-12;
const SATURATED: f64 = 1.0 - 1e-12;

/// `v_k = [π(1+δ_{k0})]^{-1} ∫_{-π}^{π} V'(a + c cos 2φ) cos kφ dφ`, `k = 0..=kmax`.
#[derive(Debug, Clone, Serialize)]
pub struct FourierCoeffs {
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub v: Vec<f64>,
    /// Roundoff bound `N ε max|V'|` of each coefficient.
    pub noise: f64,
}

impl FourierCoeffs {
    pub fn kmax(&self) -> usize {
        self.v.len() - 1
    }

    /// `v_k`, zero beyond the table.
    pub fn get(&self, k: usize) -> f64 {
        self.v.get(k).copied().unwrap_or(0.0)
    }

    /// `v_2 − 2v_0 − 2/c`; vanishes at the normalized `θ`.
    pub fn identity_defect(&self) -> f64 {
        self.get(2) - 2.0 * self.get(0) - 2.0 / self.c
    }

    fn check_tail(&self) -> Result<()> {
        let last = self.kmax() & !1;
        let tail = self.get(last).abs();
        if tail >= TAIL_TOL {
            return Err(Error::TailUnresolved {
                index: last,
                magnitude: tail,
            });
        }
        Ok(())
    }
}

pub fn fourier_v(p: &Potential, theta: f64, kmax: usize) -> FourierCoeffs {
    let (a, b, c) = arc_constants(theta);
    let nodes = (4 * (kmax + 2 * p.degree()) + 64).next_power_of_two();
    let values: Vec<f64> = (0..nodes)
        .map(|j| {
            let phi = -PI + 2.0 * PI * j as f64 / nodes as f64;
            p.derivative(a + c * (2.0 * phi).cos())
        })
        .collect();
    let scale = values.iter().fold(0f64, |m, v| m.max(v.abs())).max(1.0);
    let v: Vec<f64> = (0..=kmax)
        .map(|k| {
            let sum: f64 = values
                .iter()
                .enumerate()
                .map(|(j, f)| f * (k as f64 * (-PI + 2.0 * PI * j as f64 / nodes as f64)).cos())
                .sum();
            let norm = if k == 0 { 2.0 } else { 1.0 };
            sum * 2.0 / (nodes as f64 * norm)
        })
        .collect();
    for k in (1..=kmax).step_by(2) {
        assert!(v[k].abs() < 1e-12 * scale, "odd Fourier coefficient v_{k} = {}", v[k]);
    }
    let noise = nodes as f64 * f64::EPSILON * scale;
    FourierCoeffs {
        theta,
        a,
        b,
        c,
        v,
        noise,
    }
}

/// `B_{2γ}` for `γ = 1..=γmax`.
#[derive(Debug, Clone, Serialize)]
pub struct BTable {
    /// `values[γ-1] = B_{2γ}`.
    pub values: Vec<f64>,
    /// Roundoff level of the tail sums; smaller entries count as zero.
    pub noise: f64,
}

impl BTable {
    pub fn get(&self, gamma: usize) -> f64 {
        self.values[gamma - 1]
    }

    /// `max γ^{5/2} |B_{2γ}|` over `γ ∈ [lo, hi]`, ignoring entries at the noise level.
    pub fn decay_bound(&self, lo: usize, hi: usize) -> f64 {
        (lo..=hi.min(self.values.len()))
            .map(|g| {
                let b = self.get(g).abs();
                if b <= self.noise {
                    0.0
                } else {
                    (g as f64).powf(2.5) * b
                }
            })
            .fold(0.0, f64::max)
    }
}

/// `B_{2γ} = (1/c) Σ_{j−γ ∈ 2ℕ+1} v_{2j}`.
pub fn b_coeffs(fc: &FourierCoeffs, gamma_max: usize) -> Result<BTable> {
    fc.check_tail()?;
    let values = (1..=gamma_max)
        .map(|g| {
            let mut sum = 0.0;
            let mut j = g + 1;
            while 2 * j <= fc.kmax() {
                sum += fc.get(2 * j);
                j += 2;
            }
            sum / fc.c
        })
        .collect();
    let noise = (fc.kmax() / 2) as f64 * fc.noise / fc.c;
    Ok(BTable { values, noise })
}

/// `δ(φ) = √(1 − c cos²(φ/2)) / (π√2) · P(2 arcsin(sin(θ/2) cos(φ/2)))`, using `P` even.
pub fn symbol_delta(em: &EquilibriumMeasure, phi: f64) -> Result<f64> {
    if em.arc.whole_circle {
        return Err(Error::Degenerate("symbol requires an arc support".into()));
    }
    let s = (0.5 * em.theta()).sin();
    let ch = (0.5 * phi).cos();
    let mu = 2.0 * (s * ch).asin();
    Ok((1.0 - em.c * ch * ch).sqrt() / (PI * SQRT_2) * em.p_at(mu)?)
}

/// `δ(φ) = −2(a + c sin²(φ/2)) [Σ_l v_{2l} (−1)^l U_{l−1}(cos φ) 2cos²(φ/2) + v_0]`,
/// with `U_{l−1}(cos φ) = sin lφ / sin φ` by the Chebyshev recurrence.
pub fn symbol_delta_fourier(fc: &FourierCoeffs, phi: f64) -> Result<f64> {
    fc.check_tail()?;
    let x = phi.cos();
    let (mut u_prev, mut u) = (0.0, 1.0); // U_{-1}, U_0
    let mut sum = 0.0;
    let mut l = 1;
    while 2 * l <= fc.kmax() {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        sum += fc.get(2 * l) * sign * u;
        let next = 2.0 * x * u - u_prev;
        u_prev = u;
        u = next;
        l += 1;
    }
    let ch = (0.5 * phi).cos();
    let sh = (0.5 * phi).sin();
    Ok(-2.0 * (fc.a + fc.c * sh * sh) * (sum * 2.0 * ch * ch + fc.get(0)))
}

/// Samples of a symbol on `N` equispaced nodes of `[−π, π)`.
#[derive(Debug, Clone, Serialize)]
pub struct ToeplitzSymbol {
    pub samples: Vec<(f64, f64)>,
}

impl ToeplitzSymbol {
    pub fn sample<F>(mut delta: F, nodes: usize) -> Result<Self>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let samples = (0..nodes)
            .map(|j| {
                let phi = -PI + 2.0 * PI * j as f64 / nodes as f64;
                delta(phi).map(|d| (phi, d))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ToeplitzSymbol { samples })
    }

    fn fourier(&self, l: i64, f: impl Fn(f64) -> f64) -> f64 {
        let n = self.samples.len() as f64;
        self.samples.iter().map(|&(phi, d)| f(d) * (l as f64 * phi).cos()).sum::<f64>() / n
    }

    /// `A_l = (1/2π) ∫ e^{ilφ} δ(φ) dφ`, `l = 0..=lmax`.
    pub fn coeffs(&self, lmax: usize) -> Vec<f64> {
        (0..=lmax as i64).map(|l| self.fourier(l, |d| d)).collect()
    }

    pub fn min(&self) -> (f64, f64) {
        self.samples
            .iter()
            .fold((f64::INFINITY, 0.0), |acc, &(phi, d)| if d < acc.0 { (d, phi) } else { acc })
    }
}

/// `(A⁻¹)_m = (1/2π) ∫ e^{imφ}/δ(φ) dφ`, `m = 0..=mmax`.
pub fn toeplitz_inverse_coeffs(sym: &ToeplitzSymbol, mmax: usize) -> Result<Vec<f64>> {
    let (min, at) = sym.min();
    if min <= 0.0 {
        return Err(Error::SymbolNonpositive { min, at });
    }
    Ok((0..=mmax as i64).map(|m| sym.fourier(m, |d| 1.0 / d)).collect())
}

/// `Σ_m (A⁻¹)_m A_{k−m}` for even sequences stored from index zero.
pub fn convolve_even(a: &[f64], inv: &[f64], k: i64) -> f64 {
    let at = |v: &[f64], i: i64| v.get(i.unsigned_abs() as usize).copied().unwrap_or(0.0);
    let span = inv.len() as i64 - 1;
    (-span..=span).map(|m| at(inv, m) * at(a, k - m)).sum()
}

/// Two-term asymptotic law for `α_{n+m}` on an arc support.
#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticModel {
    pub theta: f64,
    pub s: i8,
    /// `2π√2 / (P(θ) sin θ)`.
    pub slope: f64,
    /// `b / (c δ(0))`, the linearized solution at the symbol level.
    pub symbol_slope: f64,
    pub p_theta: f64,
    pub epsilon1: f64,
}

impl AsymptoticModel {
    pub fn new(em: &EquilibriumMeasure) -> Result<Self> {
        Self::with_window(em, DEFAULT_EPSILON1)
    }

    pub fn with_window(em: &EquilibriumMeasure, epsilon1: f64) -> Result<Self> {
        let p_theta = em
            .p_theta
            .ok_or_else(|| Error::Degenerate("asymptotic model requires an arc support".into()))?;
        let theta = em.theta();
        let delta0 = symbol_delta(em, 0.0)?;
        Ok(AsymptoticModel {
            theta,
            s: 1,
            slope: 2.0 * PI * SQRT_2 / (p_theta * theta.sin()),
            symbol_slope: em.b / (em.c * delta0),
            p_theta,
            epsilon1,
        })
    }

    pub fn with_sign(mut self, s: i8) -> Self {
        self.s = s;
        self
    }

    /// `θ/2 + slope·m/n`, the model phase without the sign pattern.
    pub fn phase(&self, n: usize, m: i64) -> f64 {
        0.5 * self.theta + self.slope * m as f64 / n as f64
    }

    /// `(−1)^{n+m} s cos(θ/2 + slope·m/n)`.
    pub fn predict_alpha(&self, n: usize, m: i64) -> Result<f64> {
        let limit = self.epsilon1 * n as f64;
        if m.unsigned_abs() as f64 > limit {
            return Err(Error::WindowExceeded { n, m, limit });
        }
        Ok(alternating(n, m) * self.s as f64 * self.phase(n, m).cos())
    }
}

fn alternating(n: usize, m: i64) -> f64 {
    if (n as i64 + m).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitPoint {
    pub m: i64,
    pub alpha: f64,
    /// `arccos|α| − θ/2`; `None` when `|α|` is saturated.
    pub x: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub n: usize,
    pub s: i8,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
    pub model_slope: f64,
    pub slope_error: f64,
    pub points: Vec<FitPoint>,
}

/// Sign vote, phase extraction `x_{n+m}` and least-squares fit of `x` against `m/n`.
pub fn fit_prediction(vs: &VerblunskySequence, am: &AsymptoticModel, n: usize, window: &[i64]) -> Result<FitReport> {
    let alphas: Vec<(i64, f64)> = window
        .iter()
        .map(|&m| {
            let k = n as i64 + m;
            if k < 1 || k as usize > vs.kmax {
                return Err(Error::IndexDeficit {
                    requested: k.max(0) as usize,
                    available: vs.kmax,
                });
            }
            Ok((m, vs.alpha(k as usize)))
        })
        .collect::<Result<_>>()?;
    if alphas.iter().all(|(_, a)| a.abs() < 1e-12) {
        return Err(Error::Degenerate("all coefficients vanish; no phase to extract".into()));
    }
    let s = sign_vote(n, &alphas)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let points: Vec<FitPoint> = alphas
        .iter()
        .map(|&(m, alpha)| {
            let x = (alpha.abs() <= SATURATED).then(|| alpha.abs().acos() - 0.5 * am.theta);
            if let Some(x) = x {
                xs.push(m as f64 / n as f64);
                ys.push(x);
            }
            FitPoint { m, alpha, x }
        })
        .collect();
    if xs.len() < 2 {
        return Err(Error::Degenerate("fewer than two usable offsets".into()));
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    let residuals = xs.iter().zip(&ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    Ok(FitReport {
        n,
        s,
        slope,
        intercept,
        residuals,
        model_slope: am.slope,
        slope_error: slope - am.slope,
        points,
    })
}

/// Unanimous `sign((−1)^{n+m} α_{n+m})` over the window.
pub fn sign_vote(n: usize, alphas: &[(i64, f64)]) -> Result<i8> {
    let plus = alphas.iter().filter(|&&(m, a)| alternating(n, m) * a > 0.0).count();
    let total = alphas.len();
    if plus == total {
        Ok(1)
    } else if plus == 0 {
        Ok(-1)
    } else {
        Err(Error::SignInconsistent {
            agree: plus.max(total - plus),
            total,
        })
    }
}

/// `max_m ||α_{n+m}| − cos(θ/2)|` over the window.
pub fn zero_order_deviation(vs: &VerblunskySequence, theta: f64, n: usize, window: &[i64]) -> f64 {
    window
        .iter()
        .map(|&m| (vs.alpha((n as i64 + m) as usize).abs() - (0.5 * theta).cos()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct WholeCircleReport {
    pub n: usize,
    pub max_abs_alpha: f64,
}

/// `max_{m ∈ window} |α_{n+m}|` on a whole-circle support.
pub fn whole_circle_check(vs: &VerblunskySequence, n: usize, window: &[i64]) -> WholeCircleReport {
    let max_abs_alpha = window
        .iter()
        .map(|&m| vs.alpha((n as i64 + m) as usize).abs())
        .fold(0.0, f64::max);
    WholeCircleReport { n, max_abs_alpha }
}

/// Values below this are treated as already vanished in trend checks.
pub const TREND_FLOOR: f64 = 1e-14;

/// True when each value is strictly below its predecessor or has vanished.
pub fn decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0] || w[1].abs() <= TREND_FLOOR)
}

/// True when the maxima decrease along the (increasing) ladder.
pub fn decreasing_along_ladder(reports: &[WholeCircleReport]) -> bool {
    decreasing(&reports.iter().map(|r| r.max_abs_alpha).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve_support;
    use approx::assert_relative_eq;

    /// `B_{α,β} = (1/4π²) ∫∫ W(a + c cos 2u, a + c cos 2v) e^{i(αu + βv)} du dv`,
    /// the divided difference of `V'` replacing the quotient by `cos 2u − cos 2v`.
    fn b_double_integral(p: &Potential, theta: f64, alpha: i64, beta: i64) -> f64 {
        let (a, _, c) = arc_constants(theta);
        let nodes = 128;
        let h = 2.0 * PI / nodes as f64;
        let mut sum = 0.0;
        for i in 0..nodes {
            let u = -PI + h * i as f64;
            for j in 0..nodes {
                let v = -PI + h * j as f64;
                let w = p.derivative_divided_difference(a + c * (2.0 * u).cos(), a + c * (2.0 * v).cos());
                sum += w * (alpha as f64 * u + beta as f64 * v).cos();
            }
        }
        sum * h * h / (4.0 * PI * PI)
    }

    #[test]
    fn gww_fourier_coefficients() {
        let em = solve_support(&Potential::gww(2.0)).unwrap();
        let fc = fourier_v(&Potential::gww(2.0), em.theta(), 16);
        assert_relative_eq!(fc.get(0), -2.0, epsilon = 1e-14);
        assert!(fc.v[1..].iter().all(|v| v.abs() < 1e-14));
        assert!(fc.identity_defect().abs() < 1e-8);
        let b = b_coeffs(&fc, 6).unwrap();
        assert!(b.values.iter().all(|v| v.abs() < 1e-10));
        assert_eq!(b.decay_bound(1, 6), 0.0);
    }

    #[test]
    fn square_potential_fourier_oracle() {
        // V' = 2x = 2a + 2c cos 2φ
        let p = Potential::new(vec![0.0, 1.0]).unwrap();
        let fc = fourier_v(&p, 1.1, 8);
        assert_relative_eq!(fc.get(0), 2.0 * fc.a, epsilon = 1e-14);
        assert_relative_eq!(fc.get(2), 2.0 * fc.c, epsilon = 1e-14);
        assert!(fc.get(1).abs() < 1e-12 && fc.get(3).abs() < 1e-12 && fc.get(4).abs() < 1e-14);
    }

    #[test]
    fn v_identity_on_solved_arcs() {
        for p in [Potential::gww(1.5), Potential::gww(3.0), Potential::new(vec![-2.0, -0.4]).unwrap()] {
            let em = solve_support(&p).unwrap();
            let fc = fourier_v(&p, em.theta(), 16);
            assert!(fc.identity_defect().abs() < 1e-8, "{:?}: {}", p.name(), fc.identity_defect());
        }
    }

    #[test]
    fn b_matches_double_integral() {
        let p = Potential::quartic(-1.0, 0.5);
        let theta = PI / 2.0;
        let b = b_coeffs(&fourier_v(&p, theta, 40), 10).unwrap();
        for (al, be) in [(2, 2), (0, 4), (4, 0), (-2, 2)] {
            let oracle = b_double_integral(&p, theta, al, be);
            assert!((oracle - b.get(2)).abs() < 1e-6, "({al},{be}) {oracle} vs {}", b.get(2));
        }
        assert!((b_double_integral(&p, theta, 2, 0) - b.get(1)).abs() < 1e-6);
        assert!(b_double_integral(&p, theta, 1, 2).abs() < 1e-12);
        let cubic = Potential::new(vec![0.0, 0.0, 1.0]).unwrap();
        let fc = fourier_v(&cubic, 0.9, 20);
        assert_relative_eq!(b_coeffs(&fc, 3).unwrap().get(1), 1.5 * fc.c, epsilon = 1e-13);
    }

    #[test]
    fn tail_must_decay() {
        let p = Potential::new(vec![0.0; 11].into_iter().chain([1.0]).collect()).unwrap();
        let fc = fourier_v(&p, 2.0, 20);
        assert!(matches!(b_coeffs(&fc, 4), Err(Error::TailUnresolved { .. })));
    }

    #[test]
    fn gww_symbol_two_routes() {
        let g = Potential::gww(2.0);
        let em = solve_support(&g).unwrap();
        let fc = fourier_v(&g, em.theta(), 16);
        for j in 0..32 {
            let phi = -PI + 2.0 * PI * j as f64 / 32.0;
            let sh = (0.5 * phi).sin();
            let closed = 2.0 + 2.0 * sh * sh;
            assert!((symbol_delta(&em, phi).unwrap() - closed).abs() < 1e-8);
            assert!((symbol_delta_fourier(&fc, phi).unwrap() - closed).abs() < 1e-12);
        }
        assert_relative_eq!(
            symbol_delta(&em, PI).unwrap(),
            em.p_at(0.0).unwrap() / (PI * SQRT_2),
            max_relative = 1e-14
        );
    }

    #[test]
    fn quartic_symbol_two_routes_at_fixed_arc() {
        let p = Potential::quartic(-1.0, 0.5);
        let theta = PI / 2.0;
        let em = EquilibriumMeasure::arc(&p, theta).unwrap();
        let fc = fourier_v(&p, theta, 24);
        for j in 0..32 {
            let phi = -PI + 2.0 * PI * j as f64 / 32.0;
            let a = symbol_delta(&em, phi).unwrap();
            let b = symbol_delta_fourier(&fc, phi).unwrap();
            assert!((a - b).abs() < 1e-6, "phi = {phi}: {a} vs {b}");
            assert!((a - symbol_delta(&em, -phi).unwrap()).abs() < 1e-12);
        }
        assert!(symbol_delta_fourier(&fc, 0.0).unwrap().is_finite());
    }

    #[test]
    fn toeplitz_inverse_of_constant_and_gww() {
        let sym = ToeplitzSymbol::sample(|_| Ok(4.0), 64).unwrap();
        let inv = toeplitz_inverse_coeffs(&sym, 4).unwrap();
        assert_relative_eq!(inv[0], 0.25, epsilon = 1e-15);
        assert!(inv[1..].iter().all(|v| v.abs() < 1e-15));

        let em = solve_support(&Potential::gww(2.0)).unwrap();
        let sym = ToeplitzSymbol::sample(|phi| symbol_delta(&em, phi), 128).unwrap();
        let a = sym.coeffs(8);
        let inv = toeplitz_inverse_coeffs(&sym, 24).unwrap();
        for k in -2..=2 {
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((convolve_even(&a, &inv, k) - expect).abs() < 1e-6);
        }
        // 1/(3 − cos φ) has coefficients r^|m|/√8 with r = 3 − 2√2
        let r = 3.0 - 2.0 * SQRT_2;
        for m in 0..8 {
            assert!(inv[m].abs() <= 1.01 * r.powi(m as i32) / 8f64.sqrt() + 1e-14);
        }
        let bad = ToeplitzSymbol::sample(|phi| Ok(phi.cos()), 16).unwrap();
        assert!(matches!(toeplitz_inverse_coeffs(&bad, 2), Err(Error::SymbolNonpositive { .. })));
    }

    #[test]
    fn gww_model_constants() {
        let em = solve_support(&Potential::gww(2.0)).unwrap();
        let am = AsymptoticModel::new(&em).unwrap();
        assert!((am.slope - 1.0 / SQRT_2).abs() < 1e-10);
        assert!((am.symbol_slope - 0.5).abs() < 1e-10);
        assert_relative_eq!(am.predict_alpha(40, 0).unwrap(), (PI / 4.0).cos(), epsilon = 1e-9);
        assert_relative_eq!(am.predict_alpha(41, 0).unwrap(), -(PI / 4.0).cos(), epsilon = 1e-9);
        let up = am.predict_alpha(40, 4).unwrap();
        let down = am.predict_alpha(40, -4).unwrap();
        let expect = 2.0 * (PI / 4.0).sin() * (am.slope * 0.1).sin();
        assert_relative_eq!(down - up, expect, epsilon = 1e-12);
        assert!(matches!(am.predict_alpha(20, 6), Err(Error::WindowExceeded { .. })));
        assert!(AsymptoticModel::new(&solve_support(&Potential::gww(0.5)).unwrap()).is_err());
    }

    #[test]
    fn sign_vote_requires_unanimity() {
        assert_eq!(sign_vote(4, &[(0, 0.5), (1, -0.4), (2, 0.3)]).unwrap(), 1);
        assert_eq!(sign_vote(4, &[(0, -0.5), (1, 0.4)]).unwrap(), -1);
        assert_eq!(
            sign_vote(4, &[(0, 0.5), (1, 0.4), (2, 0.3)]).unwrap_err(),
            Error::SignInconsistent { agree: 2, total: 3 }
        );
    }
}
