//! One-arc equilibrium measure: support `[-θ, θ]`, density `ρ = χP/4π²`,
//! edge function `P`, and effective potential `u`.

use serde::Serialize;
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{chi_squared, edge_map, edge_regularized_integral_tol, periodic_trapezoid_f64};

const QUAD_TOL: f64 = 1e-14;
const THETA_LO: f64 = 0.01;
const THETA_HI: f64 = PI - 0.01;
const BISECTION_ITERS: usize = 200;
const NEGATIVE_DENSITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportArc {
    pub theta: f64,
    pub whole_circle: bool,
}

impl SupportArc {
    pub fn arc(theta: f64) -> Self {
        SupportArc {
            theta,
            whole_circle: false,
        }
    }

    pub fn whole() -> Self {
        SupportArc {
            theta: PI,
            whole_circle: true,
        }
    }
}

/// Arc constants `a = cos²(θ/2)`, `b = cos(θ/2) sin(θ/2)`, `c = sin²(θ/2)`.
pub fn arc_constants(theta: f64) -> (f64, f64, f64) {
    let (s, c) = (0.5 * theta).sin_cos();
    (c * c, c * s, s * s)
}

/// `P(λ) = ∫_{-θ}^{θ} [(V(cos μ))' − (V(cos λ))'] / sin((μ−λ)/2) dμ/χ(μ)`.
pub fn compute_p(p: &Potential, theta: f64, lambda: f64) -> Result<f64> {
    edge_regularized_integral_tol(|mu| p.angular_difference_quotient(mu, lambda), theta, QUAD_TOL)
}

/// `ρ(λ) = χ(λ) P(λ) / 4π²` on the arc, zero outside.
pub fn rho(p: &Potential, theta: f64, lambda: f64) -> Result<f64> {
    if lambda.abs() >= theta {
        return Ok(0.0);
    }
    let chi = chi_squared(theta, lambda).max(0.0).sqrt();
    Ok(chi * compute_p(p, theta, lambda)? / (4.0 * PI * PI))
}

/// `∫ρ` over the arc `[-θ, θ]`, as `(1/4π²) ∫ χ² P dμ/χ`.
pub fn arc_mass(p: &Potential, theta: f64) -> Result<f64> {
    let mut failure = None;
    let integral = edge_regularized_integral_tol(
        |mu| match compute_p(p, theta, mu) {
            Ok(pv) => chi_squared(theta, mu) * pv,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        theta,
        QUAD_TOL,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(integral / (4.0 * PI * PI))
}

/// Density when the support is the whole circle,
/// `1/2π + (1/4π²) ∫ cot((λ−μ)/2) [(V(cos λ))' − (V(cos μ))'] dμ`.
pub fn rho_whole_circle(p: &Potential, lambda: f64) -> Result<f64> {
    let integral = periodic_trapezoid_f64(
        |mu| (0.5 * (lambda - mu)).cos() * p.angular_difference_quotient(lambda, mu),
        -PI,
        QUAD_TOL,
    )?;
    Ok(1.0 / (2.0 * PI) + integral / (4.0 * PI * PI))
}

/// Solved equilibrium problem for a potential.
#[derive(Debug, Clone)]
pub struct EquilibriumMeasure {
    potential: Potential,
    pub arc: SupportArc,
    /// `P(θ)`; `None` on the whole circle.
    pub p_theta: Option<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub mass: f64,
}

/// Finds `θ` with unit arc mass by bisection, or takes the whole circle when
/// the mass stays below one as `θ → π`.
pub fn solve_support(p: &Potential) -> Result<EquilibriumMeasure> {
    if p.is_zero() {
        return Ok(EquilibriumMeasure::whole_circle(p));
    }
    let m_lo = arc_mass(p, THETA_LO)?;
    let m_hi = arc_mass(p, THETA_HI)?;
    if m_hi < 1.0 {
        let em = EquilibriumMeasure::whole_circle(p);
        em.check_nonnegative()?;
        return Ok(em);
    }
    if m_lo > 1.0 {
        return Err(Error::NoArcSolution(format!(
            "mass {m_lo} already exceeds one at theta = {THETA_LO}"
        )));
    }
    let coarse = 16;
    let mut prev = m_lo;
    for i in 1..=coarse {
        let th = THETA_LO + (THETA_HI - THETA_LO) * i as f64 / coarse as f64;
        let m = arc_mass(p, th)?;
        if m < prev {
            return Err(Error::NoArcSolution(format!(
                "mass decreases from {prev} to {m} near theta = {th}"
            )));
        }
        prev = m;
    }
    let (mut lo, mut hi) = (THETA_LO, THETA_HI);
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if arc_mass(p, mid)? < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let em = EquilibriumMeasure::arc(p, theta)?;
    em.check_nonnegative()?;
    Ok(em)
}

impl EquilibriumMeasure {
    /// Measure on a given arc without normalization; useful for probing
    /// symbol identities away from the solved `θ`.
    pub fn arc(p: &Potential, theta: f64) -> Result<Self> {
        let (a, b, c) = arc_constants(theta);
        Ok(EquilibriumMeasure {
            potential: p.clone(),
            arc: SupportArc::arc(theta),
            p_theta: Some(compute_p(p, theta, theta)?),
            a,
            b,
            c,
            mass: arc_mass(p, theta)?,
        })
    }

    pub fn whole_circle(p: &Potential) -> Self {
        EquilibriumMeasure {
            potential: p.clone(),
            arc: SupportArc::whole(),
            p_theta: None,
            a: 0.0,
            b: 0.0,
            c: 1.0,
            mass: 1.0,
        }
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn theta(&self) -> f64 {
        self.arc.theta
    }

    pub fn p_at(&self, lambda: f64) -> Result<f64> {
        if self.arc.whole_circle {
            return Err(Error::Degenerate("P is defined only for an arc support".into()));
        }
        compute_p(&self.potential, self.arc.theta, lambda)
    }

    pub fn rho_at(&self, lambda: f64) -> Result<f64> {
        if self.arc.whole_circle {
            rho_whole_circle(&self.potential, lambda)
        } else {
            rho(&self.potential, self.arc.theta, lambda)
        }
    }

    fn check_nonnegative(&self) -> Result<()> {
        let theta = self.arc.theta;
        let count = 200;
        for i in 0..=count {
            let lambda = -theta + 2.0 * theta * (i as f64 + 0.5) / (count as f64 + 1.0);
            let r = self.rho_at(lambda)?;
            if r < -NEGATIVE_DENSITY_TOL {
                return Err(Error::NegativeDensity { min: r, at: lambda });
            }
        }
        Ok(())
    }

    /// `G(t)` with `ρ(μ) dμ = G(t) dt` under `sin(μ/2) = sin(θ/2) sin t`.
    fn arc_density_in_t(&self, t: f64) -> Result<f64> {
        let s = (0.5 * self.arc.theta).sin();
        let mu = edge_map(self.arc.theta, t);
        let ct = t.cos();
        Ok(SQRT_2 * s * s * ct * ct * self.p_at(mu)? / (2.0 * PI * PI * (0.5 * mu).cos()))
    }

    /// `∫ log|e^{iλ} − e^{iμ}| ρ(μ) dμ`.
    pub fn log_potential(&self, lambda: f64) -> Result<f64> {
        if self.arc.whole_circle {
            return kress_log_integral(lambda, |mu| self.rho_at(mu));
        }
        let theta = self.arc.theta;
        let s = (0.5 * theta).sin();
        if lambda.abs() < theta {
            // Evenness of ρ turns the kernel into log(2|cos μ − cos λ|), which
            // factorizes in t as log s² + L(τ − τ0) + L(τ + τ0) with τ = 2t.
            let t0 = ((0.5 * lambda).sin() / s).clamp(-1.0, 1.0).asin();
            let tau0 = 2.0 * t0;
            let paired = kress_log_integral_pair(tau0, |tau| self.arc_density_in_t(0.5 * tau))?;
            Ok(0.25 * (2.0 * (s * s).ln() * self.mass + paired))
        } else {
            let mut failure = None;
            let integral = periodic_trapezoid_f64(
                |t| {
                    let mu = edge_map(theta, t);
                    match self.arc_density_in_t(t) {
                        Ok(g) => (2.0 * (mu.cos() - lambda.cos()).abs()).ln() * g,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                -PI,
                QUAD_TOL,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(0.25 * integral)
        }
    }

    /// `u(λ) = V(cos λ) − 2 ∫ log|e^{iλ} − e^{iμ}| ρ(μ) dμ`.
    pub fn effective_potential(&self, lambda: f64) -> Result<f64> {
        Ok(self.potential.eval(lambda.cos()) - 2.0 * self.log_potential(lambda)?)
    }

    /// Effective potential sampled on the support, with its minimum.
    pub fn effective_potential_profile(&self, points: usize) -> Result<EffectivePotential> {
        let theta = self.arc.theta;
        let mut samples = Vec::with_capacity(points);
        for i in 0..points {
            let lambda = -theta + 2.0 * theta * (i as f64 + 0.5) / points as f64;
            samples.push((lambda, self.effective_potential(lambda)?));
        }
        let u_min = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
        Ok(EffectivePotential { samples, u_min })
    }

    /// `PV ∫ cot((λ−μ)/2) ρ(μ) dμ` for `λ` strictly inside the arc, `λ ≠ 0`.
    pub fn conjugate_density(&self, lambda: f64) -> Result<f64> {
        if self.arc.whole_circle {
            return Err(Error::Degenerate("arc support required".into()));
        }
        let theta = self.arc.theta;
        let s = (0.5 * theta).sin();
        let tau0 = 2.0 * ((0.5 * lambda).sin() / s).asin();
        let mut prev = f64::NAN;
        let mut nodes = 64;
        for _ in 0..16 {
            let mut sum = 0.0;
            for j in 0..nodes {
                let tau = tau0 + (2 * j + 1) as f64 * PI / nodes as f64;
                let cot = 1.0 / (0.5 * (tau0 - tau)).tan();
                sum += cot * self.arc_density_in_t(0.5 * tau)?;
            }
            let h = 2.0 * PI * sum / nodes as f64;
            if (h - prev).abs() <= 1e-13 * h.abs().max(1.0) {
                return Ok(lambda.sin() * h / (2.0 * s * s * tau0.sin()));
            }
            prev = h;
            nodes *= 2;
        }
        Err(Error::NonConverged { doublings: 16 })
    }

    /// C1–C3 diagnostics; failures are reported, not raised.
    pub fn check_conditions(&self) -> Result<ConditionReport> {
        if self.arc.whole_circle {
            let mut min_rho = f64::INFINITY;
            for i in 0..128 {
                let lambda = -PI + 2.0 * PI * i as f64 / 128.0;
                min_rho = min_rho.min(self.rho_at(lambda)?);
            }
            return Ok(ConditionReport {
                whole_circle: true,
                min_interior_rho: min_rho,
                density_positive: min_rho > 0.0,
                edge_exponents: None,
                edge_exponents_ok: None,
                interior_u_spread: None,
                exterior_u_margin: None,
                u_minimal_on_support: None,
            });
        }
        let theta = self.arc.theta;
        let mut min_rho = f64::INFINITY;
        let interior = 100;
        for i in 0..interior {
            let lambda = -theta + 2.0 * theta * (i as f64 + 0.5) / interior as f64;
            // Exclude the edge layer where ρ vanishes by design.
            if theta - lambda.abs() < 1e-3 {
                continue;
            }
            min_rho = min_rho.min(self.rho_at(lambda)?);
        }
        let right = self.edge_exponent(1.0)?;
        let left = self.edge_exponent(-1.0)?;
        let in_range = |e: f64| (0.45..=0.55).contains(&e);
        let profile = self.effective_potential_profile(50)?;
        let spread = profile
            .samples
            .iter()
            .map(|s| s.1 - profile.u_min)
            .fold(0.0, f64::max);
        let mut exterior_margin = f64::INFINITY;
        let outside = 40;
        for i in 0..outside {
            let lambda = theta + (PI - theta) * (i as f64 + 1.0) / outside as f64;
            exterior_margin = exterior_margin.min(self.effective_potential(lambda)? - profile.u_min);
        }
        Ok(ConditionReport {
            whole_circle: false,
            min_interior_rho: min_rho,
            density_positive: min_rho > 0.0,
            edge_exponents: Some((left, right)),
            edge_exponents_ok: Some(in_range(left) && in_range(right)),
            interior_u_spread: Some(spread),
            exterior_u_margin: Some(exterior_margin),
            u_minimal_on_support: Some(spread <= 1e-6 && exterior_margin >= -1e-6),
        })
    }

    /// Least-squares exponent of `ρ ~ |λ ∓ θ|^e` over 20 log-spaced distances in `[1e-3, 1e-1]`.
    pub fn edge_exponent(&self, side: f64) -> Result<f64> {
        let theta = self.arc.theta;
        let points = 20;
        let mut xs = Vec::with_capacity(points);
        let mut ys = Vec::with_capacity(points);
        for i in 0..points {
            let d = 10f64.powf(-3.0 + 2.0 * i as f64 / (points - 1) as f64);
            let lambda = side * (theta - d);
            xs.push(d.ln());
            ys.push(self.rho_at(lambda)?.ln());
        }
        Ok(least_squares(&xs, &ys).0)
    }
}

/// Slope and intercept of the least-squares line through `(x, y)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Serialize)]
pub struct EffectivePotential {
    pub samples: Vec<(f64, f64)>,
    pub u_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub whole_circle: bool,
    pub min_interior_rho: f64,
    pub density_positive: bool,
    pub edge_exponents: Option<(f64, f64)>,
    pub edge_exponents_ok: Option<bool>,
    pub interior_u_spread: Option<f64>,
    pub exterior_u_margin: Option<f64>,
    pub u_minimal_on_support: Option<bool>,
}

impl ConditionReport {
    pub fn all_pass(&self) -> bool {
        self.density_positive
            && self.edge_exponents_ok.unwrap_or(true)
            && self.u_minimal_on_support.unwrap_or(true)
    }
}

/// Kress weights for `∫_{-π}^{π} log|2 sin((x0 − x)/2)| f(x) dx` on `N` equispaced nodes.
fn kress_weights(x0: f64, nodes: usize) -> Vec<f64> {
    let half = nodes / 2;
    (0..nodes)
        .map(|j| {
            let xj = -PI + 2.0 * PI * j as f64 / nodes as f64;
            let d = x0 - xj;
            let mut sum = 0.0;
            for m in 1..half {
                sum += (m as f64 * d).cos() / m as f64;
            }
            sum += (half as f64 * d).cos() / nodes as f64;
            -2.0 * PI / nodes as f64 * sum
        })
        .collect()
}

fn kress_adaptive<F>(x0: f64, f: F, paired: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut nodes = 32;
    let mut prev = f64::NAN;
    for _ in 0..12 {
        let values: Vec<f64> = (0..nodes)
            .map(|j| f(-PI + 2.0 * PI * j as f64 / nodes as f64))
            .collect::<Result<_>>()?;
        let mut total = dot(&kress_weights(x0, nodes), &values);
        if paired {
            total += dot(&kress_weights(-x0, nodes), &values);
        }
        let scale = values.iter().map(|v| v.abs()).sum::<f64>() * 2.0 * PI / nodes as f64;
        if (total - prev).abs() <= 1e-13 * scale.max(1e-300) {
            return Ok(total);
        }
        prev = total;
        nodes *= 2;
    }
    Err(Error::NonConverged { doublings: 12 })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn kress_log_integral<F>(x0: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    kress_adaptive(x0, f, false)
}

/// `∫ [L(x − x0) + L(x + x0)] f(x) dx` with `L(x) = log|2 sin(x/2)|`.
fn kress_log_integral_pair<F>(x0: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    kress_adaptive(x0, f, true)
}
