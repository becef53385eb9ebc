//! Periodic trapezoid rules, trigonometric moments of the varying weight, and
//! the edge and branch utilities used by the equilibrium solver.

use num_complex::Complex64;
use rayon::prelude::*;
use rug::{Assign, Float};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Default number of grid doublings before giving up.
pub const DEFAULT_DOUBLINGS: u32 = 20;

/// Default closeness to a branch point treated as singular by [`sq_a`].
pub const EDGE_TOL: f64 = 1e-12;

/// `(2π/N) Σ_{j<N} f(2πj/N)` at `precision` bits, summed in ascending node order.
pub fn periodic_trapezoid<F>(f: F, nodes: usize, precision: u32) -> Float
where
    F: Fn(&Float) -> Float + Sync,
{
    assert!(nodes >= 4, "periodic trapezoid needs at least 4 nodes");
    let step = Float::with_val(precision, rug::float::Constant::Pi) * 2u32 / nodes as u32;
    let values: Vec<Float> = (0..nodes)
        .into_par_iter()
        .map(|j| f(&Float::with_val(precision, &step * j as u32)))
        .collect();
    let mut sum = Float::with_val(precision, 0);
    for v in &values {
        sum += v;
    }
    sum * step
}

/// Periodic trapezoid in `f64` on `[offset, offset + 2π)`, doubling the node
/// count from 32 until two successive sums agree to `tol` relative to the sum
/// of absolute values.
pub fn periodic_trapezoid_f64<F>(mut f: F, offset: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut n = 32usize;
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for j in 0..n {
        let v = f(offset + 2.0 * PI * j as f64 / n as f64);
        sum += v;
        abs_sum += v.abs();
    }
    let mut prev = 2.0 * PI * sum / n as f64;
    for doubling in 0..DEFAULT_DOUBLINGS {
        for j in 0..n {
            let v = f(offset + PI * (2 * j + 1) as f64 / n as f64);
            sum += v;
            abs_sum += v.abs();
        }
        n *= 2;
        let next = 2.0 * PI * sum / n as f64;
        let scale = 2.0 * PI * abs_sum / n as f64;
        if (next - prev).abs() <= tol * scale.max(f64::MIN_POSITIVE) && doubling >= 1 {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NonConverged {
        doublings: DEFAULT_DOUBLINGS,
    })
}

/// Moments `c_j = ∫ e^{-ijλ} e^{-nV(cos λ)} dλ`, `j = 0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub n: usize,
    pub k_max: usize,
    pub moments: Vec<Float>,
    pub precision: u32,
    pub grid_size: usize,
}

#[derive(Serialize, Deserialize)]
struct MomentTableRepr {
    n: usize,
    k_max: usize,
    precision: u32,
    grid_size: usize,
    moments: Vec<String>,
}

impl Serialize for MomentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MomentTableRepr {
            n: self.n,
            k_max: self.k_max,
            precision: self.precision,
            grid_size: self.grid_size,
            moments: self.moments.iter().map(decimal_string).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = MomentTableRepr::deserialize(d)?;
        let moments = repr
            .moments
            .iter()
            .map(|s| parse_decimal(s, repr.precision).map_err(serde::de::Error::custom))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if moments.len() != repr.k_max + 1 {
            return Err(serde::de::Error::custom("moment count does not match k_max"));
        }
        Ok(MomentTable {
            n: repr.n,
            k_max: repr.k_max,
            moments,
            precision: repr.precision,
            grid_size: repr.grid_size,
        })
    }
}

/// Decimal digits that make a `bits`-bit binary float round-trip.
pub fn decimal_digits(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

/// Scientific-notation decimal string with enough digits for a lossless round trip.
pub fn decimal_string(x: &Float) -> String {
    x.to_string_radix(10, Some(decimal_digits(x.prec())))
}

pub fn parse_decimal(s: &str, precision: u32) -> std::result::Result<Float, String> {
    Float::parse(s)
        .map(|p| Float::with_val(precision, p))
        .map_err(|e| format!("bad decimal '{s}': {e}"))
}

impl MomentTable {
    /// Moment at signed frequency `j`; the weight is even so `c_{-j} = c_j`.
    pub fn get(&self, j: isize) -> &Float {
        &self.moments[j.unsigned_abs()]
    }
}

/// Trigonometric moments of `e^{-nV(cos λ)}` up to frequency `k_max`.
///
/// The node count starts at `max(4K, 64)` and doubles until two successive
/// tables agree to `c_0 · 2^{-(precision-32)}`.
pub fn trig_moments(p: &Potential, n: usize, k_max: usize, precision: u32) -> Result<MomentTable> {
    trig_moments_with_budget(p, n, k_max, precision, DEFAULT_DOUBLINGS)
}

pub fn trig_moments_with_budget(
    p: &Potential,
    n: usize,
    k_max: usize,
    precision: u32,
    doublings: u32,
) -> Result<MomentTable> {
    let mut grid = (4 * k_max).max(64);
    if p.is_zero() {
        let mut moments = vec![Float::with_val(precision, 0); k_max + 1];
        moments[0] = Float::with_val(precision, rug::float::Constant::Pi) * 2u32;
        return Ok(MomentTable {
            n,
            k_max,
            moments,
            precision,
            grid_size: grid,
        });
    }
    // Node weights at λ_m = 2πm/N; reused at the even nodes of the next grid.
    let mut weights = node_weights(p, n, grid, 0, 1, precision)?;
    let mut table = moments_from_weights(&weights, k_max, precision);
    for _ in 0..doublings {
        let odd = node_weights(p, n, 2 * grid, 1, 2, precision)?;
        let mut merged = Vec::with_capacity(2 * grid);
        for (e, o) in weights.into_iter().zip(odd) {
            merged.push(e);
            merged.push(o);
        }
        weights = merged;
        grid *= 2;
        let next = moments_from_weights(&weights, k_max, precision);
        let tol = Float::with_val(precision, &next[0]) >> (precision as i32 - 32);
        let converged = table
            .iter()
            .zip(&next)
            .all(|(a, b)| Float::with_val(precision, a - b).abs() <= tol);
        table = next;
        if converged {
            return Ok(MomentTable {
                n,
                k_max,
                moments: table,
                precision,
                grid_size: grid,
            });
        }
    }
    Err(Error::NonConverged { doublings })
}

/// Weights at nodes `2π(first + stride·i)/grid` for `i < grid/stride`.
fn node_weights(
    p: &Potential,
    n: usize,
    grid: usize,
    first: usize,
    stride: usize,
    precision: u32,
) -> Result<Vec<Float>> {
    let two_pi = Float::with_val(precision, rug::float::Constant::Pi) * 2u32;
    (0..grid / stride)
        .into_par_iter()
        .map(|i| {
            let m = first + stride * i;
            let lambda = Float::with_val(precision, &two_pi * m as u64) / grid as u64;
            p.weight_mp(n, &lambda)
        })
        .collect()
}

fn moments_from_weights(weights: &[Float], k_max: usize, precision: u32) -> Vec<Float> {
    let grid = weights.len();
    let two_pi = Float::with_val(precision, rug::float::Constant::Pi) * 2u32;
    let cosines: Vec<Float> = (0..grid)
        .into_par_iter()
        .map(|r| {
            let angle = Float::with_val(precision, &two_pi * r as u64) / grid as u64;
            angle.cos()
        })
        .collect();
    (0..=k_max)
        .into_par_iter()
        .map(|j| {
            let mut sum = Float::with_val(precision, 0);
            let mut term = Float::new(precision);
            for (m, w) in weights.iter().enumerate() {
                term.assign(w * &cosines[(j * m) % grid]);
                sum += &term;
            }
            sum * &two_pi / grid as u64
        })
        .collect()
}

/// `1/√(z² − a²)` with the branch `~ 1/z` at infinity, and `0` on the open
/// segment `(−a, a)` where the principal-value integral vanishes.
pub fn sq_a(z: Complex64, a: f64) -> Result<Complex64> {
    sq_a_with_tol(z, a, EDGE_TOL)
}

pub fn sq_a_with_tol(z: Complex64, a: f64, tol: f64) -> Result<Complex64> {
    if (z - a).norm() < tol || (z + a).norm() < tol {
        return Err(Error::EdgeSingularity { z: z.re, tol });
    }
    if z.im == 0.0 && z.re.abs() < a {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok(1.0 / ((z - a).sqrt() * (z + a).sqrt()))
}

/// Quadrature route for [`sq_a`]: `(1/π) ∫_{-a}^{a} dx / ((z − x)√(a² − x²))`
/// with `x = a sin t`, valid for `z` off the segment.
pub fn sq_a_quadrature(z: Complex64, a: f64, nodes: usize) -> Complex64 {
    let h = 2.0 * PI / nodes as f64;
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..nodes {
        let t = h * j as f64;
        sum += 1.0 / (z - a * t.sin());
    }
    sum * h / (2.0 * PI)
}

/// `∫_{-θ}^{θ} g(μ)/√(cos μ − cos θ) dμ` for `0 < θ < π`.
///
/// With `sin(μ/2) = sin(θ/2) sin t` the integrand becomes
/// `√2 g(μ(t)) / cos(μ(t)/2)`, smooth and periodic after reflecting
/// `t ↦ π − t`, so the periodic trapezoid converges geometrically.
pub fn edge_regularized_integral<G>(g: G, theta: f64) -> Result<f64>
where
    G: FnMut(f64) -> f64,
{
    edge_regularized_integral_tol(g, theta, 1e-15)
}

pub fn edge_regularized_integral_tol<G>(mut g: G, theta: f64, tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> f64,
{
    let s = (0.5 * theta).sin();
    let t_integral = periodic_trapezoid_f64(
        |t| {
            let half = (s * t.sin()).asin();
            g(2.0 * half) / half.cos()
        },
        0.0,
        tol,
    )?;
    Ok(0.5 * SQRT_2 * t_integral)
}

/// Arc angle `μ(t) = 2 arcsin(sin(θ/2) sin t)` of the edge substitution.
pub fn edge_map(theta: f64, t: f64) -> f64 {
    2.0 * ((0.5 * theta).sin() * t.sin()).asin()
}

/// `cos λ − cos θ = 2 sin((θ−λ)/2) sin((θ+λ)/2)`, accurate near the edges.
pub fn chi_squared(theta: f64, lambda: f64) -> f64 {
    2.0 * (0.5 * (theta - lambda)).sin() * (0.5 * (theta + lambda)).sin()
}
