//! Confining potentials `V(x) = Σ a_j x^j` on `[-1, 1]`, composed with `x = cos λ`.

use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial potential without constant term, `V(x) = a_1 x + ... + a_d x^d`.
///
/// The weight `e^{-nV(cos λ)}` is even in `λ`, so every Verblunsky coefficient
/// derived from it is real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialSpec", into = "PotentialSpec")]
pub struct Potential {
    coeffs: Vec<f64>,
    name: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct PotentialSpec {
    coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

impl TryFrom<PotentialSpec> for Potential {
    type Error = Error;

    fn try_from(spec: PotentialSpec) -> Result<Self> {
        let p = Potential::new(spec.coeffs)?;
        Ok(match spec.name {
            Some(name) => p.with_name(name),
            None => p,
        })
    }
}

impl From<Potential> for PotentialSpec {
    fn from(p: Potential) -> Self {
        PotentialSpec {
            coeffs: p.coeffs,
            name: p.name,
        }
    }
}

impl Potential {
    /// `coeffs[j]` multiplies `x^{j+1}`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidPotential("at least one coefficient required".into()));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite coefficient {bad}")));
        }
        Ok(Potential { coeffs, name: None })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// `V = 0`: Lebesgue measure, all Verblunsky coefficients vanish.
    pub fn zero() -> Self {
        Potential {
            coeffs: vec![0.0],
            name: Some("zero".into()),
        }
    }

    /// Gross–Witten–Wadia potential `V(x) = -t x`. One arc for `t > 1`,
    /// whole circle for `0 < t <= 1`.
    pub fn gww(t: f64) -> Self {
        Potential {
            coeffs: vec![-t],
            name: Some(format!("gww({t})")),
        }
    }

    /// `V(x) = a x^2 + b x^4`.
    pub fn quartic(a: f64, b: f64) -> Self {
        Potential {
            coeffs: vec![0.0, a, 0.0, b],
            name: Some(format!("quartic({a},{b})")),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `V(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &a| (acc + a) * x)
    }

    /// `V'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let d = self.coeffs.len();
        (1..=d)
            .rev()
            .fold(0.0, |acc, j| acc * x + j as f64 * self.coeffs[j - 1])
    }

    /// `V''(x)`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        let d = self.coeffs.len();
        (2..=d.max(1))
            .rev()
            .fold(0.0, |acc, j| acc * x + (j * (j - 1)) as f64 * self.coeffs[j - 1])
    }

    /// Divided difference `(V'(x) - V'(y)) / (x - y)`, evaluated without
    /// division so it stays exact as `y → x`.
    pub fn derivative_divided_difference(&self, x: f64, y: f64) -> f64 {
        // V'(x) = Σ j a_j x^{j-1}; (x^m - y^m)/(x - y) = h_{m-1}(x, y)
        let mut total = 0.0;
        let mut h = 1.0; // h_0
        let mut y_pow = 1.0;
        for j in 2..=self.coeffs.len() {
            // h_{j-2}
            total += j as f64 * self.coeffs[j - 1] * h;
            y_pow *= y;
            h = x * h + y_pow;
        }
        total
    }

    /// `d/dλ V(cos λ) = -sin λ · V'(cos λ)`.
    pub fn angular_derivative(&self, lambda: f64) -> f64 {
        -lambda.sin() * self.derivative(lambda.cos())
    }

    /// `d²/dλ² V(cos λ)`.
    pub fn angular_second_derivative(&self, lambda: f64) -> f64 {
        let (s, c) = lambda.sin_cos();
        -c * self.derivative(c) + s * s * self.second_derivative(c)
    }

    /// `[(V(cos a))' - (V(cos b))'] / sin((a - b)/2)`, with the common factor
    /// cancelled analytically. Smooth in both arguments, including `a = b`.
    pub fn angular_difference_quotient(&self, a: f64, b: f64) -> f64 {
        let half_sum = 0.5 * (a + b);
        let (ca, cb) = (a.cos(), b.cos());
        -2.0 * half_sum.cos() * self.derivative(ca)
            + 2.0 * b.sin() * half_sum.sin() * self.derivative_divided_difference(ca, cb)
    }

    /// `V(x)` at the precision of `x`.
    pub fn eval_mp(&self, x: &Float) -> Float {
        let mut acc = Float::with_val(x.prec(), 0);
        for &a in self.coeffs.iter().rev() {
            acc += a;
            acc *= x;
        }
        acc
    }

    /// `e^{-n V(cos λ)}` at `precision` bits.
    pub fn weight(&self, n: usize, lambda: f64, precision: u32) -> Result<Float> {
        let lambda = Float::with_val(precision, lambda);
        self.weight_mp(n, &lambda)
    }

    /// `e^{-n V(cos λ)}` at the precision of `lambda`.
    pub fn weight_mp(&self, n: usize, lambda: &Float) -> Result<Float> {
        let x = Float::with_val(lambda.prec(), lambda.cos_ref());
        self.weight_at_cos(n, &x)
    }

    /// `e^{-n V(x)}` for `x = cos λ` given directly.
    pub fn weight_at_cos(&self, n: usize, x: &Float) -> Result<Float> {
        let mut v = self.eval_mp(x);
        v *= -(n as f64);
        let w = v.exp();
        if !w.is_normal() {
            return Err(Error::PrecisionOverflow {
                precision: x.prec(),
            });
        }
        Ok(w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn evaluation_examples() {
        assert_eq!(Potential::gww(2.0).eval(1.0), -2.0);
        assert_eq!(Potential::zero().eval(0.3), 0.0);
        let q = Potential::new(vec![0.0, -1.0, 0.0, 0.25]).unwrap();
        assert_eq!(q.eval(0.0), 0.0);
        assert!((q.eval(0.5) - (0.25 * 0.0625 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn angular_derivative_examples() {
        let g = Potential::gww(2.0);
        assert!((g.angular_derivative(FRAC_PI_2) - 2.0).abs() < 1e-15);
        assert_eq!(g.angular_derivative(0.0), 0.0);
        let sq = Potential::new(vec![0.0, 1.0]).unwrap();
        assert!((sq.angular_derivative(FRAC_PI_4) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn weight_examples() {
        let w = Potential::zero().weight(7, 1.3, 128).unwrap();
        assert_eq!(w, 1);
        let g = Potential::gww(2.0);
        let w = g.weight(1, 0.0, 128).unwrap();
        let e2 = Float::with_val(128, 2).exp();
        assert_eq!(w, e2);
        let w = g.weight(40, 0.0, 256).unwrap();
        let e80 = Float::with_val(256, 80).exp();
        assert!(w.is_finite() && w > 0);
        assert_eq!(w, e80);
    }

    #[test]
    fn weight_overflow_is_reported() {
        let g = Potential::gww(1e300);
        assert!(matches!(
            g.weight(usize::MAX, 0.0, 64),
            Err(Error::PrecisionOverflow { .. })
        ));
    }

    #[test]
    fn rejects_bad_coefficients() {
        assert!(Potential::new(vec![]).is_err());
        assert!(Potential::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<Potential>(r#"{"coeffs": []}"#).is_err());
        let p: Potential = serde_json::from_str(r#"{"coeffs": [0.0, 1.5], "name": "sq"}"#).unwrap();
        assert_eq!(p.coeffs(), &[0.0, 1.5]);
        assert_eq!(p.name(), Some("sq"));
        let back: Potential = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn divided_difference_matches_quotient() {
        let p = Potential::new(vec![0.3, -1.2, 0.7, 0.25, -0.1]).unwrap();
        for &(x, y) in &[(0.3, -0.4), (0.9, 0.1), (-0.7, -0.71)] {
            let direct = (p.derivative(x) - p.derivative(y)) / (x - y);
            assert!((p.derivative_divided_difference(x, y) - direct).abs() < 1e-11);
        }
        // diagonal limit is V''
        assert!((p.derivative_divided_difference(0.2, 0.2) - p.second_derivative(0.2)).abs() < 1e-14);
    }

    #[test]
    fn difference_quotient_limits() {
        let p = Potential::new(vec![-2.0, 0.4, 0.3]).unwrap();
        let a = 0.7;
        let limit = 2.0 * p.angular_second_derivative(a);
        assert!((p.angular_difference_quotient(a, a) - limit).abs() < 1e-13);
        let b = -1.1;
        let direct = (p.angular_derivative(a) - p.angular_derivative(b)) / ((a - b) / 2.0).sin();
        assert!((p.angular_difference_quotient(a, b) - direct).abs() < 1e-13);
        // GWW closed form: 2t cos((a+b)/2)
        let g = Potential::gww(3.0);
        assert!((g.angular_difference_quotient(a, b) - 6.0 * ((a + b) / 2.0).cos()).abs() < 1e-14);
        assert!((g.angular_difference_quotient(PI, 0.0)).abs() < 1e-14);
    }
}
