//! Real trigonometric polynomials on the unit torus.

use std::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// `c + sum_m [a_m cos(2 pi m x) + b_m sin(2 pi m x)]`, modes `m = 1, 2, ...`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrigPoly {
    pub constant: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
}

impl TrigPoly {
    pub fn new(constant: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        Self { constant, cos, sin }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(c, Vec::new(), Vec::new())
    }

    /// `amplitude * cos(2 pi m x)`.
    pub fn cosine(m: usize, amplitude: f64) -> Self {
        assert!(m >= 1);
        let mut cos = vec![0.0; m];
        cos[m - 1] = amplitude;
        Self::new(0.0, cos, Vec::new())
    }

    /// `amplitude * sin(2 pi m x)`.
    pub fn sine(m: usize, amplitude: f64) -> Self {
        assert!(m >= 1);
        let mut sin = vec![0.0; m];
        sin[m - 1] = amplitude;
        Self::new(0.0, Vec::new(), sin)
    }

    pub fn degree(&self) -> usize {
        self.cos.len().max(self.sin.len())
    }

    fn coeffs(&self, m: usize) -> (f64, f64) {
        (
            self.cos.get(m - 1).copied().unwrap_or(0.0),
            self.sin.get(m - 1).copied().unwrap_or(0.0),
        )
    }

    /// `order`-th derivative evaluated at `x`.
    pub fn derivative(&self, x: f64, order: u32) -> f64 {
        let mut v = if order == 0 { self.constant } else { 0.0 };
        for m in 1..=self.degree() {
            let (a, b) = self.coeffs(m);
            let k = TAU * m as f64;
            let (s, c) = (k * x).sin_cos();
            // d/dx rotates (cos, sin) -> (-sin, cos) and scales by k.
            let (dc, ds) = match order % 4 {
                0 => (c, s),
                1 => (-s, c),
                2 => (-c, -s),
                _ => (s, -c),
            };
            v += k.powi(order as i32) * (a * dc + b * ds);
        }
        v
    }

    pub fn value(&self, x: f64) -> f64 {
        self.derivative(x, 0)
    }

    /// Exact `int_lo^hi p(x) dx`.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        let mut v = self.constant * (hi - lo);
        for m in 1..=self.degree() {
            let (a, b) = self.coeffs(m);
            let k = TAU * m as f64;
            v += (a * ((k * hi).sin() - (k * lo).sin()) - b * ((k * hi).cos() - (k * lo).cos())) / k;
        }
        v
    }

    /// Exact integral of the `order`-th derivative over `[lo, hi]`.
    pub fn derivative_integral(&self, lo: f64, hi: f64, order: u32) -> f64 {
        match order {
            0 => self.integral(lo, hi),
            _ => self.derivative(hi, order - 1) - self.derivative(lo, order - 1),
        }
    }

    /// Solution of `u_t = lambda u_xx` at time `t` started from `self`.
    pub fn heat_evolved(&self, lambda: f64, t: f64) -> Self {
        let decay = |m: usize| (-(TAU * m as f64).powi(2) * lambda * t).exp();
        Self {
            constant: self.constant,
            cos: self.cos.iter().enumerate().map(|(i, a)| a * decay(i + 1)).collect(),
            sin: self.sin.iter().enumerate().map(|(i, b)| b * decay(i + 1)).collect(),
        }
    }

    /// Upper bound on `sup |p|` from the coefficients.
    pub fn sup_bound(&self) -> f64 {
        self.constant.abs()
            + (1..=self.degree())
                .map(|m| {
                    let (a, b) = self.coeffs(m);
                    a.hypot(b)
                })
                .sum::<f64>()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            constant: self.constant * factor,
            cos: self.cos.iter().map(|a| a * factor).collect(),
            sin: self.sin.iter().map(|b| b * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let len = |a: &[f64], b: &[f64]| a.len().max(b.len());
        let sum = |a: &[f64], b: &[f64]| {
            (0..len(a, b))
                .map(|i| a.get(i).unwrap_or(&0.0) + b.get(i).unwrap_or(&0.0))
                .collect()
        };
        Self {
            constant: self.constant + other.constant,
            cos: sum(&self.cos, &other.cos),
            sin: sum(&self.sin, &other.sin),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sample() -> TrigPoly {
        TrigPoly::new(0.3, vec![0.5, -0.2], vec![0.1, 0.0, 0.25])
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = sample();
        let h = 1e-4;
        for &x in &[0.0, 0.13, 0.5, 0.77] {
            for order in 1..=3 {
                let fd = (p.derivative(x + h, order - 1) - p.derivative(x - h, order - 1)) / (2.0 * h);
                assert_relative_eq!(p.derivative(x, order), fd, epsilon = 1e-4 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn integral_matches_quadrature() {
        let p = sample();
        let (lo, hi) = (0.1, 0.62);
        let steps = 20_000;
        let h = (hi - lo) / steps as f64;
        let mid: f64 = (0..steps).map(|i| p.value(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert_relative_eq!(p.integral(lo, hi), mid, epsilon = 1e-9);
        assert_relative_eq!(p.integral(0.0, 1.0), 0.3, epsilon = 1e-14);
        assert_relative_eq!(
            p.derivative_integral(lo, hi, 2),
            p.derivative(hi, 1) - p.derivative(lo, 1)
        );
    }

    #[test]
    fn periodic() {
        let p = sample();
        for order in 0..3 {
            assert_relative_eq!(p.derivative(0.0, order), p.derivative(1.0, order), epsilon = 1e-9);
        }
    }

    #[test]
    fn heat_decay() {
        let p = TrigPoly::cosine(1, 0.3);
        let q = p.heat_evolved(1.0, 0.05);
        assert_relative_eq!(q.cos[0], 0.3 * (-4.0 * PI * PI * 0.05f64).exp());
        assert_eq!(TrigPoly::constant(0.7).heat_evolved(2.0, 9.0), TrigPoly::constant(0.7));
    }
}
