//! Weak-form residual of the viscous Burgers equation
//!
//! ```text
//! int_0^T int_0^1 [rho (phi_t + lambda phi_xx) - mu rho (1 - rho) phi_x] dx dt
//!     + int_0^1 rho(x, 0) phi(x, 0) dx
//! ```
//!
//! for a density that is piecewise constant in space on each time node.
//! Space integrals are exact (cell integrals of trigonometric polynomials);
//! time integrals use the trapezoid rule on the supplied nodes.

use crate::error::{Error, Result};
use crate::observables::testfn::TestFunction;

/// Piecewise-constant periodic density: `values[j]` on
/// `[offset + j width, offset + (j + 1) width)`, with `values.len() * width = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellDensity {
    pub offset: f64,
    pub values: Vec<f64>,
}

impl CellDensity {
    pub fn new(offset: f64, values: Vec<f64>) -> Self {
        Self { offset, values }
    }

    /// Cells `[j/M, (j+1)/M)`, as for a finite-volume grid.
    pub fn grid(values: Vec<f64>) -> Self {
        Self::new(0.0, values)
    }

    /// Bins of `n_sites / bins` consecutive sites, site `i` centered at `i/N`.
    pub fn sites(n_sites: usize, values: Vec<f64>) -> Self {
        Self::new(-0.5 / n_sites as f64, values)
    }

    pub fn width(&self) -> f64 {
        1.0 / self.values.len() as f64
    }
}

/// Exact integrals of `p, p', p''` over each cell.
#[derive(Debug, Clone)]
struct CellWeights {
    offset: f64,
    cells: usize,
    p: Vec<f64>,
    dp: Vec<f64>,
    ddp: Vec<f64>,
}

impl CellWeights {
    fn new(phi: &TestFunction, offset: f64, cells: usize) -> Self {
        let width = 1.0 / cells as f64;
        let bounds = |j: usize| (offset + j as f64 * width, offset + (j + 1) as f64 * width);
        let table = |order| {
            (0..cells)
                .map(|j| {
                    let (lo, hi) = bounds(j);
                    phi.space.derivative_integral(lo, hi, order)
                })
                .collect()
        };
        Self {
            offset,
            cells,
            p: table(0),
            dp: table(1),
            ddp: table(2),
        }
    }

    fn matches(&self, rho: &CellDensity) -> bool {
        self.cells == rho.values.len() && self.offset == rho.offset
    }
}

/// Streaming accumulator: feed densities at increasing times starting at 0.
#[derive(Debug, Clone)]
pub struct WeakResidual {
    phi: TestFunction,
    lambda: f64,
    mu: f64,
    weights: Option<CellWeights>,
    initial: f64,
    integral: f64,
    last: Option<(f64, f64)>,
}

impl WeakResidual {
    /// `mu` is the signed drift coefficient multiplying `rho (1 - rho) phi_x`.
    pub fn new(phi: TestFunction, lambda: f64, mu: f64) -> Self {
        Self {
            phi,
            lambda,
            mu,
            weights: None,
            initial: 0.0,
            integral: 0.0,
            last: None,
        }
    }

    fn integrand(&mut self, t: f64, rho: &CellDensity) -> f64 {
        if !self.weights.as_ref().is_some_and(|w| w.matches(rho)) {
            self.weights = Some(CellWeights::new(&self.phi, rho.offset, rho.values.len()));
        }
        let w = self.weights.as_ref().unwrap();
        let (s, ds) = (self.phi.time.value(t), self.phi.time.derivative(t));
        let mut total = 0.0;
        for (j, &r) in rho.values.iter().enumerate() {
            total += r * (ds * w.p[j] + self.lambda * s * w.ddp[j]) - self.mu * r * (1.0 - r) * s * w.dp[j];
        }
        total
    }

    pub fn push(&mut self, t: f64, rho: &CellDensity) -> Result<()> {
        let value = self.integrand(t, rho);
        match self.last {
            None => {
                if t != 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "first residual node must be t = 0, got {t}"
                    )));
                }
                let w = self.weights.as_ref().unwrap();
                let s0 = self.phi.time.value(0.0);
                self.initial = rho.values.iter().zip(&w.p).map(|(r, p)| r * p * s0).sum();
            }
            Some((t0, v0)) => {
                if t.is_nan() || t <= t0 {
                    return Err(Error::InvalidParameter(format!(
                        "residual nodes must increase: {t} after {t0}"
                    )));
                }
                self.integral += 0.5 * (t - t0) * (v0 + value);
            }
        }
        self.last = Some((t, value));
        Ok(())
    }

    /// Current residual; nodes not yet reaching the horizon contribute zero
    /// past the last node.
    pub fn value(&self) -> f64 {
        self.integral + self.initial
    }
}

/// Residual of a density known at `times` (first node `0`).
pub fn weak_residual(
    times: &[f64],
    densities: &[CellDensity],
    phi: &TestFunction,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    if times.len() != densities.len() || times.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "{} times for {} densities",
            times.len(),
            densities.len()
        )));
    }
    let mut acc = WeakResidual::new(phi.clone(), lambda, mu);
    for (t, rho) in times.iter().zip(densities) {
        acc.push(*t, rho)?;
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::testfn::{default_family, TimeFactor};
    use crate::trig::TrigPoly;
    use std::f64::consts::PI;

    fn nodes(horizon: f64, count: usize) -> Vec<f64> {
        (0..=count).map(|j| horizon * j as f64 / count as f64).collect()
    }

    #[test]
    fn constant_density_has_no_residual() {
        let t = nodes(0.05, 1000);
        for phi in default_family(5, 0.05) {
            for offset in [0.0, -0.001] {
                let rho: Vec<_> = t.iter().map(|_| CellDensity::new(offset, vec![0.3; 32])).collect();
                let r = weak_residual(&t, &rho, &phi, 1.0, 2.0).unwrap();
                assert!(r.abs() < 1e-9, "{r}");
            }
        }
        // A constant-in-space test function: residual reduces to the time
        // quadrature of c s'(t) against c s(0).
        let phi = TestFunction::new(TrigPoly::constant(1.0), TimeFactor::Vanishing { horizon: 0.05 });
        let rho: Vec<_> = t.iter().map(|_| CellDensity::grid(vec![0.7; 8])).collect();
        assert!(weak_residual(&t, &rho, &phi, 1.0, 1.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn heat_solution_is_nearly_a_weak_solution() {
        // Exact cell averages of 1/2 + a e^{-4 pi^2 t} cos(2 pi x) with mu = 0.
        let horizon = 0.05;
        let t = nodes(horizon, 2000);
        let m = 64;
        let phi = TestFunction::new(TrigPoly::cosine(1, 1.0), TimeFactor::Vanishing { horizon });
        let rho: Vec<_> = t
            .iter()
            .map(|&s| {
                let p = TrigPoly::new(0.5, vec![0.3], vec![]).heat_evolved(1.0, s);
                CellDensity::grid(
                    (0..m)
                        .map(|j| p.integral(j as f64 / m as f64, (j + 1) as f64 / m as f64) * m as f64)
                        .collect(),
                )
            })
            .collect();
        let r = weak_residual(&t, &rho, &phi, 1.0, 0.0).unwrap();
        assert!(r.abs() < 1e-6, "{r}");
        // Perturbing the density yields a clearly nonzero residual.
        let bad: Vec<_> = rho
            .iter()
            .map(|c| {
                CellDensity::grid(
                    c.values
                        .iter()
                        .enumerate()
                        .map(|(j, v)| v + 0.05 * (2.0 * PI * (j as f64 + 0.5) / m as f64).cos())
                        .collect(),
                )
            })
            .collect();
        assert!(weak_residual(&t, &bad, &phi, 1.0, 0.0).unwrap().abs() > 1e-3);
    }

    #[test]
    fn linear_in_test_function() {
        let horizon = 0.02;
        let t = nodes(horizon, 50);
        let rho: Vec<_> = t
            .iter()
            .map(|&s| CellDensity::sites(128, (0..16).map(|j| 0.5 + 0.3 * ((j as f64) + s).sin()).collect()))
            .collect();
        let f1 = TestFunction::new(TrigPoly::cosine(1, 1.0), TimeFactor::Vanishing { horizon });
        let f2 = TestFunction::new(TrigPoly::sine(2, 0.5), TimeFactor::Vanishing { horizon });
        let sum = TestFunction::new(f1.space.add(&f2.space), f1.time);
        let r = |f: &TestFunction| weak_residual(&t, &rho, f, 1.0, 1.5).unwrap();
        assert!((r(&sum) - r(&f1) - r(&f2)).abs() < 1e-12);
        assert!((r(&f1.scaled(3.0)) - 3.0 * r(&f1)).abs() < 1e-12);
    }

    #[test]
    fn first_node_must_be_zero() {
        let phi = default_family(1, 1.0).remove(0);
        let mut acc = WeakResidual::new(phi, 1.0, 0.0);
        assert!(acc.push(0.1, &CellDensity::grid(vec![0.5; 4])).is_err());
        acc.push(0.0, &CellDensity::grid(vec![0.5; 4])).unwrap();
        assert!(acc.push(0.0, &CellDensity::grid(vec![0.5; 4])).is_err());
    }
}
