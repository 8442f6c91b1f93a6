//! Smooth periodic test functions `phi(x, t) = p(x) s(t)`.

use crate::trig::TrigPoly;

/// Time profile multiplying the spatial part of a test function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeFactor {
    /// `s(t) = 1`. Does not vanish at any horizon.
    Constant,
    /// `s(t) = (1 - t/T)^2`, vanishing at `T` with zero slope.
    Vanishing { horizon: f64 },
    /// `s(t) = t (1 - t/T)`: `s(0) = 0`, `s'(0) = 1`, `s(T) = 0`.
    Ramp { horizon: f64 },
}

impl TimeFactor {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 1.0,
            TimeFactor::Vanishing { horizon } => (1.0 - t / horizon).powi(2),
            TimeFactor::Ramp { horizon } => t * (1.0 - t / horizon),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeFactor::Constant => 0.0,
            TimeFactor::Vanishing { horizon } => -2.0 * (1.0 - t / horizon) / horizon,
            TimeFactor::Ramp { horizon } => 1.0 - 2.0 * t / horizon,
        }
    }

    pub fn horizon(&self) -> Option<f64> {
        match *self {
            TimeFactor::Constant => None,
            TimeFactor::Vanishing { horizon } | TimeFactor::Ramp { horizon } => Some(horizon),
        }
    }

    /// Largest `|s(t)|` on `[0, T]` (on `[0, 1]` for the constant factor).
    pub fn sup(&self) -> f64 {
        match *self {
            TimeFactor::Constant | TimeFactor::Vanishing { .. } => 1.0,
            TimeFactor::Ramp { horizon } => horizon / 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub space: TrigPoly,
    pub time: TimeFactor,
}

impl TestFunction {
    pub fn new(space: TrigPoly, time: TimeFactor) -> Self {
        Self { space, time }
    }

    pub fn zero(time: TimeFactor) -> Self {
        Self::new(TrigPoly::default(), time)
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.value(t)
    }

    pub fn dt(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.derivative(t)
    }

    pub fn dx(&self, x: f64, t: f64) -> f64 {
        self.space.derivative(x, 1) * self.time.value(t)
    }

    pub fn dxx(&self, x: f64, t: f64) -> f64 {
        self.space.derivative(x, 2) * self.time.value(t)
    }

    /// Sup-norm bound over `[0, 1) x [0, T]`.
    pub fn sup_bound(&self) -> f64 {
        self.space.sup_bound() * self.time.sup()
    }

    pub fn vanishes_at_horizon(&self) -> bool {
        self.time.horizon().is_some_and(|h| self.time.value(h) == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.space.scaled(factor), self.time)
    }
}

/// One test function per species; `(phi_a, phi_b)` for the exclusion process.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesTestFunctions {
    phi: Vec<TestFunction>,
}

impl SpeciesTestFunctions {
    pub fn new(phi: Vec<TestFunction>) -> Self {
        assert!(phi.len() >= 2, "need a test function per species");
        Self { phi }
    }

    pub fn pair(phi_a: TestFunction, phi_b: TestFunction) -> Self {
        Self::new(vec![phi_a, phi_b])
    }

    /// `(p(x) s(t), 0)`: only the particle species is weighted, so
    /// `psi_ab = phi_a - phi_b = p s`.
    pub fn particle_only(space: TrigPoly, time: TimeFactor) -> Self {
        Self::pair(TestFunction::new(space, time), TestFunction::zero(time))
    }

    pub fn n_species(&self) -> usize {
        self.phi.len()
    }

    pub fn get(&self, k: usize) -> &TestFunction {
        &self.phi[k]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestFunction> {
        self.phi.iter()
    }

    /// `|Phi| = sup_k sup |phi_k|` (an upper bound from the coefficients).
    pub fn sup_bound(&self) -> f64 {
        self.phi.iter().map(TestFunction::sup_bound).fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.phi.iter().map(|p| p.scaled(factor)).collect())
    }

    /// Adds the same function `c(x) s(t)` to every species.
    pub fn shifted(&self, shift: &TrigPoly) -> Self {
        Self::new(
            self.phi
                .iter()
                .map(|p| TestFunction::new(p.space.add(shift), p.time))
                .collect(),
        )
    }

    /// The shared time factor, when every species uses the same one.
    pub fn common_time_factor(&self) -> Option<TimeFactor> {
        let first = self.phi[0].time;
        self.phi.iter().all(|p| p.time == first).then_some(first)
    }
}

/// `count` test functions `cos(2 pi m x) + sin(2 pi m x)`, `m = 1, 2, ...`,
/// each multiplied by `(1 - t/T)^2`.
///
/// Mixing both phases keeps every member sensitive to profiles with a
/// reflection symmetry, which a pure cosine or sine can miss entirely.
pub fn default_family(count: usize, horizon: f64) -> Vec<TestFunction> {
    (1..=count)
        .map(|m| {
            let space = TrigPoly::cosine(m, 1.0).add(&TrigPoly::sine(m, 1.0));
            TestFunction::new(space, TimeFactor::Vanishing { horizon })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn time_factors_vanish_at_horizon() {
        for tf in [
            TimeFactor::Vanishing { horizon: 0.3 },
            TimeFactor::Ramp { horizon: 0.3 },
        ] {
            assert_eq!(tf.value(0.3), 0.0);
            let h = 1e-6;
            for t in [0.05, 0.1, 0.2] {
                let fd = (tf.value(t + h) - tf.value(t - h)) / (2.0 * h);
                assert_relative_eq!(tf.derivative(t), fd, epsilon = 1e-5);
            }
        }
        assert_eq!(TimeFactor::Ramp { horizon: 1.0 }.derivative(0.0), 1.0);
    }

    #[test]
    fn family_members_are_admissible() {
        let fam = default_family(6, 0.05);
        assert_eq!(fam.len(), 6);
        for f in &fam {
            assert!(f.vanishes_at_horizon());
            for x in [0.0, 0.3] {
                assert_eq!(f.value(x, 0.05), 0.0);
            }
            assert_relative_eq!(f.value(0.0, 0.01), f.value(1.0, 0.01), epsilon = 1e-12);
        }
        assert_eq!(
            fam[2].space,
            TrigPoly::new(0.0, vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0])
        );
    }
}
