use std::sync::Arc;

use crate::dynamics::{build_rate_table, RateTable, ScalingSpec};
use crate::error::{Error, Result};
use crate::lattice::{SamplingMode, SpeciesAlphabet};
use crate::observables::{SpeciesTestFunctions, TestFunction, TimeFactor};
use crate::pde::{Drift, DriftSign, GridState, PdeParams};
use crate::trig::TrigPoly;

/// How the orientation of the macroscopic drift is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftPolicy {
    Fixed(DriftSign),
    /// Solve with both orientations and keep the one closer to simulation.
    Auto,
}

/// Macroscopic profile the empirical densities are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceKind {
    /// Numerical solution of the limiting equation.
    #[default]
    Pde,
    /// Closed-form heat evolution; only valid without drift.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub alphabet: Arc<SpeciesAlphabet>,
    pub scaling: ScalingSpec,
    pub n_list: Vec<usize>,
    pub replicas: usize,
    pub bins: usize,
    pub horizon: f64,
    /// Observation times, sorted, within `[0, horizon]`.
    pub checkpoints: Vec<f64>,
    /// One density profile per species, summing to one.
    pub initial: Vec<TrigPoly>,
    pub sampling: SamplingMode,
    pub seed_base: u64,
    /// Cells of the reference PDE grid.
    pub pde_cells: usize,
    /// Grids of the PDE refinement study.
    pub pde_refinements: Vec<usize>,
    /// Size of the test-function family used by the residual study.
    pub family_size: usize,
    /// Member of the family used by the martingale study.
    pub martingale_function: usize,
    /// Largest quadrature step of the martingale integral.
    pub quadrature_step: f64,
    pub drift: DriftPolicy,
    pub reference: ReferenceKind,
}

/// `count + 1` equally spaced times from 0 to `horizon`.
pub fn uniform_checkpoints(horizon: f64, count: usize) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=count).map(|j| horizon * j as f64 / count as f64).collect();
    times[count] = horizon;
    times
}

/// `rho_A = mean + amplitude cos(2 pi x)` and `rho_B = 1 - rho_A`.
pub fn cosine_pair(mean: f64, amplitude: f64) -> Vec<TrigPoly> {
    let a = TrigPoly::new(mean, vec![amplitude], vec![]);
    let b = TrigPoly::constant(1.0).add(&a.scaled(-1.0));
    vec![a, b]
}

/// `rho_k = 1/n + amplitude cos(2 pi x - 2 pi k / n)`: a rotating simplex profile.
pub fn rotating_profiles(n: usize, amplitude: f64) -> Vec<TrigPoly> {
    (0..n)
        .map(|k| {
            let phase = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            TrigPoly::new(
                1.0 / n as f64,
                vec![amplitude * phase.cos()],
                vec![amplitude * phase.sin()],
            )
        })
        .collect()
}

impl ExperimentConfig {
    /// Exclusion process with the documented defaults.
    pub fn asep(lambda: f64, mu: f64, n_list: Vec<usize>, horizon: f64) -> Self {
        Self {
            alphabet: Arc::new(SpeciesAlphabet::binary()),
            scaling: ScalingSpec::Asep { lambda, mu },
            n_list,
            replicas: 16,
            bins: 32,
            horizon,
            checkpoints: uniform_checkpoints(horizon, 10),
            initial: cosine_pair(0.5, 0.3),
            sampling: SamplingMode::Random,
            seed_base: 0,
            pde_cells: 256,
            pde_refinements: vec![64, 128, 256],
            family_size: 5,
            martingale_function: 0,
            quadrature_step: horizon / 1000.0,
            drift: DriftPolicy::Auto,
            reference: ReferenceKind::Pde,
        }
    }

    /// Equidiffusive n-species exchange without folds and the rotating profile.
    pub fn nspecies(lambda: f64, alpha: Vec<Vec<f64>>, n_list: Vec<usize>, horizon: f64) -> Result<Self> {
        let n = alpha.len();
        Ok(Self {
            alphabet: Arc::new(SpeciesAlphabet::letters(n)?),
            scaling: ScalingSpec::NSpecies {
                lambda,
                alpha,
                fold: None,
            },
            initial: rotating_profiles(n, 0.2),
            ..Self::asep(lambda, 0.0, n_list, horizon)
        })
    }

    pub fn n_species(&self) -> usize {
        self.alphabet.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.scaling.validate()?;
        let invalid = |msg: String| Err(Error::InvalidParameter(msg));
        if self.scaling.n_species() != self.n_species() {
            return invalid(format!(
                "rates describe {} species, alphabet has {}",
                self.scaling.n_species(),
                self.n_species()
            ));
        }
        if self.initial.len() != self.n_species() {
            return invalid(format!(
                "{} initial profiles for {} species",
                self.initial.len(),
                self.n_species()
            ));
        }
        if self.n_list.is_empty() {
            return invalid("no ring sizes given".into());
        }
        if self.replicas == 0 {
            return invalid("replicas must be at least 1".into());
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be finite and >= 0, got {}", self.horizon));
        }
        if self.pde_cells < 3 || self.pde_refinements.iter().any(|&m| m < 3) {
            return invalid("PDE grids need at least 3 cells".into());
        }
        if self.martingale_function >= self.family_size.max(1) {
            return invalid(format!(
                "martingale function {} outside a family of {}",
                self.martingale_function, self.family_size
            ));
        }
        crate::dynamics::kmc::check_checkpoints(&self.checkpoints, self.horizon)?;
        for &n in &self.n_list {
            if n < self.bins || self.bins == 0 || n % self.bins != 0 {
                return Err(Error::BinMismatch {
                    bins: self.bins,
                    sites: n,
                });
            }
            build_rate_table(&self.scaling, n)?;
        }
        Ok(())
    }

    pub fn rates(&self, n_sites: usize) -> Result<RateTable> {
        build_rate_table(&self.scaling, n_sites)
    }

    pub fn lambda(&self) -> f64 {
        self.scaling.lambda()
    }

    /// PDE parameters with the given drift orientation. Folds have no
    /// macroscopic counterpart here and are rejected.
    pub fn pde_params(&self, sign: DriftSign) -> Result<PdeParams> {
        match &self.scaling {
            ScalingSpec::Asep { lambda, mu } => Ok(PdeParams::burgers(*lambda, *mu, sign)),
            ScalingSpec::NSpecies { fold: Some(_), .. } => Err(Error::InvalidParameter(
                "no macroscopic equation is available with fold reactions".into(),
            )),
            ScalingSpec::NSpecies { lambda, alpha, .. } => Ok(PdeParams::coupled(*lambda, alpha.clone(), sign)),
        }
    }

    /// Initial PDE state on `cells` cells.
    pub fn pde_initial(&self, cells: usize) -> Result<GridState> {
        let fields: Vec<_> = match self.scaling {
            ScalingSpec::Asep { .. } => vec![&self.initial[0]],
            ScalingSpec::NSpecies { .. } => self.initial.iter().collect(),
        };
        let profiles: Vec<_> = fields.iter().map(|p| move |x: f64| p.value(x)).collect();
        GridState::from_profiles(cells, &profiles)
    }

    /// True when the limiting equation has no drift term.
    pub fn is_driftless(&self) -> bool {
        match self.pde_params(DriftSign::Plus) {
            Ok(PdeParams {
                drift: Drift::Burgers { mu },
                ..
            }) => mu == 0.0,
            Ok(PdeParams {
                drift: Drift::Coupled { alpha },
                ..
            }) => alpha.iter().flatten().all(|&a| a == 0.0),
            Err(_) => false,
        }
    }

    /// Drift coefficient of the scalar equation for the first species:
    /// `rho_t = lambda rho_xx + mu (rho - rho^2)_x` before the orientation is applied.
    pub fn scalar_drift(&self) -> Result<f64> {
        match &self.scaling {
            ScalingSpec::Asep { mu, .. } => Ok(*mu),
            ScalingSpec::NSpecies {
                lambda,
                alpha,
                fold: None,
            } if alpha.len() == 2 => Ok(lambda * alpha[1][0]),
            _ => Err(Error::InvalidParameter(
                "the weak residual is defined for two-species exchange only".into(),
            )),
        }
    }

    /// Test-function family `p_j(x) (1 - t/T)^2`.
    pub fn family(&self) -> Vec<TestFunction> {
        crate::observables::default_family(self.family_size, self.horizon)
    }

    /// Weights the first species by the selected family member, the rest by zero.
    pub fn martingale_test_functions(&self) -> SpeciesTestFunctions {
        let time = TimeFactor::Vanishing { horizon: self.horizon };
        let space = crate::observables::default_family(self.martingale_function + 1, self.horizon)
            .pop()
            .map(|f| f.space)
            .unwrap_or_default();
        let mut phi = vec![TestFunction::zero(time); self.n_species()];
        phi[0] = TestFunction::new(space, time);
        SpeciesTestFunctions::new(phi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = ExperimentConfig::asep(1.0, 1.0, vec![128], 0.05);
        c.validate().unwrap();
        assert_eq!((c.replicas, c.bins, c.pde_cells), (16, 32, 256));
        let abc = ExperimentConfig::nspecies(
            1.0,
            vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]],
            vec![96],
            0.05,
        )
        .unwrap();
        abc.validate().unwrap();
        for x in [0.0, 0.1, 0.77] {
            let s: f64 = abc.initial.iter().map(|p| p.value(x)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = ExperimentConfig::asep(1.0, 1.0, vec![100], 0.05);
        assert!(matches!(c.validate(), Err(Error::BinMismatch { .. })));
        c.n_list = vec![16];
        c.bins = 4;
        c.scaling = ScalingSpec::Asep { lambda: 1.0, mu: 40.0 };
        assert!(matches!(c.validate(), Err(Error::RatePositivity { .. })));
        c.scaling = ScalingSpec::Asep { lambda: 1.0, mu: 1.0 };
        c.checkpoints = vec![0.1];
        assert!(matches!(c.validate(), Err(Error::BadCheckpoints { .. })));
    }

    #[test]
    fn scalar_drift_matches_pde_reduction() {
        let c = ExperimentConfig::asep(1.0, 2.0, vec![64], 0.05);
        let two = ExperimentConfig::nspecies(1.0, c.scaling.alpha(), vec![64], 0.05).unwrap();
        // Rate-derived asymmetry flips the orientation of the scalar drift.
        assert_eq!(two.scalar_drift().unwrap(), -2.0);
        assert_eq!(c.scalar_drift().unwrap(), 2.0);
    }
}
