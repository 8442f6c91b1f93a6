use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::config::{DriftPolicy, ExperimentConfig};
use crate::harness::convergence::{compare_ensembles, log_log_slope};
use crate::harness::ensemble::{dynamics_seed, initial_configuration, replica_seed, simulate_ensemble, Ensemble};
use crate::observables::{martingale_path, CellDensity, MartingalePath, SpeciesTestFunctions, WeakResidual};
use crate::pde::{solve_observed, DriftSign};

/// Statistics of `U_T`, `L` and `R` at one ring size.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleStats {
    pub n_sites: usize,
    pub replicas: usize,
    pub failures: usize,
    pub mean_u: f64,
    /// Unbiased sample variance of `U_T`.
    pub variance_u: f64,
    pub std_error: f64,
    /// Mean of `int_0^T Z^2 R dt`, which equals `E[U_T^2]`.
    pub mean_compensator: f64,
    /// Replica mean of `max_t |L_t|`.
    pub max_generator: f64,
    /// Replica mean of `max_t N R_t`.
    pub max_scaled_fluctuation: f64,
    pub event_count: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub stats: Vec<MartingaleStats>,
    /// Slope of `log Var[U_T]` against `log N`.
    pub variance_slope: Option<f64>,
    pub quadrature_step: f64,
    pub seeds: Vec<u64>,
}

impl MartingaleReport {
    pub fn at(&self, n_sites: usize) -> Option<&MartingaleStats> {
        self.stats.iter().find(|s| s.n_sites == n_sites)
    }
}

fn summarize(n_sites: usize, paths: &[MartingalePath], failures: usize, seconds: f64) -> MartingaleStats {
    let r = paths.len() as f64;
    let u: Vec<f64> = paths.iter().map(MartingalePath::final_u).collect();
    let mean_u = u.iter().sum::<f64>() / r;
    let variance_u = if paths.len() > 1 {
        u.iter().map(|x| (x - mean_u).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let mean = |f: &dyn Fn(&MartingalePath) -> f64| paths.iter().map(f).sum::<f64>() / r;
    MartingaleStats {
        n_sites,
        replicas: paths.len(),
        failures,
        mean_u,
        variance_u,
        std_error: (variance_u / r).sqrt(),
        mean_compensator: mean(&|p| *p.compensator.last().unwrap_or(&0.0)),
        max_generator: mean(&|p| p.max_abs_generator()),
        max_scaled_fluctuation: mean(&|p| n_sites as f64 * p.max_fluctuation()),
        event_count: paths.iter().map(|p| p.event_count).sum(),
        seconds,
    }
}

/// Martingale statistics with an explicit choice of test functions.
pub fn run_martingale_study_with(
    config: &ExperimentConfig,
    tf: &SpeciesTestFunctions,
    progress: &mut dyn FnMut(&str),
) -> Result<MartingaleReport> {
    config.validate()?;
    let mut stats = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let started = Instant::now();
        let rates = config.rates(n)?;
        let results: Vec<Result<MartingalePath>> = (0..config.replicas)
            .into_par_iter()
            .map(|r| {
                let seed = replica_seed(config.seed_base, r);
                let initial = initial_configuration(config, n, seed)?;
                martingale_path(
                    &initial,
                    &rates,
                    tf,
                    config.horizon,
                    config.quadrature_step,
                    dynamics_seed(seed),
                )
            })
            .collect();
        let mut paths = Vec::with_capacity(results.len());
        let mut first_error = None;
        for res in results {
            match res {
                Ok(p) => paths.push(p),
                Err(e) => {
                    first_error.get_or_insert(e);
                }
            }
        }
        let failures = config.replicas - paths.len();
        if paths.is_empty() {
            return Err(Error::ReplicasFailed {
                n_sites: n,
                replicas: config.replicas,
                first: Box::new(first_error.expect("no replicas requested")),
            });
        }
        let s = summarize(n, &paths, failures, started.elapsed().as_secs_f64());
        progress(&format!(
            "N = {n}: mean U_T = {:.3e} (se {:.3e}), Var = {:.3e}, {:.1} s",
            s.mean_u, s.std_error, s.variance_u, s.seconds
        ));
        stats.push(s);
    }
    let points: Vec<(f64, f64)> = stats.iter().map(|s| (s.n_sites as f64, s.variance_u)).collect();
    Ok(MartingaleReport {
        variance_slope: log_log_slope(&points),
        stats,
        quadrature_step: config.quadrature_step,
        seeds: (0..config.replicas)
            .map(|r| replica_seed(config.seed_base, r))
            .collect(),
    })
}

/// Martingale statistics for the configured test function.
pub fn run_martingale_study(config: &ExperimentConfig) -> Result<MartingaleReport> {
    run_martingale_study_with(config, &config.martingale_test_functions(), &mut |_| {})
}

/// Residual of one test function on one density source.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    /// Ring size `N` (empirical) or grid size `M` (PDE).
    pub size: usize,
    pub function: usize,
    pub residual: f64,
    /// Mean absolute residual of single replicas, computed from their binned
    /// profiles (empirical source only).
    pub replica_mean_abs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub drift_sign: DriftSign,
    pub empirical: Vec<ResidualRow>,
    pub pde: Vec<ResidualRow>,
    /// Per function: `|residual|` at the largest N below the smallest N.
    pub empirical_improves: Vec<bool>,
    /// Per function: `|residual|` decreases at every step of the N list.
    pub empirical_monotone: Vec<bool>,
    /// Per function: observed orders `log(|r_M| / |r_2M|) / log 2` between successive grids.
    pub pde_orders: Vec<Vec<f64>>,
    /// Per function: `|residual|` decreases at every refinement.
    pub pde_monotone: Vec<bool>,
}

impl ResidualReport {
    pub fn empirical_at(&self, n_sites: usize, function: usize) -> Option<&ResidualRow> {
        self.empirical
            .iter()
            .find(|r| r.size == n_sites && r.function == function)
    }
}

fn check_time_nodes(config: &ExperimentConfig) -> Result<()> {
    let t = &config.checkpoints;
    if t.len() < 2 || t[0] != 0.0 || *t.last().unwrap() != config.horizon {
        return Err(Error::InvalidParameter(
            "the residual study needs checkpoints spanning 0 to the horizon".into(),
        ));
    }
    Ok(())
}

fn residual_of(
    config: &ExperimentConfig,
    function: usize,
    mu: f64,
    densities: impl Iterator<Item = (f64, CellDensity)>,
) -> Result<f64> {
    let mut acc = WeakResidual::new(config.family()[function].clone(), config.lambda(), mu);
    for (t, rho) in densities {
        acc.push(t, &rho)?;
    }
    Ok(acc.value())
}

fn per_function<F: Fn(&[f64]) -> bool>(rows: &[ResidualRow], functions: usize, test: F) -> Vec<bool> {
    (0..functions)
        .map(|f| {
            let series: Vec<f64> = rows
                .iter()
                .filter(|r| r.function == f)
                .map(|r| r.residual.abs())
                .collect();
            test(&series)
        })
        .collect()
}

/// Residuals of precomputed ensembles and of PDE solutions under refinement,
/// with drift orientation `sign`.
pub fn residual_study_from_ensembles(
    config: &ExperimentConfig,
    ensembles: &[Ensemble],
    sign: DriftSign,
) -> Result<ResidualReport> {
    config.validate()?;
    check_time_nodes(config)?;
    if config.family_size == 0 {
        return Err(Error::InvalidParameter("empty test-function family".into()));
    }
    let mu = sign.value() * config.scalar_drift()?;
    let functions = config.family_size;
    let times = &config.checkpoints;

    let mut empirical = Vec::new();
    for e in ensembles {
        if e.checkpoints != *times {
            return Err(Error::ShapeMismatch(
                "ensemble checkpoints differ from the configuration".into(),
            ));
        }
        for f in 0..functions {
            let mean = residual_of(
                config,
                f,
                mu,
                e.site_mean
                    .iter()
                    .map(|p| (p.t, CellDensity::sites(e.n_sites, p.density[0].clone()))),
            )?;
            let singles = e
                .runs
                .iter()
                .map(|run| {
                    residual_of(
                        config,
                        f,
                        mu,
                        run.profiles
                            .iter()
                            .map(|p| (p.t, CellDensity::sites(e.n_sites, p.density[0].clone()))),
                    )
                    .map(f64::abs)
                })
                .collect::<Result<Vec<f64>>>()?;
            empirical.push(ResidualRow {
                size: e.n_sites,
                function: f,
                residual: mean,
                replica_mean_abs: Some(singles.iter().sum::<f64>() / singles.len() as f64),
            });
        }
    }

    let params = config.pde_params(sign)?;
    let pde_results: Vec<Result<Vec<ResidualRow>>> = config
        .pde_refinements
        .par_iter()
        .map(|&m| {
            let initial = config.pde_initial(m)?;
            let mut accs: Vec<WeakResidual> = config
                .family()
                .into_iter()
                .map(|phi| WeakResidual::new(phi, config.lambda(), mu))
                .collect();
            let mut failure = None;
            solve_observed(&initial, &params, config.horizon, &[], |s| {
                for acc in accs.iter_mut() {
                    if let Err(e) = acc.push(s.t, &s.cell_density(0)) {
                        failure.get_or_insert(e);
                    }
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(accs
                .iter()
                .enumerate()
                .map(|(f, acc)| ResidualRow {
                    size: m,
                    function: f,
                    residual: acc.value(),
                    replica_mean_abs: None,
                })
                .collect())
        })
        .collect();
    let mut pde = Vec::new();
    for rows in pde_results {
        pde.extend(rows?);
    }

    let sizes = &config.pde_refinements;
    let pde_orders = (0..functions)
        .map(|f| {
            let series: Vec<f64> = pde
                .iter()
                .filter(|r| r.function == f)
                .map(|r| r.residual.abs())
                .collect();
            series
                .windows(2)
                .zip(sizes.windows(2))
                .map(|(r, m)| (r[0] / r[1]).ln() / (m[1] as f64 / m[0] as f64).ln())
                .collect()
        })
        .collect();

    Ok(ResidualReport {
        drift_sign: sign,
        empirical_improves: per_function(&empirical, functions, |s| s.len() >= 2 && s.last() < s.first()),
        empirical_monotone: per_function(&empirical, functions, |s| s.windows(2).all(|w| w[1] < w[0])),
        pde_monotone: per_function(&pde, functions, |s| s.windows(2).all(|w| w[1] < w[0])),
        pde_orders,
        empirical,
        pde,
    })
}

/// Simulates every ring size, resolves the drift orientation per the
/// configured policy, and tabulates residuals for the test-function family.
pub fn run_weak_residual_study_with(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<ResidualReport> {
    config.validate()?;
    check_time_nodes(config)?;
    config.scalar_drift()?;
    let mut ensembles = Vec::with_capacity(config.n_list.len());
    for &n in &config.n_list {
        let started = Instant::now();
        ensembles.push(simulate_ensemble(config, n)?);
        progress(&format!(
            "N = {n}: simulated in {:.1} s",
            started.elapsed().as_secs_f64()
        ));
    }
    let sign = match config.drift {
        DriftPolicy::Fixed(s) => s,
        DriftPolicy::Auto => compare_ensembles(config, &ensembles)?.drift_sign,
    };
    residual_study_from_ensembles(config, &ensembles, sign)
}

pub fn run_weak_residual_study(config: &ExperimentConfig) -> Result<ResidualReport> {
    run_weak_residual_study_with(config, &mut |_| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::uniform_checkpoints;
    use crate::observables::{TestFunction, TimeFactor};
    use crate::trig::TrigPoly;

    fn small(mu: f64) -> ExperimentConfig {
        let mut c = ExperimentConfig::asep(1.0, mu, vec![32, 64], 0.01);
        c.replicas = 4;
        c.bins = 8;
        c.quadrature_step = 0.01 / 200.0;
        c.pde_refinements = vec![16, 32];
        c.checkpoints = uniform_checkpoints(0.01, 20);
        c
    }

    #[test]
    fn no_contrast_gives_vanishing_statistics() {
        let c = small(1.0);
        let phi = TestFunction::new(TrigPoly::cosine(1, 1.0), TimeFactor::Vanishing { horizon: c.horizon });
        let tf = SpeciesTestFunctions::pair(phi.clone(), phi);
        let r = run_martingale_study_with(&c, &tf, &mut |_| {}).unwrap();
        for s in &r.stats {
            assert!(s.mean_u.abs() < 1e-9 && s.variance_u < 1e-15);
            assert_eq!(s.max_generator, 0.0);
            assert_eq!(s.max_scaled_fluctuation, 0.0);
        }
    }

    #[test]
    fn martingale_report_is_reproducible() {
        let c = small(2.0);
        let a = run_martingale_study(&c).unwrap();
        let b = run_martingale_study(&c).unwrap();
        assert_eq!(
            a.stats.iter().map(|s| s.mean_u).collect::<Vec<_>>(),
            b.stats.iter().map(|s| s.mean_u).collect::<Vec<_>>()
        );
        assert!(a.variance_slope.is_some());
        assert!(a
            .stats
            .iter()
            .all(|s| s.variance_u >= 0.0 && s.max_scaled_fluctuation > 0.0));
    }

    #[test]
    fn constant_initial_data_has_small_residuals() {
        let mut c = small(2.0);
        c.initial = crate::harness::config::cosine_pair(0.5, 0.0);
        c.checkpoints = uniform_checkpoints(c.horizon, 200);
        c.drift = DriftPolicy::Fixed(DriftSign::Plus);
        c.sampling = crate::lattice::SamplingMode::Deterministic;
        let r = run_weak_residual_study(&c).unwrap();
        for row in &r.pde {
            assert!(row.residual.abs() < 1e-10, "{row:?}");
        }
    }

    #[test]
    fn residual_needs_full_time_span() {
        let mut c = small(1.0);
        c.checkpoints = vec![0.0, 0.005];
        assert!(run_weak_residual_study(&c).is_err());
    }
}
