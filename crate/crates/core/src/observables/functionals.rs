//! Macroscopic functionals of a single configuration.
//!
//! With `log Z_t = (1/N) sum_i sum_k phi_k(i/N, t) X_i^k`, the generator acts
//! on `Z` as `Omega Z = L Z`, where
//! `L = sum_events rate * (exp(delta) - 1)` and `delta` is the change of
//! `log Z` caused by the event. The conditional variance rate is
//! `Omega Z^2 - 2 Z Omega Z = R Z^2` with `R = sum_events rate * (exp(delta) - 1)^2`.
//! Both are evaluated exactly at finite `N`.

use crate::dynamics::events::check_compatible;
use crate::dynamics::{ChannelTable, RateTable};
use crate::error::{Error, Result};
use crate::lattice::RingConfiguration;
use crate::observables::testfn::SpeciesTestFunctions;

/// Box-averaged species densities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProfile {
    pub t: f64,
    /// Sites aggregated into each bin.
    pub sites: usize,
    /// `density[k][j]`: fraction of bin `j` occupied by species `k`.
    pub density: Vec<Vec<f64>>,
}

impl EmpiricalProfile {
    pub fn bins(&self) -> usize {
        self.density.first().map_or(0, Vec::len)
    }

    pub fn n_species(&self) -> usize {
        self.density.len()
    }

    /// Ring size the profile was binned from.
    pub fn n_sites(&self) -> usize {
        self.sites * self.bins()
    }
}

/// Bins `config` into `bins` equal blocks of `N / bins` consecutive sites.
pub fn empirical_profile(config: &RingConfiguration, bins: usize, t: f64) -> Result<EmpiricalProfile> {
    let n_sites = config.len();
    if bins == 0 || !n_sites.is_multiple_of(bins) {
        return Err(Error::BinMismatch { bins, sites: n_sites });
    }
    let per_bin = n_sites / bins;
    let mut counts = vec![vec![0usize; bins]; config.n_species()];
    for (i, &s) in config.species().iter().enumerate() {
        counts[s as usize][i / per_bin] += 1;
    }
    let density = counts
        .into_iter()
        .map(|row| row.into_iter().map(|c| c as f64 / per_bin as f64).collect())
        .collect();
    Ok(EmpiricalProfile {
        t,
        sites: per_bin,
        density,
    })
}

fn check_species(config: &RingConfiguration, tf: &SpeciesTestFunctions) -> Result<()> {
    if tf.n_species() != config.n_species() {
        return Err(Error::ShapeMismatch(format!(
            "{} test functions for {} species",
            tf.n_species(),
            config.n_species()
        )));
    }
    Ok(())
}

/// `log Z_t = (1/N) sum_i phi_{X_i}(i/N, t)`.
pub fn log_z(config: &RingConfiguration, tf: &SpeciesTestFunctions, t: f64) -> Result<f64> {
    check_species(config, tf)?;
    let n = config.len() as f64;
    Ok(config
        .species()
        .iter()
        .enumerate()
        .map(|(i, &s)| tf.get(s as usize).value(i as f64 / n, t))
        .sum::<f64>()
        / n)
}

/// `theta_t = (1/N) sum_i d/dt phi_{X_i}(i/N, t)`.
pub fn theta(config: &RingConfiguration, tf: &SpeciesTestFunctions, t: f64) -> Result<f64> {
    check_species(config, tf)?;
    let n = config.len() as f64;
    Ok(config
        .species()
        .iter()
        .enumerate()
        .map(|(i, &s)| tf.get(s as usize).dt(i as f64 / n, t))
        .sum::<f64>()
        / n)
}

/// Calls `visit(rate, expm1(delta))` for every enabled event.
fn for_each_event<F: FnMut(f64, f64)>(
    config: &RingConfiguration,
    tf: &SpeciesTestFunctions,
    rates: &RateTable,
    t: f64,
    mut visit: F,
) -> Result<()> {
    check_species(config, tf)?;
    check_compatible(config, rates)?;
    let table = ChannelTable::new(rates);
    let n_sites = config.len();
    let n = n_sites as f64;
    let phi = |k: usize, i: usize| tf.get(k).value(i as f64 / n, t);
    for bond in 0..n_sites {
        let right = (bond + 1) % n_sites;
        let (k, l) = (config.get(bond), config.get(right));
        for ch in table.channels(table.pair_index(k, l)) {
            let (a, b) = ch.products;
            // Evaluate phi at i/N with i = N for the wrap-around bond, matching
            // the forward difference psi((i+1)/N) - psi(i/N) on the torus.
            let right_pos = bond + 1;
            let delta = (phi(a, bond) - phi(k, bond) + phi(b, right_pos) - phi(l, right_pos)) / n;
            visit(ch.rate, delta.exp_m1());
        }
    }
    Ok(())
}

/// Generator term `L_t` with `Omega Z = L Z`, evaluated exactly.
pub fn generator_term(config: &RingConfiguration, tf: &SpeciesTestFunctions, rates: &RateTable, t: f64) -> Result<f64> {
    let mut sum = 0.0;
    for_each_event(config, tf, rates, t, |rate, em1| sum += rate * em1)?;
    Ok(sum)
}

/// Fluctuation term `R_t = sum rate (exp(delta) - 1)^2 >= 0`.
pub fn fluctuation_term(
    config: &RingConfiguration,
    tf: &SpeciesTestFunctions,
    rates: &RateTable,
    t: f64,
) -> Result<f64> {
    let mut sum = 0.0;
    for_each_event(config, tf, rates, t, |rate, em1| sum += rate * em1 * em1)?;
    Ok(sum)
}
