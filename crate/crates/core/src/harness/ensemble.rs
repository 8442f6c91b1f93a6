use rayon::prelude::*;

use crate::dynamics::{rng_from_seed, run_until, Kmc};
use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::lattice::{sample_from_profile, RingConfiguration};
use crate::observables::{empirical_profile, EmpiricalProfile};
use crate::pde::GridState;

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;
const DYNAMICS_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// Seed of replica `r`: `base + r * stride` with a large odd stride.
pub fn replica_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add((r as u64).wrapping_mul(SEED_STRIDE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

impl Norm {
    pub fn name(self) -> &'static str {
        match self {
            Norm::L1 => "L1",
            Norm::L2 => "L2",
        }
    }
}

/// Distance between binned profiles, averaged over species:
/// `L1 = (1/n) sum_k sum_j |p - q| / B`, `L2 = sqrt((1/n) sum_k sum_j (p - q)^2 / B)`.
pub fn distance(p: &EmpiricalProfile, q: &EmpiricalProfile, norm: Norm) -> Result<f64> {
    if p.bins() != q.bins() {
        return Err(Error::BinMismatch {
            bins: q.bins(),
            sites: p.n_sites(),
        });
    }
    if p.n_species() != q.n_species() {
        return Err(Error::ShapeMismatch(format!(
            "{} species against {}",
            p.n_species(),
            q.n_species()
        )));
    }
    let bins = p.bins() as f64;
    let mut total = 0.0;
    for (a, b) in p.density.iter().zip(&q.density) {
        for (x, y) in a.iter().zip(b) {
            total += match norm {
                Norm::L1 => (x - y).abs(),
                Norm::L2 => (x - y).powi(2),
            };
        }
    }
    let mean = total / (bins * p.n_species() as f64);
    Ok(match norm {
        Norm::L1 => mean,
        Norm::L2 => mean.sqrt(),
    })
}

/// Bin averages of `density(k, i/N)` over the sites of each bin.
pub fn project<F: Fn(usize, f64) -> f64>(
    density: F,
    n_species: usize,
    n_sites: usize,
    bins: usize,
    t: f64,
) -> Result<EmpiricalProfile> {
    if bins == 0 || !n_sites.is_multiple_of(bins) {
        return Err(Error::BinMismatch { bins, sites: n_sites });
    }
    let per_bin = n_sites / bins;
    let density = (0..n_species)
        .map(|k| {
            (0..bins)
                .map(|j| {
                    (j * per_bin..(j + 1) * per_bin)
                        .map(|i| density(k, i as f64 / n_sites as f64))
                        .sum::<f64>()
                        / per_bin as f64
                })
                .collect()
        })
        .collect();
    Ok(EmpiricalProfile {
        t,
        sites: per_bin,
        density,
    })
}

/// Restricts a PDE state to the bins of an `n_sites` ring by linear
/// interpolation at the sites. A single field is read as the first of two
/// species, the second being its complement.
pub fn project_grid(grid: &GridState, n_species: usize, n_sites: usize, bins: usize) -> Result<EmpiricalProfile> {
    let single = grid.n_fields() == 1;
    if !(single && n_species == 2) && grid.n_fields() != n_species {
        return Err(Error::ShapeMismatch(format!(
            "{} fields for {} species",
            grid.n_fields(),
            n_species
        )));
    }
    project(
        |k, x| match (single, k) {
            (true, 0) => grid.interpolate(0, x),
            (true, _) => 1.0 - grid.interpolate(0, x),
            (false, k) => grid.interpolate(k, x),
        },
        n_species,
        n_sites,
        bins,
        grid.t,
    )
}

/// Pointwise average of profiles sharing bins and time.
pub fn average_profiles(profiles: &[&EmpiricalProfile]) -> Option<EmpiricalProfile> {
    let first = profiles.first()?;
    let mut mean = (*first).clone();
    for p in &profiles[1..] {
        for (acc, row) in mean.density.iter_mut().zip(&p.density) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    let count = profiles.len() as f64;
    mean.density.iter_mut().flatten().for_each(|a| *a /= count);
    Some(mean)
}

/// One replica at every checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaRun {
    pub seed: u64,
    /// Binned profiles.
    pub profiles: Vec<EmpiricalProfile>,
    /// Full configurations.
    pub configurations: Vec<RingConfiguration>,
    pub event_count: u64,
}

/// All replicas of one ring size.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub n_sites: usize,
    pub checkpoints: Vec<f64>,
    /// Successful replicas in replica order.
    pub runs: Vec<ReplicaRun>,
    pub failures: usize,
    /// Ensemble-averaged profile at each checkpoint.
    pub mean: Vec<EmpiricalProfile>,
    /// Ensemble-averaged occupation of every site at each checkpoint.
    pub site_mean: Vec<EmpiricalProfile>,
}

impl Ensemble {
    pub fn replicas(&self) -> usize {
        self.runs.len()
    }

    pub fn event_count(&self) -> u64 {
        self.runs.iter().map(|r| r.event_count).sum()
    }
}

/// Initial configuration of a replica.
pub fn initial_configuration(config: &ExperimentConfig, n_sites: usize, seed: u64) -> Result<RingConfiguration> {
    let profiles: Vec<_> = config.initial.iter().map(|p| move |x: f64| p.value(x)).collect();
    sample_from_profile(&profiles, config.alphabet.clone(), n_sites, seed, config.sampling)
}

/// Generator seed driving the dynamics of a replica.
pub fn dynamics_seed(seed: u64) -> u64 {
    seed ^ DYNAMICS_SALT
}

fn run_replica(config: &ExperimentConfig, n_sites: usize, seed: u64) -> Result<ReplicaRun> {
    let rates = config.rates(n_sites)?;
    let initial = initial_configuration(config, n_sites, seed)?;
    let mut kmc = Kmc::new(initial, &rates)?;
    let mut rng = rng_from_seed(dynamics_seed(seed));
    let mut profiles = Vec::with_capacity(config.checkpoints.len());
    let mut configurations = Vec::with_capacity(config.checkpoints.len());
    let mut failure = None;
    run_until(
        &mut kmc,
        config.horizon,
        &config.checkpoints,
        &mut rng,
        |t, k| {
            match empirical_profile(k.config(), config.bins, t) {
                Ok(p) => profiles.push(p),
                Err(e) => failure = failure.take().or(Some(e)),
            }
            configurations.push(k.config().clone());
        },
        |_, _| {},
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ReplicaRun {
        seed,
        profiles,
        configurations,
        event_count: kmc.event_count(),
    })
}

/// Fraction of replicas holding each species at each site.
fn site_means(runs: &[ReplicaRun], checkpoints: &[f64], n_species: usize) -> Vec<EmpiricalProfile> {
    checkpoints
        .iter()
        .enumerate()
        .map(|(c, &t)| {
            let n_sites = runs[0].configurations[c].len();
            let mut counts = vec![vec![0usize; n_sites]; n_species];
            for run in runs {
                for (i, &k) in run.configurations[c].species().iter().enumerate() {
                    counts[k as usize][i] += 1;
                }
            }
            let r = runs.len() as f64;
            EmpiricalProfile {
                t,
                sites: 1,
                density: counts
                    .into_iter()
                    .map(|row| row.into_iter().map(|c| c as f64 / r).collect())
                    .collect(),
            }
        })
        .collect()
}

/// Simulates `config.replicas` replicas on `n_sites` sites in parallel.
///
/// Failed replicas are counted and left out of the mean; the call fails only
/// when every replica does. Results are independent of the thread count.
pub fn simulate_ensemble(config: &ExperimentConfig, n_sites: usize) -> Result<Ensemble> {
    let results: Vec<Result<ReplicaRun>> = (0..config.replicas)
        .into_par_iter()
        .map(|r| run_replica(config, n_sites, replica_seed(config.seed_base, r)))
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut first_error = None;
    let mut failures = 0;
    for res in results {
        match res {
            Ok(run) => runs.push(run),
            Err(e) => {
                failures += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if runs.is_empty() {
        return Err(Error::ReplicasFailed {
            n_sites,
            replicas: config.replicas,
            first: Box::new(first_error.expect("no replicas requested")),
        });
    }
    let mean = (0..config.checkpoints.len())
        .map(|c| {
            let at: Vec<&EmpiricalProfile> = runs.iter().map(|r| &r.profiles[c]).collect();
            average_profiles(&at).expect("at least one replica")
        })
        .collect();
    let site_mean = site_means(&runs, &config.checkpoints, config.n_species());
    Ok(Ensemble {
        n_sites,
        checkpoints: config.checkpoints.clone(),
        runs,
        failures,
        mean,
        site_mean,
    })
}
