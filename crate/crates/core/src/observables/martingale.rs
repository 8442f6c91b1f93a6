//! The martingale `U_t = Z_t - Z_0 - int_0^t (L_s + theta_s) Z_s ds` along a
//! simulated path, together with the compensator `int_0^t Z_s^2 R_s ds` of `U^2`.
//!
//! Evaluating `L` and `R` from scratch costs O(N) per call, and the time
//! integral needs them at every event. For a separable test function
//! `phi_k(x, t) = p_k(x) s(t)` the log-increment of an event is
//! `delta = s(t) d` with `d` independent of time, so
//!
//! ```text
//! L(t) = sum_m s^m / m! * M_m,   R(t) = sum_m (2^m - 2) s^m / m! * M_m,
//! M_m = sum_events rate * d^m.
//! ```
//!
//! The moments `M_m` change only on the three bonds touched by an event and
//! are kept up to date incrementally; `|d| = O(N^-2)` so a handful of terms
//! reach machine precision.

use crate::dynamics::events::check_compatible;
use crate::dynamics::{rng_from_seed, ChannelTable, Kmc, RateTable, StepOutcome};
use crate::error::{Error, Result};
use crate::lattice::RingConfiguration;
use crate::observables::testfn::SpeciesTestFunctions;

const MAX_TERMS: usize = 24;

/// Values along the quadrature grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MartingalePath {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    pub theta: Vec<f64>,
    pub generator: Vec<f64>,
    pub fluctuation: Vec<f64>,
    pub u: Vec<f64>,
    /// `int_0^t Z^2 R ds`, the increasing process of `U^2`.
    pub compensator: Vec<f64>,
    /// Grid spacing actually used.
    pub step: f64,
    pub event_count: u64,
}

impl MartingalePath {
    pub fn final_u(&self) -> f64 {
        *self.u.last().unwrap_or(&0.0)
    }

    pub fn max_abs_generator(&self) -> f64 {
        self.generator.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_fluctuation(&self) -> f64 {
        self.fluctuation.iter().fold(0.0, |m, &v| m.max(v))
    }
}

/// Uniform grid on `[0, horizon]` with spacing at most `max_step`.
pub fn quadrature_grid(horizon: f64, max_step: f64) -> Result<Vec<f64>> {
    let limit = horizon / 100.0;
    if max_step.is_nan() || max_step <= 0.0 || max_step > limit {
        return Err(Error::GridTooCoarse { step: max_step, limit });
    }
    let intervals = (horizon / max_step).ceil() as usize;
    let h = horizon / intervals as f64;
    let mut grid: Vec<f64> = (0..=intervals).map(|j| j as f64 * h).collect();
    grid[intervals] = horizon;
    Ok(grid)
}

/// Incrementally maintained `log Z / s(t)` and the event moments.
struct MomentTracker {
    n_sites: usize,
    terms: usize,
    /// `p_k(i/N)` for every species `k` and site `i`, plus site `N` (= site 0).
    weights: Vec<Vec<f64>>,
    /// Per-bond contributions `sum_channels rate * d^m`, stride `terms`.
    bond_moments: Vec<f64>,
    moments: Vec<f64>,
    /// `(1/N) sum_i p_{X_i}(i/N)`.
    spatial_sum: f64,
    since_resum: usize,
}

impl MomentTracker {
    fn new(kmc: &Kmc, tf: &SpeciesTestFunctions, time_sup: f64) -> Self {
        let config = kmc.config();
        let n_sites = config.len();
        let nn = n_sites as f64;
        let weights: Vec<Vec<f64>> = tf
            .iter()
            .map(|f| (0..=n_sites).map(|i| f.space.value(i as f64 / nn)).collect())
            .collect();
        let mut tracker = Self {
            n_sites,
            terms: MAX_TERMS,
            weights,
            bond_moments: Vec::new(),
            moments: Vec::new(),
            spatial_sum: 0.0,
            since_resum: 0,
        };
        tracker.terms = series_terms(time_sup * tracker.largest_increment(kmc.channels()));
        tracker.bond_moments = vec![0.0; n_sites * tracker.terms];
        tracker.moments = vec![0.0; tracker.terms];
        for bond in 0..n_sites {
            tracker.fill_bond(kmc, bond);
        }
        tracker.resum(config);
        tracker
    }

    fn increment(&self, bond: usize, from: (usize, usize), to: (usize, usize)) -> f64 {
        let w = &self.weights;
        (w[to.0][bond] - w[from.0][bond] + w[to.1][bond + 1] - w[from.1][bond + 1]) / self.n_sites as f64
    }

    /// Largest `|d|` over every bond and every channel, whatever the configuration.
    fn largest_increment(&self, table: &ChannelTable) -> f64 {
        let n = table.n_species();
        let mut largest: f64 = 0.0;
        for k in 0..n {
            for l in 0..n {
                for ch in table.channels(table.pair_index(k, l)) {
                    for bond in 0..self.n_sites {
                        largest = largest.max(self.increment(bond, (k, l), ch.products).abs());
                    }
                }
            }
        }
        largest
    }

    fn fill_bond(&mut self, kmc: &Kmc, bond: usize) {
        let table: &ChannelTable = kmc.channels();
        let config = kmc.config();
        let from = (config.get(bond), config.get(bond + 1));
        let mut slot = [0.0; MAX_TERMS];
        let slot = &mut slot[..self.terms];
        for ch in table.channels(table.pair_index(from.0, from.1)) {
            let d = self.increment(bond, from, ch.products);
            let mut power = ch.rate;
            for s in slot.iter_mut() {
                power *= d;
                *s += power;
            }
        }
        let base = bond * self.terms;
        self.bond_moments[base..base + self.terms].copy_from_slice(slot);
    }

    fn resum(&mut self, config: &RingConfiguration) {
        self.moments.iter_mut().for_each(|m| *m = 0.0);
        for bond in 0..self.n_sites {
            let base = bond * self.terms;
            for (m, v) in self.moments.iter_mut().zip(&self.bond_moments[base..]) {
                *m += v;
            }
        }
        self.spatial_sum = config
            .species()
            .iter()
            .enumerate()
            .map(|(i, &s)| self.weights[s as usize][i])
            .sum::<f64>()
            / self.n_sites as f64;
        self.since_resum = 0;
    }

    /// Updates after `outcome` has been applied to `kmc`.
    fn after_event(&mut self, kmc: &Kmc, outcome: &StepOutcome, before: (usize, usize)) {
        let bond = outcome.bond;
        let after = (kmc.config().get(bond), kmc.config().get(bond + 1));
        self.spatial_sum += self.increment(bond, before, after);
        let n = self.n_sites;
        for b in [(bond + n - 1) % n, bond, (bond + 1) % n] {
            let base = b * self.terms;
            for m in 0..self.terms {
                self.moments[m] -= self.bond_moments[base + m];
            }
            self.fill_bond(kmc, b);
            for m in 0..self.terms {
                self.moments[m] += self.bond_moments[base + m];
            }
        }
        self.since_resum += 1;
        if self.since_resum >= 16 * n {
            self.resum(kmc.config());
        }
    }

    /// `(L, R)` at time factor value `s`.
    fn generator_and_fluctuation(&self, s: f64) -> (f64, f64) {
        let mut l = 0.0;
        let mut r = 0.0;
        let mut coeff = 1.0;
        let mut two_pow = 1.0;
        for (m, &mm) in self.moments.iter().enumerate() {
            let order = (m + 1) as f64;
            coeff *= s / order;
            two_pow *= 2.0;
            l += coeff * mm;
            r += coeff * (two_pow - 2.0) * mm;
        }
        (l, r.max(0.0))
    }
}

/// Number of series terms so the truncated exponential is exact to rounding
/// for increments of size at most `x`.
fn series_terms(x: f64) -> usize {
    // The remainder after m terms is about x^{m+1}/(m+1)!, compared with x.
    let mut term = 1.0;
    for m in 1..MAX_TERMS {
        term *= x / (m + 1) as f64;
        if term <= 1e-17 {
            return m.max(2);
        }
    }
    MAX_TERMS
}

/// Simulates from `initial` to `horizon` and integrates `U` on a uniform grid
/// refined to spacing `<= max_step`, joined with every event time.
///
/// The test functions must share one time factor (`phi_k = p_k(x) s(t)`).
pub fn martingale_path(
    initial: &RingConfiguration,
    rates: &RateTable,
    tf: &SpeciesTestFunctions,
    horizon: f64,
    max_step: f64,
    seed: u64,
) -> Result<MartingalePath> {
    check_compatible(initial, rates)?;
    if tf.n_species() != initial.n_species() {
        return Err(Error::ShapeMismatch(format!(
            "{} test functions for {} species",
            tf.n_species(),
            initial.n_species()
        )));
    }
    let time = tf
        .common_time_factor()
        .ok_or_else(|| Error::InvalidParameter("test functions must share a time factor".into()))?;
    let grid = quadrature_grid(horizon, max_step)?;
    let step = if grid.len() > 1 { grid[1] - grid[0] } else { 0.0 };

    let mut kmc = Kmc::new(initial.clone(), rates)?;
    let mut rng = rng_from_seed(seed);
    let mut tracker = MomentTracker::new(&kmc, tf, time.sup());

    let integrand = |tr: &MomentTracker, t: f64| {
        let s = time.value(t);
        let (l, r) = tr.generator_and_fluctuation(s);
        let theta = time.derivative(t) * tr.spatial_sum;
        let z = (s * tr.spatial_sum).exp();
        (l, r, theta, z, (l + theta) * z, z * z * r)
    };

    let mut path = MartingalePath {
        step,
        ..Default::default()
    };
    let (_, _, _, z0, f0, g0) = integrand(&tracker, 0.0);
    let mut last_t = 0.0;
    let (mut last_f, mut last_g) = (f0, g0);
    let (mut drift_integral, mut compensator) = (0.0, 0.0);
    let mut next = 0;

    loop {
        let outcome = match kmc.propose(&mut rng) {
            Ok(o) => Some(o),
            Err(Error::Frozen) => None,
            Err(e) => return Err(e),
        };
        let fire_at = outcome.map_or(f64::INFINITY, |o| kmc.time() + o.dt);
        while next < grid.len() && grid[next] < fire_at {
            let t = grid[next];
            let (l, r, theta, z, f, g) = integrand(&tracker, t);
            drift_integral += 0.5 * (t - last_t) * (last_f + f);
            compensator += 0.5 * (t - last_t) * (last_g + g);
            (last_t, last_f, last_g) = (t, f, g);
            path.times.push(t);
            path.z.push(z);
            path.theta.push(theta);
            path.generator.push(l);
            path.fluctuation.push(r);
            path.u.push(z - z0 - drift_integral);
            path.compensator.push(compensator);
            next += 1;
        }
        let Some(o) = outcome.filter(|_| fire_at <= horizon) else {
            break;
        };
        let (_, _, _, _, f, g) = integrand(&tracker, fire_at);
        drift_integral += 0.5 * (fire_at - last_t) * (last_f + f);
        compensator += 0.5 * (fire_at - last_t) * (last_g + g);
        let before = (kmc.config().get(o.bond), kmc.config().get(o.bond + 1));
        kmc.commit(&o);
        tracker.after_event(&kmc, &o, before);
        let (_, _, _, _, f, g) = integrand(&tracker, fire_at);
        (last_t, last_f, last_g) = (fire_at, f, g);
    }
    path.event_count = kmc.event_count();
    Ok(path)
}
