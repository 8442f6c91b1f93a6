//! Event-driven kinetic Monte Carlo.
//!
//! Bonds are grouped by the species pair they carry. All bonds in a group
//! fire at the same total rate, so an event is chosen by first picking a
//! group with probability `count * rate / total` and then a uniform member.
//! A reaction at bond `i` only changes the pairs on bonds `i-1, i, i+1`,
//! which keeps each step O(1) in `N` (O(n^2) in the alphabet size).

use rand::distributions::Open01;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::events::{check_compatible, ChannelTable, Reaction};
use crate::dynamics::rates::RateTable;
use crate::error::{Error, Result};
use crate::lattice::RingConfiguration;

/// Generator used for every stochastic component of the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// What a single step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub bond: usize,
    pub reaction: Reaction,
    /// Macroscopic waiting time before the reaction.
    pub dt: f64,
}

/// A running chain: configuration, clock and bond bookkeeping.
#[derive(Debug, Clone)]
pub struct Kmc {
    config: RingConfiguration,
    table: ChannelTable,
    time: f64,
    events: u64,
    /// Pair index currently carried by each bond.
    bond_pair: Vec<u32>,
    /// Position of each bond inside its group's member list.
    slot: Vec<u32>,
    /// Member lists, one block of `N` slots per pair group.
    members: Vec<u32>,
    counts: Vec<u32>,
    /// Pair groups with nonzero rate, in a fixed order.
    live_pairs: Vec<usize>,
}

impl Kmc {
    pub fn new(config: RingConfiguration, rates: &RateTable) -> Result<Self> {
        check_compatible(&config, rates)?;
        let table = ChannelTable::new(rates);
        let n = table.n_species();
        let n_sites = config.len();
        let mut members = vec![0; n * n * n_sites];
        let mut counts = vec![0u32; n * n];
        let mut bond_pair = Vec::with_capacity(n_sites);
        let mut slot = Vec::with_capacity(n_sites);
        for bond in 0..n_sites {
            let pair = table.pair_index(config.get(bond), config.get(bond + 1));
            bond_pair.push(pair as u32);
            slot.push(counts[pair]);
            members[pair * n_sites + counts[pair] as usize] = bond as u32;
            counts[pair] += 1;
        }
        let live_pairs = (0..n * n).filter(|&p| table.pair_rate(p) > 0.0).collect();
        Ok(Self {
            config,
            table,
            time: 0.0,
            events: 0,
            bond_pair,
            slot,
            members,
            counts,
            live_pairs,
        })
    }

    pub fn config(&self) -> &RingConfiguration {
        &self.config
    }

    pub fn into_config(self) -> RingConfiguration {
        self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn channels(&self) -> &ChannelTable {
        &self.table
    }

    /// Pair index carried by `bond`.
    #[inline]
    pub fn bond_pair(&self, bond: usize) -> usize {
        self.bond_pair[bond] as usize
    }

    pub fn total_rate(&self) -> f64 {
        self.live_pairs
            .iter()
            .map(|&p| self.counts[p] as f64 * self.table.pair_rate(p))
            .sum()
    }

    /// Draws the waiting time and the reaction without applying anything.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StepOutcome> {
        let total = self.total_rate();
        if total <= 0.0 {
            return Err(Error::Frozen);
        }
        let u: f64 = rng.sample(Open01);
        let dt = -u.ln() / total;

        let mut target = rng.gen::<f64>() * total;
        let mut chosen = None;
        for &p in &self.live_pairs {
            let count = self.counts[p] as usize;
            if count == 0 {
                continue;
            }
            let rate = self.table.pair_rate(p);
            let weight = count as f64 * rate;
            chosen = Some((p, target, rate, count));
            if target < weight {
                break;
            }
            target -= weight;
        }
        // Rounding can leave `target` marginally past the last group; the
        // last nonempty group then absorbs it.
        let (pair, target, rate, count) = chosen.ok_or(Error::Frozen)?;
        let idx = ((target / rate) as usize).min(count - 1);
        let bond = self.members[pair * self.config.len() + idx] as usize;
        let mut within = target - idx as f64 * rate;
        let channels = self.table.channels(pair);
        let mut reaction = channels[channels.len() - 1].reaction;
        for ch in channels {
            if within < ch.rate {
                reaction = ch.reaction;
                break;
            }
            within -= ch.rate;
        }
        Ok(StepOutcome { bond, reaction, dt })
    }

    /// Fires `reaction` on `bond` without advancing the clock.
    pub fn apply(&mut self, bond: usize, reaction: Reaction) {
        let n_sites = self.config.len();
        let n = self.table.n_species();
        let right = if bond + 1 == n_sites { 0 } else { bond + 1 };
        debug_assert_eq!(
            self.bond_pair(bond),
            self.table.pair_index(
                match reaction {
                    Reaction::Exchange { left, .. } => left,
                    Reaction::Fold { k } | Reaction::Unfold { k } => k,
                },
                match reaction {
                    Reaction::Exchange { right, .. } => right,
                    Reaction::Fold { k } | Reaction::Unfold { k } => (k + n / 2) % n,
                }
            )
        );
        let (a, b) = reaction.products(n);
        self.config.set(bond, a);
        self.config.set(right, b);
        let prev = if bond == 0 { n_sites - 1 } else { bond - 1 };
        self.refresh_bond(prev);
        self.refresh_bond(bond);
        self.refresh_bond(right);
        self.events += 1;
    }

    /// Advances the clock by `dt` and fires the proposed reaction.
    pub fn commit(&mut self, outcome: &StepOutcome) {
        self.time += outcome.dt;
        self.apply(outcome.bond, outcome.reaction);
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome> {
        let outcome = self.propose(rng)?;
        self.commit(&outcome);
        Ok(outcome)
    }

    fn refresh_bond(&mut self, bond: usize) {
        let species = self.config.species();
        let right = if bond + 1 == species.len() { 0 } else { bond + 1 };
        let new_pair = self.table.pair_index(species[bond] as usize, species[right] as usize);
        let old_pair = self.bond_pair[bond] as usize;
        if new_pair == old_pair {
            return;
        }
        let n_sites = species.len();
        let pos = self.slot[bond] as usize;
        let old_base = old_pair * n_sites;
        self.counts[old_pair] -= 1;
        let last = self.counts[old_pair] as usize;
        let moved = self.members[old_base + last];
        self.members[old_base + pos] = moved;
        self.slot[moved as usize] = pos as u32;

        let end = self.counts[new_pair];
        self.members[new_pair * n_sites + end as usize] = bond as u32;
        self.slot[bond] = end;
        self.counts[new_pair] = end + 1;
        self.bond_pair[bond] = new_pair as u32;
    }
}

/// One reaction from `config`, returning the new configuration and the
/// macroscopic waiting time.
pub fn kmc_step<R: Rng + ?Sized>(
    config: &RingConfiguration,
    rates: &RateTable,
    rng: &mut R,
) -> Result<(RingConfiguration, f64)> {
    let mut kmc = Kmc::new(config.clone(), rates)?;
    let outcome = kmc.step(rng)?;
    Ok((kmc.into_config(), outcome.dt))
}

/// Configurations recorded at the requested checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<(f64, RingConfiguration)>,
    pub event_count: u64,
    pub final_time: f64,
    /// Every fired reaction with its firing time, when recording was asked for.
    pub events: Option<Vec<EventRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub bond: usize,
    pub reaction: Reaction,
}

pub(crate) fn check_checkpoints(checkpoints: &[f64], horizon: f64) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be finite and >= 0, got {horizon}"
        )));
    }
    let sorted = checkpoints.windows(2).all(|w| w[0] <= w[1]);
    let inside = checkpoints.iter().all(|&t| (0.0..=horizon).contains(&t));
    if !sorted || !inside {
        return Err(Error::BadCheckpoints { horizon });
    }
    Ok(())
}

/// Runs `kmc` up to macroscopic time `horizon`.
///
/// `on_checkpoint` sees the state at each checkpoint (the state after every
/// event at or before that time). `on_event` is called just before each
/// reaction fires, with the chain still in its pre-event state. A frozen
/// chain holds its state until the horizon.
pub fn run_until<R, C, E>(
    kmc: &mut Kmc,
    horizon: f64,
    checkpoints: &[f64],
    rng: &mut R,
    mut on_checkpoint: C,
    mut on_event: E,
) -> Result<()>
where
    R: Rng + ?Sized,
    C: FnMut(f64, &Kmc),
    E: FnMut(&Kmc, &StepOutcome),
{
    check_checkpoints(checkpoints, horizon)?;
    let mut next = 0;
    loop {
        let outcome = match kmc.propose(rng) {
            Ok(o) => Some(o),
            Err(Error::Frozen) => None,
            Err(e) => return Err(e),
        };
        let fire_at = outcome.map_or(f64::INFINITY, |o| kmc.time() + o.dt);
        while next < checkpoints.len() && checkpoints[next] < fire_at {
            on_checkpoint(checkpoints[next], kmc);
            next += 1;
        }
        match outcome {
            Some(o) if fire_at <= horizon => {
                on_event(kmc, &o);
                kmc.commit(&o);
            }
            _ => break,
        }
    }
    kmc.time = horizon;
    Ok(())
}

/// Simulates from `config` to `horizon` with a fresh generator seeded by `seed`.
pub fn simulate(
    config: &RingConfiguration,
    rates: &RateTable,
    horizon: f64,
    checkpoints: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    simulate_recorded(config, rates, horizon, checkpoints, seed, false)
}

/// As [`simulate`], optionally keeping the full event log.
pub fn simulate_recorded(
    config: &RingConfiguration,
    rates: &RateTable,
    horizon: f64,
    checkpoints: &[f64],
    seed: u64,
    record_events: bool,
) -> Result<Trajectory> {
    let mut kmc = Kmc::new(config.clone(), rates)?;
    let mut rng = rng_from_seed(seed);
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut log = record_events.then(Vec::new);
    run_until(
        &mut kmc,
        horizon,
        checkpoints,
        &mut rng,
        |t, k| snapshots.push((t, k.config().clone())),
        |k, o| {
            if let Some(log) = log.as_mut() {
                log.push(EventRecord {
                    time: k.time() + o.dt,
                    bond: o.bond,
                    reaction: o.reaction,
                });
            }
        },
    )?;
    Ok(Trajectory {
        snapshots,
        event_count: kmc.event_count(),
        final_time: kmc.time(),
        events: log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::events::active_events;
    use crate::dynamics::rates::{build_rate_table, FoldRates, ScalingSpec};
    use crate::lattice::{sample_from_profile, SamplingMode, SpeciesAlphabet};
    use std::sync::Arc;

    fn ab() -> Arc<SpeciesAlphabet> {
        Arc::new(SpeciesAlphabet::binary())
    }

    fn half_filled(n: usize, seed: u64) -> RingConfiguration {
        let half = |_: f64| 0.5;
        sample_from_profile(&[half, half], ab(), n, seed, SamplingMode::Random).unwrap()
    }

    #[test]
    fn frozen_configuration() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 1.0 }, 6).unwrap();
        let cfg = RingConfiguration::uniform(6, ab(), 0).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(kmc_step(&cfg, &rates, &mut rng), Err(Error::Frozen));
    }

    #[test]
    fn exchange_preserves_counts() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 3.0 }, 40).unwrap();
        let cfg = half_filled(40, 3);
        let counts = cfg.species_counts();
        let mut kmc = Kmc::new(cfg, &rates).unwrap();
        let mut rng = rng_from_seed(9);
        for _ in 0..5000 {
            let o = kmc.step(&mut rng).unwrap();
            assert!(o.dt > 0.0);
            assert_eq!(kmc.config().species_counts(), counts);
        }
    }

    #[test]
    fn bookkeeping_matches_enumeration() {
        let alpha = vec![
            vec![0.0, 1.0, -2.0, 0.5],
            vec![-1.0, 0.0, 1.0, 0.0],
            vec![2.0, -1.0, 0.0, 3.0],
            vec![-0.5, 0.0, -3.0, 0.0],
        ];
        let spec = ScalingSpec::NSpecies {
            lambda: 1.0,
            alpha,
            fold: Some(FoldRates {
                gamma: vec![10.0, 20.0, 30.0, 40.0],
                delta: vec![5.0, 6.0, 7.0, 8.0],
            }),
        };
        let n_sites = 24;
        let rates = build_rate_table(&spec, n_sites).unwrap();
        let abcd = Arc::new(SpeciesAlphabet::letters(4).unwrap());
        let assignment: Vec<usize> = (0..n_sites).map(|i| (i * 7 + i / 3) % 4).collect();
        let cfg = RingConfiguration::new(n_sites, abcd, &assignment).unwrap();
        let mut kmc = Kmc::new(cfg, &rates).unwrap();
        let mut rng = rng_from_seed(5);
        let mut saw_fold = false;
        for _ in 0..3000 {
            let set = active_events(kmc.config(), &rates).unwrap();
            let total = kmc.total_rate();
            assert!((set.total_rate - total).abs() <= 1e-9 * total);
            let o = kmc.step(&mut rng).unwrap();
            saw_fold |= !o.reaction.is_exchange();
        }
        assert!(saw_fold);
    }

    #[test]
    fn forward_fold_count_change() {
        let n = 4;
        let spec = ScalingSpec::NSpecies {
            lambda: 1.0,
            alpha: vec![vec![0.0; n]; n],
            fold: Some(FoldRates {
                gamma: vec![1.0; n],
                delta: vec![0.0; n],
            }),
        };
        let rates = build_rate_table(&spec, 6).unwrap();
        let abcd = Arc::new(SpeciesAlphabet::letters(4).unwrap());
        // Fold pair (0, 2) on bond 0; all other bonds uniform or inert.
        let cfg = RingConfiguration::new(6, abcd, &[0, 2, 2, 2, 2, 2]).unwrap();
        let mut kmc = Kmc::new(cfg.clone(), &rates).unwrap();
        let before = cfg.species_counts();
        kmc.apply(0, Reaction::Fold { k: 0 });
        let after = kmc.config().species_counts();
        let delta: Vec<i64> = after.iter().zip(&before).map(|(a, b)| *a as i64 - *b as i64).collect();
        assert_eq!(delta, vec![-1, 1, -1, 1]);
        kmc.apply(0, Reaction::Unfold { k: 1 });
        assert_eq!(kmc.config(), &cfg);
    }

    #[test]
    fn single_channel_waiting_time_mean() {
        // One particle, totally asymmetric: only the right jump is enabled.
        let n = 10;
        let spec = ScalingSpec::Asep { lambda: 1.0, mu: 20.0 };
        let rates = build_rate_table(&spec, n).unwrap();
        assert_eq!(rates.exchange(1, 0), 0.0);
        let mut assignment = vec![1; n];
        assignment[0] = 0;
        let cfg = RingConfiguration::new(n, ab(), &assignment).unwrap();
        let r = rates.exchange(0, 1);
        let mut kmc = Kmc::new(cfg, &rates).unwrap();
        let mut rng = rng_from_seed(11);
        let draws = 100_000;
        let mean: f64 = (0..draws).map(|_| kmc.step(&mut rng).unwrap().dt).sum::<f64>() / draws as f64;
        assert!((mean * r - 1.0).abs() < 0.01, "mean * r = {}", mean * r);
    }

    #[test]
    fn simulate_zero_horizon() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 0.0 }, 16).unwrap();
        let cfg = half_filled(16, 0);
        let traj = simulate(&cfg, &rates, 0.0, &[0.0], 1).unwrap();
        assert_eq!(traj.snapshots, vec![(0.0, cfg)]);
        assert_eq!(traj.event_count, 0);
    }

    #[test]
    fn simulate_is_deterministic() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 1.0 }, 32).unwrap();
        let cfg = half_filled(32, 0);
        let cps = [0.0, 0.001, 0.005, 0.01];
        let a = simulate(&cfg, &rates, 0.01, &cps, 77).unwrap();
        let b = simulate(&cfg, &rates, 0.01, &cps, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.event_count > 0);
        assert_eq!(a.final_time, 0.01);
        let c = simulate(&cfg, &rates, 0.01, &cps, 78).unwrap();
        assert_ne!(a.snapshots, c.snapshots);
    }

    #[test]
    fn frozen_chain_holds_state() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 0.0 }, 8).unwrap();
        let cfg = RingConfiguration::uniform(8, ab(), 1).unwrap();
        let traj = simulate(&cfg, &rates, 1.0, &[0.0, 0.5, 1.0], 3).unwrap();
        assert_eq!(traj.snapshots.len(), 3);
        assert!(traj.snapshots.iter().all(|(_, c)| c == &cfg));
    }

    #[test]
    fn bad_checkpoints() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 0.0 }, 8).unwrap();
        let cfg = half_filled(8, 0);
        assert!(matches!(
            simulate(&cfg, &rates, 1.0, &[0.5, 0.2], 0),
            Err(Error::BadCheckpoints { .. })
        ));
        assert!(matches!(
            simulate(&cfg, &rates, 1.0, &[1.5], 0),
            Err(Error::BadCheckpoints { .. })
        ));
    }

    #[test]
    fn recorded_events_replay_to_final_state() {
        let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 2.0 }, 20).unwrap();
        let cfg = half_filled(20, 4);
        let traj = simulate_recorded(&cfg, &rates, 0.02, &[0.02], 8, true).unwrap();
        let log = traj.events.as_ref().unwrap();
        assert_eq!(log.len() as u64, traj.event_count);
        assert!(log.windows(2).all(|w| w[0].time <= w[1].time));
        let mut replay = Kmc::new(cfg, &rates).unwrap();
        for e in log {
            replay.apply(e.bond, e.reaction);
        }
        assert_eq!(replay.config(), &traj.snapshots[0].1);
    }
}
