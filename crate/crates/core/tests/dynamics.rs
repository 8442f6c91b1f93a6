use std::sync::Arc;

use clocklab::dynamics::{
    active_events, build_rate_table, kmc_step, rng_from_seed, run_until, simulate, simulate_recorded, Kmc, ScalingSpec,
};
use clocklab::lattice::{sample_from_profile, RingConfiguration, SamplingMode, SpeciesAlphabet};

fn binary() -> Arc<SpeciesAlphabet> {
    Arc::new(SpeciesAlphabet::binary())
}

fn alternating(n_sites: usize) -> RingConfiguration {
    let assignment: Vec<usize> = (0..n_sites).map(|i| i % 2).collect();
    RingConfiguration::new(n_sites, binary(), &assignment).unwrap()
}

/// Largest gap between the empirical distribution of `samples` and `cdf`.
fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
        let f = cdf(x);
        d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs())
    })
}

#[test]
fn asep_rates_follow_the_diffusive_scaling() {
    let (lambda, mu, n) = (0.7, 3.0, 40usize);
    let t = build_rate_table(&ScalingSpec::Asep { lambda, mu }, n).unwrap();
    let nn = n as f64;
    assert!((t.exchange(0, 1) - (lambda * nn * nn + mu * nn / 2.0)).abs() < 1e-9);
    assert!((t.exchange(1, 0) - (lambda * nn * nn - mu * nn / 2.0)).abs() < 1e-9);
}

#[test]
fn nspecies_log_ratio_recovers_alpha() {
    let alpha = vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]];
    let spec = ScalingSpec::NSpecies {
        lambda: 1.0,
        alpha: alpha.clone(),
        fold: None,
    };
    for n in [16usize, 256, 4096] {
        let t = build_rate_table(&spec, n).unwrap();
        for (k, row) in alpha.iter().enumerate() {
            for (l, &a) in row.iter().enumerate() {
                if k != l {
                    let log_ratio = n as f64 * (t.exchange(k, l) / t.exchange(l, k)).ln();
                    assert!((log_ratio - a).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn waiting_times_are_exponential_with_the_total_rate() {
    let (lambda, mu, n) = (1.0, 2.0, 16usize);
    let rates = build_rate_table(&ScalingSpec::Asep { lambda, mu }, n).unwrap();
    let config = alternating(n);
    let nn = n as f64;
    // Eight AB bonds and eight BA bonds.
    let total = (n / 2) as f64 * 2.0 * lambda * nn * nn;
    let mut rng = rng_from_seed(7);
    let samples: Vec<f64> = (0..5000)
        .map(|_| kmc_step(&config, &rates, &mut rng).unwrap().1)
        .collect();
    let d = ks_statistic(samples, |x| 1.0 - (-total * x).exp());
    // 1% critical value of the one-sample KS test.
    assert!(d < 1.63 / 5000f64.sqrt(), "KS statistic {d}");
}

#[test]
fn bonds_are_chosen_in_proportion_to_their_rates() {
    let (lambda, mu, n) = (1.0, 2.0, 16usize);
    let rates = build_rate_table(&ScalingSpec::Asep { lambda, mu }, n).unwrap();
    let kmc = Kmc::new(alternating(n), &rates).unwrap();
    let nn = n as f64;
    let (ab, ba) = (lambda * nn * nn + mu * nn / 2.0, lambda * nn * nn - mu * nn / 2.0);
    let p = ab / (ab + ba);
    let mut rng = rng_from_seed(3);
    let draws = 20_000;
    let mut from_ab = 0usize;
    let mut per_bond = vec![0usize; n];
    for _ in 0..draws {
        let o = kmc.propose(&mut rng).unwrap();
        per_bond[o.bond] += 1;
        if o.bond.is_multiple_of(2) {
            from_ab += 1;
        }
    }
    let freq = from_ab as f64 / draws as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * se, "AB fraction {freq}, expected {p}");
    // Chi-square over the 16 bonds, 15 degrees of freedom, 0.1% critical value 37.7.
    let chi2: f64 = per_bond
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let expected = draws as f64 * if b % 2 == 0 { ab } else { ba } / (8.0 * (ab + ba));
            (c as f64 - expected).powi(2) / expected
        })
        .sum();
    assert!(chi2 < 37.7, "chi-square {chi2}");
}

#[test]
fn lone_particle_moves_as_a_biased_random_walk() {
    let (lambda, mu, n) = (1.0, 2.0, 64usize);
    let rates = build_rate_table(&ScalingSpec::Asep { lambda, mu }, n).unwrap();
    let mut assignment = vec![1usize; n];
    assignment[0] = 0;
    let start = RingConfiguration::new(n, binary(), &assignment).unwrap();
    let horizon = 0.005;
    let runs = 4000;
    let mut displacements = Vec::with_capacity(runs);
    for seed in 0..runs as u64 {
        let mut kmc = Kmc::new(start.clone(), &rates).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut position = 0usize;
        let mut steps = 0i64;
        run_until(
            &mut kmc,
            horizon,
            &[],
            &mut rng,
            |_, _| {},
            |_, o| {
                if o.bond == position {
                    position = (position + 1) % n;
                    steps += 1;
                } else {
                    assert_eq!((o.bond + 1) % n, position);
                    position = (position + n - 1) % n;
                    steps -= 1;
                }
            },
        )
        .unwrap();
        displacements.push(steps as f64 / n as f64);
    }
    let r = runs as f64;
    let mean = displacements.iter().sum::<f64>() / r;
    let var = displacements.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (r - 1.0);
    let expected_var = 2.0 * lambda * horizon;
    let expected_mean = mu * horizon;
    assert!(
        (mean - expected_mean).abs() < 4.0 * (expected_var / r).sqrt(),
        "mean {mean}"
    );
    assert!(
        (var / expected_var - 1.0).abs() < 4.0 * (2.0 / r).sqrt(),
        "variance {var}"
    );
}

#[test]
fn exchanges_conserve_species_counts() {
    let alphabet = Arc::new(SpeciesAlphabet::letters(3).unwrap());
    let spec = ScalingSpec::NSpecies {
        lambda: 1.0,
        alpha: vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]],
        fold: None,
    };
    let n = 96;
    let rates = build_rate_table(&spec, n).unwrap();
    let start = sample_from_profile(
        &[|_: f64| 0.2, |_: f64| 0.3, |_: f64| 0.5],
        alphabet,
        n,
        5,
        SamplingMode::Random,
    )
    .unwrap();
    let counts = start.species_counts();
    let checkpoints: Vec<f64> = (0..=20).map(|i| i as f64 * 0.01).collect();
    let traj = simulate(&start, &rates, 0.2, &checkpoints, 9).unwrap();
    assert!(traj.event_count > 100_000);
    for (_, c) in &traj.snapshots {
        assert_eq!(c.species_counts(), counts);
    }
}

#[test]
fn abc_ring_has_one_enabled_exchange_per_bond() {
    let alphabet = Arc::new(SpeciesAlphabet::letters(3).unwrap());
    let spec = ScalingSpec::NSpecies {
        lambda: 1.0,
        alpha: vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]],
        fold: None,
    };
    let rates = build_rate_table(&spec, 3).unwrap();
    let abc = RingConfiguration::from_labels(alphabet, &["A", "B", "C"]).unwrap();
    let events = active_events(&abc, &rates).unwrap();
    assert_eq!(events.len(), 3);
    let expected = 3.0 * 9.0 * (1.0f64 / 6.0).exp();
    assert!((events.total_rate - expected).abs() < 1e-9);
}

#[test]
fn recorded_events_replay_to_the_final_state() {
    let n = 32;
    let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 1.5 }, n).unwrap();
    let start = alternating(n);
    let traj = simulate_recorded(&start, &rates, 0.05, &[0.05], 21, true).unwrap();
    let log = traj.events.as_ref().unwrap();
    assert_eq!(log.len() as u64, traj.event_count);
    let mut species: Vec<usize> = (0..n).map(|i| start.get(i)).collect();
    let mut last = 0.0;
    for e in log {
        assert!(e.time >= last && e.time <= 0.05);
        last = e.time;
        let right = (e.bond + 1) % n;
        species.swap(e.bond, right);
    }
    let final_config = &traj.snapshots.last().unwrap().1;
    assert_eq!(species, (0..n).map(|i| final_config.get(i)).collect::<Vec<_>>());
}

#[test]
fn same_seed_same_trajectory() {
    let n = 64;
    let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 2.0 }, n).unwrap();
    let start = alternating(n);
    let cps = [0.0, 0.01, 0.02];
    let a = simulate(&start, &rates, 0.02, &cps, 4).unwrap();
    let b = simulate(&start, &rates, 0.02, &cps, 4).unwrap();
    let c = simulate(&start, &rates, 0.02, &cps, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.snapshots.last(), c.snapshots.last());
}

#[test]
fn random_sampling_matches_the_profile_on_average() {
    let n = 1000;
    let seeds = 100;
    let mut particles = 0usize;
    for seed in 0..seeds {
        let c = sample_from_profile(&[|_: f64| 0.5, |_: f64| 0.5], binary(), n, seed, SamplingMode::Random).unwrap();
        particles += c.species_counts()[0];
    }
    let total = (n as u64 * seeds) as f64;
    let fraction = particles as f64 / total;
    assert!(
        (fraction - 0.5).abs() < 4.0 * (0.25 / total).sqrt(),
        "fraction {fraction}"
    );
    let c = sample_from_profile(
        &[|_: f64| 0.5, |_: f64| 0.5],
        binary(),
        n,
        0,
        SamplingMode::Deterministic,
    )
    .unwrap();
    assert_eq!(c.species_counts(), [500, 500]);
}
