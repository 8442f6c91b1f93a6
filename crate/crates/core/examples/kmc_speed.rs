use std::sync::Arc;
use std::time::Instant;

use clocklab::dynamics::{build_rate_table, rng_from_seed, run_until, Kmc, ScalingSpec};
use clocklab::lattice::{sample_from_profile, SamplingMode, SpeciesAlphabet};

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1024);
    let rates = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 2.0 }, n).unwrap();
    let half = |_: f64| 0.5;
    let cfg = sample_from_profile(
        &[half, half],
        Arc::new(SpeciesAlphabet::binary()),
        n,
        1,
        SamplingMode::Random,
    )
    .unwrap();
    let mut kmc = Kmc::new(cfg, &rates).unwrap();
    let mut rng = rng_from_seed(2);
    let start = Instant::now();
    run_until(&mut kmc, 0.05, &[], &mut rng, |_, _| {}, |_, _| {}).unwrap();
    let secs = start.elapsed().as_secs_f64();
    println!(
        "N={n} events={} time={secs:.3}s ns/event={:.1}",
        kmc.event_count(),
        secs * 1e9 / kmc.event_count() as f64
    );
}
