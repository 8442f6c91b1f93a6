//! Rate construction and stochastic time evolution of the ring.

pub mod events;
pub mod kmc;
pub mod rates;

pub use events::{active_events, Channel, ChannelTable, Event, EventSet, Reaction};
pub use kmc::{
    kmc_step, rng_from_seed, run_until, simulate, simulate_recorded, EventRecord, Kmc, SimRng, StepOutcome, Trajectory,
};
pub use rates::{build_rate_table, FoldRates, RateTable, ScalingSpec};
