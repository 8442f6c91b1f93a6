//! Reactions between consecutive sites and the enabled-event set.

use crate::dynamics::rates::RateTable;
use crate::error::{Error, Result};
use crate::lattice::RingConfiguration;

/// A reaction on bond `(i, i+1)`, described by the species it reads on the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reaction {
    /// `X^left X^right -> X^right X^left` at rate `l_{left,right}`.
    Exchange { left: usize, right: usize },
    /// `X^k X^{k+n/2} -> X^{k+1} X^{k+n/2+1}` at rate `gamma_k`.
    Fold { k: usize },
    /// `X^k X^{k+n/2} -> X^{k-1} X^{k+n/2-1}` at rate `delta_k`.
    Unfold { k: usize },
}

impl Reaction {
    /// Species pair on the bond after the reaction fires.
    pub fn products(&self, n_species: usize) -> (usize, usize) {
        let half = n_species / 2;
        match *self {
            Reaction::Exchange { left, right } => (right, left),
            Reaction::Fold { k } => ((k + 1) % n_species, (k + half + 1) % n_species),
            Reaction::Unfold { k } => ((k + n_species - 1) % n_species, (k + half + n_species - 1) % n_species),
        }
    }

    pub fn is_exchange(&self) -> bool {
        matches!(self, Reaction::Exchange { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub reaction: Reaction,
    pub rate: f64,
    pub products: (usize, usize),
}

/// Reactions available to each ordered species pair on a bond.
///
/// Everything the dynamics needs is a function of the pair `(k, l)` only, so
/// the table is built once per rate table.
#[derive(Debug, Clone)]
pub struct ChannelTable {
    n_species: usize,
    channels: Vec<Vec<Channel>>,
    pair_rate: Vec<f64>,
}

impl ChannelTable {
    pub fn new(rates: &RateTable) -> Self {
        let n = rates.n_species();
        let mut channels = Vec::with_capacity(n * n);
        let mut pair_rate = Vec::with_capacity(n * n);
        for k in 0..n {
            for l in 0..n {
                let mut list = Vec::new();
                let fold_pair = rates.fold_partner(k) == Some(l);
                if fold_pair {
                    let fold = rates.fold().expect("partner implies folds");
                    for (reaction, rate) in [
                        (Reaction::Fold { k }, fold.gamma[k]),
                        (Reaction::Unfold { k }, fold.delta[k]),
                    ] {
                        if rate > 0.0 {
                            list.push(Channel {
                                reaction,
                                rate,
                                products: reaction.products(n),
                            });
                        }
                    }
                } else if k != l {
                    let reaction = Reaction::Exchange { left: k, right: l };
                    let rate = rates.exchange(k, l);
                    if rate > 0.0 {
                        list.push(Channel {
                            reaction,
                            rate,
                            products: (l, k),
                        });
                    }
                }
                pair_rate.push(list.iter().map(|c| c.rate).sum());
                channels.push(list);
            }
        }
        Self {
            n_species: n,
            channels,
            pair_rate,
        }
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    #[inline]
    pub fn pair_index(&self, left: usize, right: usize) -> usize {
        left * self.n_species + right
    }

    #[inline]
    pub fn channels(&self, pair: usize) -> &[Channel] {
        &self.channels[pair]
    }

    /// Total rate of a bond whose species pair has index `pair`.
    #[inline]
    pub fn pair_rate(&self, pair: usize) -> f64 {
        self.pair_rate[pair]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Bond `i` joins sites `i` and `i+1 mod N`.
    pub bond: usize,
    pub reaction: Reaction,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EventSet {
    pub events: Vec<Event>,
    pub total_rate: f64,
}

impl EventSet {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

pub(crate) fn check_compatible(config: &RingConfiguration, rates: &RateTable) -> Result<()> {
    let n = config.n_species();
    if rates.n_species() != n {
        return Err(Error::ShapeMismatch(format!(
            "rate table has {} species, configuration has {n}",
            rates.n_species()
        )));
    }
    if rates.fold().is_some() && (n % 2 == 1 || n < 4) {
        return Err(Error::FoldOnOddAlphabet(n));
    }
    if rates.n_sites() != config.len() {
        return Err(Error::ShapeMismatch(format!(
            "rate table built for N = {}, configuration has N = {}",
            rates.n_sites(),
            config.len()
        )));
    }
    Ok(())
}

/// Lists every reaction enabled by `config`, bond by bond.
pub fn active_events(config: &RingConfiguration, rates: &RateTable) -> Result<EventSet> {
    check_compatible(config, rates)?;
    let table = ChannelTable::new(rates);
    let n_sites = config.len();
    let mut set = EventSet::default();
    for bond in 0..n_sites {
        let pair = table.pair_index(config.get(bond), config.get(bond + 1));
        for ch in table.channels(pair) {
            set.events.push(Event {
                bond,
                reaction: ch.reaction,
                rate: ch.rate,
            });
            set.total_rate += ch.rate;
        }
    }
    Ok(set)
}
