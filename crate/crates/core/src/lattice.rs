//! Microscopic configurations on the discrete torus Z/NZ.
//!
//! Every site carries exactly one species, stored as a compact index into a
//! [`SpeciesAlphabet`]. Site `i` sits at the macroscopic point `i/N` of the
//! unit torus.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Largest alphabet a configuration can hold (species are stored as `u8`).
pub const MAX_SPECIES: usize = 255;

/// Tolerance on `sum_k rho_k(x) = 1` when sampling from macroscopic profiles.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpeciesAlphabet {
    labels: Vec<String>,
}

impl SpeciesAlphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(Error::BadAlphabet(format!(
                "need at least 2 species, got {}",
                labels.len()
            )));
        }
        if labels.len() > MAX_SPECIES {
            return Err(Error::BadAlphabet(format!(
                "at most {MAX_SPECIES} species are supported"
            )));
        }
        for (i, a) in labels.iter().enumerate() {
            if a.is_empty() {
                return Err(Error::BadAlphabet("empty species label".into()));
            }
            if labels[..i].contains(a) {
                return Err(Error::BadAlphabet(format!("duplicate label {a:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Alphabet `A, B, C, ...` of the given size.
    pub fn letters(n: usize) -> Result<Self> {
        if n > 26 {
            return Self::new((0..n).map(|k| format!("S{k}")));
        }
        Self::new((0..n).map(|k| ((b'A' + k as u8) as char).to_string()))
    }

    /// Particle/hole alphabet `A, B` used for the simple exclusion process.
    pub fn binary() -> Self {
        Self::letters(2).expect("two letters")
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label(&self, k: usize) -> &str {
        &self.labels[k]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A ring of `N` sites, each holding one species.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingConfiguration {
    species: Vec<u8>,
    alphabet: Arc<SpeciesAlphabet>,
}

impl RingConfiguration {
    pub fn new(n_sites: usize, alphabet: Arc<SpeciesAlphabet>, assignment: &[usize]) -> Result<Self> {
        if assignment.len() != n_sites {
            return Err(Error::LengthMismatch {
                expected: n_sites,
                got: assignment.len(),
            });
        }
        if n_sites == 0 {
            return Err(Error::BadN(0));
        }
        let n = alphabet.len();
        let species = assignment
            .iter()
            .map(|&k| {
                if k < n {
                    Ok(k as u8)
                } else {
                    Err(Error::UnknownSpecies { index: k, n })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { species, alphabet })
    }

    /// Builds a configuration from labels, e.g. `["A", "B", "A"]`.
    pub fn from_labels(alphabet: Arc<SpeciesAlphabet>, labels: &[&str]) -> Result<Self> {
        let assignment = labels
            .iter()
            .map(|l| {
                alphabet
                    .index_of(l)
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown species label {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels.len(), alphabet, &assignment)
    }

    pub fn uniform(n_sites: usize, alphabet: Arc<SpeciesAlphabet>, k: usize) -> Result<Self> {
        Self::new(n_sites, alphabet, &vec![k; n_sites])
    }

    pub fn len(&self) -> usize {
        self.species.len()
    }

    pub fn is_empty(&self) -> bool {
        self.species.is_empty()
    }

    pub fn n_species(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &Arc<SpeciesAlphabet> {
        &self.alphabet
    }

    /// Species at site `i`, with `i` taken modulo `N`.
    #[inline]
    pub fn get(&self, i: usize) -> usize {
        self.species[i % self.species.len()] as usize
    }

    #[inline]
    pub fn species(&self) -> &[u8] {
        &self.species
    }

    /// Occupation variable `X_i^k`.
    #[inline]
    pub fn occupation(&self, i: usize, k: usize) -> f64 {
        if self.get(i) == k {
            1.0
        } else {
            0.0
        }
    }

    pub(crate) fn set(&mut self, i: usize, k: usize) {
        debug_assert!(k < self.alphabet.len());
        self.species[i] = k as u8;
    }

    pub fn species_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.alphabet.len()];
        for &s in &self.species {
            counts[s as usize] += 1;
        }
        counts
    }

    pub fn labels(&self) -> Vec<&str> {
        self.species.iter().map(|&s| self.alphabet.label(s as usize)).collect()
    }
}

/// How [`sample_from_profile`] turns densities into a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    /// Independent draw at each site with probabilities `rho_k(i/N)`.
    #[default]
    Random,
    /// Low-discrepancy assignment tracking cumulative densities along the ring.
    Deterministic,
}

/// Realizes macroscopic densities `rho_k` on a ring of `n_sites` sites.
///
/// In deterministic mode each site goes to the species with the largest
/// deficit `sum_{j<=i} rho_k(j/N) - count_k`, which for two species is
/// exactly cumulative-remainder rounding.
pub fn sample_from_profile<F>(
    profiles: &[F],
    alphabet: Arc<SpeciesAlphabet>,
    n_sites: usize,
    seed: u64,
    mode: SamplingMode,
) -> Result<RingConfiguration>
where
    F: Fn(f64) -> f64,
{
    let n = alphabet.len();
    if profiles.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} profiles for {} species",
            profiles.len(),
            n
        )));
    }
    if n_sites == 0 {
        return Err(Error::BadN(0));
    }

    let mut densities = vec![0.0; n];
    let mut assignment = Vec::with_capacity(n_sites);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deficit = vec![0.0; n];

    for i in 0..n_sites {
        let x = i as f64 / n_sites as f64;
        let mut sum = 0.0;
        for (d, rho) in densities.iter_mut().zip(profiles) {
            *d = rho(x);
            sum += *d;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE
            || densities
                .iter()
                .any(|&d| !(-SIMPLEX_TOLERANCE..=1.0 + SIMPLEX_TOLERANCE).contains(&d))
        {
            return Err(Error::ProfileNotStochastic { x, sum });
        }

        let k = match mode {
            SamplingMode::Random => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut chosen = n - 1;
                for (k, &d) in densities.iter().enumerate() {
                    acc += d;
                    if u < acc {
                        chosen = k;
                        break;
                    }
                }
                chosen
            }
            SamplingMode::Deterministic => {
                for (def, &d) in deficit.iter_mut().zip(&densities) {
                    *def += d;
                }
                let mut best = 0;
                for k in 1..n {
                    if deficit[k] > deficit[best] {
                        best = k;
                    }
                }
                deficit[best] -= 1.0;
                best
            }
        };
        assignment.push(k);
    }

    RingConfiguration::new(n_sites, alphabet, &assignment)
}
