//! Rate tables under diffusive scaling.
//!
//! Rates are expressed per unit of macroscopic time: the diffusive `N^2`
//! speed-up is already folded in, so simulated time is directly comparable
//! with PDE time.

use crate::error::{Error, Result};

/// Macroscopic rate coefficients, from which finite-N tables are built.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalingSpec {
    /// Two-species exclusion with `(l_ab + l_ba)/2 = lambda N^2` and
    /// `l_ab - l_ba = mu N`.
    Asep { lambda: f64, mu: f64 },
    /// Equidiffusive n-species exchange with asymmetries `alpha[k][l]`
    /// (antisymmetric, diagonal ignored).
    NSpecies {
        lambda: f64,
        alpha: Vec<Vec<f64>>,
        fold: Option<FoldRates>,
    },
}

/// Raw fold rates for even alphabets: `gamma[k]` drives
/// `X^k X^{k+n/2} -> X^{k+1} X^{k+n/2+1}` and `delta[k]` drives the reverse
/// move out of the pair `X^k X^{k+n/2}`. They are used as given, without
/// any N scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRates {
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

impl ScalingSpec {
    pub fn n_species(&self) -> usize {
        match self {
            ScalingSpec::Asep { .. } => 2,
            ScalingSpec::NSpecies { alpha, .. } => alpha.len(),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            ScalingSpec::Asep { lambda, .. } | ScalingSpec::NSpecies { lambda, .. } => *lambda,
        }
    }

    /// Asymmetry matrix `alpha[k][l] = lim N log(l_kl / l_lk)` implied by the
    /// coefficients. For the exclusion process this is `alpha_ab = mu / lambda`.
    pub fn alpha(&self) -> Vec<Vec<f64>> {
        match self {
            ScalingSpec::Asep { lambda, mu } => {
                vec![vec![0.0, mu / lambda], vec![-mu / lambda, 0.0]]
            }
            ScalingSpec::NSpecies { alpha, .. } => alpha.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = self.lambda();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        match self {
            ScalingSpec::Asep { mu, .. } => {
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
                }
            }
            ScalingSpec::NSpecies { alpha, fold, .. } => {
                let n = alpha.len();
                if n < 2 {
                    return Err(Error::InvalidParameter("alpha must be at least 2x2".into()));
                }
                for (k, row) in alpha.iter().enumerate() {
                    if row.len() != n {
                        return Err(Error::ShapeMismatch(format!(
                            "alpha row {k} has {} entries, expected {n}",
                            row.len()
                        )));
                    }
                    for l in 0..n {
                        if l == k {
                            continue;
                        }
                        let (a, b) = (row[l], alpha[l][k]);
                        if !a.is_finite() || (a + b).abs() > 1e-12 * (1.0 + a.abs()) {
                            return Err(Error::InvalidParameter(format!(
                                "alpha must be antisymmetric: alpha[{k}][{l}] = {a}, alpha[{l}][{k}] = {b}"
                            )));
                        }
                    }
                }
                if let Some(fold) = fold {
                    if n % 2 == 1 || n < 4 {
                        return Err(Error::FoldOnOddAlphabet(n));
                    }
                    if fold.gamma.len() != n || fold.delta.len() != n {
                        return Err(Error::ShapeMismatch(format!("fold rates need {n} entries each")));
                    }
                    for (name, v) in [("gamma", &fold.gamma), ("delta", &fold.delta)] {
                        if let Some(r) = v.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
                            return Err(Error::InvalidParameter(format!(
                                "fold {name} rates must be finite and >= 0, got {r}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Finite-N rates, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    n_sites: usize,
    n_species: usize,
    /// Row-major `exchange[k * n + l]`: rate of `X^k X^l -> X^l X^k` on a bond.
    exchange: Vec<f64>,
    fold: Option<FoldRates>,
}

impl RateTable {
    /// Direct construction from explicit rates.
    pub fn from_rates(n_sites: usize, exchange: Vec<Vec<f64>>, fold: Option<FoldRates>) -> Result<Self> {
        if n_sites < 3 {
            return Err(Error::BadN(n_sites));
        }
        let n = exchange.len();
        if n < 2 || exchange.iter().any(|r| r.len() != n) {
            return Err(Error::ShapeMismatch("exchange rates must be square, n >= 2".into()));
        }
        let mut flat = vec![0.0; n * n];
        for k in 0..n {
            for l in 0..n {
                if k == l {
                    continue;
                }
                let r = exchange[k][l];
                if !r.is_finite() || r < 0.0 {
                    return Err(Error::RatePositivity {
                        what: format!("exchange {k}{l}"),
                        rate: r,
                        n_sites,
                    });
                }
                flat[k * n + l] = r;
            }
        }
        if let Some(f) = &fold {
            if n % 2 == 1 || n < 4 {
                return Err(Error::FoldOnOddAlphabet(n));
            }
            if f.gamma.len() != n || f.delta.len() != n {
                return Err(Error::ShapeMismatch(format!("fold rates need {n} entries each")));
            }
            if let Some(r) = f.gamma.iter().chain(&f.delta).find(|r| r.is_nan() || **r < 0.0) {
                return Err(Error::RatePositivity {
                    what: "fold".into(),
                    rate: *r,
                    n_sites,
                });
            }
        }
        Ok(Self {
            n_sites,
            n_species: n,
            exchange: flat,
            fold,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    #[inline]
    pub fn exchange(&self, k: usize, l: usize) -> f64 {
        self.exchange[k * self.n_species + l]
    }

    pub fn fold(&self) -> Option<&FoldRates> {
        self.fold.as_ref()
    }

    /// Partner of `k` in a fold pair, `k + n/2 mod n`, when folds are on.
    #[inline]
    pub fn fold_partner(&self, k: usize) -> Option<usize> {
        self.fold.as_ref().map(|_| (k + self.n_species / 2) % self.n_species)
    }

    /// `(l_ab + l_ba)/2` for the exclusion process (species 0 and 1).
    pub fn mean_rate(&self) -> f64 {
        0.5 * (self.exchange(0, 1) + self.exchange(1, 0))
    }

    /// `l_ab - l_ba` for the exclusion process.
    pub fn rate_difference(&self) -> f64 {
        self.exchange(0, 1) - self.exchange(1, 0)
    }
}

/// Builds the rate table at ring size `n_sites`.
///
/// Exclusion process: `l_ab = lambda N^2 + mu N / 2`, `l_ba = lambda N^2 - mu N / 2`.
/// n species: `l_kl = lambda N^2 exp(alpha_kl / 2N)`, so that
/// `N log(l_kl / l_lk) = alpha_kl` and `l_kl / N^2 -> lambda` hold exactly.
pub fn build_rate_table(spec: &ScalingSpec, n_sites: usize) -> Result<RateTable> {
    if n_sites < 3 {
        return Err(Error::BadN(n_sites));
    }
    spec.validate()?;
    let nn = n_sites as f64;
    match spec {
        ScalingSpec::Asep { lambda, mu } => {
            let base = lambda * nn * nn;
            let half_drift = 0.5 * mu * nn;
            let (ab, ba) = (base + half_drift, base - half_drift);
            for (what, rate) in [("l_ab", ab), ("l_ba", ba)] {
                if rate < 0.0 {
                    return Err(Error::RatePositivity {
                        what: what.into(),
                        rate,
                        n_sites,
                    });
                }
            }
            RateTable::from_rates(n_sites, vec![vec![0.0, ab], vec![ba, 0.0]], None)
        }
        ScalingSpec::NSpecies { lambda, alpha, fold } => {
            let n = alpha.len();
            let base = lambda * nn * nn;
            let exchange = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|l| {
                            if k == l {
                                0.0
                            } else {
                                base * (alpha[k][l] / (2.0 * nn)).exp()
                            }
                        })
                        .collect()
                })
                .collect();
            RateTable::from_rates(n_sites, exchange, fold.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_asep_rates() {
        let t = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 0.0 }, 10).unwrap();
        assert_eq!(t.exchange(0, 1), 100.0);
        assert_eq!(t.exchange(1, 0), 100.0);
    }

    #[test]
    fn weakly_asymmetric_rates() {
        let t = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 2.0 }, 100).unwrap();
        assert_eq!(t.exchange(0, 1), 10100.0);
        assert_eq!(t.exchange(1, 0), 9900.0);
        assert_eq!(t.mean_rate(), 10000.0);
        assert_eq!(t.rate_difference(), 200.0);
    }

    #[test]
    fn negative_rate_rejected() {
        let err = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 21.0 }, 10).unwrap_err();
        assert!(matches!(err, Error::RatePositivity { .. }), "{err:?}");
        // |mu| = 2 lambda N is the boundary and still valid.
        let t = build_rate_table(&ScalingSpec::Asep { lambda: 1.0, mu: 20.0 }, 10).unwrap();
        assert_eq!(t.exchange(1, 0), 0.0);
    }

    #[test]
    fn small_ring_rejected() {
        let spec = ScalingSpec::Asep { lambda: 1.0, mu: 0.0 };
        assert_eq!(build_rate_table(&spec, 2), Err(Error::BadN(2)));
    }

    #[test]
    fn folds_need_even_alphabet() {
        let alpha = vec![vec![0.0; 3]; 3];
        let spec = ScalingSpec::NSpecies {
            lambda: 1.0,
            alpha,
            fold: Some(FoldRates {
                gamma: vec![1.0; 3],
                delta: vec![1.0; 3],
            }),
        };
        assert_eq!(build_rate_table(&spec, 10), Err(Error::FoldOnOddAlphabet(3)));
    }

    #[test]
    fn alpha_must_be_antisymmetric() {
        let spec = ScalingSpec::NSpecies {
            lambda: 1.0,
            alpha: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            fold: None,
        };
        assert!(matches!(build_rate_table(&spec, 10), Err(Error::InvalidParameter(_))));
    }

    proptest! {
        #[test]
        fn asep_identities_hold_exactly(
            lambda in 0.1f64..5.0,
            frac in -1.0f64..1.0,
            n in 3usize..5000,
        ) {
            let nn = n as f64;
            let mu = frac * 2.0 * lambda * nn;
            let t = build_rate_table(&ScalingSpec::Asep { lambda, mu }, n).unwrap();
            let scale = lambda * nn * nn;
            prop_assert!((t.mean_rate() - scale).abs() <= 4.0 * f64::EPSILON * scale);
            prop_assert!((t.rate_difference() - mu * nn).abs() <= 8.0 * f64::EPSILON * scale);
        }

        #[test]
        fn nspecies_log_ratio_recovers_alpha(
            a01 in -5.0f64..5.0,
            a02 in -5.0f64..5.0,
            a12 in -5.0f64..5.0,
            n in 3usize..4096,
        ) {
            let alpha = vec![
                vec![0.0, a01, a02],
                vec![-a01, 0.0, a12],
                vec![-a02, -a12, 0.0],
            ];
            let spec = ScalingSpec::NSpecies { lambda: 1.5, alpha: alpha.clone(), fold: None };
            let t = build_rate_table(&spec, n).unwrap();
            let nn = n as f64;
            for (k, row) in alpha.iter().enumerate() {
                for (l, &a) in row.iter().enumerate() {
                    if k == l { continue; }
                    let recovered = nn * (t.exchange(k, l) / t.exchange(l, k)).ln();
                    prop_assert!((recovered - a).abs() < 1e-9);
                    let equi = t.exchange(k, l) / (nn * nn);
                    prop_assert!((equi - 1.5).abs() <= 1.5 * ((5.0 / (2.0 * nn)).exp() - 1.0) + 1e-12);
                }
            }
        }
    }
}
