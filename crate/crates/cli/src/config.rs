//! Strict TOML experiment configuration.
//!
//! ```toml
//! [model]
//! kind = "asep"            # or "nspecies"
//!
//! [scaling]
//! lambda = 1.0
//! mu = 1.0
//!
//! [study]
//! n = [128]
//! horizon = 0.05
//! ```
//!
//! Every omitted key takes a documented default, and [`canonical_toml`]
//! writes the fully resolved document. Unknown keys are errors.

use std::sync::Arc;

use clocklab::dynamics::{FoldRates, ScalingSpec};
use clocklab::harness::{uniform_checkpoints, DriftPolicy, ExperimentConfig, ReferenceKind};
use clocklab::lattice::{SamplingMode, SpeciesAlphabet};
use clocklab::pde::DriftSign;
use clocklab::trig::TrigPoly;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_REPLICAS: usize = 16;
pub const DEFAULT_BINS: usize = 32;
pub const DEFAULT_CELLS: usize = 256;
pub const DEFAULT_CHECKPOINT_INTERVALS: usize = 10;
pub const DEFAULT_FAMILY_SIZE: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("constraint violated: {0}")]
    ConstraintViolation(String),
}

/// Seeds are integers; values beyond the signed 64-bit range are written as
/// decimal strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedValue {
    Int(i64),
    Text(String),
}

impl SeedValue {
    pub fn from_u64(seed: u64) -> Self {
        i64::try_from(seed).map_or_else(|_| SeedValue::Text(seed.to_string()), SeedValue::Int)
    }

    fn to_u64(&self) -> Result<u64, ConfigError> {
        match self {
            SeedValue::Int(v) => u64::try_from(*v).map_err(|_| violation(format!("seed {v} is negative"))),
            SeedValue::Text(s) => s
                .parse()
                .map_err(|_| violation(format!("seed `{s}` is not an unsigned integer"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: String,
    pub species: Option<Vec<String>>,
    /// Per-species profile `mean + cos * cos(2 pi x) + sin * sin(2 pi x)`.
    pub initial_mean: Option<Vec<f64>>,
    pub initial_cos: Option<Vec<f64>>,
    pub initial_sin: Option<Vec<f64>>,
    pub sampling: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSection {
    pub lambda: f64,
    pub mu: Option<f64>,
    pub alpha: Option<Vec<Vec<f64>>>,
    pub fold_gamma: Option<Vec<f64>>,
    pub fold_delta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub n: Vec<usize>,
    pub horizon: f64,
    pub replicas: Option<usize>,
    pub bins: Option<usize>,
    pub checkpoints: Option<Vec<f64>>,
    pub seed: Option<SeedValue>,
    pub family_size: Option<usize>,
    pub martingale_function: Option<usize>,
    pub quadrature_step: Option<f64>,
    pub drift_sign: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSection {
    pub cells: Option<usize>,
    pub refinements: Option<Vec<usize>>,
    pub reference: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Write per-size profile tables.
    pub profiles: Option<bool>,
    /// Write per-replica distances.
    pub replica_distances: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub model: ModelSection,
    pub scaling: ScalingSection,
    pub study: StudySection,
    #[serde(default)]
    pub pde: PdeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    pub profiles: bool,
    pub replica_distances: bool,
}

/// A validated configuration together with its canonical document.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub document: Document,
    pub experiment: ExperimentConfig,
    pub output: OutputOptions,
}

impl ResolvedConfig {
    pub fn seed(&self) -> u64 {
        self.experiment.seed_base
    }

    /// Replaces the seed base, keeping the document in step.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.experiment.seed_base = seed;
        self.document.study.seed = Some(SeedValue::from_u64(seed));
        self
    }
}

fn violation(msg: String) -> ConfigError {
    ConfigError::ConstraintViolation(msg)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(text: &str, err: toml::de::Error) -> ConfigError {
    let line = err.span().map_or(1, |s| line_of(text, s.start));
    let message = err.message().trim().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return ConfigError::UnknownKey {
                key: rest[..end].to_string(),
                line,
            };
        }
    }
    ConfigError::Parse { line, message }
}

fn per_species(name: &str, given: &Option<Vec<f64>>, default: Vec<f64>, n: usize) -> Result<Vec<f64>, ConfigError> {
    let v = given.clone().unwrap_or(default);
    if v.len() != n {
        return Err(violation(format!("{name} has {} entries for {n} species", v.len())));
    }
    Ok(v)
}

/// Fills every default and checks the document against the model.
fn resolve(mut doc: Document) -> Result<ResolvedConfig, ConfigError> {
    let lambda = doc.scaling.lambda;
    let scaling = match doc.model.kind.as_str() {
        "asep" => {
            if doc.scaling.alpha.is_some() || doc.scaling.fold_gamma.is_some() || doc.scaling.fold_delta.is_some() {
                return Err(violation("asep takes `mu`, not `alpha` or fold rates".into()));
            }
            let mu = doc
                .scaling
                .mu
                .ok_or_else(|| violation("asep requires `scaling.mu`".into()))?;
            ScalingSpec::Asep { lambda, mu }
        }
        "nspecies" => {
            if doc.scaling.mu.is_some() {
                return Err(violation("nspecies takes `alpha`, not `mu`".into()));
            }
            let alpha = doc
                .scaling
                .alpha
                .clone()
                .ok_or_else(|| violation("nspecies requires `scaling.alpha`".into()))?;
            let fold = match (&doc.scaling.fold_gamma, &doc.scaling.fold_delta) {
                (None, None) => None,
                (Some(g), Some(d)) => Some(FoldRates {
                    gamma: g.clone(),
                    delta: d.clone(),
                }),
                _ => return Err(violation("fold rates need both `fold_gamma` and `fold_delta`".into())),
            };
            ScalingSpec::NSpecies { lambda, alpha, fold }
        }
        other => {
            return Err(violation(format!(
                "unknown model kind `{other}` (expected asep or nspecies)"
            )))
        }
    };
    let n = scaling.n_species();

    let alphabet = match &doc.model.species {
        Some(labels) => SpeciesAlphabet::new(labels.iter().cloned()),
        None => SpeciesAlphabet::letters(n),
    }
    .map_err(|e| violation(e.to_string()))?;
    doc.model.species = Some(alphabet.labels().to_vec());

    let (mean, cos) = if n == 2 {
        (vec![0.5, 0.5], vec![0.3, -0.3])
    } else {
        let rot = clocklab::harness::rotating_profiles(n, 0.2);
        (
            rot.iter().map(|p| p.constant).collect(),
            rot.iter().map(|p| p.cos[0]).collect(),
        )
    };
    let sin_default = if n == 2 {
        vec![0.0; 2]
    } else {
        clocklab::harness::rotating_profiles(n, 0.2)
            .iter()
            .map(|p| p.sin[0])
            .collect()
    };
    let mean = per_species("initial_mean", &doc.model.initial_mean, mean, n)?;
    let cos = per_species("initial_cos", &doc.model.initial_cos, cos, n)?;
    let sin = per_species("initial_sin", &doc.model.initial_sin, sin_default, n)?;
    for (name, v, target) in [
        ("initial_mean", &mean, 1.0),
        ("initial_cos", &cos, 0.0),
        ("initial_sin", &sin, 0.0),
    ] {
        let total: f64 = v.iter().sum();
        if (total - target).abs() > 1e-9 {
            return Err(violation(format!("{name} sums to {total}, expected {target}")));
        }
    }
    let initial = (0..n)
        .map(|k| TrigPoly::new(mean[k], vec![cos[k]], vec![sin[k]]))
        .collect();
    doc.model.initial_mean = Some(mean);
    doc.model.initial_cos = Some(cos);
    doc.model.initial_sin = Some(sin);

    let sampling = match doc.model.sampling.as_deref().unwrap_or("random") {
        "random" => SamplingMode::Random,
        "deterministic" => SamplingMode::Deterministic,
        other => return Err(violation(format!("unknown sampling `{other}`"))),
    };
    doc.model.sampling = Some(match sampling {
        SamplingMode::Random => "random".into(),
        SamplingMode::Deterministic => "deterministic".into(),
    });

    let s = &mut doc.study;
    let horizon = s.horizon;
    let checkpoints = s
        .checkpoints
        .get_or_insert_with(|| uniform_checkpoints(horizon, DEFAULT_CHECKPOINT_INTERVALS))
        .clone();
    let replicas = *s.replicas.get_or_insert(DEFAULT_REPLICAS);
    let bins = *s.bins.get_or_insert(DEFAULT_BINS);
    let seed = s.seed.get_or_insert(SeedValue::Int(0)).to_u64()?;
    let family_size = *s.family_size.get_or_insert(DEFAULT_FAMILY_SIZE);
    let martingale_function = *s.martingale_function.get_or_insert(0);
    let quadrature_step = *s.quadrature_step.get_or_insert(horizon / 1000.0);
    let drift = match s.drift_sign.get_or_insert_with(|| "auto".into()).as_str() {
        "auto" => DriftPolicy::Auto,
        "plus" => DriftPolicy::Fixed(DriftSign::Plus),
        "minus" => DriftPolicy::Fixed(DriftSign::Minus),
        other => {
            return Err(violation(format!(
                "drift_sign must be auto, plus or minus, got `{other}`"
            )))
        }
    };

    let p = &mut doc.pde;
    let pde_cells = *p.cells.get_or_insert(DEFAULT_CELLS);
    let pde_refinements = p
        .refinements
        .get_or_insert_with(|| vec![pde_cells / 4, pde_cells / 2, pde_cells])
        .clone();
    let reference = match p.reference.get_or_insert_with(|| "pde".into()).as_str() {
        "pde" => ReferenceKind::Pde,
        "analytic" => ReferenceKind::Analytic,
        other => return Err(violation(format!("reference must be pde or analytic, got `{other}`"))),
    };

    let output = OutputOptions {
        profiles: *doc.output.profiles.get_or_insert(true),
        replica_distances: *doc.output.replica_distances.get_or_insert(true),
    };

    let experiment = ExperimentConfig {
        alphabet: Arc::new(alphabet),
        scaling,
        n_list: doc.study.n.clone(),
        replicas,
        bins,
        horizon,
        checkpoints,
        initial,
        sampling,
        seed_base: seed,
        pde_cells,
        pde_refinements,
        family_size,
        martingale_function,
        quadrature_step,
        drift,
        reference,
    };
    experiment.validate().map_err(|e| violation(e.to_string()))?;
    Ok(ResolvedConfig {
        document: doc,
        experiment,
        output,
    })
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ResolvedConfig, ConfigError> {
    let doc: Document = toml::from_str(text).map_err(|e| parse_error(text, e))?;
    resolve(doc)
}

/// The fully resolved document; parsing it yields the same configuration.
pub fn canonical_toml(config: &ResolvedConfig) -> String {
    toml::to_string(&config.document).expect("resolved documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[model]\nkind = \"asep\"\n\n[scaling]\nlambda = 1.0\nmu = 1.0\n\n[study]\nn = [128]\nhorizon = 0.05\n";

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.experiment.replicas, 16);
        assert_eq!(c.experiment.bins, 32);
        assert_eq!(c.experiment.pde_cells, 256);
        assert_eq!(c.experiment.checkpoints.len(), 11);
        assert_eq!(c.document.pde.refinements, Some(vec![64, 128, 256]));
    }

    #[test]
    fn line_of_error() {
        let text = "[model]\nkind = \"asep\"\n[scaling]\nlambda = \n";
        match parse_config(text) {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn huge_seed_round_trips() {
        let c = parse_config(MINIMAL).unwrap().with_seed(u64::MAX);
        let again = parse_config(&canonical_toml(&c)).unwrap();
        assert_eq!(again.seed(), u64::MAX);
    }
}
