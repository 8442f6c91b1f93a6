use std::time::Instant;

use crate::dynamics::ScalingSpec;
use crate::error::{Error, Result};
use crate::harness::config::{DriftPolicy, ExperimentConfig, ReferenceKind};
use crate::harness::ensemble::{distance, project, project_grid, replica_seed, simulate_ensemble, Ensemble, Norm};
use crate::observables::EmpiricalProfile;
use crate::pde::{solve, DriftSign, PdeParams, PdeTrajectory};

/// Multiple of the ensemble noise floor by which the two orientations must
/// differ before a checkpoint can decide between them.
const DECISIVE_GAP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub n_sites: usize,
    pub t: f64,
    pub norm: Norm,
    pub distance: f64,
    pub replicas: usize,
}

/// How the drift orientation of the report was chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum DriftResolution {
    Fixed,
    /// Both orientations compared with the largest-N ensemble at time `t`.
    Auto {
        t: f64,
        n_sites: usize,
        plus: f64,
        minus: f64,
    },
    /// No drift term, or a closed-form reference: the orientation is irrelevant.
    Irrelevant,
}

/// Orientation of the two-species system, with the asymmetry taken from the
/// rates, that reproduces the scalar equation with the chosen orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignConvention {
    pub burgers_sign: DriftSign,
    pub coupled_sign: DriftSign,
    /// Largest pointwise gap between the matching pair at the horizon.
    pub gap: f64,
    /// Largest pointwise gap with equal orientations.
    pub opposite_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizeResult {
    pub n_sites: usize,
    pub replicas: usize,
    pub failures: usize,
    pub event_count: u64,
    pub seconds: f64,
    /// Ensemble-averaged profile per checkpoint.
    pub mean: Vec<EmpiricalProfile>,
    /// Reference profile on the same bins per checkpoint.
    pub reference: Vec<EmpiricalProfile>,
    /// L1 distance of each replica to the reference, per checkpoint.
    pub replica_distances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub drift_sign: DriftSign,
    pub resolution: DriftResolution,
    pub convention: Option<SignConvention>,
    pub distances: Vec<DistanceRow>,
    pub sizes: Vec<SizeResult>,
    /// Least-squares slope of `log d(N, T)` against `log N` (L1), when at
    /// least two sizes were run.
    pub slope: Option<f64>,
    pub seeds: Vec<u64>,
    pub stages: Vec<(String, f64)>,
}

impl ComparisonReport {
    pub fn distance(&self, n_sites: usize, t: f64, norm: Norm) -> Option<f64> {
        self.distances
            .iter()
            .find(|r| r.n_sites == n_sites && r.t == t && r.norm == norm)
            .map(|r| r.distance)
    }

    /// `d(N, T)` in the L1 norm, in the order of the ring sizes.
    pub fn final_distances(&self) -> Vec<(usize, f64)> {
        let t = self.sizes.first().and_then(|s| s.mean.last()).map_or(0.0, |p| p.t);
        self.sizes
            .iter()
            .filter_map(|s| self.distance(s.n_sites, t, Norm::L1).map(|d| (s.n_sites, d)))
            .collect()
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Reference profiles at every checkpoint, binned for `n_sites`.
enum Reference {
    Pde(PdeTrajectory),
    Analytic,
}

impl Reference {
    fn profiles(&self, config: &ExperimentConfig, n_sites: usize) -> Result<Vec<EmpiricalProfile>> {
        let n = config.n_species();
        match self {
            Reference::Pde(traj) => traj
                .snapshots
                .iter()
                .map(|s| project_grid(s, n, n_sites, config.bins))
                .collect(),
            Reference::Analytic => config
                .checkpoints
                .iter()
                .map(|&t| {
                    let evolved: Vec<_> = config
                        .initial
                        .iter()
                        .map(|p| p.heat_evolved(config.lambda(), t))
                        .collect();
                    project(|k, x| evolved[k].value(x), n, n_sites, config.bins, t)
                })
                .collect(),
        }
    }
}

fn pde_reference(config: &ExperimentConfig, sign: DriftSign) -> Result<Reference> {
    let params = config.pde_params(sign)?;
    let initial = config.pde_initial(config.pde_cells)?;
    Ok(Reference::Pde(solve(
        &initial,
        &params,
        config.horizon,
        &config.checkpoints,
    )?))
}

/// Mean standard error of the ensemble-averaged bin densities.
fn noise_floor(ensemble: &Ensemble, c: usize) -> f64 {
    let r = ensemble.runs.len();
    if r < 2 {
        return 0.0;
    }
    let mean = &ensemble.mean[c];
    let mut total = 0.0;
    let mut count = 0usize;
    for (k, row) in mean.density.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            let var = ensemble
                .runs
                .iter()
                .map(|run| (run.profiles[c].density[k][j] - m).powi(2))
                .sum::<f64>()
                / (r - 1) as f64;
            total += (var / r as f64).sqrt();
            count += 1;
        }
    }
    total / count as f64
}

/// Picks the orientation whose solution is closer to the largest ensemble
/// at the first checkpoint where the two solutions are clearly apart
/// (five times the ensemble noise floor); falls back to the checkpoint
/// where they differ most.
fn resolve_drift(
    config: &ExperimentConfig,
    ensemble: &Ensemble,
    plus: &Reference,
    minus: &Reference,
) -> Result<(DriftSign, DriftResolution)> {
    let n_sites = ensemble.n_sites;
    let p = plus.profiles(config, n_sites)?;
    let m = minus.profiles(config, n_sites)?;
    let mut gaps = Vec::with_capacity(p.len());
    for (a, b) in p.iter().zip(&m) {
        gaps.push(distance(a, b, Norm::L1)?);
    }
    let chosen = (0..gaps.len())
        .find(|&c| gaps[c] > 0.0 && gaps[c] >= DECISIVE_GAP * noise_floor(ensemble, c))
        .or_else(|| (0..gaps.len()).max_by(|&a, &b| gaps[a].total_cmp(&gaps[b])))
        .ok_or_else(|| Error::InvalidParameter("no checkpoint to resolve the drift orientation".into()))?;
    let d_plus = distance(&ensemble.mean[chosen], &p[chosen], Norm::L1)?;
    let d_minus = distance(&ensemble.mean[chosen], &m[chosen], Norm::L1)?;
    let sign = if d_minus < d_plus {
        DriftSign::Minus
    } else {
        DriftSign::Plus
    };
    Ok((
        sign,
        DriftResolution::Auto {
            t: config.checkpoints[chosen],
            n_sites,
            plus: d_plus,
            minus: d_minus,
        },
    ))
}

/// Compares the two-species system, with the asymmetry derived from the
/// rates, against the scalar equation with orientation `burgers_sign`.
pub fn sign_convention(config: &ExperimentConfig, burgers_sign: DriftSign) -> Result<SignConvention> {
    let (lambda, mu) = match config.scaling {
        ScalingSpec::Asep { lambda, mu } => (lambda, mu),
        _ => {
            return Err(Error::InvalidParameter(
                "sign convention is defined for the exclusion process".into(),
            ))
        }
    };
    let scalar = PdeParams::burgers(lambda, mu, burgers_sign);
    let initial = config.pde_initial(config.pde_cells)?;
    let reference = solve(&initial, &scalar, config.horizon, &[config.horizon])?;
    let pair = crate::pde::GridState::new(
        0.0,
        vec![initial.rho[0].clone(), initial.rho[0].iter().map(|v| 1.0 - v).collect()],
    )?;
    let gap_for = |sign: DriftSign| -> Result<f64> {
        let params = PdeParams::coupled(lambda, config.scaling.alpha(), sign);
        let out = solve(&pair, &params, config.horizon, &[config.horizon])?;
        Ok(out.snapshots[0].rho[0]
            .iter()
            .zip(&reference.snapshots[0].rho[0])
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs())))
    };
    let same = gap_for(burgers_sign)?;
    let flipped = gap_for(burgers_sign.flipped())?;
    Ok(if flipped < same {
        SignConvention {
            burgers_sign,
            coupled_sign: burgers_sign.flipped(),
            gap: flipped,
            opposite_gap: same,
        }
    } else {
        SignConvention {
            burgers_sign,
            coupled_sign: burgers_sign,
            gap: same,
            opposite_gap: flipped,
        }
    })
}

/// Compares precomputed ensembles (one per entry of `config.n_list`) with the
/// macroscopic reference.
pub fn compare_ensembles(config: &ExperimentConfig, ensembles: &[Ensemble]) -> Result<ComparisonReport> {
    config.validate()?;
    if ensembles.len() != config.n_list.len()
        || ensembles
            .iter()
            .zip(&config.n_list)
            .any(|(e, &n)| e.n_sites != n || e.checkpoints != config.checkpoints)
    {
        return Err(Error::ShapeMismatch("ensembles do not match the configuration".into()));
    }
    let mut stages = Vec::new();
    let started = Instant::now();
    let (sign, resolution, reference) = match config.reference {
        ReferenceKind::Analytic => {
            if !config.is_driftless() {
                return Err(Error::InvalidParameter(
                    "the closed-form reference needs a driftless model".into(),
                ));
            }
            (DriftSign::Plus, DriftResolution::Irrelevant, Reference::Analytic)
        }
        ReferenceKind::Pde => match config.drift {
            DriftPolicy::Fixed(s) => (s, DriftResolution::Fixed, pde_reference(config, s)?),
            DriftPolicy::Auto if config.is_driftless() => (
                DriftSign::Plus,
                DriftResolution::Irrelevant,
                pde_reference(config, DriftSign::Plus)?,
            ),
            DriftPolicy::Auto => {
                let plus = pde_reference(config, DriftSign::Plus)?;
                let minus = pde_reference(config, DriftSign::Minus)?;
                let largest = ensembles.iter().max_by_key(|e| e.n_sites).expect("validated non-empty");
                let (sign, res) = resolve_drift(config, largest, &plus, &minus)?;
                (sign, res, if sign == DriftSign::Plus { plus } else { minus })
            }
        },
    };
    let convention = match config.scaling {
        ScalingSpec::Asep { .. } if config.reference == ReferenceKind::Pde => Some(sign_convention(config, sign)?),
        _ => None,
    };
    stages.push(("reference".to_string(), started.elapsed().as_secs_f64()));

    let mut distances = Vec::new();
    let mut sizes = Vec::new();
    for ensemble in ensembles {
        let refs = reference.profiles(config, ensemble.n_sites)?;
        for (c, &t) in config.checkpoints.iter().enumerate() {
            for norm in [Norm::L1, Norm::L2] {
                distances.push(DistanceRow {
                    n_sites: ensemble.n_sites,
                    t,
                    norm,
                    distance: distance(&ensemble.mean[c], &refs[c], norm)?,
                    replicas: ensemble.replicas(),
                });
            }
        }
        let replica_distances = (0..config.checkpoints.len())
            .map(|c| {
                ensemble
                    .runs
                    .iter()
                    .map(|run| distance(&run.profiles[c], &refs[c], Norm::L1))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        sizes.push(SizeResult {
            n_sites: ensemble.n_sites,
            replicas: ensemble.replicas(),
            failures: ensemble.failures,
            event_count: ensemble.event_count(),
            seconds: 0.0,
            mean: ensemble.mean.clone(),
            reference: refs,
            replica_distances,
        });
    }
    let mut report = ComparisonReport {
        drift_sign: sign,
        resolution,
        convention,
        distances,
        sizes,
        slope: None,
        seeds: (0..config.replicas)
            .map(|r| replica_seed(config.seed_base, r))
            .collect(),
        stages,
    };
    let finals: Vec<(f64, f64)> = report.final_distances().iter().map(|&(n, d)| (n as f64, d)).collect();
    report.slope = log_log_slope(&finals);
    Ok(report)
}

/// Simulates every ring size, then compares with the macroscopic reference.
/// `progress` receives one line per completed stage.
pub fn run_convergence_study_with(
    config: &ExperimentConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<(ComparisonReport, Vec<Ensemble>)> {
    config.validate()?;
    let mut ensembles = Vec::with_capacity(config.n_list.len());
    let mut timings = Vec::new();
    for &n in &config.n_list {
        let started = Instant::now();
        let e = simulate_ensemble(config, n)?;
        let secs = started.elapsed().as_secs_f64();
        progress(&format!(
            "N = {n}: {} replicas, {} failed, {} events, {secs:.1} s",
            e.replicas(),
            e.failures,
            e.event_count()
        ));
        timings.push((n, secs));
        ensembles.push(e);
    }
    let mut report = compare_ensembles(config, &ensembles)?;
    for (size, (_, secs)) in report.sizes.iter_mut().zip(&timings) {
        size.seconds = *secs;
    }
    let mut stages: Vec<(String, f64)> = timings.iter().map(|(n, s)| (format!("simulate_N{n}"), *s)).collect();
    stages.append(&mut report.stages);
    report.stages = stages;
    Ok((report, ensembles))
}

pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ComparisonReport> {
    run_convergence_study_with(config, &mut |_| {}).map(|(r, _)| r)
}
