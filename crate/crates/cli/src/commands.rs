//! Study commands: run a study, write its tables, and report a summary.

use std::path::Path;
use std::time::Instant;

use clocklab::harness::{
    compare_ensembles, residual_study_from_ensembles, run_martingale_study_with, simulate_ensemble, ComparisonReport,
    DriftPolicy, DriftResolution, Ensemble, ExperimentConfig, MartingaleReport, ResidualReport,
};
use clocklab::observables::EmpiricalProfile;
use clocklab::pde::{solve, DriftSign};
use serde_json::{json, Value};

use crate::config::ResolvedConfig;
use crate::manifest::Stage;
use crate::table::{write_csv, Cell, Table};

/// What a command produced, successful or not.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<String>,
    pub stages: Vec<Stage>,
    pub summary: Value,
    pub partial: bool,
    pub error: Option<String>,
}

impl Outcome {
    fn stage(&mut self, name: impl Into<String>, started: Instant) {
        self.stages.push(Stage {
            name: name.into(),
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    fn write(&mut self, dir: &Path, name: &str, table: &Table) -> std::io::Result<()> {
        write_csv(table, &dir.join(name))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn fail(&mut self, e: impl ToString) {
        self.error.get_or_insert(e.to_string());
        self.partial = true;
    }
}

pub fn sign_value(sign: DriftSign) -> i64 {
    sign.value() as i64
}

/// Position of bin `j`: mean macroscopic coordinate of its sites.
fn bin_center(p: &EmpiricalProfile, j: usize) -> f64 {
    let n = p.n_sites() as f64;
    (j * p.sites) as f64 / n + (p.sites - 1) as f64 / (2.0 * n)
}

fn profile_table(
    config: &ExperimentConfig,
    mean: &[EmpiricalProfile],
    reference: Option<&[EmpiricalProfile]>,
) -> Table {
    let mut t = match reference {
        Some(_) => Table::new(&["t", "species", "bin", "x", "empirical", "reference"]),
        None => Table::new(&["t", "species", "bin", "x", "density"]),
    };
    for (c, p) in mean.iter().enumerate() {
        for (k, row) in p.density.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let mut cells: Vec<Cell> = vec![
                    p.t.into(),
                    config.alphabet.label(k).into(),
                    j.into(),
                    bin_center(p, j).into(),
                    v.into(),
                ];
                if let Some(r) = reference {
                    cells.push(r[c].density[k][j].into());
                }
                t.push(cells);
            }
        }
    }
    t
}

/// Simulates each ring size in turn, stopping at the first failure.
fn simulate_sizes(config: &ExperimentConfig, out: &mut Outcome, progress: &mut dyn FnMut(&str)) -> Vec<Ensemble> {
    let mut ensembles = Vec::new();
    for &n in &config.n_list {
        let started = Instant::now();
        match simulate_ensemble(config, n) {
            Ok(e) => {
                progress(&format!(
                    "N = {n}: {} replicas ({} failed), {} events, {:.1} s",
                    e.replicas(),
                    e.failures,
                    e.event_count(),
                    started.elapsed().as_secs_f64()
                ));
                if e.failures > 0 {
                    out.fail(format!("{} replicas failed at N = {n}", e.failures));
                }
                out.stage(format!("simulate_N{n}"), started);
                ensembles.push(e);
            }
            Err(e) => {
                out.fail(e);
                break;
            }
        }
    }
    ensembles
}

/// The configuration restricted to the sizes that completed.
fn completed(config: &ExperimentConfig, ensembles: &[Ensemble]) -> ExperimentConfig {
    ExperimentConfig {
        n_list: ensembles.iter().map(|e| e.n_sites).collect(),
        ..config.clone()
    }
}

pub fn simulate(cfg: &ResolvedConfig, dir: &Path, progress: &mut dyn FnMut(&str)) -> std::io::Result<Outcome> {
    let config = &cfg.experiment;
    let mut out = Outcome::default();
    let ensembles = simulate_sizes(config, &mut out, progress);
    let mut summary = Table::new(&["N", "replicas", "failures", "events"]);
    for e in &ensembles {
        summary.push(vec![
            e.n_sites.into(),
            e.replicas().into(),
            e.failures.into(),
            e.event_count().into(),
        ]);
        out.write(
            dir,
            &format!("profiles_N{}.csv", e.n_sites),
            &profile_table(config, &e.mean, None),
        )?;
    }
    out.write(dir, "ensemble.csv", &summary)?;
    out.summary = json!({
        "sizes": ensembles.iter().map(|e| json!({"N": e.n_sites, "replicas": e.replicas(), "events": e.event_count()})).collect::<Vec<_>>(),
    });
    Ok(out)
}

pub fn solve_pde(cfg: &ResolvedConfig, dir: &Path, _progress: &mut dyn FnMut(&str)) -> std::io::Result<Outcome> {
    let config = &cfg.experiment;
    let mut out = Outcome::default();
    let signs = match config.drift {
        DriftPolicy::Fixed(s) => vec![s],
        DriftPolicy::Auto => vec![DriftSign::Plus, DriftSign::Minus],
    };
    let mut table = Table::new(&["drift_sign", "t", "species", "cell", "x", "density"]);
    let mut runs = Vec::new();
    for sign in signs {
        let started = Instant::now();
        let result = config
            .pde_params(sign)
            .and_then(|p| Ok((config.pde_initial(config.pde_cells)?, p)))
            .and_then(|(init, p)| solve(&init, &p, config.horizon, &config.checkpoints));
        let traj = match result {
            Ok(t) => t,
            Err(e) => {
                out.fail(e);
                break;
            }
        };
        out.stage(format!("solve_{}", sign_value(sign)), started);
        for s in &traj.snapshots {
            let single = s.n_fields() == 1;
            for k in 0..config.n_species() {
                for j in 0..s.cells() {
                    let v = match (single, k) {
                        (true, 0) => s.rho[0][j],
                        (true, _) => 1.0 - s.rho[0][j],
                        (false, k) => s.rho[k][j],
                    };
                    table.push(vec![
                        sign_value(sign).into(),
                        s.t.into(),
                        config.alphabet.label(k).into(),
                        j.into(),
                        s.center(j).into(),
                        v.into(),
                    ]);
                }
            }
        }
        runs.push(json!({"drift_sign": sign_value(sign), "dt": traj.dt, "steps": traj.steps}));
    }
    out.write(dir, "pde.csv", &table)?;
    out.summary = json!({ "cells": config.pde_cells, "runs": runs });
    Ok(out)
}

fn resolution_json(report: &ComparisonReport) -> Value {
    match &report.resolution {
        DriftResolution::Fixed => json!({"policy": "fixed"}),
        DriftResolution::Irrelevant => json!({"policy": "irrelevant"}),
        DriftResolution::Auto {
            t,
            n_sites,
            plus,
            minus,
        } => json!({
            "policy": "auto", "t": t, "N": n_sites, "distance_plus": plus, "distance_minus": minus,
        }),
    }
}

pub fn convergence_summary(report: &ComparisonReport) -> Value {
    json!({
        "drift_sign": sign_value(report.drift_sign),
        "resolution": resolution_json(report),
        "convention": report.convention.map(|c| json!({
            "burgers_sign": sign_value(c.burgers_sign),
            "coupled_sign": sign_value(c.coupled_sign),
            "gap": c.gap,
            "opposite_gap": c.opposite_gap,
        })),
        "final_distances": report.final_distances().iter().map(|(n, d)| json!({"N": n, "L1": d})).collect::<Vec<_>>(),
        "slope": report.slope,
    })
}

pub fn converge(cfg: &ResolvedConfig, dir: &Path, progress: &mut dyn FnMut(&str)) -> std::io::Result<Outcome> {
    let mut out = Outcome::default();
    let ensembles = simulate_sizes(&cfg.experiment, &mut out, progress);
    if ensembles.is_empty() {
        out.write(dir, "distances.csv", &Table::new(&DISTANCE_HEADER))?;
        return Ok(out);
    }
    let config = completed(&cfg.experiment, &ensembles);
    let started = Instant::now();
    let report = match compare_ensembles(&config, &ensembles) {
        Ok(r) => r,
        Err(e) => {
            out.fail(e);
            out.write(dir, "distances.csv", &Table::new(&DISTANCE_HEADER))?;
            return Ok(out);
        }
    };
    out.stage("compare", started);
    let sign = sign_value(report.drift_sign);
    let mut table = Table::new(&DISTANCE_HEADER);
    for row in &report.distances {
        table.push(vec![
            row.n_sites.into(),
            row.t.into(),
            row.norm.name().into(),
            row.distance.into(),
            row.replicas.into(),
            sign.into(),
        ]);
    }
    out.write(dir, "distances.csv", &table)?;
    if cfg.output.profiles {
        for s in &report.sizes {
            out.write(
                dir,
                &format!("profiles_N{}.csv", s.n_sites),
                &profile_table(&config, &s.mean, Some(&s.reference)),
            )?;
        }
    }
    if cfg.output.replica_distances {
        let mut t = Table::new(&["N", "t", "replica", "seed", "distance"]);
        for (s, e) in report.sizes.iter().zip(&ensembles) {
            for (c, &time) in config.checkpoints.iter().enumerate() {
                for (r, d) in s.replica_distances[c].iter().enumerate() {
                    t.push(vec![
                        s.n_sites.into(),
                        time.into(),
                        r.into(),
                        e.runs[r].seed.into(),
                        (*d).into(),
                    ]);
                }
            }
        }
        out.write(dir, "replica_distances.csv", &t)?;
    }
    out.summary = convergence_summary(&report);
    Ok(out)
}

const DISTANCE_HEADER: [&str; 6] = ["N", "t", "norm", "distance", "replicas", "drift_sign"];

pub fn martingale_table(report: &MartingaleReport) -> Table {
    let mut t = Table::new(&[
        "N",
        "replicas",
        "failures",
        "mean_u",
        "variance_u",
        "std_error",
        "mean_compensator",
        "max_generator",
        "max_scaled_fluctuation",
        "events",
    ]);
    for s in &report.stats {
        t.push(vec![
            s.n_sites.into(),
            s.replicas.into(),
            s.failures.into(),
            s.mean_u.into(),
            s.variance_u.into(),
            s.std_error.into(),
            s.mean_compensator.into(),
            s.max_generator.into(),
            s.max_scaled_fluctuation.into(),
            s.event_count.into(),
        ]);
    }
    t
}

pub fn martingale(cfg: &ResolvedConfig, dir: &Path, progress: &mut dyn FnMut(&str)) -> std::io::Result<Outcome> {
    let config = &cfg.experiment;
    let tf = config.martingale_test_functions();
    let mut out = Outcome::default();
    let mut stats = Vec::new();
    for &n in &config.n_list {
        let started = Instant::now();
        let single = ExperimentConfig {
            n_list: vec![n],
            ..config.clone()
        };
        match run_martingale_study_with(&single, &tf, progress) {
            Ok(mut r) => {
                out.stage(format!("martingale_N{n}"), started);
                if r.stats[0].failures > 0 {
                    out.fail(format!("{} replicas failed at N = {n}", r.stats[0].failures));
                }
                stats.append(&mut r.stats);
            }
            Err(e) => {
                out.fail(e);
                break;
            }
        }
    }
    let points: Vec<(f64, f64)> = stats.iter().map(|s| (s.n_sites as f64, s.variance_u)).collect();
    let report = MartingaleReport {
        variance_slope: clocklab::harness::log_log_slope(&points),
        stats,
        quadrature_step: config.quadrature_step,
        seeds: Vec::new(),
    };
    out.write(dir, "martingale.csv", &martingale_table(&report))?;
    out.summary = json!({
        "variance_slope": report.variance_slope,
        "quadrature_step": report.quadrature_step,
    });
    Ok(out)
}

pub fn residual_tables(report: &ResidualReport, sizes: &[usize]) -> (Table, Table) {
    let mut rows = Table::new(&["source", "size", "function", "residual", "replica_mean_abs"]);
    for (source, list) in [("empirical", &report.empirical), ("pde", &report.pde)] {
        for r in list {
            rows.push(vec![
                source.into(),
                r.size.into(),
                r.function.into(),
                r.residual.into(),
                r.replica_mean_abs.map_or(Cell::Text(String::new()), Cell::Float),
            ]);
        }
    }
    let mut orders = Table::new(&["function", "coarse", "fine", "order"]);
    for (f, list) in report.pde_orders.iter().enumerate() {
        for (i, &o) in list.iter().enumerate() {
            orders.push(vec![f.into(), sizes[i].into(), sizes[i + 1].into(), o.into()]);
        }
    }
    (rows, orders)
}

pub fn residual(cfg: &ResolvedConfig, dir: &Path, progress: &mut dyn FnMut(&str)) -> std::io::Result<Outcome> {
    let mut out = Outcome::default();
    let ensembles = simulate_sizes(&cfg.experiment, &mut out, progress);
    let empty = || Table::new(&["source", "size", "function", "residual", "replica_mean_abs"]);
    if ensembles.is_empty() {
        out.write(dir, "residuals.csv", &empty())?;
        return Ok(out);
    }
    let config = completed(&cfg.experiment, &ensembles);
    let started = Instant::now();
    let sign = match config.drift {
        DriftPolicy::Fixed(s) => Ok(s),
        DriftPolicy::Auto => compare_ensembles(&config, &ensembles).map(|r| r.drift_sign),
    };
    let report = match sign.and_then(|s| residual_study_from_ensembles(&config, &ensembles, s)) {
        Ok(r) => r,
        Err(e) => {
            out.fail(e);
            out.write(dir, "residuals.csv", &empty())?;
            return Ok(out);
        }
    };
    out.stage("residuals", started);
    let (rows, orders) = residual_tables(&report, &config.pde_refinements);
    out.write(dir, "residuals.csv", &rows)?;
    out.write(dir, "pde_orders.csv", &orders)?;
    out.summary = json!({
        "drift_sign": sign_value(report.drift_sign),
        "empirical_improves": report.empirical_improves,
        "empirical_monotone": report.empirical_monotone,
        "pde_monotone": report.pde_monotone,
    });
    Ok(out)
}
