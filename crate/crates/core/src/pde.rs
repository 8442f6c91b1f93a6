//! Explicit finite-volume solvers for the macroscopic equations on the
//! periodic unit interval:
//!
//! ```text
//! Burgers:    rho_t   = lambda rho_xx + sign mu (rho - rho^2)_x
//! n species:  rho_k,t = lambda [rho_k,xx + sign (sum_l alpha[l][k] rho_k rho_l)_x]
//! ```
//!
//! Diffusion uses the centered second difference and the drift a centered
//! flux difference, both in conservative form, with forward Euler in time.

use crate::error::{Error, Result};
use crate::observables::CellDensity;
use crate::trig::TrigPoly;

const RANGE_TOL: f64 = 1e-8;
const DT_SAFETY: f64 = 0.4;

/// Densities at the cell centers `(j + 1/2)/M` at time `t`. A Burgers state
/// holds one field; an n-species state holds `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub t: f64,
    pub rho: Vec<Vec<f64>>,
}

impl GridState {
    pub fn new(t: f64, rho: Vec<Vec<f64>>) -> Result<Self> {
        let m = rho.first().map_or(0, Vec::len);
        if rho.is_empty() || m < 3 {
            return Err(Error::ShapeMismatch("a grid needs at least 3 cells".into()));
        }
        if rho.iter().any(|r| r.len() != m) {
            return Err(Error::ShapeMismatch("species fields differ in length".into()));
        }
        Ok(Self { t, rho })
    }

    /// Samples `profiles[k]` at the cell centers of an `m`-cell grid.
    pub fn from_profiles<F: Fn(f64) -> f64>(m: usize, profiles: &[F]) -> Result<Self> {
        let dx = 1.0 / m as f64;
        Self::new(
            0.0,
            profiles
                .iter()
                .map(|f| (0..m).map(|j| f((j as f64 + 0.5) * dx)).collect())
                .collect(),
        )
    }

    pub fn cells(&self) -> usize {
        self.rho[0].len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells() as f64
    }

    pub fn n_fields(&self) -> usize {
        self.rho.len()
    }

    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dx()
    }

    /// `sum_j rho_k[j] dx`.
    pub fn mass(&self, k: usize) -> f64 {
        self.rho[k].iter().sum::<f64>() * self.dx()
    }

    pub fn cell_density(&self, k: usize) -> CellDensity {
        CellDensity::grid(self.rho[k].clone())
    }

    /// Periodic linear interpolation of field `k` between cell centers.
    pub fn interpolate(&self, k: usize, x: f64) -> f64 {
        let m = self.cells();
        let pos = (x * m as f64 - 0.5).rem_euclid(m as f64);
        let j = (pos.floor() as usize).min(m - 1);
        let w = pos - j as f64;
        let r = &self.rho[k];
        (1.0 - w) * r[j] + w * r[(j + 1) % m]
    }

    pub fn max_abs_diff(&self, other: &GridState) -> f64 {
        self.rho
            .iter()
            .zip(&other.rho)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Orientation applied to the drift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftSign {
    #[default]
    Plus,
    Minus,
}

impl DriftSign {
    pub fn value(self) -> f64 {
        match self {
            DriftSign::Plus => 1.0,
            DriftSign::Minus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            DriftSign::Plus => DriftSign::Minus,
            DriftSign::Minus => DriftSign::Plus,
        }
    }

    pub fn from_value(v: i64) -> Option<Self> {
        match v {
            1 => Some(DriftSign::Plus),
            -1 => Some(DriftSign::Minus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    Burgers { mu: f64 },
    Coupled { alpha: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams {
    pub lambda: f64,
    pub drift: Drift,
    pub drift_sign: DriftSign,
}

impl PdeParams {
    pub fn burgers(lambda: f64, mu: f64, drift_sign: DriftSign) -> Self {
        Self {
            lambda,
            drift: Drift::Burgers { mu },
            drift_sign,
        }
    }

    pub fn coupled(lambda: f64, alpha: Vec<Vec<f64>>, drift_sign: DriftSign) -> Self {
        Self {
            lambda,
            drift: Drift::Coupled { alpha },
            drift_sign,
        }
    }

    fn validate(&self, state: &GridState) -> Result<()> {
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        match &self.drift {
            Drift::Burgers { .. } if state.n_fields() != 1 => Err(Error::ShapeMismatch(format!(
                "Burgers drift needs one field, state has {}",
                state.n_fields()
            ))),
            Drift::Coupled { alpha }
                if alpha.len() != state.n_fields() || alpha.iter().any(|r| r.len() != alpha.len()) =>
            {
                Err(Error::ShapeMismatch(format!(
                    "coupling matrix does not match {} fields",
                    state.n_fields()
                )))
            }
            _ => Ok(()),
        }
    }

    /// Largest characteristic drift speed.
    fn drift_speed(&self) -> f64 {
        match &self.drift {
            Drift::Burgers { mu } => mu.abs(),
            Drift::Coupled { alpha } => self.lambda * alpha.iter().flatten().fold(0.0, |m: f64, a| m.max(a.abs())),
        }
    }

    /// Stability ceiling `dx^2 / (2 lambda + v dx)` of the explicit scheme.
    pub fn cfl_bound(&self, dx: f64) -> f64 {
        dx * dx / (2.0 * self.lambda + self.drift_speed() * dx)
    }

    /// Step used by [`solve`]: a fixed fraction of the stability ceiling.
    pub fn default_dt(&self, dx: f64) -> f64 {
        DT_SAFETY * self.cfl_bound(dx)
    }
}

fn check_dt(params: &PdeParams, dx: f64, dt: f64) -> Result<()> {
    let bound = params.cfl_bound(dx);
    if dt.is_nan() || dt <= 0.0 || dt > bound * (1.0 + 1e-12) {
        return Err(Error::CflViolation { dt, bound });
    }
    Ok(())
}

fn check_range(state: &GridState) -> Result<()> {
    for field in &state.rho {
        for (cell, &v) in field.iter().enumerate() {
            if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
                return Err(Error::OutOfRange {
                    value: v,
                    cell,
                    t: state.t,
                });
            }
        }
    }
    Ok(())
}

/// Advances `state` into `next` without checks.
fn advance(state: &GridState, params: &PdeParams, dt: f64, flux: &mut [f64], next: &mut GridState) {
    let m = state.cells();
    let dx = state.dx();
    let diff = params.lambda * dt / (dx * dx);
    let adv = params.drift_sign.value() * dt / (2.0 * dx);
    for k in 0..state.n_fields() {
        let r = &state.rho[k];
        match &params.drift {
            Drift::Burgers { mu } => {
                for (f, &v) in flux.iter_mut().zip(r) {
                    *f = mu * (v - v * v);
                }
            }
            Drift::Coupled { alpha } => {
                for j in 0..m {
                    let mut g = 0.0;
                    for (l, field) in state.rho.iter().enumerate() {
                        g += alpha[l][k] * field[j];
                    }
                    flux[j] = params.lambda * r[j] * g;
                }
            }
        }
        let out = &mut next.rho[k];
        for j in 0..m {
            let (jm, jp) = (if j == 0 { m - 1 } else { j - 1 }, if j + 1 == m { 0 } else { j + 1 });
            out[j] = r[j] + diff * (r[jp] - 2.0 * r[j] + r[jm]) + adv * (flux[jp] - flux[jm]);
        }
    }
    next.t = state.t + dt;
}

fn step_checked(state: &GridState, params: &PdeParams, dt: f64) -> Result<GridState> {
    params.validate(state)?;
    check_dt(params, state.dx(), dt)?;
    let mut next = state.clone();
    let mut flux = vec![0.0; state.cells()];
    advance(state, params, dt, &mut flux, &mut next);
    check_range(&next)?;
    Ok(next)
}

/// One explicit step of the viscous Burgers equation.
pub fn step_burgers(state: &GridState, params: &PdeParams, dt: f64) -> Result<GridState> {
    if !matches!(params.drift, Drift::Burgers { .. }) {
        return Err(Error::InvalidParameter("expected a Burgers drift".into()));
    }
    step_checked(state, params, dt)
}

/// One explicit step of the coupled n-species system.
pub fn step_nspecies(state: &GridState, params: &PdeParams, dt: f64) -> Result<GridState> {
    if !matches!(params.drift, Drift::Coupled { .. }) {
        return Err(Error::InvalidParameter("expected a coupling matrix".into()));
    }
    step_checked(state, params, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeTrajectory {
    /// States at the requested checkpoints, in order.
    pub snapshots: Vec<GridState>,
    /// Nominal step; steps are shortened uniformly to land on checkpoints.
    pub dt: f64,
    pub steps: u64,
}

impl PdeTrajectory {
    pub fn at(&self, t: f64) -> Option<&GridState> {
        self.snapshots.iter().find(|s| s.t == t)
    }
}

/// Integrates from `initial` to `horizon`, recording `checkpoints` and
/// calling `observer` on the initial state and after every step.
pub fn solve_observed<O: FnMut(&GridState)>(
    initial: &GridState,
    params: &PdeParams,
    horizon: f64,
    checkpoints: &[f64],
    mut observer: O,
) -> Result<PdeTrajectory> {
    params.validate(initial)?;
    crate::dynamics::kmc::check_checkpoints(checkpoints, horizon)?;
    check_range(initial)?;
    let dt = params.default_dt(initial.dx());
    let mut state = initial.clone();
    state.t = 0.0;
    let mut next = state.clone();
    let mut flux = vec![0.0; state.cells()];
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut steps = 0u64;
    observer(&state);

    let mut targets: Vec<f64> = checkpoints.to_vec();
    if targets.last().is_none_or(|&t| t < horizon) {
        targets.push(horizon);
    }
    let mut recorded = 0;
    for &target in &targets {
        let span = target - state.t;
        if span > 0.0 {
            let count = (span / dt).ceil().max(1.0) as u64;
            let h = span / count as f64;
            let start = state.t;
            for i in 1..=count {
                advance(&state, params, h, &mut flux, &mut next);
                next.t = if i == count { target } else { start + i as f64 * h };
                check_range(&next)?;
                std::mem::swap(&mut state, &mut next);
                observer(&state);
            }
            steps += count;
        }
        while recorded < checkpoints.len() && checkpoints[recorded] <= target {
            snapshots.push(state.clone());
            recorded += 1;
        }
    }
    Ok(PdeTrajectory { snapshots, dt, steps })
}

pub fn solve(initial: &GridState, params: &PdeParams, horizon: f64, checkpoints: &[f64]) -> Result<PdeTrajectory> {
    solve_observed(initial, params, horizon, checkpoints, |_| {})
}

/// Exact solution of `rho_t = lambda rho_xx` from `initial`, on an `m`-cell grid.
pub fn analytic_heat_solution(initial: &TrigPoly, lambda: f64, t: f64, m: usize) -> Result<GridState> {
    let evolved = initial.heat_evolved(lambda, t);
    let mut state = GridState::from_profiles(m, &[|x: f64| evolved.value(x)])?;
    state.t = t;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cosine_bump(m: usize, a: f64) -> GridState {
        GridState::from_profiles(m, &[|x: f64| 0.5 + a * (2.0 * PI * x).cos()]).unwrap()
    }

    fn heat_error(m: usize) -> f64 {
        let p = PdeParams::burgers(1.0, 0.0, DriftSign::Plus);
        let traj = solve(&cosine_bump(m, 0.3), &p, 0.05, &[0.05]).unwrap();
        let exact = analytic_heat_solution(&TrigPoly::new(0.5, vec![0.3], vec![]), 1.0, 0.05, m).unwrap();
        traj.snapshots[0].max_abs_diff(&exact)
    }

    #[test]
    fn heat_oracle_and_order() {
        let e128 = heat_error(128);
        let e256 = heat_error(256);
        assert!(e256 <= 1e-4, "{e256}");
        let ratio = e128 / e256;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn constant_is_fixed_point() {
        let s = GridState::new(0.0, vec![vec![0.37; 64]]).unwrap();
        let p = PdeParams::burgers(1.0, 3.0, DriftSign::Minus);
        let dt = p.cfl_bound(s.dx());
        let next = step_burgers(&s, &p, dt).unwrap();
        assert!(next.rho[0].iter().all(|&v| (v - 0.37).abs() < 1e-15));
        let uniform = GridState::new(0.0, vec![vec![0.25; 32]; 4]).unwrap();
        let mut alpha = vec![vec![0.0; 4]; 4];
        alpha[0][1] = 1.5;
        alpha[1][0] = -1.5;
        alpha[2][3] = -0.5;
        alpha[3][2] = 0.5;
        let q = PdeParams::coupled(1.0, alpha, DriftSign::Plus);
        let next = step_nspecies(&uniform, &q, q.default_dt(uniform.dx())).unwrap();
        assert!(next.max_abs_diff(&uniform) < 1e-15);
    }

    #[test]
    fn cfl_and_shape_errors() {
        let s = cosine_bump(64, 0.2);
        let p = PdeParams::burgers(1.0, 2.0, DriftSign::Plus);
        let bound = p.cfl_bound(s.dx());
        assert!(matches!(
            step_burgers(&s, &p, 1.01 * bound),
            Err(Error::CflViolation { .. })
        ));
        let q = PdeParams::coupled(1.0, vec![vec![0.0; 3]; 3], DriftSign::Plus);
        assert!(step_nspecies(&s, &q, bound).is_err());
        assert!(matches!(solve(&s, &p, 0.1, &[0.2]), Err(Error::BadCheckpoints { .. })));
        let out = GridState::new(0.0, vec![vec![1.2; 8]]).unwrap();
        assert!(matches!(solve(&out, &p, 0.1, &[]), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let s = cosine_bump(32, 0.2);
        let traj = solve(&s, &PdeParams::burgers(1.0, 1.0, DriftSign::Plus), 0.0, &[0.0]).unwrap();
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.snapshots, vec![s]);
    }

    #[test]
    fn mass_conserved_over_many_steps() {
        let p = PdeParams::burgers(1.0, 4.0, DriftSign::Plus);
        let mut s = cosine_bump(128, 0.3);
        let m0 = s.mass(0);
        let dt = p.default_dt(s.dx());
        for _ in 0..10_000 {
            s = step_burgers(&s, &p, dt).unwrap();
        }
        assert!(((s.mass(0) - m0) / m0).abs() < 1e-10);
        assert!(s.rho[0].iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn two_species_reduce_to_burgers() {
        let (lambda, mu) = (1.0, 2.0);
        for sign in [DriftSign::Plus, DriftSign::Minus] {
            let burgers = PdeParams::burgers(lambda, mu, sign);
            let coupled = PdeParams::coupled(lambda, vec![vec![0.0, -mu / lambda], vec![mu / lambda, 0.0]], sign);
            let a = cosine_bump(128, 0.3);
            let pair = GridState::new(0.0, vec![a.rho[0].clone(), a.rho[0].iter().map(|v| 1.0 - v).collect()]).unwrap();
            let dt = burgers.default_dt(a.dx()).min(coupled.default_dt(a.dx()));
            let (mut x, mut y) = (a, pair);
            for _ in 0..2000 {
                x = step_burgers(&x, &burgers, dt).unwrap();
                y = step_nspecies(&y, &coupled, dt).unwrap();
            }
            let gap = x.rho[0]
                .iter()
                .zip(&y.rho[0])
                .fold(0.0f64, |m, (u, v)| m.max((u - v).abs()));
            assert!(gap < 1e-8, "{gap}");
        }
    }

    #[test]
    fn simplex_preserved() {
        let n = 3;
        let profiles: Vec<_> = (0..n)
            .map(|k| move |x: f64| 1.0 / 3.0 + 0.2 * (2.0 * PI * (x - k as f64 / 3.0)).cos())
            .collect();
        let mut s = GridState::from_profiles(96, &profiles).unwrap();
        let alpha = vec![vec![0.0, 1.0, -1.0], vec![-1.0, 0.0, 1.0], vec![1.0, -1.0, 0.0]];
        let p = PdeParams::coupled(1.0, alpha, DriftSign::Minus);
        let dt = p.default_dt(s.dx());
        for _ in 0..10_000 {
            s = step_nspecies(&s, &p, dt).unwrap();
        }
        for j in 0..s.cells() {
            let sum: f64 = (0..n).map(|k| s.rho[k][j]).sum();
            assert!((sum - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn heat_oracle_basics() {
        let p0 = TrigPoly::new(0.5, vec![0.3], vec![0.1]);
        let s = analytic_heat_solution(&p0, 1.0, 0.0, 16).unwrap();
        for j in 0..16 {
            assert!((s.rho[0][j] - p0.value(s.center(j))).abs() < 1e-15);
        }
        let c = analytic_heat_solution(&TrigPoly::constant(0.4), 2.0, 3.0, 8).unwrap();
        assert!(c.rho[0].iter().all(|&v| v == 0.4));
        let t = 0.01;
        let m1 = analytic_heat_solution(&TrigPoly::cosine(1, 1.0), 1.0, t, 8).unwrap();
        for j in 0..8 {
            let x = m1.center(j);
            assert!((m1.rho[0][j] - (-4.0 * PI * PI * t).exp() * (2.0 * PI * x).cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolation_is_periodic_and_exact_at_centers() {
        let s = cosine_bump(10, 0.3);
        for j in 0..10 {
            assert!((s.interpolate(0, s.center(j)) - s.rho[0][j]).abs() < 1e-14);
        }
        let mid = 0.5 * (s.rho[0][9] + s.rho[0][0]);
        assert!((s.interpolate(0, 0.0) - mid).abs() < 1e-14);
        assert!((s.interpolate(0, 1.0) - mid).abs() < 1e-14);
    }
}
