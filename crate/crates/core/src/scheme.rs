//! The fully discrete conservative scheme.
//!
//! One time step solves for the midpoint ("star") values `(u*, rho*, m*)`
//! with a Picard iteration, then extrapolates `w^{n+1} = 2w* - w^n`.
//! With `sigma = 1` and viscosity off, mass, momentum and energy are
//! conserved to the accuracy of the fixed-point solve.

use serde::{Deserialize, Serialize};

use crate::error::SchemeError;
use crate::mesh::{
    apply_helmholtz, coupling_flux_into, max_abs, max_abs_diff, wrap, GridFunction, Helmholtz,
    PeriodicGrid,
};

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parameters {
    /// Linear dispersion `A`.
    pub a: f64,
    /// Third-order dispersion `mu`.
    pub mu: f64,
    /// Convection weight `sigma`.
    pub sigma: f64,
    /// Rotation speed `Omega`, in `[0, 1/4)`.
    pub omega: f64,
}

impl Parameters {
    pub const fn new(a: f64, mu: f64, sigma: f64, omega: f64) -> Self {
        Self {
            a,
            mu,
            sigma,
            omega,
        }
    }

    /// `A = mu = Omega = 0`, `sigma = 1`: the Camassa-Holm reduction.
    pub const fn camassa_holm() -> Self {
        Self::new(0.0, 0.0, 1.0, 0.0)
    }

    /// Coefficient `1 - 2 Omega A` of the pressure-like terms.
    pub fn pressure_coefficient(&self) -> f64 {
        1.0 - 2.0 * self.omega * self.a
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let all_finite = [self.a, self.mu, self.sigma, self.omega]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(SchemeError::InvalidConfig(
                "parameters must be finite".into(),
            ));
        }
        if !(0.0..0.25).contains(&self.omega) {
            return Err(SchemeError::InvalidConfig(format!(
                "Omega = {} outside [0, 1/4)",
                self.omega
            )));
        }
        Ok(())
    }
}

/// A time level: velocity `u`, height `rho` and momentum `m = B u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub t: f64,
    pub grid: PeriodicGrid,
    pub u: GridFunction,
    pub rho: GridFunction,
    pub m: GridFunction,
}

impl State {
    /// Builds a state with `m` computed from `u`.
    pub fn new(grid: PeriodicGrid, t: f64, u: GridFunction, rho: GridFunction) -> Self {
        assert_eq!(u.len(), grid.len(), "u has the wrong length");
        assert_eq!(rho.len(), grid.len(), "rho has the wrong length");
        let m = apply_helmholtz(&grid, &u);
        Self { t, grid, u, rho, m }
    }

    pub fn zero(grid: PeriodicGrid) -> Self {
        Self::new(grid, 0.0, grid.zeros(), grid.zeros())
    }

    /// `|m - B u|_inf`.
    pub fn momentum_defect(&self) -> f64 {
        max_abs_diff(&self.m, &apply_helmholtz(&self.grid, &self.u))
    }

    /// The `m = B u` invariant to `1e-10 (1 + |u|_inf)`.
    pub fn is_consistent(&self) -> bool {
        self.u.is_finite()
            && self.rho.is_finite()
            && self.momentum_defect() <= 1e-10 * (1.0 + self.u.max_abs())
    }
}

/// Midpoint values produced by the fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Star {
    pub u: GridFunction,
    pub rho: GridFunction,
    pub m: GridFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tau: f64,
    /// Stop once `|u^{*,l+1} - u^{*,l}|_inf <= tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub viscosity: bool,
    /// Viscosity threshold: a node is damped when `|second difference| >= epsilon * h`.
    pub epsilon: f64,
    /// Also require both residuals `<= 10 tol / tau` before accepting.
    pub residual_check: bool,
}

impl SolverConfig {
    pub const DEFAULT_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_ITER: usize = 200;
    pub const DEFAULT_EPSILON: f64 = 1e-5;

    pub fn new(tau: f64) -> Self {
        Self {
            tau,
            tol: Self::DEFAULT_TOL,
            max_iter: Self::DEFAULT_MAX_ITER,
            viscosity: false,
            epsilon: Self::DEFAULT_EPSILON,
            residual_check: false,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_viscosity(mut self, epsilon: f64) -> Self {
        self.viscosity = true;
        self.epsilon = epsilon;
        self
    }

    pub fn with_residual_check(mut self, on: bool) -> Self {
        self.residual_check = on;
        self
    }

    pub fn validate(&self) -> Result<(), SchemeError> {
        let bad = |msg: String| Err(SchemeError::InvalidConfig(msg));
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad(format!("tau must be positive, got {}", self.tau));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        Ok(())
    }

    /// Residual bound used by the optional residual gate.
    pub fn residual_bound(&self) -> f64 {
        10.0 * self.tol / self.tau
    }
}

/// What happened inside one fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    pub iterations: usize,
    pub final_increment: f64,
    pub residual_m: f64,
    pub residual_rho: f64,
    /// Nodes where either viscosity indicator fired in the last sweep.
    pub viscosity_active_nodes: usize,
}

/// Threshold viscosity `R^u`, `R^rho`: `(w_{i+1} - 2w_i + w_{i-1}) / 2h` where
/// that second difference reaches `epsilon * h` in magnitude, zero elsewhere.
pub fn viscosity_terms(
    grid: &PeriodicGrid,
    u: &[f64],
    rho: &[f64],
    epsilon: f64,
) -> (GridFunction, GridFunction) {
    let v = Viscosity::evaluate(grid, u, rho, epsilon);
    (GridFunction(v.ru), GridFunction(v.rrho))
}

struct Viscosity {
    ru: Vec<f64>,
    rrho: Vec<f64>,
    on_u: Vec<bool>,
    on_rho: Vec<bool>,
    active: usize,
}

impl Viscosity {
    fn evaluate(grid: &PeriodicGrid, u: &[f64], rho: &[f64], epsilon: f64) -> Self {
        Self::with_mask(grid, u, rho, epsilon, None)
    }

    /// With `frozen`, the on/off pattern is taken from it instead of from
    /// the threshold test; the damping values still come from `u`, `rho`.
    fn with_mask(
        grid: &PeriodicGrid,
        u: &[f64],
        rho: &[f64],
        epsilon: f64,
        frozen: Option<&Viscosity>,
    ) -> Self {
        let m = grid.len();
        let h = grid.h();
        let threshold = epsilon * h;
        let inv = 1.0 / (2.0 * h);
        let mut v = Viscosity {
            ru: vec![0.0; m],
            rrho: vec![0.0; m],
            on_u: vec![false; m],
            on_rho: vec![false; m],
            active: 0,
        };
        for i in 0..m {
            let (ip, im) = (wrap(i, 1, m), wrap(i, -1, m));
            let du = u[ip] - 2.0 * u[i] + u[im];
            let dr = rho[ip] - 2.0 * rho[i] + rho[im];
            let (on_u, on_r) = match frozen {
                Some(f) => (f.on_u[i], f.on_rho[i]),
                None => (du.abs() >= threshold, dr.abs() >= threshold),
            };
            if on_u {
                v.ru[i] = du * inv;
            }
            if on_r {
                v.rrho[i] = dr * inv;
            }
            v.on_u[i] = on_u;
            v.on_rho[i] = on_r;
            if on_u || on_r {
                v.active += 1;
            }
        }
        v
    }
}

/// Spatial part of the momentum equation, everything except `dm/dt`:
/// the residual is `(m* - m^n)/(tau/2) + momentum_tendency(...)`.
fn momentum_tendency(
    grid: &PeriodicGrid,
    p: &Parameters,
    u: &[f64],
    m: &[f64],
    rho: &[f64],
    viscosity: Option<&[f64]>,
) -> Vec<f64> {
    let n = grid.len();
    let h = grid.h();
    let c_conv = p.sigma / (2.0 * h);
    let c_burgers = 3.0 * (1.0 - p.sigma) / (4.0 * h);
    let c_lin = p.a / (2.0 * h);
    let c_disp = p.mu / (2.0 * h * h * h);
    let c_press = p.pressure_coefficient() / (4.0 * h);
    let c_rot = p.omega / (2.0 * h);

    let mut flux = vec![0.0; n];
    coupling_flux_into(u, rho, &mut flux);

    let mut out = vec![0.0; n];
    for i in 0..n {
        let (ip, im) = (wrap(i, 1, n), wrap(i, -1, n));
        let (ipp, imm) = (wrap(i, 2, n), wrap(i, -2, n));
        let du = u[ip] - u[im];
        let mut f = c_conv * ((m[ip] * u[ip] - m[im] * u[im]) + m[i] * du)
            + c_burgers * (u[ip] * u[ip] - u[im] * u[im])
            - c_lin * du
            + c_disp * (u[ipp] - 2.0 * u[ip] + 2.0 * u[im] - u[imm])
            + c_press * (rho[ip] * rho[ip] - rho[im] * rho[im])
            - c_rot * rho[i] * flux[i];
        if let Some(r) = viscosity {
            f -= r[i];
        }
        out[i] = f;
    }
    out
}

fn density_tendency(grid: &PeriodicGrid, u: &[f64], rho: &[f64], viscosity: Option<&[f64]>) -> Vec<f64> {
    let n = grid.len();
    let inv = 1.0 / (4.0 * grid.h());
    let mut out = vec![0.0; n];
    coupling_flux_into(u, rho, &mut out);
    for (i, o) in out.iter_mut().enumerate() {
        *o *= inv;
        if let Some(r) = viscosity {
            *o -= r[i];
        }
    }
    out
}

/// Residual of the discrete momentum equation at trial star values.
pub fn momentum_residual(
    star: &Star,
    prev: &State,
    p: &Parameters,
    cfg: &SolverConfig,
) -> GridFunction {
    let visc = cfg
        .viscosity
        .then(|| Viscosity::evaluate(&prev.grid, &star.u, &star.rho, cfg.epsilon));
    momentum_residual_with(star, prev, p, cfg.tau, visc.as_ref())
}

fn momentum_residual_with(
    star: &Star,
    prev: &State,
    p: &Parameters,
    tau: f64,
    visc: Option<&Viscosity>,
) -> GridFunction {
    let tendency = momentum_tendency(
        &prev.grid,
        p,
        &star.u,
        &star.m,
        &star.rho,
        visc.map(|v| v.ru.as_slice()),
    );
    let inv_half = 2.0 / tau;
    GridFunction(
        tendency
            .iter()
            .enumerate()
            .map(|(i, f)| (star.m[i] - prev.m[i]) * inv_half + f)
            .collect(),
    )
}

/// Residual of the discrete density equation at trial star values.
pub fn density_residual(star: &Star, prev: &State, cfg: &SolverConfig) -> GridFunction {
    let visc = cfg
        .viscosity
        .then(|| Viscosity::evaluate(&prev.grid, &star.u, &star.rho, cfg.epsilon));
    density_residual_with(star, prev, cfg.tau, visc.as_ref())
}

fn density_residual_with(star: &Star, prev: &State, tau: f64, visc: Option<&Viscosity>) -> GridFunction {
    let tendency = density_tendency(&prev.grid, &star.u, &star.rho, visc.map(|v| v.rrho.as_slice()));
    let inv_half = 2.0 / tau;
    GridFunction(
        tendency
            .iter()
            .enumerate()
            .map(|(i, g)| (star.rho[i] - prev.rho[i]) * inv_half + g)
            .collect(),
    )
}

/// Sweeps during which the viscosity on/off pattern follows the iterate.
/// After that it is frozen: the threshold test is discontinuous, and nodes
/// sitting at the threshold can otherwise flip every sweep and stall the
/// iteration in a two-cycle.
pub const MASK_SWEEPS: usize = 5;

/// A configured scheme on one grid. Holds the Helmholtz factorization so it
/// is built once per run.
#[derive(Debug, Clone)]
pub struct Integrator {
    helmholtz: Helmholtz,
    params: Parameters,
    cfg: SolverConfig,
}

impl Integrator {
    pub fn new(grid: PeriodicGrid, params: Parameters, cfg: SolverConfig) -> Result<Self, SchemeError> {
        params.validate()?;
        cfg.validate()?;
        Ok(Self {
            helmholtz: Helmholtz::new(grid),
            params,
            cfg,
        })
    }

    pub fn grid(&self) -> &PeriodicGrid {
        self.helmholtz.grid()
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn helmholtz(&self) -> &Helmholtz {
        &self.helmholtz
    }

    fn check_grid(&self, s: &State) -> Result<(), SchemeError> {
        if s.grid != *self.grid() {
            return Err(SchemeError::GridMismatch(format!(
                "state on {} but integrator on {}",
                s.grid,
                self.grid()
            )));
        }
        Ok(())
    }

    /// Fixed-point solve for the star values.
    ///
    /// Each sweep updates `rho*` from the previous iterate, then `m*` using
    /// the new `rho*`, then `u* = B^{-1} m*`. Viscosity, when enabled, is
    /// re-evaluated from the current iterate every sweep.
    pub fn picard_solve(&self, prev: &State) -> Result<(Star, StepReport), SchemeError> {
        self.check_grid(prev)?;
        let grid = *self.grid();
        let cfg = &self.cfg;
        let half = 0.5 * cfg.tau;
        let n = grid.len();

        let mut u = prev.u.clone();
        let mut rho = prev.rho.clone();
        let mut m = prev.m.clone();
        let mut flux = vec![0.0; n];
        let inv4h = 1.0 / (4.0 * grid.h());

        let mut increment = f64::INFINITY;
        let mut mask: Option<Viscosity> = None;
        for iteration in 1..=cfg.max_iter {
            let visc = cfg.viscosity.then(|| {
                let frozen = mask.as_ref().filter(|_| iteration > MASK_SWEEPS);
                Viscosity::with_mask(&grid, &u, &rho, cfg.epsilon, frozen)
            });

            coupling_flux_into(&u, &rho, &mut flux);
            let rho_next: Vec<f64> = (0..n)
                .map(|i| {
                    let mut g = flux[i] * inv4h;
                    if let Some(v) = &visc {
                        g -= v.rrho[i];
                    }
                    prev.rho[i] - half * g
                })
                .collect();

            let tendency = momentum_tendency(
                &grid,
                &self.params,
                &u,
                &m,
                &rho_next,
                visc.as_ref().map(|v| v.ru.as_slice()),
            );
            let m_next: Vec<f64> = (0..n).map(|i| prev.m[i] - half * tendency[i]).collect();

            if !m_next.iter().chain(&rho_next).all(|v| v.is_finite()) {
                return Err(self.non_convergence(prev, iteration, increment, "non-finite iterate"));
            }
            let u_next = self.helmholtz.solve(&m_next)?;

            increment = max_abs_diff(&u_next, &u);
            if visc.is_some() {
                mask = visc;
            }
            u = u_next;
            rho = GridFunction(rho_next);
            m = GridFunction(m_next);

            if increment <= cfg.tol {
                let star = Star { u, rho, m };
                let report = self.report(prev, &star, iteration, increment, mask.as_ref());
                if !cfg.residual_check
                    || (report.residual_m <= cfg.residual_bound()
                        && report.residual_rho <= cfg.residual_bound())
                {
                    return Ok((star, report));
                }
                Star { u, rho, m } = star;
            }
        }
        Err(self.non_convergence(prev, cfg.max_iter, increment, "iteration cap reached"))
    }

    /// Residuals at the accepted iterate, with the viscosity pattern of the
    /// last sweep.
    fn report(
        &self,
        prev: &State,
        star: &Star,
        iterations: usize,
        increment: f64,
        mask: Option<&Viscosity>,
    ) -> StepReport {
        let visc = mask.map(|m| {
            Viscosity::with_mask(self.grid(), &star.u, &star.rho, self.cfg.epsilon, Some(m))
        });
        let residual_m = max_abs(&momentum_residual_with(star, prev, &self.params, self.cfg.tau, visc.as_ref()));
        let residual_rho = max_abs(&density_residual_with(star, prev, self.cfg.tau, visc.as_ref()));
        StepReport {
            iterations,
            final_increment: increment,
            residual_m,
            residual_rho,
            viscosity_active_nodes: visc.map_or(0, |v| v.active),
        }
    }

    fn non_convergence(&self, prev: &State, iterations: usize, increment: f64, reason: &str) -> SchemeError {
        SchemeError::NonConvergence {
            t: prev.t,
            iterations,
            increment,
            reason: reason.to_string(),
        }
    }

    /// Advances one step: `u^{n+1} = 2u* - u^n`, `rho^{n+1} = 2rho* - rho^n`,
    /// `m^{n+1} = B u^{n+1}`.
    pub fn step(&self, prev: &State) -> Result<(State, StepReport), SchemeError> {
        let (star, report) = self.picard_solve(prev)?;
        Ok((self.extrapolate(prev, &star), report))
    }

    pub fn extrapolate(&self, prev: &State, star: &Star) -> State {
        let u: Vec<f64> = star.u.iter().zip(prev.u.iter()).map(|(s, p)| 2.0 * s - p).collect();
        let rho: Vec<f64> = star
            .rho
            .iter()
            .zip(prev.rho.iter())
            .map(|(s, p)| 2.0 * s - p)
            .collect();
        let m = self.helmholtz.apply(&u);
        State {
            t: prev.t + self.cfg.tau,
            grid: prev.grid,
            u: GridFunction(u),
            rho: GridFunction(rho),
            m,
        }
    }

    /// Steps from `initial` to `t_end`, which must be a whole number of
    /// steps away. `keep(n)` selects which levels are stored; observers see
    /// every accepted level.
    pub fn run(
        &self,
        initial: &State,
        t_end: f64,
        keep: &dyn Fn(usize) -> bool,
        observers: &mut [Observer<'_>],
    ) -> Result<Trajectory, RunError> {
        let steps = step_count(initial.t, t_end, self.cfg.tau).map_err(RunError::at_start)?;
        let t0 = initial.t;
        let mut traj = Trajectory {
            tau: self.cfg.tau,
            grid: *self.grid(),
            levels: Vec::new(),
            reports: Vec::with_capacity(steps),
        };
        let zero_report = StepReport::default();
        for obs in observers.iter_mut() {
            obs(0, initial, &zero_report);
        }
        if keep(0) {
            traj.levels.push((0, initial.clone()));
        }
        let mut current = initial.clone();
        for n in 1..=steps {
            let (mut next, report) = self.step(&current).map_err(|e| RunError {
                level: n - 1,
                source: e,
            })?;
            next.t = t0 + n as f64 * self.cfg.tau;
            for obs in observers.iter_mut() {
                obs(n, &next, &report);
            }
            if keep(n) {
                traj.levels.push((n, next.clone()));
            }
            traj.reports.push(report);
            current = next;
        }
        Ok(traj)
    }
}

/// A failed run: the error and the last accepted level.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run aborted after level {level}: {source}")]
pub struct RunError {
    pub level: usize,
    #[source]
    pub source: SchemeError,
}

impl RunError {
    fn at_start(source: SchemeError) -> Self {
        Self { level: 0, source }
    }
}

/// Callback seeing every accepted level `(n, state, report)` of a run.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &State, &StepReport);

/// Number of steps of size `tau` from `t0` to `t_end`; errors unless that is
/// a non-negative integer to relative `1e-12`.
pub fn step_count(t0: f64, t_end: f64, tau: f64) -> Result<usize, SchemeError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(SchemeError::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let span = t_end - t0;
    if !(span.is_finite()) || span < 0.0 {
        return Err(SchemeError::InvalidConfig(format!(
            "t_end = {t_end} is before the initial time {t0}; backward runs are not supported"
        )));
    }
    let steps = (span / tau).round();
    if (steps * tau - span).abs() > 1e-12 * span.abs().max(tau) {
        return Err(SchemeError::InvalidConfig(format!(
            "t_end - t0 = {span} is not a whole number of steps of {tau}"
        )));
    }
    Ok(steps as usize)
}

/// Stored levels of a run plus one report per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub grid: PeriodicGrid,
    /// `(n, state)` in increasing `n`.
    pub levels: Vec<(usize, State)>,
    pub reports: Vec<StepReport>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.reports.len()
    }

    pub fn level(&self, n: usize) -> Option<&State> {
        self.levels
            .binary_search_by_key(&n, |(k, _)| *k)
            .ok()
            .map(|i| &self.levels[i].1)
    }

    pub fn last(&self) -> Option<&State> {
        self.levels.last().map(|(_, s)| s)
    }
}
