//! Refinement ladders and observed orders.
//!
//! All rungs of a ladder advance together, a chunk of coarse steps at a
//! time, so memory stays proportional to the grid sizes rather than to the
//! number of stored levels. Rungs within a chunk run in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{convergence_rows, ConvergenceRow, SupDiff};
use crate::error::SchemeError;
use crate::mesh::PeriodicGrid;
use crate::scheme::{step_count, Integrator, Parameters, SolverConfig, State};

/// Coarse steps per lockstep chunk.
const CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Refine `h` at fixed `tau`.
    Space,
    /// Refine `tau` at fixed `h`.
    Time,
}

impl std::str::FromStr for Axis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "space" => Ok(Axis::Space),
            "time" => Ok(Axis::Time),
            other => Err(format!("unknown axis `{other}` (expected space or time)")),
        }
    }
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::Space => "space",
            Axis::Time => "time",
        })
    }
}

/// One-step map used by the ladder. `Integrator` is the real thing; tests
/// plug in perturbed schemes to check the harness itself.
pub trait Stepper: Sync {
    fn step(&self, s: &State) -> Result<State, SchemeError>;
}

impl Stepper for Integrator {
    fn step(&self, s: &State) -> Result<State, SchemeError> {
        Integrator::step(self, s).map(|(next, _)| next)
    }
}

/// A refinement ladder: `rows` table rows need `rows + 1` runs, each
/// halving `h` (space) or `tau` (time) of the previous one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ladder {
    pub axis: Axis,
    pub grid: PeriodicGrid,
    pub tau: f64,
    pub t_end: f64,
    pub rows: usize,
}

impl Ladder {
    pub fn rungs(&self) -> Vec<(PeriodicGrid, f64)> {
        let mut out = Vec::with_capacity(self.rows + 1);
        let (mut g, mut tau) = (self.grid, self.tau);
        for _ in 0..=self.rows {
            out.push((g, tau));
            match self.axis {
                Axis::Space => g = g.refined(),
                Axis::Time => tau *= 0.5,
            }
        }
        out
    }

    /// `M` or `N` of each table row.
    pub fn resolutions(&self) -> Result<Vec<usize>, SchemeError> {
        let steps = step_count(0.0, self.t_end, self.tau)?;
        Ok(self
            .rungs()
            .iter()
            .take(self.rows)
            .enumerate()
            .map(|(k, (g, _))| match self.axis {
                Axis::Space => g.len(),
                Axis::Time => steps << k,
            })
            .collect())
    }
}

/// Convergence table for both unknowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub axis: Axis,
    pub u: Vec<ConvergenceRow>,
    pub rho: Vec<ConvergenceRow>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LadderError {
    #[error("a convergence ladder needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error(transparent)]
    Setup(SchemeError),
    #[error("rung {rung} ({axis} resolution {resolution}) failed: {source}")]
    Rung {
        rung: usize,
        axis: Axis,
        resolution: usize,
        #[source]
        source: SchemeError,
    },
}

impl LadderError {
    pub fn scheme_error(&self) -> Option<&SchemeError> {
        match self {
            LadderError::TooFewRows(_) => None,
            LadderError::Setup(e) | LadderError::Rung { source: e, .. } => Some(e),
        }
    }
}

/// Runs the ladder with the real scheme.
pub fn run_scheme_ladder(
    ladder: &Ladder,
    params: Parameters,
    cfg: SolverConfig,
    initial: &(dyn Fn(&PeriodicGrid) -> State + Sync),
) -> Result<ConvergenceStudy, LadderError> {
    run_ladder(ladder, initial, |grid, tau| {
        Integrator::new(grid, params, SolverConfig { tau, ..cfg })
    })
}

/// Runs every rung built by `build(grid, tau)` from `initial(grid)` and
/// compares neighbours at every coarse level `n >= 1`.
pub fn run_ladder<S, B>(
    ladder: &Ladder,
    initial: &(dyn Fn(&PeriodicGrid) -> State + Sync),
    build: B,
) -> Result<ConvergenceStudy, LadderError>
where
    S: Stepper + Send,
    B: Fn(PeriodicGrid, f64) -> Result<S, SchemeError>,
{
    if ladder.rows < 2 {
        return Err(LadderError::TooFewRows(ladder.rows));
    }
    let coarse_steps = step_count(0.0, ladder.t_end, ladder.tau).map_err(LadderError::Setup)?;
    let rungs = ladder.rungs();
    let resolution = |k: usize| match ladder.axis {
        Axis::Space => rungs[k].0.len(),
        Axis::Time => coarse_steps << k,
    };
    // Steps of rung k per coarse step, and the fine-node stride of a pair.
    let axis = ladder.axis;
    let ratio = move |k: usize| if axis == Axis::Time { 1usize << k } else { 1 };
    let stride = if axis == Axis::Space { 2 } else { 1 };

    let steppers: Vec<S> = rungs
        .iter()
        .enumerate()
        .map(|(k, (g, tau))| {
            build(*g, *tau).map_err(|source| LadderError::Rung {
                rung: k,
                axis: ladder.axis,
                resolution: resolution(k),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut current: Vec<State> = rungs.iter().map(|(g, _)| initial(g)).collect();
    let t0 = current[0].t;
    let mut taken = vec![0usize; rungs.len()];
    let mut errors = vec![SupDiff::default(); ladder.rows];

    let mut done = 0;
    while done < coarse_steps {
        let chunk = CHUNK.min(coarse_steps - done);
        let batches: Vec<Result<Vec<State>, LadderError>> = steppers
            .par_iter()
            .zip(current.par_iter())
            .zip(taken.par_iter())
            .enumerate()
            .map(|(k, ((stepper, start), &n0))| {
                let tau = rungs[k].1;
                let count = chunk * ratio(k);
                let mut out: Vec<State> = Vec::with_capacity(count);
                for j in 0..count {
                    let prev = out.last().unwrap_or(start);
                    let mut next = stepper.step(prev).map_err(|source| LadderError::Rung {
                        rung: k,
                        axis: ladder.axis,
                        resolution: resolution(k),
                        source,
                    })?;
                    next.t = t0 + (n0 + j + 1) as f64 * tau;
                    out.push(next);
                }
                Ok(out)
            })
            .collect();
        let batches: Vec<Vec<State>> = batches.into_iter().collect::<Result<_, _>>()?;

        for (k, err) in errors.iter_mut().enumerate() {
            let (coarse, fine) = (&batches[k], &batches[k + 1]);
            let step_ratio = ratio(k + 1) / ratio(k);
            for (j, c) in coarse.iter().enumerate() {
                let f = &fine[(j + 1) * step_ratio - 1];
                *err = err.merge(pair_diff(c, f, stride));
            }
        }
        for (k, batch) in batches.into_iter().enumerate() {
            taken[k] += batch.len();
            current[k] = batch.into_iter().last().expect("chunk is non-empty");
        }
        done += chunk;
    }

    let res: Vec<usize> = (0..ladder.rows).map(resolution).collect();
    let eu: Vec<f64> = errors.iter().map(|e| e.u).collect();
    let er: Vec<f64> = errors.iter().map(|e| e.rho).collect();
    Ok(ConvergenceStudy {
        axis: ladder.axis,
        u: convergence_rows(&res, &eu),
        rho: convergence_rows(&res, &er),
    })
}

fn pair_diff(coarse: &State, fine: &State, stride: usize) -> SupDiff {
    let mut d = SupDiff::default();
    for i in 0..coarse.grid.len() {
        d.u = d.u.max((coarse.u[i] - fine.u[stride * i]).abs());
        d.rho = d.rho.max((coarse.rho[i] - fine.rho[stride * i]).abs());
    }
    d
}
