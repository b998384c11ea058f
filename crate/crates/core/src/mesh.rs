//! Uniform periodic mesh and the spatial difference operators of the scheme.
//!
//! Nodes are `x_i = xmin + i*h` for `i = 0..M`, with node `M` identified with
//! node `0`. Every stencil wraps indices modulo `M`.

use std::fmt;
use std::ops::{Deref, DerefMut};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::MeshError;

/// Smallest node count supported: the third-difference stencil spans `i-2..=i+2`.
pub const MIN_NODES: usize = 5;

/// Backward-error target for the Helmholtz solve.
pub const HELMHOLTZ_RESIDUAL_TARGET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGrid {
    xmin: f64,
    xmax: f64,
    nodes: usize,
}

impl PeriodicGrid {
    pub fn new(xmin: f64, xmax: f64, nodes: usize) -> Result<Self, MeshError> {
        if !(xmin.is_finite() && xmax.is_finite()) || xmax <= xmin {
            return Err(MeshError::DegenerateDomain { xmin, xmax });
        }
        if nodes < MIN_NODES {
            return Err(MeshError::TooFewNodes(nodes));
        }
        Ok(Self { xmin, xmax, nodes })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn xmin(&self) -> f64 {
        self.xmin
    }

    pub fn xmax(&self) -> f64 {
        self.xmax
    }

    /// Period of the domain.
    pub fn length(&self) -> f64 {
        self.xmax - self.xmin
    }

    #[inline]
    pub fn h(&self) -> f64 {
        (self.xmax - self.xmin) / self.nodes as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.xmin + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nodes).map(|i| self.x(i)).collect()
    }

    /// The grid with twice as many nodes on the same domain. Node `i` here is
    /// node `2i` there.
    pub fn refined(&self) -> Self {
        Self {
            nodes: 2 * self.nodes,
            ..*self
        }
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction((0..self.nodes).map(|i| f(self.x(i))).collect())
    }

    pub fn zeros(&self) -> GridFunction {
        GridFunction(vec![0.0; self.nodes])
    }

    pub fn constant(&self, c: f64) -> GridFunction {
        GridFunction(vec![c; self.nodes])
    }

    #[inline]
    fn check(&self, w: &[f64]) {
        assert_eq!(
            w.len(),
            self.nodes,
            "grid function length does not match the grid"
        );
    }
}

impl fmt::Display for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {}) with M = {} (h = {})",
            self.xmin,
            self.xmax,
            self.nodes,
            self.h()
        )
    }
}

/// Nodal values on a periodic grid.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Every other node, starting at node 0.
    pub fn restrict(&self) -> GridFunction {
        GridFunction(self.0.iter().step_by(2).copied().collect())
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GridFunction {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

pub fn max_abs(w: &[f64]) -> f64 {
    w.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Periodic neighbour index `(i + k) mod m` for `|k| < m`.
#[inline(always)]
pub(crate) fn wrap(i: usize, k: isize, m: usize) -> usize {
    let j = i as isize + k;
    if j < 0 {
        (j + m as isize) as usize
    } else if j >= m as isize {
        (j - m as isize) as usize
    } else {
        j as usize
    }
}

/// `result_i = w_{(i+k) mod M}`.
pub fn shift(w: &[f64], k: isize) -> GridFunction {
    let m = w.len();
    if m == 0 {
        return GridFunction::default();
    }
    let k = k.rem_euclid(m as isize) as usize;
    GridFunction((0..m).map(|i| w[(i + k) % m]).collect())
}

/// `(w_{i+1} - w_{i-1}) / 2h`.
pub fn central_diff(grid: &PeriodicGrid, w: &[f64]) -> GridFunction {
    grid.check(w);
    let m = grid.len();
    let inv = 1.0 / (2.0 * grid.h());
    GridFunction(
        (0..m)
            .map(|i| (w[wrap(i, 1, m)] - w[wrap(i, -1, m)]) * inv)
            .collect(),
    )
}

/// `(w_{i+2} - 2w_{i+1} + 2w_{i-1} - w_{i-2}) / 2h^3`.
pub fn third_diff(grid: &PeriodicGrid, w: &[f64]) -> GridFunction {
    grid.check(w);
    let m = grid.len();
    let h = grid.h();
    let inv = 1.0 / (2.0 * h * h * h);
    GridFunction(
        (0..m)
            .map(|i| {
                (w[wrap(i, 2, m)] - 2.0 * w[wrap(i, 1, m)] + 2.0 * w[wrap(i, -1, m)]
                    - w[wrap(i, -2, m)])
                    * inv
            })
            .collect(),
    )
}

/// Undivided second difference `w_{i+1} - 2w_i + w_{i-1}`.
pub fn second_undivided(w: &[f64]) -> GridFunction {
    let m = w.len();
    GridFunction(
        (0..m)
            .map(|i| w[wrap(i, 1, m)] - 2.0 * w[i] + w[wrap(i, -1, m)])
            .collect(),
    )
}

/// `(u_{i+1}+u_i)(rho_{i+1}+rho_i) - (u_{i-1}+u_i)(rho_{i-1}+rho_i)`.
///
/// Undivided; the density equation divides it by `4h`.
pub fn coupling_flux(u: &[f64], rho: &[f64]) -> GridFunction {
    assert_eq!(u.len(), rho.len(), "u and rho live on different grids");
    let m = u.len();
    let mut out = vec![0.0; m];
    coupling_flux_into(u, rho, &mut out);
    GridFunction(out)
}

pub(crate) fn coupling_flux_into(u: &[f64], rho: &[f64], out: &mut [f64]) {
    let m = u.len();
    for i in 0..m {
        let ip = wrap(i, 1, m);
        let im = wrap(i, -1, m);
        out[i] = (u[ip] + u[i]) * (rho[ip] + rho[i]) - (u[im] + u[i]) * (rho[im] + rho[i]);
    }
}

/// The circulant operator `B = circ(1 + 1/2h^2, 0, -1/4h^2, 0, ..., 0, -1/4h^2, 0)`
/// relating velocity to momentum, `m = B u`.
///
/// `B` depends only on the grid, so its spectrum and FFT plans are built once
/// and reused by every solve. The struct is immutable and `Sync`.
#[derive(Clone)]
pub struct Helmholtz {
    grid: PeriodicGrid,
    eigenvalues: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Helmholtz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Helmholtz")
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl Helmholtz {
    pub fn new(grid: PeriodicGrid) -> Self {
        let m = grid.len();
        let h = grid.h();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(m);
        let inverse = planner.plan_fft_inverse(m);
        let eigenvalues = (0..m)
            .map(|k| symbol(k, m, h))
            .collect();
        Self {
            grid,
            eigenvalues,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    /// Eigenvalue of `B` on Fourier mode `k`; all are `>= 1`.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k % self.grid.len()]
    }

    /// `m_i = u_i - (u_{i+2} - 2u_i + u_{i-2}) / 4h^2`.
    pub fn apply(&self, u: &[f64]) -> GridFunction {
        apply_helmholtz(&self.grid, u)
    }

    /// Solves `B u = m`.
    pub fn solve(&self, m: &[f64]) -> Result<GridFunction, MeshError> {
        self.grid.check(m);
        let u = self.solve_unchecked(m);
        let residual = self.backward_error(&u, m);
        if residual.is_finite() && residual <= HELMHOLTZ_RESIDUAL_TARGET {
            return Ok(u);
        }
        Err(MeshError::HelmholtzResidual(residual))
    }

    pub(crate) fn solve_unchecked(&self, m: &[f64]) -> GridFunction {
        let n = m.len();
        let mut buf: Vec<Complex64> = m.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / n as f64;
        for (c, lam) in buf.iter_mut().zip(&self.eigenvalues) {
            *c *= scale / lam;
        }
        self.inverse.process(&mut buf);
        GridFunction(buf.into_iter().map(|c| c.re).collect())
    }

    /// Normwise backward error `|Bu - m|_inf / (|B|_inf |u|_inf + |m|_inf)`.
    ///
    /// Relative to `|m|` alone the floor would be `eps/h^2`, which exceeds
    /// the target on fine grids even for an exact solve.
    pub fn backward_error(&self, u: &[f64], m: &[f64]) -> f64 {
        let h = self.grid.h();
        let bu = self.apply(u);
        let scale = (1.0 + 1.0 / (h * h)) * max_abs(u) + max_abs(m);
        if scale == 0.0 {
            return 0.0;
        }
        max_abs_diff(&bu, m) / scale
    }
}

/// `1 + sin^2(2 pi k / M) / h^2`.
fn symbol(k: usize, m: usize, h: f64) -> f64 {
    let s = (2.0 * std::f64::consts::PI * k as f64 / m as f64).sin();
    1.0 + s * s / (h * h)
}

pub fn apply_helmholtz(grid: &PeriodicGrid, u: &[f64]) -> GridFunction {
    grid.check(u);
    let m = grid.len();
    let h = grid.h();
    let inv = 1.0 / (4.0 * h * h);
    GridFunction(
        (0..m)
            .map(|i| u[i] - (u[wrap(i, 2, m)] - 2.0 * u[i] + u[wrap(i, -2, m)]) * inv)
            .collect(),
    )
}

/// One-off solve; builds the spectrum on every call. Prefer [`Helmholtz`]
/// in loops.
pub fn solve_helmholtz(grid: &PeriodicGrid, m: &[f64]) -> Result<GridFunction, MeshError> {
    Helmholtz::new(*grid).solve(m)
}
