//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use r2ch::mesh::{apply_helmholtz, GridFunction, PeriodicGrid};
use r2ch::scheme::Star;
use r2ch::{Parameters, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Smooth periodic data: a few low Fourier modes with random coefficients.
pub fn smooth_field(grid: &PeriodicGrid, rng: &mut ChaCha8Rng, amp: f64, offset: f64) -> GridFunction {
    let l = grid.length();
    let coeffs: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    grid.sample(|x| {
        offset
            + amp
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| {
                        let w = 2.0 * std::f64::consts::PI * (k + 1) as f64 * (x - grid.xmin()) / l;
                        a * w.cos() + b * w.sin()
                    })
                    .sum::<f64>()
    })
}

pub fn random_state(grid: PeriodicGrid, seed: u64, amp: f64) -> State {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = smooth_field(&grid, &mut rng, amp, 0.0);
    let rho = smooth_field(&grid, &mut rng, amp, 1.0);
    State::new(grid, 0.0, u, rho)
}

pub fn w(v: &[f64], i: isize) -> f64 {
    let m = v.len() as isize;
    v[i.rem_euclid(m) as usize]
}

/// Momentum residual written out term by term from the discrete equations.
pub fn oracle_momentum(star: &Star, prev: &State, p: &Parameters, tau: f64, ru: Option<&[f64]>) -> Vec<f64> {
    let h = prev.grid.h();
    let (u, m, r) = (&star.u[..], &star.m[..], &star.rho[..]);
    (0..prev.grid.len() as isize)
        .map(|i| {
            let flux = (w(u, i + 1) + w(u, i)) * (w(r, i + 1) + w(r, i))
                - (w(u, i - 1) + w(u, i)) * (w(r, i - 1) + w(r, i));
            let time = (w(m, i) - w(&prev.m, i)) / (tau / 2.0);
            let conv = p.sigma / (2.0 * h)
                * ((w(m, i + 1) * w(u, i + 1) - w(m, i - 1) * w(u, i - 1))
                    + w(m, i) * (w(u, i + 1) - w(u, i - 1)));
            let burgers = 3.0 * (1.0 - p.sigma) / (4.0 * h) * (w(u, i + 1).powi(2) - w(u, i - 1).powi(2));
            let lin = -p.a / (2.0 * h) * (w(u, i + 1) - w(u, i - 1));
            let disp = p.mu / (2.0 * h.powi(3))
                * (w(u, i + 2) - 2.0 * w(u, i + 1) + 2.0 * w(u, i - 1) - w(u, i - 2));
            let press = (1.0 - 2.0 * p.omega * p.a) / (4.0 * h) * (w(r, i + 1).powi(2) - w(r, i - 1).powi(2));
            let rot = -p.omega / (2.0 * h) * w(r, i) * flux;
            let visc = ru.map_or(0.0, |v| v[i as usize]);
            time + conv + burgers + lin + disp + press + rot - visc
        })
        .collect()
}

pub fn oracle_density(star: &Star, prev: &State, tau: f64, rr: Option<&[f64]>) -> Vec<f64> {
    let h = prev.grid.h();
    let (u, r) = (&star.u[..], &star.rho[..]);
    (0..prev.grid.len() as isize)
        .map(|i| {
            let flux = (w(u, i + 1) + w(u, i)) * (w(r, i + 1) + w(r, i))
                - (w(u, i - 1) + w(u, i)) * (w(r, i - 1) + w(r, i));
            (w(r, i) - w(&prev.rho, i)) / (tau / 2.0) + flux / (4.0 * h) - rr.map_or(0.0, |v| v[i as usize])
        })
        .collect()
}

pub fn star_of(grid: &PeriodicGrid, u: Vec<f64>, rho: Vec<f64>) -> Star {
    let m = apply_helmholtz(grid, &u);
    Star {
        u: GridFunction(u),
        rho: GridFunction(rho),
        m,
    }
}

/// Newton's method on the full nonlinear system with a finite-difference
/// Jacobian and dense LU, independent of the Picard sweep.
pub fn newton_star(prev: &State, p: &Parameters, tau: f64) -> Star {
    let grid = prev.grid;
    let n = grid.len();
    let residual = |x: &DVector<f64>| -> DVector<f64> {
        let star = star_of(&grid, x.rows(0, n).iter().copied().collect(), x.rows(n, n).iter().copied().collect());
        let mut out = oracle_momentum(&star, prev, p, tau, None);
        out.extend(oracle_density(&star, prev, tau, None));
        DVector::from_vec(out)
    };
    let mut x = DVector::from_iterator(2 * n, prev.u.iter().chain(prev.rho.iter()).copied());
    for _ in 0..50 {
        let f = residual(&x);
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let d = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += d;
            xm[j] -= d;
            let col = (residual(&xp) - residual(&xm)) / (2.0 * d);
            jac.set_column(j, &col);
        }
        let dx = jac.lu().solve(&(-&f)).expect("Jacobian is regular");
        x += &dx;
        if dx.amax() < 1e-16 * (1.0 + x.amax()) {
            break;
        }
    }
    star_of(&grid, x.rows(0, n).iter().copied().collect(), x.rows(n, n).iter().copied().collect())
}
