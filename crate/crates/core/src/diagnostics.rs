//! Discrete invariants and posterior error estimates.
//!
//! The invariants are plain nodal sums with no factor `h`, so their values
//! depend on the grid: they are `1/h` times the continuous integrals. All
//! sums run sequentially in ascending node order, which makes them
//! reproducible bit-for-bit. The `*_compensated` variants use Neumaier
//! summation and are meant for drift audits only.

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::mesh::wrap;
use crate::scheme::{Parameters, State, Trajectory};

/// How nodal sums are accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Summation {
    /// Left-to-right `f64` accumulation.
    #[default]
    Sequential,
    /// Neumaier (improved Kahan) summation.
    Compensated,
}

impl Summation {
    fn sum(self, terms: impl Iterator<Item = f64>) -> f64 {
        match self {
            Summation::Sequential => terms.fold(0.0, |acc, t| acc + t),
            Summation::Compensated => {
                let mut sum = 0.0_f64;
                let mut carry = 0.0_f64;
                for t in terms {
                    let next = sum + t;
                    if sum.abs() >= t.abs() {
                        carry += (sum - next) + t;
                    } else {
                        carry += (t - next) + sum;
                    }
                    sum = next;
                }
                sum + carry
            }
        }
    }
}

/// Discrete invariants at one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedRecord {
    pub n: usize,
    pub t: f64,
    /// Mass `sum rho_i`.
    pub i1: f64,
    /// Momentum `sum (u_i + Omega rho_i^2)`.
    pub i2: f64,
    /// Energy.
    pub e: f64,
    /// Third-order functional; monitored, not conserved by the scheme.
    pub h: f64,
}

impl ConservedRecord {
    pub fn of(n: usize, s: &State, p: &Parameters, summation: Summation) -> Self {
        Self {
            n,
            t: s.t,
            i1: mass_with(s, summation),
            i2: momentum_with(s, p, summation),
            e: energy_with(s, p, summation),
            h: hamiltonian_with(s, p, summation),
        }
    }
}

pub fn mass(s: &State) -> f64 {
    mass_with(s, Summation::Sequential)
}

pub fn momentum_total(s: &State, p: &Parameters) -> f64 {
    momentum_with(s, p, Summation::Sequential)
}

pub fn energy(s: &State, p: &Parameters) -> f64 {
    energy_with(s, p, Summation::Sequential)
}

pub fn hamiltonian_h(s: &State, p: &Parameters) -> f64 {
    hamiltonian_with(s, p, Summation::Sequential)
}

pub fn mass_with(s: &State, summation: Summation) -> f64 {
    summation.sum(s.rho.iter().copied())
}

pub fn momentum_with(s: &State, p: &Parameters, summation: Summation) -> f64 {
    summation.sum(
        s.u.iter()
            .zip(s.rho.iter())
            .map(|(u, r)| u + p.omega * r * r),
    )
}

fn central(s: &State, i: usize) -> f64 {
    let m = s.grid.len();
    (s.u[wrap(i, 1, m)] - s.u[wrap(i, -1, m)]) / (2.0 * s.grid.h())
}

pub fn energy_with(s: &State, p: &Parameters, summation: Summation) -> f64 {
    let c = p.pressure_coefficient();
    0.5 * summation.sum((0..s.grid.len()).map(|i| {
        let v = central(s, i);
        s.u[i] * s.u[i] + v * v + c * s.rho[i] * s.rho[i]
    }))
}

pub fn hamiltonian_with(s: &State, p: &Parameters, summation: Summation) -> f64 {
    summation.sum((0..s.grid.len()).map(|i| {
        let u = s.u[i];
        let v = central(s, i);
        let r = s.rho[i];
        u * u * u + u * v * v - p.a * u * u - p.mu * v * v + u * r * r
    }))
}

/// Largest deviation of each invariant from its first record.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub i1_abs: f64,
    pub i2_abs: f64,
    pub e_abs: f64,
    pub h_abs: f64,
}

impl Drift {
    pub fn of(records: &[ConservedRecord]) -> Self {
        let Some(first) = records.first() else {
            return Self::default();
        };
        records.iter().fold(Self::default(), |d, r| Self {
            i1_abs: d.i1_abs.max((r.i1 - first.i1).abs()),
            i2_abs: d.i2_abs.max((r.i2 - first.i2).abs()),
            e_abs: d.e_abs.max((r.e - first.e).abs()),
            h_abs: d.h_abs.max((r.h - first.h).abs()),
        })
    }
}

/// Max-norm gap between two runs, for both unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SupDiff {
    pub u: f64,
    pub rho: f64,
}

impl SupDiff {
    pub fn merge(self, other: SupDiff) -> SupDiff {
        SupDiff {
            u: self.u.max(other.u),
            rho: self.rho.max(other.rho),
        }
    }

    /// Gap between a coarse state and a fine state on the twice-refined grid,
    /// over coincident nodes (coarse `i` is fine `2i`).
    pub fn space(coarse: &State, fine: &State) -> Result<SupDiff, DiagnosticsError> {
        let cg = coarse.grid;
        let fg = fine.grid;
        if fg.len() != 2 * cg.len() || fg.xmin() != cg.xmin() || fg.xmax() != cg.xmax() {
            return Err(DiagnosticsError::Misaligned(format!(
                "fine grid {fg} is not the refinement of {cg}"
            )));
        }
        let mut d = SupDiff::default();
        for i in 0..cg.len() {
            d.u = d.u.max((coarse.u[i] - fine.u[2 * i]).abs());
            d.rho = d.rho.max((coarse.rho[i] - fine.rho[2 * i]).abs());
        }
        Ok(d)
    }

    /// Gap between two states on the same grid.
    pub fn same_grid(a: &State, b: &State) -> Result<SupDiff, DiagnosticsError> {
        if a.grid != b.grid {
            return Err(DiagnosticsError::Misaligned(format!(
                "grids differ: {} vs {}",
                a.grid, b.grid
            )));
        }
        let mut d = SupDiff::default();
        for i in 0..a.grid.len() {
            d.u = d.u.max((a.u[i] - b.u[i]).abs());
            d.rho = d.rho.max((a.rho[i] - b.rho[i]).abs());
        }
        Ok(d)
    }
}

fn same_time(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= 1e-9 * scale.max(1.0)
}

/// `|F(h)|_inf`: max over stored levels `n >= 1` and coincident nodes of
/// `|w_i^n(h) - w_{2i}^n(h/2)|`. Both runs must share `tau` and store the
/// same levels.
pub fn sup_diff_space(coarse: &Trajectory, fine: &Trajectory) -> Result<SupDiff, DiagnosticsError> {
    if coarse.tau != fine.tau {
        return Err(DiagnosticsError::Misaligned(format!(
            "time steps differ: {} vs {}",
            coarse.tau, fine.tau
        )));
    }
    let mut acc = SupDiff::default();
    let mut compared = 0;
    for (n, c) in coarse.levels.iter().filter(|(n, _)| *n >= 1) {
        let f = fine
            .level(*n)
            .ok_or_else(|| DiagnosticsError::Misaligned(format!("fine run lacks level {n}")))?;
        acc = acc.merge(SupDiff::space(c, f)?);
        compared += 1;
    }
    if compared == 0 && coarse.steps() > 0 {
        return Err(DiagnosticsError::Misaligned("no stored levels to compare".into()));
    }
    Ok(acc)
}

/// `|G(tau)|_inf`: max over stored levels `n >= 1` of `|w_i^n(tau) - w_i^{2n}(tau/2)|`.
pub fn sup_diff_time(coarse: &Trajectory, fine: &Trajectory) -> Result<SupDiff, DiagnosticsError> {
    if coarse.grid != fine.grid {
        return Err(DiagnosticsError::Misaligned(format!(
            "grids differ: {} vs {}",
            coarse.grid, fine.grid
        )));
    }
    if !same_time(coarse.tau, 2.0 * fine.tau, coarse.tau) {
        return Err(DiagnosticsError::Misaligned(format!(
            "fine step {} is not half of {}",
            fine.tau, coarse.tau
        )));
    }
    let mut acc = SupDiff::default();
    let mut compared = 0;
    for (n, c) in coarse.levels.iter().filter(|(n, _)| *n >= 1) {
        let f = fine.level(2 * n).ok_or_else(|| {
            DiagnosticsError::Misaligned(format!("fine run lacks level {}", 2 * n))
        })?;
        acc = acc.merge(SupDiff::same_grid(c, f)?);
        compared += 1;
    }
    if compared == 0 && coarse.steps() > 0 {
        return Err(DiagnosticsError::Misaligned("no stored levels to compare".into()));
    }
    Ok(acc)
}

/// `log2(e_coarse / e_fine)`.
pub fn observed_order(e_coarse: f64, e_fine: f64) -> Result<f64, DiagnosticsError> {
    if !(e_coarse > 0.0 && e_fine > 0.0) {
        return Err(DiagnosticsError::NonPositiveError(e_coarse, e_fine));
    }
    Ok((e_coarse.ln() - e_fine.ln()) / std::f64::consts::LN_2)
}

/// One row of a convergence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    /// `M` for the space axis, `N` for the time axis.
    pub resolution: usize,
    pub error: f64,
    /// Absent on the first row, or when either error is zero.
    pub order: Option<f64>,
}

/// Rows with orders filled in from consecutive errors.
pub fn convergence_rows(resolutions: &[usize], errors: &[f64]) -> Vec<ConvergenceRow> {
    resolutions
        .iter()
        .zip(errors)
        .enumerate()
        .map(|(k, (&resolution, &error))| ConvergenceRow {
            resolution,
            error,
            order: (k > 0)
                .then(|| observed_order(errors[k - 1], error).ok())
                .flatten(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::PeriodicGrid;

    #[test]
    fn order_examples() {
        assert!((observed_order(4.0e-3, 1.0e-3).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(observed_order(3.0e-5, 3.0e-5).unwrap(), 0.0);
        let o = observed_order(9.0981e-04, 2.2919e-04).unwrap();
        assert!((o - 1.9890).abs() < 5e-5, "{o}");
        assert!(observed_order(0.0, 1.0).is_err());
        assert!(observed_order(1.0, -1.0).is_err());
    }

    #[test]
    fn rows_skip_orders_for_zero_errors() {
        let rows = convergence_rows(&[10, 20, 40], &[4e-2, 0.0, 1e-3]);
        assert_eq!(rows[0].order, None);
        assert_eq!(rows[1].order, None);
        assert_eq!(rows[2].order, None);
        let rows = convergence_rows(&[10, 20], &[4e-2, 1e-2]);
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn unit_density_mass() {
        let g = PeriodicGrid::new(0.0, 1.0, 10).unwrap();
        let s = State::new(g, 0.0, g.zeros(), g.constant(1.0));
        assert_eq!(mass(&s), 10.0);
        assert_eq!(momentum_total(&s, &Parameters::camassa_holm()), 0.0);
        let z = State::zero(g);
        let p = Parameters::new(0.3, 0.2, 1.0, 0.1);
        assert_eq!(energy(&z, &p), 0.0);
        assert_eq!(hamiltonian_h(&z, &p), 0.0);
    }

    #[test]
    fn compensated_matches_sequential_on_benign_sums() {
        let g = PeriodicGrid::new(0.0, 1.0, 64).unwrap();
        let s = State::new(g, 0.0, g.sample(|x| x.sin()), g.sample(|x| 1.0 + x * x));
        let a = mass_with(&s, Summation::Sequential);
        let b = mass_with(&s, Summation::Compensated);
        assert!((a - b).abs() <= 1e-13 * a);
        assert_eq!(Summation::Compensated.sum([1e16, 1.0, -1e16].into_iter()), 1.0);
    }

    #[test]
    fn drift_tracks_largest_deviation() {
        let rec = |n, e| ConservedRecord { n, t: n as f64, i1: 1.0, i2: 0.0, e, h: 0.0 };
        let d = Drift::of(&[rec(0, 2.0), rec(1, 2.5), rec(2, 1.0)]);
        assert_eq!(d.e_abs, 1.0);
        assert_eq!(d.i1_abs, 0.0);
    }
}
