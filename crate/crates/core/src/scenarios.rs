//! Initial data and the named presets used by the CLI and the demo.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::mesh::{GridFunction, PeriodicGrid};
use crate::scheme::{Parameters, SolverConfig, State};

/// Shape of the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    /// `u = 0`, `rho = rho_bg + tanh(x + a) - tanh(x - a)`.
    DamBreak { a: f64 },
    /// Sum of periodic cosh peakons; `rho = rho_bg`.
    ThreePeakon {
        amplitudes: Vec<f64>,
        positions: Vec<f64>,
    },
    /// `u = exp(-|x - x0|)` with the periodic distance.
    SinglePeakon { x0: f64 },
    /// Three sinh branches on `[0, 1)`, jumps at `x = 1/4` and `x = 3/4`.
    PiecewiseSinh,
    /// `u = p1 exp(-|x - x1|) + p2 exp(-|x - x2|)`.
    TwoPeakon { p1: f64, p2: f64, x1: f64, x2: f64 },
    /// `u = 0`, `rho = rho_bg`.
    Quiescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub initial: InitialData,
    pub xmin: f64,
    pub xmax: f64,
    pub rho_background: f64,
    pub params: Parameters,
}

// serde cannot combine `flatten` with `deny_unknown_fields`, so the shared
// keys are taken out first and whatever is left must fit `InitialData`
// exactly.
#[derive(Deserialize)]
struct RawSpec {
    xmin: f64,
    xmax: f64,
    rho_background: f64,
    params: Parameters,
    #[serde(flatten)]
    rest: serde_json::Map<String, serde_json::Value>,
}

impl TryFrom<RawSpec> for ScenarioSpec {
    type Error = String;
    fn try_from(raw: RawSpec) -> Result<Self, String> {
        let initial = serde_json::from_value(serde_json::Value::Object(raw.rest))
            .map_err(|e| e.to_string())?;
        Ok(Self {
            initial,
            xmin: raw.xmin,
            xmax: raw.xmax,
            rho_background: raw.rho_background,
            params: raw.params,
        })
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.xmin.is_finite() && self.xmax.is_finite() && self.xmax > self.xmin) {
            return Err(ScenarioError::Invalid(format!(
                "degenerate domain [{}, {}]",
                self.xmin, self.xmax
            )));
        }
        if let InitialData::ThreePeakon {
            amplitudes,
            positions,
        } = &self.initial
        {
            if amplitudes.len() != positions.len() {
                return Err(ScenarioError::Invalid(
                    "peakon amplitudes and positions differ in length".into(),
                ));
            }
        }
        if !self.rho_background.is_finite() {
            return Err(ScenarioError::Invalid("rho_background must be finite".into()));
        }
        self.params
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    pub fn grid(&self, nodes: usize) -> Result<PeriodicGrid, ScenarioError> {
        PeriodicGrid::new(self.xmin, self.xmax, nodes).map_err(|e| ScenarioError::Invalid(e.to_string()))
    }

    /// Initial state on `grid`, with `m = B u`.
    pub fn initial_state(&self, grid: &PeriodicGrid) -> State {
        let bg = self.rho_background;
        let l = grid.length();
        let (u, rho) = match &self.initial {
            InitialData::DamBreak { a } => (grid.zeros(), grid.sample(|x| dam_break_height(*a, bg, x))),
            InitialData::ThreePeakon {
                amplitudes,
                positions,
            } => (
                grid.sample(|x| {
                    amplitudes
                        .iter()
                        .zip(positions)
                        .map(|(c, xc)| periodic_peakon(*c, *xc, l, x))
                        .sum()
                }),
                grid.constant(bg),
            ),
            InitialData::SinglePeakon { x0 } => (
                grid.sample(|x| (-periodic_distance(x, *x0, l)).exp()),
                grid.constant(bg),
            ),
            InitialData::PiecewiseSinh => (grid.sample(piecewise_sinh), grid.constant(bg)),
            InitialData::TwoPeakon { p1, p2, x1, x2 } => (
                grid.sample(|x| {
                    p1 * (-periodic_distance(x, *x1, l)).exp()
                        + p2 * (-periodic_distance(x, *x2, l)).exp()
                }),
                grid.constant(bg),
            ),
            InitialData::Quiescent => (grid.zeros(), grid.constant(bg)),
        };
        State::new(*grid, 0.0, u, rho)
    }
}

/// `x - center` reduced into `[-L/2, L/2)`.
pub fn periodic_offset(x: f64, center: f64, l: f64) -> f64 {
    (x - center + 0.5 * l).rem_euclid(l) - 0.5 * l
}

/// Distance from `x` to `center` on a circle of length `L`.
pub fn periodic_distance(x: f64, center: f64, l: f64) -> f64 {
    periodic_offset(x, center, l).abs()
}

fn dam_break_height(a: f64, background: f64, x: f64) -> f64 {
    background + ((x + a).tanh() - (x - a).tanh())
}

/// Two-branch periodic cosh profile `c cosh(x - x_c) / cosh(L/2)`, with the
/// offset reduced into `[-L/2, L/2)` first. The value is `c` at offset
/// `+-L/2` (the kink) and smallest at `x_c`.
pub fn periodic_peakon(c: f64, x_center: f64, l: f64, x: f64) -> f64 {
    let d = periodic_offset(x, x_center, l);
    let scale = c / (0.5 * l).cosh();
    if d.abs() <= 0.5 * l {
        scale * d.cosh()
    } else {
        scale * (l - d).cosh()
    }
}

/// Piecewise sinh velocity on `[0, 1)`; closed at `1/4` and `3/4` from the left.
pub fn piecewise_sinh(x: f64) -> f64 {
    let s = 1.0 / (2.0 * 0.25_f64.sinh());
    if x <= 0.25 {
        s * x.sinh()
    } else if x <= 0.75 {
        (x - 0.5).sinh() / (-0.5_f64).sinh()
    } else {
        s * (x - 1.0).sinh()
    }
}

/// Dam break: `u = 0`, `rho = 1 + tanh(x + a) - tanh(x - a)`.
pub fn dam_break_init(a: f64, grid: &PeriodicGrid) -> State {
    State::new(*grid, 0.0, grid.zeros(), grid.sample(|x| dam_break_height(a, 1.0, x)))
}

/// Three-peakon CH data on `[0, 30]`: `c = (2, 1, 0.8)`, `x = (-5, -3, -1)`, `rho = 0`.
pub fn three_peakon_init(grid: &PeriodicGrid) -> State {
    three_peakon_spec(grid.xmin(), grid.xmax()).initial_state(grid)
}

/// `u = exp(-|x - x0|)`, `rho = 0.5`.
pub fn single_peakon_init(x0: f64, grid: &PeriodicGrid) -> State {
    let l = grid.length();
    State::new(
        *grid,
        0.0,
        grid.sample(|x| (-periodic_distance(x, x0, l)).exp()),
        grid.constant(0.5),
    )
}

/// Piecewise sinh velocity, `rho = 1.5`.
pub fn piecewise_sinh_init(grid: &PeriodicGrid) -> State {
    State::new(*grid, 0.0, grid.sample(piecewise_sinh), grid.constant(1.5))
}

/// Peakon/anti-peakon pair, `rho = 0.5`.
pub fn two_peakon_init(p1: f64, p2: f64, x1: f64, x2: f64, grid: &PeriodicGrid) -> State {
    let l = grid.length();
    let u: GridFunction = grid.sample(|x| {
        p1 * (-periodic_distance(x, x1, l)).exp() + p2 * (-periodic_distance(x, x2, l)).exp()
    });
    State::new(*grid, 0.0, u, grid.constant(0.5))
}

fn three_peakon_spec(xmin: f64, xmax: f64) -> ScenarioSpec {
    ScenarioSpec {
        initial: InitialData::ThreePeakon {
            amplitudes: vec![2.0, 1.0, 0.8],
            positions: vec![-5.0, -3.0, -1.0],
        },
        xmin,
        xmax,
        rho_background: 0.0,
        params: Parameters::camassa_holm(),
    }
}

/// Parameter cases of the dam-break study.
pub mod smooth_case {
    use crate::scheme::Parameters;
    pub const I: Parameters = Parameters::new(0.0, 0.0, 1.0, 0.0);
    pub const II: Parameters = Parameters::new(0.0, 0.0, 1.0, 0.0);
    pub const III: Parameters = Parameters::new(0.1, 0.1, 1.0, 73e-6);
    pub const IV: Parameters = Parameters::new(1.0, 1.0, 1.0, 73e-6);
}

/// Parameter cases of the peakon studies.
pub mod nonsmooth_case {
    use crate::scheme::Parameters;
    pub const I: Parameters = Parameters::new(0.0, 0.0, 1.0, 0.0);
    pub const II: Parameters = Parameters::new(0.0, 0.0, 1.0, 0.1);
    pub const III: Parameters = Parameters::new(1.0, 1.0, 1.0, 73e-6);
}

/// A named, fully specified run.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub scenario: ScenarioSpec,
    pub grid_points: usize,
    pub tau: f64,
    pub t_end: f64,
    pub viscosity: bool,
    pub epsilon: f64,
    pub snapshot_times: Vec<f64>,
}

impl Preset {
    pub fn solver(&self) -> SolverConfig {
        let cfg = SolverConfig::new(self.tau);
        if self.viscosity {
            cfg.with_viscosity(self.epsilon)
        } else {
            cfg
        }
    }

    pub fn grid(&self) -> PeriodicGrid {
        self.scenario
            .grid(self.grid_points)
            .expect("catalog presets have valid grids")
    }

    pub fn initial_state(&self) -> State {
        self.scenario.initial_state(&self.grid())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.tau).round() as usize
    }
}

fn dam(a: f64, xmin: f64, xmax: f64, params: Parameters) -> ScenarioSpec {
    ScenarioSpec {
        initial: InitialData::DamBreak { a },
        xmin,
        xmax,
        rho_background: 1.0,
        params,
    }
}

fn on(initial: InitialData, xmin: f64, xmax: f64, rho: f64, params: Parameters) -> ScenarioSpec {
    ScenarioSpec {
        initial,
        xmin,
        xmax,
        rho_background: rho,
        params,
    }
}

fn range(t_end: f64, dt: f64) -> Vec<f64> {
    let n = (t_end / dt).round() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

#[allow(clippy::too_many_arguments)]
fn entry(
    name: &'static str,
    description: &'static str,
    scenario: ScenarioSpec,
    grid_points: usize,
    tau: f64,
    t_end: f64,
    viscosity: bool,
    snapshot_times: Vec<f64>,
) -> Preset {
    Preset {
        name,
        description,
        scenario,
        grid_points,
        tau,
        t_end,
        viscosity,
        epsilon: SolverConfig::DEFAULT_EPSILON,
        snapshot_times,
    }
}

/// The full preset catalog, in display order.
pub fn catalog() -> Vec<Preset> {
    use nonsmooth_case as ns;
    use smooth_case as sm;
    let wide = 12.0 * PI;
    let single = |p| on(InitialData::SinglePeakon { x0: 10.0 }, 0.0, 20.0, 0.5, p);
    let sinh = |p| on(InitialData::PiecewiseSinh, 0.0, 1.0, 1.5, p);
    let pair = |p| {
        on(
            InitialData::TwoPeakon { p1: 1.0, p2: -1.0, x1: -5.0, x2: 5.0 },
            -20.0,
            20.0,
            0.5,
            p,
        )
    };
    let pair_times = vec![0.0, 1.0, 3.0, 5.0, 6.0, 8.0, 10.0];
    vec![
        entry("smooth-I", "dam break, case I, convergence base (M=100, N=100, T=20)",
            dam(0.1, -6.0, 6.0, sm::I), 100, 0.2, 20.0, false, vec![0.0, 20.0]),
        entry("smooth-II", "dam break, case II, convergence base (M=100, N=100, T=2)",
            dam(4.0, -wide, wide, sm::II), 100, 0.02, 2.0, false, vec![0.0, 2.0]),
        entry("smooth-III", "dam break, case III, convergence base (M=100, N=100, T=1)",
            dam(0.1, -8.0, 8.0, sm::III), 100, 0.01, 1.0, false, vec![0.0, 1.0]),
        entry("smooth-IV", "dam break, case IV, convergence base (M=100, N=100, T=2)",
            dam(4.0, -wide, wide, sm::IV), 100, 0.02, 2.0, false, vec![0.0, 2.0]),
        entry("smooth-I-table5", "dam break, case I, conservation run (h=0.06, tau=0.01)",
            dam(0.1, -6.0, 6.0, sm::I), 200, 0.01, 10.0, false, range(10.0, 2.0)),
        entry("smooth-II-table5", "dam break, case II, conservation run (M=150, tau=0.005)",
            dam(4.0, -wide, wide, sm::II), 150, 0.005, 10.0, false, range(10.0, 2.0)),
        entry("smooth-III-table5", "dam break, case III, conservation run (h=0.16, tau=0.0025)",
            dam(0.1, -8.0, 8.0, sm::III), 100, 0.0025, 5.0, false, range(5.0, 1.0)),
        entry("smooth-IV-table5", "dam break, case IV, conservation run (M=170, tau=0.0025)",
            dam(4.0, -wide, wide, sm::IV), 170, 0.0025, 5.0, false, range(5.0, 1.0)),
        entry("smooth-I-fig22", "dam break, case I, H monitoring (h=0.5, tau=0.005)",
            dam(0.1, -6.0, 6.0, sm::I), 24, 0.005, 10.0, false, range(10.0, 1.0)),
        entry("smooth-II-fig22", "dam break, case II, H monitoring (M=150, tau=0.005)",
            dam(4.0, -wide, wide, sm::II), 150, 0.005, 10.0, false, range(10.0, 1.0)),
        entry("three-peakon", "three-peakon CH interaction (M=2048, tau=1e-4)",
            three_peakon_spec(0.0, 30.0), 2048, 1e-4, 10.0, true,
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 10.0]),
        entry("single-peakon-I", "single peakon, case I (h=0.025, tau=0.0005)",
            single(ns::I), 800, 0.0005, 5.0, true, vec![0.0, 1.0, 3.0, 5.0]),
        entry("single-peakon-III", "single peakon, case III (h=0.025, tau=0.0005)",
            single(ns::III), 800, 0.0005, 5.0, true, vec![0.0, 1.0, 3.0, 5.0]),
        entry("sinh-I", "piecewise sinh data, case I (h=0.002, tau=0.001)",
            sinh(ns::I), 500, 0.001, 1.0, true, range(1.0, 0.25)),
        entry("sinh-II", "piecewise sinh data, case II (h=0.002, tau=0.0005)",
            sinh(ns::II), 500, 0.0005, 1.0, true, range(1.0, 0.25)),
        entry("sinh-I-fig13", "piecewise sinh data, case I, invariants (h=0.02, tau=0.0005)",
            sinh(ns::I), 50, 0.0005, 1.0, true, range(1.0, 0.25)),
        entry("sinh-II-fig13", "piecewise sinh data, case II, invariants (h=0.02, tau=0.0005)",
            sinh(ns::II), 50, 0.0005, 1.0, true, range(1.0, 0.25)),
        entry("sinh-I-fig22", "piecewise sinh data, case I, H monitoring (h=0.2, tau=0.0025)",
            sinh(ns::I), 5, 0.0025, 1.0, true, range(1.0, 0.25)),
        entry("two-peakon-I", "peakon/anti-peakon, case I (h=0.05, tau=0.0005)",
            pair(ns::I), 800, 0.0005, 10.0, true, pair_times.clone()),
        entry("two-peakon-III", "peakon/anti-peakon, case III (h=0.05, tau=0.0005)",
            pair(ns::III), 800, 0.0005, 10.0, true, pair_times),
        entry("two-peakon-I-long", "peakon/anti-peakon, case I, to t=35",
            pair(ns::I), 800, 0.0005, 35.0, true, range(35.0, 5.0)),
        entry("two-peakon-III-long", "peakon/anti-peakon, case III, to t=35",
            pair(ns::III), 800, 0.0005, 35.0, true, range(35.0, 5.0)),
        entry("two-peakon-I-fig22", "peakon/anti-peakon, case I, H monitoring (h=0.2, tau=0.0025)",
            pair(ns::I), 200, 0.0025, 10.0, true, range(10.0, 1.0)),
        entry("zero", "quiescent zero state",
            on(InitialData::Quiescent, 0.0, 1.0, 0.0, sm::I), 16, 0.1, 1.0, false, vec![0.0, 1.0]),
    ]
}

/// Short aliases mapping a bare parameter case to its example.
const ALIASES: &[(&str, &str)] = &[
    ("nonsmooth-I", "single-peakon-I"),
    ("nonsmooth-II", "sinh-II"),
    ("nonsmooth-III", "single-peakon-III"),
];

pub fn preset_names() -> Vec<&'static str> {
    catalog()
        .iter()
        .map(|p| p.name)
        .chain(ALIASES.iter().map(|(a, _)| *a))
        .collect()
}

/// Looks up a preset (or alias) by name.
pub fn preset(name: &str) -> Result<Preset, ScenarioError> {
    let target = ALIASES
        .iter()
        .find(|(alias, _)| *alias == name)
        .map(|(_, t)| *t)
        .unwrap_or(name);
    catalog()
        .into_iter()
        .find(|p| p.name == target)
        .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))
}
