//! Browser bindings: step a preset interactively, read its invariants, and
//! look at the spectrum of the Helmholtz operator.
//!
//! Build with `wasm-pack build crates/wasm-demo --target web --out-dir www/pkg`
//! and serve `www/`.

use r2ch::diagnostics::{energy, hamiltonian_h, mass, momentum_total};
use r2ch::scenarios::{preset, preset_names as catalog_names};
use r2ch::{Helmholtz, Integrator, PeriodicGrid, State};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct Simulation {
    name: String,
    integrator: Integrator,
    state: State,
    steps: usize,
    t_end: f64,
    last_iterations: usize,
}

impl Simulation {
    pub fn from_preset(name: &str) -> Result<Self, String> {
        let p = preset(name).map_err(|e| e.to_string())?;
        let integrator =
            Integrator::new(p.grid(), p.scenario.params, p.solver()).map_err(|e| e.to_string())?;
        Ok(Self {
            name: name.to_string(),
            integrator,
            state: p.initial_state(),
            steps: 0,
            t_end: p.t_end,
            last_iterations: 0,
        })
    }

    /// Advances up to `count` steps, stopping early at the preset's end time.
    pub fn try_advance(&mut self, count: usize) -> Result<usize, String> {
        let tau = self.integrator.config().tau;
        let mut done = 0;
        while done < count && self.state.t + 0.5 * tau < self.t_end {
            let (next, report) = self.integrator.step(&self.state).map_err(|e| e.to_string())?;
            self.state = next;
            self.steps += 1;
            self.last_iterations = report.iterations;
            done += 1;
        }
        Ok(done)
    }

    pub fn state(&self) -> &State {
        &self.state
    }
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str) -> Result<Simulation, JsError> {
        Self::from_preset(preset).map_err(|e| JsError::new(&e))
    }

    /// Takes up to `count` steps; returns how many were taken.
    pub fn advance(&mut self, count: usize) -> Result<usize, JsError> {
        self.try_advance(count).map_err(|e| JsError::new(&e))
    }

    pub fn reset(&mut self) -> Result<(), JsError> {
        *self = Self::new(&self.name.clone())?;
        Ok(())
    }

    #[wasm_bindgen(getter)]
    pub fn time(&self) -> f64 {
        self.state.t
    }

    #[wasm_bindgen(getter)]
    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[wasm_bindgen(getter)]
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    pub fn x(&self) -> Vec<f64> {
        self.state.grid.nodes()
    }

    pub fn u(&self) -> Vec<f64> {
        self.state.u.0.clone()
    }

    pub fn rho(&self) -> Vec<f64> {
        self.state.rho.0.clone()
    }

    /// `[I1, I2, E, H]` at the current level.
    pub fn invariants(&self) -> Vec<f64> {
        let p = self.integrator.params();
        vec![
            mass(&self.state),
            momentum_total(&self.state, p),
            energy(&self.state, p),
            hamiltonian_h(&self.state, p),
        ]
    }
}

/// Preset names, one per line.
#[wasm_bindgen]
pub fn preset_names() -> String {
    catalog_names().join("\n")
}

/// Eigenvalues `1 + sin^2(2 pi k / M) / h^2`, k = 0..M, of the discrete
/// Helmholtz operator on `M` nodes over a period of `length`.
#[wasm_bindgen]
pub fn helmholtz_spectrum(nodes: usize, length: f64) -> Result<Vec<f64>, JsError> {
    spectrum(nodes, length).map_err(|e| JsError::new(&e))
}

pub fn spectrum(nodes: usize, length: f64) -> Result<Vec<f64>, String> {
    let grid = PeriodicGrid::new(0.0, length, nodes).map_err(|e| e.to_string())?;
    let hz = Helmholtz::new(grid);
    Ok((0..nodes).map(|k| hz.eigenvalue(k)).collect())
}
