//! Browser bindings: the initial temperature curve, the evolving profile next
//! to its linear heat-kernel approximation, and a perturbed wave decaying
//! onto the profile.

use contact_wave::diagnostics::norms;
use contact_wave::lagrangian::{make_initial, perturbation_of, CoupledStepper, InitialData};
use contact_wave::profile::{
    log_derivative_norms, theta0, ProfileField, Theta2Oracle, ThetaStepper,
};
use contact_wave::{Delta0, Grid, PhysParams};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn params(theta_minus: f64, delta0_reciprocal: u32) -> Result<PhysParams, JsError> {
    let p = PhysParams {
        theta_minus,
        delta0: Delta0::from_reciprocal(delta0_reciprocal).map_err(js)?,
        ..PhysParams::default()
    };
    p.validate().map_err(js)?;
    Ok(p)
}

/// Node positions of the mesh `[-L, L]` with `n` nodes.
#[wasm_bindgen]
pub fn nodes(half_width: f64, n: usize) -> Result<Vec<f64>, JsError> {
    Ok(Grid::new(half_width, n).map_err(js)?.nodes())
}

/// Initial temperature `Θ₀` sampled on the mesh.
#[wasm_bindgen]
pub fn theta0_curve(
    theta_minus: f64,
    delta0_reciprocal: u32,
    half_width: f64,
    n: usize,
) -> Result<Vec<f64>, JsError> {
    let p = params(theta_minus, delta0_reciprocal)?;
    let grid = Grid::new(half_width, n).map_err(js)?;
    Ok(grid.nodes().iter().map(|&x| theta0(x, &p)).collect())
}

/// Temperature profile evolved from `Θ₀`.
#[wasm_bindgen]
pub struct ProfileDemo {
    params: PhysParams,
    grid: Grid,
    stepper: ThetaStepper,
    oracle: Theta2Oracle,
}

#[wasm_bindgen]
impl ProfileDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        theta_minus: f64,
        delta0_reciprocal: u32,
        half_width: f64,
        n: usize,
    ) -> Result<ProfileDemo, JsError> {
        let params = params(theta_minus, delta0_reciprocal)?;
        let grid = Grid::new(half_width, n).map_err(js)?;
        let field = ProfileField::initial(&params, &grid);
        Ok(Self {
            stepper: ThetaStepper::from_field(&field, &params, &grid),
            oracle: Theta2Oracle::new(&params, 8),
            params,
            grid,
        })
    }

    pub fn t(&self) -> f64 {
        self.stepper.t
    }

    /// Steps until `target`, landing on it exactly.
    pub fn advance_to(&mut self, target: f64) -> Result<(), JsError> {
        while self.stepper.t < target {
            let cap =
                contact_wave::profile::theta_dt_cap(&self.stepper.theta, &self.params, &self.grid);
            let dt = cap.min(target - self.stepper.t);
            self.stepper.step_adaptive(dt, 20).map_err(js)?;
        }
        Ok(())
    }

    pub fn theta(&self) -> Vec<f64> {
        self.stepper.theta.clone()
    }

    /// Linear heat-kernel approximation at the current time.
    pub fn linear(&self) -> Vec<f64> {
        let t = self.stepper.t.max(1e-3);
        self.oracle.sample(&self.grid, t)
    }

    /// Squared `L²` norms of the first three derivatives of `ln Θ`.
    pub fn log_norms(&self) -> Vec<f64> {
        log_derivative_norms(&self.stepper.theta, self.grid.dx()).to_vec()
    }
}

/// Perturbed flow around the evolving profile.
#[wasm_bindgen]
pub struct WaveDemo {
    grid: Grid,
    run: CoupledStepper,
    history: Vec<f64>,
}

#[wasm_bindgen]
impl WaveDemo {
    /// Gaussian bump of the given amplitude in all three components.
    #[wasm_bindgen(constructor)]
    pub fn new(
        theta_minus: f64,
        amplitude: f64,
        width: f64,
        half_width: f64,
        n: usize,
    ) -> Result<WaveDemo, JsError> {
        let params = params(theta_minus, 9)?;
        let grid = Grid::new(half_width, n).map_err(js)?;
        let profile = ProfileField::initial(&params, &grid);
        let spec = InitialData::gaussian([amplitude; 3], 0.0, width);
        let state = make_initial(&profile, &spec, &params, &grid).map_err(js)?;
        let mut demo = Self {
            run: CoupledStepper::new(&state, &profile, &params, &grid),
            grid,
            history: Vec::new(),
        };
        demo.record()?;
        Ok(demo)
    }

    fn record(&mut self) -> Result<(), JsError> {
        let linf = norms(&self.perturbation()?, &self.grid).linf;
        self.history.push(self.run.t());
        self.history.push(linf);
        Ok(())
    }

    fn perturbation(&self) -> Result<contact_wave::lagrangian::Perturbation, JsError> {
        perturbation_of(&self.run.state(), &self.run.profile_field(), 0.0).map_err(js)
    }

    pub fn t(&self) -> f64 {
        self.run.t()
    }

    /// Advances to `target`; returns the L-infinity size of the perturbation.
    pub fn advance_to(&mut self, target: f64) -> Result<f64, JsError> {
        while !self.run.step_towards(target).map_err(js)? {}
        self.record()?;
        Ok(self.history[self.history.len() - 1])
    }

    /// `(φ, ψ, ζ)` concatenated.
    pub fn perturbation_fields(&self) -> Result<Vec<f64>, JsError> {
        let p = self.perturbation()?;
        Ok([p.phi, p.psi, p.zeta].concat())
    }

    /// Interleaved `(t, ‖·‖_∞)` pairs recorded so far.
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }
}
