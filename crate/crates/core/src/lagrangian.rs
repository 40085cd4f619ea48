//! Full viscous heat-conducting flow `(v, u, θ)` in Lagrangian coordinates.
//!
//! The system `v_t = u_x`, `u_t + p_x = μ(u_x/v)_x`,
//! `C_v θ_t + p u_x = κ(θ_x/v)_x + μ u_x²/v` with `p = Rθ/v` is advanced in
//! conservation form: specific volume, velocity and total energy
//! `E = C_v θ + u²/2` are updated from face fluxes
//!
//! ```text
//! mass      u_f
//! momentum  σ_f = −p_f + μ (u_{j+1} − u_j) / (dx v_f)
//! energy    σ_f u_f + κ (θ_{j+1} − θ_j) / (dx v_f)
//! ```
//!
//! with face averages `(·)_f = ((·)_j + (·)_{j+1})/2`. Interior nodes see
//! centered second-order differences; the two end nodes stay pinned to the
//! far-field states. Time stepping is Heun's method.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::FlowError;
use crate::numerics;
use crate::params::{Grid, PhysParams};
use crate::profile::{self, ProfileField, ThetaStepper};

/// Full solution at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
}

impl FlowField {
    /// Uniform state `(v, u, θ)` on the whole grid.
    pub fn uniform(t: f64, v: f64, u: f64, theta: f64, grid: &Grid) -> Self {
        let n = grid.len();
        Self {
            t,
            v: vec![v; n],
            u: vec![u; n],
            theta: vec![theta; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn pressure(&self, params: &PhysParams) -> Vec<f64> {
        self.theta
            .iter()
            .zip(&self.v)
            .map(|(t, v)| params.gas_constant * t / v)
            .collect()
    }
}

/// Shape of the initial perturbation added to the profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationShape {
    None,
    /// `a · exp(−((x−c)/w)²)`.
    Gaussian,
    /// `a · (1 + cos(π(x−c)/w))/2` on `|x−c| < w`.
    CosineBump,
    /// Seeded sum of four Gaussians per component, scaled to unit peak.
    RandomSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub shape: PerturbationShape,
    /// Amplitudes of `(φ₀, ψ₀, ζ₀)`.
    pub amplitudes: [f64; 3],
    pub center: f64,
    pub width: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InitialData {
    fn default() -> Self {
        Self::none()
    }
}

impl InitialData {
    pub fn none() -> Self {
        Self {
            shape: PerturbationShape::None,
            amplitudes: [0.0; 3],
            center: 0.0,
            width: 1.0,
            seed: 0,
        }
    }

    pub fn gaussian(amplitudes: [f64; 3], center: f64, width: f64) -> Self {
        Self {
            shape: PerturbationShape::Gaussian,
            amplitudes,
            center,
            width,
            seed: 0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            amplitudes: self.amplitudes.map(|a| a * factor),
            ..*self
        }
    }

    /// Largest distance from the center at which the perturbation is not negligible.
    pub fn reach(&self) -> f64 {
        match self.shape {
            PerturbationShape::None => 0.0,
            PerturbationShape::Gaussian => 6.0 * self.width,
            PerturbationShape::CosineBump => self.width,
            PerturbationShape::RandomSmooth => 7.0 * self.width,
        }
    }

    /// `(φ₀, ψ₀, ζ₀)` sampled on the grid.
    pub fn sample(&self, grid: &Grid) -> [Vec<f64>; 3] {
        let xs = grid.nodes();
        let (c, w) = (self.center, self.width);
        match self.shape {
            PerturbationShape::None => [
                vec![0.0; xs.len()],
                vec![0.0; xs.len()],
                vec![0.0; xs.len()],
            ],
            PerturbationShape::Gaussian => self.amplitudes.map(|a| {
                xs.iter()
                    .map(|&x| a * (-((x - c) / w).powi(2)).exp())
                    .collect()
            }),
            PerturbationShape::CosineBump => self.amplitudes.map(|a| {
                xs.iter()
                    .map(|&x| {
                        let s = (x - c) / w;
                        if s.abs() < 1.0 {
                            a * 0.5 * (1.0 + (std::f64::consts::PI * s).cos())
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }),
            PerturbationShape::RandomSmooth => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                self.amplitudes.map(|a| {
                    let bumps: Vec<(f64, f64, f64)> = (0..4)
                        .map(|_| {
                            let center = c + w * rng.gen_range(-1.0..1.0);
                            let width = w * rng.gen_range(0.5..1.0);
                            let sign = rng.gen_range(-1.0..1.0);
                            (center, width, sign)
                        })
                        .collect();
                    let raw: Vec<f64> = xs
                        .iter()
                        .map(|&x| {
                            bumps
                                .iter()
                                .map(|(bc, bw, s)| s * (-((x - bc) / bw).powi(2)).exp())
                                .sum()
                        })
                        .collect();
                    let peak = numerics::max_abs(&raw);
                    if peak == 0.0 {
                        raw
                    } else {
                        raw.into_iter().map(|r| a * r / peak).collect()
                    }
                })
            }
        }
    }
}

/// Profile plus perturbation; the end nodes are set to the far-field states.
pub fn make_initial(
    profile0: &ProfileField,
    spec: &InitialData,
    params: &PhysParams,
    grid: &Grid,
) -> Result<FlowField, FlowError> {
    let [phi, psi, zeta] = spec.sample(grid);
    let n = grid.len();
    let edge = phi[0]
        .abs()
        .max(phi[n - 1].abs())
        .max(psi[0].abs().max(psi[n - 1].abs()))
        .max(zeta[0].abs().max(zeta[n - 1].abs()));
    if edge > 1e-12 {
        return Err(FlowError::InvalidInitialData(format!(
            "perturbation does not vanish at the domain ends (|value| = {edge:.3e})"
        )));
    }
    let mut v: Vec<f64> = profile0.v.iter().zip(&phi).map(|(a, b)| a + b).collect();
    let mut u: Vec<f64> = profile0.u.iter().zip(&psi).map(|(a, b)| a + b).collect();
    let mut theta: Vec<f64> = profile0
        .theta
        .iter()
        .zip(&zeta)
        .map(|(a, b)| a + b)
        .collect();
    for (j, (&vj, &tj)) in v.iter().zip(&theta).enumerate() {
        if !(vj > 0.0 && tj > 0.0) {
            return Err(FlowError::InvalidInitialData(format!(
                "non-positive state at x = {}: v = {vj}, theta = {tj}",
                grid.x(j)
            )));
        }
    }
    pin_flow(&mut v, &mut u, &mut theta, params);
    Ok(FlowField {
        t: profile0.t,
        v,
        u,
        theta,
    })
}

fn pin_flow(v: &mut [f64], u: &mut [f64], theta: &mut [f64], params: &PhysParams) {
    let n = v.len();
    v[0] = params.v_minus();
    v[n - 1] = params.v_plus;
    u[0] = 0.0;
    u[n - 1] = 0.0;
    theta[0] = params.theta_minus;
    theta[n - 1] = params.theta_plus;
}

/// Boundary-face fluxes of one right-hand-side evaluation, `(left, right)`.
#[derive(Debug, Clone, Copy, Default)]
struct FaceFluxes {
    mass: (f64, f64),
    momentum: (f64, f64),
    energy: (f64, f64),
}

/// Time-integrated boundary fluxes and the per-step mass identity check.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConservationAudit {
    /// `∫₀ᵗ (u_f(R) − u_f(L)) dτ`.
    pub mass_flux: f64,
    /// `∫₀ᵗ (σ_f(R) − σ_f(L)) dτ`.
    pub momentum_flux: f64,
    /// `∫₀ᵗ ((σu + q)_f(R) − (σu + q)_f(L)) dτ`.
    pub energy_flux: f64,
    /// Largest per-step `|Δ∫v − dt·flux| / ∫v`.
    pub max_mass_identity_error: f64,
}

/// Integrator state in conserved variables.
#[derive(Debug, Clone)]
pub struct FlowStepper {
    pub t: f64,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    /// Total energy density `C_v θ + u²/2`.
    pub energy: Vec<f64>,
    pub audit: ConservationAudit,
    params: PhysParams,
    dx: f64,
    scratch: Scratch,
}

#[derive(Debug, Clone)]
struct Scratch {
    rv: [Vec<f64>; 2],
    ru: [Vec<f64>; 2],
    re: [Vec<f64>; 2],
    v: Vec<f64>,
    u: Vec<f64>,
    e: Vec<f64>,
    theta: Vec<f64>,
    fluxes: [Vec<f64>; 3],
}

impl Scratch {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self {
            rv: [z(), z()],
            ru: [z(), z()],
            re: [z(), z()],
            v: z(),
            u: z(),
            e: z(),
            theta: z(),
            fluxes: [z(), z(), z()],
        }
    }
}

/// Semi-discrete right-hand side in flux form. `theta` is scratch.
#[allow(clippy::too_many_arguments)]
fn flow_rhs(
    params: &PhysParams,
    dx: f64,
    v: &[f64],
    u: &[f64],
    e: &[f64],
    theta: &mut [f64],
    fluxes: &mut [Vec<f64>; 3],
    rv: &mut [f64],
    ru: &mut [f64],
    re: &mut [f64],
) -> FaceFluxes {
    let n = v.len();
    let inv_cv = 1.0 / params.cv();
    for j in 0..n {
        theta[j] = (e[j] - 0.5 * u[j] * u[j]) * inv_cv;
    }
    let (r, mu, kappa) = (params.gas_constant, params.mu, params.kappa);
    let [fm, fp, fe] = fluxes;
    for j in 0..n - 1 {
        let vf = 0.5 * (v[j] + v[j + 1]);
        let uf = 0.5 * (u[j] + u[j + 1]);
        let pf = 0.5 * r * (theta[j] / v[j] + theta[j + 1] / v[j + 1]);
        let sigma = -pf + mu * (u[j + 1] - u[j]) / (dx * vf);
        let q = kappa * (theta[j + 1] - theta[j]) / (dx * vf);
        fm[j] = uf;
        fp[j] = sigma;
        fe[j] = sigma * uf + q;
    }
    let inv = 1.0 / dx;
    rv[0] = 0.0;
    ru[0] = 0.0;
    re[0] = 0.0;
    rv[n - 1] = 0.0;
    ru[n - 1] = 0.0;
    re[n - 1] = 0.0;
    for j in 1..n - 1 {
        rv[j] = (fm[j] - fm[j - 1]) * inv;
        ru[j] = (fp[j] - fp[j - 1]) * inv;
        re[j] = (fe[j] - fe[j - 1]) * inv;
    }
    FaceFluxes {
        mass: (fm[0], fm[n - 2]),
        momentum: (fp[0], fp[n - 2]),
        energy: (fe[0], fe[n - 2]),
    }
}

fn check_state(v: &[f64], theta: &[f64], t: f64) -> Result<(), FlowError> {
    for (j, (&vj, &tj)) in v.iter().zip(theta).enumerate() {
        if !(vj.is_finite() && tj.is_finite() && vj > 0.0 && tj > 0.0) {
            return Err(FlowError::StepRejected {
                t,
                reason: format!("v = {vj}, theta = {tj} at node {j}"),
            });
        }
    }
    Ok(())
}

/// Stable step `0.3 · min(dx² min v · min(1/μ, C_v/κ), dx / c_max)`, with
/// `c_max` the largest Lagrangian sound speed `√(γ p / v)`.
pub fn flow_dt(v: &[f64], theta: &[f64], params: &PhysParams, grid: &Grid) -> f64 {
    let dx = grid.dx();
    let v_min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let c_max = v
        .iter()
        .zip(theta)
        .map(|(v, t)| (params.gamma * params.gas_constant * t / (v * v)).sqrt())
        .fold(0.0, f64::max);
    let diffusive = dx * dx * v_min * (1.0 / params.mu).min(params.cv() / params.kappa);
    let acoustic = if c_max > 0.0 {
        dx / c_max
    } else {
        f64::INFINITY
    };
    0.3 * diffusive.min(acoustic)
}

impl FlowStepper {
    pub fn new(state: &FlowField, params: &PhysParams, grid: &Grid) -> Self {
        let cv = params.cv();
        let energy = state
            .theta
            .iter()
            .zip(&state.u)
            .map(|(t, u)| cv * t + 0.5 * u * u)
            .collect();
        Self {
            t: state.t,
            v: state.v.clone(),
            u: state.u.clone(),
            energy,
            audit: ConservationAudit::default(),
            params: *params,
            dx: grid.dx(),
            scratch: Scratch::new(state.len()),
        }
    }

    pub fn theta(&self) -> Vec<f64> {
        let inv_cv = 1.0 / self.params.cv();
        self.energy
            .iter()
            .zip(&self.u)
            .map(|(e, u)| (e - 0.5 * u * u) * inv_cv)
            .collect()
    }

    pub fn state(&self) -> FlowField {
        FlowField {
            t: self.t,
            v: self.v.clone(),
            u: self.u.clone(),
            theta: self.theta(),
        }
    }

    pub fn mass(&self) -> f64 {
        numerics::trapezoid(&self.v, self.dx)
    }

    pub fn momentum(&self) -> f64 {
        numerics::trapezoid(&self.u, self.dx)
    }

    pub fn total_energy(&self) -> f64 {
        numerics::trapezoid(&self.energy, self.dx)
    }

    pub fn stable_dt(&self, grid: &Grid) -> f64 {
        flow_dt(&self.v, &self.theta(), &self.params, grid)
    }

    /// One Heun step; the state is untouched when the step is rejected.
    pub fn try_step(&mut self, dt: f64) -> Result<(), FlowError> {
        let p = self.params;
        let dx = self.dx;
        let mass_before = self.mass();
        let s = &mut self.scratch;
        let [rv0, rv1] = &mut s.rv;
        let [ru0, ru1] = &mut s.ru;
        let [re0, re1] = &mut s.re;
        let f0 = flow_rhs(
            &p,
            dx,
            &self.v,
            &self.u,
            &self.energy,
            &mut s.theta,
            &mut s.fluxes,
            rv0,
            ru0,
            re0,
        );
        for j in 0..self.v.len() {
            s.v[j] = self.v[j] + dt * rv0[j];
            s.u[j] = self.u[j] + dt * ru0[j];
            s.e[j] = self.energy[j] + dt * re0[j];
        }
        let inv_cv = 1.0 / p.cv();
        for j in 0..self.v.len() {
            s.theta[j] = (s.e[j] - 0.5 * s.u[j] * s.u[j]) * inv_cv;
        }
        check_state(&s.v, &s.theta, self.t + dt)?;
        let f1 = flow_rhs(
            &p,
            dx,
            &s.v,
            &s.u,
            &s.e,
            &mut s.theta,
            &mut s.fluxes,
            rv1,
            ru1,
            re1,
        );
        for j in 0..self.v.len() {
            s.v[j] = self.v[j] + 0.5 * dt * (rv0[j] + rv1[j]);
            s.u[j] = self.u[j] + 0.5 * dt * (ru0[j] + ru1[j]);
            s.e[j] = self.energy[j] + 0.5 * dt * (re0[j] + re1[j]);
        }
        for j in 0..self.v.len() {
            s.theta[j] = (s.e[j] - 0.5 * s.u[j] * s.u[j]) * inv_cv;
        }
        check_state(&s.v, &s.theta, self.t + dt)?;
        std::mem::swap(&mut self.v, &mut s.v);
        std::mem::swap(&mut self.u, &mut s.u);
        std::mem::swap(&mut self.energy, &mut s.e);
        self.t += dt;

        let net = |f: (f64, f64)| f.1 - f.0;
        let mass_flux = 0.5 * dt * (net(f0.mass) + net(f1.mass));
        self.audit.mass_flux += mass_flux;
        self.audit.momentum_flux += 0.5 * dt * (net(f0.momentum) + net(f1.momentum));
        self.audit.energy_flux += 0.5 * dt * (net(f0.energy) + net(f1.energy));
        let mass_after = self.mass();
        let err = ((mass_after - mass_before) - mass_flux).abs() / mass_after.abs();
        self.audit.max_mass_identity_error = self.audit.max_mass_identity_error.max(err);
        Ok(())
    }

    /// Step with halving on rejection; `BlowUp` once `dt` drops below `dt_min`.
    pub fn step_adaptive(&mut self, dt: f64, dt_min: f64) -> Result<f64, FlowError> {
        let mut dt = dt;
        loop {
            match self.try_step(dt) {
                Ok(()) => return Ok(dt),
                Err(FlowError::StepRejected { .. }) => {
                    dt *= 0.5;
                    if dt < dt_min {
                        return Err(FlowError::BlowUp { t: self.t, dt });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// One Heun step of the full system.
pub fn step_flow(
    state: &FlowField,
    dt: f64,
    params: &PhysParams,
    grid: &Grid,
) -> Result<FlowField, FlowError> {
    let mut stepper = FlowStepper::new(state, params, grid);
    stepper.try_step(dt)?;
    Ok(stepper.state())
}

/// `(φ, ψ, ζ) = (v − V, u − U, θ − Θ)` at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub t: f64,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub zeta: Vec<f64>,
}

impl Perturbation {
    pub fn zeros(t: f64, n: usize) -> Self {
        Self {
            t,
            phi: vec![0.0; n],
            psi: vec![0.0; n],
            zeta: vec![0.0; n],
        }
    }

    /// `profile + perturbation`.
    pub fn reconstruct(&self, profile: &ProfileField) -> FlowField {
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        FlowField {
            t: self.t,
            v: add(&profile.v, &self.phi),
            u: add(&profile.u, &self.psi),
            theta: add(&profile.theta, &self.zeta),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |a: &[f64]| a.iter().map(|x| c * x).collect();
        Self {
            t: self.t,
            phi: s(&self.phi),
            psi: s(&self.psi),
            zeta: s(&self.zeta),
        }
    }

    pub fn components(&self) -> [&[f64]; 3] {
        [&self.phi, &self.psi, &self.zeta]
    }
}

/// Componentwise difference of the full state and the profile.
///
/// `tolerance` bounds the admissible gap between the two time stamps.
pub fn perturbation_of(
    state: &FlowField,
    profile: &ProfileField,
    tolerance: f64,
) -> Result<Perturbation, FlowError> {
    if (state.t - profile.t).abs() > tolerance {
        return Err(FlowError::TimeMismatch {
            state: state.t,
            profile: profile.t,
        });
    }
    let sub = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
    Ok(Perturbation {
        t: state.t,
        phi: sub(&state.v, &profile.v),
        psi: sub(&state.u, &profile.u),
        zeta: sub(&state.theta, &profile.theta),
    })
}

/// Pointwise residuals of the three perturbation equations.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationResidual {
    pub mass: Vec<f64>,
    pub momentum: Vec<f64>,
    pub energy: Vec<f64>,
}

impl PerturbationResidual {
    /// `(‖r_mass‖², ‖r_momentum‖², ‖r_energy‖²)`.
    pub fn norms_sq(&self, grid: &Grid) -> [f64; 3] {
        let dx = grid.dx();
        [
            numerics::l2_sq(&self.mass, dx),
            numerics::l2_sq(&self.momentum, dx),
            numerics::l2_sq(&self.energy, dx),
        ]
    }

    /// `(Σ ‖r_i‖²)^{1/2}`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        self.norms_sq(grid).iter().sum::<f64>().sqrt()
    }
}

/// Spatial part of the perturbation system at one time, so that the
/// residual is `(ψ-free time derivative) + spatial`.
fn perturbation_operator(
    pert: &Perturbation,
    profile: &ProfileField,
    params: &PhysParams,
    grid: &Grid,
) -> [Vec<f64>; 3] {
    let dx = grid.dx();
    let n = grid.len();
    let (r, mu, kappa) = (params.gas_constant, params.mu, params.kappa);
    let v: Vec<f64> = profile
        .v
        .iter()
        .zip(&pert.phi)
        .map(|(a, b)| a + b)
        .collect();
    let theta: Vec<f64> = profile
        .theta
        .iter()
        .zip(&pert.zeta)
        .map(|(a, b)| a + b)
        .collect();
    let psi_x = numerics::d1(&pert.psi, dx);
    let zeta_x = numerics::d1(&pert.zeta, dx);

    // mass: −ψ_x
    let mass: Vec<f64> = psi_x.iter().map(|p| -p).collect();

    // momentum: −(RΘφ/(vV))_x + (Rζ/v)_x + μ(U_xφ/(vV))_x − μ(ψ_x/v)_x + F
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for j in 0..n {
        let vv = v[j] * profile.v[j];
        a[j] = r * profile.theta[j] * pert.phi[j] / vv;
        b[j] = r * pert.zeta[j] / v[j];
        c[j] = profile.u_x[j] * pert.phi[j] / vv;
        d[j] = psi_x[j] / v[j];
    }
    let (a, b, c, d) = (
        numerics::d1(&a, dx),
        numerics::d1(&b, dx),
        numerics::d1(&c, dx),
        numerics::d1(&d, dx),
    );
    let momentum: Vec<f64> = (0..n)
        .map(|j| -a[j] + b[j] + mu * c[j] - mu * d[j] + profile.f[j])
        .collect();

    // energy: (Rθ/v)(ψ_x+U_x) − (RΘ/V)U_x − κ(ζ_x/v)_x + κ(Θ_xφ/(vV))_x
    //         − μ(u_x²/v − U_x²/V) + G
    let mut e1 = vec![0.0; n];
    let mut e2 = vec![0.0; n];
    for j in 0..n {
        e1[j] = zeta_x[j] / v[j];
        e2[j] = profile.theta_x[j] * pert.phi[j] / (v[j] * profile.v[j]);
    }
    let (e1, e2) = (numerics::d1(&e1, dx), numerics::d1(&e2, dx));
    let energy: Vec<f64> = (0..n)
        .map(|j| {
            let ux = psi_x[j] + profile.u_x[j];
            let big_ux = profile.u_x[j];
            r * theta[j] / v[j] * ux - r * profile.theta[j] / profile.v[j] * big_ux - kappa * e1[j]
                + kappa * e2[j]
                - mu * (ux * ux / v[j] - big_ux * big_ux / profile.v[j])
                + profile.g[j]
        })
        .collect();
    [mass, momentum, energy]
}

/// Discrete residual of the perturbation system between two snapshots.
///
/// Time derivatives are the difference quotient of the two snapshots and the
/// spatial terms are averaged over both, which makes the check second order
/// in time. End nodes carry no residual.
pub fn perturbation_residual(
    history: [&Perturbation; 2],
    profiles: [&ProfileField; 2],
    params: &PhysParams,
    grid: &Grid,
) -> PerturbationResidual {
    let [p0, p1] = history;
    let dt = p1.t - p0.t;
    assert!(dt > 0.0, "residual needs two increasing snapshot times");
    let s0 = perturbation_operator(p0, profiles[0], params, grid);
    let s1 = perturbation_operator(p1, profiles[1], params, grid);
    let cv = params.cv();
    let n = grid.len();
    let build = |k: usize, now: &[f64], before: &[f64], weight: f64| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for j in 1..n - 1 {
            out[j] = weight * (now[j] - before[j]) / dt + 0.5 * (s0[k][j] + s1[k][j]);
        }
        out
    };
    PerturbationResidual {
        mass: build(0, &p1.phi, &p0.phi, 1.0),
        momentum: build(1, &p1.psi, &p0.psi, 1.0),
        energy: build(2, &p1.zeta, &p0.zeta, cv),
    }
}

/// Flow and profile advanced in lockstep on one grid.
#[derive(Debug, Clone)]
pub struct CoupledStepper {
    pub flow: FlowStepper,
    pub profile: ThetaStepper,
    pub steps: usize,
    params: PhysParams,
    grid: Grid,
}

impl CoupledStepper {
    pub fn new(
        state: &FlowField,
        profile0: &ProfileField,
        params: &PhysParams,
        grid: &Grid,
    ) -> Self {
        Self {
            flow: FlowStepper::new(state, params, grid),
            profile: ThetaStepper::from_field(profile0, params, grid),
            steps: 0,
            params: *params,
            grid: *grid,
        }
    }

    pub fn t(&self) -> f64 {
        self.flow.t
    }

    /// Largest step admissible for both solvers.
    pub fn stable_dt(&self) -> f64 {
        let flow = self.flow.stable_dt(&self.grid);
        let prof = profile::theta_dt_cap(&self.profile.theta, &self.params, &self.grid);
        flow.min(prof)
    }

    /// Advances both solvers by one common step of at most `dt_max`.
    pub fn step(&mut self, dt_max: f64) -> Result<f64, FlowError> {
        let mut dt = self.stable_dt().min(dt_max);
        let dt_min = dt * 1e-9;
        loop {
            let flow_backup = (
                self.flow.v.clone(),
                self.flow.u.clone(),
                self.flow.energy.clone(),
            );
            let taken = self.flow.step_adaptive(dt, dt_min)?;
            match self.profile.try_step(taken) {
                Ok(()) => {
                    self.steps += 1;
                    // keep the two clocks identical
                    self.profile.t = self.flow.t;
                    return Ok(taken);
                }
                Err(_) => {
                    let (v, u, e) = flow_backup;
                    self.flow.v = v;
                    self.flow.u = u;
                    self.flow.energy = e;
                    self.flow.t -= taken;
                    dt = taken * 0.5;
                    if dt < dt_min {
                        return Err(FlowError::BlowUp { t: self.flow.t, dt });
                    }
                }
            }
        }
    }

    /// One step that never passes `target`; returns whether `target` was reached.
    pub fn step_towards(&mut self, target: f64) -> Result<bool, FlowError> {
        let remaining = target - self.t();
        if remaining <= 0.0 {
            return Ok(true);
        }
        let dt = self.stable_dt();
        if remaining <= dt * (1.0 + 1e-12) {
            let taken = self.step(remaining)?;
            if taken == remaining {
                self.flow.t = target;
                self.profile.t = target;
                return Ok(true);
            }
            Ok(false)
        } else {
            self.step(dt)?;
            Ok(false)
        }
    }

    /// Advances exactly to `target`.
    pub fn advance_to(&mut self, target: f64, max_steps: usize) -> Result<(), FlowError> {
        while self.t() < target {
            if self.steps >= max_steps {
                return Err(FlowError::BudgetExhausted(max_steps));
            }
            self.step_towards(target)?;
        }
        Ok(())
    }

    pub fn state(&self) -> FlowField {
        self.flow.state()
    }

    pub fn profile_field(&self) -> ProfileField {
        ProfileField::from_theta(
            self.profile.t,
            self.profile.theta.clone(),
            &self.params,
            &self.grid,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Delta0;

    fn setup(theta_minus: f64) -> (PhysParams, Grid, ProfileField) {
        let p = PhysParams {
            theta_minus,
            delta0: Delta0::from_k(4),
            ..Default::default()
        };
        let g = Grid::new(20.0, 201).unwrap();
        let prof = ProfileField::initial(&p, &g);
        (p, g, prof)
    }

    #[test]
    fn no_perturbation_reproduces_profile() {
        let (p, g, prof) = setup(0.5);
        let s = make_initial(&prof, &InitialData::none(), &p, &g).unwrap();
        assert_eq!(s.v, prof.v);
        assert_eq!(s.theta, prof.theta);
        let n = g.len();
        assert_eq!(&s.u[1..n - 1], &prof.u[1..n - 1]);
        assert_eq!((s.u[0], s.u[n - 1]), (0.0, 0.0));
    }

    #[test]
    fn gaussian_bump_norm() {
        let (p, _, _) = setup(0.5);
        let g = Grid::new(20.0, 4001).unwrap();
        let prof = ProfileField::initial(&p, &g);
        let spec = InitialData::gaussian([0.0, 0.0, 0.05], 0.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let pert = perturbation_of(&s, &prof, 0.0).unwrap();
        let norm = numerics::l2_sq(&pert.zeta, g.dx());
        let exact = 0.05f64.powi(2) * (std::f64::consts::PI / 2.0).sqrt() * 1.0;
        assert!(
            (norm - exact).abs() < 1e-10 * exact.max(1e-3),
            "{norm} vs {exact}"
        );
    }

    #[test]
    fn nonpositive_initial_temperature_is_rejected() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.0, 0.0, -1.0], 0.0, 1.0);
        assert!(matches!(
            make_initial(&prof, &spec, &p, &g),
            Err(FlowError::InvalidInitialData(_))
        ));
    }

    #[test]
    fn random_shape_is_seeded() {
        let (_, g, _) = setup(0.5);
        let spec = InitialData {
            shape: PerturbationShape::RandomSmooth,
            amplitudes: [0.01, 0.02, 0.03],
            center: 0.0,
            width: 1.5,
            seed: 42,
        };
        let a = spec.sample(&g);
        let b = spec.sample(&g);
        assert_eq!(a, b);
        assert!((numerics::max_abs(&a[2]) - 0.03).abs() < 1e-15);
        let c = InitialData { seed: 43, ..spec }.sample(&g);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_state_is_a_fixed_point() {
        let p = PhysParams {
            theta_minus: 1.0,
            ..Default::default()
        };
        let g = Grid::new(10.0, 101).unwrap();
        let s = FlowField::uniform(0.0, p.v_plus, 0.0, p.theta_plus, &g);
        let mut stepper = FlowStepper::new(&s, &p, &g);
        for _ in 0..100 {
            stepper.try_step(1e-3).unwrap();
        }
        let out = stepper.state();
        assert_eq!(out.v, s.v);
        assert_eq!(out.u, s.u);
        assert_eq!(out.theta, s.theta);
    }

    #[test]
    fn momentum_operator_is_galilean() {
        let p = PhysParams::default();
        let g = Grid::new(10.0, 101).unwrap();
        let mut s = FlowField::uniform(0.0, 1.0, 0.0, 1.0, &g);
        for (j, u) in s.u.iter_mut().enumerate() {
            *u = (0.3 * g.x(j)).sin() * 0.1;
        }
        let rhs = |state: &FlowField| {
            let n = state.len();
            let mut theta = state.theta.clone();
            let e = vec![0.0; n];
            let mut fl = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
            let (mut rv, mut ru, mut re) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
            // energy recomputed so that θ stays frozen
            let e: Vec<f64> = e
                .iter()
                .zip(&state.u)
                .zip(&state.theta)
                .map(|((_, u), t)| p.cv() * t + 0.5 * u * u)
                .collect();
            flow_rhs(
                &p,
                g.dx(),
                &state.v,
                &state.u,
                &e,
                &mut theta,
                &mut fl,
                &mut rv,
                &mut ru,
                &mut re,
            );
            ru
        };
        let base = rhs(&s);
        for u in s.u.iter_mut() {
            *u += 0.7;
        }
        let shifted = rhs(&s);
        for (a, b) in base.iter().zip(&shifted) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn flux_form_conservation() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.01, 0.02, 0.05], 0.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let mut stepper = FlowStepper::new(&s, &p, &g);
        let (m0, q0, e0) = (stepper.mass(), stepper.momentum(), stepper.total_energy());
        for _ in 0..500 {
            let dt = stepper.stable_dt(&g);
            stepper.try_step(dt).unwrap();
        }
        let a = stepper.audit;
        assert!(a.max_mass_identity_error < 1e-13);
        assert!(((stepper.mass() - m0) - a.mass_flux).abs() < 1e-12 * m0);
        assert!(((stepper.momentum() - q0) - a.momentum_flux).abs() < 1e-12);
        assert!(((stepper.total_energy() - e0) - a.energy_flux).abs() < 1e-12 * e0);
    }

    #[test]
    fn perturbation_round_trip() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.05, 0.0, 0.05], 1.0, 1.5);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let pert = perturbation_of(&s, &prof, 0.0).unwrap();
        let back = pert.reconstruct(&prof);
        // v and θ stay within a factor two of the profile, so subtraction is exact
        assert_eq!(back.v, s.v);
        assert_eq!(back.theta, s.theta);
        for (a, b) in back.u.iter().zip(&s.u) {
            assert!((a - b).abs() <= f64::EPSILON * a.abs().max(1e-3));
        }
        let zero = perturbation_of(&prof_as_flow(&prof), &prof, 0.0).unwrap();
        assert!(zero
            .phi
            .iter()
            .chain(&zero.psi)
            .chain(&zero.zeta)
            .all(|&x| x == 0.0));
    }

    fn prof_as_flow(prof: &ProfileField) -> FlowField {
        FlowField {
            t: prof.t,
            v: prof.v.clone(),
            u: prof.u.clone(),
            theta: prof.theta.clone(),
        }
    }

    #[test]
    fn perturbation_recovers_bump() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.0, 0.0, 0.05], 0.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let pert = perturbation_of(&s, &prof, 0.0).unwrap();
        let [_, _, bump] = spec.sample(&g);
        for (a, b) in pert.zeta.iter().zip(&bump) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn time_mismatch_detected() {
        let (p, g, prof) = setup(0.5);
        let mut s = make_initial(&prof, &InitialData::none(), &p, &g).unwrap();
        s.t = 0.1;
        assert!(matches!(
            perturbation_of(&s, &prof, 0.01),
            Err(FlowError::TimeMismatch { .. })
        ));
    }

    #[test]
    fn manufactured_perturbation_has_large_residual() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.05, 0.05, 0.05], 0.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let pert = perturbation_of(&s, &prof, 0.0).unwrap();
        let mut later = pert.clone();
        later.t = 1e-3;
        let mut prof_later = prof.clone();
        prof_later.t = 1e-3;
        let res = perturbation_residual([&pert, &later], [&prof, &prof_later], &p, &g);
        assert!(res.norm(&g) > 1e-2, "{}", res.norm(&g));
    }

    #[test]
    fn coupled_run_has_small_residual() {
        let (p, g, prof) = setup(0.5);
        let spec = InitialData::gaussian([0.0, 0.0, 0.05], 0.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let mut run = CoupledStepper::new(&s, &prof, &p, &g);
        run.advance_to(0.5, 100_000).unwrap();
        let a = perturbation_of(&run.state(), &run.profile_field(), 0.0).unwrap();
        let pa = run.profile_field();
        run.step(f64::INFINITY).unwrap();
        let b = perturbation_of(&run.state(), &run.profile_field(), 0.0).unwrap();
        let pb = run.profile_field();
        let res = perturbation_residual([&a, &b], [&pa, &pb], &p, &g);
        assert!(res.norm(&g) < 1e-2, "{}", res.norm(&g));
    }
}
