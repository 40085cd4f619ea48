//! The contact-wave ansatz `(V, U, Θ)`.
//!
//! `Θ` solves the nonlinear diffusion equation `Θ_t = a (ln Θ)_xx` from the
//! explicit initial data `Θ₀ = H^{δ₀}`, where `H` blends the two far-field
//! powers `θ±^{1/δ₀}` through an error function of `K(x) = asinh(x)`.
//! `V = RΘ/p₊` keeps the pressure constant and `U = κ(γ−1)/(γR) · (ln Θ)_x`
//! makes `V_t = U_x` hold exactly. What the ansatz leaves over in the
//! momentum and energy equations are the defect sources `F` and `G`.
//!
//! The linear heat equation with the same initial data is solved by kernel
//! quadrature and serves as a grid-free reference.

use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::numerics::{self, CompositeGauss};
use crate::params::{Grid, PhysParams};

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `K(x) = ln(x + √(1+x²))`, evaluated without cancellation on either side of 0.
pub fn k_map(x: f64) -> f64 {
    if x < 0.0 {
        return -k_map(-x);
    }
    // ln(1 + y) with y = x + √(1+x²) − 1 = x + x²/(1+√(1+x²))
    let r = (1.0 + x * x).sqrt();
    if x > 1e8 {
        return x.ln() + std::f64::consts::LN_2 + 0.25 / (x * x);
    }
    (x + x * x / (1.0 + r)).ln_1p()
}

/// The explicit initial temperature `Θ₀` for fixed far-field data and `δ₀`.
#[derive(Debug, Clone, Copy)]
pub struct InitialTemperature {
    delta0: f64,
    theta_minus: f64,
    theta_plus: f64,
    // ln θ±^{1/δ₀}, and their maximum used as a scale for H
    ln_a: f64,
    ln_b: f64,
    ln_scale: f64,
}

impl InitialTemperature {
    pub fn new(params: &PhysParams) -> Self {
        let delta0 = params.delta0.value();
        let ln_a = params.theta_plus.ln() / delta0;
        let ln_b = params.theta_minus.ln() / delta0;
        Self {
            delta0,
            theta_minus: params.theta_minus,
            theta_plus: params.theta_plus,
            ln_a,
            ln_b,
            ln_scale: ln_a.max(ln_b),
        }
    }

    /// `H(x) / e^{scale}` and the blending weight, both in (0, 1].
    fn scaled_h(&self, x: f64) -> (f64, f64, f64) {
        let k = k_map(x);
        // weight of the right state: (1 + erf K)/2, split to avoid cancellation
        let (q, one_minus_q) = if k >= 0.0 {
            let tail = 0.5 * libm::erfc(k);
            (1.0 - tail, tail)
        } else {
            let tail = 0.5 * libm::erfc(-k);
            (tail, 1.0 - tail)
        };
        let a = (self.ln_a - self.ln_scale).exp();
        let b = (self.ln_b - self.ln_scale).exp();
        (b * one_minus_q + a * q, a - b, k)
    }

    /// `ln Θ₀(x)`.
    pub fn ln_value(&self, x: f64) -> f64 {
        if self.theta_minus == self.theta_plus {
            return self.theta_plus.ln();
        }
        let (h, _, _) = self.scaled_h(x);
        self.delta0 * (self.ln_scale + h.ln())
    }

    pub fn value(&self, x: f64) -> f64 {
        if self.theta_minus == self.theta_plus {
            return self.theta_plus;
        }
        self.ln_value(x).exp()
    }

    /// Analytic `Θ₀'(x) = δ₀ Θ₀ H'/H`.
    pub fn derivative(&self, x: f64) -> f64 {
        if self.theta_minus == self.theta_plus {
            return 0.0;
        }
        let (h, diff, k) = self.scaled_h(x);
        let dk = 1.0 / (1.0 + x * x).sqrt();
        self.delta0 * self.value(x) * diff * FRAC_1_SQRT_PI * (-k * k).exp() * dk / h
    }

    /// `Θ₀'(sinh k) · cosh k`, the derivative density in the variable `k = K(x)`.
    fn density_in_k(&self, k: f64) -> f64 {
        if self.theta_minus == self.theta_plus {
            return 0.0;
        }
        let x = k.sinh();
        let (h, diff, _) = self.scaled_h(x);
        self.delta0 * self.value(x) * diff * FRAC_1_SQRT_PI * (-k * k).exp() / h
    }

    pub fn theta_minus(&self) -> f64 {
        self.theta_minus
    }

    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }
}

/// `Θ₀(x)`; works for either ordering of the far-field temperatures.
pub fn theta0(x: f64, params: &PhysParams) -> f64 {
    InitialTemperature::new(params).value(x)
}

/// Measured size of `Θ₀` and its derivatives on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theta0Bounds {
    /// `‖Θ₀'‖_{L¹}`.
    pub grad_l1: f64,
    /// `‖Θ₀ − θ₋‖_{L¹(ℝ₋)}`.
    pub tail_minus_l1: f64,
    /// `‖Θ₀ − θ₊‖_{L¹(ℝ₊)}`.
    pub tail_plus_l1: f64,
    pub grad_sup: f64,
    /// `‖Θ₀'‖²`.
    pub grad_l2_sq: f64,
    /// `‖(ln Θ₀)_xx‖²`.
    pub ln_xx_l2_sq: f64,
    /// `‖(ln Θ₀)_xxx‖²`.
    pub ln_xxx_l2_sq: f64,
}

impl Theta0Bounds {
    fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("grad_l1", self.grad_l1),
            ("tail_minus_l1", self.tail_minus_l1),
            ("tail_plus_l1", self.tail_plus_l1),
            ("grad_sup", self.grad_sup),
            ("grad_l2_sq", self.grad_l2_sq),
            ("ln_xx_l2_sq", self.ln_xx_l2_sq),
            ("ln_xxx_l2_sq", self.ln_xxx_l2_sq),
        ]
    }

    fn measure(params: &PhysParams, grid: &Grid) -> Self {
        let init = InitialTemperature::new(params);
        let dx = grid.dx();
        let xs = grid.nodes();
        let theta: Vec<f64> = xs.iter().map(|&x| init.value(x)).collect();
        let w: Vec<f64> = xs.iter().map(|&x| init.ln_value(x)).collect();
        let theta_x = numerics::d1(&theta, dx);
        let w_xx = numerics::d2(&w, dx);
        let w_xxx = numerics::d1(&w_xx, dx);

        let mid = grid.index_of(0.0);
        let dev_minus: Vec<f64> = theta[..=mid]
            .iter()
            .map(|t| (t - params.theta_minus).abs())
            .collect();
        let dev_plus: Vec<f64> = theta[mid..]
            .iter()
            .map(|t| (t - params.theta_plus).abs())
            .collect();
        Self {
            grad_l1: numerics::trapezoid_map(&theta_x, dx, f64::abs),
            tail_minus_l1: numerics::trapezoid(&dev_minus, dx),
            tail_plus_l1: numerics::trapezoid(&dev_plus, dx),
            grad_sup: numerics::max_abs(&theta_x),
            grad_l2_sq: numerics::l2_sq(&theta_x, dx),
            ln_xx_l2_sq: numerics::l2_sq(&w_xx, dx),
            ln_xxx_l2_sq: numerics::l2_sq(&w_xxx, dx),
        }
    }
}

/// Relative change tolerated between a grid and its refinement.
pub const BOUNDS_SELF_CONSISTENCY: f64 = 0.05;

/// Measures the initial-data bounds and checks them against the grid refined once.
pub fn verify_theta0_bounds(
    params: &PhysParams,
    grid: &Grid,
) -> Result<Theta0Bounds, ProfileError> {
    let coarse = Theta0Bounds::measure(params, grid);
    let fine = Theta0Bounds::measure(params, &grid.refined(1));
    for ((name, c), (_, f)) in coarse.entries().into_iter().zip(fine.entries()) {
        let scale = c.abs().max(f.abs());
        if scale < 1e-13 {
            continue;
        }
        let change = (c - f).abs() / scale;
        if change > BOUNDS_SELF_CONSISTENCY {
            return Err(ProfileError::UnderResolved {
                quantity: name,
                change,
            });
        }
    }
    Ok(fine)
}

/// `(V, V_x, U, U_x)` of the ansatz for a given temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileKinematics {
    pub v: Vec<f64>,
    pub v_x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_x: Vec<f64>,
}

/// `V = RΘ/p₊`, `U = κ(γ−1)Θ_x/(γRΘ)`.
pub fn profile_from_theta(theta: &[f64], params: &PhysParams, grid: &Grid) -> ProfileKinematics {
    let dx = grid.dx();
    let scale = params.gas_constant / params.p_plus();
    let v: Vec<f64> = theta.iter().map(|t| scale * t).collect();
    let w: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let c = params.velocity_factor();
    let u: Vec<f64> = numerics::d1(&w, dx).into_iter().map(|wx| c * wx).collect();
    ProfileKinematics {
        v_x: numerics::d1(&v, dx),
        u_x: numerics::d1(&u, dx),
        v,
        u,
    }
}

/// Leading coefficient of the momentum defect, `κ(γ−1)/(γR) · (a − μp₊/R)`.
///
/// It multiplies `((ln Θ)_xx / Θ)_x` and vanishes at [`PhysParams::defect_free_mu`].
pub fn momentum_defect_coefficient(params: &PhysParams) -> f64 {
    params.velocity_factor()
        * (params.diffusivity() - params.mu * params.p_plus() / params.gas_constant)
}

/// The ansatz at one time with all derivative arrays and defect sources.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileField {
    pub t: f64,
    pub theta: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub ln_theta_x: Vec<f64>,
    pub ln_theta_xx: Vec<f64>,
    pub ln_theta_xxx: Vec<f64>,
    pub v: Vec<f64>,
    pub v_x: Vec<f64>,
    pub u: Vec<f64>,
    pub u_x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ProfileField {
    pub fn from_theta(t: f64, theta: Vec<f64>, params: &PhysParams, grid: &Grid) -> Self {
        assert_eq!(theta.len(), grid.len(), "temperature does not match grid");
        let dx = grid.dx();
        let w: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
        let ln_theta_xx = numerics::d2(&w, dx);
        let kin = profile_from_theta(&theta, params, grid);
        let mut field = Self {
            t,
            theta_x: numerics::d1(&theta, dx),
            ln_theta_x: numerics::d1(&w, dx),
            ln_theta_xxx: numerics::d1(&ln_theta_xx, dx),
            ln_theta_xx,
            theta,
            v: kin.v,
            v_x: kin.v_x,
            u: kin.u,
            u_x: kin.u_x,
            f: Vec::new(),
            g: Vec::new(),
        };
        let (f, g) = source_terms(&field, params, grid);
        field.f = f;
        field.g = g;
        field
    }

    /// `Θ₀` sampled on the grid with the two end nodes pinned to `θ±`.
    pub fn initial(params: &PhysParams, grid: &Grid) -> Self {
        let init = InitialTemperature::new(params);
        let mut theta: Vec<f64> = grid.nodes().iter().map(|&x| init.value(x)).collect();
        pin_far_field(&mut theta, params);
        Self::from_theta(0.0, theta, params, grid)
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

fn pin_far_field(theta: &mut [f64], params: &PhysParams) {
    let n = theta.len();
    theta[0] = params.theta_minus;
    theta[n - 1] = params.theta_plus;
}

/// Defect sources `F = c_F ((ln Θ)_xx/Θ)_x` and `G = −μ U_x²/V`.
pub fn source_terms(
    field: &ProfileField,
    params: &PhysParams,
    grid: &Grid,
) -> (Vec<f64>, Vec<f64>) {
    let coef = momentum_defect_coefficient(params);
    let ratio: Vec<f64> = field
        .ln_theta_xx
        .iter()
        .zip(&field.theta)
        .map(|(w, t)| w / t)
        .collect();
    let f = numerics::d1(&ratio, grid.dx())
        .into_iter()
        .map(|r| coef * r)
        .collect();
    let g = field
        .u_x
        .iter()
        .zip(&field.v)
        .map(|(ux, v)| -params.mu * ux * ux / v)
        .collect();
    (f, g)
}

/// Semi-discrete right-hand side `a δ²(ln Θ)` on interior nodes; returns the
/// boundary fluxes `a (ln Θ)_x` at the first and last cell faces.
fn diffusion_rhs(theta: &[f64], a: f64, dx: f64, rhs: &mut [f64], w: &mut [f64]) -> (f64, f64) {
    let n = theta.len();
    for (wj, t) in w.iter_mut().zip(theta) {
        *wj = t.ln();
    }
    let inv = a / (dx * dx);
    rhs[0] = 0.0;
    rhs[n - 1] = 0.0;
    for j in 1..n - 1 {
        rhs[j] = (w[j + 1] - 2.0 * w[j] + w[j - 1]) * inv;
    }
    let left = a * (w[1] - w[0]) / dx;
    let right = a * (w[n - 1] - w[n - 2]) / dx;
    (left, right)
}

fn check_positive(theta: &[f64], t: f64) -> Result<(), ProfileError> {
    for (j, &v) in theta.iter().enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(ProfileError::StepRejected {
                t,
                reason: format!("temperature {v} at node {j}"),
            });
        }
    }
    Ok(())
}

/// Stability cap `0.4 dx² min Θ / a`.
pub fn theta_dt_cap(theta: &[f64], params: &PhysParams, grid: &Grid) -> f64 {
    let min = theta.iter().cloned().fold(f64::INFINITY, f64::min);
    0.4 * grid.dx().powi(2) * min / params.diffusivity()
}

/// Raw Heun integrator for `Θ_t = a (ln Θ)_xx` with pinned end nodes.
///
/// Tracks the time-integrated boundary flux so that the change of `∫Θ dx`
/// can be audited against it.
#[derive(Debug, Clone)]
pub struct ThetaStepper {
    pub t: f64,
    pub theta: Vec<f64>,
    /// `∫₀ᵗ [a (ln Θ)_x]_{−L}^{L} dτ` as seen by the scheme.
    pub boundary_flux: f64,
    a: f64,
    dx: f64,
    rhs0: Vec<f64>,
    rhs1: Vec<f64>,
    stage: Vec<f64>,
    work: Vec<f64>,
}

impl ThetaStepper {
    pub fn new(t: f64, theta: Vec<f64>, params: &PhysParams, grid: &Grid) -> Self {
        let n = theta.len();
        Self {
            t,
            theta,
            boundary_flux: 0.0,
            a: params.diffusivity(),
            dx: grid.dx(),
            rhs0: vec![0.0; n],
            rhs1: vec![0.0; n],
            stage: vec![0.0; n],
            work: vec![0.0; n],
        }
    }

    pub fn from_field(field: &ProfileField, params: &PhysParams, grid: &Grid) -> Self {
        Self::new(field.t, field.theta.clone(), params, grid)
    }

    /// One Heun step; leaves the state untouched when the step is rejected.
    pub fn try_step(&mut self, dt: f64) -> Result<(), ProfileError> {
        let (l0, r0) = diffusion_rhs(&self.theta, self.a, self.dx, &mut self.rhs0, &mut self.work);
        for ((s, t), r) in self.stage.iter_mut().zip(&self.theta).zip(&self.rhs0) {
            *s = t + dt * r;
        }
        check_positive(&self.stage, self.t + dt)?;
        let (l1, r1) = diffusion_rhs(&self.stage, self.a, self.dx, &mut self.rhs1, &mut self.work);
        for (((s, t), a), b) in self
            .stage
            .iter_mut()
            .zip(&self.theta)
            .zip(&self.rhs0)
            .zip(&self.rhs1)
        {
            *s = t + 0.5 * dt * (a + b);
        }
        check_positive(&self.stage, self.t + dt)?;
        std::mem::swap(&mut self.theta, &mut self.stage);
        self.t += dt;
        self.boundary_flux += 0.5 * dt * ((r0 - l0) + (r1 - l1));
        Ok(())
    }

    /// Step with halving on rejection.
    pub fn step_adaptive(&mut self, dt: f64, max_halvings: u32) -> Result<f64, ProfileError> {
        let mut dt = dt;
        for _ in 0..=max_halvings {
            match self.try_step(dt) {
                Ok(()) => return Ok(dt),
                Err(ProfileError::StepRejected { .. }) => dt *= 0.5,
                Err(e) => return Err(e),
            }
        }
        Err(ProfileError::BlowUp { t: self.t, dt })
    }
}

/// One step of the profile equation followed by a refresh of every derived array.
pub fn evolve_theta(
    field: &ProfileField,
    dt: f64,
    params: &PhysParams,
    grid: &Grid,
) -> Result<ProfileField, ProfileError> {
    let mut stepper = ThetaStepper::from_field(field, params, grid);
    stepper.try_step(dt)?;
    Ok(ProfileField::from_theta(
        stepper.t,
        stepper.theta,
        params,
        grid,
    ))
}

/// Squared norms of the first three derivatives of `ln Θ`.
pub fn log_derivative_norms(theta: &[f64], dx: f64) -> [f64; 3] {
    let w: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    let wx = numerics::d1(&w, dx);
    let wxx = numerics::d2(&w, dx);
    let wxxx = numerics::d1(&wxx, dx);
    [
        numerics::l2_sq(&wx, dx),
        numerics::l2_sq(&wxx, dx),
        numerics::l2_sq(&wxxx, dx),
    ]
}

/// Snapshots of an evolved profile plus quantities accumulated every step.
#[derive(Debug, Clone)]
pub struct ProfileHistory {
    pub snapshots: Vec<ProfileField>,
    /// `∫₀ᵗ ‖(ln Θ)_x‖² dτ` at each snapshot.
    pub int_ln_x_sq: Vec<f64>,
    /// `∫₀ᵗ ‖(ln Θ)_xx‖² dτ` at each snapshot.
    pub int_ln_xx_sq: Vec<f64>,
    /// Time-integrated boundary flux at each snapshot.
    pub boundary_flux: Vec<f64>,
    pub steps: usize,
}

pub const MAX_HALVINGS: u32 = 30;

/// Evolves `Θ` from `initial` and records a snapshot at every requested time.
pub fn evolve_profile(
    initial: &ProfileField,
    params: &PhysParams,
    grid: &Grid,
    output_times: &[f64],
    max_steps: usize,
) -> Result<ProfileHistory, ProfileError> {
    let dx = grid.dx();
    let mut stepper = ThetaStepper::from_field(initial, params, grid);
    let mut history = ProfileHistory {
        snapshots: Vec::with_capacity(output_times.len()),
        int_ln_x_sq: Vec::new(),
        int_ln_xx_sq: Vec::new(),
        boundary_flux: Vec::new(),
        steps: 0,
    };
    let mut norms = log_derivative_norms(&stepper.theta, dx);
    let (mut int_x, mut int_xx) = (0.0, 0.0);
    for &target in output_times {
        while stepper.t < target {
            if history.steps >= max_steps {
                return Err(ProfileError::BlowUp {
                    t: stepper.t,
                    dt: 0.0,
                });
            }
            let cap = theta_dt_cap(&stepper.theta, params, grid);
            let remaining = target - stepper.t;
            let dt = if remaining <= cap * (1.0 + 1e-12) {
                remaining
            } else {
                cap
            };
            let t0 = stepper.t;
            let taken = stepper.step_adaptive(dt, MAX_HALVINGS)?;
            if taken == remaining {
                stepper.t = target;
            }
            let next = log_derivative_norms(&stepper.theta, dx);
            let h = stepper.t - t0;
            int_x += 0.5 * h * (norms[0] + next[0]);
            int_xx += 0.5 * h * (norms[1] + next[1]);
            norms = next;
            history.steps += 1;
        }
        history.snapshots.push(ProfileField::from_theta(
            stepper.t,
            stepper.theta.clone(),
            params,
            grid,
        ));
        history.int_ln_x_sq.push(int_x);
        history.int_ln_xx_sq.push(int_xx);
        history.boundary_flux.push(stepper.boundary_flux);
    }
    Ok(history)
}

/// Quadrature rule used by [`heat_kernel_theta2`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Composite 8-point Gauss–Legendre.
    GaussLegendre,
    /// Composite Simpson with 8 subintervals per panel.
    Simpson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub rule: QuadratureRule,
    pub initial_panels: usize,
    pub max_doublings: u32,
    pub rel_tol: f64,
    /// Half-width of the window in units of the kernel scale `√(4at)`.
    pub window: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussLegendre,
            initial_panels: 64,
            max_doublings: 12,
            rel_tol: 1e-8,
            window: 8.0,
        }
    }
}

impl QuadratureSpec {
    pub fn simpson() -> Self {
        Self {
            rule: QuadratureRule::Simpson,
            ..Self::default()
        }
    }
}

/// Value at `(x, t)` of the linear heat equation `θ_t = a θ_xx` started from `Θ₀`.
///
/// Evaluates `π^{−1/2} ∫ e^{−s²} Θ₀(x + √(4at) s) ds` over the window
/// `|s| ≤ window`, adds the far-field tails in closed form, and doubles the
/// panel count until two successive results agree to `rel_tol`.
pub fn heat_kernel_theta2(
    x: f64,
    t: f64,
    params: &PhysParams,
    spec: &QuadratureSpec,
) -> Result<f64, ProfileError> {
    if !(t > 0.0) {
        return Err(ProfileError::NonPositiveTime(t));
    }
    let init = InitialTemperature::new(params);
    if params.theta_minus == params.theta_plus {
        return Ok(params.theta_plus);
    }
    let scale = (4.0 * params.diffusivity() * t).sqrt();
    let s_max = spec.window;
    let tails = 0.5 * libm::erfc(s_max) * (params.theta_minus + params.theta_plus);
    let integrand = |s: f64| (-s * s).exp() * init.value(x + scale * s);
    let evaluate = |panels: usize| -> f64 {
        let inner = match spec.rule {
            QuadratureRule::GaussLegendre => {
                CompositeGauss::new(-s_max, s_max, panels, 8).integrate(integrand)
            }
            QuadratureRule::Simpson => numerics::simpson(-s_max, s_max, 8 * panels, integrand),
        };
        FRAC_1_SQRT_PI * inner + tails
    };
    let mut panels = spec.initial_panels.max(1);
    let mut previous = evaluate(panels);
    let mut change = f64::INFINITY;
    for _ in 0..spec.max_doublings {
        panels *= 2;
        let current = evaluate(panels);
        change = (current - previous).abs() / current.abs().max(f64::MIN_POSITIVE);
        if change <= spec.rel_tol {
            return Ok(current);
        }
        previous = current;
    }
    Err(ProfileError::QuadratureNotConverged { x, t, change })
}

/// Heat-kernel solution in the integrated-by-parts form
/// `θ₂(x,t) = θ₋ + ∫ Θ₀'(h) · ½ erfc((h − x)/√(4at)) dh`.
///
/// The derivative density is tabulated once in the variable `k = K(h)`, where
/// it is Gaussian-like, so evaluating many points is cheap. Mass outside the
/// table is carried as two point masses at the table ends.
#[derive(Debug, Clone)]
pub struct Theta2Oracle {
    theta_minus: f64,
    diffusivity: f64,
    positions: Vec<f64>,
    masses: Vec<f64>,
}

impl Theta2Oracle {
    pub fn new(params: &PhysParams, panels_per_unit: usize) -> Self {
        let init = InitialTemperature::new(params);
        let strength = params.strength();
        let mut positions = Vec::new();
        let mut masses = Vec::new();
        if strength > 0.0 {
            // widen the table until both tails carry negligible mass
            let mut k_max: f64 = 6.0;
            while k_max < 40.0 {
                let lo = (init.value((-k_max).sinh()) - params.theta_minus).abs();
                let hi = (params.theta_plus - init.value(k_max.sinh())).abs();
                if lo.max(hi) <= 1e-15 * strength {
                    break;
                }
                k_max += 1.0;
            }
            let panels = (2.0 * k_max * panels_per_unit as f64).ceil() as usize;
            let rule = CompositeGauss::new(-k_max, k_max, panels, 8);
            for (&k, &w) in rule.nodes.iter().zip(&rule.weights) {
                positions.push(k.sinh());
                masses.push(w * init.density_in_k(k));
            }
            let (x_lo, x_hi) = ((-k_max).sinh(), k_max.sinh());
            positions.push(x_lo);
            masses.push(init.value(x_lo) - params.theta_minus);
            positions.push(x_hi);
            masses.push(params.theta_plus - init.value(x_hi));
        }
        Self {
            theta_minus: params.theta_minus,
            diffusivity: params.diffusivity(),
            positions,
            masses,
        }
    }

    /// Table size doubled until `value` at `t_min` agrees to `rel_tol` on every probe.
    pub fn converged(
        params: &PhysParams,
        t_min: f64,
        probes: &[f64],
        rel_tol: f64,
    ) -> Result<Self, ProfileError> {
        let mut per_unit = 2;
        let mut current = Self::new(params, per_unit);
        let mut change = f64::INFINITY;
        for _ in 0..10 {
            per_unit *= 2;
            let next = Self::new(params, per_unit);
            change = probes
                .iter()
                .map(|&x| {
                    let a = current.value(x, t_min);
                    let b = next.value(x, t_min);
                    (a - b).abs() / b.abs()
                })
                .fold(0.0, f64::max);
            current = next;
            if change <= rel_tol {
                return Ok(current);
            }
        }
        Err(ProfileError::QuadratureNotConverged {
            x: f64::NAN,
            t: t_min,
            change,
        })
    }

    pub fn value(&self, x: f64, t: f64) -> f64 {
        let inv = 1.0 / (4.0 * self.diffusivity * t).sqrt();
        let sum: f64 = self
            .positions
            .iter()
            .zip(&self.masses)
            .map(|(&h, &m)| m * 0.5 * libm::erfc((h - x) * inv))
            .sum();
        self.theta_minus + sum
    }

    /// `θ₂ₓ(x,t) = ∫ Θ₀'(h) G(x−h, t) dh`.
    pub fn gradient(&self, x: f64, t: f64) -> f64 {
        let four_at = 4.0 * self.diffusivity * t;
        let norm = 1.0 / (std::f64::consts::PI * four_at).sqrt();
        self.positions
            .iter()
            .zip(&self.masses)
            .map(|(&h, &m)| m * norm * (-(h - x) * (h - x) / four_at).exp())
            .sum()
    }

    pub fn sample(&self, grid: &Grid, t: f64) -> Vec<f64> {
        grid.nodes().iter().map(|&x| self.value(x, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Delta0;

    fn params(theta_minus: f64, k: u32) -> PhysParams {
        PhysParams {
            theta_minus,
            delta0: Delta0::from_k(k),
            ..Default::default()
        }
    }

    #[test]
    fn k_map_values() {
        assert_eq!(k_map(0.0), 0.0);
        // ln(1 + √2)
        assert!((k_map(1.0) - 0.881_373_587_019_543).abs() < 1e-15);
        for x in [1e-12, 1e-3, 0.5, 3.0, 1e3, 1e9] {
            assert_eq!(k_map(-x), -k_map(x));
            assert!((k_map(x) - x.asinh()).abs() <= 1e-15 * x.asinh().abs().max(1e-300) * 4.0);
        }
    }

    #[test]
    fn theta0_degenerate_is_constant() {
        let p = params(1.0, 4);
        for x in [-100.0, -1.0, 0.0, 2.0, 1e4] {
            assert_eq!(theta0(x, &p), 1.0);
        }
    }

    #[test]
    fn theta0_midpoint_value() {
        for k in [4, 8, 16] {
            let p = params(0.5, k);
            let d = p.delta0.value();
            let expected =
                ((p.theta_plus.powf(1.0 / d) + p.theta_minus.powf(1.0 / d)) / 2.0).powf(d);
            assert!((theta0(0.0, &p) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn theta0_monotone_and_bounded() {
        let p = params(0.5, 4);
        let mut prev = 0.5;
        for j in 0..2000 {
            let x = -50.0 + 0.05 * j as f64;
            let v = theta0(x, &p);
            assert!(v > 0.5 && v < 1.0, "x = {x}: {v}");
            assert!(v >= prev);
            prev = v;
        }
        assert!((theta0(1e3, &p) - 1.0).abs() < 1e-2);
        assert!(theta0(1e3, &p) <= 1.0);
    }

    #[test]
    fn theta0_derivative_matches_difference_quotient() {
        let p = params(0.3, 8);
        let init = InitialTemperature::new(&p);
        for x in [-40.0, -5.0, -0.3, 0.0, 0.7, 4.0] {
            let h = 1e-5;
            let fd = (init.value(x + h) - init.value(x - h)) / (2.0 * h);
            let an = init.derivative(x);
            assert!(
                (fd - an).abs() < 1e-7 * an.abs().max(1e-6),
                "x = {x}: {fd} vs {an}"
            );
        }
    }

    #[test]
    fn profile_identities() {
        let p = params(0.5, 4);
        let grid = Grid::new(30.0, 601).unwrap();
        let field = ProfileField::initial(&p, &grid);
        for j in 0..grid.len() {
            assert!(field.theta[j] > 0.0 && field.v[j] > 0.0);
            // R Θ / V = p₊ holds to rounding
            let p_j = p.gas_constant * field.theta[j] / field.v[j];
            assert!((p_j - p.p_plus()).abs() <= 2.0 * f64::EPSILON * p.p_plus());
            assert!(field.g[j] <= 0.0);
        }
    }

    #[test]
    fn constant_temperature_gives_rest_state() {
        let p = params(1.0, 4);
        let grid = Grid::new(10.0, 101).unwrap();
        let field = ProfileField::initial(&p, &grid);
        assert!(field.v.iter().all(|&v| v == p.v_plus));
        assert!(field.u.iter().all(|&u| u == 0.0));
        assert!(field.f.iter().all(|&f| f == 0.0));
        assert!(field.g.iter().all(|&g| g == 0.0));
        let next = evolve_theta(&field, 1e-3, &p, &grid).unwrap();
        assert_eq!(next.theta, field.theta);
    }

    #[test]
    fn tuned_viscosity_removes_momentum_defect() {
        let mut p = params(0.5, 4);
        p.mu = p.defect_free_mu();
        assert!(momentum_defect_coefficient(&p).abs() < 1e-16);
        let grid = Grid::new(30.0, 601).unwrap();
        let field = ProfileField::initial(&p, &grid);
        assert!(field.f.iter().all(|f| f.abs() < 1e-16));
        assert!(field.g.iter().any(|g| g.abs() > 1e-8));
    }

    #[test]
    fn momentum_defect_matches_its_definition() {
        // F = U_t − μ (U_x / V)_x, with U_t from two nearby profile states
        let p = params(0.5, 4);
        let grid = Grid::new(30.0, 1201).unwrap();
        let mut field = ProfileField::initial(&p, &grid);
        let mut stepper = ThetaStepper::from_field(&field, &p, &grid);
        while stepper.t < 2.0 {
            let dt = theta_dt_cap(&stepper.theta, &p, &grid);
            stepper.try_step(dt).unwrap();
        }
        field = ProfileField::from_theta(stepper.t, stepper.theta.clone(), &p, &grid);
        let dt = 1e-5;
        stepper.try_step(dt).unwrap();
        let later = ProfileField::from_theta(stepper.t, stepper.theta.clone(), &p, &grid);
        let dx = grid.dx();
        let visc: Vec<f64> = field
            .u_x
            .iter()
            .zip(&field.v)
            .map(|(ux, v)| ux / v)
            .collect();
        let visc_x = numerics::d1(&visc, dx);
        let mut max_f: f64 = 0.0;
        let mut max_err: f64 = 0.0;
        for j in 5..grid.len() - 5 {
            let u_t = (later.u[j] - field.u[j]) / dt;
            let direct = u_t - p.mu * visc_x[j];
            max_f = max_f.max(field.f[j].abs());
            max_err = max_err.max((direct - field.f[j]).abs());
        }
        assert!(max_f > 1e-4, "defect too small to test: {max_f}");
        assert!(
            max_err < 0.02 * max_f,
            "max error {max_err} vs max F {max_f}"
        );
    }

    #[test]
    fn quadrature_rules_agree() {
        let p = params(0.5, 4);
        for t in [1.0, 10.0, 100.0] {
            let g = heat_kernel_theta2(0.0, t, &p, &QuadratureSpec::default()).unwrap();
            let s = heat_kernel_theta2(0.0, t, &p, &QuadratureSpec::simpson()).unwrap();
            let oracle = Theta2Oracle::new(&p, 16).value(0.0, t);
            assert!((g - s).abs() < 1e-6, "t = {t}: {g} vs {s}");
            assert!((g - oracle).abs() < 1e-6, "t = {t}: {g} vs {oracle}");
        }
    }

    #[test]
    fn theta2_limits() {
        let p = params(0.5, 4);
        let spec = QuadratureSpec::default();
        assert!((heat_kernel_theta2(-1e4, 1.0, &p, &spec).unwrap() - 0.5).abs() < 1e-9);
        assert!((heat_kernel_theta2(1e4, 1.0, &p, &spec).unwrap() - 1.0).abs() < 1e-9);
        let flat = params(1.0, 4);
        assert_eq!(heat_kernel_theta2(3.0, 7.0, &flat, &spec).unwrap(), 1.0);
        assert!(heat_kernel_theta2(0.0, 0.0, &p, &spec).is_err());
    }

    #[test]
    fn quadrature_reports_nonconvergence() {
        let p = params(0.5, 4);
        let spec = QuadratureSpec {
            initial_panels: 1,
            max_doublings: 1,
            rel_tol: 1e-15,
            ..Default::default()
        };
        assert!(matches!(
            heat_kernel_theta2(0.3, 1.0, &p, &spec),
            Err(ProfileError::QuadratureNotConverged { .. })
        ));
    }

    #[test]
    fn oracle_gradient_matches_difference_quotient() {
        let p = params(0.5, 4);
        let oracle = Theta2Oracle::new(&p, 16);
        for (x, t) in [(0.0, 1.0), (-3.0, 5.0), (10.0, 50.0)] {
            let h = 1e-4;
            let fd = (oracle.value(x + h, t) - oracle.value(x - h, t)) / (2.0 * h);
            assert!((fd - oracle.gradient(x, t)).abs() < 1e-8);
        }
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let p = params(0.5, 4);
        let grid = Grid::new(60.0, 64).unwrap();
        assert!(matches!(
            verify_theta0_bounds(&p, &grid),
            Err(ProfileError::UnderResolved { .. })
        ));
    }

    #[test]
    fn degenerate_bounds_vanish() {
        let p = params(1.0, 4);
        let grid = Grid::new(50.0, 1001).unwrap();
        let b = verify_theta0_bounds(&p, &grid).unwrap();
        assert_eq!(b.grad_l1, 0.0);
        assert_eq!(b.tail_minus_l1, 0.0);
        assert_eq!(b.tail_plus_l1, 0.0);
        assert_eq!(b.grad_sup, 0.0);
        assert_eq!(b.grad_l2_sq, 0.0);
        assert_eq!(b.ln_xx_l2_sq, 0.0);
        assert_eq!(b.ln_xxx_l2_sq, 0.0);
    }
}
