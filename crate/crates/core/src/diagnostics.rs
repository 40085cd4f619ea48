//! Norms, entropy functionals, running dissipation integrals and power-law
//! decay fits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::DiagnosticsError;
use crate::lagrangian::{FlowField, Perturbation};
use crate::numerics;
use crate::params::{Grid, PhysParams};
use crate::profile::{log_derivative_norms, ProfileField, ProfileHistory, Theta2Oracle};

/// `Φ(z) = z − ln z − 1`.
pub fn phi_entropy(z: f64) -> Result<f64, DiagnosticsError> {
    if !(z > 0.0) {
        return Err(DiagnosticsError::Domain(z));
    }
    Ok(z - z.ln() - 1.0)
}

/// `Ψ(z) = 1/z + ln z − 1`.
pub fn psi_entropy(z: f64) -> Result<f64, DiagnosticsError> {
    if !(z > 0.0) {
        return Err(DiagnosticsError::Domain(z));
    }
    Ok(1.0 / z + z.ln() - 1.0)
}

/// Squared `L²` and `H¹` norms and the nodal maximum of `(φ, ψ, ζ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

pub fn norms(pert: &Perturbation, grid: &Grid) -> Norms {
    let dx = grid.dx();
    let mut out = Norms::default();
    for c in pert.components() {
        let l2 = numerics::l2_sq(c, dx);
        out.l2 += l2;
        out.h1 += l2 + numerics::l2_sq(&numerics::d1(c, dx), dx);
        out.linf = out.linf.max(numerics::max_abs(c));
    }
    out
}

/// `∫ (RΘ Φ(v/V) + ψ²/2 + C_v Θ Φ(θ/Θ)) dx`.
pub fn relative_entropy(
    state: &FlowField,
    profile: &ProfileField,
    params: &PhysParams,
    grid: &Grid,
) -> Result<f64, DiagnosticsError> {
    let n = grid.len();
    let (r, cv) = (params.gas_constant, params.cv());
    let mut integrand = vec![0.0; n];
    for j in 0..n {
        let psi = state.u[j] - profile.u[j];
        integrand[j] = r * profile.theta[j] * phi_entropy(state.v[j] / profile.v[j])?
            + 0.5 * psi * psi
            + cv * profile.theta[j] * phi_entropy(state.theta[j] / profile.theta[j])?;
    }
    Ok(numerics::trapezoid(&integrand, grid.dx()))
}

/// Pointwise bounds `[c₁, c₂]` of the quadratic form that `E` reduces to for
/// small perturbations: the extreme values of `p₊/(2V)`, `1/2`, `C_v/(2Θ)`.
pub fn entropy_equivalence_bounds(profile: &ProfileField, params: &PhysParams) -> (f64, f64) {
    let p_plus = params.p_plus();
    let cv = params.cv();
    let mut lo: f64 = 0.5;
    let mut hi: f64 = 0.5;
    for (v, t) in profile.v.iter().zip(&profile.theta) {
        for w in [p_plus / (2.0 * v), cv / (2.0 * t)] {
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
    pub rel_entropy: f64,
    /// `∫₀ᵗ (‖φ_x‖² + ‖ψ_x‖² + ‖ψ_xx‖² + ‖ζ_x‖² + ‖ζ_xx‖²) dτ`.
    pub dissipation_accum: f64,
}

/// Per-time integrands accumulated by [`EnergyTracker`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Rates {
    dissipation: f64,
    first_order: f64,
    weighted: f64,
    source: f64,
}

fn rates(pert: &Perturbation, state: &FlowField, profile: &ProfileField, grid: &Grid) -> Rates {
    let dx = grid.dx();
    let phi_x = numerics::d1(&pert.phi, dx);
    let psi_x = numerics::d1(&pert.psi, dx);
    let zeta_x = numerics::d1(&pert.zeta, dx);
    let psi_xx = numerics::d2(&pert.psi, dx);
    let zeta_xx = numerics::d2(&pert.zeta, dx);
    let first_order = numerics::l2_sq(&phi_x, dx) + numerics::l2_sq(&zeta_x, dx);
    let dissipation = first_order
        + numerics::l2_sq(&psi_x, dx)
        + numerics::l2_sq(&psi_xx, dx)
        + numerics::l2_sq(&zeta_xx, dx);
    let n = grid.len();
    let mut weighted = vec![0.0; n];
    let mut source = vec![0.0; n];
    for j in 0..n {
        let tx = profile.theta_x[j];
        weighted[j] = tx * tx * (pert.phi[j].powi(2) + pert.zeta[j].powi(2));
        source[j] = (profile.f[j] * pert.psi[j]).abs()
            + (profile.g[j] * pert.zeta[j] / state.theta[j]).abs();
    }
    Rates {
        dissipation,
        first_order,
        weighted: numerics::trapezoid(&weighted, dx),
        source: numerics::trapezoid(&source, dx),
    }
}

/// Running time integrals of the perturbation, updated once per accepted step
/// by the trapezoid rule in time.
#[derive(Debug, Clone)]
pub struct EnergyTracker {
    last: Option<(f64, Rates)>,
    /// `∫₀ᵗ` of the full dissipation rate.
    pub dissipation: f64,
    /// `∫₀ᵗ ‖(φ_x, ζ_x)‖² dτ`.
    pub first_order_dissipation: f64,
    /// `∫₀ᵗ ∫ Θ_x² (φ² + ζ²) dx dτ`.
    pub weighted: f64,
    /// `∫₀ᵗ ∫ (|F ψ| + |G ζ / θ|) dx dτ`.
    pub source_budget: f64,
}

impl Default for EnergyTracker {
    fn default() -> Self {
        Self::new()
    }
}

impl EnergyTracker {
    pub fn new() -> Self {
        Self {
            last: None,
            dissipation: 0.0,
            first_order_dissipation: 0.0,
            weighted: 0.0,
            source_budget: 0.0,
        }
    }

    pub fn update(
        &mut self,
        pert: &Perturbation,
        state: &FlowField,
        profile: &ProfileField,
        grid: &Grid,
    ) {
        let now = rates(pert, state, profile, grid);
        if let Some((t0, prev)) = self.last {
            let h = 0.5 * (pert.t - t0);
            self.dissipation += h * (prev.dissipation + now.dissipation);
            self.first_order_dissipation += h * (prev.first_order + now.first_order);
            self.weighted += h * (prev.weighted + now.weighted);
            self.source_budget += h * (prev.source + now.source);
        }
        self.last = Some((pert.t, now));
    }

    pub fn report(
        &self,
        pert: &Perturbation,
        state: &FlowField,
        profile: &ProfileField,
        params: &PhysParams,
        grid: &Grid,
    ) -> Result<EnergyReport, DiagnosticsError> {
        let n = norms(pert, grid);
        Ok(EnergyReport {
            t: pert.t,
            l2: n.l2,
            h1: n.h1,
            linf: n.linf,
            rel_entropy: relative_entropy(state, profile, params, grid)?,
            dissipation_accum: self.dissipation,
        })
    }
}

/// Squared norm sampled in time.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DecaySeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self, DiagnosticsError> {
        let series = Self { times, values };
        series.validate()?;
        Ok(series)
    }

    pub fn validate(&self) -> Result<(), DiagnosticsError> {
        if self.times.len() != self.values.len() {
            return Err(DiagnosticsError::InvalidSeries(
                self.times.len().min(self.values.len()),
            ));
        }
        for i in 0..self.times.len() {
            let bad_time =
                !(self.times[i] >= 0.0) || (i > 0 && !(self.times[i] > self.times[i - 1]));
            let bad_value = !(self.values[i].is_finite() && self.values[i] >= 0.0);
            if bad_time || bad_value {
                return Err(DiagnosticsError::InvalidSeries(i));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, t: f64, value: f64) {
        self.times.push(t);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.values.last()?))
    }

    /// Value at the last sample with `t ≤ at`.
    pub fn value_at(&self, at: f64) -> Option<f64> {
        let k = self.times.partition_point(|&t| t <= at);
        k.checked_sub(1).map(|i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Restriction to `t ≤ t_end`.
    pub fn truncated(&self, t_end: f64) -> Self {
        let k = self.times.partition_point(|&t| t <= t_end);
        Self {
            times: self.times[..k].to_vec(),
            values: self.values[..k].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent: f64,
    pub log_constant: f64,
    pub rms_residual: f64,
    pub window: (f64, f64),
}

pub const MIN_FIT_SAMPLES: usize = 8;

/// Least-squares fit of `ln value = log_constant + exponent · ln(1+t)` over
/// the samples with `t` inside `window`.
pub fn fit_power_law(
    series: &DecaySeries,
    window: (f64, f64),
) -> Result<FitResult, DiagnosticsError> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in series.times.iter().zip(&series.values) {
        if t < window.0 || t > window.1 {
            continue;
        }
        if !(v > 0.0) {
            return Err(DiagnosticsError::NonpositiveValue { t, value: v });
        }
        xs.push((1.0 + t).ln());
        ys.push(v.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            found: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let exponent = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let log_constant = my - exponent * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - log_constant - exponent * x).powi(2))
        .sum();
    Ok(FitResult {
        exponent,
        log_constant,
        rms_residual: (rss / n).sqrt(),
        window,
    })
}

/// Keys of [`profile_decay_suite`].
pub const PROFILE_SERIES: [&str; 8] = [
    "ln_theta_x_sq",
    "ln_theta_xx_sq",
    "ln_theta_xxx_sq",
    "sup_dev_minus_sq",
    "sup_dev_plus_sq",
    "int_ln_theta_xx_sq",
    "int_ln_theta_x_sq",
    "weighted_ln_theta_xx_sq",
];

/// Decay monitors of an evolved profile at its snapshot times.
pub fn profile_decay_suite(
    history: &ProfileHistory,
    params: &PhysParams,
    grid: &Grid,
) -> BTreeMap<String, DecaySeries> {
    let mut out: BTreeMap<String, DecaySeries> = PROFILE_SERIES
        .iter()
        .map(|k| (k.to_string(), DecaySeries::default()))
        .collect();
    let mid = grid.index_of(0.0);
    for (i, snap) in history.snapshots.iter().enumerate() {
        let t = snap.t;
        let [d1, d2, d3] = log_derivative_norms(&snap.theta, grid.dx());
        let dev = |range: &[f64], far: f64| {
            range
                .iter()
                .fold(0.0_f64, |m, th| m.max((th - far).abs()))
                .powi(2)
        };
        let sup_minus = dev(&snap.theta[..mid], params.theta_minus);
        let sup_plus = dev(&snap.theta[mid..], params.theta_plus);
        let entries = [
            d1,
            d2,
            d3,
            sup_minus,
            sup_plus,
            history.int_ln_xx_sq[i],
            history.int_ln_x_sq[i],
            (1.0 + t) * d2,
        ];
        for (key, value) in PROFILE_SERIES.iter().zip(entries) {
            out.get_mut(*key).expect("registered key").push(t, value);
        }
    }
    out
}

/// `‖θ₂ₓ(t)‖²` of the heat-kernel reference sampled on the grid.
pub fn oracle_gradient_series(oracle: &Theta2Oracle, grid: &Grid, times: &[f64]) -> DecaySeries {
    let xs = grid.nodes();
    let mut series = DecaySeries::default();
    for &t in times {
        let grad: Vec<f64> = xs.iter().map(|&x| oracle.gradient(x, t)).collect();
        series.push(t, numerics::l2_sq(&grad, grid.dx()));
    }
    series
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub sup_h1: f64,
    pub final_dissipation: f64,
    /// `(sup h1 + dissipation) / (h1(0) + 1)`.
    pub ratio: f64,
    /// Growth rate of the dissipation integral over the first and last quarter of the run.
    pub early_slope: f64,
    pub late_slope: f64,
    pub slope_decreasing: bool,
}

pub fn apriori_monitor(history: &[EnergyReport]) -> BoundReport {
    let Some(first) = history.first() else {
        return BoundReport {
            sup_h1: 0.0,
            final_dissipation: 0.0,
            ratio: 0.0,
            early_slope: 0.0,
            late_slope: 0.0,
            slope_decreasing: true,
        };
    };
    let last = history.last().expect("non-empty");
    let sup_h1 = history.iter().map(|r| r.h1).fold(0.0, f64::max);
    let span = last.t - first.t;
    let slope = |a: f64, b: f64| {
        let at = |t: f64| {
            let k = history.partition_point(|r| r.t <= t).max(1) - 1;
            history[k]
        };
        let (ra, rb) = (at(a), at(b));
        if rb.t > ra.t {
            (rb.dissipation_accum - ra.dissipation_accum) / (rb.t - ra.t)
        } else {
            0.0
        }
    };
    let early_slope = slope(first.t, first.t + 0.25 * span);
    let late_slope = slope(last.t - 0.25 * span, last.t);
    BoundReport {
        sup_h1,
        final_dissipation: last.dissipation_accum,
        ratio: (sup_h1 + last.dissipation_accum) / (first.h1 + 1.0),
        early_slope,
        late_slope,
        slope_decreasing: late_slope <= early_slope,
    }
}

/// First window `[t, t + window]` starting after the peak over which the
/// series ends higher than it started, as `(t, end/start)`.
pub fn sustained_growth(series: &DecaySeries, window: f64) -> Option<(f64, f64)> {
    let peak = series
        .values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0;
    let t_end = *series.times.last()?;
    for i in peak..series.len() {
        let t = series.times[i];
        if t + window > t_end {
            break;
        }
        let end = series.value_at(t + window)?;
        if end > series.values[i] {
            return Some((t, end / series.values[i]));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{make_initial, perturbation_of, InitialData};
    use crate::params::Delta0;
    use proptest::prelude::*;

    #[test]
    fn entropy_values() {
        assert_eq!(phi_entropy(1.0).unwrap(), 0.0);
        assert_eq!(psi_entropy(1.0).unwrap(), 0.0);
        let e = std::f64::consts::E;
        assert!((phi_entropy(e).unwrap() - (e - 2.0)).abs() < 1e-15);
        assert!(matches!(phi_entropy(0.0), Err(DiagnosticsError::Domain(_))));
        assert!(matches!(
            psi_entropy(-1.0),
            Err(DiagnosticsError::Domain(_))
        ));
    }

    #[test]
    fn phi_minorant() {
        for i in 0..=10_000 {
            let z = 0.1 + 9.9 * i as f64 / 10_000.0;
            let lower = (z - 1.0).powi(2) / (2.0 * z.max(1.0).powi(2)) * z.min(1.0);
            assert!(phi_entropy(z).unwrap() >= lower, "z = {z}");
        }
    }

    #[test]
    fn gaussian_norms() {
        let g = Grid::new(15.0, 6001).unwrap();
        let mut p = Perturbation::zeros(0.0, g.len());
        for (j, v) in p.phi.iter_mut().enumerate() {
            *v = 0.1 * (-g.x(j).powi(2)).exp();
        }
        let n = norms(&p, &g);
        let exact = 0.01 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((n.l2 - exact).abs() < 1e-6);
        // ‖φ_x‖² = 0.01·√(π/2)
        assert!((n.h1 - 2.0 * exact).abs() < 1e-5);
        assert!((n.linf - 0.1).abs() < 1e-15);
        assert_eq!(
            norms(&Perturbation::zeros(0.0, g.len()), &g),
            Norms::default()
        );
    }

    fn setup() -> (PhysParams, Grid, ProfileField) {
        let p = PhysParams {
            delta0: Delta0::from_k(4),
            ..Default::default()
        };
        let g = Grid::new(20.0, 801).unwrap();
        let prof = ProfileField::initial(&p, &g);
        (p, g, prof)
    }

    #[test]
    fn relative_entropy_zero_and_quadratic() {
        let (p, g, prof) = setup();
        // wide enough that the profile velocity has vanished at the pinned ends
        let wide = Grid::new(200.0, 8001).unwrap();
        let wide_prof = ProfileField::initial(&p, &wide);
        let s = make_initial(&wide_prof, &InitialData::none(), &p, &wide).unwrap();
        let e0 = relative_entropy(&s, &wide_prof, &p, &wide).unwrap();
        assert!(e0.abs() < 1e-12, "{e0}");
        let (c1, c2) = entropy_equivalence_bounds(&prof, &p);
        let mut ratios = Vec::new();
        for a in [0.01, 0.005] {
            let spec = InitialData::gaussian([a, a, a], 0.0, 1.0);
            let s = make_initial(&prof, &spec, &p, &g).unwrap();
            let pert = perturbation_of(&s, &prof, 0.0).unwrap();
            let e = relative_entropy(&s, &prof, &p, &g).unwrap();
            let r = e / norms(&pert, &g).l2;
            assert!(r > c1 && r < c2, "{c1} < {r} < {c2}");
            ratios.push(r);
        }
        assert!((ratios[0] - ratios[1]).abs() < 0.01 * ratios[0]);
    }

    #[test]
    fn relative_entropy_reflection() {
        let (p, g, prof) = setup();
        let spec = InitialData::gaussian([0.02, 0.03, 0.04], 2.0, 1.0);
        let s = make_initial(&prof, &spec, &p, &g).unwrap();
        let e = relative_entropy(&s, &prof, &p, &g).unwrap();
        let flip = |a: &[f64], sign: f64| a.iter().rev().map(|x| sign * x).collect::<Vec<_>>();
        let s2 = FlowField {
            t: 0.0,
            v: flip(&s.v, 1.0),
            u: flip(&s.u, -1.0),
            theta: flip(&s.theta, 1.0),
        };
        let mut prof2 = prof.clone();
        prof2.v = flip(&prof.v, 1.0);
        prof2.u = flip(&prof.u, -1.0);
        prof2.theta = flip(&prof.theta, 1.0);
        let e2 = relative_entropy(&s2, &prof2, &p, &g).unwrap();
        assert!((e - e2).abs() < 1e-14 * e);
    }

    #[test]
    fn exact_power_law_fit() {
        let times: Vec<f64> = (0..30).map(|k| 1.25f64.powi(k)).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| 3.0 * (1.0 + t).powf(-2.0 / 3.0))
            .collect();
        let s = DecaySeries::new(times, values).unwrap();
        let fit = fit_power_law(&s, (0.0, 1e9)).unwrap();
        assert!((fit.exponent + 2.0 / 3.0).abs() < 1e-10);
        assert!((fit.log_constant - 3f64.ln()).abs() < 1e-10);
        let flat = DecaySeries::new(s.times.clone(), vec![2.0; s.len()]).unwrap();
        assert!(fit_power_law(&flat, (0.0, 1e9)).unwrap().exponent.abs() < 1e-14);
    }

    #[test]
    fn noisy_power_law_fit() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let times: Vec<f64> = (0..32).map(|k| 1.25f64.powi(k)).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| (1.0 + t).powf(-1.5) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0)))
            .collect();
        let fit = fit_power_law(&DecaySeries::new(times, values).unwrap(), (1.0, 1e4)).unwrap();
        assert!((fit.exponent + 1.5).abs() < 0.05);
    }

    #[test]
    fn fit_errors() {
        let s = DecaySeries::new(vec![1.0, 2.0, 3.0], vec![1.0, 0.5, 0.3]).unwrap();
        assert!(matches!(
            fit_power_law(&s, (0.0, 10.0)),
            Err(DiagnosticsError::InsufficientData {
                needed: 8,
                found: 3
            })
        ));
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let mut values = vec![1.0; 10];
        values[4] = 0.0;
        let s = DecaySeries::new(times, values).unwrap();
        assert!(matches!(
            fit_power_law(&s, (0.0, 20.0)),
            Err(DiagnosticsError::NonpositiveValue { .. })
        ));
        assert!(DecaySeries::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn constant_profile_suite_is_zero() {
        let p = PhysParams {
            theta_minus: 1.0,
            ..Default::default()
        };
        let g = Grid::new(10.0, 101).unwrap();
        let prof = ProfileField::initial(&p, &g);
        let times: Vec<f64> = (1..=10).map(f64::from).collect();
        let hist = crate::profile::evolve_profile(&prof, &p, &g, &times, 1_000_000).unwrap();
        for (key, series) in profile_decay_suite(&hist, &p, &g) {
            assert!(series.values.iter().all(|&v| v == 0.0), "{key}");
        }
    }

    #[test]
    fn monitor_of_zero_run() {
        let reports: Vec<EnergyReport> = (0..5)
            .map(|k| EnergyReport {
                t: k as f64,
                l2: 0.0,
                h1: 0.0,
                linf: 0.0,
                rel_entropy: 0.0,
                dissipation_accum: 0.0,
            })
            .collect();
        let b = apriori_monitor(&reports);
        assert_eq!((b.sup_h1, b.final_dissipation), (0.0, 0.0));
        assert!(b.slope_decreasing);
    }

    #[test]
    fn growth_detector() {
        let times: Vec<f64> = (0..20).map(f64::from).collect();
        let decaying: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let s = DecaySeries::new(times.clone(), decaying).unwrap();
        assert_eq!(sustained_growth(&s, 5.0), None);
        let mut bumpy = s.values.clone();
        bumpy[15] = 1.0;
        let s = DecaySeries::new(times, bumpy).unwrap();
        assert!(sustained_growth(&s, 5.0).is_some());
    }

    proptest! {
        #[test]
        fn phi_psi_duality(z in 1e-3f64..1e3) {
            let a = phi_entropy(z).unwrap();
            let b = psi_entropy(1.0 / z).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn fit_scale_invariance(c in 1e-6f64..1e6, p in -3.0f64..0.0) {
            let times: Vec<f64> = (0..12).map(|k| 1.5f64.powi(k)).collect();
            let values: Vec<f64> = times.iter().map(|t| (1.0 + t).powf(p) * (1.0 + 0.1 * (t.sin()))).collect();
            let scaled: Vec<f64> = values.iter().map(|v| c * v).collect();
            let a = fit_power_law(&DecaySeries::new(times.clone(), values).unwrap(), (0.0, 1e6)).unwrap();
            let b = fit_power_law(&DecaySeries::new(times, scaled).unwrap(), (0.0, 1e6)).unwrap();
            prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
            prop_assert!((b.log_constant - a.log_constant - c.ln()).abs() < 1e-9);
        }

        #[test]
        fn norm_homogeneity(c in -10.0f64..10.0) {
            let g = Grid::new(5.0, 101).unwrap();
            let mut p = Perturbation::zeros(0.0, g.len());
            for j in 0..g.len() {
                let x = g.x(j);
                p.phi[j] = (-x * x).exp();
                p.psi[j] = x * (-x * x).exp();
                p.zeta[j] = 0.3 * (-(x - 1.0).powi(2)).exp();
            }
            let a = norms(&p, &g);
            let b = norms(&p.scaled(c), &g);
            prop_assert!((b.l2 - c * c * a.l2).abs() <= 1e-12 * a.l2.max(1.0) * c * c + 1e-300);
            prop_assert!((b.h1 - c * c * a.h1).abs() <= 1e-12 * a.h1.max(1.0) * c * c + 1e-300);
            prop_assert!((b.linf - c.abs() * a.linf).abs() <= 1e-14 * a.linf);
        }
    }
}
