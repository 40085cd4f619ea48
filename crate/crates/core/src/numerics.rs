//! Finite differences, grid quadrature and Gauss–Legendre rules.
//!
//! Interior derivatives are second-order centered; the two boundary nodes use
//! second-order one-sided stencils. All reductions run left to right so that
//! results do not depend on any scheduling.

/// Centered first derivative.
pub fn d1(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "d1 needs at least 3 nodes");
    let mut out = vec![0.0; n];
    let inv = 0.5 / dx;
    for j in 1..n - 1 {
        out[j] = (f[j + 1] - f[j - 1]) * inv;
    }
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
    out
}

/// Centered second derivative.
pub fn d2(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "d2 needs at least 4 nodes");
    let mut out = vec![0.0; n];
    let inv = 1.0 / (dx * dx);
    for j in 1..n - 1 {
        out[j] = (f[j + 1] - 2.0 * f[j] + f[j - 1]) * inv;
    }
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
    out
}

/// Trapezoid rule over the whole grid.
pub fn trapezoid(f: &[f64], dx: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..n - 1].iter().sum();
    dx * (inner + 0.5 * (f[0] + f[n - 1]))
}

/// Trapezoid rule of `g(f_j)` without materialising the mapped array.
pub fn trapezoid_map(f: &[f64], dx: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = f[1..n - 1].iter().map(|&v| g(v)).sum();
    dx * (inner + 0.5 * (g(f[0]) + g(f[n - 1])))
}

/// `∫ f² dx` by the trapezoid rule.
pub fn l2_sq(f: &[f64], dx: f64) -> f64 {
    trapezoid_map(f, dx, |v| v * v)
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(z) and P_{n-1}(z)
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite rule over `[a, b]` with `panels` equal panels.
#[derive(Debug, Clone)]
pub struct CompositeGauss {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeGauss {
    pub fn new(a: f64, b: f64, panels: usize, order: usize) -> Self {
        let (z, w) = gauss_legendre(order);
        let h = (b - a) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * order);
        let mut weights = Vec::with_capacity(panels * order);
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (zi, wi) in z.iter().zip(&w) {
                nodes.push(mid + 0.5 * h * zi);
                weights.push(0.5 * h * wi);
            }
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) subintervals.
pub fn simpson(a: f64, b: f64, intervals: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_exact_on_quadratics() {
        let dx = 0.1;
        let f: Vec<f64> = (0..20)
            .map(|j| (j as f64 * dx).powi(2) - 3.0 * j as f64 * dx)
            .collect();
        let df = d1(&f, dx);
        let ddf = d2(&f, dx);
        for j in 0..20 {
            let x = j as f64 * dx;
            assert!((df[j] - (2.0 * x - 3.0)).abs() < 1e-10, "d1 at {j}");
            assert!((ddf[j] - 2.0).abs() < 1e-9, "d2 at {j}");
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 8, 12] {
            let (z, w) = gauss_legendre(n);
            let total: f64 = w.iter().sum();
            assert!((total - 2.0).abs() < 1e-13);
            // exact up to degree 2n-1
            let deg = 2 * n - 2;
            let q: f64 = z
                .iter()
                .zip(&w)
                .map(|(x, wi)| wi * x.powi(deg as i32))
                .sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn composite_rules_agree_on_gaussian() {
        let exact = std::f64::consts::PI.sqrt() * libm::erf(3.0);
        let g = CompositeGauss::new(-3.0, 3.0, 16, 8).integrate(|x| (-x * x).exp());
        let s = simpson(-3.0, 3.0, 2000, |x| (-x * x).exp());
        assert!((g - exact).abs() < 1e-13);
        assert!((s - exact).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_of_linear_is_exact() {
        let dx = 0.25;
        let f: Vec<f64> = (0..9).map(|j| 1.0 + j as f64 * dx).collect();
        assert!((trapezoid(&f, dx) - 4.0).abs() < 1e-14);
    }
}
