//! Gas constants, the sharpness parameter and the truncated spatial mesh.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::ParamError;

/// Profile sharpness `δ₀ = 1/(2k+1)`, stored by its odd reciprocal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Delta0 {
    reciprocal: u32,
}

impl Delta0 {
    pub fn from_reciprocal(reciprocal: u32) -> Result<Self, ParamError> {
        if reciprocal == 0 || reciprocal.is_multiple_of(2) {
            return Err(ParamError::Invalid {
                field: "delta0",
                reason: format!("reciprocal must be an odd positive integer, got {reciprocal}"),
            });
        }
        Ok(Self { reciprocal })
    }

    /// `δ₀ = 1/(2k+1)`.
    pub fn from_k(k: u32) -> Self {
        Self {
            reciprocal: 2 * k + 1,
        }
    }

    pub fn reciprocal(self) -> u32 {
        self.reciprocal
    }

    pub fn value(self) -> f64 {
        1.0 / self.reciprocal as f64
    }
}

impl Default for Delta0 {
    fn default() -> Self {
        Self::from_k(4)
    }
}

impl fmt::Display for Delta0 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1/{}", self.reciprocal)
    }
}

impl FromStr for Delta0 {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: String| ParamError::Invalid {
            field: "delta0",
            reason,
        };
        let s = s.trim();
        let (num, den) = s.split_once('/').ok_or_else(|| {
            bad(format!(
                "expected a rational of the form \"1/n\", got {s:?}"
            ))
        })?;
        let num: u32 = num
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad numerator in {s:?}")))?;
        let den: u32 = den
            .trim()
            .parse()
            .map_err(|_| bad(format!("bad denominator in {s:?}")))?;
        if num != 1 {
            return Err(bad(format!("numerator must be 1, got {num}")));
        }
        Self::from_reciprocal(den)
    }
}

impl Serialize for Delta0 {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Delta0 {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Physical constants of the polytropic gas and the far-field states.
///
/// Derived quantities (`v₋`, `p₊`, the profile diffusivity `a`, `C_v`) are
/// methods so they can never drift from the primary fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysParams {
    #[serde(rename = "R")]
    pub gas_constant: f64,
    pub gamma: f64,
    pub mu: f64,
    pub kappa: f64,
    pub theta_minus: f64,
    pub theta_plus: f64,
    pub v_plus: f64,
    pub delta0: Delta0,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            gas_constant: 1.0,
            gamma: 5.0 / 3.0,
            mu: 1.0,
            kappa: 1.0,
            theta_minus: 0.5,
            theta_plus: 1.0,
            v_plus: 1.0,
            delta0: Delta0::default(),
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), ParamError> {
        fn positive(field: &'static str, value: f64) -> Result<(), ParamError> {
            if value.is_finite() && value > 0.0 {
                Ok(())
            } else {
                Err(ParamError::Invalid {
                    field,
                    reason: format!("{field} must be finite and positive, got {value}"),
                })
            }
        }
        if !(self.gamma.is_finite() && self.gamma > 1.0) {
            return Err(ParamError::Invalid {
                field: "gamma",
                reason: format!("gamma must exceed 1, got {}", self.gamma),
            });
        }
        positive("R", self.gas_constant)?;
        positive("mu", self.mu)?;
        positive("kappa", self.kappa)?;
        positive("theta_minus", self.theta_minus)?;
        positive("theta_plus", self.theta_plus)?;
        positive("v_plus", self.v_plus)?;
        Ok(())
    }

    pub fn v_minus(&self) -> f64 {
        self.v_plus * self.theta_minus / self.theta_plus
    }

    pub fn p_plus(&self) -> f64 {
        self.gas_constant * self.theta_plus / self.v_plus
    }

    /// Diffusivity `a = κ p₊ (γ−1) / (γ R²)` of the profile equation `Θ_t = a (ln Θ)_xx`.
    pub fn diffusivity(&self) -> f64 {
        let r = self.gas_constant;
        self.kappa * self.p_plus() * (self.gamma - 1.0) / (self.gamma * r * r)
    }

    pub fn cv(&self) -> f64 {
        self.gas_constant / (self.gamma - 1.0)
    }

    /// Factor `κ(γ−1)/(γR)` relating `U` to `(ln Θ)_x`.
    pub fn velocity_factor(&self) -> f64 {
        self.kappa * (self.gamma - 1.0) / (self.gamma * self.gas_constant)
    }

    /// Viscosity at which the momentum defect of the profile vanishes identically.
    pub fn defect_free_mu(&self) -> f64 {
        self.diffusivity() * self.gas_constant / self.p_plus()
    }

    pub fn theta_min(&self) -> f64 {
        self.theta_minus.min(self.theta_plus)
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_minus.max(self.theta_plus)
    }

    /// Wave strength `|θ₊ − θ₋|`.
    pub fn strength(&self) -> f64 {
        (self.theta_plus - self.theta_minus).abs()
    }
}

/// Uniform mesh on `[-L, L]` standing in for the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_nodes: usize,
}

pub const MIN_NODES: usize = 64;

impl Grid {
    pub fn new(half_width: f64, n_nodes: usize) -> Result<Self, ParamError> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(ParamError::Invalid {
                field: "half_width",
                reason: format!("half_width must be finite and positive, got {half_width}"),
            });
        }
        if n_nodes < MIN_NODES {
            return Err(ParamError::Invalid {
                field: "n_nodes",
                reason: format!("n_nodes must be at least {MIN_NODES}, got {n_nodes}"),
            });
        }
        Ok(Self {
            half_width,
            n_nodes,
        })
    }

    /// Grid whose spacing is at most `dx`.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self, ParamError> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(ParamError::Invalid {
                field: "dx",
                reason: format!("dx must be finite and positive, got {dx}"),
            });
        }
        let cells = (2.0 * half_width / dx).ceil() as usize;
        Self::new(half_width, (cells + 1).max(MIN_NODES))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_nodes
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n_nodes - 1) as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        if j + 1 == self.n_nodes {
            self.half_width
        } else {
            -self.half_width + j as f64 * self.dx()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|j| self.x(j)).collect()
    }

    /// Same interval with the spacing halved `levels` times; every old node is kept.
    pub fn refined(&self, levels: u32) -> Self {
        Self {
            half_width: self.half_width,
            n_nodes: (self.n_nodes - 1) * (1usize << levels) + 1,
        }
    }

    /// Closest node to `x`.
    pub fn index_of(&self, x: f64) -> usize {
        let j = ((x + self.half_width) / self.dx()).round();
        (j.max(0.0) as usize).min(self.n_nodes - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta0_parsing() {
        assert_eq!("1/9".parse::<Delta0>().unwrap().reciprocal(), 9);
        assert_eq!(" 1 / 33 ".parse::<Delta0>().unwrap(), Delta0::from_k(16));
        assert!("1/10".parse::<Delta0>().is_err());
        assert!("2/9".parse::<Delta0>().is_err());
        assert!("0.1".parse::<Delta0>().is_err());
    }

    #[test]
    fn derived_quantities() {
        let p = PhysParams::default();
        p.validate().unwrap();
        assert_eq!(p.v_minus() / p.theta_minus, p.v_plus / p.theta_plus);
        assert!((p.diffusivity() - 0.4).abs() < 1e-15);
        assert!((p.cv() - 1.5).abs() < 1e-15);
        // R a / p₊ equals the velocity factor, so V_t = U_x for the profile
        assert!(
            (p.gas_constant * p.diffusivity() / p.p_plus() - p.velocity_factor()).abs() < 1e-15
        );
    }

    #[test]
    fn gamma_must_exceed_one() {
        let p = PhysParams {
            gamma: 1.0,
            ..Default::default()
        };
        let err = p.validate().unwrap_err().to_string();
        assert!(err.contains("gamma must exceed 1"), "{err}");
    }

    #[test]
    fn grid_endpoints_and_refinement() {
        let g = Grid::new(10.0, 101).unwrap();
        assert_eq!(g.x(0), -10.0);
        assert_eq!(g.x(100), 10.0);
        assert!((g.dx() - 0.2).abs() < 1e-15);
        let f = g.refined(2);
        assert_eq!(f.len(), 401);
        for j in 0..g.len() {
            assert!((f.x(4 * j) - g.x(j)).abs() < 1e-12);
        }
        assert!(Grid::new(1.0, 10).is_err());
    }
}
