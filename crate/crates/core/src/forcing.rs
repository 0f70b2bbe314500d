//! Forcing `F = (F1, F2, F3)` on the grid. Bumps are steady in time and
//! compactly supported strictly inside the box.

use crate::error::{Error, Result};
use crate::grid::{read_field, GridSpec, ScalarField};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Zero,
    /// `A exp(-r^2 / 2 w^2) (1 - r^2/R^2)^2` for `r < R`; `R` defaults to `3w`.
    GaussianBump {
        center: [f64; 3],
        width: f64,
        amplitude: [f64; 3],
        #[serde(default)]
        support: Option<f64>,
    },
    /// `A (1 - r^2/R^2)^3` for `r < R`.
    PolynomialBump { center: [f64; 3], radius: f64, amplitude: [f64; 3] },
    /// Three field files written by `write_field`.
    GridFile { paths: [PathBuf; 3] },
}

impl ForcingSpec {
    fn support(&self) -> Option<([f64; 3], f64)> {
        match self {
            ForcingSpec::GaussianBump { center, width, support, .. } => Some((*center, support.unwrap_or(3.0 * width))),
            ForcingSpec::PolynomialBump { center, radius, .. } => Some((*center, *radius)),
            _ => None,
        }
    }

    fn amplitude(&self) -> Option<[f64; 3]> {
        match self {
            ForcingSpec::GaussianBump { amplitude, .. } | ForcingSpec::PolynomialBump { amplitude, .. } => Some(*amplitude),
            _ => None,
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if let ForcingSpec::GaussianBump { width, .. } = self {
            if !(*width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {width}")));
            }
        }
        if let Some(a) = self.amplitude() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("forcing amplitude must be finite".into()));
            }
        }
        if let Some((c, r)) = self.support() {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidParameter(format!("bump support radius must be positive, got {r}")));
            }
            for k in 0..3 {
                let (lo, hi) = (grid.origin[k], grid.origin[k] + grid.extent[k]);
                if c[k] - r <= lo || c[k] + r >= hi {
                    return Err(Error::InvalidParameter(format!(
                        "bump support [{}, {}] along x{} is not strictly inside [{lo}, {hi}]",
                        c[k] - r,
                        c[k] + r,
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ForcingSpec::Zero => true,
            _ => self.amplitude().is_some_and(|a| a.iter().all(|v| *v == 0.0)),
        }
    }

    /// The same forcing with amplitudes multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            ForcingSpec::GaussianBump { amplitude, .. } | ForcingSpec::PolynomialBump { amplitude, .. } => {
                amplitude.iter_mut().for_each(|a| *a *= s)
            }
            _ => {}
        }
        out
    }

    /// Radial profile in `[0, 1]` of the bump kinds.
    fn profile(&self, x: [f64; 3]) -> f64 {
        let Some((c, r)) = self.support() else { return 0.0 };
        let q: f64 = (0..3).map(|k| (x[k] - c[k]).powi(2)).sum();
        if q >= r * r {
            return 0.0;
        }
        let cut = 1.0 - q / (r * r);
        match self {
            ForcingSpec::GaussianBump { width, .. } => (-q / (2.0 * width * width)).exp() * cut * cut,
            _ => cut * cut * cut,
        }
    }

    pub fn fields(&self, grid: &GridSpec) -> Result<Vec<ScalarField>> {
        self.validate(grid)?;
        match self {
            ForcingSpec::Zero => Ok(vec![ScalarField::zeros(grid); 3]),
            ForcingSpec::GridFile { paths } => paths
                .iter()
                .map(|p| {
                    let f = read_field(p)?;
                    if !f.grid.same_shape(grid) {
                        return Err(Error::GridMismatch(format!("{} does not match the configured grid", p.display())));
                    }
                    Ok(f)
                })
                .collect(),
            _ => {
                let a = self.amplitude().unwrap_or_default();
                let prof = ScalarField::from_fn(grid, |_, x| self.profile(x));
                Ok(a.iter().map(|&ak| prof.scale(ak)).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump() -> ForcingSpec {
        ForcingSpec::GaussianBump { center: [0.5; 3], width: 0.1, amplitude: [1.0, -0.5, 0.25], support: None }
    }

    #[test]
    fn bump_vanishes_on_the_boundary() {
        let g = GridSpec::unit_cube(17, 1.0, 5).unwrap();
        for f in bump().fields(&g).unwrap() {
            assert_eq!(f.boundary_jump(), 0.0);
        }
        let f = bump().fields(&g).unwrap();
        assert!((f[0].get(0, [8, 8, 8]) - 1.0).abs() < 1e-15);
        assert!((f[1].get(3, [8, 8, 8]) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn support_must_be_inside() {
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let f = ForcingSpec::PolynomialBump { center: [0.2, 0.5, 0.5], radius: 0.25, amplitude: [1.0; 3] };
        assert!(matches!(f.validate(&g), Err(Error::InvalidParameter(_))));
        assert!(bump().validate(&g).is_ok());
    }

    #[test]
    fn scaling_and_zero() {
        assert!(ForcingSpec::Zero.is_zero());
        assert!(bump().scaled(0.0).is_zero());
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let a = bump().fields(&g).unwrap();
        let b = bump().scaled(3.0).fields(&g).unwrap();
        assert!(a[2].scale(3.0).sub(&b[2]).unwrap().sup_norm() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let s = toml::to_string(&bump()).unwrap();
        assert_eq!(toml::from_str::<ForcingSpec>(&s).unwrap(), bump());
    }
}
