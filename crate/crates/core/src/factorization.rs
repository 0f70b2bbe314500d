//! The factorization `h1 -> h2` with `(mu Lap - d/dt) Lap h2 = h1`, done as a
//! Poisson solve `Lap v = h1` followed by a heat solve `mu Lap h2 - dh2/dt = v`.
//!
//! The heat integral as printed solves `dH/dt - mu Lap H = v`, so `h2` is its
//! negation. Diagnostics report the residual with both signs.

use crate::derivative::{derivative, laplacian};
use crate::error::Result;
use crate::grid::ScalarField;
use crate::heat::heat_time_integral;
use crate::multi_index::MultiIndex;
use crate::potential::NewtonKernel;
use serde::Serialize;

/// Widest stencil radius of the composite operator plus one node.
pub const DEFAULT_MARGIN: usize = 3;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FactorizationDiagnostics {
    pub margin: usize,
    /// `sup |Lap v - h1|` over the interior.
    pub poisson: f64,
    /// `sup |mu Lap h2 - dh2/dt - v|`.
    pub heat: f64,
    /// Same residual for the integral taken with the printed sign.
    pub heat_as_printed: f64,
    /// `sup |mu sum_jk d4 h2/dxj2 dxk2 - sum_j d3 h2/dt dxj2 - h1|`.
    pub composite: f64,
    pub h1_sup: f64,
    pub v_sup: f64,
    pub boundary_jump: f64,
}

impl FactorizationDiagnostics {
    fn rel(num: f64, den: f64) -> f64 {
        if den > 0.0 {
            num / den
        } else {
            num
        }
    }
    pub fn poisson_rel(&self) -> f64 {
        Self::rel(self.poisson, self.h1_sup)
    }
    pub fn heat_rel(&self) -> f64 {
        Self::rel(self.heat, self.v_sup)
    }
    pub fn composite_rel(&self) -> f64 {
        Self::rel(self.composite, self.h1_sup)
    }
}

/// Poisson then heat for one component: returns `(v, h2)`.
pub fn solve_one(h1: &ScalarField, mu: f64) -> (ScalarField, ScalarField) {
    let kernel = NewtonKernel::new(&h1.grid);
    let mut v = ScalarField::zeros(&h1.grid);
    for it in 0..h1.grid.n_time {
        let s = kernel.apply(h1.slice(it));
        v.slice_mut(it).copy_from_slice(&s);
    }
    let h2 = heat_time_integral(&v, mu).scale(-1.0);
    (v, h2)
}

/// The composite fourth-order operator applied to `h2`.
pub fn composite_operator(h2: &ScalarField, mu: f64) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(&h2.grid);
    for j in 1..4 {
        for k in 1..4 {
            let mut d = MultiIndex::ZERO;
            d.0[j] += 2;
            d.0[k] += 2;
            out.axpy(mu, &derivative(h2, &d)?)?;
        }
        let mut d = MultiIndex::new(1, 0, 0, 0);
        d.0[j] = 2;
        out.axpy(-1.0, &derivative(h2, &d)?)?;
    }
    Ok(out)
}

pub fn diagnose(h1: &ScalarField, v: &ScalarField, h2: &ScalarField, mu: f64, margin: usize) -> Result<FactorizationDiagnostics> {
    let poisson = laplacian(v)?.sub(h1)?.interior_sup(margin);
    let lap = laplacian(h2)?;
    let dt = derivative(h2, &MultiIndex::new(1, 0, 0, 0))?;
    let heat_op = lap.scale(mu).sub(&dt)?;
    let heat = heat_op.sub(v)?.interior_sup(margin);
    // With H = -h2 the printed-sign residual is mu Lap H - dH/dt - v.
    let heat_as_printed = heat_op.scale(-1.0).sub(v)?.interior_sup(margin);
    let composite = composite_operator(h2, mu)?.sub(h1)?.interior_sup(margin);
    Ok(FactorizationDiagnostics {
        margin,
        poisson,
        heat,
        heat_as_printed,
        composite,
        h1_sup: h1.interior_sup(margin),
        v_sup: v.interior_sup(margin),
        boundary_jump: h2.boundary_jump(),
    })
}

#[derive(Debug, Clone)]
pub struct H2Solution {
    pub v: Vec<ScalarField>,
    pub h2: Vec<ScalarField>,
    pub diagnostics: Vec<FactorizationDiagnostics>,
}

/// Componentwise `h2` for a list of `h1` fields, with diagnostics.
pub fn solve_h2(h1: &[ScalarField], mu: f64) -> Result<H2Solution> {
    let mut out = H2Solution { v: Vec::new(), h2: Vec::new(), diagnostics: Vec::new() };
    for f in h1 {
        let (v, h2) = solve_one(f, mu);
        out.diagnostics.push(diagnose(f, &v, &h2, mu, DEFAULT_MARGIN)?);
        out.v.push(v);
        out.h2.push(h2);
    }
    Ok(out)
}

/// Manufactured pair for the refinement study: `h2* = psi(x) t^2` with the
/// compact bump `psi = (1 - r^2/rho^2)^6`, and `h1` the composite operator
/// applied analytically.
pub mod manufactured {
    use crate::grid::{GridSpec, ScalarField};

    pub const POWER: i32 = 6;

    /// Radial profile `f(r) = (1 - r^2/rho^2)^6` as a polynomial in `q = r^2`.
    fn coeffs(rho: f64) -> Vec<f64> {
        // Binomial expansion of (1 - q/rho^2)^6.
        let mut c = vec![0.0; POWER as usize + 1];
        let mut binom = 1.0;
        for (k, ck) in c.iter_mut().enumerate() {
            *ck = binom * (-1.0 / (rho * rho)).powi(k as i32);
            binom = binom * (POWER as f64 - k as f64) / (k as f64 + 1.0);
        }
        c
    }

    /// Radial Laplacian of `sum c_k q^k`: `q^k -> 2k(2k+1) q^(k-1)`.
    fn lap(c: &[f64]) -> Vec<f64> {
        (1..c.len()).map(|k| c[k] * (2 * k * (2 * k + 1)) as f64).collect()
    }

    fn eval(c: &[f64], q: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, ck| acc * q + ck)
    }

    #[derive(Debug, Clone, Copy)]
    pub struct Bump {
        pub center: [f64; 3],
        pub rho: f64,
        pub mu: f64,
    }

    impl Bump {
        fn q(&self, x: [f64; 3]) -> Option<f64> {
            let q: f64 = (0..3).map(|k| (x[k] - self.center[k]).powi(2)).sum();
            (q < self.rho * self.rho).then_some(q)
        }
        pub fn psi(&self, x: [f64; 3]) -> f64 {
            self.q(x).map_or(0.0, |q| eval(&coeffs(self.rho), q))
        }
        pub fn lap_psi(&self, x: [f64; 3]) -> f64 {
            self.q(x).map_or(0.0, |q| eval(&lap(&coeffs(self.rho)), q))
        }
        pub fn bilap_psi(&self, x: [f64; 3]) -> f64 {
            self.q(x).map_or(0.0, |q| eval(&lap(&lap(&coeffs(self.rho))), q))
        }
        pub fn h2(&self, grid: &GridSpec) -> ScalarField {
            ScalarField::from_fn(grid, |t, x| self.psi(x) * t * t)
        }
        pub fn h1(&self, grid: &GridSpec) -> ScalarField {
            ScalarField::from_fn(grid, |t, x| self.mu * t * t * self.bilap_psi(x) - 2.0 * t * self.lap_psi(x))
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn radial_laplacian_matches_finite_difference() {
            let b = Bump { center: [0.0; 3], rho: 0.4, mu: 1.0 };
            let x = [0.1, -0.07, 0.12];
            let e = 1e-3;
            let mut fd = -6.0 * b.psi(x);
            for k in 0..3 {
                let (mut p, mut m) = (x, x);
                p[k] += e;
                m[k] -= e;
                fd += b.psi(p) + b.psi(m);
            }
            fd /= e * e;
            assert!((fd - b.lap_psi(x)).abs() < 1e-4 * b.lap_psi(x).abs().max(1.0));
            assert_eq!(b.psi([0.5, 0.0, 0.0]), 0.0);
            assert!((b.psi([0.0; 3]) - 1.0).abs() < 1e-15);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn zero_in_zero_out() {
        let g = GridSpec::unit_cube(9, 0.5, 5).unwrap();
        let s = solve_h2(&[ScalarField::zeros(&g)], 1.0).unwrap();
        assert!(s.h2[0].values.iter().all(|v| *v == 0.0));
        let d = &s.diagnostics[0];
        assert_eq!((d.poisson, d.heat, d.composite), (0.0, 0.0, 0.0));
    }

    #[test]
    fn composite_is_exact_on_polynomials() {
        let g = GridSpec::unit_cube(11, 1.0, 5).unwrap();
        let mu = 0.3;
        let h2 = ScalarField::from_fn(&g, |t, x| x[0].powi(4) + x[1] * x[1] * x[2] * x[2] + t * x[0] * x[0] * x[1]);
        let want = ScalarField::from_fn(&g, |_, x| mu * 32.0 - 2.0 * x[1]);
        let got = composite_operator(&h2, mu).unwrap();
        let err = got.sub(&want).unwrap().sup_norm();
        assert!(err < 1e-6, "{err}");
    }
}
