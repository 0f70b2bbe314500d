//! Assemble `(u, p)` from the two tables and measure how far it is from
//! solving the Navier–Stokes system. Nothing here asserts smallness.

use crate::derivative::{central_radius, derivative, laplacian, MAX_SPATIAL_ORDER};
use crate::error::{Error, Result};
use crate::fixed_point::{H1State, COMPONENTS};
use crate::grid::{GridSpec, ScalarField};
use crate::multi_index::MultiIndex;
use crate::w_tables::{W1Fields, W2Fields};
use serde::{Deserialize, Serialize};

/// The table entries are up to fourth order (radius 2), the residual adds a
/// second-order stencil (radius 1), plus one node.
pub const RESIDUAL_MARGIN: usize = central_radius(MAX_SPATIAL_ORDER) + central_radius(2) + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionFields {
    pub u: [ScalarField; 3],
    pub p: ScalarField,
}

impl SolutionFields {
    pub fn zeros(grid: &GridSpec) -> Self {
        let z = ScalarField::zeros(grid);
        SolutionFields { u: [z.clone(), z.clone(), z.clone()], p: z }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.p.grid
    }
}

/// `u1 = w1_7 + w2_7`, `u2 = w1_11 + w2_11`, `u3 = w1_15 + w2_15`,
/// `p = w1_16 + w2_16`. `tau` only enters through the tables.
pub fn assemble_solution(w1: &W1Fields, w2: &W2Fields) -> Result<SolutionFields> {
    if !w1.get(1).grid.same_shape(&w2.get(1).grid) {
        return Err(Error::GridMismatch("W1 and W2 tables live on different grids".into()));
    }
    let pick = |i: usize| w1.get(i).add(w2.get(i));
    Ok(SolutionFields { u: [pick(7)?, pick(11)?, pick(15)?], p: pick(16)? })
}

#[derive(Debug, Clone)]
pub struct ResidualFields {
    pub divergence: ScalarField,
    pub momentum: [ScalarField; 3],
}

/// `div u` and `du_j/dt - mu Lap u_j + sum_k u_k du_j/dx_k + tau dp/dx_j - F_j`
/// on every node; only the interior is meaningful.
pub fn residual_fields(sol: &SolutionFields, forcing: &[ScalarField], mu: f64, tau: f64) -> Result<ResidualFields> {
    if forcing.len() != 3 {
        return Err(Error::InvalidParameter(format!("forcing needs 3 components, got {}", forcing.len())));
    }
    let grads: Vec<[ScalarField; 3]> = sol
        .u
        .iter()
        .map(|u| Ok([derivative(u, &MultiIndex::axis(1))?, derivative(u, &MultiIndex::axis(2))?, derivative(u, &MultiIndex::axis(3))?]))
        .collect::<Result<_>>()?;
    let mut divergence = grads[0][0].clone();
    divergence.axpy(1.0, &grads[1][1])?;
    divergence.axpy(1.0, &grads[2][2])?;

    let mut momentum = Vec::with_capacity(3);
    for j in 0..3 {
        let mut r = derivative(&sol.u[j], &MultiIndex::axis(0))?;
        r.axpy(-mu, &laplacian(&sol.u[j])?)?;
        for k in 0..3 {
            r.axpy(1.0, &sol.u[k].mul(&grads[j][k])?)?;
        }
        r.axpy(tau, &derivative(&sol.p, &MultiIndex::axis(j + 1))?)?;
        r.axpy(-1.0, &forcing[j])?;
        momentum.push(r);
    }
    let momentum: [ScalarField; 3] = momentum.try_into().map_err(|_| Error::Format("momentum".into()))?;
    Ok(ResidualFields { divergence, momentum })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub div_sup: f64,
    pub div_l2: f64,
    pub momentum_sup: [f64; 3],
    pub momentum_l2: [f64; 3],
    pub fixed_point_defect: [f64; COMPONENTS],
    /// Largest `|u|` or `|p|` on the box faces.
    pub boundary_jump: f64,
    pub margin: usize,
    pub grid: GridSpec,
}

impl ResidualReport {
    pub fn is_finite(&self) -> bool {
        let mut all = vec![self.div_sup, self.div_l2, self.boundary_jump];
        all.extend(self.momentum_sup);
        all.extend(self.momentum_l2);
        all.extend(self.fixed_point_defect);
        all.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.momentum_sup.iter().fold(self.div_sup, |a, b| a.max(*b))
    }
}

pub fn ns_residuals(
    sol: &SolutionFields,
    forcing: &[ScalarField],
    mu: f64,
    tau: f64,
    fixed_point_defect: [f64; COMPONENTS],
) -> Result<ResidualReport> {
    let r = residual_fields(sol, forcing, mu, tau)?;
    let m = RESIDUAL_MARGIN;
    let boundary_jump = sol.u.iter().chain([&sol.p]).map(|f| f.boundary_jump()).fold(0.0, f64::max);
    Ok(ResidualReport {
        div_sup: r.divergence.interior_sup(m),
        div_l2: r.divergence.interior_l2(m),
        momentum_sup: std::array::from_fn(|j| r.momentum[j].interior_sup(m)),
        momentum_l2: std::array::from_fn(|j| r.momentum[j].interior_l2(m)),
        fixed_point_defect,
        boundary_jump,
        margin: m,
        grid: *sol.grid(),
    })
}

/// Per-component `sup |h1 - g(h1)|`.
pub fn fixed_point_defect(h1: &H1State, g_of_h1: &H1State) -> Result<[f64; COMPONENTS]> {
    let d = h1.sub(g_of_h1)?;
    let mut out = [0.0; COMPONENTS];
    for (o, c) in out.iter_mut().zip(&d.comps) {
        *o = c.sup_norm();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceExtrema {
    pub field: String,
    pub it: usize,
    pub t: f64,
    pub min: f64,
    pub max: f64,
}

/// Interior min and max of each residual field per time level.
pub fn slice_extrema(r: &ResidualFields, margin: usize) -> Vec<SliceExtrema> {
    let named = [("div", &r.divergence), ("mom1", &r.momentum[0]), ("mom2", &r.momentum[1]), ("mom3", &r.momentum[2])];
    let [nt, n1, n2, n3] = r.divergence.grid.dims();
    let mut out = Vec::new();
    for (name, f) in named {
        for it in 0..nt {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for i in margin..n1.saturating_sub(margin) {
                for j in margin..n2.saturating_sub(margin) {
                    for k in margin..n3.saturating_sub(margin) {
                        let v = f.get(it, [i, j, k]);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
            }
            out.push(SliceExtrema { field: name.into(), it, t: f.grid.time(it), min: lo, max: hi });
        }
    }
    out
}

/// The field with `x1` and `x2` exchanged. Needs matching axes.
pub fn swap_x1_x2(f: &ScalarField) -> Result<ScalarField> {
    let g = f.grid;
    if g.n_space[0] != g.n_space[1] || g.extent[0] != g.extent[1] || g.origin[0] != g.origin[1] {
        return Err(Error::GridMismatch("x1 and x2 axes differ; cannot swap".into()));
    }
    let [nt, n1, n2, n3] = g.dims();
    let mut out = ScalarField::zeros(&g);
    for it in 0..nt {
        for i in 0..n1 {
            for j in 0..n2 {
                for k in 0..n3 {
                    let v = f.get(it, [j, i, k]);
                    let idx = out.index(it, [i, j, k]);
                    out.values[idx] = v;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    type Fun = fn(f64, [f64; 3]) -> f64;

    fn build(g: &GridSpec, u: [Fun; 3], p: Fun) -> SolutionFields {
        SolutionFields {
            u: [ScalarField::from_fn(g, u[0]), ScalarField::from_fn(g, u[1]), ScalarField::from_fn(g, u[2])],
            p: ScalarField::from_fn(g, p),
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let g = GridSpec::unit_cube(9, 0.5, 5).unwrap();
        let z = ScalarField::zeros(&g);
        let r = ns_residuals(&SolutionFields::zeros(&g), &[z.clone(), z.clone(), z], 1.0, 1.0, [0.0; 9]).unwrap();
        assert_eq!(r.max_residual(), 0.0);
        assert_eq!((r.div_l2, r.boundary_jump), (0.0, 0.0));
        assert!(r.is_finite());
        assert_eq!(r.margin, 4);
    }

    // Degree-2 fields with the analytic forcing: every stencil is exact.
    #[test]
    fn quadratics_give_machine_zero() {
        let g = GridSpec::new([-0.3, 0.1, 0.0], [1.1, 0.9, 1.3], [11, 9, 10], 0.7, 6).unwrap();
        let (mu, tau) = (0.37, 1.9);
        let u: [Fun; 3] = [|t, x| t * x[0] + x[1] * x[1], |t, x| x[0] * x[2] - t * x[1], |t, x| t * t + x[0] * x[1] - x[2] * x[2]];
        let p: Fun = |t, x| x[0] * x[0] + t * x[2] - x[1] * x[2];
        let sol = build(&g, u, p);
        let forcing = |j: usize| {
            ScalarField::from_fn(&g, move |t, x| {
                let uv = [t * x[0] + x[1] * x[1], x[0] * x[2] - t * x[1], t * t + x[0] * x[1] - x[2] * x[2]];
                let (ut, lap, grad, dp) = match j {
                    0 => (x[0], 2.0, [t, 2.0 * x[1], 0.0], 2.0 * x[0]),
                    1 => (-x[1], 0.0, [x[2], -t, x[0]], -x[2]),
                    _ => (2.0 * t, -2.0, [x[1], x[0], -2.0 * x[2]], t - x[1]),
                };
                let adv: f64 = (0..3).map(|k| uv[k] * grad[k]).sum();
                ut - 0.37 * lap + adv + 1.9 * dp
            })
        };
        let f = [forcing(0), forcing(1), forcing(2)];
        let r = residual_fields(&sol, &f, mu, tau).unwrap();
        for m in &r.momentum {
            assert!(m.sup_norm() < 1e-11, "{}", m.sup_norm());
        }
        // div u = t + (-t) + (-2 x3)
        let want = ScalarField::from_fn(&g, |_, x| -2.0 * x[2]);
        assert!(r.divergence.sub(&want).unwrap().sup_norm() < 1e-12);
    }

    fn tg(n: usize) -> f64 {
        let g = GridSpec::unit_cube(n, 0.5, n.div_ceil(2)).unwrap();
        let (mu, tau) = (0.3, 0.8);
        let s = |v: f64| (PI * v).sin();
        let c = |v: f64| (PI * v).cos();
        let u: [Fun; 3] = [
            |t, x| (-t).exp() * (PI * x[0]).sin() * (PI * x[1]).cos(),
            |t, x| -(-t).exp() * (PI * x[0]).cos() * (PI * x[1]).sin(),
            |t, x| (-t).exp() * (PI * x[2]).sin(),
        ];
        let p: Fun = |t, x| (-2.0 * t).exp() * (PI * x[0]).cos() * (PI * x[2]).cos();
        let sol = build(&g, u, p);
        let f: Vec<ScalarField> = (0..3)
            .map(|j| {
                ScalarField::from_fn(&g, |t, x| {
                    let e = (-t).exp();
                    let uv = [e * s(x[0]) * c(x[1]), -e * c(x[0]) * s(x[1]), e * s(x[2])];
                    let (grad, lap_coef): ([f64; 3], f64) = match j {
                        0 => ([PI * e * c(x[0]) * c(x[1]), -PI * e * s(x[0]) * s(x[1]), 0.0], -2.0 * PI * PI),
                        1 => ([PI * e * s(x[0]) * s(x[1]), -PI * e * c(x[0]) * c(x[1]), 0.0], -2.0 * PI * PI),
                        _ => ([0.0, 0.0, PI * e * c(x[2])], -PI * PI),
                    };
                    let pe = (-2.0 * t).exp();
                    let dp = match j {
                        0 => -PI * pe * s(x[0]) * c(x[2]),
                        1 => 0.0,
                        _ => -PI * pe * c(x[0]) * s(x[2]),
                    };
                    let adv: f64 = (0..3).map(|k| uv[k] * grad[k]).sum();
                    -uv[j] - mu * lap_coef * uv[j] + adv + tau * dp
                })
            })
            .collect();
        let r = ns_residuals(&sol, &f, mu, tau, [0.0; 9]).unwrap();
        r.momentum_sup.iter().cloned().fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_momentum_converges() {
        let (a, b, c) = (tg(9), tg(17), tg(33));
        let order = (b / c).log2();
        assert!(a > b && b > c && order >= 1.5, "{a} {b} {c} {order}");
    }

    #[test]
    fn axis_swap_permutes_residuals() {
        let g = GridSpec::unit_cube(11, 0.5, 5).unwrap();
        let sol = build(
            &g,
            [|t, x| x[0] * x[1] * x[1] + t, |t, x| (x[0] - x[2]).sin() * t, |_, x| x[0] * x[1] * x[2]],
            |t, x| x[0].exp() * x[1] + t,
        );
        let f = [ScalarField::from_fn(&g, |_, x| x[2] * x[0]), ScalarField::from_fn(&g, |t, x| t * x[1]), ScalarField::zeros(&g)];
        let swapped = SolutionFields {
            u: [swap_x1_x2(&sol.u[1]).unwrap(), swap_x1_x2(&sol.u[0]).unwrap(), swap_x1_x2(&sol.u[2]).unwrap()],
            p: swap_x1_x2(&sol.p).unwrap(),
        };
        let fs = [swap_x1_x2(&f[1]).unwrap(), swap_x1_x2(&f[0]).unwrap(), swap_x1_x2(&f[2]).unwrap()];
        let a = ns_residuals(&sol, &f, 0.4, 1.1, [0.0; 9]).unwrap();
        let b = ns_residuals(&swapped, &fs, 0.4, 1.1, [0.0; 9]).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * x.abs().max(1.0);
        assert!(close(a.momentum_sup[0], b.momentum_sup[1]) && close(a.momentum_sup[1], b.momentum_sup[0]));
        assert!(close(a.momentum_l2[2], b.momentum_l2[2]) && close(a.div_sup, b.div_sup));
    }

    #[test]
    fn defect_matches_direct_difference() {
        let g = GridSpec::unit_cube(9, 0.5, 5).unwrap();
        let a = H1State { comps: (0..9).map(|c| ScalarField::from_fn(&g, move |t, x| (c as f64 + 1.0) * x[0] * t)).collect() };
        let b = a.scale(0.25);
        let d = fixed_point_defect(&a, &b).unwrap();
        for (c, v) in d.iter().enumerate() {
            assert!((v - 0.75 * (c as f64 + 1.0) * 0.5).abs() < 1e-14);
        }
        assert_eq!(fixed_point_defect(&a, &a).unwrap(), [0.0; 9]);
    }

    #[test]
    fn slice_extrema_cover_every_level() {
        let g = GridSpec::unit_cube(9, 0.5, 5).unwrap();
        let z = ScalarField::zeros(&g);
        let r = residual_fields(&SolutionFields::zeros(&g), &[z.clone(), z.clone(), z], 1.0, 1.0).unwrap();
        let e = slice_extrema(&r, RESIDUAL_MARGIN);
        assert_eq!(e.len(), 4 * 5);
        assert!(e.iter().all(|s| s.min == 0.0 && s.max == 0.0));
    }
}
