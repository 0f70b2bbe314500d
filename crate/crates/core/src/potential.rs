//! Newtonian potential `v(M0) = -(1/4pi) int_K1 h(M) / |M - M0| dM` on the
//! grid, one time slice at a time.
//!
//! Each node owns a cell of volume `V` (halved on every face it touches).
//! Off-diagonal cells use `V / r`; the self cell uses the integral of `1/r`
//! over the ball of equal volume, `2 pi a^2` with `a = (3V / 4pi)^(1/3)`.

use crate::grid::{GridSpec, ScalarField};
use std::f64::consts::PI;

/// `int_{|x|<a} 1/|x| dx` for the ball with volume `v`.
pub fn self_cell_weight(v: f64) -> f64 {
    let a = (3.0 * v / (4.0 * PI)).cbrt();
    2.0 * PI * a * a
}

/// Quadrature weight factor for node `i` of `n` along one axis.
fn face_factor(i: usize, n: usize) -> f64 {
    if i == 0 || i + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Kernel values `-(1/4pi) w(offset)` for every node offset of a grid.
#[derive(Debug, Clone)]
pub struct NewtonKernel {
    n: [usize; 3],
    table: Vec<f64>,
    factors: [Vec<f64>; 3],
}

impl NewtonKernel {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n_space;
        let h: [f64; 3] = std::array::from_fn(|k| grid.spacing(k + 1));
        let v = grid.cell_volume();
        let m: [usize; 3] = std::array::from_fn(|k| 2 * n[k] - 1);
        let mut table = Vec::with_capacity(m[0] * m[1] * m[2]);
        let c = -1.0 / (4.0 * PI);
        for a in 0..m[0] {
            let dx = (a as f64 - (n[0] - 1) as f64) * h[0];
            for b in 0..m[1] {
                let dy = (b as f64 - (n[1] - 1) as f64) * h[1];
                for d in 0..m[2] {
                    let dz = (d as f64 - (n[2] - 1) as f64) * h[2];
                    let r = (dx * dx + dy * dy + dz * dz).sqrt();
                    table.push(c * if r == 0.0 { self_cell_weight(v) } else { v / r });
                }
            }
        }
        let factors = std::array::from_fn(|k| (0..n[k]).map(|i| face_factor(i, n[k])).collect());
        NewtonKernel { n, table, factors }
    }

    fn weight(&self, s: [usize; 3]) -> f64 {
        self.factors[0][s[0]] * self.factors[1][s[1]] * self.factors[2][s[2]]
    }

    /// Potential of one slice at every node. Zero sources are skipped, so
    /// compactly supported densities cost in proportion to their support.
    pub fn apply(&self, src: &[f64]) -> Vec<f64> {
        let [n1, n2, n3] = self.n;
        let (m2, m3) = (2 * n2 - 1, 2 * n3 - 1);
        let mut out = vec![0.0; src.len()];
        for s1 in 0..n1 {
            for s2 in 0..n2 {
                for s3 in 0..n3 {
                    let val = src[(s1 * n2 + s2) * n3 + s3];
                    if val == 0.0 {
                        continue;
                    }
                    let q = val * self.weight([s1, s2, s3]);
                    for o1 in 0..n1 {
                        let a = o1 + n1 - 1 - s1;
                        for o2 in 0..n2 {
                            let b = o2 + n2 - 1 - s2;
                            let k0 = (a * m2 + b) * m3 + (n3 - 1 - s3);
                            let krow = &self.table[k0..k0 + n3];
                            let orow = &mut out[(o1 * n2 + o2) * n3..(o1 * n2 + o2 + 1) * n3];
                            for (o, k) in orow.iter_mut().zip(krow) {
                                *o += q * k;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Potential of one slice at a single node.
    pub fn at_node(&self, src: &[f64], node: [usize; 3]) -> f64 {
        let [n1, n2, n3] = self.n;
        let (m2, m3) = (2 * n2 - 1, 2 * n3 - 1);
        let mut acc = 0.0;
        for s1 in 0..n1 {
            let a = node[0] + n1 - 1 - s1;
            for s2 in 0..n2 {
                let b = node[1] + n2 - 1 - s2;
                for s3 in 0..n3 {
                    let val = src[(s1 * n2 + s2) * n3 + s3];
                    if val != 0.0 {
                        let k = self.table[(a * m2 + b) * m3 + node[2] + n3 - 1 - s3];
                        acc += val * self.weight([s1, s2, s3]) * k;
                    }
                }
            }
        }
        acc
    }
}

pub fn newtonian_potential(h: &ScalarField) -> ScalarField {
    let kernel = NewtonKernel::new(&h.grid);
    let mut out = ScalarField::zeros(&h.grid);
    for it in 0..h.grid.n_time {
        let v = kernel.apply(h.slice(it));
        out.slice_mut(it).copy_from_slice(&v);
    }
    out
}

/// Fraction of each node's cell lying inside a ball, by midpoint sampling
/// with `sub^3` points in cells the sphere crosses.
pub fn ball_volume_fraction(grid: &GridSpec, center: [f64; 3], radius: f64, sub: usize) -> Vec<f64> {
    let [n1, n2, n3] = grid.n_space;
    let h: [f64; 3] = std::array::from_fn(|k| grid.spacing(k + 1));
    let half_diag = 0.5 * (h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt();
    let offs: Vec<f64> = (0..sub).map(|i| (i as f64 + 0.5) / sub as f64 - 0.5).collect();
    let mut out = Vec::with_capacity(n1 * n2 * n3);
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                let p = grid.point([i, j, k]);
                let d: [f64; 3] = std::array::from_fn(|a| p[a] - center[a]);
                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let frac = if r + half_diag <= radius {
                    1.0
                } else if r - half_diag >= radius {
                    0.0
                } else {
                    let mut inside = 0usize;
                    for ox in &offs {
                        for oy in &offs {
                            for oz in &offs {
                                let x = d[0] + ox * h[0];
                                let y = d[1] + oy * h[1];
                                let z = d[2] + oz * h[2];
                                if x * x + y * y + z * z < radius * radius {
                                    inside += 1;
                                }
                            }
                        }
                    }
                    inside as f64 / (sub * sub * sub) as f64
                };
                out.push(frac);
            }
        }
    }
    out
}

/// `M(K1) = max_{M0} (1/4pi) int_K1 1/r`, as the largest nodal value of the
/// discrete potential of the unit density (sign flipped).
pub fn estimate_mk1(grid: &GridSpec) -> f64 {
    let kernel = NewtonKernel::new(grid);
    let ones = vec![1.0; grid.slice_len()];
    kernel.apply(&ones).into_iter().fold(0.0, |m, v| m.max(-v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_density_gives_zero() {
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let v = newtonian_potential(&ScalarField::zeros(&g));
        assert!(v.values.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn point_and_full_evaluation_agree() {
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let h = ScalarField::from_fn(&g, |t, x| (1.0 + t) * (x[0] - 0.3).powi(2) * x[1] + x[2]);
        let k = NewtonKernel::new(&g);
        let full = k.apply(h.slice(2));
        for node in [[0, 0, 0], [4, 4, 4], [8, 3, 1]] {
            let i = (node[0] * 9 + node[1]) * 9 + node[2];
            assert!((k.at_node(h.slice(2), node) - full[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn nonnegative_density_gives_nonpositive_potential() {
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let h = ScalarField::from_fn(&g, |t, x| t + x[0] * x[1]);
        assert!(newtonian_potential(&h).values.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn linearity() {
        let g = GridSpec::unit_cube(9, 1.0, 5).unwrap();
        let f = ScalarField::from_fn(&g, |t, x| (3.0 * x[0]).sin() + t);
        let q = ScalarField::from_fn(&g, |_, x| x[1] * x[2]);
        let lhs = newtonian_potential(&f.scale(2.0).add(&q.scale(-3.0)).unwrap());
        let rhs = newtonian_potential(&f).scale(2.0).add(&newtonian_potential(&q).scale(-3.0)).unwrap();
        assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-13 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn self_weight_closed_form() {
        // Ball of radius 1: volume 4pi/3, integral of 1/r is 2pi.
        assert!((self_cell_weight(4.0 * PI / 3.0) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn mk1_shrinks_with_the_box() {
        let mut last = f64::INFINITY;
        for e in [1.0, 0.8, 0.5, 0.25] {
            let g = GridSpec::new([0.0; 3], [e; 3], [9; 3], 1.0, 5).unwrap();
            let m = estimate_mk1(&g);
            assert!(m > 0.0 && m < last);
            last = m;
        }
    }
}
