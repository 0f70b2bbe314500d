//! Linear lift of the Navier–Stokes system.
//!
//! With `X = (u1_x1, u1_t, u2_t, u3_t, Z)` the equations read
//! `A X = (0, F1, F2, F3)` plus nine product constraints on `Z`. Every
//! solution is `X = X0(F) + Aeta Z`. The derivative bookkeeping is carried by
//! `H` (16 quantities expressed through `Z`) and `H_k` (their derivatives
//! along axis `k`), so that `d/dk (H Z + h) = H_k Z + h_k`.

use crate::error::{Error, Result};
use crate::layout::{Quantity, StateLayout, NX, NZ, X_HEAD};
use crate::linalg;
use crate::multi_index::MultiIndex;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

/// How a quantity enters a row: a unit vector of `Z` or a negated alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowRef {
    E(usize),
    NegAlpha(usize),
}

/// A quantity as `row . Z + F[forcing]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Resolved {
    pub row: RowRef,
    pub forcing: Option<usize>,
}

/// The sixteen quantities whose derivatives close the first-order system.
pub const H_QUANTITIES: [&str; 16] = [
    "u1_x1", "u1_t", "u2_t", "u3_t", "u1_x2", "u1_x3", "u1", "u2_x1", "u2_x2", "u2_x3", "u2",
    "u3_x1", "u3_x2", "u3_x3", "u3", "p",
];

#[derive(Debug, Clone)]
pub struct ConstraintMatrices {
    pub layout: StateLayout,
    pub mu: f64,
    pub tau: f64,
    pub a: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub alpha: [DVector<f64>; 4],
    pub aeta: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub hk: [DMatrix<f64>; 4],
    pub h_rows: Vec<Resolved>,
    pub hk_rows: [Vec<Resolved>; 4],
}

fn parse_quantity(layout: &StateLayout, name: &str) -> Quantity {
    layout
        .x
        .iter()
        .find(|q| q.name() == name)
        .copied()
        .unwrap_or_else(|| panic!("unknown quantity {name}"))
}

/// Express a quantity through `Z` and the forcing, using continuity for
/// `u1_x1` and the momentum equations for the time derivatives.
pub fn resolve(layout: &StateLayout, q: &Quantity) -> Option<Resolved> {
    if let Some(i) = layout.z_index_of(q) {
        return Some(Resolved { row: RowRef::E(i), forcing: None });
    }
    if *q == Quantity::u(0, MultiIndex::axis(1)) {
        return Some(Resolved { row: RowRef::NegAlpha(0), forcing: None });
    }
    for j in 0..3 {
        if *q == Quantity::u(j, MultiIndex::axis(0)) {
            return Some(Resolved { row: RowRef::NegAlpha(j + 1), forcing: Some(j) });
        }
    }
    None
}

fn alphas(layout: &StateLayout, mu: f64, tau: f64) -> [DVector<f64>; 4] {
    let mut al: [DVector<f64>; 4] = std::array::from_fn(|_| DVector::zeros(NZ));
    al[0][layout.z("u2_x2")] = 1.0;
    al[0][layout.z("u3_x3")] = 1.0;
    for j in 0..3 {
        let a = &mut al[j + 1];
        a[layout.z_index_of(&Quantity::p(MultiIndex::axis(j + 1))).unwrap()] = tau;
        for k in 1..4 {
            let mut d = MultiIndex::ZERO;
            d.0[k] = 2;
            a[layout.z_index_of(&Quantity::u(j, d)).unwrap()] = -mu;
        }
        for k in 0..3 {
            a[layout.z_index_of(&Quantity::Product { j, k }).unwrap()] = 1.0;
        }
    }
    al
}

impl ConstraintMatrices {
    pub fn row_vector(&self, r: RowRef) -> DVector<f64> {
        match r {
            RowRef::E(i) => {
                let mut v = DVector::zeros(NZ);
                v[i] = 1.0;
                v
            }
            RowRef::NegAlpha(k) => -&self.alpha[k],
        }
    }

    /// `X0 = (0, F1, F2, F3, 0_55)`.
    pub fn x0(&self, f: [f64; 3]) -> DVector<f64> {
        let mut x = DVector::zeros(NX);
        for j in 0..3 {
            x[1 + j] = f[j];
        }
        x
    }

    fn forcing_vector(rows: &[Resolved], f: [f64; 3]) -> DVector<f64> {
        DVector::from_iterator(rows.len(), rows.iter().map(|r| r.forcing.map_or(0.0, |j| f[j])))
    }

    /// `h`: forcing part of the sixteen quantities.
    pub fn h_vec(&self, f: [f64; 3]) -> DVector<f64> {
        Self::forcing_vector(&self.h_rows, f)
    }

    /// `h_k`: forcing part of their derivatives; only `k = 0` is nonzero.
    pub fn hk_vec(&self, k: usize, f: [f64; 3]) -> DVector<f64> {
        Self::forcing_vector(&self.hk_rows[k], f)
    }

    pub fn h0_vec(&self, f: [f64; 3]) -> DVector<f64> {
        self.hk_vec(0, f)
    }

    /// Names, shapes and nonzero triplets for golden comparisons.
    pub fn report(&self) -> serde_json::Value {
        fn triplets(m: &DMatrix<f64>) -> Vec<(usize, usize, f64)> {
            let mut out = Vec::new();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if m[(i, j)] != 0.0 {
                        out.push((i, j, m[(i, j)]));
                    }
                }
            }
            out
        }
        let mat = |m: &DMatrix<f64>| json!({"shape": [m.nrows(), m.ncols()], "nonzeros": triplets(m)});
        json!({
            "mu": self.mu,
            "tau": self.tau,
            "x_names": self.layout.x_names,
            "z_names": self.layout.z_names,
            "A": mat(&self.a),
            "Aeta": mat(&self.aeta),
            "H": mat(&self.h),
            "H0": mat(&self.hk[0]),
            "H1": mat(&self.hk[1]),
            "H2": mat(&self.hk[2]),
            "H3": mat(&self.hk[3]),
        })
    }
}

pub fn build_system(mu: f64, tau: f64) -> Result<ConstraintMatrices> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let layout = StateLayout::new();
    let alpha = alphas(&layout, mu, tau);

    let a1 = DMatrix::from_fn(4, NZ, |i, j| alpha[i][j]);
    let mut a = DMatrix::zeros(4, NX);
    for i in 0..4 {
        a[(i, i)] = 1.0;
    }
    a.view_mut((0, X_HEAD), (4, NZ)).copy_from(&a1);

    let mut aeta = DMatrix::zeros(NX, NZ);
    aeta.view_mut((0, 0), (4, NZ)).copy_from(&(-&a1));
    for i in 0..NZ {
        aeta[(X_HEAD + i, i)] = 1.0;
    }

    let quantities: Vec<Quantity> = H_QUANTITIES.iter().map(|n| parse_quantity(&layout, n)).collect();
    let h_rows: Vec<Resolved> = quantities
        .iter()
        .map(|q| resolve(&layout, q).expect("H quantity resolves"))
        .collect();
    let hk_rows: [Vec<Resolved>; 4] = std::array::from_fn(|k| {
        quantities
            .iter()
            .map(|q| {
                let dq = q.differentiate(k).expect("H quantities are derivatives");
                resolve(&layout, &dq)
                    .unwrap_or_else(|| panic!("{} does not close in Z", dq.name()))
            })
            .collect()
    });

    let mut cm = ConstraintMatrices {
        layout,
        mu,
        tau,
        a,
        a1,
        alpha,
        aeta,
        h: DMatrix::zeros(16, NZ),
        hk: std::array::from_fn(|_| DMatrix::zeros(16, NZ)),
        h_rows,
        hk_rows,
    };
    let stack = |cm: &ConstraintMatrices, rows: &[Resolved]| {
        let mut m = DMatrix::zeros(rows.len(), NZ);
        for (i, r) in rows.iter().enumerate() {
            m.row_mut(i).copy_from(&cm.row_vector(r.row).transpose());
        }
        m
    };
    cm.h = stack(&cm, &cm.h_rows);
    cm.hk = std::array::from_fn(|k| stack(&cm, &cm.hk_rows[k]));
    Ok(cm)
}

/// `rank(A | beta) == rank(A)` with the relative rank tolerance applied to
/// each matrix's own largest singular value.
pub fn pointwise_solvable(a: &DMatrix<f64>, beta: &DVector<f64>) -> bool {
    assert_eq!(a.nrows(), beta.len());
    let mut aug = DMatrix::zeros(a.nrows(), a.ncols() + 1);
    aug.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    aug.set_column(a.ncols(), beta);
    linalg::rank(&aug) == linalg::rank(a)
}

/// `z[lhs] - (left . z)(right . z)` for each of the nine pairs.
pub fn quadratic_residual(z: &[f64], layout: &StateLayout) -> [f64; 9] {
    assert_eq!(z.len(), NZ);
    let dot = |c: &[f64]| c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
    std::array::from_fn(|j| {
        let p = &layout.quad_pairs[j];
        z[p.lhs] - dot(&p.left) * dot(&p.right)
    })
}

#[allow(non_snake_case)]
pub fn reconstruct_X(z: &DVector<f64>, f: [f64; 3], mats: &ConstraintMatrices) -> DVector<f64> {
    mats.x0(f) + &mats.aeta * z
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    /// `max |A Aeta|`; zero when the null-space embedding is exact.
    pub a_aeta_max: f64,
    pub rank_aeta: usize,
    /// `max |A X0(F) - (0, F)|` over the trial forcings.
    pub x0_max_err: f64,
    pub trials: usize,
}

impl ConstraintMatrices {
    pub fn structure_report(&self, forcings: &[[f64; 3]]) -> StructureReport {
        let a_aeta_max = (&self.a * &self.aeta).amax();
        let mut x0_max_err: f64 = 0.0;
        for &f in forcings {
            let mut want = DVector::zeros(self.a.nrows());
            for j in 0..3 {
                want[1 + j] = f[j];
            }
            x0_max_err = x0_max_err.max((&self.a * self.x0(f) - want).amax());
        }
        StructureReport { a_aeta_max, rank_aeta: linalg::rank(&self.aeta), x0_max_err, trials: forcings.len() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Row tables as listed for the lift, 1-based; negative entries are -alpha_k.
    const H_PRINTED: [i32; 16] = [-1, -2, -3, -4, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 16];
    const H0_PRINTED: [i32; 16] = [21, 17, 27, 37, 22, 23, -2, 31, 32, 33, -3, 41, 42, 43, -4, 12];
    const H1_PRINTED: [i32; 16] = [18, 21, 31, 41, 24, 25, -1, 28, 34, 35, 4, 38, 44, 45, 8, 13];
    const H2_PRINTED: [i32; 16] = [24, 22, 32, 42, 19, 26, 1, 34, 29, 36, 5, 44, 39, 46, 9, 14];
    const H3_PRINTED: [i32; 16] = [25, 23, 33, 43, 26, 20, 2, 35, 36, 30, 6, 45, 46, 40, 10, 15];

    fn as_printed(rows: &[Resolved]) -> Vec<i32> {
        rows.iter()
            .map(|r| match r.row {
                RowRef::E(i) => i as i32 + 1,
                RowRef::NegAlpha(k) => -(k as i32 + 1),
            })
            .collect()
    }

    #[test]
    fn row_tables_match_listing() {
        let m = build_system(1.0, 1.0).unwrap();
        assert_eq!(as_printed(&m.h_rows), H_PRINTED);
        assert_eq!(as_printed(&m.hk_rows[0]), H0_PRINTED);
        assert_eq!(as_printed(&m.hk_rows[1]), H1_PRINTED);
        assert_eq!(as_printed(&m.hk_rows[2]), H2_PRINTED);
        assert_eq!(as_printed(&m.hk_rows[3]), H3_PRINTED);
    }

    #[test]
    fn alpha2_entries() {
        let m = build_system(1.0, 1.0).unwrap();
        let nz: Vec<(usize, f64)> =
            m.alpha[1].iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (i + 1, *v)).collect();
        assert_eq!(
            nz,
            vec![(13, 1.0), (18, -1.0), (19, -1.0), (20, -1.0), (47, 1.0), (48, 1.0), (49, 1.0)]
        );
    }

    #[test]
    fn alpha_vectors_as_listed() {
        let (mu, tau) = (0.25, 3.0);
        let m = build_system(mu, tau).unwrap();
        let pat = |taus: &[usize], mus: &[usize], ones: &[usize]| {
            let mut v = vec![0.0; NZ];
            taus.iter().for_each(|&i| v[i - 1] = tau);
            mus.iter().for_each(|&i| v[i - 1] = -mu);
            ones.iter().for_each(|&i| v[i - 1] = 1.0);
            v
        };
        assert_eq!(m.alpha[0].as_slice(), pat(&[], &[], &[5, 10]).as_slice());
        assert_eq!(m.alpha[1].as_slice(), pat(&[13], &[18, 19, 20], &[47, 48, 49]).as_slice());
        assert_eq!(m.alpha[2].as_slice(), pat(&[14], &[28, 29, 30], &[50, 51, 52]).as_slice());
        assert_eq!(m.alpha[3].as_slice(), pat(&[15], &[38, 39, 40], &[53, 54, 55]).as_slice());
    }

    #[test]
    fn forcing_templates() {
        let m = build_system(1.0, 1.0).unwrap();
        let f = [1.0, 2.0, 3.0];
        let h: Vec<f64> = m.h_vec(f).iter().copied().collect();
        assert_eq!(h[..4], [0.0, 1.0, 2.0, 3.0]);
        assert!(h[4..].iter().all(|v| *v == 0.0));
        let h0 = m.h0_vec(f);
        for (i, v) in h0.iter().enumerate() {
            let want = match i + 1 {
                7 => 1.0,
                11 => 2.0,
                15 => 3.0,
                _ => 0.0,
            };
            assert_eq!(*v, want);
        }
        for k in 1..4 {
            assert!(m.hk_vec(k, f).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn null_space_is_exact() {
        // Dyadic parameters keep every product exact in binary floating point.
        let m = build_system(0.5, 2.0).unwrap();
        let prod = &m.a * &m.aeta;
        assert!(prod.iter().all(|v| *v == 0.0));
        assert_eq!(linalg::rank(&m.aeta), NZ);
    }

    #[test]
    fn structure_report_for_generic_parameters() {
        let m = build_system(0.37, 1.3).unwrap();
        let r = m.structure_report(&[[1.0, -2.0, 0.5], [0.1, 0.2, 0.3]]);
        assert_eq!((r.a_aeta_max, r.rank_aeta, r.trials), (0.0, NZ, 2));
        assert_eq!(r.x0_max_err, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(build_system(0.0, 1.0).is_err());
        assert!(build_system(1.0, -1.0).is_err());
        assert!(build_system(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn solvability_cases() {
        assert!(pointwise_solvable(&DMatrix::identity(2, 2), &DVector::from_vec(vec![3.0, 4.0])));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 0.0]);
        assert!(!pointwise_solvable(&a, &DVector::from_vec(vec![1.0, 2.0])));
        let m = build_system(1.0, 1.0).unwrap();
        assert!(pointwise_solvable(&m.a, &DVector::from_vec(vec![0.0, 1.0, 2.0, 3.0])));
    }

    #[test]
    fn quadratic_residual_cases() {
        let l = StateLayout::new();
        assert_eq!(quadratic_residual(&[0.0; NZ], &l), [0.0; 9]);
        let mut z = [0.0; NZ];
        z[2] = 2.0;
        z[4] = 1.0;
        z[9] = 1.0;
        z[46] = -4.0;
        assert_eq!(quadratic_residual(&z, &l)[0], 0.0);
        let mut e47 = [0.0; NZ];
        e47[46] = 1.0;
        let r = quadratic_residual(&e47, &l);
        assert_eq!(r[0], 1.0);
        assert!(r[1..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn reconstruct_examples() {
        let m = build_system(1.0, 1.0).unwrap();
        let x = reconstruct_X(&DVector::zeros(NZ), [1.0, 2.0, 3.0], &m);
        assert_eq!(x.rows(0, 4).as_slice(), [0.0, 1.0, 2.0, 3.0]);
        assert!(x.rows(4, NZ).iter().all(|v| *v == 0.0));

        let mut e1 = DVector::zeros(NZ);
        e1[0] = 1.0;
        let x = reconstruct_X(&e1, [0.0; 3], &m);
        for i in 0..4 {
            assert_eq!(x[i], -m.alpha[i][0]);
        }
        assert_eq!(x[4], 1.0);
        assert!((&m.a * x).iter().all(|v| *v == 0.0));
    }
}
