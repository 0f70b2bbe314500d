//! Fourier symbol of the lifted first-order system.
//!
//! Replacing `d/dt, d/dx_k` by `i xi_0, i xi_k` turns `d/dk (H Z + h) = H_k Z + h_k`
//! into `B(xi) Zhat = G(xi)` with `B` the 64x55 stack of `i xi_k H - H_k`.
//! For spatially nonzero `xi` the rank is 46 and the solution set is
//! `Y1 + span(eta_1..eta_9)` in closed form.

use crate::constraint_system::ConstraintMatrices;
use crate::error::{Error, Result};
use crate::layout::NZ;
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

pub type C = Complex64;

/// Below this spatial norm the closed forms are refused.
pub const XI_EPS: f64 = 1e-8;

const I: C = C::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreqPoint {
    pub xi: [f64; 4],
    pub spatial_norm: f64,
}

impl FreqPoint {
    pub fn new(xi0: f64, xi1: f64, xi2: f64, xi3: f64) -> Self {
        FreqPoint {
            xi: [xi0, xi1, xi2, xi3],
            spatial_norm: (xi1 * xi1 + xi2 * xi2 + xi3 * xi3).sqrt(),
        }
    }

    pub fn from_array(xi: [f64; 4]) -> Self {
        Self::new(xi[0], xi[1], xi[2], xi[3])
    }

    /// `i xi_k`.
    pub fn ik(&self, k: usize) -> C {
        I * self.xi[k]
    }

    pub fn neg(&self) -> Self {
        Self::new(-self.xi[0], -self.xi[1], -self.xi[2], -self.xi[3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABScalars {
    pub a: C,
    pub b: C,
}

impl ABScalars {
    pub fn new(xi: &FreqPoint, mu: f64, tau: f64) -> Result<Self> {
        if xi.spatial_norm < XI_EPS {
            return Err(Error::DegenerateFrequency(xi.spatial_norm, XI_EPS));
        }
        let lap: C = (1..4).map(|k| xi.ik(k) * xi.ik(k)).sum();
        let a = (mu * lap - xi.ik(0)) / tau;
        Ok(ABScalars { a, b: lap / a })
    }
}

/// Block assembly: block `k` is `i xi_k H - H_k`.
pub fn assemble_symbol(xi: &FreqPoint, mats: &ConstraintMatrices) -> DMatrix<C> {
    let mut b = DMatrix::zeros(64, NZ);
    for k in 0..4 {
        let ik = xi.ik(k);
        for r in 0..16 {
            for c in 0..NZ {
                b[(16 * k + r, c)] = ik * mats.h[(r, c)] - C::from(mats.hk[k][(r, c)]);
            }
        }
    }
    b
}

/// The 64 rows as listed term by term: group `r` holds the quantity carried
/// by row `r` of `H` followed by the constant term for each of the four axes,
/// so row `4r + k` reads `i xi_k * head + tail_k`.
const ROW_LIST: [[&str; 5]; 16] = [
    ["-a1", "-e21", "-e18", "-e24", "-e25"],
    ["-a2", "-e17", "-e21", "-e22", "-e23"],
    ["-a3", "-e27", "-e31", "-e32", "-e33"],
    ["-a4", "-e37", "-e41", "-e42", "-e43"],
    ["e1", "-e22", "-e24", "-e19", "-e26"],
    ["e2", "-e23", "-e25", "-e26", "-e20"],
    ["e3", "a2", "a1", "-e1", "-e2"],
    ["e4", "-e31", "-e28", "-e34", "-e35"],
    ["e5", "-e32", "-e34", "-e29", "-e36"],
    ["e6", "-e33", "-e35", "-e36", "-e30"],
    ["e7", "a3", "-e4", "-e5", "-e6"],
    ["e8", "-e41", "-e38", "-e44", "-e45"],
    ["e9", "-e42", "-e44", "-e39", "-e46"],
    ["e10", "-e43", "-e45", "-e46", "-e40"],
    ["e11", "a4", "-e8", "-e9", "-e10"],
    ["e16", "-e12", "-e13", "-e14", "-e15"],
];

fn listed_term(s: &str, mats: &ConstraintMatrices) -> DVector<f64> {
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, s),
    };
    let idx: usize = rest[1..].parse().expect("listed index");
    let v = match &rest[..1] {
        "a" => mats.alpha[idx - 1].clone(),
        "e" => {
            let mut v = DVector::zeros(NZ);
            v[idx - 1] = 1.0;
            v
        }
        _ => unreachable!("listed term {s}"),
    };
    v * sign
}

/// Row-list assembly in listing order (independent of `H`, `H_k`).
pub fn assemble_symbol_rowlist(xi: &FreqPoint, mats: &ConstraintMatrices) -> DMatrix<C> {
    let mut b = DMatrix::zeros(64, NZ);
    for (r, group) in ROW_LIST.iter().enumerate() {
        let head = listed_term(group[0], mats);
        for k in 0..4 {
            let tail = listed_term(group[k + 1], mats);
            let ik = xi.ik(k);
            for c in 0..NZ {
                b[(4 * r + k, c)] = ik * head[c] + C::from(tail[c]);
            }
        }
    }
    b
}

/// Listing-order row index for block-order row `16k + r`.
pub fn listing_row(block_row: usize) -> usize {
    let (k, r) = (block_row / 16, block_row % 16);
    4 * r + k
}

/// Block `k` of the right-hand side is `h_k - i xi_k h`, transformed.
pub fn assemble_rhs(xi: &FreqPoint, fhat: [C; 3], mats: &ConstraintMatrices) -> DVector<C> {
    let mut g = DVector::zeros(64);
    for k in 0..4 {
        let ik = xi.ik(k);
        for r in 0..16 {
            let forcing = |rows: &[crate::constraint_system::Resolved]| {
                rows[r].forcing.map_or(C::new(0.0, 0.0), |j| fhat[j])
            };
            g[16 * k + r] = forcing(&mats.hk_rows[k]) - ik * forcing(&mats.h_rows);
        }
    }
    g
}

/// The expanded right-hand side exactly as printed: 65 entries, with an
/// extra zero closing the first block and `+i xi_k F1` in the spatial blocks.
pub fn printed_rhs(xi: &FreqPoint, fhat: [C; 3]) -> Vec<C> {
    let z = C::new(0.0, 0.0);
    let [f1, f2, f3] = fhat;
    let i0 = xi.ik(0);
    let mut g = vec![z, -i0 * f1, -i0 * f2, -i0 * f3, z, z, f1, z, z, z, f2, z, z, z, f3, z, z];
    for k in 1..4 {
        let ik = xi.ik(k);
        g.extend([z, ik * f1, -ik * f2, -ik * f3]);
        g.extend([z; 12]);
    }
    g
}

#[derive(Debug, Clone, Serialize)]
pub struct RhsDiscrepancy {
    pub printed_len: usize,
    pub block_len: usize,
    /// Block-order indices (1-based) where the printed value differs, after
    /// dropping the surplus first-block entry.
    pub differing_entries: Vec<usize>,
    pub max_abs_difference: f64,
}

pub fn rhs_discrepancy(xi: &FreqPoint, fhat: [C; 3], mats: &ConstraintMatrices) -> RhsDiscrepancy {
    let block = assemble_rhs(xi, fhat, mats);
    let printed = printed_rhs(xi, fhat);
    let mut aligned: Vec<C> = printed[..16].to_vec();
    aligned.extend_from_slice(&printed[17..]);
    let mut differing = Vec::new();
    let mut max_diff: f64 = 0.0;
    for (i, (p, b)) in aligned.iter().zip(block.iter()).enumerate() {
        let d = (p - b).norm();
        if d > 0.0 {
            differing.push(i + 1);
        }
        max_diff = max_diff.max(d);
    }
    RhsDiscrepancy {
        printed_len: printed.len(),
        block_len: block.len(),
        differing_entries: differing,
        max_abs_difference: max_diff,
    }
}

/// The shared 46-entry pattern followed by the nine trailing entries.
fn pattern(xi: &FreqPoint, y3: C, y7: C, y11: C, y16: C, tail: [C; 9]) -> DVector<C> {
    let [i0, i1, i2, i3] = [xi.ik(0), xi.ik(1), xi.ik(2), xi.ik(3)];
    let mut v = vec![
        i2 * y3, i3 * y3, y3, i1 * y7, i2 * y7, i3 * y7, y7, i1 * y11, i2 * y11, i3 * y11, y11,
        i0 * y16, i1 * y16, i2 * y16, i3 * y16, y16,
    ];
    for y in [y3, y7, y11] {
        v.extend([
            i0 * i0 * y,
            i1 * i1 * y,
            i2 * i2 * y,
            i3 * i3 * y,
            i0 * i1 * y,
            i0 * i2 * y,
            i0 * i3 * y,
            i1 * i2 * y,
            i1 * i3 * y,
            i2 * i3 * y,
        ]);
    }
    v.extend(tail);
    DVector::from_vec(v)
}

pub fn particular_solution(
    xi: &FreqPoint,
    fhat: [C; 3],
    ab: &ABScalars,
    tau: f64,
) -> Result<DVector<C>> {
    if xi.spatial_norm < XI_EPS {
        return Err(Error::DegenerateFrequency(xi.spatial_norm, XI_EPS));
    }
    let ABScalars { a, b } = *ab;
    let d: C = (1..4).map(|k| xi.ik(k) * fhat[k - 1]).sum();
    let den2 = a * a * b * tau;
    let y = |k: usize| xi.ik(k) * d / den2 - fhat[k - 1] / (a * tau);
    let y16 = d / (a * b * tau);
    Ok(pattern(xi, y(1), y(2), y(3), y16, [C::new(0.0, 0.0); 9]))
}

/// `eta_j` for `j` in 1..=9. Groups of three share their y-values; the
/// group picks the spatial axis.
pub fn null_basis(xi: &FreqPoint, j: usize, ab: &ABScalars, tau: f64) -> Result<DVector<C>> {
    if xi.spatial_norm < XI_EPS {
        return Err(Error::DegenerateFrequency(xi.spatial_norm, XI_EPS));
    }
    if !(1..=9).contains(&j) {
        return Err(Error::InvalidParameter(format!("null basis index {j} outside 1..=9")));
    }
    let ABScalars { a, b } = *ab;
    let g = (j - 1) / 3 + 1;
    let den2 = a * a * b * tau;
    let mut ys = [C::new(0.0, 0.0); 3];
    for (m, y) in ys.iter_mut().enumerate() {
        let k = m + 1;
        *y = if k == g {
            C::from(xi.xi[g] * xi.xi[g]) / den2 + 1.0 / (a * tau)
        } else {
            -xi.ik(g) * xi.ik(k) / den2
        };
    }
    let y16 = -xi.ik(g) / (a * b * tau);
    let mut tail = [C::new(0.0, 0.0); 9];
    tail[j - 1] = C::new(1.0, 0.0);
    Ok(pattern(xi, ys[0], ys[1], ys[2], y16, tail))
}

pub fn symbol_rank(xi: &FreqPoint, mats: &ConstraintMatrices) -> usize {
    linalg::rank(&assemble_symbol(xi, mats))
}

#[derive(Debug, Clone, Serialize)]
pub struct SymbolCheck {
    pub xi: [f64; 4],
    pub rank: usize,
    pub sigma_46: f64,
    pub sigma_47: f64,
    /// `sigma_46 / sigma_47`; infinite when `sigma_47` is exactly zero.
    pub gap: f64,
    /// `sigma_1 / sigma_46`.
    pub cond: f64,
    pub rowlist_match: bool,
    pub residual_y1: Option<f64>,
    pub residual_eta: Option<[f64; 9]>,
}

fn cnorm(v: &DVector<C>) -> f64 {
    linalg::frobenius(v)
}

/// `||B Y1 - G|| / (||B||_F ||Y1|| + ||G||)`.
pub fn relative_residual_y1(b: &DMatrix<C>, y1: &DVector<C>, g: &DVector<C>) -> f64 {
    let den = linalg::frobenius(b) * cnorm(y1) + cnorm(g);
    if den == 0.0 {
        0.0
    } else {
        cnorm(&(b * y1 - g)) / den
    }
}

/// `||B eta|| / (||B||_F ||eta||)`.
pub fn relative_residual_null(b: &DMatrix<C>, eta: &DVector<C>) -> f64 {
    cnorm(&(b * eta)) / (linalg::frobenius(b) * cnorm(eta))
}

pub fn rowlist_matches(xi: &FreqPoint, mats: &ConstraintMatrices) -> bool {
    let blk = assemble_symbol(xi, mats);
    let lst = assemble_symbol_rowlist(xi, mats);
    (0..64).all(|r| {
        let lr = listing_row(r);
        (0..NZ).all(|c| blk[(r, c)] == lst[(lr, c)])
    })
}

/// Rank, residuals and the listing cross-check at one frequency.
pub fn check_point(xi: &FreqPoint, fhat: [C; 3], mats: &ConstraintMatrices) -> SymbolCheck {
    let b = assemble_symbol(xi, mats);
    let s = linalg::singular_values(&b);
    let rank = linalg::rank_from_singular(&s);
    let (s46, s47) = (s[45], s[46]);
    let (residual_y1, residual_eta) = match ABScalars::new(xi, mats.mu, mats.tau) {
        Ok(ab) => {
            let y1 = particular_solution(xi, fhat, &ab, mats.tau).expect("nondegenerate");
            let g = assemble_rhs(xi, fhat, mats);
            let eta: [f64; 9] = std::array::from_fn(|j| {
                let e = null_basis(xi, j + 1, &ab, mats.tau).expect("nondegenerate");
                relative_residual_null(&b, &e)
            });
            (Some(relative_residual_y1(&b, &y1, &g)), Some(eta))
        }
        Err(_) => (None, None),
    };
    SymbolCheck {
        xi: xi.xi,
        rank,
        sigma_46: s46,
        sigma_47: s47,
        gap: if s47 > 0.0 { s46 / s47 } else { f64::INFINITY },
        cond: if s46 > 0.0 { s[0] / s46 } else { f64::INFINITY },
        rowlist_match: rowlist_matches(xi, mats),
        residual_y1,
        residual_eta,
    }
}
