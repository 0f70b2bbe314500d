//! Finite-difference partial derivatives on the space-time grid.
//!
//! Each axis gets a single 1D stencil of the requested order: centered where
//! it fits, one-sided near the ends, second-order accurate throughout. Mixed
//! partials apply the axes in the fixed order (t, x1, x2, x3), so the result
//! depends only on the multi-index and commuted partials agree bitwise.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::multi_index::MultiIndex;

pub const MAX_TIME_ORDER: u32 = 1;
pub const MAX_SPATIAL_ORDER: u32 = 4;

/// Finite-difference weights for the `m`-th derivative at `x0` (Fornberg).
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Half-width of the centered stencil for derivative order `m`.
pub const fn central_radius(m: u32) -> usize {
    match m {
        0 => 0,
        1 | 2 => 1,
        _ => 2,
    }
}

/// Nodes an axis needs for the one-sided stencils of order `m`.
pub fn nodes_needed(m: u32) -> usize {
    if m == 0 {
        1
    } else {
        m as usize + 2
    }
}

/// Widest per-axis stencil radius of a multi-index.
pub fn stencil_radius(d: &MultiIndex) -> usize {
    d.0[1..].iter().map(|&m| central_radius(m)).max().unwrap_or(0)
}

/// Per-node stencils along one axis: `(first offset, weights)`.
#[derive(Debug, Clone)]
pub struct Stencil1D {
    pub order: u32,
    pub nodes: Vec<(isize, Vec<f64>)>,
}

impl Stencil1D {
    pub fn new(order: u32, n: usize, h: f64) -> Self {
        let r = central_radius(order) as isize;
        let w_side = nodes_needed(order) as isize;
        let scale = h.powi(order as i32);
        let nodes = (0..n as isize)
            .map(|i| {
                let (start, width) = if i - r >= 0 && i + r < n as isize {
                    (-r, 2 * r + 1)
                } else {
                    let s = (i - w_side / 2).clamp(0, n as isize - w_side);
                    (s - i, w_side)
                };
                let xs: Vec<f64> = (start..start + width).map(|o| o as f64).collect();
                let w = fd_weights(0.0, &xs, order as usize).into_iter().map(|v| v / scale).collect();
                (start, w)
            })
            .collect();
        Stencil1D { order, nodes }
    }
}

/// Apply a 1D stencil along axis `axis` of a row-major 4D array.
pub fn apply_axis(values: &[f64], dims: [usize; 4], axis: usize, st: &Stencil1D) -> Vec<f64> {
    let stride: usize = dims[axis + 1..].iter().product();
    let n = dims[axis];
    let mut out = vec![0.0; values.len()];
    let outer: usize = dims[..axis].iter().product();
    for o in 0..outer {
        let base_o = o * n * stride;
        for (i, (start, w)) in st.nodes.iter().enumerate() {
            let dst = base_o + i * stride;
            let src0 = (base_o as isize + (i as isize + start) * stride as isize) as usize;
            let out_row = &mut out[dst..dst + stride];
            for (q, wq) in w.iter().enumerate() {
                let src = &values[src0 + q * stride..src0 + q * stride + stride];
                for (a, b) in out_row.iter_mut().zip(src) {
                    *a += wq * b;
                }
            }
        }
    }
    out
}

pub fn check_multi_index(field: &ScalarField, d: &MultiIndex) -> Result<()> {
    if d.t() > MAX_TIME_ORDER {
        return Err(Error::InvalidParameter(format!("time order {} exceeds {MAX_TIME_ORDER}", d.t())));
    }
    if d.spatial_order() > MAX_SPATIAL_ORDER {
        return Err(Error::InvalidParameter(format!(
            "spatial order {} exceeds {MAX_SPATIAL_ORDER}",
            d.spatial_order()
        )));
    }
    let dims = field.grid.dims();
    for a in 0..4 {
        let m = d.0[a];
        if m > 0 && dims[a] < nodes_needed(m) {
            return Err(Error::StencilExceedsGrid { axis: a, order: m, needed: nodes_needed(m), have: dims[a] });
        }
    }
    Ok(())
}

pub fn derivative(field: &ScalarField, d: &MultiIndex) -> Result<ScalarField> {
    check_multi_index(field, d)?;
    let dims = field.grid.dims();
    let mut vals = field.values.clone();
    for a in 0..4 {
        let m = d.0[a];
        if m == 0 {
            continue;
        }
        let st = Stencil1D::new(m, dims[a], field.grid.spacing(a));
        vals = apply_axis(&vals, dims, a, &st);
    }
    ScalarField::from_values(&field.grid, vals)
}

/// Spatial Laplacian.
pub fn laplacian(field: &ScalarField) -> Result<ScalarField> {
    let mut out = ScalarField::zeros(&field.grid);
    for k in 1..4 {
        let mut d = MultiIndex::ZERO;
        d.0[k] = 2;
        out.axpy(1.0, &derivative(field, &d)?)?;
    }
    Ok(out)
}
