//! Uniform space-time grids over `[0, T] x K1` and scalar fields on them.
//!
//! Fields are stored t-major, then x1, x2, x3. Outside the grid every field is
//! zero; nothing here stores that, it is simply how the kernels treat it.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const MIN_SPACE_NODES: usize = 9;
pub const MIN_TIME_NODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 3],
    pub extent: [f64; 3],
    pub n_space: [usize; 3],
    pub t_final: f64,
    pub n_time: usize,
}

impl GridSpec {
    pub fn new(
        origin: [f64; 3],
        extent: [f64; 3],
        n_space: [usize; 3],
        t_final: f64,
        n_time: usize,
    ) -> Result<Self> {
        let g = GridSpec { origin, extent, n_space, t_final, n_time };
        g.validate()?;
        Ok(g)
    }

    /// Unit cube `[0,1]^3` with `n` nodes per axis over `[0, t_final]`.
    pub fn unit_cube(n: usize, t_final: f64, n_time: usize) -> Result<Self> {
        Self::new([0.0; 3], [1.0; 3], [n; 3], t_final, n_time)
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if self.n_space[k] < MIN_SPACE_NODES {
                return Err(Error::InvalidParameter(format!(
                    "n_space[{k}] = {} is below {MIN_SPACE_NODES}",
                    self.n_space[k]
                )));
            }
            if !(self.extent[k] > 0.0 && self.extent[k].is_finite()) || !self.origin[k].is_finite() {
                return Err(Error::InvalidParameter(format!("box axis {k} is not a positive finite interval")));
            }
        }
        if self.n_time < MIN_TIME_NODES {
            return Err(Error::InvalidParameter(format!(
                "n_time = {} is below {MIN_TIME_NODES}",
                self.n_time
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("T must be positive, got {}", self.t_final)));
        }
        Ok(())
    }

    /// Node counts along (t, x1, x2, x3).
    pub fn dims(&self) -> [usize; 4] {
        [self.n_time, self.n_space[0], self.n_space[1], self.n_space[2]]
    }

    /// Spacing along axis `a` of (t, x1, x2, x3).
    pub fn spacing(&self, a: usize) -> f64 {
        if a == 0 {
            self.t_final / (self.n_time - 1) as f64
        } else {
            self.extent[a - 1] / (self.n_space[a - 1] - 1) as f64
        }
    }

    pub fn spacings(&self) -> [f64; 4] {
        std::array::from_fn(|a| self.spacing(a))
    }

    pub fn time(&self, it: usize) -> f64 {
        it as f64 * self.spacing(0)
    }

    pub fn coord(&self, k: usize, i: usize) -> f64 {
        self.origin[k] + i as f64 * self.spacing(k + 1)
    }

    pub fn point(&self, i: [usize; 3]) -> [f64; 3] {
        std::array::from_fn(|k| self.coord(k, i[k]))
    }

    pub fn slice_len(&self) -> usize {
        self.n_space.iter().product()
    }

    pub fn len(&self) -> usize {
        self.n_time * self.slice_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        (1..4).map(|a| self.spacing(a)).product()
    }

    /// Largest distance between two points of `[0,T] x K1`.
    pub fn diameter(&self) -> f64 {
        (self.t_final.powi(2) + self.extent.iter().map(|e| e * e).sum::<f64>()).sqrt()
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self == other
    }

    pub fn with_box(&self, origin: [f64; 3], extent: [f64; 3]) -> Self {
        GridSpec { origin, extent, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &GridSpec) -> Self {
        ScalarField { grid: *grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: &GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(ScalarField { grid: *grid, values })
    }

    /// Sample `f(t, x)` at every node.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(f64, [f64; 3]) -> f64) -> Self {
        let [nt, n1, n2, n3] = grid.dims();
        let mut values = Vec::with_capacity(grid.len());
        for it in 0..nt {
            let t = grid.time(it);
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        values.push(f(t, grid.point([i, j, k])));
                    }
                }
            }
        }
        ScalarField { grid: *grid, values }
    }

    pub fn index(&self, it: usize, i: [usize; 3]) -> usize {
        let [_, n1, n2, n3] = self.grid.dims();
        ((it * n1 + i[0]) * n2 + i[1]) * n3 + i[2]
    }

    pub fn get(&self, it: usize, i: [usize; 3]) -> f64 {
        self.values[self.index(it, i)]
    }

    pub fn slice(&self, it: usize) -> &[f64] {
        let s = self.grid.slice_len();
        &self.values[it * s..(it + 1) * s]
    }

    pub fn slice_mut(&mut self, it: usize) -> &mut [f64] {
        let s = self.grid.slice_len();
        &mut self.values[it * s..(it + 1) * s]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }

    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(ScalarField { grid: self.grid, values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.iter().map(|v| v * s).collect() }
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: f64, other: &ScalarField) -> Result<()> {
        self.check(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    /// Max of `|value|` over nodes at least `margin` nodes from every
    /// spatial face; all time levels are included.
    pub fn interior_sup(&self, margin: usize) -> f64 {
        let mut m: f64 = 0.0;
        self.for_interior(margin, |v| m = m.max(v.abs()));
        m
    }

    /// Discrete L2 norm over the same interior, weighted by the node volume.
    pub fn interior_l2(&self, margin: usize) -> f64 {
        let w = self.grid.cell_volume() * self.grid.spacing(0);
        let mut s = 0.0;
        self.for_interior(margin, |v| s += v * v);
        (s * w).sqrt()
    }

    fn for_interior(&self, margin: usize, mut f: impl FnMut(f64)) {
        let [nt, n1, n2, n3] = self.grid.dims();
        if 2 * margin >= n1.min(n2).min(n3) {
            return;
        }
        for it in 0..nt {
            for i in margin..n1 - margin {
                for j in margin..n2 - margin {
                    for k in margin..n3 - margin {
                        f(self.get(it, [i, j, k]));
                    }
                }
            }
        }
    }

    /// Largest `|value|` on the spatial boundary of the box. Because fields
    /// vanish outside `K1'`, this is the jump across the boundary.
    pub fn boundary_jump(&self) -> f64 {
        let [nt, n1, n2, n3] = self.grid.dims();
        let mut m: f64 = 0.0;
        for it in 0..nt {
            for i in 0..n1 {
                for j in 0..n2 {
                    for k in 0..n3 {
                        let on_face = i == 0 || j == 0 || k == 0 || i == n1 - 1 || j == n2 - 1 || k == n3 - 1;
                        if on_face {
                            m = m.max(self.get(it, [i, j, k]).abs());
                        }
                    }
                }
            }
        }
        m
    }

    /// Grid Hölder quotient: max over axis-adjacent node pairs (all four
    /// axes) of `|difference| / spacing^alpha`.
    pub fn holder_quotient(&self, alpha: f64) -> f64 {
        let dims = self.grid.dims();
        let mut strides = [0usize; 4];
        strides[3] = 1;
        for a in (0..3).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let mut q: f64 = 0.0;
        for a in 0..4 {
            let w = self.grid.spacing(a).powf(alpha);
            for (idx, v) in self.values.iter().enumerate() {
                let pos = (idx / strides[a]) % dims[a];
                if pos + 1 < dims[a] {
                    q = q.max((self.values[idx + strides[a]] - v).abs() / w);
                }
            }
        }
        q
    }
}

const MAGIC: &[u8; 8] = b"NSLFLD01";

/// Sidecar metadata written next to a binary field file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldMeta {
    pub name: String,
    pub grid: GridSpec,
    pub spacings: [f64; 4],
    pub layout: String,
    pub dtype: String,
}

/// Binary layout: magic, four u64 dims (t, x1, x2, x3), four f64 spacings,
/// T, three f64 origin values, then little-endian f64 payload.
pub fn write_field(path: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let g = &field.grid;
    let mut buf = Vec::with_capacity(8 + 4 * 8 + 8 * 8 + field.values.len() * 8);
    buf.extend_from_slice(MAGIC);
    for d in g.dims() {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for s in g.spacings() {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    buf.extend_from_slice(&g.t_final.to_le_bytes());
    for o in g.origin {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    for v in &field.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;

    let meta = FieldMeta {
        name: name.to_string(),
        grid: *g,
        spacings: g.spacings(),
        layout: "t-major, then x1, x2, x3".into(),
        dtype: "f64 little-endian".into(),
    };
    let sidecar = path.with_extension("json");
    std::fs::write(sidecar, serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?)?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 8 + 12 * 8 || &bytes[..8] != MAGIC {
        return Err(bad("not a field file"));
    }
    let word = |i: usize| -> [u8; 8] { bytes[8 + 8 * i..16 + 8 * i].try_into().unwrap() };
    let dims: [usize; 4] = std::array::from_fn(|i| u64::from_le_bytes(word(i)) as usize);
    let spacings: [f64; 4] = std::array::from_fn(|i| f64::from_le_bytes(word(4 + i)));
    let t_final = f64::from_le_bytes(word(8));
    let origin: [f64; 3] = std::array::from_fn(|i| f64::from_le_bytes(word(9 + i)));
    let extent: [f64; 3] = std::array::from_fn(|k| spacings[k + 1] * (dims[k + 1] - 1) as f64);
    let grid = GridSpec::new(origin, extent, [dims[1], dims[2], dims[3]], t_final, dims[0])?;
    let n = grid.len();
    let payload = &bytes[8 + 12 * 8..];
    if payload.len() != 8 * n {
        return Err(bad("payload length does not match header"));
    }
    let values = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    ScalarField::from_values(&grid, values)
}
