//! Heat-kernel time integral
//! `H(t, x) = int_0^t int_R3 G_mu(t - s, x - y) v(s, y) dy ds`,
//! with `G_mu(s, .)` the Gaussian of variance `2 mu s` per axis. `H` solves
//! `dH/dt - mu Lap H = v` with `H(0) = 0`.
//!
//! The spatial convolution is a separable, truncated (6 sigma) Gaussian whose
//! discrete weights are renormalized to unit mass. The lag `s = t - tau` is
//! integrated with 4-point Gauss–Legendre on intervals that are geometrically
//! graded towards `s = 0`, where the kernel is sharpest, and `v` between time
//! nodes comes from quadratic Lagrange interpolation.

use crate::grid::ScalarField;

/// Gauss–Legendre nodes and weights on [-1, 1].
const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
];

pub const TRUNCATION_SIGMAS: f64 = 6.0;

/// Normalized 1D Gaussian weights for lag `s`, offsets `-r..=r`.
pub fn gaussian_weights_1d(s: f64, mu: f64, h: f64) -> Vec<f64> {
    if s <= 0.0 {
        return vec![1.0];
    }
    let sigma = (2.0 * mu * s).sqrt();
    let r = (TRUNCATION_SIGMAS * sigma / h).ceil() as i64;
    let mut w: Vec<f64> = (-r..=r)
        .map(|k| {
            let x = k as f64 * h;
            (-x * x / (4.0 * mu * s)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Total mass of the separable 3D weights for lag `s`.
pub fn kernel_mass(s: f64, mu: f64, h: [f64; 3]) -> f64 {
    h.iter().map(|&hk| gaussian_weights_1d(s, mu, hk).iter().sum::<f64>()).product()
}

fn blur_axis(values: &[f64], n: [usize; 3], axis: usize, w: &[f64]) -> Vec<f64> {
    let r = (w.len() / 2) as isize;
    let stride: usize = n[axis + 1..].iter().product();
    let len = n[axis] as isize;
    let outer: usize = n[..axis].iter().product();
    let mut out = vec![0.0; values.len()];
    for o in 0..outer {
        let base = o * n[axis] * stride;
        for i in 0..len {
            let dst = base + i as usize * stride;
            let lo = (i - r).max(0);
            let hi = (i + r).min(len - 1);
            for j in lo..=hi {
                let wj = w[(j - i + r) as usize];
                let src = base + j as usize * stride;
                let (orow, srow) = (&mut out[dst..dst + stride], &values[src..src + stride]);
                for (a, b) in orow.iter_mut().zip(srow) {
                    *a += wj * b;
                }
            }
        }
    }
    out
}

/// Convolve one slice with the heat kernel at lag `s`; mass leaving the box
/// is dropped, matching the zero extension of `v`.
pub fn heat_blur(slice: &[f64], n: [usize; 3], h: [f64; 3], s: f64, mu: f64) -> Vec<f64> {
    let mut out = slice.to_vec();
    for axis in 0..3 {
        let w = gaussian_weights_1d(s, mu, h[axis]);
        if w.len() > 1 {
            out = blur_axis(&out, n, axis, &w);
        }
    }
    out
}

/// Lag quadrature on `[0, t]`.
#[derive(Debug, Clone)]
pub struct LagRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Breakpoints `dt 2^-j` for `j = J..1`, then multiples of `dt`, with `J`
/// chosen so that the finest interval resolves the fastest grid mode
/// (`lambda = 3 mu (pi / h)^2`) to `lambda * ds <= 1/4`.
pub fn lag_rule(t: f64, dt: f64, h_min: f64, mu: f64) -> LagRule {
    let lambda = 3.0 * mu * (std::f64::consts::PI / h_min).powi(2);
    let levels = (lambda * dt / 0.25).log2().ceil().max(0.0) as i32;
    let mut bps = vec![0.0];
    for j in (1..=levels).rev() {
        let b = dt * 2f64.powi(-j);
        if b < t {
            bps.push(b);
        }
    }
    let mut s = dt;
    while s < t - 1e-12 * dt {
        bps.push(s);
        s += dt;
    }
    bps.push(t);
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for w in bps.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        for (x, wt) in GL4 {
            nodes.push(0.5 * (a + b) + 0.5 * (b - a) * x);
            weights.push(0.5 * (b - a) * wt);
        }
    }
    LagRule { nodes, weights }
}

/// `v(tau, .)` by quadratic interpolation through three neighbouring levels.
pub fn interpolate_time(v: &ScalarField, tau: f64) -> Vec<f64> {
    let g = &v.grid;
    let dt = g.spacing(0);
    let nt = g.n_time;
    let m = ((tau / dt).round() as isize).clamp(1, nt as isize - 2) as usize;
    let ts = [g.time(m - 1), g.time(m), g.time(m + 1)];
    let mut out = vec![0.0; g.slice_len()];
    for a in 0..3 {
        let mut l = 1.0;
        for b in 0..3 {
            if a != b {
                l *= (tau - ts[b]) / (ts[a] - ts[b]);
            }
        }
        if l != 0.0 {
            for (o, x) in out.iter_mut().zip(v.slice(m - 1 + a)) {
                *o += l * x;
            }
        }
    }
    out
}

/// The time integral itself, with the sign as printed (positive kernel).
pub fn heat_time_integral(v: &ScalarField, mu: f64) -> ScalarField {
    let g = v.grid;
    let mut out = ScalarField::zeros(&g);
    if v.values.iter().all(|x| *x == 0.0) {
        return out;
    }
    let h: [f64; 3] = std::array::from_fn(|k| g.spacing(k + 1));
    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let dt = g.spacing(0);
    for it in 1..g.n_time {
        let t = g.time(it);
        let rule = lag_rule(t, dt, h_min, mu);
        let mut acc = vec![0.0; g.slice_len()];
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let vs = interpolate_time(v, t - s);
            let b = heat_blur(&vs, g.n_space, h, s, mu);
            for (a, x) in acc.iter_mut().zip(&b) {
                *a += w * x;
            }
        }
        out.slice_mut(it).copy_from_slice(&acc);
    }
    out
}
