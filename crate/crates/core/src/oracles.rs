//! Closed-form oracles for the Newtonian and heat kernels and the
//! manufactured refinement study of the factorization. Shared by the test
//! suites and the `kernel-check` stage.

use crate::error::Result;
use crate::factorization::{diagnose, manufactured::Bump, solve_one, DEFAULT_MARGIN};
use crate::grid::{GridSpec, ScalarField};
use crate::heat::{kernel_mass, heat_time_integral};
use crate::potential::{ball_volume_fraction, NewtonKernel};
use serde::Serialize;

pub const BALL_RADIUS: f64 = 0.35;
const BALL_SUBSAMPLES: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub resolution: usize,
    pub residual: f64,
    /// `log2` of the error ratio against the previous (coarser) row.
    pub order: Option<f64>,
}

/// Attach observed orders to a sequence whose spacing halves per row.
pub fn with_orders(rows: &[(usize, f64)]) -> Vec<ConvergenceRow> {
    rows.iter()
        .enumerate()
        .map(|(i, &(resolution, residual))| ConvergenceRow {
            resolution,
            residual,
            order: (i > 0).then(|| (rows[i - 1].1 / residual).log2()),
        })
        .collect()
}

/// Relative error of the centre value of the potential of a unit-density
/// ball of radius `R` against `-R^2/2`.
pub fn poisson_ball(n: usize) -> Result<f64> {
    let g = GridSpec::unit_cube(n, 1.0, 5)?;
    let src = ball_volume_fraction(&g, [0.5; 3], BALL_RADIUS, BALL_SUBSAMPLES);
    let got = NewtonKernel::new(&g).at_node(&src, [n / 2; 3]);
    let want = -BALL_RADIUS * BALL_RADIUS / 2.0;
    Ok(((got - want) / want).abs())
}

pub const HEAT_MU: f64 = 0.01;
pub const HEAT_T: f64 = 0.5;
pub const HEAT_WIDTH: f64 = 0.08;

/// `max_t |H(t, centre) - c t| / (c T)` for the constant source `c`.
pub fn heat_constant(n: usize, c: f64) -> Result<f64> {
    let g = GridSpec::unit_cube(n, HEAT_T, 9)?;
    let h = heat_time_integral(&ScalarField::from_fn(&g, |_, _| c), HEAT_MU);
    let mid = [n / 2; 3];
    Ok((0..g.n_time).map(|it| (h.get(it, mid) - c * g.time(it)).abs()).fold(0.0, f64::max) / (c * HEAT_T).abs())
}

/// `int_0^t` of the heat-evolved Gaussian `exp(-r^2 / 2w^2)`: the variance
/// grows to `w^2 + 2 mu s`.
pub fn gaussian_time_integral(t: f64, r2: f64, w: f64, mu: f64) -> f64 {
    const GL: [(f64, f64); 4] = [
        (-0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
        (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
        (0.861_136_311_594_052_6, 0.347_854_845_137_453_85),
    ];
    let panels = 64;
    let h = t / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (x, wt) in GL {
            let s = mid + 0.5 * h * x;
            let var = w * w + 2.0 * mu * s;
            total += 0.5 * h * wt * (w * w / var).powf(1.5) * (-r2 / (2.0 * var)).exp();
        }
    }
    total
}

/// Sup error of the discrete integral of a Gaussian source against the
/// closed form, relative to the closed form's sup.
pub fn heat_gaussian(n: usize) -> Result<f64> {
    let g = GridSpec::unit_cube(n, HEAT_T, 9)?;
    let r2 = |x: [f64; 3]| (0..3).map(|k| (x[k] - 0.5).powi(2)).sum::<f64>();
    let src = ScalarField::from_fn(&g, |_, x| (-r2(x) / (2.0 * HEAT_WIDTH * HEAT_WIDTH)).exp());
    let got = heat_time_integral(&src, HEAT_MU);
    let want = ScalarField::from_fn(&g, |t, x| gaussian_time_integral(t, r2(x), HEAT_WIDTH, HEAT_MU));
    Ok(got.sub(&want)?.sup_norm() / want.sup_norm())
}

/// `max |mass - 1|` of the discrete kernel over a range of lags.
pub fn kernel_mass_error(n: usize) -> f64 {
    let h = 1.0 / (n - 1) as f64;
    [1e-8, 1e-5, 1e-3, 0.01, 0.1, 0.5, 2.0]
        .iter()
        .map(|&s| (kernel_mass(s, HEAT_MU, [h; 3]) - 1.0).abs())
        .fold(0.0, f64::max)
}

pub const FACTOR_MU: f64 = 0.5;
pub const FACTOR_T: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct FactorizationRow {
    pub n_space: usize,
    pub n_time: usize,
    pub poisson_rel: f64,
    pub heat_rel: f64,
    pub heat_as_printed_rel: f64,
    pub composite_rel: f64,
    /// `sup |h2 - h2*| / sup |h2*|`.
    pub h2_rel: f64,
}

/// Factorize the manufactured `h1` on an `n^3 x ((n+1)/2)` grid.
pub fn factorization_row(n: usize) -> Result<FactorizationRow> {
    let g = GridSpec::unit_cube(n, FACTOR_T, n.div_ceil(2))?;
    let bump = Bump { center: [0.5; 3], rho: 0.4, mu: FACTOR_MU };
    let h1 = bump.h1(&g);
    let exact = bump.h2(&g);
    let (v, h2) = solve_one(&h1, FACTOR_MU);
    let d = diagnose(&h1, &v, &h2, FACTOR_MU, DEFAULT_MARGIN)?;
    Ok(FactorizationRow {
        n_space: n,
        n_time: g.n_time,
        poisson_rel: d.poisson_rel(),
        heat_rel: d.heat_rel(),
        heat_as_printed_rel: d.heat_as_printed / d.v_sup,
        composite_rel: d.composite_rel(),
        h2_rel: h2.sub(&exact)?.interior_sup(DEFAULT_MARGIN) / exact.interior_sup(DEFAULT_MARGIN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_from_halving() {
        let rows = with_orders(&[(9, 1.0), (17, 0.25), (33, 0.125)]);
        assert!(rows[0].order.is_none());
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-15);
        assert!((rows[2].order.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_integral_at_time_zero_and_small_mu() {
        assert_eq!(gaussian_time_integral(0.0, 0.0, 0.1, 1.0), 0.0);
        // mu -> 0 leaves the source unchanged, so the integral is t f(x).
        let v = gaussian_time_integral(0.3, 0.01, 0.1, 1e-14);
        assert!((v - 0.3 * (-0.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn heat_oracles_at_desk_resolution() {
        assert!(heat_constant(17, 2.5).unwrap() < 0.01);
        assert!(heat_gaussian(17).unwrap() < 0.02);
        assert!(kernel_mass_error(17) < 1e-6);
    }

    #[test]
    fn ball_center_within_tolerance() {
        assert!(poisson_ball(17).unwrap() < 0.05);
    }
}
