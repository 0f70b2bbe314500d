//! The quadratic map `g(h1)` and a damped Picard iteration on it.
//!
//! `g_j = w1L w1R + w1L w2R + w1R w2L + w2L w2R` with the factor positions
//! from [`PairMap`]. The `W2` table only needs the three partial sums of
//! `h2`, and `h1 -> h2` is linear, so each step runs three factorizations on
//! the partial sums of `h1` instead of nine.

use crate::bounds::BoundConstants;
use crate::error::{Error, Result};
use crate::factorization::solve_one;
use crate::grid::{GridSpec, ScalarField};
use crate::w_tables::{build_w2_from_sums, w1_from_lifted, PairMap, W1Fields, W2Fields};
use serde::{Deserialize, Serialize};

pub const COMPONENTS: usize = 9;

/// The nine-component unknown `h1`.
#[derive(Debug, Clone, PartialEq)]
pub struct H1State {
    pub comps: Vec<ScalarField>,
}

impl H1State {
    pub fn zeros(grid: &GridSpec) -> Self {
        H1State { comps: vec![ScalarField::zeros(grid); COMPONENTS] }
    }

    pub fn new(comps: Vec<ScalarField>) -> Result<Self> {
        if comps.len() != COMPONENTS {
            return Err(Error::InvalidParameter(format!("h1 needs {COMPONENTS} components, got {}", comps.len())));
        }
        if comps.iter().any(|c| !c.grid.same_shape(&comps[0].grid)) {
            return Err(Error::GridMismatch("h1 components live on different grids".into()));
        }
        Ok(H1State { comps })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.comps[0].grid
    }

    pub fn sup_norm(&self) -> f64 {
        self.comps.iter().map(|c| c.sup_norm()).fold(0.0, f64::max)
    }

    pub fn component_sups(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.sup_norm()).collect()
    }

    pub fn holder_quotient(&self, alpha: f64) -> f64 {
        self.comps.iter().map(|c| c.holder_quotient(alpha)).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &H1State) -> Result<H1State> {
        let comps = self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?;
        Ok(H1State { comps })
    }

    pub fn scale(&self, s: f64) -> H1State {
        H1State { comps: self.comps.iter().map(|c| c.scale(s)).collect() }
    }

    /// `(1 - lambda) self + lambda other`.
    pub fn blend(&self, other: &H1State, lambda: f64) -> Result<H1State> {
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.zip_with(b, |x, y| (1.0 - lambda) * x + lambda * y))
            .collect::<Result<_>>()?;
        Ok(H1State { comps })
    }

    /// `h1_1 + h1_2 + h1_3`, `h1_4 + h1_5 + h1_6`, `h1_7 + h1_8 + h1_9`.
    pub fn partial_sums(&self) -> Result<Vec<ScalarField>> {
        self.comps.chunks(3).map(|c| c[0].add(&c[1])?.add(&c[2])).collect()
    }
}

/// `F_jv` and `F_j1` for the three forcing components, then the `W1` table.
pub fn build_w1(forcing: &[ScalarField], mu: f64, tau: f64) -> Result<W1Fields> {
    if forcing.len() != 3 {
        return Err(Error::InvalidParameter(format!("forcing needs 3 components, got {}", forcing.len())));
    }
    let (fv, f1): (Vec<_>, Vec<_>) = forcing.iter().map(|f| solve_one(f, mu)).unzip();
    w1_from_lifted(fv, f1, mu, tau)
}

/// `W2` for a given `h1`, through the partial sums.
pub fn w2_of(h1: &H1State, mu: f64, tau: f64) -> Result<W2Fields> {
    let sums = h1.partial_sums()?;
    let h3 = sums.iter().map(|s| solve_one(s, mu).1).collect();
    build_w2_from_sums(h3, mu, tau)
}

/// The four-term products for every pair.
pub fn pair_products(w1: &W1Fields, w2: &W2Fields, pm: &PairMap) -> Result<H1State> {
    let comps = pm
        .0
        .iter()
        .map(|&[l1, r1, l2, r2]| {
            let (l1, r1, l2, r2) = (w1.get(l1), w1.get(r1), w2.get(l2), w2.get(r2));
            let mut out = l1.mul(r1)?;
            out.axpy(1.0, &l1.mul(r2)?)?;
            out.axpy(1.0, &r1.mul(l2)?)?;
            out.axpy(1.0, &l2.mul(r2)?)?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(H1State { comps })
}

#[derive(Debug, Clone)]
pub struct GOutput {
    pub g: H1State,
    pub w2: W2Fields,
}

pub fn g_map(h1: &H1State, w1: &W1Fields, mu: f64, tau: f64, pm: &PairMap) -> Result<GOutput> {
    let w2 = w2_of(h1, mu, tau)?;
    let g = pair_products(w1, &w2, pm)?;
    Ok(GOutput { g, w2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationConfig {
    pub max_iters: usize,
    pub lambda: f64,
    pub tol: f64,
    /// Sup-norm radius `M` of the set `Omega_C`.
    pub m_bound: f64,
    /// Hölder constant `C` of `Omega_C`.
    pub c_bound: f64,
    pub alpha: f64,
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be nonnegative, got {}", self.tol)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.m_bound > 0.0) || !(self.c_bound > 0.0) {
            return Err(Error::InvalidParameter("M and C must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub sup_norm: f64,
    pub holder_quotient: f64,
    pub change: f64,
    pub g_sup: f64,
    /// `|h| <= M` and Hölder quotient `<= C`; monitored, not enforced.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct IterationResult {
    pub h1: H1State,
    /// `g` of the final iterate, for the fixed-point defect.
    pub g_final: H1State,
    /// `W2` of the final iterate.
    pub w2_final: W2Fields,
    pub report: IterationReport,
}

pub fn iterate(h0: &H1State, w1: &W1Fields, cfg: &IterationConfig, mu: f64, tau: f64, pm: &PairMap) -> Result<IterationResult> {
    cfg.validate()?;
    let mut h = h0.clone();
    let mut records = Vec::new();
    let mut status = Status::MaxIters;
    for iter in 1..=cfg.max_iters {
        let GOutput { g, .. } = g_map(&h, w1, mu, tau, pm)?;
        let next = h.blend(&g, cfg.lambda)?;
        let change = next.sub(&h)?.sup_norm();
        let sup_norm = next.sup_norm();
        let holder_quotient = next.holder_quotient(cfg.alpha);
        records.push(IterRecord {
            iter,
            sup_norm,
            holder_quotient,
            change,
            g_sup: g.sup_norm(),
            admissible: sup_norm <= cfg.m_bound && holder_quotient <= cfg.c_bound,
        });
        h = next;
        if !sup_norm.is_finite() || sup_norm > 10.0 * cfg.m_bound {
            status = Status::Diverged;
            break;
        }
        if change <= cfg.tol {
            status = Status::Converged;
            break;
        }
    }
    let GOutput { g: g_final, w2: w2_final } = g_map(&h, w1, mu, tau, pm)?;
    let iterations = records.len();
    Ok(IterationResult { h1: h, g_final, w2_final, report: IterationReport { records, status, iterations } })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub theta: f64,
    /// `M_{T,3} M(K1)`.
    pub x: f64,
    pub threshold: f64,
    pub max_w1_left: f64,
    pub max_w1_right: f64,
    pub max_w1_product: f64,
    /// Largest of the three maxima above.
    pub compared: f64,
    pub admissible: bool,
    /// Forcing scale at which `compared` reaches `threshold`.
    pub critical_scale: f64,
    pub m: f64,
    pub ineq_lhs: f64,
    pub ineq_rhs: f64,
    pub ineq_ratio: f64,
    pub ineq_holds: bool,
}

/// Smallness of the forcing against `theta (1 - theta) / (X (2 theta + X))`
/// with `X = M_{T,3} M(K1)`, and the inequality on `M` it is built from.
pub fn check_assumption(w1: &W1Fields, bounds: &BoundConstants, pm: &PairMap) -> Result<AdmissibilityReport> {
    let theta = bounds.theta.value;
    let x = bounds.mt3.value * bounds.mk1.value;
    let threshold = crate::bounds::forcing_threshold(theta, x);
    let (mut l, mut r, mut p) = (0.0f64, 0.0f64, 0.0f64);
    for &[l1, r1, _, _] in &pm.0 {
        let (a, b) = (w1.get(l1), w1.get(r1));
        l = l.max(a.sup_norm());
        r = r.max(b.sup_norm());
        p = p.max(a.mul(b)?.sup_norm());
    }
    let compared = l.max(r).max(p);
    let linear = l.max(r);
    let critical_scale = match (linear > 0.0, p > 0.0) {
        (false, false) => f64::INFINITY,
        (true, false) => threshold / linear,
        (false, true) => (threshold / p).sqrt(),
        (true, true) => (threshold / linear).min((threshold / p).sqrt()),
    };
    let m = bounds.m.value;
    let (ineq_lhs, ineq_rhs) = crate::bounds::admissibility_inequality(theta, m, x);
    Ok(AdmissibilityReport {
        theta,
        x,
        threshold,
        max_w1_left: l,
        max_w1_right: r,
        max_w1_product: p,
        compared,
        admissible: compared <= threshold,
        critical_scale,
        m,
        ineq_lhs,
        ineq_rhs,
        ineq_ratio: ineq_lhs / ineq_rhs,
        ineq_holds: ineq_lhs <= ineq_rhs,
    })
}

/// `C1`: the largest grid Hölder quotient of `w1L`, `w1R` and `w1L w1R`
/// over the pairs.
pub fn w1_holder_constant(w1: &W1Fields, pm: &PairMap, alpha: f64) -> Result<f64> {
    let mut c: f64 = 0.0;
    for &[l1, r1, _, _] in &pm.0 {
        let (a, b) = (w1.get(l1), w1.get(r1));
        c = c.max(a.holder_quotient(alpha)).max(b.holder_quotient(alpha)).max(a.mul(b)?.holder_quotient(alpha));
    }
    Ok(c)
}

/// Forcing scale where the admissibility check flips, found by bisection on
/// the check itself applied to scaled tables.
pub fn admissibility_crossing(w1: &W1Fields, bounds: &BoundConstants, pm: &PairMap) -> Result<f64> {
    let ok = |s: f64| -> Result<bool> { Ok(check_assumption(&w1.scaled(s), bounds, pm)?.admissible) };
    if check_assumption(w1, bounds, pm)?.compared == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while ok(hi)? {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::ForcingSpec;

    fn grid() -> GridSpec {
        GridSpec::unit_cube(9, 0.5, 5).unwrap()
    }

    fn cfg() -> IterationConfig {
        IterationConfig { max_iters: 5, lambda: 0.5, tol: 1e-12, m_bound: 1.0, c_bound: 10.0, alpha: 0.5 }
    }

    fn bump_h1(g: &GridSpec, amp: f64) -> H1State {
        let f = ForcingSpec::PolynomialBump { center: [0.5; 3], radius: 0.3, amplitude: [amp; 3] }.fields(g).unwrap();
        H1State::new((0..9).map(|j| f[0].scale(1.0 + j as f64 / 9.0)).collect()).unwrap()
    }

    #[test]
    fn zero_forcing_zero_start_converges_at_once() {
        let g = grid();
        let w1 = build_w1(&ForcingSpec::Zero.fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let r = iterate(&H1State::zeros(&g), &w1, &cfg(), 1.0, 1.0, &PairMap::default()).unwrap();
        assert_eq!(r.report.status, Status::Converged);
        assert_eq!(r.report.iterations, 1);
        assert_eq!(r.h1.sup_norm(), 0.0);
    }

    #[test]
    fn g_of_zero_is_the_w1_product() {
        let g = grid();
        let f = ForcingSpec::PolynomialBump { center: [0.5; 3], radius: 0.3, amplitude: [1.0, 0.5, -0.7] };
        let w1 = build_w1(&f.fields(&g).unwrap(), 0.8, 1.2).unwrap();
        let pm = PairMap::default();
        let out = g_map(&H1State::zeros(&g), &w1, 0.8, 1.2, &pm).unwrap();
        for (j, &[l, r, _, _]) in pm.0.iter().enumerate() {
            assert_eq!(out.g.comps[j], w1.get(l).mul(w1.get(r)).unwrap());
        }
    }

    #[test]
    fn zero_forcing_leaves_only_w2_products() {
        let g = grid();
        let w1 = build_w1(&ForcingSpec::Zero.fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let pm = PairMap::default();
        let h1 = bump_h1(&g, 1e-2);
        let out = g_map(&h1, &w1, 1.0, 1.0, &pm).unwrap();
        // Independent route: all nine h2, then the printed-style table.
        let h2: Vec<_> = h1.comps.iter().map(|c| solve_one(c, 1.0).1).collect();
        let w2 = crate::w_tables::build_w2(&h2, 1.0, 1.0).unwrap();
        for (j, &[_, _, l, r]) in pm.0.iter().enumerate() {
            let want = w2.get(l).mul(w2.get(r)).unwrap();
            let err = out.g.comps[j].sub(&want).unwrap().sup_norm();
            assert!(err <= 1e-10 * (1.0 + want.sup_norm()), "g_{}: {err}", j + 1);
        }
    }

    #[test]
    fn g_is_homogeneous_of_degree_two() {
        let g = grid();
        let f = ForcingSpec::PolynomialBump { center: [0.5; 3], radius: 0.3, amplitude: [1.0, 0.5, -0.7] };
        let pm = PairMap::default();
        let h1 = bump_h1(&g, 1e-2);
        let base = g_map(&h1, &build_w1(&f.fields(&g).unwrap(), 1.0, 1.0).unwrap(), 1.0, 1.0, &pm).unwrap();
        let s = 3.0;
        let w1s = build_w1(&f.scaled(s).fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let scaled = g_map(&h1.scale(s), &w1s, 1.0, 1.0, &pm).unwrap();
        for j in 0..9 {
            let want = base.g.comps[j].scale(s * s);
            let err = scaled.g.comps[j].sub(&want).unwrap().sup_norm();
            assert!(err <= 1e-9 * want.sup_norm().max(1e-300), "g_{}: {err}", j + 1);
        }
    }

    #[test]
    fn lambda_one_zero_forcing_zero_state_is_fixed() {
        let g = grid();
        let w1 = build_w1(&ForcingSpec::Zero.fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let c = IterationConfig { lambda: 1.0, ..cfg() };
        let r = iterate(&H1State::zeros(&g), &w1, &c, 1.0, 1.0, &PairMap::default()).unwrap();
        assert_eq!(r.g_final, H1State::zeros(&g));
    }

    #[test]
    fn small_forcing_run_is_finite_and_bounded_in_length() {
        let g = grid();
        let f = ForcingSpec::PolynomialBump { center: [0.5; 3], radius: 0.3, amplitude: [1e-3; 3] };
        let w1 = build_w1(&f.fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let r = iterate(&H1State::zeros(&g), &w1, &cfg(), 1.0, 1.0, &PairMap::default()).unwrap();
        assert!(r.report.iterations >= 1 && r.report.records.len() <= cfg().max_iters);
        assert!(r.h1.comps.iter().all(|c| c.values.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn config_validation() {
        assert!(IterationConfig { lambda: 0.0, ..cfg() }.validate().is_err());
        assert!(IterationConfig { alpha: 1.0, ..cfg() }.validate().is_err());
        assert!(IterationConfig { max_iters: 0, ..cfg() }.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn bisected_crossing_matches_the_scaling_law() {
        use crate::bounds::{BoundConstants, MtEstimate};
        let g = grid();
        let f = ForcingSpec::PolynomialBump { center: [0.5; 3], radius: 0.3, amplitude: [0.3, -0.2, 0.1] };
        let w1 = build_w1(&f.fields(&g).unwrap(), 1.0, 1.0).unwrap();
        let est = MtEstimate {
            probes: 1,
            ratio_h2: 0.0,
            ratio_dt: 0.0,
            ratio_dx: 0.0,
            ratio_dtdx: 0.0,
            mt1: 1.0,
            mt2: 1.0,
            mt3: 2.0,
            mp: 0.0,
            mpp: 0.0,
            mppp: 0.0,
        };
        let b = BoundConstants::assemble(0.5, 0.5, None, None, 1.0, 0.1, &est, g.diameter()).unwrap();
        let pm = PairMap::default();
        let rep = check_assumption(&w1, &b, &pm).unwrap();
        let s = admissibility_crossing(&w1, &b, &pm).unwrap();
        assert!(((s - rep.critical_scale) / rep.critical_scale).abs() < 1e-10, "{s} {}", rep.critical_scale);
        assert!(rep.ineq_holds && rep.ineq_ratio >= 1.0 - 1e-12);
        assert!(w1_holder_constant(&w1, &pm, 0.5).unwrap() > 0.0);
    }
}
