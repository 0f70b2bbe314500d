//! The two derivative tables: `W1` built from the forcing potentials
//! `F11, F21, F31`, and `W2` built from the partial sums `h31, h32, h33` of
//! `h2`. Each entry is a linear combination of partial derivatives, kept
//! symbolic so it can be evaluated on fields or as a plane-wave symbol.

use crate::derivative::derivative;
use crate::error::{Error, Result};
use crate::fourier_symbol::{FreqPoint, C};
use crate::grid::ScalarField;
use crate::multi_index::MultiIndex;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub source: usize,
    pub d: MultiIndex,
}

/// `sum coef * d^alpha source`, kept merged and sorted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DiffExpr {
    pub terms: Vec<Term>,
}

impl DiffExpr {
    pub fn zero() -> Self {
        DiffExpr::default()
    }

    pub fn src(source: usize) -> Self {
        DiffExpr { terms: vec![Term { coef: 1.0, source, d: MultiIndex::ZERO }] }
    }

    pub fn term(coef: f64, source: usize, d: [u32; 4]) -> Self {
        DiffExpr { terms: vec![Term { coef, source, d: MultiIndex(d) }] }.normalized()
    }

    fn normalized(mut self) -> Self {
        self.terms.sort_by_key(|t| (t.source, t.d));
        let mut out: Vec<Term> = Vec::with_capacity(self.terms.len());
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.source == t.source && last.d == t.d => last.coef += t.coef,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.coef != 0.0);
        DiffExpr { terms: out }
    }

    /// Partial derivative along axis `k` (0 is time).
    pub fn d(&self, k: usize) -> Self {
        DiffExpr { terms: self.terms.iter().map(|t| Term { d: t.d.bump(k), ..*t }).collect() }.normalized()
    }

    pub fn lap(&self) -> Self {
        self.d(1).d(1).add(&self.d(2).d(2)).add(&self.d(3).d(3))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        DiffExpr { terms }.normalized()
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        DiffExpr { terms: self.terms.iter().map(|t| Term { coef: s * t.coef, ..*t }).collect() }.normalized()
    }

    pub fn sum(items: &[DiffExpr]) -> Self {
        items.iter().fold(DiffExpr::zero(), |acc, e| acc.add(e))
    }

    pub fn max_time_order(&self) -> u32 {
        self.terms.iter().map(|t| t.d.t()).max().unwrap_or(0)
    }

    pub fn max_spatial_order(&self) -> u32 {
        self.terms.iter().map(|t| t.d.spatial_order()).max().unwrap_or(0)
    }

    /// Value on plane waves `src_hat[s] * exp(i xi . x)`.
    pub fn symbol(&self, xi: &FreqPoint, src_hat: &[C]) -> C {
        self.terms
            .iter()
            .map(|t| {
                let mut m = C::new(t.coef, 0.0);
                for a in 0..4 {
                    m *= xi.ik(a).powu(t.d.0[a]);
                }
                m * src_hat[t.source]
            })
            .sum()
    }

    pub fn eval(&self, cache: &mut DerivCache) -> Result<ScalarField> {
        let mut out = ScalarField::zeros(&cache.sources[0].grid);
        for t in &self.terms {
            let f = cache.get(t.source, t.d)?;
            out.axpy(t.coef, f)?;
        }
        Ok(out)
    }
}

/// Derivatives of a fixed set of source fields, computed once each.
pub struct DerivCache<'a> {
    sources: &'a [ScalarField],
    map: HashMap<(usize, MultiIndex), ScalarField>,
}

impl<'a> DerivCache<'a> {
    pub fn new(sources: &'a [ScalarField]) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::InvalidParameter("no source fields".into()));
        }
        if sources.iter().any(|s| !s.grid.same_shape(&sources[0].grid)) {
            return Err(Error::GridMismatch("source fields live on different grids".into()));
        }
        Ok(DerivCache { sources, map: HashMap::new() })
    }

    pub fn get(&mut self, source: usize, d: MultiIndex) -> Result<&ScalarField> {
        if d.is_zero() {
            return Ok(&self.sources[source]);
        }
        if !self.map.contains_key(&(source, d)) {
            let f = derivative(&self.sources[source], &d)?;
            self.map.insert((source, d), f);
        }
        Ok(&self.map[&(source, d)])
    }
}

/// The sixteen `W1` expressions over sources `(F11, F21, F31)`.
pub fn w1_exprs(mu: f64, tau: f64) -> [DiffExpr; 16] {
    let f = [DiffExpr::src(0), DiffExpr::src(1), DiffExpr::src(2)];
    let y3 = DiffExpr::sum(&[f[1].d(1).d(2), f[2].d(1).d(3), f[0].d(2).d(2).scale(-1.0), f[0].d(3).d(3).scale(-1.0)]);
    let y7 = DiffExpr::sum(&[f[0].d(1).d(2), f[2].d(2).d(3), f[1].d(1).d(1).scale(-1.0), f[1].d(3).d(3).scale(-1.0)]);
    let y11 = DiffExpr::sum(&[f[0].d(1).d(3), f[1].d(2).d(3), f[2].d(1).d(1).scale(-1.0), f[2].d(2).d(2).scale(-1.0)]);
    let div = DiffExpr::sum(&[f[0].d(1), f[1].d(2), f[2].d(3)]);
    let y16 = div.lap().scale(mu).sub(&div.d(0)).scale(1.0 / tau);
    let mom = |k: usize, y: &DiffExpr| y16.d(k).scale(-tau).add(&y.lap().scale(mu));
    [
        y7.d(2).add(&y11.d(3)).scale(-1.0),
        mom(1, &y3),
        mom(2, &y7),
        mom(3, &y11),
        y3.d(2),
        y3.d(3),
        y3.clone(),
        y7.d(1),
        y7.d(2),
        y7.d(3),
        y7.clone(),
        y11.d(1),
        y11.d(2),
        y11.d(3),
        y11.clone(),
        y16,
    ]
}

/// Entries of the printed `W2` expansion that disagree with the defining
/// symbol. In both, one `h33` term is copied from the `w2_9`/`w2_10` family.
pub const W2_PRINTED_DEVIATIONS: [usize; 2] = [13, 14];

/// The sixteen `W2` expressions over sources `(h31, h32, h33)`. Entries
/// follow the printed expansion except those in [`W2_PRINTED_DEVIATIONS`],
/// which are `d/dx2` and `d/dx3` of `w2_15` as the defining symbol requires.
/// The last term of `w2_15` is taken as second order.
pub fn w2_exprs(mu: f64, tau: f64) -> [DiffExpr; 16] {
    let mut w = w2_printed_exprs(mu, tau);
    w[12] = w[14].d(2);
    w[13] = w[14].d(3);
    w
}

/// The printed expansion, verbatim apart from the order of `w2_15`.
pub fn w2_printed_exprs(mu: f64, tau: f64) -> [DiffExpr; 16] {
    let t = DiffExpr::term;
    let s = |items: &[DiffExpr]| DiffExpr::sum(items);
    let (a, b, c) = (0, 1, 2);
    [
        s(&[t(1.0, a, [0, 1, 2, 0]), t(1.0, a, [0, 1, 0, 2]), t(-1.0, b, [0, 2, 1, 0]), t(-1.0, c, [0, 2, 0, 1])]),
        s(&[t(1.0, a, [1, 0, 2, 0]), t(1.0, a, [1, 0, 0, 2]), t(-1.0, b, [1, 1, 1, 0]), t(-1.0, c, [1, 1, 0, 1])]),
        s(&[t(1.0, b, [1, 2, 0, 0]), t(1.0, b, [1, 0, 0, 2]), t(-1.0, a, [1, 1, 1, 0]), t(-1.0, c, [1, 0, 1, 1])]),
        s(&[t(1.0, c, [1, 2, 0, 0]), t(1.0, c, [1, 0, 2, 0]), t(-1.0, a, [1, 1, 0, 1]), t(-1.0, b, [1, 0, 1, 1])]),
        s(&[t(1.0, a, [0, 0, 3, 0]), t(1.0, a, [0, 0, 1, 2]), t(-1.0, b, [0, 1, 2, 0]), t(-1.0, c, [0, 1, 1, 1])]),
        s(&[t(1.0, a, [0, 0, 2, 1]), t(1.0, a, [0, 0, 0, 3]), t(-1.0, b, [0, 1, 1, 1]), t(-1.0, c, [0, 1, 0, 2])]),
        s(&[t(1.0, a, [0, 0, 2, 0]), t(1.0, a, [0, 0, 0, 2]), t(-1.0, b, [0, 1, 1, 0]), t(-1.0, c, [0, 1, 0, 1])]),
        s(&[t(1.0, b, [0, 3, 0, 0]), t(1.0, b, [0, 1, 0, 2]), t(-1.0, a, [0, 2, 1, 0]), t(-1.0, c, [0, 1, 1, 1])]),
        s(&[t(1.0, b, [0, 2, 1, 0]), t(1.0, b, [0, 0, 1, 2]), t(-1.0, a, [0, 1, 2, 0]), t(-1.0, c, [0, 0, 2, 1])]),
        s(&[t(1.0, b, [0, 2, 0, 1]), t(1.0, b, [0, 0, 0, 3]), t(-1.0, a, [0, 1, 1, 1]), t(-1.0, c, [0, 0, 1, 2])]),
        s(&[t(1.0, b, [0, 2, 0, 0]), t(1.0, b, [0, 0, 0, 2]), t(-1.0, a, [0, 1, 1, 0]), t(-1.0, c, [0, 0, 1, 1])]),
        s(&[t(1.0, c, [0, 3, 0, 0]), t(1.0, c, [0, 1, 2, 0]), t(-1.0, a, [0, 2, 0, 1]), t(-1.0, b, [0, 1, 1, 1])]),
        s(&[t(1.0, c, [0, 2, 1, 0]), t(1.0, c, [0, 0, 1, 2]), t(-1.0, a, [0, 1, 1, 1]), t(-1.0, b, [0, 0, 2, 1])]),
        s(&[t(1.0, c, [0, 2, 0, 1]), t(1.0, c, [0, 0, 0, 3]), t(-1.0, a, [0, 1, 0, 2]), t(-1.0, b, [0, 0, 1, 2])]),
        s(&[t(1.0, c, [0, 2, 0, 0]), t(1.0, c, [0, 0, 2, 0]), t(-1.0, a, [0, 1, 0, 1]), t(-1.0, b, [0, 0, 1, 1])]),
        s(&[
            t(1.0 / tau, a, [1, 1, 0, 0]),
            t(1.0 / tau, b, [1, 0, 1, 0]),
            t(1.0 / tau, c, [1, 0, 0, 1]),
            DiffExpr::src(a).d(1).lap().scale(-mu / tau),
            DiffExpr::src(b).d(2).lap().scale(-mu / tau),
            DiffExpr::src(c).d(3).lap().scale(-mu / tau),
        ]),
    ]
}

/// 1-based table positions `(w1 left, w1 right, w2 left, w2 right)` of the
/// two factors in each of the nine quadratic pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairMap(pub [[usize; 4]; 9]);

impl Default for PairMap {
    fn default() -> Self {
        PairMap([
            [7, 1, 7, 1],
            [11, 5, 11, 5],
            [15, 6, 15, 6],
            [7, 8, 7, 8],
            [11, 9, 11, 9],
            [15, 10, 15, 10],
            [7, 12, 7, 12],
            [11, 13, 11, 13],
            [15, 14, 15, 14],
        ])
    }
}

impl PairMap {
    /// Left factors are the velocity carriers `w7, w11, w15`.
    pub fn is_consistent(&self) -> bool {
        self.0.iter().all(|p| [7, 11, 15].contains(&p[0]) && [7, 11, 15].contains(&p[2]))
    }
}

#[derive(Debug, Clone)]
pub struct W1Fields {
    /// `F_jv`, the Newtonian potentials of the forcing.
    pub fv: Vec<ScalarField>,
    /// `F_j1`, with `(mu Lap - d/dt) Lap F_j1 = F_j`.
    pub f1: Vec<ScalarField>,
    pub w: Vec<ScalarField>,
}

impl W1Fields {
    /// Entry by 1-based table position.
    pub fn get(&self, i: usize) -> &ScalarField {
        &self.w[i - 1]
    }

    /// The table for the forcing multiplied by `s`; every entry is linear.
    pub fn scaled(&self, s: f64) -> Self {
        let sc = |v: &Vec<ScalarField>| v.iter().map(|f| f.scale(s)).collect();
        W1Fields { fv: sc(&self.fv), f1: sc(&self.f1), w: sc(&self.w) }
    }
}

#[derive(Debug, Clone)]
pub struct W2Fields {
    pub h3: Vec<ScalarField>,
    pub w: Vec<ScalarField>,
}

impl W2Fields {
    pub fn get(&self, i: usize) -> &ScalarField {
        &self.w[i - 1]
    }
}

pub fn eval_table(exprs: &[DiffExpr], sources: &[ScalarField]) -> Result<Vec<ScalarField>> {
    let mut cache = DerivCache::new(sources)?;
    exprs.iter().map(|e| e.eval(&mut cache)).collect()
}

/// `W1` from the already-lifted forcing `F_j1`.
pub fn w1_from_lifted(fv: Vec<ScalarField>, f1: Vec<ScalarField>, mu: f64, tau: f64) -> Result<W1Fields> {
    let w = eval_table(&w1_exprs(mu, tau), &f1)?;
    Ok(W1Fields { fv, f1, w })
}

/// Partial sums `h31, h32, h33` of the nine `h2` components.
pub fn partial_sums(h2: &[ScalarField]) -> Result<Vec<ScalarField>> {
    if h2.len() != 9 {
        return Err(Error::InvalidParameter(format!("expected 9 h2 components, got {}", h2.len())));
    }
    h2.chunks(3).map(|c| c[0].add(&c[1])?.add(&c[2])).collect()
}

pub fn build_w2_from_sums(h3: Vec<ScalarField>, mu: f64, tau: f64) -> Result<W2Fields> {
    let w = eval_table(&w2_exprs(mu, tau), &h3)?;
    Ok(W2Fields { h3, w })
}

pub fn build_w2(h2: &[ScalarField], mu: f64, tau: f64) -> Result<W2Fields> {
    build_w2_from_sums(partial_sums(h2)?, mu, tau)
}
