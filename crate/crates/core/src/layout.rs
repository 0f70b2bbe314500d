//! Component naming for the lifted state.
//!
//! The lift carries the velocities, the pressure, a selection of their
//! derivatives and the nine convective products. `X` has 59 entries, `Z`
//! (the free part) has 55. Every other module looks indices up here by name.

use crate::multi_index::MultiIndex;
use serde::Serialize;
use std::collections::HashMap;

/// Base unknowns: the three velocity components and the pressure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Unknown {
    U(usize),
    P,
}

impl Unknown {
    fn name(&self) -> String {
        match self {
            Unknown::U(j) => format!("u{}", j + 1),
            Unknown::P => "p".to_string(),
        }
    }
}

/// A single entry of the lifted state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quantity {
    /// A derivative of a base unknown.
    Deriv(Unknown, MultiIndex),
    /// The convective product `u_k * du_j/dx_k` as `(j, k)`, 0-based.
    Product { j: usize, k: usize },
}

impl Quantity {
    pub fn u(j: usize, d: MultiIndex) -> Self {
        Quantity::Deriv(Unknown::U(j), d)
    }

    pub fn p(d: MultiIndex) -> Self {
        Quantity::Deriv(Unknown::P, d)
    }

    pub fn name(&self) -> String {
        match self {
            Quantity::Deriv(f, d) if d.is_zero() => f.name(),
            Quantity::Deriv(f, d) => format!("{}_{}", f.name(), d),
            Quantity::Product { j, k } => format!("u{}*u{}_x{}", k + 1, j + 1, k + 1),
        }
    }

    /// Derivative along axis `k`; products have no derivative inside the lift.
    pub fn differentiate(&self, k: usize) -> Option<Quantity> {
        match self {
            Quantity::Deriv(f, d) => Some(Quantity::Deriv(*f, d.bump(k))),
            Quantity::Product { .. } => None,
        }
    }
}

/// One product constraint: `z[lhs] = (left . z) * (right . z)`.
#[derive(Debug, Clone, Serialize)]
pub struct QuadPair {
    pub lhs: usize,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateLayout {
    pub x: Vec<Quantity>,
    pub z: Vec<Quantity>,
    pub x_names: Vec<String>,
    pub z_names: Vec<String>,
    pub quad_pairs: Vec<QuadPair>,
    #[serde(skip)]
    z_lookup: HashMap<Quantity, usize>,
}

pub const NX: usize = 59;
pub const NZ: usize = 55;
/// Entries of `X` that precede `Z`.
pub const X_HEAD: usize = 4;

fn second_derivatives() -> [MultiIndex; 10] {
    [
        MultiIndex::new(2, 0, 0, 0),
        MultiIndex::new(0, 2, 0, 0),
        MultiIndex::new(0, 0, 2, 0),
        MultiIndex::new(0, 0, 0, 2),
        MultiIndex::new(1, 1, 0, 0),
        MultiIndex::new(1, 0, 1, 0),
        MultiIndex::new(1, 0, 0, 1),
        MultiIndex::new(0, 1, 1, 0),
        MultiIndex::new(0, 1, 0, 1),
        MultiIndex::new(0, 0, 1, 1),
    ]
}

impl StateLayout {
    pub fn new() -> Self {
        let ax = MultiIndex::axis;
        let mut z = Vec::with_capacity(NZ);
        // First derivatives and values; du1/dx1 is eliminated by continuity.
        for j in 0..3 {
            for k in 1..4 {
                if !(j == 0 && k == 1) {
                    z.push(Quantity::u(j, ax(k)));
                }
            }
            z.push(Quantity::u(j, MultiIndex::ZERO));
        }
        for k in 0..4 {
            z.push(Quantity::p(ax(k)));
        }
        z.push(Quantity::p(MultiIndex::ZERO));
        for j in 0..3 {
            for d in second_derivatives() {
                z.push(Quantity::u(j, d));
            }
        }
        for j in 0..3 {
            for k in 0..3 {
                z.push(Quantity::Product { j, k });
            }
        }
        assert_eq!(z.len(), NZ);

        let mut x = vec![Quantity::u(0, ax(1))];
        for j in 0..3 {
            x.push(Quantity::u(j, ax(0)));
        }
        x.extend(z.iter().copied());

        let z_lookup: HashMap<Quantity, usize> =
            z.iter().enumerate().map(|(i, q)| (*q, i)).collect();

        let mut layout = StateLayout {
            x_names: x.iter().map(Quantity::name).collect(),
            z_names: z.iter().map(Quantity::name).collect(),
            x,
            z,
            quad_pairs: Vec::new(),
            z_lookup,
        };
        layout.quad_pairs = layout.build_pairs();
        layout
    }

    fn build_pairs(&self) -> Vec<QuadPair> {
        let mut out = Vec::new();
        for j in 0..3 {
            for k in 0..3 {
                let lhs = self.z_index_of(&Quantity::Product { j, k }).unwrap();
                let left = self.coefficients(&Quantity::u(k, MultiIndex::ZERO));
                let right = self.coefficients(&Quantity::u(j, MultiIndex::axis(k + 1)));
                out.push(QuadPair { lhs, left, right });
            }
        }
        out
    }

    /// Z-coefficient vector of a quantity that is linear in `Z` without
    /// forcing. The one non-member used here is `u1_x1 = -(u2_x2 + u3_x3)`.
    fn coefficients(&self, q: &Quantity) -> Vec<f64> {
        let mut v = vec![0.0; NZ];
        if let Some(i) = self.z_index_of(q) {
            v[i] = 1.0;
        } else if *q == Quantity::u(0, MultiIndex::axis(1)) {
            v[self.z("u2_x2")] = -1.0;
            v[self.z("u3_x3")] = -1.0;
        } else {
            panic!("{} is not a linear function of Z", q.name());
        }
        v
    }

    pub fn z_index_of(&self, q: &Quantity) -> Option<usize> {
        self.z_lookup.get(q).copied()
    }

    pub fn z_index(&self, name: &str) -> Option<usize> {
        self.z_names.iter().position(|n| n == name)
    }

    pub fn x_index(&self, name: &str) -> Option<usize> {
        self.x_names.iter().position(|n| n == name)
    }

    /// Z index of a component known to exist; panics on a typo.
    pub fn z(&self, name: &str) -> usize {
        self.z_index(name)
            .unwrap_or_else(|| panic!("unknown Z component {name}"))
    }
}

impl Default for StateLayout {
    fn default() -> Self {
        Self::new()
    }
}
