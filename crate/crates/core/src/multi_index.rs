use serde::{Deserialize, Serialize};
use std::fmt;

/// Derivative orders along (t, x1, x2, x3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct MultiIndex(pub [u32; 4]);

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex([0; 4]);

    pub fn new(t: u32, x1: u32, x2: u32, x3: u32) -> Self {
        MultiIndex([t, x1, x2, x3])
    }

    /// Unit index along axis `k` (0 = t, 1..=3 = space).
    pub fn axis(k: usize) -> Self {
        let mut m = [0; 4];
        m[k] = 1;
        MultiIndex(m)
    }

    pub fn t(&self) -> u32 {
        self.0[0]
    }

    pub fn spatial_order(&self) -> u32 {
        self.0[1] + self.0[2] + self.0[3]
    }

    pub fn total(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn plus(&self, other: MultiIndex) -> Self {
        let mut m = self.0;
        for (a, b) in m.iter_mut().zip(other.0) {
            *a += b;
        }
        MultiIndex(m)
    }

    pub fn bump(&self, k: usize) -> Self {
        self.plus(Self::axis(k))
    }
}

impl fmt::Display for MultiIndex {
    /// Compact suffix such as `tx1` or `x2x2`; empty for the zero index.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for _ in 0..self.0[0] {
            write!(f, "t")?;
        }
        for k in 1..4 {
            for _ in 0..self.0[k] {
                write!(f, "x{k}")?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_orders_axes_canonically() {
        assert_eq!(MultiIndex::new(1, 1, 0, 0).to_string(), "tx1");
        assert_eq!(MultiIndex::new(0, 0, 2, 0).to_string(), "x2x2");
        assert_eq!(MultiIndex::new(2, 0, 0, 0).to_string(), "tt");
        assert_eq!(MultiIndex::ZERO.to_string(), "");
    }

    #[test]
    fn bump_adds_one_along_axis() {
        let m = MultiIndex::new(0, 1, 0, 2).bump(1).bump(0);
        assert_eq!(m, MultiIndex::new(1, 2, 0, 2));
        assert_eq!(m.spatial_order(), 4);
        assert_eq!(m.total(), 5);
    }
}
