use nalgebra::{ComplexField, DMatrix, Dim, Matrix, RawStorage};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_RTOL: f64 = 1e-10;

/// Singular values in descending order.
pub fn singular_values<T>(m: &DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64>,
{
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank from descending singular values.
pub fn rank_from_singular(s: &[f64]) -> usize {
    match s.first() {
        Some(&top) if top > 0.0 => s.iter().filter(|&&v| v > RANK_RTOL * top).count(),
        _ => 0,
    }
}

pub fn rank<T>(m: &DMatrix<T>) -> usize
where
    T: ComplexField<RealField = f64>,
{
    rank_from_singular(&singular_values(m))
}

/// Frobenius norm for any storage.
pub fn frobenius<T, R, C, S>(m: &Matrix<T, R, C, S>) -> f64
where
    T: ComplexField<RealField = f64>,
    R: Dim,
    C: Dim,
    S: RawStorage<T, R, C>,
{
    m.iter().map(|v| v.clone().modulus_squared()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn rank_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1e-3, 0.0]));
        assert_eq!(rank(&m), 2);
        let s = singular_values(&m);
        assert!(s[0] >= s[1] && s[1] >= s[2]);
    }

    #[test]
    fn complex_rank_one() {
        let u = nalgebra::DVector::from_vec(vec![Complex64::new(1.0, 2.0), Complex64::new(0.0, -1.0)]);
        let m = &u * u.adjoint();
        assert_eq!(rank(&m), 1);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        assert_eq!(rank(&DMatrix::<f64>::zeros(3, 2)), 0);
    }
}
