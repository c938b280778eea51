use num_complex::Complex64;

use crate::error::{Error, Result};

/// LU factorization of a complex tridiagonal matrix, stored for repeated
/// solves with the same matrix (Thomas algorithm without pivoting).
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<Complex64>,
    /// Super-diagonal divided by the eliminated pivot, c'_i = u_i / d'_i.
    upper_scaled: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
}

impl TridiagonalLu {
    /// `lower[i]` couples row `i + 1` to column `i`; `upper[i]` couples row
    /// `i` to column `i + 1`.
    pub fn new(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 || lower.len() + 1 != n || upper.len() + 1 != n {
            return Err(Error::InvalidParameter("tridiagonal band lengths do not match".into()));
        }
        let mut inv_pivot = Vec::with_capacity(n);
        let mut upper_scaled = Vec::with_capacity(n - 1);
        let mut pivot = diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = diag[i] - lower[i - 1] * upper_scaled[i - 1];
            }
            if pivot.norm() < 1e-300 {
                return Err(Error::InvalidParameter(format!("zero pivot at row {i}")));
            }
            let inv = pivot.inv();
            inv_pivot.push(inv);
            if i + 1 < n {
                upper_scaled.push(upper[i] * inv);
            }
        }
        Ok(TridiagonalLu { lower: lower.to_vec(), upper_scaled, inv_pivot })
    }

    pub fn len(&self) -> usize {
        self.inv_pivot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_pivot.is_empty()
    }

    /// Overwrites `rhs` with the solution of `A·x = rhs`.
    pub fn solve_in_place(&self, rhs: &mut [Complex64]) {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        rhs[0] *= self.inv_pivot[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] = rhs[i] - self.upper_scaled[i] * rhs[i + 1];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn multiply(lower: &[Complex64], diag: &[Complex64], upper: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn small_system() {
        let lower = [c(1.0, 0.0), c(0.0, 1.0)];
        let diag = [c(4.0, 0.0), c(4.0, 1.0), c(3.0, -1.0)];
        let upper = [c(1.0, 1.0), c(-1.0, 0.0)];
        let x = [c(1.0, 2.0), c(-0.5, 0.0), c(0.25, -3.0)];
        let mut b = multiply(&lower, &diag, &upper, &x);
        TridiagonalLu::new(&lower, &diag, &upper).unwrap().solve_in_place(&mut b);
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).norm() < 1e-14);
        }
    }

    #[test]
    fn band_length_mismatch() {
        assert!(TridiagonalLu::new(&[c(1.0, 0.0)], &[c(1.0, 0.0); 3], &[c(1.0, 0.0); 2]).is_err());
    }

    proptest! {
        // diagonally dominant systems are solved to round-off
        #[test]
        fn solves_diagonally_dominant(
            entries in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 2..40)
        ) {
            let n = entries.len();
            let lower: Vec<_> = entries[1..].iter().map(|e| c(e.0, e.1)).collect();
            let upper: Vec<_> = entries[1..].iter().map(|e| c(e.1, -e.2)).collect();
            let diag: Vec<_> = entries.iter().map(|e| c(3.0 + e.3.abs(), e.4)).collect();
            let x: Vec<_> = entries.iter().map(|e| c(e.2, e.0)).collect();
            let mut b = multiply(&lower, &diag, &upper, &x);
            TridiagonalLu::new(&lower, &diag, &upper).unwrap().solve_in_place(&mut b);
            for i in 0..n {
                prop_assert!((b[i] - x[i]).norm() < 1e-12);
            }
        }
    }
}
