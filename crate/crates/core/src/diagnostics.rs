//! Small-scale sparse-eigenvalue diagnostics.

use nalgebra::DMatrix;

use crate::error::{usage, Result};

/// Largest matrix dimension accepted by [`sparse_eigenvalue_bounds`].
pub const MAX_SPARSE_EIGEN_DIM: usize = 20;

/// `(rho_minus, rho_plus)`: the extreme eigenvalues over all `s x s`
/// principal submatrices of the symmetric matrix `h`, by exhaustive
/// enumeration of the `C(m, s)` supports.
pub fn sparse_eigenvalue_bounds(h: &DMatrix<f64>, s: usize) -> Result<(f64, f64)> {
    let m = h.nrows();
    if h.ncols() != m {
        return Err(usage("matrix is not square"));
    }
    if m > MAX_SPARSE_EIGEN_DIM {
        return Err(usage(format!(
            "dimension {m} exceeds {MAX_SPARSE_EIGEN_DIM}; exhaustive support enumeration refused"
        )));
    }
    if s == 0 || s > m {
        return Err(usage(format!("support size {s} outside 1..={m}")));
    }
    for a in 0..m {
        for b in 0..a {
            if (h[(a, b)] - h[(b, a)]).abs() > 1e-12 * (1.0 + h[(a, b)].abs()) {
                return Err(usage("matrix is not symmetric"));
            }
        }
    }

    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut support: Vec<usize> = (0..s).collect();
    loop {
        let sub = DMatrix::from_fn(s, s, |a, b| h[(support[a], support[b])]);
        let eig = sub.symmetric_eigenvalues();
        lo = lo.min(eig.min());
        hi = hi.max(eig.max());

        // next combination in lexicographic order
        let mut pos = s;
        loop {
            if pos == 0 {
                return Ok((lo, hi));
            }
            pos -= 1;
            if support[pos] < m - s + pos {
                break;
            }
        }
        support[pos] += 1;
        for q in pos + 1..s {
            support[q] = support[q - 1] + 1;
        }
    }
}
