use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a dense symmetric-definite pencil, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// One eigenvector per column.
    pub vectors: Mat<f64>,
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(m: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let llt = m.llt(Side::Lower).map_err(|_| Error::NotPositiveDefinite)?;
    Ok(llt.L().to_owned())
}

/// Full eigendecomposition of a symmetric matrix (lower triangle is read).
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<DenseEigen> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Backend(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    Ok(DenseEigen {
        values: (0..s.nrows()).map(|i| s[i]).collect(),
        vectors: evd.U().to_owned(),
    })
}

/// Smallest `k` eigenpairs of `A v = λ M v` with `M` symmetric positive
/// definite, by reduction to `L⁻¹ A L⁻ᵀ` where `M = L Lᵀ`. The returned
/// vectors are `M`-orthonormal.
pub fn eig_dense_generalized(a: MatRef<'_, f64>, m: MatRef<'_, f64>, k: usize) -> Result<DenseEigen> {
    let n = a.nrows();
    for (r, c) in [(a.ncols(), n), (m.nrows(), n), (m.ncols(), n)] {
        if r != c {
            return Err(Error::DimensionMismatch { expected: n, got: r });
        }
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("requested {k} eigenpairs of a {n}x{n} pencil")));
    }
    let l = cholesky_lower(m)?;
    let mut x = a.to_owned();
    l.solve_lower_triangular_in_place(&mut x);
    let mut c = x.transpose().to_owned();
    l.solve_lower_triangular_in_place(&mut c);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));

    let eig = symmetric_eigen(c.as_ref())?;
    let mut v = eig.vectors.subcols(0, k).to_owned();
    l.transpose().solve_upper_triangular_in_place(&mut v);
    Ok(DenseEigen {
        values: eig.values[..k].to_vec(),
        vectors: v,
    })
}
