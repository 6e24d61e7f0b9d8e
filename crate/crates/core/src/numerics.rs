//! Small dense linear-algebra services used by filter synthesis and control.
//!
//! Matrices are `nalgebra` types throughout the crate. Singular value and
//! eigenvalue decompositions are delegated to `faer`, which stays accurate on
//! rank-deficient inputs. The functions here fix the cutoff conventions
//! (relative to the largest singular value) and the shapes the rest of the
//! crate relies on.

use faer::Mat;
use nalgebra::DMatrix;
use thiserror::Error;

pub type DenseMatrix = DMatrix<f64>;

/// Default relative singular-value cutoff.
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("singular value decomposition did not converge")]
    SvdFailure,
    #[error("eigenvalue iteration did not converge")]
    EigenFailure,
    #[error("expected a square matrix, got {0}x{1}")]
    NonSquare(usize, usize),
    #[error("matrix is empty")]
    Empty,
    #[error("matrix has non-finite entries")]
    NonFinite,
}

fn check_finite(m: &DenseMatrix) -> Result<(), NumericsError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(NumericsError::Empty);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    Ok(())
}

fn to_faer(m: &DenseMatrix) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Singular values (descending) with left and right singular vectors as
/// columns. `full` returns square `U` and `V`.
fn svd(m: &DenseMatrix, full: bool) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), NumericsError> {
    let f = to_faer(m);
    let k = m.nrows().min(m.ncols());
    let (u, s, v) = if full {
        let d = f.svd().map_err(|_| NumericsError::SvdFailure)?;
        let s: Vec<f64> = (0..k).map(|i| d.S().column_vector()[i]).collect();
        (from_faer(d.U()), s, from_faer(d.V()))
    } else {
        let d = f.thin_svd().map_err(|_| NumericsError::SvdFailure)?;
        let s: Vec<f64> = (0..k).map(|i| d.S().column_vector()[i]).collect();
        (from_faer(d.U()), s, from_faer(d.V()))
    };
    Ok((u, s, v))
}

fn cutoff(s: &[f64], tol: f64) -> f64 {
    tol * s.iter().copied().fold(0.0, f64::max)
}

/// Moore–Penrose pseudoinverse. Singular values at or below `tol * sigma_max`
/// are treated as zero.
pub fn pseudoinverse(m: &DenseMatrix, tol: f64) -> Result<DenseMatrix, NumericsError> {
    check_finite(m)?;
    let (u, s, v) = svd(m, false)?;
    let cut = cutoff(&s, tol);
    let mut pinv = DenseMatrix::zeros(m.ncols(), m.nrows());
    for (k, &sk) in s.iter().enumerate() {
        if sk > cut && sk > 0.0 {
            pinv += (v.column(k) * u.column(k).transpose()) / sk;
        }
    }
    Ok(pinv)
}

/// Numerical rank with the same relative cutoff convention as [`pseudoinverse`].
pub fn rank(m: &DenseMatrix, tol: f64) -> Result<usize, NumericsError> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    check_finite(m)?;
    let s = to_faer(m)
        .singular_values()
        .map_err(|_| NumericsError::SvdFailure)?;
    let cut = cutoff(&s, tol);
    Ok(s.iter().filter(|&&v| v > cut && v > 0.0).count())
}

/// Orthonormal basis of the left null space of `m`, one basis vector per row.
///
/// The result `B` has `rows - rank(m)` rows, `B * m = 0` and `B * B^T = I`.
/// For a full-row-rank square input the result has zero rows.
pub fn left_null_basis(m: &DenseMatrix, tol: f64) -> Result<DenseMatrix, NumericsError> {
    check_finite(m)?;
    let (u, s, _) = svd(m, true)?;
    let cut = cutoff(&s, tol);
    let r = s.iter().filter(|&&v| v > cut && v > 0.0).count();
    Ok(u.columns(r, m.nrows() - r).transpose())
}

/// `m^p` by repeated squaring; `m^0` is the identity.
pub fn matrix_power(m: &DenseMatrix, p: u32) -> Result<DenseMatrix, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NonSquare(m.nrows(), m.ncols()));
    }
    let mut result = DenseMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    let mut exp = p;
    while exp > 0 {
        if exp & 1 == 1 {
            result = &result * &base;
        }
        exp >>= 1;
        if exp > 0 {
            base = &base * &base;
        }
    }
    Ok(result)
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DenseMatrix) -> Result<f64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NonSquare(m.nrows(), m.ncols()));
    }
    check_finite(m)?;
    let eig = to_faer(m)
        .eigenvalues()
        .map_err(|_| NumericsError::EigenFailure)?;
    Ok(eig
        .iter()
        .map(|z| z.re.hypot(z.im))
        .fold(0.0, f64::max))
}

/// Spectral radius of `m` compressed onto the orthogonal complement of the
/// all-ones vector.
///
/// When `m * 1 = 1` (any consensus-type error dynamics driven by relative
/// measurements) the compression carries exactly the eigenvalues other than
/// the translation eigenvalue.
pub fn spectral_radius_off_consensus(m: &DenseMatrix) -> Result<f64, NumericsError> {
    if !m.is_square() {
        return Err(NumericsError::NonSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    if n < 2 {
        return Ok(0.0);
    }
    let ones = DenseMatrix::from_element(n, 1, 1.0);
    let basis = left_null_basis(&ones, DEFAULT_TOL)?;
    let compressed = &basis * m * basis.transpose();
    spectral_radius(&compressed)
}

/// Frobenius norm. For an `n × 2` per-coordinate state this equals the
/// Euclidean norm of the stacked planar vector.
pub fn frobenius(m: &DenseMatrix) -> f64 {
    m.norm()
}
