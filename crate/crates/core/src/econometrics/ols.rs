//! Least squares via Householder QR.

use nalgebra::{DMatrix, DVector};

use super::EconError;

/// A column is treated as collinear when its component orthogonal to the
/// preceding columns is below this fraction of its own norm.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
}

/// Solves `min ||y - X b||`. Fails with the name of the first column that is
/// linearly dependent on the ones before it.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String]) -> Result<OlsFit, EconError> {
    let (n, k) = x.shape();
    if names.len() != k {
        return Err(EconError::InvalidSpec(format!("{} names for {} columns", names.len(), k)));
    }
    if y.len() != n {
        return Err(EconError::InvalidSpec(format!("y has {} rows, X has {n}", y.len())));
    }
    if n < k {
        return Err(EconError::InvalidSpec(format!("{n} observations cannot identify {k} coefficients")));
    }
    if k == 0 {
        return Ok(OlsFit { coefficients: DVector::zeros(0), residuals: y.clone() });
    }
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let norm = x.column(j).norm();
        if norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm {
            return Err(EconError::RankDeficient { column: names[j].clone() });
        }
    }
    let mut qty = y.clone();
    qr.q_tr_mul(&mut qty);
    let rhs = qty.rows(0, k).into_owned();
    let coefficients =
        r.solve_upper_triangular(&rhs).ok_or_else(|| EconError::RankDeficient { column: names[k - 1].clone() })?;
    let residuals = y - x * &coefficients;
    Ok(OlsFit { coefficients, residuals })
}

/// `max |X'e| / (||X|| ||e||)`, zero when the residuals vanish.
pub fn orthogonality_gap(x: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    let denom = x.norm() * e.norm();
    if denom == 0.0 {
        return 0.0;
    }
    (x.transpose() * e).amax() / denom
}
