//! Cluster-robust (CR1) sandwich covariance.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::EconError;

/// Dense cluster codes and the number of clusters.
pub fn cluster_codes(ids: &[u64]) -> (Vec<usize>, usize) {
    let mut map: HashMap<u64, usize> = HashMap::new();
    let codes = ids
        .iter()
        .map(|id| {
            let next = map.len();
            *map.entry(*id).or_insert(next)
        })
        .collect();
    (codes, map.len())
}

/// `(X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1` scaled by `G/(G-1) * (N-1)/(N-K)`.
pub fn cluster_vcov(x: &DMatrix<f64>, resid: &DVector<f64>, clusters: &[u64]) -> Result<DMatrix<f64>, EconError> {
    cluster_vcov_absorbed(x, resid, clusters, 0)
}

/// [`cluster_vcov`] on demeaned data, with `fe_dof` absorbed parameters
/// added to K in the small-sample factor.
pub fn cluster_vcov_absorbed(
    x: &DMatrix<f64>,
    resid: &DVector<f64>,
    clusters: &[u64],
    fe_dof: usize,
) -> Result<DMatrix<f64>, EconError> {
    let (n, k) = x.shape();
    let k = k + fe_dof;
    if resid.len() != n || clusters.len() != n {
        return Err(EconError::InvalidSpec("X, residuals and cluster ids differ in length".into()));
    }
    let (codes, g) = cluster_codes(clusters);
    if g < 2 {
        return Err(EconError::SingleCluster);
    }
    if n < k {
        return Err(EconError::InvalidSpec(format!("{n} observations cannot identify {k} terms")));
    }
    if n == k {
        // saturated: the fit is exact
        return Ok(DMatrix::zeros(x.ncols(), x.ncols()));
    }
    let bread = (x.transpose() * x).try_inverse().ok_or_else(|| EconError::InvalidSpec("X'X is singular".into()))?;

    // scores s_g = X_g' e_g
    let mut scores = DMatrix::<f64>::zeros(g, x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        for ((&c, &xv), &e) in codes.iter().zip(col.iter()).zip(resid.iter()) {
            scores[(c, j)] += xv * e;
        }
    }
    let meat = scores.transpose() * &scores;
    let (gf, nf, kf) = (g as f64, n as f64, k as f64);
    let factor = gf / (gf - 1.0) * (nf - 1.0) / (nf - kf);
    let v = &bread * meat * &bread * factor;
    Ok((&v + v.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn six_observation_two_cluster_example() {
        // One regressor, so the sandwich reduces to scalars that can be
        // worked by hand: V = c * (sum_g (sum_i x_i e_i)^2) / (sum x^2)^2.
        let x = DMatrix::from_column_slice(6, 1, &[1.0, 2.0, 3.0, 1.0, -1.0, 2.0]);
        let e = DVector::from_vec(vec![0.5, -0.2, 0.1, 0.3, 0.4, -0.6]);
        let cl = [1u64, 1, 1, 2, 2, 2];
        let sxx = 1.0 + 4.0 + 9.0 + 1.0 + 1.0 + 4.0;
        let s1: f64 = 0.5 - 0.4 + 0.3;
        let s2: f64 = 0.3 - 0.4 - 1.2;
        let c = 2.0 / 1.0 * 5.0 / 5.0;
        let expected = c * (s1 * s1 + s2 * s2) / (sxx * sxx);
        let v = cluster_vcov(&x, &e, &cl).unwrap();
        assert!((v[(0, 0)] - expected).abs() < 1e-15, "{} vs {expected}", v[(0, 0)]);
    }

    #[test]
    fn singleton_clusters_equal_scaled_white_sandwich() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, k) = (40, 3);
        let x = DMatrix::from_fn(n, k, |_, _| rng.random::<f64>() - 0.5);
        let e = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let ids: Vec<u64> = (0..n as u64).collect();
        let v = cluster_vcov(&x, &e, &ids).unwrap();
        let bread = (x.transpose() * &x).try_inverse().unwrap();
        let mut meat = DMatrix::zeros(k, k);
        for i in 0..n {
            let xi = x.row(i).transpose();
            meat += &xi * xi.transpose() * (e[i] * e[i]);
        }
        let hc0 = &bread * meat * &bread;
        let scale = n as f64 / (n - k) as f64;
        assert!((v - hc0 * scale).amax() < 1e-14);
    }

    #[test]
    fn zero_residuals_give_zero_matrix() {
        let x = DMatrix::from_fn(8, 2, |r, c| (r * (c + 1)) as f64 + 1.0);
        let e = DVector::zeros(8);
        let v = cluster_vcov(&x, &e, &[0, 0, 1, 1, 2, 2, 3, 3]).unwrap();
        assert!(v.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn single_cluster_rejected() {
        let x = DMatrix::from_element(4, 1, 1.0);
        let e = DVector::from_element(4, 1.0);
        assert!(matches!(cluster_vcov(&x, &e, &[5, 5, 5, 5]), Err(EconError::SingleCluster)));
    }

    #[test]
    fn symmetric_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let n = 60;
            let x = DMatrix::from_fn(n, 4, |_, _| rng.random::<f64>() - 0.5);
            let e = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            let ids: Vec<u64> = (0..n).map(|i| (i / 5) as u64).collect();
            let v = cluster_vcov(&x, &e, &ids).unwrap();
            assert!((&v - v.transpose()).amax() == 0.0);
            let min_eig = v.clone().symmetric_eigen().eigenvalues.min();
            assert!(min_eig > -1e-10 * v.trace());
        }
    }
}
