//! Logistic propensity model fitted by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::MatchError;

pub const LOGIT_TOL: f64 = 1e-8;
pub const LOGIT_MAX_ITER: usize = 100;
/// Coefficients beyond this magnitude indicate a diverging likelihood.
pub const SEPARATION_BOUND: f64 = 30.0;

#[derive(Debug, Clone, Serialize)]
pub struct PropensityModel {
    /// `"_cons"` followed by the covariate names.
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub se: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// `max |X'(y - p)|` at the solution.
    pub score_gap: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    d.view_mut((0, 1), x.shape()).copy_from(x);
    d
}

impl PropensityModel {
    pub fn linear_index(&self, row: &[f64]) -> f64 {
        self.coefficients[0] + self.coefficients[1..].iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear_index(row))
    }

    /// Fitted probabilities for each row of `x` (covariates only).
    pub fn scores(&self, x: &DMatrix<f64>) -> Vec<f64> {
        x.row_iter().map(|r| self.predict(r.transpose().as_slice())).collect()
    }
}

/// Maximum-likelihood logit of `treated` on an intercept plus the columns of `x`.
pub fn logit_fit(x: &DMatrix<f64>, treated: &[bool], names: &[&str]) -> Result<PropensityModel, MatchError> {
    let n = x.nrows();
    if treated.len() != n || names.len() != x.ncols() {
        return Err(MatchError::Dimension(format!(
            "{n} rows, {} labels, {} columns, {} names",
            treated.len(),
            x.ncols(),
            names.len()
        )));
    }
    let n_treated = treated.iter().filter(|&&t| t).count();
    if n_treated == 0 || n_treated == n {
        return Err(MatchError::EmptySide(if n_treated == 0 { "treated" } else { "control" }.into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MatchError::Dimension("non-finite covariate".into()));
    }
    let d = with_intercept(x);
    let k = d.ncols();
    let y = DVector::from_iterator(n, treated.iter().map(|&t| if t { 1.0 } else { 0.0 }));
    let mut beta = DVector::<f64>::zeros(k);

    for iter in 1..=LOGIT_MAX_ITER {
        let p = (&d * &beta).map(sigmoid);
        let w = p.map(|pi| pi * (1.0 - pi));
        let mut xtwx = DMatrix::<f64>::zeros(k, k);
        for (i, row) in d.row_iter().enumerate() {
            xtwx += row.transpose() * row * w[i];
        }
        let grad = d.transpose() * (&y - &p);
        let chol = xtwx.clone().cholesky().ok_or(MatchError::Separation { iterations: iter })?;
        let step = chol.solve(&grad);
        beta += &step;
        if beta.amax() > SEPARATION_BOUND {
            return Err(MatchError::Separation { iterations: iter });
        }
        if step.amax() < LOGIT_TOL {
            let p = (&d * &beta).map(sigmoid);
            if p.iter().any(|&pi| pi <= 0.0 || pi >= 1.0) {
                return Err(MatchError::Separation { iterations: iter });
            }
            let w = p.map(|pi| pi * (1.0 - pi));
            let mut info = DMatrix::<f64>::zeros(k, k);
            for (i, row) in d.row_iter().enumerate() {
                info += row.transpose() * row * w[i];
            }
            let cov = info.try_inverse().ok_or(MatchError::Separation { iterations: iter })?;
            let log_likelihood =
                y.iter().zip(p.iter()).map(|(&yi, &pi)| if yi > 0.0 { pi.ln() } else { (1.0 - pi).ln() }).sum();
            let score_gap = (d.transpose() * (&y - &p)).amax();
            let mut all_names = vec!["_cons".to_string()];
            all_names.extend(names.iter().map(|s| s.to_string()));
            return Ok(PropensityModel {
                names: all_names,
                coefficients: beta.iter().copied().collect(),
                se: (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
                iterations: iter,
                log_likelihood,
                score_gap,
            });
        }
    }
    Err(MatchError::Separation { iterations: LOGIT_MAX_ITER })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn intercept_only_recovers_share() {
        let x = DMatrix::<f64>::zeros(40, 0);
        let t: Vec<bool> = (0..40).map(|i| i % 4 == 0).collect();
        let m = logit_fit(&x, &t, &[]).unwrap();
        assert!((m.predict(&[]) - 0.25).abs() < 1e-12);
        assert!((m.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-10);
    }

    #[test]
    fn permuted_labels_give_null_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 600;
        let x = DMatrix::from_fn(n, 1, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut t: Vec<bool> = (0..n).map(|i| i < n / 3).collect();
        t.shuffle(&mut rng);
        let m = logit_fit(&x, &t, &["x"]).unwrap();
        assert!(m.coefficients[1].abs() < 2.0 * m.se[1], "{} vs se {}", m.coefficients[1], m.se[1]);
    }

    #[test]
    fn recovers_known_coefficients_and_solves_score_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 20_000;
        let x = DMatrix::from_fn(n, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let truth = [-0.5, 1.0, -0.7];
        let t: Vec<bool> = (0..n)
            .map(|i| rng.random::<f64>() < sigmoid(truth[0] + truth[1] * x[(i, 0)] + truth[2] * x[(i, 1)]))
            .collect();
        let m = logit_fit(&x, &t, &["a", "b"]).unwrap();
        for j in 0..3 {
            assert!((m.coefficients[j] - truth[j]).abs() < 4.0 * m.se[j], "coef {j}");
        }
        assert!(m.score_gap < 1e-6);
        assert!(m.scores(&x).iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn perfect_separation_detected() {
        let x = DMatrix::from_fn(20, 1, |r, _| r as f64);
        let t: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        assert!(matches!(logit_fit(&x, &t, &["x"]), Err(MatchError::Separation { .. })));
    }

    #[test]
    fn one_class_rejected() {
        let x = DMatrix::from_element(5, 1, 1.0);
        assert!(matches!(logit_fit(&x, &[true; 5], &["x"]), Err(MatchError::EmptySide(_))));
    }
}
