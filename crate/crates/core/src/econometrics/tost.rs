//! Two one-sided tests for equivalence of event-study pre-trends to zero.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::spec::{OutcomeSpec, Transform};
use super::{EconError, FitResult, PanelFrame};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodTost {
    pub term: String,
    pub sigma: i64,
    pub coefficient: f64,
    pub se: f64,
    pub t_lower: f64,
    pub t_upper: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TostResult {
    pub periods: Vec<PeriodTost>,
    pub pass: bool,
    pub delta: f64,
    pub alpha: f64,
    pub t_crit: f64,
}

fn ratio(num: f64, se: f64) -> f64 {
    if se > 0.0 {
        num / se
    } else if num == 0.0 {
        0.0
    } else {
        num.signum() * f64::INFINITY
    }
}

/// Tests every pre-period coefficient against `(-delta, delta)` at level `alpha`.
pub fn tost_pretrends(fit: &FitResult, delta: f64, alpha: f64) -> Result<TostResult, EconError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(EconError::InvalidSpec(format!("equivalence bound must be positive, got {delta}")));
    }
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(EconError::InvalidSpec(format!("alpha must lie in (0, 0.5), got {alpha}")));
    }
    let dist = StudentsT::new(0.0, 1.0, fit.df.max(1) as f64)
        .map_err(|e| EconError::InvalidSpec(format!("t distribution: {e}")))?;
    let t_crit = dist.inverse_cdf(1.0 - alpha);
    let periods: Vec<PeriodTost> = fit
        .coefficients
        .iter()
        .filter_map(|c| c.sigma.filter(|&s| s < 0).map(|s| (s, c)))
        .map(|(sigma, c)| {
            let t_lower = ratio(c.estimate + delta, c.se);
            let t_upper = ratio(c.estimate - delta, c.se);
            PeriodTost {
                term: c.term.clone(),
                sigma,
                coefficient: c.estimate,
                se: c.se,
                t_lower,
                t_upper,
                pass: t_lower > t_crit && t_upper < -t_crit,
            }
        })
        .collect();
    if periods.is_empty() {
        return Err(EconError::MissingPeriods(vec!["pre-period event-study terms".into()]));
    }
    let pass = periods.iter().all(|p| p.pass);
    Ok(TostResult { periods, pass, delta, alpha, t_crit })
}

/// Standard deviation of the transformed outcome, the scale for default bounds.
pub fn outcome_sd(frame: &PanelFrame, outcome: &OutcomeSpec) -> Result<f64, EconError> {
    let raw = frame.column(&outcome.column)?;
    let v: Vec<f64> = match outcome.transform {
        Transform::Identity => raw.to_vec(),
        Transform::Log1p => raw.iter().map(|x| x.ln_1p()).collect(),
        Transform::LogDropZeros => raw.iter().filter(|&&x| x > 0.0).map(|x| x.ln()).collect(),
    };
    if v.len() < 2 {
        return Err(EconError::InvalidSpec("outcome SD needs two observations".into()));
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    Ok((v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econometrics::Coefficient;
    use nalgebra::DMatrix;

    fn fit_with(pre: &[(i64, f64, f64)]) -> FitResult {
        let mut coefficients: Vec<Coefficient> = pre
            .iter()
            .map(|&(s, b, se)| Coefficient {
                term: format!("rel_{s}"),
                estimate: b,
                se,
                t: b / se,
                p: 0.5,
                sigma: Some(s),
                interest: true,
            })
            .collect();
        coefficients.push(Coefficient {
            term: "rel_0".into(),
            estimate: 3.0,
            se: 0.01,
            t: 300.0,
            p: 0.0,
            sigma: Some(0),
            interest: true,
        });
        let k = coefficients.len();
        FitResult {
            outcome: "y".into(),
            coefficients,
            n_obs: 1000,
            n_units: 100,
            n_clusters: 100,
            df: 99,
            within_r2: 0.1,
            converged_fe_iterations: 1,
            omitted: vec![],
            orthogonality_gap: 0.0,
            vcov: DMatrix::identity(k, k),
        }
    }

    #[test]
    fn zero_pretrends_pass() {
        let f = fit_with(&[(-3, 0.0, 0.01), (-2, 0.0, 0.01)]);
        let r = tost_pretrends(&f, 0.1, 0.05).unwrap();
        assert!(r.pass);
        assert_eq!(r.periods.len(), 2);
    }

    #[test]
    fn large_pretrend_fails() {
        let f = fit_with(&[(-3, 0.0, 0.01), (-2, 0.5, 0.01)]);
        let r = tost_pretrends(&f, 0.1, 0.05).unwrap();
        assert!(!r.pass);
        assert!(r.periods[0].pass && !r.periods[1].pass);
    }

    #[test]
    fn imprecise_zero_fails() {
        let f = fit_with(&[(-2, 0.0, 0.2)]);
        assert!(!tost_pretrends(&f, 0.1, 0.05).unwrap().pass);
    }

    #[test]
    fn critical_value_is_one_sided() {
        let r = tost_pretrends(&fit_with(&[(-2, 0.0, 0.01)]), 0.1, 0.05).unwrap();
        assert!((r.t_crit - 1.6604).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = fit_with(&[]);
        assert!(matches!(tost_pretrends(&f, 0.1, 0.05), Err(EconError::MissingPeriods(_))));
        let g = fit_with(&[(-2, 0.0, 0.01)]);
        assert!(tost_pretrends(&g, 0.0, 0.05).is_err());
        assert!(tost_pretrends(&g, 0.1, 0.7).is_err());
    }

    #[test]
    fn sd_of_transformed_outcome() {
        let f = PanelFrame::new(vec![0, 0, 1, 1], vec![0, 1, 0, 1])
            .unwrap()
            .with_column("y", vec![0.0, 1.0, 3.0, 7.0])
            .unwrap();
        let s = outcome_sd(&f, &OutcomeSpec::new("y", Transform::Log1p)).unwrap();
        let v = [0.0f64, 2f64.ln(), 4f64.ln(), 8f64.ln()];
        let m = v.iter().sum::<f64>() / 4.0;
        let oracle = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 3.0).sqrt();
        assert!((s - oracle).abs() < 1e-14);
    }
}
