//! Two-way fixed-effect estimation: DiD, event study, dual shock,
//! heterogeneity and market-level demand models, with clustered errors
//! and equivalence testing of pre-trends.

mod absorb;
mod estimate;
mod frame;
mod ols;
mod report;
mod spec;
mod tost;
mod vcov;

pub use absorb::{absorb_two_way, absorb_with, Absorbed, FeDim, ABSORB_MAX_ITER, ABSORB_TOL};
pub use estimate::{
    demand_did_fit, did_fit, dual_shock_fit, event_study_fit, fit, heterogeneity_fit, Coefficient, FitResult, WaldTest,
};
pub use frame::PanelFrame;
pub use ols::{ols_fit, orthogonality_gap, OlsFit, RANK_TOL};
pub use report::{fit_csv, regression_table, TableColumn};
pub use spec::{
    moderator_after, moderator_chatgpt, rel_time_name, ClusterBy, EventWindow, FixedEffects, OutcomeSpec,
    RegressionSpec, Term, TermKind, Transform, CHATGPT, CHATGPT35, CHATGPT40,
};
pub use tost::{outcome_sd, tost_pretrends, PeriodTost, TostResult};
pub use vcov::{cluster_codes, cluster_vcov, cluster_vcov_absorbed};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EconError {
    #[error("fixed-effect absorption did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("rank-deficient design: column {column} is collinear with the fixed effects or other regressors")]
    RankDeficient { column: String },
    #[error("clustered errors need at least two clusters")]
    SingleCluster,
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("event-study periods without treated observations: {}", .0.join(", "))]
    MissingPeriods(Vec<String>),
    #[error("invalid regression: {0}")]
    InvalidSpec(String),
    #[error("moderator must be binary and fixed within worker: {0}")]
    NonBinaryModerator(String),
}

/// Log-point coefficient to proportional change, `exp(b) - 1`.
pub fn coef_to_percent(b: f64) -> f64 {
    b.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_points_to_percent() {
        for (b, pct) in [(-0.094, -0.0897), (0.062, 0.0640), (-0.353, -0.2974), (0.510, 0.6653)] {
            assert!((coef_to_percent(b) - pct).abs() < 5e-5, "{b}");
        }
        assert_eq!(coef_to_percent(0.0), 0.0);
    }
}
