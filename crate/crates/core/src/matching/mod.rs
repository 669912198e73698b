//! Propensity-score matching of treated and control workers.

mod balance;
mod logit;
mod nearest;

use nalgebra::DMatrix;
use serde::Serialize;

pub use balance::{balance_table, compare_groups, BalanceRow, BalanceStats, BalanceTable};
pub use logit::{logit_fit, PropensityModel, LOGIT_MAX_ITER, LOGIT_TOL, SEPARATION_BOUND};
pub use nearest::{
    match_with, propensity_match, CaliperScale, DropReason, Dropped, MatchOptions, MatchOrder, MatchResult, MatchedPair,
};

use crate::panel_synth::WorkerRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("logistic likelihood diverges (separation) after {iterations} iterations")]
    Separation { iterations: usize },
    #[error("no units on the {0} side")]
    EmptySide(String),
    #[error("caliper must be positive, got {0}")]
    InvalidCaliper(f64),
    #[error("{0}")]
    Dimension(String),
}

/// Covariate matrix, treatment labels and ids of a worker list.
pub fn worker_design(workers: &[WorkerRecord]) -> (DMatrix<f64>, Vec<bool>, Vec<u64>) {
    let x = DMatrix::from_fn(workers.len(), WorkerRecord::COVARIATES.len(), |r, c| workers[r].covariates()[c]);
    let treated = workers.iter().map(|w| w.treat == 1).collect();
    let ids = workers.iter().map(|w| w.worker_id).collect();
    (x, treated, ids)
}

#[derive(Debug, Clone, Serialize)]
pub struct WorkerMatch {
    pub model: PropensityModel,
    pub scores: Vec<f64>,
    pub result: MatchResult,
    pub balance: BalanceTable,
}

impl WorkerMatch {
    /// Worker ids retained in the matched sample.
    pub fn matched_set(&self) -> std::collections::HashSet<u64> {
        self.result.pairs.iter().flat_map(|p| [p.treated_id, p.control_id]).collect()
    }
}

/// Logit on the five pre-shock covariates, then matching and balance.
pub fn match_workers(workers: &[WorkerRecord], opts: MatchOptions) -> Result<WorkerMatch, MatchError> {
    let (x, treated, ids) = worker_design(workers);
    let model = logit_fit(&x, &treated, &WorkerRecord::COVARIATES)?;
    let scores = model.scores(&x);
    let result = match_with(&ids, &scores, &treated, opts)?;
    let balance = balance_table(&WorkerRecord::COVARIATES, &x, &ids, &treated, &result)?;
    Ok(WorkerMatch { model, scores, result, balance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_synth::{fixtures::config, generate_workers};

    #[test]
    fn confounded_workers_balance_after_matching() {
        let mut cfg = config((0.2, 0.4, 0.4), 1500);
        cfg.markets[1].covariate_shift = 0.4;
        let workers = generate_workers(&cfg).unwrap();
        let m = match_workers(&workers, MatchOptions::with_caliper(0.01)).unwrap();
        assert!(m.result.pairs.len() > 500);
        for row in &m.balance.rows {
            let (pre, post) = (row.pre.std_diff.unwrap().abs(), row.post.std_diff.unwrap().abs());
            assert!(pre > 0.2, "{}: pre {pre}", row.covariate);
            assert!(post < 0.1 && post < pre, "{}: post {post}", row.covariate);
        }
        assert!(m.model.score_gap < 1e-6);
        assert_eq!(m.matched_set().len(), 2 * m.result.pairs.len());
    }
}
