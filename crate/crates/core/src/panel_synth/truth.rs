use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{draw_cell, draw_worker, month_effects, CellOutcome, MarketLink};
use super::{PanelError, ScenarioConfig};

/// Transformed worker-month outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// log(1 + fjobnum)
    LogJobs,
    /// fjobratio
    JobRatio,
    /// log(1 + fjobearn)
    LogEarnings,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [Outcome::LogJobs, Outcome::JobRatio, Outcome::LogEarnings];

    pub fn column(self) -> &'static str {
        match self {
            Outcome::LogJobs => "fjobnum",
            Outcome::JobRatio => "fjobratio",
            Outcome::LogEarnings => "fjobearn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::LogJobs => "log(Fjobnum)",
            Outcome::JobRatio => "Fjobratio",
            Outcome::LogEarnings => "log(Fjobearn)",
        }
    }

    pub(crate) fn of_cell(self, c: &CellOutcome) -> f64 {
        match self {
            Outcome::LogJobs => (c.fjobnum as f64).ln_1p(),
            Outcome::JobRatio => c.fjobratio,
            Outcome::LogEarnings => c.fjobearn.ln_1p(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AttEstimate {
    pub value: f64,
    /// Monte Carlo standard error across replications.
    pub mc_se: f64,
    pub reps: usize,
}

/// Mean effect on the treated over post-shock cells, by common random numbers.
///
/// Replication `r` simulates the config seeded with `seed ^ r` twice: once on
/// the factual AI path and once with AI frozen at `a_pre`. Every random draw
/// is shared, so the per-cell difference isolates the AI shock.
pub fn ground_truth_att(cfg: &ScenarioConfig, outcome: Outcome, reps: usize) -> Result<AttEstimate, PanelError> {
    cfg.validate()?;
    if reps < 100 {
        return Err(PanelError::InvalidConfig(format!("ground truth needs at least 100 replications, got {reps}")));
    }
    let per_rep: Vec<f64> =
        (0..reps as u64).into_par_iter().map(|r| replication_att(&cfg.replicate(r), outcome)).collect();
    let n = per_rep.len() as f64;
    let value = per_rep.iter().sum::<f64>() / n;
    let var = per_rep.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(AttEstimate { value, mc_se: (var / n).sqrt(), reps })
}

fn replication_att(cfg: &ScenarioConfig, outcome: Outcome) -> f64 {
    let taus = month_effects(cfg);
    let (mut sum, mut cells) = (0.0, 0usize);
    for (mi, entry) in cfg.markets.iter().enumerate() {
        if !cfg.is_treated(&entry.market_id) {
            continue;
        }
        let link = MarketLink::new(cfg, entry);
        let a_pre = entry.a_path.a_pre.get();
        for wi in 0..cfg.workers_per_market {
            let w = draw_worker(cfg, mi, wi);
            for t in cfg.shock1_index..cfg.months.len() {
                let coords = (mi, wi, t);
                let factual = draw_cell(cfg, entry, &link, &w, coords, taus[t], cfg.a_at_month(entry, t));
                let frozen = draw_cell(cfg, entry, &link, &w, coords, taus[t], a_pre);
                sum += outcome.of_cell(&factual) - outcome.of_cell(&frozen);
                cells += 1;
            }
        }
    }
    if cells == 0 {
        0.0
    } else {
        sum / cells as f64
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::config;
    use super::super::APath;
    use super::*;

    /// E[log(1 + N)], N ~ Poisson(lambda), by summing the pmf.
    fn expected_log1p_poisson(lambda: f64) -> f64 {
        let mut pmf = (-lambda).exp();
        let mut acc = 0.0;
        for k in 0..200u32 {
            if k > 0 {
                pmf *= lambda / k as f64;
            }
            acc += pmf * (k as f64).ln_1p();
        }
        acc
    }

    #[test]
    fn control_only_shock_has_zero_att() {
        let cfg = config((0.3, 0.3, 0.3), 50);
        let att = ground_truth_att(&cfg, Outcome::LogJobs, 100).unwrap();
        assert_eq!(att.value, 0.0);
        assert_eq!(att.mc_se, 0.0);
    }

    #[test]
    fn degenerate_case_matches_poisson_expectation() {
        let mut cfg = config((0.2, 0.4, 0.4), 100);
        cfg.worker_fe_sigma = 0.0;
        cfg.month_fe_sigma = 0.0;
        cfg.noise_sigma = 0.0;
        let att = ground_truth_att(&cfg, Outcome::LogJobs, 300).unwrap();
        let entry = &cfg.markets[1];
        let q = |a: f64| cfg.equilibrium(entry, a).q;
        let lambda1 = cfg.dgp.job_rate * q(0.4) / q(0.2);
        let exact = expected_log1p_poisson(lambda1) - expected_log1p_poisson(cfg.dgp.job_rate);
        assert!((att.value - exact).abs() < 4.0 * att.mc_se + 1e-4, "{att:?} vs {exact}");
        assert!(exact > 0.0);
    }

    #[test]
    fn att_sign_follows_phase() {
        // a* = 0.5 for the fixture market
        let up = ground_truth_att(&config((0.2, 0.4, 0.4), 100), Outcome::LogEarnings, 500).unwrap();
        assert!(up.value > 3.0 * up.mc_se, "{up:?}");
        let down = ground_truth_att(&config((0.6, 0.9, 0.9), 100), Outcome::LogJobs, 100).unwrap();
        assert!(down.value < -3.0 * down.mc_se, "{down:?}");
    }

    #[test]
    fn att_sign_on_grid_spanning_inflection() {
        for pre in [0.1, 0.25, 0.4] {
            for post in [0.45, 0.48, 0.5] {
                let att = ground_truth_att(&config((pre, post, post), 60), Outcome::LogJobs, 100).unwrap();
                assert!(att.value > 0.0, "honeymoon {pre}->{post}: {att:?}");
            }
        }
        for pre in [0.55, 0.7, 0.85] {
            for post in [0.9, 0.95, 1.0] {
                let att = ground_truth_att(&config((pre, post, post), 60), Outcome::LogJobs, 100).unwrap();
                assert!(att.value < 0.0, "substitution {pre}->{post}: {att:?}");
            }
        }
        let mut cfg = config((0.2, 0.4, 0.4), 10);
        cfg.markets[1].a_path = APath::constant(0.3).unwrap();
        assert_eq!(ground_truth_att(&cfg, Outcome::JobRatio, 100).unwrap().value, 0.0);
    }

    #[test]
    fn too_few_reps() {
        assert!(ground_truth_att(&config((0.2, 0.4, 0.4), 10), Outcome::LogJobs, 99).is_err());
    }
}
