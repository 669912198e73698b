//! Synthetic worker-month panels and market-week demand series generated
//! from the Cournot model, with known ground-truth treatment effects.

mod generate;
mod truth;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_model::{closed_form_equilibrium, AiLevel, Equilibrium, MarketSpec, ModelError};

pub use generate::{
    generate_demand_series, generate_panel, generate_workers, DEMAND_SHOCK1_FRACTION, DEMAND_SHOCK2_FRACTION,
};
pub use truth::{ground_truth_att, AttEstimate, Outcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("invalid-config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// AI levels before the first shock, between the shocks, and after the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct APath {
    pub a_pre: AiLevel,
    pub a_post35: AiLevel,
    pub a_post40: AiLevel,
}

impl APath {
    pub fn new(a_pre: f64, a_post35: f64, a_post40: f64) -> Result<Self, ModelError> {
        Ok(Self { a_pre: AiLevel::new(a_pre)?, a_post35: AiLevel::new(a_post35)?, a_post40: AiLevel::new(a_post40)? })
    }

    pub fn constant(a: f64) -> Result<Self, ModelError> {
        Self::new(a, a, a)
    }

    pub fn is_constant(&self) -> bool {
        self.a_pre == self.a_post35 && self.a_post35 == self.a_post40
    }

    fn is_nondecreasing(&self) -> bool {
        self.a_pre <= self.a_post35 && self.a_post35 <= self.a_post40
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketEntry {
    pub market_id: String,
    pub market: MarketSpec,
    pub a_path: APath,
    /// Market-specific drift of the log job rate per month.
    #[serde(default)]
    pub trend: f64,
    /// Mean shift of this market's matching covariates, in standard deviations.
    #[serde(default)]
    pub covariate_shift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moderator {
    Us,
    Experienced,
}

impl Moderator {
    pub fn column(self) -> &'static str {
        match self {
            Moderator::Us => "us",
            Moderator::Experienced => "experienced",
        }
    }
}

/// Workers with the moderator set see their quantity response to AI
/// raised to this power (2.0 doubles the log change in job volume).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moderation {
    pub moderator: Moderator,
    pub multiplier: f64,
}

/// Outcome-link constants; none of these come from the model itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpParams {
    /// Expected focal jobs per worker-month before any shock.
    pub job_rate: f64,
    /// Pre-shock price of a focal job.
    pub price_level: f64,
    /// Poisson mean of non-focal jobs per worker-month.
    pub background_rate: f64,
    /// Demand postings per unit of aggregate equilibrium quantity per week.
    pub weekly_scale: f64,
    pub week_fe_sigma: f64,
    pub us_share: f64,
    pub experienced_share: f64,
    pub max_initial_tenure: u32,
}

impl Default for DgpParams {
    fn default() -> Self {
        Self {
            job_rate: 0.8,
            price_level: 250.0,
            background_rate: 1.5,
            weekly_scale: 500.0,
            week_fe_sigma: 0.05,
            us_share: 0.25,
            experienced_share: 0.5,
            max_initial_tenure: 120,
        }
    }
}

pub fn default_months() -> Vec<String> {
    let mut m: Vec<String> = (5..=10).map(|k| format!("2022-{k:02}")).collect();
    m.extend((1..=10).map(|k| format!("2023-{k:02}")));
    m
}

fn default_shock1() -> usize {
    6
}

fn default_shock2() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub markets: Vec<MarketEntry>,
    pub control_market_id: String,
    pub workers_per_market: usize,
    #[serde(default = "default_months")]
    pub months: Vec<String>,
    /// First post-shock month (first release).
    #[serde(default = "default_shock1")]
    pub shock1_index: usize,
    /// First month after the second release.
    #[serde(default = "default_shock2")]
    pub shock2_index: usize,
    pub worker_fe_sigma: f64,
    pub month_fe_sigma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub dgp: DgpParams,
    #[serde(default)]
    pub moderation: Option<Moderation>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), PanelError> {
        let bad = |m: String| Err(PanelError::InvalidConfig(m));
        if self.markets.len() < 2 {
            return bad("at least two markets (one control, one treated) are required".into());
        }
        for (k, m) in self.markets.iter().enumerate() {
            if self.markets[..k].iter().any(|o| o.market_id == m.market_id) {
                return bad(format!("duplicate market_id {:?}", m.market_id));
            }
            m.market.validate()?;
            if !m.a_path.is_nondecreasing() {
                return bad(format!("a_path nondecreasing: violated in market {:?}", m.market_id));
            }
            let pre = self.equilibrium(m, m.a_path.a_pre.get());
            if pre.corner {
                return bad(format!("market {:?} has no interior equilibrium at a_pre", m.market_id));
            }
            if !m.trend.is_finite() || !m.covariate_shift.is_finite() {
                return bad(format!("market {:?}: trend and covariate_shift must be finite", m.market_id));
            }
        }
        match self.markets.iter().find(|m| m.market_id == self.control_market_id) {
            None => return bad(format!("control_market_id {:?} not among markets", self.control_market_id)),
            Some(c) if !c.a_path.is_constant() => {
                return bad(format!("control market {:?} must have a constant a_path", c.market_id))
            }
            _ => {}
        }
        if self.workers_per_market == 0 {
            return bad("workers_per_market must be positive".into());
        }
        if self.months.is_empty() {
            return bad("months must be nonempty".into());
        }
        if !(1 <= self.shock1_index && self.shock1_index <= self.shock2_index && self.shock2_index <= self.months.len())
        {
            return bad(format!(
                "shock indices must satisfy 1 <= shock1 <= shock2 <= months ({} / {} / {})",
                self.shock1_index,
                self.shock2_index,
                self.months.len()
            ));
        }
        for (name, v) in [
            ("worker_fe_sigma", self.worker_fe_sigma),
            ("month_fe_sigma", self.month_fe_sigma),
            ("noise_sigma", self.noise_sigma),
            ("dgp.week_fe_sigma", self.dgp.week_fe_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("dgp.job_rate", self.dgp.job_rate),
            ("dgp.price_level", self.dgp.price_level),
            ("dgp.background_rate", self.dgp.background_rate),
            ("dgp.weekly_scale", self.dgp.weekly_scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("dgp.us_share", self.dgp.us_share), ("dgp.experienced_share", self.dgp.experienced_share)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if let Some(m) = self.moderation {
            if !(m.multiplier.is_finite() && m.multiplier >= 0.0) {
                return bad(format!("moderation multiplier must be >= 0, got {}", m.multiplier));
            }
        }
        Ok(())
    }

    /// Copy of the config whose seed is `seed ^ rep`.
    pub fn replicate(&self, rep: u64) -> Self {
        Self { seed: self.seed ^ rep, ..self.clone() }
    }

    pub fn control(&self) -> &MarketEntry {
        self.markets
            .iter()
            .find(|m| m.market_id == self.control_market_id)
            .expect("validated config has a control market")
    }

    pub fn treated_markets(&self) -> impl Iterator<Item = &MarketEntry> {
        self.markets.iter().filter(move |m| m.market_id != self.control_market_id)
    }

    pub fn is_treated(&self, market_id: &str) -> bool {
        market_id != self.control_market_id
    }

    /// AI level of a market in a given month.
    pub fn a_at_month(&self, entry: &MarketEntry, month: usize) -> f64 {
        if month < self.shock1_index {
            entry.a_path.a_pre.get()
        } else if month < self.shock2_index {
            entry.a_path.a_post35.get()
        } else {
            entry.a_path.a_post40.get()
        }
    }

    pub(crate) fn equilibrium(&self, entry: &MarketEntry, a: f64) -> Equilibrium {
        let m = &entry.market;
        closed_form_equilibrium(m.potential.value(a), m.marginal_cost(a), m.n, m.b)
    }
}

/// One worker-month observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub worker_id: u64,
    pub market_id: String,
    pub month_index: u32,
    pub treat: u8,
    pub post35: u8,
    pub post40: u8,
    pub fjobnum: u64,
    pub fjobearn: f64,
    pub fjobratio: f64,
    pub tenure: u32,
    pub us: u8,
    pub experienced: u8,
}

impl PanelRow {
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("treat", self.treat),
            ("post35", self.post35),
            ("post40", self.post40),
            ("us", self.us),
            ("experienced", self.experienced),
        ] {
            if v > 1 {
                return Err(format!("{name} must be 0/1, got {v}"));
            }
        }
        if !(self.fjobearn.is_finite() && self.fjobearn >= 0.0) {
            return Err(format!("fjobearn must be >= 0, got {}", self.fjobearn));
        }
        if self.fjobnum == 0 && self.fjobearn != 0.0 {
            return Err(format!("fjobearn must be 0 when fjobnum = 0, got {}", self.fjobearn));
        }
        if !(0.0..=1.0).contains(&self.fjobratio) {
            return Err(format!("fjobratio must lie in [0,1], got {}", self.fjobratio));
        }
        if self.post40 == 1 && self.post35 == 0 {
            return Err("post40 = 1 requires post35 = 1".into());
        }
        Ok(())
    }
}

/// One market-week observation of fulfilled postings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRow {
    pub market_id: String,
    pub week_index: u32,
    pub postnum: u64,
    pub treat: u8,
    pub post: u8,
}

/// Pre-shock worker characteristics used for propensity-score matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRecord {
    pub worker_id: u64,
    pub market_id: String,
    pub treat: u8,
    pub us: u8,
    pub experienced: u8,
    pub log_acc_fjobnum: f64,
    pub log_experience: f64,
    pub log_avg_fjobprice: f64,
    pub log_avg_fhourprice: f64,
    pub avg_rating: f64,
}

impl WorkerRecord {
    pub const COVARIATES: [&'static str; 5] =
        ["log_acc_fjobnum", "log_experience", "log_avg_fjobprice", "log_avg_fhourprice", "avg_rating"];

    pub fn covariates(&self) -> [f64; 5] {
        [self.log_acc_fjobnum, self.log_experience, self.log_avg_fjobprice, self.log_avg_fhourprice, self.avg_rating]
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::market_model::MarketPotentialSpec;

    /// Quadratic market with `a* = 0.5`.
    pub fn market() -> MarketSpec {
        MarketSpec::new(20, 1.0, 1.0, MarketPotentialSpec::quadratic(1.5, 1.0)).unwrap()
    }

    pub fn config(path: (f64, f64, f64), workers: usize) -> ScenarioConfig {
        ScenarioConfig {
            markets: vec![
                MarketEntry {
                    market_id: "control".into(),
                    market: market(),
                    a_path: APath::constant(0.2).unwrap(),
                    trend: 0.0,
                    covariate_shift: 0.0,
                },
                MarketEntry {
                    market_id: "treated".into(),
                    market: market(),
                    a_path: APath::new(path.0, path.1, path.2).unwrap(),
                    trend: 0.0,
                    covariate_shift: 0.0,
                },
            ],
            control_market_id: "control".into(),
            workers_per_market: workers,
            months: default_months(),
            shock1_index: 6,
            shock2_index: 8,
            worker_fe_sigma: 0.5,
            month_fe_sigma: 0.1,
            noise_sigma: 0.3,
            seed: 7,
            dgp: DgpParams::default(),
            moderation: None,
        }
    }
}
