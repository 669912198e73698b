//! Regression specifications for the worker-month and market-week models.

use serde::{Deserialize, Serialize};

use super::{EconError, PanelFrame};
use crate::panel_synth::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// `log(1 + y)`, keeps zero outcomes.
    Log1p,
    /// `log(y)` with nonpositive outcomes dropped.
    LogDropZeros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpec {
    pub column: String,
    pub transform: Transform,
}

impl OutcomeSpec {
    pub fn new(column: &str, transform: Transform) -> Self {
        Self { column: column.into(), transform }
    }

    /// The same outcome with zero rows dropped instead of shifted by one.
    pub fn drop_zeros(mut self) -> Self {
        if self.transform == Transform::Log1p {
            self.transform = Transform::LogDropZeros;
        }
        self
    }
}

impl From<Outcome> for OutcomeSpec {
    fn from(o: Outcome) -> Self {
        match o {
            Outcome::LogJobs => Self::new("fjobnum", Transform::Log1p),
            Outcome::JobRatio => Self::new("fjobratio", Transform::Identity),
            Outcome::LogEarnings => Self::new("fjobearn", Transform::Log1p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Column(String),
    /// Elementwise product of columns, e.g. treat x post.
    Product(Vec<String>),
    /// `treat * 1[time - shock_index == sigma]`
    RelTime {
        treat: String,
        sigma: i64,
        shock_index: i64,
    },
    /// `by * time`, a group-specific linear trend.
    Trend {
        by: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub kind: TermKind,
}

impl Term {
    pub fn column(name: &str) -> Self {
        Self { name: name.into(), kind: TermKind::Column(name.into()) }
    }

    pub fn product(name: &str, cols: &[&str]) -> Self {
        Self { name: name.into(), kind: TermKind::Product(cols.iter().map(|c| c.to_string()).collect()) }
    }

    pub fn rel_time(treat: &str, sigma: i64, shock_index: i64) -> Self {
        Self { name: rel_time_name(sigma), kind: TermKind::RelTime { treat: treat.into(), sigma, shock_index } }
    }

    pub fn trend(by: &str) -> Self {
        Self { name: format!("{by}:trend"), kind: TermKind::Trend { by: by.into() } }
    }

    /// Relative period of an event-study term.
    pub fn sigma(&self) -> Option<i64> {
        match self.kind {
            TermKind::RelTime { sigma, .. } => Some(sigma),
            _ => None,
        }
    }

    pub fn materialize(&self, frame: &PanelFrame) -> Result<Vec<f64>, EconError> {
        match &self.kind {
            TermKind::Column(c) => Ok(frame.column(c)?.to_vec()),
            TermKind::Product(cols) => {
                let mut out = vec![1.0; frame.len()];
                for c in cols {
                    for (o, v) in out.iter_mut().zip(frame.column(c)?) {
                        *o *= v;
                    }
                }
                Ok(out)
            }
            TermKind::RelTime { treat, sigma, shock_index } => Ok(frame
                .column(treat)?
                .iter()
                .zip(frame.time_values())
                .map(|(&d, &t)| if t - shock_index == *sigma { d } else { 0.0 })
                .collect()),
            TermKind::Trend { by } => {
                Ok(frame.column(by)?.iter().zip(frame.time_values()).map(|(&d, &t)| d * t as f64).collect())
            }
        }
    }
}

pub fn moderator_chatgpt(moderator: &str) -> String {
    format!("{moderator}:{CHATGPT}")
}

pub fn moderator_after(moderator: &str) -> String {
    format!("{moderator}:After")
}

pub fn rel_time_name(sigma: i64) -> String {
    format!("rel_{sigma}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedEffects {
    pub unit: bool,
    pub time: bool,
}

impl FixedEffects {
    pub const TWO_WAY: Self = Self { unit: true, time: true };
    pub const NONE: Self = Self { unit: false, time: false };
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterBy {
    /// Panel unit (worker, or market in the demand model).
    Unit,
    /// Each observation its own cluster (heteroskedasticity-robust).
    Observation,
    /// Values of a frame column.
    Column(String),
}

/// Relative-time window of an event study around the first shock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventWindow {
    pub shock_index: i64,
    pub first: i64,
    pub last: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub outcome: OutcomeSpec,
    pub interest: Vec<Term>,
    pub controls: Vec<Term>,
    pub fe: FixedEffects,
    pub cluster: ClusterBy,
    /// Adds `treat x time` as a control.
    pub market_trend: bool,
    pub baseline_period: i64,
    pub event_window: Option<EventWindow>,
}

pub const CHATGPT: &str = "ChatGPT";
pub const CHATGPT35: &str = "ChatGPT3.5";
pub const CHATGPT40: &str = "ChatGPT4.0";

impl RegressionSpec {
    fn base(outcome: OutcomeSpec, interest: Vec<Term>) -> Self {
        Self {
            outcome,
            interest,
            controls: vec![Term::column("tenure")],
            fe: FixedEffects::TWO_WAY,
            cluster: ClusterBy::Unit,
            market_trend: false,
            baseline_period: -1,
            event_window: None,
        }
    }

    /// Worker-month DiD: outcome on treat x post with tenure, worker and month effects.
    pub fn did(outcome: impl Into<OutcomeSpec>) -> Self {
        Self::base(outcome.into(), vec![Term::product(CHATGPT, &["treat", "post35"])])
    }

    /// Separate indicators for the first release and the incremental second release.
    pub fn dual_shock(outcome: impl Into<OutcomeSpec>) -> Self {
        Self::base(
            outcome.into(),
            vec![Term::product(CHATGPT35, &["treat", "post35"]), Term::product(CHATGPT40, &["treat", "post40"])],
        )
    }

    /// Relative-time model over `first..=last` months around `shock_index`,
    /// omitting `baseline_period`.
    pub fn event_study(outcome: impl Into<OutcomeSpec>, shock_index: i64, first: i64, last: i64) -> Self {
        let mut s = Self::base(outcome.into(), Vec::new());
        s.event_window = Some(EventWindow { shock_index, first, last });
        s.rebuild_event_terms();
        s
    }

    /// Regenerates the relative-time dummies after changing the window or baseline.
    pub fn rebuild_event_terms(&mut self) {
        if let Some(w) = self.event_window {
            self.interest = (w.first..=w.last)
                .filter(|&s| s != self.baseline_period)
                .map(|s| Term::rel_time("treat", s, w.shock_index))
                .collect();
        }
    }

    /// Adds `moderator x ChatGPT` and `moderator x After` to the interest set;
    /// the moderator's own level is absorbed by the worker effect.
    pub fn with_moderator(mut self, moderator: &str) -> Self {
        self.interest.push(Term::product(&moderator_chatgpt(moderator), &[moderator, "treat", "post35"]));
        self.interest.push(Term::product(&moderator_after(moderator), &[moderator, "post35"]));
        self
    }

    /// Market-week demand model on log(1 + postnum), robust to heteroskedasticity.
    pub fn demand() -> Self {
        Self {
            outcome: OutcomeSpec::new("postnum", Transform::Log1p),
            interest: vec![Term::product(CHATGPT, &["treat", "post"])],
            controls: Vec::new(),
            fe: FixedEffects::TWO_WAY,
            cluster: ClusterBy::Observation,
            market_trend: false,
            baseline_period: -1,
            event_window: None,
        }
    }

    pub fn with_market_trend(mut self, on: bool) -> Self {
        self.market_trend = on;
        self
    }

    pub fn with_controls(mut self, controls: Vec<Term>) -> Self {
        self.controls = controls;
        self
    }

    pub fn with_cluster(mut self, cluster: ClusterBy) -> Self {
        self.cluster = cluster;
        self
    }
}
