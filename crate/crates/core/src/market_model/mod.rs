//! Cournot competition between `n` identical workers whose marginal cost
//! `(1 - a) c` falls as AI takes over a fraction `a` of tasks, facing inverse
//! demand `p = S(a) - b * sum(q)` with a market potential `S` that AI erodes.
//!
//! The AI inflection point `a*` solves `S'(a) + c = 0`. Below it each AI
//! improvement raises per-worker quantity and profit (honeymoon phase); above
//! it quantity, profit and revenue all fall (substitution phase).

mod potential;
pub mod root;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use potential::{eval_potential, potential_slope, MarketPotentialSpec};

use crate::fmt::sig6;

/// Absolute tolerance on `S'(a*) + c` for the inflection point.
pub const INFLECTION_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid market spec: {0}")]
    InvalidSpec(String),
    #[error("boundary-violation: {0}")]
    BoundaryViolation(String),
    #[error("AI level must lie in [0,1], got {0}")]
    AiLevelOutOfRange(f64),
    #[error("grid size must be at least 3, got {0}")]
    GridTooSmall(usize),
}

/// Fraction of an occupation's tasks AI completes, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AiLevel(f64);

impl AiLevel {
    pub fn new(a: f64) -> Result<Self, ModelError> {
        if (0.0..=1.0).contains(&a) {
            Ok(Self(a))
        } else {
            Err(ModelError::AiLevelOutOfRange(a))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AiLevel {
    type Error = ModelError;
    fn try_from(a: f64) -> Result<Self, Self::Error> {
        Self::new(a)
    }
}

impl From<AiLevel> for f64 {
    fn from(a: AiLevel) -> f64 {
        a.0
    }
}

/// One occupation-level market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketSpec")]
pub struct MarketSpec {
    pub n: u32,
    pub c: f64,
    pub b: f64,
    pub potential: MarketPotentialSpec,
}

#[derive(Deserialize)]
struct RawMarketSpec {
    n: u32,
    c: f64,
    b: f64,
    potential: MarketPotentialSpec,
}

impl TryFrom<RawMarketSpec> for MarketSpec {
    type Error = ModelError;
    fn try_from(r: RawMarketSpec) -> Result<Self, Self::Error> {
        MarketSpec::new(r.n, r.c, r.b, r.potential)
    }
}

impl MarketSpec {
    /// Validates the family constraints and the boundary conditions
    /// `|S'(0)| < c < |S'(1)|`.
    pub fn new(n: u32, c: f64, b: f64, potential: MarketPotentialSpec) -> Result<Self, ModelError> {
        let spec = Self { n, c, b, potential };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::InvalidSpec("n must be a positive worker count".into()));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(ModelError::InvalidSpec(format!("c must be positive, got {}", self.c)));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(ModelError::InvalidSpec(format!("b must be positive, got {}", self.b)));
        }
        self.potential.validate()?;
        self.check_boundary()
    }

    fn check_boundary(&self) -> Result<(), ModelError> {
        let s0 = self.potential.slope(0.0).abs();
        let s1 = self.potential.slope(1.0).abs();
        if s0 >= self.c {
            return Err(ModelError::BoundaryViolation(format!("|S'(0)| = {s0} must be below c = {}", self.c)));
        }
        if s1 <= self.c {
            return Err(ModelError::BoundaryViolation(format!("|S'(1)| = {s1} must exceed c = {}", self.c)));
        }
        Ok(())
    }

    /// Marginal cost `(1 - a) c`.
    pub fn marginal_cost(&self, a: f64) -> f64 {
        (1.0 - a) * self.c
    }
}

/// Symmetric Cournot equilibrium at one AI level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Equilibrium {
    pub q: f64,
    pub p: f64,
    pub profit: f64,
    pub revenue: f64,
    /// True when the potential does not cover marginal cost and output is clamped to zero.
    pub corner: bool,
}

/// Closed-form symmetric equilibrium for intercept `s`, marginal cost `mc`.
pub fn closed_form_equilibrium(s: f64, mc: f64, n: u32, b: f64) -> Equilibrium {
    if s <= mc {
        return Equilibrium { q: 0.0, p: s, profit: 0.0, revenue: 0.0, corner: true };
    }
    let n = n as f64;
    let q = (s - mc) / (b * (n + 1.0));
    let p = (s + n * mc) / (n + 1.0);
    Equilibrium { q, p, profit: b * q * q, revenue: p * q, corner: false }
}

pub fn cournot_equilibrium(market: &MarketSpec, a: AiLevel) -> Equilibrium {
    let a = a.get();
    closed_form_equilibrium(market.potential.value(a), market.marginal_cost(a), market.n, market.b)
}

/// Unique root of `S'(a) + c = 0` on `(0, 1)`.
pub fn inflection_point(market: &MarketSpec) -> Result<f64, ModelError> {
    market.potential.validate()?;
    market.check_boundary()?;
    if let MarketPotentialSpec::Quadratic { kappa, .. } = market.potential {
        return Ok(market.c / (2.0 * kappa));
    }
    let g = |a: f64| market.potential.slope(a) + market.c;
    let root = root::brent(g, 0.0, 1.0, INFLECTION_TOL, 500)
        .ok_or_else(|| ModelError::BoundaryViolation("S'(a) + c does not change sign on [0,1]".into()))?;
    Ok(root.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Honeymoon,
    Substitution,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Phase::Honeymoon => f.write_str("honeymoon"),
            Phase::Substitution => f.write_str("substitution"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseClass {
    pub phase: Phase,
    /// Set when `a` equals `a*` exactly; the tie is reported as substitution.
    pub at_boundary: bool,
}

pub fn classify_phase(market: &MarketSpec, a: AiLevel) -> Result<PhaseClass, ModelError> {
    let a_star = inflection_point(market)?;
    Ok(phase_against(a.get(), a_star))
}

pub(crate) fn phase_against(a: f64, a_star: f64) -> PhaseClass {
    if a < a_star {
        PhaseClass { phase: Phase::Honeymoon, at_boundary: false }
    } else {
        PhaseClass { phase: Phase::Substitution, at_boundary: a == a_star }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StaticsRow {
    pub a: f64,
    pub q: f64,
    pub p: f64,
    pub profit: f64,
    pub revenue: f64,
    pub phase: Phase,
    #[serde(skip)]
    pub corner: bool,
}

/// Evaluates the equilibrium on a uniform grid of `grid_size` points over `[0, 1]`.
pub fn sweep_comparative_statics(market: &MarketSpec, grid_size: usize) -> Result<Vec<StaticsRow>, ModelError> {
    if grid_size < 3 {
        return Err(ModelError::GridTooSmall(grid_size));
    }
    let a_star = inflection_point(market)?;
    let step = 1.0 / (grid_size - 1) as f64;
    Ok((0..grid_size)
        .map(|k| {
            let a = if k + 1 == grid_size { 1.0 } else { k as f64 * step };
            let eq = closed_form_equilibrium(market.potential.value(a), market.marginal_cost(a), market.n, market.b);
            StaticsRow {
                a,
                q: eq.q,
                p: eq.p,
                profit: eq.profit,
                revenue: eq.revenue,
                phase: phase_against(a, a_star).phase,
                corner: eq.corner,
            }
        })
        .collect())
}

/// Comparative-statics table as CSV, six significant digits.
pub fn statics_csv(rows: &[StaticsRow]) -> String {
    let mut out = String::from("a,q,p,profit,revenue,phase\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig6(r.a),
            sig6(r.q),
            sig6(r.p),
            sig6(r.profit),
            sig6(r.revenue),
            r.phase
        ));
    }
    out
}

/// Outcome of checking the inflection-point comparative statics on a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InflectionCheck {
    pub a_star: f64,
    pub all_interior: bool,
    pub q_increasing_below: bool,
    pub q_decreasing_above: bool,
    pub profit_increasing_below: bool,
    pub profit_decreasing_above: bool,
    pub revenue_decreasing_above: bool,
    pub argmax_profit: f64,
    pub argmax_q: f64,
    pub grid_step: f64,
}

impl InflectionCheck {
    pub fn holds(&self) -> bool {
        self.all_interior
            && self.q_increasing_below
            && self.q_decreasing_above
            && self.profit_increasing_below
            && self.profit_decreasing_above
            && self.revenue_decreasing_above
            && (self.argmax_profit - self.a_star).abs() <= self.grid_step
            && (self.argmax_q - self.a_star).abs() <= self.grid_step
    }
}

/// Checks strict monotonicity of q, profit and revenue on grid pairs lying
/// entirely on one side of `a*`; pairs straddling `a*` are skipped.
pub fn check_inflection_property(market: &MarketSpec, grid_size: usize) -> Result<InflectionCheck, ModelError> {
    let rows = sweep_comparative_statics(market, grid_size)?;
    let a_star = inflection_point(market)?;
    let mut check = InflectionCheck {
        a_star,
        all_interior: rows.iter().all(|r| !r.corner),
        q_increasing_below: true,
        q_decreasing_above: true,
        profit_increasing_below: true,
        profit_decreasing_above: true,
        revenue_decreasing_above: true,
        argmax_profit: argmax_by(&rows, |r| r.profit),
        argmax_q: argmax_by(&rows, |r| r.q),
        grid_step: 1.0 / (grid_size - 1) as f64,
    };
    for w in rows.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        if hi.a <= a_star {
            check.q_increasing_below &= hi.q > lo.q;
            check.profit_increasing_below &= hi.profit > lo.profit;
        } else if lo.a >= a_star {
            check.q_decreasing_above &= hi.q < lo.q;
            check.profit_decreasing_above &= hi.profit < lo.profit;
            check.revenue_decreasing_above &= hi.revenue < lo.revenue;
        }
    }
    Ok(check)
}

fn argmax_by(rows: &[StaticsRow], key: impl Fn(&StaticsRow) -> f64) -> f64 {
    rows.iter().max_by(|x, y| key(x).total_cmp(&key(y))).map(|r| r.a).unwrap_or(f64::NAN)
}
