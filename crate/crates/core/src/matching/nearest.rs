//! Greedy 1:1 nearest-neighbor matching on the propensity score.

use std::collections::BTreeSet;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::MatchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchOrder {
    /// Highest propensity first, ties by id.
    Descending,
    Ascending,
    /// Input order.
    Input,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaliperScale {
    Probability,
    /// Log-odds of the score.
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub caliper: f64,
    pub replacement: bool,
    pub order: MatchOrder,
    pub scale: CaliperScale,
}

impl MatchOptions {
    pub fn with_caliper(caliper: f64) -> Self {
        Self { caliper, replacement: false, order: MatchOrder::Descending, scale: CaliperScale::Probability }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    OffSupport,
    NoNeighborWithinCaliper,
    /// Control never chosen as a nearest neighbor.
    Unmatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPair {
    pub treated_id: u64,
    pub control_id: u64,
    /// Distance on the caliper scale.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dropped {
    pub id: u64,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub dropped_treated: Vec<Dropped>,
    pub dropped_control: Vec<Dropped>,
    pub options: MatchOptions,
    /// Control score range defining common support.
    pub support: (f64, f64),
}

impl MatchResult {
    pub fn matched_ids(&self) -> (Vec<u64>, Vec<u64>) {
        self.pairs.iter().map(|p| (p.treated_id, p.control_id)).unzip()
    }
}

fn to_scale(p: f64, scale: CaliperScale) -> f64 {
    match scale {
        CaliperScale::Probability => p,
        CaliperScale::Logit => (p / (1.0 - p)).ln(),
    }
}

/// 1:1 matching with default options: no replacement, descending score
/// order, caliper on the probability scale.
pub fn propensity_match(
    ids: &[u64],
    scores: &[f64],
    treated: &[bool],
    caliper: f64,
) -> Result<MatchResult, MatchError> {
    match_with(ids, scores, treated, MatchOptions::with_caliper(caliper))
}

pub fn match_with(
    ids: &[u64],
    scores: &[f64],
    treated: &[bool],
    opts: MatchOptions,
) -> Result<MatchResult, MatchError> {
    if ids.len() != scores.len() || ids.len() != treated.len() {
        return Err(MatchError::Dimension(format!(
            "{} ids, {} scores, {} labels",
            ids.len(),
            scores.len(),
            treated.len()
        )));
    }
    if !(opts.caliper > 0.0) {
        return Err(MatchError::InvalidCaliper(opts.caliper));
    }
    if let Some(s) = scores.iter().find(|s| !(s.is_finite() && (0.0..=1.0).contains(*s))) {
        return Err(MatchError::Dimension(format!("propensity score {s} outside [0, 1]")));
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(id) = ids.iter().find(|id| !seen.insert(**id)) {
        return Err(MatchError::Dimension(format!("duplicate unit id {id}")));
    }

    let controls: Vec<usize> = (0..ids.len()).filter(|&i| !treated[i]).collect();
    if controls.is_empty() {
        return Err(MatchError::EmptySide("control".into()));
    }
    let lo = controls.iter().map(|&i| scores[i]).fold(f64::INFINITY, f64::min);
    let hi = controls.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);

    let mut dropped_treated = Vec::new();
    let mut queue: Vec<usize> = Vec::new();
    for i in (0..ids.len()).filter(|&i| treated[i]) {
        if scores[i] < lo || scores[i] > hi {
            dropped_treated.push(Dropped { id: ids[i], reason: DropReason::OffSupport });
        } else {
            queue.push(i);
        }
    }
    if queue.is_empty() {
        return Err(MatchError::EmptySide("treated on common support".into()));
    }
    match opts.order {
        MatchOrder::Descending => queue.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(ids[a].cmp(&ids[b]))),
        MatchOrder::Ascending => queue.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(ids[a].cmp(&ids[b]))),
        MatchOrder::Input => {}
    }

    let value = |i: usize| to_scale(scores[i], opts.scale);
    let mut available: BTreeSet<(OrderedFloat<f64>, u64, usize)> =
        controls.iter().map(|&i| (OrderedFloat(value(i)), ids[i], i)).collect();
    let mut used = vec![false; ids.len()];
    let mut pairs = Vec::new();

    for &t in &queue {
        let v = value(t);
        let key = (OrderedFloat(v), 0u64, 0usize);
        let above = available.range(key..).next().copied();
        let below = available.range(..key).next_back().copied();
        let best = match (below, above) {
            (Some(b), Some(a)) => {
                let (db, da) = (v - b.0 .0, a.0 .0 - v);
                if db < da || (db == da && b.1 < a.1) {
                    Some((b, db))
                } else {
                    Some((a, da))
                }
            }
            (Some(b), None) => Some((b, v - b.0 .0)),
            (None, Some(a)) => Some((a, a.0 .0 - v)),
            (None, None) => None,
        };
        match best {
            Some((entry, d)) if d <= opts.caliper => {
                pairs.push(MatchedPair { treated_id: ids[t], control_id: entry.1, distance: d });
                used[entry.2] = true;
                if !opts.replacement {
                    available.remove(&entry);
                }
            }
            _ => dropped_treated.push(Dropped { id: ids[t], reason: DropReason::NoNeighborWithinCaliper }),
        }
    }

    let dropped_control = controls
        .iter()
        .filter(|&&i| !used[i])
        .map(|&i| Dropped { id: ids[i], reason: DropReason::Unmatched })
        .collect();
    Ok(MatchResult { pairs, dropped_treated, dropped_control, options: opts, support: (lo, hi) })
}
