use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::absorb::{absorb_two_way, FeDim};
use super::ols::{ols_fit, orthogonality_gap};
use super::spec::{ClusterBy, RegressionSpec, Term, TermKind, Transform, CHATGPT40};
use super::vcov::{cluster_codes, cluster_vcov_absorbed};
use super::{EconError, PanelFrame};
use crate::panel_synth::DemandRow;

/// Post-absorption norm below this fraction of the raw norm means the
/// column is spanned by the fixed effects.
const ABSORBED_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub term: String,
    pub estimate: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    /// Relative period for event-study terms.
    pub sigma: Option<i64>,
    pub interest: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub outcome: String,
    pub coefficients: Vec<Coefficient>,
    pub n_obs: usize,
    pub n_units: usize,
    pub n_clusters: usize,
    /// Degrees of freedom of the t reference distribution (clusters - 1).
    pub df: usize,
    pub within_r2: f64,
    pub converged_fe_iterations: usize,
    /// Controls dropped as collinear with the fixed effects or other terms.
    pub omitted: Vec<String>,
    pub orthogonality_gap: f64,
    #[serde(skip)]
    pub vcov: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WaldTest {
    pub f: f64,
    pub df_num: usize,
    pub df_den: usize,
    pub p: f64,
}

impl FitResult {
    pub fn get(&self, term: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.term == term)
    }

    pub fn estimate(&self, term: &str) -> Option<f64> {
        self.get(term).map(|c| c.estimate)
    }

    pub fn interest(&self) -> impl Iterator<Item = &Coefficient> {
        self.coefficients.iter().filter(|c| c.interest)
    }

    /// Joint test that the named coefficients are all zero, `F(q, G-1)`.
    pub fn joint_test(&self, terms: &[&str]) -> Result<WaldTest, EconError> {
        let idx: Vec<usize> = terms
            .iter()
            .map(|t| {
                self.coefficients
                    .iter()
                    .position(|c| c.term == *t)
                    .ok_or_else(|| EconError::MissingColumn(t.to_string()))
            })
            .collect::<Result<_, _>>()?;
        let q = idx.len();
        if q == 0 {
            return Err(EconError::InvalidSpec("joint test needs at least one term".into()));
        }
        let b = DVector::from_iterator(q, idx.iter().map(|&i| self.coefficients[i].estimate));
        let v = DMatrix::from_fn(q, q, |r, c| self.vcov[(idx[r], idx[c])]);
        let vinv = v.try_inverse().ok_or_else(|| EconError::InvalidSpec("singular covariance block".into()))?;
        let f = (b.transpose() * vinv * &b)[(0, 0)] / q as f64;
        let dist = FisherSnedecor::new(q as f64, self.df as f64)
            .map_err(|e| EconError::InvalidSpec(format!("F distribution: {e}")))?;
        Ok(WaldTest { f, df_num: q, df_den: self.df, p: dist.sf(f) })
    }
}

fn transform_outcome(frame: &PanelFrame, spec: &RegressionSpec) -> Result<(Option<Vec<bool>>, Vec<f64>), EconError> {
    let raw = frame.column(&spec.outcome.column)?;
    Ok(match spec.outcome.transform {
        Transform::Identity => (None, raw.to_vec()),
        Transform::Log1p => (None, raw.iter().map(|v| v.ln_1p()).collect()),
        Transform::LogDropZeros => {
            let keep: Vec<bool> = raw.iter().map(|&v| v > 0.0).collect();
            (Some(keep), raw.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).collect())
        }
    })
}

fn cluster_ids(frame: &PanelFrame, cluster: &ClusterBy) -> Result<Vec<u64>, EconError> {
    Ok(match cluster {
        ClusterBy::Unit => frame.unit_keys().to_vec(),
        ClusterBy::Observation => (0..frame.len() as u64).collect(),
        ClusterBy::Column(c) => frame.column(c)?.iter().map(|v| v.to_bits()).collect(),
    })
}

pub(crate) fn t_pvalue(t: f64, df: usize) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df.max(1) as f64).expect("positive df");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Fits any worker-month or market-week specification: transforms the
/// outcome, absorbs the fixed effects, solves by QR and clusters the errors.
pub fn fit(frame: &PanelFrame, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    if spec.interest.is_empty() {
        return Err(EconError::InvalidSpec("no regressor of interest".into()));
    }
    let (keep, y) = transform_outcome(frame, spec)?;
    let filtered;
    let frame = match keep {
        Some(k) => {
            filtered = frame.filter(&k);
            &filtered
        }
        None => frame,
    };
    let n = frame.len();
    if n == 0 {
        return Err(EconError::InvalidSpec("no observations".into()));
    }

    let mut terms: Vec<(Term, bool)> = spec.interest.iter().cloned().map(|t| (t, true)).collect();
    terms.extend(spec.controls.iter().cloned().map(|t| (t, false)));
    if spec.market_trend {
        terms.push((Term::trend("treat"), false));
    }
    if !spec.fe.unit && !spec.fe.time {
        terms.push((Term { name: "_cons".into(), kind: TermKind::Column("_cons".into()) }, false));
    }

    let mut data = DMatrix::<f64>::zeros(n, terms.len() + 1);
    data.set_column(0, &DVector::from_vec(y));
    for (j, (term, _)) in terms.iter().enumerate() {
        let col = if term.name == "_cons" { vec![1.0; n] } else { term.materialize(frame)? };
        data.set_column(j + 1, &DVector::from_vec(col));
    }
    let raw_norms: Vec<f64> = data.column_iter().map(|c| c.norm()).collect();

    let mut dims = Vec::new();
    if spec.fe.unit {
        dims.push(FeDim::new(frame.unit_codes(), frame.n_units()));
    }
    if spec.fe.time {
        dims.push(FeDim::new(frame.time_codes(), frame.n_times()));
    }
    let absorbed = absorb_two_way(&data, &dims)?;
    let data = absorbed.matrix;

    let mut kept: Vec<usize> = Vec::new();
    let mut omitted = Vec::new();
    for (j, (term, interest)) in terms.iter().enumerate() {
        let after = data.column(j + 1).norm();
        let spanned = raw_norms[j + 1] == 0.0 || after <= ABSORBED_TOL * raw_norms[j + 1];
        match (spanned, interest) {
            (true, true) => return Err(EconError::RankDeficient { column: term.name.clone() }),
            (true, false) => omitted.push(term.name.clone()),
            (false, _) => kept.push(j),
        }
    }

    let y = data.column(0).into_owned();
    let (x, ols) = loop {
        let x = DMatrix::from_fn(n, kept.len(), |r, c| data[(r, kept[c] + 1)]);
        let names: Vec<String> = kept.iter().map(|&j| terms[j].0.name.clone()).collect();
        match ols_fit(&x, &y, &names) {
            Ok(o) => break (x, o),
            Err(EconError::RankDeficient { column }) => {
                let pos = names.iter().position(|m| *m == column).expect("named column");
                if terms[kept[pos]].1 {
                    return Err(EconError::RankDeficient { column });
                }
                omitted.push(column);
                kept.remove(pos);
            }
            Err(e) => return Err(e),
        }
    };

    let ids = cluster_ids(frame, &spec.cluster)?;
    let (codes, g) = cluster_codes(&ids);
    let vcov = cluster_vcov_absorbed(&x, &ols.residuals, &ids, fe_dof(&dims, &codes))?;
    let df = g - 1;

    let coefficients = kept
        .iter()
        .enumerate()
        .map(|(c, &j)| {
            let (term, interest) = &terms[j];
            let estimate = ols.coefficients[c];
            let se = vcov[(c, c)].max(0.0).sqrt();
            let t = if se > 0.0 {
                estimate / se
            } else if estimate == 0.0 {
                0.0
            } else {
                estimate.signum() * f64::INFINITY
            };
            Coefficient {
                term: term.name.clone(),
                estimate,
                se,
                t,
                p: t_pvalue(t, df),
                sigma: term.sigma(),
                interest: *interest,
            }
        })
        .collect();

    let tss = y.norm_squared();
    let within_r2 = if tss > 0.0 { 1.0 - ols.residuals.norm_squared() / tss } else { 0.0 };
    Ok(FitResult {
        outcome: spec.outcome.column.clone(),
        coefficients,
        n_obs: n,
        n_units: frame.n_units(),
        n_clusters: g,
        df,
        within_r2,
        converged_fe_iterations: absorbed.iterations,
        omitted,
        orthogonality_gap: orthogonality_gap(&x, &ols.residuals),
        vcov,
    })
}

/// Rank of the fixed effects not nested within clusters. Nested dimensions
/// vanish from every cluster score and do not count toward K.
fn fe_dof(dims: &[FeDim], clusters: &[usize]) -> usize {
    if dims.is_empty() {
        return 0;
    }
    let nested = |d: &FeDim| {
        let mut owner = vec![usize::MAX; d.levels];
        d.codes.iter().zip(clusters).all(|(&lvl, &c)| {
            let o = &mut owner[lvl as usize];
            if *o == usize::MAX {
                *o = c;
            }
            *o == c
        })
    };
    let free: usize = dims.iter().filter(|d| !nested(d)).map(|d| d.levels).sum();
    free.saturating_sub(dims.len() - 1)
}

fn require_two_way(spec: &RegressionSpec) -> Result<(), EconError> {
    if !(spec.fe.unit && spec.fe.time) {
        return Err(EconError::InvalidSpec("model requires unit and time fixed effects".into()));
    }
    Ok(())
}

/// Two-way fixed-effect DiD with a single treatment indicator.
pub fn did_fit(frame: &PanelFrame, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    require_two_way(spec)?;
    if spec.interest.len() != 1 {
        return Err(EconError::InvalidSpec(format!("DiD takes one treatment term, got {}", spec.interest.len())));
    }
    fit(frame, spec)
}

/// Relative-time model; every period in the window except the baseline
/// must have treated observations.
pub fn event_study_fit(frame: &PanelFrame, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    require_two_way(spec)?;
    let window = spec.event_window.ok_or_else(|| EconError::InvalidSpec("event study needs an event window".into()))?;
    if spec.interest.iter().any(|t| t.sigma() == Some(spec.baseline_period)) {
        return Err(EconError::InvalidSpec(format!("baseline period {} must be omitted", spec.baseline_period)));
    }
    let mut missing = Vec::new();
    for s in (window.first..=window.last).filter(|&s| s != spec.baseline_period) {
        match spec.interest.iter().find(|t| t.sigma() == Some(s)) {
            None => missing.push(super::spec::rel_time_name(s)),
            Some(t) => {
                if t.materialize(frame)?.iter().all(|&v| v == 0.0) {
                    missing.push(t.name.clone());
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(EconError::MissingPeriods(missing));
    }
    fit(frame, spec)
}

/// Separate first-release and incremental second-release effects.
pub fn dual_shock_fit(frame: &PanelFrame, spec: &RegressionSpec) -> Result<FitResult, EconError> {
    require_two_way(spec)?;
    let (p35, p40) = (frame.column("post35")?, frame.column("post40")?);
    if let Some(row) = p35.iter().zip(p40).position(|(&a, &b)| b == 1.0 && a != 1.0) {
        return Err(EconError::InvalidSpec(format!("post40 = 1 without post35 = 1 at row {row}")));
    }
    if !spec.interest.iter().any(|t| t.name == CHATGPT40) {
        return Err(EconError::InvalidSpec(format!("dual-shock model needs a {CHATGPT40} term")));
    }
    fit(frame, spec)
}

/// Market-week DiD on fulfilled postings with market and week effects.
pub fn demand_did_fit(rows: &[DemandRow]) -> Result<FitResult, EconError> {
    let frame = PanelFrame::from_demand_rows(rows);
    if frame.n_units() < 2 {
        return Err(EconError::InvalidSpec("demand model needs at least two markets".into()));
    }
    let post = frame.column("post")?;
    if !(post.contains(&0.0) && post.contains(&1.0)) {
        return Err(EconError::InvalidSpec("demand window must span the shock".into()));
    }
    fit(&frame, &RegressionSpec::demand())
}

/// DiD with `moderator x ChatGPT` and `moderator x After` added to `spec`.
pub fn heterogeneity_fit(frame: &PanelFrame, spec: &RegressionSpec, moderator: &str) -> Result<FitResult, EconError> {
    require_two_way(spec)?;
    let m = frame.column(moderator)?;
    if let Some(v) = m.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(EconError::NonBinaryModerator(format!("{moderator} takes value {v}")));
    }
    let mut first: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    for (&u, &v) in frame.unit_keys().iter().zip(m) {
        if *first.entry(u).or_insert(v) != v {
            return Err(EconError::NonBinaryModerator(format!("{moderator} varies within unit {u}")));
        }
    }
    fit(frame, &spec.clone().with_moderator(moderator))
}
