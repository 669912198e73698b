//! Covariate balance before and after matching.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{MatchError, MatchResult};
use crate::fmt::sig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceStats {
    pub mean_treated: f64,
    pub mean_control: f64,
    /// Welch two-sample t-test.
    pub p_value: f64,
    /// `None` when both groups have zero variance.
    pub std_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub covariate: String,
    pub pre: BalanceStats,
    pub post: BalanceStats,
}

impl BalanceRow {
    pub fn zero_variance(&self) -> bool {
        self.pre.std_diff.is_none() || self.post.std_diff.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceTable {
    pub rows: Vec<BalanceRow>,
    pub n_treated_pre: usize,
    pub n_control_pre: usize,
    pub n_pairs: usize,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var)
}

/// Standardized difference and Welch test for one covariate.
pub fn compare_groups(treated: &[f64], control: &[f64]) -> BalanceStats {
    let (mt, vt) = mean_var(treated);
    let (mc, vc) = mean_var(control);
    let pooled = (vt + vc) / 2.0;
    let std_diff = (pooled > 0.0).then(|| (mt - mc) / pooled.sqrt());
    let (nt, nc) = (treated.len() as f64, control.len() as f64);
    let se2 = vt / nt + vc / nc;
    let p_value = if se2 > 0.0 {
        let t = (mt - mc) / se2.sqrt();
        let df = se2 * se2 / ((vt / nt).powi(2) / (nt - 1.0).max(1.0) + (vc / nc).powi(2) / (nc - 1.0).max(1.0));
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive Welch df");
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    } else if mt == mc {
        1.0
    } else {
        0.0
    };
    BalanceStats { mean_treated: mt, mean_control: mc, p_value, std_diff }
}

/// Balance of each covariate column over all units and over matched pairs.
/// Rows of `covariates` align with `ids` and `treated`.
pub fn balance_table(
    names: &[&str],
    covariates: &DMatrix<f64>,
    ids: &[u64],
    treated: &[bool],
    matched: &MatchResult,
) -> Result<BalanceTable, MatchError> {
    if covariates.nrows() != ids.len() || treated.len() != ids.len() || names.len() != covariates.ncols() {
        return Err(MatchError::Dimension("covariates, ids, labels and names disagree".into()));
    }
    if matched.pairs.is_empty() {
        return Err(MatchError::EmptySide("matched pairs".into()));
    }
    let row_of: HashMap<u64, usize> = ids.iter().enumerate().map(|(r, &id)| (id, r)).collect();
    let lookup =
        |id: u64| row_of.get(&id).copied().ok_or_else(|| MatchError::Dimension(format!("unknown unit id {id}")));
    let mt_rows: Vec<usize> = matched.pairs.iter().map(|p| lookup(p.treated_id)).collect::<Result<_, _>>()?;
    let mc_rows: Vec<usize> = matched.pairs.iter().map(|p| lookup(p.control_id)).collect::<Result<_, _>>()?;
    let (t_rows, c_rows): (Vec<usize>, Vec<usize>) = (0..ids.len()).partition(|&r| treated[r]);
    if t_rows.is_empty() || c_rows.is_empty() {
        return Err(MatchError::EmptySide(if t_rows.is_empty() { "treated" } else { "control" }.into()));
    }

    let rows = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = covariates.column(j);
            let pick = |rows: &[usize]| rows.iter().map(|&r| col[r]).collect::<Vec<f64>>();
            BalanceRow {
                covariate: name.to_string(),
                pre: compare_groups(&pick(&t_rows), &pick(&c_rows)),
                post: compare_groups(&pick(&mt_rows), &pick(&mc_rows)),
            }
        })
        .collect();
    Ok(BalanceTable { rows, n_treated_pre: t_rows.len(), n_control_pre: c_rows.len(), n_pairs: matched.pairs.len() })
}

fn d_cell(d: Option<f64>) -> String {
    d.map_or_else(|| "undefined".to_string(), |v| format!("{v:.3}"))
}

impl BalanceTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "covariate,pre_mean_treated,pre_mean_control,pre_p,pre_std_diff,post_mean_treated,post_mean_control,post_p,post_std_diff\n",
        );
        let d = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.covariate,
                r.pre.mean_treated,
                r.pre.mean_control,
                r.pre.p_value,
                d(r.pre.std_diff),
                r.post.mean_treated,
                r.post.mean_control,
                r.post.p_value,
                d(r.post.std_diff)
            ));
        }
        out
    }

    /// Prematching and postmatching blocks side by side.
    pub fn to_text(&self) -> String {
        let header = [
            "",
            "Mean treated",
            "Mean control",
            "p>|t|",
            "Std. diff.",
            "Mean treated",
            "Mean control",
            "p>|t|",
            "Std. diff.",
        ];
        let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
        for r in &self.rows {
            let block = |s: &BalanceStats| {
                vec![sig(s.mean_treated, 4), sig(s.mean_control, 4), format!("{:.3}", s.p_value), d_cell(s.std_diff)]
            };
            let mut row = vec![r.covariate.clone()];
            row.extend(block(&r.pre));
            row.extend(block(&r.post));
            rows.push(row);
        }
        let widths: Vec<usize> =
            (0..header.len()).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap()).collect();
        let pre_w: usize = widths[1..5].iter().sum::<usize>() + 6;
        let post_w: usize = widths[5..].iter().sum::<usize>() + 6;
        let mut out = format!(
            "{}  {:^pre_w$}  {:^post_w$}\n",
            " ".repeat(widths[0]),
            format!("Prematching (N={}/{})", self.n_treated_pre, self.n_control_pre),
            format!("Postmatching (pairs={})", self.n_pairs),
        );
        for r in rows {
            let cells: Vec<String> = r
                .iter()
                .enumerate()
                .map(
                    |(j, c)| if j == 0 { format!("{c:<w$}", w = widths[0]) } else { format!("{c:>w$}", w = widths[j]) },
                )
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::propensity_match;

    #[test]
    fn unit_mean_gap_with_unit_sd_is_one() {
        // treated mean 1, control mean 0, both sample SD 1
        let t = [0.0, 1.0, 2.0];
        let c = [-1.0, 0.0, 1.0];
        let s = compare_groups(&t, &c);
        assert!((s.std_diff.unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_groups() {
        let v = [1.0, 2.5, 3.0, 7.0];
        let s = compare_groups(&v, &v);
        assert_eq!(s.std_diff, Some(0.0));
        assert!((s.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_matches_hand_computation() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let c = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let (vt, vc) = (5.0 / 3.0, 14.0);
        let se2: f64 = vt / 4.0 + vc / 6.0;
        let tstat = (2.5 - 7.0) / se2.sqrt();
        let df = se2 * se2 / ((vt / 4.0f64).powi(2) / 3.0 + (vc / 6.0f64).powi(2) / 5.0);
        let oracle = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(tstat);
        assert!((compare_groups(&t, &c).p_value - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_flagged() {
        let s = compare_groups(&[2.0, 2.0], &[2.0, 2.0, 2.0]);
        assert_eq!(s.std_diff, None);
        assert_eq!(s.p_value, 1.0);
        assert_eq!(compare_groups(&[2.0, 2.0], &[3.0, 3.0]).p_value, 0.0);
    }

    #[test]
    fn table_blocks() {
        let ids = [1u64, 2, 3, 4, 5, 6];
        let treated = [true, true, false, false, false, false];
        let scores = [0.6, 0.4, 0.61, 0.39, 0.1, 0.9];
        let x = DMatrix::from_row_slice(6, 2, &[1.0, 5.0, 2.0, 5.0, 1.1, 5.0, 2.1, 5.0, 9.0, 5.0, -3.0, 5.0]);
        let m = propensity_match(&ids, &scores, &treated, 0.05).unwrap();
        let b = balance_table(&["x", "flat"], &x, &ids, &treated, &m).unwrap();
        assert_eq!(b.n_pairs, 2);
        assert!((b.rows[0].post.mean_control - 1.6).abs() < 1e-12);
        assert!(b.rows[1].zero_variance());
        assert!(b.to_text().contains("undefined") && b.to_text().contains("Postmatching"));
        assert_eq!(b.to_csv().lines().count(), 3);
    }
}
