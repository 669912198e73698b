//! CSV and aligned-text renderings of fitted models.

use super::FitResult;
use crate::fmt::sig;

/// One column of a side-by-side regression table.
#[derive(Debug, Clone, Copy)]
pub struct TableColumn<'a> {
    pub label: &'a str,
    pub fit: &'a FitResult,
}

fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// `term,estimate,se,p`, one row per estimated coefficient.
pub fn fit_csv(fit: &FitResult) -> String {
    let mut out = String::from("term,estimate,se,p\n");
    for c in &fit.coefficients {
        out.push_str(&format!("{},{},{},{}\n", c.term, c.estimate, c.se, c.p));
    }
    out
}

/// Coefficients of interest with stars, clustered SEs in parentheses below,
/// then observation, unit and within-R² rows.
pub fn regression_table(columns: &[TableColumn]) -> String {
    let mut terms: Vec<&str> = Vec::new();
    for col in columns {
        for c in col.fit.interest() {
            if !terms.contains(&c.term.as_str()) {
                terms.push(&c.term);
            }
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend(columns.iter().enumerate().map(|(i, _)| format!("({})", i + 1)));
    rows.push(header);
    let mut labels = vec![String::new()];
    labels.extend(columns.iter().map(|c| c.label.to_string()));
    rows.push(labels);
    let rule_after_header = rows.len();

    for term in &terms {
        let mut est = vec![term.to_string()];
        let mut se = vec![String::new()];
        for col in columns {
            match col.fit.get(term) {
                Some(c) => {
                    est.push(format!("{:.3}{}", c.estimate, stars(c.p)));
                    se.push(format!("({:.3})", c.se));
                }
                None => {
                    est.push(String::new());
                    se.push(String::new());
                }
            }
        }
        rows.push(est);
        rows.push(se);
    }
    let mut push_stat = |name: &str, f: &dyn Fn(&FitResult) -> String| {
        let mut r = vec![name.to_string()];
        r.extend(columns.iter().map(|c| f(c.fit)));
        rows.push(r);
    };
    push_stat("Observations", &|f| f.n_obs.to_string());
    push_stat("N", &|f| f.n_units.to_string());
    push_stat("Within R²", &|f| sig(f.within_r2, 3));

    let ncol = columns.len() + 1;
    let widths: Vec<usize> = (0..ncol).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let total: usize = widths.iter().sum::<usize>() + 2 * (ncol - 1);
    let rule = "-".repeat(total);

    let mut out = String::new();
    out.push_str(&rule);
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        if i == rule_after_header {
            out.push_str(&rule);
            out.push('\n');
        }
        let cells: Vec<String> = r
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                let pad = widths[j] - cell.chars().count();
                if j == 0 {
                    format!("{cell}{}", " ".repeat(pad))
                } else {
                    format!("{}{cell}", " ".repeat(pad))
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str("* p<0.1, ** p<0.05, *** p<0.01; clustered standard errors in parentheses\n");
    out
}
