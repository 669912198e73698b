//! Fast built-in sanity checks run by `aijobs selftest`.

use serde::Serialize;

use super::{classify_quadrant, QuadrantLabel};
use crate::econometrics::{coef_to_percent, did_fit, OutcomeSpec, PanelFrame, RegressionSpec, Transform, CHATGPT};
use crate::market_model::{check_inflection_property, cournot_equilibrium, AiLevel, MarketPotentialSpec, MarketSpec};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn best_response_q(market: &MarketSpec, a: f64) -> f64 {
    let s = market.potential.value(a);
    let mc = market.marginal_cost(a);
    let n = market.n as f64;
    let mut q = vec![0.0; market.n as usize];
    for _ in 0..10_000 {
        let total: f64 = q.iter().sum();
        let mut delta = 0.0f64;
        for qi in q.iter_mut() {
            let others = total - *qi;
            let br = ((s - mc - market.b * others) / (2.0 * market.b)).max(0.0);
            let next = *qi + (br - *qi) / (n + 1.0);
            delta = delta.max((next - *qi).abs());
            *qi = next;
        }
        if delta < 1e-15 {
            break;
        }
    }
    q[0]
}

pub fn selftest() -> Vec<Check> {
    let mut out = Vec::new();

    let pct = [(-0.094, -0.0897), (0.062, 0.0640), (-0.353, -0.2974), (0.510, 0.6653)];
    let worst = pct.iter().map(|&(b, p)| (coef_to_percent(b) - p).abs()).fold(0.0, f64::max);
    out.push(Check { name: "coef_to_percent", pass: worst < 1e-4, detail: format!("max error {worst:.2e}") });

    let market = MarketSpec::new(5, 1.0, 1.0, MarketPotentialSpec::quadratic(2.0, 1.0)).expect("valid market");
    let gap = [0.1, 0.4, 0.7]
        .iter()
        .map(|&a| {
            (cournot_equilibrium(&market, AiLevel::new(a).expect("in range")).q - best_response_q(&market, a)).abs()
        })
        .fold(0.0, f64::max);
    out.push(Check { name: "cournot_vs_best_response", pass: gap < 1e-9, detail: format!("max |dq| {gap:.2e}") });

    let logistic = MarketSpec::new(10, 1.0, 1.0, MarketPotentialSpec::logistic(4.0, 1.0, 0.4)).expect("valid market");
    for (name, m) in [("inflection_quadratic", &market), ("inflection_logistic", &logistic)] {
        let c = check_inflection_property(m, 1001).expect("grid");
        out.push(Check { name, pass: c.holds(), detail: format!("a* = {:.6}", c.a_star) });
    }

    let frame = PanelFrame::new(vec![0, 0, 1, 1], vec![0, 1, 0, 1])
        .and_then(|f| f.with_column("treat", vec![1.0, 1.0, 0.0, 0.0]))
        .and_then(|f| f.with_column("post35", vec![0.0, 1.0, 0.0, 1.0]))
        .and_then(|f| f.with_column("y", vec![1.0, 3.0, 1.0, 2.0]))
        .expect("frame");
    let spec = RegressionSpec::did(OutcomeSpec::new("y", Transform::Identity)).with_controls(vec![]);
    let b = did_fit(&frame, &spec).ok().and_then(|f| f.estimate(CHATGPT)).unwrap_or(f64::NAN);
    out.push(Check { name: "did_2x2_identity", pass: (b - 1.0).abs() < 1e-12, detail: format!("beta = {b}") });

    let labels = [
        classify_quadrant(0.106, 0.005, -0.064, 0.08, 0.1),
        classify_quadrant(0.139, 0.005, 0.094, 0.005, 0.1),
        classify_quadrant(-0.074, 0.005, -0.025, 0.08, 0.1),
    ];
    let expected = [QuadrantLabel::ProdToDisp, QuadrantLabel::ProdToProd, QuadrantLabel::DispToDisp];
    out.push(Check { name: "quadrant_labels", pass: labels == expected, detail: format!("{labels:?}") });
    out
}
