use serde::{Deserialize, Serialize};

/// Sign pattern of the (first release, second release) effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuadrantLabel {
    ProdToProd,
    ProdToDisp,
    DispToDisp,
    /// The pattern the inflection-point model rules out.
    DispToProd,
    Inconclusive,
}

impl std::fmt::Display for QuadrantLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            QuadrantLabel::ProdToProd => "ProdToProd",
            QuadrantLabel::ProdToDisp => "ProdToDisp",
            QuadrantLabel::DispToDisp => "DispToDisp",
            QuadrantLabel::DispToProd => "DispToProd",
            QuadrantLabel::Inconclusive => "Inconclusive",
        };
        f.write_str(s)
    }
}

/// A coefficient with `p >= alpha` counts as zero; any zero is inconclusive.
pub fn classify_quadrant(beta11: f64, p11: f64, beta12: f64, p12: f64, alpha: f64) -> QuadrantLabel {
    let sign = |b: f64, p: f64| if p < alpha && b != 0.0 && b.is_finite() { b.signum() as i8 } else { 0 };
    match (sign(beta11, p11), sign(beta12, p12)) {
        (1, 1) => QuadrantLabel::ProdToProd,
        (1, -1) => QuadrantLabel::ProdToDisp,
        (-1, -1) => QuadrantLabel::DispToDisp,
        (-1, 1) => QuadrantLabel::DispToProd,
        _ => QuadrantLabel::Inconclusive,
    }
}
