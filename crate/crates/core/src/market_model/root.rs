//! Bracketed scalar root finding (Brent's method).

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
}

/// Finds a root of `f` in `[lo, hi]` given `f(lo)` and `f(hi)` of opposite sign.
///
/// Stops when `|f(x)| < ftol` or the bracket shrinks below machine resolution.
/// Returns `None` if the endpoints do not bracket a sign change.
pub fn brent<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, ftol: f64, max_iter: usize) -> Option<Root> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(Root { x: a, fx: fa, iterations: 0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, fx: fb, iterations: 0 });
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut bisected = true;

    for it in 1..=max_iter {
        if fb.abs() < ftol {
            return Some(Root { x: b, fx: fb, iterations: it - 1 });
        }
        let xtol = 4.0 * f64::EPSILON * b.abs().max(1e-300);
        if (b - a).abs() <= xtol {
            return Some(Root { x: b, fx: fb, iterations: it - 1 });
        }

        let mut s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };

        let lower = (3.0 * a + b) / 4.0;
        let outside = !((s > lower.min(b)) && (s < lower.max(b)));
        let slow = if bisected {
            (s - b).abs() >= (b - c).abs() / 2.0 || (b - c).abs() < xtol
        } else {
            (s - b).abs() >= (c - d).abs() / 2.0 || (c - d).abs() < xtol
        };
        if outside || slow {
            s = (a + b) / 2.0;
            bisected = true;
        } else {
            bisected = false;
        }

        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    Some(Root { x: b, fx: fb, iterations: max_iter })
}
