//! Fixed-effect absorption by alternating projections.

use nalgebra::DMatrix;

use super::EconError;

pub const ABSORB_TOL: f64 = 1e-10;
pub const ABSORB_MAX_ITER: usize = 10_000;

/// Dense group codes `0..levels` for one fixed-effect dimension.
#[derive(Debug, Clone, Copy)]
pub struct FeDim<'a> {
    pub codes: &'a [u32],
    pub levels: usize,
}

impl<'a> FeDim<'a> {
    pub fn new(codes: &'a [u32], levels: usize) -> Self {
        Self { codes, levels }
    }
}

#[derive(Debug, Clone)]
pub struct Absorbed {
    pub matrix: DMatrix<f64>,
    /// Sweeps over all dimensions, including the one that confirmed convergence.
    pub iterations: usize,
}

/// Subtracts group means in place; returns the largest mean removed.
fn demean_once(col: &mut [f64], dim: &FeDim, sums: &mut [f64], counts: &mut [f64]) -> f64 {
    sums.iter_mut().for_each(|s| *s = 0.0);
    counts.iter_mut().for_each(|c| *c = 0.0);
    for (&g, &v) in dim.codes.iter().zip(col.iter()) {
        sums[g as usize] += v;
        counts[g as usize] += 1.0;
    }
    let mut biggest = 0.0f64;
    for (s, &c) in sums.iter_mut().zip(counts.iter()) {
        if c > 0.0 {
            *s /= c;
            biggest = biggest.max(s.abs());
        }
    }
    for (&g, v) in dim.codes.iter().zip(col.iter_mut()) {
        *v -= sums[g as usize];
    }
    biggest
}

/// Demeans one column until a full sweep moves no cell by `tol` or more.
pub fn absorb_column(col: &mut [f64], dims: &[FeDim], tol: f64, max_iter: usize) -> Result<usize, EconError> {
    if dims.is_empty() {
        return Ok(0);
    }
    let widest = dims.iter().map(|d| d.levels).max().unwrap_or(0);
    let (mut sums, mut counts) = (vec![0.0; widest], vec![0.0; widest]);
    if dims.len() == 1 {
        demean_once(col, &dims[0], &mut sums[..dims[0].levels], &mut counts[..dims[0].levels]);
        return Ok(1);
    }
    for iter in 1..=max_iter {
        let mut change = 0.0f64;
        for d in dims {
            change = change.max(demean_once(col, d, &mut sums[..d.levels], &mut counts[..d.levels]));
        }
        if change < tol {
            return Ok(iter);
        }
    }
    Err(EconError::NonConvergence { iterations: max_iter })
}

/// Removes every fixed-effect dimension from each column of `matrix`.
pub fn absorb_two_way(matrix: &DMatrix<f64>, dims: &[FeDim]) -> Result<Absorbed, EconError> {
    absorb_with(matrix, dims, ABSORB_TOL, ABSORB_MAX_ITER)
}

pub fn absorb_with(matrix: &DMatrix<f64>, dims: &[FeDim], tol: f64, max_iter: usize) -> Result<Absorbed, EconError> {
    for d in dims {
        if d.codes.len() != matrix.nrows() {
            return Err(EconError::InvalidSpec("fixed-effect codes do not match the row count".into()));
        }
        let mut seen = vec![false; d.levels];
        for &g in d.codes {
            match seen.get_mut(g as usize) {
                Some(s) => *s = true,
                None => return Err(EconError::InvalidSpec(format!("group code {g} out of range"))),
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(EconError::InvalidSpec("every fixed-effect level needs at least one observation".into()));
        }
    }
    let mut out = matrix.clone();
    let mut iterations = 0;
    for mut col in out.column_iter_mut() {
        let slice = col.as_mut_slice();
        iterations = iterations.max(absorb_column(slice, dims, tol, max_iter)?);
    }
    Ok(Absorbed { matrix: out, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn balanced_codes(units: usize, times: usize) -> (Vec<u32>, Vec<u32>) {
        let mut u = Vec::new();
        let mut t = Vec::new();
        for i in 0..units {
            for s in 0..times {
                u.push(i as u32);
                t.push(s as u32);
            }
        }
        (u, t)
    }

    #[test]
    fn single_dimension_is_group_demeaning() {
        let codes = [0u32, 0, 1, 1, 1];
        let m = DMatrix::from_column_slice(5, 1, &[1.0, 3.0, 2.0, 4.0, 6.0]);
        let a = absorb_two_way(&m, &[FeDim::new(&codes, 2)]).unwrap();
        let expect = [-1.0, 1.0, -2.0, 0.0, 2.0];
        for (x, e) in a.matrix.iter().zip(expect) {
            assert!((x - e).abs() < 1e-15);
        }
        assert_eq!(a.iterations, 1);
    }

    #[test]
    fn balanced_panel_matches_dummy_regression_residuals() {
        // Oracle: residuals of y on a full set of unit and time dummies,
        // via normal equations with an explicit dummy matrix.
        let (u, t) = balanced_codes(4, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y: Vec<f64> = (0..16).map(|_| rng.random::<f64>()).collect();
        let mut d = DMatrix::zeros(16, 4 + 3);
        for r in 0..16 {
            d[(r, u[r] as usize)] = 1.0;
            if t[r] > 0 {
                d[(r, 4 + t[r] as usize - 1)] = 1.0;
            }
        }
        let yv = nalgebra::DVector::from_vec(y.clone());
        let beta = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * &yv;
        let resid = &yv - &d * beta;

        let a =
            absorb_two_way(&DMatrix::from_column_slice(16, 1, &y), &[FeDim::new(&u, 4), FeDim::new(&t, 4)]).unwrap();
        for (x, e) in a.matrix.iter().zip(resid.iter()) {
            assert!((x - e).abs() < 1e-8);
        }
        assert!(a.iterations <= 2, "balanced panel took {} sweeps", a.iterations);
    }

    #[test]
    fn unit_plus_time_constant_column_vanishes() {
        let (u, t) = balanced_codes(3, 5);
        let col: Vec<f64> = u.iter().zip(&t).map(|(&i, &s)| 2.0 * i as f64 + 0.5 * s as f64 - 7.0).collect();
        let a =
            absorb_two_way(&DMatrix::from_column_slice(15, 1, &col), &[FeDim::new(&u, 3), FeDim::new(&t, 5)]).unwrap();
        assert!(a.matrix.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn unbalanced_panel_converges_to_dummy_residuals() {
        let (mut u, mut t) = balanced_codes(6, 5);
        let drop = [1usize, 7, 8, 14, 22, 23, 29];
        let keep: Vec<usize> = (0..30).filter(|k| !drop.contains(k)).collect();
        u = keep.iter().map(|&k| u[k]).collect();
        t = keep.iter().map(|&k| t[k]).collect();
        let n = u.len();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let mut d = DMatrix::zeros(n, 6 + 4);
        for r in 0..n {
            d[(r, u[r] as usize)] = 1.0;
            if t[r] > 0 {
                d[(r, 6 + t[r] as usize - 1)] = 1.0;
            }
        }
        let yv = nalgebra::DVector::from_vec(y.clone());
        let beta = (d.transpose() * &d).try_inverse().unwrap() * d.transpose() * &yv;
        let resid = &yv - &d * beta;
        let a = absorb_two_way(&DMatrix::from_column_slice(n, 1, &y), &[FeDim::new(&u, 6), FeDim::new(&t, 5)]).unwrap();
        for (x, e) in a.matrix.iter().zip(resid.iter()) {
            assert!((x - e).abs() < 1e-8);
        }
        assert!(a.iterations > 2);
    }

    #[test]
    fn non_convergence_reports_iterations() {
        let (u, t) = balanced_codes(6, 5);
        let mut col: Vec<f64> = (0..30).map(|k| ((k * 7919) % 13) as f64).collect();
        col.swap(0, 29);
        let keep: Vec<usize> = (0..30).filter(|k| ![1, 7, 8].contains(k)).collect();
        let u: Vec<u32> = keep.iter().map(|&k| u[k]).collect();
        let t: Vec<u32> = keep.iter().map(|&k| t[k]).collect();
        let c: Vec<f64> = keep.iter().map(|&k| col[k]).collect();
        let m = DMatrix::from_column_slice(c.len(), 1, &c);
        let r = absorb_with(&m, &[FeDim::new(&u, 6), FeDim::new(&t, 5)], 1e-300, 3);
        assert!(matches!(r, Err(EconError::NonConvergence { iterations: 3 })));
    }

    #[test]
    fn empty_level_rejected() {
        let codes = [0u32, 2];
        let m = DMatrix::from_column_slice(2, 1, &[1.0, 2.0]);
        assert!(absorb_two_way(&m, &[FeDim::new(&codes, 3)]).is_err());
    }
}
