//! Thin SVD by one-sided (Hestenes) Jacobi rotations.

use super::matrix::{inner, norm_sqr, CMatrix, C64, ONE, ZERO};
use crate::error::{contract, Error, Result};

pub const MAX_SWEEPS: usize = 1000;
pub const TOLERANCE: f64 = 1e-12;

/// `A = U·diag(s)·Vᴴ` with `k = min(rows, cols)` columns in `U` and `V`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> CMatrix {
        let s: Vec<C64> = self
            .singular_values
            .iter()
            .map(|&x| C64::new(x, 0.0))
            .collect();
        &self.u.scale_cols(&s) * &self.v.adjoint()
    }
}

pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(contract("svd input has non-finite entries"));
    }
    if a.rows() < a.cols() {
        let t = svd(&a.adjoint())?;
        return Ok(SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    // Columns are kept as separate vectors so the rotations touch contiguous memory.
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<C64>> = (0..n)
        .map(|j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            e
        })
        .collect();

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                routine: "svd",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let alpha = norm_sqr(&cols[p]);
                let beta = norm_sqr(&cols[q]);
                let gamma = inner(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, phase, c, s);
                rotate(&mut vcols, p, q, phase, c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<(usize, f64)> = cols.iter().map(|c| norm_sqr(c).sqrt()).enumerate().collect();
    // Stable sort keeps ties in original column order.
    order.sort_by(|x, y| y.1.total_cmp(&x.1));

    let mut u = CMatrix::zeros(m, n);
    let mut v = CMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let scale = order.first().map(|o| o.1).unwrap_or(0.0);
    let mut filled: Vec<Vec<C64>> = Vec::with_capacity(n);
    for (k, &(j, s)) in order.iter().enumerate() {
        v.set_column(k, &vcols[j]);
        if s > 0.0 && s > f64::EPSILON * scale * (m.max(n) as f64) {
            let col: Vec<C64> = cols[j].iter().map(|&x| x / s).collect();
            u.set_column(k, &col);
            filled.push(col);
            singular_values.push(s);
        } else {
            // Numerically null direction: any unit vector orthogonal to the rest.
            singular_values.push(s);
            filled.push(Vec::new());
        }
    }
    for k in 0..n {
        if filled[k].is_empty() {
            let others: Vec<Vec<C64>> = filled.iter().filter(|c| !c.is_empty()).cloned().collect();
            let col = orthogonal_complement_vector(m, &others);
            u.set_column(k, &col);
            filled[k] = col;
        }
    }
    Ok(SvdResult {
        u,
        singular_values,
        v,
    })
}

fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, phase: C64, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    let conj_phase = phase.conj();
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * conj_phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Unit vector orthogonal to all of `basis` (Gram-Schmidt over the standard basis).
pub(crate) fn orthogonal_complement_vector(m: usize, basis: &[Vec<C64>]) -> Vec<C64> {
    let mut best: Option<(f64, Vec<C64>)> = None;
    for e in 0..m {
        let mut cand = vec![ZERO; m];
        cand[e] = ONE;
        for _ in 0..2 {
            for b in basis {
                let proj = inner(b, &cand);
                for (c, &bi) in cand.iter_mut().zip(b) {
                    *c -= proj * bi;
                }
            }
        }
        let nrm = norm_sqr(&cand).sqrt();
        if nrm > 0.5 {
            return cand.into_iter().map(|x| x / nrm).collect();
        }
        if best.as_ref().map_or(true, |(b, _)| nrm > *b) {
            best = Some((nrm, cand));
        }
    }
    let (nrm, cand) = best.expect("m > 0");
    cand.into_iter().map(|x| x / nrm).collect()
}
