//! Hermitian eigendecomposition: Householder reduction to a real symmetric
//! tridiagonal matrix followed by implicit QL iterations.

use super::matrix::{CMatrix, C64, ONE, ZERO};
use crate::error::{contract, Error, Result};

/// Relative tolerance on `‖A − Aᴴ‖` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 1000;

#[derive(Clone, Debug)]
pub struct EighResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Unitary; column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

impl EighResult {
    pub fn reconstruct(&self) -> CMatrix {
        reconstruct_with(&self.eigenvectors, &self.eigenvalues)
    }
}

/// `Q·diag(λ)·Qᴴ`.
pub fn reconstruct_with(q: &CMatrix, lambda: &[f64]) -> CMatrix {
    let n = q.rows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &l) in lambda.iter().enumerate() {
        if l == 0.0 {
            continue;
        }
        for i in 0..n {
            let qi = q[(i, k)] * l;
            for j in 0..n {
                out[(i, j)] += qi * q[(j, k)].conj();
            }
        }
    }
    out
}

pub fn eigh(a: &CMatrix) -> Result<EighResult> {
    if !a.is_square() {
        return Err(contract(format!(
            "eigh needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(contract("eigh input has non-finite entries"));
    }
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(contract(format!(
            "eigh input is not Hermitian (deviation {dev:e})"
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EighResult {
            eigenvalues: Vec::new(),
            eigenvectors: CMatrix::zeros(0, 0),
        });
    }

    let (mut d, mut e, qd) = tridiagonalize(&a.hermitian_part());
    // Rotations are accumulated in a real matrix stored by columns, then
    // applied to the complex reduction in one product.
    let mut zt = vec![0.0; n * n];
    for i in 0..n {
        zt[i * n + i] = 1.0;
    }
    tql(&mut d, &mut e, &mut zt, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let qs = qd.as_slice();
    let mut vecs = CMatrix::zeros(n, n);
    let out = vecs.as_mut_slice();
    for (j, &k) in order.iter().enumerate() {
        let z = &zt[k * n..(k + 1) * n];
        for r in 0..n {
            let row = &qs[r * n..(r + 1) * n];
            let mut acc = ZERO;
            for (q, &zv) in row.iter().zip(z) {
                acc += q * zv;
            }
            out[r * n + j] = acc;
        }
    }
    Ok(EighResult {
        eigenvalues,
        eigenvectors: vecs,
    })
}

/// Reduces Hermitian `a` to `Q·D·T·Dᴴ·Qᴴ` with `T` real tridiagonal.
/// Returns the diagonal, the subdiagonal (last entry zero) and `Q·D`.
fn tridiagonalize(a: &CMatrix) -> (Vec<f64>, Vec<f64>, CMatrix) {
    let n = a.rows();
    let mut mm = a.clone();
    let mut qq = CMatrix::identity(n);
    let m = mm.as_mut_slice();
    let q = qq.as_mut_slice();
    let mut u = vec![ZERO; n];
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(2) {
        let lo = k + 1;
        let sigma = (lo..n).map(|i| m[i * n + k].norm_sqr()).sum::<f64>().sqrt();
        let tail = (lo + 1..n).map(|i| m[i * n + k].norm_sqr()).sum::<f64>();
        if sigma == 0.0 || tail == 0.0 {
            continue;
        }
        let alpha = m[lo * n + k];
        let phase = if alpha.norm() > 0.0 {
            alpha / alpha.norm()
        } else {
            ONE
        };
        // u = x + e^{iθ}·σ·e₁, P = I − u·uᴴ/h, P·x = −e^{iθ}·σ·e₁
        for i in lo..n {
            u[i] = m[i * n + k];
        }
        u[lo] += phase * sigma;
        let h = (lo..n).map(|i| u[i].norm_sqr()).sum::<f64>() / 2.0;
        let uu = &u[lo..n];

        // p = A·u / h on the trailing block
        for i in lo..n {
            let row = &m[i * n + lo..i * n + n];
            let acc: C64 = row.iter().zip(uu).map(|(a, b)| a * b).sum();
            p[i] = acc / h;
        }
        let kk: C64 = (lo..n).map(|i| u[i].conj() * p[i]).sum::<C64>() / (2.0 * h);
        for i in lo..n {
            p[i] -= kk * u[i];
        }
        let pp = &p[lo..n];
        for i in lo..n {
            let (pi, ui) = (p[i], u[i]);
            let row = &mut m[i * n + lo..i * n + n];
            for ((x, &uj), &pj) in row.iter_mut().zip(uu).zip(pp) {
                *x -= pi * uj.conj() + ui * pj.conj();
            }
        }
        let sub = -phase * sigma;
        m[lo * n + k] = sub;
        m[k * n + lo] = sub.conj();
        for i in lo + 1..n {
            m[i * n + k] = ZERO;
            m[k * n + i] = ZERO;
        }
        // Q ← Q·P
        for r in 0..n {
            let row = &mut q[r * n + lo..r * n + n];
            let acc: C64 = row.iter().zip(uu).map(|(a, b)| a * b).sum::<C64>() / h;
            for (x, &uj) in row.iter_mut().zip(uu) {
                *x -= acc * uj.conj();
            }
        }
    }

    let d: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    let mut e = vec![0.0; n];
    // Diagonal unitary scaling makes the subdiagonal real and nonnegative.
    let mut delta = vec![ONE; n];
    for i in 0..n.saturating_sub(1) {
        let sub = m[(i + 1) * n + i];
        let mag = sub.norm();
        e[i] = mag;
        delta[i + 1] = if mag > 0.0 { delta[i] * (sub / mag) } else { delta[i] };
    }
    let qd = qq.scale_cols(&delta);
    (d, e, qd)
}

/// Implicit QL with Wilkinson shifts on a real symmetric tridiagonal matrix.
/// `zt` holds the accumulated rotation matrix by columns (column `i` is
/// `zt[i*n..(i+1)*n]`).
fn tql(d: &mut [f64], e: &mut [f64], zt: &mut [f64], n: usize) -> Result<()> {
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter == MAX_ITERATIONS {
                return Err(Error::NoConvergence {
                    routine: "eigh",
                    iterations: iter,
                });
            }
            iter += 1;
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let (left, right) = zt.split_at_mut((i + 1) * n);
                let zi = &mut left[i * n..];
                let zf = &mut right[..n];
                for (a, b) in zi.iter_mut().zip(zf.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *b = x * s + y * c;
                    *a = x * c - y * s;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
