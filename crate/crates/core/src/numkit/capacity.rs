use super::matrix::CMatrix;
use crate::error::{contract, Error, Result};

/// `log₂ det(M)` for Hermitian positive definite `M`, via Cholesky.
pub fn logdet_capacity(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(contract(format!(
            "logdet needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let n = m.rows();
    let mut l = CMatrix::zeros(n, n);
    let mut acc = 0.0;
    for j in 0..n {
        let mut diag = m[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::NotPositiveDefinite {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj.into();
        acc += diag.log2();
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(acc)
}
