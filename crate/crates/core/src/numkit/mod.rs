//! Dense complex linear algebra kernel: products, SVD, Hermitian
//! eigendecomposition, log-determinants and seeded Gaussian sampling.

mod capacity;
mod eigh;
mod matrix;
mod random;
mod svd;

pub use capacity::logdet_capacity;
pub use eigh::{eigh, reconstruct_with, EighResult, HERMITIAN_TOL};
pub use matrix::{inner, norm_sqr, unit_phasors, wrap_phase, CMatrix, C64, ONE, ZERO};
pub use random::{cn01, randn_complex, seeded_rng, substream_seed, SeededRng};
pub use svd::{svd, SvdResult};
