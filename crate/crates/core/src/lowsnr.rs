//! Closed-form phase alignment for the single-stream (strongest eigenchannel)
//! problem. Each update rotates every term of `Σ dₙ·aₙ` onto a common target
//! phase, which maximizes `|Σ dₙ·aₙ + c|` when the target is `arg c`.

use crate::numkit::{wrap_phase, C64};

/// Target phases for the reflected (`c_*`) and receive (`u_*`) sums.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AlignmentTarget {
    pub c_v: f64,
    pub c_h: f64,
    pub u_v: f64,
    pub u_h: f64,
}

/// Phases with the indices of zero coefficients, whose phase is left at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    pub phases: Vec<f64>,
    pub zero_entries: Vec<usize>,
}

fn align(coeffs: &[C64], target: f64) -> Alignment {
    let mut zero_entries = Vec::new();
    let phases = coeffs
        .iter()
        .enumerate()
        .map(|(n, a)| {
            if a.norm() == 0.0 {
                zero_entries.push(n);
                0.0
            } else {
                wrap_phase(target - a.arg())
            }
        })
        .collect();
    Alignment {
        phases,
        zero_entries,
    }
}

/// IRS phases `φₙ = target − arg αₙ`.
pub fn align_theta(alpha: &[C64], target: f64) -> Alignment {
    align(alpha, target)
}

/// Receive phases `γₙ = target − arg h′ₙ`.
pub fn align_rx(hprime: &[C64], target: f64) -> Alignment {
    align(hprime, target)
}

/// `arg c`, or 0 when `c` vanishes.
pub fn target_of(c: C64) -> f64 {
    if c.norm() == 0.0 {
        0.0
    } else {
        wrap_phase(c.arg())
    }
}

/// `Σ exp(jφₙ)·aₙ`.
pub fn aligned_sum(coeffs: &[C64], phases: &[f64]) -> C64 {
    coeffs
        .iter()
        .zip(phases)
        .map(|(a, &p)| a * C64::from_polar(1.0, p))
        .sum()
}
