//! Lifted unit-diagonal PSD subproblems for the IRS and receive phases,
//! a projected-gradient solver, and Gaussian randomization.
//!
//! For one stream the received scalar is `lᴴa + c` where the lifted vector
//! `l` holds the conjugated diagonal of the phase matrix being optimized.
//! Homogenizing with an auxiliary unit entry gives
//! `|lᴴa + c|² = trace(O·L) + |c|²` with `L = [l; 1][l; 1]ᴴ`.

use std::f64::consts::LN_2;

use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{contract, Result};
use crate::mimo::{branch_channel, IrsConfig, Transceiver};
use crate::numkit::{cn01, eigh, inner, norm_sqr, reconstruct_with, unit_phasors, wrap_phase, CMatrix, C64, ONE, ZERO};

pub use crate::mimo::Polarization;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectiveMode {
    /// `Σ log2(1 + xᵢ/σ²)`, the log of the geometric-mean form.
    GeometricMean,
    /// `Σ xᵢ`.
    PlainSum,
}

#[derive(Clone, Debug)]
pub struct SdrSubproblem {
    pub dim: usize,
    /// Per stream: `(O, offset)` with `O` Hermitian and `O[dim-1][dim-1] = 0`.
    pub constants: Vec<(CMatrix, f64)>,
    pub sigma2: f64,
    /// Chained lower bound carried in from the previous subproblem.
    pub threshold_lambda: f64,
    pub mode: ObjectiveMode,
}

#[derive(Clone, Debug)]
pub struct LiftedSolution {
    pub l_mat: CMatrix,
    pub relaxed_value: f64,
    /// Objective at the warm start.
    pub lambda_prime: f64,
    /// Gain over the warm start.
    pub xi: f64,
    pub iterations: usize,
    /// Set when a Dykstra projection stopped at its sweep cap. The exact
    /// repair step still keeps every iterate feasible.
    pub warning: bool,
}

/// Per-stream linear coefficients of `wᴴHf` in each phase vector.
#[derive(Clone, Debug)]
pub struct StreamLinearization {
    /// `[pol][stream]`, length `N`, amplitude included.
    pub alpha: [Vec<Vec<C64>>; 2],
    /// `[pol][stream]`.
    pub beta: [Vec<C64>; 2],
    /// `[pol][stream]`, length `Nr`.
    pub hprime: [Vec<Vec<C64>>; 2],
}

fn pol_index(p: Polarization) -> usize {
    match p {
        Polarization::V => 0,
        Polarization::H => 1,
    }
}

impl StreamLinearization {
    pub fn new(ch: &ChannelSet, irs: &IrsConfig, tx: &Transceiver) -> Result<Self> {
        let (n, nt, nr) = ch.dims();
        irs.validate(n, nr)?;
        if tx.f.rows() != nt || tx.w.rows() != nr || tx.f.cols() != tx.ns || tx.w.cols() != tx.ns {
            return Err(contract("transceiver does not match channel dimensions"));
        }
        let g = ch.g_sum();
        let mut alpha: [Vec<Vec<C64>>; 2] = Default::default();
        let mut beta: [Vec<C64>; 2] = Default::default();
        let mut hprime: [Vec<Vec<C64>>; 2] = Default::default();
        for pol in Polarization::BOTH {
            let p = pol_index(pol);
            let (hr, hd) = match pol {
                Polarization::V => (&ch.hrv, &ch.hdv),
                Polarization::H => (&ch.hrh, &ch.hdh),
            };
            let e = irs.receive_phasors(pol);
            let branch = branch_channel(ch, irs, pol)?;
            for s in 0..tx.ns {
                let f = tx.f.column(s);
                let w = tx.w.column(s);
                // wᴴ·E_p·X = (Xᴴ·E_pᴴ·w)ᴴ
                let ew: Vec<C64> = e.iter().zip(&w).map(|(a, b)| a.conj() * b).collect();
                let z = hr.mul_vec(&ew)?;
                let gf = g.mul_vec(&f)?;
                alpha[p].push(
                    z.iter()
                        .zip(&gf)
                        .map(|(zi, gi)| zi.conj() * gi * irs.amplitude)
                        .collect(),
                );
                beta[p].push(inner(&hd.mul_vec(&ew)?, &f));
                let h = branch.mul_vec(&f)?;
                hprime[p].push(w.iter().zip(&h).map(|(wi, hi)| wi.conj() * hi).collect());
            }
        }
        Ok(Self { alpha, beta, hprime })
    }

    pub fn streams(&self) -> usize {
        self.beta[0].len()
    }

    /// Everything in stream `s` except the `pol` reflection term:
    /// `Σ_n d_{other,n}·α_{other,n} + β_v + β_h`.
    pub fn eta(&self, irs: &IrsConfig, pol: Polarization, s: usize) -> C64 {
        let other = pol.other();
        let d = unit_phasors(irs.theta(other));
        let reflected: C64 = d
            .iter()
            .zip(&self.alpha[pol_index(other)][s])
            .map(|(a, b)| a * b)
            .sum();
        reflected + self.beta[0][s] + self.beta[1][s]
    }

    /// The other polarization's receive contribution `e_otherᵀ·h′_other`.
    pub fn delta(&self, irs: &IrsConfig, pol: Polarization, s: usize) -> C64 {
        let other = pol.other();
        unit_phasors(irs.e(other))
            .iter()
            .zip(&self.hprime[pol_index(other)][s])
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// `[[a·aᴴ, a·c*], [c·aᴴ, 0]]`.
pub fn homogenize(a: &[C64], c: C64) -> CMatrix {
    let n = a.len();
    let mut o = CMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            o[(i, j)] = a[i] * a[j].conj();
        }
        o[(i, n)] = a[i] * c.conj();
        o[(n, i)] = c * a[i].conj();
    }
    o
}

/// Lifted vector phases (`arg l`) from diagonal phases of `Θ` or `E`.
pub fn lifted_from_diag(phases: &[f64]) -> Vec<f64> {
    phases.iter().map(|&p| wrap_phase(-p)).collect()
}

/// Diagonal phases from lifted vector phases.
pub fn diag_from_lifted(phases: &[f64]) -> Vec<f64> {
    lifted_from_diag(phases)
}

/// `[l; 1][l; 1]ᴴ` with `l = exp(j·phases)`.
pub fn lift(lifted_phases: &[f64]) -> CMatrix {
    let mut x = unit_phasors(lifted_phases);
    x.push(C64::new(1.0, 0.0));
    CMatrix::outer(&x, &x)
}

pub fn build_theta_subproblem(
    ch: &ChannelSet,
    irs: &IrsConfig,
    tx: &Transceiver,
    pol: Polarization,
    sigma2: f64,
    lambda: f64,
    mode: ObjectiveMode,
) -> Result<SdrSubproblem> {
    let lin = StreamLinearization::new(ch, irs, tx)?;
    Ok(theta_subproblem_from(&lin, irs, pol, sigma2, lambda, mode))
}

pub fn theta_subproblem_from(
    lin: &StreamLinearization,
    irs: &IrsConfig,
    pol: Polarization,
    sigma2: f64,
    lambda: f64,
    mode: ObjectiveMode,
) -> SdrSubproblem {
    let constants = (0..lin.streams())
        .map(|s| {
            let eta = lin.eta(irs, pol, s);
            (homogenize(&lin.alpha[pol_index(pol)][s], eta), eta.norm_sqr())
        })
        .collect();
    SdrSubproblem {
        dim: irs.theta(pol).len() + 1,
        constants,
        sigma2,
        threshold_lambda: lambda,
        mode,
    }
}

pub fn build_rx_subproblem(
    ch: &ChannelSet,
    irs: &IrsConfig,
    tx: &Transceiver,
    pol: Polarization,
    sigma2: f64,
    lambda: f64,
    mode: ObjectiveMode,
) -> Result<SdrSubproblem> {
    let lin = StreamLinearization::new(ch, irs, tx)?;
    Ok(rx_subproblem_from(&lin, irs, pol, sigma2, lambda, mode))
}

pub fn rx_subproblem_from(
    lin: &StreamLinearization,
    irs: &IrsConfig,
    pol: Polarization,
    sigma2: f64,
    lambda: f64,
    mode: ObjectiveMode,
) -> SdrSubproblem {
    let constants = (0..lin.streams())
        .map(|s| {
            let delta = lin.delta(irs, pol, s);
            (homogenize(&lin.hprime[pol_index(pol)][s], delta), delta.norm_sqr())
        })
        .collect();
    SdrSubproblem {
        dim: irs.e(pol).len() + 1,
        constants,
        sigma2,
        threshold_lambda: lambda,
        mode,
    }
}

impl SdrSubproblem {
    /// `trace(Oᵢ·L) + offsetᵢ` per stream.
    pub fn stream_values(&self, l: &CMatrix) -> Vec<f64> {
        self.constants
            .iter()
            .map(|(o, off)| o.trace_product(l).re + off)
            .collect()
    }

    pub fn objective(&self, l: &CMatrix) -> f64 {
        let v = self.stream_values(l);
        match self.mode {
            ObjectiveMode::GeometricMean => v
                .iter()
                .map(|x| (1.0 + x.max(0.0) / self.sigma2).log2())
                .sum(),
            ObjectiveMode::PlainSum => v.iter().sum(),
        }
    }

    /// Objective at the rank-one point with lifted phases `phases`.
    pub fn rank_one_objective(&self, phases: &[f64]) -> f64 {
        self.objective(&lift(phases))
    }

    fn gradient(&self, l: &CMatrix) -> CMatrix {
        let weights: Vec<f64> = match self.mode {
            ObjectiveMode::GeometricMean => self
                .stream_values(l)
                .iter()
                .map(|x| 1.0 / (LN_2 * (self.sigma2 + x.max(0.0))))
                .collect(),
            ObjectiveMode::PlainSum => vec![1.0; self.constants.len()],
        };
        let mut g = CMatrix::zeros(self.dim, self.dim);
        for ((o, _), w) in self.constants.iter().zip(weights) {
            for (gi, oi) in g.as_mut_slice().iter_mut().zip(o.as_slice()) {
                *gi += oi * w;
            }
        }
        g
    }

    fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(contract("lifted dimension must be at least 2"));
        }
        for (o, off) in &self.constants {
            if o.shape() != (self.dim, self.dim) || !(*off >= 0.0) {
                return Err(contract("subproblem constant has wrong shape or negative offset"));
            }
        }
        if !(self.sigma2 > 0.0) {
            return Err(contract("noise power must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub armijo: f64,
    pub shrink: f64,
    pub max_shrinks: usize,
    /// Dykstra sweeps per projection before the exact repair step.
    pub dykstra_iters: usize,
    pub dykstra_tol: f64,
    /// Finish with a factorized ascent that reaches the relaxed optimum.
    pub polish: bool,
    /// Relative-improvement stop for the factorized polish.
    pub polish_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-6,
            armijo: 1e-4,
            shrink: 0.5,
            max_shrinks: 30,
            dykstra_iters: 3,
            dykstra_tol: 1e-9,
            polish: true,
            polish_tol: 1e-10,
        }
    }
}

/// Eigenvalue clip onto the PSD cone. Returns the input untouched when it is
/// already PSD.
fn psd_clip(y: &CMatrix) -> Result<CMatrix> {
    let e = eigh(y)?;
    if e.eigenvalues.last().is_none_or(|&l| l >= 0.0) {
        return Ok(y.hermitian_part());
    }
    let clipped: Vec<f64> = e.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    Ok(reconstruct_with(&e.eigenvectors, &clipped))
}

fn set_unit_diag(x: &mut CMatrix) {
    for i in 0..x.rows() {
        x[(i, i)] = C64::new(1.0, 0.0);
    }
}

/// Projects a Hermitian matrix onto `{L ⪰ 0, diag(L) = 1}` by Dykstra
/// alternation, then makes the result exactly feasible with a PSD clip and a
/// diagonal congruence. Returns `None` if the repair cannot restore a unit
/// diagonal. The flag reports whether Dykstra met its tolerance.
pub fn project(y: &CMatrix, iters: usize, tol: f64) -> Result<Option<(CMatrix, bool)>> {
    let n = y.rows();
    let mut x = y.hermitian_part();
    set_unit_diag(&mut x);
    let mut p = CMatrix::zeros(n, n);
    let mut converged = false;
    for _ in 0..iters {
        let z = psd_clip(&(&x + &p))?;
        p = &(&x + &p) - &z;
        let mut next = z;
        set_unit_diag(&mut next);
        let change = (&next - &x).frobenius_norm();
        x = next;
        if change <= tol * (n as f64) {
            converged = true;
            break;
        }
    }
    let mut fixed = psd_clip(&x)?;
    let d = fixed.diag();
    if d.iter().any(|v| !(v.re > 1e-12)) {
        return Ok(None);
    }
    let s: Vec<C64> = d.iter().map(|v| C64::new(1.0 / v.re.sqrt(), 0.0)).collect();
    fixed = fixed.scale_rows(&s).scale_cols(&s);
    set_unit_diag(&mut fixed);
    Ok(Some((fixed, converged)))
}

fn is_feasible(l: &CMatrix, tol: f64) -> Result<bool> {
    if !l.is_square() || l.hermitian_deviation() > tol {
        return Ok(false);
    }
    if l.diag().iter().any(|v| (v - C64::new(1.0, 0.0)).norm() > tol) {
        return Ok(false);
    }
    Ok(eigh(l)?.eigenvalues.last().is_none_or(|&v| v >= -tol))
}

/// Projected gradient ascent from a feasible warm start. The returned
/// objective is never below the warm start's.
pub fn solve_psd(sub: &SdrSubproblem, warm: &CMatrix, settings: &SolverSettings) -> Result<LiftedSolution> {
    sub.validate()?;
    if warm.shape() != (sub.dim, sub.dim) || !is_feasible(warm, 1e-8)? {
        return Err(contract("warm start must be PSD with unit diagonal"));
    }
    let start = sub.objective(warm);
    let mut l = warm.clone();
    let mut value = start;
    let mut step: f64 = 1.0;
    let mut warning = false;
    let mut iterations = 0;
    let scale = sub.dim as f64;

    while iterations < settings.max_iters {
        iterations += 1;
        let g = sub.gradient(&l);
        let gn = g.frobenius_norm();
        if !(gn > 0.0) {
            break;
        }
        let dir = g.scale_real(scale / gn);
        let mut t = (2.0 * step).min(1.0);
        let mut accepted = None;
        for _ in 0..settings.max_shrinks {
            let trial = &l + &dir.scale_real(t);
            if let Some((cand, ok)) = project(&trial, settings.dykstra_iters, settings.dykstra_tol)? {
                warning |= !ok;
                let v = sub.objective(&cand);
                let predicted = g.trace_product(&(&cand - &l)).re;
                if v >= value + settings.armijo * predicted.max(0.0) && v > value {
                    accepted = Some((cand, v));
                    break;
                }
            }
            t *= settings.shrink;
        }
        let Some((cand, v)) = accepted else { break };
        let rel = (v - value) / value.abs().max(f64::MIN_POSITIVE);
        l = cand;
        value = v;
        step = t;
        if rel < settings.rel_tol {
            break;
        }
    }
    let (l, value) = if settings.polish {
        let (l, value, extra) = polish(sub, l, value, settings)?;
        iterations += extra;
        (l, value)
    } else {
        (l, value)
    };
    Ok(LiftedSolution {
        l_mat: l,
        relaxed_value: value,
        lambda_prime: start,
        xi: value - start,
        iterations,
        warning,
    })
}

fn unit_rows(v: &mut CMatrix) {
    for i in 0..v.rows() {
        let n = norm_sqr(v.row(i)).sqrt();
        if n > 0.0 {
            for x in v.row_mut(i) {
                *x /= n;
            }
        } else {
            v.row_mut(i)[0] = ONE;
        }
    }
}

fn gram(v: &CMatrix) -> Result<CMatrix> {
    let mut l = v.matmul(&v.adjoint())?.hermitian_part();
    set_unit_diag(&mut l);
    Ok(l)
}

/// Riemannian ascent on a factor `L = VVᴴ` whose rows stay unit-norm, so
/// every iterate is exactly feasible. This finishes the climb where the
/// capped projections above stall short of the optimum.
fn polish(sub: &SdrSubproblem, l: CMatrix, value: f64, settings: &SolverSettings) -> Result<(CMatrix, f64, usize)> {
    // Some optimum has rank near √(dim + streams), so a thin factor suffices.
    let rank = (((sub.dim + sub.constants.len()) as f64).sqrt().ceil() as usize + 1).min(sub.dim);
    let e = eigh(&l)?;
    // A floor on every column lets the factor leave a rank-deficient start;
    // zero columns would otherwise stay zero under `G·V`.
    let roots: Vec<C64> = e.eigenvalues[..rank].iter().map(|x| C64::new(x.max(1e-4).sqrt(), 0.0)).collect();
    let mut v = e.eigenvectors.leading_columns(rank).scale_cols(&roots);
    unit_rows(&mut v);
    let (mut best_l, mut best) = (l, value);
    let mut current = gram(&v)?;
    let mut cur_value = sub.objective(&current);
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < settings.max_iters {
        iterations += 1;
        let grad = sub.gradient(&current).matmul(&v)?.scale_real(2.0);
        let mut tangent = grad.clone();
        for i in 0..v.rows() {
            let radial = inner(v.row(i), grad.row(i)).re;
            for (t, x) in tangent.row_mut(i).iter_mut().zip(v.row(i)) {
                *t -= x * radial;
            }
        }
        let rn = tangent.frobenius_norm();
        if !(rn > 0.0) {
            break;
        }
        let dir = tangent.scale_real((v.rows() as f64).sqrt() / rn);
        let slope = rn * (v.rows() as f64).sqrt();
        let mut t = (2.0 * step).min(1.0);
        let mut accepted = None;
        for _ in 0..settings.max_shrinks {
            let mut trial = &v + &dir.scale_real(t);
            unit_rows(&mut trial);
            let cand = gram(&trial)?;
            let val = sub.objective(&cand);
            if val >= cur_value + settings.armijo * t * slope && val > cur_value {
                accepted = Some((trial, cand, val));
                break;
            }
            t *= settings.shrink;
        }
        let Some((next_v, next_l, val)) = accepted else { break };
        let rel = (val - cur_value) / cur_value.abs().max(f64::MIN_POSITIVE);
        v = next_v;
        current = next_l;
        cur_value = val;
        step = t;
        if rel < settings.polish_tol {
            break;
        }
    }
    if cur_value > best {
        best_l = current;
        best = cur_value;
    }
    Ok((best_l, best, iterations))
}

/// Best unit-modulus candidate drawn from `CN(0, L)`, de-homogenized by the
/// last entry. The dominant eigenvector rounding is always a candidate and is
/// the only one when `samples == 0`. Returns lifted phases and their value.
pub fn gaussian_randomize<R: Rng + ?Sized>(
    l: &CMatrix,
    mut evaluate: impl FnMut(&[f64]) -> f64,
    samples: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    let dim = l.rows();
    if dim < 2 || !l.is_square() {
        return Err(contract("lifted matrix must be square with dimension at least 2"));
    }
    let e = eigh(l)?;
    let round = |v: &[C64]| -> Vec<f64> {
        let anchor = v[dim - 1];
        v[..dim - 1]
            .iter()
            .map(|&x| {
                let r = if anchor.norm() > 0.0 { x * anchor.conj() } else { x };
                wrap_phase(r.arg())
            })
            .collect()
    };
    let mut best = round(&e.eigenvectors.column(0));
    let mut best_value = evaluate(&best);

    // Eigenvalues at rounding level are treated as exact zeros.
    let floor = 1e-12 * e.eigenvalues[0].abs();
    let roots: Vec<f64> = e
        .eigenvalues
        .iter()
        .map(|&x| if x > floor { x.sqrt() } else { 0.0 })
        .collect();
    let factor = e
        .eigenvectors
        .scale_cols(&roots.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>());
    let mut z = vec![ZERO; dim];
    for _ in 0..samples {
        for zi in z.iter_mut() {
            *zi = cn01(rng);
        }
        let r = factor.mul_vec(&z)?;
        let cand = round(&r);
        let v = evaluate(&cand);
        if v > best_value {
            best = cand;
            best_value = v;
        }
    }
    Ok((best, best_value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mimo::{composite_channel, design_transceiver, PowerPolicy};
    use crate::numkit::{randn_complex, seeded_rng};
    use std::f64::consts::PI;

    fn random_set(seed: u64, n: usize, nt: usize, nr: usize) -> ChannelSet {
        let mut rng = seeded_rng(seed);
        ChannelSet {
            gv: randn_complex(&mut rng, n, nt),
            gh: randn_complex(&mut rng, n, nt),
            hrv: randn_complex(&mut rng, n, nr),
            hrh: randn_complex(&mut rng, n, nr),
            hdv: randn_complex(&mut rng, nt, nr),
            hdh: randn_complex(&mut rng, nt, nr),
        }
    }

    fn single(a: Vec<C64>, c: C64, sigma2: f64) -> SdrSubproblem {
        SdrSubproblem {
            dim: a.len() + 1,
            constants: vec![(homogenize(&a, c), c.norm_sqr())],
            sigma2,
            threshold_lambda: 0.0,
            mode: ObjectiveMode::GeometricMean,
        }
    }

    #[test]
    fn linearization_reassembles_the_stream_gain() {
        let ch = random_set(3, 6, 3, 3);
        let mut rng = seeded_rng(30);
        let mut irs = IrsConfig::random_theta(&mut rng, 6, 3).with_amplitude(0.7);
        irs.ev = vec![0.4, 2.0, 5.1];
        irs.eh = vec![1.2, 0.1, 3.3];
        let h = composite_channel(&ch, &irs).unwrap();
        let tx = design_transceiver(&h, 2.0, 0.1, PowerPolicy::WaterFill).unwrap();
        let lin = StreamLinearization::new(&ch, &irs, &tx).unwrap();
        for s in 0..tx.ns {
            let direct = inner(&tx.w.column(s), &h.mul_vec(&tx.f.column(s)).unwrap());
            for pol in Polarization::BOTH {
                let p = pol_index(pol);
                let d = unit_phasors(irs.theta(pol));
                let via_theta: C64 =
                    d.iter().zip(&lin.alpha[p][s]).map(|(a, b)| a * b).sum::<C64>() + lin.eta(&irs, pol, s);
                assert!((via_theta - direct).norm() < 1e-10);
                let e = unit_phasors(irs.e(pol));
                let via_rx: C64 =
                    e.iter().zip(&lin.hprime[p][s]).map(|(a, b)| a * b).sum::<C64>() + lin.delta(&irs, pol, s);
                assert!((via_rx - direct).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn scalar_homogenization_by_hand() {
        // a = 1, c = 1: O = [[1, 1], [1, 0]], offset 1
        let o = homogenize(&[C64::new(1.0, 0.0)], C64::new(1.0, 0.0));
        let expect = CMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(o, expect);
        let o = homogenize(&[C64::new(0.0, 2.0)], C64::new(3.0, 0.0));
        assert_eq!(o[(0, 1)], C64::new(0.0, 6.0));
        assert_eq!(o[(1, 0)], C64::new(0.0, -6.0));
        assert_eq!(o[(0, 0)], C64::new(4.0, 0.0));
    }

    #[test]
    fn lifting_identity_on_current_phases() {
        let mut rng = seeded_rng(12);
        let a: Vec<C64> = (0..5).map(|_| cn01(&mut rng)).collect();
        let c = cn01(&mut rng);
        let diag: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let sub = single(a.clone(), c, 1.0);
        let lifted = lift(&lifted_from_diag(&diag));
        let lhs = sub.stream_values(&lifted)[0];
        let d = unit_phasors(&diag);
        let rhs = (d.iter().zip(&a).map(|(x, y)| x * y).sum::<C64>() + c).norm_sqr();
        assert!((lhs - rhs).abs() < 1e-9 * rhs.max(1.0));
    }

    #[test]
    fn zero_reflection_gives_zero_matrix() {
        let mut ch = random_set(4, 3, 2, 2);
        ch.hrv = CMatrix::zeros(3, 2);
        ch.hrh = CMatrix::zeros(3, 2);
        let irs = IrsConfig::identity(3, 2);
        let h = composite_channel(&ch, &irs).unwrap();
        let tx = design_transceiver(&h, 1.0, 1.0, PowerPolicy::WaterFill).unwrap();
        let sub = build_theta_subproblem(&ch, &irs, &tx, Polarization::V, 1.0, 0.0, ObjectiveMode::GeometricMean)
            .unwrap();
        assert!(sub.constants.iter().all(|(o, _)| o.max_abs() == 0.0));
        let warm = lift(&[0.0; 3]);
        let sol = solve_psd(&sub, &warm, &SolverSettings::default()).unwrap();
        assert_eq!(sol.l_mat, warm);
        assert_eq!(sol.xi, 0.0);
    }

    #[test]
    fn rx_subproblem_scalar() {
        let one = CMatrix::from_real(1, 1, &[1.0]).unwrap();
        let ch = ChannelSet {
            gv: one.clone(),
            gh: one.clone(),
            hrv: one.clone(),
            hrh: one.clone(),
            hdv: one.clone(),
            hdh: one.clone(),
        };
        let irs = IrsConfig::identity(1, 1);
        let tx = Transceiver {
            f: one.clone(),
            w: one.clone(),
            ns: 1,
            rho: vec![1.0],
        };
        // each branch: 1·1·2 + 1 = 3, so h′ = 3 and δ = 3
        let sub = build_rx_subproblem(&ch, &irs, &tx, Polarization::H, 1.0, 0.0, ObjectiveMode::PlainSum).unwrap();
        let expect = CMatrix::from_real(2, 2, &[9.0, 9.0, 9.0, 0.0]).unwrap();
        assert!((&sub.constants[0].0 - &expect).max_abs() < 1e-14);
        assert!((sub.constants[0].1 - 9.0).abs() < 1e-14);
        assert!((sub.objective(&lift(&[0.0])) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_on_feasible_points() {
        let mut rng = seeded_rng(21);
        let v = randn_complex(&mut rng, 6, 3);
        let g = &v * &v.adjoint();
        let s: Vec<C64> = g.diag().iter().map(|d| C64::new(1.0 / d.re.sqrt(), 0.0)).collect();
        let l = g.scale_rows(&s).scale_cols(&s);
        let (p, ok) = project(&l, 20, 1e-12).unwrap().unwrap();
        assert!(ok);
        assert!((&p - &l).max_abs() < 1e-10);
    }

    #[test]
    fn projection_output_is_feasible() {
        let mut rng = seeded_rng(22);
        let x = randn_complex(&mut rng, 7, 7);
        let y = (&x + &x.adjoint()).scale_real(3.0);
        let (p, _) = project(&y, 5, 1e-9).unwrap().unwrap();
        assert!(is_feasible(&p, 1e-10).unwrap());
    }

    #[test]
    fn one_phase_analytic_optimum() {
        // |e^{jφ}·a + c| is maximized at |a| + |c|
        let a = C64::from_polar(1.3, 0.7);
        let c = C64::from_polar(0.6, 2.9);
        let sub = single(vec![a], c, 0.5);
        let sol = solve_psd(&sub, &lift(&[0.0]), &SolverSettings::default()).unwrap();
        let best = sub.sigma2 + (a.norm() + c.norm()).powi(2);
        let analytic = (best / sub.sigma2).log2();
        assert!((sol.relaxed_value - analytic).abs() < 1e-4, "{} vs {analytic}", sol.relaxed_value);
    }

    #[test]
    fn geometric_mean_and_log_sum_agree_on_ascent() {
        // the GM objective equals the log of ∏(1 + xᵢ/σ²), so its maximizer and
        // the maximizer of the plain log-sum coincide
        let mut rng = seeded_rng(5);
        let consts: Vec<(CMatrix, f64)> = (0..2)
            .map(|_| {
                let a: Vec<C64> = (0..3).map(|_| cn01(&mut rng)).collect();
                let c = cn01(&mut rng);
                (homogenize(&a, c), c.norm_sqr())
            })
            .collect();
        let sub = SdrSubproblem {
            dim: 4,
            constants: consts,
            sigma2: 0.3,
            threshold_lambda: 0.0,
            mode: ObjectiveMode::GeometricMean,
        };
        let l = lift(&[0.3, 1.0, 2.0]);
        let prod: f64 = sub.stream_values(&l).iter().map(|x| 1.0 + x / 0.3).product();
        assert!((sub.objective(&l) - prod.log2()).abs() < 1e-12);
        let sol = solve_psd(&sub, &l, &SolverSettings::default()).unwrap();
        assert!(sol.relaxed_value >= sub.objective(&l) - 1e-12);
    }

    #[test]
    fn rank_one_randomization_is_exact() {
        let phases = [0.4, 2.5, 5.0];
        let l = lift(&phases);
        let mut seen = Vec::new();
        let (best, _) = gaussian_randomize(
            &l,
            |p| {
                seen.push(p.to_vec());
                0.0
            },
            10,
            &mut seeded_rng(1),
        )
        .unwrap();
        assert_eq!(seen.len(), 11);
        for cand in seen.iter().chain(std::iter::once(&best)) {
            for (x, y) in cand.iter().zip(&phases) {
                let d = (x - y).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) < 1e-9);
            }
        }
        let mut calls = 0;
        gaussian_randomize(&l, |_| {
            calls += 1;
            0.0
        }, 0, &mut seeded_rng(1))
        .unwrap();
        assert_eq!(calls, 1);
    }

    #[test]
    fn phase_conversions_are_inverse() {
        let p = [0.0, 1.0, 6.0];
        let back = diag_from_lifted(&lifted_from_diag(&p));
        for (x, y) in back.iter().zip(&p) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
