//! Composite channel, spectral efficiency and SVD-based transceiver design.

use std::f64::consts::TAU;

use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::{contract, Error, Result};
use crate::numkit::{logdet_capacity, svd, unit_phasors, CMatrix, C64};

/// Singular values below this fraction of the largest count as rank deficiency.
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Polarization {
    V,
    H,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::V, Polarization::H];

    pub fn other(self) -> Polarization {
        match self {
            Polarization::V => Polarization::H,
            Polarization::H => Polarization::V,
        }
    }
}

/// IRS and receive-side phase state. Diagonal entries are
/// `amplitude·exp(jφ)` for the reflecting elements and `exp(jγ)` for `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrsConfig {
    pub theta_v: Vec<f64>,
    pub theta_h: Vec<f64>,
    pub ev: Vec<f64>,
    pub eh: Vec<f64>,
    pub amplitude: f64,
}

impl IrsConfig {
    /// All phases zero, unit amplitude.
    pub fn identity(n: usize, nr: usize) -> Self {
        Self {
            theta_v: vec![0.0; n],
            theta_h: vec![0.0; n],
            ev: vec![0.0; nr],
            eh: vec![0.0; nr],
            amplitude: 1.0,
        }
    }

    /// Reflection phases uniform on `[0, 2π)`; `E` phases left at zero.
    pub fn random_theta<R: Rng + ?Sized>(rng: &mut R, n: usize, nr: usize) -> Self {
        let mut cfg = Self::identity(n, nr);
        for x in cfg.theta_v.iter_mut().chain(cfg.theta_h.iter_mut()) {
            *x = rng.random_range(0.0..TAU);
        }
        cfg
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self, n: usize, nr: usize) -> Result<()> {
        if self.theta_v.len() != n || self.theta_h.len() != n {
            return Err(contract(format!(
                "IRS phase vectors have lengths {}/{}, expected {n}",
                self.theta_v.len(),
                self.theta_h.len()
            )));
        }
        if self.ev.len() != nr || self.eh.len() != nr {
            return Err(contract(format!(
                "receive phase vectors have lengths {}/{}, expected {nr}",
                self.ev.len(),
                self.eh.len()
            )));
        }
        let all = self
            .theta_v
            .iter()
            .chain(&self.theta_h)
            .chain(&self.ev)
            .chain(&self.eh);
        if !all.clone().all(|x| x.is_finite()) || !(self.amplitude > 0.0) {
            return Err(contract("IRS configuration has non-finite phases or amplitude"));
        }
        Ok(())
    }

    pub fn theta(&self, pol: Polarization) -> &[f64] {
        match pol {
            Polarization::V => &self.theta_v,
            Polarization::H => &self.theta_h,
        }
    }

    pub fn theta_mut(&mut self, pol: Polarization) -> &mut Vec<f64> {
        match pol {
            Polarization::V => &mut self.theta_v,
            Polarization::H => &mut self.theta_h,
        }
    }

    pub fn e(&self, pol: Polarization) -> &[f64] {
        match pol {
            Polarization::V => &self.ev,
            Polarization::H => &self.eh,
        }
    }

    pub fn e_mut(&mut self, pol: Polarization) -> &mut Vec<f64> {
        match pol {
            Polarization::V => &mut self.ev,
            Polarization::H => &mut self.eh,
        }
    }

    /// Diagonal of `Θ_p`, amplitude included.
    pub fn reflection(&self, pol: Polarization) -> Vec<C64> {
        unit_phasors(self.theta(pol))
            .into_iter()
            .map(|x| x * self.amplitude)
            .collect()
    }

    /// Diagonal of `E_p`.
    pub fn receive_phasors(&self, pol: Polarization) -> Vec<C64> {
        unit_phasors(self.e(pol))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PowerPolicy {
    WaterFill,
    StrongestOnly,
    EqualSplit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transceiver {
    /// `Nt×Ns` precoder.
    pub f: CMatrix,
    /// `Nr×Ns` combiner with orthonormal columns.
    pub w: CMatrix,
    pub ns: usize,
    pub rho: Vec<f64>,
}

impl Transceiver {
    pub fn power(&self) -> f64 {
        self.f.frobenius_norm_sqr()
    }
}

fn check_dims(ch: &ChannelSet, irs: &IrsConfig) -> Result<()> {
    ch.validate()?;
    let (n, _, nr) = ch.dims();
    irs.validate(n, nr)
}

/// One polarization branch before the receive phases:
/// `Hr_pᴴ·Θ_p·G + Hd_pᴴ` (`Nr×Nt`).
pub fn branch_channel(ch: &ChannelSet, irs: &IrsConfig, pol: Polarization) -> Result<CMatrix> {
    check_dims(ch, irs)?;
    Ok(branch_unchecked(ch, &ch.g_sum(), irs, pol))
}

fn branch_unchecked(ch: &ChannelSet, g: &CMatrix, irs: &IrsConfig, pol: Polarization) -> CMatrix {
    let (hr, hd) = match pol {
        Polarization::V => (&ch.hrv, &ch.hdv),
        Polarization::H => (&ch.hrh, &ch.hdh),
    };
    let theta_g = g.scale_rows(&irs.reflection(pol));
    &(&hr.adjoint() * &theta_g) + &hd.adjoint()
}

/// `H = E_v(Hr_vᴴ Θ_v G + Hd_vᴴ) + E_h(Hr_hᴴ Θ_h G + Hd_hᴴ)` with `G = Gv + Gh`.
pub fn composite_channel(ch: &ChannelSet, irs: &IrsConfig) -> Result<CMatrix> {
    check_dims(ch, irs)?;
    let g = ch.g_sum();
    let hv = branch_unchecked(ch, &g, irs, Polarization::V).scale_rows(&irs.receive_phasors(Polarization::V));
    let hh = branch_unchecked(ch, &g, irs, Polarization::H).scale_rows(&irs.receive_phasors(Polarization::H));
    Ok(&hv + &hh)
}

/// `log2 det(I + WᴴHFFᴴHᴴW/σ²)`.
pub fn spectral_efficiency(h: &CMatrix, tx: &Transceiver, sigma2: f64) -> Result<f64> {
    let (nr, nt) = h.shape();
    if tx.f.rows() != nt || tx.w.rows() != nr || tx.f.cols() != tx.w.cols() {
        return Err(contract(format!(
            "transceiver F {:?} / W {:?} do not fit H {:?}",
            tx.f.shape(),
            tx.w.shape(),
            h.shape()
        )));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::Domain(format!("noise power must be positive, got {sigma2}")));
    }
    let a = &(&tx.w.adjoint() * h) * &tx.f;
    let m = &CMatrix::identity(a.rows()) + &(&a * &a.adjoint()).scale_real(1.0 / sigma2);
    Ok(logdet_capacity(&m)?.max(0.0))
}

/// Water-filling over `gains` (squared singular values, descending). Inactive
/// streams get zero power; the vector keeps the input length.
pub fn water_fill(gains: &[f64], budget: f64, sigma2: f64) -> Result<Vec<f64>> {
    if !(budget > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::Domain(format!(
            "water-filling needs positive budget and noise, got {budget}, {sigma2}"
        )));
    }
    if gains.iter().any(|g| !(*g >= 0.0)) {
        return Err(contract("water-filling gains must be nonnegative"));
    }
    if gains.windows(2).any(|w| w[0] < w[1]) {
        return Err(contract("water-filling gains must be sorted descending"));
    }
    let usable = gains.iter().take_while(|&&g| g > 0.0).count();
    if usable == 0 {
        return Err(Error::NoUsableChannel);
    }
    // Largest active set whose water level clears its weakest member's floor.
    let mut floors = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for k in 1..=usable {
        floors += sigma2 / gains[k - 1];
        let mu = (budget + floors) / k as f64;
        if mu - sigma2 / gains[k - 1] > 0.0 {
            level = mu;
            active = k;
        } else {
            break;
        }
    }
    let mut rho = vec![0.0; gains.len()];
    for i in 0..active {
        rho[i] = level - sigma2 / gains[i];
    }
    // Remove rounding drift so the sum hits the budget.
    let total: f64 = rho.iter().sum();
    for r in &mut rho[..active] {
        *r *= budget / total;
    }
    Ok(rho)
}

/// Capacity of parallel eigenchannels: `Σ log2(1 + ρᵢ·gᵢ/σ²)`.
pub fn eigenchannel_se(gains: &[f64], rho: &[f64], sigma2: f64) -> f64 {
    gains
        .iter()
        .zip(rho)
        .map(|(g, r)| (1.0 + r * g / sigma2).log2())
        .sum()
}

pub fn design_transceiver(h: &CMatrix, budget: f64, sigma2: f64, policy: PowerPolicy) -> Result<Transceiver> {
    if !(budget > 0.0) {
        return Err(Error::Domain(format!("power budget must be positive, got {budget}")));
    }
    let s = svd(h)?;
    let s1 = s.singular_values.first().copied().unwrap_or(0.0);
    if !(s1 > 0.0) {
        return Err(Error::NoUsableChannel);
    }
    let rank = s
        .singular_values
        .iter()
        .take_while(|&&x| x > RANK_THRESHOLD * s1)
        .count();
    let rho: Vec<f64> = match policy {
        PowerPolicy::WaterFill => {
            let gains: Vec<f64> = s.singular_values[..rank].iter().map(|x| x * x).collect();
            water_fill(&gains, budget, sigma2)?
                .into_iter()
                .filter(|&r| r > 0.0)
                .collect()
        }
        PowerPolicy::StrongestOnly => vec![budget],
        PowerPolicy::EqualSplit => vec![budget / rank as f64; rank],
    };
    let ns = rho.len();
    let amp: Vec<C64> = rho.iter().map(|r| C64::new(r.sqrt(), 0.0)).collect();
    Ok(Transceiver {
        f: s.v.leading_columns(ns).scale_cols(&amp),
        w: s.u.leading_columns(ns),
        ns,
        rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{randn_complex, seeded_rng};

    fn scalar_ones() -> ChannelSet {
        let one = CMatrix::from_real(1, 1, &[1.0]).unwrap();
        ChannelSet {
            gv: one.clone(),
            gh: one.clone(),
            hrv: one.clone(),
            hrh: one.clone(),
            hdv: one.clone(),
            hdh: one,
        }
    }

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

    #[test]
    fn scalar_composite_is_six() {
        let h = composite_channel(&scalar_ones(), &IrsConfig::identity(1, 1)).unwrap();
        assert!((h[(0, 0)] - C64::new(6.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn no_reflection_leaves_direct_sum() {
        let mut ch = random_set(1, 5, 3, 2);
        ch.hrv = CMatrix::zeros(5, 2);
        ch.hrh = CMatrix::zeros(5, 2);
        let h = composite_channel(&ch, &IrsConfig::identity(5, 2)).unwrap();
        let direct = &ch.hdv.adjoint() + &ch.hdh.adjoint();
        assert!((&h - &direct).max_abs() < 1e-14);
    }

    #[test]
    fn composite_matches_elementwise_sum() {
        let ch = random_set(2, 4, 3, 2);
        let mut rng = seeded_rng(20);
        let mut irs = IrsConfig::random_theta(&mut rng, 4, 2);
        irs.ev = vec![0.3, 1.9];
        irs.eh = vec![4.0, 2.2];
        let h = composite_channel(&ch, &irs).unwrap();
        let g = ch.g_sum();
        for r in 0..2 {
            for c in 0..3 {
                let mut acc = C64::new(0.0, 0.0);
                for (th, ep, hr, hd) in [
                    (&irs.theta_v, irs.ev[r], &ch.hrv, &ch.hdv),
                    (&irs.theta_h, irs.eh[r], &ch.hrh, &ch.hdh),
                ] {
                    let mut branch = hd[(c, r)].conj();
                    for n in 0..4 {
                        branch += hr[(n, r)].conj() * C64::from_polar(1.0, th[n]) * g[(n, c)];
                    }
                    acc += C64::from_polar(1.0, ep) * branch;
                }
                assert!((acc - h[(r, c)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn se_basics() {
        let i2 = CMatrix::identity(2);
        let tx = Transceiver {
            f: i2.clone(),
            w: i2.clone(),
            ns: 2,
            rho: vec![1.0, 1.0],
        };
        assert!((spectral_efficiency(&i2, &tx, 1.0).unwrap() - 2.0).abs() < 1e-14);
        let zero = Transceiver {
            f: CMatrix::zeros(2, 2),
            ..tx
        };
        assert_eq!(spectral_efficiency(&i2, &zero, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn water_fill_examples() {
        assert_eq!(water_fill(&[1.0, 1.0], 2.0, 1.0).unwrap(), vec![1.0, 1.0]);
        let r = water_fill(&[2.0, 0.5], 1.0, 1.0).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1] == 0.0);
        assert_eq!(water_fill(&[3.7], 2.5, 0.1).unwrap(), vec![2.5]);
        assert!(matches!(water_fill(&[0.0, 0.0], 1.0, 1.0), Err(Error::NoUsableChannel)));
        assert!(water_fill(&[1.0, 2.0], 1.0, 1.0).is_err());
    }

    #[test]
    fn strongest_only_picks_dominant_axis() {
        let h = CMatrix::from_real_diag(&[2.0, 1.0]);
        let tx = design_transceiver(&h, 1.0, 1.0, PowerPolicy::StrongestOnly).unwrap();
        assert_eq!(tx.ns, 1);
        assert_eq!(tx.rho, vec![1.0]);
        assert!((tx.f[(0, 0)].norm() - 1.0).abs() < 1e-12);
        assert!(tx.f[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn rank_one_gives_single_stream() {
        let mut rng = seeded_rng(4);
        let a = randn_complex(&mut rng, 4, 1);
        let b = randn_complex(&mut rng, 1, 4);
        let h = &a * &b;
        for p in [PowerPolicy::WaterFill, PowerPolicy::StrongestOnly, PowerPolicy::EqualSplit] {
            assert_eq!(design_transceiver(&h, 1.0, 1e-3, p).unwrap().ns, 1);
        }
        assert!(matches!(
            design_transceiver(&CMatrix::zeros(2, 2), 1.0, 1.0, PowerPolicy::WaterFill),
            Err(Error::NoUsableChannel)
        ));
    }

    #[test]
    fn waterfill_beats_equal_split_on_seeded_case() {
        let mut rng = seeded_rng(6);
        let h = randn_complex(&mut rng, 4, 4);
        let se = |p| {
            let tx = design_transceiver(&h, 1.0, 0.5, p).unwrap();
            assert!((tx.power() - 1.0).abs() < 1e-9);
            spectral_efficiency(&h, &tx, 0.5).unwrap()
        };
        assert!(se(PowerPolicy::WaterFill) >= se(PowerPolicy::EqualSplit) - 1e-12);
    }
}
