//! Channel realizations for the AP / IRS / user geometry: log-distance path
//! loss, Rician AP-IRS link, Rayleigh IRS-user and AP-user links, drawn
//! independently per polarization.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{contract, Error, Result};
use crate::numkit::{randn_complex, CMatrix, C64};

/// AP at the origin, IRS at `(d0, 0)`, user at `(dh, -dv)`. Meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub d0: f64,
    pub dv: f64,
    pub dh: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            d0: 40.0,
            dv: 2.0,
            dh: 38.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.d0 > 0.0 && self.dv > 0.0 && self.dh > 0.0) {
            return Err(Error::Domain(format!(
                "geometry distances must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn ap_irs_distance(&self) -> f64 {
        self.d0
    }

    pub fn ap_user_distance(&self) -> f64 {
        self.dh.hypot(self.dv)
    }

    pub fn irs_user_distance(&self) -> f64 {
        (self.d0 - self.dh).hypot(self.dv)
    }
}

/// Log-distance path-loss model `C0 + 10·a·log10(d/D0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathLossParams {
    pub c0_db: f64,
    pub d0_ref: f64,
    pub a_ap_irs: f64,
    pub a_ap_user: f64,
    pub a_irs_user: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            c0_db: 30.0,
            d0_ref: 1.0,
            a_ap_irs: 2.2,
            a_ap_user: 3.5,
            a_irs_user: 2.5,
        }
    }
}

impl PathLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c0_db > 0.0 && self.d0_ref > 0.0) {
            return Err(Error::Domain(format!(
                "path-loss reference must be positive: {self:?}"
            )));
        }
        for a in [self.a_ap_irs, self.a_ap_user, self.a_irs_user] {
            if !(1.5..=6.0).contains(&a) {
                return Err(Error::Domain(format!(
                    "path-loss exponent {a} outside [1.5, 6]"
                )));
            }
        }
        Ok(())
    }
}

/// Transmit power and noise power, both in dBm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub pt_dbm: f64,
    pub sigma2_dbm: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            pt_dbm: 40.0,
            sigma2_dbm: -94.0,
        }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.pt_dbm > self.sigma2_dbm) {
            return Err(Error::Domain(format!(
                "transmit power {} dBm must exceed noise power {} dBm",
                self.pt_dbm, self.sigma2_dbm
            )));
        }
        Ok(())
    }

    pub fn pt_mw(&self) -> f64 {
        db_to_linear(self.pt_dbm)
    }

    pub fn sigma2_mw(&self) -> f64 {
        db_to_linear(self.sigma2_dbm)
    }

    /// Precoder power budget `‖F‖² = Pt/2` (one half per polarization).
    pub fn precoder_budget_mw(&self) -> f64 {
        self.pt_mw() / 2.0
    }
}

/// Linear Rician factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RicianSpec {
    pub chi: f64,
}

impl RicianSpec {
    pub fn from_db(chi_db: f64) -> Self {
        Self {
            chi: db_to_linear(chi_db),
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// The six per-polarization channels of one realization.
///
/// `hrv`/`hrh` are stored `N×Nr` so that `Hrᴴ` is `Nr×N`; `hdv`/`hdh` are
/// stored `Nt×Nr` so that `Hdᴴ` is `Nr×Nt`. `gv`/`gh` are `N×Nt`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub gv: CMatrix,
    pub gh: CMatrix,
    pub hrv: CMatrix,
    pub hrh: CMatrix,
    pub hdv: CMatrix,
    pub hdh: CMatrix,
}

impl ChannelSet {
    /// `(N, Nt, Nr)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.gv.rows(), self.gv.cols(), self.hrv.cols())
    }

    pub fn validate(&self) -> Result<()> {
        let (n, nt, nr) = self.dims();
        let expect = [
            ("gv", &self.gv, (n, nt)),
            ("gh", &self.gh, (n, nt)),
            ("hrv", &self.hrv, (n, nr)),
            ("hrh", &self.hrh, (n, nr)),
            ("hdv", &self.hdv, (nt, nr)),
            ("hdh", &self.hdh, (nt, nr)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(contract(format!(
                    "{name} is {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            if !m.is_finite() {
                return Err(contract(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }

    /// Combined AP-IRS channel `G = Gv + Gh`.
    pub fn g_sum(&self) -> CMatrix {
        &self.gv + &self.gh
    }

    /// Scales the composite channel by `k`. Only the links that end at the
    /// user are touched, so the reflected and direct paths scale alike.
    pub fn scaled(&self, k: f64) -> ChannelSet {
        ChannelSet {
            gv: self.gv.clone(),
            gh: self.gh.clone(),
            hrv: self.hrv.scale_real(k),
            hrh: self.hrh.scale_real(k),
            hdv: self.hdv.scale_real(k),
            hdh: self.hdh.scale_real(k),
        }
    }

    /// FNV-1a digest of the raw entries, for paired-design bookkeeping.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for m in [&self.gv, &self.gh, &self.hrv, &self.hrh, &self.hdv, &self.hdh] {
            for x in m.as_slice() {
                for word in [x.re.to_bits(), x.im.to_bits()] {
                    for b in word.to_le_bytes() {
                        h ^= b as u64;
                        h = h.wrapping_mul(0x0000_0100_0000_01b3);
                    }
                }
            }
        }
        h
    }
}

pub fn path_loss_db(d: f64, p: &PathLossParams, exponent: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    Ok(p.c0_db + 10.0 * exponent * (d / p.d0_ref).log10())
}

pub fn rician_mix(los: &CMatrix, nlos: &CMatrix, chi: f64) -> Result<CMatrix> {
    if los.shape() != nlos.shape() {
        return Err(contract(format!(
            "LoS {:?} and NLoS {:?} shapes differ",
            los.shape(),
            nlos.shape()
        )));
    }
    if !(chi >= 0.0) {
        return Err(Error::Domain(format!("Rician factor must be >= 0, got {chi}")));
    }
    let w_los = (chi / (1.0 + chi)).sqrt();
    let w_nlos = (1.0 / (1.0 + chi)).sqrt();
    Ok(&los.scale_real(w_los) + &nlos.scale_real(w_nlos))
}

/// Half-wavelength ULA steering vector, `exp(jπ·k·cos θ)`.
pub fn steering_vector(len: usize, theta: f64) -> Vec<C64> {
    let c = theta.cos();
    (0..len)
        .map(|k| C64::from_polar(1.0, PI * k as f64 * c))
        .collect()
}

/// Rank-one LoS matrix `a_r(θ)·a_t(φ)ᴴ` with angles uniform on `[0, π)`.
pub fn los_component<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let theta = rng.random_range(0.0..PI);
    let phi = rng.random_range(0.0..PI);
    CMatrix::outer(&steering_vector(rows, theta), &steering_vector(cols, phi))
}

pub fn draw_channels<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &Geometry,
    pathloss: &PathLossParams,
    rician: &RicianSpec,
    n: usize,
    nt: usize,
    nr: usize,
) -> Result<ChannelSet> {
    if nt == 0 || nr == 0 {
        return Err(contract("Nt and Nr must be at least 1"));
    }
    geometry.validate()?;
    let amp = |d: f64, a: f64| -> Result<f64> {
        Ok(db_to_linear(-path_loss_db(d, pathloss, a)?).sqrt())
    };
    let g_amp = amp(geometry.ap_irs_distance(), pathloss.a_ap_irs)?;
    let r_amp = amp(geometry.irs_user_distance(), pathloss.a_irs_user)?;
    let d_amp = amp(geometry.ap_user_distance(), pathloss.a_ap_user)?;

    let mut ap_irs = || -> Result<CMatrix> {
        let los = los_component(rng, n, nt);
        let nlos = randn_complex(rng, n, nt);
        Ok(rician_mix(&los, &nlos, rician.chi)?.scale_real(g_amp))
    };
    let gv = ap_irs()?;
    let gh = ap_irs()?;
    let hrv = randn_complex(rng, n, nr).scale_real(r_amp);
    let hrh = randn_complex(rng, n, nr).scale_real(r_amp);
    let hdv = randn_complex(rng, nt, nr).scale_real(d_amp);
    let hdh = randn_complex(rng, nt, nr).scale_real(d_amp);
    Ok(ChannelSet {
        gv,
        gh,
        hrv,
        hrh,
        hdv,
        hdh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{seeded_rng, svd};

    #[test]
    fn path_loss_values() {
        let p = PathLossParams::default();
        assert!((path_loss_db(1.0, &p, 2.2).unwrap() - 30.0).abs() < 1e-12);
        // 30 + 22·log10(40)
        assert!((path_loss_db(40.0, &p, 2.2).unwrap() - 65.2453).abs() < 1e-3);
        for a in [1.5, 3.0, 6.0] {
            assert!((path_loss_db(p.d0_ref, &p, a).unwrap() - p.c0_db).abs() < 1e-12);
        }
        assert!(path_loss_db(0.0, &p, 2.2).is_err());
        assert!(path_loss_db(-3.0, &p, 2.2).is_err());
    }

    #[test]
    fn rician_limits() {
        let mut rng = seeded_rng(1);
        let los = los_component(&mut rng, 4, 3);
        let nlos = randn_complex(&mut rng, 4, 3);
        assert_eq!(rician_mix(&los, &nlos, 0.0).unwrap(), nlos);
        let near_los = rician_mix(&los, &nlos, 1e12).unwrap();
        assert!((&near_los - &los).frobenius_norm() < 1e-4);
        let half = rician_mix(&los, &nlos, 1.0).unwrap();
        let expect = (&los + &nlos).scale_real(std::f64::consts::FRAC_1_SQRT_2);
        assert!((&half - &expect).max_abs() < 1e-15);
        assert!(rician_mix(&los, &CMatrix::zeros(3, 4), 1.0).is_err());
    }

    #[test]
    fn los_is_unit_modulus_rank_one_and_reproducible() {
        let a = los_component(&mut seeded_rng(9), 6, 4);
        assert!(a.as_slice().iter().all(|x| (x.norm() - 1.0).abs() < 1e-12));
        let s = svd(&a).unwrap().singular_values;
        assert!(s[1] < 1e-10);
        assert_eq!(a, los_component(&mut seeded_rng(9), 6, 4));
    }

    #[test]
    fn geometry_distances() {
        let g = Geometry {
            d0: 40.0,
            dv: 2.0,
            dh: 38.0,
        };
        assert!((g.irs_user_distance() - 8f64.sqrt()).abs() < 1e-12);
        assert!((g.ap_user_distance() - (38f64 * 38.0 + 4.0).sqrt()).abs() < 1e-12);
        assert!(Geometry { dh: 0.0, ..g }.validate().is_err());
    }

    #[test]
    fn rayleigh_links_match_path_loss() {
        let g = Geometry::default();
        let p = PathLossParams::default();
        let gain = |d: f64, a: f64| db_to_linear(-path_loss_db(d, &p, a).unwrap());
        let expect = [
            gain(g.ap_irs_distance(), p.a_ap_irs),
            gain(g.irs_user_distance(), p.a_irs_user),
            gain(g.ap_user_distance(), p.a_ap_user),
        ];
        let mut rng = seeded_rng(77);
        let mut acc = [0.0f64; 6];
        let trials = 10_000;
        for _ in 0..trials {
            let ch = draw_channels(&mut rng, &g, &p, &RicianSpec { chi: 0.0 }, 1, 1, 1).unwrap();
            for (a, m) in acc
                .iter_mut()
                .zip([&ch.gv, &ch.gh, &ch.hrv, &ch.hrh, &ch.hdv, &ch.hdh])
            {
                *a += m[(0, 0)].norm_sqr();
            }
        }
        for (k, a) in acc.iter().enumerate() {
            let ratio = a / trials as f64 / expect[k / 2];
            assert!((ratio - 1.0).abs() < 0.05, "link {k}: {ratio}");
        }
    }

    #[test]
    fn direct_link_power_matches_path_loss() {
        let g = Geometry::default();
        let p = PathLossParams::default();
        let (nt, nr) = (4, 4);
        let pl = db_to_linear(-path_loss_db(g.ap_user_distance(), &p, p.a_ap_user).unwrap());
        let mut rng = seeded_rng(5);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let ch = draw_channels(&mut rng, &g, &p, &RicianSpec::from_db(-20.0), 2, nt, nr).unwrap();
            acc += ch.hdv.frobenius_norm_sqr();
        }
        let ratio = acc / trials as f64 / (pl * (nt * nr) as f64);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn rician_mix_preserves_average_power() {
        let mut rng = seeded_rng(8);
        let (rows, cols) = (5, 3);
        let trials = 4000;
        for chi in [0.1, 1.0, 10.0] {
            let mut acc = 0.0;
            for _ in 0..trials {
                let los = los_component(&mut rng, rows, cols);
                let nlos = randn_complex(&mut rng, rows, cols);
                acc += rician_mix(&los, &nlos, chi).unwrap().frobenius_norm_sqr();
            }
            let ratio = acc / trials as f64 / (rows * cols) as f64;
            assert!((ratio - 1.0).abs() < 0.05, "chi {chi}: {ratio}");
        }
    }

    #[test]
    fn polarizations_are_independent_and_seeding_is_exact() {
        let draw = |seed| {
            draw_channels(
                &mut seeded_rng(seed),
                &Geometry::default(),
                &PathLossParams::default(),
                &RicianSpec::from_db(-20.0),
                8,
                4,
                4,
            )
            .unwrap()
        };
        let a = draw(3);
        assert_eq!(a, draw(3));
        assert_eq!(a.fingerprint(), draw(3).fingerprint());
        assert_ne!(a.fingerprint(), draw(4).fingerprint());
        assert!(a
            .gv
            .as_slice()
            .iter()
            .zip(a.gh.as_slice())
            .all(|(x, y)| x != y));
        assert_eq!(a.dims(), (8, 4, 4));
        a.validate().unwrap();
    }
}
