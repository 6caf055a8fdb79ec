use dpirs::channel::ChannelSet;
use dpirs::mimo::{
    composite_channel, design_transceiver, eigenchannel_se, spectral_efficiency, water_fill, IrsConfig, PowerPolicy,
};
use dpirs::numkit::{randn_complex, seeded_rng, svd, CMatrix, C64};
use proptest::prelude::*;
use rand::Rng;

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

fn random_irs(seed: u64, n: usize, nr: usize) -> IrsConfig {
    let mut rng = seeded_rng(seed);
    let mut ph = |k: usize| (0..k).map(|_| rng.random_range(0.0..6.3)).collect::<Vec<f64>>();
    IrsConfig {
        theta_v: ph(n),
        theta_h: ph(n),
        ev: ph(nr),
        eh: ph(nr),
        amplitude: 1.0,
    }
}

/// Entry-by-entry evaluation of `Σ_p E_p(Hr_pᴴ Θ_p (Gv + Gh) + Hd_pᴴ)`.
fn composite_by_loops(ch: &ChannelSet, irs: &IrsConfig) -> CMatrix {
    let (n, nt, nr) = ch.dims();
    let mut h = CMatrix::zeros(nr, nt);
    let parts = [
        (&ch.hrv, &ch.hdv, &irs.theta_v, &irs.ev),
        (&ch.hrh, &ch.hdh, &irs.theta_h, &irs.eh),
    ];
    for (hr, hd, theta, e) in parts {
        for i in 0..nr {
            let ei = C64::from_polar(1.0, e[i]);
            for j in 0..nt {
                let mut acc = hd[(j, i)].conj();
                for k in 0..n {
                    let g = ch.gv[(k, j)] + ch.gh[(k, j)];
                    acc += hr[(k, i)].conj() * C64::from_polar(irs.amplitude, theta[k]) * g;
                }
                h[(i, j)] += ei * acc;
            }
        }
    }
    h
}

fn policy_se(h: &CMatrix, budget: f64, sigma2: f64, policy: PowerPolicy) -> f64 {
    let tx = design_transceiver(h, budget, sigma2, policy).unwrap();
    spectral_efficiency(h, &tx, sigma2).unwrap()
}

fn field(ch: &mut ChannelSet, k: usize) -> &mut CMatrix {
    match k {
        0 => &mut ch.gv,
        1 => &mut ch.gh,
        2 => &mut ch.hrv,
        3 => &mut ch.hrh,
        4 => &mut ch.hdv,
        _ => &mut ch.hdh,
    }
}

#[test]
fn composite_matches_loop_evaluation() {
    for seed in 0..10 {
        let ch = random_set(seed, 5, 3, 4);
        let irs = random_irs(seed + 100, 5, 4).with_amplitude(0.7);
        let h = composite_channel(&ch, &irs).unwrap();
        let reference = composite_by_loops(&ch, &irs);
        assert!((&h - &reference).max_abs() < 1e-12);
    }
}

#[test]
fn two_by_two_eigenchannel_identity() {
    let h = randn_complex(&mut seeded_rng(22), 2, 2);
    let s = svd(&h).unwrap();
    let gains: Vec<f64> = s.singular_values.iter().map(|x| x * x).collect();
    let tx = design_transceiver(&h, 3.0, 0.5, PowerPolicy::WaterFill).unwrap();
    let se = spectral_efficiency(&h, &tx, 0.5).unwrap();
    assert!((se - eigenchannel_se(&gains, &tx.rho, 0.5)).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn se_equals_eigenchannel_sum(seed in any::<u64>(), nt in 1usize..6, nr in 1usize..6, budget in 0.01f64..100.0, sigma2 in 0.01f64..10.0, p in 0usize..3) {
        let policy = [PowerPolicy::WaterFill, PowerPolicy::StrongestOnly, PowerPolicy::EqualSplit][p];
        let h = randn_complex(&mut seeded_rng(seed), nr, nt);
        let tx = design_transceiver(&h, budget, sigma2, policy).unwrap();
        let s = svd(&h).unwrap();
        let gains: Vec<f64> = s.singular_values[..tx.ns].iter().map(|x| x * x).collect();
        let se = spectral_efficiency(&h, &tx, sigma2).unwrap();
        prop_assert!((se - eigenchannel_se(&gains, &tx.rho, sigma2)).abs() < 1e-8);
        prop_assert!((tx.power() - budget).abs() < 1e-9 * budget);
        prop_assert!(tx.ns <= nt.min(nr));
        let wtw = &tx.w.adjoint() * &tx.w;
        prop_assert!((&wtw - &CMatrix::identity(tx.ns)).max_abs() < 1e-9);
    }

    #[test]
    fn water_filling_dominates_other_policies(seed in any::<u64>(), nt in 1usize..6, nr in 1usize..6, budget in 0.01f64..100.0, sigma2 in 0.01f64..10.0) {
        let h = randn_complex(&mut seeded_rng(seed), nr, nt);
        let wf = policy_se(&h, budget, sigma2, PowerPolicy::WaterFill);
        let eq = policy_se(&h, budget, sigma2, PowerPolicy::EqualSplit);
        let so = policy_se(&h, budget, sigma2, PowerPolicy::StrongestOnly);
        prop_assert!(eq >= 0.0);
        prop_assert!(wf >= eq - 1e-9);
        prop_assert!(wf >= so - 1e-9);
    }

    #[test]
    fn water_fill_satisfies_kkt(mut gains in prop::collection::vec(1e-3f64..10.0, 1..8), budget in 0.01f64..20.0, sigma2 in 0.01f64..5.0) {
        gains.sort_by(|a, b| b.total_cmp(a));
        let rho = water_fill(&gains, budget, sigma2).unwrap();
        let total: f64 = rho.iter().sum();
        prop_assert!((total - budget).abs() < 1e-10 * budget);
        let active: Vec<usize> = (0..gains.len()).filter(|&i| rho[i] > 0.0).collect();
        let mu = rho[0] + sigma2 / gains[0];
        for i in 0..gains.len() {
            let floor = sigma2 / gains[i];
            if active.contains(&i) {
                prop_assert!((rho[i] + floor - mu).abs() < 1e-9 * mu);
            } else {
                prop_assert!(floor >= mu - 1e-9 * mu);
            }
        }
    }

    #[test]
    fn composite_is_affine_in_each_channel(seed in any::<u64>(), k in 0usize..6, a in -3.0f64..3.0) {
        let (n, nt, nr) = (3, 2, 3);
        let ch = random_set(seed, n, nt, nr);
        let irs = random_irs(seed ^ 1, n, nr);
        let h = |ch: &ChannelSet| composite_channel(ch, &irs).unwrap();
        let mut zero = ch.clone();
        let shape = field(&mut zero, k).shape();
        *field(&mut zero, k) = CMatrix::zeros(shape.0, shape.1);
        let other = randn_complex(&mut seeded_rng(seed ^ 2), shape.0, shape.1);
        let x = field(&mut ch.clone(), k).clone();

        let with = |m: CMatrix| {
            let mut c = zero.clone();
            *field(&mut c, k) = m;
            &h(&c) - &h(&zero)
        };
        let hx = with(x.clone());
        let hy = with(other.clone());
        let combo = with(&x.scale_real(a) + &other);
        let expected = &hx.scale_real(a) + &hy;
        prop_assert!((&combo - &expected).max_abs() < 1e-10 * expected.max_abs().max(1.0));
    }

    #[test]
    fn common_receive_rotation_keeps_singular_values(seed in any::<u64>(), shift in 0.0f64..6.3) {
        let ch = random_set(seed, 4, 3, 3);
        let irs = random_irs(seed ^ 7, 4, 3);
        let mut rotated = irs.clone();
        for x in rotated.ev.iter_mut().chain(rotated.eh.iter_mut()) {
            *x += shift;
        }
        let s0 = svd(&composite_channel(&ch, &irs).unwrap()).unwrap().singular_values;
        let s1 = svd(&composite_channel(&ch, &rotated).unwrap()).unwrap().singular_values;
        for (a, b) in s0.iter().zip(&s1) {
            prop_assert!((a - b).abs() < 1e-10 * s0[0]);
        }
    }
}
