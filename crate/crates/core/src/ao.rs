//! Alternating optimization over the IRS phases, the receive phase shifters
//! and the transceiver, plus the comparison baselines.
//!
//! Every candidate update is guarded: it is adopted only if the true
//! spectral efficiency with the current precoder and combiner does not drop.

use std::f64::consts::{FRAC_1_SQRT_2, TAU};

use rand::Rng;

use crate::channel::ChannelSet;
use crate::error::Result;
use crate::lowsnr::{align_rx, align_theta, target_of};
use crate::mimo::{composite_channel, design_transceiver, spectral_efficiency, IrsConfig, Polarization, PowerPolicy, Transceiver};
use crate::numkit::{seeded_rng, CMatrix, SeededRng};
use crate::sdr::{
    diag_from_lifted, gaussian_randomize, lift, lifted_from_diag, rx_subproblem_from, solve_psd, theta_subproblem_from,
    ObjectiveMode, SolverSettings, StreamLinearization,
};

/// Amplitude applied to each DP-IRS element when it is compared against a
/// single-polarized surface.
pub const DP_NORMALIZATION: f64 = FRAC_1_SQRT_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    SdrFull,
    LowSnrClosed,
    HighSnrEqual,
    HighSnrWaterfill,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    NoIrs,
    RandomPhases,
    RandomIrsOptRx,
    SIrs,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AoSettings {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub randomization_count: usize,
    pub algorithm: Algorithm,
    /// Reflection amplitude of each element.
    pub irs_amplitude: f64,
    pub solver: SolverSettings,
    /// Seeds randomization and random-phase baselines.
    pub seed: u64,
}

impl Default for AoSettings {
    fn default() -> Self {
        Self {
            max_iters: 30,
            rel_tol: 1e-4,
            randomization_count: 100,
            algorithm: Algorithm::SdrFull,
            irs_amplitude: 1.0,
            // Inside the loop each subproblem only has to improve on its warm
            // start; polishing to the relaxed optimum triples the run time
            // and makes the loop creep past its tolerance.
            solver: SolverSettings {
                polish: false,
                ..SolverSettings::default()
            },
            seed: 0,
        }
    }
}

impl AoSettings {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_iters == 0 || !(self.rel_tol > 0.0) || !(self.irs_amplitude > 0.0) {
            return Err(crate::error::contract("AO settings need max_iters >= 1, rel_tol > 0, amplitude > 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AoState {
    pub irs: IrsConfig,
    pub tx: Transceiver,
    /// Entry 0 is the initial point, entry `k` the value after iteration `k`.
    pub objective_history: Vec<f64>,
    pub iteration: usize,
    /// Relaxed value of the most recent lifted subproblem.
    pub lambda_chain: f64,
    /// Lifted solves whose projection hit its sweep cap.
    pub solver_warnings: usize,
    /// Set when a subproblem failed and the loop stopped early.
    pub failure: Option<String>,
}

impl AoState {
    pub fn se(&self) -> f64 {
        *self.objective_history.last().expect("history is never empty")
    }

    /// Value after the first iteration (the initial value if none ran).
    pub fn first_iteration_se(&self) -> f64 {
        self.objective_history.get(1).copied().unwrap_or(self.se())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Target {
    Theta(Polarization),
    Rx(Polarization),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Update {
    Lifted(ObjectiveMode),
    Closed,
}

const FULL_ORDER: [Target; 4] = [
    Target::Theta(Polarization::V),
    Target::Theta(Polarization::H),
    Target::Rx(Polarization::V),
    Target::Rx(Polarization::H),
];
const RX_ONLY: [Target; 2] = [Target::Rx(Polarization::V), Target::Rx(Polarization::H)];

struct Runner<'a> {
    ch: &'a ChannelSet,
    budget: f64,
    sigma2: f64,
    settings: &'a AoSettings,
    rng: SeededRng,
}

impl Runner<'_> {
    fn se_of(&self, irs: &IrsConfig, tx: &Transceiver) -> Result<f64> {
        spectral_efficiency(&composite_channel(self.ch, irs)?, tx, self.sigma2)
    }

    fn run(&mut self, irs: IrsConfig, targets: &[Target], update: Update, policy: PowerPolicy) -> Result<AoState> {
        let h = composite_channel(self.ch, &irs)?;
        let tx = design_transceiver(&h, self.budget, self.sigma2, policy)?;
        let se0 = spectral_efficiency(&h, &tx, self.sigma2)?;
        let mut state = AoState {
            irs,
            tx,
            objective_history: vec![se0],
            iteration: 0,
            lambda_chain: 0.0,
            solver_warnings: 0,
            failure: None,
        };
        let mut current = se0;
        while state.iteration < self.settings.max_iters {
            state.iteration += 1;
            match self.iterate(&mut state, current, targets, update, policy) {
                Ok(se) => {
                    let prev = current;
                    current = se;
                    state.objective_history.push(se);
                    if (se - prev).abs() <= self.settings.rel_tol * prev.abs() {
                        break;
                    }
                }
                Err(e) => {
                    state.failure = Some(e.to_string());
                    break;
                }
            }
        }
        Ok(state)
    }

    /// One pass over the phase targets followed by a transceiver redesign.
    fn iterate(
        &mut self,
        state: &mut AoState,
        mut current: f64,
        targets: &[Target],
        update: Update,
        policy: PowerPolicy,
    ) -> Result<f64> {
        for &target in targets {
            let candidate = match update {
                Update::Lifted(mode) => self.lifted_candidate(state, target, mode)?,
                Update::Closed => closed_candidate(self.ch, state, target)?,
            };
            let value = self.se_of(&candidate, &state.tx)?;
            if value >= current {
                state.irs = candidate;
                current = value;
            }
        }
        let h = composite_channel(self.ch, &state.irs)?;
        let tx = design_transceiver(&h, self.budget, self.sigma2, policy)?;
        let value = spectral_efficiency(&h, &tx, self.sigma2)?;
        if value >= current {
            state.tx = tx;
            current = value;
        }
        Ok(current)
    }

    fn lifted_candidate(&mut self, state: &mut AoState, target: Target, mode: ObjectiveMode) -> Result<IrsConfig> {
        let lin = StreamLinearization::new(self.ch, &state.irs, &state.tx)?;
        let (sub, phases) = match target {
            Target::Theta(p) => (
                theta_subproblem_from(&lin, &state.irs, p, self.sigma2, state.lambda_chain, mode),
                state.irs.theta(p),
            ),
            Target::Rx(p) => (
                rx_subproblem_from(&lin, &state.irs, p, self.sigma2, state.lambda_chain, mode),
                state.irs.e(p),
            ),
        };
        if phases.is_empty() {
            return Ok(state.irs.clone());
        }
        let warm = lift(&lifted_from_diag(phases));
        let sol = solve_psd(&sub, &warm, &self.settings.solver)?;
        state.lambda_chain = sol.relaxed_value;
        state.solver_warnings += sol.warning as usize;

        let with = |lifted: &[f64]| {
            let mut cand = state.irs.clone();
            let slot = match target {
                Target::Theta(p) => cand.theta_mut(p),
                Target::Rx(p) => cand.e_mut(p),
            };
            *slot = diag_from_lifted(lifted);
            cand
        };
        let tx = &state.tx;
        let evaluate = |lifted: &[f64]| {
            composite_channel(self.ch, &with(lifted))
                .and_then(|h| spectral_efficiency(&h, tx, self.sigma2))
                .unwrap_or(f64::NEG_INFINITY)
        };
        let (best, _) = gaussian_randomize(&sol.l_mat, evaluate, self.settings.randomization_count, &mut self.rng)?;
        Ok(with(&best))
    }
}

/// Closed-form alignment of the strongest stream's gain.
fn closed_candidate(ch: &ChannelSet, state: &AoState, target: Target) -> Result<IrsConfig> {
    let lin = StreamLinearization::new(ch, &state.irs, &state.tx)?;
    let mut cand = state.irs.clone();
    match target {
        Target::Theta(p) => {
            let idx = p as usize;
            let c = lin.eta(&state.irs, p, 0);
            *cand.theta_mut(p) = align_theta(&lin.alpha[idx][0], target_of(c)).phases;
        }
        Target::Rx(p) => {
            let idx = p as usize;
            let c = lin.delta(&state.irs, p, 0);
            *cand.e_mut(p) = align_rx(&lin.hprime[idx][0], target_of(c)).phases;
        }
    }
    Ok(cand)
}

fn runner<'a>(ch: &'a ChannelSet, budget: f64, sigma2: f64, settings: &'a AoSettings) -> Result<Runner<'a>> {
    settings.validate()?;
    ch.validate()?;
    Ok(Runner {
        ch,
        budget,
        sigma2,
        settings,
        rng: seeded_rng(settings.seed),
    })
}

fn initial(ch: &ChannelSet, settings: &AoSettings) -> IrsConfig {
    let (n, _, nr) = ch.dims();
    IrsConfig::identity(n, nr).with_amplitude(settings.irs_amplitude)
}

/// SDR-based AO with water-filling over all eigenchannels.
pub fn run_algorithm1(ch: &ChannelSet, budget: f64, sigma2: f64, settings: &AoSettings) -> Result<AoState> {
    let mut r = runner(ch, budget, sigma2, settings)?;
    r.run(
        initial(ch, settings),
        &FULL_ORDER,
        Update::Lifted(ObjectiveMode::GeometricMean),
        PowerPolicy::WaterFill,
    )
}

/// Closed-form alignment on the strongest eigenchannel.
pub fn run_algorithm2(ch: &ChannelSet, budget: f64, sigma2: f64, settings: &AoSettings) -> Result<AoState> {
    let mut r = runner(ch, budget, sigma2, settings)?;
    r.run(initial(ch, settings), &FULL_ORDER, Update::Closed, PowerPolicy::StrongestOnly)
}

/// SDR on the plain sum of stream gains, with equal or water-filled power
/// depending on `settings.algorithm`.
pub fn run_algorithm3(ch: &ChannelSet, budget: f64, sigma2: f64, settings: &AoSettings) -> Result<AoState> {
    let policy = match settings.algorithm {
        Algorithm::HighSnrWaterfill => PowerPolicy::WaterFill,
        _ => PowerPolicy::EqualSplit,
    };
    let mut r = runner(ch, budget, sigma2, settings)?;
    r.run(
        initial(ch, settings),
        &FULL_ORDER,
        Update::Lifted(ObjectiveMode::PlainSum),
        policy,
    )
}

/// Dispatches on `settings.algorithm`.
pub fn run_algorithm(ch: &ChannelSet, budget: f64, sigma2: f64, settings: &AoSettings) -> Result<AoState> {
    match settings.algorithm {
        Algorithm::SdrFull => run_algorithm1(ch, budget, sigma2, settings),
        Algorithm::LowSnrClosed => run_algorithm2(ch, budget, sigma2, settings),
        Algorithm::HighSnrEqual | Algorithm::HighSnrWaterfill => run_algorithm3(ch, budget, sigma2, settings),
    }
}

/// Single-polarized surface on the vertical path: no horizontal reflection,
/// identity receive phases, both direct links kept.
pub fn single_polarized_channels(ch: &ChannelSet) -> ChannelSet {
    let (n, nt, nr) = ch.dims();
    ChannelSet {
        gv: ch.gv.clone(),
        gh: CMatrix::zeros(n, nt),
        hrv: ch.hrv.clone(),
        hrh: CMatrix::zeros(n, nr),
        hdv: ch.hdv.clone(),
        hdh: ch.hdh.clone(),
    }
}

pub fn run_baseline(
    ch: &ChannelSet,
    budget: f64,
    sigma2: f64,
    kind: Baseline,
    settings: &AoSettings,
) -> Result<AoState> {
    let (n, _, nr) = ch.dims();
    let mut r = runner(ch, budget, sigma2, settings)?;
    let fixed = |r: &Runner, irs: IrsConfig| -> Result<AoState> {
        let h = composite_channel(r.ch, &irs)?;
        let tx = design_transceiver(&h, budget, sigma2, PowerPolicy::WaterFill)?;
        let se = spectral_efficiency(&h, &tx, sigma2)?;
        Ok(AoState {
            irs,
            tx,
            objective_history: vec![se],
            iteration: 0,
            lambda_chain: 0.0,
            solver_warnings: 0,
            failure: None,
        })
    };
    match kind {
        Baseline::NoIrs => {
            let mut direct = ch.clone();
            direct.hrv = CMatrix::zeros(n, nr);
            direct.hrh = CMatrix::zeros(n, nr);
            let r = runner(&direct, budget, sigma2, settings)?;
            fixed(&r, IrsConfig::identity(n, nr))
        }
        Baseline::RandomPhases => {
            let mut irs = IrsConfig::random_theta(&mut r.rng, n, nr).with_amplitude(settings.irs_amplitude);
            for x in irs.ev.iter_mut().chain(irs.eh.iter_mut()) {
                *x = r.rng.random_range(0.0..TAU);
            }
            fixed(&r, irs)
        }
        Baseline::RandomIrsOptRx => {
            let irs = IrsConfig::random_theta(&mut r.rng, n, nr).with_amplitude(settings.irs_amplitude);
            r.run(
                irs,
                &RX_ONLY,
                Update::Lifted(ObjectiveMode::GeometricMean),
                PowerPolicy::WaterFill,
            )
        }
        Baseline::SIrs => {
            let single = single_polarized_channels(ch);
            let s_settings = AoSettings {
                irs_amplitude: 1.0,
                ..settings.clone()
            };
            let mut r = runner(&single, budget, sigma2, &s_settings)?;
            r.run(
                IrsConfig::identity(n, nr),
                &[Target::Theta(Polarization::V)],
                Update::Lifted(ObjectiveMode::GeometricMean),
                PowerPolicy::WaterFill,
            )
        }
    }
}
