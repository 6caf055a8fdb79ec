//! Monte Carlo harness: sweep definitions, paired per-realization runs,
//! aggregation and CSV output.
//!
//! Experiment files are flat `key = value` text. Lines starting with `#` are
//! comments and lists are comma separated:
//!
//! ```text
//! sweep_axis = n
//! sweep_values = 10, 30, 50
//! schemes = sdr_full, random_phases
//! chi_db = -20
//! realizations = 100
//! ```

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::ao::{run_algorithm, run_baseline, AoSettings, AoState, Algorithm, Baseline, DP_NORMALIZATION};
use crate::channel::{draw_channels, Geometry, LinkBudget, PathLossParams, RicianSpec};
use crate::error::{Error, Result};
use crate::numkit::{seeded_rng, substream_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    N,
    PtDbm,
    ChiDb,
    DhM,
    MimoSize,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 5] = [
        SweepAxis::N,
        SweepAxis::PtDbm,
        SweepAxis::ChiDb,
        SweepAxis::DhM,
        SweepAxis::MimoSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::PtDbm => "pt_dbm",
            SweepAxis::ChiDb => "chi_db",
            SweepAxis::DhM => "dh_m",
            SweepAxis::MimoSize => "mimo_size",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::N => "Reflecting elements N",
            SweepAxis::PtDbm => "Transmit power Pt (dBm)",
            SweepAxis::ChiDb => "Rician factor (dB)",
            SweepAxis::DhM => "AP-user horizontal distance (m)",
            SweepAxis::MimoSize => "Antennas per side",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown sweep axis '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    SdrFull,
    LowSnrClosed,
    HighSnrEqual,
    HighSnrWaterfill,
    NoIrs,
    RandomPhases,
    RandomIrsOptRx,
    SIrs,
    /// Algorithm 1 with each element scaled by `1/√2`, for comparison with
    /// the single-polarized surface.
    DpIrsNormalized,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::SdrFull,
        Scheme::LowSnrClosed,
        Scheme::HighSnrEqual,
        Scheme::HighSnrWaterfill,
        Scheme::NoIrs,
        Scheme::RandomPhases,
        Scheme::RandomIrsOptRx,
        Scheme::SIrs,
        Scheme::DpIrsNormalized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::SdrFull => "sdr_full",
            Scheme::LowSnrClosed => "lowsnr_closed",
            Scheme::HighSnrEqual => "highsnr_equal",
            Scheme::HighSnrWaterfill => "highsnr_waterfill",
            Scheme::NoIrs => "no_irs",
            Scheme::RandomPhases => "random_phases",
            Scheme::RandomIrsOptRx => "random_irs_opt_rx",
            Scheme::SIrs => "s_irs",
            Scheme::DpIrsNormalized => "dp_irs_normalized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown scheme '{s}'")))
    }
}

/// Parameters held constant across a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedParams {
    pub n: usize,
    pub nt: usize,
    pub nr: usize,
    pub link: LinkBudget,
    pub chi_db: f64,
    pub geometry: Geometry,
    pub pathloss: PathLossParams,
}

impl Default for FixedParams {
    fn default() -> Self {
        Self {
            n: 50,
            nt: 4,
            nr: 4,
            link: LinkBudget::default(),
            chi_db: -20.0,
            geometry: Geometry::default(),
            pathloss: PathLossParams::default(),
        }
    }
}

impl FixedParams {
    /// Copy with the swept parameter set to `value`.
    pub fn at(&self, axis: SweepAxis, value: f64) -> Result<FixedParams> {
        let mut p = self.clone();
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Domain(format!("{} must be a nonnegative integer, got {v}", axis.name())))
            }
        };
        match axis {
            SweepAxis::N => p.n = count(value)?,
            SweepAxis::PtDbm => p.link.pt_dbm = value,
            SweepAxis::ChiDb => p.chi_db = value,
            SweepAxis::DhM => p.geometry.dh = value,
            SweepAxis::MimoSize => {
                p.nt = count(value)?;
                p.nr = p.nt;
            }
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nt == 0 || self.nr == 0 {
            return Err(Error::Domain("Nt and Nr must be at least 1".into()));
        }
        self.link.validate()?;
        self.geometry.validate()?;
        self.pathloss.validate()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub fixed: FixedParams,
    pub schemes: Vec<Scheme>,
    pub realizations: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub ao: AoSettings,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            sweep_axis: SweepAxis::N,
            sweep_values: vec![50.0],
            fixed: FixedParams::default(),
            schemes: vec![Scheme::SdrFull],
            realizations: 100,
            master_seed: 1,
            workers: 1,
            ao: AoSettings::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value '{v}' for '{key}'")))
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            spec.apply(line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies one `key=value` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got '{assignment}'")))?;
        let key = key.trim();
        let value = value.trim();
        let f = |v: &str| parse_num::<f64>(key, v);
        match key {
            "sweep_axis" => self.sweep_axis = SweepAxis::parse(value)?,
            "sweep_values" => {
                self.sweep_values = value.split(',').map(f).collect::<Result<_>>()?;
            }
            "schemes" => {
                self.schemes = value
                    .split(',')
                    .map(|s| Scheme::parse(s.trim()))
                    .collect::<Result<_>>()?;
            }
            "realizations" => self.realizations = parse_num(key, value)?,
            "master_seed" | "seed" => self.master_seed = parse_num(key, value)?,
            "workers" => self.workers = parse_num(key, value)?,
            "n" => self.fixed.n = parse_num(key, value)?,
            "nt" => self.fixed.nt = parse_num(key, value)?,
            "nr" => self.fixed.nr = parse_num(key, value)?,
            "pt_dbm" => self.fixed.link.pt_dbm = f(value)?,
            "sigma2_dbm" => self.fixed.link.sigma2_dbm = f(value)?,
            "chi_db" => self.fixed.chi_db = f(value)?,
            "d0" => self.fixed.geometry.d0 = f(value)?,
            "dv" => self.fixed.geometry.dv = f(value)?,
            "dh" => self.fixed.geometry.dh = f(value)?,
            "c0_db" => self.fixed.pathloss.c0_db = f(value)?,
            "d0_ref" => self.fixed.pathloss.d0_ref = f(value)?,
            "a_ap_irs" => self.fixed.pathloss.a_ap_irs = f(value)?,
            "a_ap_user" => self.fixed.pathloss.a_ap_user = f(value)?,
            "a_irs_user" => self.fixed.pathloss.a_irs_user = f(value)?,
            "max_iters" => self.ao.max_iters = parse_num(key, value)?,
            "rel_tol" => self.ao.rel_tol = f(value)?,
            "randomization" => self.ao.randomization_count = parse_num(key, value)?,
            _ => return Err(Error::Parse(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Parse("realizations must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::Parse("sweep_values must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Parse("schemes must not be empty".into()));
        }
        if self.ao.max_iters == 0 || !(self.ao.rel_tol > 0.0) {
            return Err(Error::Parse("max_iters must be >= 1 and rel_tol > 0".into()));
        }
        for &v in &self.sweep_values {
            self.fixed
                .at(self.sweep_axis, v)?
                .validate()
                .map_err(|e| Error::Parse(format!("sweep value {v}: {e}")))?;
        }
        Ok(())
    }
}

pub const FIGURES: [&str; 9] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig11", "fig12"];

/// Preconfigured experiments. See the README for the mapping to plots.
pub fn figure_spec(name: &str) -> Result<ExperimentSpec> {
    use Scheme::*;
    let comparison = vec![
        SdrFull,
        LowSnrClosed,
        HighSnrEqual,
        HighSnrWaterfill,
        NoIrs,
        RandomPhases,
        RandomIrsOptRx,
    ];
    let mut spec = ExperimentSpec {
        schemes: comparison,
        ..ExperimentSpec::default()
    };
    let n_values = vec![10.0, 20.0, 30.0, 40.0, 50.0];
    let pt_values = vec![20.0, 25.0, 30.0, 35.0, 40.0];
    let dh_values = vec![20.0, 24.0, 28.0, 32.0, 36.0, 38.0, 40.0];
    match name {
        "fig3" | "fig4" => {
            spec.sweep_axis = SweepAxis::N;
            spec.sweep_values = n_values;
            spec.fixed.chi_db = if name == "fig3" { 20.0 } else { -20.0 };
        }
        "fig5" | "fig7" => {
            spec.sweep_axis = SweepAxis::PtDbm;
            spec.sweep_values = pt_values;
            spec.fixed.chi_db = if name == "fig5" { 20.0 } else { -20.0 };
        }
        "fig6" => {
            spec.sweep_axis = SweepAxis::ChiDb;
            spec.sweep_values = vec![-10.0, -5.0, 0.0, 5.0, 10.0];
            spec.fixed.geometry.dh = 38.0;
        }
        "fig8" | "fig9" => {
            spec.sweep_axis = SweepAxis::DhM;
            spec.sweep_values = dh_values;
            spec.fixed.chi_db = if name == "fig8" { 20.0 } else { -20.0 };
        }
        "fig11" | "fig12" => {
            spec.sweep_axis = SweepAxis::MimoSize;
            spec.sweep_values = vec![4.0, 8.0, 16.0];
            spec.schemes = vec![DpIrsNormalized, SIrs];
            spec.fixed.chi_db = if name == "fig11" { 20.0 } else { -20.0 };
        }
        _ => return Err(Error::Parse(format!("unknown figure '{name}'"))),
    }
    Ok(spec)
}

/// One scheme on one channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub sweep_index: usize,
    pub sweep_value: f64,
    pub realization: usize,
    pub scheme: Scheme,
    pub channel_hash: u64,
    pub se: f64,
    pub first_iteration_se: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
    pub history: Vec<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub scheme: String,
    pub mean_se: f64,
    /// Sample standard deviation (zero for a single sample).
    pub std_se: f64,
    pub mean_iters: f64,
    pub mean_runtime_ms: f64,
    /// Realizations that failed and were left out of the means.
    pub failures: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn row(&self, sweep_value: f64, scheme: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.scheme == scheme)
    }
}

/// Mean and sample standard deviation in one pass (Welford).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var.sqrt())
}

pub fn run_scheme(
    scheme: Scheme,
    ch: &crate::channel::ChannelSet,
    budget: f64,
    sigma2: f64,
    base: &AoSettings,
) -> Result<AoState> {
    let alg = |a: Algorithm| AoSettings {
        algorithm: a,
        ..base.clone()
    };
    match scheme {
        Scheme::SdrFull => run_algorithm(ch, budget, sigma2, &alg(Algorithm::SdrFull)),
        Scheme::LowSnrClosed => run_algorithm(ch, budget, sigma2, &alg(Algorithm::LowSnrClosed)),
        Scheme::HighSnrEqual => run_algorithm(ch, budget, sigma2, &alg(Algorithm::HighSnrEqual)),
        Scheme::HighSnrWaterfill => run_algorithm(ch, budget, sigma2, &alg(Algorithm::HighSnrWaterfill)),
        Scheme::DpIrsNormalized => run_algorithm(
            ch,
            budget,
            sigma2,
            &AoSettings {
                irs_amplitude: DP_NORMALIZATION,
                ..alg(Algorithm::SdrFull)
            },
        ),
        Scheme::NoIrs => run_baseline(ch, budget, sigma2, Baseline::NoIrs, base),
        Scheme::RandomPhases => run_baseline(ch, budget, sigma2, Baseline::RandomPhases, base),
        Scheme::RandomIrsOptRx => run_baseline(ch, budget, sigma2, Baseline::RandomIrsOptRx, base),
        Scheme::SIrs => run_baseline(ch, budget, sigma2, Baseline::SIrs, base),
    }
}

fn run_task(spec: &ExperimentSpec, i: usize, r: usize) -> Result<Vec<RunRecord>> {
    let value = spec.sweep_values[i];
    let p = spec.fixed.at(spec.sweep_axis, value)?;
    let mut rng = seeded_rng(substream_seed(spec.master_seed, &[i as u64, r as u64]));
    let ch = draw_channels(
        &mut rng,
        &p.geometry,
        &p.pathloss,
        &RicianSpec::from_db(p.chi_db),
        p.n,
        p.nt,
        p.nr,
    )?;
    let hash = ch.fingerprint();
    let settings = AoSettings {
        seed: substream_seed(spec.master_seed, &[i as u64, r as u64, 1]),
        ..spec.ao.clone()
    };
    let budget = p.link.precoder_budget_mw();
    let sigma2 = p.link.sigma2_mw();
    Ok(spec
        .schemes
        .iter()
        .map(|&scheme| {
            let t = Instant::now();
            let out = run_scheme(scheme, &ch, budget, sigma2, &settings);
            let runtime_ms = t.elapsed().as_secs_f64() * 1e3;
            let base = RunRecord {
                sweep_index: i,
                sweep_value: value,
                realization: r,
                scheme,
                channel_hash: hash,
                se: f64::NAN,
                first_iteration_se: f64::NAN,
                iterations: 0,
                runtime_ms,
                history: Vec::new(),
                failure: None,
            };
            match out {
                Ok(st) => RunRecord {
                    se: st.se(),
                    first_iteration_se: st.first_iteration_se(),
                    iterations: st.iteration,
                    history: st.objective_history.clone(),
                    failure: st.failure.clone(),
                    ..base
                },
                Err(e) => RunRecord {
                    failure: Some(e.to_string()),
                    ..base
                },
            }
        })
        .collect())
}

/// Runs every (sweep value, realization) pair and returns the aggregated
/// table with the per-run records in sweep/realization/scheme order.
pub fn run_experiment_detailed(spec: &ExperimentSpec) -> Result<(ResultTable, Vec<RunRecord>)> {
    spec.validate()?;
    let tasks: Vec<(usize, usize)> = (0..spec.sweep_values.len())
        .flat_map(|i| (0..spec.realizations).map(move |r| (i, r)))
        .collect();
    let slots: Vec<Mutex<Option<Result<Vec<RunRecord>>>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = spec.workers.clamp(1, tasks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, r)) = tasks.get(k) else { break };
                let out = run_task(spec, i, r);
                *slots[k].lock().expect("result slot poisoned") = Some(out);
            });
        }
    });
    let mut records = Vec::with_capacity(tasks.len() * spec.schemes.len());
    for slot in slots {
        let out = slot.into_inner().expect("result slot poisoned").expect("every task ran");
        records.extend(out?);
    }
    Ok((aggregate(spec, &records), records))
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable> {
    Ok(run_experiment_detailed(spec)?.0)
}

fn aggregate(spec: &ExperimentSpec, records: &[RunRecord]) -> ResultTable {
    let mut rows = Vec::new();
    for (i, &value) in spec.sweep_values.iter().enumerate() {
        for &scheme in &spec.schemes {
            let ok: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.sweep_index == i && r.scheme == scheme && r.se.is_finite())
                .collect();
            let total = records
                .iter()
                .filter(|r| r.sweep_index == i && r.scheme == scheme)
                .count();
            let se: Vec<f64> = ok.iter().map(|r| r.se).collect();
            let (mean_se, std_se) = mean_std(&se);
            let k = ok.len().max(1) as f64;
            rows.push(ResultRow {
                sweep_value: value,
                scheme: scheme.name().to_string(),
                mean_se,
                std_se,
                mean_iters: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / k,
                mean_runtime_ms: ok.iter().map(|r| r.runtime_ms).sum::<f64>() / k,
                failures: total - ok.len(),
            });
        }
    }
    ResultTable { rows }
}

pub const CSV_HEADER: &str = "sweep_value,scheme,mean_se,std_se,mean_iters,mean_runtime_ms";

/// Six significant digits, plain decimal notation where reasonable.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(CSV_HEADER.split(',')).map_err(|e| csv_error(path, e))?;
    for r in &table.rows {
        w.write_record([
            format_sig(r.sweep_value),
            r.scheme.clone(),
            format_sig(r.mean_se),
            format_sig(r.std_se),
            format_sig(r.mean_iters),
            format_sig(r.mean_runtime_ms),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a file produced by [`write_csv`]. Failure counts are not stored and
/// come back as zero.
pub fn read_csv(path: &Path) -> Result<ResultTable> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse(format!("{}: unexpected CSV header", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let f = |k: usize| parse_num::<f64>("csv", &rec[k]);
        rows.push(ResultRow {
            sweep_value: f(0)?,
            scheme: rec[1].to_string(),
            mean_se: f(2)?,
            std_se: f(3)?,
            mean_iters: f(4)?,
            mean_runtime_ms: f(5)?,
            failures: 0,
        });
    }
    Ok(ResultTable { rows })
}
