//! Configuration-driven experiments producing CSV tables.
//!
//! A configuration is a flat TOML file. Keys carry their unit in the name
//! (`bandwidth_hz`, `power_dbm`, ...) and every key is optional; missing keys
//! take the values of [`default_paper_config`].
//!
//! Columns per sweep kind:
//!
//! | sweep | columns |
//! |---|---|
//! | `antennas`, `elements`, `power` | `<value>, scheme, se_mean, se_stderr, ber_mean, runs, failures, reason` |
//! | `convergence` | `run, scheme, series, iteration, value` |
//! | `papr` | `threshold_db, scheme, ccdf, windows` |
//!
//! `<value>` is `n_tx`, `elements` or `power_dbm`. `ber_mean` is filled for
//! `zf` and `ofdm` only. Realizations failing a scheme (for instance ZF with
//! too few antennas) are counted in `failures` and excluded from the means.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::asymptotic::asymptotic_snr;
use crate::channel::{sample_channel, PathLossModel, Scenario};
use crate::dam::{synthesize_transmit, BeamformerSet, PhaseConfig};
use crate::metrics::{ber_dam_zf, dam_spectral_efficiency, papr_values};
use crate::mmse::mmse_alternating;
use crate::mrt::{coordinate_descent_phases_traced, mrt_design};
use crate::ofdm::{ofdm_beams, ofdm_ber, ofdm_design, ofdm_spectral_efficiency, ofdm_waveform};
use crate::qam::Constellation;
use crate::zf::{zf_alternating, ZfOptions};
use crate::{db_to_linear, dam::sinr_closed_form, dbm_to_watts, ChannelRealization, Complex64, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Antennas,
    Elements,
    Power,
    Papr,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Zf,
    Mrt,
    Mmse,
    Ofdm,
    Asymptotic,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Zf => "zf",
            Scheme::Mrt => "mrt",
            Scheme::Mmse => "mmse",
            Scheme::Ofdm => "ofdm",
            Scheme::Asymptotic => "asymptotic",
        }
    }
}

/// Carrier wavelength path loss at 1 m, `(lambda / 4 pi)^2`, in dB.
fn free_space_c0_db() -> f64 {
    let lambda = crate::SPEED_OF_LIGHT / 28e9;
    20.0 * (lambda / (4.0 * std::f64::consts::PI)).log10()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sweep: SweepKind,
    pub sweep_values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub monte_carlo_runs: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,

    pub bs_position_m: [f64; 3],
    pub user_position_m: [f64; 3],
    pub irs_positions_m: Vec<[f64; 3]>,
    pub n_tx: usize,
    pub irs_horizontal: usize,
    pub irs_vertical: usize,
    pub element_spacing_wavelengths: f64,
    pub bandwidth_hz: f64,
    pub power_dbm: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub coherence_time_s: f64,
    /// `inf` gives a pure LoS direct link.
    pub rician_factor_db: f64,
    pub path_loss_c0_db: f64,
    pub path_loss_d0_m: f64,
    pub exponent_direct: f64,
    pub exponent_bs_irs: f64,
    pub exponent_irs_user: f64,
    pub subcarriers: usize,
    /// CP length, also used as the maximum-delay bound of the DAM guard.
    pub cp_len: usize,
    pub qam_order: usize,

    /// Fractional-change stopping rule of the iterative designs.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// PAPR windows per scheme, counted over antennas and runs.
    pub papr_windows: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        default_paper_config()
    }
}

/// The simulation setup of the reference system: a 28 GHz link with four
/// IRSs, 64 BS antennas, 8 x 8 IRSs and 30 dBm, sweeping `N_t`.
pub fn default_paper_config() -> ExperimentConfig {
    ExperimentConfig {
        sweep: SweepKind::Antennas,
        sweep_values: vec![8.0, 16.0, 32.0, 64.0, 128.0],
        schemes: vec![Scheme::Zf, Scheme::Mrt, Scheme::Mmse, Scheme::Ofdm],
        monte_carlo_runs: 20,
        seed: 1,
        output: None,
        bs_position_m: [0.0, 0.0, 0.0],
        user_position_m: [100.0, 0.0, 0.0],
        irs_positions_m: vec![[5.0, 5.0, 0.0], [5.0, -10.0, 0.0], [50.0, 75.0, 0.0], [90.0, -15.0, 0.0]],
        n_tx: 64,
        irs_horizontal: 8,
        irs_vertical: 8,
        element_spacing_wavelengths: 0.5,
        bandwidth_hz: 128e6,
        power_dbm: 30.0,
        noise_psd_dbm_per_hz: -174.0,
        coherence_time_s: 1e-3,
        rician_factor_db: 5.0,
        path_loss_c0_db: free_space_c0_db(),
        path_loss_d0_m: 1.0,
        exponent_direct: 3.5,
        exponent_bs_irs: 2.0,
        exponent_irs_user: 2.0,
        subcarriers: 512,
        cp_len: 77,
        qam_order: 256,
        tolerance: 1e-3,
        max_iterations: 30,
        papr_windows: 10_000,
    }
}

/// Scenario of the default configuration.
pub fn reference_scenario() -> Scenario {
    default_paper_config().scenario().expect("default configuration is valid")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// Parses without [`validate`](Self::validate), for callers that still
    /// override fields.
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.monte_carlo_runs == 0 {
            return Err(Error::Config("monte_carlo_runs must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        if self.sweep != SweepKind::Convergence && self.sweep_values.is_empty() {
            return Err(Error::Config("sweep_values must not be empty".into()));
        }
        if self.sweep_values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("sweep_values must be strictly increasing".into()));
        }
        match self.sweep {
            SweepKind::Antennas | SweepKind::Elements => {
                if self.sweep_values.iter().any(|&v| v < 1.0 || v.fract() != 0.0) {
                    return Err(Error::Config("sweep_values must be positive integers".into()));
                }
                if self.sweep == SweepKind::Elements
                    && self.sweep_values.iter().any(|&v| !(v as usize).is_multiple_of(self.irs_horizontal.max(1)))
                {
                    return Err(Error::Config(format!(
                        "element counts must be multiples of irs_horizontal = {}",
                        self.irs_horizontal
                    )));
                }
            }
            SweepKind::Papr if self.schemes.contains(&Scheme::Asymptotic) => {
                return Err(Error::Config("the asymptotic scheme has no waveform".into()));
            }
            _ => {}
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Config("tolerance must be positive and max_iterations at least 1".into()));
        }
        Constellation::new(self.qam_order)?;
        let sc = self.scenario()?;
        let n_c = sc.coherence_samples();
        if n_c <= 2 * self.cp_len {
            return Err(Error::Config("coherence block shorter than the DAM guard".into()));
        }
        Ok(())
    }

    /// Scenario described by the configuration (before any sweep override).
    pub fn scenario(&self) -> Result<Scenario> {
        let sc = Scenario {
            bs_position: self.bs_position_m,
            user_position: self.user_position_m,
            irs_positions: self.irs_positions_m.clone(),
            n_tx: self.n_tx,
            irs_horizontal: self.irs_horizontal,
            irs_vertical: self.irs_vertical,
            element_spacing: self.element_spacing_wavelengths,
            bandwidth_hz: self.bandwidth_hz,
            power_w: dbm_to_watts(self.power_dbm),
            noise_psd_w_per_hz: dbm_to_watts(self.noise_psd_dbm_per_hz),
            coherence_time_s: self.coherence_time_s,
            rician_factor: db_to_linear(self.rician_factor_db),
            path_loss: PathLossModel {
                c0: db_to_linear(self.path_loss_c0_db),
                d0: self.path_loss_d0_m,
                exponent_direct: self.exponent_direct,
                exponent_bs_irs: self.exponent_bs_irs,
                exponent_irs_user: self.exponent_irs_user,
            },
            subcarriers: self.subcarriers,
            cp_len: self.cp_len,
            qam_order: self.qam_order,
            seed: self.seed,
        };
        sc.validate()?;
        Ok(sc)
    }

    fn scenario_at(&self, value: f64) -> Result<Scenario> {
        let mut sc = self.scenario()?;
        match self.sweep {
            SweepKind::Antennas => sc.n_tx = value as usize,
            SweepKind::Elements => sc.irs_vertical = value as usize / sc.irs_horizontal,
            SweepKind::Power => sc.power_w = dbm_to_watts(value),
            SweepKind::Papr | SweepKind::Convergence => {}
        }
        Ok(sc)
    }

    fn zf_options(&self) -> ZfOptions {
        ZfOptions {
            tol: self.tolerance,
            max_iters: self.max_iterations,
            ..ZfOptions::default()
        }
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the channel realization of run `run`; shared by all sweep points.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    split_seed(seed, run as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// `%g`-style formatting with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.5e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let mut s = format!("{x:.decimals$}");
        if s.contains('.') {
            s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        }
        s
    } else {
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{exp}")
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Num(x) => format_sig6(*x),
        Cell::Int(k) => k.to_string(),
        Cell::Text(s) => s.clone(),
        Cell::Empty => String::new(),
    }
}

/// Writes the table as CSV (header row first, LF line endings).
pub fn emit_csv(table: &ResultTable, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(cell_text))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-scheme outcome of one realization at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok { se: f64, ber: Option<f64> },
    Failed(String),
}

/// Evaluates every scheme on one channel realization.
///
/// MRT phases are shared: MMSE starts its alternation from them.
pub fn evaluate_schemes(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    chan: &ChannelRealization,
    schemes: &[Scheme],
) -> Vec<Outcome> {
    let power = sc.power_w;
    let noise = sc.noise_power();
    let n_c = sc.coherence_samples();
    let guard = cfg.cp_len.max(chan.n_max());
    let dam_se = |gamma: f64| dam_spectral_efficiency(gamma, guard, n_c);
    let mrt = mrt_design(chan, power, cfg.tolerance);

    schemes
        .iter()
        .map(|&scheme| {
            let r: Result<(f64, Option<f64>)> = match scheme {
                Scheme::Zf => zf_alternating(
                    chan,
                    &PhaseConfig::unit(chan.num_irs(), chan.irs_elements()),
                    power,
                    noise,
                    &cfg.zf_options(),
                )
                .and_then(|sol| Ok((dam_se(sol.snr)?, Some(ber_dam_zf(&sol, cfg.qam_order)?)))),
                Scheme::Mrt => mrt
                    .as_ref()
                    .map_err(|e| Error::Degenerate(e.to_string()))
                    .and_then(|m| Ok((dam_se(sinr_closed_form(chan, &m.phases, &m.beams, noise))?, None))),
                Scheme::Mmse => mrt
                    .as_ref()
                    .map_err(|e| Error::Degenerate(e.to_string()))
                    .and_then(|m| mmse_alternating(chan, &m.phases, power, noise, cfg.tolerance, cfg.max_iterations))
                    .and_then(|sol| Ok((dam_se(sol.sinr)?, None))),
                Scheme::Ofdm => ofdm_design(chan, power, noise, sc.subcarriers, cfg.tolerance).and_then(|d| {
                    let se = ofdm_spectral_efficiency(&d.responses, &d.powers, noise, sc.cp_len);
                    let ber = ofdm_ber(&d.responses, &d.powers, noise, sc.cp_len, cfg.qam_order)?;
                    Ok((se, Some(ber)))
                }),
                Scheme::Asymptotic => asymptotic_snr(chan, power, noise).and_then(|g| Ok((dam_se(g)?, None))),
            };
            match r {
                Ok((se, ber)) => Outcome::Ok { se, ber },
                Err(e) => Outcome::Failed(e.to_string()),
            }
        })
        .collect()
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let value_col = match cfg.sweep {
        SweepKind::Antennas => "n_tx",
        SweepKind::Elements => "elements",
        _ => "power_dbm",
    };
    let mut table = ResultTable::new(&[value_col, "scheme", "se_mean", "se_stderr", "ber_mean", "runs", "failures", "reason"]);
    for &value in &cfg.sweep_values {
        let sc = cfg.scenario_at(value)?;
        info!("{value_col} = {value}");
        let per_run: Vec<Result<Vec<Outcome>>> = (0..cfg.monte_carlo_runs)
            .into_par_iter()
            .map(|run| {
                let chan = sample_channel(&sc, run_seed(cfg.seed, run))?;
                Ok(evaluate_schemes(cfg, &sc, &chan, &cfg.schemes))
            })
            .collect();
        let per_run = per_run.into_iter().collect::<Result<Vec<_>>>()?;
        for (s, &scheme) in cfg.schemes.iter().enumerate() {
            let mut se = Vec::new();
            let mut ber = Vec::new();
            let mut reason = String::new();
            for outcomes in &per_run {
                match &outcomes[s] {
                    Outcome::Ok { se: x, ber: b } => {
                        se.push(*x);
                        ber.extend(b);
                    }
                    Outcome::Failed(why) => {
                        if reason.is_empty() {
                            reason = why.clone();
                        }
                    }
                }
            }
            let failures = per_run.len() - se.len();
            let (m, e) = if se.is_empty() { (f64::NAN, f64::NAN) } else { mean_and_stderr(&se) };
            table.rows.push(vec![
                Cell::Num(value),
                Cell::Text(scheme.name().into()),
                if se.is_empty() { Cell::Empty } else { Cell::Num(m) },
                if se.is_empty() { Cell::Empty } else { Cell::Num(e) },
                if ber.is_empty() { Cell::Empty } else { Cell::Num(ber.iter().sum::<f64>() / ber.len() as f64) },
                Cell::Int(se.len() as u64),
                Cell::Int(failures as u64),
                Cell::Text(reason),
            ]);
        }
    }
    Ok(table)
}

fn run_convergence(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let sc = cfg.scenario()?;
    let power = sc.power_w;
    let noise = sc.noise_power();
    let per_run: Vec<Result<Vec<Vec<Cell>>>> = (0..cfg.monte_carlo_runs)
        .into_par_iter()
        .map(|run| {
            let chan = sample_channel(&sc, run_seed(cfg.seed, run))?;
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let mut rows = Vec::new();
            let mut push = |scheme: &str, series: String, values: &[f64]| {
                for (it, &v) in values.iter().enumerate() {
                    rows.push(vec![
                        Cell::Int(run as u64),
                        Cell::Text(scheme.into()),
                        Cell::Text(series.clone()),
                        Cell::Int(it as u64),
                        Cell::Num(v),
                    ]);
                }
            };
            for &scheme in &cfg.schemes {
                match scheme {
                    Scheme::Zf => {
                        let sol = zf_alternating(&chan, &unit, power, noise, &cfg.zf_options())?;
                        push("zf", "relaxed_snr".into(), &sol.trace);
                    }
                    Scheme::Mrt => {
                        let (_, trace) = coordinate_descent_phases_traced(&chan, &unit, cfg.tolerance, cfg.max_iterations);
                        for (l, sweeps) in trace.sweeps.iter().enumerate() {
                            let watts: Vec<f64> = sweeps.iter().map(|p| p * power).collect();
                            push("mrt", format!("irs{}_signal_power_w", l + 1), &watts);
                        }
                    }
                    Scheme::Mmse => {
                        let sol = mmse_alternating(&chan, &unit, power, noise, cfg.tolerance, cfg.max_iterations)?;
                        let after: Vec<f64> = sol.trace.iter().map(|t| t.after_beam_step).collect();
                        push("mmse", "sinr".into(), &after);
                    }
                    Scheme::Ofdm | Scheme::Asymptotic => {}
                }
            }
            Ok(rows)
        })
        .collect();
    let mut table = ResultTable::new(&["run", "scheme", "series", "iteration", "value"]);
    for rows in per_run {
        table.rows.extend(rows?);
    }
    Ok(table)
}

/// DAM waveform of `windows * window` samples at steady state: the ramp
/// where not every path is active yet is cut off.
pub fn dam_papr_waveform(
    beams: &BeamformerSet,
    constellation: &Constellation,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> crate::CMatrix {
    let lead = beams.kappa.iter().copied().max().unwrap_or(0);
    let idx = constellation.random_indices(rng, samples + lead);
    let symbols: Vec<Complex64> = idx.iter().map(|&i| constellation.points()[i]).collect();
    let x = synthesize_transmit(&symbols, beams);
    x.columns(lead, samples).into_owned()
}

/// PAPR values (linear) of one scheme on one realization.
pub fn scheme_paprs(
    scheme: Scheme,
    sc: &Scenario,
    chan: &ChannelRealization,
    cfg: &ExperimentConfig,
    time_windows: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let power = sc.power_w;
    let noise = sc.noise_power();
    let window = sc.subcarriers + sc.cp_len;
    let c = Constellation::new(cfg.qam_order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beams = match scheme {
        Scheme::Zf => {
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            zf_alternating(chan, &unit, power, noise, &cfg.zf_options())?.beams
        }
        Scheme::Mrt => mrt_design(chan, power, cfg.tolerance)?.beams,
        Scheme::Mmse => {
            let start = mrt_design(chan, power, cfg.tolerance)?.phases;
            mmse_alternating(chan, &start, power, noise, cfg.tolerance, cfg.max_iterations)?.beams
        }
        Scheme::Ofdm => {
            let d = ofdm_design(chan, power, noise, sc.subcarriers, cfg.tolerance)?;
            let u = ofdm_beams(&d.responses, &d.powers);
            let symbols: Vec<Vec<Complex64>> = (0..time_windows)
                .map(|_| c.random_indices(&mut rng, sc.subcarriers).iter().map(|&i| c.points()[i]).collect())
                .collect();
            return papr_values(&ofdm_waveform(&symbols, &u, sc.cp_len), window);
        }
        Scheme::Asymptotic => return Err(Error::Unsupported("no waveform for the asymptotic scheme".into())),
    };
    papr_values(&dam_papr_waveform(&beams, &c, time_windows * window, &mut rng), window)
}

fn run_papr(cfg: &ExperimentConfig) -> Result<ResultTable> {
    let sc = cfg.scenario()?;
    let runs = cfg.monte_carlo_runs;
    let time_windows = cfg.papr_windows.div_ceil(runs * sc.n_tx).max(1);
    let mut table = ResultTable::new(&["threshold_db", "scheme", "ccdf", "windows"]);
    for &scheme in &cfg.schemes {
        let per_run: Vec<Result<Vec<f64>>> = (0..runs)
            .into_par_iter()
            .map(|run| {
                let seed = run_seed(cfg.seed, run);
                let chan = sample_channel(&sc, seed)?;
                scheme_paprs(scheme, &sc, &chan, cfg, time_windows, split_seed(seed, 0x9a9f))
            })
            .collect();
        let mut all = Vec::new();
        for v in per_run {
            all.extend(v?);
        }
        for (t, p) in crate::metrics::ccdf(&all, &cfg.sweep_values) {
            table.rows.push(vec![
                Cell::Num(t),
                Cell::Text(scheme.name().into()),
                Cell::Num(p),
                Cell::Int(all.len() as u64),
            ]);
        }
    }
    Ok(table)
}

/// Runs the configured experiment. Deterministic for a given configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    match cfg.sweep {
        SweepKind::Antennas | SweepKind::Elements | SweepKind::Power => run_sweep(cfg),
        SweepKind::Convergence => run_convergence(cfg),
        SweepKind::Papr => run_papr(cfg),
    }
}

/// Human-readable summary of a table, one line per row.
pub fn render(table: &ResultTable) -> String {
    let mut out = table.columns.join("\t");
    out.push('\n');
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(cell_text).collect();
        let _ = writeln!(out, "{}", line.join("\t"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_derived_quantities() {
        let sc = reference_scenario();
        assert_eq!(sc.coherence_samples(), 128_000);
        assert_eq!(sc.coherence_samples() / (sc.subcarriers + sc.cp_len), 217);
        assert_eq!(crate::channel::path_delays(&sc), vec![43, 44, 46, 77, 47]);
        assert!((default_paper_config().path_loss_c0_db + 61.38).abs() < 0.01);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(1.0), "1");
        assert_eq!(format_sig6(123456.7), "123457");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(0.000123456789), "0.000123457");
        assert_eq!(format_sig6(1.5e-7), "1.5e-7");
        assert_eq!(format_sig6(-2.5), "-2.5");
        for x in [3.14159265, 2.718281828e-9, 6.02214076e23, 0.1] {
            let back: f64 = format_sig6(x).parse().unwrap();
            assert!((back / x - 1.0).abs() < 5e-6);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(ExperimentConfig::from_toml_str("bandwidth = 1.0"), Err(Error::Parse(_))));
    }

    #[test]
    fn partial_config_takes_defaults() {
        let cfg = ExperimentConfig::from_toml_str("sweep = \"power\"\nsweep_values = [30, 35]\npower_dbm = 40").unwrap();
        assert_eq!(cfg.sweep, SweepKind::Power);
        assert_eq!(cfg.n_tx, 64);
        assert_eq!(cfg.power_dbm, 40.0);
    }

    #[test]
    fn validation_errors() {
        for text in [
            "monte_carlo_runs = 0",
            "sweep_values = [16, 8]",
            "sweep = \"elements\"\nsweep_values = [60]",
            "qam_order = 32",
            "n_tx = 0",
        ] {
            assert!(ExperimentConfig::from_toml_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn split_seeds_differ() {
        assert_ne!(split_seed(1, 0), split_seed(1, 1));
        assert_ne!(split_seed(1, 0), split_seed(2, 0));
        assert_eq!(split_seed(7, 3), split_seed(7, 3));
    }
}
