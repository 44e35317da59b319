//! OFDM benchmark.
//!
//! The frequency response of subcarrier `k` is
//! `h^H[k] = K^{-1/2} sum_p h~_p^H exp(-j 2 pi k n_p / K)`. Per-subcarrier MRT
//! beams give the rate `log2(1 + K p_k ||h[k]||^2 / sigma^2)`, the phases
//! maximize the total channel energy (equal to the time-domain energy by
//! Parseval), and powers come from water-filling over a budget of `K P`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::dam::{cascaded_channels, complex_gaussian, PhaseConfig};
use crate::linalg::norm_sq;
use crate::mrt::coordinate_descent_phases_traced;
use crate::qam::Constellation;
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// OFDM frame parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmConfig {
    pub subcarriers: usize,
    pub cp_len: usize,
    /// Samples per channel coherence block.
    pub coherence_samples: usize,
}

impl OfdmConfig {
    /// Whole OFDM symbols per coherence block.
    pub fn symbols_per_block(&self) -> usize {
        self.coherence_samples / (self.subcarriers + self.cp_len)
    }

    /// `n_OFDM N_CP / n_c`.
    pub fn block_overhead(&self) -> f64 {
        (self.symbols_per_block() * self.cp_len) as f64 / self.coherence_samples as f64
    }

    /// `N_CP / (K + N_CP)`.
    pub fn symbol_overhead(&self) -> f64 {
        self.cp_len as f64 / (self.subcarriers + self.cp_len) as f64
    }
}

/// Column form `h[k]` of the per-subcarrier channel, `k = 0..K`.
pub fn freq_response(chan: &ChannelRealization, phases: &PhaseConfig, subcarriers: usize) -> Result<Vec<CVector>> {
    if chan.n_max() >= subcarriers {
        return Err(Error::Config(format!(
            "maximum delay {} needs more than {subcarriers} subcarriers",
            chan.n_max()
        )));
    }
    let cascaded = cascaded_channels(chan, phases);
    let norm = 1.0 / (subcarriers as f64).sqrt();
    Ok((0..subcarriers)
        .map(|k| {
            let mut acc = CVector::zeros(chan.n_tx());
            for (h, &n) in cascaded.iter().zip(&chan.delays) {
                let angle = 2.0 * PI * ((k * n) % subcarriers) as f64 / subcarriers as f64;
                acc.axpy(Complex64::from_polar(norm, angle), h, Complex64::new(1.0, 0.0));
            }
            acc
        })
        .collect())
}

/// Phases maximizing `||h0||^2 + sum_l ||G_l^H diag(h_l) v_l||^2`, which is
/// the MRT phase problem.
pub fn ofdm_phase_optimize(chan: &ChannelRealization, tol: f64) -> PhaseConfig {
    let init = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
    coordinate_descent_phases_traced(chan, &init, tol, 50).0
}

/// `g_k = K ||h[k]||^2 / sigma^2`.
pub fn subcarrier_gains(responses: &[CVector], noise_power: f64) -> Vec<f64> {
    let k = responses.len() as f64;
    responses.iter().map(|h| k * norm_sq(h) / noise_power).collect()
}

/// `p_k = max(0, nu - 1/g_k)` with `sum_k p_k = total`.
///
/// The water level is bracketed and then located by bisection; a final
/// rescaling of the active set removes the residual mismatch.
pub fn water_filling(gains: &[f64], total: f64) -> Result<Vec<f64>> {
    if gains.iter().any(|&g| g < 0.0 || g.is_nan()) {
        return Err(Error::Domain("gains must be non-negative".into()));
    }
    if !gains.iter().any(|&g| g > 0.0) {
        return Err(Error::Degenerate("all subcarrier gains are zero".into()));
    }
    let alloc = |nu: f64| -> Vec<f64> {
        gains
            .iter()
            .map(|&g| if g > 0.0 { (nu - 1.0 / g).max(0.0) } else { 0.0 })
            .collect()
    };
    let used = |nu: f64| -> f64 { alloc(nu).iter().sum() };
    let floor = gains.iter().filter(|&&g| g > 0.0).map(|&g| 1.0 / g).fold(f64::INFINITY, f64::min);
    let mut lo = floor;
    let mut hi = floor + total;
    while used(hi) < total {
        hi = floor + 2.0 * (hi - floor);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let mut p = alloc(hi);
    let sum: f64 = p.iter().sum();
    if sum > 0.0 {
        for x in &mut p {
            *x *= total / sum;
        }
    }
    Ok(p)
}

/// `R = sum_k log2(1 + K p_k ||h[k]||^2 / sigma^2) / (K + N_CP)`.
pub fn ofdm_spectral_efficiency(responses: &[CVector], powers: &[f64], noise_power: f64, cp_len: usize) -> f64 {
    let k = responses.len();
    subcarrier_gains(responses, noise_power)
        .iter()
        .zip(powers)
        .map(|(g, p)| (1.0 + g * p).log2())
        .sum::<f64>()
        / (k + cp_len) as f64
}

/// Per-subcarrier detection SNR `K^2 p_k ||h[k]||^2 / ((K + N_CP) sigma^2)`;
/// the CP takes its share `N_CP / (K + N_CP)` of the transmit energy.
pub fn subcarrier_snrs(responses: &[CVector], powers: &[f64], noise_power: f64, cp_len: usize) -> Vec<f64> {
    let k = responses.len() as f64;
    responses
        .iter()
        .zip(powers)
        .map(|(h, p)| k * k * p * norm_sq(h) / ((k + cp_len as f64) * noise_power))
        .collect()
}

/// Mean AWGN BER over subcarriers at [`subcarrier_snrs`].
pub fn ofdm_ber(responses: &[CVector], powers: &[f64], noise_power: f64, cp_len: usize, qam_order: usize) -> Result<f64> {
    let c = Constellation::new(qam_order)?;
    let snrs = subcarrier_snrs(responses, powers, noise_power, cp_len);
    Ok(snrs.iter().map(|&g| c.ber(g)).sum::<f64>() / snrs.len() as f64)
}

/// Per-subcarrier MRT beams `u_k = sqrt(p_k) h[k] / ||h[k]||`.
pub fn ofdm_beams(responses: &[CVector], powers: &[f64]) -> Vec<CVector> {
    responses
        .iter()
        .zip(powers)
        .map(|(h, &p)| {
            let n = h.norm();
            if n == 0.0 || p == 0.0 {
                CVector::zeros(h.len())
            } else {
                h * Complex64::new(p.sqrt() / n, 0.0)
            }
        })
        .collect()
}

/// Time-domain OFDM waveform.
///
/// `symbols[t][k]` is the data symbol on subcarrier `k` of OFDM symbol `t`.
/// Each antenna's frequency-domain samples `u_k s_k` go through a unitary
/// inverse DFT, and the last `cp_len` samples are prepended.
pub fn ofdm_waveform(symbols: &[Vec<Complex64>], beams: &[CVector], cp_len: usize) -> CMatrix {
    let k = beams.len();
    let n_tx = beams.first().map_or(0, |b| b.len());
    let sym_len = k + cp_len;
    let mut out = CMatrix::zeros(n_tx, symbols.len() * sym_len);
    let mut planner = FftPlanner::<f64>::new();
    let ifft = planner.plan_fft_inverse(k);
    let norm = 1.0 / (k as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); k];
    for (t, s) in symbols.iter().enumerate() {
        for a in 0..n_tx {
            for (kk, slot) in buf.iter_mut().enumerate() {
                *slot = beams[kk][a] * s[kk];
            }
            ifft.process(&mut buf);
            let base = t * sym_len;
            for n in 0..k {
                out[(a, base + cp_len + n)] = buf[n] * norm;
            }
            for n in 0..cp_len {
                out[(a, base + n)] = buf[k - cp_len + n] * norm;
            }
        }
    }
    out
}

/// Complete OFDM design for one channel: phases, responses, water-filling.
#[derive(Debug, Clone)]
pub struct OfdmDesign {
    pub phases: PhaseConfig,
    pub responses: Vec<CVector>,
    pub powers: Vec<f64>,
}

pub fn ofdm_design(chan: &ChannelRealization, power: f64, noise_power: f64, subcarriers: usize, tol: f64) -> Result<OfdmDesign> {
    let phases = ofdm_phase_optimize(chan, tol);
    let responses = freq_response(chan, &phases, subcarriers)?;
    let gains = subcarrier_gains(&responses, noise_power);
    let powers = water_filling(&gains, subcarriers as f64 * power)?;
    Ok(OfdmDesign { phases, responses, powers })
}

/// Bit errors of an end-to-end OFDM link simulation.
///
/// Random QAM symbols are precoded with [`ofdm_beams`], modulated with
/// [`ofdm_waveform`] and scaled by `sqrt(K / (K + N_CP))` so that one OFDM
/// symbol, CP included, carries the energy `K P`. The tapped-delay
/// channel and noise of variance `sigma^2` are applied, and each subcarrier is
/// equalized by its known gain after CP removal and a unitary DFT. Returns
/// `(bit errors, bits)` over all subcarriers, loaded or not.
pub fn ofdm_monte_carlo_ber(
    chan: &ChannelRealization,
    design: &OfdmDesign,
    noise_power: f64,
    cp_len: usize,
    qam_order: usize,
    ofdm_symbols: usize,
    seed: u64,
) -> Result<(u64, u64)> {
    let k = design.responses.len();
    if cp_len < chan.n_max() {
        return Err(Error::Config("cyclic prefix shorter than the maximum delay".into()));
    }
    let c = Constellation::new(qam_order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beams = ofdm_beams(&design.responses, &design.powers);
    let cascaded = cascaded_channels(chan, &design.phases);
    let amp = (k as f64 / (k + cp_len) as f64).sqrt();
    let sym_len = k + cp_len;
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(k);
    let norm = 1.0 / (k as f64).sqrt();
    // effective per-subcarrier gain after the unitary DFT: sqrt(K) h^H[k] u_k
    let gains: Vec<Complex64> = design
        .responses
        .iter()
        .zip(&beams)
        .map(|(h, u)| h.dotc(u) * (k as f64).sqrt() * amp)
        .collect();

    let mut errors = 0u64;
    let mut bits = 0u64;
    // one symbol at a time; the CP absorbs the tail of the previous symbol
    for _ in 0..ofdm_symbols {
        let idx = c.random_indices(&mut rng, k);
        let data: Vec<Complex64> = idx.iter().map(|&i| c.points()[i]).collect();
        let x = ofdm_waveform(&[data], &beams, cp_len) * Complex64::new(amp, 0.0);
        let mut y = vec![Complex64::new(0.0, 0.0); sym_len];
        for (h, &d) in cascaded.iter().zip(&chan.delays) {
            let proj = x.tr_mul(&h.conjugate());
            for n in d..sym_len {
                y[n] += proj[n - d];
            }
        }
        let noise = complex_gaussian(&mut rng, k, noise_power);
        let mut body: Vec<Complex64> = (0..k).map(|n| y[cp_len + n] + noise[n]).collect();
        fft.process(&mut body);
        for kk in 0..k {
            // an unloaded subcarrier is still scored, against a fixed guess
            let z = if gains[kk].norm() == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                body[kk] * norm / gains[kk]
            };
            errors += c.bit_errors(idx[kk], c.detect(z)) as u64;
            bits += c.bits_per_symbol() as u64;
        }
    }
    Ok((errors, bits))
}
