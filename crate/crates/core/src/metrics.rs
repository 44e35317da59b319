//! Spectral efficiency, BER and PAPR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::ChannelRealization;
use crate::dam::{cascaded_channels, complex_gaussian, desired_gain, propagate, synthesize_transmit, BeamformerSet, PhaseConfig};
use crate::qam::Constellation;
use crate::zf::ZfSolution;
use crate::{CMatrix, Complex64, Error, Result};

pub use crate::qam::ber_awgn;

/// Guard overhead `2 n_max / n_c` of one DAM coherence block.
pub fn dam_overhead(n_max: usize, coherence_samples: usize) -> Result<f64> {
    if coherence_samples <= 2 * n_max {
        return Err(Error::Config(format!(
            "coherence block of {coherence_samples} samples cannot hold a guard of {}",
            2 * n_max
        )));
    }
    Ok(2.0 * n_max as f64 / coherence_samples as f64)
}

/// `R = (n_c - 2 n_max) / n_c log2(1 + gamma)`.
pub fn dam_spectral_efficiency(gamma: f64, n_max: usize, coherence_samples: usize) -> Result<f64> {
    let overhead = dam_overhead(n_max, coherence_samples)?;
    Ok((1.0 - overhead) * (1.0 + gamma).log2())
}

/// DAM BER with ZF beams: the AWGN BER at the ZF SNR.
pub fn ber_dam_zf(solution: &ZfSolution, qam_order: usize) -> Result<f64> {
    ber_awgn(solution.snr, qam_order)
}

/// End-to-end DAM link simulation: random QAM symbols are precoded with the
/// path beams, sent through the tapped-delay channel, sampled at lag `n_max`,
/// scaled by the known desired gain and detected. Returns `(bit errors, bits)`.
///
/// The stream is processed in blocks; each block re-sends the last `n_span`
/// symbols of the previous one so that every scored sample sees its full
/// interference neighbourhood.
pub fn dam_monte_carlo_ber(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise_power: f64,
    qam_order: usize,
    n_symbols: usize,
    seed: u64,
) -> Result<(u64, u64)> {
    const BLOCK: usize = 8192;
    let c = Constellation::new(qam_order)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cascaded = cascaded_channels(chan, phases);
    let gain = desired_gain(&cascaded, beams);
    if gain.norm() == 0.0 {
        return Err(Error::Degenerate("zero desired gain".into()));
    }
    let span = chan.n_span();
    let n_max = chan.n_max();
    let mut history = c.random_indices(&mut rng, span);
    let mut errors = 0u64;
    let mut done = 0;
    while done < n_symbols {
        let count = BLOCK.min(n_symbols - done);
        // [history | scored | lookahead]
        let mut idx = history.clone();
        idx.extend(c.random_indices(&mut rng, count + span));
        let symbols: Vec<Complex64> = idx.iter().map(|&i| c.points()[i]).collect();
        let noise = complex_gaussian(&mut rng, count, noise_power);
        let y = propagate(&cascaded, &chan.delays, &synthesize_transmit(&symbols, beams));
        for j in 0..count {
            let k = span + j;
            let z = (y[k + n_max] + noise[j]) / gain;
            errors += c.bit_errors(idx[k], c.detect(z)) as u64;
        }
        // the lookahead symbols are redrawn next block; only the history carries over
        history = idx[count..count + span].to_vec();
        done += count;
    }
    Ok((errors, n_symbols as u64 * c.bits_per_symbol() as u64))
}

/// Per-antenna, per-window PAPR in linear scale.
///
/// The waveform is cut into consecutive windows of `window` samples (a
/// trailing partial window is dropped) and every antenna row gives one value
/// `max |x|^2 / mean |x|^2` per window. Windows with zero power are skipped.
pub fn papr_values(waveform: &CMatrix, window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Domain("PAPR window must be positive".into()));
    }
    if waveform.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Degenerate("zero-power waveform".into()));
    }
    let windows = waveform.ncols() / window;
    let mut out = Vec::with_capacity(windows * waveform.nrows());
    for a in 0..waveform.nrows() {
        for w in 0..windows {
            let mut peak: f64 = 0.0;
            let mut sum = 0.0;
            for n in w * window..(w + 1) * window {
                let p = waveform[(a, n)].norm_sqr();
                peak = peak.max(p);
                sum += p;
            }
            if sum > 0.0 {
                out.push(peak * window as f64 / sum);
            }
        }
    }
    Ok(out)
}

/// Fraction of PAPR values above each threshold (in dB).
pub fn ccdf(paprs: &[f64], thresholds_db: &[f64]) -> Vec<(f64, f64)> {
    let mut db: Vec<f64> = paprs.iter().map(|&p| crate::linear_to_db(p)).collect();
    db.sort_by(f64::total_cmp);
    let n = db.len().max(1) as f64;
    thresholds_db
        .iter()
        .map(|&t| {
            let at_or_below = db.partition_point(|&x| x <= t);
            (t, (db.len() - at_or_below) as f64 / n)
        })
        .collect()
}

/// PAPR CCDF of a waveform over `window`-sample windows, aggregated across
/// antennas.
pub fn papr_ccdf(waveform: &CMatrix, window: usize, thresholds_db: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(ccdf(&papr_values(waveform, window)?, thresholds_db))
}

/// Smallest PAPR (dB) whose empirical CCDF does not exceed `prob`.
pub fn papr_at_ccdf(paprs: &[f64], prob: f64) -> f64 {
    let mut db: Vec<f64> = paprs.iter().map(|&p| crate::linear_to_db(p)).collect();
    db.sort_by(f64::total_cmp);
    let allowed = (prob * db.len() as f64).floor() as usize;
    let idx = db.len().saturating_sub(allowed + 1);
    db[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dam_overhead_example() {
        let o = dam_overhead(77, 128_000).unwrap();
        assert_eq!(format!("{:.2}", 100.0 * o), "0.12");
        assert!(matches!(dam_overhead(5, 10), Err(Error::Config(_))));
    }

    #[test]
    fn se_limits() {
        assert_eq!(dam_spectral_efficiency(0.0, 10, 1000).unwrap(), 0.0);
        assert_eq!(dam_spectral_efficiency(3.0, 0, 1000).unwrap(), 2.0);
    }

    #[test]
    fn constant_envelope_has_zero_papr() {
        let x = CMatrix::from_fn(2, 40, |a, n| Complex64::from_polar(1.0 + a as f64, 0.3 * n as f64));
        let v = papr_values(&x, 10).unwrap();
        assert_eq!(v.len(), 8);
        assert!(v.iter().all(|p| (p - 1.0).abs() < 1e-12));
        let c = papr_ccdf(&x, 10, &[-0.1, 0.0, 0.1]).unwrap();
        assert_eq!(c[0].1, 1.0);
        assert_eq!(c[2].1, 0.0);
    }

    #[test]
    fn zero_waveform_is_rejected() {
        assert!(papr_values(&CMatrix::zeros(1, 10), 5).is_err());
    }

    #[test]
    fn single_spike() {
        let mut x = CMatrix::zeros(1, 4);
        x[(0, 2)] = Complex64::new(1.0, 0.0);
        let v = papr_values(&x, 4).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_of_ccdf() {
        let paprs: Vec<f64> = (1..=100).map(|k| crate::db_to_linear(k as f64 / 10.0)).collect();
        // one value in a hundred may exceed the answer
        let q = papr_at_ccdf(&paprs, 0.01);
        assert!((q - 9.9).abs() < 1e-9);
    }
}
