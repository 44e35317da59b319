//! DAM signal model.
//!
//! With per-path beams `f_p` and pre-compensation `kappa_p = n_max - n_p` the
//! BS sends `x[n] = sum_p f_p s[n - kappa_p]`. Every path `p` then delivers its
//! own stream at the common lag `n_max`, while the cross terms `(l, l')` land at
//! `n_max - (n_l' - n_l)` and are grouped by that delay difference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::ChannelRealization;
use crate::linalg::norm_sq;
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Per-IRS reflection vectors. The stored entries are `v_{l,m} = e^{-j theta_{l,m}}`,
/// so `h_l^H Theta_l G_l = v_l^H diag(h_l^H) G_l` with `Theta_l = diag(e^{j theta})`.
///
/// Unit modulus is required of every deployable configuration; relaxed
/// iterates inside the ZF solver may have `|v| < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub v: Vec<CVector>,
}

impl PhaseConfig {
    pub fn new(v: Vec<CVector>) -> Self {
        Self { v }
    }

    /// All reflection coefficients equal to one.
    pub fn unit(num_irs: usize, elements: usize) -> Self {
        Self {
            v: vec![CVector::from_element(elements, Complex64::new(1.0, 0.0)); num_irs],
        }
    }

    pub fn from_thetas(thetas: &[Vec<f64>]) -> Self {
        Self {
            v: thetas
                .iter()
                .map(|t| CVector::from_iterator(t.len(), t.iter().map(|&th| Complex64::from_polar(1.0, -th))))
                .collect(),
        }
    }

    /// Phase shifts `theta_{l,m} = -arg(v_{l,m})`.
    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.v.iter().map(|v| v.iter().map(|z| -z.arg()).collect()).collect()
    }

    pub fn num_irs(&self) -> usize {
        self.v.len()
    }

    pub fn elements(&self) -> usize {
        self.v.first().map_or(0, |v| v.len())
    }

    /// `[v_1; ...; v_L; 1]` of length `LM + 1`.
    pub fn stacked(&self) -> CVector {
        let m = self.elements();
        let mut out = CVector::zeros(self.num_irs() * m + 1);
        for (l, v) in self.v.iter().enumerate() {
            out.rows_mut(l * m, m).copy_from(v);
        }
        out[self.num_irs() * m] = Complex64::new(1.0, 0.0);
        out
    }

    /// Inverse of [`stacked`](Self::stacked); entries are taken as they are.
    pub fn from_stacked(v_tilde: &CVector, num_irs: usize, elements: usize) -> Self {
        Self {
            v: (0..num_irs)
                .map(|l| v_tilde.rows(l * elements, elements).into_owned())
                .collect(),
        }
    }

    pub fn is_unit_modulus(&self, tol: f64) -> bool {
        self.v.iter().flat_map(|v| v.iter()).all(|z| (z.norm() - 1.0).abs() <= tol)
    }
}

/// Per-path transmit beams with their delay pre-compensations.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub f: Vec<CVector>,
    pub kappa: Vec<usize>,
}

impl BeamformerSet {
    /// Attaches the pre-compensation implied by `delays` to `f`.
    pub fn new(f: Vec<CVector>, delays: &[usize]) -> Self {
        assert_eq!(f.len(), delays.len(), "one beam per path");
        Self {
            f,
            kappa: delay_precompensation(delays),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.f.iter().map(norm_sq).sum()
    }

    pub fn num_paths(&self) -> usize {
        self.f.len()
    }

    pub fn n_tx(&self) -> usize {
        self.f.first().map_or(0, |f| f.len())
    }

    /// Stacked `[f_0; ...; f_L]`.
    pub fn stacked(&self) -> CVector {
        crate::linalg::stack(&self.f)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            f: self.f.iter().map(|f| f * factor).collect(),
            kappa: self.kappa.clone(),
        }
    }
}

/// `kappa_p = max(delays) - delays[p]`.
pub fn delay_precompensation(delays: &[usize]) -> Vec<usize> {
    let n_max = delays.iter().copied().max().unwrap_or(0);
    delays.iter().map(|&n| n_max - n).collect()
}

/// Cascaded channel of one IRS, `G^H diag(h) v`.
pub fn cascade(g: &CMatrix, h: &CVector, v: &CVector) -> CVector {
    g.ad_mul(&h.component_mul(v))
}

/// `[h0, G_1^H diag(h_1) v_1, ..., G_L^H diag(h_L) v_L]`.
pub fn cascaded_channels(chan: &ChannelRealization, phases: &PhaseConfig) -> Vec<CVector> {
    assert_eq!(chan.num_irs(), phases.num_irs(), "one phase vector per IRS");
    let mut out = Vec::with_capacity(chan.num_paths());
    out.push(chan.h0.clone());
    for ((g, h), v) in chan.g.iter().zip(&chan.h).zip(&phases.v) {
        out.push(cascade(g, h, v));
    }
    out
}

/// `sum_p h~_p^H f_p`.
pub fn desired_gain(cascaded: &[CVector], beams: &BeamformerSet) -> Complex64 {
    cascaded.iter().zip(&beams.f).map(|(h, f)| h.dotc(f)).sum()
}

/// Delay-difference grouping of channels (`g`) and beams (`e`).
///
/// For each ordered pair of distinct paths `(l', l)` with `i = n_l' - n_l`,
/// `g[l'][i] = h~_l` and `e[l][i] = f_l'`. Delays are distinct, so each slot
/// receives at most one entry. `i = 0` has no slot.
#[derive(Debug, Clone)]
pub struct EffectiveChannelTable {
    n_span: usize,
    n_tx: usize,
    g: Vec<Vec<Option<CVector>>>,
    e: Vec<Vec<Option<CVector>>>,
}

impl EffectiveChannelTable {
    pub fn from_parts(cascaded: &[CVector], beams: &[CVector], delays: &[usize]) -> Self {
        let paths = delays.len();
        let n_span = delays.iter().max().unwrap() - delays.iter().min().unwrap();
        let n_tx = cascaded[0].len();
        let slots = 2 * n_span;
        let mut g = vec![vec![None; slots]; paths];
        let mut e = vec![vec![None; slots]; paths];
        for lp in 0..paths {
            for l in 0..paths {
                if l == lp {
                    continue;
                }
                let i = delays[lp] as isize - delays[l] as isize;
                let slot = Self::slot_of(n_span, i).expect("distinct delays give nonzero offsets");
                g[lp][slot] = Some(cascaded[l].clone());
                e[l][slot] = Some(beams[lp].clone());
            }
        }
        Self { n_span, n_tx, g, e }
    }

    fn slot_of(n_span: usize, i: isize) -> Option<usize> {
        let span = n_span as isize;
        match i {
            0 => None,
            i if i > 0 && i <= span => Some((i + span - 1) as usize),
            i if i < 0 && i >= -span => Some((i + span) as usize),
            _ => None,
        }
    }

    pub fn n_span(&self) -> usize {
        self.n_span
    }

    /// Offsets `-n_span..=n_span` without zero.
    pub fn offsets(&self) -> impl Iterator<Item = isize> + '_ {
        let span = self.n_span as isize;
        (-span..=span).filter(|&i| i != 0)
    }

    /// Offsets at which at least one pair of paths interferes.
    pub fn active_offsets(&self) -> Vec<isize> {
        self.offsets()
            .filter(|&i| {
                let s = Self::slot_of(self.n_span, i).unwrap();
                self.g.iter().any(|row| row[s].is_some())
            })
            .collect()
    }

    pub fn g(&self, path: usize, i: isize) -> Option<&CVector> {
        Self::slot_of(self.n_span, i).and_then(|s| self.g[path][s].as_ref())
    }

    pub fn e(&self, path: usize, i: isize) -> Option<&CVector> {
        Self::slot_of(self.n_span, i).and_then(|s| self.e[path][s].as_ref())
    }

    /// `g[path][i]`, with the zero vector for empty slots.
    pub fn g_or_zero(&self, path: usize, i: isize) -> CVector {
        self.g(path, i).cloned().unwrap_or_else(|| CVector::zeros(self.n_tx))
    }

    pub fn e_or_zero(&self, path: usize, i: isize) -> CVector {
        self.e(path, i).cloned().unwrap_or_else(|| CVector::zeros(self.n_tx))
    }

    /// Stacked `g_bar[i] = [g_0[i]; ...; g_L[i]]`.
    pub fn stacked_g(&self, i: isize) -> CVector {
        let parts: Vec<CVector> = (0..self.g.len()).map(|p| self.g_or_zero(p, i)).collect();
        crate::linalg::stack(&parts)
    }

    /// Grouped interference amplitude `sum_l' g_l'[i]^H f_l'` at offset `i`.
    pub fn interference(&self, i: isize, beams: &BeamformerSet) -> Complex64 {
        (0..self.g.len())
            .filter_map(|p| self.g(p, i).map(|g| g.dotc(&beams.f[p])))
            .sum()
    }

    /// Total ISI power `sum_{i != 0} |sum_l' g_l'[i]^H f_l'|^2`.
    pub fn isi_power(&self, beams: &BeamformerSet) -> f64 {
        self.active_offsets()
            .into_iter()
            .map(|i| self.interference(i, beams).norm_sqr())
            .sum()
    }
}

pub fn build_effective_tables(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
) -> EffectiveChannelTable {
    let cascaded = cascaded_channels(chan, phases);
    EffectiveChannelTable::from_parts(&cascaded, &beams.f, &chan.delays)
}

/// Desired, ISI and noise powers of the closed-form SINR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrBreakdown {
    pub desired: f64,
    pub isi: f64,
    pub noise: f64,
}

impl SinrBreakdown {
    pub fn sinr(&self) -> f64 {
        self.desired / (self.isi + self.noise)
    }
}

pub fn sinr_breakdown(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise_power: f64,
) -> SinrBreakdown {
    let cascaded = cascaded_channels(chan, phases);
    let table = EffectiveChannelTable::from_parts(&cascaded, &beams.f, &chan.delays);
    SinrBreakdown {
        desired: desired_gain(&cascaded, beams).norm_sqr(),
        isi: table.isi_power(beams),
        noise: noise_power,
    }
}

/// `|sum_p h~_p^H f_p|^2 / (sum_{i != 0} |sum_l' g_l'[i]^H f_l'|^2 + sigma^2)`.
pub fn sinr_closed_form(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise_power: f64,
) -> f64 {
    sinr_breakdown(chan, phases, beams, noise_power).sinr()
}

/// `N_t x (len + max kappa)` waveform `x[n] = sum_p f_p s[n - kappa_p]`.
pub fn synthesize_transmit(symbols: &[Complex64], beams: &BeamformerSet) -> CMatrix {
    let n_tx = beams.n_tx();
    let tail = beams.kappa.iter().copied().max().unwrap_or(0);
    let len = symbols.len() + tail;
    let mut x = CMatrix::zeros(n_tx, len);
    for (f, &k) in beams.f.iter().zip(&beams.kappa) {
        for (n, s) in symbols.iter().enumerate() {
            let mut col = x.column_mut(n + k);
            col.axpy(*s, f, Complex64::new(1.0, 0.0));
        }
    }
    x
}

/// Noiseless received samples `y[n] = sum_p h~_p^H x[n - n_p]` for
/// `n in 0..(T + n_max)`.
pub fn propagate(cascaded: &[CVector], delays: &[usize], waveform: &CMatrix) -> Vec<Complex64> {
    let n_max = delays.iter().copied().max().unwrap_or(0);
    let t = waveform.ncols();
    let mut y = vec![Complex64::new(0.0, 0.0); t + n_max];
    for (h, &d) in cascaded.iter().zip(delays) {
        // h^H x[n] for all columns at once
        let proj = waveform.tr_mul(&h.conjugate());
        for (n, u) in proj.iter().enumerate() {
            y[n + d] += *u;
        }
    }
    y
}

/// Empirical powers returned by [`monte_carlo_sinr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSinr {
    pub sinr: f64,
    pub desired_power: f64,
    pub isi_power: f64,
    pub noise_power: f64,
}

/// Unit-energy QPSK symbol stream.
pub fn qpsk_symbols(rng: &mut impl Rng, count: usize) -> Vec<Complex64> {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    (0..count)
        .map(|_| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex64::new(re, im)
        })
        .collect()
}

/// Circularly symmetric Gaussian samples with variance `var`.
pub fn complex_gaussian(rng: &mut impl Rng, count: usize, var: f64) -> Vec<Complex64> {
    let std = (var / 2.0).sqrt();
    (0..count)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * std, im * std)
        })
        .collect()
}

/// Time-domain SINR estimate.
///
/// QPSK symbols are precoded with [`synthesize_transmit`], convolved with the
/// tapped-delay channel and sampled at lag `n_max`. The desired gain is
/// estimated by correlating with the known symbols; whatever remains of the
/// noiseless sample is counted as ISI. Only symbols whose full interference
/// neighbourhood was transmitted are scored.
pub fn monte_carlo_sinr(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    beams: &BeamformerSet,
    noise_power: f64,
    n_symbols: usize,
    noise_seed: u64,
) -> Result<MonteCarloSinr> {
    if n_symbols < 1000 {
        return Err(Error::Domain(format!("need at least 1000 symbols, got {n_symbols}")));
    }
    let span = chan.n_span();
    let total = n_symbols + 2 * span;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let symbols = qpsk_symbols(&mut rng, total);
    let noise = complex_gaussian(&mut rng, n_symbols, noise_power);

    let waveform = synthesize_transmit(&symbols, beams);
    let cascaded = cascaded_channels(chan, phases);
    let y = propagate(&cascaded, &chan.delays, &waveform);
    let n_max = chan.n_max();

    let scored = span..span + n_symbols;
    let mut cross = Complex64::new(0.0, 0.0);
    let mut energy = 0.0;
    for k in scored.clone() {
        cross += y[k + n_max] * symbols[k].conj();
        energy += symbols[k].norm_sqr();
    }
    let gain = cross / energy;
    let desired_power = gain.norm_sqr() * energy / n_symbols as f64;
    let isi_power = scored
        .map(|k| (y[k + n_max] - gain * symbols[k]).norm_sqr())
        .sum::<f64>()
        / n_symbols as f64;
    let noise_est = noise.iter().map(|z| z.norm_sqr()).sum::<f64>() / n_symbols as f64;
    let denom = isi_power + noise_est;
    let sinr = if desired_power == 0.0 { 0.0 } else { desired_power / denom };
    Ok(MonteCarloSinr {
        sinr,
        desired_power,
        isi_power,
        noise_power: noise_est,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use rand::SeedableRng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn random_channel(seed: u64, n_tx: usize, m: usize, delays: Vec<usize>) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = delays.len() - 1;
        let h0 = CVector::from_fn(n_tx, |_, _| rand_c(&mut rng));
        let g = (0..l).map(|_| CMatrix::from_fn(m, n_tx, |_, _| rand_c(&mut rng))).collect();
        let h = (0..l).map(|_| CVector::from_fn(m, |_, _| rand_c(&mut rng))).collect();
        ChannelRealization::from_parts(h0, g, h, delays).unwrap()
    }

    fn random_beams(seed: u64, n_tx: usize, delays: &[usize]) -> BeamformerSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = delays
            .iter()
            .map(|_| CVector::from_fn(n_tx, |_, _| rand_c(&mut rng)))
            .collect();
        BeamformerSet::new(f, delays)
    }

    #[test]
    fn precompensation_examples() {
        assert_eq!(delay_precompensation(&[43, 44, 46, 77, 47]), vec![34, 33, 31, 0, 30]);
        assert_eq!(delay_precompensation(&[12]), vec![0]);
        let k = delay_precompensation(&[5, 9, 2]);
        assert_eq!(k[1], 0);
        assert_eq!(k.iter().filter(|&&x| x == 0).count(), 1);
    }

    #[test]
    fn cascade_scalar_irs() {
        let chan = random_channel(1, 3, 1, vec![0, 2]);
        let phases = PhaseConfig::unit(1, 1);
        let c = cascaded_channels(&chan, &phases);
        let expect = chan.g[0].adjoint() * chan.h[0][0];
        assert!((&c[1] - expect).norm() < 1e-14);
        assert_eq!(c[0], chan.h0);
    }

    #[test]
    fn cascade_matches_theta_matrix_form() {
        // h~^H = v^H diag(h^H) G must equal h^H Theta G with Theta = diag(e^{j theta})
        let chan = random_channel(2, 4, 4, vec![0, 3]);
        let thetas = vec![vec![0.3, -1.2, 2.5, 0.9]];
        let phases = PhaseConfig::from_thetas(&thetas);
        let c = cascaded_channels(&chan, &phases);
        let theta = CMatrix::from_diagonal(&CVector::from_iterator(
            4,
            thetas[0].iter().map(|&t| Complex64::from_polar(1.0, t)),
        ));
        let row = chan.h[0].adjoint() * theta * &chan.g[0];
        assert!((c[1].adjoint() - row).norm() < 1e-13);
        // direct path ignores phases
        assert_eq!(c[0], chan.h0);
    }

    #[test]
    fn theta_round_trip() {
        let thetas = vec![vec![0.25, -0.5], vec![1.0, 3.0]];
        let p = PhaseConfig::from_thetas(&thetas);
        for (a, b) in p.thetas().iter().flatten().zip(thetas.iter().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
        let s = p.stacked();
        assert_eq!(s.len(), 5);
        assert_eq!(s[4], Complex64::new(1.0, 0.0));
        assert_eq!(PhaseConfig::from_stacked(&s, 2, 2), p);
    }

    #[test]
    fn tables_match_illustration() {
        // n = {1, 2, 3, 5}
        let delays = vec![1, 2, 3, 5];
        let chan = random_channel(3, 3, 2, delays.clone());
        let phases = PhaseConfig::unit(3, 2);
        let beams = random_beams(4, 3, &delays);
        let table = build_effective_tables(&chan, &phases, &beams);
        let c = cascaded_channels(&chan, &phases);
        assert_eq!(table.n_span(), 4);
        assert_eq!(table.g(1, 1), Some(&chan.h0));
        assert_eq!(table.g(1, -3), Some(&c[3]));
        assert_eq!(table.e(0, 1), Some(&beams.f[1]));
        assert_eq!(table.e(3, -3), Some(&beams.f[1]));
        // no pair of paths differs by 4 except (3, 0)
        assert!(table.g(1, 4).is_none());
        assert_eq!(table.g_or_zero(1, 4), CVector::zeros(3));
        assert!(table.g(0, 0).is_none());
    }

    #[test]
    fn single_path_sinr_is_snr() {
        let chan = random_channel(5, 4, 2, vec![7]);
        let phases = PhaseConfig::unit(0, 2);
        let beams = random_beams(6, 4, &[7]);
        let expect = chan.h0.dotc(&beams.f[0]).norm_sqr() / 0.1;
        let got = sinr_closed_form(&chan, &phases, &beams, 0.1);
        assert!((got / expect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_path_waveform_is_scaled_symbols() {
        let beams = BeamformerSet::new(vec![CVector::from_vec(vec![Complex64::new(2.0, 1.0)])], &[4]);
        let s = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, -1.0)];
        let x = synthesize_transmit(&s, &beams);
        assert_eq!(x.ncols(), 2);
        assert_eq!(x[(0, 1)], Complex64::new(2.0, 1.0) * s[1]);
    }

    #[test]
    fn two_path_waveform_columns() {
        let f0 = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let f1 = CVector::from_vec(vec![Complex64::new(0.5, 0.0), Complex64::new(-1.0, 0.0)]);
        let beams = BeamformerSet {
            f: vec![f0.clone(), f1.clone()],
            kappa: vec![0, 3],
        };
        let s: Vec<Complex64> = (0..6).map(|k| Complex64::new(k as f64, 1.0)).collect();
        let x = synthesize_transmit(&s, &beams);
        assert_eq!(x.ncols(), 9);
        for n in 0..9 {
            let mut expect = CVector::zeros(2);
            if n < 6 {
                expect += &f0 * s[n];
            }
            if n >= 3 && n - 3 < 6 {
                expect += &f1 * s[n - 3];
            }
            assert!((x.column(n) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn monte_carlo_rejects_short_runs() {
        let chan = random_channel(5, 2, 2, vec![0]);
        let beams = random_beams(1, 2, &[0]);
        assert!(monte_carlo_sinr(&chan, &PhaseConfig::unit(0, 2), &beams, 1.0, 999, 0).is_err());
    }

    #[test]
    fn zero_beams_give_zero_sinr() {
        let delays = vec![0, 2, 5];
        let chan = random_channel(8, 3, 2, delays.clone());
        let beams = BeamformerSet::new(vec![CVector::zeros(3); 3], &delays);
        let mc = monte_carlo_sinr(&chan, &PhaseConfig::unit(2, 2), &beams, 0.5, 2000, 1).unwrap();
        assert_eq!(mc.sinr, 0.0);
        assert_eq!(sinr_closed_form(&chan, &PhaseConfig::unit(2, 2), &beams, 0.5), 0.0);
    }

    #[test]
    fn sinr_invariant_under_common_rotation() {
        let delays = vec![3, 0, 6];
        let chan = random_channel(9, 4, 3, delays.clone());
        let phases = PhaseConfig::from_thetas(&[vec![0.1, 0.2, 0.3], vec![1.0, -2.0, 0.5]]);
        let beams = random_beams(10, 4, &delays);
        let a = sinr_closed_form(&chan, &phases, &beams, 0.01);
        let b = sinr_closed_form(&chan, &phases, &beams.scaled(Complex64::from_polar(1.0, 1.1)), 0.01);
        assert!((a / b - 1.0).abs() < 1e-12);
    }
}
