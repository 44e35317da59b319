//! Path-based MMSE beamforming.
//!
//! Both subproblems are generalized Rayleigh quotients. For fixed phases the
//! stacked beam `f_bar` maximizes `|h_bar^H f|^2 / f^H C f` with
//! `C = sum_i g_bar[i] g_bar[i]^H + (sigma^2 / P) I`. For fixed beams the
//! stacked phase vector maximizes `|v~^H f_tilde|^2 / v~^H C~ v~` with
//! `C~ = sum_i e~[i] e~[i]^H + sigma^2 I`, and unit-modulus phases are taken
//! from its arguments.
//!
//! Both covariances are a scaled identity plus at most `L (L + 1)` rank-one
//! terms, so they are solved through the Woodbury identity.

use log::debug;

use crate::channel::ChannelRealization;
use crate::dam::{cascaded_channels, sinr_closed_form, BeamformerSet, EffectiveChannelTable, PhaseConfig};
use crate::linalg::{split, stack, ScaledIdentityPlusLowRank};
use crate::zf::{extract_phases, weighted_bs_irs};
use crate::{CVector, Complex64, Result};

/// Stacked MMSE beam `sqrt(P) C^{-1} h_bar / ||C^{-1} h_bar||` and its SINR
/// `h_bar^H C^{-1} h_bar`.
pub fn mmse_beams_with_sinr(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    power: f64,
    noise_power: f64,
) -> Result<(BeamformerSet, f64)> {
    let cascaded = cascaded_channels(chan, phases);
    let paths = cascaded.len();
    // the table only depends on the channels here; beams are placeholders
    let table = EffectiveChannelTable::from_parts(&cascaded, &cascaded, &chan.delays);
    let columns: Vec<CVector> = table.active_offsets().into_iter().map(|i| table.stacked_g(i)).collect();
    let h_bar = stack(&cascaded);
    let cov = ScaledIdentityPlusLowRank::new(noise_power / power, &columns, h_bar.len())?;
    let x = cov.solve(&h_bar);
    let sinr = h_bar.dotc(&x).re;
    let scale = Complex64::new(power.sqrt() / x.norm(), 0.0);
    let f = split(&(x * scale), paths);
    Ok((BeamformerSet::new(f, &chan.delays), sinr))
}

pub fn mmse_beams(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    power: f64,
    noise_power: f64,
) -> Result<BeamformerSet> {
    Ok(mmse_beams_with_sinr(chan, phases, power, noise_power)?.0)
}

/// Stacked desired vector `f_tilde` and interference vectors `e~[i]` of the
/// phase subproblem.
pub fn phase_quotient_terms(chan: &ChannelRealization, beams: &BeamformerSet) -> (CVector, Vec<CVector>) {
    let l_count = chan.num_irs();
    let m = chan.irs_elements();
    let cascaded = cascaded_channels(chan, &PhaseConfig::unit(l_count, m));
    let table = EffectiveChannelTable::from_parts(&cascaded, &beams.f, &chan.delays);
    let weighted: Vec<_> = chan.g.iter().zip(&chan.h).map(|(g, h)| weighted_bs_irs(g, h)).collect();

    let assemble = |beam_of: &dyn Fn(usize) -> Option<CVector>| {
        let mut out = CVector::zeros(l_count * m + 1);
        for (l, w) in weighted.iter().enumerate() {
            if let Some(f) = beam_of(l + 1) {
                out.rows_mut(l * m, m).copy_from(&(w * f));
            }
        }
        if let Some(f) = beam_of(0) {
            out[l_count * m] = chan.h0.dotc(&f);
        }
        out
    };

    let f_tilde = assemble(&|p| Some(beams.f[p].clone()));
    let e_tilde = table
        .active_offsets()
        .into_iter()
        .map(|i| assemble(&|p| table.e(p, i).cloned()))
        .collect();
    (f_tilde, e_tilde)
}

/// Relaxed maximizer `C~^{-1} f_tilde`, rotated so that its last entry is real
/// and positive.
pub fn mmse_relaxed_phases(chan: &ChannelRealization, beams: &BeamformerSet, noise_power: f64) -> Result<CVector> {
    let (f_tilde, e_tilde) = phase_quotient_terms(chan, beams);
    let cov = ScaledIdentityPlusLowRank::new(noise_power, &e_tilde, f_tilde.len())?;
    let v = cov.solve(&f_tilde);
    let last = v[v.len() - 1];
    let v = if last.norm() > 0.0 { v * (last.conj() / last.norm()) } else { v };
    let norm = v.norm();
    Ok(if norm > 0.0 { v / Complex64::new(norm, 0.0) } else { v })
}

/// Unit-modulus phases extracted from [`mmse_relaxed_phases`].
pub fn mmse_phases(chan: &ChannelRealization, beams: &BeamformerSet, noise_power: f64) -> Result<PhaseConfig> {
    let v = mmse_relaxed_phases(chan, beams, noise_power)?;
    Ok(extract_phases(&v, chan.num_irs(), chan.irs_elements()))
}

/// `|v~^H f|^2 / v~^H (sum_i e~ e~^H + sigma^2 I) v~`.
pub fn phase_quotient(v_tilde: &CVector, f_tilde: &CVector, e_tilde: &[CVector], noise_power: f64) -> f64 {
    let num = v_tilde.dotc(f_tilde).norm_sqr();
    let den = e_tilde.iter().map(|e| v_tilde.dotc(e).norm_sqr()).sum::<f64>() + noise_power * v_tilde.norm_squared();
    num / den
}

/// One outer iteration of the MMSE alternation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseIteration {
    /// SINR with the previous beams and the current phases.
    pub before_beam_step: f64,
    /// SINR after the beam update.
    pub after_beam_step: f64,
}

#[derive(Debug, Clone)]
pub struct MmseSolution {
    pub phases: PhaseConfig,
    pub beams: BeamformerSet,
    /// Best SINR seen along the alternation.
    pub sinr: f64,
    pub trace: Vec<MmseIteration>,
}

/// Alternates [`mmse_beams`] and [`mmse_phases`] and keeps the best iterate.
///
/// Stops when the SINR after the beam step changes by less than `tol`
/// (relative) or after `max_iters` iterations.
pub fn mmse_alternating(
    chan: &ChannelRealization,
    init_phases: &PhaseConfig,
    power: f64,
    noise_power: f64,
    tol: f64,
    max_iters: usize,
) -> Result<MmseSolution> {
    let mut phases = init_phases.clone();
    let mut before = f64::NAN;
    let mut best: Option<(PhaseConfig, BeamformerSet, f64)> = None;
    let mut trace = Vec::new();
    let mut prev_after = f64::NAN;
    for iter in 0..max_iters.max(1) {
        let (beams, sinr) = mmse_beams_with_sinr(chan, &phases, power, noise_power)?;
        trace.push(MmseIteration {
            before_beam_step: before,
            after_beam_step: sinr,
        });
        debug!("mmse iteration {}: sinr {:.6e} -> {:.6e}", iter + 1, before, sinr);
        if best.as_ref().is_none_or(|b| sinr > b.2) {
            best = Some((phases.clone(), beams.clone(), sinr));
        }
        if chan.num_irs() == 0 || (prev_after.is_finite() && (sinr - prev_after).abs() < tol * prev_after) {
            break;
        }
        prev_after = sinr;
        phases = mmse_phases(chan, &beams, noise_power)?;
        before = sinr_closed_form(chan, &phases, &beams, noise_power);
    }
    let (phases, beams, sinr) = best.expect("at least one iteration");
    Ok(MmseSolution {
        phases,
        beams,
        sinr,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mrt::mrt_beams;
    use crate::{CMatrix, ChannelRealization};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

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

    #[test]
    fn single_path_reduces_to_mrt() {
        let chan = random_channel(1, 4, 2, vec![5]);
        let phases = PhaseConfig::unit(0, 2);
        let (beams, sinr) = mmse_beams_with_sinr(&chan, &phases, 2.0, 0.1).unwrap();
        let mrt = mrt_beams(&chan, &phases, 2.0).unwrap();
        assert!((&beams.f[0] - &mrt.f[0]).norm() < 1e-12);
        assert!((sinr / (20.0 * chan.h0.norm_squared()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_value_matches_closed_form_sinr() {
        let chan = random_channel(2, 6, 4, vec![3, 0, 7]);
        let phases = PhaseConfig::from_thetas(&[vec![0.3, 1.0, -2.0, 0.5], vec![1.5, 0.0, 0.2, -1.0]]);
        let (beams, sinr) = mmse_beams_with_sinr(&chan, &phases, 1.0, 0.05).unwrap();
        let direct = sinr_closed_form(&chan, &phases, &beams, 0.05);
        assert!((sinr / direct - 1.0).abs() < 1e-8);
        assert!((beams.total_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phase_terms_reproduce_sinr() {
        let chan = random_channel(3, 5, 3, vec![2, 6, 1]);
        let phases = PhaseConfig::from_thetas(&[vec![0.4, -0.3, 2.2], vec![0.9, 1.1, -1.7]]);
        let beams = mrt_beams(&chan, &phases, 1.0).unwrap();
        let (f_tilde, e_tilde) = phase_quotient_terms(&chan, &beams);
        let v = phases.stacked();
        let num = v.dotc(&f_tilde).norm_sqr();
        let isi: f64 = e_tilde.iter().map(|e| v.dotc(e).norm_sqr()).sum();
        let direct = sinr_closed_form(&chan, &phases, &beams, 0.2);
        assert!((num / (isi + 0.2) / direct - 1.0).abs() < 1e-10);
    }

    #[test]
    fn direct_only_phase_vector_is_trivial() {
        let chan = random_channel(4, 3, 2, vec![0]);
        let beams = mrt_beams(&chan, &PhaseConfig::unit(0, 2), 1.0).unwrap();
        let v = mmse_relaxed_phases(&chan, &beams, 0.1).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn alternation_beam_steps_improve() {
        let chan = random_channel(5, 6, 8, vec![0, 4, 9]);
        let sol = mmse_alternating(&chan, &PhaseConfig::unit(2, 8), 1.0, 0.01, 1e-4, 10).unwrap();
        for it in sol.trace.iter().skip(1) {
            assert!(it.after_beam_step >= it.before_beam_step * (1.0 - 1e-9));
        }
        assert!(sol.phases.is_unit_modulus(1e-12));
        let check = sinr_closed_form(&chan, &sol.phases, &sol.beams, 0.01);
        assert!((check / sol.sinr - 1.0).abs() < 1e-8);
    }
}
