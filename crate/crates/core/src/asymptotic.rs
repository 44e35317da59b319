//! Closed-form analysis for many BS antennas.
//!
//! When the array responses of distinct paths become orthogonal, array
//! response beams remove all ISI. Co-phasing every reflected element with the
//! direct link and splitting power in proportion to the path strengths then
//! gives `gamma = P/sigma^2 N_t (|alpha_0|^2 + sum_l |alpha_l|^2 ||h_l||_1^2)`.
//!
//! Everything here reads the line-of-sight description attached to a sampled
//! channel. `alpha_0` is the LoS coefficient of the direct link, so the
//! formulas describe a pure-LoS direct channel.

use crate::channel::{ula_response, ChannelRealization, LosGeometry};
use crate::dam::PhaseConfig;
use crate::{CVector, Complex64, Error, Result};

fn los_of(chan: &ChannelRealization) -> Result<&LosGeometry> {
    chan.los
        .as_ref()
        .ok_or_else(|| Error::Unsupported("asymptotic analysis needs rank-one BS-IRS channels".into()))
}

/// `v_{l,m} = exp(j (arg(alpha_l h_{l,m}^* a_{R,m}) + arg(alpha_0)))`.
///
/// With these phases `alpha_l v_l^H diag(h_l^H) a_R` has the phase of
/// `alpha_0^*`, so all paths add coherently with the direct link.
pub fn asymptotic_phases(chan: &ChannelRealization) -> Result<PhaseConfig> {
    let los = los_of(chan)?;
    let rot0 = los.alpha[0].arg();
    let v = chan
        .h
        .iter()
        .zip(&los.irs_rx)
        .zip(&los.alpha[1..])
        .map(|((h, a_r), alpha)| {
            CVector::from_fn(h.len(), |m, _| {
                Complex64::from_polar(1.0, (alpha * h[m].conj() * a_r[m]).arg() + rot0)
            })
        })
        .collect();
    Ok(PhaseConfig::new(v))
}

/// Path strengths `|alpha_0|` and `|alpha_l| ||h_l||_1`.
pub fn path_strengths(chan: &ChannelRealization) -> Result<Vec<f64>> {
    let los = los_of(chan)?;
    let mut out = vec![los.alpha[0].norm()];
    for (h, alpha) in chan.h.iter().zip(&los.alpha[1..]) {
        out.push(alpha.norm() * h.iter().map(|z| z.norm()).sum::<f64>());
    }
    Ok(out)
}

/// `p_l = P a_l^2 / sum_i a_i^2` for path strengths `a`.
pub fn asymptotic_power_allocation(chan: &ChannelRealization, power: f64) -> Result<Vec<f64>> {
    let a = path_strengths(chan)?;
    let total: f64 = a.iter().map(|x| x * x).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("all paths have zero strength".into()));
    }
    Ok(a.iter().map(|x| power * x * x / total).collect())
}

/// `N_t (sum_l sqrt(p_l) a_l)^2 / sigma^2` for an arbitrary split `p`.
pub fn asymptotic_snr_for_powers(chan: &ChannelRealization, powers: &[f64], noise_power: f64) -> Result<f64> {
    let a = path_strengths(chan)?;
    let amp: f64 = a.iter().zip(powers).map(|(a, p)| a * p.sqrt()).sum();
    Ok(chan.n_tx() as f64 * amp * amp / noise_power)
}

/// `P/sigma^2 N_t (|alpha_0|^2 + sum_l |alpha_l|^2 ||h_l||_1^2)`.
pub fn asymptotic_snr(chan: &ChannelRealization, power: f64, noise_power: f64) -> Result<f64> {
    let a = path_strengths(chan)?;
    Ok(power / noise_power * chan.n_tx() as f64 * a.iter().map(|x| x * x).sum::<f64>())
}

/// Strengths entering the centralized versus distributed comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentGains {
    /// `|alpha_0|^2`.
    pub direct: f64,
    /// `|alpha_l beta_l|^2` per IRS.
    pub cascade: Vec<f64>,
    /// Elements per distributed IRS.
    pub elements: usize,
    pub n_tx: usize,
}

impl DeploymentGains {
    pub fn from_channel(chan: &ChannelRealization) -> Result<Self> {
        let los = los_of(chan)?;
        Ok(Self {
            direct: los.alpha[0].norm_sqr(),
            cascade: los.alpha[1..]
                .iter()
                .zip(&los.beta)
                .map(|(a, b)| (a * b).norm_sqr())
                .collect(),
            elements: chan.irs_elements(),
            n_tx: chan.n_tx(),
        })
    }

    /// Index (0-based) of the strongest IRS.
    pub fn strongest(&self) -> Option<usize> {
        (0..self.cascade.len()).max_by(|&a, &b| self.cascade[a].total_cmp(&self.cascade[b]))
    }

    /// `P/sigma^2 N_t (|alpha_0|^2 + M^2 sum_l |alpha_l beta_l|^2)`.
    pub fn distributed(&self, snr: f64) -> f64 {
        let m = self.elements as f64;
        snr * self.n_tx as f64 * (self.direct + m * m * self.cascade.iter().sum::<f64>())
    }

    /// One IRS with all `L M` elements placed on the link of IRS `site`.
    pub fn centralized(&self, snr: f64, site: usize) -> f64 {
        let lm = (self.cascade.len() * self.elements) as f64;
        snr * self.n_tx as f64 * (self.direct + lm * lm * self.cascade[site])
    }
}

/// `(gamma_distributed, gamma_centralized)` with the centralized IRS on the
/// strongest link.
pub fn deployment_compare(chan: &ChannelRealization, power: f64, noise_power: f64) -> Result<(f64, f64)> {
    let gains = DeploymentGains::from_channel(chan)?;
    let snr = power / noise_power;
    let dist = gains.distributed(snr);
    let cent = match gains.strongest() {
        Some(site) => gains.centralized(snr, site),
        None => dist,
    };
    Ok((dist, cent))
}

/// `max_{l != l'} |a_T^H(phi_l) a_T(phi_l')| / N_t` for the given angles.
pub fn orthogonality_residual_angles(aods: &[f64], n_tx: usize) -> f64 {
    let resp: Vec<CVector> = aods.iter().map(|&phi| ula_response(phi, n_tx)).collect();
    let mut worst: f64 = 0.0;
    for a in 0..resp.len() {
        for b in a + 1..resp.len() {
            worst = worst.max(resp[a].dotc(&resp[b]).norm() / n_tx as f64);
        }
    }
    worst
}

pub fn orthogonality_residual(chan: &ChannelRealization) -> Result<f64> {
    Ok(orthogonality_residual_angles(&los_of(chan)?.aod, chan.n_tx()))
}

/// Summary of the asymptotic analysis of one channel.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub snr: f64,
    pub powers: Vec<f64>,
    pub phases: PhaseConfig,
    pub gamma_distributed: f64,
    pub gamma_centralized: f64,
    pub orthogonality_residual: f64,
}

pub fn analyze(chan: &ChannelRealization, power: f64, noise_power: f64) -> Result<AsymptoticReport> {
    let (gamma_distributed, gamma_centralized) = deployment_compare(chan, power, noise_power)?;
    Ok(AsymptoticReport {
        snr: asymptotic_snr(chan, power, noise_power)?,
        powers: asymptotic_power_allocation(chan, power)?,
        phases: asymptotic_phases(chan)?,
        gamma_distributed,
        gamma_centralized,
        orthogonality_residual: orthogonality_residual(chan)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dft_angles_are_orthogonal() {
        // cos(phi) = 2k/N gives orthogonal responses
        let n = 16;
        let aods: Vec<f64> = (0..3).map(|k| (2.0 * k as f64 / n as f64).acos()).collect();
        assert!(orthogonality_residual_angles(&aods, n) < 1e-12);
        assert!((orthogonality_residual_angles(&[0.7, 0.7], n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn residual_shrinks_with_array_size() {
        let aods = [0.4, 1.1, 2.0, PI / 2.0 + 0.3];
        let r: Vec<f64> = [16, 64, 256, 1024]
            .iter()
            .map(|&n| orthogonality_residual_angles(&aods, n))
            .collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]), "{r:?}");
    }

    #[test]
    fn equal_strengths_ratio_is_l() {
        let g = DeploymentGains {
            direct: 0.0,
            cascade: vec![2.0; 3],
            elements: 8,
            n_tx: 4,
        };
        assert!((g.centralized(1.0, 0) / g.distributed(1.0) - 3.0).abs() < 1e-12);
        let single = DeploymentGains {
            direct: 0.5,
            cascade: vec![1.5],
            elements: 8,
            n_tx: 4,
        };
        assert_eq!(single.centralized(2.0, 0), single.distributed(2.0));
    }
}
