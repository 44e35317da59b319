//! Scenario geometry and wideband channel realizations.
//!
//! Coordinate conventions (all positions in meters):
//!
//! - The BS carries a half-wavelength ULA along the global `y` axis, so the
//!   angle of departure `phi` towards a point satisfies `cos(phi) = u_y` for
//!   the unit direction `u`.
//! - Every IRS is a UPA whose horizontal axis is the global `x` axis and whose
//!   vertical axis is the global `z` axis. Elevation is measured from `z` and
//!   azimuth from `x` in the horizontal plane, hence
//!   `sin(elev) cos(azim) = u_x` and `cos(elev) = u_z`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector, Complex64, Error, Result, SPEED_OF_LIGHT};

pub type Point = [f64; 3];

/// Distance-dependent path loss `C0 (d / D0)^(-exponent)` per link type.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossModel {
    /// Linear gain at the reference distance.
    pub c0: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub exponent_direct: f64,
    pub exponent_bs_irs: f64,
    pub exponent_irs_user: f64,
}

/// Static system parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub bs_position: Point,
    pub user_position: Point,
    pub irs_positions: Vec<Point>,
    pub n_tx: usize,
    /// IRS elements along the horizontal axis.
    pub irs_horizontal: usize,
    /// IRS elements along the vertical axis.
    pub irs_vertical: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub noise_psd_w_per_hz: f64,
    pub coherence_time_s: f64,
    /// Linear Rician factor of the direct link; `f64::INFINITY` is pure LoS.
    pub rician_factor: f64,
    pub path_loss: PathLossModel,
    /// OFDM subcarrier count.
    pub subcarriers: usize,
    /// OFDM cyclic prefix length in taps.
    pub cp_len: usize,
    pub qam_order: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn num_irs(&self) -> usize {
        self.irs_positions.len()
    }

    pub fn irs_elements(&self) -> usize {
        self.irs_horizontal * self.irs_vertical
    }

    /// Noise power `N0 B` in watts.
    pub fn noise_power(&self) -> f64 {
        self.noise_psd_w_per_hz * self.bandwidth_hz
    }

    /// Samples per coherence block, `round(B T_c)`.
    pub fn coherence_samples(&self) -> usize {
        (self.bandwidth_hz * self.coherence_time_s).round() as usize
    }

    /// Transmit SNR `P / sigma^2`.
    pub fn transmit_snr(&self) -> f64 {
        self.power_w / self.noise_power()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::Config("BS antenna count must be at least 1".into()));
        }
        if self.irs_horizontal == 0 || self.irs_vertical == 0 {
            return Err(Error::Config("IRS grid dimensions must be at least 1".into()));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        if !(self.power_w > 0.0) {
            return Err(Error::Config("transmit power must be positive".into()));
        }
        if !(self.noise_psd_w_per_hz > 0.0) {
            return Err(Error::Config("noise PSD must be positive".into()));
        }
        if self.coherence_samples() == 0 {
            return Err(Error::Config("B * T_c rounds to zero samples".into()));
        }
        if !(self.rician_factor >= 0.0) {
            return Err(Error::Config("Rician factor must be non-negative".into()));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::Config("element spacing must be positive".into()));
        }
        if self.subcarriers == 0 {
            return Err(Error::Config("subcarrier count must be at least 1".into()));
        }
        let pl = &self.path_loss;
        if !(pl.c0 > 0.0 && pl.d0 > 0.0) {
            return Err(Error::Config("path loss C0 and D0 must be positive".into()));
        }
        Ok(())
    }
}

/// Geometric line-of-sight description kept alongside a sampled channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LosGeometry {
    /// `alpha[0]` is the direct-link LoS coefficient, `alpha[l]` the BS-IRS `l`
    /// gain.
    pub alpha: Vec<Complex64>,
    /// IRS-user gains, indexed by IRS (`beta[l - 1]`).
    pub beta: Vec<Complex64>,
    /// BS angles of departure per path (`aod[0]` towards the user).
    pub aod: Vec<f64>,
    /// IRS receive response `a_R` towards the BS, per IRS.
    pub irs_rx: Vec<CVector>,
    /// (elevation, azimuth) of arrival from the BS, per IRS.
    pub irs_arrival: Vec<(f64, f64)>,
    /// (elevation, azimuth) of departure towards the user, per IRS.
    pub irs_departure: Vec<(f64, f64)>,
}

/// One draw of all channel coefficients and discrete tap delays.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Direct BS-user channel (length `N_t`).
    pub h0: CVector,
    /// BS to IRS channels, `M x N_t`, per IRS.
    pub g: Vec<CMatrix>,
    /// IRS to user channels (length `M`), per IRS.
    pub h: Vec<CVector>,
    /// Tap delay per path, index 0 is the direct link.
    pub delays: Vec<usize>,
    /// Present when every BS-IRS link is the rank-one LoS model.
    pub los: Option<LosGeometry>,
}

impl ChannelRealization {
    /// Builds a realization from arbitrary matrices. No LoS structure is
    /// assumed.
    pub fn from_parts(h0: CVector, g: Vec<CMatrix>, h: Vec<CVector>, delays: Vec<usize>) -> Result<Self> {
        let n_tx = h0.len();
        if g.len() != h.len() || delays.len() != g.len() + 1 {
            return Err(Error::Domain("inconsistent number of paths".into()));
        }
        for (gl, hl) in g.iter().zip(&h) {
            if gl.ncols() != n_tx || gl.nrows() != hl.len() {
                return Err(Error::Domain("channel matrix dimensions disagree".into()));
            }
        }
        check_distinct(&delays)?;
        Ok(Self { h0, g, h, delays, los: None })
    }

    pub fn num_irs(&self) -> usize {
        self.g.len()
    }

    pub fn num_paths(&self) -> usize {
        self.g.len() + 1
    }

    pub fn n_tx(&self) -> usize {
        self.h0.len()
    }

    pub fn irs_elements(&self) -> usize {
        self.h.first().map_or(0, |h| h.len())
    }

    pub fn n_max(&self) -> usize {
        *self.delays.iter().max().expect("at least the direct path")
    }

    pub fn n_min(&self) -> usize {
        *self.delays.iter().min().expect("at least the direct path")
    }

    pub fn n_span(&self) -> usize {
        self.n_max() - self.n_min()
    }
}

fn check_distinct(delays: &[usize]) -> Result<()> {
    for a in 0..delays.len() {
        for b in a + 1..delays.len() {
            if delays[a] == delays[b] {
                return Err(Error::DelayCollision {
                    first: a,
                    second: b,
                    tap: delays[a],
                });
            }
        }
    }
    Ok(())
}

/// Half-wavelength ULA response; element `k` is `exp(-j pi k cos(angle))`.
pub fn ula_response(angle: f64, n: usize) -> CVector {
    let step = -PI * angle.cos();
    CVector::from_fn(n, |k, _| Complex64::from_polar(1.0, step * k as f64))
}

/// UPA response: horizontal phase ramp Kronecker vertical phase ramp.
///
/// Element `(mh, mv)` sits at index `mh * M_v + mv`.
pub fn upa_response(elev: f64, azim: f64, m_h: usize, m_v: usize, spacing: f64) -> CVector {
    let horiz = -2.0 * PI * spacing * elev.sin() * azim.cos();
    let vert = -2.0 * PI * spacing * elev.cos();
    CVector::from_fn(m_h * m_v, |idx, _| {
        let (mh, mv) = (idx / m_v, idx % m_v);
        Complex64::from_polar(1.0, horiz * mh as f64 + vert * mv as f64)
    })
}

/// Linear path-loss gain `C0 (d / D0)^(-exponent)`.
pub fn path_loss(distance: f64, c0: f64, d0: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("link distance must be positive, got {distance}")));
    }
    Ok(c0 * (distance / d0).powf(-exponent))
}

/// Tap index of a propagation distance, rounded half-up.
pub fn discretize_delay(path_length: f64, bandwidth_hz: f64) -> usize {
    (path_length / SPEED_OF_LIGHT * bandwidth_hz + 0.5).floor() as usize
}

fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn unit_direction(from: &Point, to: &Point) -> Result<[f64; 3]> {
    let d = distance(from, to);
    if !(d > 0.0) {
        return Err(Error::Domain("coincident positions".into()));
    }
    Ok([(to[0] - from[0]) / d, (to[1] - from[1]) / d, (to[2] - from[2]) / d])
}

/// BS angle of departure for the y-axis ULA.
fn bs_aod(u: &[f64; 3]) -> f64 {
    u[1].clamp(-1.0, 1.0).acos()
}

/// (elevation, azimuth) in the IRS frame.
fn irs_angles(u: &[f64; 3]) -> (f64, f64) {
    (u[2].clamp(-1.0, 1.0).acos(), u[1].atan2(u[0]))
}

/// Tap delays of all paths for a scenario, direct link first.
pub fn path_delays(scenario: &Scenario) -> Vec<usize> {
    let b = scenario.bandwidth_hz;
    let mut delays = vec![discretize_delay(
        distance(&scenario.bs_position, &scenario.user_position),
        b,
    )];
    delays.extend(scenario.irs_positions.iter().map(|irs| {
        discretize_delay(
            distance(&scenario.bs_position, irs) + distance(irs, &scenario.user_position),
            b,
        )
    }));
    delays
}

fn random_phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random::<f64>() * 2.0 * PI)
}

/// Draws one realization. Magnitudes follow the geometry; the phases of all
/// path gains and the NLoS part of the direct link come from `seed`.
pub fn sample_channel(scenario: &Scenario, seed: u64) -> Result<ChannelRealization> {
    scenario.validate()?;
    let delays = path_delays(scenario);
    check_distinct(&delays)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pl = &scenario.path_loss;
    let n_tx = scenario.n_tx;
    let (m_h, m_v) = (scenario.irs_horizontal, scenario.irs_vertical);
    let bs = &scenario.bs_position;
    let user = &scenario.user_position;

    let direct_gain = path_loss(distance(bs, user), pl.c0, pl.d0, pl.exponent_direct)?;
    let alpha0 = random_phase(&mut rng) * direct_gain.sqrt();
    let aod0 = bs_aod(&unit_direction(bs, user)?);
    let h0_los = ula_response(aod0, n_tx) * alpha0;

    let l_count = scenario.num_irs();
    let mut alpha = Vec::with_capacity(l_count + 1);
    let mut aod = Vec::with_capacity(l_count + 1);
    alpha.push(alpha0);
    aod.push(aod0);
    let mut beta = Vec::with_capacity(l_count);
    let mut irs_rx = Vec::with_capacity(l_count);
    let mut irs_arrival = Vec::with_capacity(l_count);
    let mut irs_departure = Vec::with_capacity(l_count);
    let mut g = Vec::with_capacity(l_count);
    let mut h = Vec::with_capacity(l_count);

    for irs in &scenario.irs_positions {
        let gain_ti = path_loss(distance(bs, irs), pl.c0, pl.d0, pl.exponent_bs_irs)?;
        let gain_iu = path_loss(distance(irs, user), pl.c0, pl.d0, pl.exponent_irs_user)?;
        let a_l = random_phase(&mut rng) * gain_ti.sqrt();
        let b_l = random_phase(&mut rng) * gain_iu.sqrt();

        let phi = bs_aod(&unit_direction(bs, irs)?);
        let arrival = irs_angles(&unit_direction(irs, bs)?);
        let departure = irs_angles(&unit_direction(irs, user)?);
        let a_r = upa_response(arrival.0, arrival.1, m_h, m_v, scenario.element_spacing);
        let a_t = ula_response(phi, n_tx);

        g.push((&a_r * a_t.adjoint()) * a_l);
        h.push(upa_response(departure.0, departure.1, m_h, m_v, scenario.element_spacing) * b_l);

        alpha.push(a_l);
        beta.push(b_l);
        aod.push(phi);
        irs_rx.push(a_r);
        irs_arrival.push(arrival);
        irs_departure.push(departure);
    }

    // NLoS part scaled so that E||h0_nlos||^2 = ||h0_los||^2 = N_t |alpha_0|^2.
    let nlos_std = (direct_gain / 2.0).sqrt();
    let h0_nlos = CVector::from_fn(n_tx, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im) * nlos_std
    });
    let zeta = scenario.rician_factor;
    let h0 = if zeta.is_infinite() {
        h0_los
    } else {
        h0_los * Complex64::new((zeta / (1.0 + zeta)).sqrt(), 0.0) + h0_nlos * Complex64::new((1.0 / (1.0 + zeta)).sqrt(), 0.0)
    };

    Ok(ChannelRealization {
        h0,
        g,
        h,
        delays,
        los: Some(LosGeometry {
            alpha,
            beta,
            aod,
            irs_rx,
            irs_arrival,
            irs_departure,
        }),
    })
}
