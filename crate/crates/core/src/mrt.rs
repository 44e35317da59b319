//! Path-based maximal-ratio transmission.
//!
//! For fixed phases the beam of path `p` is matched to its cascaded channel,
//! and the desired power becomes `P (||h0||^2 + sum_l ||h~_l||^2)`. The phase
//! problem therefore splits into one subproblem per IRS, each solved by
//! element-wise coordinate descent.

use log::debug;

use crate::channel::ChannelRealization;
use crate::dam::{cascaded_channels, BeamformerSet, PhaseConfig};
use crate::linalg::norm_sq;
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// `f_p = sqrt(P) h~_p / sqrt(sum_i ||h~_i||^2)`.
pub fn mrt_beams(chan: &ChannelRealization, phases: &PhaseConfig, power: f64) -> Result<BeamformerSet> {
    let cascaded = cascaded_channels(chan, phases);
    let total: f64 = cascaded.iter().map(norm_sq).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("every path has a zero channel".into()));
    }
    let scale = Complex64::new((power / total).sqrt(), 0.0);
    let f = cascaded.iter().map(|h| h * scale).collect();
    Ok(BeamformerSet::new(f, &chan.delays))
}

/// `G^H diag(h)`: column `m` is the contribution `r_m` of element `m`, so that
/// `h~ = sum_m r_m v_m`.
pub fn element_columns(g: &CMatrix, h: &CVector) -> CMatrix {
    let mut out = g.adjoint();
    for (m, mut col) in out.column_iter_mut().enumerate() {
        col *= h[m];
    }
    out
}

/// Maximizer of `||q + r e^{-j theta}||^2`, namely `arg(q^H r)`. Zero when
/// `q^H r = 0`, where every phase is optimal.
pub fn optimal_element_phase(q: &CVector, r: &CVector) -> f64 {
    let inner = q.dotc(r);
    if inner == Complex64::new(0.0, 0.0) {
        0.0
    } else {
        inner.arg()
    }
}

/// Objective value after each single-element update, per IRS.
#[derive(Debug, Clone, Default)]
pub struct CoordinateTrace {
    /// `updates[l - 1]` starts with the initial value of `||h~_l||^2`.
    pub updates: Vec<Vec<f64>>,
    /// Objective at the end of every sweep, per IRS.
    pub sweeps: Vec<Vec<f64>>,
}

/// Coordinate descent on `||sum_m r_m v_m||^2` over unit-modulus `v`.
///
/// Elements are visited in ascending order. A sweep whose fractional increase
/// falls below `tol` ends the search, as does `max_sweeps`.
pub fn coordinate_descent_irs(
    columns: &CMatrix,
    init: &CVector,
    tol: f64,
    max_sweeps: usize,
) -> (CVector, Vec<f64>, Vec<f64>) {
    let m_count = columns.ncols();
    let mut v = init.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) });
    let mut s = columns * &v;
    let mut obj = norm_sq(&s);
    let mut updates = vec![obj];
    let mut sweeps = vec![obj];
    for _ in 0..max_sweeps {
        let start = obj;
        for m in 0..m_count {
            let r = columns.column(m).into_owned();
            let q = &s - &r * v[m];
            let theta = optimal_element_phase(&q, &r);
            v[m] = Complex64::from_polar(1.0, -theta);
            s = &q + &r * v[m];
            let next = norm_sq(&s);
            debug_assert!(next >= obj * (1.0 - 1e-12) - 1e-300, "coordinate update decreased the objective");
            obj = next;
            updates.push(obj);
        }
        sweeps.push(obj);
        if obj - start <= tol * start {
            break;
        }
    }
    (v, updates, sweeps)
}

/// Per-IRS coordinate descent maximizing `||h0||^2 + sum_l ||h~_l||^2`.
pub fn coordinate_descent_phases(
    chan: &ChannelRealization,
    init_phases: &PhaseConfig,
    tol: f64,
) -> PhaseConfig {
    coordinate_descent_phases_traced(chan, init_phases, tol, 50).0
}

/// As [`coordinate_descent_phases`], also returning the objective traces.
pub fn coordinate_descent_phases_traced(
    chan: &ChannelRealization,
    init_phases: &PhaseConfig,
    tol: f64,
    max_sweeps: usize,
) -> (PhaseConfig, CoordinateTrace) {
    let mut trace = CoordinateTrace::default();
    let mut v = Vec::with_capacity(chan.num_irs());
    for (l, (g, h)) in chan.g.iter().zip(&chan.h).enumerate() {
        let cols = element_columns(g, h);
        let (vl, updates, sweeps) = coordinate_descent_irs(&cols, &init_phases.v[l], tol, max_sweeps);
        debug!("irs {}: {} sweeps, power {:.6e}", l + 1, sweeps.len() - 1, sweeps.last().unwrap());
        v.push(vl);
        trace.updates.push(updates);
        trace.sweeps.push(sweeps);
    }
    (PhaseConfig::new(v), trace)
}

/// MRT beams together with coordinate-descent phases.
#[derive(Debug, Clone)]
pub struct MrtSolution {
    pub phases: PhaseConfig,
    pub beams: BeamformerSet,
    pub trace: CoordinateTrace,
}

/// Phases by coordinate descent from all-ones, then matched beams.
pub fn mrt_design(chan: &ChannelRealization, power: f64, tol: f64) -> Result<MrtSolution> {
    let init = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
    let (phases, trace) = coordinate_descent_phases_traced(chan, &init, tol, 50);
    let beams = mrt_beams(chan, &phases, power)?;
    Ok(MrtSolution { phases, beams, trace })
}

/// Beams along the BS array responses, `f_p = sqrt(p_p) a_T(phi_p) / sqrt(N_t)`.
pub fn asymptotic_mrt_beams(chan: &ChannelRealization, powers: &[f64]) -> Result<BeamformerSet> {
    let los = chan
        .los
        .as_ref()
        .ok_or_else(|| Error::Unsupported("array-response beams need rank-one BS-IRS channels".into()))?;
    if powers.len() != chan.num_paths() {
        return Err(Error::Domain("one power per path is required".into()));
    }
    let n_tx = chan.n_tx();
    let f = los
        .aod
        .iter()
        .zip(powers)
        .map(|(&phi, &p)| crate::channel::ula_response(phi, n_tx) * Complex64::new((p / n_tx as f64).sqrt(), 0.0))
        .collect();
    Ok(BeamformerSet::new(f, &chan.delays))
}
