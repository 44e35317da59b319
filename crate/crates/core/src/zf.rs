//! Path-based zero-forcing.
//!
//! Beams null every cross term `h~_l^H f_l'`, `l != l'`, which turns the DAM
//! link into an ISI-free AWGN channel. Phases are improved by successive
//! convex approximation over the relaxed set `|v| <= 1`, alternating with the
//! closed-form beam design. The final unit-modulus phases come from the
//! arguments of the relaxed solution, followed by one more ZF beam design.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};

use crate::channel::ChannelRealization;
use crate::dam::{cascaded_channels, BeamformerSet, PhaseConfig};
use crate::linalg::{norm_sq, solve_spd_real};
use crate::{CMatrix, CVector, Complex64, Error, Result};

/// Below this modulus an entry of the relaxed phase vector has no usable
/// argument and is mapped to phase zero.
const ZERO_ENTRY: f64 = 1e-12;

/// Right pseudo-inverse `W = H (H^H H)^{-1}` of `H^H`, where
/// `H = [h~_0, ..., h~_L]`.
///
/// Computed from a thin QR factorization as `W = Q R^{-H}`.
pub fn zf_nullspace_beams(cascaded: &[CVector]) -> Result<CMatrix> {
    let paths = cascaded.len();
    let n_tx = cascaded.first().map_or(0, |h| h.len());
    if paths == 0 {
        return Err(Error::Infeasible("no paths".into()));
    }
    if n_tx < paths {
        return Err(Error::Infeasible(format!(
            "{n_tx} antennas cannot null {paths} paths"
        )));
    }
    let h = CMatrix::from_columns(cascaded);
    let qr = h.qr();
    let r = qr.r();
    let diag_max = (0..paths).map(|k| r[(k, k)].norm()).fold(0.0, f64::max);
    for k in 0..paths {
        if r[(k, k)].norm() <= 1e-12 * diag_max || diag_max == 0.0 {
            return Err(Error::Infeasible(format!(
                "cascaded channels are rank deficient at path {k}"
            )));
        }
    }
    // W R^H = Q with R^H lower triangular, solved column by column from the right
    let q = qr.q();
    let rh = r.adjoint();
    let mut w = CMatrix::zeros(n_tx, paths);
    for j in (0..paths).rev() {
        let mut col = q.column(j).into_owned();
        for k in j + 1..paths {
            col -= w.column(k) * rh[(k, j)];
        }
        w.set_column(j, &(col / rh[(j, j)]));
    }
    Ok(w)
}

/// Optimal power split over the ZF directions.
///
/// Returns `mu` with `mu_l = P / (sum_i ||w_i||^-2) ||w_l||^-4` and the beams
/// `f_l = sqrt(mu_l) w_l`.
pub fn zf_power_allocation(w: &CMatrix, power: f64) -> (Vec<f64>, Vec<CVector>) {
    let inv_norms: Vec<f64> = w.column_iter().map(|c| 1.0 / c.norm_squared()).collect();
    let total: f64 = inv_norms.iter().sum();
    let mu: Vec<f64> = inv_norms.iter().map(|g| power / total * g * g).collect();
    let f = w
        .column_iter()
        .zip(&mu)
        .map(|(c, m)| c.into_owned() * Complex64::new(m.sqrt(), 0.0))
        .collect();
    (mu, f)
}

/// `P / sigma^2 * sum_l ||w_l||^-2`.
pub fn zf_snr(w: &CMatrix, power: f64, noise_power: f64) -> f64 {
    power / noise_power * w.column_iter().map(|c| 1.0 / c.norm_squared()).sum::<f64>()
}

/// ZF beams, power split and SNR for fixed (possibly relaxed) phases.
#[derive(Debug, Clone)]
pub struct ZfBeams {
    pub w: CMatrix,
    pub mu: Vec<f64>,
    pub beams: BeamformerSet,
    pub snr: f64,
}

pub fn zf_design(
    chan: &ChannelRealization,
    phases: &PhaseConfig,
    power: f64,
    noise_power: f64,
) -> Result<ZfBeams> {
    let cascaded = cascaded_channels(chan, phases);
    let w = zf_nullspace_beams(&cascaded)?;
    let (mu, f) = zf_power_allocation(&w, power);
    let snr = zf_snr(&w, power, noise_power);
    Ok(ZfBeams {
        w,
        mu,
        beams: BeamformerSet::new(f, &chan.delays),
        snr,
    })
}

/// Ingredients of the phase subproblem for fixed beams.
///
/// `f_tilde = [diag(h_1^H) G_1 f_1; ...; diag(h_L^H) G_L f_L; h_0^H f_0]`, so
/// the desired amplitude is `v~^H f_tilde`. The nulling constraints of IRS `l`
/// are `v_l^H b_{l,l'} = 0` with `b_{l,l'} = diag(h_l^H) G_l f_l'` for every
/// `l' != l`; they only involve the block of IRS `l`, so they are kept per IRS.
#[derive(Debug, Clone)]
pub struct PhaseProblem {
    pub f_tilde: CVector,
    /// `nulling[l - 1]` holds the `b_{l,l'}` restricted to block `l`.
    pub nulling: Vec<Vec<CVector>>,
    /// `||diag(h_l^H) G_l||_F * max_l' ||f_l'||` per IRS; the scale against
    /// which a nulling vector counts as numerically zero.
    pub scales: Vec<f64>,
    pub elements: usize,
}

impl PhaseProblem {
    pub fn new(chan: &ChannelRealization, beams: &BeamformerSet) -> Self {
        let l_count = chan.num_irs();
        let m = chan.irs_elements();
        let mut f_tilde = CVector::zeros(l_count * m + 1);
        let mut nulling = Vec::with_capacity(l_count);
        let mut scales = Vec::with_capacity(l_count);
        let f_max = beams.f.iter().map(|f| f.norm()).fold(0.0, f64::max);
        for l in 0..l_count {
            let weighted = weighted_bs_irs(&chan.g[l], &chan.h[l]);
            f_tilde.rows_mut(l * m, m).copy_from(&(&weighted * &beams.f[l + 1]));
            nulling.push(
                (0..chan.num_paths())
                    .filter(|&p| p != l + 1)
                    .map(|p| &weighted * &beams.f[p])
                    .collect(),
            );
            scales.push(weighted.norm() * f_max);
        }
        f_tilde[l_count * m] = chan.h0.dotc(&beams.f[0]);
        Self {
            f_tilde,
            nulling,
            scales,
            elements: m,
        }
    }

    pub fn num_irs(&self) -> usize {
        self.nulling.len()
    }

    /// `|v~^H f_tilde|^2`.
    pub fn objective(&self, v_tilde: &CVector) -> f64 {
        v_tilde.dotc(&self.f_tilde).norm_sqr()
    }

    /// Orthonormal basis of the constraint directions of IRS `l` (0-based),
    /// with numerically vanishing directions removed.
    fn constraint_basis(&self, l: usize) -> CMatrix {
        let cols = &self.nulling[l];
        if cols.is_empty() {
            return CMatrix::zeros(self.elements, 0);
        }
        let b = CMatrix::from_columns(cols);
        let svd = b.svd(true, false);
        let u = svd.u.expect("requested");
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > 1e-9 * self.scales[l])
            .collect();
        if keep.is_empty() {
            return CMatrix::zeros(self.elements, 0);
        }
        CMatrix::from_columns(&keep.iter().map(|&k| u.column(k).into_owned()).collect::<Vec<_>>())
    }
}

/// `diag(h^H) G`, i.e. row `m` of `G` scaled by `conj(h_m)`.
pub fn weighted_bs_irs(g: &CMatrix, h: &CVector) -> CMatrix {
    let mut out = g.clone();
    for (m, mut row) in out.row_iter_mut().enumerate() {
        row *= h[m].conj();
    }
    out
}

/// First-order lower bound `|v_r^H f|^2 + 2 Re{(v - v_r)^H f f^H v_r}`.
pub fn sca_surrogate(v_tilde: &CVector, v_r: &CVector, f_tilde: &CVector) -> f64 {
    let a_r = v_r.dotc(f_tilde);
    let c = f_tilde * a_r.conj();
    a_r.norm_sqr() + 2.0 * (v_tilde - v_r).dotc(&c).re
}

/// Result of one SCA subproblem.
#[derive(Debug, Clone)]
pub struct ScaStep {
    pub v_tilde: CVector,
    /// Set when the inner solver could not certify ascent and the start point
    /// was returned instead.
    pub warning: bool,
}

/// One SCA step: maximizes the linear surrogate at `v_r` over the relaxed
/// feasible set `{|v_m| <= 1, v_{LM+1} = 1, v_l^H b_{l,l'} = 0}`.
pub fn sca_phase_step(v_r: &CVector, problem: &PhaseProblem) -> Result<ScaStep> {
    let m = problem.elements;
    let l_count = problem.num_irs();
    if v_r.len() != l_count * m + 1 {
        return Err(Error::Domain("stacked phase vector has the wrong length".into()));
    }
    if (v_r[l_count * m] - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::Infeasible("last entry of the stacked phase vector must be 1".into()));
    }
    if v_r.rows(0, l_count * m).iter().any(|z| z.norm() > 1.0 + 1e-9) {
        return Err(Error::Infeasible("start point violates |v| <= 1".into()));
    }
    let bases: Vec<CMatrix> = (0..l_count).map(|l| problem.constraint_basis(l)).collect();
    for (l, u) in bases.iter().enumerate() {
        let x = v_r.rows(l * m, m).into_owned();
        let resid = (u.adjoint() * &x).norm();
        if resid > 1e-6 * x.norm().max(1.0) {
            return Err(Error::Infeasible(format!(
                "start point violates the nulling constraints of IRS {}",
                l + 1
            )));
        }
    }

    let a_r = v_r.dotc(&problem.f_tilde);
    let c = &problem.f_tilde * a_r.conj();
    let mut out = v_r.clone();
    let mut warning = false;
    for (l, u) in bases.iter().enumerate() {
        let c_l = c.rows(l * m, m).into_owned();
        match maximize_on_disks(&c_l, u) {
            Some(x) => out.rows_mut(l * m, m).copy_from(&x),
            None => warning = true,
        }
    }
    let before = problem.objective(v_r);
    let after = problem.objective(&out);
    if after < before {
        if after < before * (1.0 - 1e-9) {
            warning = true;
            warn!("SCA step lost objective ({after:e} < {before:e}); keeping the start point");
        }
        return Ok(ScaStep {
            v_tilde: v_r.clone(),
            warning,
        });
    }
    Ok(ScaStep { v_tilde: out, warning })
}

/// Repeats [`sca_phase_step`] until the objective changes by less than `tol`
/// (relative) or `max_iters` steps were taken.
pub fn sca_phase_optimize(
    v0: &CVector,
    problem: &PhaseProblem,
    tol: f64,
    max_iters: usize,
) -> Result<ScaStep> {
    let mut v = v0.clone();
    let mut obj = problem.objective(&v);
    let mut warning = false;
    for _ in 0..max_iters {
        let step = sca_phase_step(&v, problem)?;
        warning |= step.warning;
        let next = problem.objective(&step.v_tilde);
        v = step.v_tilde;
        let done = next - obj <= tol * obj.max(f64::MIN_POSITIVE);
        obj = next;
        if done {
            break;
        }
    }
    Ok(ScaStep { v_tilde: v, warning })
}

/// Maximizes `Re{x^H c}` over `{|x_m| <= 1} ∩ {U^H x = 0}` for an orthonormal
/// `U`.
///
/// The dual of this problem is `min_lambda sum_m |c - U lambda|_m`. It is
/// smoothed to `sum_m sqrt(|z_m|^2 + eps^2)`, minimized by Newton's method for
/// a decreasing sequence of `eps`, and the primal point `x_m = z_m / s_m` is
/// read off. Stationarity of the smoothed dual gives `U^H x = 0`, which is
/// then enforced exactly by a final projection.
fn maximize_on_disks(c: &CVector, u: &CMatrix) -> Option<CVector> {
    let n = c.len();
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Some(CVector::zeros(n));
    }
    if u.ncols() == 0 {
        return Some(c.map(|z| if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) }));
    }
    let c = c / Complex64::new(scale, 0.0);
    let k = u.ncols();
    let mut mu = DVector::<f64>::zeros(2 * k);
    let mut eps = 1.0;
    while eps >= 1e-10 {
        mu = smoothed_dual_newton(&c, u, mu, eps)?;
        eps *= 0.1;
    }
    let z = residual(&c, u, &mu);
    let eps_final = 1e-10;
    let x = z.map(|zm| zm / (zm.norm_sqr() + eps_final * eps_final).sqrt());
    // exact projection onto U^H x = 0, then back into the disks
    let x = &x - u * (u.adjoint() * &x);
    let peak = x.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Some(if peak > 1.0 { x / Complex64::new(peak, 0.0) } else { x })
}

fn lambda_of(mu: &DVector<f64>) -> CVector {
    let k = mu.len() / 2;
    CVector::from_fn(k, |j, _| Complex64::new(mu[j], mu[k + j]))
}

fn residual(c: &CVector, u: &CMatrix, mu: &DVector<f64>) -> CVector {
    c - u * lambda_of(mu)
}

fn smoothed_dual_value(c: &CVector, u: &CMatrix, mu: &DVector<f64>, eps: f64) -> f64 {
    residual(c, u, mu)
        .iter()
        .map(|z| (z.norm_sqr() + eps * eps).sqrt())
        .sum()
}

fn smoothed_dual_newton(c: &CVector, u: &CMatrix, mut mu: DVector<f64>, eps: f64) -> Option<DVector<f64>> {
    let n = c.len();
    let k = u.ncols();
    let dim = 2 * k;
    let mut value = smoothed_dual_value(c, u, &mu, eps);
    for _ in 0..100 {
        let z = residual(c, u, &mu);
        let s: Vec<f64> = z.iter().map(|zm| (zm.norm_sqr() + eps * eps).sqrt()).collect();
        let x = CVector::from_fn(n, |m, _| z[m] / s[m]);
        let ux = u.adjoint() * &x;
        let grad = DVector::from_fn(dim, |j, _| if j < k { -ux[j].re } else { -ux[j - k].im });

        // Hessian sum_m R_m^T (I/s - z z^T / s^3) R_m, where R_m maps mu to the
        // real pair of (U lambda)_m.
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        let mut rm = vec![[0.0f64; 2]; dim];
        for m in 0..n {
            for j in 0..k {
                let b = u[(m, j)];
                rm[j] = [b.re, b.im];
                rm[k + j] = [-b.im, b.re];
            }
            let (zr, zi) = (z[m].re, z[m].im);
            let s3 = s[m] * s[m] * s[m];
            let d = [
                [1.0 / s[m] - zr * zr / s3, -zr * zi / s3],
                [-zr * zi / s3, 1.0 / s[m] - zi * zi / s3],
            ];
            let dr: Vec<[f64; 2]> = rm
                .iter()
                .map(|r| [d[0][0] * r[0] + d[0][1] * r[1], d[1][0] * r[0] + d[1][1] * r[1]])
                .collect();
            for a in 0..dim {
                for b in a..dim {
                    let v = rm[a][0] * dr[b][0] + rm[a][1] * dr[b][1];
                    hess[(a, b)] += v;
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        let step = solve_spd_real(hess, &(-&grad))?;
        let decrement = -grad.dot(&step);
        if decrement <= 1e-14 * value.max(1.0) {
            break;
        }
        let mut t = 1.0;
        loop {
            let cand = &mu + &step * t;
            let cand_value = smoothed_dual_value(c, u, &cand, eps);
            if cand_value <= value - 0.25 * t * decrement {
                mu = cand;
                value = cand_value;
                break;
            }
            t *= 0.5;
            if t < 1e-12 {
                return Some(mu);
            }
        }
    }
    Some(mu)
}

/// `theta_{l,m} = -arg(v~_{(l-1)M+m})`; entries of negligible modulus map to
/// phase zero.
pub fn extract_phases(v_tilde: &CVector, num_irs: usize, elements: usize) -> PhaseConfig {
    let v = (0..num_irs)
        .map(|l| {
            CVector::from_fn(elements, |m, _| {
                let z = v_tilde[l * elements + m];
                if z.norm() < ZERO_ENTRY {
                    Complex64::new(1.0, 0.0)
                } else {
                    z / z.norm()
                }
            })
        })
        .collect();
    PhaseConfig::new(v)
}

/// Tolerances of the alternating ZF design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZfOptions {
    /// Stop when the fractional SNR increase of one outer iteration falls
    /// below this value.
    pub tol: f64,
    pub max_iters: usize,
    pub sca_tol: f64,
    pub sca_max_iters: usize,
}

impl Default for ZfOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iters: 30,
            sca_tol: 1e-6,
            sca_max_iters: 20,
        }
    }
}

/// Output of [`zf_alternating`].
#[derive(Debug, Clone)]
pub struct ZfSolution {
    pub w: CMatrix,
    pub mu: Vec<f64>,
    pub beams: BeamformerSet,
    /// Unit-modulus phases obtained by extraction.
    pub phases: PhaseConfig,
    /// SNR of the final design.
    pub snr: f64,
    /// Relaxed-phase SNR after every outer iteration, starting with the
    /// initial phases.
    pub trace: Vec<f64>,
    /// Relaxed phases reached by the last outer iteration.
    pub relaxed_phases: PhaseConfig,
    pub iterations: usize,
    /// Set when some SCA step fell back to its start point.
    pub sca_warning: bool,
}

impl ZfSolution {
    pub fn relaxed_snr(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial point")
    }
}

/// Alternates the closed-form ZF beams with SCA phase updates.
///
/// The loop works on relaxed phases (`|v| <= 1`). Once the fractional
/// increase drops below `opts.tol`, unit-modulus phases are extracted and the
/// beams are designed once more so that nulling holds exactly.
pub fn zf_alternating(
    chan: &ChannelRealization,
    init_phases: &PhaseConfig,
    power: f64,
    noise_power: f64,
    opts: &ZfOptions,
) -> Result<ZfSolution> {
    let l_count = chan.num_irs();
    let m = chan.irs_elements();
    let mut relaxed = init_phases.clone();
    let mut design = zf_design(chan, &relaxed, power, noise_power)?;
    let mut trace = vec![design.snr];
    let mut iterations = 0;
    let mut sca_warning = false;

    let guard = l_count * m + 1 > l_count * l_count;
    if !guard && l_count > 0 {
        warn!("too few IRS elements for the nulling constraints; keeping the initial phases");
    }
    if l_count > 0 && guard {
        while iterations < opts.max_iters {
            iterations += 1;
            let problem = PhaseProblem::new(chan, &design.beams);
            let step = sca_phase_optimize(&relaxed.stacked(), &problem, opts.sca_tol, opts.sca_max_iters)?;
            sca_warning |= step.warning;
            let candidate = PhaseConfig::from_stacked(&step.v_tilde, l_count, m);
            let next = match zf_design(chan, &candidate, power, noise_power) {
                Ok(d) => d,
                Err(Error::Infeasible(reason)) => {
                    warn!("relaxed phases made ZF infeasible ({reason}); stopping");
                    break;
                }
                Err(e) => return Err(e),
            };
            let prev = design.snr;
            debug!("zf iteration {iterations}: snr {:.6e}", next.snr);
            relaxed = candidate;
            design = next;
            trace.push(design.snr);
            if design.snr - prev < opts.tol * prev {
                break;
            }
        }
    } else {
        iterations = 1;
    }

    let phases = if l_count == 0 {
        PhaseConfig::new(Vec::new())
    } else {
        extract_phases(&relaxed.stacked(), l_count, m)
    };
    let final_design = zf_design(chan, &phases, power, noise_power)?;
    debug!(
        "zf projection: relaxed snr {:.6e}, unit-modulus snr {:.6e}",
        design.snr, final_design.snr
    );
    Ok(ZfSolution {
        w: final_design.w,
        mu: final_design.mu,
        beams: final_design.beams,
        phases,
        snr: final_design.snr,
        trace,
        relaxed_phases: relaxed,
        iterations,
        sca_warning,
    })
}

/// Total power of a beam set, for invariant checks.
pub fn beam_power(beams: &BeamformerSet) -> f64 {
    beams.f.iter().map(norm_sq).sum()
}
