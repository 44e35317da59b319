//! Acceptance criteria. Each test prints one PASS/FAIL line and then asserts.
//!
//! Run with `cargo test --release -p dam-core --test acceptance -- --nocapture`
//! to see the lines.

use dam_core::asymptotic::{asymptotic_phases, asymptotic_power_allocation, asymptotic_snr, DeploymentGains};
use dam_core::channel::{path_delays, sample_channel};
use dam_core::dam::{monte_carlo_sinr, sinr_breakdown, sinr_closed_form, PhaseConfig};
use dam_core::experiment::{dam_papr_waveform, reference_scenario, run_seed};
use dam_core::metrics::{ber_dam_zf, dam_monte_carlo_ber, dam_overhead, dam_spectral_efficiency, papr_at_ccdf, papr_values};
use dam_core::mmse::{mmse_alternating, mmse_beams_with_sinr};
use dam_core::mrt::{asymptotic_mrt_beams, coordinate_descent_phases_traced, mrt_design};
use dam_core::ofdm::{
    ofdm_beams, ofdm_ber, ofdm_design, ofdm_monte_carlo_ber, ofdm_spectral_efficiency, ofdm_waveform, OfdmConfig,
};
use dam_core::qam::Constellation;
use dam_core::zf::{zf_alternating, zf_design, ZfOptions};
use dam_core::{dbm_to_watts, CMatrix, CVector, ChannelRealization, Complex64, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{name}]: {} - {detail}", if pass { "PASS" } else { "FAIL" });
}

fn scenario(n_tx: usize, side: usize, power_dbm: f64) -> Scenario {
    let mut sc = reference_scenario();
    sc.n_tx = n_tx;
    sc.irs_horizontal = side;
    sc.irs_vertical = side;
    sc.power_w = dbm_to_watts(power_dbm);
    sc
}

fn rayleigh_channel(seed: u64, n_tx: usize, m: usize, delays: Vec<usize>) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
    let l = delays.len() - 1;
    let h0 = CVector::from_fn(n_tx, |_, _| c());
    let g = (0..l).map(|_| CMatrix::from_fn(m, n_tx, |_, _| c())).collect();
    let h = (0..l).map(|_| CVector::from_fn(m, |_, _| c())).collect();
    ChannelRealization::from_parts(h0, g, h, delays).unwrap()
}

#[test]
fn criterion_01_overheads() {
    let cfg = OfdmConfig {
        subcarriers: 512,
        cp_len: 77,
        coherence_samples: 128_000,
    };
    let ofdm = format!("{:.2}%", 100.0 * cfg.block_overhead());
    let dam = format!("{:.2}%", 100.0 * dam_overhead(77, 128_000).unwrap());
    let pass = ofdm == "13.05%" && dam == "0.12%";
    report(1, "overhead arithmetic", pass, &format!("OFDM {ofdm}, DAM {dam}"));
    assert!(pass);
}

#[test]
fn criterion_02_delays() {
    let d = path_delays(&reference_scenario());
    let pass = d == vec![43, 44, 46, 77, 47];
    report(2, "geometry to delays", pass, &format!("{d:?}"));
    assert!(pass);
}

#[test]
fn criterion_03_zf_isi_free() {
    // half geometric LoS draws, half i.i.d. channels where the nulling
    // constraints on the phases are active
    let cases: Vec<(ChannelRealization, f64, f64)> = (0..50u64)
        .map(|k| {
            if k % 2 == 0 {
                let sc = scenario(8, 4, 30.0);
                (sample_channel(&sc, run_seed(3, k as usize)).unwrap(), sc.power_w, sc.noise_power())
            } else {
                (rayleigh_channel(k, 6, 8, vec![3, 0, 5, 9]), 1.0, 0.05)
            }
        })
        .collect();
    let results: Vec<(f64, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, (chan, power, noise))| {
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let sol = zf_alternating(chan, &unit, *power, *noise, &ZfOptions::default()).unwrap();
            let mc = monte_carlo_sinr(chan, &sol.phases, &sol.beams, *noise, 20_000, k as u64).unwrap();
            let isi_ratio = mc.isi_power / mc.desired_power;
            let expected: f64 = power / noise * sol.w.column_iter().map(|c| 1.0 / c.norm_squared()).sum::<f64>();
            let closed = sinr_closed_form(chan, &sol.phases, &sol.beams, *noise);
            (isi_ratio, (closed / expected - 1.0).abs())
        })
        .collect();
    let worst_isi = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_snr = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let pass = worst_isi <= 1e-10 && worst_snr <= 1e-6;
    report(
        3,
        "ZF ISI elimination",
        pass,
        &format!("max ISI/desired {worst_isi:.2e}, max SNR mismatch {worst_snr:.2e} over 50 channels"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_closed_form_vs_time_domain() {
    let sc = scenario(8, 4, 30.0);
    let noise = sc.noise_power();
    let rows: Vec<[f64; 3]> = (0..10)
        .into_par_iter()
        .map(|k| {
            let chan = sample_channel(&sc, run_seed(4, k)).unwrap();
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let zf = zf_alternating(&chan, &unit, sc.power_w, noise, &ZfOptions::default()).unwrap();
            let mrt = mrt_design(&chan, sc.power_w, 1e-4).unwrap();
            let mmse = mmse_alternating(&chan, &mrt.phases, sc.power_w, noise, 1e-4, 10).unwrap();
            let designs = [(&zf.phases, &zf.beams), (&mrt.phases, &mrt.beams), (&mmse.phases, &mmse.beams)];
            let mut err = [0.0; 3];
            for (s, (phases, beams)) in designs.iter().enumerate() {
                let closed = sinr_closed_form(&chan, phases, beams, noise);
                let mc = monte_carlo_sinr(&chan, phases, beams, noise, 100_000, 1000 + k as u64).unwrap();
                err[s] = (mc.sinr / closed - 1.0).abs();
            }
            err
        })
        .collect();
    let worst: Vec<f64> = (0..3).map(|s| rows.iter().map(|r| r[s]).fold(0.0, f64::max)).collect();
    let pass = worst.iter().all(|&e| e <= 0.01);
    report(
        4,
        "closed form vs time domain",
        pass,
        &format!("max relative gap ZF {:.2e}, MRT {:.2e}, MMSE {:.2e}", worst[0], worst[1], worst[2]),
    );
    assert!(pass);
}

#[test]
fn criterion_05_asymptotic_regime() {
    let sizes = [16, 64, 256, 1024];
    let seeds = 10;
    let mut ratios = Vec::new();
    let mut gap_at_max = 0.0;
    for &n in &sizes {
        let mut sc = scenario(n, 8, 30.0);
        sc.rician_factor = f64::INFINITY;
        let noise = sc.noise_power();
        let per_seed: Vec<(f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|k| {
                let chan = sample_channel(&sc, run_seed(5, k)).unwrap();
                let phases = asymptotic_phases(&chan).unwrap();
                let powers = asymptotic_power_allocation(&chan, sc.power_w).unwrap();
                let beams = asymptotic_mrt_beams(&chan, &powers).unwrap();
                let b = sinr_breakdown(&chan, &phases, &beams, noise);
                let formula = asymptotic_snr(&chan, sc.power_w, noise).unwrap();
                (b.isi / b.desired, (b.sinr() / formula - 1.0).abs())
            })
            .collect();
        ratios.push(per_seed.iter().map(|r| r.0).sum::<f64>() / seeds as f64);
        if n == 1024 {
            gap_at_max = per_seed.iter().map(|r| r.1).fold(0.0, f64::max);
        }
    }
    let monotone = ratios.windows(2).all(|w| w[1] < w[0]);
    let pass = monotone && gap_at_max <= 0.05;
    report(
        5,
        "asymptotic regime",
        pass,
        &format!("mean ISI/desired {:?}, worst gap to closed form at 1024 antennas {gap_at_max:.2e}", ratios.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>()),
    );
    assert!(pass);
}

#[test]
fn criterion_06_scheme_ordering() {
    let sc = scenario(128, 16, 40.0);
    let noise = sc.noise_power();
    let n_c = sc.coherence_samples();
    let runs = 20;
    let se = |g: f64| dam_spectral_efficiency(g, sc.cp_len, n_c).unwrap();
    let rows: Vec<([f64; 4], bool)> = (0..runs)
        .into_par_iter()
        .map(|k| {
            let chan = sample_channel(&sc, run_seed(6, k)).unwrap();
            let mrt = mrt_design(&chan, sc.power_w, 1e-4).unwrap();
            // shared phases: every beam design at the MRT phases
            let shared = &mrt.phases;
            let g_mrt = sinr_closed_form(&chan, shared, &mrt.beams, noise);
            let g_zf = zf_design(&chan, shared, sc.power_w, noise).unwrap().snr;
            let (_, g_mmse) = mmse_beams_with_sinr(&chan, shared, sc.power_w, noise).unwrap();
            let ordered = se(g_mmse) >= se(g_zf) * (1.0 - 1e-12) && se(g_mmse) >= se(g_mrt) * (1.0 - 1e-12);

            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let zf = zf_alternating(&chan, &unit, sc.power_w, noise, &ZfOptions::default()).unwrap();
            let mmse = mmse_alternating(&chan, shared, sc.power_w, noise, 1e-4, 10).unwrap();
            let ofdm = ofdm_design(&chan, sc.power_w, noise, sc.subcarriers, 1e-4).unwrap();
            let r_ofdm = ofdm_spectral_efficiency(&ofdm.responses, &ofdm.powers, noise, sc.cp_len);
            ([se(zf.snr), se(g_mrt), se(mmse.sinr), r_ofdm], ordered)
        })
        .collect();
    let mean: Vec<f64> = (0..4).map(|s| rows.iter().map(|r| r.0[s]).sum::<f64>() / runs as f64).collect();
    let ordered = rows.iter().all(|r| r.1);
    let dam = &mean[..3];
    let hi = dam.iter().cloned().fold(f64::MIN, f64::max);
    let lo = dam.iter().cloned().fold(f64::MAX, f64::min);
    let close = hi / lo - 1.0 <= 0.05;
    let beats_ofdm = dam.iter().all(|&r| r > mean[3]);
    let pass = ordered && close && beats_ofdm;
    report(
        6,
        "scheme ordering",
        pass,
        &format!(
            "mean SE zf {:.3}, mrt {:.3}, mmse {:.3}, ofdm {:.3}; shared-phase ordering {ordered}; spread {:.2}%",
            mean[0],
            mean[1],
            mean[2],
            mean[3],
            100.0 * (hi / lo - 1.0)
        ),
    );
    assert!(pass);
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9))
}

/// First index whose fractional change from its predecessor is below `tol`.
fn settles_within(xs: &[f64], tol: f64, limit: usize) -> bool {
    xs.len() == 1 || xs.windows(2).take(limit).any(|w| (w[1] - w[0]).abs() < tol * w[0].abs())
}

#[test]
fn criterion_07_convergence() {
    let sc = scenario(64, 8, 30.0);
    let noise = sc.noise_power();
    let chan = sample_channel(&sc, run_seed(7, 0)).unwrap();
    let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
    let zf = zf_alternating(&chan, &unit, sc.power_w, noise, &ZfOptions::default()).unwrap();
    let (_, mrt) = coordinate_descent_phases_traced(&chan, &unit, 1e-4, 50);
    let mmse = mmse_alternating(&chan, &unit, sc.power_w, noise, 1e-4, 30).unwrap();
    let mmse_trace: Vec<f64> = mmse.trace.iter().map(|t| t.after_beam_step).collect();

    let zf_ok = non_decreasing(&zf.trace) && settles_within(&zf.trace, 1e-3, 10);
    let mrt_ok = mrt.sweeps.iter().all(|s| non_decreasing(s) && settles_within(s, 1e-3, 10))
        && mrt.updates.iter().all(|u| non_decreasing(u));
    let mmse_ok = non_decreasing(&mmse_trace) && settles_within(&mmse_trace, 1e-3, 10);
    let pass = zf_ok && mrt_ok && mmse_ok;
    report(
        7,
        "convergence traces",
        pass,
        &format!(
            "ZF {} iterations {zf_ok}, MRT sweeps {:?} {mrt_ok}, MMSE {} iterations {mmse_ok}",
            zf.trace.len() - 1,
            mrt.sweeps.iter().map(|s| s.len() - 1).collect::<Vec<_>>(),
            mmse_trace.len()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_deployment() {
    let mut equal_ok = true;
    for l in 1..=6 {
        let g = DeploymentGains {
            direct: 0.0,
            cascade: vec![3.7e-12; l],
            elements: 64,
            n_tx: 32,
        };
        let ratio = g.centralized(1e9, 0) / g.distributed(1e9);
        equal_ok &= (ratio - l as f64).abs() <= 1e-12 * l as f64;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut order_ok = true;
    for _ in 0..1000 {
        let l = rng.random_range(1..8);
        let g = DeploymentGains {
            direct: rng.random::<f64>(),
            cascade: (0..l).map(|_| rng.random::<f64>()).collect(),
            elements: rng.random_range(1..300),
            n_tx: 16,
        };
        let best = g.strongest().unwrap();
        order_ok &= g.distributed(2.0) <= g.centralized(2.0, best) * (1.0 + 1e-12);
    }
    let chan = sample_channel(&reference_scenario(), 1).unwrap();
    let g = DeploymentGains::from_channel(&chan).unwrap();
    order_ok &= g.distributed(1.0) <= g.centralized(1.0, g.strongest().unwrap());
    let pass = equal_ok && order_ok;
    report(8, "deployment comparison", pass, &format!("ratio equals L: {equal_ok}; distributed <= centralized: {order_ok}"));
    assert!(pass);
}

/// Symbols needed for roughly `errors` bit errors at `ber`, within bounds.
fn symbols_for(ber: f64, bits: u32, errors: f64) -> usize {
    ((errors / (ber * bits as f64)).ceil() as usize).clamp(20_000, 4_000_000)
}

#[test]
fn criterion_09_ber() {
    const POWERS: [f64; 6] = [30.0, 33.0, 36.0, 39.0, 42.0, 45.0];
    let seeds = 2;
    struct Point {
        order: usize,
        dbm: f64,
        dam: f64,
        ofdm: f64,
        dam_mc: Option<f64>,
        ofdm_mc: Option<f64>,
    }
    let jobs: Vec<(usize, usize, f64)> = (0..seeds)
        .flat_map(|k| [128usize, 256].into_iter().flat_map(move |q| POWERS.iter().map(move |&p| (k, q, p))))
        .collect();
    let points: Vec<Point> = jobs
        .par_iter()
        .map(|&(k, order, dbm)| {
            let sc = scenario(128, 16, dbm);
            let noise = sc.noise_power();
            let chan = sample_channel(&sc, run_seed(9, k)).unwrap();
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let zf = zf_alternating(&chan, &unit, sc.power_w, noise, &ZfOptions::default()).unwrap();
            let ofdm = ofdm_design(&chan, sc.power_w, noise, sc.subcarriers, 1e-4).unwrap();
            let dam = ber_dam_zf(&zf, order).unwrap();
            let ofdm_closed = ofdm_ber(&ofdm.responses, &ofdm.powers, noise, sc.cp_len, order).unwrap();
            let bits = Constellation::new(order).unwrap().bits_per_symbol();
            let seed = run_seed(90 + k as u64, order * 100 + dbm as usize);
            let dam_mc = (dam >= 1e-4).then(|| {
                let n = symbols_for(dam, bits, 3000.0);
                let (e, b) = dam_monte_carlo_ber(&chan, &zf.phases, &zf.beams, noise, order, n, seed).unwrap();
                e as f64 / b as f64
            });
            let ofdm_mc = (ofdm_closed >= 1e-4).then(|| {
                let n = symbols_for(ofdm_closed, bits, 3000.0).div_ceil(sc.subcarriers);
                let (e, b) = ofdm_monte_carlo_ber(&chan, &ofdm, noise, sc.cp_len, order, n, seed ^ 1).unwrap();
                e as f64 / b as f64
            });
            Point {
                order,
                dbm,
                dam,
                ofdm: ofdm_closed,
                dam_mc,
                ofdm_mc,
            }
        })
        .collect();
    let mut ordering = true;
    let mut worst_mc: f64 = 0.0;
    for p in &points {
        if p.dam > 1e-6 && p.ofdm > 1e-6 {
            ordering &= p.dam < p.ofdm;
        }
        if let Some(mc) = p.dam_mc {
            worst_mc = worst_mc.max((p.dam / mc - 1.0).abs());
        }
        if let Some(mc) = p.ofdm_mc {
            worst_mc = worst_mc.max((p.ofdm / mc - 1.0).abs());
        }
        println!(
            "  {}-QAM {:>4} dBm: DAM {:.3e} (MC {}), OFDM {:.3e} (MC {})",
            p.order,
            p.dbm,
            p.dam,
            p.dam_mc.map_or("-".into(), |x| format!("{x:.3e}")),
            p.ofdm,
            p.ofdm_mc.map_or("-".into(), |x| format!("{x:.3e}"))
        );
    }
    let checked = points.iter().filter(|p| p.dam_mc.is_some() || p.ofdm_mc.is_some()).count();
    let pass = ordering && worst_mc <= 0.10 && checked > 0;
    report(
        9,
        "BER ordering",
        pass,
        &format!("DAM below OFDM: {ordering}; worst closed-form vs MC gap {:.1}% over {checked} points", 100.0 * worst_mc),
    );
    assert!(pass);
}

#[test]
fn criterion_10_papr() {
    let thresholds: Vec<f64> = (12..=28).map(|k| k as f64 * 0.5).collect();
    let windows = 10_000;
    let paprs = |num_irs: usize, ofdm: bool| -> Vec<f64> {
        let mut sc = scenario(128, 16, 40.0);
        sc.irs_positions.truncate(num_irs);
        let noise = sc.noise_power();
        let chan = sample_channel(&sc, run_seed(10, 0)).unwrap();
        let window = sc.subcarriers + sc.cp_len;
        let time_windows = windows / sc.n_tx + 1;
        let c = Constellation::new(128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(100 + num_irs as u64);
        if ofdm {
            let d = ofdm_design(&chan, sc.power_w, noise, sc.subcarriers, 1e-4).unwrap();
            let u = ofdm_beams(&d.responses, &d.powers);
            let symbols: Vec<Vec<Complex64>> = (0..time_windows)
                .map(|_| c.random_indices(&mut rng, sc.subcarriers).iter().map(|&i| c.points()[i]).collect())
                .collect();
            papr_values(&ofdm_waveform(&symbols, &u, sc.cp_len), window).unwrap()
        } else {
            let unit = PhaseConfig::unit(chan.num_irs(), chan.irs_elements());
            let zf = zf_alternating(&chan, &unit, sc.power_w, noise, &ZfOptions::default()).unwrap();
            papr_values(&dam_papr_waveform(&zf.beams, &c, time_windows * window, &mut rng), window).unwrap()
        }
    };
    let (dam4, (dam2, ofdm)) = rayon::join(|| paprs(4, false), || rayon::join(|| paprs(2, false), || paprs(4, true)));
    let cc = |v: &[f64]| dam_core::metrics::ccdf(v, &thresholds);
    let (c_dam, c_ofdm) = (cc(&dam4), cc(&ofdm));
    let below = c_dam.iter().zip(&c_ofdm).all(|(d, o)| d.1 <= o.1);
    let q2 = papr_at_ccdf(&dam2, 1e-2);
    let q4 = papr_at_ccdf(&dam4, 1e-2);
    let qo = papr_at_ccdf(&ofdm, 1e-2);
    let pass = below && q2 < q4;
    report(
        10,
        "PAPR ordering",
        pass,
        &format!(
            "PAPR at CCDF 1e-2: DAM L=2 {q2:.2} dB, DAM L=4 {q4:.2} dB, OFDM {qo:.2} dB over {} windows; DAM CCDF below OFDM from 6 dB: {below}",
            dam4.len()
        ),
    );
    assert!(pass);
}
