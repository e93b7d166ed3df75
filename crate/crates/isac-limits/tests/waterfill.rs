mod common;

use common::*;
use isac_limits::linalg::{self, c, CMat};
use isac_limits::model::{complex_gaussian_matrix, Estimate, RngStream, SensingChannelStats, SystemConfig};
use isac_limits::sensing::phi_block;
use isac_limits::waterfill::{
    c0, coherent_rate, comm_waterfill, ergodic_average, high_snr_rate, sensing_limited_rate,
    sensing_waterfill, water_level,
};
use isac_limits::IsacError;

/// Water level by bisection on Σ(η − noise/g)⁺ − budget.
fn bisect_level(gains: &[f64], noise: f64, budget: f64) -> f64 {
    let fill = |eta: f64| gains.iter().filter(|&&g| g > 0.0).map(|&g| (eta - noise / g).max(0.0)).sum::<f64>() - budget;
    let (mut lo, mut hi) = (0.0, budget + gains.iter().filter(|&&g| g > 0.0).map(|g| noise / g).fold(0.0, f64::max));
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > 0.0 {
            hi = mid
        } else {
            lo = mid
        }
    }
    0.5 * (lo + hi)
}

fn assert_kkt(gains: &[f64], powers: &[f64], eta: f64, noise: f64) {
    for (&g, &p) in gains.iter().zip(powers) {
        if p == 0.0 {
            assert!(g <= 0.0 || eta <= noise / g + 1e-10, "inactive mode below water");
        } else {
            assert!((p - (eta - noise / g)).abs() <= 1e-10 * eta.max(1.0));
        }
    }
}

#[test]
fn identity_covariance_closed_form() {
    for (n, ns, t, p0, s2) in [(2, 2, 2, 1.0, 1.0), (3, 1, 5, 2.0, 0.5), (4, 3, 4, 0.3, 2.0)] {
        let cfg = SystemConfig {
            n_tx: n,
            n_rx_sense: ns,
            coherence_time: t,
            per_antenna_power: p0,
            sense_noise_var: s2,
            ..SystemConfig::default()
        };
        let stats = SensingChannelStats::block(linalg::identity(n), ns).unwrap();
        let sw = sensing_waterfill(&stats, &cfg).unwrap();
        let tf = t as f64;
        assert!((sw.fill.water_level - (s2 + tf * p0)).abs() < 1e-12 * (s2 + tf * p0));
        assert!(sw.fill.powers.iter().all(|&p| (p - tf * p0).abs() < 1e-12 * tf * p0));
        let eps = (ns * n) as f64 * s2 / (s2 + tf * p0);
        assert!((sw.eps_s.value - eps).abs() <= 1e-12 * eps);
    }
}

#[test]
fn budget_and_trace_are_exact() {
    let stats = paper_stats(6, 3);
    let cfg = mimo_cfg(6, 3, 3, 6, 10.0);
    let sw = sensing_waterfill(&stats, &cfg).unwrap();
    let budget = 6.0 * 6.0 * 10.0;
    assert!((sw.fill.powers.iter().sum::<f64>() - budget).abs() <= 1e-10 * budget);
    assert!((tr(&sw.r_xs.mat) - 60.0).abs() <= 1e-10 * 60.0);
    assert_kkt(&sw.fill.gains, &sw.fill.powers, sw.fill.water_level, 1.0);
    assert!((sw.fill.water_level - bisect_level(&sw.fill.gains, 1.0, budget)).abs() < 1e-9 * sw.fill.water_level);
    // Φ of R_Xs reproduces ε_s
    let phi = phi_block(&sw.r_xs.mat, &stats, 6, 1.0).unwrap().value;
    assert!((phi - sw.eps_s.value).abs() < 1e-10 * phi);
}

#[test]
fn paper_scenario_three_modes_at_level_200() {
    // choose P0 so the sensing water level is 200 W
    let stats = paper_stats(6, 3);
    let lam = stats.eigenvalues().to_vec();
    let (n, t) = (6.0, 6.0);
    let budget: f64 = lam.iter().map(|l| (200.0 - 1.0 / l).max(0.0)).sum();
    let cfg = mimo_cfg(6, 3, 3, 6, budget / (t * n));
    let sw = sensing_waterfill(&stats, &cfg).unwrap();
    assert!((sw.fill.water_level - 200.0).abs() < 1e-9);
    assert_eq!(sw.fill.active_count, 3);
}

#[test]
fn active_count_monotone_in_budget() {
    let gains = [1.0, 1e-9];
    let (_, p) = water_level(&gains, 1.0, 1e-3).unwrap();
    assert!(p[0] > 0.0 && p[1] == 0.0);
    let (_, p) = water_level(&gains, 1.0, 1e12).unwrap();
    assert!(p[0] > 0.0 && p[1] > 0.0);
    let mut r = rng(1);
    let gains: Vec<f64> = (0..6).map(|_| uniform(&mut r, 0.01, 2.0)).collect();
    let mut last = 0;
    for k in 0..60 {
        let budget = 1e-3 * 1.3f64.powi(k);
        let (eta, p) = water_level(&gains, 0.7, budget).unwrap();
        let active = p.iter().filter(|&&x| x > 0.0).count();
        assert!(active >= last);
        last = active;
        assert_kkt(&gains, &p, eta, 0.7);
        assert!((eta - bisect_level(&gains, 0.7, budget)).abs() <= 1e-9 * eta);
        assert!((p.iter().sum::<f64>() - budget).abs() <= 1e-10 * budget);
    }
}

#[test]
fn zero_gains_get_no_power() {
    let (_, p) = water_level(&[2.0, 0.0, 1.0], 1.0, 5.0).unwrap();
    assert_eq!(p[1], 0.0);
    assert!(matches!(water_level(&[0.0, 0.0], 1.0, 1.0), Err(IsacError::DegenerateChannel(_))));
    let stats = SensingChannelStats::block(linalg::diag_real(&[1.0, 0.0]), 2).unwrap();
    let cfg = mimo_cfg(2, 1, 2, 2, 1.0);
    let sw = sensing_waterfill(&stats, &cfg).unwrap();
    assert_eq!(sw.fill.active_count, 1);
    // all power on the live mode, which then has MSE 1/(1 + T·N·P0)
    assert!((sw.eps_s.value - 2.0 / (1.0 + 4.0)).abs() < 1e-12);
    let zero = SensingChannelStats::block(CMat::zeros(2, 2), 1).unwrap();
    assert!(matches!(sensing_waterfill(&zero, &cfg), Err(IsacError::DegenerateChannel(_))));
}

#[test]
fn sensing_mmse_decreases_in_power_and_scales_with_ns() {
    let s1 = paper_stats(4, 1);
    let s2 = paper_stats(4, 2);
    let mut prev = f64::INFINITY;
    for k in 0..20 {
        let p0 = 0.1 * 1.5f64.powi(k);
        let cfg = mimo_cfg(4, 2, 1, 4, p0);
        let e1 = sensing_waterfill(&s1, &cfg).unwrap().eps_s.value;
        assert!(e1 < prev);
        prev = e1;
        let e2 = sensing_waterfill(&s2, &cfg).unwrap().eps_s.value;
        assert_eq!(e2, 2.0 * e1);
    }
}

#[test]
fn sensing_waterfill_is_locally_optimal() {
    let stats = paper_stats(3, 2);
    let cfg = mimo_cfg(3, 2, 2, 3, 5.0);
    let sw = sensing_waterfill(&stats, &cfg).unwrap();
    let total = cfg.total_power();
    let mut r = rng(2);
    for k in 0..1000 {
        let d = random_hermitian(3, &mut r) * c(1e-3 * (1 + k % 10) as f64);
        let cand = isac_limits::bounds::project_trace_simplex(&(&sw.r_xs.mat + d), total).unwrap();
        let v = phi_block(&cand, &stats, 3, 1.0).unwrap().value;
        assert!(v >= sw.eps_s.value - 1e-9);
    }
}

#[test]
fn comm_symmetric_and_rank_one() {
    let cfg = mimo_cfg(3, 3, 1, 3, 1.0);
    let cw = comm_waterfill(&linalg::identity(3), &cfg).unwrap();
    assert!((cw.fill.water_level - 2.0).abs() < 1e-12);
    assert!((cw.rate_nats - 3.0 * 2f64.ln()).abs() < 1e-12);

    let mut r = rng(3);
    let u = complex_gaussian_matrix(2, 1, 1.0, &mut r);
    let v = complex_gaussian_matrix(1, 4, 1.0, &mut r);
    let h = &u * &v;
    let cfg = mimo_cfg(4, 2, 1, 4, 0.8);
    let g = linalg::eig_psd(&(h.adjoint() * &h)).unwrap().values[0];
    let cw = comm_waterfill(&h, &cfg).unwrap();
    assert!((cw.rate_nats - (1.0 + g * 4.0 * 0.8).ln()).abs() < 1e-10);
    assert_eq!(cw.fill.active_count, 1);
}

#[test]
fn comm_zero_channel_is_degenerate() {
    let cfg = mimo_cfg(2, 2, 1, 2, 1.0);
    assert!(matches!(comm_waterfill(&CMat::zeros(2, 2), &cfg), Err(IsacError::DegenerateChannel(_))));
}

/// Projected gradient ascent of Σ log(1 + γ_i p_i/σ²) over the power simplex.
fn diag_capacity_oracle(gains: &[f64], noise: f64, total: f64) -> f64 {
    let n = gains.len();
    let mut p = vec![total / n as f64; n];
    let f = |p: &[f64]| gains.iter().zip(p).map(|(g, x)| (1.0 + g * x / noise).ln()).sum::<f64>();
    let step = 0.5 * noise / gains.iter().cloned().fold(0.0, f64::max);
    for _ in 0..200_000 {
        let grad: Vec<f64> = gains.iter().zip(&p).map(|(g, x)| g / (noise + g * x)).collect();
        let v: Vec<f64> = p.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
        p = isac_limits::bounds::simplex_projection(&v, total);
    }
    f(&p)
}

#[test]
fn comm_random_instance_matches_optimizer_oracle() {
    let mut r = rng(4);
    for _ in 0..5 {
        let h = complex_gaussian_matrix(3, 6, 1.0, &mut r);
        let cfg = mimo_cfg(6, 3, 1, 6, 2.0);
        let cw = comm_waterfill(&h, &cfg).unwrap();
        assert_kkt(&cw.fill.gains, &cw.fill.powers, cw.fill.water_level, 1.0);
        assert!(cw.fill.active_count <= 3);
        let oracle = diag_capacity_oracle(&cw.fill.gains[..3], 1.0, 12.0);
        assert!((cw.rate_nats - oracle).abs() <= 1e-6, "{} vs {oracle}", cw.rate_nats);
        let direct = coherent_rate(&h, &cw.r_xc.mat, 1.0).unwrap();
        assert!((direct - cw.rate_nats).abs() <= 1e-10);
        assert!((tr(&cw.r_xc.mat) - 12.0).abs() <= 1e-10 * 12.0);
    }
}

#[test]
fn c0_matches_direct_evaluation() {
    let ln_two_sqrt_pi = 2f64.ln() + 0.5 * std::f64::consts::PI.ln();
    assert!((c0(1, 1) - (-0.5 + ln_two_sqrt_pi)).abs() < 1e-14);
    // ln Γ(6) = ln 120
    let want = (2.0 / 6.0) * ((6.0 - 1.0) * (6f64.ln() - 1.0) - 120f64.ln() + ln_two_sqrt_pi);
    assert!((c0(2, 6) - want).abs() < 1e-13);
    assert_eq!(c0(0, 5), 0.0);
}

#[test]
fn high_snr_scalar_worked_example() {
    // N = Nc = T = 1, |h|² = 1, σc² = 1, P0 = 100:
    // (1 − 1/2)·ln 100 + c0(1, 1) = ln 10 − 0.5 + ln(2√π)
    let h = linalg::identity(1);
    let r = linalg::identity(1) * c(100.0);
    let got = high_snr_rate(&h, &r, 1, 1.0).unwrap();
    let want = 10f64.ln() - 0.5 + (2.0 * std::f64::consts::PI.sqrt()).ln();
    assert!((got - want).abs() < 1e-12);
    assert!((got - 3.0681).abs() < 1e-4);
}

#[test]
fn high_snr_rank_bounded_by_receivers() {
    let mut r = rng(5);
    let h = complex_gaussian_matrix(1, 3, 1.0, &mut r);
    let rr = random_psd_trace(3, 3, 3.0, &mut r);
    let mu = (&h * &rr * h.adjoint())[(0, 0)].re;
    let got = high_snr_rate(&h, &rr, 4, 1.0).unwrap();
    let want = (1.0 - 1.0 / 8.0) * mu.ln() + c0(1, 4);
    assert!((got - want).abs() < 1e-12);
    assert_eq!(high_snr_rate(&h, &CMat::zeros(3, 3), 4, 1.0).unwrap(), 0.0);
}

#[test]
fn sensing_limited_rate_below_coherent_rate() {
    let stats = paper_stats(2, 2);
    let mut prefactor = 0.0;
    for t in [6, 60, 600] {
        let cfg = SystemConfig { mc_trials: 2000, ..mimo_cfg(2, 2, 2, t, 50.0) };
        let rs = sensing_limited_rate(&cfg, &stats, RngStream::new(1, 0)).unwrap();
        let rc = ergodic_average(|h| Ok(comm_waterfill(h, &cfg)?.rate_nats), &cfg, RngStream::new(1, 0)).unwrap();
        assert!(rs.mean <= rc.mean);
        let sw = sensing_waterfill(&stats, &cfg).unwrap();
        let p = 1.0 - sw.fill.active_count as f64 / (2.0 * t as f64);
        assert!(p > prefactor);
        prefactor = p;
    }
}

/// E1(x) by its power series (x ≤ 1).
fn expint_e1(x: f64) -> f64 {
    let mut s = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        s += term / k as f64;
    }
    -0.5772156649015329 - x.ln() - s
}

#[test]
fn ergodic_average_cases() {
    let cfg = SystemConfig { mc_trials: 100, ..SystemConfig::default() };
    let e = ergodic_average(|_| Ok(0.25), &cfg, RngStream::new(3, 0)).unwrap();
    assert_eq!((e.mean, e.stderr), (0.25, 0.0));

    // ½ E ln(1 + ρ|h|²) with |h|² ~ Exp(1) is ½ e^{1/ρ} E1(1/ρ)
    let rho: f64 = 10.0;
    let exact = 0.5 * (1.0 / rho).exp() * expint_e1(1.0 / rho);
    let f = |h: &CMat| Ok(0.5 * (1.0 + h[(0, 0)].norm_sqr() * rho).ln());
    let small = ergodic_average(f, &SystemConfig { mc_trials: 10_000, ..cfg.clone() }, RngStream::new(3, 1)).unwrap();
    let big = ergodic_average(f, &SystemConfig { mc_trials: 1_000_000, ..cfg.clone() }, RngStream::new(3, 2)).unwrap();
    assert!((small.mean - big.mean).abs() <= 3.0 * small.stderr.hypot(big.stderr));
    assert!((big.mean - exact).abs() <= 4.0 * big.stderr);

    let cfg = SystemConfig { mc_trials: 2000, ..cfg };
    let runs: Vec<Estimate> = (0..20).map(|s| ergodic_average(f, &cfg, RngStream::new(100 + s, 0)).unwrap()).collect();
    for e in &runs {
        assert!((e.mean - exact).abs() <= 4.0 * e.stderr);
    }
}
