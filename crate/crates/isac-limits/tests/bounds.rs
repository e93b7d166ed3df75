mod common;

use common::{frob, mimo_cfg, paper_stats, random_hermitian, random_hpd, random_psd_trace, rng, tr};
use isac_limits::ba::ChannelModel;
use isac_limits::bounds::{
    bound_curves, envelope_rate_at, outer_solve, pareto_hull, project_trace_simplex,
    rectangle_sag, region_dataset, simplex_projection, time_share_segment, MmseRatePoint,
    OuterProblem, Provenance, RegionOptions,
};
use isac_limits::linalg::{c, CMat};
use isac_limits::model::{sample_comm_channel, RngStream, SensingChannelStats, SystemConfig};
use isac_limits::waterfill::{comm_waterfill, sensing_waterfill};
use isac_limits::IsacError;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

struct Instance {
    cfg: SystemConfig,
    stats: SensingChannelStats,
    h: CMat,
}

fn random_instance(rng: &mut ChaCha20Rng) -> Instance {
    let n = rng.random_range(1..=6);
    let nc = rng.random_range(1..=n + 1);
    let ns = rng.random_range(1..=3);
    let t = rng.random_range(n..=n + 4);
    let p0 = common::uniform(rng, 0.5, 20.0);
    let cfg = mimo_cfg(n, nc, ns, t, p0);
    let sg = random_hpd(n, 0.2, rng);
    let scale = 0.1 * n as f64 / tr(&sg);
    let stats = SensingChannelStats::block(sg * c(scale), ns).unwrap();
    let h = sample_comm_channel(&cfg, rng);
    Instance { cfg, stats, h }
}

#[test]
fn outer_endpoints_match_closed_forms() {
    let mut r = rng(101);
    for _ in 0..20 {
        let inst = random_instance(&mut r);
        let comm = comm_waterfill(&inst.h, &inst.cfg).unwrap();
        let s1 = outer_solve(1.0, &inst.h, &inst.stats, &inst.cfg).unwrap();
        let d1 = frob(&(&s1.r_star.mat - &comm.r_xc.mat));
        assert!(d1 <= 1e-5, "alpha=1 Frobenius {d1}");
        assert!((s1.objective - comm.rate_nats).abs() <= 1e-8, "alpha=1 objective");

        let sens = sensing_waterfill(&inst.stats, &inst.cfg).unwrap();
        let s0 = outer_solve(0.0, &inst.h, &inst.stats, &inst.cfg).unwrap();
        let d0 = frob(&(&s0.r_star.mat - &sens.r_xs.mat));
        assert!(d0 <= 1e-5, "alpha=0 Frobenius {d0}");
        assert!((s0.objective + sens.eps_s.value).abs() <= 1e-8, "alpha=0 objective");
        for s in [&s0, &s1] {
            assert!((tr(&s.r_star.mat) - inst.cfg.total_power()).abs() <= 1e-9 * inst.cfg.total_power());
        }
    }
}

fn random_feasible(n: usize, total: f64, rng: &mut ChaCha20Rng) -> CMat {
    let rank = rng.random_range(1..=n);
    random_psd_trace(n, rank, total, rng)
}

#[test]
fn objective_is_concave_on_segments() {
    let mut r = rng(102);
    for _ in 0..100 {
        let inst = random_instance(&mut r);
        let alpha = common::uniform(&mut r, 0.0, 1.0);
        let prob = OuterProblem::new(alpha, &inst.h, &inst.stats, &inst.cfg).unwrap();
        let total = inst.cfg.total_power();
        let a = random_feasible(inst.cfg.n_tx, total, &mut r);
        let b = random_feasible(inst.cfg.n_tx, total, &mut r);
        let mid = (&a + &b) * c(0.5);
        let f = |m: &CMat| prob.value(m).unwrap().objective;
        assert!(f(&mid) >= 0.5 * f(&a) + 0.5 * f(&b) - 1e-9);
    }
}

#[test]
fn projection_idempotent_and_nonexpansive() {
    let mut r = rng(103);
    for _ in 0..100 {
        let n = r.random_range(1..=6);
        let total = common::uniform(&mut r, 0.5, 10.0);
        let a = random_hermitian(n, &mut r) * c(3.0);
        let b = random_hermitian(n, &mut r) * c(3.0);
        let pa = project_trace_simplex(&a, total).unwrap();
        let pb = project_trace_simplex(&b, total).unwrap();
        let ppa = project_trace_simplex(&pa, total).unwrap();
        assert!(frob(&(&ppa - &pa)) <= 1e-10 * (1.0 + frob(&pa)));
        assert!(frob(&(&pa - &pb)) <= frob(&(&a - &b)) + 1e-10);
        assert!((tr(&pa) - total).abs() <= 1e-10 * total);
        let e = isac_limits::linalg::eig_hermitian(&pa).unwrap();
        assert!(e.values.iter().all(|&v| v >= -1e-10));
    }
}

#[test]
fn simplex_projection_matches_bisection() {
    let mut r = rng(104);
    for _ in 0..200 {
        let n = r.random_range(1..=8);
        let v: Vec<f64> = (0..n).map(|_| common::uniform(&mut r, -3.0, 3.0)).collect();
        let total = common::uniform(&mut r, 0.1, 5.0);
        let got = simplex_projection(&v, total);
        // θ solves Σ max(v − θ, 0) = total
        let s = |th: f64| v.iter().map(|x| (x - th).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (-10.0, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if s(m) > total { lo = m } else { hi = m }
        }
        let th = 0.5 * (lo + hi);
        for (g, x) in got.iter().zip(&v) {
            assert!((g - (x - th).max(0.0)).abs() < 1e-10);
        }
    }
    assert_eq!(simplex_projection(&[1.0, 1.0], 4.0), vec![2.0, 2.0]);
}

/// Hermitian basis direction `k` of the real N²-dimensional space.
fn basis(n: usize, k: usize) -> CMat {
    let mut e = CMat::zeros(n, n);
    let (i, j) = (k / n, k % n);
    if i == j {
        e[(i, i)] = c(1.0);
    } else if i < j {
        e[(i, j)] = c(1.0);
        e[(j, i)] = c(1.0);
    } else {
        e[(j, i)] = Complex64::new(0.0, 1.0);
        e[(i, j)] = Complex64::new(0.0, -1.0);
    }
    e
}

fn fd_relative_error(f: &dyn Fn(&CMat) -> f64, grad: &CMat, r: &CMat) -> f64 {
    let n = r.nrows();
    let h = 1e-5;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n * n {
        let e = basis(n, k);
        let fd = (f(&(r + &e * c(h))) - f(&(r - &e * c(h)))) / (2.0 * h);
        let an = isac_limits::linalg::inner_re(grad, &e);
        num += (fd - an).powi(2);
        den += an.powi(2);
    }
    num.sqrt() / den.sqrt().max(1e-12)
}

#[test]
fn gradients_match_finite_differences() {
    let mut r = rng(105);
    for _ in 0..50 {
        let inst = random_instance(&mut r);
        let n = inst.cfg.n_tx;
        let point = random_hpd(n, 0.1, &mut r) * c(0.3 * inst.cfg.per_antenna_power);
        let prob = OuterProblem::new(0.5, &inst.h, &inst.stats, &inst.cfg).unwrap();
        let logdet = |m: &CMat| prob.value(m).unwrap().logdet;
        let phi = |m: &CMat| prob.value(m).unwrap().phi;
        let e1 = fd_relative_error(&logdet, &prob.logdet_gradient(&point).unwrap(), &point);
        let e2 = fd_relative_error(&phi, &prob.phi_gradient(&point).unwrap(), &point);
        assert!(e1 <= 1e-4, "logdet gradient error {e1}");
        assert!(e2 <= 1e-4, "phi gradient error {e2}");
        let obj = |m: &CMat| prob.value(m).unwrap().objective;
        let e3 = fd_relative_error(&obj, &prob.gradient(&point).unwrap(), &point);
        assert!(e3 <= 1e-4, "objective gradient error {e3}");
    }
}

#[test]
fn interior_solution_beats_endpoint_strategies() {
    let mut r = rng(106);
    for _ in 0..10 {
        let inst = random_instance(&mut r);
        let s = outer_solve(0.5, &inst.h, &inst.stats, &inst.cfg).unwrap();
        assert!(s.converged);
        let prob = OuterProblem::new(0.5, &inst.h, &inst.stats, &inst.cfg).unwrap();
        let rc = comm_waterfill(&inst.h, &inst.cfg).unwrap().r_xc.mat;
        let rs = sensing_waterfill(&inst.stats, &inst.cfg).unwrap().r_xs.mat;
        let fc = prob.value(&rc).unwrap().objective;
        let fs = prob.value(&rs).unwrap().objective;
        assert!(s.objective >= fc - 1e-9 && s.objective >= fs - 1e-9);
    }
}

#[test]
fn outer_problem_rejects_bad_input() {
    let cfg = mimo_cfg(2, 2, 1, 2, 1.0);
    let stats = paper_stats(2, 1);
    let h = CMat::identity(2, 2);
    assert!(matches!(OuterProblem::new(1.5, &h, &stats, &cfg), Err(IsacError::Domain(_))));
    let h3 = CMat::identity(2, 3);
    assert!(matches!(OuterProblem::new(0.5, &h3, &stats, &cfg), Err(IsacError::Dimension(_))));
}

fn pt(mmse: f64, rate: f64) -> MmseRatePoint {
    MmseRatePoint {
        mmse,
        rate_nats: rate,
        alpha: None,
        provenance: Provenance::Sib,
        stderr_mmse: 0.0,
        stderr_rate: 0.0,
        converged: true,
    }
}

#[test]
fn time_share_and_hull() {
    let ps = pt(1.0, 2.0);
    let pc = pt(3.0, 6.0);
    let seg = time_share_segment(&ps, &pc, 3).unwrap();
    assert_eq!((seg[0].mmse, seg[0].rate_nats), (1.0, 2.0));
    assert_eq!((seg[1].mmse, seg[1].rate_nats), (2.0, 4.0));
    assert_eq!((seg[2].mmse, seg[2].rate_nats), (3.0, 6.0));
    assert!(seg.iter().all(|p| p.provenance == Provenance::TimeSharePsPc && p.alpha.is_none()));
    assert!(time_share_segment(&ps, &pc, 1).is_err());

    let same = pareto_hull(&[pt(1.0, 1.0), pt(1.0, 1.0)]).unwrap();
    assert_eq!(same.len(), 1);
    assert!(pareto_hull(&[pt(1.0, 1.0)]).is_err());

    // (2, 2.5) lies under the chord, (3, 5) above it, (5, 4) is dominated
    let hull = pareto_hull(&[pt(1.0, 1.0), pt(2.0, 2.5), pt(3.0, 5.0), pt(4.0, 6.0), pt(5.0, 4.0)]).unwrap();
    let xy: Vec<(f64, f64)> = hull.iter().map(|p| (p.mmse, p.rate_nats)).collect();
    assert_eq!(xy, vec![(1.0, 1.0), (3.0, 5.0), (4.0, 6.0)]);
    assert_eq!(envelope_rate_at(&hull, 2.0), Some(3.0));
    assert_eq!(envelope_rate_at(&hull, 10.0), Some(6.0));
    assert_eq!(envelope_rate_at(&hull, 0.5), None);

    // ties at equal R keep the lower ε
    let tie = pareto_hull(&[pt(1.0, 1.0), pt(2.0, 3.0), pt(3.0, 3.0)]).unwrap();
    assert_eq!(tie.last().unwrap().mmse, 2.0);
}

#[test]
fn sag_of_chord_and_corner() {
    let with_alpha = |a: f64, e: f64, r: f64| MmseRatePoint { alpha: Some(a), ..pt(e, r) };
    let chord = [with_alpha(0.0, 0.0, 0.0), with_alpha(1.0, 1.0, 1.0)];
    assert!((rectangle_sag(&chord).unwrap() - 0.5).abs() < 1e-15);
    let corner = [with_alpha(0.0, 0.0, 0.0), with_alpha(0.5, 0.1, 0.9), with_alpha(1.0, 1.0, 1.0)];
    let s = rectangle_sag(&corner).unwrap();
    assert!(s > 0.0 && s < 0.2, "{s}");
    assert!(rectangle_sag(&chord[..1]).is_err());
    assert!(rectangle_sag(&[with_alpha(0.0, 1.0, 1.0), with_alpha(1.0, 1.0, 1.0)]).is_err());
}

fn paper_n2(t: usize, trials: usize) -> (SystemConfig, SensingChannelStats) {
    let cfg = SystemConfig { mc_trials: trials, ..mimo_cfg(2, 2, 2, t, 1.0) }.with_transmit_snr_db(20.0);
    (cfg, paper_stats(2, 2))
}

#[test]
fn dominance_lattice_on_paper_config() {
    let (cfg, stats) = paper_n2(2, 300);
    let alphas = [0.0, 0.25, 0.5, 0.75, 1.0];
    let ds = region_dataset(&cfg, &stats, &alphas, RngStream::new(3, 2), &RegionOptions::default()).unwrap();
    assert!(!ds.limit_included);
    assert!(ds.warnings.iter().all(|w| !w.starts_with("ordering")), "{:?}", ds.warnings);
    let cv = &ds.curves;
    for i in 0..alphas.len() {
        let rg = cv.rate_gap[i];
        assert!(rg.mean >= -3.0 * rg.stderr);
        let mg = cv.mmse_gap[i];
        assert!(mg.mean >= -3.0 * mg.stderr);
        assert_eq!(cv.sib[i].mmse, cv.outer[i].mmse);
        assert_eq!(cv.cib[i].rate_nats, cv.outer[i].rate_nats);
    }
    let eps_s = sensing_waterfill(&stats, &cfg).unwrap().eps_s.value;
    assert_eq!(cv.outer[0].mmse, eps_s);
    for p in &ds.points {
        assert!(p.mmse <= 0.03 * 4.0 + 1e-12 && p.rate_nats >= 0.0);
    }
    let kinds: std::collections::BTreeSet<&str> = ds.points.iter().map(|p| p.provenance.as_str()).collect();
    for k in ["outer", "sib", "cib", "timeshare_ps_pc", "timeshare_cib_sib"] {
        assert!(kinds.contains(k));
    }
}

#[test]
fn outer_comm_end_matches_ergodic_capacity() {
    let (cfg, stats) = paper_n2(2, 300);
    let cv = bound_curves(&[0.0, 1.0], &stats, &cfg, RngStream::new(4, 0)).unwrap();
    let cap = isac_limits::waterfill::ergodic_average(
        |h| Ok(comm_waterfill(h, &cfg)?.rate_nats),
        &cfg,
        RngStream::new(4, 0),
    )
    .unwrap();
    let out = &cv.outer[1];
    assert!((out.rate_nats - cap.mean).abs() <= 3.0 * out.stderr_rate.max(cap.stderr) + 1e-12);
}

#[test]
fn siso_region_includes_limit() {
    let cfg = SystemConfig { mc_trials: 50, ..SystemConfig::default() };
    let stats = SensingChannelStats::block(CMat::identity(1, 1), 1).unwrap();
    let opts = RegionOptions { channel: ChannelModel::Fixed(1.0), ..RegionOptions::default() };
    let ds = region_dataset(&cfg, &stats, &[0.5], RngStream::new(1, 2), &opts).unwrap();
    assert!(ds.limit_included);
    let limit: Vec<&MmseRatePoint> = ds.points.iter().filter(|p| p.provenance == Provenance::Limit).collect();
    assert_eq!(limit.len(), 3);
    assert_eq!(limit[0].mmse, 0.5);
    assert!(ds.warnings.iter().any(|w| w.contains("below 10 dB")));
    assert!(matches!(
        region_dataset(&cfg, &stats, &[], RngStream::new(1, 2), &opts),
        Err(IsacError::Domain(_))
    ));
}

#[test]
fn normalized_sensing_end_is_invariant_in_ns() {
    let mut raw = vec![];
    let mut norm = vec![];
    for ns in 1..=3 {
        let cfg = SystemConfig { mc_trials: 20, ..mimo_cfg(2, 2, ns, 2, 10.0) };
        let stats = paper_stats(2, ns);
        let cv = bound_curves(&[0.0], &stats, &cfg, RngStream::new(8, 0)).unwrap();
        raw.push(cv.outer[0].mmse);
        norm.push(cv.outer[0].mmse / (2 * ns) as f64);
    }
    for k in 1..3 {
        assert!((norm[k] - norm[0]).abs() <= 1e-14 * norm[0]);
        assert!((raw[k] - (k + 1) as f64 * raw[0]).abs() <= 1e-14 * raw[k]);
    }
}

#[test]
fn sib_gap_shrinks_with_coherence_time() {
    let alphas = [0.0, 0.5, 1.0];
    let gap = |t: usize| {
        let (cfg, stats) = paper_n2(t, 200);
        bound_curves(&alphas, &stats, &cfg, RngStream::new(6, 0)).unwrap().rate_gap
    };
    let (g6, g60) = (gap(6), gap(60));
    for i in 0..alphas.len() {
        assert!(g6[i].mean >= 0.0 && g60[i].mean >= 0.0);
        assert!(g60[i].mean < g6[i].mean, "alpha {}: {} vs {}", alphas[i], g60[i].mean, g6[i].mean);
    }
}

#[test]
fn cib_gap_small_at_long_coherence() {
    let (cfg, stats) = paper_n2(200, 200);
    let cv = bound_curves(&[0.0, 0.5, 1.0], &stats, &cfg, RngStream::new(7, 0)).unwrap();
    for i in 0..3 {
        let g = cv.mmse_gap[i];
        assert!(g.mean >= -3.0 * g.stderr);
        let rel = g.mean / cv.outer[i].mmse;
        assert!(rel <= 0.02, "alpha index {i}: relative gap {rel}");
    }
}

#[test]
fn bound_curves_reject_bad_alpha_grids() {
    let (cfg, stats) = paper_n2(2, 2);
    assert!(matches!(bound_curves(&[], &stats, &cfg, RngStream::new(0, 0)), Err(IsacError::Domain(_))));
    assert!(matches!(bound_curves(&[1.2], &stats, &cfg, RngStream::new(0, 0)), Err(IsacError::Domain(_))));
}
