//! Outer bound over statistical correlation matrices, the sensing- and
//! communication-based inner bounds, time-sharing envelopes, and assembly of
//! the region dataset.

use serde::{Deserialize, Serialize};

use crate::ba::{limit_curve, ChannelModel, GridSpec};
use crate::error::{IsacError, Result};
use crate::linalg::{self, c, CMat};
use crate::model::{
    complex_gaussian_matrix, monte_carlo, sample_comm_channel, CorrelationMatrix, Estimate,
    RngStream, SensingChannelStats, SystemConfig,
};
use crate::sensing::phi_block;
use crate::waterfill::{coherent_rate, comm_waterfill, high_snr_rate, sensing_waterfill};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Limit,
    Outer,
    Sib,
    Cib,
    TimeSharePsPc,
    TimeShareCibSib,
    Strategy,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Limit => "limit",
            Provenance::Outer => "outer",
            Provenance::Sib => "sib",
            Provenance::Cib => "cib",
            Provenance::TimeSharePsPc => "timeshare_ps_pc",
            Provenance::TimeShareCibSib => "timeshare_cib_sib",
            Provenance::Strategy => "strategy",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseRatePoint {
    pub mmse: f64,
    pub rate_nats: f64,
    /// None for time-share points.
    pub alpha: Option<f64>,
    pub provenance: Provenance,
    pub stderr_mmse: f64,
    pub stderr_rate: f64,
    pub converged: bool,
}

impl MmseRatePoint {
    pub fn new(mmse: Estimate, rate: Estimate, alpha: Option<f64>, provenance: Provenance) -> Self {
        MmseRatePoint {
            mmse: mmse.mean,
            rate_nats: rate.mean,
            alpha,
            provenance,
            stderr_mmse: mmse.stderr,
            stderr_rate: rate.stderr,
            converged: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Outer bound solve
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OuterBoundSolve {
    /// R⋆(α)
    pub r_star: CorrelationMatrix,
    pub objective: f64,
    pub grad_norm_at_solution: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOptions {
    pub max_iters: usize,
    /// Stop when the projected-gradient norm ≤ grad_tol·g0, where g0 is the
    /// gradient norm at P0·I.
    pub grad_tol: f64,
    /// Also stop after 50 consecutive steps each changing the objective by
    /// ≤ obj_tol·g0·N·P0.
    pub obj_tol: f64,
}

impl Default for OuterOptions {
    fn default() -> Self {
        OuterOptions {
            max_iters: 50_000,
            grad_tol: 1e-7,
            obj_tol: 1e-10,
        }
    }
}

/// f(R) = α·log det(I + H R H†/σc²) − (1−α)·Φ(I⊗R) on {R ⪰ 0, Tr R = N·P0}.
pub struct OuterProblem<'a> {
    pub alpha: f64,
    h: &'a CMat,
    stats: &'a SensingChannelStats,
    cfg: &'a SystemConfig,
}

#[derive(Debug, Clone, Copy)]
pub struct OuterValue {
    pub objective: f64,
    pub logdet: f64,
    pub phi: f64,
}

impl<'a> OuterProblem<'a> {
    pub fn new(
        alpha: f64,
        h: &'a CMat,
        stats: &'a SensingChannelStats,
        cfg: &'a SystemConfig,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(IsacError::Domain(format!("alpha {alpha} outside [0, 1]")));
        }
        if h.ncols() != cfg.n_tx || stats.n_tx() != cfg.n_tx {
            return Err(IsacError::Dimension(
                "channel, sensing covariance and config disagree on N".into(),
            ));
        }
        Ok(OuterProblem {
            alpha,
            h,
            stats,
            cfg,
        })
    }

    pub fn value(&self, r: &CMat) -> Result<OuterValue> {
        let logdet = coherent_rate(self.h, r, self.cfg.comm_noise_var)?;
        let phi = phi_block(r, self.stats, self.cfg.coherence_time, self.cfg.sense_noise_var)?.value;
        Ok(OuterValue {
            objective: self.alpha * logdet - (1.0 - self.alpha) * phi,
            logdet,
            phi,
        })
    }

    /// H†(σc² I + H R H†)⁻¹ H
    pub fn logdet_gradient(&self, r: &CMat) -> Result<CMat> {
        let nc = self.h.nrows();
        let k = linalg::identity(nc) * c(self.cfg.comm_noise_var)
            + linalg::hermitize(&(self.h * r * self.h.adjoint()));
        let sol = linalg::solve_hpd(&k, self.h)?;
        Ok(linalg::hermitize(&(self.h.adjoint() * sol)))
    }

    /// dΦ(I⊗R)/dR
    pub fn phi_gradient(&self, r: &CMat) -> Result<CMat> {
        crate::sensing::phi_block_gradient(
            r,
            self.stats,
            self.cfg.coherence_time,
            self.cfg.sense_noise_var,
        )
    }

    pub fn gradient(&self, r: &CMat) -> Result<CMat> {
        let mut g = CMat::zeros(r.nrows(), r.ncols());
        if self.alpha > 0.0 {
            g += self.logdet_gradient(r)? * c(self.alpha);
        }
        if self.alpha < 1.0 {
            g -= self.phi_gradient(r)? * c(1.0 - self.alpha);
        }
        Ok(g)
    }
}

/// Euclidean projection of v onto {w ≥ 0, Σw = total}.
pub fn simplex_projection(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        css += uj;
        let cand = (css - total) / (j + 1) as f64;
        if uj - cand > 0.0 {
            theta = cand;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Projection onto {R ⪰ 0, Tr R = total}: project the spectrum onto the simplex.
pub fn project_trace_simplex(r: &CMat, total: f64) -> Result<CMat> {
    let e = linalg::eig_hermitian(&linalg::hermitize(r))?;
    let w = simplex_projection(&e.values, total);
    Ok(linalg::reassemble(&e.vectors, &w))
}

/// Projected gradient ascent from R = P0·I.
pub fn outer_solve(
    alpha: f64,
    h: &CMat,
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
) -> Result<OuterBoundSolve> {
    let init = linalg::identity(cfg.n_tx) * c(cfg.per_antenna_power);
    outer_solve_from(alpha, h, stats, cfg, &init, &OuterOptions::default())
}

const STALL_STEPS: usize = 50;

/// Projected gradient ascent with backtracking from `init`.
pub fn outer_solve_from(
    alpha: f64,
    h: &CMat,
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    init: &CMat,
    opts: &OuterOptions,
) -> Result<OuterBoundSolve> {
    let prob = OuterProblem::new(alpha, h, stats, cfg)?;
    let total = cfg.total_power();
    // tolerances are relative to the gradient magnitude at P0·I, so the
    // stopping point does not depend on the units of f
    let scale = linalg::frobenius(&prob.gradient(&(linalg::identity(cfg.n_tx) * c(cfg.per_antenna_power)))?);
    let mut r = project_trace_simplex(init, total)?;
    let mut f = prob.value(&r)?.objective;
    let mut g = prob.gradient(&r)?;
    let gnorm = linalg::frobenius(&g);
    let mut t = if gnorm > 0.0 { total / gnorm } else { 1.0 };
    let mut grad_map = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let (rn, fnew, d) = loop {
            let cand = project_trace_simplex(&(&r + &g * c(t)), total)?;
            let d = &cand - &r;
            let fc = prob.value(&cand)?.objective;
            let dn2 = linalg::frobenius(&d).powi(2);
            let model = f + linalg::inner_re(&g, &d) - dn2 / (2.0 * t);
            if fc >= model - 1e-15 * (1.0 + f.abs()) || t < 1e-30 {
                break (cand, fc, d);
            }
            t *= 0.5;
        };
        grad_map = linalg::frobenius(&d) / t;
        let change = (fnew - f).abs();
        if fnew >= f {
            r = rn;
            f = fnew;
        }
        if grad_map <= opts.grad_tol * scale {
            converged = true;
            break;
        }
        // objective change alone only ends a run that has stopped moving
        stalled = if change <= opts.obj_tol * scale * total { stalled + 1 } else { 0 };
        if stalled >= STALL_STEPS {
            converged = true;
            break;
        }
        g = prob.gradient(&r)?;
        t *= 2.0;
    }
    Ok(OuterBoundSolve {
        r_star: CorrelationMatrix::new(r, total)?,
        objective: f,
        grad_norm_at_solution: grad_map,
        iterations,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Bound curves
// ---------------------------------------------------------------------------

/// Outer, SIB and CIB curves over an α grid, computed in one pass so every
/// curve sees the same channel and Gaussian-waveform draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCurves {
    pub alphas: Vec<f64>,
    pub outer: Vec<MmseRatePoint>,
    pub sib: Vec<MmseRatePoint>,
    pub cib: Vec<MmseRatePoint>,
    /// Paired R^out − R^in_s per α.
    pub rate_gap: Vec<Estimate>,
    /// Paired ε^in_c − ε^out per α.
    pub mmse_gap: Vec<Estimate>,
    pub max_iterations: usize,
}

struct TrialRow {
    out_rate: f64,
    out_mmse: f64,
    sib_rate: f64,
    cib_mmse: f64,
    converged: bool,
    iterations: usize,
}

/// Per trial: H, then a CN(0, I) block W for the Gaussian waveform X = L W.
/// Interior α are warm-started from the previous interior solution.
pub fn bound_curves(
    alphas: &[f64],
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    stream: RngStream,
) -> Result<BoundCurves> {
    cfg.validate()?;
    if alphas.is_empty() {
        return Err(IsacError::Domain("empty alpha grid".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(IsacError::Domain(format!("alpha {a} outside [0, 1]")));
    }
    let t = cfg.coherence_time;
    let sw = sensing_waterfill(stats, cfg)?;
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[a].partial_cmp(&alphas[b]).unwrap());
    let opts = OuterOptions::default();
    let rows: Vec<Vec<TrialRow>> = monte_carlo(cfg.mc_trials, stream, |_, rng| {
        let h = sample_comm_channel(cfg, rng);
        let w = complex_gaussian_matrix(cfg.n_tx, t, 1.0, rng);
        let mut out: Vec<Option<TrialRow>> = (0..alphas.len()).map(|_| None).collect();
        let mut warm = linalg::identity(cfg.n_tx) * c(cfg.per_antenna_power);
        for &idx in &order {
            let alpha = alphas[idx];
            let (r, converged, iterations) = if alpha == 0.0 {
                (sw.r_xs.mat.clone(), true, 0)
            } else if alpha == 1.0 {
                (comm_waterfill(&h, cfg)?.r_xc.mat, true, 0)
            } else {
                let s = outer_solve_from(alpha, &h, stats, cfg, &warm, &opts)?;
                warm = s.r_star.mat.clone();
                (s.r_star.mat, s.converged, s.iterations)
            };
            let out_rate = coherent_rate(&h, &r, cfg.comm_noise_var)?;
            let out_mmse = if alpha == 0.0 {
                sw.eps_s.value
            } else {
                phi_block(&r, stats, t, cfg.sense_noise_var)?.value
            };
            let sib_rate = high_snr_rate(&h, &r, t, cfg.comm_noise_var)?;
            let x = linalg::psd_factor(&r)? * &w;
            let rs = linalg::hermitize(&(&x * x.adjoint())) / c(t as f64);
            let cib_mmse = phi_block(&rs, stats, t, cfg.sense_noise_var)?.value;
            out[idx] = Some(TrialRow {
                out_rate,
                out_mmse,
                sib_rate,
                cib_mmse,
                converged,
                iterations,
            });
        }
        Ok(out.into_iter().map(|r| r.expect("every alpha solved")).collect())
    })?;

    let mut curves = BoundCurves {
        alphas: alphas.to_vec(),
        outer: vec![],
        sib: vec![],
        cib: vec![],
        rate_gap: vec![],
        mmse_gap: vec![],
        max_iterations: 0,
    };
    for (ai, &alpha) in alphas.iter().enumerate() {
        let col = |f: &dyn Fn(&TrialRow) -> f64| {
            Estimate::from_samples(&rows.iter().map(|r| f(&r[ai])).collect::<Vec<_>>())
        };
        let out_rate = col(&|r| r.out_rate);
        let out_mmse = col(&|r| r.out_mmse);
        let sib_rate = col(&|r| r.sib_rate);
        let cib_mmse = col(&|r| r.cib_mmse);
        let converged = rows.iter().all(|r| r[ai].converged);
        curves.max_iterations = curves
            .max_iterations
            .max(rows.iter().map(|r| r[ai].iterations).max().unwrap_or(0));
        let mut o = MmseRatePoint::new(out_mmse, out_rate, Some(alpha), Provenance::Outer);
        let mut s = MmseRatePoint::new(out_mmse, sib_rate, Some(alpha), Provenance::Sib);
        let mut ci = MmseRatePoint::new(cib_mmse, out_rate, Some(alpha), Provenance::Cib);
        o.converged = converged;
        s.converged = converged;
        ci.converged = converged;
        curves.outer.push(o);
        curves.sib.push(s);
        curves.cib.push(ci);
        curves.rate_gap.push(col(&|r| r.out_rate - r.sib_rate));
        curves.mmse_gap.push(col(&|r| r.cib_mmse - r.out_mmse));
    }
    Ok(curves)
}

pub fn outer_curve(
    alphas: &[f64],
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    stream: RngStream,
) -> Result<Vec<MmseRatePoint>> {
    Ok(bound_curves(alphas, stats, cfg, stream)?.outer)
}

pub fn sib_curve(
    alphas: &[f64],
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    stream: RngStream,
) -> Result<Vec<MmseRatePoint>> {
    Ok(bound_curves(alphas, stats, cfg, stream)?.sib)
}

pub fn cib_curve(
    alphas: &[f64],
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    stream: RngStream,
) -> Result<Vec<MmseRatePoint>> {
    Ok(bound_curves(alphas, stats, cfg, stream)?.cib)
}

// ---------------------------------------------------------------------------
// Time sharing
// ---------------------------------------------------------------------------

/// Points p·Ps + (1−p)·Pc for `count` equally spaced p from 1 down to 0.
pub fn time_share_segment(
    ps: &MmseRatePoint,
    pc: &MmseRatePoint,
    count: usize,
) -> Result<Vec<MmseRatePoint>> {
    if count < 2 {
        return Err(IsacError::Domain("time sharing needs at least 2 points".into()));
    }
    Ok((0..count)
        .map(|k| {
            let p = 1.0 - k as f64 / (count - 1) as f64;
            let q = 1.0 - p;
            MmseRatePoint {
                mmse: p * ps.mmse + q * pc.mmse,
                rate_nats: p * ps.rate_nats + q * pc.rate_nats,
                alpha: None,
                provenance: Provenance::TimeSharePsPc,
                stderr_mmse: p * ps.stderr_mmse + q * pc.stderr_mmse,
                stderr_rate: p * ps.stderr_rate + q * pc.stderr_rate,
                converged: ps.converged && pc.converged,
            }
        })
        .collect())
}

fn cross(o: &MmseRatePoint, a: &MmseRatePoint, b: &MmseRatePoint) -> f64 {
    (a.mmse - o.mmse) * (b.rate_nats - o.rate_nats) - (a.rate_nats - o.rate_nats) * (b.mmse - o.mmse)
}

/// Pareto face (minimal ε, maximal R) of the convex hull of `points`.
///
/// Vertices are returned by increasing ε and increasing R; at equal R the
/// vertex with lower ε wins.
pub fn pareto_hull(points: &[MmseRatePoint]) -> Result<Vec<MmseRatePoint>> {
    if points.len() < 2 {
        return Err(IsacError::Domain("convex envelope needs at least 2 points".into()));
    }
    let mut pts: Vec<MmseRatePoint> = points.to_vec();
    pts.sort_by(|a, b| {
        a.mmse
            .partial_cmp(&b.mmse)
            .unwrap()
            .then(b.rate_nats.partial_cmp(&a.rate_nats).unwrap())
    });
    pts.dedup_by(|a, b| a.mmse == b.mmse);
    let mut upper: Vec<MmseRatePoint> = Vec::new();
    for p in pts {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], &p) >= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    let best = upper
        .iter()
        .map(|p| p.rate_nats)
        .fold(f64::NEG_INFINITY, f64::max);
    let cut = upper.iter().position(|p| p.rate_nats == best).unwrap();
    upper.truncate(cut + 1);
    for p in upper.iter_mut() {
        p.provenance = Provenance::TimeShareCibSib;
        p.alpha = None;
    }
    Ok(upper)
}

/// Envelope rate at ε: linear between hull vertices, flat (max R) beyond the
/// last vertex, None left of the first vertex.
pub fn envelope_rate_at(hull: &[MmseRatePoint], eps: f64) -> Option<f64> {
    let first = hull.first()?;
    if eps < first.mmse {
        return None;
    }
    for w in hull.windows(2) {
        if eps <= w[1].mmse {
            let span = w[1].mmse - w[0].mmse;
            let s = if span > 0.0 { (eps - w[0].mmse) / span } else { 1.0 };
            return Some(w[0].rate_nats + s * (w[1].rate_nats - w[0].rate_nats));
        }
    }
    Some(hull.last()?.rate_nats)
}

/// Where the α-ordered curve crosses the diagonal of its bounding rectangle.
///
/// Coordinates are normalized so the α = 0 end is (0, 1) and the α = 1 end is
/// (1, 0), with x = (ε − ε_0)/(ε_1 − ε_0) and y = (R_1 − R)/(R_1 − R_0); the
/// rectangle corner is (0, 0). A time-sharing chord gives 0.5, a rectangle 0.
pub fn rectangle_sag(curve: &[MmseRatePoint]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(IsacError::Domain("sag needs at least 2 points".into()));
    }
    let mut pts = curve.to_vec();
    pts.sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap());
    let (e0, r0) = (pts[0].mmse, pts[0].rate_nats);
    let last = pts.last().unwrap();
    let (e1, r1) = (last.mmse, last.rate_nats);
    if e1 <= e0 || r1 <= r0 {
        return Err(IsacError::Domain("degenerate rectangle: endpoints coincide".into()));
    }
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|p| ((p.mmse - e0) / (e1 - e0), (r1 - p.rate_nats) / (r1 - r0)))
        .collect();
    for w in xy.windows(2) {
        let d0 = w[0].0 - w[0].1;
        let d1 = w[1].0 - w[1].1;
        if d0 <= 0.0 && d1 >= 0.0 {
            let s = if d1 - d0 > 0.0 { -d0 / (d1 - d0) } else { 0.0 };
            return Ok(w[0].0 + s * (w[1].0 - w[0].0));
        }
    }
    Err(IsacError::Internal("curve does not cross the diagonal".into()))
}

// ---------------------------------------------------------------------------
// Region dataset
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RegionOptions {
    pub time_share_points: usize,
    pub grid: GridSpec,
    pub channel: ChannelModel,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            time_share_points: 11,
            grid: GridSpec::default(),
            channel: ChannelModel::Ergodic { samples: 50 },
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionDataset {
    pub points: Vec<MmseRatePoint>,
    pub curves: BoundCurves,
    /// False for MIMO configurations, where the limit curve is out of scope.
    pub limit_included: bool,
    pub warnings: Vec<String>,
}

/// All provenances for one configuration. The α grid is extended with 0 and 1
/// so the Ps and Pc endpoints exist.
pub fn region_dataset(
    cfg: &SystemConfig,
    stats: &SensingChannelStats,
    alphas: &[f64],
    stream: RngStream,
    opts: &RegionOptions,
) -> Result<RegionDataset> {
    if alphas.is_empty() {
        return Err(IsacError::Domain("empty alpha grid".into()));
    }
    let mut grid: Vec<f64> = alphas.to_vec();
    grid.push(0.0);
    grid.push(1.0);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let curves = bound_curves(&grid, stats, cfg, stream.substream(0))?;
    let mut warnings = Vec::new();
    if cfg.transmit_snr_db() < 10.0 {
        warnings.push(format!(
            "transmit SNR {:.2} dB is below 10 dB; the SIB rate uses a high-SNR expansion",
            cfg.transmit_snr_db()
        ));
    }
    let ps = curves.sib[0];
    let pc = *curves.cib.last().unwrap();
    let segment = time_share_segment(&ps, &pc, opts.time_share_points)?;
    let mut union = curves.sib.clone();
    union.extend(curves.cib.iter().copied());
    let hull = pareto_hull(&union)?;

    for (i, &alpha) in grid.iter().enumerate() {
        let rg = curves.rate_gap[i];
        if rg.mean < -3.0 * rg.stderr - 1e-9 {
            warnings.push(format!("ordering: R_out < R_sib at alpha={alpha}"));
        }
        let mg = curves.mmse_gap[i];
        if mg.mean < -3.0 * mg.stderr - 1e-9 {
            warnings.push(format!("ordering: eps_cib < eps_out at alpha={alpha}"));
        }
    }
    for p in &segment {
        if let Some(r) = envelope_rate_at(&hull, p.mmse) {
            if r < p.rate_nats - 3.0 * p.stderr_rate - 1e-9 {
                warnings.push(format!(
                    "ordering: CIB-SIB envelope below Ps-Pc segment at mmse={}",
                    p.mmse
                ));
            }
        }
    }

    let mut points = Vec::new();
    let limit_included = cfg.is_siso();
    if limit_included {
        let limit = limit_curve(&grid, stats, cfg, &opts.grid, opts.channel, stream.substream(1))?;
        for lp in &limit {
            let mut p = MmseRatePoint::new(lp.mmse, lp.rate, Some(lp.alpha), Provenance::Limit);
            p.converged = lp.converged;
            points.push(p);
        }
    } else {
        warnings.push("limit curve omitted: the Blahut-Arimoto limit is SISO only".into());
    }
    points.extend(curves.outer.iter().copied());
    points.extend(curves.sib.iter().copied());
    points.extend(curves.cib.iter().copied());
    points.extend(segment);
    points.extend(hull);
    Ok(RegionDataset {
        points,
        curves,
        limit_included,
        warnings,
    })
}
