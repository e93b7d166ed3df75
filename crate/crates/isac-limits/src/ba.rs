//! Constrained Blahut-Arimoto iteration for the MMSE-Rate limit of the real
//! SISO channel y = h x + z, z ~ N(0, σc²), with the sensing cost
//! Φ̃(x) = 1/(σg⁻² + x²/σs²), plus the closed-form endpoints α ∈ {0, 1}.
//!
//! The channel is discretized: p(y|x) on the y-grid is normalized per input
//! point, so every iterate is an exact Blahut-Arimoto step on a finite channel.

use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::model::{monte_carlo, standard_normal, Estimate, RngStream, SensingChannelStats, SystemConfig};

/// Grid and iteration limits for [`ba_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub x_points: usize,
    pub y_points: usize,
    /// x-grid half width in units of √P0.
    pub x_span: f64,
    /// y-grid padding beyond |h|·x_max in units of σc.
    pub y_pad: f64,
    pub max_iters: usize,
    pub max_newton_iters: usize,
    pub init: InitialInput,
}

/// Starting input pmf p⁽⁰⁾; both meet the power budget exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialInput {
    /// Maximum-entropy pmf under the budget: the discretized N(0, P0·T).
    #[default]
    MaxEntropy,
    /// Uniform on |x| ≤ √(3B), topped up with mass at zero.
    Uniform,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_points: 281,
            y_points: 561,
            x_span: 7.0,
            y_pad: 5.0,
            max_iters: 20_000,
            max_newton_iters: 200,
            init: InitialInput::MaxEntropy,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.x_points < 5 || self.x_points % 2 == 0 {
            return Err(IsacError::config("ba.x_points", "must be odd and >= 5"));
        }
        if self.y_points < 5 {
            return Err(IsacError::config("ba.y_points", "must be >= 5"));
        }
        if !(self.x_span.is_finite() && self.x_span > 0.0) {
            return Err(IsacError::config("ba.x_span", "must be > 0"));
        }
        if !(self.y_pad.is_finite() && self.y_pad > 0.0) {
            return Err(IsacError::config("ba.y_pad", "must be > 0"));
        }
        if self.max_iters == 0 || self.max_newton_iters == 0 {
            return Err(IsacError::config("ba.max_iters", "must be positive"));
        }
        Ok(())
    }
}

/// Probability masses on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPdf {
    pub grid: Vec<f64>,
    pub mass: Vec<f64>,
    pub width: f64,
}

impl GridPdf {
    pub fn moment(&self, k: i32) -> f64 {
        self.grid.iter().zip(&self.mass).map(|(x, p)| p * x.powi(k)).sum()
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Discretized N(0, var) on the same grid.
    pub fn gaussian_like(&self, var: f64) -> GridPdf {
        let w: Vec<f64> = self.grid.iter().map(|x| (-x * x / (2.0 * var)).exp()).collect();
        let s: f64 = w.iter().sum();
        GridPdf {
            grid: self.grid.clone(),
            mass: w.into_iter().map(|v| v / s).collect(),
            width: self.width,
        }
    }

    pub fn total_variation(&self, other: &GridPdf) -> f64 {
        0.5 * self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

fn linspace(half: f64, n: usize) -> (Vec<f64>, f64) {
    let step = 2.0 * half / (n - 1) as f64;
    ((0..n).map(|i| -half + step * i as f64).collect(), step)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaTraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub mu: f64,
    pub rate_nats: f64,
    pub mmse: f64,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaResult {
    pub alpha: f64,
    pub h: f64,
    pub p_x: GridPdf,
    pub p_y: GridPdf,
    pub rate_nats: f64,
    pub mmse: f64,
    /// Power multiplier, ≤ 0.
    pub mu: f64,
    pub iterations: usize,
    pub converged: bool,
    /// E[x²] under p_x.
    pub power: f64,
    /// Smallest J(i) − J(i−1) seen; negative only at roundoff level.
    pub min_ascent: f64,
    /// Largest inner Newton iteration count over the run.
    pub max_newton_iters: usize,
    pub trace: Vec<BaTraceRow>,
}

struct Channel {
    x: Vec<f64>,
    dx: f64,
    y: Vec<f64>,
    dy: f64,
    /// W[i][j] = p(y_j | x_i)·Δy, rows normalized.
    w: Vec<Vec<f64>>,
    /// Σ_j W_ij log W_ij
    neg_entropy: Vec<f64>,
    /// Φ̃(x_i)
    phi: Vec<f64>,
}

impl Channel {
    fn new(h: f64, sigma_g2: f64, cfg: &SystemConfig, grid: &GridSpec) -> Channel {
        let p0 = cfg.per_antenna_power;
        let sc2 = cfg.comm_noise_var;
        let (x, dx) = linspace(grid.x_span * p0.sqrt(), grid.x_points);
        let ymax = h.abs() * grid.x_span * p0.sqrt() + grid.y_pad * sc2.sqrt();
        let (y, dy) = linspace(ymax, grid.y_points);
        let mut w = Vec::with_capacity(x.len());
        let mut neg_entropy = Vec::with_capacity(x.len());
        for &xi in &x {
            let logits: Vec<f64> = y
                .iter()
                .map(|&yj| -(yj - h * xi).powi(2) / (2.0 * sc2))
                .collect();
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
            let lz = m + z.ln();
            let row: Vec<f64> = logits.iter().map(|l| (l - lz).exp()).collect();
            let ne = logits
                .iter()
                .zip(&row)
                .filter(|(_, &p)| p > 0.0)
                .map(|(l, p)| p * (l - lz))
                .sum();
            w.push(row);
            neg_entropy.push(ne);
        }
        let sg_inv = 1.0 / sigma_g2;
        let phi = x
            .iter()
            .map(|xi| 1.0 / (sg_inv + xi * xi / cfg.sense_noise_var))
            .collect();
        Channel {
            x,
            dx,
            y,
            dy,
            w,
            neg_entropy,
            phi,
        }
    }

    fn output(&self, p: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.y.len()];
        for (pi, row) in p.iter().zip(&self.w) {
            if *pi == 0.0 {
                continue;
            }
            for (qj, wij) in q.iter_mut().zip(row) {
                *qj += pi * wij;
            }
        }
        q
    }

    /// D(x_i) = Σ_j W_ij log(W_ij / q_j)
    fn divergence(&self, q: &[f64]) -> Vec<f64> {
        let logq: Vec<f64> = q
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            .collect();
        self.w
            .iter()
            .zip(&self.neg_entropy)
            .map(|(row, ne)| {
                let cross: f64 = row
                    .iter()
                    .zip(&logq)
                    .filter(|(&wij, _)| wij > 0.0)
                    .map(|(wij, lq)| wij * lq)
                    .sum();
                ne - cross
            })
            .collect()
    }
}

/// Newton iteration on μ for Σ(1 − x²/B)·exp(base + μx²) = 0 with the clamp μ ≤ 0.
///
/// Scale-free: the weights are shifted by their maximum each step, which
/// leaves the root and the Newton step unchanged. Falls back to bisection
/// on a tiny or non-finite derivative and whenever a step leaves the
/// current bracket.
fn solve_mu(
    base: &[f64],
    x2: &[f64],
    budget: f64,
    mu_start: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(f64, usize)> {
    let eval = |mu: f64| -> (f64, f64) {
        let m = base
            .iter()
            .zip(x2)
            .map(|(b, x)| b + mu * x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut f = 0.0;
        let mut df = 0.0;
        for (b, x) in base.iter().zip(x2) {
            let w = (b + mu * x - m).exp();
            let a = 1.0 - x / budget;
            f += a * w;
            df += x * a * w;
        }
        (f, df)
    };
    // f > 0 ⇔ too little power ⇔ root lies above μ.
    let (f0, _) = eval(0.0);
    if f0 >= 0.0 {
        return Ok((0.0, 1));
    }
    let mut hi = 0.0;
    let mut lo = f64::NEG_INFINITY;
    let mut mu = mu_start.min(0.0);
    let mut iters = 0;
    loop {
        iters += 1;
        if iters > max_iters {
            return Err(IsacError::NonConvergence(format!(
                "power multiplier Newton loop exceeded {max_iters} iterations"
            )));
        }
        let (f, df) = eval(mu);
        if f > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let newton = mu - f / df;
        let ok = df.abs() >= 1e-300 && newton.is_finite() && newton > lo && newton < hi;
        let next = if ok {
            newton
        } else if lo.is_finite() {
            0.5 * (lo + hi)
        } else {
            // no lower bracket yet: step further down
            2.0 * mu.min(-1.0)
        };
        let step = (next - mu).abs();
        mu = next;
        if step <= tol {
            return Ok((mu, iters));
        }
    }
}

/// Runs the constrained Blahut-Arimoto iteration for weight α ∈ (0, 1].
///
/// p⁽ⁱ⁾(x) ∝ p⁽ⁱ⁻¹⁾(x)·exp[D⁽ⁱ⁻¹⁾(x) + μx² − (1/α − 1)·T·Φ̃(x)],
/// J = α·R − (1−α)·ε, stopping when |J⁽ⁱ⁾ − J⁽ⁱ⁻¹⁾| ≤ ε_J.
pub fn ba_solve(
    alpha: f64,
    h: f64,
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    grid: &GridSpec,
) -> Result<BaResult> {
    cfg.validate()?;
    grid.validate()?;
    if !cfg.is_siso() {
        return Err(IsacError::Mode(
            "the Blahut-Arimoto limit is implemented for N = Nc = Ns = T = 1".into(),
        ));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(IsacError::Domain(format!(
            "alpha must lie in (0, 1] for the iteration, got {alpha}; alpha = 0 is the closed form"
        )));
    }
    if !h.is_finite() {
        return Err(IsacError::Domain("channel gain must be finite".into()));
    }
    let sigma_g2 = siso_prior_var(stats)?;
    let ch = Channel::new(h, sigma_g2, cfg, grid);
    let t = cfg.coherence_time as f64;
    let budget = cfg.total_power() * t;
    let x2: Vec<f64> = ch.x.iter().map(|x| x * x).collect();
    let penalty = (1.0 / alpha - 1.0) * t;

    let mut p = match grid.init {
        InitialInput::MaxEntropy => max_entropy_input(&ch.x, budget)?,
        InitialInput::Uniform => uniform_input(&ch.x, budget),
    };
    let mut q = ch.output(&p);
    let mut d = ch.divergence(&q);
    let stats_of = |p: &[f64], d: &[f64]| -> (f64, f64) {
        let rate = p.iter().zip(d).map(|(a, b)| a * b).sum::<f64>() / t;
        let mmse = p.iter().zip(&ch.phi).map(|(a, b)| a * b).sum::<f64>();
        (rate, mmse)
    };
    let (mut rate, mut mmse) = stats_of(&p, &d);
    let mut j = alpha * rate - (1.0 - alpha) * mmse;
    let mut mu = -1.0;
    let mut trace = vec![BaTraceRow {
        iteration: 0,
        objective: j,
        mu,
        rate_nats: rate,
        mmse,
        newton_iters: 0,
    }];
    let mut min_ascent = f64::INFINITY;
    let mut max_newton = 0;
    let mut converged = false;
    let mut iterations = 0;

    for it in 1..=grid.max_iters {
        iterations = it;
        let base: Vec<f64> = p
            .iter()
            .zip(&d)
            .zip(&ch.phi)
            .map(|((pi, di), phi)| {
                if *pi > 0.0 {
                    pi.ln() + di - penalty * phi
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let (mu_new, newton_iters) =
            solve_mu(&base, &x2, budget, mu, cfg.ba_tol_mult, grid.max_newton_iters)?;
        mu = mu_new;
        max_newton = max_newton.max(newton_iters);
        let logits: Vec<f64> = base.iter().zip(&x2).map(|(b, x)| b + mu * x).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        p = w;
        q = ch.output(&p);
        d = ch.divergence(&q);
        let (r_new, e_new) = stats_of(&p, &d);
        rate = r_new;
        mmse = e_new;
        let j_new = alpha * rate - (1.0 - alpha) * mmse;
        let ascent = j_new - j;
        min_ascent = min_ascent.min(ascent);
        if ascent < -1e-10 * (1.0 + j.abs()) {
            return Err(IsacError::Internal(format!(
                "objective decreased by {:.3e} at iteration {it}",
                -ascent
            )));
        }
        j = j_new;
        trace.push(BaTraceRow {
            iteration: it,
            objective: j,
            mu,
            rate_nats: rate,
            mmse,
            newton_iters,
        });
        if ascent.abs() <= cfg.ba_tol_perf {
            converged = true;
            break;
        }
    }

    let n = p.len();
    let edge = p[0] + p[1] + p[n - 2] + p[n - 1];
    if converged && edge >= 1e-6 {
        return Err(IsacError::GridCoverage { mass: edge });
    }
    let power = p.iter().zip(&x2).map(|(a, b)| a * b).sum::<f64>() / t;
    Ok(BaResult {
        alpha,
        h,
        p_x: GridPdf {
            grid: ch.x.clone(),
            mass: p,
            width: ch.dx,
        },
        p_y: GridPdf {
            grid: ch.y.clone(),
            mass: q,
            width: ch.dy,
        },
        rate_nats: rate,
        mmse,
        mu,
        iterations,
        converged,
        power,
        min_ascent,
        max_newton_iters: max_newton,
        trace,
    })
}

/// Uniform over |x| ≤ √(3B) (extended to the next grid point), mixed with mass
/// at x = 0 so that E[x²] = B exactly.
/// Discretized Gaussian with the variance retuned so that Σ p x² = B on the grid.
fn max_entropy_input(x: &[f64], budget: f64) -> Result<Vec<f64>> {
    let pmf = |v: f64| -> (Vec<f64>, f64) {
        let w: Vec<f64> = x.iter().map(|t| (-t * t / (2.0 * v)).exp()).collect();
        let z: f64 = w.iter().sum();
        let p: Vec<f64> = w.iter().map(|a| a / z).collect();
        let power = p.iter().zip(x).map(|(a, t)| a * t * t).sum();
        (p, power)
    };
    let x_max = x[x.len() - 1];
    if budget >= x_max * x_max / 3.0 {
        return Err(IsacError::Domain("x grid too narrow for the power budget".into()));
    }
    let (mut lo, mut hi) = (budget * 1e-3, budget);
    while pmf(hi).1 < budget {
        hi *= 2.0;
        if hi > 1e6 * budget {
            return Err(IsacError::Domain("x grid too narrow for the power budget".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pmf(mid).1 < budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(pmf(0.5 * (lo + hi)).0)
}

fn uniform_input(x: &[f64], budget: f64) -> Vec<f64> {
    let edge = (3.0 * budget).sqrt();
    let dx = x[1] - x[0];
    let support: Vec<bool> = x.iter().map(|v| v.abs() <= edge + dx).collect();
    let count = support.iter().filter(|&&s| s).count() as f64;
    let mut p: Vec<f64> = support.iter().map(|&s| if s { 1.0 / count } else { 0.0 }).collect();
    let power: f64 = p.iter().zip(x).map(|(a, v)| a * v * v).sum();
    if power > budget {
        let keep = budget / power;
        p.iter_mut().for_each(|v| *v *= keep);
        let zero = x.len() / 2;
        p[zero] += 1.0 - keep;
    }
    p
}

fn siso_prior_var(stats: &SensingChannelStats) -> Result<f64> {
    if stats.n_tx() != 1 || stats.n_rx_sense() != 1 {
        return Err(IsacError::Dimension(
            "SISO computations need a 1x1 sensing covariance".into(),
        ));
    }
    let v = stats.eigenvalues()[0];
    if v <= 0.0 {
        return Err(IsacError::Domain("sensing prior variance must be > 0".into()));
    }
    Ok(v)
}

// ---------------------------------------------------------------------------
// Closed-form endpoints
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndPoint {
    pub mmse: f64,
    pub rate_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SisoEndpoints {
    /// α = 0: equal mass at ±√P0.
    pub sensing_end: EndPoint,
    /// α = 1: x ~ N(0, P0).
    pub comm_end: EndPoint,
    /// Support of the binary sensing-optimal input.
    pub sensing_support: [f64; 2],
    /// Variance of the Gaussian comm-optimal input.
    pub comm_input_var: f64,
}

/// Composite Simpson rule on [a, b] with n (even) intervals.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let hstep = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + hstep * i as f64);
    }
    s * hstep / 3.0
}

/// I(x; y) in nats for x = ±A equiprobable through y = h x + N(0, σ²),
/// as h(Y) − ½log(2πeσ²) with h(Y) integrated numerically.
pub fn binary_input_awgn_rate(h: f64, amplitude: f64, noise_var: f64) -> f64 {
    let m = (h * amplitude).abs();
    if m == 0.0 {
        return 0.0;
    }
    let s2 = noise_var;
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * s2).ln();
    let log_p = |y: f64| {
        let a = -(y - m).powi(2) / (2.0 * s2);
        let b = -(y + m).powi(2) / (2.0 * s2);
        let hi = a.max(b);
        log_norm + hi + (0.5 * ((a - hi).exp() + (b - hi).exp())).ln()
    };
    let lim = m + 12.0 * s2.sqrt();
    let hy = simpson(|y| -log_p(y).exp() * log_p(y), -lim, lim, 40_000);
    (hy - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s2).ln()).max(0.0)
}

/// E[1/(σg⁻² + x²/σs²)] for x ~ N(0, P0).
pub fn gaussian_input_mmse(sigma_g2: f64, p0: f64, sigma_s2: f64) -> f64 {
    let sd = p0.sqrt();
    let lim = 14.0 * sd;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * p0).sqrt();
    simpson(
        |x| norm * (-x * x / (2.0 * p0)).exp() / (1.0 / sigma_g2 + x * x / sigma_s2),
        -lim,
        lim,
        40_000,
    )
}

/// Closed forms at α ∈ {0, 1} for a fixed real channel h.
pub fn siso_endpoints(h: f64, stats: &SensingChannelStats, cfg: &SystemConfig) -> Result<SisoEndpoints> {
    cfg.validate()?;
    if !cfg.is_siso() {
        return Err(IsacError::Mode("SISO endpoints need N = Nc = Ns = T = 1".into()));
    }
    let sigma_g2 = siso_prior_var(stats)?;
    let p0 = cfg.per_antenna_power;
    let a = p0.sqrt();
    let sensing_end = EndPoint {
        mmse: 1.0 / (1.0 / sigma_g2 + p0 / cfg.sense_noise_var),
        rate_nats: binary_input_awgn_rate(h, a, cfg.comm_noise_var),
    };
    let comm_end = EndPoint {
        mmse: gaussian_input_mmse(sigma_g2, p0, cfg.sense_noise_var),
        rate_nats: 0.5 * (1.0 + h * h * p0 / cfg.comm_noise_var).ln(),
    };
    Ok(SisoEndpoints {
        sensing_end,
        comm_end,
        sensing_support: [-a, a],
        comm_input_var: p0,
    })
}

// ---------------------------------------------------------------------------
// Limit curve
// ---------------------------------------------------------------------------

/// Channel used for the limit curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelModel {
    Fixed(f64),
    /// SAA over `samples` draws h ~ N(0, σh²).
    Ergodic { samples: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitPoint {
    pub alpha: f64,
    pub mmse: Estimate,
    pub rate: Estimate,
    pub converged: bool,
    /// True for α ∈ {0, 1}, served by the closed forms.
    pub closed_form: bool,
    pub max_iterations: usize,
    /// Per-α solver result, kept for a fixed channel only.
    pub result: Option<BaResult>,
}

/// MMSE-Rate limit over an α grid. Interior α run [`ba_solve`]; the
/// endpoints use [`siso_endpoints`]. All α share the same channel draws.
pub fn limit_curve(
    alphas: &[f64],
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    grid: &GridSpec,
    channel: ChannelModel,
    stream: RngStream,
) -> Result<Vec<LimitPoint>> {
    if alphas.is_empty() {
        return Err(IsacError::Domain("empty alpha grid".into()));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= 0.0 && **a <= 1.0)) {
        return Err(IsacError::Domain(format!("alpha {a} outside [0, 1]")));
    }
    let hs: Vec<f64> = match channel {
        ChannelModel::Fixed(h) => vec![h],
        ChannelModel::Ergodic { samples } => {
            if samples == 0 {
                return Err(IsacError::config("ba.channel_samples", "must be positive"));
            }
            let sd = cfg.comm_channel_var.sqrt();
            monte_carlo(samples, stream, |_, rng| Ok(sd * standard_normal(rng)))?
        }
    };
    let mut out = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let closed = alpha == 0.0 || alpha == 1.0;
        let per: Vec<(f64, f64, bool, usize, Option<BaResult>)> = monte_carlo(
            hs.len(),
            stream,
            |k, _| {
                let h = hs[k];
                if closed {
                    let e = siso_endpoints(h, stats, cfg)?;
                    let pt = if alpha == 0.0 { e.sensing_end } else { e.comm_end };
                    Ok((pt.mmse, pt.rate_nats, true, 0, None))
                } else {
                    let r = ba_solve(alpha, h, stats, cfg, grid)?;
                    Ok((r.mmse, r.rate_nats, r.converged, r.iterations, Some(r)))
                }
            },
        )?;
        let mm: Vec<f64> = per.iter().map(|v| v.0).collect();
        let rr: Vec<f64> = per.iter().map(|v| v.1).collect();
        let converged = per.iter().all(|v| v.2);
        let max_iterations = per.iter().map(|v| v.3).max().unwrap_or(0);
        let result = match channel {
            ChannelModel::Fixed(_) => per.into_iter().next().and_then(|v| v.4),
            ChannelModel::Ergodic { .. } => None,
        };
        out.push(LimitPoint {
            alpha,
            mmse: Estimate::from_samples(&mm),
            rate: Estimate::from_samples(&rr),
            converged,
            closed_form: closed,
            max_iterations,
            result,
        });
    }
    Ok(out)
}
