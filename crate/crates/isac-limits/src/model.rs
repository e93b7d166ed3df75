//! Shared domain types and deterministic sampling.
//!
//! Complex Gaussian convention: CN(0, σ²) has variance σ²/2 in each of the
//! real and imaginary parts, so E|z|² = σ².

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::linalg::{
    self, c, eig_psd, frobenius, kron_identity, kron_identity_block, CMat, HermitianEigen,
};

// ---------------------------------------------------------------------------
// System configuration
// ---------------------------------------------------------------------------

/// Scenario parameters. Units: watts, symbols, nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// N, transmit antennas.
    pub n_tx: usize,
    /// Nc, communication receive antennas.
    pub n_rx_comm: usize,
    /// Ns, sensing receive antennas.
    pub n_rx_sense: usize,
    /// T, symbols per coherence block.
    pub coherence_time: usize,
    /// P0, per-antenna average power.
    pub per_antenna_power: f64,
    /// σc²
    pub comm_noise_var: f64,
    /// σs²
    pub sense_noise_var: f64,
    /// σh², entry variance of the communication channel.
    pub comm_channel_var: f64,
    pub mc_trials: usize,
    pub rng_seed: u64,
    /// ε_J, outer stopping tolerance of the Blahut-Arimoto iteration.
    pub ba_tol_perf: f64,
    /// ε_μ, stopping tolerance of the inner Newton loop on μ.
    pub ba_tol_mult: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 1,
            n_rx_comm: 1,
            n_rx_sense: 1,
            coherence_time: 1,
            per_antenna_power: 1.0,
            comm_noise_var: 1.0,
            sense_noise_var: 1.0,
            comm_channel_var: 1.0,
            mc_trials: 10_000,
            rng_seed: 0,
            ba_tol_perf: 1e-4,
            ba_tol_mult: 1e-8,
        }
    }
}

fn positive_int(key: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(IsacError::config(key, "must be a positive integer"));
    }
    Ok(())
}

fn positive_real(key: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(IsacError::config(
            key,
            format!("must be a finite value > 0, got {v}"),
        ));
    }
    Ok(())
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        positive_int("n_tx", self.n_tx)?;
        positive_int("n_rx_comm", self.n_rx_comm)?;
        positive_int("n_rx_sense", self.n_rx_sense)?;
        positive_int("coherence_time", self.coherence_time)?;
        positive_int("mc_trials", self.mc_trials)?;
        if self.coherence_time < self.n_tx {
            return Err(IsacError::config(
                "coherence_time",
                format!(
                    "coherence_time T={} must be >= n_tx N={}: estimating a channel with N columns needs at least N samples",
                    self.coherence_time, self.n_tx
                ),
            ));
        }
        positive_real("per_antenna_power", self.per_antenna_power)?;
        positive_real("comm_noise_var", self.comm_noise_var)?;
        positive_real("sense_noise_var", self.sense_noise_var)?;
        positive_real("comm_channel_var", self.comm_channel_var)?;
        positive_real("ba_tol_perf", self.ba_tol_perf)?;
        positive_real("ba_tol_mult", self.ba_tol_mult)?;
        Ok(())
    }

    /// N·P0
    pub fn total_power(&self) -> f64 {
        self.n_tx as f64 * self.per_antenna_power
    }

    /// 10·log10(N·P0/σc²)
    pub fn transmit_snr_db(&self) -> f64 {
        10.0 * (self.total_power() / self.comm_noise_var).log10()
    }

    /// Sets P0 so that 10·log10(N·P0/σc²) equals `snr_db`.
    pub fn with_transmit_snr_db(mut self, snr_db: f64) -> Self {
        self.per_antenna_power = 10f64.powf(snr_db / 10.0) * self.comm_noise_var / self.n_tx as f64;
        self
    }

    pub fn is_siso(&self) -> bool {
        self.n_tx == 1 && self.n_rx_comm == 1 && self.n_rx_sense == 1 && self.coherence_time == 1
    }
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// A reproducible random stream keyed by (seed, stream_id).
///
/// Every Monte Carlo trial draws from its own substream, so results do not
/// depend on how trials are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// ChaCha20 keyed by the seed, positioned on this stream.
    pub fn rng(&self) -> ChaCha20Rng {
        let mut r = ChaCha20Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// Child stream number `index`; distinct indices give distinct streams.
    pub fn substream(&self, index: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream_id: splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1))),
        }
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with i.i.d. CN(0, var) entries, filled column by column.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    var: f64,
    rng: &mut R,
) -> CMat {
    let s = (var / 2.0).sqrt();
    let mut m = CMat::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            let re = standard_normal(rng) * s;
            let im = standard_normal(rng) * s;
            m[(i, j)] = num_complex::Complex64::new(re, im);
        }
    }
    m
}

/// H ∈ C^{Nc×N} with i.i.d. CN(0, σh²) entries.
pub fn sample_comm_channel<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> CMat {
    complex_gaussian_matrix(cfg.n_rx_comm, cfg.n_tx, cfg.comm_channel_var, rng)
}

/// Haar-distributed rows×cols matrix with orthonormal rows.
///
/// QR of a cols×rows complex Gaussian matrix with the phases of diag(R)
/// moved into Q; the adjoint of the corrected Q is returned.
pub fn sample_stiefel_uniform<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<CMat> {
    if rows > cols {
        return Err(IsacError::Dimension(format!(
            "Stiefel sample needs rows <= cols, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Ok(CMat::zeros(0, cols));
    }
    let z = complex_gaussian_matrix(cols, rows, 1.0, rng);
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..rows {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0) };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    Ok(q.adjoint())
}

// ---------------------------------------------------------------------------
// Correlation matrices and waveforms
// ---------------------------------------------------------------------------

/// Hermitian PSD N×N matrix together with the trace it is meant to carry.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub mat: CMat,
    pub trace_budget: f64,
}

impl CorrelationMatrix {
    /// Validates Hermitian symmetry and PSD-ness (roundoff clamp applies).
    pub fn new(mat: CMat, trace_budget: f64) -> Result<Self> {
        eig_psd(&mat)?;
        Ok(CorrelationMatrix {
            mat: linalg::hermitize(&mat),
            trace_budget,
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace_re(&self.mat)
    }

    /// |Tr − budget| ≤ 1e-9·budget.
    pub fn meets_budget(&self) -> bool {
        (self.trace() - self.trace_budget).abs() <= 1e-9 * self.trace_budget.abs().max(1e-300)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaveformKind {
    Isometry,
    Gaussian,
    Compound,
    Custom,
}

/// Transmit block X ∈ C^{N×T}.
#[derive(Debug, Clone)]
pub struct Waveform {
    pub x: CMat,
    pub kind: WaveformKind,
    /// Orthonormal-row factor Ψ of an isometry waveform.
    pub factor: Option<CMat>,
}

impl Waveform {
    pub fn custom(x: CMat) -> Self {
        Waveform {
            x,
            kind: WaveformKind::Custom,
            factor: None,
        }
    }

    pub fn n_tx(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    /// (1/T) X X†
    pub fn sample_correlation(&self) -> CMat {
        let t = self.x.ncols().max(1) as f64;
        linalg::hermitize(&(&self.x * self.x.adjoint())) / c(t)
    }
}

/// X = L W with L L† = R and W i.i.d. CN(0, 1), so columns are i.i.d. CN(0, R).
pub fn sample_gaussian_waveform<R: Rng + ?Sized>(
    r: &CorrelationMatrix,
    t: usize,
    rng: &mut R,
) -> Result<Waveform> {
    let l = linalg::psd_factor(&r.mat)?;
    let w = complex_gaussian_matrix(r.dim(), t, 1.0, rng);
    Ok(Waveform {
        x: l * w,
        kind: WaveformKind::Gaussian,
        factor: None,
    })
}

// ---------------------------------------------------------------------------
// Sensing channel statistics
// ---------------------------------------------------------------------------

/// Shape of the per-block covariance Σg before scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceProfile {
    Identity,
    /// Σg[i,j] = ρ^|i−j|
    Exponential { rho: f64 },
    /// Σg = diag(values)
    Eigenvalues { values: Vec<f64> },
}

impl CovarianceProfile {
    /// N×N covariance; with `normalized_trace` set, scaled so Tr(Σg)/N equals it.
    pub fn build(&self, n: usize, normalized_trace: Option<f64>) -> Result<CMat> {
        let mut m = match self {
            CovarianceProfile::Identity => linalg::identity(n),
            CovarianceProfile::Exponential { rho } => {
                if !(rho.is_finite() && rho.abs() < 1.0) {
                    return Err(IsacError::config("sensing.rho", "must satisfy |rho| < 1"));
                }
                CMat::from_fn(n, n, |i, j| c(rho.powi((i as i32 - j as i32).abs())))
            }
            CovarianceProfile::Eigenvalues { values } => {
                if values.len() != n {
                    return Err(IsacError::config(
                        "sensing.eigenvalues",
                        format!("expected {n} values, got {}", values.len()),
                    ));
                }
                if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(IsacError::config(
                        "sensing.eigenvalues",
                        "values must be finite and nonnegative",
                    ));
                }
                linalg::diag_real(values)
            }
        };
        if let Some(target) = normalized_trace {
            if !(target.is_finite() && target > 0.0) {
                return Err(IsacError::config("sensing.normalized_trace", "must be > 0"));
            }
            let tr = linalg::trace_re(&m);
            if tr <= 0.0 {
                return Err(IsacError::config("sensing", "covariance has zero trace"));
            }
            m *= c(target * n as f64 / tr);
        }
        Ok(m)
    }
}

/// Covariance of the vectorized sensing channel g = vec(G†).
#[derive(Debug, Clone)]
pub struct SensingChannelStats {
    n_tx: usize,
    n_rx_sense: usize,
    /// Σg (N×N) when block diagonal, otherwise Σ̄g ((N·Ns)×(N·Ns)).
    sigma: CMat,
    /// Σ̄g = I_Ns ⊗ Σg
    pub block_diagonal: bool,
    /// Eigendecomposition of `sigma`.
    pub eig: HermitianEigen,
}

impl SensingChannelStats {
    /// Block form Σ̄g = I_Ns ⊗ Σg.
    pub fn block(sigma_g: CMat, n_rx_sense: usize) -> Result<Self> {
        if n_rx_sense == 0 {
            return Err(IsacError::Dimension("Ns must be positive".into()));
        }
        let eig = eig_psd(&sigma_g)?;
        Ok(SensingChannelStats {
            n_tx: sigma_g.nrows(),
            n_rx_sense,
            sigma: linalg::hermitize(&sigma_g),
            block_diagonal: true,
            eig,
        })
    }

    /// Dense Σ̄g; recognised as block form when it equals I_Ns ⊗ B.
    pub fn dense(sigma_bar: CMat, n_tx: usize, n_rx_sense: usize) -> Result<Self> {
        if sigma_bar.nrows() != n_tx * n_rx_sense || sigma_bar.ncols() != n_tx * n_rx_sense {
            return Err(IsacError::Dimension(format!(
                "sensing covariance must be {}x{}, got {}x{}",
                n_tx * n_rx_sense,
                n_tx * n_rx_sense,
                sigma_bar.nrows(),
                sigma_bar.ncols()
            )));
        }
        if let Some(b) = kron_identity_block(&sigma_bar, n_rx_sense, 1e-14) {
            return Self::block(b, n_rx_sense);
        }
        let eig = eig_psd(&sigma_bar)?;
        Ok(SensingChannelStats {
            n_tx,
            n_rx_sense,
            sigma: linalg::hermitize(&sigma_bar),
            block_diagonal: false,
            eig,
        })
    }

    /// Coincided channel G = H: Σ̄g = σh² I with Ns = Nc.
    pub fn coincided(cfg: &SystemConfig) -> Result<Self> {
        Self::block(
            linalg::identity(cfg.n_tx) * c(cfg.comm_channel_var),
            cfg.n_rx_comm,
        )
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn n_rx_sense(&self) -> usize {
        self.n_rx_sense
    }

    /// Σg, available in block form only.
    pub fn sigma_g(&self) -> Option<&CMat> {
        self.block_diagonal.then_some(&self.sigma)
    }

    /// Σ̄g, materialized.
    pub fn sigma_bar(&self) -> CMat {
        if self.block_diagonal {
            kron_identity(self.n_rx_sense, &self.sigma)
        } else {
            self.sigma.clone()
        }
    }

    /// Tr(Σ̄g)
    pub fn trace_bar(&self) -> f64 {
        let t = linalg::trace_re(&self.sigma);
        if self.block_diagonal {
            t * self.n_rx_sense as f64
        } else {
            t
        }
    }

    /// Eigenvalues of Σg (block form) or Σ̄g, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn is_full_rank(&self) -> bool {
        let max = self.eig.values.first().copied().unwrap_or(0.0);
        max > 0.0 && self.eig.values.iter().all(|&v| v > 1e-13 * max)
    }

    /// Σg⁻¹ (block form) or Σ̄g⁻¹.
    pub fn inverse(&self) -> Result<CMat> {
        if !self.is_full_rank() {
            return Err(IsacError::Domain(
                "sensing covariance is singular; the MMSE functional needs it invertible".into(),
            ));
        }
        let inv: Vec<f64> = self.eig.values.iter().map(|v| 1.0 / v).collect();
        Ok(linalg::reassemble(&self.eig.vectors, &inv))
    }

    /// Σ̄g = σ²·I for some σ².
    pub fn scaled_identity(&self) -> Option<f64> {
        let v = self.eig.values.first().copied()?;
        let n = self.sigma.nrows();
        let dev = frobenius(&(&self.sigma - linalg::identity(n) * c(v)));
        (dev <= 1e-12 * v.abs().max(1e-300) * n as f64).then_some(v)
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate {
            mean: value,
            stderr: 0.0,
            n: 1,
        }
    }

    /// Two-pass mean (with residual correction) and stderr = s/√n, summed in index order.
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
                n: 0,
            };
        }
        let nf = n as f64;
        let mut mean = xs.iter().sum::<f64>() / nf;
        mean += xs.iter().map(|x| x - mean).sum::<f64>() / nf;
        let stderr = if n > 1 {
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            (ss / (nf - 1.0) / nf).sqrt()
        } else {
            0.0
        };
        Estimate { mean, stderr, n }
    }
}

/// Runs `f(trial, rng)` for trial = 0..trials, each on `stream.substream(trial)`,
/// in parallel, returning results in trial order.
pub fn monte_carlo<T, F>(trials: usize, stream: RngStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut ChaCha20Rng) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream.substream(k as u64).rng();
            f(k, &mut rng)
        })
        .collect()
}
