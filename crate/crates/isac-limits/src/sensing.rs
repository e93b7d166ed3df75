//! Modified MMSE functional Φ, the Bayesian channel estimator, and Monte Carlo
//! expectation of the sensing metric.
//!
//! Sensing model: S = G X + Zs, s = vec(S†) = X̄ g + zs with X̄ = I_Ns ⊗ X†
//! and g = vec(G†) ~ CN(0, Σ̄g).

use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::linalg::{self, c, CMat, CVec};
use crate::model::{monte_carlo, Estimate, RngStream, SensingChannelStats, SystemConfig, Waveform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseValue {
    /// Channel-estimation MSE.
    pub value: f64,
    /// value / (N·Ns)
    pub normalized: Option<f64>,
}

impl MmseValue {
    pub fn new(value: f64, stats: &SensingChannelStats) -> Self {
        MmseValue {
            value,
            normalized: Some(value / (stats.n_tx() * stats.n_rx_sense()) as f64),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EstimatorOutput {
    /// Posterior mean of g = vec(G†).
    pub g_hat: CVec,
    /// Tr((Σ̄g⁻¹ + σs⁻² X̄†X̄)⁻¹)
    pub conditional_mse: f64,
}

/// Φ(I_Ns ⊗ R) = Ns · Tr((Σg⁻¹ + (T/σs²) R)⁻¹) in block form, or the dense
/// Kronecker evaluation otherwise.
pub fn phi_block(
    r: &CMat,
    stats: &SensingChannelStats,
    t: usize,
    sigma_s2: f64,
) -> Result<MmseValue> {
    let n = stats.n_tx();
    if r.nrows() != n || r.ncols() != n {
        return Err(IsacError::Dimension(format!(
            "correlation matrix must be {n}x{n}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    if !stats.block_diagonal {
        return phi_dense(&linalg::kron_identity(stats.n_rx_sense(), r), stats, t, sigma_s2);
    }
    let m = stats.inverse()? + r * c(t as f64 / sigma_s2);
    let v = stats.n_rx_sense() as f64 * linalg::trace_inverse_hpd(&m)?;
    Ok(MmseValue::new(v, stats))
}

/// Φ(A) = Tr((Σ̄g⁻¹ + (T/σs²) A)⁻¹) for A of size (N·Ns)×(N·Ns).
///
/// Takes the block fast path when Σ̄g is block diagonal and A = I_Ns ⊗ R.
pub fn phi(a: &CMat, stats: &SensingChannelStats, t: usize, sigma_s2: f64) -> Result<MmseValue> {
    let d = stats.n_tx() * stats.n_rx_sense();
    if a.nrows() != d || a.ncols() != d {
        return Err(IsacError::Dimension(format!(
            "argument must be {d}x{d}, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if stats.block_diagonal {
        if let Some(r) = linalg::kron_identity_block(a, stats.n_rx_sense(), 0.0) {
            return phi_block(&r, stats, t, sigma_s2);
        }
    }
    phi_dense(a, stats, t, sigma_s2)
}

/// Φ(A) always through the full (N·Ns)-dimensional matrices.
pub fn phi_dense(
    a: &CMat,
    stats: &SensingChannelStats,
    t: usize,
    sigma_s2: f64,
) -> Result<MmseValue> {
    linalg::check_hermitian(a, "argument of the MMSE functional")?;
    let inv = stats.inverse()?;
    let inv_bar = if stats.block_diagonal {
        linalg::kron_identity(stats.n_rx_sense(), &inv)
    } else {
        inv
    };
    let m = inv_bar + a * c(t as f64 / sigma_s2);
    Ok(MmseValue::new(linalg::trace_inverse_hpd(&m)?, stats))
}

/// dΦ(I⊗R)/dR, the Hermitian matrix G with dΦ = Re Tr(G dR):
/// −Ns·c·M⁻² in block form, −c·Σ_k [M̄⁻²]_kk otherwise (c = T/σs²).
pub fn phi_block_gradient(
    r: &CMat,
    stats: &SensingChannelStats,
    t: usize,
    sigma_s2: f64,
) -> Result<CMat> {
    let cc = t as f64 / sigma_s2;
    if stats.block_diagonal {
        let minv = linalg::inverse_hpd(&(stats.inverse()? + r * c(cc)))?;
        Ok(linalg::hermitize(&(&minv * &minv)) * c(-(stats.n_rx_sense() as f64) * cc))
    } else {
        let ns = stats.n_rx_sense();
        let m = stats.inverse()? + linalg::kron_identity(ns, r) * c(cc);
        let minv = linalg::inverse_hpd(&m)?;
        let sq = &minv * &minv;
        Ok(linalg::hermitize(&linalg::block_partial_trace(&sq, ns)) * c(-cc))
    }
}

/// Bayesian MMSE estimate ĝ = (σs²Σ̄g⁻¹ + X̄†X̄)⁻¹ X̄† s and its conditional MSE.
pub fn mmse_estimate(
    x: &Waveform,
    s: &CVec,
    stats: &SensingChannelStats,
    sigma_s2: f64,
) -> Result<EstimatorOutput> {
    let n = stats.n_tx();
    let ns = stats.n_rx_sense();
    let t = x.len();
    if x.n_tx() != n {
        return Err(IsacError::Dimension(format!(
            "waveform has {} rows, sensing channel has {n} inputs",
            x.n_tx()
        )));
    }
    if s.len() != t * ns {
        return Err(IsacError::Dimension(format!(
            "observation length {} != T·Ns = {}",
            s.len(),
            t * ns
        )));
    }
    if !(sigma_s2.is_finite() && sigma_s2 >= 0.0) {
        return Err(IsacError::Domain("sensing noise variance must be >= 0".into()));
    }
    let xx = linalg::hermitize(&(&x.x * x.x.adjoint()));
    let prior = |inv: CMat| inv * c(sigma_s2);
    // X̄† s stacks X s_i over the Ns receive blocks s_i (length T each).
    let mut rhs = CMat::zeros(n, ns);
    for i in 0..ns {
        let si = s.rows(i * t, t);
        rhs.column_mut(i).copy_from(&(&x.x * si));
    }
    if stats.block_diagonal {
        let a = if sigma_s2 > 0.0 {
            prior(stats.inverse()?) + &xx
        } else {
            xx
        };
        let sol = linalg::solve_hpd(&a, &rhs).map_err(|_| {
            IsacError::Domain("estimation system is singular (rank-deficient waveform)".into())
        })?;
        let mse = if sigma_s2 > 0.0 {
            sigma_s2 * ns as f64 * linalg::trace_inverse_hpd(&a)?
        } else {
            0.0
        };
        Ok(EstimatorOutput {
            g_hat: linalg::vec_columns(&sol),
            conditional_mse: mse,
        })
    } else {
        let big = linalg::kron_identity(ns, &xx);
        let a = if sigma_s2 > 0.0 {
            prior(stats.inverse()?) + big
        } else {
            big
        };
        let rhs_v = CMat::from_column_slice(n * ns, 1, linalg::vec_columns(&rhs).as_slice());
        let sol = linalg::solve_hpd(&a, &rhs_v).map_err(|_| {
            IsacError::Domain("estimation system is singular (rank-deficient waveform)".into())
        })?;
        let mse = if sigma_s2 > 0.0 {
            sigma_s2 * linalg::trace_inverse_hpd(&a)?
        } else {
            0.0
        };
        Ok(EstimatorOutput {
            g_hat: CVec::from_column_slice(sol.as_slice()),
            conditional_mse: mse,
        })
    }
}

/// s = vec(S†) for S = G X + Zs with Zs i.i.d. CN(0, σs²).
pub fn sense<R: rand::Rng + ?Sized>(
    g: &CMat,
    x: &Waveform,
    sigma_s2: f64,
    rng: &mut R,
) -> CVec {
    let z = crate::model::complex_gaussian_matrix(g.nrows(), x.len(), sigma_s2, rng);
    linalg::vec_adjoint(&(g * &x.x + z))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmseEstimate {
    pub value: MmseValue,
    pub stderr: f64,
}

/// E_X[Φ(I⊗(1/T)XX†)] over `cfg.mc_trials` draws of `sampler`.
pub fn expected_mmse<F>(
    sampler: F,
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    stream: RngStream,
) -> Result<MmseEstimate>
where
    F: Fn(&mut ChaCha20Rng) -> Result<Waveform> + Sync,
{
    let samples = monte_carlo(cfg.mc_trials, stream, |_, rng| {
        let x = sampler(rng)?;
        Ok(phi_block(&x.sample_correlation(), stats, x.len(), cfg.sense_noise_var)?.value)
    })?;
    let est = Estimate::from_samples(&samples);
    Ok(MmseEstimate {
        value: MmseValue::new(est.mean, stats),
        stderr: est.stderr,
    })
}
