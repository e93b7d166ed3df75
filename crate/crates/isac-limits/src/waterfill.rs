//! Closed-form water-filling: the sensing-optimal waveform over the eigenmodes
//! of Σg, the communication-optimal input per channel realization, and the
//! high-SNR sensing-limited rate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::linalg::{self, c, CMat};
use crate::model::{
    monte_carlo, sample_comm_channel, sample_stiefel_uniform, CorrelationMatrix, Estimate,
    RngStream, SensingChannelStats, SystemConfig, Waveform, WaveformKind,
};
use crate::sensing::MmseValue;

/// Gains at or below this fraction of the largest gain are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct WaterFillResult {
    /// η
    pub water_level: f64,
    /// Diagonal of P, aligned with `gains` and the columns of `basis`.
    pub powers: Vec<f64>,
    /// Mode gains (λ_i of Σg or γ_i of H†H), descending.
    pub gains: Vec<f64>,
    /// U_g for sensing, V_H for communication.
    pub basis: CMat,
    pub active_count: usize,
}

/// Solves Σ_i (η − noise/g_i)⁺ = budget over gains sorted descending.
///
/// Scans active sets k = 1, 2, … and stops at the first k whose level does
/// not reach the next floor. Zero gains never receive power.
pub fn water_level(gains: &[f64], noise: f64, budget: f64) -> Result<(f64, Vec<f64>)> {
    if !(budget.is_finite() && budget > 0.0) || !(noise.is_finite() && noise > 0.0) {
        return Err(IsacError::Domain(
            "water-filling needs positive noise and budget".into(),
        ));
    }
    let gmax = gains.iter().cloned().fold(0.0, f64::max);
    if gmax <= 0.0 {
        return Err(IsacError::DegenerateChannel("all mode gains are zero".into()));
    }
    let mut order: Vec<usize> = (0..gains.len())
        .filter(|&i| gains[i] > RANK_TOL * gmax)
        .collect();
    order.sort_by(|&a, &b| gains[b].partial_cmp(&gains[a]).unwrap().then(a.cmp(&b)));
    let floors: Vec<f64> = order.iter().map(|&i| noise / gains[i]).collect();
    let mut sum_floor = 0.0;
    let mut eta = 0.0;
    let mut k_active = 0;
    for k in 0..floors.len() {
        sum_floor += floors[k];
        eta = (budget + sum_floor) / (k + 1) as f64;
        k_active = k + 1;
        if k + 1 == floors.len() || eta <= floors[k + 1] {
            break;
        }
    }
    let mut powers = vec![0.0; gains.len()];
    for (pos, &i) in order.iter().take(k_active).enumerate() {
        powers[i] = eta - floors[pos];
    }
    Ok((eta, powers))
}

#[derive(Debug, Clone)]
pub struct SensingWaterFill {
    pub fill: WaterFillResult,
    /// ε_s
    pub eps_s: MmseValue,
    /// R_Xs = (1/T) U_g P_s U_g†
    pub r_xs: CorrelationMatrix,
    /// T used for the budget T·N·P0.
    pub coherence_time: usize,
}

/// Sensing-optimal water-filling with the configured coherence time.
pub fn sensing_waterfill(stats: &SensingChannelStats, cfg: &SystemConfig) -> Result<SensingWaterFill> {
    sensing_waterfill_over(stats, cfg, cfg.coherence_time)
}

/// Σ(η − σs²/λ_i)⁺ = T·N·P0,  ε_s = Ns Σ λ_i / ((λ_i η/σs² − 1)⁺ + 1).
pub fn sensing_waterfill_over(
    stats: &SensingChannelStats,
    cfg: &SystemConfig,
    t: usize,
) -> Result<SensingWaterFill> {
    if !stats.block_diagonal {
        return Err(IsacError::Domain(
            "sensing water-filling needs a block-diagonal sensing covariance".into(),
        ));
    }
    if stats.n_tx() != cfg.n_tx {
        return Err(IsacError::Dimension(format!(
            "sensing covariance is {}x{}, config has N={}",
            stats.n_tx(),
            stats.n_tx(),
            cfg.n_tx
        )));
    }
    let lambda = stats.eigenvalues().to_vec();
    let noise = cfg.sense_noise_var;
    let budget = t as f64 * cfg.total_power();
    let (eta, powers) = water_level(&lambda, noise, budget)?;
    let eps: f64 = lambda
        .iter()
        .map(|&l| {
            if l <= 0.0 {
                0.0
            } else {
                l / ((l * eta / noise - 1.0).max(0.0) + 1.0)
            }
        })
        .sum::<f64>()
        * stats.n_rx_sense() as f64;
    let basis = stats.eig.vectors.clone();
    let scaled: Vec<f64> = powers.iter().map(|p| p / t as f64).collect();
    let r_xs = CorrelationMatrix::new(linalg::reassemble(&basis, &scaled), cfg.total_power())?;
    let active_count = powers.iter().filter(|&&p| p > 0.0).count();
    Ok(SensingWaterFill {
        fill: WaterFillResult {
            water_level: eta,
            powers,
            gains: lambda,
            basis,
            active_count,
        },
        eps_s: MmseValue::new(eps, stats),
        r_xs,
        coherence_time: t,
    })
}

/// X_s = U_g P_s^{1/2} Ψ with Ψ ∈ C^{N×T} Haar on the Stiefel manifold.
pub fn sensing_isometry_waveform<R: Rng + ?Sized>(
    wf: &SensingWaterFill,
    rng: &mut R,
) -> Result<Waveform> {
    let n = wf.fill.powers.len();
    let psi = sample_stiefel_uniform(n, wf.coherence_time, rng)?;
    let roots: Vec<f64> = wf.fill.powers.iter().map(|p| p.sqrt()).collect();
    let x = &wf.fill.basis * linalg::diag_real(&roots) * &psi;
    Ok(Waveform {
        x,
        kind: WaveformKind::Isometry,
        factor: Some(psi),
    })
}

#[derive(Debug, Clone)]
pub struct CommWaterFill {
    pub fill: WaterFillResult,
    pub rate_nats: f64,
    /// R_Xc = V_H P_c V_H†
    pub r_xc: CorrelationMatrix,
}

/// Communication-optimal water-filling over the eigenmodes γ_i of H†H:
/// Σ(η − σc²/γ_i)⁺ = N·P0, rate Σ (log(η γ_i/σc²))⁺.
pub fn comm_waterfill(h: &CMat, cfg: &SystemConfig) -> Result<CommWaterFill> {
    comm_waterfill_power(h, cfg.total_power(), cfg.comm_noise_var)
}

pub fn comm_waterfill_power(h: &CMat, total_power: f64, noise: f64) -> Result<CommWaterFill> {
    if linalg::frobenius(h) == 0.0 {
        return Err(IsacError::DegenerateChannel("H = 0".into()));
    }
    let gram = linalg::hermitize(&(h.adjoint() * h));
    let eig = linalg::eig_psd(&gram)?;
    let (eta, powers) = water_level(&eig.values, noise, total_power)?;
    let rate = eig
        .values
        .iter()
        .zip(&powers)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&g, _)| (eta * g / noise).ln().max(0.0))
        .sum();
    let r_xc = CorrelationMatrix::new(linalg::reassemble(&eig.vectors, &powers), total_power)?;
    let active_count = powers.iter().filter(|&&p| p > 0.0).count();
    Ok(CommWaterFill {
        fill: WaterFillResult {
            water_level: eta,
            powers,
            gains: eig.values,
            basis: eig.vectors,
            active_count,
        },
        rate_nats: rate,
        r_xc,
    })
}

/// log det(I + H R H†/σc²)
pub fn coherent_rate(h: &CMat, r: &CMat, noise: f64) -> Result<f64> {
    let nc = h.nrows();
    let m = linalg::identity(nc) + linalg::hermitize(&(h * r * h.adjoint())) / c(noise);
    linalg::logdet_hpd(&m)
}

/// c0(r, T) = (r/T)[(T − r/2) log(T/e) − log Γ(T) + log(2√π)].
pub fn c0(rank: usize, t: usize) -> f64 {
    if rank == 0 {
        return 0.0;
    }
    let tf = t as f64;
    let r = rank as f64;
    let ln_gamma_t: f64 = (2..t).map(|k| (k as f64).ln()).sum();
    (r / tf) * ((tf - r / 2.0) * (tf.ln() - 1.0) - ln_gamma_t + (2.0 * std::f64::consts::PI.sqrt()).ln())
}

/// High-SNR rate of an isometry input with correlation R over one realization:
/// (1 − r/2T)·log det⁺(H R H†/σc²) + c0(r, T), with r = rank(H R H†).
pub fn high_snr_rate(h: &CMat, r: &CMat, t: usize, noise: f64) -> Result<f64> {
    let m = linalg::hermitize(&(h * r * h.adjoint())) / c(noise);
    let eig = linalg::eig_psd(&m)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let positive: Vec<f64> = eig
        .values
        .iter()
        .copied()
        .filter(|&v| v > 1e-10 * top)
        .collect();
    let rank = positive.len();
    let logdet: f64 = positive.iter().map(|v| v.ln()).sum();
    Ok((1.0 - rank as f64 / (2.0 * t as f64)) * logdet + c0(rank, t))
}

/// Ergodic sensing-limited rate R_s of the sensing-optimal isometry waveform.
pub fn sensing_limited_rate(
    cfg: &SystemConfig,
    stats: &SensingChannelStats,
    stream: RngStream,
) -> Result<Estimate> {
    let wf = sensing_waterfill(stats, cfg)?;
    ergodic_average(
        |h| high_snr_rate(h, &wf.r_xs.mat, cfg.coherence_time, cfg.comm_noise_var),
        cfg,
        stream,
    )
}

/// SAA driver: mean and stderr of `per_realization(H)` over `cfg.mc_trials` draws of H.
pub fn ergodic_average<F>(per_realization: F, cfg: &SystemConfig, stream: RngStream) -> Result<Estimate>
where
    F: Fn(&CMat) -> Result<f64> + Sync,
{
    let samples = monte_carlo(cfg.mc_trials, stream, |_, rng| {
        let h = sample_comm_channel(cfg, rng);
        per_realization(&h)
    })?;
    Ok(Estimate::from_samples(&samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeRow {
    pub index: usize,
    pub gain: f64,
    pub power: f64,
}

impl WaterFillResult {
    pub fn rows(&self) -> Vec<ModeRow> {
        self.gains
            .iter()
            .zip(&self.powers)
            .enumerate()
            .map(|(index, (&gain, &power))| ModeRow { index, gain, power })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_meets_budget_and_skips_weak_modes() {
        let (eta, p) = water_level(&[4.0, 1.0, 0.01], 1.0, 1.0).unwrap();
        // floors 0.25, 1, 100: level 1.125 sits above the first two
        assert!((eta - 1.125).abs() < 1e-15);
        assert_eq!(p[2], 0.0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn level_rejects_bad_inputs() {
        assert!(water_level(&[1.0], 0.0, 1.0).is_err());
        assert!(water_level(&[1.0], 1.0, -1.0).is_err());
        assert!(matches!(water_level(&[0.0, 0.0], 1.0, 1.0), Err(IsacError::DegenerateChannel(_))));
    }
}
