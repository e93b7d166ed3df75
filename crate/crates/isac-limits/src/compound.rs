//! Compound pilot-then-data signaling on a coincided channel (G = H), and the
//! non-coherent equal-power baseline.

use serde::{Deserialize, Serialize};

use crate::error::{IsacError, Result};
use crate::linalg::{self, c};
use crate::model::{
    complex_gaussian_matrix, monte_carlo, sample_comm_channel, Estimate, RngStream,
    SensingChannelStats, SystemConfig, Waveform, WaveformKind,
};
use crate::sensing::{mmse_estimate, phi_block, sense};
use crate::waterfill::{
    coherent_rate, comm_waterfill, high_snr_rate, sensing_isometry_waveform,
    sensing_waterfill_over,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompoundResult {
    /// T′
    pub t_pilot: usize,
    /// ε̆, pilot-phase estimation MSE.
    pub mmse: Estimate,
    /// R̆ = (T′/T)·R_pilot + ((T−T′)/T)·R_data
    pub rate_total: Estimate,
    pub rate_pilot: Estimate,
    /// Realized rate log det(I + H R_Xc(Ĥ) H†/σc²).
    pub rate_data: Estimate,
    /// Diagnostic: water-filling rate evaluated on Ĥ itself.
    pub rate_data_on_estimate: Estimate,
    /// Perfect-CSI water-filling rate on the same draws.
    pub coherent_rate: Estimate,
    /// Simulated ‖Ĥ − H‖_F².
    pub estimation_error: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// R̈_c = E log det(I + (P0/σc²) H H†)
    pub rate: Estimate,
    /// ε̈_c, Φ of equal-power Gaussian sample correlations.
    pub mmse: Estimate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompoundSweep {
    pub results: Vec<CompoundResult>,
    pub baseline: Baseline,
}

impl CompoundSweep {
    /// Result with the largest mean total rate.
    pub fn best(&self) -> &CompoundResult {
        self.results
            .iter()
            .max_by(|a, b| a.rate_total.mean.partial_cmp(&b.rate_total.mean).unwrap())
            .expect("non-empty sweep")
    }
}

fn require_coincided(stats: &SensingChannelStats, cfg: &SystemConfig) -> Result<()> {
    let ok = stats.block_diagonal
        && stats.n_tx() == cfg.n_tx
        && stats.n_rx_sense() == cfg.n_rx_comm
        && stats
            .scaled_identity()
            .is_some_and(|v| (v - cfg.comm_channel_var).abs() <= 1e-12 * cfg.comm_channel_var);
    if !ok {
        return Err(IsacError::Mode(
            "compound signaling needs the coincided channel: sensing covariance sigma_h^2 I with Ns = Nc".into(),
        ));
    }
    Ok(())
}

/// Equal-power Gaussian signaling X = √P0·N over all T symbols.
pub fn noncoherent_baseline(
    cfg: &SystemConfig,
    stats: &SensingChannelStats,
    stream: RngStream,
) -> Result<Baseline> {
    cfg.validate()?;
    require_coincided(stats, cfg)?;
    let t = cfg.coherence_time;
    let p0 = cfg.per_antenna_power;
    let r = linalg::identity(cfg.n_tx) * c(p0);
    let rows = monte_carlo(cfg.mc_trials, stream, |_, rng| {
        let h = sample_comm_channel(cfg, rng);
        let rate = coherent_rate(&h, &r, cfg.comm_noise_var)?;
        let x = complex_gaussian_matrix(cfg.n_tx, t, p0, rng);
        let rs = linalg::hermitize(&(&x * x.adjoint())) / c(t as f64);
        let mmse = phi_block(&rs, stats, t, cfg.sense_noise_var)?.value;
        Ok((rate, mmse))
    })?;
    let rate: Vec<f64> = rows.iter().map(|v| v.0).collect();
    let mmse: Vec<f64> = rows.iter().map(|v| v.1).collect();
    Ok(Baseline {
        rate: Estimate::from_samples(&rate),
        mmse: Estimate::from_samples(&mmse),
    })
}

/// Pilot over T′ symbols with the sensing-optimal isometry, MMSE estimate Ĥ,
/// then water-filling on Ĥ over the remaining T − T′ symbols.
pub fn compound_run(
    t_pilot: usize,
    cfg: &SystemConfig,
    stats: &SensingChannelStats,
    stream: RngStream,
) -> Result<CompoundResult> {
    cfg.validate()?;
    require_coincided(stats, cfg)?;
    let t = cfg.coherence_time;
    if t_pilot < cfg.n_tx || t_pilot > t {
        return Err(IsacError::Domain(format!(
            "pilot length T'={t_pilot} must lie in [N, T] = [{}, {t}]",
            cfg.n_tx
        )));
    }
    let pilot = sensing_waterfill_over(stats, cfg, t_pilot)?;
    let rows = monte_carlo(cfg.mc_trials, stream, |_, rng| {
        let h = sample_comm_channel(cfg, rng);
        let x: Waveform = sensing_isometry_waveform(&pilot, rng)?;
        let s = sense(&h, &x, cfg.sense_noise_var, rng);
        let est = mmse_estimate(&x, &s, stats, cfg.sense_noise_var)?;
        let h_hat = linalg::unvec_adjoint(&est.g_hat, cfg.n_rx_comm, cfg.n_tx)?;
        let err = linalg::frobenius(&(&h_hat - &h)).powi(2);
        let data = comm_waterfill(&h_hat, cfg)?;
        let rate_data = coherent_rate(&h, &data.r_xc.mat, cfg.comm_noise_var)?;
        let rate_pilot = high_snr_rate(&h, &pilot.r_xs.mat, t_pilot, cfg.comm_noise_var)?;
        let coherent = comm_waterfill(&h, cfg)?.rate_nats;
        Ok([
            est.conditional_mse,
            rate_pilot,
            rate_data,
            data.rate_nats,
            coherent,
            err,
        ])
    })?;
    let col = |k: usize| Estimate::from_samples(&rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    let wp = t_pilot as f64 / t as f64;
    let wd = (t - t_pilot) as f64 / t as f64;
    let total: Vec<f64> = rows.iter().map(|r| wp * r[1] + wd * r[2]).collect();
    let mut rate_total = Estimate::from_samples(&total);
    let rate_pilot = col(1);
    let rate_data = col(2);
    // exact composition of the phase means
    rate_total.mean = wp * rate_pilot.mean + wd * rate_data.mean;
    Ok(CompoundResult {
        t_pilot,
        mmse: col(0),
        rate_total,
        rate_pilot,
        rate_data,
        rate_data_on_estimate: col(3),
        coherent_rate: col(4),
        estimation_error: col(5),
    })
}

/// Runs each pilot length on the same channel draws, plus the baseline.
pub fn compound_sweep(
    t_pilots: &[usize],
    cfg: &SystemConfig,
    stats: &SensingChannelStats,
    stream: RngStream,
) -> Result<CompoundSweep> {
    if t_pilots.is_empty() {
        return Err(IsacError::Domain("empty pilot-length sweep".into()));
    }
    let results = t_pilots
        .iter()
        .map(|&tp| compound_run(tp, cfg, stats, stream))
        .collect::<Result<Vec<_>>>()?;
    let baseline = noncoherent_baseline(cfg, stats, stream)?;
    Ok(CompoundSweep { results, baseline })
}

impl Waveform {
    /// Pilot followed by data block.
    pub fn compound(pilot: &Waveform, data: &Waveform) -> Result<Waveform> {
        if pilot.n_tx() != data.n_tx() {
            return Err(IsacError::Dimension("pilot and data row counts differ".into()));
        }
        let mut x = linalg::CMat::zeros(pilot.n_tx(), pilot.len() + data.len());
        x.view_mut((0, 0), (pilot.n_tx(), pilot.len())).copy_from(&pilot.x);
        x.view_mut((0, pilot.len()), (data.n_tx(), data.len()))
            .copy_from(&data.x);
        Ok(Waveform {
            x,
            kind: WaveformKind::Compound,
            factor: None,
        })
    }
}
