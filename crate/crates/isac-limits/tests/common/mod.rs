#![allow(dead_code)]

use isac_limits::linalg::{self, c, CMat, CVec};
use isac_limits::model::{complex_gaussian_matrix, SensingChannelStats, SystemConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn random_hermitian(n: usize, rng: &mut ChaCha20Rng) -> CMat {
    let a = complex_gaussian_matrix(n, n, 1.0, rng);
    (&a + a.adjoint()) * c(0.5)
}

/// A A† + shift·I
pub fn random_hpd(n: usize, shift: f64, rng: &mut ChaCha20Rng) -> CMat {
    let a = complex_gaussian_matrix(n, n, 1.0, rng);
    &a * a.adjoint() + CMat::identity(n, n) * c(shift)
}

/// PSD of rank r scaled to trace `total`.
pub fn random_psd_trace(n: usize, r: usize, total: f64, rng: &mut ChaCha20Rng) -> CMat {
    let a = complex_gaussian_matrix(n, r, 1.0, rng);
    let m = &a * a.adjoint();
    let tr: f64 = (0..n).map(|i| m[(i, i)].re).sum();
    m * c(total / tr)
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn tr(a: &CMat) -> f64 {
    (0..a.nrows()).map(|i| a[(i, i)].re).sum()
}

/// Inverse by Gauss-Jordan with partial pivoting, independent of the crate's Cholesky path.
pub fn gj_inverse(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = CMat::identity(n, n);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].norm().partial_cmp(&m[(j, col)].norm()).unwrap())
            .unwrap();
        m.swap_rows(col, piv);
        inv.swap_rows(col, piv);
        let p = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= p;
            inv[(col, j)] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                if f != Complex64::new(0.0, 0.0) {
                    for j in 0..n {
                        let mv = m[(col, j)];
                        let iv = inv[(col, j)];
                        m[(i, j)] -= f * mv;
                        inv[(i, j)] -= f * iv;
                    }
                }
            }
        }
    }
    inv
}

/// Φ(I⊗R) straight from the definition with the dense Kronecker matrix.
pub fn phi_reference(r: &CMat, sigma_g: &CMat, ns: usize, t: usize, sigma_s2: f64) -> f64 {
    let n = r.nrows();
    let mut big_sig = CMat::zeros(n * ns, n * ns);
    let mut big_r = CMat::zeros(n * ns, n * ns);
    for b in 0..ns {
        big_sig.view_mut((b * n, b * n), (n, n)).copy_from(sigma_g);
        big_r.view_mut((b * n, b * n), (n, n)).copy_from(r);
    }
    let m = gj_inverse(&big_sig) + big_r * c(t as f64 / sigma_s2);
    tr(&gj_inverse(&m))
}

pub fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn mimo_cfg(n: usize, nc: usize, ns: usize, t: usize, p0: f64) -> SystemConfig {
    SystemConfig {
        n_tx: n,
        n_rx_comm: nc,
        n_rx_sense: ns,
        coherence_time: t,
        per_antenna_power: p0,
        ..SystemConfig::default()
    }
}

/// Exponential-profile Σg scaled to Tr(Σ̄g)/(N·Ns) = 0.03.
pub fn paper_stats(n: usize, ns: usize) -> SensingChannelStats {
    let sg = isac_limits::model::CovarianceProfile::Exponential { rho: 0.9 }
        .build(n, Some(0.03))
        .unwrap();
    SensingChannelStats::block(sg, ns).unwrap()
}

/// Ordinary least squares slope, intercept and R².
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

/// g_i = L w_i stacked as G = (L W)† so that vec(G†) ~ CN(0, I⊗Σg).
pub fn draw_g(stats: &SensingChannelStats, r: &mut ChaCha20Rng) -> CMat {
    let l = linalg::psd_factor(stats.sigma_g().unwrap()).unwrap();
    let w = complex_gaussian_matrix(stats.n_tx(), stats.n_rx_sense(), 1.0, r);
    (l * w).adjoint()
}

/// Σ̄g X̄† (X̄ Σ̄g X̄† + σs² I)⁻¹ s with X̄ = I_Ns ⊗ X†, formed densely.
pub fn estimator_alternative(x: &CMat, s: &CVec, sigma_bar: &CMat, ns: usize, sigma_s2: f64) -> CVec {
    let xbar = linalg::kron_identity(ns, &x.adjoint());
    let k = &xbar * sigma_bar * xbar.adjoint() + CMat::identity(xbar.nrows(), xbar.nrows()) * c(sigma_s2);
    sigma_bar * xbar.adjoint() * gj_inverse(&k) * s
}
