//! Batch interface: config files, mode dispatch, CSV datasets, run manifests.
//!
//! Every run writes `<mode>.csv` (plus mode-specific side tables) and one
//! `manifest.json` describing all of them.

pub mod config;
pub mod csv;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ba::limit_curve;
use crate::bounds::{region_dataset, RegionOptions};
use crate::compound::compound_sweep;
use crate::error::{IsacError, Result};
use crate::model::{RngStream, SensingChannelStats, SystemConfig};
use crate::sensing::expected_mmse;
use crate::waterfill::{comm_waterfill, sensing_limited_rate, sensing_waterfill};
use crate::model::{sample_comm_channel, sample_gaussian_waveform};

pub use config::{parse_config, parse_config_str, ConfigError, ConfigErrorKind, RunConfig};
use csv::{header_with_standard, standard_cells, Cell, Table};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Waterfill,
    Region,
    SisoLimit,
    Compound,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "waterfill" => Some(Mode::Waterfill),
            "region" => Some(Mode::Region),
            "siso-limit" => Some(Mode::SisoLimit),
            "compound" => Some(Mode::Compound),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Waterfill => "waterfill",
            Mode::Region => "region",
            Mode::SisoLimit => "siso-limit",
            Mode::Compound => "compound",
        }
    }

    fn stream_tag(&self) -> u64 {
        match self {
            Mode::Waterfill => 1,
            Mode::Region => 2,
            Mode::SisoLimit => 3,
            Mode::Compound => 4,
        }
    }
}

/// Sidecar describing one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub mode: String,
    pub config_echo: RunConfig,
    pub seed: u64,
    pub artifact_version: String,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub outputs: Vec<String>,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub verbose: bool,
}

/// Tables produced by one mode, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub tables: Vec<(String, Table)>,
    pub warnings: Vec<String>,
    pub converged: bool,
    pub config: RunConfig,
}

impl RunOutput {
    /// Writes every table plus `manifest.json` into `dir`.
    pub fn write(&self, mode: Mode, dir: &Path, wall_time_s: f64) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, table) in &self.tables {
            let p = dir.join(name);
            std::fs::write(&p, table.to_csv())?;
            written.push(p);
        }
        let manifest = RunManifest {
            mode: mode.as_str().into(),
            config_echo: self.config.clone(),
            seed: self.config.system.rng_seed,
            artifact_version: ARTIFACT_VERSION.into(),
            wall_time_s,
            warnings: self.warnings.clone(),
            outputs: self.tables.iter().map(|(n, _)| n.clone()).collect(),
            converged: self.converged,
        };
        let p = dir.join("manifest.json");
        std::fs::write(&p, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))?;
        written.push(p);
        Ok(written)
    }
}

/// Applies CLI overrides and checks the scenario mode against `mode`.
pub fn resolve(mode: Mode, cfg: &RunConfig, opts: &RunOptions) -> std::result::Result<RunConfig, ConfigError> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.system.rng_seed = s;
    }
    if let Some(t) = opts.trials {
        cfg.system.mc_trials = t;
    }
    if let Some(m) = &cfg.scenario.mode {
        if Mode::parse(m) != Some(mode) {
            return Err(ConfigError {
                kind: ConfigErrorKind::Invariant,
                key: "scenario.mode".into(),
                message: format!("config is for mode `{m}`, run requested `{}`", mode.as_str()),
            });
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sensing statistics for the configuration, with any notices raised.
pub fn build_stats(cfg: &RunConfig, system: &SystemConfig) -> Result<(SensingChannelStats, Vec<String>)> {
    let mut notes = Vec::new();
    if cfg.sensing.coincided {
        if system.n_rx_sense != system.n_rx_comm {
            notes.push(format!(
                "coincided channel: n_rx_sense {} replaced by n_rx_comm {}",
                system.n_rx_sense, system.n_rx_comm
            ));
        }
        return Ok((SensingChannelStats::coincided(system)?, notes));
    }
    let profile = cfg.sensing.covariance_profile()?;
    let sigma_g = profile.build(system.n_tx, cfg.sensing.normalized_trace)?;
    let stats = SensingChannelStats::block(sigma_g, system.n_rx_sense)?;
    if !stats.is_full_rank() {
        notes.push("sensing covariance is rank deficient; zero modes receive no sensing power".into());
    }
    Ok((stats, notes))
}

/// Computes the datasets of `mode`.
pub fn run(mode: Mode, cfg: &RunConfig, opts: &RunOptions) -> Result<RunOutput> {
    let cfg = resolve(mode, cfg, opts).map_err(|e| IsacError::config(e.key, e.message))?;
    let root = RngStream::new(cfg.system.rng_seed, mode.stream_tag());
    match mode {
        Mode::Waterfill => run_waterfill(&cfg, root),
        Mode::Region => run_region(&cfg, root),
        Mode::SisoLimit => run_siso(&cfg, root, opts.verbose),
        Mode::Compound => run_compound(&cfg, root),
    }
}

/// Runs `mode` and writes its outputs; returns the written paths and the output.
pub fn run_to_dir(mode: Mode, cfg: &RunConfig, opts: &RunOptions, dir: &Path) -> Result<(Vec<PathBuf>, RunOutput)> {
    let start = Instant::now();
    let out = run(mode, cfg, opts)?;
    let files = out
        .write(mode, dir, start.elapsed().as_secs_f64())
        .map_err(|e| IsacError::Internal(format!("writing outputs: {e}")))?;
    Ok((files, out))
}

fn snr_warning(system: &SystemConfig, what: &str, warnings: &mut Vec<String>) {
    if system.transmit_snr_db() < 10.0 {
        warnings.push(format!(
            "transmit SNR {:.2} dB is below 10 dB; the {what} uses a high-SNR expansion",
            system.transmit_snr_db()
        ));
    }
}

fn run_waterfill(cfg: &RunConfig, root: RngStream) -> Result<RunOutput> {
    let sys = &cfg.system;
    let (stats, mut warnings) = build_stats(cfg, sys)?;
    snr_warning(sys, "sensing-limited rate", &mut warnings);
    let sw = sensing_waterfill(&stats, sys)?;
    let rs = sensing_limited_rate(sys, &stats, root.substream(0))?;
    let mut rng = root.substream(1).rng();
    let h = sample_comm_channel(sys, &mut rng);
    let cw = comm_waterfill(&h, sys)?;
    let r_xc = cw.r_xc.clone();
    let t = sys.coherence_time;
    let eps_c = expected_mmse(
        |rng| sample_gaussian_waveform(&r_xc, t, rng),
        &stats,
        sys,
        root.substream(2),
    )?;

    let mut table = Table::new(&header_with_standard(&[
        "section",
        "mode_index",
        "gain",
        "power",
        "water_level",
        "active",
        "mmse_normalized",
    ]));
    for (i, (&g, &p)) in sw.fill.gains.iter().zip(&sw.fill.powers).enumerate() {
        let mut row = vec![
            "sensing".into(),
            i.into(),
            g.into(),
            (p / t as f64).into(),
            sw.fill.water_level.into(),
            (p > 0.0).into(),
            sw.eps_s.normalized.into(),
        ];
        row.extend(standard_cells(Some(0.0), "sib", sw.eps_s.value, 0.0, rs.mean, rs.stderr, true));
        table.push(row);
    }
    for (i, (&g, &p)) in cw.fill.gains.iter().zip(&cw.fill.powers).enumerate() {
        let mut row = vec![
            "comm".into(),
            i.into(),
            g.into(),
            p.into(),
            cw.fill.water_level.into(),
            (p > 0.0).into(),
            eps_c.value.normalized.into(),
        ];
        row.extend(standard_cells(
            Some(1.0),
            "cib",
            eps_c.value.value,
            eps_c.stderr,
            cw.rate_nats,
            0.0,
            true,
        ));
        table.push(row);
    }
    Ok(RunOutput {
        tables: vec![("waterfill.csv".into(), table)],
        warnings,
        converged: true,
        config: cfg.clone(),
    })
}

fn run_region(cfg: &RunConfig, root: RngStream) -> Result<RunOutput> {
    let base = &cfg.system;
    let sc = &cfg.scenario;
    let snrs: Vec<Option<f64>> = match &sc.snr_db {
        Some(v) => v.iter().map(|&s| Some(s)).collect(),
        None => vec![None],
    };
    let ts = sc.coherence_times.clone().unwrap_or_else(|| vec![base.coherence_time]);
    let nss = sc.n_rx_sense_values.clone().unwrap_or_else(|| vec![base.n_rx_sense]);
    let opts = RegionOptions {
        time_share_points: sc.time_share_points,
        grid: cfg.ba.grid(),
        channel: cfg.ba.channel(),
    };
    let mut table = Table::new(&header_with_standard(&[
        "snr_db",
        "coherence_time",
        "n_rx_sense",
        "mmse_normalized",
    ]));
    let mut warnings = Vec::new();
    let mut converged = true;
    let mut combo = 0u64;
    for snr in &snrs {
        for &t in &ts {
            for &ns in &nss {
                let mut sys = base.clone();
                sys.coherence_time = t;
                sys.n_rx_sense = ns;
                if let Some(s) = snr {
                    sys = sys.with_transmit_snr_db(*s);
                }
                sys.validate()?;
                let (stats, notes) = build_stats(cfg, &sys)?;
                let tag = format!("[snr={:.2} dB, T={t}, Ns={}]", sys.transmit_snr_db(), stats.n_rx_sense());
                warnings.extend(notes.into_iter().map(|n| format!("{tag} {n}")));
                let ds = region_dataset(&sys, &stats, &sc.alphas, root.substream(combo), &opts)?;
                combo += 1;
                warnings.extend(ds.warnings.iter().map(|w| format!("{tag} {w}")));
                let dim = (sys.n_tx * stats.n_rx_sense()) as f64;
                for p in &ds.points {
                    converged &= p.converged;
                    let mut row = vec![
                        sys.transmit_snr_db().into(),
                        t.into(),
                        stats.n_rx_sense().into(),
                        (p.mmse / dim).into(),
                    ];
                    row.extend(standard_cells(
                        p.alpha,
                        p.provenance.as_str(),
                        p.mmse,
                        p.stderr_mmse,
                        p.rate_nats,
                        p.stderr_rate,
                        p.converged,
                    ));
                    table.push(row);
                }
            }
        }
    }
    Ok(RunOutput {
        tables: vec![("region.csv".into(), table)],
        warnings,
        converged,
        config: cfg.clone(),
    })
}

fn run_siso(cfg: &RunConfig, root: RngStream, verbose: bool) -> Result<RunOutput> {
    let sys = &cfg.system;
    if !sys.is_siso() {
        return Err(IsacError::Mode(
            "siso-limit needs n_tx = n_rx_comm = n_rx_sense = coherence_time = 1".into(),
        ));
    }
    let (stats, warnings) = build_stats(cfg, sys)?;
    let channel = cfg.ba.channel();
    let points = limit_curve(&cfg.scenario.alphas, &stats, sys, &cfg.ba.grid(), channel, root)?;
    let (chan_label, h_cell): (&str, Cell) = match channel {
        crate::ba::ChannelModel::Fixed(h) => ("fixed", h.into()),
        crate::ba::ChannelModel::Ergodic { .. } => ("ergodic", Cell::Empty),
    };
    let mut table = Table::new(&header_with_standard(&[
        "channel",
        "h",
        "source",
        "iterations",
        "power",
    ]));
    let mut dist = Table::new(&["alpha", "variable", "point", "mass"]);
    let mut trace = Table::new(&["alpha", "iteration", "objective", "mu", "rate_nats", "mmse", "newton_iters"]);
    let mut converged = true;
    for p in &points {
        converged &= p.converged;
        let power: Cell = p.result.as_ref().map(|r| r.power).into();
        let mut row = vec![
            chan_label.into(),
            h_cell.clone(),
            (if p.closed_form { "closed_form" } else { "blahut_arimoto" }).into(),
            p.max_iterations.into(),
            power,
        ];
        row.extend(standard_cells(
            Some(p.alpha),
            "limit",
            p.mmse.mean,
            p.mmse.stderr,
            p.rate.mean,
            p.rate.stderr,
            p.converged,
        ));
        table.push(row);
        if let Some(r) = &p.result {
            for (pdf, name) in [(&r.p_x, "x"), (&r.p_y, "y")] {
                for (x, m) in pdf.grid.iter().zip(&pdf.mass) {
                    dist.push(vec![p.alpha.into(), name.into(), (*x).into(), (*m).into()]);
                }
            }
            for tr in &r.trace {
                trace.push(vec![
                    p.alpha.into(),
                    tr.iteration.into(),
                    tr.objective.into(),
                    tr.mu.into(),
                    tr.rate_nats.into(),
                    tr.mmse.into(),
                    tr.newton_iters.into(),
                ]);
            }
        }
    }
    let mut tables = vec![("siso-limit.csv".to_string(), table)];
    if !dist.rows.is_empty() {
        tables.push(("siso-limit_distributions.csv".into(), dist));
    }
    if verbose && !trace.rows.is_empty() {
        tables.push(("siso-limit_trace.csv".into(), trace));
    }
    Ok(RunOutput {
        tables,
        warnings,
        converged,
        config: cfg.clone(),
    })
}

fn run_compound(cfg: &RunConfig, root: RngStream) -> Result<RunOutput> {
    let mut sys = cfg.system.clone();
    let mut warnings = Vec::new();
    if !cfg.sensing.coincided || cfg.sensing.profile != "identity" || cfg.sensing.normalized_trace.is_some() {
        warnings.push(
            "compound mode forces the coincided channel: sensing covariance replaced by sigma_h^2 I with Ns = Nc"
                .into(),
        );
    }
    if sys.n_rx_sense != sys.n_rx_comm {
        warnings.push(format!(
            "compound mode sets n_rx_sense = n_rx_comm = {} (was {})",
            sys.n_rx_comm, sys.n_rx_sense
        ));
        sys.n_rx_sense = sys.n_rx_comm;
    }
    snr_warning(&sys, "pilot-phase rate", &mut warnings);
    let stats = SensingChannelStats::coincided(&sys)?;
    let t_pilots = match &cfg.scenario.t_pilots {
        Some(v) => v.clone(),
        None => {
            let n = sys.n_tx;
            let mut v: Vec<usize> = [n, 2 * n, 4 * n].into_iter().filter(|&t| t <= sys.coherence_time).collect();
            v.dedup();
            v
        }
    };
    let sweep = compound_sweep(&t_pilots, &sys, &stats, root)?;
    let mut table = Table::new(&header_with_standard(&[
        "label",
        "t_pilot",
        "rate_pilot_nats",
        "rate_pilot_stderr",
        "rate_data_nats",
        "rate_data_stderr",
        "rate_data_on_estimate_nats",
        "coherent_rate_nats",
        "estimation_error",
        "estimation_error_stderr",
        "mmse_normalized",
    ]));
    let dim = (sys.n_tx * sys.n_rx_comm) as f64;
    for r in &sweep.results {
        let mut row = vec![
            "compound".into(),
            r.t_pilot.into(),
            r.rate_pilot.mean.into(),
            r.rate_pilot.stderr.into(),
            r.rate_data.mean.into(),
            r.rate_data.stderr.into(),
            r.rate_data_on_estimate.mean.into(),
            r.coherent_rate.mean.into(),
            r.estimation_error.mean.into(),
            r.estimation_error.stderr.into(),
            (r.mmse.mean / dim).into(),
        ];
        row.extend(standard_cells(
            None,
            "strategy",
            r.mmse.mean,
            r.mmse.stderr,
            r.rate_total.mean,
            r.rate_total.stderr,
            true,
        ));
        table.push(row);
    }
    let b = &sweep.baseline;
    let mut row = vec![
        "baseline".into(),
        0usize.into(),
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        Cell::Empty,
        (b.mmse.mean / dim).into(),
    ];
    row.extend(standard_cells(None, "strategy", b.mmse.mean, b.mmse.stderr, b.rate.mean, b.rate.stderr, true));
    table.push(row);
    let mut echo = cfg.clone();
    echo.system = sys;
    Ok(RunOutput {
        tables: vec![("compound.csv".into(), table)],
        warnings,
        converged: true,
        config: echo,
    })
}
