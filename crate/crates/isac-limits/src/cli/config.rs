//! TOML run configuration.
//!
//! ```toml
//! [system]                 # SystemConfig; every key optional
//! n_tx = 2
//! coherence_time = 2
//! per_antenna_power = 15.8
//!
//! [sensing]
//! profile = "exponential"  # identity | exponential | eigenvalues
//! rho = 0.9
//! normalized_trace = 0.03  # Tr(Σ̄g)/(N·Ns) after scaling
//! coincided = false        # Σ̄g = σh² I with Ns = Nc
//!
//! [scenario]
//! alphas = [0.0, 0.25, 0.5, 0.75, 1.0]
//! snr_db = [15.0, 17.5, 20.0]  # region sweep, sets P0 = 10^(snr/10)·σc²/N
//! coherence_times = [6, 60]
//! n_rx_sense_values = [1, 2, 3]
//! t_pilots = [6, 12, 24]
//! time_share_points = 11
//!
//! [ba]
//! x_points = 281          # x grid spans ±x_span·√P0 (default 7)
//! y_points = 561
//! fixed_channel = 1.0      # omit for ergodic averaging over h
//! channel_samples = 50
//! init = "max-entropy"     # or "uniform"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ba::{ChannelModel, GridSpec, InitialInput};
use crate::error::IsacError;
use crate::model::{CovarianceProfile, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    MissingFile,
    Schema,
    Invariant,
}

impl ConfigErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigErrorKind::MissingFile => "config.missing_file",
            ConfigErrorKind::Schema => "config.schema",
            ConfigErrorKind::Invariant => "config.invariant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("[{}] `{key}`: {message}", kind.code())]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn invariant(e: IsacError) -> Self {
        match e {
            IsacError::Config { key, message } => ConfigError {
                kind: ConfigErrorKind::Invariant,
                key,
                message,
            },
            other => ConfigError {
                kind: ConfigErrorKind::Invariant,
                key: "config".into(),
                message: other.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    pub profile: String,
    pub rho: Option<f64>,
    pub eigenvalues: Option<Vec<f64>>,
    pub normalized_trace: Option<f64>,
    pub coincided: bool,
}

impl Default for SensingSection {
    fn default() -> Self {
        SensingSection {
            profile: "identity".into(),
            rho: None,
            eigenvalues: None,
            normalized_trace: None,
            coincided: false,
        }
    }
}

impl SensingSection {
    pub fn covariance_profile(&self) -> Result<CovarianceProfile, IsacError> {
        let stray = |key: &str| {
            Err(IsacError::config(
                format!("sensing.{key}"),
                format!("not used by profile `{}`", self.profile),
            ))
        };
        match self.profile.as_str() {
            "identity" => {
                if self.rho.is_some() {
                    return stray("rho");
                }
                if self.eigenvalues.is_some() {
                    return stray("eigenvalues");
                }
                Ok(CovarianceProfile::Identity)
            }
            "exponential" => {
                if self.eigenvalues.is_some() {
                    return stray("eigenvalues");
                }
                let rho = self
                    .rho
                    .ok_or_else(|| IsacError::config("sensing.rho", "required by profile `exponential`"))?;
                Ok(CovarianceProfile::Exponential { rho })
            }
            "eigenvalues" => {
                if self.rho.is_some() {
                    return stray("rho");
                }
                let values = self.eigenvalues.clone().ok_or_else(|| {
                    IsacError::config("sensing.eigenvalues", "required by profile `eigenvalues`")
                })?;
                Ok(CovarianceProfile::Eigenvalues { values })
            }
            other => Err(IsacError::config(
                "sensing.profile",
                format!("unknown profile `{other}`; expected identity, exponential or eigenvalues"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub mode: Option<String>,
    pub alphas: Vec<f64>,
    pub snr_db: Option<Vec<f64>>,
    pub coherence_times: Option<Vec<usize>>,
    pub n_rx_sense_values: Option<Vec<usize>>,
    pub t_pilots: Option<Vec<usize>>,
    pub time_share_points: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            mode: None,
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            snr_db: None,
            coherence_times: None,
            n_rx_sense_values: None,
            t_pilots: None,
            time_share_points: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaSection {
    pub x_points: usize,
    pub y_points: usize,
    pub x_span: f64,
    pub y_pad: f64,
    pub max_iters: usize,
    pub max_newton_iters: usize,
    pub init: InitialInput,
    pub fixed_channel: Option<f64>,
    pub channel_samples: usize,
}

impl Default for BaSection {
    fn default() -> Self {
        let g = GridSpec::default();
        BaSection {
            x_points: g.x_points,
            y_points: g.y_points,
            x_span: g.x_span,
            y_pad: g.y_pad,
            max_iters: g.max_iters,
            max_newton_iters: g.max_newton_iters,
            init: g.init,
            fixed_channel: None,
            channel_samples: 50,
        }
    }
}

impl BaSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            x_points: self.x_points,
            y_points: self.y_points,
            x_span: self.x_span,
            y_pad: self.y_pad,
            max_iters: self.max_iters,
            max_newton_iters: self.max_newton_iters,
            init: self.init,
        }
    }

    pub fn channel(&self) -> ChannelModel {
        match self.fixed_channel {
            Some(h) => ChannelModel::Fixed(h),
            None => ChannelModel::Ergodic {
                samples: self.channel_samples,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub sensing: SensingSection,
    pub scenario: ScenarioSection,
    pub ba: BaSection,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = ConfigError::invariant;
        self.system.validate().map_err(|e| prefix(inv(e), "system"))?;
        self.sensing.covariance_profile().map_err(inv)?;
        if let Some(t) = self.sensing.normalized_trace {
            if !(t.is_finite() && t > 0.0) {
                return Err(inv(IsacError::config("sensing.normalized_trace", "must be > 0")));
            }
        }
        let sc = &self.scenario;
        if sc.alphas.is_empty() {
            return Err(inv(IsacError::config("scenario.alphas", "must not be empty")));
        }
        if sc.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(inv(IsacError::config("scenario.alphas", "values must lie in [0, 1]")));
        }
        if sc.time_share_points < 2 {
            return Err(inv(IsacError::config("scenario.time_share_points", "must be >= 2")));
        }
        if let Some(v) = &sc.snr_db {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                return Err(inv(IsacError::config("scenario.snr_db", "must be a non-empty list of finite values")));
            }
        }
        if let Some(v) = &sc.coherence_times {
            if v.is_empty() || v.iter().any(|&t| t < self.system.n_tx) {
                return Err(inv(IsacError::config(
                    "scenario.coherence_times",
                    "values must be >= n_tx: estimating a channel with N columns needs at least N samples",
                )));
            }
        }
        if let Some(v) = &sc.n_rx_sense_values {
            if v.is_empty() || v.contains(&0) {
                return Err(inv(IsacError::config("scenario.n_rx_sense_values", "values must be positive")));
            }
        }
        if let Some(v) = &sc.t_pilots {
            let n = self.system.n_tx;
            let t = self.system.coherence_time;
            if v.is_empty() || v.iter().any(|&tp| tp < n || tp > t) {
                return Err(inv(IsacError::config(
                    "scenario.t_pilots",
                    format!("pilot lengths must lie in [N, T] = [{n}, {t}]"),
                )));
            }
        }
        if let Some(m) = &sc.mode {
            if super::Mode::parse(m).is_none() {
                return Err(inv(IsacError::config("scenario.mode", format!("unknown mode `{m}`"))));
            }
        }
        self.ba.grid().validate().map_err(inv)?;
        if self.ba.channel_samples == 0 {
            return Err(inv(IsacError::config("ba.channel_samples", "must be positive")));
        }
        if let Some(h) = self.ba.fixed_channel {
            if !h.is_finite() {
                return Err(inv(IsacError::config("ba.fixed_channel", "must be finite")));
            }
        }
        Ok(())
    }
}

fn prefix(mut e: ConfigError, section: &str) -> ConfigError {
    if !e.key.contains('.') {
        e.key = format!("{section}.{}", e.key);
    }
    e
}

/// Parses TOML text; unknown keys are rejected.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        kind: ConfigErrorKind::Schema,
        key: schema_key(&e),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn schema_key(e: &toml::de::Error) -> String {
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "config".into()
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        kind: ConfigErrorKind::MissingFile,
        key: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}
