//! Run configuration.
//!
//! Precedence, lowest first: built-in defaults, the config file (given
//! explicitly or through `ROADCHAR_CONFIG`), then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::characterize::{
    CharacterizeParams, RpdMode, DEFAULT_BAND_RADIUS, DEFAULT_DEPTH_RANGE_MM,
    DEFAULT_MIN_VALID_FRACTION,
};
use crate::io::{self, IoError};
use crate::metrics::{DEFAULT_CONF_THRESHOLD, DEFAULT_IOU_THRESHOLD};
use crate::raster::Connectivity;

pub const CONFIG_ENV_VAR: &str = "ROADCHAR_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub band_radius: usize,
    pub rpd_mode: RpdMode,
    pub depth_range_mm: f64,
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub connectivity: u8,
    pub min_valid_fraction: f64,
    pub zero_fraction_threshold: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            band_radius: DEFAULT_BAND_RADIUS,
            rpd_mode: RpdMode::Difference,
            depth_range_mm: DEFAULT_DEPTH_RANGE_MM,
            conf_threshold: DEFAULT_CONF_THRESHOLD,
            iou_threshold: DEFAULT_IOU_THRESHOLD,
            connectivity: 8,
            min_valid_fraction: DEFAULT_MIN_VALID_FRACTION,
            zero_fraction_threshold: 1.0,
            seed: 0,
        }
    }
}

/// Values supplied on the command line; `None` leaves the lower layer alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub band_radius: Option<usize>,
    pub rpd_mode: Option<RpdMode>,
    pub depth_range_mm: Option<f64>,
    pub conf_threshold: Option<f64>,
    pub iou_threshold: Option<f64>,
    pub connectivity: Option<u8>,
    pub min_valid_fraction: Option<f64>,
    pub zero_fraction_threshold: Option<f64>,
    pub seed: Option<u64>,
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

fn unit(key: &'static str, v: f64, allow_zero: bool) -> Result<(), ConfigError> {
    let ok = if allow_zero {
        (0.0..=1.0).contains(&v)
    } else {
        v > 0.0 && v <= 1.0
    };
    if ok {
        Ok(())
    } else {
        let range = if allow_zero { "[0, 1]" } else { "(0, 1]" };
        Err(invalid(key, format!("{v} is outside {range}")))
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&io::read_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=1000).contains(&self.band_radius) {
            return Err(invalid(
                "band_radius",
                format!("{} is outside 1..=1000", self.band_radius),
            ));
        }
        if !(self.depth_range_mm > 0.0 && self.depth_range_mm <= u16::MAX as f64) {
            return Err(invalid(
                "depth_range_mm",
                format!("{} is outside (0, 65535]", self.depth_range_mm),
            ));
        }
        unit("conf_threshold", self.conf_threshold, true)?;
        unit("iou_threshold", self.iou_threshold, false)?;
        unit("min_valid_fraction", self.min_valid_fraction, true)?;
        unit(
            "zero_fraction_threshold",
            self.zero_fraction_threshold,
            false,
        )?;
        if Connectivity::from_count(self.connectivity).is_none() {
            return Err(invalid(
                "connectivity",
                format!("{} is not 4 or 8", self.connectivity),
            ));
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = v; })*
            };
        }
        take!(
            band_radius,
            rpd_mode,
            depth_range_mm,
            conf_threshold,
            iou_threshold,
            connectivity,
            min_valid_fraction,
            zero_fraction_threshold,
            seed
        );
    }

    /// Defaults, then the file at `explicit` or `env_path`, then `overrides`.
    pub fn resolve(
        explicit: Option<&Path>,
        env_path: Option<&Path>,
        overrides: &ConfigOverrides,
    ) -> Result<Self, ConfigError> {
        let mut config = match explicit.or(env_path) {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn connectivity(&self) -> Connectivity {
        Connectivity::from_count(self.connectivity).expect("validated")
    }

    pub fn characterize_params(&self) -> CharacterizeParams {
        CharacterizeParams {
            band_radius: self.band_radius,
            min_valid_fraction: self.min_valid_fraction,
            rpd_mode: self.rpd_mode,
        }
    }
}
