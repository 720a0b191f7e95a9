//! Run configuration and its flat `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! spatial.kernel_half_width = 2
//! spatial.threshold         = 0.1
//! spatial.output_height     = 384
//! spatial.output_width      = 384
//! slice.window_fraction     = 0.5
//! slice.alpha               = 0.7
//! kds.num_samples           = 16
//! kds.grid_size             = 100
//! kds.bandwidth_rule        = scott
//! strategy                  = kds
//! seed                      = 0
//! export_images             = false
//! parallelism               = 1
//! ```
//!
//! Every key is optional; later lines override earlier ones.

use std::fmt::Display;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kds::{KdsConfig, Strategy};
use crate::slice::SliceConfig;
use crate::spatial::SpatialConfig;
use crate::synthetic::SyntheticScanSpec;

/// `(line, key, value)` triples of a key/value document.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: n + 1,
            reason: format!("expected key = value, found {line:?}"),
        })?;
        out.push((n + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` override.
pub fn split_override(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| Error::InvalidConfig(format!("override {s:?} is not key=value")))
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::InvalidConfig(format!("{key}: cannot parse {value:?}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub spatial: SpatialConfig,
    pub slice: SliceConfig,
    pub kds: KdsConfig,
    pub strategy: Strategy,
    pub seed: u64,
    pub export_images: bool,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            spatial: SpatialConfig::default(),
            slice: SliceConfig::default(),
            kds: KdsConfig::default(),
            strategy: Strategy::Kds,
            seed: 0,
            export_images: false,
            parallelism: 1,
        }
    }
}

impl PipelineConfig {
    pub const KEYS: [&'static str; 13] = [
        "spatial.kernel_half_width",
        "spatial.threshold",
        "spatial.output_height",
        "spatial.output_width",
        "slice.window_fraction",
        "slice.alpha",
        "kds.num_samples",
        "kds.grid_size",
        "kds.bandwidth_rule",
        "strategy",
        "seed",
        "export_images",
        "parallelism",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "spatial.kernel_half_width" => self.spatial.kernel_half_width = parse(key, value)?,
            "spatial.threshold" => self.spatial.threshold = parse(key, value)?,
            "spatial.output_height" => self.spatial.output_height = parse(key, value)?,
            "spatial.output_width" => self.spatial.output_width = parse(key, value)?,
            "slice.window_fraction" => self.slice.window_fraction = parse(key, value)?,
            "slice.alpha" => self.slice.alpha = parse(key, value)?,
            "kds.num_samples" => self.kds.num_samples = parse(key, value)?,
            "kds.grid_size" => self.kds.grid_size = parse(key, value)?,
            "kds.bandwidth_rule" => self.kds.bandwidth_rule = value.parse()?,
            "strategy" => self.strategy = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "export_images" => self.export_images = parse(key, value)?,
            "parallelism" => self.parallelism = parse(key, value)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown key {key:?}; known keys: {}",
                    Self::KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    /// Applies a key/value document on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, k, v) in parse_key_values(text)? {
            self.set(&k, &v).map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.spatial.validate()?;
        self.slice.validate()?;
        self.kds.validate()
    }

    /// Renders every key, so the output parses back to the same config.
    pub fn to_text(&self) -> String {
        format!(
            "spatial.kernel_half_width = {}\nspatial.threshold = {}\nspatial.output_height = {}\n\
             spatial.output_width = {}\nslice.window_fraction = {}\nslice.alpha = {}\n\
             kds.num_samples = {}\nkds.grid_size = {}\nkds.bandwidth_rule = scott\nstrategy = {}\n\
             seed = {}\nexport_images = {}\nparallelism = {}\n",
            self.spatial.kernel_half_width,
            self.spatial.threshold,
            self.spatial.output_height,
            self.spatial.output_width,
            self.slice.window_fraction,
            self.slice.alpha,
            self.kds.num_samples,
            self.kds.grid_size,
            self.strategy,
            self.seed,
            self.export_images,
            self.parallelism,
        )
    }
}

/// What `gen-corpus` writes: `num_scans` scans sharing one geometry, each
/// with its own noise seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub num_scans: usize,
    pub scan: SyntheticScanSpec,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            num_scans: 4,
            scan: SyntheticScanSpec::default(),
        }
    }
}

impl CorpusSpec {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = &mut self.scan;
        match key {
            "num_scans" => self.num_scans = parse(key, value)?,
            "num_slices" => s.num_slices = parse(key, value)?,
            "image_size" => s.image_size = parse(key, value)?,
            "body_margin" => s.body_margin = parse(key, value)?,
            "lung_area_peak" => s.lung_area_peak = parse(key, value)?,
            "lung_area_curve" => s.lung_area_curve = parse(key, value)?,
            "noise_amplitude" => s.noise_amplitude = parse(key, value)?,
            "seed" => s.seed = parse(key, value)?,
            "bit_depth" => s.bit_depth = parse(key, value)?,
            "body_intensity" => s.body_intensity = parse(key, value)?,
            "smoothing_radius" => s.smoothing_radius = parse(key, value)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown corpus spec key {key:?}"
                )))
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = Self::default();
        for (line, k, v) in parse_key_values(text)? {
            spec.set(&k, &v).map_err(|e| Error::Parse {
                line,
                reason: e.to_string(),
            })?;
        }
        spec.scan.validate()?;
        Ok(spec)
    }
}
