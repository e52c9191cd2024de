//! Shared configuration: TOML file, then command-line overrides.

use std::path::Path;

use hipmetrics::heatmap::GaussianSpec;
use hipmetrics::{EvalSettings, Thresholds};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Gaussian heatmap width in network pixels.
    pub sigma: f64,
    /// Augmented views written by `encode --views`.
    pub tta_views: usize,
    /// SDR radii in mm.
    pub sdr_radii: Vec<f64>,
    pub alpha_threshold: f64,
    pub lce_threshold: f64,
    /// Train, validation and test shares of patients.
    pub split_ratios: [f64; 3],
    pub seed: u64,
    /// Random partitions searched by `split`.
    pub restarts: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            sigma: 5.0,
            tta_views: 8,
            sdr_radii: vec![2.0, 3.0, 4.0],
            alpha_threshold: 65.0,
            lce_threshold: 40.0,
            split_ratios: [0.65, 0.10, 0.25],
            seed: 0,
            restarts: 1000,
        }
    }
}

/// Values given on the command line; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub sigma: Option<f64>,
    pub tta_views: Option<usize>,
    pub sdr_radii: Option<Vec<f64>>,
    pub alpha_threshold: Option<f64>,
    pub lce_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be a positive number, got {v}")))
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(mut self, o: &Overrides) -> Self {
        if let Some(v) = o.sigma {
            self.sigma = v;
        }
        if let Some(v) = o.tta_views {
            self.tta_views = v;
        }
        if let Some(v) = &o.sdr_radii {
            self.sdr_radii = v.clone();
        }
        if let Some(v) = o.alpha_threshold {
            self.alpha_threshold = v;
        }
        if let Some(v) = o.lce_threshold {
            self.lce_threshold = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.restarts {
            self.restarts = v;
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("sigma", self.sigma)?;
        if self.tta_views == 0 {
            return Err(CliError::Config("tta_views must be at least 1".into()));
        }
        if self.sdr_radii.is_empty() {
            return Err(CliError::Config("sdr_radii must list at least one radius".into()));
        }
        for &r in &self.sdr_radii {
            positive("sdr radius", r)?;
        }
        for (name, v) in [
            ("alpha_threshold", self.alpha_threshold),
            ("lce_threshold", self.lce_threshold),
        ] {
            positive(name, v)?;
            if v >= 180.0 {
                return Err(CliError::Config(format!("{name} must be below 180 degrees, got {v}")));
            }
        }
        for &r in &self.split_ratios {
            positive("split ratio", r)?;
        }
        let sum: f64 = self.split_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(CliError::Config(format!("split_ratios must sum to 1, got {sum}")));
        }
        if self.restarts == 0 {
            return Err(CliError::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }

    pub fn gaussian(&self) -> GaussianSpec {
        GaussianSpec::new(self.sigma).expect("validated sigma")
    }

    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            alpha_deg: self.alpha_threshold,
            lce_deg: self.lce_threshold,
        }
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            thresholds: self.thresholds(),
            sdr_radii_mm: self.sdr_radii.clone(),
        }
    }
}
