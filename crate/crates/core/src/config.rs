//! JSON run configuration shared by the CLI commands.
//!
//! ```json
//! {
//!   "window": 100,
//!   "theta": 0.15,
//!   "prior_weight": 2.0,
//!   "discount_prev": 0.999,
//!   "discount_new": [0.999, 0.99],
//!   "base_rates": [[0.9, 0.1], [0.5, 0.5]],
//!   "delay": { "margin_ms": 3.0, "harq_offset_ms": 7.0,
//!              "average_window": 500, "warmup_inliers": 50 }
//! }
//! ```
//!
//! Every key is optional. Discounts are either one value for all rows or one
//! value per row. Command-line flags override file values, which override
//! built-in defaults.

use std::path::Path;

use serde::Deserialize;

use crate::delay::ThresholdConfig;
use crate::error::{Error, Result};
use crate::ident::IdentifierConfig;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Discount {
    Uniform(f64),
    PerRow(Vec<f64>),
}

impl Discount {
    fn expand(&self, num_states: usize) -> Vec<f64> {
        match self {
            Discount::Uniform(d) => vec![*d; num_states],
            Discount::PerRow(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub window: Option<usize>,
    pub theta: Option<f64>,
    pub prior_weight: Option<f64>,
    pub discount_prev: Option<Discount>,
    pub discount_new: Option<Discount>,
    pub base_rates: Option<Vec<Vec<f64>>>,
    pub delay: Option<ThresholdConfig>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        RunConfig::from_json(&std::fs::read_to_string(path)?)
    }

    /// Overlays `flags` on top of `self`; set fields in `flags` win.
    pub fn merged(mut self, flags: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if flags.$f.is_some() { self.$f = flags.$f; } )* };
        }
        take!(
            window,
            theta,
            prior_weight,
            discount_prev,
            discount_new,
            base_rates,
            delay
        );
        self
    }

    pub fn identifier_config(&self, num_states: usize) -> Result<IdentifierConfig> {
        let mut cfg = IdentifierConfig::new(num_states);
        if let Some(w) = self.window {
            cfg.window_len = w;
        }
        if let Some(t) = self.theta {
            cfg.conflict_threshold = t;
        }
        if let Some(w) = self.prior_weight {
            cfg.prior_weight = w;
        }
        if let Some(d) = &self.discount_prev {
            cfg.discount_prev = d.expand(num_states);
        }
        if let Some(d) = &self.discount_new {
            cfg.discount_new = d.expand(num_states);
        }
        if let Some(a) = &self.base_rates {
            cfg.base_rates = a.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn threshold_config(&self) -> Result<ThresholdConfig> {
        let cfg = self.delay.unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }
}
