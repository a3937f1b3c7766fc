//! Photon-counting detector with dark counts.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result};
use crate::rng::{Stage, Substream};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// End-to-end collection and detection efficiency.
    pub efficiency: f64,
    /// Dark count rate (counts/s).
    pub dark_rate: f64,
    /// Integration time per reading (s).
    pub integration_time: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 0.06,
            dark_rate: 50.0,
            integration_time: 5.0,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        ensure_param(
            self.efficiency > 0.0 && self.efficiency <= 1.0,
            "efficiency",
            self.efficiency,
            "must lie in (0, 1]",
        )?;
        ensure_param(
            self.dark_rate.is_finite() && self.dark_rate >= 0.0,
            "dark_rate",
            self.dark_rate,
            "must be finite and >= 0",
        )?;
        ensure_param(
            self.integration_time.is_finite() && self.integration_time > 0.0,
            "integration_time",
            self.integration_time,
            "must be finite and positive",
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub raw_counts: u64,
    /// `raw − dark_rate·T`; may be negative.
    pub dark_subtracted: f64,
    pub integration_time: f64,
}

impl Detection {
    /// Dark-subtracted count rate (counts/s).
    pub fn rate(&self) -> f64 {
        self.dark_subtracted / self.integration_time
    }
}

/// One integration of an SFG photon rate (photons/s at the detector input).
pub fn detect(sfg_rate: f64, model: &DetectorModel, seed: u64) -> Result<Detection> {
    detect_shard(sfg_rate, model, seed, 0)
}

/// As [`detect`], drawing from shard `shard` of the detection stream so that
/// successive readings under one seed are independent.
pub fn detect_shard(
    sfg_rate: f64,
    model: &DetectorModel,
    seed: u64,
    shard: u64,
) -> Result<Detection> {
    model.validate()?;
    ensure_param(
        sfg_rate.is_finite() && sfg_rate >= 0.0,
        "sfg_rate",
        sfg_rate,
        "must be finite and >= 0",
    )?;
    let mean = (model.efficiency * sfg_rate + model.dark_rate) * model.integration_time;
    let raw_counts = if mean > 0.0 {
        let mut rng = Substream::new(seed, Stage::Detection).shard(shard);
        Poisson::new(mean)
            .expect("positive finite mean")
            .sample(&mut rng) as u64
    } else {
        0
    };
    Ok(Detection {
        raw_counts,
        dark_subtracted: raw_counts as f64 - model.dark_rate * model.integration_time,
        integration_time: model.integration_time,
    })
}
