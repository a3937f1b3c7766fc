//! Scenario files.
//!
//! One `key = value` per line, `#` starts a comment, keys are dotted
//! `section.name`. Lists are comma separated. Unknown or repeated keys are
//! errors that carry the line number. Omitted keys keep their defaults.
//!
//! ```text
//! spectral.dc_width_nm = 31
//! rates.n = 0, 1e-3, 0.1, 1
//! run.engine = stream
//! run.seed = 42
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use sfg_core::analytic::{bandwidth_nm_to_hz, FitWeighting, SpectralConfig};
use sfg_core::experiment::{log_grid, Engine, SweepMode, SweepSettings};
use sfg_core::stream::DetectorModel;

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    /// 1-based line, or 0 when the problem is not tied to one line.
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub spectral: SpectralConfig,
    pub rates_n: Vec<f64>,
    pub alpha: f64,
    pub sweep_n_min: f64,
    pub sweep_n_max: f64,
    pub sweep_points: usize,
    pub sweep_t: Vec<f64>,
    pub fit_weighting: Option<FitWeighting>,
    pub attenuation_n: f64,
    pub detector_enabled: bool,
    pub detector: DetectorModel,
    pub fock_n: f64,
    pub fock_pairs: usize,
    pub fock_cutoff: usize,
    pub stream_n: f64,
    pub stream_bandwidth: f64,
    pub stream_pairs: f64,
    pub stream_duration: f64,
    pub conv_prob: f64,
    pub engine: Engine,
    pub mode: SweepMode,
    pub seed: Option<u64>,
    pub seed_count: usize,
    pub out_dir: Option<String>,
    pub format: OutputFormat,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sweep = SweepSettings::default();
        Self {
            spectral: SpectralConfig::reference_setup(),
            rates_n: vec![0.0, 1e-3, 0.01, 0.1, 0.185, 1.0],
            alpha: sweep.alpha,
            sweep_n_min: 1e-3,
            sweep_n_max: 0.185,
            sweep_points: 25,
            sweep_t: vec![0.25, 0.5, 0.75, 1.0],
            fit_weighting: None,
            attenuation_n: sweep.attenuation_n,
            detector_enabled: false,
            detector: DetectorModel::default(),
            fock_n: 0.05,
            fock_pairs: sweep.fock_pairs,
            fock_cutoff: sweep.fock_cutoff,
            stream_n: 0.1,
            stream_bandwidth: sweep.stream_bandwidth,
            stream_pairs: sweep.stream_pairs,
            stream_duration: 1.0,
            conv_prob: sweep.conv_prob,
            engine: Engine::Analytic,
            mode: SweepMode::PumpScaling,
            seed: None,
            seed_count: 10,
            out_dir: None,
            format: OutputFormat::Table,
        }
    }
}

fn parse_value<T: FromStr>(raw: &str, what: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("cannot read `{raw}` as {what}"))
}

fn parse_list(raw: &str) -> Result<Vec<f64>, String> {
    raw.split(',')
        .map(|s| parse_value::<f64>(s.trim(), "a number"))
        .collect()
}

fn parse_bool(raw: &str) -> Result<bool, String> {
    match raw {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("cannot read `{raw}` as a boolean")),
    }
}

pub fn parse_engine(raw: &str) -> Result<Engine, String> {
    match raw {
        "analytic" => Ok(Engine::Analytic),
        "fock" => Ok(Engine::Fock),
        "stream" => Ok(Engine::Stream),
        _ => Err(format!("unknown engine `{raw}` (analytic, fock, stream)")),
    }
}

pub fn parse_mode(raw: &str) -> Result<SweepMode, String> {
    match raw {
        "pump" => Ok(SweepMode::PumpScaling),
        "atten" => Ok(SweepMode::Attenuation),
        _ => Err(format!("unknown mode `{raw}` (pump, atten)")),
    }
}

pub fn mode_name(mode: SweepMode) -> &'static str {
    match mode {
        SweepMode::PumpScaling => "pump",
        SweepMode::Attenuation => "atten",
    }
}

fn parse_fit(raw: &str) -> Result<Option<FitWeighting>, String> {
    match raw {
        "auto" => Ok(None),
        "unweighted" => Ok(Some(FitWeighting::Unweighted)),
        "poisson" => Ok(Some(FitWeighting::Poisson)),
        _ => Err(format!("unknown fit `{raw}` (auto, unweighted, poisson)")),
    }
}

fn fit_name(fit: Option<FitWeighting>) -> &'static str {
    match fit {
        None => "auto",
        Some(FitWeighting::Unweighted) => "unweighted",
        Some(FitWeighting::Poisson) => "poisson",
    }
}

fn parse_format(raw: &str) -> Result<OutputFormat, String> {
    match raw {
        "table" => Ok(OutputFormat::Table),
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        _ => Err(format!("unknown format `{raw}` (table, csv, json)")),
    }
}

fn format_name(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Table => "table",
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        let mut dc_width_nm: Option<(usize, f64)> = None;
        let mut dc_hz_line = None;

        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| ConfigError {
                line: line_no,
                message,
            };
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("`{key}` is set twice")));
            }
            seen.push(key.to_string());

            let s = &mut cfg.spectral;
            let result: Result<(), String> = match key {
                "spectral.pump_wavelength_m" => {
                    parse_value(value, "a number").map(|v| s.pump_wavelength = v)
                }
                "spectral.pump_bandwidth_hz" => {
                    parse_value(value, "a number").map(|v| s.pump_bandwidth = v)
                }
                "spectral.dc_center_wavelength_m" => {
                    parse_value(value, "a number").map(|v| s.dc_center_wavelength = v)
                }
                "spectral.dc_bandwidth_hz" => parse_value(value, "a number").map(|v| {
                    s.dc_bandwidth = v;
                    dc_hz_line = Some(line_no);
                }),
                "spectral.dc_width_nm" => {
                    parse_value(value, "a number").map(|v| dc_width_nm = Some((line_no, v)))
                }
                "spectral.uc_bandwidth_hz" => {
                    parse_value(value, "a number").map(|v| s.uc_bandwidth = v)
                }
                "rates.n" => parse_list(value).map(|v| cfg.rates_n = v),
                "rates.alpha" => parse_value(value, "a number").map(|v| cfg.alpha = v),
                "sweep.n_min" => parse_value(value, "a number").map(|v| cfg.sweep_n_min = v),
                "sweep.n_max" => parse_value(value, "a number").map(|v| cfg.sweep_n_max = v),
                "sweep.points" => parse_value(value, "an integer").map(|v| cfg.sweep_points = v),
                "sweep.t" => parse_list(value).map(|v| cfg.sweep_t = v),
                "sweep.fit" => parse_fit(value).map(|v| cfg.fit_weighting = v),
                "sweep.attenuation_n" => {
                    parse_value(value, "a number").map(|v| cfg.attenuation_n = v)
                }
                "detector.enabled" => parse_bool(value).map(|v| cfg.detector_enabled = v),
                "detector.efficiency" => {
                    parse_value(value, "a number").map(|v| cfg.detector.efficiency = v)
                }
                "detector.dark_rate" => {
                    parse_value(value, "a number").map(|v| cfg.detector.dark_rate = v)
                }
                "detector.integration_time_s" => {
                    parse_value(value, "a number").map(|v| cfg.detector.integration_time = v)
                }
                "fock.n" => parse_value(value, "a number").map(|v| cfg.fock_n = v),
                "fock.pairs" => parse_value(value, "an integer").map(|v| cfg.fock_pairs = v),
                "fock.cutoff" => parse_value(value, "an integer").map(|v| cfg.fock_cutoff = v),
                "stream.n" => parse_value(value, "a number").map(|v| cfg.stream_n = v),
                "stream.bandwidth_hz" => {
                    parse_value(value, "a number").map(|v| cfg.stream_bandwidth = v)
                }
                "stream.pairs" => parse_value(value, "a number").map(|v| cfg.stream_pairs = v),
                "stream.duration_s" => {
                    parse_value(value, "a number").map(|v| cfg.stream_duration = v)
                }
                "stream.conv_prob" => parse_value(value, "a number").map(|v| cfg.conv_prob = v),
                "run.engine" => parse_engine(value).map(|v| cfg.engine = v),
                "run.mode" => parse_mode(value).map(|v| cfg.mode = v),
                "run.seed" => parse_value(value, "an unsigned integer").map(|v| cfg.seed = Some(v)),
                "run.seeds" => parse_value(value, "an integer").map(|v| cfg.seed_count = v),
                "output.dir" => {
                    cfg.out_dir = Some(value.to_string());
                    Ok(())
                }
                "output.format" => parse_format(value).map(|v| cfg.format = v),
                _ => Err(format!("unknown key `{key}`")),
            };
            result.map_err(err)?;
        }

        if let Some((line, nm)) = dc_width_nm {
            if let Some(other) = dc_hz_line {
                return Err(ConfigError {
                    line: line.max(other),
                    message:
                        "set either spectral.dc_width_nm or spectral.dc_bandwidth_hz, not both"
                            .into(),
                });
            }
            cfg.spectral.dc_bandwidth =
                bandwidth_nm_to_hz(cfg.spectral.dc_center_wavelength, nm * 1e-9).map_err(|e| {
                    ConfigError {
                        line,
                        message: e.to_string(),
                    }
                })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |message: String| Err(ConfigError { line: 0, message });
        if let Err(e) = self.spectral.validate() {
            return fail(e.to_string());
        }
        if self.rates_n.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return fail("rates.n values must be finite and >= 0".into());
        }
        if !(self.sweep_n_min > 0.0
            && self.sweep_n_max > self.sweep_n_min
            && self.sweep_n_max.is_finite())
        {
            return fail("need 0 < sweep.n_min < sweep.n_max".into());
        }
        if self.sweep_points < 3 {
            return fail("sweep.points must be at least 3".into());
        }
        if self.sweep_t.len() < 3 || self.sweep_t.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return fail("sweep.t needs at least 3 values in (0, 1]".into());
        }
        if self.seed_count == 0 {
            return fail("run.seeds must be at least 1".into());
        }
        if self.fock_pairs == 0 || self.fock_cutoff == 0 {
            return fail("fock.pairs and fock.cutoff must be at least 1".into());
        }
        if let Err(e) = self.detector.validate() {
            return fail(e.to_string());
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` reproduces the config.
    pub fn to_text(&self) -> String {
        let s = &self.spectral;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("spectral.pump_wavelength_m", s.pump_wavelength.to_string());
        line("spectral.pump_bandwidth_hz", s.pump_bandwidth.to_string());
        line(
            "spectral.dc_center_wavelength_m",
            s.dc_center_wavelength.to_string(),
        );
        line("spectral.dc_bandwidth_hz", s.dc_bandwidth.to_string());
        line("spectral.uc_bandwidth_hz", s.uc_bandwidth.to_string());
        line("rates.n", join(&self.rates_n));
        line("rates.alpha", self.alpha.to_string());
        line("sweep.n_min", self.sweep_n_min.to_string());
        line("sweep.n_max", self.sweep_n_max.to_string());
        line("sweep.points", self.sweep_points.to_string());
        line("sweep.t", join(&self.sweep_t));
        line("sweep.fit", fit_name(self.fit_weighting).to_string());
        line("sweep.attenuation_n", self.attenuation_n.to_string());
        line("detector.enabled", self.detector_enabled.to_string());
        line("detector.efficiency", self.detector.efficiency.to_string());
        line("detector.dark_rate", self.detector.dark_rate.to_string());
        line(
            "detector.integration_time_s",
            self.detector.integration_time.to_string(),
        );
        line("fock.n", self.fock_n.to_string());
        line("fock.pairs", self.fock_pairs.to_string());
        line("fock.cutoff", self.fock_cutoff.to_string());
        line("stream.n", self.stream_n.to_string());
        line("stream.bandwidth_hz", self.stream_bandwidth.to_string());
        line("stream.pairs", self.stream_pairs.to_string());
        line("stream.duration_s", self.stream_duration.to_string());
        line("stream.conv_prob", self.conv_prob.to_string());
        line("run.engine", self.engine.as_str().to_string());
        line("run.mode", mode_name(self.mode).to_string());
        if let Some(seed) = self.seed {
            line("run.seed", seed.to_string());
        }
        line("run.seeds", self.seed_count.to_string());
        if let Some(dir) = &self.out_dir {
            line("output.dir", dir.clone());
        }
        line("output.format", format_name(self.format).to_string());
        out
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            alpha: self.alpha,
            fock_pairs: self.fock_pairs,
            fock_cutoff: self.fock_cutoff,
            attenuation_n: self.attenuation_n,
            conv_prob: self.conv_prob,
            stream_pairs: self.stream_pairs,
            stream_bandwidth: self.stream_bandwidth,
            fit_weighting: self.fit_weighting,
        }
    }

    pub fn sweep_drives(&self) -> Vec<f64> {
        match self.mode {
            SweepMode::PumpScaling => {
                log_grid(self.sweep_n_min, self.sweep_n_max, self.sweep_points)
            }
            SweepMode::Attenuation => self.sweep_t.clone(),
        }
    }

    /// `seed, seed + 1, …` for `run.seeds` values.
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.seed_count as u64)
            .map(|i| base.wrapping_add(i))
            .collect()
    }
}
