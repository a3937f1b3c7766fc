//! The `validate` suite: engine cross-checks plus the rate-law invariants, at
//! desk scale. The report contains no timings or paths, so two runs with one
//! seed are byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sfg_core::analytic::{crossover_flux, flux_to_power, rate_ratio, SpectralConfig};
use sfg_core::experiment::{
    cross_validate, log_grid, mode_separation, run_sweep_with, CrossValidation,
    CrossValidationSettings, Engine, SweepMode, SweepSettings,
};
use sfg_core::fock::{
    apply_loss, build_state, oracle_expectation, phase_ensemble_rate, sfg_rate_correlated,
    sfg_rate_uncorrelated, LossChannel, NormalOrderedOperator,
};
use sfg_core::stream::{detect_shard, DetectorModel};

use crate::config::ScenarioConfig;
use crate::{emit, require_seed, write_file, CliError};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn abs(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected,
            tolerance,
            passed: (value - expected).abs() <= tolerance,
        }
    }

    fn rel(name: &str, value: f64, expected: f64, tolerance: f64) -> Self {
        Self {
            passed: ((value - expected) / expected).abs() <= tolerance,
            ..Self::abs(name, value, expected, tolerance)
        }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: bound,
            tolerance: 0.0,
            passed: value >= bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    pub cross_validation: CrossValidation,
    pub passed: bool,
}

fn stream_seeds(seed: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| seed.wrapping_add(i)).collect()
}

pub fn build_report(cfg: &ScenarioConfig, seed: u64) -> Result<ValidationReport, CliError> {
    let setup = cfg.spectral;
    let mut checks = Vec::new();

    let phi = crossover_flux(&setup)?;
    checks.push(Check::rel("crossover_flux", phi, 8.2e12, 0.02));
    checks.push(Check::rel(
        "crossover_power_w",
        flux_to_power(phi, setup.dc_center_wavelength)?,
        1.5e-6,
        0.03,
    ));

    let settings = cfg.sweep_settings();
    let pump = run_sweep_with(
        &setup,
        SweepMode::PumpScaling,
        &log_grid(1e-3, 0.185, 400),
        Engine::Analytic,
        None,
        &[],
        &settings,
    )?;
    checks.push(Check::abs(
        "low_end_slope",
        pump.low_end_slope.unwrap_or(f64::NAN),
        1.0,
        0.01,
    ));
    checks.push(Check::abs(
        "high_end_slope",
        pump.high_end_slope.unwrap_or(f64::NAN),
        1.156,
        0.005,
    ));

    let ts = [0.25, 0.5, 1.0];
    let exact = SweepSettings {
        fock_cutoff: 1,
        ..settings
    };
    for (name, engine, tol, seeds) in [
        ("attenuation_slope_analytic", Engine::Analytic, 1e-6, vec![]),
        ("attenuation_slope_fock", Engine::Fock, 1e-6, vec![]),
        (
            "attenuation_slope_stream",
            Engine::Stream,
            0.05,
            stream_seeds(seed, 10),
        ),
    ] {
        let c = run_sweep_with(
            &setup,
            SweepMode::Attenuation,
            &ts,
            engine,
            None,
            &seeds,
            &exact,
        )?;
        checks.push(Check::abs(
            name,
            c.fitted_slope.unwrap_or(f64::NAN),
            2.0,
            tol,
        ));
    }

    let round = SpectralConfig::new(
        setup.pump_wavelength,
        setup.pump_bandwidth,
        setup.dc_center_wavelength,
        82.0 * setup.uc_bandwidth,
        setup.uc_bandwidth,
    )?;
    checks.push(Check::rel(
        "rate_ratio_at_n_1",
        rate_ratio(&round, 1.0)?.ratio,
        164.0,
        1e-12,
    ));

    let n = 0.05;
    let single = sfg_rate_correlated(&build_state(n, 1, 1, 0.0)?);
    let mut worst_coherent: f64 = 0.0;
    let mut worst_incoherent: f64 = 0.0;
    for pairs in 1..=4usize {
        let s = build_state(n, pairs, 1, 0.0)?;
        let k = pairs as f64;
        worst_coherent = worst_coherent.max((sfg_rate_correlated(&s) / single - k * k).abs());
        let e = phase_ensemble_rate(&s, 10_000, seed)?;
        // Floor the error at rounding level: one pair has no phase freedom.
        let z = (e.mean - k * single).abs() / e.std_error.max(1e-12 * k * single);
        worst_incoherent = worst_incoherent.max(z);
    }
    checks.push(Check::abs(
        "coherent_gain_max_error",
        worst_coherent,
        0.0,
        1e-12,
    ));
    checks.push(Check::abs(
        "phase_randomized_gain_max_sigma",
        worst_incoherent,
        0.0,
        3.0,
    ));

    let per_n: Vec<f64> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&n| Ok(sfg_rate_correlated(&build_state(n, 1, 1, 0.0)?) / n))
        .collect::<Result<_, CliError>>()?;
    let spread = per_n.iter().cloned().fold(f64::MIN, f64::max)
        / per_n.iter().cloned().fold(f64::MAX, f64::min)
        - 1.0;
    checks.push(Check::abs("linear_term_spread", spread, 0.0, 0.015));

    let mut worst_oracle: f64 = 0.0;
    for (pairs, cutoff) in [
        (1, 1),
        (2, 1),
        (3, 1),
        (4, 1),
        (1, 2),
        (2, 2),
        (3, 2),
        (2, 3),
        (1, 6),
    ] {
        let s = build_state(0.1, pairs, cutoff, 0.3)?;
        let o = oracle_expectation(&s, &NormalOrderedOperator::sfg_correlated(pairs))?;
        worst_oracle = worst_oracle.max((o.re - sfg_rate_correlated(&s)).abs());
        if pairs >= 2 {
            let o = oracle_expectation(&s, &NormalOrderedOperator::sfg_uncorrelated(pairs))?;
            worst_oracle = worst_oracle.max((o.re - sfg_rate_uncorrelated(&s)?).abs());
        }
    }
    checks.push(Check::abs("oracle_max_error", worst_oracle, 0.0, 1e-10));

    let s = build_state(0.05, 2, 1, 0.0)?;
    let base = sfg_rate_correlated(&s);
    let mut worst_loss: f64 = 0.0;
    for t in [0.1, 0.5, 0.9] {
        let lossy = apply_loss(&s, LossChannel::new(t)?)?;
        worst_loss = worst_loss.max((sfg_rate_correlated(&lossy) - t * t * base).abs());
    }
    checks.push(Check::abs(
        "loss_t_squared_max_error",
        worst_loss,
        0.0,
        1e-9,
    ));

    let detector = DetectorModel::default();
    let readings = 200;
    let mean = (0..readings)
        .map(|i| Ok(detect_shard(40_000.0, &detector, seed, i)?.rate()))
        .sum::<Result<f64, CliError>>()?
        / readings as f64;
    checks.push(Check::abs("detected_rate_at_40000", mean, 2400.0, 100.0));

    let gap = mode_separation(&setup, &log_grid(1e-3, 0.185, 8), Engine::Analytic, &[])?;
    checks.push(Check::at_least("mode_separation", gap, 0.8));

    let cross = cross_validate(
        &setup,
        &[1e-3, 0.01, 0.05, 0.1, 0.2],
        &CrossValidationSettings {
            seeds: stream_seeds(seed, 6),
            stream_bandwidth: cfg.stream_bandwidth,
            conv_prob: cfg.conv_prob,
            ..CrossValidationSettings::default()
        },
    )?;

    let passed = checks.iter().all(|c| c.passed) && cross.passed();
    Ok(ValidationReport {
        seed,
        checks,
        cross_validation: cross,
        passed,
    })
}

pub fn run(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = require_seed(cfg, "validate")?;
    let report = build_report(cfg, seed)?;
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    if let Some(dir) = &cfg.out_dir {
        write_file(Path::new(dir), "validate.json", &json)?;
    }
    emit(out, &json)?;
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .chain(report.cross_validation.failures.iter().map(String::as_str))
            .collect();
        Err(CliError::ValidationFailed(failed.join("; ")))
    }
}
