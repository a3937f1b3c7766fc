//! Agreement between the analytic, Fock-space and stream engines.
//!
//! Each engine's rates are normalized to its own value at the smallest `n`,
//! which removes every engine-specific prefactor. What remains is the shape
//! of the `n` dependence.
//!
//! The Fock engine's single-pair state is a two-mode squeezed vacuum, whose
//! correlated moment is `n + 2n²` rather than the analytic `n + n²`. The
//! quadratic coefficient is measured from the Fock rates and reported; the
//! Fock comparison is made against the analytic law carrying that coefficient.

use serde::{Deserialize, Serialize};

use super::stream_config;
use crate::analytic::{rate_ratio, OperatingPoint, SpectralConfig};
use crate::error::{Result, SimError};
use crate::fock::{build_state, sfg_rate_correlated, sfg_rate_uncorrelated};
use crate::stream::{count_sfg, generate_stream, SfgCounts};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationSettings {
    pub seeds: Vec<u64>,
    pub stream_pairs: f64,
    pub stream_bandwidth: f64,
    pub conv_prob: f64,
    pub fock_cutoff: usize,
    /// Allowed relative deviation of normalized Fock rates.
    pub fock_tolerance: f64,
    /// Allowed stream deviation in standard errors.
    pub stream_sigmas: f64,
}

impl Default for CrossValidationSettings {
    fn default() -> Self {
        Self {
            seeds: (1..=8).collect(),
            stream_pairs: 2e5,
            stream_bandwidth: 1e6,
            conv_prob: 0.5,
            fock_cutoff: 6,
            fock_tolerance: 0.02,
            stream_sigmas: 3.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationRow {
    pub n: f64,
    pub analytic_correlated: f64,
    pub analytic_uncorrelated: f64,
    pub fock_correlated: f64,
    pub fock_uncorrelated: f64,
    /// Capture-corrected correlated counts/s, mean over seeds.
    pub stream_correlated: f64,
    pub stream_correlated_std_error: f64,
    /// Expected accidental counts/s, mean over seeds.
    pub stream_accidental: f64,
    pub stream_accidental_std_error: f64,
    /// Normalized Fock rate over normalized analytic rate, minus one.
    pub fock_correlated_deviation: f64,
    pub fock_uncorrelated_deviation: f64,
    /// Normalized stream deviation in standard errors.
    pub stream_correlated_z: f64,
    pub stream_accidental_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub n: f64,
    pub measured: f64,
    pub std_error: f64,
    pub expected: f64,
    pub z: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub rows: Vec<CrossValidationRow>,
    /// `b/a` in a least-squares fit `a·n + b·n²` to the Fock correlated rate.
    pub fock_quadratic_coefficient: f64,
    pub ratio_check: Option<RatioCheck>,
    pub failures: Vec<String>,
}

impl CrossValidation {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Default)]
struct StreamTotals {
    correlated: Vec<f64>,
    accidental: Vec<f64>,
    raw: SfgCounts,
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, mean.abs().sqrt());
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// `b/a` from least squares on `r_i/n_i = a + b·n_i`.
fn quadratic_coefficient(ns: &[f64], rates: &[f64]) -> f64 {
    let y: Vec<f64> = ns.iter().zip(rates).map(|(n, r)| r / n).collect();
    let k = ns.len() as f64;
    let mx = ns.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = ns.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = ns.iter().zip(&y).map(|(x, v)| (x - mx) * (v - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    b / a
}

fn z_score(measured_ratio: f64, measured_err: f64, expected_ratio: f64) -> f64 {
    if measured_err > 0.0 {
        (measured_ratio - expected_ratio) / measured_err
    } else if measured_ratio == expected_ratio {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Error of `a/b` from independent errors on `a` and `b`.
fn ratio_error(a: f64, ea: f64, b: f64, eb: f64) -> f64 {
    (a / b) * ((ea / a).powi(2) + (eb / b).powi(2)).sqrt()
}

pub fn cross_validate(
    config: &SpectralConfig,
    n_values: &[f64],
    settings: &CrossValidationSettings,
) -> Result<CrossValidation> {
    config.validate()?;
    if n_values.len() < 3 {
        return Err(SimError::InvalidConfig(
            "cross-validation needs at least 3 values of n".into(),
        ));
    }
    if n_values.iter().any(|&n| !(n > 0.0 && n <= 0.3)) {
        return Err(SimError::InvalidConfig(
            "cross-validation values of n must lie in (0, 0.3]".into(),
        ));
    }
    if settings.seeds.len() < 2 {
        return Err(SimError::InvalidConfig(
            "cross-validation needs at least 2 seeds".into(),
        ));
    }
    let mut ns = n_values.to_vec();
    ns.sort_by(f64::total_cmp);
    ns.dedup();

    let sc = stream_config(
        config,
        &super::SweepSettings {
            stream_bandwidth: settings.stream_bandwidth,
            ..Default::default()
        },
    )?;

    let mut fock_c = Vec::with_capacity(ns.len());
    let mut fock_u = Vec::with_capacity(ns.len());
    let mut streams = Vec::with_capacity(ns.len());
    for &n in &ns {
        fock_c.push(sfg_rate_correlated(&build_state(
            n,
            1,
            settings.fock_cutoff,
            0.0,
        )?));
        fock_u.push(sfg_rate_uncorrelated(&build_state(
            n,
            2,
            settings.fock_cutoff,
            0.0,
        )?)?);

        let op = OperatingPoint::new(&sc, n)?;
        let duration = settings.stream_pairs / op.pair_rate();
        let mut totals = StreamTotals::default();
        for &seed in &settings.seeds {
            let stream = generate_stream(&sc, &op, duration, seed)?;
            let counts = count_sfg(&stream, &sc, settings.conv_prob)?;
            totals
                .correlated
                .push(counts.corrected_correlated() / duration);
            totals
                .accidental
                .push(counts.accidental_expected / duration);
            totals.raw.correlated += counts.correlated;
            totals.raw.accidental += counts.accidental;
            totals.raw.capture_efficiency = counts.capture_efficiency;
        }
        streams.push(totals);
    }

    let coefficient = quadratic_coefficient(&ns, &fock_c);
    let n0 = ns[0];
    let analytic_c = |n: f64| n + n * n;
    let analytic_u = |n: f64| n * n;
    let corrected_c = |n: f64| n + coefficient * n * n;

    let (s0c, e0c) = mean_and_error(&streams[0].correlated);
    let (s0u, e0u) = mean_and_error(&streams[0].accidental);

    let mut rows = Vec::with_capacity(ns.len());
    let mut failures = Vec::new();
    for (i, &n) in ns.iter().enumerate() {
        let (sc_mean, sc_err) = mean_and_error(&streams[i].correlated);
        let (su_mean, su_err) = mean_and_error(&streams[i].accidental);

        let fock_correlated_deviation =
            (fock_c[i] / fock_c[0]) / (corrected_c(n) / corrected_c(n0)) - 1.0;
        let fock_uncorrelated_deviation =
            (fock_u[i] / fock_u[0]) / (analytic_u(n) / analytic_u(n0)) - 1.0;

        let (stream_correlated_z, stream_accidental_z) = if i == 0 {
            (0.0, 0.0)
        } else {
            let rc = sc_mean / s0c;
            let ru = su_mean / s0u;
            (
                z_score(
                    rc,
                    ratio_error(sc_mean, sc_err, s0c, e0c),
                    analytic_c(n) / analytic_c(n0),
                ),
                z_score(
                    ru,
                    ratio_error(su_mean, su_err, s0u, e0u),
                    analytic_u(n) / analytic_u(n0),
                ),
            )
        };

        if fock_correlated_deviation.abs() > settings.fock_tolerance {
            failures.push(format!(
                "n={n}: fock correlated deviates by {:.3}%",
                100.0 * fock_correlated_deviation
            ));
        }
        if fock_uncorrelated_deviation.abs() > settings.fock_tolerance {
            failures.push(format!(
                "n={n}: fock uncorrelated deviates by {:.3}%",
                100.0 * fock_uncorrelated_deviation
            ));
        }
        if stream_correlated_z.abs() > settings.stream_sigmas {
            failures.push(format!(
                "n={n}: stream correlated off by {stream_correlated_z:.2} sigma"
            ));
        }
        if stream_accidental_z.abs() > settings.stream_sigmas {
            failures.push(format!(
                "n={n}: stream accidental off by {stream_accidental_z:.2} sigma"
            ));
        }

        rows.push(CrossValidationRow {
            n,
            analytic_correlated: analytic_c(n) * config.dc_bandwidth,
            analytic_uncorrelated: analytic_u(n) * config.uc_bandwidth,
            fock_correlated: fock_c[i],
            fock_uncorrelated: fock_u[i],
            stream_correlated: sc_mean,
            stream_correlated_std_error: sc_err,
            stream_accidental: su_mean,
            stream_accidental_std_error: su_err,
            fock_correlated_deviation,
            fock_uncorrelated_deviation,
            stream_correlated_z,
            stream_accidental_z,
        });
    }

    let ratio_check = ns
        .iter()
        .position(|&n| (n - 0.1).abs() < 1e-12)
        .map(|i| -> Result<RatioCheck> {
            let raw = &streams[i].raw;
            let corrected = raw.correlated as f64 / raw.capture_efficiency;
            let accidental = raw.accidental as f64;
            let measured = corrected / accidental;
            let std_error = measured * (1.0 / raw.correlated as f64 + 1.0 / accidental).sqrt();
            let expected = rate_ratio(&sc, ns[i])?.ratio;
            let z = z_score(measured, std_error, expected);
            Ok(RatioCheck {
                n: ns[i],
                measured,
                std_error,
                expected,
                z,
                passed: z.abs() <= settings.stream_sigmas,
            })
        })
        .transpose()?;
    if let Some(r) = &ratio_check {
        if !r.passed {
            failures.push(format!(
                "correlated/accidental ratio {:.1} vs expected {:.1} ({:.2} sigma)",
                r.measured, r.expected, r.z
            ));
        }
    }

    Ok(CrossValidation {
        rows,
        fock_quadratic_coefficient: coefficient,
        ratio_check,
        failures,
    })
}
