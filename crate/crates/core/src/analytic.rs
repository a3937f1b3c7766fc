//! Closed-form SFG rate laws for broadband down-converted light.
//!
//! Everything here is written in frequency space. With `n` the mean spectral
//! photon density, `Δ` the down-converted bandwidth, `δ_uc` the up-conversion
//! acceptance bandwidth and `δ_p` the pump linewidth:
//!
//! - correlated SFG rate: `α·Δ·(n² + n)`
//! - uncorrelated SFG rate: `α·δ_uc·n²`
//! - their ratio: `(Δ/δ_uc)·(n+1)/n`, bounded by `(Δ/δ_p)·(n+1)/n`
//!
//! A single dimensionless `α` multiplies both rates so the ratio carries no
//! free constant. The classical spread-spectrum reference is the same model
//! without the linear term.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result, SimError};
use crate::experiment::{SweepCurve, SweepPoint};

/// Vacuum speed of light (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant (J·s).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Bandwidths and wavelengths of the optical system. Bandwidths in Hz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub pump_wavelength: f64,
    pub pump_bandwidth: f64,
    pub dc_center_wavelength: f64,
    pub dc_bandwidth: f64,
    pub uc_bandwidth: f64,
}

impl SpectralConfig {
    pub fn new(
        pump_wavelength: f64,
        pump_bandwidth: f64,
        dc_center_wavelength: f64,
        dc_bandwidth: f64,
        uc_bandwidth: f64,
    ) -> Result<Self> {
        let config = Self {
            pump_wavelength,
            pump_bandwidth,
            dc_center_wavelength,
            dc_bandwidth,
            uc_bandwidth,
        };
        config.validate()?;
        Ok(config)
    }

    /// Same as [`SpectralConfig::new`] but with the down-converted width given
    /// in nanometres around `dc_center_wavelength`.
    pub fn with_dc_width_nm(
        pump_wavelength: f64,
        pump_bandwidth: f64,
        dc_center_wavelength: f64,
        dc_width_nm: f64,
        uc_bandwidth: f64,
    ) -> Result<Self> {
        let dc_bandwidth = bandwidth_nm_to_hz(dc_center_wavelength, dc_width_nm * 1e-9)?;
        Self::new(
            pump_wavelength,
            pump_bandwidth,
            dc_center_wavelength,
            dc_bandwidth,
            uc_bandwidth,
        )
    }

    /// 5 MHz single-frequency pump at 532 nm, 31 nm of down-converted light
    /// around 1064 nm, 100 GHz up-conversion acceptance.
    pub fn reference_setup() -> Self {
        Self::with_dc_width_nm(532e-9, 5e6, 1064e-9, 31.0, 1e11)
            .expect("built-in configuration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("pump_wavelength", self.pump_wavelength),
            ("pump_bandwidth", self.pump_bandwidth),
            ("dc_center_wavelength", self.dc_center_wavelength),
            ("dc_bandwidth", self.dc_bandwidth),
            ("uc_bandwidth", self.uc_bandwidth),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(SimError::InvalidConfig(format!(
                    "{name} must be finite and strictly positive, got {value}"
                )));
            }
        }
        if self.uc_bandwidth < self.pump_bandwidth {
            return Err(SimError::InvalidConfig(format!(
                "uc_bandwidth ({}) must be >= pump_bandwidth ({})",
                self.uc_bandwidth, self.pump_bandwidth
            )));
        }
        if self.dc_bandwidth < self.uc_bandwidth {
            return Err(SimError::InvalidConfig(format!(
                "dc_bandwidth ({}) must be >= uc_bandwidth ({})",
                self.dc_bandwidth, self.uc_bandwidth
            )));
        }
        Ok(())
    }

    /// Number of entangled mode pairs, `Δ/δ_p`.
    pub fn mode_pairs(&self) -> f64 {
        self.dc_bandwidth / self.pump_bandwidth
    }

    /// `Δ/δ_uc`, the gain of the correlated process over the uncorrelated one
    /// in the classical limit.
    pub fn bandwidth_gain(&self) -> f64 {
        self.dc_bandwidth / self.uc_bandwidth
    }

    /// Rescales every bandwidth so that `dc_bandwidth` becomes the given
    /// value. All bandwidth ratios are preserved.
    pub fn scaled_to(&self, dc_bandwidth: f64) -> Result<Self> {
        ensure_param(
            dc_bandwidth.is_finite() && dc_bandwidth > 0.0,
            "dc_bandwidth",
            dc_bandwidth,
            "must be finite and positive",
        )?;
        let s = dc_bandwidth / self.dc_bandwidth;
        Self::new(
            self.pump_wavelength,
            self.pump_bandwidth * s,
            self.dc_center_wavelength,
            dc_bandwidth,
            self.uc_bandwidth * s,
        )
    }
}

/// Drive level of the down-converter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// Mean spectral photon density (photons per spectral mode).
    pub n: f64,
    /// Total down-converted photon flux, `n·Δ` (photons/s, signal + idler).
    pub flux: f64,
}

impl OperatingPoint {
    pub fn new(config: &SpectralConfig, n: f64) -> Result<Self> {
        ensure_param(n.is_finite() && n >= 0.0, "n", n, "must be finite and >= 0")?;
        Ok(Self {
            n,
            flux: n * config.dc_bandwidth,
        })
    }

    pub fn from_flux(config: &SpectralConfig, flux: f64) -> Result<Self> {
        ensure_param(
            flux.is_finite() && flux >= 0.0,
            "flux",
            flux,
            "must be finite and >= 0",
        )?;
        Self::new(config, flux / config.dc_bandwidth)
    }

    /// Operating point for a measured down-converted optical power (W).
    pub fn from_power(config: &SpectralConfig, power: f64) -> Result<Self> {
        let flux = power_to_flux(power, config.dc_center_wavelength)?;
        Self::from_flux(config, flux)
    }

    /// Pair creation rate. Each pair contributes two photons to `flux`.
    pub fn pair_rate(&self) -> f64 {
        self.flux / 2.0
    }
}

/// Predicted correlated and uncorrelated SFG rates at one operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePrediction {
    pub correlated: f64,
    pub uncorrelated: f64,
    pub alpha: f64,
}

impl RatePrediction {
    pub fn compute(config: &SpectralConfig, op: &OperatingPoint, alpha: f64) -> Result<Self> {
        Ok(Self {
            correlated: correlated_rate(config, op, alpha)?,
            uncorrelated: uncorrelated_rate(config, op, alpha)?,
            alpha,
        })
    }

    pub fn total(&self) -> f64 {
        self.correlated + self.uncorrelated
    }

    /// Both channels after a linear loss of power transmissivity `t` applied
    /// to signal and idler alike. Two-photon events scale as `t²`.
    pub fn attenuated(&self, t: f64) -> Self {
        Self {
            correlated: self.correlated * t * t,
            uncorrelated: self.uncorrelated * t * t,
            alpha: self.alpha,
        }
    }
}

/// Ratio of correlated to uncorrelated rates together with its upper bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRatio {
    pub ratio: f64,
    /// `(Δ/δ_p)·(n+1)/n`; reached when `δ_uc = δ_p`.
    pub bound: f64,
}

impl RateRatio {
    pub fn within_bound(&self) -> bool {
        self.ratio <= self.bound * (1.0 + 1e-12)
    }
}

/// Photon flux at which the mean spectral density reaches one photon per
/// mode: numerically equal to the down-converted bandwidth in Hz.
pub fn crossover_flux(config: &SpectralConfig) -> Result<f64> {
    config.validate()?;
    Ok(config.dc_bandwidth)
}

/// Converts a spectral width given in wavelength to frequency, `c·Δλ/λ²`.
pub fn bandwidth_nm_to_hz(center_wavelength: f64, width: f64) -> Result<f64> {
    ensure_param(
        center_wavelength.is_finite() && center_wavelength > 0.0,
        "center_wavelength",
        center_wavelength,
        "must be finite and positive",
    )?;
    ensure_param(
        width.is_finite() && width >= 0.0,
        "width",
        width,
        "must be finite and >= 0",
    )?;
    ensure_param(
        width < center_wavelength / 2.0,
        "width",
        width,
        "must be narrower than half the center wavelength",
    )?;
    Ok(SPEED_OF_LIGHT * width / (center_wavelength * center_wavelength))
}

pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Optical power carried by a photon flux.
pub fn flux_to_power(flux: f64, wavelength: f64) -> Result<f64> {
    ensure_param(flux >= 0.0, "flux", flux, "must be >= 0")?;
    ensure_param(
        wavelength > 0.0,
        "wavelength",
        wavelength,
        "must be positive",
    )?;
    Ok(flux * photon_energy(wavelength))
}

pub fn power_to_flux(power: f64, wavelength: f64) -> Result<f64> {
    ensure_param(power >= 0.0, "power", power, "must be >= 0")?;
    ensure_param(
        wavelength > 0.0,
        "wavelength",
        wavelength,
        "must be positive",
    )?;
    Ok(power / photon_energy(wavelength))
}

fn check_alpha(alpha: f64) -> Result<()> {
    ensure_param(
        alpha.is_finite() && alpha > 0.0,
        "alpha",
        alpha,
        "must be finite and positive",
    )
}

/// `α·Δ·(n² + n)`.
pub fn correlated_rate(config: &SpectralConfig, op: &OperatingPoint, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * config.dc_bandwidth * (op.n * op.n + op.n))
}

/// `α·δ_uc·n²`.
pub fn uncorrelated_rate(config: &SpectralConfig, op: &OperatingPoint, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * config.uc_bandwidth * op.n * op.n)
}

/// Correlated rate of classically shaped pulses with the same spectral
/// correlations: the quadratic term only.
pub fn classical_correlated_rate(
    config: &SpectralConfig,
    op: &OperatingPoint,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(alpha * config.dc_bandwidth * op.n * op.n)
}

pub fn rate_ratio(config: &SpectralConfig, n: f64) -> Result<RateRatio> {
    if n == 0.0 {
        return Err(SimError::UndefinedRatio);
    }
    ensure_param(
        n.is_finite() && n > 0.0,
        "n",
        n,
        "must be finite and positive",
    )?;
    let factor = (n + 1.0) / n;
    Ok(RateRatio {
        ratio: config.bandwidth_gain() * factor,
        bound: config.mode_pairs() * factor,
    })
}

/// Local log-log slope of the correlated rate, `d ln(n²+n) / d ln n`.
pub fn loglog_slope(n: f64) -> f64 {
    (1.0 + 2.0 * n) / (1.0 + n)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitWeighting {
    #[default]
    Unweighted,
    /// Weights `1/model`, i.e. variance proportional to the mean.
    Poisson,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    /// `sqrt(Σ w (y − ŷ)² / Σ w y²)`.
    pub residual: f64,
}

/// Least-squares fit of `counts = α·Δ·(n + n²)` on a pump-scaling curve.
pub fn fit_alpha(
    curve: &SweepCurve,
    config: &SpectralConfig,
    weighting: FitWeighting,
) -> Result<AlphaFit> {
    fit_alpha_points(&curve.points, config, weighting)
}

pub fn fit_alpha_points(
    points: &[SweepPoint],
    config: &SpectralConfig,
    weighting: FitWeighting,
) -> Result<AlphaFit> {
    if points.len() < 2 {
        return Err(SimError::DegenerateCurve(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    let first = points[0].drive;
    if points.iter().all(|p| p.drive == first) {
        return Err(SimError::DegenerateCurve(
            "all drive values are equal".into(),
        ));
    }
    if points.iter().any(|p| {
        p.drive.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !p.mean.is_finite()
    }) {
        return Err(SimError::DegenerateCurve(
            "drive values must be positive and counts finite".into(),
        ));
    }

    let model = |n: f64| config.dc_bandwidth * (n + n * n);
    let weight = |f: f64| match weighting {
        FitWeighting::Unweighted => 1.0,
        FitWeighting::Poisson => 1.0 / f,
    };

    let (mut num, mut den) = (0.0, 0.0);
    for p in points {
        let f = model(p.drive);
        let w = weight(f);
        num += w * p.mean * f;
        den += w * f * f;
    }
    let alpha = num / den;

    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for p in points {
        let f = model(p.drive);
        let w = weight(f);
        let r = p.mean - alpha * f;
        ss_res += w * r * r;
        ss_tot += w * p.mean * p.mean;
    }
    let residual = if ss_tot > 0.0 {
        (ss_res / ss_tot).sqrt()
    } else {
        0.0
    };
    Ok(AlphaFit { alpha, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::SweepMode;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn setup() -> SpectralConfig {
        SpectralConfig::reference_setup()
    }

    /// Δ = 8.2e12, δ_uc = 1e11 exactly, so the bandwidth gain is 82.
    fn round_setup() -> SpectralConfig {
        SpectralConfig::new(532e-9, 5e6, 1064e-9, 8.2e12, 1e11).unwrap()
    }

    fn curve(points: Vec<SweepPoint>) -> SweepCurve {
        SweepCurve::from_points(SweepMode::PumpScaling, points)
    }

    #[test]
    fn crossover_flux_matches_quoted_value() {
        let phi = crossover_flux(&setup()).unwrap();
        assert!(rel(phi, 8.2e12) < 0.02, "{phi}");
        let unit = SpectralConfig::new(532e-9, 1e-3, 1064e-9, 1.0, 0.5).unwrap();
        assert_eq!(crossover_flux(&unit).unwrap(), 1.0);
        let wide = SpectralConfig::with_dc_width_nm(532e-9, 5e6, 1064e-9, 62.0, 1e11).unwrap();
        assert!(rel(crossover_flux(&wide).unwrap(), 2.0 * phi) < 1e-12);
        assert!(rel(crossover_flux(&wide).unwrap(), 1.64e13) < 0.02);
    }

    #[test]
    fn nm_to_hz() {
        let at_1064 = bandwidth_nm_to_hz(1064e-9, 31e-9).unwrap();
        assert!(rel(at_1064, 8.2e12) < 0.02);
        assert_eq!(bandwidth_nm_to_hz(1064e-9, 0.0).unwrap(), 0.0);
        let at_532 = bandwidth_nm_to_hz(532e-9, 31e-9).unwrap();
        assert!(rel(at_532, 4.0 * at_1064) < 1e-12);
        assert!(rel(at_532, 3.28e13) < 0.02);
        assert!(bandwidth_nm_to_hz(1064e-9, 532e-9).is_err());
        assert!(bandwidth_nm_to_hz(1064e-9, 600e-9).is_err());
    }

    #[test]
    fn flux_power_conversion() {
        let p = flux_to_power(8.2e12, 1064e-9).unwrap();
        assert!(rel(p, 1.53e-6) < 0.01, "{p}");
        assert_eq!(flux_to_power(0.0, 1064e-9).unwrap(), 0.0);
        let p2 = flux_to_power(2e12, 1064e-9).unwrap();
        assert!(rel(p2, 3.7e-7) < 0.01, "{p2}");
        assert!(rel(photon_energy(1064e-9), 1.867e-19) < 1e-3);
        let back = power_to_flux(p, 1064e-9).unwrap();
        assert!(rel(back, 8.2e12) < 1e-12);
        assert!(flux_to_power(-1.0, 1064e-9).is_err());
    }

    #[test]
    fn operating_point_flux_convention() {
        let c = setup();
        let op = OperatingPoint::new(&c, 0.25).unwrap();
        assert_eq!(op.flux, 0.25 * c.dc_bandwidth);
        assert_eq!(op.pair_rate(), op.flux / 2.0);
        let from_power =
            OperatingPoint::from_power(&c, flux_to_power(op.flux, 1064e-9).unwrap()).unwrap();
        assert!(rel(from_power.n, 0.25) < 1e-12);
        assert!(OperatingPoint::new(&c, -0.1).is_err());
    }

    #[test]
    fn config_invariants_enforced() {
        assert!(SpectralConfig::new(532e-9, 5e6, 1064e-9, 8e12, 1e6).is_err());
        assert!(SpectralConfig::new(532e-9, 5e6, 1064e-9, 1e10, 1e11).is_err());
        assert!(SpectralConfig::new(532e-9, 0.0, 1064e-9, 8e12, 1e11).is_err());
        assert!(SpectralConfig::new(f64::NAN, 5e6, 1064e-9, 8e12, 1e11).is_err());
        let scaled = setup().scaled_to(1e6).unwrap();
        assert!(rel(scaled.bandwidth_gain(), setup().bandwidth_gain()) < 1e-12);
        assert!(rel(scaled.mode_pairs(), setup().mode_pairs()) < 1e-12);
    }

    #[test]
    fn correlated_rate_examples() {
        let c = setup();
        let alpha = 1e-7;
        let zero = OperatingPoint::new(&c, 0.0).unwrap();
        assert_eq!(correlated_rate(&c, &zero, alpha).unwrap(), 0.0);
        let one = OperatingPoint::new(&c, 1.0).unwrap();
        assert!(
            rel(
                correlated_rate(&c, &one, alpha).unwrap(),
                2.0 * alpha * c.dc_bandwidth
            ) < 1e-15
        );
        let top = OperatingPoint::new(&c, 0.185).unwrap();
        let linear = alpha * c.dc_bandwidth * 0.185;
        let excess = correlated_rate(&c, &top, alpha).unwrap() / linear;
        assert!((excess - 1.185).abs() < 1e-12);
        assert!(correlated_rate(&c, &top, 0.0).is_err());
    }

    #[test]
    fn uncorrelated_rate_examples() {
        let c = round_setup();
        let alpha = 3e-8;
        let zero = OperatingPoint::new(&c, 0.0).unwrap();
        assert_eq!(uncorrelated_rate(&c, &zero, alpha).unwrap(), 0.0);
        for n in [1e-4, 0.01, 0.3, 5.0] {
            let op = OperatingPoint::new(&c, n).unwrap();
            let ratio = uncorrelated_rate(&c, &op, alpha).unwrap()
                / correlated_rate(&c, &op, alpha).unwrap();
            let expected = (1e11 / 8.2e12) * n * n / (n * n + n);
            assert!(rel(ratio, expected) < 1e-12);
        }
        let wider = SpectralConfig {
            uc_bandwidth: 2e11,
            ..c
        };
        let op = OperatingPoint::new(&c, 0.1).unwrap();
        assert!(
            rel(
                uncorrelated_rate(&wider, &op, alpha).unwrap(),
                2.0 * uncorrelated_rate(&c, &op, alpha).unwrap()
            ) < 1e-15
        );
    }

    #[test]
    fn rate_ratio_examples() {
        let c = round_setup();
        assert!(rel(rate_ratio(&c, 1e12).unwrap().ratio, 82.0) < 1e-9);
        let at_one = rate_ratio(&c, 1.0).unwrap();
        assert!(rel(at_one.ratio, 164.0) < 1e-12);
        assert!(at_one.within_bound());
        assert_eq!(rate_ratio(&c, 0.0), Err(SimError::UndefinedRatio));
        assert!(rate_ratio(&c, -1.0).is_err());
    }

    #[test]
    fn classical_reference() {
        let c = round_setup();
        let alpha = 1e-7;
        let zero = OperatingPoint::new(&c, 0.0).unwrap();
        assert_eq!(classical_correlated_rate(&c, &zero, alpha).unwrap(), 0.0);
        for n in [1e-3, 0.1, 1.0, 1e3] {
            let op = OperatingPoint::new(&c, n).unwrap();
            let classical = classical_correlated_rate(&c, &op, alpha).unwrap();
            let unc = uncorrelated_rate(&c, &op, alpha).unwrap();
            assert!(rel(classical / unc, c.bandwidth_gain()) < 1e-12);
        }
        // Quantum over classical gain tends to 1 at high power.
        let gain_ratio = |n: f64| {
            let op = OperatingPoint::new(&c, n).unwrap();
            correlated_rate(&c, &op, alpha).unwrap()
                / classical_correlated_rate(&c, &op, alpha).unwrap()
        };
        assert!(gain_ratio(1e6) - 1.0 < 1e-5);
        assert!(gain_ratio(0.01) > 100.0);
    }

    #[test]
    fn slope_examples() {
        assert!((loglog_slope(1e-6) - 1.0).abs() < 1e-5);
        assert!((loglog_slope(0.185) - 1.37 / 1.185).abs() < 1e-12);
        assert!((loglog_slope(0.185) - 1.156).abs() < 0.001);
        assert!((loglog_slope(1e9) - 2.0).abs() < 1e-8);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let f = |n: f64| (n * n + n).ln();
        for n in [1e-3, 0.05, 0.185, 3.0] {
            let h = 1e-5;
            let fd = (f(n * (1.0 + h)) - f(n * (1.0 - h))) / ((1.0 + h).ln() - (1.0 - h).ln());
            assert!((fd - loglog_slope(n)).abs() < 1e-8);
        }
    }

    fn synthetic(config: &SpectralConfig, alpha: f64, ns: &[f64]) -> Vec<SweepPoint> {
        ns.iter()
            .map(|&n| SweepPoint {
                drive: n,
                mean: alpha * config.dc_bandwidth * (n + n * n),
                std: 0.0,
            })
            .collect()
    }

    fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..k)
            .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp())
            .collect()
    }

    #[test]
    fn fit_recovers_noiseless_alpha() {
        let c = setup();
        let ns = log_grid(1e-3, 0.185, 12);
        for weighting in [FitWeighting::Unweighted, FitWeighting::Poisson] {
            let fit = fit_alpha(&curve(synthetic(&c, 2.5e-7, &ns)), &c, weighting).unwrap();
            assert!(rel(fit.alpha, 2.5e-7) < 1e-9);
            assert!(fit.residual < 1e-12);
        }
    }

    #[test]
    fn fit_under_multiplicative_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let c = setup();
        let ns = log_grid(1e-3, 0.185, 20);
        let alpha0 = 1e-7;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut hits = 0;
        let trials = 1000;
        for _ in 0..trials {
            let pts: Vec<_> = synthetic(&c, alpha0, &ns)
                .into_iter()
                .map(|mut p| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    p.mean *= 1.0 + 0.05 * z;
                    p
                })
                .collect();
            let fit = fit_alpha_points(&pts, &c, FitWeighting::Poisson).unwrap();
            if rel(fit.alpha, alpha0) < 0.05 {
                hits += 1;
            }
        }
        assert!(hits as f64 >= 0.95 * trials as f64, "{hits}/{trials}");
    }

    #[test]
    fn quadratic_data_leaves_visible_residual() {
        let c = setup();
        let ns = log_grid(1e-3, 0.185, 20);
        let pts: Vec<_> = ns
            .iter()
            .map(|&n| SweepPoint {
                drive: n,
                mean: 1e-7 * c.dc_bandwidth * n * n,
                std: 0.0,
            })
            .collect();
        for weighting in [FitWeighting::Unweighted, FitWeighting::Poisson] {
            let fit = fit_alpha_points(&pts, &c, weighting).unwrap();
            // Well above a 5% noise floor.
            assert!(fit.residual > 0.1, "{weighting:?}: {}", fit.residual);
        }
    }

    #[test]
    fn fit_rejects_degenerate_curves() {
        let c = setup();
        let same = synthetic(&c, 1e-7, &[0.1, 0.1, 0.1]);
        assert!(matches!(
            fit_alpha_points(&same, &c, FitWeighting::Unweighted),
            Err(SimError::DegenerateCurve(_))
        ));
        let single = synthetic(&c, 1e-7, &[0.1]);
        assert!(fit_alpha_points(&single, &c, FitWeighting::Unweighted).is_err());
    }

    proptest! {
        #[test]
        fn ratio_matches_rate_quotient(n in 1e-6f64..1e3, alpha in 1e-10f64..1.0) {
            let c = round_setup();
            let op = OperatingPoint::new(&c, n).unwrap();
            let q = correlated_rate(&c, &op, alpha).unwrap() / uncorrelated_rate(&c, &op, alpha).unwrap();
            prop_assert!(rel(rate_ratio(&c, n).unwrap().ratio, q) < 1e-12);
        }

        #[test]
        fn ratio_respects_mode_pair_bound(
            pump in 1e3f64..1e9,
            uc_factor in 1.0f64..1e3,
            dc_factor in 1.0f64..1e3,
            n in 1e-6f64..1e3,
        ) {
            let uc = pump * uc_factor;
            let c = SpectralConfig::new(532e-9, pump, 1064e-9, uc * dc_factor, uc).unwrap();
            let r = rate_ratio(&c, n).unwrap();
            prop_assert!(r.within_bound());
            let tight = SpectralConfig { uc_bandwidth: pump, ..c };
            let rt = rate_ratio(&tight, n).unwrap();
            prop_assert!(rel(rt.ratio, rt.bound) < 1e-12);
        }

        #[test]
        fn slope_monotone_and_bounded(a in 1e-9f64..1e6, b in 1e-9f64..1e6) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi > lo * (1.0 + 1e-9));
            prop_assert!(loglog_slope(lo) < loglog_slope(hi));
            prop_assert!(loglog_slope(lo) > 1.0 && loglog_slope(hi) < 2.0);
        }

        #[test]
        fn quantum_over_classical_is_n_plus_one_over_n(n in 1e-6f64..1e3) {
            let c = setup();
            let op = OperatingPoint::new(&c, n).unwrap();
            let q = correlated_rate(&c, &op, 1e-7).unwrap()
                / classical_correlated_rate(&c, &op, 1e-7).unwrap();
            prop_assert!(rel(q, (n + 1.0) / n) < 1e-12);
        }

        #[test]
        fn fit_is_scale_equivariant(scale in 1e-3f64..1e3, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let c = setup();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = log_grid(1e-3, 0.2, 8)
                .into_iter()
                .map(|n| SweepPoint { drive: n, mean: c.dc_bandwidth * n * rng.random_range(0.5..1.5), std: 0.0 })
                .collect();
            let scaled: Vec<_> = pts.iter().map(|p| SweepPoint { mean: p.mean * scale, ..*p }).collect();
            for w in [FitWeighting::Unweighted, FitWeighting::Poisson] {
                let a = fit_alpha_points(&pts, &c, w).unwrap().alpha;
                let b = fit_alpha_points(&scaled, &c, w).unwrap().alpha;
                prop_assert!(rel(b, a * scale) < 1e-12);
            }
        }
    }

    #[test]
    fn power_at_crossover() {
        let c = setup();
        let p = flux_to_power(crossover_flux(&c).unwrap(), c.dc_center_wavelength).unwrap();
        assert!(rel(p, 1.5e-6) < 0.03, "{p}");
    }
}
