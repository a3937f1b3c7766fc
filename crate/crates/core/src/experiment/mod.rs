//! Power sweeps and engine cross-validation.
//!
//! A sweep varies either the down-conversion density `n` (pump scaling) or a
//! linear transmissivity `t` applied after generation (attenuation), and
//! records SFG counts per drive value with any of the three engines.
//! Counts are always correlated plus in-band uncorrelated SFG.

mod cross;

pub use cross::{
    cross_validate, CrossValidation, CrossValidationRow, CrossValidationSettings, RatioCheck,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    fit_alpha_points, AlphaFit, FitWeighting, OperatingPoint, RatePrediction, SpectralConfig,
};
use crate::error::{Result, SimError};
use crate::fock::{
    apply_loss, build_state, sfg_rate_correlated, sfg_rate_uncorrelated, Ensemble, LossChannel,
};
use crate::rng::{Stage, Substream};
use crate::stream::{
    attenuate_stream, count_sfg, detect_shard, generate_stream, DetectorModel, EventStream,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    PumpScaling,
    Attenuation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Analytic,
    Fock,
    Stream,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Fock => "fock",
            Engine::Stream => "stream",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// `n` in pump-scaling mode, `t` in attenuation mode.
    pub drive: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub mode: SweepMode,
    pub engine: Engine,
    /// Sorted by drive.
    pub points: Vec<SweepPoint>,
    /// OLS slope of `ln counts` on `ln drive`; `None` if any count is not
    /// positive.
    pub fitted_slope: Option<f64>,
    /// Two-point slope between the first two points.
    pub low_end_slope: Option<f64>,
    /// Two-point slope between the last two points.
    pub high_end_slope: Option<f64>,
    /// Pump-scaling sweeps only.
    pub fitted_alpha: Option<AlphaFit>,
}

impl SweepCurve {
    pub fn from_points(mode: SweepMode, mut points: Vec<SweepPoint>) -> Self {
        points.sort_by(|a, b| a.drive.total_cmp(&b.drive));
        let (fitted_slope, low_end_slope, high_end_slope) = slopes(&points);
        Self {
            mode,
            engine: Engine::default(),
            points,
            fitted_slope,
            low_end_slope,
            high_end_slope,
            fitted_alpha: None,
        }
    }

    pub fn drives(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.drive).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean).collect()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.points.windows(2).all(|w| w[1].mean > w[0].mean)
    }
}

/// Least-squares slope of `ln y` on `ln x` with its standard error.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len()
        || x.len() < 2
        || x.iter()
            .chain(y)
            .any(|v| v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater))
    {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let se = if lx.len() > 2 {
        let ss: f64 = lx
            .iter()
            .zip(&ly)
            .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
            .sum();
        (ss / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Some((slope, se))
}

fn slopes(points: &[SweepPoint]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let x: Vec<f64> = points.iter().map(|p| p.drive).collect();
    let y: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let global = loglog_fit(&x, &y).map(|f| f.0);
    let k = points.len();
    if k < 2 {
        return (global, None, None);
    }
    let low = loglog_fit(&x[..2], &y[..2]).map(|f| f.0);
    let high = loglog_fit(&x[k - 2..], &y[k - 2..]).map(|f| f.0);
    (global, low, high)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    /// Analytic prefactor; counts/s are `α·(Δ(n+n²) + δ_uc·n²)`.
    pub alpha: f64,
    pub fock_pairs: usize,
    pub fock_cutoff: usize,
    /// Generation density for attenuation sweeps.
    pub attenuation_n: f64,
    pub conv_prob: f64,
    /// Expected pairs generated per stream point (per seed).
    pub stream_pairs: f64,
    /// Down-converted bandwidth the stream engine runs at. The other
    /// bandwidths are scaled with it.
    pub stream_bandwidth: f64,
    /// Alpha fit weighting; `None` picks unweighted for noiseless analytic
    /// curves and Poisson weights otherwise.
    pub fit_weighting: Option<FitWeighting>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            alpha: 2.2e-8,
            fock_pairs: 2,
            fock_cutoff: 2,
            attenuation_n: 0.05,
            conv_prob: 0.5,
            stream_pairs: 1e5,
            stream_bandwidth: 1e6,
            fit_weighting: None,
        }
    }
}

fn validate_drives(mode: SweepMode, drives: &[f64]) -> Result<()> {
    if drives.len() < 3 {
        return Err(SimError::InvalidConfig(format!(
            "a sweep needs at least 3 drive values, got {}",
            drives.len()
        )));
    }
    for &d in drives {
        let ok = match mode {
            SweepMode::PumpScaling => d.is_finite() && d > 0.0,
            SweepMode::Attenuation => d > 0.0 && d <= 1.0,
        };
        if !ok {
            return Err(SimError::InvalidParameter {
                name: "drive",
                value: d,
                reason: match mode {
                    SweepMode::PumpScaling => "n must be finite and positive",
                    SweepMode::Attenuation => "t must lie in (0, 1]",
                },
            });
        }
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn fock_rate(state: &impl Ensemble) -> Result<f64> {
    let uncorrelated = if state.num_pairs() >= 2 {
        sfg_rate_uncorrelated(state)?
    } else {
        0.0
    };
    Ok(sfg_rate_correlated(state) + uncorrelated)
}

/// Stream configuration at desk scale.
pub fn stream_config(config: &SpectralConfig, settings: &SweepSettings) -> Result<SpectralConfig> {
    config.scaled_to(settings.stream_bandwidth)
}

fn stream_rate(stream: &EventStream, config: &SpectralConfig, conv_prob: f64) -> Result<f64> {
    Ok(count_sfg(stream, config, conv_prob)?.total() as f64 / stream.duration())
}

fn stream_duration(config: &SpectralConfig, n: f64, settings: &SweepSettings) -> Result<f64> {
    let op = OperatingPoint::new(config, n)?;
    if op.pair_rate() <= 0.0 {
        return Err(SimError::InvalidParameter {
            name: "n",
            value: n,
            reason: "stream sweeps need n > 0",
        });
    }
    Ok(settings.stream_pairs / op.pair_rate())
}

pub fn run_sweep(
    config: &SpectralConfig,
    mode: SweepMode,
    drive_values: &[f64],
    engine: Engine,
    detector: Option<&DetectorModel>,
    seeds: &[u64],
) -> Result<SweepCurve> {
    run_sweep_with(
        config,
        mode,
        drive_values,
        engine,
        detector,
        seeds,
        &SweepSettings::default(),
    )
}

pub fn run_sweep_with(
    config: &SpectralConfig,
    mode: SweepMode,
    drive_values: &[f64],
    engine: Engine,
    detector: Option<&DetectorModel>,
    seeds: &[u64],
    settings: &SweepSettings,
) -> Result<SweepCurve> {
    config.validate()?;
    validate_drives(mode, drive_values)?;
    if engine == Engine::Fock && detector.is_some() {
        return Err(SimError::Unsupported(
            "the fock engine computes dimensionless rates and cannot drive a detector".into(),
        ));
    }
    if (engine == Engine::Stream || detector.is_some()) && seeds.is_empty() {
        return Err(SimError::InvalidConfig(
            "stochastic sweeps need at least one seed".into(),
        ));
    }
    if let Some(d) = detector {
        d.validate()?;
    }

    let mut drives = drive_values.to_vec();
    drives.sort_by(f64::total_cmp);

    // One value per (point, seed); deterministic engines fill column 0 only.
    let mut samples: Vec<Vec<f64>> = Vec::with_capacity(drives.len());
    let mut fit_config = *config;
    match engine {
        Engine::Analytic => {
            let base = OperatingPoint::new(config, settings.attenuation_n)?;
            let base_rate = RatePrediction::compute(config, &base, settings.alpha)?;
            for &d in &drives {
                let rate = match mode {
                    SweepMode::PumpScaling => RatePrediction::compute(
                        config,
                        &OperatingPoint::new(config, d)?,
                        settings.alpha,
                    )?
                    .total(),
                    SweepMode::Attenuation => base_rate.attenuated(d).total(),
                };
                samples.push(vec![rate]);
            }
        }
        Engine::Fock => {
            let base = build_state(
                settings.attenuation_n,
                settings.fock_pairs,
                settings.fock_cutoff,
                0.0,
            )?;
            for &d in &drives {
                let rate = match mode {
                    SweepMode::PumpScaling => fock_rate(&build_state(
                        d,
                        settings.fock_pairs,
                        settings.fock_cutoff,
                        0.0,
                    )?)?,
                    SweepMode::Attenuation => fock_rate(&apply_loss(&base, LossChannel::new(d)?)?)?,
                };
                samples.push(vec![rate]);
            }
        }
        Engine::Stream => {
            let sc = stream_config(config, settings)?;
            fit_config = sc;
            samples = vec![Vec::with_capacity(seeds.len()); drives.len()];
            match mode {
                SweepMode::PumpScaling => {
                    for (i, &n) in drives.iter().enumerate() {
                        let duration = stream_duration(&sc, n, settings)?;
                        let op = OperatingPoint::new(&sc, n)?;
                        for &seed in seeds {
                            let stream = generate_stream(&sc, &op, duration, seed)?;
                            samples[i].push(stream_rate(&stream, &sc, settings.conv_prob)?);
                        }
                    }
                }
                SweepMode::Attenuation => {
                    let n = settings.attenuation_n;
                    let duration = stream_duration(&sc, n, settings)?;
                    let op = OperatingPoint::new(&sc, n)?;
                    for &seed in seeds {
                        let stream = generate_stream(&sc, &op, duration, seed)?;
                        for (i, &t) in drives.iter().enumerate() {
                            let thinned = attenuate_stream(&stream, t, seed)?;
                            samples[i].push(stream_rate(&thinned, &sc, settings.conv_prob)?);
                        }
                    }
                }
            }
        }
    }

    if let Some(model) = detector {
        for (i, row) in samples.iter_mut().enumerate() {
            let rate = row[0];
            let expanded = if engine == Engine::Stream {
                std::mem::take(row)
            } else {
                vec![rate; seeds.len()]
            };
            *row = expanded
                .iter()
                .zip(seeds)
                .map(|(&r, &seed)| Ok(detect_shard(r, model, seed, i as u64)?.rate()))
                .collect::<Result<Vec<f64>>>()?;
        }
    }

    let points: Vec<SweepPoint> = drives
        .iter()
        .zip(&samples)
        .map(|(&drive, row)| {
            let (mean, std) = mean_std(row);
            SweepPoint { drive, mean, std }
        })
        .collect();

    let mut curve = SweepCurve::from_points(mode, points);
    curve.engine = engine;
    if mode == SweepMode::PumpScaling
        && engine != Engine::Fock
        && curve.points.iter().all(|p| p.mean > 0.0)
    {
        let weighting =
            settings
                .fit_weighting
                .unwrap_or(if engine == Engine::Analytic && detector.is_none() {
                    FitWeighting::Unweighted
                } else {
                    FitWeighting::Poisson
                });
        let mut fit_points = curve.points.clone();
        if detector.is_some() {
            // Fit against generated rates: undo the collection efficiency.
            let eta = detector.map(|d| d.efficiency).unwrap_or(1.0);
            for p in &mut fit_points {
                p.mean /= eta;
            }
        }
        curve.fitted_alpha = Some(fit_alpha_points(&fit_points, &fit_config, weighting)?);
    }
    Ok(curve)
}

/// Spread of per-seed fitted α across independent stream sweeps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaConsistency {
    pub per_seed: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// Bootstrap standard error of the mean.
    pub bootstrap_std: f64,
    /// Fraction of per-seed values within 2 std of the mean.
    pub within_two_std: f64,
    /// α fitted to the seed-averaged curve.
    pub pooled: f64,
}

impl AlphaConsistency {
    /// Per-seed values behave like draws from one distribution and the
    /// pooled fit agrees with their mean.
    pub fn is_consistent(&self) -> bool {
        self.within_two_std >= 0.9 && (self.pooled - self.mean).abs() <= 2.0 * self.bootstrap_std
    }
}

/// Runs one pump-scaling stream sweep per seed and compares the fitted α.
pub fn alpha_consistency(
    config: &SpectralConfig,
    drive_values: &[f64],
    seeds: &[u64],
    settings: &SweepSettings,
) -> Result<AlphaConsistency> {
    if seeds.len() < 2 {
        return Err(SimError::InvalidConfig("need at least 2 seeds".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut pooled_points: Option<Vec<SweepPoint>> = None;
    for &seed in seeds {
        let curve = run_sweep_with(
            config,
            SweepMode::PumpScaling,
            drive_values,
            Engine::Stream,
            None,
            &[seed],
            settings,
        )?;
        let alpha = curve
            .fitted_alpha
            .ok_or_else(|| SimError::DegenerateCurve("a stream sweep produced no counts".into()))?
            .alpha;
        per_seed.push(alpha);
        match &mut pooled_points {
            None => pooled_points = Some(curve.points),
            Some(acc) => {
                for (a, p) in acc.iter_mut().zip(&curve.points) {
                    a.mean += p.mean;
                }
            }
        }
    }
    let mut pooled_points = pooled_points.expect("at least two seeds");
    for p in &mut pooled_points {
        p.mean /= seeds.len() as f64;
    }
    let pooled = fit_alpha_points(
        &pooled_points,
        &stream_config(config, settings)?,
        FitWeighting::Poisson,
    )?
    .alpha;

    let (mean, std) = mean_std(&per_seed);
    let within_two_std = per_seed
        .iter()
        .filter(|a| (*a - mean).abs() <= 2.0 * std)
        .count() as f64
        / per_seed.len() as f64;

    let mut rng = Substream::new(seeds[0], Stage::PhaseEnsemble).shard(1);
    let resamples = 2000;
    let means: Vec<f64> = (0..resamples)
        .map(|_| {
            (0..per_seed.len())
                .map(|_| per_seed[rng.random_range(0..per_seed.len())])
                .sum::<f64>()
                / per_seed.len() as f64
        })
        .collect();
    let bootstrap_std = mean_std(&means).1;

    Ok(AlphaConsistency {
        per_seed,
        mean,
        std,
        bootstrap_std,
        within_two_std,
        pooled,
    })
}

/// Pump-scaling and attenuation slopes over the same output fluxes.
///
/// The attenuation sweep starts from the largest `n` and uses
/// `t = n/n_max`, so both sweeps cover the same photon fluxes.
pub fn mode_separation(
    config: &SpectralConfig,
    n_values: &[f64],
    engine: Engine,
    seeds: &[u64],
) -> Result<f64> {
    let n_max = n_values.iter().cloned().fold(f64::NAN, f64::max);
    let settings = SweepSettings {
        attenuation_n: n_max,
        ..SweepSettings::default()
    };
    let pump = run_sweep_with(
        config,
        SweepMode::PumpScaling,
        n_values,
        engine,
        None,
        seeds,
        &settings,
    )?;
    let ts: Vec<f64> = n_values.iter().map(|n| n / n_max).collect();
    let atten = run_sweep_with(
        config,
        SweepMode::Attenuation,
        &ts,
        engine,
        None,
        seeds,
        &settings,
    )?;
    match (atten.fitted_slope, pump.fitted_slope) {
        (Some(a), Some(p)) => Ok(a - p),
        _ => Err(SimError::DegenerateCurve(
            "non-positive counts in a sweep".into(),
        )),
    }
}

/// Logarithmically spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == count - 1 {
                hi
            } else {
                (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (count - 1) as f64).exp()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::loglog_slope;

    fn setup() -> SpectralConfig {
        SpectralConfig::reference_setup()
    }

    #[test]
    fn analytic_pump_sweep_slopes() {
        let ns = log_grid(1e-3, 0.185, 400);
        let c = run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &ns,
            Engine::Analytic,
            None,
            &[],
        )
        .unwrap();
        let s = c.fitted_slope.unwrap();
        assert!(s > 1.0 && s < 1.16, "{s}");
        assert!((c.low_end_slope.unwrap() - 1.001).abs() < 0.002);
        assert!(
            (c.high_end_slope.unwrap() - 1.156).abs() < 0.005,
            "{:?}",
            c.high_end_slope
        );
        assert!(c.is_strictly_increasing());
        let fit = c.fitted_alpha.unwrap();
        assert!((fit.alpha / SweepSettings::default().alpha - 1.0).abs() < 0.02);
        assert!(loglog_slope(0.185) > c.high_end_slope.unwrap() - 0.01);
    }

    #[test]
    fn attenuation_is_exactly_quadratic_for_deterministic_engines() {
        let ts = [0.25, 0.5, 1.0];
        for engine in [Engine::Analytic, Engine::Fock] {
            let c = run_sweep(&setup(), SweepMode::Attenuation, &ts, engine, None, &[]).unwrap();
            assert!((c.fitted_slope.unwrap() - 2.0).abs() < 1e-9, "{engine:?}");
            assert!(c.fitted_alpha.is_none());
        }
    }

    #[test]
    fn rejects_undefined_combinations() {
        let ns = [0.01, 0.02, 0.04];
        let d = DetectorModel::default();
        assert!(matches!(
            run_sweep(
                &setup(),
                SweepMode::PumpScaling,
                &ns,
                Engine::Fock,
                Some(&d),
                &[1]
            ),
            Err(SimError::Unsupported(_))
        ));
        assert!(run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &ns[..2],
            Engine::Analytic,
            None,
            &[]
        )
        .is_err());
        assert!(run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &ns,
            Engine::Stream,
            None,
            &[]
        )
        .is_err());
        assert!(run_sweep(
            &setup(),
            SweepMode::Attenuation,
            &[0.5, 1.0, 1.5],
            Engine::Analytic,
            None,
            &[]
        )
        .is_err());
    }

    #[test]
    fn points_are_sorted() {
        let c = run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &[0.1, 0.01, 0.05],
            Engine::Fock,
            None,
            &[],
        )
        .unwrap();
        assert_eq!(c.drives(), vec![0.01, 0.05, 0.1]);
        assert!(c.is_strictly_increasing());
    }

    #[test]
    fn detector_sweep_is_reproducible() {
        let ns = log_grid(0.01, 0.185, 5);
        let d = DetectorModel::default();
        let a = run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &ns,
            Engine::Analytic,
            Some(&d),
            &[1, 2, 3],
        )
        .unwrap();
        let b = run_sweep(
            &setup(),
            SweepMode::PumpScaling,
            &ns,
            Engine::Analytic,
            Some(&d),
            &[1, 2, 3],
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(a.points.iter().all(|p| p.std > 0.0));
    }

    #[test]
    fn mode_separation_analytic() {
        let ns = log_grid(1e-3, 0.185, 10);
        let gap = mode_separation(&setup(), &ns, Engine::Analytic, &[]).unwrap();
        assert!(gap >= 0.8, "{gap}");
    }

    #[test]
    fn loglog_fit_edge_cases() {
        assert!(loglog_fit(&[1.0], &[1.0]).is_none());
        assert!(loglog_fit(&[1.0, 2.0], &[1.0, 0.0]).is_none());
        let (s, se) = loglog_fit(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn grid_hits_endpoints() {
        let g = log_grid(1e-3, 0.185, 7);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[6], 0.185);
    }
}
