//! Time-tagged photon-pair streams and coincidence-based SFG counting.
//!
//! Pairs are created by a Poisson process of rate `n·Δ/2`. Each pair carries a
//! signal frequency uniform over `[−Δ/2, Δ/2]`, an idler at `−signal + jitter`
//! with the jitter uniform over `±δ_p/2`, and an idler delay of zero mean and
//! standard deviation `τ = 1/(2Δ)`.
//!
//! Counting scans signal/idler coincidences within `|t_s − t_i| ≤ w`,
//! `w = 1/Δ`. A coincidence inside one pair converts with probability
//! `conv_prob·(1 + n)`: the pair's own up-conversion plus the Bose-enhanced
//! contribution of the other photons occupying its mode pair. A coincidence of
//! photons from different pairs converts with probability `conv_prob` and
//! reaches the output only if the sum frequency lands inside `±δ_uc/2`.
//!
//! With these choices the expected counts per unit time are
//! `(conv_prob/2)·ε·Δ·(n + n²)` correlated and `(conv_prob/2)·δ_uc·n²`
//! accidental, to first order in `δ_uc/Δ`, where `ε` is the fraction of intact
//! pairs that fall inside the window.
//!
//! All randomness comes from [`Substream`]s keyed by stage and fixed-size
//! shard, so results do not depend on the number of worker threads.

mod detector;
mod io;

pub use detector::{detect, detect_shard, Detection, DetectorModel};
pub use io::{read_stream, write_stream};

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{OperatingPoint, SpectralConfig};
use crate::error::{ensure_param, Result, SimError};
use crate::rng::{Stage, Substream};

/// Expected pairs per generation shard.
const GENERATION_SHARD_PAIRS: f64 = 65_536.0;
/// Events (or signal photons) per attenuation / counting shard.
const EVENT_SHARD: usize = 1 << 16;
/// Largest stream the generator will materialize.
pub const MAX_EVENTS: f64 = 6.0e7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    Signal,
    Idler,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Signal => "signal",
            Channel::Idler => "idler",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonEvent {
    /// Arrival time (s).
    pub time: f64,
    /// Detuning from the band center (Hz).
    pub freq_offset: f64,
    pub channel: Channel,
    pub pair_id: u64,
}

/// Shape of the intra-pair delay distribution. Both have standard deviation
/// `τ = 1/(2Δ)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum DelayShape {
    #[default]
    Gaussian,
    Uniform,
}

impl DelayShape {
    pub fn as_str(&self) -> &'static str {
        match self {
            DelayShape::Gaussian => "gaussian",
            DelayShape::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(DelayShape::Gaussian),
            "uniform" => Some(DelayShape::Uniform),
            _ => None,
        }
    }

    /// Probability that `|delay| ≤ window` for delay std `tau`.
    pub fn capture_probability(&self, tau: f64, window: f64) -> f64 {
        match self {
            DelayShape::Gaussian => libm::erf(window / (tau * std::f64::consts::SQRT_2)),
            DelayShape::Uniform => (window / (3f64.sqrt() * tau)).min(1.0),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, tau: f64) -> f64 {
        match self {
            DelayShape::Gaussian => Normal::new(0.0, tau)
                .expect("tau is finite and positive")
                .sample(rng),
            DelayShape::Uniform => {
                let half = 3f64.sqrt() * tau;
                rng.random_range(-half..half)
            }
        }
    }
}

/// Intra-pair delay standard deviation, `1/(2Δ)`.
pub fn pair_correlation_time(config: &SpectralConfig) -> f64 {
    0.5 / config.dc_bandwidth
}

/// Coincidence half-window, `1/Δ`.
pub fn coincidence_window(config: &SpectralConfig) -> f64 {
    1.0 / config.dc_bandwidth
}

/// Time-sorted photon events with their generating parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct EventStream {
    events: Vec<PhotonEvent>,
    config: SpectralConfig,
    operating_point: OperatingPoint,
    seed: u64,
    duration: f64,
    delay: DelayShape,
}

impl EventStream {
    /// Assembles a stream from parts, checking ordering and lineage.
    pub fn from_parts(
        events: Vec<PhotonEvent>,
        config: SpectralConfig,
        operating_point: OperatingPoint,
        seed: u64,
        duration: f64,
        delay: DelayShape,
    ) -> Result<Self> {
        let stream = Self {
            events,
            config,
            operating_point,
            seed,
            duration,
            delay,
        };
        stream.validate()?;
        Ok(stream)
    }

    pub fn events(&self) -> &[PhotonEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.config
    }

    pub fn operating_point(&self) -> &OperatingPoint {
        &self.operating_point
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn delay_shape(&self) -> DelayShape {
        self.delay
    }

    /// Checks time ordering and that each pair id appears on at most one
    /// signal and one idler photon.
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| SimError::StreamFormat { line: 0, message };
        if let Some(i) = self.events.windows(2).position(|w| w[0].time > w[1].time) {
            return Err(invalid(format!("event {} is out of time order", i + 1)));
        }
        let mut seen: HashMap<(u64, Channel), ()> = HashMap::with_capacity(self.events.len());
        for e in &self.events {
            if seen.insert((e.pair_id, e.channel), ()).is_some() {
                return Err(invalid(format!(
                    "pair {} has two {} photons",
                    e.pair_id,
                    e.channel.as_str()
                )));
            }
        }
        Ok(())
    }

    pub fn count_channel(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }

    /// Number of pair ids present in the stream.
    pub fn pair_count(&self) -> usize {
        let mut ids: Vec<u64> = self.events.iter().map(|e| e.pair_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Pairs whose signal and idler both survive.
    pub fn intact_pair_count(&self) -> usize {
        let mut per_pair: HashMap<u64, u8> = HashMap::new();
        for e in &self.events {
            *per_pair.entry(e.pair_id).or_default() += 1;
        }
        per_pair.values().filter(|&&c| c == 2).count()
    }

    /// `t_idler − t_signal` for every intact pair, ordered by pair id.
    pub fn intra_pair_delays(&self) -> Vec<f64> {
        let mut times: HashMap<u64, [Option<f64>; 2]> = HashMap::new();
        for e in &self.events {
            let slot = times.entry(e.pair_id).or_default();
            slot[(e.channel == Channel::Idler) as usize] = Some(e.time);
        }
        let mut pairs: Vec<(u64, f64)> = times
            .into_iter()
            .filter_map(|(id, t)| Some((id, t[1]? - t[0]?)))
            .collect();
        pairs.sort_unstable_by_key(|p| p.0);
        pairs.into_iter().map(|p| p.1).collect()
    }
}

struct PairDraw {
    time: f64,
    signal_freq: f64,
    idler_freq: f64,
    delay: f64,
}

pub fn generate_stream(
    config: &SpectralConfig,
    op: &OperatingPoint,
    duration: f64,
    seed: u64,
) -> Result<EventStream> {
    generate_stream_with(config, op, duration, seed, DelayShape::default())
}

pub fn generate_stream_with(
    config: &SpectralConfig,
    op: &OperatingPoint,
    duration: f64,
    seed: u64,
    delay: DelayShape,
) -> Result<EventStream> {
    config.validate()?;
    ensure_param(
        duration.is_finite() && duration > 0.0,
        "duration",
        duration,
        "must be finite and positive",
    )?;
    let op = OperatingPoint::new(config, op.n)?;
    let pair_rate = op.pair_rate();
    let expected_events = 2.0 * pair_rate * duration;
    if expected_events > MAX_EVENTS {
        return Err(SimError::Unsupported(format!(
            "{expected_events:.3e} expected events exceed the {MAX_EVENTS:.1e} event budget; \
             scale the bandwidth down or shorten the run"
        )));
    }
    if pair_rate == 0.0 {
        return EventStream::from_parts(Vec::new(), *config, op, seed, duration, delay);
    }

    let shard_len = GENERATION_SHARD_PAIRS / pair_rate;
    let shards = (duration / shard_len).ceil().max(1.0) as u64;
    let tau = pair_correlation_time(config);
    let half_dc = config.dc_bandwidth / 2.0;
    let half_pump = config.pump_bandwidth / 2.0;
    let substream = Substream::new(seed, Stage::Generation);

    let per_shard: Vec<Vec<PairDraw>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let start = s as f64 * shard_len;
            let end = ((s + 1) as f64 * shard_len).min(duration);
            let mut rng = substream.shard(s);
            let mean = pair_rate * (end - start);
            let count = if mean > 0.0 {
                Poisson::new(mean)
                    .expect("positive finite mean")
                    .sample(&mut rng) as usize
            } else {
                0
            };
            let mut times: Vec<f64> = (0..count).map(|_| rng.random_range(start..end)).collect();
            times.sort_unstable_by(f64::total_cmp);
            times
                .into_iter()
                .map(|time| {
                    let signal_freq = rng.random_range(-half_dc..half_dc);
                    let jitter = rng.random_range(-half_pump..half_pump);
                    PairDraw {
                        time,
                        signal_freq,
                        idler_freq: -signal_freq + jitter,
                        delay: delay.sample(&mut rng, tau),
                    }
                })
                .collect()
        })
        .collect();

    let total: usize = per_shard.iter().map(Vec::len).sum();
    let mut events = Vec::with_capacity(2 * total);
    let mut pair_id = 0u64;
    for shard in per_shard {
        for p in shard {
            events.push(PhotonEvent {
                time: p.time,
                freq_offset: p.signal_freq,
                channel: Channel::Signal,
                pair_id,
            });
            events.push(PhotonEvent {
                time: p.time + p.delay,
                freq_offset: p.idler_freq,
                channel: Channel::Idler,
                pair_id,
            });
            pair_id += 1;
        }
    }
    events.par_sort_unstable_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.pair_id.cmp(&b.pair_id))
            .then(a.channel.cmp(&b.channel))
    });

    Ok(EventStream {
        events,
        config: *config,
        operating_point: op,
        seed,
        duration,
        delay,
    })
}

/// Independent Bernoulli thinning of every photon with survival probability
/// `t`.
pub fn attenuate_stream(stream: &EventStream, t: f64, seed: u64) -> Result<EventStream> {
    ensure_param((0.0..=1.0).contains(&t), "t", t, "must lie in [0, 1]")?;
    let substream = Substream::new(seed, Stage::Attenuation);
    let kept: Vec<Vec<PhotonEvent>> = stream
        .events
        .par_chunks(EVENT_SHARD)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = substream.shard(c as u64);
            chunk
                .iter()
                .filter(|_| rng.random::<f64>() < t)
                .copied()
                .collect()
        })
        .collect();
    Ok(EventStream {
        events: kept.concat(),
        ..stream.clone_header()
    })
}

impl EventStream {
    fn clone_header(&self) -> Self {
        Self {
            events: Vec::new(),
            config: self.config,
            operating_point: self.operating_point,
            seed: self.seed,
            duration: self.duration,
            delay: self.delay,
        }
    }
}

/// How an accidental coincidence's sum frequency is tested against the
/// up-conversion acceptance band.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AcceptanceMode {
    /// Accept with the closed-form probability [`accidental_acceptance`].
    #[default]
    Analytic,
    /// Accept iff the recorded photon frequencies sum into `±δ_uc/2`.
    Sampled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountOptions {
    pub conv_prob: f64,
    pub acceptance: AcceptanceMode,
    /// Bose enhancement `(1 + n)` of intact-pair conversion.
    pub stimulated: bool,
}

impl CountOptions {
    pub fn new(conv_prob: f64) -> Self {
        Self {
            conv_prob,
            acceptance: AcceptanceMode::default(),
            stimulated: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SfgCounts {
    pub correlated: u64,
    pub accidental: u64,
    pub correlated_coincidences: u64,
    pub accidental_coincidences: u64,
    /// `Σ conv_prob·P(accept)` over accidental coincidences.
    pub accidental_expected: f64,
    /// Fraction of intact pairs falling inside the coincidence window.
    pub capture_efficiency: f64,
}

impl SfgCounts {
    pub fn total(&self) -> u64 {
        self.correlated + self.accidental
    }

    /// Correlated counts corrected for intact pairs lost outside the window.
    pub fn corrected_correlated(&self) -> f64 {
        self.correlated as f64 / self.capture_efficiency
    }

    fn merge(mut self, other: Self) -> Self {
        self.correlated += other.correlated;
        self.accidental += other.accidental;
        self.correlated_coincidences += other.correlated_coincidences;
        self.accidental_coincidences += other.accidental_coincidences;
        self.accidental_expected += other.accidental_expected;
        self
    }
}

/// Probability that signal and idler photons from two different pairs sum to
/// within `±δ_uc/2` of the pump frequency.
///
/// The sum is `f_a − f_b + j` with `f_a, f_b` uniform over `[−Δ/2, Δ/2]` and
/// `j` uniform over `±δ_p/2`: a triangular density of half-width `Δ`
/// convolved with the pump jitter. For `δ_uc ≪ Δ` this is `≈ δ_uc/Δ`.
pub fn accidental_acceptance(config: &SpectralConfig) -> f64 {
    let d = config.dc_bandwidth;
    let a = config.uc_bandwidth / 2.0;
    let jitter = config.pump_bandwidth;
    // Antiderivative of the triangular CDF on [−d, d].
    let g = |x: f64| {
        if x <= -d {
            0.0
        } else if x <= 0.0 {
            (x + d).powi(3) / (6.0 * d * d)
        } else if x <= d {
            x + (d - x).powi(3) / (6.0 * d * d)
        } else {
            x
        }
    };
    let h = jitter / 2.0;
    let p = (g(a + h) - g(a - h) - g(-a + h) + g(-a - h)) / jitter;
    p.clamp(0.0, 1.0)
}

struct ScanPhoton {
    time: f64,
    freq: f64,
    pair_id: u64,
}

pub fn count_sfg(
    stream: &EventStream,
    config: &SpectralConfig,
    conv_prob: f64,
) -> Result<SfgCounts> {
    count_sfg_with(stream, config, &CountOptions::new(conv_prob))
}

pub fn count_sfg_with(
    stream: &EventStream,
    config: &SpectralConfig,
    options: &CountOptions,
) -> Result<SfgCounts> {
    config.validate()?;
    let conv = options.conv_prob;
    ensure_param(
        conv > 0.0 && conv <= 1.0,
        "conv_prob",
        conv,
        "must lie in (0, 1]",
    )?;
    let n = stream.operating_point.n;
    let pair_prob = if options.stimulated {
        conv * (1.0 + n)
    } else {
        conv
    };
    ensure_param(
        pair_prob <= 1.0,
        "conv_prob",
        conv,
        "conv_prob·(1+n) must not exceed 1",
    )?;

    let window = coincidence_window(config);
    let tau = pair_correlation_time(config);
    let capture_efficiency = stream.delay.capture_probability(tau, window);
    let acceptance = accidental_acceptance(config);
    let half_uc = config.uc_bandwidth / 2.0;

    let split = |channel: Channel| -> Vec<ScanPhoton> {
        stream
            .events
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| ScanPhoton {
                time: e.time,
                freq: e.freq_offset,
                pair_id: e.pair_id,
            })
            .collect()
    };
    let signals = split(Channel::Signal);
    let idlers = split(Channel::Idler);
    let substream = Substream::new(stream.seed, Stage::Conversion);

    let counts = signals
        .par_chunks(EVENT_SHARD)
        .enumerate()
        .map(|(c, chunk)| {
            let mut rng = substream.shard(c as u64);
            let mut out = SfgCounts::default();
            let mut lo = idlers.partition_point(|i| i.time < chunk[0].time - window);
            for s in chunk {
                while lo < idlers.len() && idlers[lo].time < s.time - window {
                    lo += 1;
                }
                for i in idlers[lo..]
                    .iter()
                    .take_while(|i| i.time <= s.time + window)
                {
                    let u: f64 = rng.random();
                    if i.pair_id == s.pair_id {
                        out.correlated_coincidences += 1;
                        if u < pair_prob {
                            out.correlated += 1;
                        }
                        continue;
                    }
                    out.accidental_coincidences += 1;
                    let v: f64 = rng.random();
                    let accepted = match options.acceptance {
                        AcceptanceMode::Analytic => {
                            out.accidental_expected += conv * acceptance;
                            v < acceptance
                        }
                        AcceptanceMode::Sampled => {
                            let hit = (s.freq + i.freq).abs() <= half_uc;
                            if hit {
                                out.accidental_expected += conv;
                            }
                            hit
                        }
                    };
                    if u < conv && accepted {
                        out.accidental += 1;
                    }
                }
            }
            out
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(SfgCounts::default(), SfgCounts::merge);

    Ok(SfgCounts {
        capture_efficiency,
        ..counts
    })
}
