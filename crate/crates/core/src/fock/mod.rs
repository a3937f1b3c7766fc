//! Truncated multimode Fock-space engine.
//!
//! A state lives on `N` signal/idler mode pairs. Mode `2j` is the signal of
//! pair `j`, mode `2j + 1` its idler. Basis vectors are occupation tuples
//! `(k_0, k_1, …, k_{2N-1})` with every `k ≤ cutoff`, stored densely in
//! mixed-radix order with mode 0 varying fastest:
//! `index = Σ_m k_m·(cutoff+1)^m`.
//!
//! Two state shapes are available:
//!
//! - [`StateForm::PairSector`]: vacuum plus at most one excited mode pair,
//!   `M|0⟩ + Σ_j √p·e^{iθ}|1,1⟩_j` with `p = n/(1+n)` the single-pair
//!   excitation probability and `M = √(1 − N·p)`.
//! - [`StateForm::Product`]: `⊗_j Σ_k c_k |k,k⟩_j` with the two-mode squeezed
//!   (geometric) amplitudes `|c_k|² = n^k/(1+n)^{k+1}`, truncated at the
//!   cutoff and renormalized.
//!
//! The excitation phase of one pair is `θ = pump_phase + π/2`; a `k`-pair
//! term carries `k·θ`.

mod loss;
mod oracle;

pub use loss::{apply_loss, LossChannel, MixedState};
pub use oracle::{oracle_expectation, Monomial, NormalOrderedOperator, ORACLE_MAX_DIM};

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_param, Result, SimError};
use crate::rng::{Stage, Substream};

/// Largest dense state the engine will allocate.
pub const MAX_STATE_DIM: usize = 1 << 22;

pub fn signal_mode(pair: usize) -> usize {
    2 * pair
}

pub fn idler_mode(pair: usize) -> usize {
    2 * pair + 1
}

/// Mixed-radix layout of the truncated basis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    num_pairs: usize,
    cutoff: usize,
    dim: usize,
    strides: Vec<usize>,
}

impl FockBasis {
    pub fn new(num_pairs: usize, cutoff: usize) -> Result<Self> {
        if num_pairs == 0 {
            return Err(SimError::InvalidParameter {
                name: "num_pairs",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        if cutoff == 0 {
            return Err(SimError::InvalidParameter {
                name: "cutoff",
                value: 0.0,
                reason: "must be >= 1",
            });
        }
        let radix = cutoff + 1;
        let modes = 2 * num_pairs;
        let mut strides = Vec::with_capacity(modes);
        let mut dim: usize = 1;
        for _ in 0..modes {
            strides.push(dim);
            dim = dim
                .checked_mul(radix)
                .filter(|&d| d <= MAX_STATE_DIM)
                .ok_or(SimError::DimensionOverflow {
                    dim: usize::MAX,
                    limit: MAX_STATE_DIM,
                })?;
        }
        Ok(Self {
            num_pairs,
            cutoff,
            dim,
            strides,
        })
    }

    pub fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    pub fn num_modes(&self) -> usize {
        2 * self.num_pairs
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.strides[mode]
    }

    #[inline]
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.strides[mode]) % (self.cutoff + 1)
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        if occupations.len() != self.num_modes() || occupations.iter().any(|&k| k > self.cutoff) {
            return None;
        }
        Some(
            occupations
                .iter()
                .zip(&self.strides)
                .map(|(k, s)| k * s)
                .sum(),
        )
    }

    /// Applies the annihilation operator of `mode` to `src`.
    pub(crate) fn lower(&self, src: &[Complex64], mode: usize) -> Vec<Complex64> {
        let stride = self.strides[mode];
        let mut out = vec![Complex64::new(0.0, 0.0); self.dim];
        for (idx, amp) in src.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let k = self.occupation(idx, mode);
            if k > 0 {
                out[idx - stride] += amp * (k as f64).sqrt();
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateForm {
    PairSector,
    Product,
}

/// Pure state on the truncated multimode basis.
#[derive(Clone, Debug, PartialEq)]
pub struct MultimodeState {
    basis: FockBasis,
    amplitudes: Vec<Complex64>,
    pump_phase: f64,
    truncation_deficit: f64,
}

impl MultimodeState {
    /// Wraps raw amplitudes. The amplitudes are taken as given; the reported
    /// truncation deficit is `max(0, 1 − ‖ψ‖²)`.
    pub fn from_amplitudes(
        num_pairs: usize,
        cutoff: usize,
        amplitudes: Vec<Complex64>,
        pump_phase: f64,
    ) -> Result<Self> {
        let basis = FockBasis::new(num_pairs, cutoff)?;
        if amplitudes.len() != basis.dim() {
            return Err(SimError::StateMismatch(format!(
                "expected {} amplitudes, got {}",
                basis.dim(),
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        Ok(Self {
            basis,
            amplitudes,
            pump_phase,
            truncation_deficit: (1.0 - norm).max(0.0),
        })
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn num_pairs(&self) -> usize {
        self.basis.num_pairs
    }

    pub fn cutoff(&self) -> usize {
        self.basis.cutoff
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, occupations: &[usize]) -> Option<Complex64> {
        self.basis.index_of(occupations).map(|i| self.amplitudes[i])
    }

    pub fn vacuum_amplitude(&self) -> Complex64 {
        self.amplitudes[0]
    }

    pub fn pump_phase(&self) -> f64 {
        self.pump_phase
    }

    /// Squared norm dropped by truncation before renormalization.
    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// True if every populated basis vector has `k_s = k_i` on each pair.
    pub fn is_pair_symmetric(&self) -> bool {
        self.amplitudes.iter().enumerate().all(|(idx, a)| {
            a.norm_sqr() == 0.0
                || (0..self.num_pairs()).all(|j| {
                    self.basis.occupation(idx, signal_mode(j))
                        == self.basis.occupation(idx, idler_mode(j))
                })
        })
    }

    /// Rotates the signal mode of pair `j` by `phases[j]`.
    pub fn with_pair_phases(&self, phases: &[f64]) -> Result<Self> {
        if phases.len() != self.num_pairs() {
            return Err(SimError::StateMismatch(format!(
                "expected {} phases, got {}",
                self.num_pairs(),
                phases.len()
            )));
        }
        let mut out = self.clone();
        for (idx, amp) in out.amplitudes.iter_mut().enumerate() {
            let phase: f64 = phases
                .iter()
                .enumerate()
                .map(|(j, phi)| phi * self.basis.occupation(idx, signal_mode(j)) as f64)
                .sum();
            *amp *= Complex64::from_polar(1.0, phase);
        }
        Ok(out)
    }
}

/// Single-mode-pair probability of `k` pairs in the untruncated two-mode
/// squeezed state of mean occupation `n`.
pub fn thermal_pair_probability(n: f64, k: usize) -> f64 {
    let lambda = n / (1.0 + n);
    (1.0 - lambda) * lambda.powi(k as i32)
}

/// Builds the down-converted state. Cutoff 1 gives the single-pair-sector
/// state; higher cutoffs give the truncated product of two-mode squeezed
/// states.
pub fn build_state(
    n: f64,
    num_pairs: usize,
    cutoff: usize,
    pump_phase: f64,
) -> Result<MultimodeState> {
    let form = if cutoff == 1 {
        StateForm::PairSector
    } else {
        StateForm::Product
    };
    build_state_with(form, n, num_pairs, cutoff, pump_phase)
}

pub fn build_state_with(
    form: StateForm,
    n: f64,
    num_pairs: usize,
    cutoff: usize,
    pump_phase: f64,
) -> Result<MultimodeState> {
    ensure_param(n.is_finite() && n >= 0.0, "n", n, "must be finite and >= 0")?;
    let basis = FockBasis::new(num_pairs, cutoff)?;
    if cutoff <= 2 && n > 0.3 {
        log::warn!("n = {n} at cutoff {cutoff}: truncation error is no longer small");
    }
    let one_pair = Complex64::from_polar(1.0, pump_phase + FRAC_PI_2);
    let lambda = n / (1.0 + n);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
    let pair_stride = |j: usize| basis.stride(signal_mode(j)) + basis.stride(idler_mode(j));

    let truncation_deficit = match form {
        StateForm::PairSector => {
            let p = lambda;
            let vacuum = 1.0 - num_pairs as f64 * p;
            if vacuum < 0.0 {
                return Err(SimError::InvalidParameter {
                    name: "n",
                    value: n,
                    reason:
                        "num_pairs·n/(1+n) exceeds 1; the single-pair sector cannot be normalized",
                });
            }
            amplitudes[0] = Complex64::new(vacuum.sqrt(), 0.0);
            for j in 0..num_pairs {
                amplitudes[pair_stride(j)] = one_pair * p.sqrt();
            }
            // Weight the full product state puts on two or more pairs.
            1.0 - (1.0 - lambda).powi(num_pairs as i32) * (1.0 + num_pairs as f64 * lambda)
        }
        StateForm::Product => {
            let per_pair: Vec<Complex64> = (0..=cutoff)
                .map(|k| one_pair.powi(k as i32) * thermal_pair_probability(n, k).sqrt())
                .collect();
            let kept: f64 = 1.0 - lambda.powi(cutoff as i32 + 1);
            let deficit = 1.0 - kept.powi(num_pairs as i32);
            let renorm = 1.0 / (1.0 - deficit).sqrt();
            // Walk every pair-symmetric tuple (k_0, …, k_{N-1}).
            let mut ks = vec![0usize; num_pairs];
            loop {
                let mut idx = 0;
                let mut amp = Complex64::new(renorm, 0.0);
                for (j, &k) in ks.iter().enumerate() {
                    idx += k * pair_stride(j);
                    amp *= per_pair[k];
                }
                amplitudes[idx] = amp;
                let mut j = 0;
                while j < num_pairs {
                    ks[j] += 1;
                    if ks[j] <= cutoff {
                        break;
                    }
                    ks[j] = 0;
                    j += 1;
                }
                if j == num_pairs {
                    break;
                }
            }
            deficit
        }
    };

    Ok(MultimodeState {
        basis,
        amplitudes,
        pump_phase,
        truncation_deficit,
    })
}

/// Weighted pure-state components of a (possibly mixed) state.
pub trait Ensemble {
    fn num_pairs(&self) -> usize;
    fn components(&self) -> Box<dyn Iterator<Item = (f64, &MultimodeState)> + '_>;
}

impl Ensemble for MultimodeState {
    fn num_pairs(&self) -> usize {
        self.basis.num_pairs
    }

    fn components(&self) -> Box<dyn Iterator<Item = (f64, &MultimodeState)> + '_> {
        Box::new(std::iter::once((1.0, self)))
    }
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

fn pure_correlated(state: &MultimodeState) -> f64 {
    let basis = &state.basis;
    let mut total = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for j in 0..basis.num_pairs {
        let lowered = basis.lower(
            &basis.lower(&state.amplitudes, idler_mode(j)),
            signal_mode(j),
        );
        for (t, l) in total.iter_mut().zip(&lowered) {
            *t += l;
        }
    }
    norm_sqr(&total)
}

fn pure_uncorrelated(state: &MultimodeState) -> f64 {
    let basis = &state.basis;
    let mut rate = 0.0;
    for j in 0..basis.num_pairs {
        let signal_lowered = basis.lower(&state.amplitudes, signal_mode(j));
        for jp in (0..basis.num_pairs).filter(|&jp| jp != j) {
            rate += norm_sqr(&basis.lower(&signal_lowered, idler_mode(jp)));
        }
    }
    rate
}

/// `⟨A†A⟩` with `A = Σ_j a_{s_j} a_{i_j}`, the sum-frequency operator into
/// the pump mode. In units of `α·δ_p`.
pub fn sfg_rate_correlated(state: &impl Ensemble) -> f64 {
    state
        .components()
        .map(|(w, s)| w * pure_correlated(s))
        .sum()
}

/// `Σ_{j≠j'} ⟨a†_{s_j} a†_{i_j'} a_{s_j} a_{i_j'}⟩`: cross-pair up-conversion
/// events, each landing in its own output frequency bin.
pub fn sfg_rate_uncorrelated(state: &impl Ensemble) -> Result<f64> {
    if state.num_pairs() < 2 {
        return Err(SimError::Unsupported(
            "uncorrelated rate needs at least 2 mode pairs".into(),
        ));
    }
    Ok(state
        .components()
        .map(|(w, s)| w * pure_uncorrelated(s))
        .sum())
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        Self {
            mean,
            std_error: (var / k).sqrt(),
            samples: values.len(),
        }
    }

    pub fn within_sigma(&self, expected: f64, sigmas: f64) -> bool {
        let floor = 1e-12 * expected.abs();
        (self.mean - expected).abs() <= sigmas * self.std_error + floor
    }
}

/// Correlated rate averaged over independently randomized pair phases: the
/// incoherent baseline.
pub fn phase_ensemble_rate(state: &MultimodeState, samples: usize, seed: u64) -> Result<Estimate> {
    ensure_param(
        samples >= 2,
        "samples",
        samples as f64,
        "need at least 2 samples",
    )?;
    let mut rng = Substream::new(seed, Stage::PhaseEnsemble).rng();
    let mut values = Vec::with_capacity(samples);
    let mut phases = vec![0.0; state.num_pairs()];
    for _ in 0..samples {
        for p in phases.iter_mut() {
            *p = rng.random_range(0.0..std::f64::consts::TAU);
        }
        values.push(sfg_rate_correlated(&state.with_pair_phases(&phases)?));
    }
    Ok(Estimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn vacuum_at_zero_density() {
        for (pairs, cutoff) in [(1, 1), (2, 2), (3, 1)] {
            let s = build_state(0.0, pairs, cutoff, 0.3).unwrap();
            assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
            assert_eq!(s.vacuum_amplitude(), c(1.0, 0.0));
            assert!(s.amplitudes()[1..].iter().all(|a| a.norm_sqr() == 0.0));
            assert_eq!(sfg_rate_correlated(&s), 0.0);
        }
    }

    #[test]
    fn two_term_state_amplitudes() {
        let n = 0.04;
        let phase = 0.7;
        let s = build_state(n, 1, 1, phase).unwrap();
        let m = 1.0 / 1.04f64.sqrt();
        assert!((s.vacuum_amplitude() - c(m, 0.0)).norm() < 1e-15);
        let pair = s.amplitude(&[1, 1]).unwrap();
        let expected = Complex64::from_polar(n.sqrt() / 1.04f64.sqrt(), phase + FRAC_PI_2);
        assert!((pair - expected).norm() < 1e-15);
        assert_eq!(s.amplitude(&[1, 0]).unwrap(), c(0.0, 0.0));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_state_matches_geometric_amplitudes() {
        let n: f64 = 0.1;
        let s = build_state(n, 2, 2, 0.0).unwrap();
        assert!(s.truncation_deficit() < n * n);
        assert!(s.truncation_deficit() > 0.0);
        let kept = 1.0 - s.truncation_deficit();
        // Independent closed form: c_k = i^k √(n^k/(1+n)^{k+1}).
        let ck =
            |k: u32| c(0.0, 1.0).powu(k) * (n.powi(k as i32) / (1.0 + n).powi(k as i32 + 1)).sqrt();
        for k0 in 0..=2usize {
            for k1 in 0..=2usize {
                let expected = ck(k0 as u32) * ck(k1 as u32) / kept.sqrt();
                let got = s.amplitude(&[k0, k0, k1, k1]).unwrap();
                assert!((got - expected).norm() < 1e-14, "{k0},{k1}");
            }
        }
        assert!(s.amplitude(&[1, 0, 0, 0]).unwrap().norm() == 0.0);
        assert!(s.is_pair_symmetric());
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pair_sector_rejects_overfull_sector() {
        assert!(build_state_with(StateForm::PairSector, 0.5, 4, 1, 0.0).is_err());
        assert!(build_state_with(StateForm::PairSector, 0.3, 3, 1, 0.0).is_ok());
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_state(-0.1, 1, 1, 0.0).is_err());
        assert!(build_state(0.1, 1, 0, 0.0).is_err());
        assert!(build_state(0.1, 0, 1, 0.0).is_err());
        assert!(matches!(
            build_state(0.1, 12, 2, 0.0),
            Err(SimError::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn single_pair_rate_is_n_over_one_plus_n() {
        for n in [1e-4, 0.04, 0.2] {
            let s = build_state(n, 1, 1, 0.0).unwrap();
            assert!((sfg_rate_correlated(&s) - n / (1.0 + n)).abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_gain_is_n_squared() {
        let n = 0.05;
        let single = sfg_rate_correlated(&build_state(n, 1, 1, 0.0).unwrap());
        for pairs in 1..=4 {
            let rate = sfg_rate_correlated(&build_state(n, pairs, 1, 0.0).unwrap());
            let gain = rate / single;
            assert!(
                (gain - (pairs * pairs) as f64).abs() < 1e-12,
                "{pairs}: {gain}"
            );
        }
    }

    #[test]
    fn decohered_gain_is_n() {
        let n = 0.05;
        let single = sfg_rate_correlated(&build_state(n, 1, 1, 0.0).unwrap());
        for pairs in 1..=4 {
            let s = build_state(n, pairs, 1, 0.0).unwrap();
            let est = phase_ensemble_rate(&s, 10_000, 11).unwrap();
            let expected = pairs as f64 * single;
            assert!(
                est.within_sigma(expected, 3.0),
                "{pairs}: {est:?} vs {expected}"
            );
        }
    }

    #[test]
    fn linear_at_small_density() {
        let ratios: Vec<f64> = [1e-4, 1e-3, 1e-2]
            .iter()
            .map(|&n| sfg_rate_correlated(&build_state(n, 2, 1, 0.0).unwrap()) / n)
            .collect();
        let spread = ratios.iter().cloned().fold(f64::MIN, f64::max)
            / ratios.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread - 1.0 < 0.015, "{ratios:?}");
    }

    #[test]
    fn uncorrelated_rates() {
        let vacuum = build_state(0.0, 2, 1, 0.0).unwrap();
        assert_eq!(sfg_rate_uncorrelated(&vacuum).unwrap(), 0.0);
        assert!(sfg_rate_uncorrelated(&build_state(0.1, 1, 2, 0.0).unwrap()).is_err());

        let n: f64 = 0.01;
        let excited = |n: f64| {
            let lambda = n / (1.0 + n);
            lambda / (1.0 + lambda)
        };
        let two = build_state_with(StateForm::Product, n, 2, 1, 0.0).unwrap();
        let r2 = sfg_rate_uncorrelated(&two).unwrap();
        assert!((r2 - 2.0 * excited(n).powi(2)).abs() < 1e-15);
        assert!(r2 / (n * n) > 1.9 && r2 / (n * n) < 2.0);
        for pairs in 2..=4 {
            let s = build_state_with(StateForm::Product, n, pairs, 1, 0.0).unwrap();
            let ratio = sfg_rate_uncorrelated(&s).unwrap() / r2;
            let expected = (pairs * (pairs - 1)) as f64 / 2.0;
            assert!((ratio - expected).abs() < 1e-12);
        }
        // No cross-pair events in the single-pair sector.
        let sector = build_state(n, 3, 1, 0.0).unwrap();
        assert_eq!(sfg_rate_uncorrelated(&sector).unwrap(), 0.0);
    }

    #[test]
    fn deficit_decreases_with_cutoff() {
        let deficits: Vec<f64> = (1..=6)
            .map(|k| {
                build_state_with(StateForm::Product, 0.2, 1, k, 0.0)
                    .unwrap()
                    .truncation_deficit()
            })
            .collect();
        assert!(deficits.windows(2).all(|w| w[1] < w[0]), "{deficits:?}");
        let multi: Vec<f64> = (1..=4)
            .map(|k| {
                build_state_with(StateForm::Product, 0.2, 2, k, 0.0)
                    .unwrap()
                    .truncation_deficit()
            })
            .collect();
        assert!(multi.windows(2).all(|w| w[1] < w[0]), "{multi:?}");
    }

    #[test]
    fn pair_phase_rotation_needs_one_phase_per_pair() {
        let s = build_state(0.1, 2, 1, 0.0).unwrap();
        assert!(s.with_pair_phases(&[0.1]).is_err());
    }

    proptest! {
        #[test]
        fn normalized_after_truncation(n in 0.0f64..0.3, pairs in 1usize..=3, cutoff in 1usize..=3) {
            prop_assume!(pairs < 3 || cutoff < 3);
            let s = build_state(n, pairs, cutoff, 0.0).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            prop_assert!(s.is_pair_symmetric());
            prop_assert!(s.truncation_deficit() >= 0.0 && s.truncation_deficit() < 1.0);
        }

        #[test]
        fn pump_phase_covariance(n in 1e-3f64..0.3, theta in -6.3f64..6.3, phase in -3.2f64..3.2, pairs in 1usize..=3) {
            for cutoff in [1usize, 2] {
                let a = build_state(n, pairs, cutoff, phase).unwrap();
                let b = build_state(n, pairs, cutoff, phase + theta).unwrap();
                let rot = Complex64::from_polar(1.0, theta);
                let mut occ = vec![0usize; 2 * pairs];
                occ[0] = 1;
                occ[1] = 1;
                let ratio = b.amplitude(&occ).unwrap() / a.amplitude(&occ).unwrap();
                prop_assert!((ratio - rot).norm() < 1e-12);
                let (ra, rb) = (sfg_rate_correlated(&a), sfg_rate_correlated(&b));
                prop_assert!((ra - rb).abs() <= 1e-12 * ra.max(1e-300));
            }
        }
    }
}
