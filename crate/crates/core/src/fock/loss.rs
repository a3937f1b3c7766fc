//! Linear loss as an exact Kraus sum.
//!
//! A beam splitter of power transmissivity `t` acting on one mode has Kraus
//! operators `E_l|k⟩ = √(C(k,l)·t^{k−l}·(1−t)^l)·|k−l⟩`, one per number of
//! lost photons `l ≤ cutoff`. Applying it to every signal and idler mode
//! produces one branch per loss pattern; branches are orthogonal in the
//! environment and are kept as a weighted list of pure states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Ensemble, FockBasis, MultimodeState};
use crate::error::{ensure_param, Result, SimError};

/// Upper bound on `branches × dim` held while expanding the Kraus sum.
pub const MAX_ENSEMBLE_AMPLITUDES: usize = 1 << 23;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossChannel {
    transmissivity: f64,
}

impl LossChannel {
    pub fn new(transmissivity: f64) -> Result<Self> {
        ensure_param(
            (0.0..=1.0).contains(&transmissivity),
            "transmissivity",
            transmissivity,
            "must lie in [0, 1]",
        )?;
        Ok(Self { transmissivity })
    }

    pub fn transmissivity(&self) -> f64 {
        self.transmissivity
    }
}

/// Mixed state as a weighted list of normalized pure states.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    num_pairs: usize,
    components: Vec<(f64, MultimodeState)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, MultimodeState)>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| SimError::StateMismatch("empty ensemble".into()))?;
        let num_pairs = first.1.num_pairs();
        let cutoff = first.1.cutoff();
        if components
            .iter()
            .any(|(w, s)| *w < 0.0 || s.num_pairs() != num_pairs || s.cutoff() != cutoff)
        {
            return Err(SimError::StateMismatch(
                "ensemble components must share a basis and have non-negative weights".into(),
            ));
        }
        Ok(Self {
            num_pairs,
            components,
        })
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|(w, _)| w).sum()
    }
}

impl Ensemble for MixedState {
    fn num_pairs(&self) -> usize {
        self.num_pairs
    }

    fn components(&self) -> Box<dyn Iterator<Item = (f64, &MultimodeState)> + '_> {
        Box::new(self.components.iter().map(|(w, s)| (*w, s)))
    }
}

fn binomial(k: usize, l: usize) -> f64 {
    (0..l).fold(1.0, |acc, i| acc * (k - i) as f64 / (i + 1) as f64)
}

fn kraus(basis: &FockBasis, src: &[Complex64], mode: usize, lost: usize, t: f64) -> Vec<Complex64> {
    let stride = basis.stride(mode);
    let mut out = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for (idx, amp) in src.iter().enumerate() {
        if amp.re == 0.0 && amp.im == 0.0 {
            continue;
        }
        let k = basis.occupation(idx, mode);
        if k < lost {
            continue;
        }
        let coeff =
            (binomial(k, lost) * t.powi((k - lost) as i32) * (1.0 - t).powi(lost as i32)).sqrt();
        if coeff != 0.0 {
            out[idx - lost * stride] += amp * coeff;
        }
    }
    out
}

/// Sends every signal and idler mode through `channel`.
pub fn apply_loss(state: &impl Ensemble, channel: LossChannel) -> Result<MixedState> {
    let t = channel.transmissivity;
    let mut out = Vec::new();
    for (weight, pure) in state.components() {
        let basis = pure.basis();
        let scale = weight.sqrt();
        let mut branches: Vec<Vec<Complex64>> =
            vec![pure.amplitudes().iter().map(|a| a * scale).collect()];
        for mode in 0..basis.num_modes() {
            let bound = branches
                .len()
                .saturating_mul(basis.cutoff() + 1)
                .saturating_mul(basis.dim());
            if bound > MAX_ENSEMBLE_AMPLITUDES {
                return Err(SimError::DimensionOverflow {
                    dim: bound,
                    limit: MAX_ENSEMBLE_AMPLITUDES,
                });
            }
            let mut next = Vec::with_capacity(branches.len());
            for branch in &branches {
                for lost in 0..=basis.cutoff() {
                    let b = kraus(basis, branch, mode, lost, t);
                    if b.iter().any(|a| a.re != 0.0 || a.im != 0.0) {
                        next.push(b);
                    }
                }
            }
            branches = next;
        }
        for amps in branches {
            let w: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            let inv = 1.0 / w.sqrt();
            let normalized = amps.into_iter().map(|a| a * inv).collect();
            let s = MultimodeState::from_amplitudes(
                basis.num_pairs(),
                basis.cutoff(),
                normalized,
                pure.pump_phase(),
            )?;
            out.push((w, s));
        }
    }
    MixedState::new(out)
}
