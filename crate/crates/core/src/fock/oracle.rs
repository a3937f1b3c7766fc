//! Brute-force expectation values of normally ordered operators.
//!
//! Works directly on occupation tuples held in hash maps and never touches
//! the stride arithmetic used by the rate engine, so it can serve as ground
//! truth for it.

use std::collections::HashMap;

use num_complex::Complex64;

use super::{idler_mode, signal_mode, Ensemble, MultimodeState};
use crate::error::{Result, SimError};

pub const ORACLE_MAX_DIM: usize = 100_000;

/// `coeff · a†_{c_1} … a†_{c_p} a_{d_1} … a_{d_q}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coeff: Complex64,
    pub creations: Vec<usize>,
    pub annihilations: Vec<usize>,
}

impl Monomial {
    pub fn new(creations: Vec<usize>, annihilations: Vec<usize>) -> Self {
        Self {
            coeff: Complex64::new(1.0, 0.0),
            creations,
            annihilations,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormalOrderedOperator {
    pub terms: Vec<Monomial>,
}

impl NormalOrderedOperator {
    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        Self { terms }
    }

    /// `a†_m a_m`.
    pub fn number(mode: usize) -> Self {
        Self::from_terms(vec![Monomial::new(vec![mode], vec![mode])])
    }

    /// `a†_a a†_b a_a a_b`, equal to `n_a n_b` for distinct modes.
    pub fn number_correlation(a: usize, b: usize) -> Self {
        Self::from_terms(vec![Monomial::new(vec![a, b], vec![a, b])])
    }

    /// `A†A = Σ_{j,j'} a†_{s_j} a†_{i_j} a_{s_j'} a_{i_j'}`.
    pub fn sfg_correlated(num_pairs: usize) -> Self {
        let mut terms = Vec::with_capacity(num_pairs * num_pairs);
        for j in 0..num_pairs {
            for jp in 0..num_pairs {
                terms.push(Monomial::new(
                    vec![signal_mode(j), idler_mode(j)],
                    vec![signal_mode(jp), idler_mode(jp)],
                ));
            }
        }
        Self::from_terms(terms)
    }

    /// `Σ_{j≠j'} a†_{s_j} a†_{i_j'} a_{s_j} a_{i_j'}`.
    pub fn sfg_uncorrelated(num_pairs: usize) -> Self {
        let mut terms = Vec::new();
        for j in 0..num_pairs {
            for jp in (0..num_pairs).filter(|&jp| jp != j) {
                terms.push(Monomial::new(
                    vec![signal_mode(j), idler_mode(jp)],
                    vec![signal_mode(j), idler_mode(jp)],
                ));
            }
        }
        Self::from_terms(terms)
    }

    fn max_mode(&self) -> Option<usize> {
        self.terms
            .iter()
            .flat_map(|t| t.creations.iter().chain(&t.annihilations))
            .copied()
            .max()
    }
}

type Sparse = HashMap<Vec<u8>, Complex64>;

/// Every occupation tuple, mode 0 varying fastest.
fn enumerate_basis(modes: usize, cutoff: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut tuple = vec![0u8; modes];
    loop {
        out.push(tuple.clone());
        let mut m = 0;
        while m < modes {
            if (tuple[m] as usize) < cutoff {
                tuple[m] += 1;
                break;
            }
            tuple[m] = 0;
            m += 1;
        }
        if m == modes {
            return out;
        }
    }
}

fn to_sparse(state: &MultimodeState, tuples: &[Vec<u8>]) -> Sparse {
    tuples
        .iter()
        .zip(state.amplitudes())
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(t, a)| (t.clone(), *a))
        .collect()
}

fn annihilate(state: &Sparse, mode: usize) -> Sparse {
    let mut out = Sparse::with_capacity(state.len());
    for (tuple, amp) in state {
        let k = tuple[mode];
        if k == 0 {
            continue;
        }
        let mut lowered = tuple.clone();
        lowered[mode] = k - 1;
        *out.entry(lowered).or_default() += amp * (k as f64).sqrt();
    }
    out
}

fn apply_all(state: &Sparse, modes: &[usize]) -> Sparse {
    modes.iter().fold(state.clone(), |s, &m| annihilate(&s, m))
}

fn inner(bra: &Sparse, ket: &Sparse) -> Complex64 {
    bra.iter()
        .filter_map(|(t, b)| ket.get(t).map(|k| b.conj() * k))
        .sum()
}

/// `Σ_components w·⟨ψ|O|ψ⟩`, evaluated as `⟨(Π a_c)ψ | (Π a_d)ψ⟩` per term.
pub fn oracle_expectation(state: &impl Ensemble, op: &NormalOrderedOperator) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    let mut basis_cache: Option<(usize, usize, Vec<Vec<u8>>)> = None;
    for (weight, pure) in state.components() {
        let modes = 2 * pure.num_pairs();
        let cutoff = pure.cutoff();
        let dim = (cutoff + 1).checked_pow(modes as u32).unwrap_or(usize::MAX);
        if dim > ORACLE_MAX_DIM {
            return Err(SimError::DimensionOverflow {
                dim,
                limit: ORACLE_MAX_DIM,
            });
        }
        if let Some(m) = op.max_mode() {
            if m >= modes {
                return Err(SimError::StateMismatch(format!(
                    "operator acts on mode {m} but the state has {modes} modes"
                )));
            }
        }
        let stale = !matches!(&basis_cache, Some((m, k, _)) if *m == modes && *k == cutoff);
        if stale {
            basis_cache = Some((modes, cutoff, enumerate_basis(modes, cutoff)));
        }
        let tuples = &basis_cache.as_ref().expect("cache filled above").2;
        let psi = to_sparse(pure, tuples);
        for term in &op.terms {
            let bra = apply_all(&psi, &term.creations);
            let ket = apply_all(&psi, &term.annihilations);
            total += term.coeff * inner(&bra, &ket) * weight;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::thermal_pair_probability;

    fn single_mode_fock(k: usize, cutoff: usize) -> MultimodeState {
        // One pair = two modes; put `k` photons in mode 0 only.
        let dim = (cutoff + 1) * (cutoff + 1);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[k] = Complex64::new(1.0, 0.0);
        MultimodeState::from_amplitudes(1, cutoff, amps, 0.0).unwrap()
    }

    #[test]
    fn number_operator_on_fock_states() {
        let one = single_mode_fock(1, 2);
        let n = oracle_expectation(&one, &NormalOrderedOperator::number(0)).unwrap();
        assert!((n - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let two = single_mode_fock(2, 3);
        let n2 = oracle_expectation(&two, &NormalOrderedOperator::number(0)).unwrap();
        assert!((n2.re - 2.0).abs() < 1e-15);
        let idler = oracle_expectation(&two, &NormalOrderedOperator::number(1)).unwrap();
        assert_eq!(idler.re, 0.0);
    }

    #[test]
    fn tuple_enumeration_is_mode_zero_fastest() {
        let tuples = enumerate_basis(2, 2);
        assert_eq!(tuples.len(), 9);
        assert_eq!(tuples[1], vec![1, 0]);
        assert_eq!(tuples[3], vec![0, 1]);
    }

    #[test]
    fn truncated_two_mode_squeezed_correlation_matches_partial_sum() {
        let n = 0.1;
        let cutoff = 6;
        let dim = (cutoff + 1) * (cutoff + 1);
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        let mut partial = 0.0;
        for k in 0..=cutoff {
            let p = thermal_pair_probability(n, k);
            amps[k + k * (cutoff + 1)] = Complex64::new(p.sqrt(), 0.0);
            partial += (k * k) as f64 * p;
        }
        let s = MultimodeState::from_amplitudes(1, cutoff, amps, 0.0).unwrap();
        let got = oracle_expectation(&s, &NormalOrderedOperator::number_correlation(0, 1)).unwrap();
        assert!((got.re - partial).abs() < 1e-15);
        assert!(got.im.abs() < 1e-15);
    }

    #[test]
    fn rejects_large_or_mismatched_inputs() {
        let s = crate::fock::build_state(0.1, 4, 2, 0.0).unwrap();
        assert!(oracle_expectation(&s, &NormalOrderedOperator::number(0)).is_ok());
        let big = crate::fock::build_state(0.1, 3, 6, 0.0).unwrap();
        assert!(matches!(
            oracle_expectation(&big, &NormalOrderedOperator::number(0)),
            Err(SimError::DimensionOverflow { .. })
        ));
        let small = crate::fock::build_state(0.1, 1, 1, 0.0).unwrap();
        assert!(matches!(
            oracle_expectation(&small, &NormalOrderedOperator::number(5)),
            Err(SimError::StateMismatch(_))
        ));
    }
}
