//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use mpsqd_core::fcidump::FermionHamiltonian;
use mpsqd_core::fermion::Determinant;
use nalgebra::{DMatrix, SymmetricEigen};

/// How spin orbitals are numbered as fermionic modes.
#[derive(Clone, Copy, Debug)]
pub enum ModeOrder {
    /// α0 … α(M-1), β0 … β(M-1).
    Blocked,
    /// α0, β0, α1, β1, …
    Interleaved,
}

impl ModeOrder {
    pub fn mode(self, p: usize, spin: usize, norb: usize) -> usize {
        match self {
            ModeOrder::Blocked => p + spin * norb,
            ModeOrder::Interleaved => 2 * p + spin,
        }
    }
}

/// Fock state as a bitmask over modes; `None` is the zero vector.
fn annihilate(state: u64, mode: usize) -> Option<(u64, f64)> {
    if state >> mode & 1 == 0 {
        return None;
    }
    let sign = if (state & ((1 << mode) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state & !(1 << mode), sign))
}

fn create(state: u64, mode: usize) -> Option<(u64, f64)> {
    if state >> mode & 1 == 1 {
        return None;
    }
    let sign = if (state & ((1 << mode) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((state | (1 << mode), sign))
}

/// Applies `ops` right to left; `(true, k)` is a creator, `(false, k)` an annihilator.
fn apply(ops: &[(bool, usize)], state: u64) -> Option<(u64, f64)> {
    let mut s = state;
    let mut sign = 1.0;
    for &(dagger, mode) in ops.iter().rev() {
        let (next, f) = if dagger { create(s, mode)? } else { annihilate(s, mode)? };
        s = next;
        sign *= f;
    }
    Some((s, sign))
}

/// `<bra| H |ket>` for
/// `H = E_core + Σ h_pq a†_pσ a_qσ + ½ Σ (pq|rs) a†_pσ a†_rτ a_sτ a_qσ`,
/// summing every term of the operator explicitly.
pub fn fock_element(ham: &FermionHamiltonian, order: ModeOrder, bra: u64, ket: u64) -> f64 {
    let m = ham.norb();
    let mut value = if bra == ket { ham.e_core() } else { 0.0 };
    for sigma in 0..2 {
        for p in 0..m {
            for q in 0..m {
                let ops = [(true, order.mode(p, sigma, m)), (false, order.mode(q, sigma, m))];
                if let Some((s, f)) = apply(&ops, ket) {
                    if s == bra {
                        value += ham.h(p, q) * f;
                    }
                }
            }
        }
    }
    for sigma in 0..2 {
        for tau in 0..2 {
            for p in 0..m {
                for q in 0..m {
                    for r in 0..m {
                        for s_ in 0..m {
                            let g = ham.g(p, q, r, s_);
                            if g == 0.0 {
                                continue;
                            }
                            let ops = [
                                (true, order.mode(p, sigma, m)),
                                (true, order.mode(r, tau, m)),
                                (false, order.mode(s_, tau, m)),
                                (false, order.mode(q, sigma, m)),
                            ];
                            if let Some((s, f)) = apply(&ops, ket) {
                                if s == bra {
                                    value += 0.5 * g * f;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    value
}

pub fn fock_state(det: &Determinant, order: ModeOrder, norb: usize) -> u64 {
    let mut state = 0;
    for p in 0..norb {
        if det.alpha >> p & 1 == 1 {
            state |= 1 << order.mode(p, 0, norb);
        }
        if det.beta >> p & 1 == 1 {
            state |= 1 << order.mode(p, 1, norb);
        }
    }
    state
}

/// Every Fock state with the given per-spin electron counts, in ascending mask order.
pub fn sector_states(norb: usize, n_alpha: usize, n_beta: usize, order: ModeOrder) -> Vec<u64> {
    (0u64..1 << (2 * norb))
        .filter(|&s| {
            let count = |spin| (0..norb).filter(|&p| s >> order.mode(p, spin, norb) & 1 == 1).count();
            count(0) == n_alpha && count(1) == n_beta
        })
        .collect()
}

pub fn fock_matrix(ham: &FermionHamiltonian, order: ModeOrder, states: &[u64]) -> DMatrix<f64> {
    DMatrix::from_fn(states.len(), states.len(), |i, j| fock_element(ham, order, states[i], states[j]))
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    values
}

/// Quantile by the `1 + (n - 1) q` position rule on a sorted copy.
pub fn oracle_quantile(values: &[f64], q: f64) -> f64 {
    let mut x = values.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 1.0 + (x.len() as f64 - 1.0) * q;
    let j = pos.floor() as usize;
    let g = pos - j as f64;
    if j >= x.len() {
        return x[x.len() - 1];
    }
    x[j - 1] * (1.0 - g) + x[j] * g
}

/// Welford running mean and sample variance.
pub fn oracle_mean_std(values: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let std = if values.len() > 1 { (m2 / (values.len() - 1) as f64).sqrt() } else { 0.0 };
    (mean, std)
}

/// Exact ground energy of the open Hubbard dimer at half filling.
pub fn hubbard_dimer_energy(u: f64, t: f64) -> f64 {
    (u - (u * u + 16.0 * t * t).sqrt()) / 2.0
}
