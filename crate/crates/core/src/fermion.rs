//! Slater determinants, their bitstring encoding, and Hamiltonian matrix elements.
//!
//! A determinant over `M` spatial orbitals is a pair of occupation masks. In the
//! bitstring form, logical bits `[0, M)` hold the α mask and `[M, 2M)` the β
//! mask; the leftmost printed character is logical bit `2M-1`.
//!
//! Fermionic signs use the spin-orbital order `α0 < α1 < … < β0 < β1 < …`.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcidump::FermionHamiltonian;

/// Subspaces smaller than this are stored densely.
pub const DENSE_STORAGE_BELOW: usize = 64;
/// Above this size, off-diagonal couplings are found by excitation lookup
/// instead of scanning all pairs.
const PAIR_SCAN_LIMIT: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FermionError {
    #[error("bit {bit} is outside the {norb} spatial orbitals")]
    Range { bit: usize, norb: usize },
    #[error("bitstring has length {got}, expected {expected}")]
    Length { got: usize, expected: usize },
    #[error("invalid character {0:?} in bitstring")]
    Character(char),
    #[error("{0}")]
    Argument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

#[inline]
fn low_mask(m: usize) -> u64 {
    if m >= 64 {
        u64::MAX
    } else {
        (1u64 << m) - 1
    }
}

impl Determinant {
    pub fn new(alpha: u64, beta: u64) -> Self {
        Self { alpha, beta }
    }

    /// Builds a determinant from lists of occupied orbitals.
    pub fn from_occupied(alpha: &[usize], beta: &[usize]) -> Self {
        let mask = |occ: &[usize]| occ.iter().fold(0u64, |m, &p| m | (1u64 << p));
        Self { alpha: mask(alpha), beta: mask(beta) }
    }

    pub fn check(&self, norb: usize) -> Result<(), FermionError> {
        let outside = !low_mask(norb);
        for mask in [self.alpha, self.beta] {
            if mask & outside != 0 {
                let bit = (mask & outside).trailing_zeros() as usize;
                return Err(FermionError::Range { bit, norb });
            }
        }
        Ok(())
    }

    pub fn n_alpha(&self) -> usize {
        self.alpha.count_ones() as usize
    }

    pub fn n_beta(&self) -> usize {
        self.beta.count_ones() as usize
    }

    pub fn is_physical(&self, n_alpha: usize, n_beta: usize) -> bool {
        self.n_alpha() == n_alpha && self.n_beta() == n_beta
    }

    /// Combined spin-orbital mask: α in the low `norb` bits, β above.
    #[inline]
    pub fn spin_orbitals(&self, norb: usize) -> u128 {
        self.alpha as u128 | ((self.beta as u128) << norb)
    }

    #[inline]
    pub fn from_spin_orbitals(bits: u128, norb: usize) -> Self {
        let mask = low_mask(norb) as u128;
        Self { alpha: (bits & mask) as u64, beta: ((bits >> norb) & mask) as u64 }
    }

    /// Occupation of logical bit `k` (α block then β block).
    #[inline]
    pub fn bit(&self, k: usize, norb: usize) -> bool {
        if k < norb {
            self.alpha >> k & 1 == 1
        } else {
            self.beta >> (k - norb) & 1 == 1
        }
    }
}

/// Renders `det` as a `2M`-character '0'/'1' string.
pub fn encode_determinant(det: &Determinant, norb: usize) -> Result<String, FermionError> {
    det.check(norb)?;
    Ok((0..2 * norb).rev().map(|k| if det.bit(k, norb) { '1' } else { '0' }).collect())
}

/// Parses a `2M`-character bitstring.
pub fn decode_bitstring(bits: &str, norb: usize) -> Result<Determinant, FermionError> {
    let raw = parse_bits(bits, 2 * norb)?;
    Ok(Determinant::from_spin_orbitals(raw, norb))
}

/// Parses a '0'/'1' string of exactly `width` characters into an integer whose
/// bit `k` is the character at position `width-1-k`.
pub fn parse_bits(bits: &str, width: usize) -> Result<u128, FermionError> {
    if bits.len() != width {
        return Err(FermionError::Length { got: bits.len(), expected: width });
    }
    if width > 128 {
        return Err(FermionError::Argument(format!("bitstrings wider than 128 bits are unsupported ({width})")));
    }
    let mut out = 0u128;
    for c in bits.chars() {
        out <<= 1;
        match c {
            '0' => {}
            '1' => out |= 1,
            other => return Err(FermionError::Character(other)),
        }
    }
    Ok(out)
}

/// Inverse of [`parse_bits`].
pub fn format_bits(value: u128, width: usize) -> String {
    (0..width).rev().map(|k| if value >> k & 1 == 1 { '1' } else { '0' }).collect()
}

/// Per-sector popcounts `(w_alpha, w_beta)` of a `2M` bitstring.
pub fn hamming_weights(bits: &str, norb: usize) -> Result<(usize, usize), FermionError> {
    let det = decode_bitstring(bits, norb)?;
    Ok((det.n_alpha(), det.n_beta()))
}

/// Aufbau filling of the lowest orbitals in each spin sector.
pub fn hartree_fock_det(norb: usize, n_alpha: usize, n_beta: usize) -> Result<Determinant, FermionError> {
    if n_alpha > norb || n_beta > norb || norb > 64 {
        return Err(FermionError::Argument(format!("cannot place ({n_alpha}, {n_beta}) electrons in {norb} orbitals")));
    }
    Ok(Determinant::new(low_mask(n_alpha), low_mask(n_beta)))
}

/// Number of occupied spin orbitals strictly below `k`.
#[inline]
fn occupied_below(state: u128, k: usize) -> u32 {
    (state & ((1u128 << k) - 1)).count_ones()
}

/// Applies `a_k` to `state`, returning the parity flip.
#[inline]
fn annihilate(state: &mut u128, k: usize) -> bool {
    let odd = occupied_below(*state, k) % 2 == 1;
    *state &= !(1u128 << k);
    odd
}

/// Applies `a†_k` to `state`, returning the parity flip.
#[inline]
fn create(state: &mut u128, k: usize) -> bool {
    let odd = occupied_below(*state, k) % 2 == 1;
    *state |= 1u128 << k;
    odd
}

fn set_bits(mut mask: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            None
        } else {
            let k = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            Some(k)
        }
    })
}

/// Spatial orbital and spin (false = α) of spin orbital `k`.
#[inline]
fn split(k: usize, norb: usize) -> (usize, bool) {
    if k < norb {
        (k, false)
    } else {
        (k - norb, true)
    }
}

/// Antisymmetrized physicists' integral `<pr||qs>` over spin orbitals.
#[inline]
fn antisym(ham: &FermionHamiltonian, p: usize, r: usize, q: usize, s: usize) -> f64 {
    let m = ham.norb();
    let (ps, pspin) = split(p, m);
    let (rs, rspin) = split(r, m);
    let (qs, qspin) = split(q, m);
    let (ss, sspin) = split(s, m);
    let mut v = 0.0;
    if pspin == qspin && rspin == sspin {
        v += ham.g(ps, qs, rs, ss);
    }
    if pspin == sspin && rspin == qspin {
        v -= ham.g(ps, ss, rs, qs);
    }
    v
}

fn diagonal_element(ham: &FermionHamiltonian, occ: u128) -> f64 {
    let m = ham.norb();
    let occupied: Vec<usize> = set_bits(occ).collect();
    let mut e = ham.e_core();
    for (n, &i) in occupied.iter().enumerate() {
        let (si, spin_i) = split(i, m);
        e += ham.h(si, si);
        for &j in &occupied[..n] {
            let (sj, spin_j) = split(j, m);
            e += ham.g(si, si, sj, sj);
            if spin_i == spin_j {
                e -= ham.g(si, sj, sj, si);
            }
        }
    }
    e
}

/// `<bra|H|ket>` for two determinants with equal particle numbers. Zero when
/// they differ by more than a double excitation.
pub fn slater_condon_element(
    ham: &FermionHamiltonian,
    bra: &Determinant,
    ket: &Determinant,
) -> Result<f64, FermionError> {
    let m = ham.norb();
    bra.check(m)?;
    ket.check(m)?;
    if bra.n_alpha() != ket.n_alpha() || bra.n_beta() != ket.n_beta() {
        return Err(FermionError::Argument(format!(
            "particle numbers differ: ({}, {}) vs ({}, {})",
            bra.n_alpha(),
            bra.n_beta(),
            ket.n_alpha(),
            ket.n_beta()
        )));
    }
    Ok(element_unchecked(ham, bra.spin_orbitals(m), ket.spin_orbitals(m)))
}

/// Matrix element over combined spin-orbital masks; callers guarantee equal
/// particle numbers per spin sector.
fn element_unchecked(ham: &FermionHamiltonian, bra: u128, ket: u128) -> f64 {
    let diff = bra ^ ket;
    match diff.count_ones() {
        0 => diagonal_element(ham, ket),
        2 => {
            let q = (ket & diff).trailing_zeros() as usize;
            let p = (bra & diff).trailing_zeros() as usize;
            let mut state = ket;
            let odd = annihilate(&mut state, q) ^ create(&mut state, p);
            let m = ham.norb();
            let (sp, _) = split(p, m);
            let (sq, _) = split(q, m);
            let mut v = ham.h(sp, sq);
            for j in set_bits(ket & bra) {
                v += antisym(ham, p, j, q, j);
            }
            if odd {
                -v
            } else {
                v
            }
        }
        4 => {
            let mut holes = set_bits(ket & diff);
            let (q, s) = (holes.next().unwrap(), holes.next().unwrap());
            let mut parts = set_bits(bra & diff);
            let (p, r) = (parts.next().unwrap(), parts.next().unwrap());
            let mut state = ket;
            let odd =
                annihilate(&mut state, q) ^ annihilate(&mut state, s) ^ create(&mut state, r) ^ create(&mut state, p);
            let v = antisym(ham, p, r, q, s);
            if odd {
                -v
            } else {
                v
            }
        }
        _ => 0.0,
    }
}

/// All spin-conserving single excitations of `det`, α first, then β; each
/// sector enumerates holes ascending, then particles ascending.
pub fn single_excitations(det: &Determinant, norb: usize) -> Vec<Determinant> {
    let full = low_mask(norb);
    let mut out = Vec::new();
    for i in set_bits((det.alpha & full) as u128) {
        for a in set_bits((!det.alpha & full) as u128) {
            out.push(Determinant::new(det.alpha ^ (1 << i) ^ (1 << a), det.beta));
        }
    }
    for i in set_bits((det.beta & full) as u128) {
        for a in set_bits((!det.beta & full) as u128) {
            out.push(Determinant::new(det.alpha, det.beta ^ (1 << i) ^ (1 << a)));
        }
    }
    out
}

/// Spin-orbital masks reachable by single and double excitations.
fn connected(state: u128, norb: usize) -> Vec<u128> {
    let all = (1u128 << (2 * norb)) - 1;
    let alpha_block = low_mask(norb) as u128;
    let occ: Vec<usize> = set_bits(state).collect();
    let virt: Vec<usize> = set_bits(!state & all).collect();
    let same_block = |a: usize, b: usize| ((1u128 << a) & alpha_block != 0) == ((1u128 << b) & alpha_block != 0);
    let mut out = Vec::new();
    for &i in &occ {
        for &a in &virt {
            if same_block(i, a) {
                out.push(state ^ (1 << i) ^ (1 << a));
            }
        }
    }
    for (n, &i) in occ.iter().enumerate() {
        for &j in &occ[n + 1..] {
            for (k, &a) in virt.iter().enumerate() {
                for &b in &virt[k + 1..] {
                    // Spin conservation: the pair of holes and the pair of
                    // particles must carry the same number of α electrons.
                    let holes_alpha = same_block(i, 0) as u8 + same_block(j, 0) as u8;
                    let parts_alpha = same_block(a, 0) as u8 + same_block(b, 0) as u8;
                    if holes_alpha == parts_alpha {
                        out.push(state ^ (1 << i) ^ (1 << j) ^ (1 << a) ^ (1 << b));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<f64>),
    /// Row-wise `(column, value)` lists holding both triangles.
    Sparse(Vec<Vec<(usize, f64)>>),
}

/// Hamiltonian projected onto an ordered determinant basis.
#[derive(Debug, Clone)]
pub struct SubspaceMatrix {
    basis: Vec<Determinant>,
    storage: Storage,
}

impl SubspaceMatrix {
    /// Wraps a dense symmetric matrix; the basis is a placeholder of distinct
    /// determinants (used for matrices that did not come from a Hamiltonian).
    pub fn from_dense(matrix: DMatrix<f64>) -> Result<Self, FermionError> {
        let n = matrix.nrows();
        if n == 0 || matrix.ncols() != n {
            return Err(FermionError::Argument("matrix must be square and non-empty".into()));
        }
        for i in 0..n {
            for j in 0..i {
                if matrix[(i, j)] != matrix[(j, i)] {
                    return Err(FermionError::Argument(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let basis = (0..n as u64).map(|i| Determinant::new(i, 0)).collect();
        Ok(Self { basis, storage: Storage::Dense(matrix) })
    }

    pub fn basis(&self) -> &[Determinant] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Sparse(rows) => rows[i].binary_search_by_key(&j, |e| e.0).map(|k| rows[i][k].1).unwrap_or(0.0),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Number of stored non-zero entries (both triangles).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            Storage::Sparse(rows) => rows.iter().map(Vec::len).sum(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Sparse(rows) => {
                let n = self.dim();
                let mut out = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    for &(j, v) in row {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        match &self.storage {
            Storage::Dense(m) => {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = m.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            Storage::Sparse(rows) => {
                y.par_iter_mut().zip(rows.par_iter()).for_each(|(yi, row)| {
                    *yi = row.iter().map(|&(j, v)| v * x[j]).sum();
                });
            }
        }
    }
}

/// Projects `ham` onto `dets`: entry `(i, j)` is `<dets[i]|H|dets[j]>`.
pub fn project_hamiltonian(ham: &FermionHamiltonian, dets: &[Determinant]) -> Result<SubspaceMatrix, FermionError> {
    let m = ham.norb();
    let first = dets.first().ok_or_else(|| FermionError::Argument("cannot project onto an empty basis".into()))?;
    let (na, nb) = (first.n_alpha(), first.n_beta());
    let mut index = HashMap::with_capacity(dets.len());
    for (i, d) in dets.iter().enumerate() {
        d.check(m)?;
        if !d.is_physical(na, nb) {
            return Err(FermionError::Argument(format!(
                "determinant {i} has ({}, {}) electrons, expected ({na}, {nb})",
                d.n_alpha(),
                d.n_beta()
            )));
        }
        if index.insert(d.spin_orbitals(m), i).is_some() {
            return Err(FermionError::Argument(format!("duplicate determinant at position {i}")));
        }
    }
    let states: Vec<u128> = dets.iter().map(|d| d.spin_orbitals(m)).collect();
    let n = states.len();

    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let si = states[i];
            let mut row: Vec<(usize, f64)> = if n <= PAIR_SCAN_LIMIT {
                states
                    .iter()
                    .enumerate()
                    .filter(|(_, &sj)| (si ^ sj).count_ones() <= 4)
                    .map(|(j, &sj)| (j, element_unchecked(ham, si, sj)))
                    .collect()
            } else {
                let mut row: Vec<(usize, f64)> = connected(si, m)
                    .into_iter()
                    .filter_map(|sj| index.get(&sj).map(|&j| (j, element_unchecked(ham, si, sj))))
                    .collect();
                row.push((i, element_unchecked(ham, si, si)));
                row.sort_unstable_by_key(|e| e.0);
                row
            };
            row.retain(|&(j, v)| v != 0.0 || j == i);
            row
        })
        .collect();

    let storage = if n < DENSE_STORAGE_BELOW {
        let mut dense = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            for &(j, v) in row {
                dense[(i, j)] = v;
            }
        }
        Storage::Dense(dense)
    } else {
        Storage::Sparse(rows)
    };
    Ok(SubspaceMatrix { basis: dets.to_vec(), storage })
}

/// Iterates all `k`-bit subsets of `n` bits in increasing numeric order.
pub fn combinations(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit: u128 = 1u128 << n;
    let mut next: Option<u64> = if k > n { None } else { Some(low_mask(k)) };
    std::iter::from_fn(move || {
        let cur = next?;
        if cur == 0 {
            next = None;
            return Some(0);
        }
        // Gosper's hack.
        let c = cur & cur.wrapping_neg();
        let r = cur as u128 + c as u128;
        next = if r >= limit {
            None
        } else {
            let r = r as u64;
            Some((((r ^ cur) >> 2) / c) | r)
        };
        Some(cur)
    })
}

/// Every physical determinant for `(n_alpha, n_beta)`, sorted by `(alpha, beta)`.
pub fn full_basis(norb: usize, n_alpha: usize, n_beta: usize) -> Vec<Determinant> {
    let betas: Vec<u64> = combinations(norb, n_beta).collect();
    combinations(norb, n_alpha).flat_map(|a| betas.iter().map(move |&b| Determinant::new(a, b))).collect()
}
