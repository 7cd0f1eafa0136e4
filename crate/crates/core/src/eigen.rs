//! Lowest eigenpair of projected Hamiltonians, and the exact full-CI reference.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fcidump::FermionHamiltonian;
use crate::fermion::{full_basis, hartree_fock_det, project_hamiltonian, Determinant, FermionError, SubspaceMatrix};

/// Largest full-CI basis `fci_ground_state` will attempt.
pub const FCI_CAPACITY: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigenError {
    #[error("Davidson iteration did not converge after {iterations} iterations (best residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },
    #[error("full-CI basis of {size} determinants exceeds the capacity of {FCI_CAPACITY}")]
    Capacity { size: usize },
    #[error(transparent)]
    Fermion(#[from] FermionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Matrices up to this dimension are diagonalized densely.
    pub dense_threshold: usize,
    pub max_iter: usize,
    /// Ritz vectors kept when the search space is collapsed.
    pub restart_dim: usize,
    pub max_subspace: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { dense_threshold: 2000, max_iter: 200, restart_dim: 20, max_subspace: 40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Flips the sign so the first non-negligible coefficient is positive.
fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn residual(matrix: &SubspaceMatrix, v: &[f64], energy: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    matrix.matvec(v, &mut av);
    av.iter().zip(v).map(|(a, x)| (a - energy * x).powi(2)).sum::<f64>().sqrt()
}

/// Lowest eigenpair with the default options.
pub fn lowest_eigenpair(matrix: &SubspaceMatrix, tol: f64) -> Result<EigenResult, EigenError> {
    lowest_eigenpair_with(matrix, tol, &SolverOptions::default())
}

pub fn lowest_eigenpair_with(
    matrix: &SubspaceMatrix,
    tol: f64,
    opts: &SolverOptions,
) -> Result<EigenResult, EigenError> {
    if matrix.dim() <= opts.dense_threshold {
        Ok(dense_lowest(matrix))
    } else {
        davidson_lowest(matrix, tol, opts)
    }
}

fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn dense_lowest(matrix: &SubspaceMatrix) -> EigenResult {
    let (values, vectors) = sorted_eigen(matrix.to_dense());
    let mut vector: Vec<f64> = vectors.column(0).iter().copied().collect();
    let n = norm(&vector);
    vector.iter_mut().for_each(|x| *x /= n);
    fix_sign(&mut vector);
    let energy = values[0];
    let residual_norm = residual(matrix, &vector, energy);
    EigenResult { energy, vector, iterations: 1, residual_norm }
}

/// Modified Gram–Schmidt of `v` against `basis` (twice, for stability).
/// Returns false when nothing independent is left.
fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    let start = norm(v);
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    let n = norm(v);
    if n <= 1e-10 * start.max(1e-300) || n == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Index of the Hartree–Fock determinant if it is in the basis, otherwise of
/// the lowest diagonal entry.
fn start_vector(matrix: &SubspaceMatrix, diag: &[f64]) -> usize {
    let basis = matrix.basis();
    let hf = hartree_fock_det(64, basis[0].n_alpha(), basis[0].n_beta()).expect("counts fit in 64 orbitals");
    if let Some(i) = basis.iter().position(|d| *d == hf) {
        return i;
    }
    diag.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0))).map(|(i, _)| i).unwrap_or(0)
}

fn davidson_lowest(matrix: &SubspaceMatrix, tol: f64, opts: &SolverOptions) -> Result<EigenResult, EigenError> {
    let n = matrix.dim();
    let diag = matrix.diagonal();
    let mut v0 = vec![0.0; n];
    v0[start_vector(matrix, &diag)] = 1.0;

    let mut search: Vec<Vec<f64>> = vec![v0];
    let mut images: Vec<Vec<f64>> = Vec::new();
    let mut best = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        while images.len() < search.len() {
            let mut av = vec![0.0; n];
            matrix.matvec(&search[images.len()], &mut av);
            images.push(av);
        }
        let k = search.len();
        let projected = DMatrix::from_fn(k, k, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            dot(&search[a], &images[b])
        });
        let (values, vectors) = sorted_eigen(projected);
        let theta = values[0];
        let coeffs = vectors.column(0);
        let mut x = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for (c, (s, a)) in coeffs.iter().zip(search.iter().zip(&images)) {
            x.iter_mut().zip(s).for_each(|(xi, si)| *xi += c * si);
            ax.iter_mut().zip(a).for_each(|(xi, ai)| *xi += c * ai);
        }
        let r: Vec<f64> = ax.iter().zip(&x).map(|(a, xi)| a - theta * xi).collect();
        let rnorm = norm(&r);
        best = best.min(rnorm);
        if rnorm <= tol {
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            fix_sign(&mut x);
            return Ok(EigenResult { energy: theta, vector: x, iterations: iter, residual_norm: rnorm });
        }

        if k >= opts.max_subspace {
            // Collapse onto the lowest Ritz vectors.
            let keep = opts.restart_dim.min(k).max(1);
            let mut new_search = Vec::with_capacity(keep);
            let mut new_images = Vec::with_capacity(keep);
            for c in 0..keep {
                let col = vectors.column(c);
                let mut s = vec![0.0; n];
                let mut a = vec![0.0; n];
                for (w, (sv, av)) in col.iter().zip(search.iter().zip(&images)) {
                    s.iter_mut().zip(sv).for_each(|(x, y)| *x += w * y);
                    a.iter_mut().zip(av).for_each(|(x, y)| *x += w * y);
                }
                new_search.push(s);
                new_images.push(a);
            }
            search = new_search;
            images = new_images;
        }

        // Diagonal (Davidson) preconditioner.
        let mut t: Vec<f64> = r
            .iter()
            .zip(&diag)
            .map(|(ri, di)| {
                let denom = theta - di;
                if denom.abs() < 1e-8 {
                    -ri / 1e-8f64.copysign(denom)
                } else {
                    ri / denom
                }
            })
            .collect();
        if !orthonormalize(&mut t, &search) {
            // Preconditioned residual collapsed; fall back to the raw residual.
            t = r.clone();
            if !orthonormalize(&mut t, &search) {
                return Err(EigenError::Convergence { iterations: iter, residual: best });
            }
        }
        search.push(t);
    }
    Err(EigenError::Convergence { iterations: opts.max_iter, residual: best })
}

/// Exact ground state in the full physical determinant space.
#[derive(Debug, Clone, PartialEq)]
pub struct FciSolution {
    pub energy: f64,
    pub coefficients: BTreeMap<Determinant, f64>,
}

pub fn fci_ground_state(ham: &FermionHamiltonian) -> Result<FciSolution, EigenError> {
    let size = binomial(ham.norb(), ham.n_alpha()).saturating_mul(binomial(ham.norb(), ham.n_beta()));
    if size > FCI_CAPACITY as u128 {
        return Err(EigenError::Capacity { size: size.min(usize::MAX as u128) as usize });
    }
    let basis = full_basis(ham.norb(), ham.n_alpha(), ham.n_beta());
    let matrix = project_hamiltonian(ham, &basis)?;
    let result = lowest_eigenpair(&matrix, 1e-10)?;
    let coefficients = basis.into_iter().zip(result.vector).collect();
    Ok(FciSolution { energy: result.energy, coefficients })
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Dense reference spectrum, used by tests and diagnostics.
pub fn dense_spectrum(matrix: &DMatrix<f64>) -> Vec<f64> {
    sorted_eigen(matrix.clone()).0
}
