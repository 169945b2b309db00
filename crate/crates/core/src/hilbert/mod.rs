//! Bases, spin operators, model Hamiltonians and their spectra.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod model;
pub mod pauli;

pub(crate) use model::sector_ground_states;
pub use model::{
    build_hamiltonian, initial_state, target_state, CollectiveTerm, HamiltonianParts, ModelSpec,
    SpinTerms, Variant, TARGET_FIELD_FRACTION,
};

/// Hilbert space a matrix or state lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Basis {
    /// Maximal-spin Dicke states `|S=N/2, m>`, index `k` holding `m = N/2 - k`.
    DickeSymmetric { spins: usize },
    /// Full tensor-product space of `N` spins-1/2.
    FullSpin { spins: usize },
    /// Symmetric spin sector times a boson truncated at `nbar` quanta;
    /// index `k * (nbar + 1) + n`.
    DickeBoson { spins: usize, nbar: usize },
}

impl Basis {
    pub fn dim(&self) -> usize {
        match *self {
            Basis::DickeSymmetric { spins } => spins + 1,
            Basis::FullSpin { spins } => 1 << spins,
            Basis::DickeBoson { spins, nbar } => (spins + 1) * (nbar + 1),
        }
    }

    pub fn spins(&self) -> usize {
        match *self {
            Basis::DickeSymmetric { spins }
            | Basis::FullSpin { spins }
            | Basis::DickeBoson { spins, .. } => spins,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::DickeSymmetric { spins } => write!(f, "DickeSymmetric({spins})"),
            Basis::FullSpin { spins } => write!(f, "FullSpin({spins})"),
            Basis::DickeBoson { spins, nbar } => write!(f, "DickeBoson({spins}, {nbar})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// A dense operator tagged with its basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    pub matrix: DMatrix<C64>,
    pub basis: Basis,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>, basis: Basis) -> Self {
        assert_eq!(matrix.nrows(), basis.dim());
        assert_eq!(matrix.ncols(), basis.dim());
        Operator { matrix, basis }
    }

    pub fn zeros(basis: Basis) -> Self {
        let d = basis.dim();
        Operator { matrix: DMatrix::zeros(d, d), basis }
    }

    pub fn identity(basis: Basis) -> Self {
        let d = basis.dim();
        Operator { matrix: DMatrix::identity(d, d), basis }
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `max |A - A^dagger|` over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Operator::new(
            &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            self.basis,
        )
    }
}

pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).camax()
}

/// Spin-`j` angular momentum matrices `(Sx, Sy, Sz)` in the `|j, m>` basis
/// ordered by descending `m`. `two_j` is `2j`.
pub fn spin_matrices(two_j: usize) -> [DMatrix<C64>; 3] {
    let dim = two_j + 1;
    let j = two_j as f64 / 2.0;
    let mut raise = DMatrix::<C64>::zeros(dim, dim);
    for k in 1..dim {
        let m = j - k as f64;
        raise[(k - 1, k)] = C64::new((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let sx = (&raise + &lower) * C64::new(0.5, 0.0);
    let sy = (&raise - &lower) * C64::new(0.0, -0.5);
    let sz = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            C64::new(j - r as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    [sx, sy, sz]
}

/// Global flip `prod_j sigma_j^axis` restricted to the spin `two_j / 2`
/// irrep of `two_j` spins, i.e. `i^N exp(-i pi S_axis)`.
pub fn collective_parity(two_j: usize, axis: Axis) -> DMatrix<C64> {
    let [sx, sy, sz] = spin_matrices(two_j);
    let s = match axis {
        Axis::X => sx,
        Axis::Y => sy,
        Axis::Z => sz,
    };
    let eig = eigh(&s).expect("spin matrices are Hermitian");
    let phases = DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|m| C64::from_polar(1.0, -std::f64::consts::PI * m)),
    );
    let global = C64::new(0.0, 1.0).powu(two_j as u32);
    &eig.vectors * DMatrix::from_diagonal(&phases) * eig.vectors.adjoint() * global
}

/// Collective spin operators `S_a = (1/2) sum_j sigma_j^a`.
pub fn build_collective_ops(spins: usize, basis: Basis) -> Result<(Operator, Operator, Operator)> {
    if spins == 0 || basis.spins() != spins {
        return Err(Error::InvalidModel(format!(
            "spin count {spins} does not match basis {basis}"
        )));
    }
    match basis {
        Basis::DickeSymmetric { .. } => {
            let [sx, sy, sz] = spin_matrices(spins);
            Ok((
                Operator::new(sx, basis),
                Operator::new(sy, basis),
                Operator::new(sz, basis),
            ))
        }
        Basis::FullSpin { .. } => {
            let build = |axis| {
                let terms: Vec<_> = (0..spins)
                    .map(|i| pauli::PauliTerm::new(0.5, vec![(i, axis)]))
                    .collect();
                Operator::new(pauli::dense_from_terms(spins, &terms), basis)
            };
            Ok((build(Axis::X), build(Axis::Y), build(Axis::Z)))
        }
        Basis::DickeBoson { .. } => Err(Error::UnsupportedBasis {
            what: "bare collective spin operators",
            basis,
        }),
    }
}

/// `sigma^axis` on one site, identity elsewhere.
pub fn build_local_pauli(spins: usize, site: usize, axis: Axis) -> Result<Operator> {
    if site >= spins {
        return Err(Error::SiteOutOfRange { site, spins });
    }
    let m = pauli::dense_from_terms(spins, &[pauli::PauliTerm::new(1.0, vec![(site, axis)])]);
    Ok(Operator::new(m, Basis::FullSpin { spins }))
}

/// Ascending eigenvalues with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }
}

/// Hermitian tolerance accepted by [`eigendecompose`], relative to `max|H|`.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

pub fn eigendecompose(h: &Operator) -> Result<Eigensystem> {
    eigh(&h.matrix)
}

pub fn eigh(h: &DMatrix<C64>) -> Result<Eigensystem> {
    let scale = h.camax().max(f64::MIN_POSITIVE);
    let deviation = hermiticity_defect(h);
    if deviation > HERMITIAN_TOLERANCE * scale.max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(h.nrows(), h.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigensystem { values, vectors })
}

/// Orthonormal basis (as columns) of the smallest subspace containing `seed`
/// and invariant under the Hermitian operators `ops`.
///
/// Plain Krylov iteration is unreliable here: every nearly dependent vector
/// amplifies rounding noise, and after a few products the noise spills into
/// symmetry sectors the seed never touches. Instead the subspace is grown by
/// spectral projections of two generic combinations of `ops`. Eigenspaces
/// are grouped into clusters of equal eigenvalue, the projector onto each
/// cluster commutes with every symmetry, and a cluster only contributes the
/// directions in which the current subspace has a non-negligible overlap.
pub(crate) fn invariant_subspace(seed: &DVector<C64>, ops: &[&DMatrix<C64>]) -> Result<DMatrix<C64>> {
    const OVERLAP_FLOOR: f64 = 1e-8;
    let dim = seed.len();
    let mut q = DMatrix::from_columns(&[seed.normalize()]);
    let weights: [&[f64]; 2] = [&[1.0, 0.618_033_988_7, 0.414_213_562_3], &[1.0, -1.324_717_957_2, 0.754_877_666_2]];
    let mut generic = Vec::new();
    for w in weights {
        let mut g = DMatrix::<C64>::zeros(dim, dim);
        for (op, c) in ops.iter().zip(w.iter().cycle()) {
            let n = op.norm();
            if n > 0.0 {
                g += *op * C64::new(c / n, 0.0);
            }
        }
        generic.push(eigh(&g)?);
    }
    let mut stable = 0;
    let mut round = 0;
    while stable < generic.len() {
        let eig = &generic[round % generic.len()];
        round += 1;
        let tol = 1e-9 * eig.values.iter().fold(1e-300f64, |m, x| m.max(x.abs()));
        let mut columns: Vec<DVector<C64>> = Vec::new();
        let mut start = 0;
        while start < dim {
            let mut end = start + 1;
            while end < dim && eig.values[end] - eig.values[end - 1] <= tol {
                end += 1;
            }
            let v = eig.vectors.columns(start, end - start);
            let overlap = v.adjoint() * &q;
            let gram = &overlap * overlap.adjoint();
            let local = eigh(&gram)?;
            for (k, &s2) in local.values.iter().enumerate() {
                if s2 > OVERLAP_FLOOR * OVERLAP_FLOOR {
                    columns.push(&v * local.vectors.column(k));
                }
            }
            start = end;
        }
        if columns.len() == q.ncols() {
            stable += 1;
        } else {
            stable = 0;
        }
        q = DMatrix::from_columns(&columns);
    }
    Ok(q)
}
