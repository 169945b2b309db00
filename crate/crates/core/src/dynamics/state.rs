use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hilbert::{eigh, hermiticity_defect, Basis};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub amplitudes: DVector<C64>,
    pub basis: Basis,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<C64>, basis: Basis) -> Self {
        assert_eq!(amplitudes.len(), basis.dim());
        QuantumState { amplitudes, basis }
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// `<self|other>`.
    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        same_basis(self.basis, other.basis)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn projector(&self) -> DensityMatrix {
        DensityMatrix::new(&self.amplitudes * self.amplitudes.adjoint(), self.basis)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub matrix: DMatrix<C64>,
    pub basis: Basis,
}

impl DensityMatrix {
    pub fn new(matrix: DMatrix<C64>, basis: Basis) -> Self {
        assert_eq!(matrix.nrows(), basis.dim());
        assert_eq!(matrix.ncols(), basis.dim());
        DensityMatrix { matrix, basis }
    }

    pub fn maximally_mixed(basis: Basis) -> Self {
        let d = basis.dim();
        DensityMatrix::new(DMatrix::identity(d, d) / C64::new(d as f64, 0.0), basis)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(eigh(&self.symmetrized().matrix)?.values[0])
    }

    pub fn symmetrized(&self) -> DensityMatrix {
        let m = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        DensityMatrix::new(m, self.basis)
    }

    /// `(1/2) || self - other ||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        same_basis(self.basis, other.basis)?;
        let diff = &self.matrix - &other.matrix;
        let diff = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * eigh(&diff)?.values.iter().map(|x| x.abs()).sum::<f64>())
    }
}

fn same_basis(left: Basis, right: Basis) -> Result<()> {
    if left != right {
        return Err(Error::BasisMismatch { left, right });
    }
    Ok(())
}

/// `Re <target|rho|target>`.
pub fn fidelity(rho: &DensityMatrix, target: &QuantumState) -> Result<f64> {
    same_basis(rho.basis, target.basis)?;
    let t = &target.amplitudes;
    let value = t.dotc(&(&rho.matrix * t));
    if value.im.abs() > 1e-10 {
        log::warn!("fidelity has imaginary residue {:.3e}", value.im);
    }
    Ok(value.re)
}

/// `|<target|psi>|^2`.
pub fn state_fidelity(psi: &QuantumState, target: &QuantumState) -> Result<f64> {
    Ok(target.overlap(psi)?.norm_sqr())
}
