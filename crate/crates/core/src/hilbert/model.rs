use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::pauli::{dense_from_terms, PauliTerm};
use super::{eigh, spin_matrices, Axis, Basis, Operator};
use crate::dynamics::QuantumState;
use crate::error::{Error, Result};

/// The cat-state target is the ground state at `B = TARGET_FIELD_FRACTION * B0`
/// inside the parity sector of the initial state.
pub const TARGET_FIELD_FRACTION: f64 = 1e-6;

/// Largest chain handled in the tensor-product basis.
const MAX_FULL_SPINS: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Lipkin,
    Ising,
    Dicke,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Lipkin => "lipkin",
            Variant::Ising => "ising",
            Variant::Dicke => "dicke",
        }
    }
}

/// Physical parameters of one model variant.
///
/// Energies and fields are angular frequencies in rad/ms (hbar = 1), times
/// are in ms. `gamma_per_s` keeps the dephasing rate in s^-1 as it is quoted;
/// [`ModelSpec::gamma_per_ms`] converts it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: Variant,
    pub spins: usize,
    /// Lipkin coupling magnitude `|J|`.
    pub coupling: f64,
    /// Ising coupling magnitude `|J_max|`.
    pub j_max: f64,
    /// Ising power-law exponent.
    pub alpha: f64,
    /// Dicke spin-boson coupling.
    pub g0: f64,
    /// Dicke detuning (signed; negative is ferromagnetic).
    pub delta: f64,
    /// Dicke boson cutoff.
    pub nbar: usize,
    /// Decoupling amplitude.
    pub dd_omega: f64,
    /// Power-law exponent of the Ising decoupling term.
    pub dd_alpha_tilde: f64,
    /// Initial transverse field.
    pub b0: f64,
    pub gamma_per_s: f64,
    pub dephasing_axis: Axis,
    /// Applies a negative sign to the stored coupling magnitudes.
    pub ferromagnetic: bool,
}

impl ModelSpec {
    fn base(variant: Variant, spins: usize) -> Self {
        ModelSpec {
            variant,
            spins,
            coupling: 0.0,
            j_max: 0.0,
            alpha: 0.0,
            g0: 0.0,
            delta: 0.0,
            nbar: 0,
            dd_omega: 0.0,
            dd_alpha_tilde: 0.0,
            b0: 2.0 * PI * 7.0,
            gamma_per_s: 0.0,
            dephasing_axis: if variant == Variant::Ising { Axis::X } else { Axis::Z },
            ferromagnetic: true,
        }
    }

    /// Lipkin model with `|J| = 0.55 N` and `B0 = 2 pi * 7`.
    pub fn lipkin(spins: usize) -> Self {
        // keeps e.g. 0.55 * 6 at exactly 3.3
        ModelSpec { coupling: 55.0 * spins as f64 / 100.0, ..Self::base(Variant::Lipkin, spins) }
    }

    /// Power-law Ising chain with `|J_max| = 0.55` and `B0 = 2 pi * 7`.
    pub fn ising(spins: usize, alpha: f64) -> Self {
        ModelSpec { j_max: 0.55, alpha, ..Self::base(Variant::Ising, spins) }
    }

    pub fn dicke(spins: usize, g0: f64, delta: f64, nbar: usize) -> Self {
        ModelSpec { g0, delta, nbar, ..Self::base(Variant::Dicke, spins) }
    }

    pub fn with_gamma(mut self, gamma_per_s: f64) -> Self {
        self.gamma_per_s = gamma_per_s;
        self
    }

    pub fn with_decoupling(mut self, omega: f64, alpha_tilde: f64) -> Self {
        self.dd_omega = omega;
        self.dd_alpha_tilde = alpha_tilde;
        self
    }

    pub fn with_spins(mut self, spins: usize) -> Self {
        self.spins = spins;
        self
    }

    pub fn gamma_per_ms(&self) -> f64 {
        self.gamma_per_s * 1e-3
    }

    fn sign(&self) -> f64 {
        if self.ferromagnetic {
            -1.0
        } else {
            1.0
        }
    }

    /// Basis used by default for closed dynamics and spectral scans.
    pub fn natural_basis(&self) -> Basis {
        match self.variant {
            Variant::Lipkin => Basis::DickeSymmetric { spins: self.spins },
            Variant::Ising => Basis::FullSpin { spins: self.spins },
            Variant::Dicke => Basis::DickeBoson { spins: self.spins, nbar: self.nbar },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.spins == 0 {
            return bad("at least one spin is required".into());
        }
        let finite = [
            self.coupling,
            self.j_max,
            self.alpha,
            self.g0,
            self.delta,
            self.dd_omega,
            self.dd_alpha_tilde,
            self.b0,
            self.gamma_per_s,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("parameters must be finite".into());
        }
        if self.b0 <= 0.0 {
            return bad(format!("B0 must be positive, got {}", self.b0));
        }
        if self.gamma_per_s < 0.0 {
            return bad(format!("dephasing rate must be non-negative, got {}", self.gamma_per_s));
        }
        if self.dd_omega < 0.0 {
            return bad(format!("decoupling amplitude must be non-negative, got {}", self.dd_omega));
        }
        let expected_axis = match self.variant {
            Variant::Ising => Axis::X,
            Variant::Lipkin | Variant::Dicke => Axis::Z,
        };
        if self.dephasing_axis != expected_axis {
            return bad(format!(
                "dephasing axis for {} is fixed to {}",
                self.variant.name(),
                expected_axis.name()
            ));
        }
        if self.variant == Variant::Dicke {
            if self.dd_omega != 0.0 {
                return bad("the Dicke variant has no decoupling term".into());
            }
            if self.delta == 0.0 {
                return bad("Dicke detuning must be non-zero".into());
            }
        }
        Ok(())
    }

    /// Pauli-string expansion of the three Hamiltonian pieces, for the spin
    /// variants.
    pub fn pauli_terms(&self) -> Result<SpinTerms<PauliTerm>> {
        let n = self.spins;
        let pairs = || (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)));
        let sum_pairs = |axis: Axis, weight: &dyn Fn(usize, usize) -> f64| -> Vec<PauliTerm> {
            pairs()
                .map(|(i, j)| PauliTerm::new(weight(i, j), vec![(i, axis), (j, axis)]))
                .collect()
        };
        // S_a^2 = N/4 + (1/2) sum_{i<j} sigma_i^a sigma_j^a
        let collective_square = |axis: Axis, scale: f64| -> Vec<PauliTerm> {
            let mut t = vec![PauliTerm::constant(scale * n as f64 / 4.0)];
            t.extend(sum_pairs(axis, &|_, _| scale * 0.5));
            t
        };
        match self.variant {
            Variant::Lipkin => Ok(SpinTerms {
                fixed: collective_square(Axis::Z, self.sign() * self.coupling / n as f64),
                drive: (0..n).map(|i| PauliTerm::new(0.5, vec![(i, Axis::X)])).collect(),
                decoupling: collective_square(Axis::Y, 1.0),
            }),
            Variant::Ising => {
                let jmax = self.sign() * self.j_max;
                let alpha = self.alpha;
                let alpha_t = self.dd_alpha_tilde;
                Ok(SpinTerms {
                    fixed: sum_pairs(Axis::X, &|i, j| jmax / ((j - i) as f64).powf(alpha)),
                    drive: (0..n).map(|i| PauliTerm::new(1.0, vec![(i, Axis::Y)])).collect(),
                    decoupling: sum_pairs(Axis::Z, &|i, j| ((j - i) as f64).powf(-alpha_t)),
                })
            }
            Variant::Dicke => Err(Error::UnsupportedBasis {
                what: "a pure-spin Pauli expansion of the Dicke model",
                basis: self.natural_basis(),
            }),
        }
    }

    /// Collective-spin form, available when the Hamiltonian is invariant
    /// under site permutations.
    pub fn collective_terms(&self) -> Option<SpinTerms<CollectiveTerm>> {
        let n = self.spins as f64;
        match self.variant {
            Variant::Lipkin => Some(SpinTerms {
                fixed: vec![CollectiveTerm::square(Axis::Z, self.sign() * self.coupling / n)],
                drive: vec![CollectiveTerm::linear(Axis::X, 1.0)],
                decoupling: vec![CollectiveTerm::square(Axis::Y, 1.0)],
            }),
            Variant::Ising if self.alpha == 0.0 => {
                // sum_{i<j} sigma^a sigma^a = 2 S_a^2 - N/2
                let jmax = self.sign() * self.j_max;
                let decoupling = if self.dd_alpha_tilde == 0.0 {
                    vec![CollectiveTerm::square(Axis::Z, 2.0), CollectiveTerm::constant(-n / 2.0)]
                } else if self.dd_omega == 0.0 {
                    Vec::new()
                } else {
                    return None;
                };
                Some(SpinTerms {
                    fixed: vec![
                        CollectiveTerm::square(Axis::X, 2.0 * jmax),
                        CollectiveTerm::constant(-jmax * n / 2.0),
                    ],
                    drive: vec![CollectiveTerm::linear(Axis::Y, 2.0)],
                    decoupling,
                })
            }
            _ => None,
        }
    }

    pub fn is_permutation_symmetric(&self) -> bool {
        self.collective_terms().is_some()
    }

    fn check_basis(&self, basis: Basis) -> Result<()> {
        let ok = match (self.variant, basis) {
            (Variant::Lipkin, Basis::DickeSymmetric { spins })
            | (Variant::Lipkin, Basis::FullSpin { spins })
            | (Variant::Ising, Basis::FullSpin { spins }) => spins == self.spins,
            (Variant::Dicke, Basis::DickeBoson { spins, nbar }) => {
                spins == self.spins && nbar == self.nbar
            }
            _ => false,
        };
        if !ok {
            return Err(Error::UnsupportedBasis { what: self.variant.name(), basis });
        }
        if let Basis::FullSpin { spins } = basis {
            if spins > MAX_FULL_SPINS {
                return Err(Error::InvalidModel(format!(
                    "{spins} spins exceed the tensor-product limit of {MAX_FULL_SPINS}"
                )));
            }
        }
        Ok(())
    }

    /// Dense fixed, drive (`dH/dB`) and decoupling pieces in `basis`.
    pub fn parts(&self, basis: Basis) -> Result<HamiltonianParts> {
        self.validate()?;
        self.check_basis(basis)?;
        let (fixed, drive, decoupling) = match basis {
            Basis::DickeSymmetric { spins } => {
                let t = self.collective_terms().expect("Lipkin is collective");
                (
                    CollectiveTerm::sum(&t.fixed, spins),
                    CollectiveTerm::sum(&t.drive, spins),
                    CollectiveTerm::sum(&t.decoupling, spins),
                )
            }
            Basis::FullSpin { spins } => {
                let t = self.pauli_terms()?;
                (
                    dense_from_terms(spins, &t.fixed),
                    dense_from_terms(spins, &t.drive),
                    dense_from_terms(spins, &t.decoupling),
                )
            }
            Basis::DickeBoson { spins, nbar } => {
                let [sx, _, sz] = spin_matrices(spins);
                let nb = nbar + 1;
                let mut a = DMatrix::<C64>::zeros(nb, nb);
                for n in 1..nb {
                    a[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
                }
                let quad = &a + a.adjoint();
                let number = a.adjoint() * &a;
                let id_s = DMatrix::<C64>::identity(spins + 1, spins + 1);
                let id_b = DMatrix::<C64>::identity(nb, nb);
                let g = self.g0 / (spins as f64).sqrt();
                let fixed = sz.kronecker(&quad) * C64::new(-g, 0.0)
                    - id_s.kronecker(&number) * C64::new(self.delta, 0.0);
                let drive = sx.kronecker(&id_b);
                let d = basis.dim();
                (fixed, drive, DMatrix::zeros(d, d))
            }
        };
        Ok(HamiltonianParts { basis, fixed, drive, decoupling, omega: self.dd_omega })
    }

    /// Global spin-flip parity commuting with every Hamiltonian of the model.
    pub fn parity(&self, basis: Basis) -> Result<Operator> {
        self.check_basis(basis)?;
        let d = basis.dim();
        let one = C64::new(1.0, 0.0);
        let m = match basis {
            Basis::DickeSymmetric { spins } => {
                DMatrix::from_fn(d, d, |r, c| if r + c == spins { one } else { C64::new(0.0, 0.0) })
            }
            Basis::FullSpin { spins } => {
                let axis = if self.variant == Variant::Ising { Axis::Y } else { Axis::X };
                let factors: Vec<_> = (0..spins).map(|i| (i, axis)).collect();
                dense_from_terms(spins, &[PauliTerm::new(1.0, factors)])
            }
            Basis::DickeBoson { spins, nbar } => {
                let nb = nbar + 1;
                let mut m = DMatrix::<C64>::zeros(d, d);
                for k in 0..=spins {
                    for n in 0..nb {
                        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                        m[((spins - k) * nb + n, k * nb + n)] = C64::new(sign, 0.0);
                    }
                }
                m
            }
        };
        Ok(Operator::new(m, basis))
    }
}

/// The three independently scaled pieces of a model Hamiltonian
/// `H = fixed + B(t) drive + omega sin(pi t / t_f) decoupling`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinTerms<T> {
    pub fixed: Vec<T>,
    pub drive: Vec<T>,
    pub decoupling: Vec<T>,
}

/// `coeff * S_axis^power`, or a constant when `axis` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollectiveTerm {
    pub coeff: f64,
    pub axis: Option<Axis>,
    pub power: u8,
}

impl CollectiveTerm {
    pub fn constant(coeff: f64) -> Self {
        CollectiveTerm { coeff, axis: None, power: 0 }
    }

    pub fn linear(axis: Axis, coeff: f64) -> Self {
        CollectiveTerm { coeff, axis: Some(axis), power: 1 }
    }

    pub fn square(axis: Axis, coeff: f64) -> Self {
        CollectiveTerm { coeff, axis: Some(axis), power: 2 }
    }

    /// Same operator after exchanging the x and z axes and reversing y.
    pub fn hadamard_rotated(&self) -> Self {
        let mut t = *self;
        t.axis = self.axis.map(|a| match a {
            Axis::X => Axis::Z,
            Axis::Z => Axis::X,
            Axis::Y => Axis::Y,
        });
        if self.axis == Some(Axis::Y) && self.power % 2 == 1 {
            t.coeff = -t.coeff;
        }
        t
    }

    /// Sum of terms as a matrix on the spin `two_j / 2` irrep.
    pub fn sum(terms: &[CollectiveTerm], two_j: usize) -> DMatrix<C64> {
        let [sx, sy, sz] = spin_matrices(two_j);
        let d = two_j + 1;
        let mut out = DMatrix::<C64>::zeros(d, d);
        for t in terms {
            let base = match t.axis {
                None => DMatrix::identity(d, d),
                Some(Axis::X) => sx.clone(),
                Some(Axis::Y) => sy.clone(),
                Some(Axis::Z) => sz.clone(),
            };
            let m = match t.power {
                0 => DMatrix::identity(d, d),
                1 => base,
                2 => &base * &base,
                p => panic!("unsupported collective power {p}"),
            };
            out += m * C64::new(t.coeff, 0.0);
        }
        out
    }
}

/// Dense Hamiltonian pieces for one basis.
#[derive(Debug, Clone)]
pub struct HamiltonianParts {
    pub basis: Basis,
    pub fixed: DMatrix<C64>,
    pub drive: DMatrix<C64>,
    pub decoupling: DMatrix<C64>,
    pub omega: f64,
}

impl HamiltonianParts {
    /// Decoupling envelope `sin(pi t / t_f)`.
    pub fn envelope(t_over_tf: f64) -> f64 {
        (PI * t_over_tf).sin()
    }

    pub fn at(&self, field: f64, envelope: f64) -> DMatrix<C64> {
        let mut h = &self.fixed + &self.drive * C64::new(field, 0.0);
        if self.omega != 0.0 && envelope != 0.0 {
            h += &self.decoupling * C64::new(self.omega * envelope, 0.0);
        }
        h
    }
}

pub fn build_hamiltonian(
    model: &ModelSpec,
    field: f64,
    t_over_tf: f64,
    basis: Basis,
) -> Result<Operator> {
    let parts = model.parts(basis)?;
    Ok(Operator::new(parts.at(field, HamiltonianParts::envelope(t_over_tf)), basis))
}

fn normalize_phase(mut v: DVector<C64>) -> DVector<C64> {
    let norm = v.norm();
    v.unscale_mut(norm);
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or_default();
    if pivot.norm() > 0.0 {
        let phase = pivot.conj() / pivot.norm();
        v *= phase;
    }
    v
}

/// Ground state of `H(B0)` with the decoupling envelope at zero.
pub fn initial_state(model: &ModelSpec, basis: Basis) -> Result<QuantumState> {
    let parts = model.parts(basis)?;
    let psi = nondegenerate_ground(&parts.at(model.b0, 0.0), "H(B0)")?;
    Ok(QuantumState::new(psi, basis))
}

/// The cat state reached adiabatically at `B -> 0+`.
///
/// The two lowest levels become exactly degenerate at `B = 0` and their
/// splitting at `TARGET_FIELD_FRACTION * B0` is far below double precision,
/// so the ground state is taken inside the parity sector of the initial
/// state, which the dynamics conserves.
pub fn target_state(model: &ModelSpec, basis: Basis) -> Result<QuantumState> {
    let parts = model.parts(basis)?;
    let parity = model.parity(basis)?;
    let (_, target) = sector_ground_states(
        &parts.at(model.b0, 0.0),
        &parts.at(TARGET_FIELD_FRACTION * model.b0, 0.0),
        &parity.matrix,
    )?;
    Ok(QuantumState::new(target, basis))
}

pub(crate) fn nondegenerate_ground(h: &DMatrix<C64>, what: &str) -> Result<DVector<C64>> {
    let eig = eigh(h)?;
    let scale = eig.values.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    if eig.values.len() > 1 && eig.values[1] - eig.values[0] < 1e-9 * scale {
        return Err(Error::DegenerateTarget(format!(
            "ground state of {what} is degenerate (gap {:.3e})",
            eig.values[1] - eig.values[0]
        )));
    }
    Ok(normalize_phase(eig.vector(0)))
}

/// Initial ground state of `h_init` and the ground state of `h_target`
/// restricted to the parity sector the initial state lives in.
pub(crate) fn sector_ground_states(
    h_init: &DMatrix<C64>,
    h_target: &DMatrix<C64>,
    parity: &DMatrix<C64>,
) -> Result<(DVector<C64>, DVector<C64>)> {
    let psi0 = nondegenerate_ground(h_init, "H(B0)")?;
    let sector = psi0.dotc(&(parity * &psi0)).re;
    if (sector.abs() - 1.0).abs() > 1e-8 {
        return Err(Error::DegenerateTarget(format!(
            "initial state has no definite parity (<P> = {sector:.6})"
        )));
    }
    let p_eig = eigh(parity)?;
    let cols: Vec<_> = (0..parity.nrows())
        .filter(|&k| (p_eig.values[k] - sector.signum()).abs() < 1e-6)
        .map(|k| p_eig.vector(k))
        .collect();
    let w = DMatrix::from_columns(&cols);
    let hs = w.adjoint() * h_target * &w;
    let eig = eigh(&hs)?;
    let scale = eig.values.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    if eig.values.len() > 1 && eig.values[1] - eig.values[0] < 1e-10 * scale {
        return Err(Error::DegenerateTarget(format!(
            "sector ground state is degenerate (gap {:.3e})",
            eig.values[1] - eig.values[0]
        )));
    }
    Ok((psi0, normalize_phase(&w * eig.vector(0))))
}
