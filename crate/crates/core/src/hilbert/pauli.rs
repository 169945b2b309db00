//! Pauli strings acting on the computational basis of a spin chain.
//!
//! Site `i` of an `n`-spin chain is stored in bit `n - 1 - i` of a basis
//! index, so site 0 is the leftmost Kronecker factor. Bit value 0 is spin up
//! (the `+1` eigenstate of `sigma_z`).

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::Axis;

/// Bit mask of a single site.
#[inline]
pub fn site_bit(spins: usize, site: usize) -> usize {
    1 << (spins - 1 - site)
}

/// A product of Pauli matrices on distinct sites, stored as the bit flips it
/// performs and the sign pattern it applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    /// Sites carrying `x` or `y`.
    pub flip: usize,
    /// Sites carrying `y` or `z`.
    pub sign: usize,
    /// Number of `y` factors.
    pub y_count: u32,
}

impl PauliString {
    pub fn identity() -> Self {
        PauliString { flip: 0, sign: 0, y_count: 0 }
    }

    pub fn from_factors(spins: usize, factors: &[(usize, Axis)]) -> Self {
        let mut p = PauliString::identity();
        for &(site, axis) in factors {
            let bit = site_bit(spins, site);
            assert!(p.flip & bit == 0 && p.sign & bit == 0, "repeated site {site} in Pauli string");
            match axis {
                Axis::X => p.flip |= bit,
                Axis::Y => {
                    p.flip |= bit;
                    p.sign |= bit;
                    p.y_count += 1;
                }
                Axis::Z => p.sign |= bit,
            }
        }
        p
    }

    /// Amplitude `c` in `P|b> = c |b ^ flip>`.
    #[inline]
    pub fn phase(&self, b: usize) -> C64 {
        let base = match self.y_count % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        if (b & self.sign).count_ones() % 2 == 1 {
            -base
        } else {
            base
        }
    }
}

/// A real multiple of a Pauli string, kept symbolically so that it can be
/// re-expressed in a rotated frame before it is turned into numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub factors: Vec<(usize, Axis)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, factors: Vec<(usize, Axis)>) -> Self {
        PauliTerm { coeff, factors }
    }

    pub fn constant(coeff: f64) -> Self {
        PauliTerm { coeff, factors: Vec::new() }
    }

    /// The same operator after the global rotation `U` with
    /// `U^dagger sigma_x U = sigma_z`, `U^dagger sigma_z U = sigma_x`,
    /// `U^dagger sigma_y U = -sigma_y` (a Hadamard on every site).
    pub fn hadamard_rotated(&self) -> Self {
        let mut coeff = self.coeff;
        let factors = self
            .factors
            .iter()
            .map(|&(site, axis)| match axis {
                Axis::X => (site, Axis::Z),
                Axis::Z => (site, Axis::X),
                Axis::Y => {
                    coeff = -coeff;
                    (site, Axis::Y)
                }
            })
            .collect();
        PauliTerm { coeff, factors }
    }
}

/// Dense matrix of a sum of Pauli terms on `spins` sites.
pub fn dense_from_terms(spins: usize, terms: &[PauliTerm]) -> DMatrix<C64> {
    let dim = 1usize << spins;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for term in terms {
        let p = PauliString::from_factors(spins, &term.factors);
        for b in 0..dim {
            m[(b ^ p.flip, b)] += p.phase(b) * term.coeff;
        }
    }
    m
}

/// Applies the normalized Walsh-Hadamard transform `H^{(x)n}` in place.
pub fn walsh_hadamard(v: &mut [C64]) {
    let dim = v.len();
    assert!(dim.is_power_of_two());
    let mut h = 1;
    while h < dim {
        for block in (0..dim).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = (dim as f64).sqrt().recip();
    v.iter_mut().for_each(|x| *x *= scale);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli(axis: Axis) -> DMatrix<C64> {
        dense_from_terms(1, &[PauliTerm::new(1.0, vec![(0, axis)])])
    }

    #[test]
    fn single_site_matrices() {
        let i = C64::new(0.0, 1.0);
        let y = pauli(Axis::Y);
        assert_eq!(y[(0, 1)], -i);
        assert_eq!(y[(1, 0)], i);
        let z = pauli(Axis::Z);
        assert_eq!(z[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(z[(1, 1)], C64::new(-1.0, 0.0));
    }

    #[test]
    fn hadamard_rotation_matches_conjugation() {
        let terms = vec![
            PauliTerm::new(0.7, vec![(0, Axis::X), (2, Axis::Y)]),
            PauliTerm::new(-1.3, vec![(1, Axis::Z)]),
            PauliTerm::constant(0.25),
        ];
        let spins = 3;
        let m = dense_from_terms(spins, &terms);
        let rotated: Vec<_> = terms.iter().map(PauliTerm::hadamard_rotated).collect();
        let r = dense_from_terms(spins, &rotated);
        // U m U with U the Walsh-Hadamard matrix (real, symmetric, involutive)
        let dim = 1 << spins;
        let mut u = DMatrix::<C64>::identity(dim, dim);
        for mut col in u.column_iter_mut() {
            let mut v: Vec<C64> = col.iter().copied().collect();
            walsh_hadamard(&mut v);
            col.iter_mut().zip(v).for_each(|(c, x)| *c = x);
        }
        let conj = &u * &m * &u;
        assert!((conj - r).camax() < 1e-12);
    }
}
