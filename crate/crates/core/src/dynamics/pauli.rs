//! Full tensor-product density matrices with local dephasing.
//!
//! The Hamiltonian is kept as groups of Pauli strings sharing a flip mask,
//! so `H rho` costs one scaled row copy per group and row. Dephasing along
//! `x` is handled in the frame rotated by a Hadamard on every site, where it
//! becomes diagonal: `D(rho)_ab = -Gamma * popcount(a ^ b) * rho_ab`.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;

use super::rk4::Rk4;
use super::Observer;
use crate::error::Result;
use crate::hilbert::pauli::{walsh_hadamard, PauliString, PauliTerm};
use crate::hilbert::{Axis, HamiltonianParts, ModelSpec};
use crate::schedule::Schedule;

struct MaskGroup {
    mask: usize,
    fixed: Vec<C64>,
    drive: Vec<C64>,
    decoupling: Option<Vec<C64>>,
}

pub(crate) struct PauliKernel {
    dim: usize,
    groups: Vec<MaskGroup>,
    /// `Gamma * popcount(a ^ b)` in row-major order.
    decay: Vec<f64>,
    omega: f64,
    /// Whether states live in the Hadamard-rotated frame.
    pub rotated: bool,
}

impl PauliKernel {
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let spins = model.spins;
        let rotated = model.dephasing_axis == Axis::X;
        let terms = model.pauli_terms()?;
        let frame = |ts: &[PauliTerm]| -> Vec<PauliTerm> {
            if rotated {
                ts.iter().map(PauliTerm::hadamard_rotated).collect()
            } else {
                ts.to_vec()
            }
        };
        let dim = 1usize << spins;
        let mut groups: BTreeMap<usize, MaskGroup> = BTreeMap::new();
        let zero = vec![C64::new(0.0, 0.0); dim];
        let mut add = |ts: &[PauliTerm], slot: usize| {
            for term in ts {
                let p = PauliString::from_factors(spins, &term.factors);
                let g = groups.entry(p.flip).or_insert_with(|| MaskGroup {
                    mask: p.flip,
                    fixed: zero.clone(),
                    drive: zero.clone(),
                    decoupling: None,
                });
                let v = match slot {
                    0 => &mut g.fixed,
                    1 => &mut g.drive,
                    _ => g.decoupling.get_or_insert_with(|| zero.clone()),
                };
                // H_{a, a^flip} = phase(a ^ flip) * coeff
                for (a, x) in v.iter_mut().enumerate() {
                    *x += p.phase(a ^ p.flip) * term.coeff;
                }
            }
        };
        add(&frame(&terms.fixed), 0);
        add(&frame(&terms.drive), 1);
        if model.dd_omega != 0.0 {
            add(&frame(&terms.decoupling), 2);
        }
        let gamma = model.gamma_per_ms();
        let decay = (0..dim * dim)
            .map(|i| gamma * ((i / dim) ^ (i % dim)).count_ones() as f64)
            .collect();
        Ok(PauliKernel {
            dim,
            groups: groups.into_values().collect(),
            decay,
            omega: model.dd_omega,
            rotated,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, field: f64, dd: f64, rho: &[C64], out: &mut [C64], k: &mut [C64]) {
        let d = self.dim;
        k.fill(C64::new(0.0, 0.0));
        for g in &self.groups {
            let extra = g.decoupling.as_ref().filter(|_| dd != 0.0);
            for a in 0..d {
                let mut f = g.fixed[a] + g.drive[a] * field;
                if let Some(v) = extra {
                    f += v[a] * dd;
                }
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = (a ^ g.mask) * d;
                let row = &mut k[a * d..(a + 1) * d];
                for (x, r) in row.iter_mut().zip(&rho[src..src + d]) {
                    *x += f * r;
                }
            }
        }
        // -i (H rho - rho H) with rho H = (H rho)^dagger
        for a in 0..d {
            for c in 0..d {
                let i = a * d + c;
                let comm = k[i] - k[c * d + a].conj();
                out[i] = C64::new(comm.im, -comm.re) - rho[i] * self.decay[i];
            }
        }
    }

    /// Integrates a row-major density matrix (already in the kernel frame).
    pub fn evolve(&self, schedule: &Schedule, grid: &[f64], rho: &mut [C64], observer: &mut Observer<'_>) {
        let mut rk = Rk4::new(rho.len());
        let mut k = vec![C64::new(0.0, 0.0); rho.len()];
        let t_f = schedule.t_f;
        let omega = self.omega;
        observer.visit(0, 0.0, rho);
        let mut f = |t: f64, y: &[C64], out: &mut [C64]| {
            let dd = omega * HamiltonianParts::envelope(t / t_f);
            self.rhs(schedule.field_at(t), dd, y, out, &mut k);
        };
        for (step, w) in grid.windows(2).enumerate() {
            rk.step(&mut f, w[0], w[1] - w[0], rho);
            observer.visit(step + 1, w[1], rho);
        }
    }
}

/// `U rho U` for the global Hadamard `U` on a row-major matrix.
pub(crate) fn hadamard_conjugate(rho: &mut [C64], dim: usize) {
    for row in rho.chunks_mut(dim) {
        walsh_hadamard(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); dim];
    for c in 0..dim {
        for r in 0..dim {
            col[r] = rho[r * dim + c];
        }
        walsh_hadamard(&mut col);
        for r in 0..dim {
            rho[r * dim + c] = col[r];
        }
    }
}
