//! Permutation-invariant density matrices under local dephasing.
//!
//! When the Hamiltonian is built from collective operators alone, the state
//! stays invariant under site permutations and decomposes as
//! `rho = sum_j r_j (x) 1_{d_j}` over total-spin irreps `j` with multiplicity
//! `d_j`. Only the `(2j+1)`-dimensional blocks `r_j` are evolved. Local
//! dephasing `sum_i Z_i rho Z_i` couples block `j` to `j` and `j +/- 1`; the
//! coefficients are computed once from explicit irrep bases of the full space,
//! restricted to fixed-magnetization sectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::rk4::Rk4;
use super::state::DensityMatrix;
use super::Observer;
use crate::error::{Error, Result};
use crate::hilbert::pauli::site_bit;
use crate::hilbert::{
    collective_parity, eigh, sector_ground_states, Axis, Basis, CollectiveTerm, HamiltonianParts,
    ModelSpec, TARGET_FIELD_FRACTION,
};
use crate::schedule::Schedule;

/// Spin count above which the explicit irrep bases get too large.
pub const MAX_SYMMETRIC_SPINS: usize = 12;

struct Incoming {
    src: usize,
    /// Index offset `k_src - k_dest`.
    shift: isize,
    /// Row-major `(2j+1)^2` coefficients, zero where the source lacks the index.
    coeff: Vec<f64>,
}

struct Block {
    two_j: usize,
    mult: f64,
    offset: usize,
    fixed: DMatrix<C64>,
    drive: DMatrix<C64>,
    decoupling: DMatrix<C64>,
    incoming: Vec<Incoming>,
}

impl Block {
    fn dim(&self) -> usize {
        self.two_j + 1
    }
}

/// Irrep bases `V[j][k]`: columns `|j, m = j - k, alpha>` on the sector of
/// basis states with `popcount = (N - 2j)/2 + k`.
struct IrrepBases {
    spins: usize,
    sectors: Vec<Vec<usize>>,
    position: Vec<usize>,
    bases: Vec<(usize, Vec<DMatrix<f64>>)>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl IrrepBases {
    fn new(spins: usize) -> Self {
        let dim = 1usize << spins;
        let mut sectors = vec![Vec::new(); spins + 1];
        let mut position = vec![0; dim];
        for b in 0..dim {
            let p = b.count_ones() as usize;
            position[b] = sectors[p].len();
            sectors[p].push(b);
        }
        let mut irreps = IrrepBases { spins, sectors, position, bases: Vec::new() };
        let mut two_j = spins as isize;
        while two_j >= 0 {
            let tj = two_j as usize;
            let p0 = (spins - tj) / 2;
            let hw = irreps.highest_weight(p0);
            let expected = binomial(spins, p0) - if p0 > 0 { binomial(spins, p0 - 1) } else { 0 };
            assert_eq!(hw.ncols(), expected, "multiplicity of 2j={tj}");
            let mut ladder = vec![hw];
            let j = tj as f64 / 2.0;
            for k in 0..tj {
                let m = j - k as f64;
                let norm = (j * (j + 1.0) - m * (m - 1.0)).sqrt();
                let next = irreps.lower(p0 + k, &ladder[k]) / norm;
                ladder.push(next);
            }
            irreps.bases.push((tj, ladder));
            two_j -= 2;
        }
        irreps
    }

    /// Kernel of `S+` on the sector with `p` down spins.
    fn highest_weight(&self, p: usize) -> DMatrix<f64> {
        let cols = self.sectors[p].len();
        if p == 0 {
            return DMatrix::identity(1, 1);
        }
        let rows = self.sectors[p - 1].len();
        let mut raise = DMatrix::<f64>::zeros(rows, cols);
        for (c, &b) in self.sectors[p].iter().enumerate() {
            for i in 0..self.spins {
                let bit = site_bit(self.spins, i);
                if b & bit != 0 {
                    raise[(self.position[b & !bit], c)] += 1.0;
                }
            }
        }
        let gram = raise.transpose() * &raise;
        let eig = SymmetricEigen::new(gram);
        let scale = eig.eigenvalues.amax().max(1.0);
        let keep: Vec<_> = (0..cols)
            .filter(|&k| eig.eigenvalues[k].abs() < 1e-9 * scale)
            .map(|k| eig.eigenvectors.column(k).into_owned())
            .collect();
        DMatrix::from_columns(&keep)
    }

    /// `S-` applied to sector-`p` columns, landing in sector `p + 1`.
    fn lower(&self, p: usize, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::<f64>::zeros(self.sectors[p + 1].len(), v.ncols());
        for (r, &b) in self.sectors[p].iter().enumerate() {
            for i in 0..self.spins {
                let bit = site_bit(self.spins, i);
                if b & bit == 0 {
                    let dest = self.position[b | bit];
                    for c in 0..v.ncols() {
                        out[(dest, c)] += v[(r, c)];
                    }
                }
            }
        }
        out
    }

    /// `sigma_z` on site 0 within the sector with `p` down spins.
    fn z_first(&self, p: usize) -> DVector<f64> {
        let bit = site_bit(self.spins, 0);
        DVector::from_iterator(
            self.sectors[p].len(),
            self.sectors[p].iter().map(|&b| if b & bit == 0 { 1.0 } else { -1.0 }),
        )
    }
}

/// Block-diagonal state `sum_j r_j (x) 1_{d_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDensity {
    pub spins: usize,
    /// `(2j, multiplicity d_j, r_j)` ordered by decreasing `j`.
    pub blocks: Vec<(usize, f64, DMatrix<C64>)>,
    /// Whether the state is expressed in the Hadamard-rotated frame.
    pub rotated: bool,
}

impl BlockDensity {
    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(|(_, d, r)| d * r.trace().re).sum()
    }

    pub fn purity(&self) -> f64 {
        self.blocks.iter().map(|(_, d, r)| d * r.iter().map(|z| z.norm_sqr()).sum::<f64>()).sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut lo = f64::INFINITY;
        for (_, _, r) in &self.blocks {
            let sym = (r + r.adjoint()) * C64::new(0.5, 0.0);
            lo = lo.min(eigh(&sym)?.values[0]);
        }
        Ok(lo)
    }

    /// Fidelity with a state of the maximal-spin irrep.
    pub fn fidelity(&self, target: &DVector<C64>) -> f64 {
        let r = &self.blocks[0].2;
        target.dotc(&(r * target)).re
    }
}

pub struct SymmetricLindblad {
    spins: usize,
    blocks: Vec<Block>,
    irreps: IrrepBases,
    gamma: f64,
    omega: f64,
    pub rotated: bool,
    pub initial: DVector<C64>,
    pub target: DVector<C64>,
    /// Spectral norm of `H(B0)` on the maximal-spin irrep.
    pub h0_norm: f64,
}

impl SymmetricLindblad {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let terms = model.collective_terms().ok_or_else(|| {
            Error::InvalidModel("Hamiltonian is not permutation invariant".into())
        })?;
        let spins = model.spins;
        if spins > MAX_SYMMETRIC_SPINS {
            return Err(Error::InvalidModel(format!(
                "{spins} spins exceed the symmetric-sector limit of {MAX_SYMMETRIC_SPINS}"
            )));
        }
        let rotated = model.dephasing_axis == Axis::X;
        let frame = |ts: &[CollectiveTerm]| -> Vec<CollectiveTerm> {
            if rotated {
                ts.iter().map(CollectiveTerm::hadamard_rotated).collect()
            } else {
                ts.to_vec()
            }
        };
        let (fixed, drive, decoupling) = (frame(&terms.fixed), frame(&terms.drive), frame(&terms.decoupling));
        let irreps = IrrepBases::new(spins);

        let mut blocks = Vec::new();
        let mut offset = 0;
        for (two_j, ladder) in &irreps.bases {
            let dim = two_j + 1;
            blocks.push(Block {
                two_j: *two_j,
                mult: ladder[0].ncols() as f64,
                offset,
                fixed: CollectiveTerm::sum(&fixed, *two_j),
                drive: CollectiveTerm::sum(&drive, *two_j),
                decoupling: CollectiveTerm::sum(&decoupling, *two_j),
                incoming: Vec::new(),
            });
            offset += dim * dim;
        }
        for dest in 0..blocks.len() {
            for src in dest.saturating_sub(1)..(dest + 2).min(blocks.len()) {
                let inc = couplings(&irreps, spins, dest, src, blocks[dest].mult);
                blocks[dest].incoming.push(inc);
            }
        }

        // initial and target states on the maximal irrep, in the kernel frame
        let top = &blocks[0];
        let parity_axis = match model.variant {
            crate::hilbert::Variant::Ising => Axis::Y,
            _ => Axis::X,
        };
        let parity = collective_parity(spins, parity_axis);
        let at = |b: f64| &top.fixed + &top.drive * C64::new(b, 0.0);
        let h0 = at(model.b0);
        let (initial, target) =
            sector_ground_states(&h0, &at(TARGET_FIELD_FRACTION * model.b0), &parity)?;
        let h0_norm = eigh(&h0)?.values.iter().fold(0.0f64, |m, e| m.max(e.abs()));

        Ok(SymmetricLindblad {
            spins,
            blocks,
            irreps,
            gamma: model.gamma_per_ms(),
            omega: model.dd_omega,
            rotated,
            initial,
            target,
            h0_norm,
        })
    }

    fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.dim() * b.dim()).sum()
    }

    pub fn initial_blocks(&self) -> Vec<C64> {
        let mut v = vec![C64::new(0.0, 0.0); self.len()];
        let d = self.blocks[0].dim();
        for r in 0..d {
            for c in 0..d {
                v[r * d + c] = self.initial[r] * self.initial[c].conj();
            }
        }
        v
    }

    pub fn unpack(&self, flat: &[C64]) -> BlockDensity {
        BlockDensity {
            spins: self.spins,
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    let d = b.dim();
                    let r = DMatrix::from_fn(d, d, |i, k| flat[b.offset + i * d + k]);
                    (b.two_j, b.mult, r)
                })
                .collect(),
            rotated: self.rotated,
        }
    }

    fn rhs(&self, field: f64, dd: f64, y: &[C64], out: &mut [C64], k: &mut Vec<C64>) {
        let half_gamma = 0.5 * self.gamma;
        let n = self.spins as f64;
        for b in &self.blocks {
            let d = b.dim();
            let mut h = &b.fixed + &b.drive * C64::new(field, 0.0);
            if dd != 0.0 {
                h += &b.decoupling * C64::new(dd, 0.0);
            }
            let r = &y[b.offset..b.offset + d * d];
            k.clear();
            k.resize(d * d, C64::new(0.0, 0.0));
            for i in 0..d {
                for l in 0..d {
                    let hil = h[(i, l)];
                    if hil == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for c in 0..d {
                        k[i * d + c] += hil * r[l * d + c];
                    }
                }
            }
            let o = &mut out[b.offset..b.offset + d * d];
            for i in 0..d {
                for c in 0..d {
                    let comm = k[i * d + c] - k[c * d + i].conj();
                    o[i * d + c] = C64::new(comm.im, -comm.re) - r[i * d + c] * (half_gamma * n);
                }
            }
            if self.gamma == 0.0 {
                continue;
            }
            for inc in &b.incoming {
                let s = &self.blocks[inc.src];
                let ds = s.dim() as isize;
                for i in 0..d {
                    let is = i as isize + inc.shift;
                    if is < 0 || is >= ds {
                        continue;
                    }
                    for c in 0..d {
                        let w = inc.coeff[i * d + c];
                        if w == 0.0 {
                            continue;
                        }
                        let cs = (c as isize + inc.shift) as usize;
                        o[i * d + c] += y[s.offset + is as usize * s.dim() + cs] * (half_gamma * w);
                    }
                }
            }
        }
    }

    pub(crate) fn evolve(&self, schedule: &Schedule, grid: &[f64], y: &mut [C64], observer: &mut Observer<'_>) {
        let mut rk = Rk4::new(y.len());
        let mut k = Vec::new();
        let t_f = schedule.t_f;
        observer.visit(0, 0.0, y);
        let mut f = |t: f64, y: &[C64], out: &mut [C64]| {
            let dd = self.omega * HamiltonianParts::envelope(t / t_f);
            self.rhs(schedule.field_at(t), dd, y, out, &mut k);
        };
        for (step, w) in grid.windows(2).enumerate() {
            rk.step(&mut f, w[0], w[1] - w[0], y);
            observer.visit(step + 1, w[1], y);
        }
    }

    /// Fidelity, trace and purity of a packed state.
    pub fn observables(&self, y: &[C64]) -> (f64, f64, f64) {
        let d = self.blocks[0].dim();
        let t = &self.target;
        let mut f = C64::new(0.0, 0.0);
        for r in 0..d {
            for c in 0..d {
                f += t[r].conj() * y[r * d + c] * t[c];
            }
        }
        let mut trace = 0.0;
        let mut purity = 0.0;
        for b in &self.blocks {
            let dim = b.dim();
            let blk = &y[b.offset..b.offset + dim * dim];
            trace += b.mult * (0..dim).map(|i| blk[i * dim + i].re).sum::<f64>();
            purity += b.mult * blk.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        (f.re, trace, purity)
    }

    /// Expands a block state to the full `2^N` space (kernel frame).
    pub fn to_full(&self, state: &BlockDensity) -> DensityMatrix {
        let spins = self.spins;
        let dim = 1usize << spins;
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for ((two_j, ladder), (_, _, r)) in self.irreps.bases.iter().zip(&state.blocks) {
            let p0 = (spins - two_j) / 2;
            for k in 0..=*two_j {
                for kp in 0..=*two_j {
                    let w = r[(k, kp)];
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let (va, vb) = (&ladder[k], &ladder[kp]);
                    let (sa, sb) = (&self.irreps.sectors[p0 + k], &self.irreps.sectors[p0 + kp]);
                    for alpha in 0..va.ncols() {
                        for (ia, &a) in sa.iter().enumerate() {
                            let x = va[(ia, alpha)];
                            if x == 0.0 {
                                continue;
                            }
                            for (ib, &b) in sb.iter().enumerate() {
                                m[(a, b)] += w * (x * vb[(ib, alpha)]);
                            }
                        }
                    }
                }
            }
        }
        DensityMatrix::new(m, Basis::FullSpin { spins })
    }
}

/// Coefficients `C[m, m'] = N <A_m, A_m'>_F / d_dest` with
/// `A_m = V_{dest,m}^T Z_1 V_{src,m}`.
fn couplings(irreps: &IrrepBases, spins: usize, dest: usize, src: usize, mult: f64) -> Incoming {
    let (tj, vd) = &irreps.bases[dest];
    let (ts, vs) = &irreps.bases[src];
    let d = tj + 1;
    // k_src = j_src - m = k + (j_src - j_dest)
    let shift = (*ts as isize - *tj as isize) / 2;
    let p0 = (spins - tj) / 2;
    let a: Vec<Option<DMatrix<f64>>> = (0..d)
        .map(|k| {
            let ks = k as isize + shift;
            if ks < 0 || ks > *ts as isize {
                return None;
            }
            let z = irreps.z_first(p0 + k);
            let zv = DMatrix::from_diagonal(&z) * &vs[ks as usize];
            Some(vd[k].transpose() * zv)
        })
        .collect();
    let mut coeff = vec![0.0; d * d];
    for k in 0..d {
        for kp in 0..d {
            if let (Some(x), Some(y)) = (&a[k], &a[kp]) {
                coeff[k * d + kp] = spins as f64 * x.dot(y) / mult;
            }
        }
    }
    Incoming { src, shift, coeff }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicities_fill_the_space() {
        for spins in 1..=8 {
            let irreps = IrrepBases::new(spins);
            let total: usize = irreps.bases.iter().map(|(tj, l)| (tj + 1) * l[0].ncols()).sum();
            assert_eq!(total, 1 << spins);
        }
    }

    #[test]
    fn irrep_bases_are_orthonormal() {
        let irreps = IrrepBases::new(5);
        for (_, ladder) in &irreps.bases {
            for v in ladder {
                let g = v.transpose() * v;
                assert!((g - DMatrix::identity(v.ncols(), v.ncols())).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn dephasing_preserves_trace() {
        let model = ModelSpec::lipkin(5).with_gamma(1000.0);
        let sym = SymmetricLindblad::new(&model).unwrap();
        // arbitrary Hermitian blocks
        let mut y = vec![C64::new(0.0, 0.0); sym.len()];
        for (i, x) in y.iter_mut().enumerate() {
            *x = C64::new((i % 7) as f64 * 0.1, 0.0);
        }
        let st = sym.unpack(&y);
        let mut sym_y = y.clone();
        for b in &sym.blocks {
            let d = b.dim();
            for i in 0..d {
                for c in 0..d {
                    let v = st.blocks.iter().find(|x| x.0 == b.two_j).unwrap().2[(i, c)];
                    sym_y[b.offset + i * d + c] = (v + st.blocks.iter().find(|x| x.0 == b.two_j).unwrap().2[(c, i)].conj()) * 0.5;
                }
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); sym.len()];
        let mut k = Vec::new();
        sym.rhs(0.0, 0.0, &sym_y, &mut out, &mut k);
        let dtrace = sym.unpack(&out).trace();
        assert!(dtrace.abs() < 1e-10, "{dtrace}");
    }
}
