use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::rk4::Rk4;
use super::Observer;
use crate::error::Result;
use crate::hilbert::{HamiltonianParts, ModelSpec};
use crate::schedule::Schedule;

const MINUS_I: C64 = C64::new(0.0, -1.0);

/// Compressed rows of a matrix; the model matrices are mostly zeros.
struct Sparse {
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Sparse {
    fn new(m: &DMatrix<C64>) -> Self {
        let mut starts = vec![0];
        let (mut cols, mut vals) = (Vec::new(), Vec::new());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                let v = m[(r, c)];
                if v != C64::new(0.0, 0.0) {
                    cols.push(c);
                    vals.push(v);
                }
            }
            starts.push(cols.len());
        }
        Sparse { starts, cols, vals }
    }

    /// `out += scale * M y`.
    fn apply_add(&self, scale: f64, y: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for i in self.starts[r]..self.starts[r + 1] {
                acc += self.vals[i] * y[self.cols[i]];
            }
            *o += acc * scale;
        }
    }
}

/// Schrodinger right-hand side `-i (H(t) - e) psi`.
///
/// The scalar `e` is `<psi|H|psi>` frozen at the start of every step. It
/// only changes the global phase of the exact solution, but keeps the
/// dominant component nearly stationary so that RK4 loses almost no norm.
pub(crate) struct ClosedKernel {
    dim: usize,
    fixed: Sparse,
    drive: Sparse,
    decoupling: Sparse,
    omega: f64,
}

impl ClosedKernel {
    pub fn new(parts: HamiltonianParts) -> Self {
        ClosedKernel {
            dim: parts.fixed.nrows(),
            fixed: Sparse::new(&parts.fixed),
            drive: Sparse::new(&parts.drive),
            decoupling: Sparse::new(&parts.decoupling),
            omega: parts.omega,
        }
    }

    pub fn from_model(model: &ModelSpec, basis: crate::hilbert::Basis) -> Result<Self> {
        Ok(Self::new(model.parts(basis)?))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, field: f64, dd: f64, y: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
        self.fixed.apply_add(1.0, y, out);
        self.drive.apply_add(field, y, out);
        if dd != 0.0 {
            self.decoupling.apply_add(dd, y, out);
        }
    }

    /// Integrates `psi` in place over `[0, t_f]`.
    pub fn evolve(&self, schedule: &Schedule, grid: &[f64], psi: &mut [C64], observer: &mut Observer<'_>) {
        let n = self.dim();
        let mut rk = Rk4::new(n);
        let mut hpsi = vec![C64::new(0.0, 0.0); n];
        let t_f = schedule.t_f;
        let envelope = |t: f64| self.omega * HamiltonianParts::envelope(t / t_f);
        observer.visit(0, 0.0, psi);
        for (step, w) in grid.windows(2).enumerate() {
            let (t, h) = (w[0], w[1] - w[0]);
            self.apply(schedule.field_at(t), envelope(t), psi, &mut hpsi);
            let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            let e = psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum::<f64>() / norm2;
            let mut f = |t: f64, y: &[C64], out: &mut [C64]| {
                self.apply(schedule.field_at(t), envelope(t), y, out);
                for (o, yi) in out.iter_mut().zip(y) {
                    *o = (*o - yi * e) * MINUS_I;
                }
            };
            rk.step(&mut f, t, h, psi);
            observer.visit(step + 1, w[1], psi);
        }
    }
}
