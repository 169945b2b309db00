//! Closed and open time evolution along a field ramp.
//!
//! All integrators are fixed-step RK4. Three representations are used:
//! dense state vectors for closed runs, Pauli-mask density matrices on the
//! full tensor-product space, and irrep blocks for permutation-invariant
//! open runs.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::pauli::walsh_hadamard;
use crate::hilbert::{eigh, initial_state, target_state, Basis, ModelSpec, Variant};
use crate::schedule::Schedule;

mod closed;
mod pauli;
mod rk4;
mod state;
mod symmetric;

use closed::ClosedKernel;
use pauli::{hadamard_conjugate, PauliKernel};
pub use state::{fidelity, state_fidelity, DensityMatrix, QuantumState};
pub use symmetric::{BlockDensity, SymmetricLindblad, MAX_SYMMETRIC_SPINS};

pub const DT_CAP_MS: f64 = 1e-3;
/// Default `dt * ||H(B0)||`.
pub const DT_NORM_PRODUCT: f64 = 0.05;
/// Largest accepted `dt * ||H(B0)||`.
pub const DT_NORM_LIMIT: f64 = 0.1;
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;
pub const NEGATIVITY_LIMIT: f64 = -1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step in ms; `None` picks `min(1e-3, 0.05 / ||H(B0)||)`.
    pub dt: Option<f64>,
    pub convergence_check: bool,
}

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        IntegratorConfig { dt: Some(dt), convergence_check: false }
    }

    pub fn resolve_dt(&self, h_norm: f64) -> Result<f64> {
        match self.dt {
            None => Ok(DT_CAP_MS.min(DT_NORM_PRODUCT / h_norm.max(f64::MIN_POSITIVE))),
            Some(dt) if !(dt > 0.0 && dt.is_finite()) => {
                Err(Error::InvalidConfig(format!("time step must be positive, got {dt}")))
            }
            Some(dt) if dt * h_norm > DT_NORM_LIMIT => Err(Error::InvalidConfig(format!(
                "time step {dt} ms is too large for ||H|| = {h_norm:.3}; need dt * ||H|| <= {DT_NORM_LIMIT}"
            ))),
            Some(dt) => Ok(dt),
        }
    }
}

/// Step boundaries covering `[0, t_f]`.
///
/// Every schedule interval is split into equal steps no longer than `dt`, so
/// no RK4 step straddles a kink of the piecewise-linear ramp. Designed ramps
/// can be extremely steep in their first samples, so steps are also kept
/// short enough that `h^2 |dB/dt| ||dH/dB||` stays below `DT_NORM_PRODUCT^2`,
/// with `||dH/dB||` estimated as `h_norm / B0`.
pub(crate) fn step_grid(schedule: &Schedule, dt: f64, h_norm: f64) -> Vec<f64> {
    let drive = h_norm / schedule.b0();
    let mut grid = vec![0.0];
    for (w, b) in schedule.times.windows(2).zip(schedule.fields.windows(2)) {
        let span = w[1] - w[0];
        let rate = (b[0] - b[1]).abs() / span * drive;
        let h = dt.min(DT_NORM_PRODUCT / rate.sqrt());
        let n = ((span / h).ceil() as usize).max(1);
        grid.extend((1..n).map(|k| w[0] + span * k as f64 / n as f64));
        grid.push(w[1]);
    }
    grid
}

/// Callback invoked every `stride` steps and at the final step.
pub(crate) struct Observer<'a> {
    stride: usize,
    last: usize,
    f: Option<&'a mut dyn FnMut(f64, &[C64])>,
}

impl<'a> Observer<'a> {
    pub fn none() -> Self {
        Observer { stride: 0, last: 0, f: None }
    }

    pub fn new(stride: usize, last: usize, f: &'a mut dyn FnMut(f64, &[C64])) -> Self {
        Observer { stride: stride.max(1), last, f: Some(f) }
    }

    pub fn visit(&mut self, step: usize, t: f64, y: &[C64]) {
        if let Some(f) = self.f.as_mut() {
            if step % self.stride == 0 || step == self.last {
                f(t, y);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t_ms: f64,
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
}

pub fn write_trajectory_csv(points: &[TrajectoryPoint], header: &str) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        writeln!(out, "# {header}").unwrap();
    }
    out.push_str("t_ms,fidelity,trace,purity\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.t_ms, p.fidelity, p.trace, p.purity).unwrap();
    }
    out
}

fn spectral_norm(h: &DMatrix<C64>) -> Result<f64> {
    Ok(eigh(h)?.values.iter().fold(0.0f64, |m, e| m.max(e.abs())))
}

/// `||H(B0)||`, taken on the maximal-spin irrep whenever the model is
/// permutation invariant so that every representation of one model
/// resolves to the same default step.
pub fn reference_norm(model: &ModelSpec) -> Result<f64> {
    if model.variant == Variant::Dicke || !model.is_permutation_symmetric() {
        let parts = model.parts(model.natural_basis())?;
        return spectral_norm(&parts.at(model.b0, 0.0));
    }
    let terms = model.collective_terms().expect("symmetric model");
    let h = crate::hilbert::CollectiveTerm::sum(&terms.fixed, model.spins)
        + crate::hilbert::CollectiveTerm::sum(&terms.drive, model.spins) * C64::new(model.b0, 0.0);
    spectral_norm(&h)
}

fn check_norm(psi: &DVector<C64>) -> Result<f64> {
    let drift = (psi.norm() - 1.0).abs();
    if drift > NORM_DRIFT_LIMIT {
        return Err(Error::NormDrift { drift });
    }
    Ok(drift)
}

fn check_density(trace: f64, min_eigenvalue: f64) -> Result<()> {
    let drift = (trace - 1.0).abs();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(Error::TraceDrift { drift });
    }
    if min_eigenvalue < NEGATIVITY_LIMIT {
        return Err(Error::NegativeEigenvalue { min_eigenvalue });
    }
    Ok(())
}

/// Schrodinger evolution of `psi0` to `t_f`; the norm is not renormalized.
pub fn evolve_closed(
    model: &ModelSpec,
    schedule: &Schedule,
    psi0: &QuantumState,
    cfg: &IntegratorConfig,
) -> Result<QuantumState> {
    let kernel = ClosedKernel::from_model(model, psi0.basis)?;
    check_norm(&psi0.amplitudes).map_err(|_| {
        Error::InvalidConfig(format!("initial state has norm {}", psi0.norm()))
    })?;
    let h_norm = reference_norm(model)?;
    let grid = step_grid(schedule, cfg.resolve_dt(h_norm)?, h_norm);
    let mut psi: Vec<C64> = psi0.amplitudes.iter().copied().collect();
    kernel.evolve(schedule, &grid, &mut psi, &mut Observer::none());
    let out = DVector::from_vec(psi);
    check_norm(&out)?;
    Ok(QuantumState::new(out, psi0.basis))
}

fn row_major(m: &DMatrix<C64>) -> Vec<C64> {
    let d = m.nrows();
    (0..d * d).map(|i| m[(i / d, i % d)]).collect()
}

fn from_row_major(v: &[C64], d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| v[r * d + c])
}

/// Lindblad evolution with local dephasing on the full `2^N` space.
pub fn evolve_lindblad(
    model: &ModelSpec,
    schedule: &Schedule,
    rho0: &DensityMatrix,
    cfg: &IntegratorConfig,
) -> Result<DensityMatrix> {
    let basis = Basis::FullSpin { spins: model.spins };
    if rho0.basis != basis {
        return Err(Error::UnsupportedBasis { what: "local dephasing", basis: rho0.basis });
    }
    let kernel = PauliKernel::from_model(model)?;
    let h_norm = reference_norm(model)?;
    let grid = step_grid(schedule, cfg.resolve_dt(h_norm)?, h_norm);
    let d = kernel.dim();
    let mut rho = row_major(&rho0.matrix);
    if kernel.rotated {
        hadamard_conjugate(&mut rho, d);
    }
    kernel.evolve(schedule, &grid, &mut rho, &mut Observer::none());
    if kernel.rotated {
        hadamard_conjugate(&mut rho, d);
    }
    finish_density(DensityMatrix::new(from_row_major(&rho, d), basis))
}

fn finish_density(rho: DensityMatrix) -> Result<DensityMatrix> {
    let defect = rho.hermiticity_defect();
    if defect > 1e-12 {
        log::debug!("symmetrizing output density matrix (defect {defect:.3e})");
    }
    let rho = rho.symmetrized();
    check_density(rho.trace(), rho.min_eigenvalue()?)?;
    Ok(rho)
}

/// Lindblad evolution of the initial ground state in the irrep-block
/// representation; requires a permutation-invariant Hamiltonian.
pub fn evolve_lindblad_symmetric(
    model: &ModelSpec,
    schedule: &Schedule,
    cfg: &IntegratorConfig,
) -> Result<(BlockDensity, SymmetricLindblad)> {
    let kernel = SymmetricLindblad::new(model)?;
    let grid = step_grid(schedule, cfg.resolve_dt(kernel.h0_norm)?, kernel.h0_norm);
    let mut y = kernel.initial_blocks();
    kernel.evolve(schedule, &grid, &mut y, &mut Observer::none());
    let state = kernel.unpack(&y);
    check_density(state.trace(), state.min_eigenvalue()?)?;
    Ok((state, kernel))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Engine {
    /// State vectors in the given basis.
    Closed(Basis),
    /// Density matrices on the full tensor-product space.
    FullLindblad,
    /// Irrep blocks of a permutation-invariant density matrix.
    SymmetricLindblad,
}

impl Engine {
    /// Closed runs when there is no dephasing, the cheapest faithful open
    /// representation otherwise.
    pub fn select(model: &ModelSpec) -> Result<Engine> {
        if model.gamma_per_s == 0.0 {
            return Ok(Engine::Closed(model.natural_basis()));
        }
        match model.variant {
            Variant::Dicke => Err(Error::InvalidModel(
                "open dynamics is not available for the spin-boson model".into(),
            )),
            _ if model.is_permutation_symmetric() => Ok(Engine::SymmetricLindblad),
            _ => Ok(Engine::FullLindblad),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub fidelity: f64,
    pub trace: f64,
    pub purity: f64,
    pub min_eigenvalue: f64,
    pub steps: usize,
    pub dt: f64,
    pub trajectory: Vec<TrajectoryPoint>,
}

enum Prepared {
    Closed { kernel: ClosedKernel, psi0: Vec<C64>, target: DVector<C64> },
    Full { kernel: PauliKernel, rho0: Vec<C64>, target: DVector<C64> },
    Symmetric { kernel: SymmetricLindblad, y0: Vec<C64> },
}

/// Everything about a run that does not depend on the schedule.
pub struct Simulation {
    pub engine: Engine,
    pub dt: f64,
    h_norm: f64,
    prepared: Prepared,
}

impl Simulation {
    pub fn new(model: &ModelSpec, cfg: &IntegratorConfig) -> Result<Self> {
        Self::with_engine(model, Engine::select(model)?, cfg)
    }

    pub fn with_engine(model: &ModelSpec, engine: Engine, cfg: &IntegratorConfig) -> Result<Self> {
        let h_norm = reference_norm(model)?;
        let prepared = match engine {
            Engine::Closed(basis) => {
                if model.gamma_per_s != 0.0 {
                    return Err(Error::InvalidModel("closed runs need a zero dephasing rate".into()));
                }
                let kernel = ClosedKernel::from_model(model, basis)?;
                let psi0 = initial_state(model, basis)?.amplitudes.iter().copied().collect();
                let target = target_state(model, basis)?.amplitudes;
                Prepared::Closed { kernel, psi0, target }
            }
            Engine::FullLindblad => {
                let basis = Basis::FullSpin { spins: model.spins };
                let kernel = PauliKernel::from_model(model)?;
                let mut psi0: Vec<C64> = initial_state(model, basis)?.amplitudes.iter().copied().collect();
                let mut target: Vec<C64> = target_state(model, basis)?.amplitudes.iter().copied().collect();
                if kernel.rotated {
                    walsh_hadamard(&mut psi0);
                    walsh_hadamard(&mut target);
                }
                let rho0 = psi0.iter().flat_map(|a| psi0.iter().map(move |b| a * b.conj())).collect();
                Prepared::Full { kernel, rho0, target: DVector::from_vec(target) }
            }
            Engine::SymmetricLindblad => {
                let kernel = SymmetricLindblad::new(model)?;
                let y0 = kernel.initial_blocks();
                Prepared::Symmetric { kernel, y0 }
            }
        };
        Ok(Simulation { engine, dt: cfg.resolve_dt(h_norm)?, h_norm, prepared })
    }

    /// Final fidelity with the target; `stride > 0` also records a trajectory.
    pub fn run(&self, schedule: &Schedule, stride: usize) -> Result<RunOutcome> {
        self.run_with_dt(schedule, self.dt, stride)
    }

    pub fn run_with_dt(&self, schedule: &Schedule, dt: f64, stride: usize) -> Result<RunOutcome> {
        let grid = step_grid(schedule, dt, self.h_norm);
        let steps = grid.len() - 1;
        let mut trajectory = Vec::new();
        match &self.prepared {
            Prepared::Closed { kernel, psi0, target } => {
                let mut psi = psi0.clone();
                let obs = |y: &[C64]| {
                    let v = DVector::from_column_slice(y);
                    let n2 = v.norm_squared();
                    (target.dotc(&v).norm_sqr(), n2, n2 * n2)
                };
                let mut rec = |t: f64, y: &[C64]| {
                    let (f, tr, p) = obs(y);
                    trajectory.push(TrajectoryPoint { t_ms: t, fidelity: f, trace: tr, purity: p });
                };
                let mut observer =
                    if stride > 0 { Observer::new(stride, steps, &mut rec) } else { Observer::none() };
                kernel.evolve(schedule, &grid, &mut psi, &mut observer);
                let (fidelity, trace, purity) = obs(&psi);
                check_norm(&DVector::from_vec(psi))?;
                Ok(RunOutcome { fidelity, trace, purity, min_eigenvalue: 0.0, steps, dt, trajectory })
            }
            Prepared::Full { kernel, rho0, target } => {
                let d = kernel.dim();
                let mut rho = rho0.clone();
                let obs = |y: &[C64]| {
                    let mut f = C64::new(0.0, 0.0);
                    for r in 0..d {
                        let row = &y[r * d..(r + 1) * d];
                        let s: C64 = row.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
                        f += target[r].conj() * s;
                    }
                    let trace = (0..d).map(|i| y[i * d + i].re).sum::<f64>();
                    let purity = y.iter().map(|z| z.norm_sqr()).sum::<f64>();
                    (f.re, trace, purity)
                };
                let mut rec = |t: f64, y: &[C64]| {
                    let (f, tr, p) = obs(y);
                    trajectory.push(TrajectoryPoint { t_ms: t, fidelity: f, trace: tr, purity: p });
                };
                let mut observer =
                    if stride > 0 { Observer::new(stride, steps, &mut rec) } else { Observer::none() };
                kernel.evolve(schedule, &grid, &mut rho, &mut observer);
                let (fidelity, trace, purity) = obs(&rho);
                let m = from_row_major(&rho, d);
                let m = (&m + m.adjoint()) * C64::new(0.5, 0.0);
                let min_eigenvalue = eigh(&m)?.values[0];
                check_density(trace, min_eigenvalue)?;
                Ok(RunOutcome { fidelity, trace, purity, min_eigenvalue, steps, dt, trajectory })
            }
            Prepared::Symmetric { kernel, y0 } => {
                let mut y = y0.clone();
                let mut rec = |t: f64, y: &[C64]| {
                    let (f, tr, p) = kernel.observables(y);
                    trajectory.push(TrajectoryPoint { t_ms: t, fidelity: f, trace: tr, purity: p });
                };
                let mut observer =
                    if stride > 0 { Observer::new(stride, steps, &mut rec) } else { Observer::none() };
                kernel.evolve(schedule, &grid, &mut y, &mut observer);
                let (fidelity, trace, purity) = kernel.observables(&y);
                let min_eigenvalue = kernel.unpack(&y).min_eigenvalue()?;
                check_density(trace, min_eigenvalue)?;
                Ok(RunOutcome { fidelity, trace, purity, min_eigenvalue, steps, dt, trajectory })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub value: f64,
    pub value_half: f64,
    /// `|F(dt) - F(dt/2)|`.
    pub difference: f64,
    /// Richardson estimate of the remaining error of `F(dt/2)` for a
    /// fourth-order scheme.
    pub richardson: f64,
}

/// Runs `run` at `dt` and `dt / 2` and compares the results.
pub fn convergence_probe<F>(dt: f64, run: F) -> Result<ConvergenceReport>
where
    F: Fn(f64) -> Result<f64>,
{
    let value = run(dt)?;
    let value_half = run(dt / 2.0)?;
    let difference = (value - value_half).abs();
    Ok(ConvergenceReport { dt, value, value_half, difference, richardson: difference / 15.0 })
}

#[cfg(test)]
mod tests;
