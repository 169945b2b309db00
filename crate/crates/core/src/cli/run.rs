//! Executes a resolved manifest and writes its artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::RunManifest;
use crate::dynamics::{
    convergence_probe, write_trajectory_csv, ConvergenceReport, Engine, IntegratorConfig, Simulation,
};
use crate::error::{Error, Result};
use crate::hilbert::{initial_state, target_state, Variant};
use crate::lab::{self, SweepResult};
use crate::schedule::{
    adiabaticity_profile, design_profile, parse_schedule_csv, spectral_scan, write_schedule_csv_tagged, Protocol,
    Schedule,
};

/// Largest chain for which `validate` also runs the full `4^N` density matrix.
const VALIDATE_FULL_SPINS: usize = 6;
/// Dephasing rate used by `validate` when the manifest has none.
const VALIDATE_GAMMA_PER_S: f64 = 120.0;

#[derive(Debug, Default)]
pub struct Outcome {
    /// Human-readable result lines for stdout.
    pub summary: Vec<String>,
    pub files: Vec<PathBuf>,
    /// Names of failed property checks (`validate` only).
    pub failed: Vec<String>,
}

impl Outcome {
    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        fs::write(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

pub fn execute(m: &RunManifest) -> Result<Outcome> {
    let command = m
        .command
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("no command given".into()))?;
    let dir = PathBuf::from(&m.output.dir);
    fs::create_dir_all(&dir)?;
    let mut out = Outcome::default();
    match command {
        "design" => {
            let schedule = designed(m)?;
            out.summary.push(format!(
                "{} ramp over {} ms, adiabaticity constant c = {}",
                schedule.protocol, schedule.t_f, schedule.c_value
            ));
            out.write(&dir, "schedule.csv", &schedule_csv(m, &schedule))?;
        }
        "evolve" => evolve(m, &dir, &mut out)?,
        "sweep-tf" => sweep(m, &dir, "tf", lab::tf_sweep, &mut out)?,
        "sweep-dd" => sweep(m, &dir, "dd", lab::dd_sweep, &mut out)?,
        "sweep-gamma" => sweep(m, &dir, "gamma", lab::gamma_sweep, &mut out)?,
        "sweep-size" => sweep(m, &dir, "size", lab::size_sweep, &mut out)?,
        "validate" => validate(m, &dir, &mut out)?,
        other => return Err(Error::InvalidConfig(format!("unknown command `{other}`"))),
    }
    Ok(out)
}

fn header(m: &RunManifest) -> String {
    format!("manifest_hash={}", m.hash())
}

fn schedule_csv(m: &RunManifest, schedule: &Schedule) -> String {
    write_schedule_csv_tagged(schedule, &m.model_hash(), Some(&m.hash()))
}

fn designed(m: &RunManifest) -> Result<Schedule> {
    let n = &m.numerics;
    lab::ramp_profile(&m.model, m.run.protocol, n.n_grid, n.k_max, n.threshold)?.schedule(m.run.t_f)
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    manifest_hash: String,
    engine: Engine,
    protocol: String,
    t_f_ms: f64,
    fidelity: f64,
    trace: f64,
    purity: f64,
    min_eigenvalue: f64,
    steps: usize,
    dt_ms: f64,
    schedule_source: &'a str,
    convergence: Option<ConvergenceReport>,
}

fn evolve(m: &RunManifest, dir: &Path, out: &mut Outcome) -> Result<()> {
    let (schedule, source) = match &m.run.schedule_csv {
        Some(path) => {
            let (s, hash) = parse_schedule_csv(&fs::read_to_string(path)?)?;
            if hash != m.model_hash() {
                log::warn!("{path} was designed for a different model (model_hash {hash})");
            }
            (s, path.as_str())
        }
        None => {
            let s = designed(m)?;
            out.write(dir, "schedule.csv", &schedule_csv(m, &s))?;
            (s, "designed")
        }
    };
    let sim = Simulation::new(&m.model, &m.numerics.integrator)?;
    let run = sim.run(&schedule, m.output.stride)?;
    let convergence = if m.numerics.integrator.convergence_check {
        let report = convergence_probe(sim.dt, |dt| Ok(sim.run_with_dt(&schedule, dt, 0)?.fidelity))?;
        if report.difference > 1e-5 {
            log::warn!("|F(dt) - F(dt/2)| = {:.3e} exceeds 1e-5; reduce numerics.dt_ms", report.difference);
        }
        out.summary.push(format!("step-halving difference {:.3e}", report.difference));
        Some(report)
    } else {
        None
    };
    out.summary.push(format!(
        "{} at t_f = {} ms: F = {:.6}, trace = {:.9}, purity = {:.6} ({} steps)",
        schedule.protocol, schedule.t_f, run.fidelity, run.trace, run.purity, run.steps
    ));
    let report = EvolveReport {
        manifest_hash: m.hash(),
        engine: sim.engine,
        protocol: schedule.protocol.to_string(),
        t_f_ms: schedule.t_f,
        fidelity: run.fidelity,
        trace: run.trace,
        purity: run.purity,
        min_eigenvalue: run.min_eigenvalue,
        steps: run.steps,
        dt_ms: run.dt,
        schedule_source: source,
        convergence,
    };
    out.write(dir, "evolve.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    if m.output.stride > 0 {
        out.write(dir, "trajectory.csv", &write_trajectory_csv(&run.trajectory, &header(m)))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    manifest_hash: String,
    manifest: String,
    result: &'a SweepResult,
}

fn sweep(
    m: &RunManifest,
    dir: &Path,
    name: &str,
    f: fn(&lab::SweepConfig) -> Result<SweepResult>,
    out: &mut Outcome,
) -> Result<()> {
    let result = f(&m.sweep_config())?;
    for r in &result.records {
        let p = r.peak(result.peak_mode);
        out.summary.push(format!(
            "{} = {}: F_max = {:.4} at t_f = {:.3} ms ({}{})",
            result.swept_param,
            r.value,
            p.f_max,
            p.t_f,
            result.peak_mode.name(),
            if p.at_endpoint { ", endpoint" } else { "" }
        ));
    }
    out.write(dir, &format!("sweep_{name}.csv"), &lab::sweep_csv(&result, &header(m)))?;
    let sidecar = Sidecar { manifest_hash: m.hash(), manifest: m.echo(), result: &result };
    out.write(dir, &format!("sweep_{name}.json"), &(serde_json::to_string_pretty(&sidecar)? + "\n"))?;
    if name == "tf" {
        out.write(dir, "curve_tf.csv", &lab::curve_csv(&result.records[0].curve, &header(m)))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub value: Option<f64>,
    pub limit: String,
    pub detail: String,
}

impl Check {
    fn skip(name: &'static str, why: &str) -> Self {
        Check { name, status: Status::Skip, value: None, limit: String::new(), detail: why.into() }
    }

    /// Passes when `value` lies in `[lo, hi]`; a failed computation fails.
    fn within(name: &'static str, value: Result<f64>, lo: f64, hi: f64) -> Self {
        let limit = match (lo.is_finite(), hi.is_finite()) {
            (true, true) => format!("[{lo:e}, {hi:e}]"),
            (true, false) => format!(">= {lo:e}"),
            _ => format!("<= {hi:e}"),
        };
        match value {
            Ok(v) => Check {
                name,
                status: if v >= lo && v <= hi { Status::Pass } else { Status::Fail },
                value: Some(v),
                limit,
                detail: String::new(),
            },
            Err(e) => Check { name, status: Status::Fail, value: None, limit, detail: e.to_string() },
        }
    }

    fn at_most(name: &'static str, value: Result<f64>, hi: f64) -> Self {
        Self::within(name, value, f64::NEG_INFINITY, hi)
    }
}

/// Built-in invariant suite on the manifest's model at `run.t_f_ms`.
pub fn property_checks(m: &RunManifest) -> Result<Vec<Check>> {
    let n = &m.numerics;
    let cfg: IntegratorConfig = n.integrator;
    let closed = m.model.clone().with_gamma(0.0);
    let scan = spectral_scan(&closed, n.n_grid, n.k_max)?;
    let profile = design_profile(&scan, Protocol::Faquad(1), n.threshold)?;
    let schedule = profile.schedule(m.run.t_f)?;
    let level = profile.levels[0];
    let mut checks = Vec::new();

    let b = &schedule.fields;
    checks.push(Check::at_most(
        "schedule_endpoints",
        Ok((b[0] - m.model.b0).abs().max(b[b.len() - 1].abs())),
        0.0,
    ));
    checks.push(Check::within(
        "faquad_flatness",
        adiabaticity_profile(&schedule, &scan, level).map(|c| {
            // the one-sided slopes at the two ends are not representative
            let inner = &c[c.len() / 40..c.len() - c.len() / 40];
            let (lo, hi) = inner.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
            hi / lo
        }),
        1.0,
        1.05,
    ));

    let basis = m.model.natural_basis();
    let sector = || -> Result<f64> {
        let parity = m.model.parity(basis)?.matrix;
        let expect = |psi: &nalgebra::DVector<num_complex::Complex64>| psi.dotc(&(&parity * psi)).re;
        let p0 = expect(&initial_state(&m.model, basis)?.amplitudes);
        let pt = expect(&target_state(&m.model, basis)?.amplitudes);
        Ok((p0 - pt).abs().max((p0.abs() - 1.0).abs()))
    };
    checks.push(Check::at_most("target_parity_sector", sector(), 1e-9));

    let closed_fidelity = Simulation::new(&closed, &cfg).and_then(|s| s.run(&schedule, 0));
    checks.push(Check::at_most(
        "closed_norm_drift",
        closed_fidelity.as_ref().map(|r| (r.trace.sqrt() - 1.0).abs()).map_err(clone_err),
        1e-9,
    ));

    if m.model.variant == Variant::Dicke {
        for name in ["open_trace_drift", "open_min_eigenvalue", "lindblad_gamma0_vs_closed", "symmetric_vs_full"] {
            checks.push(Check::skip(name, "the spin-boson model has no open dynamics"));
        }
    } else {
        let gamma = if m.model.gamma_per_s > 0.0 { m.model.gamma_per_s } else { VALIDATE_GAMMA_PER_S };
        let open = m.model.clone().with_gamma(gamma);
        let open_run = Simulation::new(&open, &cfg).and_then(|s| s.run(&schedule, 0));
        checks.push(Check::at_most(
            "open_trace_drift",
            open_run.as_ref().map(|r| (r.trace - 1.0).abs()).map_err(clone_err),
            1e-8,
        ));
        checks.push(Check::within(
            "open_min_eigenvalue",
            open_run.as_ref().map(|r| r.min_eigenvalue).map_err(clone_err),
            -1e-7,
            f64::INFINITY,
        ));

        let symmetric = m.model.is_permutation_symmetric();
        let small = m.model.spins <= VALIDATE_FULL_SPINS;
        let lindblad_engine = if symmetric { Engine::SymmetricLindblad } else { Engine::FullLindblad };
        if symmetric || small {
            let gap = Simulation::with_engine(&closed, lindblad_engine, &cfg).and_then(|s| s.run(&schedule, 0));
            let diff = match (&gap, &closed_fidelity) {
                (Ok(a), Ok(b)) => Ok((a.fidelity - b.fidelity).abs()),
                (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
            };
            checks.push(Check::at_most("lindblad_gamma0_vs_closed", diff, 1e-8));
        } else {
            checks.push(Check::skip("lindblad_gamma0_vs_closed", "chain too long for the full density matrix"));
        }
        if symmetric && small {
            let full = Simulation::with_engine(&open, Engine::FullLindblad, &cfg).and_then(|s| s.run(&schedule, 0));
            let diff = match (&full, &open_run) {
                (Ok(a), Ok(b)) => Ok((a.fidelity - b.fidelity).abs()),
                (Err(e), _) | (_, Err(e)) => Err(clone_err(e)),
            };
            checks.push(Check::at_most("symmetric_vs_full", diff, 1e-9));
        } else {
            checks.push(Check::skip("symmetric_vs_full", "needs a permutation-symmetric model with N <= 6"));
        }
    }
    Ok(checks)
}

fn clone_err(e: &Error) -> Error {
    Error::InvalidConfig(e.to_string())
}

#[derive(Serialize)]
struct ValidateReport {
    manifest_hash: String,
    t_f_ms: f64,
    checks: Vec<Check>,
}

fn validate(m: &RunManifest, dir: &Path, out: &mut Outcome) -> Result<()> {
    let checks = property_checks(m)?;
    for c in &checks {
        let status = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        let value = c.value.map_or("-".to_string(), |v| format!("{v:.3e}"));
        out.summary.push(format!("{status} {} value={value} limit={} {}", c.name, c.limit, c.detail).trim_end().into());
        if c.status == Status::Fail {
            out.failed.push(c.name.to_string());
        }
    }
    let report = ValidateReport { manifest_hash: m.hash(), t_f_ms: m.run.t_f, checks };
    out.write(dir, "validate.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(())
}
