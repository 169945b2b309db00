//! Fidelity-versus-final-time curves, peak extraction and parameter sweeps.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{IntegratorConfig, Simulation};
use crate::error::{Error, Result};
use crate::hilbert::{ModelSpec, Variant};
use crate::schedule::{design_profile, spectral_scan, Protocol, RampProfile, DEFAULT_THRESHOLD};

pub const WORKERS_ENV: &str = "CATRAMP_WORKERS";

/// Upper end of the decoupling amplitude explored for the collective model,
/// beyond which adiabatic elimination of the phonons is no longer trusted.
pub const LIPKIN_OMEGA_CEILING: f64 = 0.55;
pub const ISING_OMEGA_CEILING: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakMode {
    FirstPeak,
    GlobalMax,
}

impl PeakMode {
    pub fn name(&self) -> &'static str {
        match self {
            PeakMode::FirstPeak => "first_peak",
            PeakMode::GlobalMax => "global_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "first_peak" => Some(PeakMode::FirstPeak),
            "global_max" => Some(PeakMode::GlobalMax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub t_f: f64,
    pub f_max: f64,
    /// No interior maximum was found; the peak is the best endpoint.
    pub at_endpoint: bool,
}

/// Peak of a sampled curve, refined by the parabola through the peak sample
/// and its two neighbours.
pub fn extract_peak(curve: &[(f64, f64)], mode: PeakMode) -> Result<Peak> {
    if curve.len() < 3 {
        return Err(Error::InvalidConfig("peak extraction needs at least three points".into()));
    }
    let f = |i: usize| curve[i].1;
    let interior = 1..curve.len() - 1;
    let is_peak = |i: usize| f(i) >= f(i - 1) && f(i) >= f(i + 1) && (f(i) > f(i - 1) || f(i) > f(i + 1));
    let found = match mode {
        PeakMode::FirstPeak => interior.clone().find(|&i| is_peak(i)),
        PeakMode::GlobalMax => {
            let best = (0..curve.len()).max_by(|&a, &b| f(a).total_cmp(&f(b)).then(b.cmp(&a))).unwrap();
            interior.contains(&best).then_some(best)
        }
    };
    let Some(i) = found else {
        let last = curve.len() - 1;
        let end = if f(last) >= f(0) { last } else { 0 };
        log::warn!("no interior maximum; reporting endpoint t_f = {}", curve[end].0);
        return Ok(Peak { t_f: curve[end].0, f_max: f(end), at_endpoint: true });
    };
    let (x0, x1, x2) = (curve[i - 1].0, curve[i].0, curve[i + 1].0);
    let (y0, y1, y2) = (f(i - 1), f(i), f(i + 1));
    // Lagrange parabola through the three samples
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if !(a < 0.0) {
        return Ok(Peak { t_f: x1, f_max: y1, at_endpoint: false });
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    Ok(Peak { t_f: xv, f_max: yv.max(y1).min(1.0), at_endpoint: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub model: ModelSpec,
    pub protocol: Protocol,
    pub tf_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub size_grid: Vec<usize>,
    pub peak_mode: PeakMode,
    pub n_grid: usize,
    pub k_max: usize,
    /// Minimum coupling for a level to count as relevant.
    pub threshold: f64,
    pub integrator: IntegratorConfig,
    /// Golden-section refinement of the best decoupling amplitude.
    pub refine: bool,
}

impl SweepConfig {
    pub fn new(model: ModelSpec, protocol: Protocol) -> Self {
        let omega_grid = default_omega_grid(model.variant);
        SweepConfig {
            model,
            protocol,
            tf_grid: default_tf_grid(),
            omega_grid,
            gamma_grid: vec![0.0, 40.0, 80.0, 120.0, 160.0, 200.0],
            size_grid: vec![4, 6, 8, 10],
            peak_mode: PeakMode::FirstPeak,
            n_grid: crate::schedule::DEFAULT_N_GRID,
            k_max: crate::schedule::DEFAULT_K_MAX,
            threshold: DEFAULT_THRESHOLD,
            integrator: IntegratorConfig::default(),
            refine: false,
        }
    }

    fn check_grid<T: PartialOrd>(name: &str, grid: &[T]) -> Result<()> {
        if grid.is_empty() || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(format!("{name} grid must be non-empty and strictly increasing")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::check_grid("t_f", &self.tf_grid)?;
        if self.tf_grid[0] <= 0.0 {
            return Err(Error::InvalidConfig("final times must be positive".into()));
        }
        Self::check_grid("omega", &self.omega_grid)?;
        Self::check_grid("Gamma", &self.gamma_grid)?;
        Self::check_grid("N", &self.size_grid)?;
        self.model.validate()
    }
}

/// 0.2 ms to 14 ms in 0.2 ms steps.
pub fn default_tf_grid() -> Vec<f64> {
    (1..=70).map(|i| (2 * i) as f64 / 10.0).collect()
}

pub fn default_omega_grid(variant: Variant) -> Vec<f64> {
    // 0.025 rad/ms steps up to the ceiling
    let points = match variant {
        Variant::Ising => 31,
        _ => 23,
    };
    (0..points).map(|i| (25 * i) as f64 / 1000.0).collect()
}

/// Why the default decoupling grid stops where it does.
pub fn omega_ceiling_note(variant: Variant) -> String {
    match variant {
        Variant::Ising => format!(
            "omega grid capped at {ISING_OMEGA_CEILING} rad/ms: the optimum for every tested protocol lies \
             well below, and larger amplitudes compete with the transverse field"
        ),
        _ => format!(
            "omega grid capped at {LIPKIN_OMEGA_CEILING} rad/ms: beyond it the decoupling drive is comparable \
             to J/N and the effective collective model is no longer trusted"
        ),
    }
}

/// Ramp profile of `protocol` for `model`, designed without decoupling.
pub fn ramp_profile(
    model: &ModelSpec,
    protocol: Protocol,
    n_grid: usize,
    k_max: usize,
    threshold: f64,
) -> Result<RampProfile> {
    let k = match protocol {
        Protocol::Faquad(k) => k_max.max(k),
        Protocol::La => k_max,
    };
    let scan = spectral_scan(model, n_grid, k)?;
    design_profile(&scan, protocol, threshold)
}

/// Fidelity at every final time of the grid, with a fresh schedule per point.
pub fn fidelity_curve(cfg: &SweepConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let profile = ramp_profile(&cfg.model, cfg.protocol, cfg.n_grid, cfg.k_max, cfg.threshold)?;
    curve_for(&cfg.model, &profile, &cfg.tf_grid, &cfg.integrator)
}

fn curve_for(
    model: &ModelSpec,
    profile: &RampProfile,
    tf_grid: &[f64],
    integrator: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    let sim = Simulation::new(model, integrator)?;
    tf_grid
        .par_iter()
        .map(|&t_f| Ok((t_f, sim.run(&profile.schedule(t_f)?, 0)?.fidelity)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub value: f64,
    pub first_peak: Peak,
    pub global_max: Peak,
    pub model: ModelSpec,
    pub protocol: Protocol,
    pub dt_ms: f64,
    pub curve: Vec<(f64, f64)>,
}

impl SweepRecord {
    pub fn peak(&self, mode: PeakMode) -> Peak {
        match mode {
            PeakMode::FirstPeak => self.first_peak,
            PeakMode::GlobalMax => self.global_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub n_grid: usize,
    pub k_max: usize,
    pub version: String,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub swept_param: String,
    pub peak_mode: PeakMode,
    pub records: Vec<SweepRecord>,
    pub provenance: Provenance,
    pub config: SweepConfig,
}

fn record(
    model: &ModelSpec,
    protocol: Protocol,
    profile: &RampProfile,
    cfg: &SweepConfig,
    value: f64,
) -> Result<SweepRecord> {
    let sim = Simulation::new(model, &cfg.integrator)?;
    let curve: Vec<(f64, f64)> = cfg
        .tf_grid
        .par_iter()
        .map(|&t_f| Ok((t_f, sim.run(&profile.schedule(t_f)?, 0)?.fidelity)))
        .collect::<Result<_>>()?;
    Ok(SweepRecord {
        value,
        first_peak: extract_peak(&curve, PeakMode::FirstPeak)?,
        global_max: extract_peak(&curve, PeakMode::GlobalMax)?,
        model: model.clone(),
        protocol,
        dt_ms: sim.dt,
        curve,
    })
}

fn provenance(cfg: &SweepConfig, notes: Vec<String>) -> Provenance {
    Provenance {
        n_grid: cfg.n_grid,
        k_max: cfg.k_max,
        version: env!("CARGO_PKG_VERSION").to_string(),
        notes,
    }
}

/// One record per final-time curve, with no swept parameter.
pub fn tf_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let profile = ramp_profile(&cfg.model, cfg.protocol, cfg.n_grid, cfg.k_max, cfg.threshold)?;
    let rec = record(&cfg.model, cfg.protocol, &profile, cfg, cfg.model.dd_omega)?;
    Ok(SweepResult {
        swept_param: "none".into(),
        peak_mode: cfg.peak_mode,
        records: vec![rec],
        provenance: provenance(cfg, vec![]),
        config: cfg.clone(),
    })
}

/// Peak fidelity for every decoupling amplitude.
pub fn dd_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.model.variant == Variant::Dicke {
        return Err(Error::InvalidModel("the Dicke variant has no decoupling term".into()));
    }
    let profile = ramp_profile(&cfg.model, cfg.protocol, cfg.n_grid, cfg.k_max, cfg.threshold)?;
    let at = |omega: f64| {
        let model = cfg.model.clone().with_decoupling(omega, cfg.model.dd_alpha_tilde);
        record(&model, cfg.protocol, &profile, cfg, omega)
    };
    let mut records: Vec<SweepRecord> = cfg.omega_grid.par_iter().map(|&w| at(w)).collect::<Result<_>>()?;
    let mut notes = vec![omega_ceiling_note(cfg.model.variant)];
    if cfg.refine && records.len() >= 3 {
        let score = |r: &SweepRecord| r.peak(cfg.peak_mode).f_max;
        let best = (0..records.len()).max_by(|&a, &b| score(&records[a]).total_cmp(&score(&records[b]))).unwrap();
        let lo = records[best.saturating_sub(1)].value;
        let hi = records[(best + 1).min(records.len() - 1)].value;
        let refined = golden_section(lo, hi, 6, |w| Ok(score(&at(w)?)))?;
        let rec = at(refined)?;
        notes.push(format!("golden-section refinement around {} gave {}", records[best].value, refined));
        if !records.iter().any(|r| r.value == refined) {
            records.push(rec);
        }
        records.sort_by(|a, b| a.value.total_cmp(&b.value));
    }
    Ok(SweepResult {
        swept_param: "omega_kHz".into(),
        peak_mode: cfg.peak_mode,
        records,
        provenance: provenance(cfg, notes),
        config: cfg.clone(),
    })
}

/// Maximizes `f` on `[lo, hi]` with `iterations` golden-section steps.
pub fn golden_section(mut lo: f64, mut hi: f64, iterations: usize, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..iterations {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { x1 } else { x2 })
}

/// Peak fidelity for every dephasing rate.
pub fn gamma_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let profile = ramp_profile(&cfg.model, cfg.protocol, cfg.n_grid, cfg.k_max, cfg.threshold)?;
    let records = cfg
        .gamma_grid
        .par_iter()
        .map(|&g| record(&cfg.model.clone().with_gamma(g), cfg.protocol, &profile, cfg, g))
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        swept_param: "Gamma_per_s".into(),
        peak_mode: cfg.peak_mode,
        records,
        provenance: provenance(cfg, vec![]),
        config: cfg.clone(),
    })
}

/// Model resized to `spins`, keeping the collective coupling per spin fixed.
pub fn resized(model: &ModelSpec, spins: usize) -> ModelSpec {
    let mut m = model.clone();
    if model.variant == Variant::Lipkin {
        m.coupling = model.coupling * spins as f64 / model.spins as f64;
    }
    m.spins = spins;
    m
}

/// Peak fidelity for every chain size.
pub fn size_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let records = cfg
        .size_grid
        .par_iter()
        .map(|&n| {
            let model = resized(&cfg.model, n);
            let profile = ramp_profile(&model, cfg.protocol, cfg.n_grid, cfg.k_max, cfg.threshold)?;
            record(&model, cfg.protocol, &profile, cfg, n as f64)
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        swept_param: "N".into(),
        peak_mode: cfg.peak_mode,
        records,
        provenance: provenance(cfg, vec![]),
        config: cfg.clone(),
    })
}

pub const SWEEP_COLUMNS: &str =
    "swept_param,value,F_max,t_f_star_ms,peak_mode,protocol,N,J,alpha,alpha_tilde,omega_kHz,Gamma_per_s,dt_ms";

/// Two rows per record, one per peak mode, the configured mode first.
pub fn sweep_csv(result: &SweepResult, header: &str) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        writeln!(out, "# {header}").unwrap();
    }
    writeln!(out, "{SWEEP_COLUMNS}").unwrap();
    let modes = match result.peak_mode {
        PeakMode::FirstPeak => [PeakMode::FirstPeak, PeakMode::GlobalMax],
        PeakMode::GlobalMax => [PeakMode::GlobalMax, PeakMode::FirstPeak],
    };
    for r in &result.records {
        let m = &r.model;
        let j = match m.variant {
            Variant::Lipkin => m.coupling,
            Variant::Ising => m.j_max,
            Variant::Dicke => m.g0 * m.g0 / m.delta.abs(),
        };
        for mode in modes {
            let p = r.peak(mode);
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                result.swept_param,
                r.value,
                p.f_max,
                p.t_f,
                mode.name(),
                r.protocol,
                m.spins,
                j,
                m.alpha,
                m.dd_alpha_tilde,
                m.dd_omega,
                m.gamma_per_s,
                r.dt_ms
            )
            .unwrap();
        }
    }
    out
}

pub fn curve_csv(curve: &[(f64, f64)], header: &str) -> String {
    let mut out = String::new();
    if !header.is_empty() {
        writeln!(out, "# {header}").unwrap();
    }
    out.push_str("t_f_ms,fidelity\n");
    for (t, f) in curve {
        writeln!(out, "{t},{f}").unwrap();
    }
    out
}
