//! Run manifests: flat `section.key = value` text with unit-suffixed keys.
//!
//! ```text
//! # open Lipkin chain, N = 6
//! command = sweep-tf
//! model.variant = lipkin
//! model.N = 6
//! model.Gamma_per_s: 120
//! run.protocol = FAQUAD
//! ```
//!
//! Either `=` or `:` separates key and value and `#` starts a comment.
//! Physical quantities carry their unit in the key: `_kHz_over_2pi` values
//! are multiplied by `2 pi`, `_kHz` values are angular frequencies already
//! (rad/ms), `_per_s` rates are in s^-1 and `_ms` times in ms. Keys left out
//! take the defaults of [`RunManifest::defaults`]; the canonical form
//! written by [`RunManifest::echo`] parses back to the same manifest.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::dynamics::IntegratorConfig;
use crate::error::ManifestError;
use crate::hilbert::{ModelSpec, Variant};
use crate::lab::{default_omega_grid, default_tf_grid, PeakMode, SweepConfig};
use crate::schedule::{Protocol, DEFAULT_K_MAX, DEFAULT_N_GRID, DEFAULT_THRESHOLD};

type Result<T> = std::result::Result<T, ManifestError>;

pub const COMMANDS: [&str; 7] = ["design", "evolve", "sweep-tf", "sweep-dd", "sweep-gamma", "sweep-size", "validate"];

/// Every accepted key in echo order.
pub const KEYS: [&str; 31] = [
    "command",
    "model.variant",
    "model.N",
    "model.J_kHz",
    "model.Jmax_kHz",
    "model.alpha",
    "model.g0_kHz",
    "model.delta_kHz",
    "model.nbar",
    "model.B0_kHz_over_2pi",
    "model.omega_kHz",
    "model.alpha_tilde",
    "model.Gamma_per_s",
    "model.dephasing_axis",
    "model.ferromagnetic",
    "run.protocol",
    "run.t_f_ms",
    "run.peak_mode",
    "run.schedule_csv",
    "numerics.dt_ms",
    "numerics.n_grid",
    "numerics.K_max",
    "numerics.threshold",
    "numerics.convergence_check",
    "sweep.tf_grid_ms",
    "sweep.omega_grid_kHz",
    "sweep.gamma_grid_per_s",
    "sweep.size_grid",
    "sweep.refine",
    "output.dir",
    "output.stride",
];

const MAX_GRID_POINTS: usize = 100_000;
const MAX_SPINS: usize = 64;

const UNIT_SUFFIXES: [&str; 8] = ["_kHz_over_2pi", "_rad_per_ms", "_per_ms", "_per_s", "_kHz", "_MHz", "_Hz", "_ms"];

fn strip_unit(key: &str) -> &str {
    UNIT_SUFFIXES.iter().find_map(|s| key.strip_suffix(s)).unwrap_or(key)
}

/// Keys that only make sense for some variants.
fn applies_to(key: &str, variant: Variant) -> bool {
    use Variant::*;
    match key {
        "model.J_kHz" => variant == Lipkin,
        "model.Jmax_kHz" | "model.alpha" | "model.alpha_tilde" => variant == Ising,
        "model.g0_kHz" | "model.delta_kHz" | "model.nbar" => variant == Dicke,
        "model.omega_kHz" | "model.Gamma_per_s" | "model.dephasing_axis" | "sweep.omega_grid_kHz"
        | "sweep.gamma_grid_per_s" => variant != Dicke,
        _ => true,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunBlock {
    pub protocol: Protocol,
    pub t_f: f64,
    /// `None` picks `first_peak` for `sweep-dd` and `global_max` otherwise.
    pub peak_mode: Option<PeakMode>,
    /// Replaces the designed ramp in `evolve`.
    pub schedule_csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsBlock {
    pub integrator: IntegratorConfig,
    pub n_grid: usize,
    pub k_max: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub tf_grid: Vec<f64>,
    pub omega_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub size_grid: Vec<usize>,
    pub refine: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBlock {
    pub dir: String,
    /// Trajectory sampling stride in steps; 0 records none.
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: Option<String>,
    pub model: ModelSpec,
    /// `B0 / (2 pi)` exactly as written, so that echoing is lossless.
    pub b0_over_2pi: f64,
    pub run: RunBlock,
    pub numerics: NumericsBlock,
    pub sweep: SweepBlock,
    pub output: OutputBlock,
}

/// Splits `key=value` as given to `--set`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| ManifestError::Syntax { line: 0, msg: format!("override `{s}` is not key=value") })?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let cut = match (line.find('='), line.find(':')) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                return Err(ManifestError::Syntax { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })
            }
        };
        let key = line[..cut].trim();
        let value = line[cut + 1..].trim();
        if key.is_empty() || key.contains(char::is_whitespace) {
            return Err(ManifestError::Syntax { line: i + 1, msg: format!("bad key `{key}`") });
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ManifestError::DuplicateKey(key.to_string()));
        }
    }
    Ok(out)
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        return Ok(());
    }
    let base = strip_unit(key);
    match KEYS.iter().find(|k| strip_unit(k) == base) {
        Some(k) => Err(ManifestError::UnitMismatch { key: key.to_string(), expected: format!("`{k}`") }),
        None => Err(ManifestError::UnknownKey(key.to_string())),
    }
}

fn bad(key: &str, msg: impl Into<String>) -> ManifestError {
    ManifestError::BadValue { key: key.to_string(), msg: msg.into() }
}

fn number(key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(bad(key, format!("`{v}` is not a finite number"))),
    }
}

fn count(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, format!("`{v}` is not a non-negative integer")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, format!("`{v}` is not true or false"))),
    }
}

/// Comma-separated numbers; an item `lo:hi:step` expands to an inclusive range.
fn number_list(key: &str, v: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').map(str::trim).collect();
        match parts[..] {
            [x] => out.push(number(key, x)?),
            [lo, hi, step] => {
                let (lo, hi, step) = (number(key, lo)?, number(key, hi)?, number(key, step)?);
                if !(step > 0.0) || hi < lo {
                    return Err(bad(key, format!("bad range `{item}`")));
                }
                let n = ((hi - lo) / step + 1e-9).floor();
                if n > MAX_GRID_POINTS as f64 {
                    return Err(bad(key, format!("range `{item}` has more than {MAX_GRID_POINTS} points")));
                }
                let n = n as usize;
                // rounding keeps 0.2 + 2 * 0.2 at 0.6 rather than 0.6000000000000001
                out.extend((0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9));
            }
            _ => return Err(bad(key, format!("bad list item `{item}`"))),
        }
    }
    if out.is_empty() || out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, "grid must be non-empty and strictly increasing"));
    }
    Ok(out)
}

fn path_value(v: &str) -> String {
    v.trim_matches('"').to_string()
}

impl RunManifest {
    /// Defaults for a chain of `spins` of the given variant.
    ///
    /// | key | default |
    /// |---|---|
    /// | `model.J_kHz` | `0.55 N` (Lipkin) |
    /// | `model.Jmax_kHz` | `0.55` (Ising) |
    /// | `model.alpha`, `model.alpha_tilde` | `0` |
    /// | `model.nbar` | `10` (Dicke) |
    /// | `model.B0_kHz_over_2pi` | `7` |
    /// | `model.omega_kHz`, `model.Gamma_per_s` | `0` |
    /// | `model.dephasing_axis` | `z`, or `x` for Ising |
    /// | `model.ferromagnetic` | `true` |
    /// | `run.protocol`, `run.t_f_ms` | `FAQUAD`, `4.8` |
    /// | `run.peak_mode` | `auto`: `first_peak` for `sweep-dd`, `global_max` otherwise |
    /// | `numerics.dt_ms` | `auto`: `min(1e-3, 0.05 / ||H(B0)||)` |
    /// | `numerics.n_grid`, `numerics.K_max`, `numerics.threshold` | `2001`, `5`, `1e-6` |
    /// | `sweep.tf_grid_ms` | `0.2:14:0.2` |
    /// | `sweep.omega_grid_kHz` | `0:0.55:0.025`, or `0:0.75:0.025` for Ising |
    /// | `sweep.gamma_grid_per_s` | `0, 40, 80, 120, 160, 200` |
    /// | `sweep.size_grid` | `4, 6, 8, 10` |
    /// | `output.dir`, `output.stride` | `.`, `0` |
    pub fn defaults(variant: Variant, spins: usize) -> Self {
        let model = match variant {
            Variant::Lipkin => ModelSpec::lipkin(spins),
            Variant::Ising => ModelSpec::ising(spins, 0.0),
            Variant::Dicke => ModelSpec::dicke(spins, 0.0, 0.0, 10),
        };
        let sweep = SweepConfig::new(model.clone(), Protocol::Faquad(1));
        RunManifest {
            command: None,
            model,
            b0_over_2pi: 7.0,
            run: RunBlock { protocol: Protocol::Faquad(1), t_f: 4.8, peak_mode: None, schedule_csv: None },
            numerics: NumericsBlock {
                integrator: IntegratorConfig::default(),
                n_grid: DEFAULT_N_GRID,
                k_max: DEFAULT_K_MAX,
                threshold: DEFAULT_THRESHOLD,
            },
            sweep: SweepBlock {
                tf_grid: default_tf_grid(),
                omega_grid: default_omega_grid(variant),
                gamma_grid: sweep.gamma_grid,
                size_grid: sweep.size_grid,
                refine: false,
            },
            output: OutputBlock { dir: ".".into(), stride: 0 },
        }
    }

    /// Parses manifest text; `overrides` replace or add keys afterwards.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = entries(text)?;
        for (k, v) in overrides {
            kv.insert(k.clone(), v.clone());
        }
        for k in kv.keys() {
            check_key(k)?;
        }
        let get = |k: &str| kv.get(k).map(String::as_str);
        let variant = match get("model.variant") {
            Some("lipkin") => Variant::Lipkin,
            Some("ising") => Variant::Ising,
            Some("dicke") => Variant::Dicke,
            Some(v) => return Err(bad("model.variant", format!("`{v}` is not lipkin, ising or dicke"))),
            None => return Err(ManifestError::MissingField("model.variant".into())),
        };
        let spins = count("model.N", get("model.N").ok_or_else(|| ManifestError::MissingField("model.N".into()))?)?;
        if !(1..=MAX_SPINS).contains(&spins) {
            return Err(bad("model.N", format!("must be between 1 and {MAX_SPINS}")));
        }
        for k in kv.keys() {
            if !applies_to(k, variant) {
                return Err(bad(k, format!("not used by the {} variant", variant.name())));
            }
        }
        let mut m = Self::defaults(variant, spins);

        if let Some(v) = get("command") {
            if !COMMANDS.contains(&v) {
                return Err(bad("command", format!("`{v}` is not one of {}", COMMANDS.join(", "))));
            }
            m.command = Some(v.to_string());
        }
        let model = &mut m.model;
        for (key, slot) in [
            ("model.J_kHz", &mut model.coupling),
            ("model.Jmax_kHz", &mut model.j_max),
            ("model.alpha", &mut model.alpha),
            ("model.g0_kHz", &mut model.g0),
            ("model.delta_kHz", &mut model.delta),
            ("model.omega_kHz", &mut model.dd_omega),
            ("model.alpha_tilde", &mut model.dd_alpha_tilde),
            ("model.Gamma_per_s", &mut model.gamma_per_s),
            ("model.B0_kHz_over_2pi", &mut m.b0_over_2pi),
        ] {
            if let Some(v) = get(key) {
                *slot = number(key, v)?;
            }
        }
        model.b0 = 2.0 * PI * m.b0_over_2pi;
        if variant == Variant::Dicke {
            for key in ["model.g0_kHz", "model.delta_kHz"] {
                if get(key).is_none() {
                    return Err(ManifestError::MissingField(key.into()));
                }
            }
        }
        if let Some(v) = get("model.nbar") {
            model.nbar = count("model.nbar", v)?;
        }
        if let Some(v) = get("model.ferromagnetic") {
            model.ferromagnetic = flag("model.ferromagnetic", v)?;
        }
        if let Some(v) = get("model.dephasing_axis") {
            let fixed = model.dephasing_axis;
            if v != fixed.name() {
                return Err(bad(
                    "model.dephasing_axis",
                    format!("the {} variant fixes the dephasing axis to {}", variant.name(), fixed.name()),
                ));
            }
        }
        for (k, v) in &kv {
            if matches!(k.as_str(), "model.J_kHz" | "model.Jmax_kHz" | "model.g0_kHz" | "model.B0_kHz_over_2pi")
                && number(k, v)? <= 0.0
            {
                return Err(bad(k, "must be positive"));
            }
        }
        if model.gamma_per_s < 0.0 || model.dd_omega < 0.0 {
            let k = if model.gamma_per_s < 0.0 { "model.Gamma_per_s" } else { "model.omega_kHz" };
            return Err(bad(k, "must be non-negative"));
        }
        model.validate().map_err(|e| bad("model", e.to_string()))?;

        if let Some(v) = get("run.protocol") {
            m.run.protocol = v.parse().map_err(|_| bad("run.protocol", format!("`{v}` is not LA, FAQUAD or FAQUAD-K")))?;
        }
        if let Some(v) = get("run.t_f_ms") {
            m.run.t_f = number("run.t_f_ms", v)?;
            if m.run.t_f <= 0.0 {
                return Err(bad("run.t_f_ms", "must be positive"));
            }
        }
        match get("run.peak_mode") {
            None | Some("auto") => {}
            Some(v) => {
                let mode = PeakMode::parse(v)
                    .ok_or_else(|| bad("run.peak_mode", format!("`{v}` is not auto, first_peak or global_max")))?;
                m.run.peak_mode = Some(mode);
            }
        }
        m.run.schedule_csv = get("run.schedule_csv").map(path_value);

        let num = &mut m.numerics;
        match get("numerics.dt_ms") {
            None | Some("auto") => {}
            Some(v) => {
                let dt = number("numerics.dt_ms", v)?;
                if dt <= 0.0 {
                    return Err(bad("numerics.dt_ms", "must be positive or `auto`"));
                }
                num.integrator.dt = Some(dt);
            }
        }
        if let Some(v) = get("numerics.convergence_check") {
            num.integrator.convergence_check = flag("numerics.convergence_check", v)?;
        }
        if let Some(v) = get("numerics.n_grid") {
            num.n_grid = count("numerics.n_grid", v)?;
            if num.n_grid < 3 {
                return Err(bad("numerics.n_grid", "needs at least 3 points"));
            }
        }
        if let Some(v) = get("numerics.K_max") {
            num.k_max = count("numerics.K_max", v)?;
            if num.k_max == 0 {
                return Err(bad("numerics.K_max", "must be at least 1"));
            }
        }
        if let Some(v) = get("numerics.threshold") {
            num.threshold = number("numerics.threshold", v)?;
            if num.threshold <= 0.0 {
                return Err(bad("numerics.threshold", "must be positive"));
            }
        }

        let sw = &mut m.sweep;
        if let Some(v) = get("sweep.tf_grid_ms") {
            sw.tf_grid = number_list("sweep.tf_grid_ms", v)?;
            if sw.tf_grid[0] <= 0.0 {
                return Err(bad("sweep.tf_grid_ms", "final times must be positive"));
            }
        }
        if let Some(v) = get("sweep.omega_grid_kHz") {
            sw.omega_grid = number_list("sweep.omega_grid_kHz", v)?;
            if sw.omega_grid[0] < 0.0 {
                return Err(bad("sweep.omega_grid_kHz", "amplitudes must be non-negative"));
            }
        }
        if let Some(v) = get("sweep.gamma_grid_per_s") {
            sw.gamma_grid = number_list("sweep.gamma_grid_per_s", v)?;
            if sw.gamma_grid[0] < 0.0 {
                return Err(bad("sweep.gamma_grid_per_s", "rates must be non-negative"));
            }
        }
        if let Some(v) = get("sweep.size_grid") {
            let sizes = number_list("sweep.size_grid", v)?;
            if sizes.iter().any(|&x| x < 1.0 || x.fract() != 0.0) {
                return Err(bad("sweep.size_grid", "sizes must be positive integers"));
            }
            if sizes.iter().any(|&x| x > MAX_SPINS as f64) {
                return Err(bad("sweep.size_grid", format!("sizes above {MAX_SPINS} are not supported")));
            }
            sw.size_grid = sizes.into_iter().map(|x| x as usize).collect();
        }
        if let Some(v) = get("sweep.refine") {
            sw.refine = flag("sweep.refine", v)?;
        }
        if let Some(v) = get("output.dir") {
            m.output.dir = path_value(v);
        }
        if let Some(v) = get("output.stride") {
            m.output.stride = count("output.stride", v)?;
        }
        Ok(m)
    }

    /// Canonical text: every key relevant to the variant, defaults included.
    pub fn echo(&self) -> String {
        let list = |xs: &[f64]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let m = &self.model;
        let mut out = String::new();
        for key in KEYS {
            if !applies_to(key, m.variant) {
                continue;
            }
            let value = match key {
                "command" => match &self.command {
                    Some(c) => c.clone(),
                    None => continue,
                },
                "model.variant" => m.variant.name().into(),
                "model.N" => m.spins.to_string(),
                "model.J_kHz" => m.coupling.to_string(),
                "model.Jmax_kHz" => m.j_max.to_string(),
                "model.alpha" => m.alpha.to_string(),
                "model.g0_kHz" => m.g0.to_string(),
                "model.delta_kHz" => m.delta.to_string(),
                "model.nbar" => m.nbar.to_string(),
                "model.B0_kHz_over_2pi" => self.b0_over_2pi.to_string(),
                "model.omega_kHz" => m.dd_omega.to_string(),
                "model.alpha_tilde" => m.dd_alpha_tilde.to_string(),
                "model.Gamma_per_s" => m.gamma_per_s.to_string(),
                "model.dephasing_axis" => m.dephasing_axis.name().into(),
                "model.ferromagnetic" => m.ferromagnetic.to_string(),
                "run.protocol" => self.run.protocol.to_string(),
                "run.t_f_ms" => self.run.t_f.to_string(),
                "run.peak_mode" => self.run.peak_mode.map_or("auto".into(), |p| p.name().into()),
                "run.schedule_csv" => match &self.run.schedule_csv {
                    Some(p) => p.clone(),
                    None => continue,
                },
                "numerics.dt_ms" => self.numerics.integrator.dt.map_or("auto".into(), |d| d.to_string()),
                "numerics.n_grid" => self.numerics.n_grid.to_string(),
                "numerics.K_max" => self.numerics.k_max.to_string(),
                "numerics.threshold" => self.numerics.threshold.to_string(),
                "numerics.convergence_check" => self.numerics.integrator.convergence_check.to_string(),
                "sweep.tf_grid_ms" => list(&self.sweep.tf_grid),
                "sweep.omega_grid_kHz" => list(&self.sweep.omega_grid),
                "sweep.gamma_grid_per_s" => list(&self.sweep.gamma_grid),
                "sweep.size_grid" => {
                    self.sweep.size_grid.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(", ")
                }
                "sweep.refine" => self.sweep.refine.to_string(),
                "output.dir" => self.output.dir.clone(),
                "output.stride" => self.output.stride.to_string(),
                _ => unreachable!("key table and echo disagree on {key}"),
            };
            writeln!(out, "{key} = {value}").unwrap();
        }
        out
    }

    /// SHA-256 of the canonical echo, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }

    /// Hash of the model keys a ramp design depends on. Decoupling and
    /// dephasing are left out since ramps are always designed without them.
    pub fn model_hash(&self) -> String {
        let skip = ["model.omega_kHz", "model.alpha_tilde", "model.Gamma_per_s", "model.dephasing_axis"];
        let lines: String = self
            .echo()
            .lines()
            .filter(|l| l.starts_with("model.") && !skip.iter().any(|k| l.starts_with(&format!("{k} "))))
            .map(|l| format!("{l}\n"))
            .collect();
        hex::encode(Sha256::digest(lines.as_bytes()))
    }

    pub fn peak_mode(&self) -> PeakMode {
        match (self.run.peak_mode, self.command.as_deref()) {
            (Some(mode), _) => mode,
            (None, Some("sweep-dd")) => PeakMode::FirstPeak,
            (None, _) => PeakMode::GlobalMax,
        }
    }

    /// The lab configuration this manifest describes.
    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            tf_grid: self.sweep.tf_grid.clone(),
            omega_grid: self.sweep.omega_grid.clone(),
            gamma_grid: self.sweep.gamma_grid.clone(),
            size_grid: self.sweep.size_grid.clone(),
            peak_mode: self.peak_mode(),
            n_grid: self.numerics.n_grid,
            k_max: self.numerics.k_max,
            threshold: self.numerics.threshold,
            integrator: self.numerics.integrator,
            refine: self.sweep.refine,
            ..SweepConfig::new(self.model.clone(), self.run.protocol)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Axis;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<RunManifest> {
        RunManifest::parse(text, &[])
    }

    #[test]
    fn minimal_lipkin_takes_the_default_table() {
        let m = parse("model.variant = lipkin\nmodel.N = 6\n").unwrap();
        assert_eq!(m, RunManifest::defaults(Variant::Lipkin, 6));
        assert_eq!(m.model, ModelSpec::lipkin(6));
        assert_eq!(m.model.dephasing_axis, Axis::Z);
        assert!(m.model.ferromagnetic);
        assert_eq!(m.run.protocol, Protocol::Faquad(1));
        assert_eq!(m.numerics.integrator.dt, None);
        assert_eq!(m.sweep.tf_grid.len(), 70);
        assert_eq!(*m.sweep.omega_grid.last().unwrap(), 0.55);
    }

    #[test]
    fn open_lipkin_echo_lists_quoted_values() {
        let m = parse("model.variant: lipkin\nmodel.N: 6\nmodel.B0_kHz_over_2pi: 7\n").unwrap();
        let echo = m.echo();
        assert!(echo.contains("model.B0_kHz_over_2pi = 7\n"), "{echo}");
        assert!(echo.contains("model.J_kHz = 3.3\n"), "{echo}");
        assert!(echo.contains("model.Gamma_per_s = 0\n"), "{echo}");
        assert!((m.model.b0 - 2.0 * PI * 7.0).abs() < 1e-12);
    }

    #[test]
    fn dephasing_axis_is_fixed_by_variant() {
        let err = parse("model.variant = lipkin\nmodel.N = 6\nmodel.dephasing_axis: x\n").unwrap_err();
        assert!(matches!(err, ManifestError::BadValue { ref key, .. } if key == "model.dephasing_axis"));
        let ok = parse("model.variant = ising\nmodel.N = 4\nmodel.dephasing_axis = x\n").unwrap();
        assert_eq!(ok.model.dephasing_axis, Axis::X);
    }

    #[test]
    fn errors_name_the_key() {
        let base = "model.variant = lipkin\nmodel.N = 6\n";
        let cases = [
            ("model.Gamma_per_ms = 1", ManifestError::UnitMismatch {
                key: "model.Gamma_per_ms".into(),
                expected: "`model.Gamma_per_s`".into(),
            }),
            ("model.B0_kHz = 44", ManifestError::UnitMismatch {
                key: "model.B0_kHz".into(),
                expected: "`model.B0_kHz_over_2pi`".into(),
            }),
            ("run.t_f = 3", ManifestError::UnitMismatch { key: "run.t_f".into(), expected: "`run.t_f_ms`".into() }),
            ("model.colour = red", ManifestError::UnknownKey("model.colour".into())),
            ("model.N = 7", ManifestError::DuplicateKey("model.N".into())),
        ];
        for (line, want) in cases {
            assert_eq!(parse(&format!("{base}{line}\n")).unwrap_err(), want, "{line}");
        }
        assert_eq!(parse("model.N = 6").unwrap_err(), ManifestError::MissingField("model.variant".into()));
        assert_eq!(parse("model.variant = ising").unwrap_err(), ManifestError::MissingField("model.N".into()));
        assert_eq!(
            parse("model.variant = dicke\nmodel.N = 4\nmodel.g0_kHz = 11").unwrap_err(),
            ManifestError::MissingField("model.delta_kHz".into())
        );
        assert!(matches!(parse("model.variant = lipkin\nmodel.N = 6\nmodel.alpha = 1").unwrap_err(),
            ManifestError::BadValue { ref key, .. } if key == "model.alpha"));
        assert!(matches!(parse("oops").unwrap_err(), ManifestError::Syntax { line: 1, .. }));
    }

    #[test]
    fn overrides_win_over_file_keys() {
        let text = "model.variant = lipkin\nmodel.N = 6\nmodel.Gamma_per_s = 30\n";
        let over = [parse_override("model.Gamma_per_s=120").unwrap(), parse_override("run.protocol = LA").unwrap()];
        let m = RunManifest::parse(text, &over).unwrap();
        assert_eq!(m.model.gamma_per_s, 120.0);
        assert_eq!(m.run.protocol, Protocol::La);
    }

    #[test]
    fn ranges_expand_cleanly() {
        let m = parse("model.variant = lipkin\nmodel.N = 4\nsweep.tf_grid_ms = 0.2:1:0.2, 1.5\n").unwrap();
        assert_eq!(m.sweep.tf_grid, vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.5]);
        assert!(parse("model.variant = lipkin\nmodel.N = 4\nsweep.tf_grid_ms = 1, 1\n").is_err());
    }

    #[test]
    fn dicke_echo_round_trips() {
        let m = parse("model.variant = dicke\nmodel.N = 4\nmodel.g0_kHz = 11\nmodel.delta_kHz = -55\ncommand = evolve\n")
            .unwrap();
        assert_eq!(parse(&m.echo()).unwrap(), m);
        assert!(!m.echo().contains("Gamma"));
    }

    fn arb_manifest() -> impl Strategy<Value = String> {
        (
            prop_oneof![Just("lipkin"), Just("ising")],
            2usize..7,
            0.0..300.0f64,
            0.0..1.0f64,
            0.1..20.0f64,
            0.5..20.0f64,
            prop_oneof![Just("LA"), Just("FAQUAD"), Just("FAQUAD-3")],
            proptest::option::of(1e-5..1e-4f64),
        )
            .prop_map(|(variant, n, gamma, omega, b0, tf, protocol, dt)| {
                let mut s = format!(
                    "model.variant = {variant}\nmodel.N = {n}\nmodel.Gamma_per_s = {gamma}\n\
                     model.omega_kHz = {omega}\nmodel.B0_kHz_over_2pi: {b0}\nrun.t_f_ms = {tf}\n\
                     run.protocol = {protocol}\n"
                );
                if let Some(dt) = dt {
                    s.push_str(&format!("numerics.dt_ms = {dt}\n"));
                }
                s
            })
    }

    #[test]
    fn peak_mode_follows_the_command() {
        let base = "model.variant = lipkin\nmodel.N = 4\n";
        let mode = |extra: &str| parse(&format!("{base}{extra}")).unwrap().sweep_config().peak_mode;
        assert_eq!(mode("command = sweep-dd\n"), PeakMode::FirstPeak);
        assert_eq!(mode("command = sweep-gamma\n"), PeakMode::GlobalMax);
        assert_eq!(mode("command = sweep-dd\nrun.peak_mode = global_max\n"), PeakMode::GlobalMax);
    }

    #[test]
    fn model_hash_ignores_noise_settings() {
        let a = parse("model.variant = ising\nmodel.N = 4\nmodel.alpha = 1.2\n").unwrap();
        let b = parse("model.variant = ising\nmodel.N = 4\nmodel.alpha = 1.2\nmodel.Gamma_per_s = 120\n").unwrap();
        let c = parse("model.variant = ising\nmodel.N = 4\nmodel.alpha = 1.0\n").unwrap();
        assert_eq!(a.model_hash(), b.model_hash());
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.model_hash(), c.model_hash());
    }

    proptest! {
        #[test]
        fn echo_is_a_fixed_point(text in arb_manifest()) {
            let m = parse(&text).unwrap();
            let echo = m.echo();
            let again = parse(&echo).unwrap();
            prop_assert_eq!(&again, &m);
            prop_assert_eq!(again.echo(), echo);
            prop_assert_eq!(again.hash(), m.hash());
        }
    }
}
