//! Spectral scans and quasi-adiabatic ramp synthesis.
//!
//! A ramp is designed once as a `t_f`-independent profile `B(s)` with
//! `s = t / t_f`, obtained by inverting the cumulative integral
//! `u(B) = int_B^{B0} w(B') dB'` of a protocol weight `w`. Rescaling to a
//! concrete `t_f` only multiplies the time axis, so `c = u(0) / t_f`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod csv;
mod scan;

pub use csv::{parse_schedule_csv, write_schedule_csv, write_schedule_csv_tagged};
pub use scan::{
    field_grid, scan_parametric, scan_with_phases, select_relevant_level, spectral_scan,
    ParametricHamiltonian, PhaseHook, SpectralScan, DEFAULT_K_MAX, DEFAULT_N_GRID,
    DEFAULT_THRESHOLD, MIN_GAP, TRACKING_OVERLAP,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    La,
    /// FAQUAD summed over `K` levels; `Faquad(1)` uses the relevant level alone.
    Faquad(usize),
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Protocol::La => write!(f, "LA"),
            Protocol::Faquad(1) => write!(f, "FAQUAD"),
            Protocol::Faquad(k) => write!(f, "FAQUAD-{k}"),
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown protocol `{s}`"));
        match s {
            "LA" => Ok(Protocol::La),
            "FAQUAD" => Ok(Protocol::Faquad(1)),
            _ => {
                let k: usize = s.strip_prefix("FAQUAD-").ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(bad());
                }
                Ok(Protocol::Faquad(k))
            }
        }
    }
}

/// Piecewise-linear ramp `B(t)` on `[0, t_f]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub t_f: f64,
    pub times: Vec<f64>,
    pub fields: Vec<f64>,
    pub protocol: Protocol,
    pub c_value: f64,
}

impl Schedule {
    /// Checks pinned endpoints, monotonicity and strictly increasing times.
    pub fn new(times: Vec<f64>, fields: Vec<f64>, protocol: Protocol, c_value: f64) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidSchedule(m.to_string()));
        if times.len() < 2 || times.len() != fields.len() {
            return bad("need at least two samples with matching lengths");
        }
        if times.iter().chain(&fields).any(|x| !x.is_finite()) {
            return bad("non-finite sample");
        }
        if times[0] != 0.0 {
            return bad("first sample must be at t = 0");
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be strictly increasing");
        }
        if fields.windows(2).any(|w| w[1] > w[0]) {
            return bad("field must be non-increasing");
        }
        if *fields.last().unwrap() != 0.0 {
            return bad("field must end at exactly zero");
        }
        if fields[0] <= 0.0 {
            return bad("initial field must be positive");
        }
        Ok(Schedule { t_f: *times.last().unwrap(), times, fields, protocol, c_value })
    }

    pub fn b0(&self) -> f64 {
        self.fields[0]
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.fields.iter().copied())
    }

    /// Linear interpolation, clamped to the end values outside `[0, t_f]`.
    pub fn field_at(&self, t: f64) -> f64 {
        let ts = &self.times;
        if t <= 0.0 {
            return self.fields[0];
        }
        if t >= self.t_f {
            return *self.fields.last().unwrap();
        }
        let j = ts.partition_point(|&x| x <= t).clamp(1, ts.len() - 1);
        let w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
        self.fields[j - 1] + w * (self.fields[j] - self.fields[j - 1])
    }
}

/// A ramp shape independent of the final time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampProfile {
    pub protocol: Protocol,
    pub levels: Vec<usize>,
    /// Normalized times `s` in `[0, 1]`.
    pub s: Vec<f64>,
    pub fields: Vec<f64>,
    /// `u(0) = int_0^{B0} w(B) dB`; the adiabaticity constant is `u_total / t_f`.
    pub u_total: f64,
}

impl RampProfile {
    pub fn schedule(&self, t_f: f64) -> Result<Schedule> {
        if !(t_f > 0.0 && t_f.is_finite()) {
            return Err(Error::InvalidSchedule(format!("final time must be positive, got {t_f}")));
        }
        let times = self.s.iter().map(|s| s * t_f).collect();
        Schedule::new(times, self.fields.clone(), self.protocol, self.u_total / t_f)
    }
}

/// Weights on the grid and their cumulative trapezoid integral from `B0`.
struct Quadrature {
    w: Vec<f64>,
    u: Vec<f64>,
    total: f64,
}

/// Number of samples in a designed ramp.
pub const RAMP_SAMPLES: usize = 2001;

fn weight_profile(scan: &SpectralScan, weight: impl Fn(usize) -> f64) -> Result<Quadrature> {
    let b = &scan.b_grid;
    let w: Vec<f64> = (0..b.len()).map(&weight).collect();
    // cumulative trapezoid, sequential by design
    let mut u = Vec::with_capacity(b.len());
    u.push(0.0);
    let mut acc = 0.0;
    for i in 1..b.len() {
        acc += 0.5 * (w[i - 1] + w[i]) * (b[i - 1] - b[i]);
        u.push(acc);
    }
    if !(acc > 0.0) || !acc.is_finite() {
        return Err(Error::ZeroIntegrand);
    }
    Ok(Quadrature { w, u, total: acc })
}

fn check_gaps(scan: &SpectralScan, levels: &[usize]) -> Result<()> {
    for &k in levels {
        scan.check_level(k)?;
        for (i, &field) in scan.b_grid.iter().enumerate() {
            let gap = scan.gap(i, k);
            if !(gap >= MIN_GAP) {
                return Err(Error::GapTooSmall { index: i, field, gap });
            }
        }
    }
    Ok(())
}

/// Inverts `u(B)` on `RAMP_SAMPLES` uniform points in `s = u / u_total`.
///
/// The sample count does not depend on the scan grid, so refining the scan
/// only moves samples and never changes where they sit in time. Between scan
/// nodes the weight is taken as linear, which makes `u` quadratic in `B` and
/// consistent with the trapezoid values at the nodes.
fn invert(scan: &SpectralScan, q: &Quadrature, protocol: Protocol, levels: Vec<usize>) -> RampProfile {
    let n = scan.b_grid.len();
    let m = RAMP_SAMPLES;
    let b = &scan.b_grid;
    let mut s = Vec::with_capacity(m);
    let mut fields = Vec::with_capacity(m);
    let mut j = 1;
    for i in 0..m {
        let si = i as f64 / (m - 1) as f64;
        let target = si * q.total;
        while j < n - 1 && q.u[j] < target {
            j += 1;
        }
        let h = b[j - 1] - b[j];
        let du = (target - q.u[j - 1]).max(0.0);
        let (w0, w1) = (q.w[j - 1], q.w[j]);
        // solve w0 x + (w1 - w0) x^2 / (2h) = du for the distance x below b[j-1]
        let a = (w1 - w0) / (2.0 * h);
        let den = w0 + (w0 * w0 + 4.0 * a * du).max(0.0).sqrt();
        let x = if den > 0.0 { (2.0 * du / den).clamp(0.0, h) } else { h };
        let bi = b[j - 1] - x;
        s.push(si);
        fields.push(fields.last().map_or(bi, |&prev: &f64| prev.min(bi)));
    }
    fields[0] = scan.b0();
    // the grid stops at a tiny positive field; the ramp itself ends at zero
    fields[m - 1] = 0.0;
    RampProfile { protocol, levels, s, fields, u_total: q.total }
}

/// Local adiabatic profile: `dB/dt = -c (E_b - E_0)^2`.
pub fn la_profile(scan: &SpectralScan, level: usize) -> Result<RampProfile> {
    check_gaps(scan, &[level])?;
    let q = weight_profile(scan, |i| scan.gap(i, level).powi(-2))?;
    Ok(invert(scan, &q, Protocol::La, vec![level]))
}

/// FAQUAD profile summed over `levels`: `|dB/dt| sum_k |M_k| / (E_k - E_0)^2 = c`.
pub fn faquad_profile(scan: &SpectralScan, levels: &[usize]) -> Result<RampProfile> {
    if levels.is_empty() {
        return Err(Error::InvalidConfig("FAQUAD needs at least one level".into()));
    }
    check_gaps(scan, levels)?;
    let q = weight_profile(scan, |i| {
        levels.iter().map(|&k| scan.couplings[i][k - 1].norm() / scan.gap(i, k).powi(2)).sum()
    })?;
    Ok(invert(scan, &q, Protocol::Faquad(levels.len()), levels.to_vec()))
}

pub fn design_la(scan: &SpectralScan, level: usize, t_f: f64) -> Result<Schedule> {
    la_profile(scan, level)?.schedule(t_f)
}

pub fn design_faquad(scan: &SpectralScan, levels: &[usize], t_f: f64) -> Result<Schedule> {
    faquad_profile(scan, levels)?.schedule(t_f)
}

/// Profile for `protocol`, choosing levels from the scan: the relevant
/// level for LA and FAQUAD, the `K` lowest coupled levels for FAQUAD-K.
pub fn design_profile(scan: &SpectralScan, protocol: Protocol, threshold: f64) -> Result<RampProfile> {
    let level = select_relevant_level(scan, threshold)?;
    match protocol {
        Protocol::La => la_profile(scan, level),
        Protocol::Faquad(1) => faquad_profile(scan, &[level]),
        Protocol::Faquad(k) => {
            let coupled: Vec<usize> = scan
                .relevant_levels
                .iter()
                .copied()
                .filter(|&l| l >= level)
                .take(k)
                .collect();
            if coupled.len() < k {
                return Err(Error::LevelNotTracked { level: k, tracked: coupled.len() });
            }
            faquad_profile(scan, &coupled)
        }
    }
}

/// `|M_b(B(t))| |dB/dt| / (E_b - E_0)^2` at every schedule sample.
pub fn adiabaticity_profile(schedule: &Schedule, scan: &SpectralScan, level: usize) -> Result<Vec<f64>> {
    scan.check_level(level)?;
    let t = &schedule.times;
    let b = &schedule.fields;
    let n = t.len();
    Ok((0..n)
        .map(|i| {
            let (lo, hi) = (i.saturating_sub(1), (i + 1).min(n - 1));
            let slope = (b[hi] - b[lo]) / (t[hi] - t[lo]);
            let (gap, m) = scan.interpolate(level, b[i]);
            m * slope.abs() / (gap * gap)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::ModelSpec;

    fn toy_scan(delta: f64, b0: f64, n: usize) -> SpectralScan {
        scan_parametric(&ParametricHamiltonian::two_level(delta), &field_grid(b0, n), 1).unwrap()
    }

    fn constant_gap_scan(n: usize) -> SpectralScan {
        let b_grid = field_grid(5.0, n);
        SpectralScan {
            energies: b_grid.iter().map(|_| vec![0.0, 2.0]).collect(),
            couplings: b_grid.iter().map(|_| vec![num_complex::Complex64::new(0.3, 0.0)]).collect(),
            b_grid,
            relevant_levels: vec![1],
        }
    }

    #[test]
    fn protocol_tags_round_trip() {
        for p in [Protocol::La, Protocol::Faquad(1), Protocol::Faquad(4)] {
            assert_eq!(p.to_string().parse::<Protocol>().unwrap(), p);
        }
        assert!("FAQUAD-0".parse::<Protocol>().is_err());
        assert!("faquad".parse::<Protocol>().is_err());
    }

    #[test]
    fn constant_gap_gives_linear_ramp() {
        let scan = constant_gap_scan(1001);
        let s = design_la(&scan, 1, 3.0).unwrap();
        let end = scan.b_grid.last().copied().unwrap();
        for (t, b) in s.samples().take(s.times.len() - 1) {
            let linear = 5.0 - (5.0 - end) * t / 3.0;
            assert!((b - linear).abs() < 1e-10, "t={t}: {b} vs {linear}");
        }
        assert_eq!(s.fields[0], 5.0);
        assert_eq!(*s.fields.last().unwrap(), 0.0);
    }

    #[test]
    fn landau_zener_la_matches_arctan() {
        let (delta, b0) = (1.0, 6.0);
        let scan = toy_scan(delta, b0, 2001);
        let p = la_profile(&scan, 1).unwrap();
        let end = *scan.b_grid.last().unwrap();
        let u = |b: f64| (b0 / delta).atan() - (b / delta).atan();
        let total = u(end);
        for (s, b) in p.s.iter().zip(&p.fields).skip(1).take(p.s.len() - 2) {
            assert!((u(*b) / total - s).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn landau_zener_faquad_matches_closed_form() {
        let (delta, b0) = (1.0, 6.0);
        let scan = toy_scan(delta, b0, 2001);
        let p = faquad_profile(&scan, &[1]).unwrap();
        let end = *scan.b_grid.last().unwrap();
        let anti = |b: f64| b / (delta * delta + b * b).sqrt();
        let total = anti(b0) - anti(end);
        for (s, b) in p.s.iter().zip(&p.fields).skip(1).take(p.s.len() - 2) {
            assert!(((anti(b0) - anti(*b)) / total - s).abs() < 1e-6, "s={s}");
        }
    }

    #[test]
    fn faquad_is_flat() {
        let scan = spectral_scan(&ModelSpec::lipkin(6), 2001, 3).unwrap();
        let level = select_relevant_level(&scan, DEFAULT_THRESHOLD).unwrap();
        let s = design_faquad(&scan, &[level], 4.8).unwrap();
        let c = adiabaticity_profile(&s, &scan, level).unwrap();
        let n = c.len();
        let interior = &c[n / 40..n - n / 40];
        let (lo, hi) = interior.iter().fold((f64::MAX, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo < 1.05, "spread {}", hi / lo);
        assert!(interior.iter().all(|x| (x / s.c_value - 1.0).abs() < 0.01));
    }

    #[test]
    fn la_is_not_flat_on_toy() {
        let scan = toy_scan(1.0, 6.0, 2001);
        let s = design_la(&scan, 1, 2.0).unwrap();
        let c = adiabaticity_profile(&s, &scan, 1).unwrap();
        // proportional to |M| = delta / (2 sqrt(delta^2 + B^2))
        let n = c.len();
        for i in (n / 10..n - n / 10).step_by(97) {
            let b = s.fields[i];
            let m = 0.5 / (1.0 + b * b).sqrt();
            assert!((c[i] / m - s.c_value).abs() < 1e-3 * s.c_value);
        }
        assert!(c[n / 10] < 0.5 * c[n - n / 10]);
    }

    #[test]
    fn halving_tf_doubles_c() {
        let scan = toy_scan(1.0, 6.0, 501);
        let a = design_faquad(&scan, &[1], 2.0).unwrap();
        let b = design_faquad(&scan, &[1], 1.0).unwrap();
        let ca = adiabaticity_profile(&a, &scan, 1).unwrap();
        let cb = adiabaticity_profile(&b, &scan, 1).unwrap();
        for (x, y) in ca.iter().zip(&cb) {
            assert!((2.0 * x - y).abs() <= 1e-10 * y.abs().max(1e-300));
        }
        assert!((2.0 * a.c_value - b.c_value).abs() < 1e-12 * b.c_value);
    }

    #[test]
    fn single_level_faquad_k_matches_faquad() {
        let scan = spectral_scan(&ModelSpec::lipkin(4), 401, 2).unwrap();
        let a = design_faquad(&scan, &[1], 3.0).unwrap();
        let b = design_profile(&scan, Protocol::Faquad(1), DEFAULT_THRESHOLD).unwrap().schedule(3.0).unwrap();
        assert_eq!(a, b);
        let k2 = design_profile(&scan, Protocol::Faquad(2), DEFAULT_THRESHOLD).unwrap();
        assert_eq!(k2.protocol.to_string(), "FAQUAD-2");
    }

    #[test]
    fn grid_refinement_converges() {
        let model = ModelSpec::lipkin(6);
        let fine = design_faquad(&spectral_scan(&model, 2001, 1).unwrap(), &[1], 5.0).unwrap();
        let coarse = design_faquad(&spectral_scan(&model, 1001, 1).unwrap(), &[1], 5.0).unwrap();
        let sup = fine
            .times
            .iter()
            .map(|&t| (fine.field_at(t) - coarse.field_at(t)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-4 * model.b0, "sup {sup}");
    }

    #[test]
    fn lipkin_faquad_shape() {
        let scan = spectral_scan(&ModelSpec::lipkin(6), 2001, 1).unwrap();
        let s = design_faquad(&scan, &[1], 4.8).unwrap();
        assert!(s.fields.windows(2).all(|w| w[1] <= w[0]));
        // fast at both ends, slow around the minimum gap
        let slope = |a: f64, b: f64| (s.field_at(a * 4.8) - s.field_at(b * 4.8)) / ((b - a) * 4.8);
        let early = slope(0.0, 0.05);
        let late = slope(0.95, 1.0);
        let mid = (1..19).map(|i| slope(i as f64 * 0.05, (i + 1) as f64 * 0.05)).fold(f64::MAX, f64::min);
        assert!(early > 3.0 * mid && late > mid);
    }

    #[test]
    fn field_at_interpolates() {
        let s = Schedule::new(vec![0.0, 1.0, 3.0], vec![4.0, 2.0, 0.0], Protocol::La, 1.0).unwrap();
        assert_eq!(s.field_at(0.5), 3.0);
        assert_eq!(s.field_at(2.0), 1.0);
        assert_eq!(s.field_at(-1.0), 4.0);
        assert_eq!(s.field_at(9.0), 0.0);
        assert!(Schedule::new(vec![0.0, 1.0], vec![1.0, 2.0], Protocol::La, 1.0).is_err());
        assert!(Schedule::new(vec![0.0, 1.0], vec![1.0, 0.1], Protocol::La, 1.0).is_err());
    }
}
