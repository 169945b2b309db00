use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    eigh, initial_state, invariant_subspace, ModelSpec, TARGET_FIELD_FRACTION,
};

/// Smallest overlap between consecutive eigenvectors accepted as the same level.
pub const TRACKING_OVERLAP: f64 = 0.5;
pub const MIN_GAP: f64 = 1e-12;
pub const DEFAULT_N_GRID: usize = 2001;
pub const DEFAULT_K_MAX: usize = 5;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// `H(B) = fixed + B drive`.
#[derive(Debug, Clone)]
pub struct ParametricHamiltonian {
    pub fixed: DMatrix<C64>,
    pub drive: DMatrix<C64>,
}

impl ParametricHamiltonian {
    /// `(delta sigma_x + B sigma_z) / 2`.
    pub fn two_level(delta: f64) -> Self {
        let half = |a: f64, b: f64, c: f64, d: f64| {
            DMatrix::from_row_slice(
                2,
                2,
                &[C64::new(a, 0.0), C64::new(b, 0.0), C64::new(c, 0.0), C64::new(d, 0.0)],
            )
        };
        ParametricHamiltonian {
            fixed: half(0.0, delta / 2.0, delta / 2.0, 0.0),
            drive: half(0.5, 0.0, 0.0, -0.5),
        }
    }

    /// Decoupling-free model Hamiltonian restricted to the subspace the
    /// initial state can explore.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let basis = model.natural_basis();
        let parts = model.parts(basis)?;
        let psi0 = initial_state(model, basis)?;
        let q = invariant_subspace(&psi0.amplitudes, &[&parts.fixed, &parts.drive])?;
        let qa = q.adjoint();
        Ok(ParametricHamiltonian { fixed: &qa * &parts.fixed * &q, drive: &qa * &parts.drive * &q })
    }

    pub fn dim(&self) -> usize {
        self.fixed.nrows()
    }

    pub fn at(&self, field: f64) -> DMatrix<C64> {
        &self.fixed + &self.drive * C64::new(field, 0.0)
    }
}

/// Energies and ground-state couplings along a descending field grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralScan {
    pub b_grid: Vec<f64>,
    /// `energies[i][k]` for `k = 0..=k_max`, ascending.
    pub energies: Vec<Vec<f64>>,
    /// `couplings[i][k - 1] = <g|dH/dB|k>` for `k = 1..=k_max`.
    pub couplings: Vec<Vec<C64>>,
    pub relevant_levels: Vec<usize>,
}

impl SpectralScan {
    pub fn k_max(&self) -> usize {
        self.couplings.first().map_or(0, Vec::len)
    }

    pub fn b0(&self) -> f64 {
        self.b_grid[0]
    }

    pub fn gap(&self, i: usize, level: usize) -> f64 {
        self.energies[i][level] - self.energies[i][0]
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.k_max() {
            return Err(Error::LevelNotTracked { level, tracked: self.k_max() });
        }
        Ok(())
    }

    /// Linear interpolation of `(gap, |M|)` for `level` at field `b`.
    pub fn interpolate(&self, level: usize, b: f64) -> (f64, f64) {
        let g = &self.b_grid;
        let n = g.len();
        // grid is descending
        let j = g.partition_point(|&x| x > b).clamp(1, n - 1);
        let (b_hi, b_lo) = (g[j - 1], g[j]);
        let w = if b_hi == b_lo { 0.0 } else { ((b_hi - b) / (b_hi - b_lo)).clamp(0.0, 1.0) };
        let mix = |a: f64, c: f64| a + w * (c - a);
        (
            mix(self.gap(j - 1, level), self.gap(j, level)),
            mix(self.couplings[j - 1][level - 1].norm(), self.couplings[j][level - 1].norm()),
        )
    }
}

/// Uniform grid from `b0` down to `TARGET_FIELD_FRACTION * b0`.
pub fn field_grid(b0: f64, n_grid: usize) -> Vec<f64> {
    let end = TARGET_FIELD_FRACTION * b0;
    let step = (b0 - end) / (n_grid - 1) as f64;
    (0..n_grid)
        .map(|i| if i + 1 == n_grid { end } else { b0 - step * i as f64 })
        .collect()
}

pub fn spectral_scan(model: &ModelSpec, n_grid: usize, k_max: usize) -> Result<SpectralScan> {
    let h = ParametricHamiltonian::from_model(model)?;
    if n_grid < 2 {
        return Err(Error::InvalidConfig(format!("n_grid must be at least 2, got {n_grid}")));
    }
    scan_parametric(&h, &field_grid(model.b0, n_grid), k_max)
}

/// Phase hook applied to raw eigenvectors before gauge fixing; used to check
/// that nothing downstream depends on the arbitrary phases returned by the
/// eigensolver.
pub type PhaseHook<'a> = &'a dyn Fn(usize, usize) -> C64;

pub fn scan_parametric(
    h: &ParametricHamiltonian,
    b_grid: &[f64],
    k_max: usize,
) -> Result<SpectralScan> {
    scan_with_phases(h, b_grid, k_max, &|_, _| C64::new(1.0, 0.0))
}

pub fn scan_with_phases(
    h: &ParametricHamiltonian,
    b_grid: &[f64],
    k_max: usize,
    phase: PhaseHook<'_>,
) -> Result<SpectralScan> {
    if b_grid.len() < 2 || b_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidConfig("field grid must be strictly decreasing".into()));
    }
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be at least 1".into()));
    }
    let dim = h.dim();
    if dim < 2 {
        return Err(Error::NoCoupledLevel(0.0));
    }
    let mut k_max = if k_max > dim - 1 {
        log::info!("only {} excited levels in the dynamical sector; k_max lowered", dim - 1);
        dim - 1
    } else {
        k_max
    };

    let mut energies = Vec::with_capacity(b_grid.len());
    let mut couplings = Vec::with_capacity(b_grid.len());
    let mut prev: Option<Vec<DVector<C64>>> = None;
    for (i, &b) in b_grid.iter().enumerate() {
        let eig = eigh(&h.at(b))?;
        let mut vecs: Vec<DVector<C64>> =
            (0..=k_max).map(|k| eig.vector(k) * phase(i, k)).collect();
        for k in 1..=k_max {
            let gap = eig.values[k] - eig.values[0];
            if gap < MIN_GAP {
                return Err(Error::GapTooSmall { index: i, field: b, gap });
            }
        }
        if let Some(prev) = &prev {
            for k in 0..=k_max {
                let o = prev[k].dotc(&vecs[k]);
                if o.norm() < TRACKING_OVERLAP {
                    let err = Error::TrackingAmbiguous { level: k, index: i - 1, overlap: o.norm() };
                    if k <= 1 {
                        return Err(err);
                    }
                    // Never relabel: levels from k upwards are dropped for the whole scan.
                    log::warn!("{err}; tracking only {} excited levels", k - 1);
                    k_max = k - 1;
                    vecs.truncate(k);
                    energies.iter_mut().for_each(|e: &mut Vec<f64>| e.truncate(k));
                    couplings.iter_mut().for_each(|c: &mut Vec<C64>| c.truncate(k - 1));
                    break;
                }
                vecs[k] *= o.conj() / o.norm();
            }
        } else {
            // deterministic starting gauge: largest component real positive
            for v in vecs.iter_mut() {
                let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
                *v *= pivot.conj() / pivot.norm();
            }
        }
        let dg = h.drive.adjoint() * &vecs[0];
        couplings.push((1..=k_max).map(|k| dg.dotc(&vecs[k])).collect());
        energies.push(eig.values[..=k_max].to_vec());
        prev = Some(vecs);
    }

    let mut scan = SpectralScan { b_grid: b_grid.to_vec(), energies, couplings, relevant_levels: vec![] };
    scan.relevant_levels = coupled_levels(&scan, DEFAULT_THRESHOLD);
    Ok(scan)
}

fn coupled_levels(scan: &SpectralScan, threshold: f64) -> Vec<usize> {
    let peak = |k: usize| scan.couplings.iter().map(|row| row[k - 1].norm()).fold(0.0, f64::max);
    let overall = (1..=scan.k_max()).map(peak).fold(0.0, f64::max);
    if overall == 0.0 {
        return vec![];
    }
    (1..=scan.k_max()).filter(|&k| peak(k) / overall > threshold).collect()
}

/// Lowest excited level whose coupling to the ground state is not negligible.
pub fn select_relevant_level(scan: &SpectralScan, threshold: f64) -> Result<usize> {
    if scan.b_grid.is_empty() || scan.k_max() == 0 {
        return Err(Error::NoCoupledLevel(threshold));
    }
    coupled_levels(scan, threshold).first().copied().ok_or(Error::NoCoupledLevel(threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{Basis, Variant};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn landau_zener_closed_form() {
        let delta = 1.3;
        let grid = field_grid(8.0, 401);
        let scan = scan_parametric(&ParametricHamiltonian::two_level(delta), &grid, 1).unwrap();
        for (i, &b) in grid.iter().enumerate() {
            let r = (delta * delta + b * b).sqrt();
            assert!((scan.gap(i, 1) - r).abs() < 1e-8);
            assert!((scan.couplings[i][0].norm() - delta / (2.0 * r)).abs() < 1e-8);
        }
        assert_eq!(select_relevant_level(&scan, 1e-6).unwrap(), 1);
        assert!(matches!(select_relevant_level(&scan, 1.5), Err(Error::NoCoupledLevel(_))));
    }

    #[test]
    fn gauge_is_continuous() {
        let scan = spectral_scan(&ModelSpec::lipkin(6), 301, 3).unwrap();
        for row in scan.couplings.windows(2) {
            for k in 0..row[0].len() {
                // smooth couplings never flip sign between neighbours
                let (a, b) = (row[0][k], row[1][k]);
                assert!((a * b.conj()).re >= -1e-12 * a.norm() * b.norm());
            }
        }
    }

    #[test]
    fn couplings_are_gauge_free() {
        let h = ParametricHamiltonian::from_model(&ModelSpec::ising(4, 1.2)).unwrap();
        let grid = field_grid(2.0 * std::f64::consts::PI * 7.0, 201);
        let plain = scan_parametric(&h, &grid, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phases: Vec<Vec<C64>> = (0..grid.len())
            .map(|_| (0..5).map(|_| C64::from_polar(1.0, rng.random::<f64>() * 6.28)).collect())
            .collect();
        let shuffled = scan_with_phases(&h, &grid, 4, &|i, k| phases[i][k]).unwrap();
        for (a, b) in plain.couplings.iter().zip(&shuffled.couplings) {
            for (x, y) in a.iter().zip(b) {
                assert!((x.norm() - y.norm()).abs() < 1e-10);
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn lipkin_levels_outside_sector_are_uncoupled() {
        // Full symmetric space: odd-parity levels never couple to the even ground state.
        let model = ModelSpec::lipkin(6);
        let basis = Basis::DickeSymmetric { spins: 6 };
        let parts = model.parts(basis).unwrap();
        let parity = model.parity(basis).unwrap();
        for b in [40.0, 10.0, 2.0] {
            let eig = eigh(&parts.at(b, 0.0)).unwrap();
            let g = eig.vector(0);
            let dg = &parts.drive * &g;
            let mut allowed = 0.0f64;
            let mut forbidden = 0.0f64;
            for k in 1..7 {
                let v = eig.vector(k);
                let p = v.dotc(&(&parity.matrix * &v)).re;
                let m = v.dotc(&dg).norm();
                if p > 0.0 {
                    allowed = allowed.max(m);
                } else {
                    forbidden = forbidden.max(m);
                }
            }
            assert!(forbidden < 1e-10 * allowed, "B={b}: {forbidden} vs {allowed}");
        }
        let scan = spectral_scan(&model, 201, 5).unwrap();
        // the dynamical sector keeps only even levels: m = 3, 2, 1, 0 combinations
        assert_eq!(scan.k_max(), 3);
        assert_eq!(select_relevant_level(&scan, 1e-6).unwrap(), 1);
    }

    #[test]
    fn couplings_vanish_at_large_field() {
        let model = ModelSpec::lipkin(4);
        let h = ParametricHamiltonian::from_model(&model).unwrap();
        let grid = vec![1e5, 1e4, 1e3];
        let scan = scan_parametric(&h, &grid, 1).unwrap();
        let ratio: Vec<f64> = (0..3).map(|i| scan.couplings[i][0].norm() / scan.gap(i, 1)).collect();
        assert!(ratio[0] < ratio[1] && ratio[1] < ratio[2]);
        assert_eq!(model.variant, Variant::Lipkin);
    }

    fn crossing_toy(upper: f64) -> ParametricHamiltonian {
        // levels 2 and 3 cross at B = 0.5; level 1 couples to the ground state
        let d = |v: [f64; 4]| DMatrix::from_diagonal(&DVector::from_iterator(4, v.map(|x| C64::new(x, 0.0))));
        let mut drive = d([0.0, 0.0, 0.0, -1.0]);
        drive[(0, 1)] = C64::new(0.1, 0.0);
        drive[(1, 0)] = C64::new(0.1, 0.0);
        ParametricHamiltonian { fixed: d([0.0, 1.0, 2.0, upper]), drive }
    }

    #[test]
    fn crossing_levels_are_dropped_not_relabelled() {
        let grid: Vec<f64> = (0..101).map(|i| 1.0 - 0.0099 * i as f64).collect();
        let scan = scan_parametric(&crossing_toy(2.5), &grid, 3).unwrap();
        assert_eq!(scan.k_max(), 1);
        assert!(scan.energies.iter().all(|e| e.len() == 2));
        // a crossing of the first excited level itself is fatal
        let mut h = crossing_toy(2.5);
        h.fixed[(3, 3)] = C64::new(1.5, 0.0);
        assert!(matches!(scan_parametric(&h, &grid, 3), Err(Error::TrackingAmbiguous { level: 1, .. })));
    }

    #[test]
    fn rejects_bad_grids() {
        let h = ParametricHamiltonian::two_level(1.0);
        assert!(scan_parametric(&h, &[1.0, 2.0], 1).is_err());
        assert!(scan_parametric(&h, &[2.0, 1.0], 0).is_err());
    }
}
