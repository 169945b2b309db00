// Brute-force references built from Kronecker products, independent of the
// library's Pauli and collective-spin builders.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use catramp::hilbert::{target_state, Basis, ModelSpec};
use catramp::schedule::spectral_scan;

fn pauli(axis: char) -> DMatrix<C64> {
    let (o, i) = (C64::new(0.0, 0.0), C64::new(0.0, 1.0));
    let one = C64::new(1.0, 0.0);
    match axis {
        'x' => DMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        'y' => DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        'z' => DMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
        _ => DMatrix::identity(2, 2),
    }
}

/// Product of single-site factors, site 0 leftmost.
fn string(n: usize, sites: &[(usize, char)]) -> DMatrix<C64> {
    (0..n).fold(DMatrix::identity(1, 1), |acc, k| {
        let axis = sites.iter().find(|(s, _)| *s == k).map_or('1', |(_, a)| *a);
        acc.kronecker(&pauli(axis))
    })
}

fn total(n: usize, axis: char) -> DMatrix<C64> {
    (0..n).map(|k| string(n, &[(k, axis)])).fold(DMatrix::zeros(1 << n, 1 << n), |a, b| a + b) * C64::from(0.5)
}

fn spectrum(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_columns(&order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>());
    (values, vectors)
}

#[test]
fn lipkin_gap_profile_matches_brute_force() {
    let n = 6;
    let model = ModelSpec::lipkin(n);
    let scan = spectral_scan(&model, 121, 1).unwrap();
    let (sx, sz) = (total(n, 'x'), total(n, 'z'));
    let sy = total(n, 'y');
    let casimir = &sx * &sx + &sy * &sy + &sz * &sz;
    let parity = string(n, &(0..n).map(|k| (k, 'x')).collect::<Vec<_>>());
    let id = DMatrix::<C64>::identity(1 << n, 1 << n);
    let smax = n as f64 / 2.0 * (n as f64 / 2.0 + 1.0);
    // push other spin multiplets and the odd sector far above the dynamical levels
    let penalty = (&id * C64::from(smax) - &casimir) * C64::from(1e3) + (&id - &parity) * C64::from(1e3);
    let ferro = -model.coupling / n as f64;
    for (i, &b) in scan.b_grid.iter().enumerate() {
        let h = &sz * &sz * C64::from(ferro) + &sx * C64::from(b);
        let (e, _) = spectrum(&(h + &penalty));
        let gap = e[1] - e[0];
        assert!((scan.gap(i, 1) - gap).abs() < 1e-10, "B={b}: {} vs {gap}", scan.gap(i, 1));
    }
}

#[test]
fn ising_target_matches_brute_force_cat_overlap() {
    let (n, alpha) = (4, 1.2);
    let model = ModelSpec::ising(n, alpha);
    let mut h = total(n, 'y') * C64::from(2.0 * 1e-6 * model.b0);
    for i in 0..n {
        for j in i + 1..n {
            let jij = -model.j_max / ((j - i) as f64).powf(alpha);
            h += string(n, &[(i, 'x'), (j, 'x')]) * C64::from(jij);
        }
    }
    let parity = string(n, &(0..n).map(|k| (k, 'y')).collect::<Vec<_>>());
    let id = DMatrix::<C64>::identity(1 << n, 1 << n);
    // the initial state along the field has parity (-1)^n
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let (_, v) = spectrum(&(h + (&id - &parity * C64::from(sign)) * C64::from(1e2)));
    let oracle = v.column(0).into_owned();

    // even combination of the two x-polarized product states
    let plus = nalgebra::DVector::from_element(1 << n, C64::from(0.25));
    let minus = nalgebra::DVector::from_fn(1 << n, |k, _| C64::from(0.25 * if (k.count_ones() % 2) == 0 { 1.0 } else { -1.0 }));
    let cat = (&plus + &minus) / C64::from(2f64.sqrt());
    let expected = cat.dotc(&oracle).norm_sqr();

    let psi = target_state(&model, Basis::FullSpin { spins: n }).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
    let got = cat.dotc(&psi.amplitudes).norm_sqr();
    assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    assert!(expected > 0.9 && expected < 1.0, "{expected}");
    assert!((oracle.dotc(&psi.amplitudes).norm() - 1.0).abs() < 1e-9);
}
