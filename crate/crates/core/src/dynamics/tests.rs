use std::f64::consts::PI;

use super::*;
use crate::hilbert::{build_collective_ops, Axis};
use crate::schedule::{design_faquad, design_la, spectral_scan, Protocol};

fn frozen(b: f64, t_f: f64) -> Schedule {
    // bypasses validation: a ramp that never reaches zero
    Schedule { t_f, times: vec![0.0, t_f], fields: vec![b, b], protocol: Protocol::La, c_value: 0.0 }
}

fn faquad(model: &ModelSpec, t_f: f64) -> Schedule {
    let scan = spectral_scan(model, 801, 1).unwrap();
    design_faquad(&scan, &[1], t_f).unwrap()
}

#[test]
fn eigenstate_is_stationary() {
    let model = ModelSpec::lipkin(4);
    let basis = Basis::DickeSymmetric { spins: 4 };
    let psi0 = initial_state(&model, basis).unwrap();
    let out = evolve_closed(&model, &frozen(model.b0, 2.0), &psi0, &IntegratorConfig::default()).unwrap();
    let overlap = psi0.overlap(&out).unwrap().norm();
    assert!(overlap >= 1.0 - 1e-9, "{overlap}");
}

#[test]
fn closed_norm_drift_is_tiny() {
    let model = ModelSpec::lipkin(6);
    let basis = Basis::DickeSymmetric { spins: 6 };
    let psi0 = initial_state(&model, basis).unwrap();
    let out = evolve_closed(&model, &faquad(&model, 6.0), &psi0, &IntegratorConfig::default()).unwrap();
    assert!((out.norm() - 1.0).abs() <= 1e-9, "{}", out.norm() - 1.0);
}

#[test]
fn symmetric_and_full_closed_runs_agree() {
    for spins in [2usize, 4, 6] {
        let model = ModelSpec::lipkin(spins).with_decoupling(0.3, 0.0);
        let schedule = faquad(&model, 3.0);
        let cfg = IntegratorConfig::default();
        let sym = Basis::DickeSymmetric { spins };
        let full = Basis::FullSpin { spins };
        let fs = state_fidelity(
            &evolve_closed(&model, &schedule, &initial_state(&model, sym).unwrap(), &cfg).unwrap(),
            &target_state(&model, sym).unwrap(),
        )
        .unwrap();
        let ff = state_fidelity(
            &evolve_closed(&model, &schedule, &initial_state(&model, full).unwrap(), &cfg).unwrap(),
            &target_state(&model, full).unwrap(),
        )
        .unwrap();
        assert!((fs - ff).abs() <= 1e-9, "N={spins}: {fs} vs {ff}");
    }
}

#[test]
fn single_qubit_dephasing() {
    // one spin, no Hamiltonian: a Lipkin chain of one spin with zero coupling
    let mut model = ModelSpec::lipkin(1).with_gamma(120.0);
    model.coupling = 0.0;
    let schedule = Schedule::new(vec![0.0, 10.0], vec![1e-300, 0.0], Protocol::La, 0.0).unwrap();
    let plus = DMatrix::from_element(2, 2, C64::new(0.5, 0.0));
    let rho0 = DensityMatrix::new(plus, Basis::FullSpin { spins: 1 });
    let rho = evolve_lindblad(&model, &schedule, &rho0, &IntegratorConfig::with_dt(1e-3)).unwrap();
    let ratio = rho.matrix[(0, 1)].re / 0.5;
    assert!((ratio - (-1.2f64).exp()).abs() < 1e-6, "{ratio}");
}

#[test]
fn unitary_limit_of_lindblad_matches_closed() {
    for model in [ModelSpec::lipkin(4).with_decoupling(0.4, 0.0), ModelSpec::ising(4, 1.2)] {
        let basis = Basis::FullSpin { spins: 4 };
        let schedule = faquad(&model, 2.0);
        let cfg = IntegratorConfig::default();
        let psi0 = initial_state(&model, basis).unwrap();
        let psi = evolve_closed(&model, &schedule, &psi0, &cfg).unwrap();
        let rho = evolve_lindblad(&model, &schedule, &psi0.projector(), &cfg).unwrap();
        let dist = rho.trace_distance(&psi.projector()).unwrap();
        assert!(dist <= 1e-8, "{dist}");
    }
}

#[test]
fn dephasing_keeps_trace_and_positivity() {
    let model = ModelSpec::ising(4, 1.2).with_gamma(500.0).with_decoupling(0.5, 0.0);
    let basis = Basis::FullSpin { spins: 4 };
    let psi0 = initial_state(&model, basis).unwrap();
    let rho = evolve_lindblad(&model, &faquad(&model, 2.0), &psi0.projector(), &IntegratorConfig::default())
        .unwrap();
    assert!((rho.trace() - 1.0).abs() <= 1e-8);
    assert!(rho.min_eigenvalue().unwrap() >= -1e-7);
    assert!(rho.purity() < 0.999);
}

#[test]
fn symmetric_blocks_match_full_space() {
    for (model, spins) in [
        (ModelSpec::lipkin(4).with_gamma(400.0).with_decoupling(0.5, 0.0), 4usize),
        (ModelSpec::lipkin(5).with_gamma(300.0), 5),
        (ModelSpec::ising(4, 0.0).with_gamma(400.0).with_decoupling(0.6, 0.0), 4),
    ] {
        let schedule = faquad(&model, 1.5);
        let cfg = IntegratorConfig::default();
        let basis = Basis::FullSpin { spins };
        let psi0 = initial_state(&model, basis).unwrap();
        let full = evolve_lindblad(&model, &schedule, &psi0.projector(), &cfg).unwrap();
        let (blocks, kernel) = evolve_lindblad_symmetric(&model, &schedule, &cfg).unwrap();
        let mut expanded = kernel.to_full(&blocks).matrix;
        if blocks.rotated {
            let d = 1 << spins;
            let mut v = row_major(&expanded);
            hadamard_conjugate(&mut v, d);
            expanded = from_row_major(&v, d);
        }
        let diff = (&expanded - &full.matrix).camax();
        assert!(diff < 1e-9, "N={spins}: {diff}");
        let target = target_state(&model, basis).unwrap();
        let f_full = fidelity(&full, &target).unwrap();
        let f_sym = blocks.fidelity(&kernel.target);
        assert!((f_full - f_sym).abs() < 1e-9);
        assert!((blocks.trace() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn simulation_engines_agree() {
    let model = ModelSpec::lipkin(4).with_gamma(120.0).with_decoupling(0.5, 0.0);
    let schedule = faquad(&model, 2.5);
    let cfg = IntegratorConfig::default();
    let a = Simulation::with_engine(&model, Engine::FullLindblad, &cfg).unwrap().run(&schedule, 0).unwrap();
    let b = Simulation::new(&model, &cfg).unwrap();
    assert_eq!(b.engine, Engine::SymmetricLindblad);
    let b = b.run(&schedule, 0).unwrap();
    assert!((a.fidelity - b.fidelity).abs() < 1e-9);
    assert!((a.purity - b.purity).abs() < 1e-9);
}

#[test]
fn trajectory_stride_and_endpoints() {
    let model = ModelSpec::lipkin(3);
    let schedule = faquad(&model, 1.0);
    let sim = Simulation::new(&model, &IntegratorConfig::with_dt(1e-3)).unwrap();
    let out = sim.run(&schedule, 300).unwrap();
    // at least one step per ramp interval: the samples are closer than dt
    assert!(out.steps >= schedule.times.len() - 1);
    let times: Vec<f64> = out.trajectory.iter().map(|p| p.t_ms).collect();
    assert_eq!(times.len(), out.steps.div_ceil(300) + 1);
    assert_eq!(times[0], 0.0);
    assert_eq!(*times.last().unwrap(), 1.0);
    assert!((out.trajectory.last().unwrap().fidelity - out.fidelity).abs() < 1e-15);
    let csv = write_trajectory_csv(&out.trajectory, "");
    assert!(csv.starts_with("t_ms,fidelity,trace,purity\n"));
}

#[test]
fn convergence_is_fourth_order() {
    let model = ModelSpec::lipkin(4);
    let basis = Basis::DickeSymmetric { spins: 4 };
    let (_, _, sz) = build_collective_ops(4, basis).unwrap();
    // a superposition under constant field accumulates relative phases
    let psi0 = QuantumState::new(
        (initial_state(&model, basis).unwrap().amplitudes + sz.matrix.column(1)).normalize(),
        basis,
    );
    let schedule = frozen(model.b0, 0.5);
    let run = |dt: f64| -> Result<f64> {
        let out = evolve_closed(&model, &schedule, &psi0, &IntegratorConfig::with_dt(dt))?;
        // relative phase, blind to the global phase
        Ok((out.amplitudes[2] / out.amplitudes[1]).arg())
    };
    let a = convergence_probe(1e-3, run).unwrap();
    let b = convergence_probe(5e-4, run).unwrap();
    let ratio = a.difference / b.difference;
    assert!((8.0..32.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn lindblad_fidelity_equals_closed_when_gamma_vanishes() {
    let model = ModelSpec::ising(4, 1.2);
    let schedule = faquad(&model, 2.0);
    let cfg = IntegratorConfig::default();
    let closed = Simulation::new(&model, &cfg).unwrap().run(&schedule, 0).unwrap();
    let open = Simulation::with_engine(&model, Engine::FullLindblad, &cfg).unwrap().run(&schedule, 0).unwrap();
    assert!((closed.fidelity - open.fidelity).abs() <= 1e-8);
}

#[test]
fn dt_policy() {
    let cfg = IntegratorConfig::default();
    assert_eq!(cfg.resolve_dt(1.0).unwrap(), 1e-3);
    assert!((cfg.resolve_dt(100.0).unwrap() - 5e-4).abs() < 1e-15);
    assert!(IntegratorConfig::with_dt(0.01).resolve_dt(100.0).is_err());
    assert!(IntegratorConfig::with_dt(-1.0).resolve_dt(1.0).is_err());
    let s = Schedule::new(vec![0.0, 0.1, 1.0], vec![2.0, 1.0, 0.0], Protocol::La, 0.0).unwrap();
    let grid = step_grid(&s, 0.3, 1e-9);
    assert_eq!(grid.len(), 5);
    assert_eq!(grid[1], 0.1);
    assert!((grid[2] - 0.4).abs() < 1e-15 && grid[4] == 1.0);
}

#[test]
fn lz_la_schedule_is_used_consistently() {
    // ramps are evaluated through field_at during integration
    let scan = spectral_scan(&ModelSpec::lipkin(2), 201, 1).unwrap();
    let s = design_la(&scan, 1, 1.0).unwrap();
    assert_eq!(s.field_at(0.0), scan.b_grid[0]);
    assert_eq!(s.field_at(1.0), 0.0);
    assert!(Axis::X != Axis::Z && PI > 3.0);
}

fn dicke_lipkin_pair(nbar: usize) -> (ModelSpec, ModelSpec) {
    let (spins, g0, delta) = (4, 11.0, -55.0);
    let dicke = ModelSpec::dicke(spins, g0, delta, nbar);
    let mut lipkin = ModelSpec::lipkin(spins);
    lipkin.coupling = g0 * g0 / f64::abs(delta);
    (dicke, lipkin)
}

#[test]
fn dicke_reduces_to_lipkin_at_large_detuning() {
    let (dicke, lipkin) = dicke_lipkin_pair(10);
    assert!(dicke.delta.abs() >= 10.0 * dicke.g0 / (dicke.spins as f64).sqrt());
    let cfg = IntegratorConfig::default();
    for t_f in [2.0, 6.0] {
        let schedule = faquad(&lipkin, t_f);
        let fl = Simulation::new(&lipkin, &cfg).unwrap().run(&schedule, 0).unwrap().fidelity;
        let fd = Simulation::new(&dicke, &cfg).unwrap().run(&schedule, 0).unwrap().fidelity;
        assert!((fl - fd).abs() <= 0.01, "t_f={t_f}: Lipkin {fl} vs Dicke {fd}");
    }
}

#[test]
fn dicke_cutoff_is_converged() {
    let (d10, lipkin) = dicke_lipkin_pair(10);
    let (d14, _) = dicke_lipkin_pair(14);
    let schedule = faquad(&lipkin, 4.0);
    let cfg = IntegratorConfig::default();
    let f10 = Simulation::new(&d10, &cfg).unwrap().run(&schedule, 0).unwrap().fidelity;
    let f14 = Simulation::new(&d14, &cfg).unwrap().run(&schedule, 0).unwrap().fidelity;
    assert!((f10 - f14).abs() < 1e-4, "{f10} vs {f14}");
}
