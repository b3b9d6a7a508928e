use std::f64::consts::PI;
use std::sync::Arc;

use rydfrag::basis::{classify_configuration, pair_count, primary_block, Basis, Boundary, ChainSpec, ConfigClass, ProductState};
use rydfrag::evolution::{evolve_static, EvolutionPlan, Method, QuantumState};
use rydfrag::fragmentation::{connected_components, count_domain_walls};
use rydfrag::hamiltonian::{build_effective, build_rydberg_with, reachable_states, DriveSpec, EffectiveModel, RydbergOptions};
use rydfrag::observables::{fourier_spectrum, staggered_magnetization_trace, ObservableTrace, SubarraySpec};
use rydfrag::scars::{fit_oscillation, scar_scan, z6_scar_check, ScarFlagOptions, Z6Dynamics};
use rydfrag::thermal::restrict;

const MHZ: f64 = 2.0 * PI;

/// M_A from the Z4 state under H_Ryd on the blockaded block, `Δ = 2 V_1`.
fn full_z4_trace(n: usize, omega: f64, v1: f64, t_end: f64) -> ObservableTrace {
    let spec = ChainSpec::from_order(n, Boundary::Open, 3.73, 2, v1, 3).unwrap();
    let basis = Arc::new(Basis::from_states(n, primary_block(&spec)).unwrap());
    let opts = RydbergOptions {
        allow_truncation: true,
        ..Default::default()
    };
    let h = build_rydberg_with(&spec, &DriveSpec::new(omega, 2.0 * v1), basis.clone(), &opts).unwrap();
    let z4: Vec<usize> = (1..=n).step_by(4).collect();
    let psi = QuantumState::from_sites(basis, &z4).unwrap();
    let plan = EvolutionPlan::for_rabi(omega, t_end).unwrap().with_method(Method::Krylov);
    let tr = evolve_static(&h, &psi, &plan).unwrap();
    staggered_magnetization_trace(&tr, &SubarraySpec::a(n, 2)).unwrap()
}

fn effective_z4_trace(n: usize, omega: f64, t_end: f64) -> ObservableTrace {
    let spec = ChainSpec::with_couplings(n, Boundary::Open, 1.0, vec![0.0, 0.0]).unwrap();
    let model = EffectiveModel::Qpxpq { k: 2, omega };
    let z4 = ProductState::from_sites(n, &(1..=n).step_by(4).collect::<Vec<_>>()).unwrap();
    let basis = Arc::new(Basis::from_states(n, reachable_states(&model, &spec, &z4, 1 << 16).unwrap()).unwrap());
    let h = build_effective(&model, &spec, basis.clone()).unwrap();
    let psi = QuantumState::product(basis, &z4).unwrap();
    let tr = evolve_static(&h, &psi, &EvolutionPlan::for_rabi(omega, t_end).unwrap()).unwrap();
    staggered_magnetization_trace(&tr, &SubarraySpec::a(n, 2)).unwrap()
}

#[test]
fn odd_sector_tower_with_edge_excitations() {
    // Odd configurational subspace with n_DW = 0 on an open chain, inside
    // the resonant V_1 shell of the start: V_1 pairs minus twice the
    // excitation number is conserved at Δ = 2 V_1.
    let n = 29;
    let spec = ChainSpec::with_couplings(n, Boundary::Open, 1.0, vec![0.0, 0.0]).unwrap();
    let z4 = ProductState::from_sites(n, &(1..=n).step_by(4).collect::<Vec<_>>()).unwrap();
    let shell = |s: &ProductState| pair_count(s, n, Boundary::Open, 2) as i64 - 2 * s.excitation_count() as i64;
    let states: Vec<ProductState> = primary_block(&spec)
        .into_iter()
        .filter(|s| classify_configuration(s).unwrap() == ConfigClass::Odd)
        .filter(|s| count_domain_walls(s, &spec).unwrap() == 0)
        .filter(|s| shell(s) == shell(&z4))
        .collect();
    let basis = Arc::new(Basis::from_states(n, states).unwrap());
    let dim = basis.len();
    eprintln!("N = {n} odd n_DW = 0 resonant sector dimension {dim}");
    let h = build_effective(&EffectiveModel::Qpxpq { k: 2, omega: 1.0 }, &spec, basis).unwrap();
    let all: Vec<usize> = (0..dim).collect();
    let scan = scar_scan(&h, &all, &z4, &ScarFlagOptions::default()).unwrap();
    assert!((scan.total_overlap() - 1.0).abs() < 1e-10);
    assert!(scan.flagged().count() >= 4);

    // Tower: the largest-overlap eigenstate of each level, levels at least
    // 0.4 Ω apart.
    let mut by_overlap = scan.points.clone();
    by_overlap.sort_by(|a, b| b.overlap.total_cmp(&a.overlap));
    let mut tower: Vec<_> = Vec::new();
    for p in by_overlap {
        if tower.len() < 12 && tower.iter().all(|q: &rydfrag::scars::ScarPoint| (q.energy - p.energy).abs() > 0.4) {
            tower.push(p);
        }
    }
    tower.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mass: f64 = tower.iter().map(|p| p.overlap).sum();
    assert!(mass > 0.5, "tower overlap {mass}");
    let gaps: Vec<f64> = tower.windows(2).map(|w| w[1].energy - w[0].energy).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    eprintln!("tower of {} carries {mass:.3}, gaps {gaps:.3?}", tower.len());
    assert!((mean - 0.67).abs() < 0.05, "mean gap {mean}");
    assert!(gaps.iter().all(|g| (g - mean).abs() < 0.15 * mean), "{gaps:?}");
    let mut entropies: Vec<f64> = scan.points.iter().map(|p| p.entropy).collect();
    entropies.sort_by(f64::total_cmp);
    let median = entropies[dim / 2];
    assert!(tower.iter().all(|p| p.entropy < median), "median {median}, tower {tower:?}");
}

#[test]
fn effective_scar_outlives_full_hamiltonian() {
    let n = 13;
    let omega = MHZ * 1.45;
    let eff = fit_oscillation(&effective_z4_trace(n, omega, 6.0));
    let full = fit_oscillation(&full_z4_trace(n, omega, MHZ * 5.0, 6.0));
    assert!(eff.converged() && full.converged(), "{}\n{}", eff.summary(), full.summary());
    assert!(eff.tau > full.tau, "effective tau {} vs full {}", eff.tau, full.tau);
}

#[test]
fn z6_peak_is_lower_than_z4() {
    let omega = MHZ * 1.45;
    let z4 = fourier_spectrum(&full_z4_trace(13, omega, MHZ * 5.0, 3.0), None).unwrap();
    let z6 = z6_scar_check(19, omega, Z6Dynamics::Full { v2: 3.0 * omega }, 3.0).unwrap();
    let (_, h4) = z4.peak().unwrap();
    let (_, h6) = z6.spectrum.peak().unwrap();
    assert!(h6 < h4, "Z6 peak {h6} vs Z4 peak {h4}");
    let floor = |t: &ObservableTrace| t.values.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(floor(&z6.p_b) < 1.0 - 1e-6 && floor(&z6.p_c) < 1.0 - 1e-6);
}

/// Fidelity at the first fitted revival against the long-time mean
/// fidelity (the inverse participation ratio of the start).
#[test]
fn revival_fidelity_exceeds_long_time_mean_fivefold() {
    let n = 13;
    let spec = ChainSpec::with_couplings(n, Boundary::Open, 1.0, vec![0.0, 0.0]).unwrap();
    let h = build_effective(&EffectiveModel::Qpxpq { k: 2, omega: 1.0 }, &spec, Arc::new(Basis::full(n).unwrap())).unwrap();
    let z4 = ProductState::from_sites(n, &[1, 5, 9, 13]).unwrap();
    let d = connected_components(&h);
    let comp = d.component(d.component_of_state(&h, &z4).unwrap()).to_vec();
    let sub = restrict(&h, &comp);
    let psi = QuantumState::product(sub.basis().clone(), &z4).unwrap();
    let tr = evolve_static(&sub, &psi, &EvolutionPlan::for_rabi(1.0, 60.0).unwrap()).unwrap();
    let fit = fit_oscillation(&staggered_magnetization_trace(&tr, &SubarraySpec::a(n, 2)).unwrap());
    assert!(fit.converged());
    let t = fit.revival_time();
    let at = EvolutionPlan {
        sample_times: vec![t],
        t_end: t,
        ..EvolutionPlan::uniform(t, 2).unwrap()
    };
    let f_rev = evolve_static(&sub, &psi, &at).unwrap().last().fidelity(&psi).unwrap();
    let ipr: f64 = scar_scan(&h, &comp, &z4, &ScarFlagOptions::default())
        .unwrap()
        .level_overlaps(1e-9)
        .iter()
        .map(|(_, w)| w * w)
        .sum();
    assert!(f_rev >= 5.0 * ipr, "revival fidelity {f_rev:.4}, long-time mean {ipr:.4}, ratio {:.3}", f_rev / ipr);
}
