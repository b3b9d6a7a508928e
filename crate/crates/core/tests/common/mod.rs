//! Randomized invariant checks shared by the property and acceptance targets.

#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use rydfrag::basis::{Basis, Boundary, ChainSpec, ProductState};
use rydfrag::disorder::{ensemble_trace, EnsembleDynamics, EnsembleObservable, EnsembleRequest, NoiseSpec};
use rydfrag::evolution::{evolve_static, EvolutionPlan, Method, QuantumState};
use rydfrag::fragmentation::connected_components;
use rydfrag::hamiltonian::{build_effective, build_rydberg, DriveSpec, EffectiveModel};
use rydfrag::observables::{bipartite_entropy, microstate_histogram, single_site_entropy, SubarraySpec};
use rydfrag::operator::OperatorMatrix;

pub const CASES: u32 = 1000;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<u32, String>
where
    S::Value: std::fmt::Debug,
{
    runner().run(&strategy, test).map(|_| CASES).map_err(|e| e.to_string())
}

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Open), Just(Boundary::Periodic)]
}

fn model(n_max: usize) -> impl Strategy<Value = (EffectiveModel, usize, Boundary)> {
    let kind = prop_oneof![
        (0.1f64..3.0).prop_map(|omega| EffectiveModel::Pxp { omega }),
        (0.1f64..3.0).prop_map(|omega| EffectiveModel::Qxq { omega }),
        (1usize..=3, 0.1f64..3.0).prop_map(|(k, omega)| EffectiveModel::Qpxpq { k, omega }),
        (1usize..=2, 0.1f64..3.0, 0.0f64..3.0).prop_map(|(k, omega_f, omega_fp)| EffectiveModel::Krt { k, omega_f, omega_fp }),
        (0.1f64..3.0).prop_map(|omega| EffectiveModel::Ppxpp { omega }),
        (0.1f64..3.0, 0.1f64..3.0).prop_map(|(omega, omega_p)| EffectiveModel::PpxppV1Drive { omega, omega_p }),
    ];
    (kind, 4usize..=n_max, boundary())
}

fn effective(m: &EffectiveModel, n: usize, b: Boundary) -> OperatorMatrix {
    let spec = ChainSpec::with_couplings(n, b, 1.0, vec![0.0; 3]).unwrap();
    build_effective(m, &spec, Arc::new(Basis::full(n).unwrap())).unwrap()
}

fn rydberg_case() -> impl Strategy<Value = (usize, Boundary, Vec<f64>, f64, f64, u64, f64)> {
    (2usize..=6).prop_flat_map(|n| {
        (
            Just(n),
            boundary(),
            prop::collection::vec(-5.0f64..20.0, 0..=3),
            0.0f64..6.0,
            -6.0f64..6.0,
            0u64..(1u64 << n),
            0.0f64..5.0,
        )
    })
}

fn random_state(n_max: usize) -> impl Strategy<Value = (usize, Vec<(f64, f64)>)> {
    (2usize..=n_max).prop_flat_map(|n| (Just(n), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n)))
}

fn normalized(n: usize, raw: &[(f64, f64)]) -> Option<QuantumState> {
    let amps: Vec<C64> = raw.iter().map(|&(a, b)| C64::new(a, b)).collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm < 1e-6 {
        return None;
    }
    let amps = amps.into_iter().map(|a| a / norm).collect();
    Some(QuantumState::new(Arc::new(Basis::full(n).unwrap()), amps).unwrap())
}

/// Evolution preserves the norm under both propagators.
pub fn unitarity() -> Result<u32, String> {
    check(rydberg_case(), |(n, b, v, omega, delta, code, t)| {
        let spec = ChainSpec::with_couplings(n, b, 1.0, v).unwrap();
        let basis = Arc::new(Basis::full(n).unwrap());
        let h = build_rydberg(&spec, &DriveSpec::new(omega, delta), basis.clone()).unwrap();
        let psi = QuantumState::product(basis, &ProductState::from_code(code, n)).unwrap();
        for method in [Method::Eigendecomposition, Method::Krylov] {
            let plan = EvolutionPlan::uniform(t, 3).unwrap().with_method(method);
            let tr = evolve_static(&h, &psi, &plan).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for s in &tr.states {
                prop_assert!((s.norm() - 1.0).abs() < 1e-9, "norm {}", s.norm());
            }
        }
        Ok(())
    })
}

/// Every builder yields a Hermitian matrix.
pub fn hermiticity() -> Result<u32, String> {
    let a = check(model(8), |(m, n, b)| {
        let h = effective(&m, n, b);
        prop_assert!(h.csr().hermiticity_defect() < 1e-12);
        Ok(())
    })?;
    let b = check(rydberg_case(), |(n, b, v, omega, delta, _, _)| {
        let spec = ChainSpec::with_couplings(n, b, 1.0, v).unwrap();
        let h = build_rydberg(&spec, &DriveSpec::new(omega, delta), Arc::new(Basis::full(n).unwrap())).unwrap();
        prop_assert!(h.csr().hermiticity_defect() < 1e-12);
        Ok(())
    })?;
    Ok(a.min(b))
}

/// No matrix weight connects distinct Krylov components, and they partition
/// the basis.
pub fn component_closure() -> Result<u32, String> {
    check(model(9), |(m, n, b)| {
        let h = effective(&m, n, b);
        let d = connected_components(&h);
        prop_assert_eq!(d.crossing_weight(&h), 0.0);
        let mut seen = vec![false; h.dim()];
        for c in d.components() {
            for &i in c {
                prop_assert!(!seen[i]);
                seen[i] = true;
            }
        }
        prop_assert!(seen.into_iter().all(|s| s));
        Ok(())
    })
}

/// `0 ≤ S ≤ min(cut, N - cut) ln 2` and single-site entropies at most `ln 2`.
pub fn entropy_bounds() -> Result<u32, String> {
    check((random_state(7), 0.0f64..1.0), |((n, raw), frac)| {
        let Some(psi) = normalized(n, &raw) else { return Ok(()) };
        let cut = 1 + ((n - 1) as f64 * frac) as usize;
        let cut = cut.min(n - 1);
        let s = bipartite_entropy(&psi, cut).unwrap();
        let bound = cut.min(n - cut) as f64 * std::f64::consts::LN_2;
        prop_assert!(s >= -1e-12 && s <= bound + 1e-10, "S = {} bound {}", s, bound);
        for i in 1..=n {
            let si = single_site_entropy(&psi, i).unwrap();
            prop_assert!((-1e-12..=std::f64::consts::LN_2 + 1e-12).contains(&si));
        }
        Ok(())
    })
}

/// Histogram bins plus leakage carry the full probability mass.
pub fn histogram_mass() -> Result<u32, String> {
    check((random_state(6), prop::collection::vec(any::<u64>(), 1..20)), |((n, raw), picks)| {
        let Some(psi) = normalized(n, &raw) else { return Ok(()) };
        let component: Vec<ProductState> = picks.iter().map(|&c| ProductState::from_code(c % (1 << n), n)).collect();
        let h = microstate_histogram(&psi, &component[0], &component).unwrap();
        prop_assert!((h.total() - 1.0).abs() < 1e-10);
        prop_assert!(h.leakage >= 0.0);
        Ok(())
    })
}

/// Ensemble averages are bit-identical for a fixed seed.
pub fn seed_determinism() -> Result<u32, String> {
    let spec = ChainSpec::from_nearest(3, Boundary::Open, 3.0, 5.0, 2).unwrap();
    let basis = Arc::new(Basis::full(3).unwrap());
    let plan = EvolutionPlan::uniform(0.4, 3).unwrap();
    let obs = [EnsembleObservable::GroundDensity(SubarraySpec::custom(vec![1, 2, 3]))];
    check((any::<u64>(), 0.0f64..0.3, 0.0f64..1.0, 1usize..4), |(seed, sigma_r, sigma_doppler, n_traj)| {
        let noise = NoiseSpec {
            sigma_r,
            sigma_doppler,
            ..NoiseSpec::clean(seed, n_traj)
        };
        let req = EnsembleRequest {
            spec: &spec,
            dynamics: EnsembleDynamics::Static(DriveSpec::new(2.0, 1.0)),
            basis: basis.clone(),
            initial: ProductState::from_sites(3, &[2]).unwrap(),
            plan: &plan,
            noise: &noise,
            observables: &obs,
            truncate: false,
        };
        let a = ensemble_trace(&req).unwrap();
        let b = ensemble_trace(&req).unwrap();
        for (x, y) in a.site_mean.iter().flatten().zip(b.site_mean.iter().flatten()) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn all() -> Vec<(&'static str, fn() -> Result<u32, String>)> {
    vec![
        ("unitarity", unitarity as fn() -> Result<u32, String>),
        ("hermiticity", hermiticity),
        ("component closure", component_closure),
        ("entropy bounds", entropy_bounds),
        ("histogram mass", histogram_mass),
        ("seed determinism", seed_determinism),
    ]
}
