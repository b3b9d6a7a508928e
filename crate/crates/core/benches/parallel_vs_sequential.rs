//! Data-parallel core against a single worker.
//!
//! With the default `parallel` feature each workload runs on the global rayon
//! pool and inside a one-thread pool. `cargo bench --no-default-features`
//! measures the sequential fallback build.

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use rydfrag::basis::{Basis, Boundary, ChainSpec, ProductState};
use rydfrag::disorder::{ensemble_trace, EnsembleDynamics, EnsembleRequest, NoiseSpec};
use rydfrag::evolution::{EvolutionPlan, Method};
use rydfrag::fragmentation::connected_components;
use rydfrag::hamiltonian::{build_effective, build_rydberg, DriveSpec, EffectiveModel};

fn workloads() -> Vec<(&'static str, Box<dyn Fn() + Send + Sync>)> {
    let n = 12;
    let spec = ChainSpec::from_order(n, Boundary::Open, 3.73, 2, 2.0 * std::f64::consts::PI * 5.0, 3).unwrap();
    let basis = Arc::new(Basis::full(n).unwrap());
    let drive = DriveSpec::new(9.1, 31.4);

    let build = {
        let (spec, basis, drive) = (spec.clone(), basis.clone(), drive.clone());
        move || {
            black_box(build_rydberg(&spec, &drive, basis.clone()).unwrap());
        }
    };
    let components = {
        let model = EffectiveModel::Krt {
            k: 2,
            omega_f: 1.0,
            omega_fp: 1.2,
        };
        let h = build_effective(&model, &spec, basis.clone()).unwrap();
        move || {
            black_box(connected_components(&h));
        }
    };
    let ensemble = {
        let small = ChainSpec::from_order(6, Boundary::Open, 3.73, 2, 31.4, 3).unwrap();
        let basis = Arc::new(Basis::full(6).unwrap());
        let plan = EvolutionPlan::uniform(0.5, 6).unwrap().with_method(Method::Krylov);
        let noise = NoiseSpec {
            sigma_r: 0.087,
            ..NoiseSpec::clean(1, 16)
        };
        move || {
            let req = EnsembleRequest {
                spec: &small,
                dynamics: EnsembleDynamics::Static(DriveSpec::new(9.1, 62.8)),
                basis: basis.clone(),
                initial: ProductState::from_sites(6, &[1, 5]).unwrap(),
                plan: &plan,
                noise: &noise,
                observables: &[],
                truncate: false,
            };
            black_box(ensemble_trace(&req).unwrap());
        }
    };
    vec![
        ("build_rydberg_n12", Box::new(build)),
        ("krylov_components_n12", Box::new(components)),
        ("disorder_ensemble_16", Box::new(ensemble)),
    ]
}

fn bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("core");
    group.sample_size(10);
    for (name, work) in workloads() {
        #[cfg(feature = "parallel")]
        {
            group.bench_function(BenchmarkId::new("parallel", name), |b| b.iter(&work));
            let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
            group.bench_function(BenchmarkId::new("one_thread", name), |b| b.iter(|| single.install(&work)));
        }
        #[cfg(not(feature = "parallel"))]
        group.bench_function(BenchmarkId::new("sequential", name), |b| b.iter(&work));
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
