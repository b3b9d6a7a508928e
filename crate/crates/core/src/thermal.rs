//! Equal-weight microcanonical ensembles inside a Krylov sector, plus
//! diagonal and canonical averages used as cross-checks.

use std::sync::Arc;

use serde::Serialize;

use crate::basis::{Basis, ProductState};
use crate::error::{Error, Result};
use crate::evolution::QuantumState;
use crate::linalg::{eigh, Eigen};
use crate::observables::ObservableTrace;
use crate::operator::{OperatorMatrix, C64, DENSE_THRESHOLD};

/// Default half-width of the energy window in units of the facilitation
/// Rabi frequency.
pub const DEFAULT_WINDOW: f64 = 0.24;

/// Eigenvalues closer than this are treated as one degenerate level.
const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct MicrocanonicalEnsemble {
    pub center: f64,
    pub half_width: f64,
    /// Basis spanned by the component.
    pub basis: Arc<Basis>,
    pub energies: Vec<f64>,
    pub members: Vec<QuantumState>,
    /// Distance from the nearest eigenvalue (member or not) to a window edge.
    pub edge_gap: f64,
}

/// `H` restricted to the given basis indices.
pub fn restrict(h: &OperatorMatrix, component: &[usize]) -> OperatorMatrix {
    let mut idx = component.to_vec();
    idx.sort_unstable();
    idx.dedup();
    h.restricted(&idx)
}

fn component_eigen(h: &OperatorMatrix, component: &[usize]) -> Result<(OperatorMatrix, Eigen)> {
    if component.is_empty() {
        return Err(Error::EmptyEnsemble { lo: 0.0, hi: 0.0 });
    }
    if let Some(&bad) = component.iter().find(|&&i| i >= h.dim()) {
        return Err(Error::OutOfRange { index: bad, limit: h.dim() });
    }
    if component.len() > DENSE_THRESHOLD {
        return Err(Error::DimensionOverCap {
            dim: component.len(),
            cap: DENSE_THRESHOLD,
        });
    }
    let sub = restrict(h, component);
    let eig = eigh(&sub.to_dense());
    Ok((sub, eig))
}

/// Eigenstates of `H` restricted to `component` with `|E - e0| <= de`.
pub fn build_ensemble(h: &OperatorMatrix, component: &[usize], e0: f64, de: f64) -> Result<MicrocanonicalEnsemble> {
    if !(de >= 0.0) {
        return Err(Error::EmptyEnsemble { lo: e0 - de, hi: e0 + de });
    }
    let (sub, eig) = component_eigen(h, component)?;
    let (lo, hi) = (e0 - de, e0 + de);
    let basis = sub.basis().clone();
    let mut energies = Vec::new();
    let mut members = Vec::new();
    for (k, &e) in eig.values.iter().enumerate() {
        if e >= lo && e <= hi {
            energies.push(e);
            members.push(QuantumState::new(basis.clone(), eig.vector(k))?);
        }
    }
    if members.is_empty() {
        return Err(Error::EmptyEnsemble { lo, hi });
    }
    let edge_gap = eig
        .values
        .iter()
        .map(|&e| (e - lo).abs().min((e - hi).abs()))
        .fold(f64::INFINITY, f64::min);
    Ok(MicrocanonicalEnsemble {
        center: e0,
        half_width: de,
        basis,
        energies,
        members,
        edge_gap,
    })
}

impl MicrocanonicalEnsemble {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Equal-weight average of `f` over the members.
    pub fn expectation(&self, f: impl Fn(&QuantumState) -> Result<f64>) -> Result<f64> {
        if self.members.is_empty() {
            return Err(Error::EmptyEnsemble {
                lo: self.center - self.half_width,
                hi: self.center + self.half_width,
            });
        }
        let mut acc = 0.0;
        for m in &self.members {
            acc += f(m)?;
        }
        Ok(acc / self.members.len() as f64)
    }

    /// Average of an observable diagonal in the product basis.
    pub fn diagonal_expectation(&self, f: impl Fn(&ProductState) -> f64) -> Result<f64> {
        let values: Vec<f64> = self.basis.states().iter().map(&f).collect();
        self.expectation(|m| Ok(m.probabilities().iter().zip(&values).map(|(p, v)| p * v).sum()))
    }

    /// Machine-readable summary with the requested expectation values.
    pub fn report(&self, values: &[(&str, f64)]) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            window: [f64; 2],
            member_count: usize,
            energies: &'a [f64],
            edge_gap: f64,
            expectations: std::collections::BTreeMap<&'a str, f64>,
        }
        let r = Report {
            window: [self.center - self.half_width, self.center + self.half_width],
            member_count: self.len(),
            energies: &self.energies,
            edge_gap: self.edge_gap,
            expectations: values.iter().copied().collect(),
        };
        serde_json::to_string_pretty(&r).expect("report serializes")
    }
}

/// Shorthand for [`MicrocanonicalEnsemble::expectation`].
pub fn ensemble_expectation(ens: &MicrocanonicalEnsemble, f: impl Fn(&QuantumState) -> Result<f64>) -> Result<f64> {
    ens.expectation(f)
}

/// `(E_k, ⟨E_k|O|E_k⟩)` for every eigenstate of the restricted operator,
/// sorted by energy.
pub fn eigen_observable_scatter(
    h: &OperatorMatrix,
    component: &[usize],
    f: impl Fn(&QuantumState) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let (sub, eig) = component_eigen(h, component)?;
    let basis = sub.basis().clone();
    (0..eig.dim())
        .map(|k| Ok((eig.values[k], f(&QuantumState::new(basis.clone(), eig.vector(k))?)?)))
        .collect()
}

/// Mean of the samples with `t` in `[t_start, t_end]`.
pub fn time_average(trace: &ObservableTrace, t_start: f64, t_end: f64) -> Result<f64> {
    if t_end < t_start {
        return Err(Error::EmptyWindow(format!("[{t_start}, {t_end}] is reversed")));
    }
    trace.window_mean(t_start, t_end)
}

/// Infinite-time average `Σ_E ⟨ψ|Π_E O Π_E|ψ⟩` for a diagonal observable,
/// with `Π_E` the projector onto each (possibly degenerate) level.
pub fn diagonal_ensemble(h: &OperatorMatrix, psi0: &QuantumState, f: impl Fn(&ProductState) -> f64) -> Result<f64> {
    if h.dim() > DENSE_THRESHOLD {
        return Err(Error::DimensionOverCap {
            dim: h.dim(),
            cap: DENSE_THRESHOLD,
        });
    }
    if **h.basis() != **psi0.basis() {
        return Err(Error::BasisMismatch);
    }
    let eig = eigh(&h.to_dense());
    let c = eig.coefficients(psi0.amplitudes());
    let values: Vec<f64> = h.basis().states().iter().map(f).collect();
    let dim = eig.dim();
    let mut total = 0.0;
    let mut k = 0;
    while k < dim {
        let mut end = k + 1;
        while end < dim && eig.values[end] - eig.values[end - 1] < DEGENERACY_TOL {
            end += 1;
        }
        let mut v = vec![C64::new(0.0, 0.0); dim];
        for j in k..end {
            for (r, vr) in v.iter_mut().enumerate() {
                *vr += c[j] * eig.vectors[(r, j)];
            }
        }
        total += v.iter().zip(&values).map(|(a, o)| a.norm_sqr() * o).sum::<f64>();
        k = end;
    }
    Ok(total)
}

/// `Tr(e^{-βH} O) / Tr(e^{-βH})` for a diagonal observable.
pub fn canonical_expectation(h: &OperatorMatrix, beta: f64, f: impl Fn(&ProductState) -> f64) -> Result<f64> {
    if h.dim() > DENSE_THRESHOLD {
        return Err(Error::DimensionOverCap {
            dim: h.dim(),
            cap: DENSE_THRESHOLD,
        });
    }
    let eig = eigh(&h.to_dense());
    let e_min = eig.values.first().copied().unwrap_or(0.0);
    let values: Vec<f64> = h.basis().states().iter().map(f).collect();
    let (mut z, mut acc) = (0.0, 0.0);
    for k in 0..eig.dim() {
        let w = (-beta * (eig.values[k] - e_min)).exp();
        let o: f64 = (0..eig.dim()).map(|r| eig.vectors[(r, k)].norm_sqr() * values[r]).sum();
        z += w;
        acc += w * o;
    }
    Ok(acc / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Boundary, ChainSpec};
    use crate::evolution::{evolve_static, EvolutionPlan};
    use crate::hamiltonian::{build_krt_subarray, build_rydberg, DriveSpec};
    use crate::observables::{ground_density_of_product, site_values, staggered_of_product, Projection, SubarraySpec};

    fn all_but_ground(h: &OperatorMatrix) -> Vec<usize> {
        (0..h.dim()).filter(|&i| h.basis().get(i).excitation_count() > 0).collect()
    }

    #[test]
    fn seven_site_sector() {
        let of = 1.0;
        let h = build_krt_subarray(7, of, 1.2 * of).unwrap();
        let ens = build_ensemble(&h, &all_but_ground(&h), 0.0, DEFAULT_WINDOW * of).unwrap();
        assert_eq!(ens.len(), 17);
        assert!(ens.edge_gap > 1e-9);
        let sub = SubarraySpec::custom((1..=7).collect());
        let m = ens.diagonal_expectation(|s| staggered_of_product(s, &sub)).unwrap();
        assert!((m + 0.019).abs() <= 0.002, "M = {m}");
        let pg = ens.diagonal_expectation(|s| ground_density_of_product(s, &sub)).unwrap();
        assert!((pg - 0.53).abs() <= 0.01, "P_g = {pg}");
        let report = ens.report(&[("m", m)]);
        assert!(report.contains("\"member_count\": 17"));
    }

    #[test]
    fn six_site_sector() {
        let h = build_krt_subarray(6, 1.0, 1.2).unwrap();
        let ens = build_ensemble(&h, &all_but_ground(&h), 0.0, DEFAULT_WINDOW).unwrap();
        assert_eq!(ens.len(), 9);
        let sub = SubarraySpec::custom((1..=6).collect());
        let pg = ens.diagonal_expectation(|s| ground_density_of_product(s, &sub)).unwrap();
        assert!((pg - 0.52).abs() <= 0.01, "P_g = {pg}");
    }

    #[test]
    fn membership_is_stable_near_default_width() {
        let h = build_krt_subarray(7, 1.0, 1.2).unwrap();
        let comp = all_but_ground(&h);
        for d in [-1e-12, 1e-12] {
            assert_eq!(build_ensemble(&h, &comp, 0.0, DEFAULT_WINDOW + d).unwrap().len(), 17);
        }
    }

    #[test]
    fn single_atom_ensemble() {
        let spec = ChainSpec::with_couplings(1, Boundary::Open, 1.0, vec![]).unwrap();
        let h = build_rydberg(&spec, &DriveSpec::new(2.0, 0.0), Arc::new(Basis::full(1).unwrap())).unwrap();
        let ens = build_ensemble(&h, &[0, 1], 0.0, 1.5).unwrap();
        assert_eq!(ens.len(), 2);
        let z = ens.expectation(|m| Ok(site_values(m, Projection::Z)[0])).unwrap();
        assert!(z.abs() < 1e-12);
        assert!(matches!(build_ensemble(&h, &[0, 1], 0.0, 0.5), Err(Error::EmptyEnsemble { .. })));
    }

    #[test]
    fn scatter_of_diagonal_operator() {
        let b = Arc::new(Basis::full(3).unwrap());
        let h = crate::hamiltonian::diagonal_operator(b, |s| s.code() as f64);
        let pts = eigen_observable_scatter(&h, &(0..8).collect::<Vec<_>>(), |m| Ok(site_values(m, Projection::Q)[2])).unwrap();
        for (k, (e, q)) in pts.iter().enumerate() {
            assert_eq!(*e, k as f64);
            assert_eq!(*q, (k & 1) as f64);
        }
    }

    #[test]
    fn scatter_is_symmetric_under_energy_reflection() {
        // The model has no diagonal and a bipartite hopping graph, so the
        // spectrum comes in ± pairs.
        let h = build_krt_subarray(7, 1.0, 1.2).unwrap();
        let sub = SubarraySpec::custom((1..=7).collect());
        let pts = eigen_observable_scatter(&h, &all_but_ground(&h), |m| {
            Ok(m.probabilities().iter().zip(m.basis().states()).map(|(p, s)| p * staggered_of_product(s, &sub)).sum())
        })
        .unwrap();
        let n = pts.len();
        for k in 0..n {
            assert!((pts[k].0 + pts[n - 1 - k].0).abs() < 1e-9);
        }
        // Band averages of the observable match at ±E.
        let band = |lo: f64, hi: f64| {
            let v: Vec<f64> = pts.iter().filter(|p| p.0 >= lo && p.0 <= hi).map(|p| p.1).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        for (lo, hi) in [(0.5, 1.0), (1.0, 2.0)] {
            assert!((band(lo, hi) - band(-hi, -lo)).abs() < 1e-9);
        }
    }

    #[test]
    fn time_average_examples() {
        let times: Vec<f64> = (0..101).map(|k| k as f64 * 0.01).collect();
        let c = ObservableTrace::new("c", None, times.clone(), vec![0.3; 101]).unwrap();
        assert!((time_average(&c, 0.2, 0.8).unwrap() - 0.3).abs() < 1e-15);
        let s = ObservableTrace::new(
            "s",
            None,
            times.clone(),
            times.iter().map(|t| 1.0 + (2.0 * std::f64::consts::PI * 4.0 * t).sin()).collect(),
        )
        .unwrap();
        // Four full periods sampled without the duplicate endpoint.
        assert!((time_average(&s, 0.0, 0.995).unwrap() - 1.0).abs() < 1e-12);
        assert!(time_average(&c, 2.0, 3.0).is_err());
    }

    #[test]
    fn dephasing_identity() {
        let h = build_krt_subarray(6, 1.0, 1.2).unwrap();
        let comp = all_but_ground(&h);
        let sub_h = restrict(&h, &comp);
        let start = ProductState::from_sites(6, &[1, 4, 6]).unwrap();
        let psi = QuantumState::product(sub_h.basis().clone(), &start).unwrap();
        let sub = SubarraySpec::custom((1..=6).collect());
        let de = diagonal_ensemble(&sub_h, &psi, |s| staggered_of_product(s, &sub)).unwrap();
        // Long-time average over a dense uniform grid converges to the same value.
        let plan = EvolutionPlan::uniform(4000.0, 40001).unwrap();
        let tr = evolve_static(&sub_h, &psi, &plan).unwrap();
        let avg: f64 = tr
            .states
            .iter()
            .map(|s| s.probabilities().iter().zip(s.basis().states()).map(|(p, x)| p * staggered_of_product(x, &sub)).sum::<f64>())
            .sum::<f64>()
            / tr.len() as f64;
        assert!((avg - de).abs() < 5e-3, "time avg {avg} vs diagonal {de}");
    }

    #[test]
    fn dephasing_identity_closed_form() {
        // (1/T) ∫ ⟨O(t)⟩ dt in closed form for a very long T.
        let h = build_krt_subarray(7, 1.0, 1.2).unwrap();
        let sub_h = restrict(&h, &all_but_ground(&h));
        let start = ProductState::from_sites(7, &[2, 5, 7]).unwrap();
        let psi = QuantumState::product(sub_h.basis().clone(), &start).unwrap();
        let sub = SubarraySpec::custom((1..=7).collect());
        let obs: Vec<f64> = sub_h.basis().states().iter().map(|s| staggered_of_product(s, &sub)).collect();
        let eig = eigh(&sub_h.to_dense());
        let c = eig.coefficients(psi.amplitudes());
        let t = 1e13;
        let dim = eig.dim();
        let mut avg = C64::new(0.0, 0.0);
        for j in 0..dim {
            for k in 0..dim {
                let ojk: C64 = (0..dim).map(|r| eig.vectors[(r, j)].conj() * eig.vectors[(r, k)] * obs[r]).sum();
                let w = eig.values[j] - eig.values[k];
                let factor = if w.abs() < 1e-9 {
                    C64::new(1.0, 0.0)
                } else {
                    (C64::from_polar(1.0, w * t) - 1.0) / C64::new(0.0, w * t)
                };
                avg += c[j].conj() * c[k] * ojk * factor;
            }
        }
        let de = diagonal_ensemble(&sub_h, &psi, |s| staggered_of_product(s, &sub)).unwrap();
        assert!((avg.re - de).abs() < 1e-8, "{} vs {de}", avg.re);
    }

    #[test]
    fn canonical_limits() {
        let h = build_krt_subarray(5, 1.0, 1.2).unwrap();
        let f = |s: &ProductState| s.excitation_count() as f64;
        let inf = canonical_expectation(&h, 0.0, f).unwrap();
        assert!((inf - 2.5).abs() < 1e-12);
    }
}
