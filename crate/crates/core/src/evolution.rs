//! Pure-state time evolution under static and frequency-modulated
//! Hamiltonians.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{Basis, ChainSpec, ProductState};
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, expm_multiply, Eigen, KrylovOptions};
use crate::operator::{LinearOp, OperatorMatrix, TimeDependentOperator, C64, DENSE_THRESHOLD};

/// Tolerance on `|‖ψ‖ - 1|` after every step.
pub const NORM_TOL: f64 = 1e-9;

/// Default samples per Rabi period.
pub const SAMPLES_PER_RABI_PERIOD: usize = 30;

/// Default modulated-drive steps per modulation period.
pub const STEPS_PER_DRIVE_PERIOD: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<C64>,
    basis: Arc<Basis>,
}

impl QuantumState {
    pub fn new(basis: Arc<Basis>, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != basis.len() {
            return Err(Error::LengthMismatch {
                left: amplitudes.len(),
                right: basis.len(),
            });
        }
        Ok(Self { amplitudes, basis })
    }

    pub fn product(basis: Arc<Basis>, state: &ProductState) -> Result<Self> {
        let i = basis.index_of(state).ok_or_else(|| Error::OutOfRange {
            index: state.code() as usize,
            limit: basis.len(),
        })?;
        let mut amplitudes = vec![C64::new(0.0, 0.0); basis.len()];
        amplitudes[i] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, basis })
    }

    /// Product state with the listed (1-based) sites excited.
    pub fn from_sites(basis: Arc<Basis>, sites: &[usize]) -> Result<Self> {
        let s = ProductState::from_sites(basis.n_sites(), sites)?;
        Self::product(basis, &s)
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn basis_hash(&self) -> String {
        self.basis.hash_hex()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.amplitudes)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn overlap(&self, other: &QuantumState) -> Result<C64> {
        self.same_basis(other)?;
        Ok(linalg::dot(&self.amplitudes, &other.amplitudes))
    }

    /// `|⟨self|other⟩|²`
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        Ok(self.overlap(other)?.norm_sqr())
    }

    pub fn expectation(&self, op: &OperatorMatrix) -> Result<f64> {
        if !Arc::ptr_eq(op.basis(), &self.basis) && **op.basis() != *self.basis {
            return Err(Error::BasisMismatch);
        }
        let mut y = vec![C64::new(0.0, 0.0); self.dim()];
        op.apply(&self.amplitudes, &mut y);
        Ok(linalg::dot(&self.amplitudes, &y).re)
    }

    fn same_basis(&self, other: &QuantumState) -> Result<()> {
        if Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis {
            Ok(())
        } else {
            Err(Error::BasisMismatch)
        }
    }

    fn with_amplitudes(&self, amplitudes: Vec<C64>) -> Self {
        Self {
            amplitudes,
            basis: self.basis.clone(),
        }
    }

    /// Little-endian dump: basis hash line, dimension, then `re im` pairs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(80 + 16 * self.dim());
        out.extend_from_slice(self.basis_hash().as_bytes());
        out.push(b'\n');
        out.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for a in &self.amplitudes {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(basis: Arc<Basis>, bytes: &[u8]) -> Result<Self> {
        let hash = basis.hash_hex();
        let bad = |m: &str| Error::InvalidPlan(format!("amplitude dump: {m}"));
        let head = hash.len() + 1;
        if bytes.len() < head + 8 || &bytes[..hash.len()] != hash.as_bytes() {
            return Err(Error::BasisMismatch);
        }
        let dim = u64::from_le_bytes(bytes[head..head + 8].try_into().unwrap()) as usize;
        let body = &bytes[head + 8..];
        if dim != basis.len() || body.len() != 16 * dim {
            return Err(bad("length does not match basis"));
        }
        let amplitudes = body
            .chunks_exact(16)
            .map(|c| C64::new(f64::from_le_bytes(c[..8].try_into().unwrap()), f64::from_le_bytes(c[8..].try_into().unwrap())))
            .collect();
        Self::new(basis, amplitudes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Eigendecomposition up to the dense threshold, Krylov above it.
    Auto,
    Eigendecomposition,
    /// Short-time Krylov propagation on the sparse matrix.
    Krylov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionPlan {
    pub t_end: f64,
    pub sample_times: Vec<f64>,
    pub method: Method,
    /// Error target per unit time.
    pub tol: f64,
    /// Integrator step for modulated drives; defaults to a fixed fraction of
    /// the modulation period.
    #[serde(default)]
    pub step: Option<f64>,
}

impl EvolutionPlan {
    pub fn uniform(t_end: f64, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidPlan("need at least two samples".into()));
        }
        let sample_times = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
        let plan = Self {
            t_end,
            sample_times,
            method: Method::Auto,
            tol: 1e-8,
            step: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Uniform samples every `1/30` of a Rabi period `2π/Ω`, up to `t_end`.
    pub fn for_rabi(omega: f64, t_end: f64) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidPlan("Rabi frequency must be positive".into()));
        }
        let dt = 2.0 * PI / omega / SAMPLES_PER_RABI_PERIOD as f64;
        let n = (t_end / dt + 1e-9).floor() as usize;
        let sample_times: Vec<f64> = (0..=n).map(|k| k as f64 * dt).collect();
        let plan = Self {
            t_end,
            sample_times,
            method: Method::Auto,
            tol: 1e-8,
            step: None,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidPlan(format!("end time {} must be finite and >= 0", self.t_end)));
        }
        if self.sample_times.is_empty() {
            return Err(Error::InvalidPlan("no sample times".into()));
        }
        if self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidPlan("sample times must be sorted".into()));
        }
        if self.sample_times.iter().any(|&t| t < 0.0 || t > self.t_end * (1.0 + 1e-12)) {
            return Err(Error::InvalidPlan("sample times must lie within [0, t_end]".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidPlan("tolerance must be positive".into()));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) {
                return Err(Error::InvalidPlan("step must be positive".into()));
            }
        }
        Ok(())
    }
}

/// States at the plan's sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<QuantumState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &QuantumState {
        self.states.last().expect("trajectory has at least one sample")
    }

    /// `t,Q_1,...,Q_N` with one row per sample.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.states.first() else {
            return String::new();
        };
        let n = first.basis().n_sites();
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",Q_{i}");
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t:.10}");
            for q in crate::observables::site_expectations(s) {
                let _ = write!(out, ",{q:.12}");
            }
            out.push('\n');
        }
        out
    }
}

fn check_state(h_basis: &Arc<Basis>, psi: &QuantumState) -> Result<()> {
    if Arc::ptr_eq(h_basis, psi.basis()) || **h_basis == **psi.basis() {
        Ok(())
    } else {
        Err(Error::BasisMismatch)
    }
}

fn check_norm(psi: &[C64]) -> Result<()> {
    let n = linalg::norm(psi);
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::Convergence(format!("norm drifted to {n}")));
    }
    Ok(())
}

/// Eigendecomposition reusable across several evolutions with the same `H`.
pub struct Propagator {
    eigen: Eigen,
    basis: Arc<Basis>,
}

impl Propagator {
    pub fn new(h: &OperatorMatrix) -> Result<Self> {
        if h.dim() > DENSE_THRESHOLD {
            return Err(Error::DimensionOverCap {
                dim: h.dim(),
                cap: DENSE_THRESHOLD,
            });
        }
        Ok(Self {
            eigen: eigh(&h.to_dense()),
            basis: h.basis().clone(),
        })
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eigen
    }

    pub fn evolve(&self, psi0: &QuantumState, plan: &EvolutionPlan) -> Result<Trajectory> {
        plan.validate()?;
        check_state(&self.basis, psi0)?;
        let c = self.eigen.coefficients(psi0.amplitudes());
        let mut states = Vec::with_capacity(plan.sample_times.len());
        for &t in &plan.sample_times {
            let amps = self.eigen.propagate(&c, t);
            check_norm(&amps)?;
            states.push(psi0.with_amplitudes(amps));
        }
        Ok(Trajectory {
            times: plan.sample_times.clone(),
            states,
        })
    }
}

/// `e^{-iHt}|ψ0⟩` at every sample time.
pub fn evolve_static(h: &OperatorMatrix, psi0: &QuantumState, plan: &EvolutionPlan) -> Result<Trajectory> {
    plan.validate()?;
    check_state(h.basis(), psi0)?;
    let defect = h.csr().hermiticity_defect();
    if defect > 1e-12 * h.csr().max_abs().max(1.0) {
        return Err(Error::NotHermitian(defect));
    }
    let use_eigen = match plan.method {
        Method::Auto => h.dim() <= DENSE_THRESHOLD,
        Method::Eigendecomposition => true,
        Method::Krylov => false,
    };
    if use_eigen {
        return Propagator::new(h)?.evolve(psi0, plan);
    }
    let opts = KrylovOptions {
        tol: plan.tol.min(1e-10),
        ..Default::default()
    };
    let mut states = Vec::with_capacity(plan.sample_times.len());
    let mut psi = psi0.amplitudes().to_vec();
    let mut t_now = 0.0;
    for &t in &plan.sample_times {
        let dt = t - t_now;
        if dt > 0.0 {
            let (next, _) = expm_multiply(h, &psi, dt, &opts)?;
            psi = next;
            check_norm(&psi)?;
            t_now = t;
        }
        states.push(psi0.with_amplitudes(psi.clone()));
    }
    Ok(Trajectory {
        times: plan.sample_times.clone(),
        states,
    })
}

/// Phase accumulated during an idle period under a diagonal Hamiltonian
/// (interactions only by default).
pub fn apply_idle(psi: &QuantumState, spec: &ChainSpec, duration: f64) -> Result<QuantumState> {
    if psi.basis().n_sites() != spec.n() {
        return Err(Error::LengthMismatch {
            left: psi.basis().n_sites(),
            right: spec.n(),
        });
    }
    let amps = psi
        .amplitudes()
        .iter()
        .zip(psi.basis().states())
        .map(|(a, s)| a * C64::from_polar(1.0, -spec.interaction_energy(s) * duration))
        .collect();
    Ok(psi.with_amplitudes(amps))
}

const CF4_A1: f64 = 0.25 + 0.288_675_134_594_812_9;
const CF4_A2: f64 = 0.25 - 0.288_675_134_594_812_9;
const GAUSS_OFFSET: f64 = 0.288_675_134_594_812_9;

fn ffm_step(h: &TimeDependentOperator, psi: &[C64], t: f64, dt: f64, opts: &KrylovOptions) -> Result<Vec<C64>> {
    let s = &h.schedule;
    let (t1, t2) = (t + (0.5 - GAUSS_OFFSET) * dt, t + (0.5 + GAUSS_OFFSET) * dt);
    let (a1, a2) = (s.drive_factor(t1), s.drive_factor(t2));
    let (d1, d2) = (s.number_factor(t1), s.number_factor(t2));
    let first = h.combination(CF4_A1 + CF4_A2, CF4_A1 * a1 + CF4_A2 * a2, CF4_A1 * d1 + CF4_A2 * d2);
    let (mid, _) = expm_multiply(&first, psi, dt, opts)?;
    let second = h.combination(CF4_A1 + CF4_A2, CF4_A2 * a1 + CF4_A1 * a2, CF4_A2 * d1 + CF4_A1 * d2);
    let (out, _) = expm_multiply(&second, &mid, dt, opts)?;
    Ok(out)
}

fn propagate_ffm(h: &TimeDependentOperator, psi: &[C64], t0: f64, t1: f64, step: f64, opts: &KrylovOptions) -> Result<Vec<C64>> {
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(psi.to_vec());
    }
    let n = (span / step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let mut v = psi.to_vec();
    for k in 0..n {
        v = ffm_step(h, &v, t0 + k as f64 * dt, dt, opts)?;
    }
    Ok(v)
}

/// Default integrator step: one fortieth of the modulation period.
pub fn default_ffm_step(h: &TimeDependentOperator) -> f64 {
    2.0 * PI / h.schedule.omega.abs() / STEPS_PER_DRIVE_PERIOD as f64
}

/// Fourth-order commutator-free Magnus integration of the modulated drive.
/// Before evolving, one modulation period is integrated with the step and
/// its half; a discrepancy above the tolerance refuses the plan.
pub fn evolve_ffm(h: &TimeDependentOperator, psi0: &QuantumState, plan: &EvolutionPlan) -> Result<Trajectory> {
    plan.validate()?;
    check_state(h.basis(), psi0)?;
    if plan.method == Method::Eigendecomposition {
        return Err(Error::InvalidPlan("modulated drives need the stepped integrator".into()));
    }
    let step = match plan.step {
        Some(s) => s,
        None if h.schedule.omega != 0.0 => default_ffm_step(h),
        None => return Err(Error::InvalidPlan("unmodulated schedule needs an explicit step".into())),
    };
    let opts = KrylovOptions {
        tol: (plan.tol * step).min(1e-10),
        ..Default::default()
    };
    let probe_span = if h.schedule.omega != 0.0 {
        (2.0 * PI / h.schedule.omega.abs()).min(plan.t_end.max(step))
    } else {
        step.min(plan.t_end.max(step))
    };
    let coarse = propagate_ffm(h, psi0.amplitudes(), 0.0, probe_span, step, &opts)?;
    let fine = propagate_ffm(h, psi0.amplitudes(), 0.0, probe_span, step / 2.0, &opts)?;
    let infidelity = 1.0 - linalg::dot(&coarse, &fine).norm_sqr();
    if infidelity > plan.tol * probe_span {
        return Err(Error::ToleranceUnachievable(format!(
            "step {step:.3e} gives infidelity {infidelity:.2e} against its half over {probe_span:.3e}; target {:.1e} per unit time",
            plan.tol
        )));
    }
    let mut states = Vec::with_capacity(plan.sample_times.len());
    let mut psi = psi0.amplitudes().to_vec();
    let mut t_now = 0.0;
    for &t in &plan.sample_times {
        psi = propagate_ffm(h, &psi, t_now, t, step, &opts)?;
        check_norm(&psi)?;
        t_now = t_now.max(t);
        states.push(psi0.with_amplitudes(psi.clone()));
    }
    Ok(Trajectory {
        times: plan.sample_times.clone(),
        states,
    })
}

/// Evolve several initial states independently.
pub fn evolve_many(h: &OperatorMatrix, initial: &[QuantumState], plan: &EvolutionPlan) -> Result<Vec<Trajectory>> {
    let use_eigen = match plan.method {
        Method::Auto => h.dim() <= DENSE_THRESHOLD,
        Method::Eigendecomposition => true,
        Method::Krylov => false,
    };
    if use_eigen {
        let prop = Propagator::new(h)?;
        crate::par::map_slice(initial, |psi| prop.evolve(psi, plan)).into_iter().collect()
    } else {
        crate::par::map_slice(initial, |psi| evolve_static(h, psi, plan)).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::Boundary;
    use crate::fragmentation::connected_components;
    use crate::hamiltonian::{build_effective, build_ffm, build_rydberg, DriveSpec, EffectiveModel, FfmSpec};

    fn full(n: usize) -> Arc<Basis> {
        Arc::new(Basis::full(n).unwrap())
    }

    fn chain(n: usize) -> ChainSpec {
        ChainSpec::with_couplings(n, Boundary::Open, 1.0, vec![40.0, 3.0, 0.1]).unwrap()
    }

    #[test]
    fn zero_hamiltonian_is_identity() {
        let b = full(3);
        let h = OperatorMatrix::zeros(b.clone());
        let psi = QuantumState::from_sites(b, &[2]).unwrap();
        let tr = evolve_static(&h, &psi, &EvolutionPlan::uniform(5.0, 6).unwrap()).unwrap();
        for s in &tr.states {
            assert!((s.fidelity(&psi).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rabi_formula() {
        let omega = 2.0 * PI * 1.3;
        let spec = ChainSpec::with_couplings(1, Boundary::Open, 1.0, vec![]).unwrap();
        let b = full(1);
        let h = build_rydberg(&spec, &DriveSpec::new(omega, 0.0), b.clone()).unwrap();
        let psi = QuantumState::from_sites(b.clone(), &[]).unwrap();
        let plan = EvolutionPlan::for_rabi(omega, 3.0).unwrap();
        for method in [Method::Eigendecomposition, Method::Krylov] {
            let tr = evolve_static(&h, &psi, &plan.clone().with_method(method)).unwrap();
            for (t, s) in tr.times.iter().zip(&tr.states) {
                let pr = s.probabilities()[1];
                assert!((pr - (omega * t / 2.0).sin().powi(2)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rabi_grid_spacing() {
        let omega = 2.0 * PI * 1.45;
        let plan = EvolutionPlan::for_rabi(omega, 3.0).unwrap();
        let dt = plan.sample_times[1];
        assert!((dt - 1.0 / 1.45 / 30.0).abs() < 1e-12);
        assert_eq!(plan.sample_times.len(), 131);
        assert!(*plan.sample_times.last().unwrap() <= 3.0);
    }

    #[test]
    fn plan_validation() {
        let mut p = EvolutionPlan::uniform(1.0, 3).unwrap();
        p.sample_times = vec![0.5, 0.2];
        assert!(p.validate().is_err());
        p.sample_times = vec![0.0, 1.5];
        assert!(p.validate().is_err());
        assert!(EvolutionPlan::uniform(1.0, 1).is_err());
    }

    #[test]
    fn basis_mismatch_rejected() {
        let h = OperatorMatrix::zeros(full(3));
        let psi = QuantumState::from_sites(full(4), &[1]).unwrap();
        assert_eq!(
            evolve_static(&h, &psi, &EvolutionPlan::uniform(1.0, 2).unwrap()).unwrap_err(),
            Error::BasisMismatch
        );
    }

    #[test]
    fn energy_conservation_and_reversal() {
        let spec = chain(6);
        let b = full(6);
        let h = build_rydberg(&spec, &DriveSpec::new(2.0, 1.0), b.clone()).unwrap();
        let psi = QuantumState::from_sites(b, &[1, 4]).unwrap();
        let e0 = psi.expectation(&h).unwrap();
        let plan = EvolutionPlan::uniform(4.0, 9).unwrap();
        for method in [Method::Eigendecomposition, Method::Krylov] {
            let tr = evolve_static(&h, &psi, &plan.clone().with_method(method)).unwrap();
            for s in &tr.states {
                assert!((s.expectation(&h).unwrap() - e0).abs() <= 1e-8 * e0.abs().max(1.0));
            }
            let back = evolve_static(&h.scaled(-1.0), tr.last(), &EvolutionPlan::uniform(4.0, 2).unwrap().with_method(method)).unwrap();
            assert!(back.last().fidelity(&psi).unwrap() > 1.0 - 1e-8);
        }
    }

    #[test]
    fn krylov_confinement() {
        let spec = chain(9);
        let b = full(9);
        let h = build_effective(&EffectiveModel::Qpxpq { k: 2, omega: 1.0 }, &spec, b.clone()).unwrap();
        let d = connected_components(&h);
        let z4 = ProductState::from_sites(9, &[1, 5, 9]).unwrap();
        let psi = QuantumState::product(b.clone(), &z4).unwrap();
        let comp = d.component_of_state(&h, &z4).unwrap();
        let tr = evolve_static(&h, &psi, &EvolutionPlan::uniform(20.0, 11).unwrap().with_method(Method::Krylov)).unwrap();
        for s in &tr.states {
            let outside: f64 = s
                .probabilities()
                .iter()
                .enumerate()
                .filter(|(i, _)| d.component_of(*i) != comp)
                .map(|(_, p)| p)
                .sum();
            assert!(outside < 1e-10);
        }
    }

    fn ffm_setup(delta0: f64) -> (TimeDependentOperator, QuantumState, OperatorMatrix) {
        let spec = chain(5);
        let b = full(5);
        let drive = DriveSpec::new(2.0, 0.3).with_ffm(FfmSpec {
            delta0,
            omega_d: 6.0,
            harmonics: vec![],
        });
        let td = build_ffm(&spec, &drive, b.clone()).unwrap();
        let stat = build_rydberg(&spec, &DriveSpec::new(2.0, 0.3), b.clone()).unwrap();
        (td, QuantumState::from_sites(b, &[1, 3]).unwrap(), stat)
    }

    #[test]
    fn ffm_without_modulation_matches_static() {
        let (td, psi, stat) = ffm_setup(0.0);
        let plan = EvolutionPlan::uniform(3.0, 7).unwrap();
        let a = evolve_ffm(&td, &psi, &plan).unwrap();
        let b = evolve_static(&stat, &psi, &plan).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!(x.fidelity(y).unwrap() > 1.0 - 1e-9);
        }
    }

    #[test]
    fn ffm_step_convergence_order() {
        let (td, psi, _) = ffm_setup(14.0);
        let t = 1.0;
        let opts = KrylovOptions {
            tol: 1e-13,
            ..Default::default()
        };
        let reference = propagate_ffm(&td, psi.amplitudes(), 0.0, t, 0.0025, &opts).unwrap();
        let err = |h: f64| {
            let v = propagate_ffm(&td, psi.amplitudes(), 0.0, t, h, &opts).unwrap();
            linalg::norm(&v.iter().zip(&reference).map(|(a, b)| a - b).collect::<Vec<_>>())
        };
        let (e1, e2) = (err(0.04), err(0.02));
        let p = (e1 / e2).log2();
        assert!(p >= 2.0, "observed order {p}");
    }

    #[test]
    fn ffm_refuses_coarse_step() {
        let (td, psi, _) = ffm_setup(14.0);
        let plan = EvolutionPlan::uniform(2.0, 3).unwrap().with_step(0.5);
        assert!(matches!(evolve_ffm(&td, &psi, &plan), Err(Error::ToleranceUnachievable(_))));
        let good = EvolutionPlan::uniform(2.0, 3).unwrap();
        let tr = evolve_ffm(&td, &psi, &good).unwrap();
        assert!((tr.last().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn idle_prefix_only_adds_phases() {
        let spec = chain(4);
        let b = full(4);
        let amps: Vec<C64> = (0..16).map(|k| C64::new(((k + 1) as f64).sqrt(), 0.0)).collect();
        let norm = linalg::norm(&amps);
        let psi = QuantumState::new(b, amps.iter().map(|a| a / norm).collect()).unwrap();
        let out = apply_idle(&psi, &spec, 0.7).unwrap();
        for (p, q) in psi.probabilities().iter().zip(out.probabilities()) {
            assert!((p - q).abs() < 1e-15);
        }
    }

    #[test]
    fn amplitude_dump_round_trip() {
        let b = full(3);
        let psi = QuantumState::from_sites(b.clone(), &[1, 3]).unwrap();
        let bytes = psi.to_bytes();
        assert_eq!(QuantumState::from_bytes(b, &bytes).unwrap(), psi);
        assert!(QuantumState::from_bytes(full(4), &bytes).is_err());
    }

    #[test]
    fn trajectory_csv_header() {
        let b = full(2);
        let psi = QuantumState::from_sites(b.clone(), &[2]).unwrap();
        let tr = evolve_static(&OperatorMatrix::zeros(b), &psi, &EvolutionPlan::uniform(1.0, 2).unwrap()).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,Q_1,Q_2");
        assert_eq!(lines.next().unwrap(), "0.0000000000,0.000000000000,1.000000000000");
    }
}
