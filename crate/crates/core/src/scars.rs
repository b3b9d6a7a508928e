//! Scar diagnostics: eigenstate overlap/entropy scans, damped-oscillation
//! fits and the three-sublattice revival check.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Boundary, ChainSpec, ProductState};
use crate::error::{Error, Result};
use crate::evolution::{evolve_static, EvolutionPlan, Method, QuantumState};
use crate::hamiltonian::{build_effective, build_rydberg_with, reachable_states, DriveSpec, EffectiveModel, RydbergOptions};
use crate::linalg::eigh;
use crate::observables::{
    bipartite_entropy, fourier_spectrum, ground_density_trace, staggered_magnetization_trace, ObservableTrace, Spectrum,
    SubarraySpec,
};
use crate::operator::{OperatorMatrix, DENSE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScarFlagOptions {
    /// Flag when the overlap is at least this multiple of `1 / dim`.
    pub overlap_factor: f64,
    /// Entropy quantile within an energy bin below which states are flagged.
    pub entropy_quantile: f64,
    pub energy_bins: usize,
    /// Bins holding fewer eigenstates than this are flagged on overlap alone.
    pub min_bin_population: usize,
}

impl Default for ScarFlagOptions {
    fn default() -> Self {
        Self {
            overlap_factor: 0.5,
            entropy_quantile: 0.25,
            energy_bins: 10,
            min_bin_population: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScarPoint {
    pub energy: f64,
    pub overlap: f64,
    pub entropy: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScarScan {
    pub dim: usize,
    pub cut: usize,
    pub points: Vec<ScarPoint>,
    pub spacing: Option<SpacingStats>,
}

impl ScarScan {
    pub fn flagged(&self) -> impl Iterator<Item = &ScarPoint> {
        self.points.iter().filter(|p| p.flagged)
    }

    pub fn total_overlap(&self) -> f64 {
        self.points.iter().map(|p| p.overlap).sum()
    }

    /// Overlap summed within each level, merging eigenvalues closer than `tol`.
    pub fn level_overlaps(&self, tol: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for p in &self.points {
            match out.last_mut() {
                Some(last) if (p.energy - last.0).abs() < tol => last.1 += p.overlap,
                _ => out.push((p.energy, p.overlap)),
            }
        }
        out
    }

    /// `energy,overlap,entropy,flagged` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("energy,overlap,entropy,flagged\n");
        for p in &self.points {
            let _ = writeln!(out, "{:.12},{:.12e},{:.12},{}", p.energy, p.overlap, p.entropy, p.flagged as u8);
        }
        out
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Eigenstates of `H` on `component` with their overlap with `initial` and
/// half-chain entropy.
pub fn scar_scan(
    h: &OperatorMatrix,
    component: &[usize],
    initial: &ProductState,
    opts: &ScarFlagOptions,
) -> Result<ScarScan> {
    if component.len() > DENSE_THRESHOLD {
        return Err(Error::DimensionOverCap {
            dim: component.len(),
            cap: DENSE_THRESHOLD,
        });
    }
    let sub = crate::thermal::restrict(h, component);
    let basis = sub.basis().clone();
    let psi0 = QuantumState::product(basis.clone(), initial)?;
    let eig = eigh(&sub.to_dense());
    let n = basis.n_sites();
    let cut = (n / 2).max(1);
    let dim = eig.dim();
    let raw: Vec<Result<(f64, f64, f64)>> = crate::par::map_range(dim, |k| {
        let v = QuantumState::new(basis.clone(), eig.vector(k))?;
        let overlap = psi0.fidelity(&v)?;
        let entropy = if n >= 2 { bipartite_entropy(&v, cut)? } else { 0.0 };
        Ok((eig.values[k], overlap, entropy))
    });
    let raw = raw.into_iter().collect::<Result<Vec<_>>>()?;
    let (e_min, e_max) = (raw[0].0, raw[dim - 1].0);
    let bins = opts.energy_bins.max(1);
    let width = ((e_max - e_min) / bins as f64).max(f64::MIN_POSITIVE);
    let bin_of = |e: f64| (((e - e_min) / width) as usize).min(bins - 1);
    let mut thresholds = vec![f64::INFINITY; bins];
    for (b, th) in thresholds.iter_mut().enumerate() {
        let mut ent: Vec<f64> = raw.iter().filter(|r| bin_of(r.0) == b).map(|r| r.2).collect();
        if ent.is_empty() || ent.len() < opts.min_bin_population {
            continue;
        }
        ent.sort_by(f64::total_cmp);
        *th = quantile(&ent, opts.entropy_quantile);
    }
    let min_overlap = opts.overlap_factor / dim as f64;
    let points: Vec<ScarPoint> = raw
        .iter()
        .map(|&(energy, overlap, entropy)| ScarPoint {
            energy,
            overlap,
            entropy,
            flagged: overlap >= min_overlap && entropy <= thresholds[bin_of(energy)] + 1e-12,
        })
        .collect();
    let flagged: Vec<f64> = points.iter().filter(|p| p.flagged).map(|p| p.energy).collect();
    let spacing = (flagged.len() >= 2).then(|| {
        let gaps: Vec<f64> = flagged.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
        SpacingStats {
            count: gaps.len(),
            mean,
            std: var.sqrt(),
        }
    });
    Ok(ScarScan { dim, cut, points, spacing })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    Failed { reason: String },
}

/// `offset + amplitude · exp(-t/τ) · cos(2π f t + phase)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    pub frequency: f64,
    /// Decay time; infinite when the fitted damping is nonpositive.
    pub tau: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: FitStatus,
}

impl OscillationFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }

    pub fn angular_frequency(&self) -> f64 {
        2.0 * PI * self.frequency
    }

    /// First time after zero at which the fitted cosine returns to its
    /// starting phase.
    pub fn revival_time(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn summary(&self) -> String {
        let status = match &self.status {
            FitStatus::Converged => "converged".to_string(),
            FitStatus::Failed { reason } => format!("failed ({reason})"),
        };
        format!(
            "# fit: {status}\n# frequency: {:.8}\n# tau: {:.8}\n# amplitude: {:.8}\n# phase: {:.8}\n# offset: {:.8}\n# residual_norm: {:.3e}\n",
            self.frequency, self.tau, self.amplitude, self.phase, self.offset, self.residual_norm
        )
    }
}

fn model_eval(p: &[f64; 5], t: f64) -> (f64, [f64; 5]) {
    let [offset, amp, gamma, f, phase] = *p;
    let env = (-gamma * t).exp();
    let arg = 2.0 * PI * f * t + phase;
    let (s, c) = arg.sin_cos();
    let y = offset + amp * env * c;
    let jac = [1.0, env * c, -t * amp * env * c, -amp * env * s * 2.0 * PI * t, -amp * env * s];
    (y, jac)
}

fn residuals(p: &[f64; 5], t: &[f64], y: &[f64]) -> Vec<f64> {
    t.iter().zip(y).map(|(&ti, &yi)| model_eval(p, ti).0 - yi).collect()
}

/// Levenberg-Marquardt fit of a damped cosine, seeded from the spectral peak.
pub fn fit_oscillation(trace: &ObservableTrace) -> OscillationFit {
    let fail = |reason: String, residual_norm: f64| OscillationFit {
        frequency: f64::NAN,
        tau: f64::NAN,
        amplitude: f64::NAN,
        phase: f64::NAN,
        offset: f64::NAN,
        residual_norm,
        iterations: 0,
        status: FitStatus::Failed { reason },
    };
    let (t, y) = (&trace.times, &trace.values);
    let n = y.len();
    if n < 8 {
        return fail(format!("{n} samples is too few"), f64::NAN);
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let spread = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if spread < 1e-12 {
        return fail("trace has no oscillation".into(), 0.0);
    }
    let spectrum = match fourier_spectrum(trace, None) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string(), f64::NAN),
    };
    let Some((f0, _)) = spectrum.peak() else {
        return fail("no spectral peak".into(), f64::NAN);
    };
    let span = t[n - 1] - t[0];
    if f0 * span < 2.0 {
        return fail(format!("trace covers {:.2} periods, need at least 2", f0 * span), f64::NAN);
    }
    // Seed the phase and amplitude from a linear fit at the peak frequency.
    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (2.0 * PI * f0 * ti).sin_cos();
        scc += c * c;
        sss += s * s;
        scs += c * s;
        syc += (yi - mean) * c;
        sys += (yi - mean) * s;
    }
    let det = scc * sss - scs * scs;
    let (a, b) = ((syc * sss - sys * scs) / det, (sys * scc - syc * scs) / det);
    let mut p = [mean, (a * a + b * b).sqrt(), 0.0, f0, (-b).atan2(a)];

    let sq = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut r = residuals(&p, t, y);
    let mut cost = sq(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..500 {
        iterations = it + 1;
        let mut jtj = DMatrix::<f64>::zeros(5, 5);
        let mut jtr = DVector::<f64>::zeros(5);
        for (&ti, &ri) in t.iter().zip(&r) {
            let (_, j) = model_eval(&p, ti);
            for a in 0..5 {
                jtr[a] += j[a] * ri;
                for b in 0..5 {
                    jtj[(a, b)] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for d in 0..5 {
                m[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = m.lu().solve(&(-&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p;
            for d in 0..5 {
                trial[d] += step[d];
            }
            let rt = residuals(&trial, t, y);
            let ct = sq(&rt);
            if ct.is_finite() && ct < cost {
                let rel = (cost - ct) / cost.max(1e-300);
                p = trial;
                r = rt;
                cost = ct;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    let residual_norm = cost.sqrt();
    if !converged || !p.iter().all(|x| x.is_finite()) {
        let mut out = fail("Levenberg-Marquardt did not converge".into(), residual_norm);
        out.iterations = iterations;
        return out;
    }
    // Canonical form: positive amplitude and frequency.
    let [offset, mut amp, gamma, mut f, mut phase] = p;
    if f < 0.0 {
        f = -f;
        phase = -phase;
    }
    if amp < 0.0 {
        amp = -amp;
        phase += PI;
    }
    phase = (phase + PI).rem_euclid(2.0 * PI) - PI;
    OscillationFit {
        frequency: f,
        tau: if gamma > 0.0 { 1.0 / gamma } else { f64::INFINITY },
        amplitude: amp,
        phase,
        offset,
        residual_norm,
        iterations,
        status: FitStatus::Converged,
    }
}

/// Which Hamiltonian drives the three-sublattice check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Z6Dynamics {
    Effective,
    /// Full interaction Hamiltonian at `Δ = 2 V_2`, restricted to the
    /// blockaded block.
    Full { v2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Z6Report {
    pub participating_sites: usize,
    pub sector_dim: usize,
    pub m_a: ObservableTrace,
    pub p_b: ObservableTrace,
    pub p_c: ObservableTrace,
    pub spectrum: Spectrum,
}

/// `Z_6` start on a chain of `n` sites evolved over `t_end`.
pub fn z6_scar_check(n: usize, omega: f64, dynamics: Z6Dynamics, t_end: f64) -> Result<Z6Report> {
    let k = 3;
    let start_sites: Vec<usize> = (1..=n).step_by(2 * k).collect();
    let start = ProductState::from_sites(n, &start_sites)?;
    let a_prime = SubarraySpec::a_prime(n, k);
    let a = SubarraySpec::a(n, k);
    let b = SubarraySpec::other(n, k, 1);
    let c = SubarraySpec::other(n, k, 2);
    let plan = EvolutionPlan::for_rabi(omega, t_end)?;
    let (h, basis) = match dynamics {
        Z6Dynamics::Effective => {
            let spec = ChainSpec::with_couplings(n, Boundary::Open, 1.0, vec![0.0, 0.0, 0.0])?;
            let model = EffectiveModel::Qpxpq { k, omega };
            let states = reachable_states(&model, &spec, &start, DENSE_THRESHOLD)?;
            let basis = Arc::new(Basis::from_states(n, states)?);
            (build_effective(&model, &spec, basis.clone())?, basis)
        }
        Z6Dynamics::Full { v2 } => {
            let spec = ChainSpec::from_order(n, Boundary::Open, 1.0, 3, v2, 3)?;
            let basis = Arc::new(Basis::from_states(n, crate::basis::primary_block(&spec))?);
            let opts = RydbergOptions {
                allow_truncation: true,
                ..Default::default()
            };
            let h = build_rydberg_with(&spec, &DriveSpec::new(omega, 2.0 * v2), basis.clone(), &opts)?;
            (h, basis)
        }
    };
    let psi0 = QuantumState::product(basis.clone(), &start)?;
    let traj = evolve_static(&h, &psi0, &plan.with_method(Method::Auto))?;
    let m_a = staggered_magnetization_trace(&traj, &a)?;
    let spectrum = fourier_spectrum(&m_a, None)?;
    Ok(Z6Report {
        participating_sites: a_prime.len(),
        sector_dim: basis.len(),
        m_a,
        p_b: ground_density_trace(&traj, &b)?,
        p_c: ground_density_trace(&traj, &c)?,
        spectrum,
    })
}
