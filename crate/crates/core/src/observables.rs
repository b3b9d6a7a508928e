//! Measured quantities: site projections, staggered magnetizations,
//! densities, correlators, entropies, microstate histograms and spectra.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::basis::{hamming_distance, ProductState};
use crate::error::{Error, Result};
use crate::evolution::{QuantumState, Trajectory};
use crate::operator::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubarrayName {
    A,
    APrime,
    B,
    C,
    Custom,
}

/// Sites of a subarray (1-based, ascending). The staggering sign of member
/// `m` (counted from 1) is `(-1)^(m + stagger_start - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubarraySpec {
    pub name: SubarrayName,
    pub sites: Vec<usize>,
    #[serde(default = "one")]
    pub stagger_start: usize,
}

fn one() -> usize {
    1
}

impl SubarraySpec {
    pub fn custom(sites: Vec<usize>) -> Self {
        Self {
            name: SubarrayName::Custom,
            sites,
            stagger_start: 1,
        }
    }

    /// Every `period`-th site starting at `first`, e.g. `(13, 2, 1)` gives
    /// the odd sites of a 13-atom chain.
    pub fn sublattice(name: SubarrayName, n: usize, period: usize, first: usize) -> Self {
        Self {
            name,
            sites: (first..=n).step_by(period.max(1)).collect(),
            stagger_start: 1,
        }
    }

    /// Subarray `A′` of a `Z_{2k}`-type start: the sublattice holding the
    /// excitations, boundary atoms included.
    pub fn a_prime(n: usize, k: usize) -> Self {
        Self::sublattice(SubarrayName::APrime, n, k, 1)
    }

    /// `A′` without its two boundary atoms, staggered as inside `A′`.
    pub fn a(n: usize, k: usize) -> Self {
        let ap = Self::a_prime(n, k);
        let inner = ap.sites[1..ap.sites.len().saturating_sub(1).max(1)].to_vec();
        Self {
            name: SubarrayName::A,
            sites: inner,
            stagger_start: 2,
        }
    }

    /// The `offset`-th of the remaining sublattices (`B` for offset 1, `C`
    /// for offset 2).
    pub fn other(n: usize, k: usize, offset: usize) -> Self {
        let name = if offset == 1 { SubarrayName::B } else { SubarrayName::C };
        Self::sublattice(name, n, k, 1 + offset)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.sites.is_empty() {
            return Err(Error::Subarray("empty subarray".into()));
        }
        if let Some(&bad) = self.sites.iter().find(|&&i| i == 0 || i > n) {
            return Err(Error::Subarray(format!("site {bad} outside 1..={n}")));
        }
        if self.sites.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Subarray("sites must be strictly ascending".into()));
        }
        Ok(())
    }

    fn sign(&self, member: usize) -> f64 {
        if (member + self.stagger_start - 1).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }
}

/// Checks `inner ⊂ outer` with exactly the two boundary atoms removed.
pub fn check_nested(inner: &SubarraySpec, outer: &SubarraySpec) -> Result<()> {
    if outer.len() != inner.len() + 2 || outer.sites[1..outer.len() - 1] != inner.sites[..] {
        return Err(Error::Subarray("inner subarray must be the outer one without its end atoms".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableTrace {
    pub observable: String,
    pub subarray: Option<SubarrayName>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ObservableTrace {
    pub fn new(observable: &str, subarray: Option<SubarrayName>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        Ok(Self {
            observable: observable.to_string(),
            subarray,
            times,
            values,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mean over samples with `t` in `[t0, t1]`.
    pub fn window_mean(&self, t0: f64, t1: f64) -> Result<f64> {
        let v: Vec<f64> = self
            .times
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
            .map(|(_, v)| *v)
            .collect();
        if v.is_empty() {
            return Err(Error::EmptyWindow(format!("no samples in [{t0}, {t1}]")));
        }
        Ok(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// CSV with a `# key: value` metadata header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# observable: {}\n", self.observable);
        if let Some(s) = self.subarray {
            let _ = writeln!(out, "# subarray: {s:?}");
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let _ = writeln!(out, "t,{}", self.observable);
        for (t, v) in self.times.iter().zip(&self.values) {
            let _ = writeln!(out, "{t:.10},{v:.12}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    Q,
    P,
    Z,
}

/// `⟨Q_i⟩` for every site.
pub fn site_expectations(psi: &QuantumState) -> Vec<f64> {
    let n = psi.basis().n_sites();
    let mut q = vec![0.0; n];
    for (s, a) in psi.basis().states().iter().zip(psi.amplitudes()) {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for i in s.excited_sites() {
            q[i - 1] += p;
        }
    }
    q
}

/// Per-site `⟨Q⟩`, `⟨P⟩ = 1 - ⟨Q⟩` or `⟨Z⟩ = 2⟨Q⟩ - 1`.
pub fn site_values(psi: &QuantumState, which: Projection) -> Vec<f64> {
    let q = site_expectations(psi);
    match which {
        Projection::Q => q,
        Projection::P => q.iter().map(|x| 1.0 - x).collect(),
        Projection::Z => q.iter().map(|x| 2.0 * x - 1.0).collect(),
    }
}

pub(crate) fn staggered_from_q(q: &[f64], sub: &SubarraySpec) -> f64 {
    let sum: f64 = sub
        .sites
        .iter()
        .enumerate()
        .map(|(m, &i)| sub.sign(m + 1) * (2.0 * q[i - 1] - 1.0))
        .sum();
    sum / sub.len() as f64
}

pub fn staggered_magnetization(psi: &QuantumState, sub: &SubarraySpec) -> Result<f64> {
    sub.validate(psi.basis().n_sites())?;
    Ok(staggered_from_q(&site_expectations(psi), sub))
}

/// `1 - mean ⟨Q_i⟩` over the subarray.
pub fn ground_density(psi: &QuantumState, sub: &SubarraySpec) -> Result<f64> {
    sub.validate(psi.basis().n_sites())?;
    Ok(ground_from_q(&site_expectations(psi), sub))
}

pub(crate) fn ground_from_q(q: &[f64], sub: &SubarraySpec) -> f64 {
    1.0 - sub.sites.iter().map(|&i| q[i - 1]).sum::<f64>() / sub.len() as f64
}

/// Per-member `⟨Q⟩` for a product state given as its excited sites, used by
/// ensemble averages over the basis.
pub fn staggered_of_product(state: &ProductState, sub: &SubarraySpec) -> f64 {
    let q: Vec<f64> = (1..=state.len()).map(|i| state.is_excited(i) as u8 as f64).collect();
    staggered_from_q(&q, sub)
}

pub fn ground_density_of_product(state: &ProductState, sub: &SubarraySpec) -> f64 {
    let q: Vec<f64> = (1..=state.len()).map(|i| state.is_excited(i) as u8 as f64).collect();
    ground_from_q(&q, sub)
}

/// `Σ ⟨n_i n_j⟩` over consecutive subarray members.
pub fn two_body_correlator(psi: &QuantumState, sub: &SubarraySpec) -> Result<f64> {
    sub.validate(psi.basis().n_sites())?;
    if sub.len() < 2 {
        return Err(Error::Subarray("correlator needs at least two sites".into()));
    }
    Ok(psi
        .basis()
        .states()
        .iter()
        .zip(psi.amplitudes())
        .map(|(s, a)| a.norm_sqr() * correlator_of_product(s, sub))
        .sum())
}

pub fn correlator_of_product(state: &ProductState, sub: &SubarraySpec) -> f64 {
    sub.sites.windows(2).filter(|w| state.is_excited(w[0]) && state.is_excited(w[1])).count() as f64
}

fn binary_entropy_from_rho(rho_rr: f64, coherence: C64) -> f64 {
    // Eigenvalues of [[1-p, c*], [c, p]].
    let p = rho_rr.clamp(0.0, 1.0);
    let half_gap = ((p - 0.5).powi(2) + coherence.norm_sqr()).sqrt();
    let lam = [0.5 + half_gap, 0.5 - half_gap];
    lam.iter().filter(|&&l| l > 1e-15).map(|&l| -l * l.ln()).sum::<f64>().max(0.0)
}

/// Von Neumann entropy (nats) of one site's reduced density matrix.
pub fn single_site_entropy(psi: &QuantumState, site: usize) -> Result<f64> {
    let basis = psi.basis();
    let n = basis.n_sites();
    if site == 0 || site > n {
        return Err(Error::OutOfRange { index: site, limit: n });
    }
    let amps = psi.amplitudes();
    let mut p = 0.0;
    let mut c = C64::new(0.0, 0.0);
    for (k, s) in basis.states().iter().enumerate() {
        if !s.is_excited(site) {
            continue;
        }
        p += amps[k].norm_sqr();
        if let Some(j) = basis.index_of(&s.flipped(site)) {
            c += amps[k] * amps[j].conj();
        }
    }
    Ok(binary_entropy_from_rho(p, c))
}

fn schmidt_matrix(psi: &QuantumState, cut: usize) -> Result<DMatrix<C64>> {
    let n = psi.basis().n_sites();
    if cut == 0 || cut >= n {
        return Err(Error::OutOfRange { index: cut, limit: n.saturating_sub(1) });
    }
    let states = psi.basis().states();
    let mut left_ids: HashMap<u64, usize> = HashMap::new();
    let mut right_ids: HashMap<u64, usize> = HashMap::new();
    let mut entries = Vec::with_capacity(states.len());
    for (s, a) in states.iter().zip(psi.amplitudes()) {
        let (l, r) = s.split(cut);
        let nl = left_ids.len();
        let li = *left_ids.entry(l).or_insert(nl);
        let nr = right_ids.len();
        let ri = *right_ids.entry(r).or_insert(nr);
        entries.push((li, ri, *a));
    }
    let mut m = DMatrix::zeros(left_ids.len(), right_ids.len());
    for (l, r, a) in entries {
        m[(l, r)] = a;
    }
    Ok(m)
}

/// Schmidt spectrum `λ_k` (squared singular values) across bond `cut`.
pub fn schmidt_spectrum(psi: &QuantumState, cut: usize) -> Result<Vec<f64>> {
    let m = schmidt_matrix(psi, cut)?;
    let sv = m.singular_values();
    Ok(sv.iter().map(|s| s * s).collect())
}

/// Entanglement entropy (nats) of sites `1..=cut` against the rest.
pub fn bipartite_entropy(psi: &QuantumState, cut: usize) -> Result<f64> {
    Ok(schmidt_spectrum(psi, cut)?
        .iter()
        .filter(|&&l| l > 1e-16)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        .max(0.0))
}

/// One histogram bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramEntry {
    pub state: ProductState,
    pub distance: usize,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrostateHistogram {
    pub entries: Vec<HistogramEntry>,
    /// Mass found outside the reference set.
    pub leakage: f64,
}

impl MicrostateHistogram {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum::<f64>() + self.leakage
    }

    /// `state,distance,probability` rows, leakage last.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state,distance,probability\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{:.12}", e.state, e.distance, e.probability);
        }
        let _ = writeln!(out, "leakage,,{:.12}", self.leakage);
        out
    }
}

fn ordered_reference(initial: &ProductState, component: &[ProductState]) -> Result<Vec<(ProductState, usize)>> {
    let mut refs: Vec<(ProductState, usize)> = component
        .iter()
        .map(|s| Ok((*s, hamming_distance(s, initial)?)))
        .collect::<Result<_>>()?;
    refs.sort_by_key(|(s, d)| (*d, *s));
    refs.dedup_by_key(|(s, _)| *s);
    Ok(refs)
}

/// Probability per component state, ordered by Hamming distance from
/// `initial` and then lexicographically.
pub fn microstate_histogram(psi: &QuantumState, initial: &ProductState, component: &[ProductState]) -> Result<MicrostateHistogram> {
    let refs = ordered_reference(initial, component)?;
    let probs = psi.probabilities();
    let basis = psi.basis();
    let mut inside = 0.0;
    let entries: Vec<HistogramEntry> = refs
        .into_iter()
        .map(|(s, d)| {
            let p = basis.index_of(&s).map_or(0.0, |i| probs[i]);
            inside += p;
            HistogramEntry {
                state: s,
                distance: d,
                probability: p,
            }
        })
        .collect();
    let total: f64 = probs.iter().sum();
    Ok(MicrostateHistogram {
        entries,
        leakage: (total - inside).max(0.0),
    })
}

/// Histogram of measured bitstrings; shots outside the component are leakage.
pub fn sample_histogram(samples: &[ProductState], initial: &ProductState, component: &[ProductState]) -> Result<MicrostateHistogram> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let refs = ordered_reference(initial, component)?;
    let mut counts: HashMap<ProductState, usize> = HashMap::new();
    for s in samples {
        *counts.entry(*s).or_default() += 1;
    }
    let total = samples.len() as f64;
    let mut inside = 0usize;
    let entries = refs
        .into_iter()
        .map(|(s, d)| {
            let c = counts.get(&s).copied().unwrap_or(0);
            inside += c;
            HistogramEntry {
                state: s,
                distance: d,
                probability: c as f64 / total,
            }
        })
        .collect();
    Ok(MicrostateHistogram {
        entries,
        leakage: (samples.len() - inside) as f64 / total,
    })
}

/// Single-sided power spectrum normalized to unit total mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Frequencies in cycles per unit time (MHz for µs traces).
    pub frequencies: Vec<f64>,
    pub intensity: Vec<f64>,
    pub resolution: f64,
}

impl Spectrum {
    /// Largest bin excluding DC, as `(frequency, intensity)`.
    pub fn peak(&self) -> Option<(f64, f64)> {
        (1..self.intensity.len())
            .max_by(|&a, &b| self.intensity[a].total_cmp(&self.intensity[b]))
            .map(|k| (self.frequencies[k], self.intensity[k]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("f_MHz,intensity\n");
        for (f, i) in self.frequencies.iter().zip(&self.intensity) {
            let _ = writeln!(out, "{f:.8},{i:.12e}");
        }
        out
    }
}

/// Discrete Fourier transform of a uniformly sampled trace restricted to
/// `[t0, t1]`.
pub fn fourier_spectrum(trace: &ObservableTrace, window: Option<(f64, f64)>) -> Result<Spectrum> {
    let (t0, t1) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(t, v)| (*t, *v))
        .collect();
    if pts.len() < 4 {
        return Err(Error::TooFewSamples { got: pts.len(), need: 4 });
    }
    let dt = pts[1].0 - pts[0].0;
    if !(dt > 0.0) || pts.windows(2).any(|w| ((w[1].0 - w[0].0) - dt).abs() > 1e-9 * dt.max(1.0)) {
        return Err(Error::NonUniformSampling);
    }
    let n = pts.len();
    let mut buf: Vec<C64> = pts.iter().map(|p| C64::new(p.1, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let mut intensity: Vec<f64> = (0..=half)
        .map(|k| {
            let a = buf[k].norm_sqr();
            // Fold negative frequencies onto the positive side.
            if k == 0 || (n.is_multiple_of(2) && k == half) {
                a
            } else {
                2.0 * a
            }
        })
        .collect();
    let total: f64 = intensity.iter().sum();
    if total > 0.0 {
        intensity.iter_mut().for_each(|x| *x /= total);
    }
    let resolution = 1.0 / (n as f64 * dt);
    Ok(Spectrum {
        frequencies: (0..=half).map(|k| k as f64 * resolution).collect(),
        intensity,
        resolution,
    })
}

/// Apply a per-state scalar to every sample of a trajectory.
pub fn trace_of(
    traj: &Trajectory,
    observable: &str,
    subarray: Option<SubarrayName>,
    f: impl Fn(&QuantumState) -> Result<f64> + Sync + Send,
) -> Result<ObservableTrace> {
    let values = crate::par::map_slice(&traj.states, |s| f(s)).into_iter().collect::<Result<Vec<_>>>()?;
    ObservableTrace::new(observable, subarray, traj.times.clone(), values)
}

pub fn staggered_magnetization_trace(traj: &Trajectory, sub: &SubarraySpec) -> Result<ObservableTrace> {
    trace_of(traj, "staggered_magnetization", Some(sub.name), |s| staggered_magnetization(s, sub))
}

pub fn ground_density_trace(traj: &Trajectory, sub: &SubarraySpec) -> Result<ObservableTrace> {
    trace_of(traj, "ground_density", Some(sub.name), |s| ground_density(s, sub))
}

/// Mean single-site entropy over the subarray.
pub fn mean_site_entropy_trace(traj: &Trajectory, sub: &SubarraySpec) -> Result<ObservableTrace> {
    trace_of(traj, "site_entropy", Some(sub.name), |s| {
        let mut acc = 0.0;
        for &i in &sub.sites {
            acc += single_site_entropy(s, i)?;
        }
        Ok(acc / sub.len() as f64)
    })
}
