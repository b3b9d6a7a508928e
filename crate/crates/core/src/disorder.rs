//! Monte Carlo noise: position disorder, Doppler detunings and readout
//! errors, with trajectory-averaged traces.
//!
//! Every trajectory draws from its own ChaCha stream derived from the master
//! seed and the trajectory index, and trajectory results are combined by a
//! fixed pairwise reduction. Averages are therefore bit-identical for a given
//! seed regardless of the number of worker threads.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Boundary, ChainSpec, ProductState};
use crate::error::{Error, Result};
use crate::evolution::{evolve_ffm, evolve_static, EvolutionPlan, QuantumState, Trajectory};
use crate::hamiltonian::{build_ffm_with, build_rydberg_with, DriveSpec, RydbergOptions};
use crate::observables::{ground_from_q, site_expectations, staggered_from_q, SubarraySpec};

const MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Displacement {
    /// Along the chain axis only.
    #[default]
    #[serde(rename = "1d")]
    Axial,
    /// Independent spread `sigma_r` in each Cartesian direction.
    #[serde(rename = "3d")]
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-atom position spread (µm).
    pub sigma_r: f64,
    /// Per-atom detuning spread (rad/µs).
    #[serde(default)]
    pub sigma_doppler: f64,
    /// Probability that a ground-state atom reads as ground.
    #[serde(default = "one")]
    pub spam_g: f64,
    /// Probability that a Rydberg atom reads as Rydberg.
    #[serde(default = "one")]
    pub spam_r: f64,
    pub seed: u64,
    pub n_trajectories: usize,
    #[serde(default)]
    pub displacement: Displacement,
}

fn one() -> f64 {
    1.0
}

impl NoiseSpec {
    pub fn clean(seed: u64, n_trajectories: usize) -> Self {
        Self {
            sigma_r: 0.0,
            sigma_doppler: 0.0,
            spam_g: 1.0,
            spam_r: 1.0,
            seed,
            n_trajectories,
            displacement: Displacement::Axial,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("sigma_r", self.sigma_r), ("sigma_doppler", self.sigma_doppler)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidNoise(format!("{name} must be finite and nonnegative, got {v}")));
            }
        }
        for (name, p) in [("spam_g", self.spam_g), ("spam_r", self.spam_r)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidNoise(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.n_trajectories == 0 {
            return Err(Error::InvalidNoise("n_trajectories must be at least 1".into()));
        }
        Ok(())
    }

    pub fn has_readout_error(&self) -> bool {
        self.spam_g < 1.0 || self.spam_r < 1.0
    }
}

/// Independent random streams per trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Positions = 0,
    Doppler = 1,
    Readout = 2,
    Shots = 3,
}

pub fn trajectory_rng(seed: u64, trajectory: usize, purpose: StreamPurpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trajectory as u64 * 4 + purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionDisorder {
    /// Linearized spread of `V_{k-1}` (rad/µs).
    pub sigma_v: f64,
    /// `sigma_v / Ω`.
    pub metric: f64,
}

/// `6 |V_{k-1}| σ_r / (k a)` for the order-`k` interaction.
pub fn interaction_disorder(spec: &ChainSpec, noise: &NoiseSpec, k: usize, omega: f64) -> Result<InteractionDisorder> {
    if k == 0 || k > spec.kmax() {
        return Err(Error::OrderOutOfRange {
            order: k,
            kmax: spec.kmax(),
        });
    }
    let sigma_v = 6.0 * spec.coupling(k).abs() * noise.sigma_r / (k as f64 * spec.spacing());
    Ok(InteractionDisorder {
        sigma_v,
        metric: sigma_v / omega,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub spec: ChainSpec,
    /// Per-atom extra detunings, absent when the Doppler spread is zero.
    pub detunings: Option<Vec<f64>>,
    /// Position draws rejected for reordering atoms.
    pub resampled: usize,
}

fn ordered(coords: &[[f64; 3]], spec: &ChainSpec) -> bool {
    let n = coords.len();
    if coords.windows(2).any(|w| w[1][0] - w[0][0] <= 0.0) {
        return false;
    }
    if spec.boundary() == Boundary::Periodic && n > 1 {
        return coords[0][0] + n as f64 * spec.spacing() - coords[n - 1][0] > 0.0;
    }
    true
}

/// Disordered copy of `spec` for one trajectory.
pub fn sample_realization(spec: &ChainSpec, noise: &NoiseSpec, trajectory: usize) -> Result<Realization> {
    noise.validate()?;
    let n = spec.n();
    let mut resampled = 0;
    let mut out = spec.clone();
    if noise.sigma_r > 0.0 {
        let mut rng = trajectory_rng(noise.seed, trajectory, StreamPurpose::Positions);
        let normal = Normal::new(0.0, noise.sigma_r).map_err(|e| Error::InvalidNoise(e.to_string()))?;
        let coords = loop {
            let coords: Vec<[f64; 3]> = (0..n)
                .map(|i| {
                    let x = i as f64 * spec.spacing() + normal.sample(&mut rng);
                    match noise.displacement {
                        Displacement::Axial => [x, 0.0, 0.0],
                        Displacement::Isotropic => [x, normal.sample(&mut rng), normal.sample(&mut rng)],
                    }
                })
                .collect();
            if ordered(&coords, spec) {
                break coords;
            }
            resampled += 1;
            if resampled >= MAX_RESAMPLES {
                return Err(Error::InvalidNoise(format!(
                    "position spread {} too large for spacing {}",
                    noise.sigma_r,
                    spec.spacing()
                )));
            }
        };
        out = out.with_coordinates(coords)?;
    }
    let detunings = (noise.sigma_doppler > 0.0)
        .then(|| {
            let mut rng = trajectory_rng(noise.seed, trajectory, StreamPurpose::Doppler);
            let normal = Normal::new(0.0, noise.sigma_doppler).map_err(|e| Error::InvalidNoise(e.to_string()))?;
            Ok::<_, Error>((0..n).map(|_| normal.sample(&mut rng)).collect())
        })
        .transpose()?;
    Ok(Realization {
        spec: out,
        detunings,
        resampled,
    })
}

/// Projective measurements of `psi` in the product basis.
pub fn sample_shots<R: Rng + ?Sized>(psi: &QuantumState, count: usize, rng: &mut R) -> Result<Vec<ProductState>> {
    let dist = WeightedIndex::new(psi.probabilities()).map_err(|e| Error::InvalidNoise(e.to_string()))?;
    let states = psi.basis().states();
    Ok((0..count).map(|_| states[dist.sample(rng)]).collect())
}

/// Independent per-site readout flips.
pub fn spam_channel<R: Rng + ?Sized>(samples: &[ProductState], noise: &NoiseSpec, rng: &mut R) -> Vec<ProductState> {
    if !noise.has_readout_error() {
        return samples.to_vec();
    }
    samples
        .iter()
        .map(|s| {
            let mut out = *s;
            for i in 1..=s.len() {
                let keep = if s.is_excited(i) { noise.spam_r } else { noise.spam_g };
                if rng.random::<f64>() >= keep {
                    out = out.flipped(i);
                }
            }
            out
        })
        .collect()
}

/// Measured excitation probability given the true one.
pub fn confusion_map(q: f64, noise: &NoiseSpec) -> f64 {
    noise.spam_r * q + (1.0 - noise.spam_g) * (1.0 - q)
}

/// States reached from `seeds` by flipping atoms with exactly one excited
/// nearest neighbour on an open chain.
pub fn facilitation_manifold(n: usize, seeds: &[usize]) -> Result<Vec<ProductState>> {
    let start = ProductState::from_sites(n, seeds)?;
    let mut seen = BTreeSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for j in 1..=n {
            let left = j > 1 && s.is_excited(j - 1);
            let right = j < n && s.is_excited(j + 1);
            if left != right {
                let t = s.flipped(j);
                if seen.insert(t) {
                    queue.push_back(t);
                }
            }
        }
    }
    Ok(seen.into_iter().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleDynamics {
    Static(DriveSpec),
    Ffm(DriveSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleObservable {
    StaggeredMagnetization(SubarraySpec),
    GroundDensity(SubarraySpec),
}

impl EnsembleObservable {
    fn name(&self) -> String {
        match self {
            Self::StaggeredMagnetization(s) => format!("staggered_magnetization_{:?}", s.name),
            Self::GroundDensity(s) => format!("ground_density_{:?}", s.name),
        }
    }

    fn eval(&self, q: &[f64]) -> f64 {
        match self {
            Self::StaggeredMagnetization(s) => staggered_from_q(q, s),
            Self::GroundDensity(s) => ground_from_q(q, s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTrace {
    pub observable: String,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl EnsembleTrace {
    pub fn to_csv(&self) -> String {
        let mut out = format!("t,{0},{0}_stderr\n", self.observable);
        for ((t, m), e) in self.times.iter().zip(&self.mean).zip(&self.stderr) {
            let _ = writeln!(out, "{t:.9},{m:.12},{e:.12}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// `[time][site]` trajectory mean of the measured `⟨Q_i⟩`.
    pub site_mean: Vec<Vec<f64>>,
    pub site_stderr: Vec<Vec<f64>>,
    pub traces: Vec<EnsembleTrace>,
    pub n_trajectories: usize,
    pub resampled: usize,
}

impl EnsembleResult {
    /// `t,Q_1,..,Q_N,Q_1_stderr,..` rows.
    pub fn site_csv(&self) -> String {
        let n = self.site_mean.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 1..=n {
            let _ = write!(out, ",Q_{i}");
        }
        for i in 1..=n {
            let _ = write!(out, ",Q_{i}_stderr");
        }
        out.push('\n');
        for (k, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{t:.9}");
            for v in self.site_mean[k].iter().chain(&self.site_stderr[k]) {
                let _ = write!(out, ",{v:.12}");
            }
            out.push('\n');
        }
        out
    }
}

fn pairwise_sum(items: &[Vec<f64>]) -> Vec<f64> {
    match items {
        [] => Vec::new(),
        [one] => one.clone(),
        _ => {
            let (a, b) = items.split_at(items.len() / 2);
            let (mut left, right) = (pairwise_sum(a), pairwise_sum(b));
            left.iter_mut().zip(&right).for_each(|(l, r)| *l += r);
            left
        }
    }
}

/// Mean and standard error of each component across rows, reduced pairwise.
pub fn mean_and_stderr(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len() as f64;
    let mean: Vec<f64> = pairwise_sum(rows).into_iter().map(|s| s / n).collect();
    if rows.len() < 2 {
        return (mean.clone(), vec![0.0; mean.len()]);
    }
    let dev: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| (x - m).powi(2)).collect())
        .collect();
    let stderr = pairwise_sum(&dev).into_iter().map(|s| (s / (n - 1.0) / n).sqrt()).collect();
    (mean, stderr)
}

pub struct EnsembleRequest<'a> {
    pub spec: &'a ChainSpec,
    pub dynamics: EnsembleDynamics,
    pub basis: Arc<Basis>,
    pub initial: ProductState,
    pub plan: &'a EvolutionPlan,
    pub noise: &'a NoiseSpec,
    pub observables: &'a [EnsembleObservable],
    /// Drop drive couplings leaving `basis`.
    pub truncate: bool,
}

fn run_trajectory(req: &EnsembleRequest<'_>, index: usize) -> Result<(Trajectory, usize)> {
    let r = sample_realization(req.spec, req.noise, index)?;
    let opts = RydbergOptions {
        local_detunings: r.detunings,
        allow_truncation: req.truncate,
    };
    let psi0 = QuantumState::product(req.basis.clone(), &req.initial)?;
    let traj = match &req.dynamics {
        EnsembleDynamics::Static(drive) => {
            let h = build_rydberg_with(&r.spec, drive, req.basis.clone(), &opts)?;
            evolve_static(&h, &psi0, req.plan)?
        }
        EnsembleDynamics::Ffm(drive) => {
            let h = build_ffm_with(&r.spec, drive, req.basis.clone(), &opts)?;
            evolve_ffm(&h, &psi0, req.plan)?
        }
    };
    Ok((traj, r.resampled))
}

/// Trajectory-averaged site occupations and observables with standard errors.
///
/// Readout error enters through [`confusion_map`] applied to each
/// trajectory's exact `⟨Q_i⟩`.
pub fn ensemble_trace(req: &EnsembleRequest<'_>) -> Result<EnsembleResult> {
    req.noise.validate()?;
    req.plan.validate()?;
    let n = req.spec.n();
    let per: Vec<Result<(Vec<f64>, Vec<f64>, usize)>> = crate::par::map_range(req.noise.n_trajectories, |k| {
        let (traj, resampled) = run_trajectory(req, k)?;
        let mut sites = Vec::with_capacity(traj.len() * n);
        let mut obs = Vec::with_capacity(traj.len() * req.observables.len());
        for psi in &traj.states {
            let q: Vec<f64> = site_expectations(psi).into_iter().map(|x| confusion_map(x, req.noise)).collect();
            obs.extend(req.observables.iter().map(|o| o.eval(&q)));
            sites.extend(q);
        }
        Ok((sites, obs, resampled))
    });
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let resampled = per.iter().map(|p| p.2).sum();
    let (site_rows, obs_rows): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per.into_iter().map(|(s, o, _)| (s, o)).unzip();
    let (sm, se) = mean_and_stderr(&site_rows);
    let (om, oe) = mean_and_stderr(&obs_rows);
    let times = req.plan.sample_times.clone();
    let nt = times.len();
    let chunk = |v: &[f64]| v.chunks(n).map(<[f64]>::to_vec).collect::<Vec<_>>();
    let no = req.observables.len();
    let traces = req
        .observables
        .iter()
        .enumerate()
        .map(|(j, o)| EnsembleTrace {
            observable: o.name(),
            times: times.clone(),
            mean: (0..nt).map(|t| om[t * no + j]).collect(),
            stderr: (0..nt).map(|t| oe[t * no + j]).collect(),
        })
        .collect();
    Ok(EnsembleResult {
        site_mean: chunk(&sm),
        site_stderr: chunk(&se),
        times,
        traces,
        n_trajectories: req.noise.n_trajectories,
        resampled,
    })
}

/// Occupation-weighted RMS distance from the nearest seed site.
pub fn spread_radius(q: &[f64], seeds: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &w) in q.iter().enumerate() {
        let site = i + 1;
        let d = seeds.iter().map(|&s| site.abs_diff(s)).min().unwrap_or(0) as f64;
        num += w * d * d;
        den += w;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontGrowth {
    pub monotonic: bool,
    /// Mean growth rate over the first and second halves of the window.
    pub early_rate: f64,
    pub late_rate: f64,
}

impl FrontGrowth {
    /// Still growing at a comparable rate in the second half.
    pub fn is_ballistic(&self) -> bool {
        self.monotonic && self.early_rate > 0.0 && self.late_rate >= 0.5 * self.early_rate
    }
}

pub fn front_growth(times: &[f64], radius: &[f64]) -> Result<FrontGrowth> {
    let n = times.len();
    if n < 3 || radius.len() != n {
        return Err(Error::TooFewSamples { got: n.min(radius.len()), need: 3 });
    }
    let mid = n / 2;
    let rate = |a: usize, b: usize| (radius[b] - radius[a]) / (times[b] - times[a]);
    Ok(FrontGrowth {
        monotonic: radius.windows(2).all(|w| w[1] >= w[0] - 1e-9),
        early_rate: rate(0, mid),
        late_rate: rate(mid, n - 1),
    })
}
