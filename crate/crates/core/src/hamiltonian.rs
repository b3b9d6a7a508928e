//! Builders for the full Rydberg Hamiltonian, its frequency-modulated
//! variant, and the constrained effective models.
//!
//! Every effective model flips one site `j` at a time with an amplitude that
//! depends only on the occupations of the other sites, so each builder is a
//! rule `(state, j) -> Option<amplitude>` for the raising direction; the
//! lowering element is its complex conjugate.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, Boundary, ChainSpec, ProductState};
use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::operator::{Csr, OperatorMatrix, Schedule, TimeDependentOperator, C64};
use crate::par;

/// Modulation of the detuning `Δ(t) = Δ0 sin(ω_d t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfmSpec {
    pub delta0: f64,
    pub omega_d: f64,
    /// Relative drive-amplitude harmonics of `ω_d` (residual amplitude
    /// modulation compensation); empty for a clean modulation.
    #[serde(default)]
    pub harmonics: Vec<f64>,
}

impl FfmSpec {
    /// Modulation depth `α = Δ0 / ω_d`.
    pub fn alpha(&self) -> f64 {
        self.delta0 / self.omega_d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub omega: f64,
    pub delta: f64,
    #[serde(default)]
    pub ffm: Option<FfmSpec>,
}

impl DriveSpec {
    pub fn new(omega: f64, delta: f64) -> Self {
        Self { omega, delta, ffm: None }
    }

    pub fn with_ffm(mut self, ffm: FfmSpec) -> Self {
        self.ffm = Some(ffm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidDrive(format!("Rabi frequency must be >= 0, got {}", self.omega)));
        }
        if !self.delta.is_finite() {
            return Err(Error::InvalidDrive("non-finite detuning".into()));
        }
        if let Some(f) = &self.ffm {
            if !f.alpha().is_finite() {
                return Err(Error::InvalidDrive("modulation depth is not finite".into()));
            }
        }
        Ok(())
    }
}

/// The constrained models. Amplitudes are angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectiveModel {
    /// `(Ω/2) Σ P_{i-1} X_i P_{i+1}`
    Pxp { omega: f64 },
    /// `(Ω/2) Σ Q_{i-1} X_i Q_{i+1}`
    Qxq { omega: f64 },
    /// `(Ω/2) Σ Q_{i-k} X_i Q_{i+k} Π_{l<k} P_{i-l} P_{i+l}`
    Qpxpq { k: usize, omega: f64 },
    /// Two-drive model: `-Ω_F` when both sites `i±k` are excited, `iΩ_F'`
    /// when exactly one is, with blockade inside `k`.
    Krt { k: usize, omega_f: f64, omega_fp: f64 },
    /// Blockade only: `(Ω/2) Σ P_{i-2} P_{i-1} X_i P_{i+1} P_{i+2}`
    Ppxpp { omega: f64 },
    /// PPXPP plus a second drive resonant with a single `V_1` neighbour.
    PpxppV1Drive { omega: f64, omega_p: f64 },
    /// Odd-sublattice chain of the two-drive model (nearest-neighbour form).
    KrtSubarray { omega_f: f64, omega_fp: f64 },
}

impl EffectiveModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidModel(m.to_string()));
        match *self {
            EffectiveModel::Qpxpq { k, .. } if k == 0 => bad("k must be >= 1"),
            EffectiveModel::Krt { k, .. } if k == 0 => bad("k must be >= 1"),
            EffectiveModel::Krt { omega_f, omega_fp, .. } | EffectiveModel::KrtSubarray { omega_f, omega_fp }
                if omega_f < 0.0 || omega_fp < 0.0 =>
            {
                bad("Rabi amplitudes must be nonnegative")
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EffectiveModel::Pxp { .. } => "pxp",
            EffectiveModel::Qxq { .. } => "qxq",
            EffectiveModel::Qpxpq { .. } => "qpxpq",
            EffectiveModel::Krt { .. } => "krt",
            EffectiveModel::Ppxpp { .. } => "ppxpp",
            EffectiveModel::PpxppV1Drive { .. } => "ppxpp_v1drive",
            EffectiveModel::KrtSubarray { .. } => "krt_subarray",
        }
    }

    /// Full-Hamiltonian detuning at which this model is resonant.
    pub fn resonant_detuning(&self, spec: &ChainSpec) -> f64 {
        match *self {
            EffectiveModel::Pxp { .. } | EffectiveModel::Ppxpp { .. } | EffectiveModel::PpxppV1Drive { .. } => 0.0,
            EffectiveModel::Qxq { .. } => 2.0 * spec.coupling(1),
            EffectiveModel::Qpxpq { k, .. } | EffectiveModel::Krt { k, .. } => 2.0 * spec.coupling(k),
            EffectiveModel::KrtSubarray { .. } => 2.0 * spec.coupling(1),
        }
    }

    /// Amplitude `c` such that `<s'|H|s> = c` when `s'` is `s` with site `j`
    /// raised. `None` when the flip is forbidden.
    fn raise_amplitude(&self, s: &ProductState, j: usize, boundary: Boundary) -> Option<C64> {
        let n = s.len();
        // Out-of-range sites under open boundaries: `Identity` satisfies any
        // projector, `Ground` is a virtual ground-state atom.
        #[derive(Clone, Copy)]
        enum Edge {
            Identity,
            Ground,
        }
        let occ = |offset: isize, edge: Edge, want_excited: bool| -> bool {
            let site = j as isize + offset;
            let resolved = match boundary {
                Boundary::Periodic => Some((site - 1).rem_euclid(n as isize) as usize + 1),
                Boundary::Open => (site >= 1 && site <= n as isize).then_some(site as usize),
            };
            match resolved {
                Some(i) => s.is_excited(i) == want_excited,
                None => match edge {
                    Edge::Identity => true,
                    Edge::Ground => !want_excited,
                },
            }
        };
        let p = |o: isize, e: Edge| occ(o, e, false);
        let q = |o: isize, e: Edge| occ(o, e, true);
        let blockade = |k: usize| (1..k as isize).all(|l| p(-l, Edge::Ground) && p(l, Edge::Ground));
        let real = |x: f64| Some(C64::new(x, 0.0));
        match *self {
            EffectiveModel::Pxp { omega } => {
                (p(-1, Edge::Identity) && p(1, Edge::Identity)).then(|| C64::new(omega / 2.0, 0.0))
            }
            EffectiveModel::Qxq { omega } => {
                (q(-1, Edge::Identity) && q(1, Edge::Identity)).then(|| C64::new(omega / 2.0, 0.0))
            }
            EffectiveModel::Qpxpq { k, omega } => {
                let k = k as isize;
                (blockade(k as usize) && q(-k, Edge::Ground) && q(k, Edge::Ground)).then(|| C64::new(omega / 2.0, 0.0))
            }
            EffectiveModel::Krt { k, omega_f, omega_fp } => krt_amplitude(
                blockade(k),
                q(-(k as isize), Edge::Ground),
                q(k as isize, Edge::Ground),
                omega_f,
                omega_fp,
            ),
            EffectiveModel::KrtSubarray { omega_f, omega_fp } => {
                krt_amplitude(true, q(-1, Edge::Ground), q(1, Edge::Ground), omega_f, omega_fp)
            }
            EffectiveModel::Ppxpp { omega } => blockade(3).then(|| C64::new(omega / 2.0, 0.0)),
            EffectiveModel::PpxppV1Drive { omega, omega_p } => {
                if !blockade(2) {
                    return None;
                }
                match (q(-2, Edge::Ground), q(2, Edge::Ground)) {
                    (false, false) => real(omega / 2.0),
                    (true, false) | (false, true) => real(omega_p / 2.0),
                    (true, true) => None,
                }
            }
        }
    }
}

fn krt_amplitude(blockade_ok: bool, left: bool, right: bool, omega_f: f64, omega_fp: f64) -> Option<C64> {
    if !blockade_ok {
        return None;
    }
    match (left, right) {
        (true, true) => Some(C64::new(-omega_f / 2.0, 0.0)),
        (true, false) | (false, true) => Some(C64::new(0.0, omega_fp / 2.0)),
        (false, false) => None,
    }
}

impl fmt::Display for EffectiveModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EffectiveModel::Qpxpq { k, .. } => write!(f, "qpxpq({k})"),
            EffectiveModel::Krt { k, .. } => write!(f, "krt({k})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Named model kinds, as used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Pxp,
    Qxq,
    Qpxpq,
    Krt,
    Ppxpp,
    PpxppV1Drive,
    KrtSubarray,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pxp" => ModelKind::Pxp,
            "qxq" => ModelKind::Qxq,
            "qpxpq" => ModelKind::Qpxpq,
            "krt" => ModelKind::Krt,
            "ppxpp" => ModelKind::Ppxpp,
            "ppxpp_v1drive" | "ppxpp_plus_v1drive" => ModelKind::PpxppV1Drive,
            "krt_subarray" => ModelKind::KrtSubarray,
            other => return Err(Error::InvalidModel(format!("unknown model kind '{other}'"))),
        })
    }
}

/// Options for [`build_rydberg_with`].
#[derive(Debug, Clone, Default)]
pub struct RydbergOptions {
    /// Per-atom extra detunings `δ_i`, entering as `-Σ δ_i Q_i`.
    pub local_detunings: Option<Vec<f64>>,
    /// Drop drive couplings that leave the basis instead of failing. This is
    /// the blockade truncation used for chains too large for the full space.
    pub allow_truncation: bool,
}

/// `-Δ Σ Q_i + (Ω/2) Σ X_i + Σ V Q_i Q_{i+j}` on `basis`.
pub fn build_rydberg(spec: &ChainSpec, drive: &DriveSpec, basis: Arc<Basis>) -> Result<OperatorMatrix> {
    build_rydberg_with(spec, drive, basis, &RydbergOptions::default())
}

pub fn build_rydberg_with(
    spec: &ChainSpec,
    drive: &DriveSpec,
    basis: Arc<Basis>,
    opts: &RydbergOptions,
) -> Result<OperatorMatrix> {
    drive.validate()?;
    if drive.ffm.is_some() {
        return Err(Error::InvalidDrive("build_rydberg takes a static drive; use build_ffm".into()));
    }
    let parts = rydberg_parts(spec, drive.delta, drive.omega, &basis, opts)?;
    let m = parts.diag_csr().add_scaled(&parts.drive, 1.0);
    OperatorMatrix::new(basis, m)
}

struct RydbergParts {
    diag: Vec<f64>,
    number: Vec<f64>,
    drive: Csr,
}

impl RydbergParts {
    fn diag_csr(&self) -> Csr {
        Csr::diagonal(&self.diag)
    }
}

fn rydberg_parts(spec: &ChainSpec, delta: f64, omega: f64, basis: &Basis, opts: &RydbergOptions) -> Result<RydbergParts> {
    if basis.n_sites() != spec.n() {
        return Err(Error::LengthMismatch {
            left: basis.n_sites(),
            right: spec.n(),
        });
    }
    if let Some(d) = &opts.local_detunings {
        if d.len() != spec.n() {
            return Err(Error::LengthMismatch {
                left: d.len(),
                right: spec.n(),
            });
        }
    }
    let n = spec.n();
    let states = basis.states();
    let number: Vec<f64> = states.iter().map(|s| s.excitation_count() as f64).collect();
    let diag = par::map_slice(states, |s| {
        let mut e = -delta * s.excitation_count() as f64 + spec.interaction_energy(s);
        if let Some(d) = &opts.local_detunings {
            e -= s.excited_sites().iter().map(|&i| d[i - 1]).sum::<f64>();
        }
        e
    });
    let half = C64::new(omega / 2.0, 0.0);
    let rows: Vec<Result<Vec<(usize, C64)>>> = par::map_slice(states, |s| {
        let mut row = Vec::with_capacity(n);
        if omega == 0.0 {
            return Ok(row);
        }
        for j in 1..=n {
            let t = s.flipped(j);
            match basis.index_of(&t) {
                Some(c) => row.push((c, half)),
                None if opts.allow_truncation => {}
                None => {
                    return Err(Error::BasisNotClosed {
                        from: s.to_string(),
                        to: t.to_string(),
                    })
                }
            }
        }
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(RydbergParts {
        diag,
        number,
        drive: Csr::from_rows(basis.len(), rows),
    })
}

/// `-(Δ + Δ0 sin ω_d t) Σ Q_i + a(t) (Ω/2) Σ X_i + Σ V Q_i Q_{i+j}`.
pub fn build_ffm(spec: &ChainSpec, drive: &DriveSpec, basis: Arc<Basis>) -> Result<TimeDependentOperator> {
    build_ffm_with(spec, drive, basis, &RydbergOptions::default())
}

pub fn build_ffm_with(
    spec: &ChainSpec,
    drive: &DriveSpec,
    basis: Arc<Basis>,
    opts: &RydbergOptions,
) -> Result<TimeDependentOperator> {
    drive.validate()?;
    let ffm = drive
        .ffm
        .as_ref()
        .ok_or_else(|| Error::InvalidDrive("frequency modulation parameters are missing".into()))?;
    let parts = rydberg_parts(spec, drive.delta, drive.omega, &basis, opts)?;
    let static_part = OperatorMatrix::new(basis.clone(), parts.diag_csr())?;
    let drive_part = OperatorMatrix::new(basis, parts.drive)?;
    Ok(TimeDependentOperator {
        static_part,
        drive: drive_part,
        number: parts.number,
        schedule: Schedule {
            detuning_amplitude: ffm.delta0,
            omega: ffm.omega_d,
            amplitude_harmonics: ffm.harmonics.clone(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sideband {
    pub m: i32,
    /// `i^m J_m(α)`
    pub weight: Complex64,
}

/// Sideband weights of the modulated drive for `m = -m_max..=m_max`.
pub fn ffm_sidebands(alpha: f64, m_max: u32) -> Vec<Sideband> {
    let m_max = m_max as i32;
    (-m_max..=m_max)
        .map(|m| {
            let phase = Complex64::i().powi(m);
            Sideband {
                m,
                weight: phase * bessel_j(m, alpha),
            }
        })
        .collect()
}

/// `(Ω_F, Ω_F')`: the drive amplitudes resonant with two and one `V_{k-1}`
/// neighbours, `|J_2(α)| Ω` and `|J_1(α)| Ω`.
pub fn ffm_effective_rabi(omega: f64, alpha: f64) -> (f64, f64) {
    (bessel_j(2, alpha).abs() * omega, bessel_j(1, alpha).abs() * omega)
}

/// Effective model on `basis`, which must be closed under the model's flips.
pub fn build_effective(model: &EffectiveModel, spec: &ChainSpec, basis: Arc<Basis>) -> Result<OperatorMatrix> {
    model.validate()?;
    if basis.n_sites() != spec.n() {
        return Err(Error::LengthMismatch {
            left: basis.n_sites(),
            right: spec.n(),
        });
    }
    build_effective_on(model, spec.n(), spec.boundary(), basis)
}

fn build_effective_on(model: &EffectiveModel, n: usize, boundary: Boundary, basis: Arc<Basis>) -> Result<OperatorMatrix> {
    let rows: Vec<Result<Vec<(usize, C64)>>> = par::map_slice(basis.states(), |s| {
        let mut row = Vec::new();
        for j in 1..=n {
            let Some(amp) = model.raise_amplitude(s, j, boundary) else {
                continue;
            };
            // Row s, column t: <s|H|t>. Raising from t gives s when s has j excited.
            let t = s.flipped(j);
            let elem = if s.is_excited(j) { amp } else { amp.conj() };
            match basis.index_of(&t) {
                Some(c) => row.push((c, elem)),
                None => {
                    return Err(Error::BasisNotClosed {
                        from: s.to_string(),
                        to: t.to_string(),
                    })
                }
            }
        }
        Ok(row)
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let dim = basis.len();
    OperatorMatrix::new(basis, Csr::from_rows(dim, rows))
}

/// States reachable from `start` under the model's flips, sorted. This is
/// the Krylov sector of `start` without enumerating the full space.
pub fn reachable_states(model: &EffectiveModel, spec: &ChainSpec, start: &ProductState, limit: usize) -> Result<Vec<ProductState>> {
    model.validate()?;
    if start.len() != spec.n() {
        return Err(Error::LengthMismatch {
            left: start.len(),
            right: spec.n(),
        });
    }
    let mut seen = std::collections::HashSet::from([*start]);
    let mut stack = vec![*start];
    while let Some(s) = stack.pop() {
        for j in 1..=spec.n() {
            let t = s.flipped(j);
            // The amplitude rule is evaluated from the lower state of the pair.
            let lower = if s.is_excited(j) { &t } else { &s };
            if model.raise_amplitude(lower, j, spec.boundary()).is_some() && seen.insert(t) {
                if seen.len() > limit {
                    return Err(Error::DimensionOverCap { dim: seen.len(), cap: limit });
                }
                stack.push(t);
            }
        }
    }
    let mut out: Vec<ProductState> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// The open odd-sublattice chain of the two-drive model on `n_sub` atoms:
/// edge terms `iΩ_F' X_1 Q_2`, `iΩ_F' Q_{n-1} X_n` and bulk three-site terms.
pub fn build_krt_subarray(n_sub: usize, omega_f: f64, omega_fp: f64) -> Result<OperatorMatrix> {
    if n_sub < 3 {
        return Err(Error::InvalidModel(format!("subarray needs at least 3 atoms, got {n_sub}")));
    }
    let model = EffectiveModel::KrtSubarray { omega_f, omega_fp };
    model.validate()?;
    let basis = Arc::new(Basis::full(n_sub)?);
    build_effective_on(&model, n_sub, Boundary::Open, basis)
}

/// Diagonal operator with entries `f(state)`.
pub fn diagonal_operator(basis: Arc<Basis>, f: impl Fn(&ProductState) -> f64 + Sync + Send) -> OperatorMatrix {
    let d = par::map_slice(basis.states(), |s| f(s));
    OperatorMatrix::new(basis, Csr::diagonal(&d)).expect("real diagonal is Hermitian")
}
