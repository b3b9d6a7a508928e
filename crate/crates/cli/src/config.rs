//! Run configuration: TOML text with unit-suffixed quantities.

use std::fmt;

use serde::{Deserialize, Serialize};

use rydfrag::basis::{Boundary, ChainSpec, ProductState};
use rydfrag::disorder::{Displacement, NoiseSpec};
use rydfrag::evolution::{EvolutionPlan, Method};
use rydfrag::hamiltonian::{DriveSpec, EffectiveModel, FfmSpec};

use crate::error::CliError;
use crate::presets;
use crate::units::{Frequency, Length, Time, C6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowKind {
    Fragment,
    Scar,
    KrtThermalization,
    Subspaces,
    Leakage,
    Disorder,
}

impl WorkflowKind {
    pub const ALL: [WorkflowKind; 6] = [
        WorkflowKind::Fragment,
        WorkflowKind::Scar,
        WorkflowKind::KrtThermalization,
        WorkflowKind::Subspaces,
        WorkflowKind::Leakage,
        WorkflowKind::Disorder,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WorkflowKind::Fragment => "fragment",
            WorkflowKind::Scar => "scar",
            WorkflowKind::KrtThermalization => "krt_thermalization",
            WorkflowKind::Subspaces => "subspaces",
            WorkflowKind::Leakage => "leakage",
            WorkflowKind::Disorder => "disorder",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            WorkflowKind::Fragment => "Krylov decomposition, frozen states and sorted matrix plot",
            WorkflowKind::Scar => "scar traces, Fourier spectrum, damped-cosine fit and eigenstate scan",
            WorkflowKind::KrtThermalization => "two-drive thermalization with microstate histogram and thermal lines",
            WorkflowKind::Subspaces => "site-resolved late-time profiles for several initial states",
            WorkflowKind::Leakage => "minimum P_B over a window of modulated-drive evolution",
            WorkflowKind::Disorder => "Monte Carlo ensemble with position, Doppler and readout noise",
        }
    }
}

impl fmt::Display for WorkflowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_spacing() -> Length {
    Length(3.73)
}

fn default_kmax() -> usize {
    3
}

fn default_boundary() -> Boundary {
    Boundary::Open
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub sites: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_spacing")]
    pub spacing: Length,
    /// `V_0, V_1, ...` listed explicitly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub couplings: Option<Vec<Frequency>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c6: Option<C6>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<Frequency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<Frequency>,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
}

pub const INTERACTION_KEYS: [&str; 5] = ["couplings", "c6", "v0", "v1", "v2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FfmConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<Frequency>,
    pub omega_d: Frequency,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub harmonics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub omega: Frequency,
    #[serde(default, skip_serializing_if = "is_default")]
    pub delta: Frequency,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ffm: Option<FfmConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Pxp { omega: Frequency },
    Qxq { omega: Frequency },
    Qpxpq { k: usize, omega: Frequency },
    Krt { k: usize, omega_f: Frequency, omega_fp: Frequency },
    Ppxpp { omega: Frequency },
    #[serde(rename = "ppxpp_v1drive")]
    PpxppV1Drive { omega: Frequency, omega_p: Frequency },
    KrtSubarray { omega_f: Frequency, omega_fp: Frequency },
}

/// Externally tagged twin of [`ModelConfig`]. Internally tagged enums
/// buffer their content, which loses the key path of a failing field.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum ModelRepr {
    Pxp { omega: Frequency },
    Qxq { omega: Frequency },
    Qpxpq { k: usize, omega: Frequency },
    Krt { k: usize, omega_f: Frequency, omega_fp: Frequency },
    Ppxpp { omega: Frequency },
    #[serde(rename = "ppxpp_v1drive")]
    PpxppV1Drive { omega: Frequency, omega_p: Frequency },
    KrtSubarray { omega_f: Frequency, omega_fp: Frequency },
}

impl From<ModelRepr> for ModelConfig {
    fn from(r: ModelRepr) -> Self {
        match r {
            ModelRepr::Pxp { omega } => ModelConfig::Pxp { omega },
            ModelRepr::Qxq { omega } => ModelConfig::Qxq { omega },
            ModelRepr::Qpxpq { k, omega } => ModelConfig::Qpxpq { k, omega },
            ModelRepr::Krt { k, omega_f, omega_fp } => ModelConfig::Krt { k, omega_f, omega_fp },
            ModelRepr::Ppxpp { omega } => ModelConfig::Ppxpp { omega },
            ModelRepr::PpxppV1Drive { omega, omega_p } => ModelConfig::PpxppV1Drive { omega, omega_p },
            ModelRepr::KrtSubarray { omega_f, omega_fp } => ModelConfig::KrtSubarray { omega_f, omega_fp },
        }
    }
}

/// Prefix of a nested error message carrying the inner key path,
/// `@a.b@ message`. [`from_table`] folds it back into the path.
const NESTED: char = '@';

impl<'de> Deserialize<'de> for ModelConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let mut t = toml::Table::deserialize(d)?;
        let kind = match t.remove("kind") {
            Some(toml::Value::String(k)) => k,
            Some(_) => return Err(D::Error::custom(format!("{NESTED}kind{NESTED} expected a model name string"))),
            None => return Err(D::Error::missing_field("kind")),
        };
        let mut outer = toml::Table::new();
        outer.insert(kind, toml::Value::Table(t));
        serde_path_to_error::deserialize::<_, ModelRepr>(toml::Value::Table(outer))
            .map(Into::into)
            .map_err(|e| {
                let keys: Vec<String> = e
                    .path()
                    .iter()
                    .filter_map(|seg| match seg {
                        serde_path_to_error::Segment::Map { key } => Some(key.clone()),
                        serde_path_to_error::Segment::Enum { variant } => Some(variant.clone()),
                        _ => None,
                    })
                    .collect();
                let msg = e.inner().to_string();
                let keys = match keys.split_first() {
                    Some((_, rest)) if !rest.is_empty() => rest.join("."),
                    _ if msg.starts_with("unknown variant") => "kind".to_string(),
                    _ => String::new(),
                };
                if keys.is_empty() {
                    D::Error::custom(msg)
                } else {
                    D::Error::custom(format!("{NESTED}{keys}{NESTED} {msg}"))
                }
            })
    }
}

impl ModelConfig {
    pub fn to_model(&self) -> EffectiveModel {
        match *self {
            ModelConfig::Pxp { omega } => EffectiveModel::Pxp { omega: omega.0 },
            ModelConfig::Qxq { omega } => EffectiveModel::Qxq { omega: omega.0 },
            ModelConfig::Qpxpq { k, omega } => EffectiveModel::Qpxpq { k, omega: omega.0 },
            ModelConfig::Krt { k, omega_f, omega_fp } => EffectiveModel::Krt {
                k,
                omega_f: omega_f.0,
                omega_fp: omega_fp.0,
            },
            ModelConfig::Ppxpp { omega } => EffectiveModel::Ppxpp { omega: omega.0 },
            ModelConfig::PpxppV1Drive { omega, omega_p } => EffectiveModel::PpxppV1Drive {
                omega: omega.0,
                omega_p: omega_p.0,
            },
            ModelConfig::KrtSubarray { omega_f, omega_fp } => EffectiveModel::KrtSubarray {
                omega_f: omega_f.0,
                omega_fp: omega_fp.0,
            },
        }
    }

    /// Largest drive amplitude, used to pick a default sampling rate.
    pub fn rate(&self) -> f64 {
        match *self {
            ModelConfig::Pxp { omega }
            | ModelConfig::Qxq { omega }
            | ModelConfig::Qpxpq { omega, .. }
            | ModelConfig::Ppxpp { omega } => omega.0,
            ModelConfig::Krt { omega_f, omega_fp, .. } | ModelConfig::KrtSubarray { omega_f, omega_fp } => {
                omega_f.0.max(omega_fp.0)
            }
            ModelConfig::PpxppV1Drive { omega, omega_p } => omega.0.max(omega_p.0),
        }
    }
}

/// One initial product state: an explicit string, a site list, or a
/// `Z_period` pattern starting at `first`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianKind {
    /// `H_Ryd` with a static drive.
    #[default]
    Full,
    /// The `[model]` constrained Hamiltonian.
    Effective,
    /// `H_Ryd` with the modulated detuning of `[drive.ffm]`.
    Ffm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Full,
    /// No adjacent excitations; drive terms leaving it are dropped.
    PrimaryBlock,
    /// Sector of the initial state under the effective model.
    Reachable,
    /// States reachable by single-neighbour facilitated flips.
    Facilitation,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_method() -> Method {
    Method::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default)]
    pub hamiltonian: HamiltonianKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<BasisKind>,
    pub t_end: Time,
    /// Uniform sample count; 30 samples per Rabi period when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<Time>,
    /// Interactions-only wait applied to the final state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idle: Option<Time>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub sigma_r: Length,
    #[serde(default)]
    pub sigma_doppler: Frequency,
    #[serde(default = "one")]
    pub spam_g: f64,
    #[serde(default = "one")]
    pub spam_r: f64,
    pub n_trajectories: usize,
    #[serde(default)]
    pub displacement: Displacement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParam {
    /// Dotted key into this file, e.g. `chain.sites`.
    pub key: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: Vec<SweepParam>,
}

fn default_cell() -> f64 {
    4.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmentConfig {
    /// Sorted-basis positions `[start, end)` drawn in the matrix plot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix_window: Option<[usize; 2]>,
    #[serde(default = "default_cell")]
    pub cell: f64,
    /// Chain lengths for a frozen-state count scan with the same model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_scan: Vec<usize>,
    #[serde(default = "yes")]
    pub members: bool,
}

impl Default for FragmentConfig {
    fn default() -> Self {
        Self {
            matrix_window: None,
            cell: default_cell(),
            frozen_scan: Vec::new(),
            members: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScarConfig {
    /// Sublattice period parameter of the subarrays, `Z_{2k}` start.
    /// Defaults to the model's k, 1 for PXP and QXQ, otherwise 2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fourier_window: Option<[Time; 2]>,
    /// Skip the eigenstate scan when the sector exceeds this dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_cap: Option<usize>,
}

fn default_thermal_window() -> f64 {
    0.24
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrtConfig {
    #[serde(default = "two")]
    pub k: usize,
    /// Microcanonical half-width in units of `Ω_F`.
    #[serde(default = "default_thermal_window")]
    pub thermal_window: f64,
    /// Window for late-time averages and fluctuations; last tenth by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub late_window: Option<[Time; 2]>,
    /// Modulated drive only: sets `V_1`, `ω_d` and `Δ_0 = α ω_d` from `Ω_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1_over_omega_f: Option<f64>,
}

impl Default for KrtConfig {
    fn default() -> Self {
        Self {
            k: 2,
            thermal_window: default_thermal_window(),
            late_window: None,
            v1_over_omega_f: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspacesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[Time; 2]>,
    #[serde(default = "default_thermal_window")]
    pub thermal_window: f64,
}

impl Default for SubspacesConfig {
    fn default() -> Self {
        Self {
            window: None,
            thermal_window: default_thermal_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakageConfig {
    #[serde(default = "two")]
    pub k: usize,
    /// Sets `V_1`, `ω_d` and `Δ_0 = α ω_d` from the effective `Ω_F`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1_over_omega_f: Option<f64>,
}

impl Default for LeakageConfig {
    fn default() -> Self {
        Self {
            k: 2,
            v1_over_omega_f: None,
        }
    }
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderConfig {
    /// Interaction order (1 = `V_0`) of the reported spread `σ_V/Ω`.
    #[serde(default = "one_usize")]
    pub metric_order: usize,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self { metric_order: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub workflow: WorkflowKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub chain: ChainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<EvolutionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragment: Option<FragmentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scar: Option<ScarConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub krt: Option<KrtConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspaces: Option<SubspacesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub initial: Vec<InitialConfig>,
}

/// A location inside the document, as a list of keys and array indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Seg {
    Key(String),
    Index(usize),
}

pub type KeyPath = Vec<Seg>;

pub fn key_path(dotted: &str) -> KeyPath {
    dotted
        .split('.')
        .map(|s| match s.parse::<usize>() {
            Ok(i) => Seg::Index(i),
            Err(_) => Seg::Key(s.to_string()),
        })
        .collect()
}

fn path_text(path: &[Seg]) -> String {
    let mut out = String::new();
    for s in path {
        match s {
            Seg::Key(k) => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(k);
            }
            Seg::Index(i) => out.push_str(&format!("[{i}]")),
        }
    }
    out
}

/// A semantic problem at a key path.
#[derive(Debug, Clone, PartialEq)]
pub struct Invalid {
    pub path: KeyPath,
    pub message: String,
}

fn invalid(path: &str, message: impl Into<String>) -> Invalid {
    Invalid {
        path: key_path(path),
        message: message.into(),
    }
}

/// The user-supplied text and where it came from.
#[derive(Debug, Clone)]
pub struct Source {
    pub file: String,
    pub text: String,
}

impl Source {
    pub fn new(file: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            file: file.into(),
            text: text.into(),
        }
    }

    fn line_col(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
        (line, col)
    }

    /// Byte span of the deepest element of `path` present in the text: the
    /// key when the path ends on a table entry.
    fn span_of(&self, path: &[Seg]) -> Option<std::ops::Range<usize>> {
        let doc = toml::de::DeTable::parse(&self.text).ok()?;
        let mut best: Option<std::ops::Range<usize>> = None;
        let mut table = Some(doc.into_inner());
        let mut array: Option<Vec<toml::Spanned<toml::de::DeValue<'_>>>> = None;
        for seg in path {
            let next = match (seg, table.take(), array.take()) {
                (Seg::Key(k), Some(t), _) => {
                    let Some((key, value)) = t.into_iter().find(|(key, _)| key.get_ref().as_ref() == k.as_str()) else {
                        break;
                    };
                    best = Some(key.span());
                    value
                }
                (Seg::Index(i), _, Some(items)) => {
                    let Some(value) = items.into_iter().nth(*i) else { break };
                    if value.span().end > value.span().start {
                        best = Some(value.span());
                    }
                    value
                }
                _ => break,
            };
            match next.into_inner() {
                toml::de::DeValue::Table(t) => table = Some(t),
                toml::de::DeValue::Array(a) => array = Some(a.into_iter().collect()),
                _ => {}
            }
        }
        best
    }

    /// `(line, column)` of `path`, or of the `preset` key when the value came
    /// from a preset, or the start of the file.
    pub fn locate(&self, path: &[Seg]) -> (usize, usize) {
        if let Some(span) = self.span_of(path) {
            return self.line_col(span.start);
        }
        if let Some(span) = self.span_of(&[Seg::Key("preset".into())]) {
            return self.line_col(span.start);
        }
        (1, 1)
    }

    pub fn schema_error(&self, path: &[Seg], message: impl Into<String>) -> CliError {
        let (line, col) = self.locate(path);
        let mut message = message.into();
        if !path.is_empty() {
            message = format!("{}: {message}", path_text(path));
        }
        CliError::Schema {
            file: self.file.clone(),
            line,
            col,
            message,
        }
    }
}

/// Overlay `top` onto `base`. Tables merge key by key; a user interaction
/// law replaces the preset one, and a model of another kind replaces the
/// preset model wholesale.
pub fn merge(base: &mut toml::Table, top: toml::Table, path: &str) {
    if path == "chain" && INTERACTION_KEYS.iter().any(|k| top.contains_key(*k)) {
        for k in INTERACTION_KEYS {
            base.remove(k);
        }
    }
    if path == "drive.ffm" && (top.contains_key("alpha") || top.contains_key("delta0")) {
        base.remove("alpha");
        base.remove("delta0");
    }
    for (key, value) in top {
        let child = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => {
                if child == "model" && b.get("kind") != t.get("kind") && t.contains_key("kind") {
                    *b = t;
                } else {
                    merge(b, t, &child);
                }
            }
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Replace the value at a dotted key, creating tables as needed.
pub fn set_path(table: &mut toml::Table, dotted: &str, value: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = dotted.split('.').collect();
    let last = parts.pop().ok_or("empty key")?;
    let mut cur = table;
    for p in parts {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(format!("'{p}' in '{dotted}' is not a table")),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Parse TOML text into a table, reporting syntax errors at their position.
pub fn parse_table(src: &Source) -> Result<toml::Table, CliError> {
    toml::from_str::<toml::Table>(&src.text).map_err(|e| {
        let (line, col) = e.span().map_or((1, 1), |s| src.line_col(s.start));
        CliError::Schema {
            file: src.file.clone(),
            line,
            col,
            message: e.message().trim().to_string(),
        }
    })
}

/// The preset table (if requested) overlaid with the user's table.
pub fn merged_table(src: &Source) -> Result<toml::Table, CliError> {
    let user = parse_table(src)?;
    let Some(preset) = user.get("preset") else { return Ok(user) };
    let Some(name) = preset.as_str() else {
        return Err(src.schema_error(&key_path("preset"), "expected a preset name string"));
    };
    let Some(text) = presets::text(name) else {
        return Err(src.schema_error(
            &key_path("preset"),
            format!("unknown preset '{name}' (expected one of {})", presets::NAMES.join(", ")),
        ));
    };
    let mut base: toml::Table = toml::from_str(text).expect("presets are valid TOML");
    merge(&mut base, user, "");
    Ok(base)
}

/// Deserialize a merged table into a [`Config`], anchoring failures.
pub fn from_table(src: &Source, table: toml::Table) -> Result<Config, CliError> {
    serde_path_to_error::deserialize::<_, Config>(toml::Value::Table(table)).map_err(|e| {
        let mut path: KeyPath = Vec::new();
        for seg in e.path().iter() {
            match seg {
                serde_path_to_error::Segment::Map { key } => path.push(Seg::Key(key.clone())),
                serde_path_to_error::Segment::Seq { index } => path.push(Seg::Index(*index)),
                _ => {}
            }
        }
        let mut message = e.inner().to_string();
        if let Some(rest) = message.strip_prefix(NESTED) {
            if let Some((keys, msg)) = rest.split_once(NESTED) {
                path.extend(keys.split('.').map(|k| Seg::Key(k.to_string())));
                message = msg.trim().to_string();
            }
        }
        // Unknown keys are reported at the table; point at the key itself.
        if let Some(rest) = message.strip_prefix("unknown field `") {
            if let Some(key) = rest.split('`').next() {
                path.push(Seg::Key(key.to_string()));
            }
        }
        src.schema_error(&path, message.trim())
    })
}

/// Parse, merge, deserialize and validate.
pub fn load(src: &Source) -> Result<(Config, Resolved), CliError> {
    let table = merged_table(src)?;
    let cfg = from_table(src, table)?;
    let resolved = resolve(&cfg).map_err(|e| src.schema_error(&e.path, e.message))?;
    Ok((cfg, resolved))
}

/// The configuration in a canonical textual form: presets merged in, units
/// in rad/us, us and um.
pub fn canonical_text(cfg: &Config) -> String {
    let mut c = cfg.clone();
    c.preset = None;
    toml::to_string(&c).expect("config serializes")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Initial {
    pub label: String,
    pub state: ProductState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub hamiltonian: HamiltonianKind,
    pub basis: BasisKind,
    pub plan: EvolutionPlan,
    pub idle: Option<f64>,
}

/// Validated inputs in core types.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub workflow: WorkflowKind,
    pub spec: ChainSpec,
    pub drive: Option<DriveSpec>,
    pub model: Option<EffectiveModel>,
    pub initial: Vec<Initial>,
    pub evolution: Option<Evolution>,
    pub noise: Option<NoiseSpec>,
}

fn chain_spec(c: &ChainConfig) -> Result<ChainSpec, Invalid> {
    let given: Vec<&str> = [
        c.couplings.is_some(),
        c.c6.is_some(),
        c.v0.is_some(),
        c.v1.is_some(),
        c.v2.is_some(),
    ]
    .iter()
    .zip(INTERACTION_KEYS)
    .filter(|(g, _)| **g)
    .map(|(_, k)| k)
    .collect();
    if given.len() > 1 {
        return Err(invalid(
            &format!("chain.{}", given[1]),
            format!("give only one of {} (found {})", INTERACTION_KEYS.join(", "), given.join(", ")),
        ));
    }
    if c.sites == 0 {
        return Err(invalid("chain.sites", "must be at least 1"));
    }
    if c.kmax == 0 {
        return Err(invalid("chain.kmax", "must be at least 1"));
    }
    let (n, b, a, kmax) = (c.sites, c.boundary, c.spacing.0, c.kmax);
    let (key, spec) = match given.first().copied() {
        None => ("chain", ChainSpec::with_couplings(n, b, a, vec![0.0; kmax])),
        Some("couplings") => (
            "chain.couplings",
            ChainSpec::with_couplings(n, b, a, c.couplings.as_ref().unwrap().iter().map(|f| f.0).collect()),
        ),
        Some("c6") => ("chain.c6", ChainSpec::from_c6(n, b, a, c.c6.unwrap().0, kmax)),
        Some("v0") => ("chain.v0", ChainSpec::from_order(n, b, a, 1, c.v0.unwrap().0, kmax)),
        Some("v1") => ("chain.v1", ChainSpec::from_order(n, b, a, 2, c.v1.unwrap().0, kmax)),
        Some(_) => ("chain.v2", ChainSpec::from_order(n, b, a, 3, c.v2.unwrap().0, kmax)),
    };
    spec.map_err(|e| invalid(key, e.to_string()))
}

fn drive_spec(d: &DriveConfig) -> Result<DriveSpec, Invalid> {
    let mut drive = DriveSpec::new(d.omega.0, d.delta.0);
    if let Some(f) = &d.ffm {
        let delta0 = match (f.alpha, f.delta0) {
            (Some(_), Some(_)) => return Err(invalid("drive.ffm.delta0", "give either alpha or delta0, not both")),
            (None, None) => return Err(invalid("drive.ffm", "missing modulation depth: set alpha or delta0")),
            (Some(alpha), None) => alpha * f.omega_d.0,
            (None, Some(d0)) => d0.0,
        };
        if !(f.omega_d.0 > 0.0) {
            return Err(invalid("drive.ffm.omega_d", "modulation frequency must be positive"));
        }
        drive = drive.with_ffm(FfmSpec {
            delta0,
            omega_d: f.omega_d.0,
            harmonics: f.harmonics.clone(),
        });
    }
    drive.validate().map_err(|e| invalid("drive", e.to_string()))?;
    Ok(drive)
}

fn initial_state(i: &InitialConfig, n: usize, idx: usize) -> Result<Initial, Invalid> {
    let at = |key: &str| format!("initial.{idx}.{key}");
    let given = [i.state.is_some(), i.sites.is_some(), i.period.is_some()].iter().filter(|g| **g).count();
    if given != 1 {
        return Err(invalid(&format!("initial.{idx}"), "give exactly one of state, sites or period"));
    }
    if i.first.is_some() && i.period.is_none() {
        return Err(invalid(&at("first"), "only meaningful together with period"));
    }
    let state = if let Some(text) = &i.state {
        let s: ProductState = text.parse().map_err(|e: rydfrag::Error| invalid(&at("state"), e.to_string()))?;
        if s.len() != n {
            return Err(invalid(&at("state"), format!("has {} sites, chain has {n}", s.len())));
        }
        s
    } else if let Some(sites) = &i.sites {
        ProductState::from_sites(n, sites).map_err(|e| invalid(&at("sites"), e.to_string()))?
    } else {
        let period = i.period.unwrap();
        let first = i.first.unwrap_or(1);
        if period == 0 {
            return Err(invalid(&at("period"), "must be at least 1"));
        }
        if first == 0 || first > n {
            return Err(invalid(&at("first"), format!("must lie in 1..={n}")));
        }
        let sites: Vec<usize> = (first..=n).step_by(period).collect();
        ProductState::from_sites(n, &sites).map_err(|e| invalid(&at("period"), e.to_string()))?
    };
    let label = i.label.clone().unwrap_or_else(|| state.to_string());
    if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "_-".contains(c)) {
        return Err(invalid(&at("label"), "labels use only letters, digits, '_' and '-'"));
    }
    Ok(Initial { label, state })
}

fn evolution(e: &EvolutionConfig, cfg: &Config) -> Result<Evolution, Invalid> {
    let basis = e.basis.unwrap_or(match e.hamiltonian {
        HamiltonianKind::Effective => BasisKind::Reachable,
        _ => BasisKind::Full,
    });
    match e.hamiltonian {
        HamiltonianKind::Effective if cfg.model.is_none() => {
            return Err(invalid("evolution.hamiltonian", "effective dynamics need a [model] section"))
        }
        HamiltonianKind::Full | HamiltonianKind::Ffm if cfg.drive.is_none() => {
            return Err(invalid("evolution.hamiltonian", "full dynamics need a [drive] section"))
        }
        HamiltonianKind::Ffm if cfg.drive.as_ref().is_some_and(|d| d.ffm.is_none()) => {
            return Err(invalid("evolution.hamiltonian", "ffm dynamics need a [drive.ffm] section"))
        }
        HamiltonianKind::Full if cfg.drive.as_ref().is_some_and(|d| d.ffm.is_some()) => {
            return Err(invalid("evolution.hamiltonian", "[drive.ffm] is set; use hamiltonian = \"ffm\""))
        }
        _ => {}
    }
    if basis == BasisKind::Reachable && e.hamiltonian != HamiltonianKind::Effective {
        return Err(invalid("evolution.basis", "the reachable sector is defined by an effective model"));
    }
    if !(e.t_end.0 > 0.0) {
        return Err(invalid("evolution.t_end", "must be positive"));
    }
    if !(e.tol > 0.0) {
        return Err(invalid("evolution.tol", "must be positive"));
    }
    let plan = match e.samples {
        Some(s) => EvolutionPlan::uniform(e.t_end.0, s).map_err(|x| invalid("evolution.samples", x.to_string()))?,
        None => {
            let rate = match e.hamiltonian {
                HamiltonianKind::Effective => cfg.model.as_ref().map_or(0.0, ModelConfig::rate),
                _ => cfg.drive.as_ref().map_or(0.0, |d| d.omega.0),
            };
            EvolutionPlan::for_rabi(rate, e.t_end.0)
                .map_err(|x| invalid("evolution", format!("{x}; set samples explicitly")))?
        }
    };
    let mut plan = plan.with_method(e.method).with_tol(e.tol);
    if let Some(step) = e.step {
        if !(step.0 > 0.0) {
            return Err(invalid("evolution.step", "must be positive"));
        }
        plan = plan.with_step(step.0);
    }
    if let Some(idle) = e.idle {
        if !(idle.0 >= 0.0) {
            return Err(invalid("evolution.idle", "must be nonnegative"));
        }
    }
    Ok(Evolution {
        hamiltonian: e.hamiltonian,
        basis,
        plan,
        idle: e.idle.map(|t| t.0),
    })
}

fn check_window(path: &str, w: &Option<[Time; 2]>, t_end: f64) -> Result<(), Invalid> {
    if let Some([a, b]) = w {
        if !(a.0 >= 0.0 && a.0 < b.0 && b.0 <= t_end + 1e-12) {
            return Err(invalid(path, format!("needs 0 <= start < end <= t_end ({t_end} us)")));
        }
    }
    Ok(())
}

/// Semantic checks and conversion to core types.
pub fn resolve(cfg: &Config) -> Result<Resolved, Invalid> {
    use WorkflowKind as W;
    let spec = chain_spec(&cfg.chain)?;
    let n = spec.n();
    let drive = cfg.drive.as_ref().map(drive_spec).transpose()?;
    let model = cfg.model.as_ref().map(ModelConfig::to_model);
    if let Some(m) = &model {
        m.validate().map_err(|e| invalid("model", e.to_string()))?;
        if let EffectiveModel::Qpxpq { k, .. } | EffectiveModel::Krt { k, .. } = m {
            if *k > spec.kmax() {
                return Err(invalid("model.k", format!("exceeds chain.kmax = {}", spec.kmax())));
            }
        }
    }
    let initial = cfg
        .initial
        .iter()
        .enumerate()
        .map(|(i, c)| initial_state(c, n, i))
        .collect::<Result<Vec<_>, _>>()?;
    let mut labels = std::collections::BTreeSet::new();
    for (i, s) in initial.iter().enumerate() {
        if !labels.insert(s.label.clone()) {
            return Err(invalid(&format!("initial.{i}.label"), format!("duplicate label '{}'", s.label)));
        }
    }
    if let Some(t) = cfg.threads {
        if t == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
    }
    let evolution = cfg.evolution.as_ref().map(|e| evolution(e, cfg)).transpose()?;
    let noise = cfg
        .noise
        .as_ref()
        .map(|c| {
            let spec = NoiseSpec {
                sigma_r: c.sigma_r.0,
                sigma_doppler: c.sigma_doppler.0,
                spam_g: c.spam_g,
                spam_r: c.spam_r,
                seed: cfg.seed,
                n_trajectories: c.n_trajectories,
                displacement: c.displacement,
            };
            spec.validate().map(|_| spec).map_err(|e| invalid("noise", e.to_string()))
        })
        .transpose()?;

    let sections = [
        ("fragment", cfg.fragment.is_some(), W::Fragment),
        ("scar", cfg.scar.is_some(), W::Scar),
        ("krt", cfg.krt.is_some(), W::KrtThermalization),
        ("subspaces", cfg.subspaces.is_some(), W::Subspaces),
        ("leakage", cfg.leakage.is_some(), W::Leakage),
        ("disorder", cfg.disorder.is_some(), W::Disorder),
    ];
    for (key, present, owner) in sections {
        if present && owner != cfg.workflow {
            return Err(invalid(key, format!("section belongs to workflow '{owner}', this run is '{}'", cfg.workflow)));
        }
    }
    if let Some(sweep) = &cfg.sweep {
        if sweep.param.is_empty() || sweep.param.len() > 2 {
            return Err(invalid("sweep.param", "sweep one or two parameters"));
        }
        for (i, p) in sweep.param.iter().enumerate() {
            if p.values.is_empty() {
                return Err(invalid(&format!("sweep.param.{i}.values"), "no values"));
            }
            if p.key.starts_with("sweep") || p.key == "workflow" || p.key.split('.').any(str::is_empty) {
                return Err(invalid(&format!("sweep.param.{i}.key"), format!("cannot sweep '{}'", p.key)));
            }
        }
    }

    let need_evolution = |what: &str| -> Result<&Evolution, Invalid> {
        evolution
            .as_ref()
            .ok_or_else(|| invalid("evolution", format!("workflow '{what}' needs an [evolution] section")))
    };
    let need_initial = |count: Option<usize>| -> Result<(), Invalid> {
        match count {
            _ if initial.is_empty() => Err(invalid("initial", "needs at least one [[initial]] state")),
            Some(c) if initial.len() != c => Err(invalid("initial", format!("needs exactly {c} [[initial]] state(s)"))),
            _ => Ok(()),
        }
    };
    match cfg.workflow {
        W::Fragment => {
            if model.is_none() {
                return Err(invalid("model", "workflow 'fragment' needs a [model] section"));
            }
            if let Some(f) = &cfg.fragment {
                if let Some([a, b]) = f.matrix_window {
                    if a >= b {
                        return Err(invalid("fragment.matrix_window", "start must be below end"));
                    }
                }
                if !(f.cell > 0.0) {
                    return Err(invalid("fragment.cell", "must be positive"));
                }
            }
        }
        W::Scar => {
            let e = need_evolution("scar")?;
            need_initial(Some(1))?;
            if let Some(s) = &cfg.scar {
                check_window("scar.fourier_window", &s.fourier_window, e.plan.t_end)?;
                if s.k == Some(0) {
                    return Err(invalid("scar.k", "must be at least 1"));
                }
            }
        }
        W::KrtThermalization => {
            let e = need_evolution("krt_thermalization")?;
            need_initial(Some(1))?;
            let k = cfg.krt.as_ref().map_or(2, |c| c.k);
            if k == 0 {
                return Err(invalid("krt.k", "must be at least 1"));
            }
            if let Some(c) = &cfg.krt {
                check_window("krt.late_window", &c.late_window, e.plan.t_end)?;
                if let Some(r) = c.v1_over_omega_f {
                    if !(r > 0.0) {
                        return Err(invalid("krt.v1_over_omega_f", "must be positive"));
                    }
                    if e.hamiltonian != HamiltonianKind::Ffm {
                        return Err(invalid("krt.v1_over_omega_f", "applies to the modulated drive only"));
                    }
                }
            }
            if e.hamiltonian == HamiltonianKind::Full {
                return Err(invalid("evolution.hamiltonian", "two-drive dynamics are 'effective' or 'ffm'"));
            }
            if e.hamiltonian == HamiltonianKind::Effective && !matches!(model, Some(EffectiveModel::Krt { .. })) {
                return Err(invalid("model.kind", "effective two-drive dynamics need kind = \"krt\""));
            }
        }
        W::Subspaces => {
            let e = need_evolution("subspaces")?;
            need_initial(None)?;
            if !matches!(model, Some(EffectiveModel::Krt { .. })) {
                return Err(invalid("model", "workflow 'subspaces' needs kind = \"krt\" for thermal values"));
            }
            if let Some(c) = &cfg.subspaces {
                check_window("subspaces.window", &c.window, e.plan.t_end)?;
            }
        }
        W::Leakage => {
            let e = need_evolution("leakage")?;
            need_initial(Some(1))?;
            if e.hamiltonian != HamiltonianKind::Ffm {
                return Err(invalid("evolution.hamiltonian", "workflow 'leakage' runs the modulated drive: use \"ffm\""));
            }
            if let Some(c) = &cfg.leakage {
                if c.k == 0 || c.k > spec.kmax() {
                    return Err(invalid("leakage.k", format!("must lie in 1..={}", spec.kmax())));
                }
                if c.v1_over_omega_f.is_some_and(|r| !(r > 0.0)) {
                    return Err(invalid("leakage.v1_over_omega_f", "must be positive"));
                }
            }
        }
        W::Disorder => {
            let e = need_evolution("disorder")?;
            need_initial(Some(1))?;
            if noise.is_none() {
                return Err(invalid("noise", "workflow 'disorder' needs a [noise] section"));
            }
            if e.hamiltonian == HamiltonianKind::Effective {
                return Err(invalid("evolution.hamiltonian", "noise acts on the full Hamiltonian: use \"full\" or \"ffm\""));
            }
            let order = cfg.disorder.as_ref().map_or(1, |d| d.metric_order);
            if order == 0 || order > spec.kmax() {
                return Err(invalid("disorder.metric_order", format!("must lie in 1..={}", spec.kmax())));
            }
        }
    }
    Ok(Resolved {
        workflow: cfg.workflow,
        spec,
        drive,
        model,
        initial,
        evolution,
        noise,
    })
}
