//! The figure-class workflows. Each turns a validated configuration into a
//! set of data files, heatmaps and scalar summaries.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write;
use std::sync::Arc;

use serde::Serialize;

use rydfrag::basis::{primary_block, Basis, ChainSpec, ProductState};
use rydfrag::disorder::{
    ensemble_trace, facilitation_manifold, front_growth, interaction_disorder, spread_radius, EnsembleDynamics,
    EnsembleObservable, EnsembleRequest, NoiseSpec,
};
use rydfrag::evolution::{apply_idle, evolve_ffm, evolve_static, EvolutionPlan, QuantumState, Trajectory};
use rydfrag::fragmentation::{
    connected_components, exponential_fit, find_frozen_states, frozen_state_count_scan, matrix_plot, sorted_basis,
};
use rydfrag::hamiltonian::{
    build_effective, build_ffm_with, build_krt_subarray, build_rydberg_with, ffm_effective_rabi, reachable_states,
    DriveSpec, EffectiveModel, FfmSpec, RydbergOptions,
};
use rydfrag::observables::{
    bipartite_entropy, fourier_spectrum, ground_density_of_product, ground_density_trace, mean_site_entropy_trace,
    microstate_histogram, single_site_entropy, site_expectations, staggered_magnetization_trace,
    staggered_of_product, trace_of, ObservableTrace, SubarraySpec,
};
use rydfrag::operator::{OperatorMatrix, TimeDependentOperator, DENSE_THRESHOLD};
use rydfrag::scars::{fit_oscillation, scar_scan, ScarFlagOptions};
use rydfrag::thermal::build_ensemble;

use crate::config::{BasisKind, Config, Evolution, HamiltonianKind, Initial, Resolved, WorkflowKind};
use crate::error::{CliError, Context};
use crate::output::{csv_table, Artifacts};
use crate::svg::heatmap;

/// Largest sector enumerated by breadth-first search.
const REACHABLE_LIMIT: usize = 1 << 22;

enum Dynamics {
    Static(OperatorMatrix),
    Ffm(TimeDependentOperator),
}

impl Dynamics {
    fn basis(&self) -> &Arc<Basis> {
        match self {
            Dynamics::Static(h) => h.basis(),
            Dynamics::Ffm(h) => h.basis(),
        }
    }

    fn evolve(&self, psi: &QuantumState, plan: &EvolutionPlan) -> Result<Trajectory, CliError> {
        match self {
            Dynamics::Static(h) => evolve_static(h, psi, plan).step("time evolution"),
            Dynamics::Ffm(h) => evolve_ffm(h, psi, plan).step("modulated-drive evolution"),
        }
    }
}

fn basis_for(
    kind: BasisKind,
    spec: &ChainSpec,
    model: Option<&EffectiveModel>,
    start: &ProductState,
) -> Result<(Arc<Basis>, bool), CliError> {
    let n = spec.n();
    let (states, truncate) = match kind {
        BasisKind::Full => return Ok((Arc::new(Basis::full(n).step("basis enumeration")?), false)),
        BasisKind::PrimaryBlock => (primary_block(spec), true),
        BasisKind::Reachable => {
            let model = model.expect("validated: reachable basis has a model");
            (reachable_states(model, spec, start, REACHABLE_LIMIT).step("sector search")?, false)
        }
        BasisKind::Facilitation => (facilitation_manifold(n, &start.excited_sites()).step("facilitation manifold")?, true),
    };
    Ok((Arc::new(Basis::from_states(n, states).step("basis construction")?), truncate))
}

fn build(
    ev: &Evolution,
    spec: &ChainSpec,
    drive: Option<&DriveSpec>,
    model: Option<&EffectiveModel>,
    start: &ProductState,
) -> Result<Dynamics, CliError> {
    let (basis, truncate) = basis_for(ev.basis, spec, model, start)?;
    let opts = RydbergOptions {
        allow_truncation: truncate,
        ..Default::default()
    };
    Ok(match ev.hamiltonian {
        HamiltonianKind::Effective => {
            let model = model.expect("validated: effective dynamics have a model");
            Dynamics::Static(build_effective(model, spec, basis).step("effective Hamiltonian")?)
        }
        HamiltonianKind::Full => {
            let drive = drive.expect("validated: full dynamics have a drive");
            Dynamics::Static(build_rydberg_with(spec, drive, basis, &opts).step("Rydberg Hamiltonian")?)
        }
        HamiltonianKind::Ffm => {
            let drive = drive.expect("validated: modulated dynamics have a drive");
            Dynamics::Ffm(build_ffm_with(spec, drive, basis, &opts).step("modulated Hamiltonian")?)
        }
    })
}

fn site_rows(traj: &Trajectory) -> Vec<Vec<f64>> {
    traj.states.iter().map(site_expectations).collect()
}

/// Occupation heatmap plus the `t,Q_1..Q_N` table.
fn site_outputs(out: &mut Artifacts, stem: &str, title: &str, traj: &Trajectory) {
    out.file(format!("{stem}.csv"), traj.to_csv());
    out.file(format!("{stem}.svg"), heatmap(title, &traj.times, &site_rows(traj), (0.0, 1.0)));
}

/// Columns sharing one time axis.
fn traces_csv(traces: &[&ObservableTrace]) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(traces.iter().map(|t| t.observable.clone()));
    let rows: Vec<Vec<String>> = (0..traces[0].len())
        .map(|k| {
            let mut row = vec![format!("{:.10}", traces[0].times[k])];
            row.extend(traces.iter().map(|t| format!("{:.12}", t.values[k])));
            row
        })
        .collect();
    csv_table(&header, &rows)
}

fn renamed(mut t: ObservableTrace, name: &str) -> ObservableTrace {
    t.observable = name.to_string();
    t
}

fn final_state(traj: &Trajectory, spec: &ChainSpec, ev: &Evolution) -> Result<QuantumState, CliError> {
    match ev.idle {
        Some(d) if d > 0.0 => apply_idle(traj.last(), spec, d).step("idle evolution"),
        _ => Ok(traj.last().clone()),
    }
}

fn late_window(t_end: f64, given: Option<[crate::units::Time; 2]>) -> (f64, f64) {
    given.map_or((0.9 * t_end, t_end), |[a, b]| (a.0, b.0))
}

fn window_stats(trace: &ObservableTrace, (t0, t1): (f64, f64)) -> (f64, f64) {
    let v: Vec<f64> = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(_, v)| *v)
        .collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;
    (mean, var.sqrt())
}

/// Rabi scale of the run: the drive amplitude, or the model amplitude.
fn rate(res: &Resolved, ev: &Evolution, cfg: &Config) -> f64 {
    match ev.hamiltonian {
        HamiltonianKind::Effective => cfg.model.as_ref().map_or(f64::NAN, |m| m.rate()),
        _ => res.drive.as_ref().map_or(f64::NAN, |d| d.omega),
    }
}

/// `(Ω_F, Ω_F')` of the two-drive description of the run.
fn two_drive_rabi(res: &Resolved) -> (f64, f64) {
    if let Some(&EffectiveModel::Krt { omega_f, omega_fp, .. }) = res.model.as_ref() {
        if res.evolution.as_ref().is_some_and(|e| e.hamiltonian == HamiltonianKind::Effective) {
            return (omega_f, omega_fp);
        }
    }
    let drive = res.drive.as_ref().expect("validated: modulated runs have a drive");
    let alpha = drive.ffm.as_ref().map_or(0.0, FfmSpec::alpha);
    ffm_effective_rabi(drive.omega, alpha)
}

/// Put `V_1` at `ratio·Ω_F` and the modulation at `ω_d = V_1`, keeping `α`.
fn apply_ratio(res: &mut Resolved, ratio: f64, context: &str) -> Result<(), CliError> {
    let (omega_f, _) = two_drive_rabi(res);
    let v1 = ratio * omega_f;
    let s = &res.spec;
    res.spec = ChainSpec::from_order(s.n(), s.boundary(), s.spacing(), 2, v1, s.kmax()).step(context)?;
    let drive = res.drive.as_mut().expect("validated: modulated runs have a drive");
    let ffm = drive.ffm.as_mut().expect("validated: modulated runs have ffm");
    let alpha = ffm.alpha();
    ffm.omega_d = v1;
    ffm.delta0 = alpha * v1;
    Ok(())
}

/// Run the configured workflow.
pub fn run_workflow(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    match res.workflow {
        WorkflowKind::Fragment => fragment(cfg, res),
        WorkflowKind::Scar => scar(cfg, res),
        WorkflowKind::KrtThermalization => krt_thermalization(cfg, res),
        WorkflowKind::Subspaces => subspaces(cfg, res),
        WorkflowKind::Leakage => leakage(cfg, res),
        WorkflowKind::Disorder => disorder(cfg, res),
    }
}

fn fragment(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let opts = cfg.fragment.clone().unwrap_or_default();
    let model = res.model.as_ref().expect("validated: fragment has a model");
    let spec = &res.spec;
    let basis = Arc::new(Basis::full(spec.n()).step("basis enumeration")?);
    let h = build_effective(model, spec, basis).step("effective Hamiltonian")?;
    let d = connected_components(&h);
    let labels = d.labels(&h, spec);
    let mut out = Artifacts::default();
    out.file("components.txt", d.export_summary(&labels, "members.txt"));
    if opts.members {
        out.file("members.txt", d.members_text(&h));
    }
    let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
    for s in d.sizes() {
        *by_size.entry(s).or_default() += 1;
    }
    let rows: Vec<Vec<String>> = by_size.iter().map(|(s, c)| vec![s.to_string(), c.to_string()]).collect();
    out.file("component_sizes.csv", csv_table(&["size".into(), "count".into()], &rows));

    let order = sorted_basis(&h, spec);
    let [a, b] = opts.matrix_window.unwrap_or([0, h.dim().min(256)]);
    let window = a.min(h.dim())..b.min(h.dim());
    let plot = matrix_plot(&h, &order, window).step("matrix plot")?;
    out.file("matrix.svg", plot.to_svg(opts.cell));
    out.file("matrix.txt", plot.to_text());

    let frozen = find_frozen_states(&h);
    out.file("frozen.txt", frozen.iter().map(|s| format!("{s}\n")).collect::<String>());
    out.scalar("dim", h.dim() as f64);
    out.scalar("components", d.len() as f64);
    out.scalar("largest_component", d.sizes().into_iter().max().unwrap_or(0) as f64);
    out.scalar("frozen_states", frozen.len() as f64);
    out.scalar("crossing_weight", d.crossing_weight(&h));
    out.scalar("cross_group_mass", order.cross_group_mass(&h));
    for init in &res.initial {
        if let Some(c) = d.component_of_state(&h, &init.state) {
            out.scalar(format!("{}_component_dim", init.label), d.component(c).len() as f64);
        }
    }
    if !opts.frozen_scan.is_empty() {
        let counts = frozen_state_count_scan(opts.frozen_scan.iter().copied(), |n| {
            let s = spec.clone().with_sites(n);
            build_effective(model, &s, Arc::new(Basis::full(n)?))
        })
        .step("frozen-state scan")?;
        let rows: Vec<Vec<String>> = counts.iter().map(|(n, c)| vec![n.to_string(), c.to_string()]).collect();
        out.file("frozen_scan.csv", csv_table(&["sites".into(), "frozen".into()], &rows));
        if let Some(fit) = exponential_fit(&counts) {
            out.scalar("frozen_growth_rate", fit.slope);
            out.scalar("frozen_fit_r2", fit.r_squared);
        }
    }
    Ok(out)
}

fn scar(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let ev = res.evolution.as_ref().expect("validated");
    let init = &res.initial[0];
    let spec = &res.spec;
    let n = spec.n();
    let opts = cfg.scar.clone().unwrap_or_default();
    let k = opts.k.unwrap_or(match res.model {
        Some(EffectiveModel::Qpxpq { k, .. } | EffectiveModel::Krt { k, .. }) => k,
        Some(EffectiveModel::Pxp { .. } | EffectiveModel::Qxq { .. }) => 1,
        _ => 2,
    });
    let dynamics = build(ev, spec, res.drive.as_ref(), res.model.as_ref(), &init.state)?;
    let psi0 = QuantumState::product(dynamics.basis().clone(), &init.state).step("initial state")?;
    let traj = dynamics.evolve(&psi0, &ev.plan)?;

    let a_prime = SubarraySpec::a_prime(n, k);
    let a = SubarraySpec::a(n, k);
    let m_ap = renamed(staggered_magnetization_trace(&traj, &a_prime).step("observables")?, "m_a_prime");
    let m_a = if a.is_empty() { m_ap.clone() } else { staggered_magnetization_trace(&traj, &a).step("observables")? };
    let m_a = renamed(m_a, "m_a");
    let mut traces = vec![m_a.clone(), m_ap];
    if k >= 2 {
        traces.push(renamed(ground_density_trace(&traj, &SubarraySpec::other(n, k, 1)).step("observables")?, "p_b"));
    }
    if k >= 3 {
        traces.push(renamed(ground_density_trace(&traj, &SubarraySpec::other(n, k, 2)).step("observables")?, "p_c"));
    }
    traces.push(renamed(mean_site_entropy_trace(&traj, &a_prime).step("observables")?, "site_entropy"));
    let cut = (n / 2).max(1);
    traces.push(trace_of(&traj, "half_chain_entropy", None, |s| bipartite_entropy(s, cut)).step("observables")?);

    let mut out = Artifacts::default();
    out.file("traces.csv", traces_csv(&traces.iter().collect::<Vec<_>>()));
    site_outputs(&mut out, "sites", &format!("<Q_i>(t) from {}", init.label), &traj);

    let window = opts.fourier_window.map(|[a, b]| (a.0, b.0));
    let spectrum = fourier_spectrum(&m_a, window).step("Fourier spectrum")?;
    out.file("spectrum.csv", spectrum.to_csv());
    let omega_mhz = rate(res, ev, cfg) / (2.0 * PI);
    if let Some((f, _)) = spectrum.peak() {
        out.scalar("peak_mhz", f);
        out.scalar("peak_over_omega", f / omega_mhz);
    }
    out.scalar("spectrum_resolution_mhz", spectrum.resolution);

    let fit = fit_oscillation(&m_a);
    out.file("fit.txt", fit.summary());
    out.scalar("fit_converged", fit.converged() as u8 as f64);
    if fit.converged() {
        out.scalar("fit_frequency_mhz", fit.frequency);
        out.scalar("fit_tau_us", fit.tau);
        out.scalar("revival_time_us", fit.revival_time());
    }
    for t in &traces {
        if t.observable.starts_with("p_") {
            out.scalar(format!("min_{}", t.observable), t.min());
        }
    }

    let mut notes = Vec::new();
    match &dynamics {
        Dynamics::Static(h) => {
            let d = connected_components(h);
            let idx = d.component_of_state(h, &init.state).expect("initial state is in the basis");
            let comp = d.component(idx);
            out.scalar("sector_dim", comp.len() as f64);
            let cap = opts.eigen_cap.unwrap_or(DENSE_THRESHOLD).min(DENSE_THRESHOLD);
            if comp.len() <= cap {
                let scan = scar_scan(h, comp, &init.state, &ScarFlagOptions::default()).step("eigenstate scan")?;
                out.file("eigenstates.csv", scan.to_csv());
                out.scalar("flagged_eigenstates", scan.flagged().count() as f64);
                if let Some(sp) = scan.spacing {
                    out.scalar("tower_spacing", sp.mean);
                    out.scalar("tower_spacing_over_omega", sp.mean / rate(res, ev, cfg));
                }
            } else {
                notes.push(format!("eigenstate scan skipped: sector dimension {} exceeds {cap}", comp.len()));
            }
        }
        Dynamics::Ffm(_) => notes.push("eigenstate scan skipped: time-dependent Hamiltonian".to_string()),
    }
    out.json("summary.json", &Summary::new(&out, notes));
    Ok(out)
}

#[derive(Serialize)]
struct Summary {
    scalars: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

impl Summary {
    fn new(out: &Artifacts, notes: Vec<String>) -> Self {
        Self {
            scalars: out.scalars.clone(),
            notes,
        }
    }
}

/// Microcanonical values on the open odd-sublattice chain of `n_sub` atoms,
/// excluding the all-ground state.
struct ThermalLines {
    members: usize,
    staggered: f64,
    ground: f64,
    entropy: f64,
    report: String,
}

fn thermal_lines(n_sub: usize, omega_f: f64, omega_fp: f64, width: f64) -> Result<ThermalLines, CliError> {
    let h = build_krt_subarray(n_sub, omega_f, omega_fp).step("subarray Hamiltonian")?;
    let nonground: Vec<usize> = (0..h.dim()).filter(|&i| h.basis().get(i).excitation_count() > 0).collect();
    let ens = build_ensemble(&h, &nonground, 0.0, width * omega_f).step("microcanonical ensemble")?;
    let sub = SubarraySpec::custom((1..=n_sub).collect());
    let staggered = ens.diagonal_expectation(|s| staggered_of_product(s, &sub)).step("thermal average")?;
    let ground = ens.diagonal_expectation(|s| ground_density_of_product(s, &sub)).step("thermal average")?;
    let entropy = ens
        .expectation(|m| {
            let mut acc = 0.0;
            for i in 1..=n_sub {
                acc += single_site_entropy(m, i)?;
            }
            Ok(acc / n_sub as f64)
        })
        .step("thermal average")?;
    let report = ens.report(&[("staggered_magnetization", staggered), ("ground_density", ground), ("site_entropy", entropy)]);
    Ok(ThermalLines {
        members: ens.len(),
        staggered,
        ground,
        entropy,
        report,
    })
}

fn krt_thermalization(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let mut res = res.clone();
    let opts = cfg.krt.clone().unwrap_or_default();
    if let Some(r) = opts.v1_over_omega_f {
        apply_ratio(&mut res, r, "chain from V1/Omega_F")?;
    }
    let ev = res.evolution.as_ref().expect("validated");
    let init = &res.initial[0];
    let spec = &res.spec;
    let n = spec.n();
    let k = opts.k;
    let (omega_f, omega_fp) = two_drive_rabi(&res);
    let dynamics = build(ev, spec, res.drive.as_ref(), res.model.as_ref(), &init.state)?;
    let psi0 = QuantumState::product(dynamics.basis().clone(), &init.state).step("initial state")?;
    let traj = dynamics.evolve(&psi0, &ev.plan)?;

    let a_prime = SubarraySpec::a_prime(n, k);
    let m = renamed(staggered_magnetization_trace(&traj, &a_prime).step("observables")?, "m_a_prime");
    let p_b = renamed(ground_density_trace(&traj, &SubarraySpec::other(n, k, 1)).step("observables")?, "p_b");
    let s = renamed(mean_site_entropy_trace(&traj, &a_prime).step("observables")?, "site_entropy");
    let mut out = Artifacts::default();
    out.file("traces.csv", traces_csv(&[&m, &p_b, &s]));
    site_outputs(&mut out, "sites", &format!("<Q_i>(t) from {}", init.label), &traj);

    let krt = EffectiveModel::Krt { k, omega_f, omega_fp };
    let reference = reachable_states(&krt, spec, &init.state, REACHABLE_LIMIT).step("sector search")?;
    let last = final_state(&traj, spec, ev)?;
    let hist = microstate_histogram(&last, &init.state, &reference).step("microstate histogram")?;
    out.file("histogram.csv", hist.to_csv());
    let probs: Vec<f64> = hist.entries.iter().map(|e| e.probability).collect();
    let (lo, hi) = probs.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &p| (l.min(p), h.max(p)));
    out.scalar("sector_dim", reference.len() as f64);
    out.scalar("histogram_leakage", hist.leakage);
    out.scalar("histogram_max_over_min", if lo > 0.0 { hi / lo } else { f64::INFINITY });

    let lines = thermal_lines(a_prime.len(), omega_f, omega_fp, opts.thermal_window)?;
    out.file("thermal.json", format!("{}\n", lines.report));
    out.scalar("thermal_members", lines.members as f64);
    out.scalar("thermal_m_a_prime", lines.staggered);
    out.scalar("thermal_p_g_a_prime", lines.ground);
    out.scalar("thermal_site_entropy", lines.entropy);

    let w = late_window(ev.plan.t_end, opts.late_window);
    let (mm, mf) = window_stats(&m, w);
    out.scalar("late_m_a_prime", mm);
    out.scalar("late_m_fluctuation", mf);
    out.scalar("late_p_b", window_stats(&p_b, w).0);
    out.scalar("late_site_entropy", window_stats(&s, w).0);
    out.scalar("min_p_b", p_b.min());
    out.scalar("omega_f", omega_f);
    out.scalar("omega_fp", omega_fp);
    out.json("summary.json", &Summary::new(&out, Vec::new()));
    Ok(out)
}

#[derive(Serialize)]
struct SubspaceReport {
    label: String,
    state: String,
    sector_dim: usize,
    energy: Option<f64>,
    own_sites: Vec<usize>,
    cross_parity: f64,
    ground_probability: f64,
    thermal_ground_probability: f64,
    thermal_members: usize,
}

fn window_profile(traj: &Trajectory, (t0, t1): (f64, f64)) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&traj.states)
        .filter(|(t, _)| **t >= t0 - 1e-12 && **t <= t1 + 1e-12)
        .map(|(_, s)| site_expectations(s))
        .collect();
    let n = traj.states[0].basis().n_sites();
    (0..n).map(|i| rows.iter().map(|r| r[i]).sum::<f64>() / rows.len().max(1) as f64).collect()
}

fn subspaces(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let ev = res.evolution.as_ref().expect("validated");
    let opts = cfg.subspaces.clone().unwrap_or_default();
    let spec = &res.spec;
    let n = spec.n();
    let (omega_f, omega_fp) = two_drive_rabi(res);
    let w = late_window(ev.plan.t_end, opts.window);
    let mut out = Artifacts::default();
    let mut profiles = Vec::new();
    let mut reports = Vec::new();
    for Initial { label, state } in &res.initial {
        let dynamics = build(ev, spec, res.drive.as_ref(), res.model.as_ref(), state)?;
        let psi0 = QuantumState::product(dynamics.basis().clone(), state).step("initial state")?;
        let energy = match &dynamics {
            Dynamics::Static(h) => Some(psi0.expectation(h).step("energy")?),
            Dynamics::Ffm(_) => None,
        };
        let traj = dynamics.evolve(&psi0, &ev.plan)?;
        site_outputs(&mut out, &format!("sites_{label}"), &format!("<Q_i>(t) from {label}"), &traj);
        let q = window_profile(&traj, w);
        let parity = state.excited_sites().first().map_or(1, |s| s % 2);
        let own: Vec<usize> = (1..=n).filter(|i| i % 2 == parity).collect();
        let cross = (1..=n).filter(|i| i % 2 != parity).map(|i| q[i - 1]).fold(0.0, f64::max);
        let pg = 1.0 - own.iter().map(|&i| q[i - 1]).sum::<f64>() / own.len() as f64;
        let lines = thermal_lines(own.len(), omega_f, omega_fp, opts.thermal_window)?;
        out.scalar(format!("{label}_cross_parity"), cross);
        out.scalar(format!("{label}_p_g"), pg);
        out.scalar(format!("{label}_thermal_p_g"), lines.ground);
        out.scalar(format!("{label}_sector_dim"), dynamics.basis().len() as f64);
        if let Some(e) = energy {
            out.scalar(format!("{label}_energy"), e);
        }
        reports.push(SubspaceReport {
            label: label.clone(),
            state: state.to_string(),
            sector_dim: dynamics.basis().len(),
            energy,
            own_sites: own,
            cross_parity: cross,
            ground_probability: pg,
            thermal_ground_probability: lines.ground,
            thermal_members: lines.members,
        });
        profiles.push((label.clone(), q));
    }
    let mut header = vec!["site".to_string()];
    header.extend(profiles.iter().map(|(l, _)| format!("q_{l}")));
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut r = vec![(i + 1).to_string()];
            r.extend(profiles.iter().map(|(_, q)| format!("{:.12}", q[i])));
            r
        })
        .collect();
    out.file("profiles.csv", csv_table(&header, &rows));
    #[derive(Serialize)]
    struct Report {
        window_us: [f64; 2],
        states: Vec<SubspaceReport>,
        scalars: BTreeMap<String, f64>,
    }
    let report = Report {
        window_us: [w.0, w.1],
        states: reports,
        scalars: out.scalars.clone(),
    };
    out.json("summary.json", &report);
    Ok(out)
}

fn leakage(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let mut res = res.clone();
    let opts = cfg.leakage.clone().unwrap_or_default();
    if let Some(r) = opts.v1_over_omega_f {
        apply_ratio(&mut res, r, "chain from V1/Omega_F")?;
    }
    let ev = res.evolution.as_ref().expect("validated");
    let init = &res.initial[0];
    let spec = &res.spec;
    let n = spec.n();
    let (omega_f, _) = two_drive_rabi(&res);
    let dynamics = build(ev, spec, res.drive.as_ref(), res.model.as_ref(), &init.state)?;
    let psi0 = QuantumState::product(dynamics.basis().clone(), &init.state).step("initial state")?;
    let traj = dynamics.evolve(&psi0, &ev.plan)?;
    let p_b = renamed(ground_density_trace(&traj, &SubarraySpec::other(n, opts.k, 1)).step("observables")?, "p_b");
    let m = renamed(
        staggered_magnetization_trace(&traj, &SubarraySpec::a_prime(n, opts.k)).step("observables")?,
        "m_a_prime",
    );
    let mut out = Artifacts::default();
    out.file("traces.csv", traces_csv(&[&p_b, &m]));
    site_outputs(&mut out, "sites", &format!("<Q_i>(t) from {}", init.label), &traj);
    out.scalar("min_p_b", p_b.min());
    out.scalar("v1_over_omega_f", spec.coupling(2) / omega_f);
    out.scalar("window_cycles", ev.plan.t_end * omega_f / (2.0 * PI));
    out.scalar("omega_f", omega_f);
    out.json("summary.json", &Summary::new(&out, Vec::new()));
    Ok(out)
}

fn disorder(cfg: &Config, res: &Resolved) -> Result<Artifacts, CliError> {
    let ev = res.evolution.as_ref().expect("validated");
    let noise = res.noise.as_ref().expect("validated");
    let init = &res.initial[0];
    let spec = &res.spec;
    let n = spec.n();
    let drive = res.drive.clone().expect("validated");
    let order = cfg.disorder.as_ref().map_or(1, |d| d.metric_order);
    let (basis, truncate) = basis_for(ev.basis, spec, res.model.as_ref(), &init.state)?;
    let dynamics = match ev.hamiltonian {
        HamiltonianKind::Ffm => EnsembleDynamics::Ffm(drive.clone()),
        _ => EnsembleDynamics::Static(drive.clone()),
    };
    let all = SubarraySpec::custom((1..=n).collect());
    let observables = [
        EnsembleObservable::GroundDensity(all.clone()),
        EnsembleObservable::StaggeredMagnetization(all),
    ];
    let request = |noise: &NoiseSpec| -> Result<_, CliError> {
        ensemble_trace(&EnsembleRequest {
            spec,
            dynamics: dynamics.clone(),
            basis: basis.clone(),
            initial: init.state,
            plan: &ev.plan,
            noise,
            observables: &observables,
            truncate,
        })
        .step("disorder ensemble")
    };
    let noisy = request(noise)?;
    let clean = request(&NoiseSpec::clean(noise.seed, 1))?;

    let mut out = Artifacts::default();
    out.file("sites.csv", noisy.site_csv());
    out.file("sites.svg", heatmap("ensemble <Q_i>(t)", &noisy.times, &noisy.site_mean, (0.0, 1.0)));
    out.file("sites_clean.svg", heatmap("clean <Q_i>(t)", &clean.times, &clean.site_mean, (0.0, 1.0)));
    for t in &noisy.traces {
        out.file(format!("ensemble_{}.csv", t.observable.to_lowercase()), t.to_csv());
    }
    let seeds = init.state.excited_sites();
    let radius: Vec<f64> = noisy.site_mean.iter().map(|q| spread_radius(q, &seeds)).collect();
    let clean_radius: Vec<f64> = clean.site_mean.iter().map(|q| spread_radius(q, &seeds)).collect();
    let mut text = String::from("t,radius,clean_radius\n");
    for ((t, r), c) in noisy.times.iter().zip(&radius).zip(&clean_radius) {
        let _ = writeln!(text, "{t:.9},{r:.12},{c:.12}");
    }
    out.file("radius.csv", text);
    let growth = front_growth(&noisy.times, &radius).step("front growth")?;
    let metric = interaction_disorder(spec, noise, order, drive.omega).step("interaction disorder")?;
    out.scalar("sigma_v", metric.sigma_v);
    out.scalar("sigma_v_over_omega", metric.metric);
    out.scalar("radius_start", radius[0]);
    out.scalar("radius_end", *radius.last().unwrap());
    out.scalar("clean_radius_end", *clean_radius.last().unwrap());
    out.scalar("early_rate", growth.early_rate);
    out.scalar("late_rate", growth.late_rate);
    out.scalar("ballistic", growth.is_ballistic() as u8 as f64);
    out.scalar("monotonic", growth.monotonic as u8 as f64);
    out.scalar("n_trajectories", noisy.n_trajectories as f64);
    out.scalar("resampled", noisy.resampled as f64);
    out.scalar("basis_dim", basis.len() as f64);
    out.json("summary.json", &Summary::new(&out, Vec::new()));
    Ok(out)
}
