//! Configurations for each figure class. A run file naming a preset
//! inherits every value it does not set itself.

pub const NAMES: [&str; 8] = [
    "fig2_qxq",
    "fig2_z4",
    "fig2_z6",
    "fig3_fragment",
    "fig4_krt",
    "fig5_subspaces",
    "fig8_leakage",
    "fig9_disorder",
];

const FIG2_QXQ: &str = r#"
workflow = "scar"
name = "fig2_qxq"

[chain]
sites = 13

[model]
kind = "qxq"
omega = "1.45 MHz"

[evolution]
hamiltonian = "effective"
t_end = "3 us"

[scar]
k = 1

[[initial]]
label = "z2"
period = 2
"#;

const FIG2_Z4: &str = r#"
workflow = "scar"
name = "fig2_z4"

[chain]
sites = 13
spacing = "3.73 um"
v1 = "5 MHz"
kmax = 3

[drive]
omega = "1.45 MHz"
delta = "10 MHz"

[evolution]
hamiltonian = "full"
t_end = "3 us"
method = "krylov"

[scar]
k = 2

[[initial]]
label = "z4"
period = 4
"#;

const FIG2_Z6: &str = r#"
workflow = "scar"
name = "fig2_z6"

[chain]
sites = 19
kmax = 3

[model]
kind = "qpxpq"
k = 3
omega = "1.45 MHz"

[evolution]
hamiltonian = "effective"
t_end = "3 us"

[scar]
k = 3

[[initial]]
label = "z6"
period = 6
"#;

const FIG3_FRAGMENT: &str = r#"
workflow = "fragment"
name = "fig3_fragment"

[chain]
sites = 13
kmax = 3

[model]
kind = "qpxpq"
k = 2
omega = "1 MHz"

[fragment]
matrix_window = [0, 610]
frozen_scan = [6, 7, 8, 9, 10, 11, 12, 13, 14]

[[initial]]
label = "z4"
period = 4
"#;

const FIG4_KRT: &str = r#"
workflow = "krt_thermalization"
name = "fig4_krt"

[chain]
sites = 13
spacing = "3.73 um"
v1 = "5 MHz"
kmax = 3

[drive]
omega = "1.48 MHz"

[drive.ffm]
alpha = 2.4
omega_d = "5 MHz"

[evolution]
hamiltonian = "ffm"
t_end = "3 us"

[krt]
k = 2
thermal_window = 0.24
v1_over_omega_f = 7.9

[[initial]]
label = "z4"
period = 4
"#;

const FIG5_SUBSPACES: &str = r#"
workflow = "subspaces"
name = "fig5_subspaces"

[chain]
sites = 13
kmax = 3

[model]
kind = "krt"
k = 2
omega_f = "0.63 MHz"
omega_fp = "0.756 MHz"

[evolution]
hamiltonian = "effective"
t_end = "3 us"
samples = 301

[subspaces]
window = ["2.7 us", "3 us"]
thermal_window = 0.24

[[initial]]
label = "even"
sites = [2, 8, 12]

[[initial]]
label = "odd"
sites = [3, 9, 13]
"#;

// Three Rabi cycles of Ω_F = J_2(2.4) · 1.48 MHz.
const FIG8_LEAKAGE: &str = r#"
workflow = "leakage"
name = "fig8_leakage"

[chain]
sites = 13
spacing = "3.73 um"
v1 = "5 MHz"
kmax = 3

[drive]
omega = "1.48 MHz"

[drive.ffm]
alpha = 2.4
omega_d = "5 MHz"

[evolution]
hamiltonian = "ffm"
t_end = "4.703 us"

[leakage]
k = 2
v1_over_omega_f = 7.9

[sweep]
[[sweep.param]]
key = "leakage.v1_over_omega_f"
values = [3.0, 5.0, 7.9, 12.0]

[[initial]]
label = "z4"
period = 4
"#;

const FIG9_DISORDER: &str = r#"
workflow = "disorder"
name = "fig9_disorder"
seed = 2024

[chain]
sites = 15
spacing = "7.46 um"
v0 = "5 MHz"
kmax = 2

[drive]
omega = "1.37 MHz"
delta = "5 MHz"

[evolution]
hamiltonian = "full"
basis = "facilitation"
t_end = "0.5 us"
samples = 11
method = "krylov"

[noise]
sigma_r = "0.087 um"
spam_g = 0.99
spam_r = 0.96
n_trajectories = 200

[disorder]
metric_order = 1

[[initial]]
label = "pair"
sites = [5, 11]
"#;

pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "fig2_qxq" => FIG2_QXQ,
        "fig2_z4" => FIG2_Z4,
        "fig2_z6" => FIG2_Z6,
        "fig3_fragment" => FIG3_FRAGMENT,
        "fig4_krt" => FIG4_KRT,
        "fig5_subspaces" => FIG5_SUBSPACES,
        "fig8_leakage" => FIG8_LEAKAGE,
        "fig9_disorder" => FIG9_DISORDER,
        _ => return None,
    })
}

pub fn description(name: &str) -> &'static str {
    match name {
        "fig2_qxq" => "QXQ scar from the Z2 state, 13 sites",
        "fig2_z4" => "Z4 scar under the full Hamiltonian, V1 = 5 MHz, 13 sites",
        "fig2_z6" => "Z6 scar under QPXPQ(3), 19 sites",
        "fig3_fragment" => "QPXPQ(2) fragmentation and sorted matrix plot, 13 sites",
        "fig4_krt" => "modulated-drive thermalization from Z4 at V1/Omega_F = 7.9",
        "fig5_subspaces" => "two equal-energy starts in different Krylov sectors",
        "fig8_leakage" => "min P_B versus V1/Omega_F in {3, 5, 7.9, 12}",
        "fig9_disorder" => "15-site facilitated spread with position disorder and SPAM",
        _ => "",
    }
}
