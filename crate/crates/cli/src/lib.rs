//! Configuration-driven workflows on top of the `rydfrag` core: TOML
//! configs with unit-bearing quantities, figure presets, and run
//! directories with hashed manifests.

pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod svg;
pub mod units;
pub mod workflows;

use std::collections::BTreeSet;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use config::{key_path, Config, Resolved, Source};
use error::CliError;
use output::{csv_table, output_root, run_dir_name, sha256_hex, write_run, Artifacts, Manifest};

fn read_source(path: &Path) -> Result<Source, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path.display(), e))?;
    Ok(Source::new(path.display().to_string(), text))
}

fn apply_threads(cfg: &Config) {
    if let Some(n) = cfg.threads {
        if std::env::var_os("RAYON_NUM_THREADS").is_none() {
            std::env::set_var("RAYON_NUM_THREADS", n.to_string());
        }
    }
}

fn manifest(command: &str, cfg: &Config) -> (Manifest, String) {
    let text = config::canonical_text(cfg);
    let sha = sha256_hex(text.as_bytes());
    let m = Manifest {
        command: command.to_string(),
        workflow: cfg.workflow.name().to_string(),
        preset: cfg.preset.clone(),
        seed: cfg.seed,
        versions: output::versions(),
        config_sha256: sha.clone(),
        config: text,
        files: Vec::new(),
        scalars: Default::default(),
    };
    (m, sha)
}

fn run_dir(cfg: &Config, sha: &str) -> PathBuf {
    let name = cfg.name.clone().unwrap_or_else(|| cfg.workflow.name().to_string());
    output_root().join(run_dir_name(&name, sha))
}

/// Parse and validate a config file; returns a one-paragraph description.
pub fn validate(path: &Path) -> Result<String, CliError> {
    let src = read_source(path)?;
    let (cfg, res) = config::load(&src)?;
    if let Some(sweep) = &cfg.sweep {
        scan_points(&src, &cfg)?;
        let mut out = describe(&cfg, &res);
        let _ = writeln!(out, "sweep: {} point(s)", sweep.param.iter().map(|p| p.values.len()).product::<usize>());
        return Ok(out);
    }
    Ok(describe(&cfg, &res))
}

fn describe(cfg: &Config, res: &Resolved) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "ok: workflow {} on {} sites ({:?} boundary)", cfg.workflow, res.spec.n(), res.spec.boundary());
    if let Some(p) = &cfg.preset {
        let _ = writeln!(out, "preset: {p}");
    }
    for i in &res.initial {
        let _ = writeln!(out, "initial {}: {}", i.label, i.state);
    }
    if let Some(ev) = &res.evolution {
        let _ = writeln!(
            out,
            "evolution: {:?} Hamiltonian, {:?} basis, t_end {} us, {} samples",
            ev.hamiltonian,
            ev.basis,
            ev.plan.t_end,
            ev.plan.sample_times.len()
        );
    }
    out
}

/// Run one workflow and write its run directory; returns the directory.
pub fn run(path: &Path) -> Result<PathBuf, CliError> {
    let src = read_source(path)?;
    let (cfg, res) = config::load(&src)?;
    if cfg.sweep.is_some() {
        return Err(src.schema_error(&key_path("sweep"), "sweeps are run with `scan`, not `run`"));
    }
    apply_threads(&cfg);
    let artifacts = workflows::run_workflow(&cfg, &res)?;
    let (m, sha) = manifest("run", &cfg);
    let dir = run_dir(&cfg, &sha);
    write_run(&dir, artifacts, m)?;
    Ok(dir)
}

struct Point {
    values: Vec<(String, toml::Value)>,
    cfg: Config,
    res: Resolved,
}

/// Every grid point of the sweep, validated.
fn scan_points(src: &Source, cfg: &Config) -> Result<Vec<Point>, CliError> {
    let Some(sweep) = &cfg.sweep else {
        return Err(src.schema_error(&key_path("workflow"), "`scan` needs a [[sweep.param]] section"));
    };
    let mut base = config::merged_table(src)?;
    base.remove("sweep");
    let mut grid: Vec<Vec<(usize, toml::Value)>> = vec![Vec::new()];
    for (i, p) in sweep.param.iter().enumerate() {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                p.values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((i, v.clone()));
                    next
                })
            })
            .collect();
    }
    let mut points = Vec::with_capacity(grid.len());
    for combo in grid {
        let mut table = base.clone();
        let at = |i: usize| key_path(&format!("sweep.param.{i}.values"));
        for (i, v) in &combo {
            let key = &sweep.param[*i].key;
            config::set_path(&mut table, key, v.clone()).map_err(|m| src.schema_error(&at(*i), m))?;
        }
        let values: Vec<(String, toml::Value)> =
            combo.iter().map(|(i, v)| (sweep.param[*i].key.clone(), v.clone())).collect();
        let label = || values.iter().map(|(k, v)| format!("{k} = {v}")).collect::<Vec<_>>().join(", ");
        let first = combo.first().map_or(0, |(i, _)| *i);
        let pcfg = config::from_table(src, table).map_err(|e| match e {
            CliError::Schema { message, .. } => src.schema_error(&at(first), format!("at {}: {message}", label())),
            other => other,
        })?;
        let res = config::resolve(&pcfg)
            .map_err(|e| src.schema_error(&at(first), format!("at {}: {}", label(), e.message)))?;
        points.push(Point { values, cfg: pcfg, res });
    }
    Ok(points)
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Run the workflow at every sweep point into one run directory.
pub fn scan(path: &Path) -> Result<PathBuf, CliError> {
    let src = read_source(path)?;
    let (cfg, _) = config::load(&src)?;
    let points = scan_points(&src, &cfg)?;
    apply_threads(&cfg);
    let mut all = Artifacts::default();
    let mut results = Vec::with_capacity(points.len());
    for (k, p) in points.iter().enumerate() {
        let a = workflows::run_workflow(&p.cfg, &p.res)?;
        results.push(a.scalars.clone());
        all.absorb(&format!("points/{k:03}"), a);
    }
    let keys: Vec<String> = cfg.sweep.as_ref().map_or(Vec::new(), |s| s.param.iter().map(|p| p.key.clone()).collect());
    let scalar_keys: BTreeSet<&String> = results.iter().flat_map(|r| r.keys()).collect();
    let mut header = vec!["point".to_string()];
    header.extend(keys.iter().cloned());
    header.extend(scalar_keys.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(k, (p, r))| {
            let mut row = vec![format!("{k:03}")];
            row.extend(p.values.iter().map(|(_, v)| value_text(v)));
            row.extend(scalar_keys.iter().map(|s| r.get(*s).map_or(String::new(), |x| format!("{x:.12}"))));
            row
        })
        .collect();
    all.file("scan.csv", csv_table(&header, &rows));
    #[derive(serde::Serialize)]
    struct ScanPoint<'a> {
        directory: String,
        parameters: std::collections::BTreeMap<&'a str, String>,
        scalars: &'a std::collections::BTreeMap<String, f64>,
    }
    let listing: Vec<ScanPoint> = points
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(k, (p, r))| ScanPoint {
            directory: format!("points/{k:03}"),
            parameters: p.values.iter().map(|(key, v)| (key.as_str(), value_text(v))).collect(),
            scalars: r,
        })
        .collect();
    all.json("scan.json", &listing);
    let (m, sha) = manifest("scan", &cfg);
    let dir = run_dir(&cfg, &sha);
    write_run(&dir, all, m)?;
    Ok(dir)
}

/// Workflow kinds and presets, one per line.
pub fn list_workflows() -> String {
    let mut out = String::from("workflows:\n");
    for w in config::WorkflowKind::ALL {
        let _ = writeln!(out, "  {:<20} {}", w.name(), w.summary());
    }
    out.push_str("presets:\n");
    for p in presets::NAMES {
        let _ = writeln!(out, "  {:<20} {}", p, presets::description(p));
    }
    out
}
