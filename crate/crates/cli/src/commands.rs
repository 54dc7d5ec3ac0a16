//! Subcommand implementations. Every command writes into an output
//! directory:
//!
//! ```text
//! mesh     mesh_level<L>.txt, mesh_stats.txt
//! dns      reference.traj, reference.meta, energy.csv, dns_<step>.vtk
//! nudge    <series>.csv, <series>.summary, checkpoint_<step>.chk, nudge_<step>.vtk
//! compare  a_<series>.csv, b_<series>.csv (+ summaries), compare.txt
//! analyze  analysis.txt
//! ```
//!
//! `reference.meta` and the summaries are `key: value` text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use danse_core::analysis::{
    compare_runs, estimate_lambda1, fit_decay_rate, grashof, mu_range, AnalysisError, Comparison, MuRangeInput,
    RunRecord,
};
use danse_core::fem::DirichletBc;
use danse_core::interp::{InterpError, InterpOperator};
use danse_core::mesh::{generate_annulus, generate_offset_disk, save_mesh, MeshError, MeshHierarchy, MeshStats};
use danse_core::solver::{
    body_force, load_checkpoint, run_dns, run_nudged, save_checkpoint, Discretization, DnsSpec, EvolutionState,
    Forcing, InitialCondition, NudgeSpec, Problem, SolverError, Trajectory,
};
use thiserror::Error;

use crate::config::{ConfigError, Domain, Initial, SimConfig, Wall};
use crate::vtk::write_snapshot;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("missing prerequisite: {0}")]
    Missing(String),
    #[error("incompatible artifact: {0}")]
    Incompatible(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(path))
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(io_err(out))
}

/// Parses `key: value` lines.
fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .filter_map(|l| l.split_once(':'))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

/// Mesh hierarchy from Level 1 up to the DNS level.
pub fn build_hierarchy(cfg: &SimConfig) -> Result<MeshHierarchy, CliError> {
    let m = &cfg.mesh;
    let base = match m.domain {
        Domain::Annulus => generate_annulus(m.n_outer, m.n_inner, 1.0, 0.1)?,
        Domain::OffsetDisk => generate_offset_disk(m.n_outer, m.n_inner)?,
    };
    Ok(MeshHierarchy::new(base, cfg.dns_index())?)
}

pub fn build_problem(cfg: &SimConfig, disc: Arc<Discretization>) -> Problem {
    let p = &cfg.physics;
    Problem {
        disc,
        nu: p.nu,
        forcing: if p.body_force { Forcing::steady(body_force) } else { Forcing::Zero },
        bc: match p.wall {
            Wall::RotatingOuter => DirichletBc::outer_rotation(1.0),
            Wall::NoSlip => DirichletBc::no_slip(),
        },
    }
}

fn dns_discretization(cfg: &SimConfig, h: &MeshHierarchy) -> Result<Arc<Discretization>, CliError> {
    Ok(Arc::new(Discretization::new(Arc::new(h.level(cfg.dns_index()).clone()))?))
}

/// Writes every hierarchy level and the statistics table; returns
/// `(label, stats)` per level.
pub fn cmd_mesh(cfg: &SimConfig, out: &Path) -> Result<Vec<(usize, MeshStats)>, CliError> {
    ensure_dir(out)?;
    let h = build_hierarchy(cfg)?;
    let mut rows = Vec::new();
    for (i, mesh) in h.levels().iter().enumerate() {
        let label = MeshHierarchy::label(i);
        save_mesh(mesh, &out.join(format!("mesh_level{label}.txt")))?;
        rows.push((label, mesh.stats()));
    }
    write_text(&out.join("mesh_stats.txt"), &stats_table(&rows))?;
    Ok(rows)
}

/// Columns: level label, vertices, triangles, largest edge, then edges and
/// the smallest angle as quality checks.
pub fn stats_table(rows: &[(usize, MeshStats)]) -> String {
    let mut s = String::from("level vertices triangles h_max edges min_angle_deg\n");
    for (label, st) in rows {
        let _ = writeln!(
            s,
            "{label} {} {} {:.3} {} {:.2}",
            st.vertices, st.triangles, st.h_max, st.edges, st.min_angle_deg
        );
    }
    s
}

/// Summary of a reference run.
#[derive(Clone, Debug)]
pub struct DnsReport {
    pub steps: usize,
    pub snapshots: usize,
    pub final_energy: f64,
}

const REFERENCE_FILE: &str = "reference.traj";
const REFERENCE_META: &str = "reference.meta";

fn snapshot_due(stride: usize, step: u64) -> bool {
    stride > 0 && step % stride as u64 == 0
}

/// Reference run from `t_start - spinup` to `t_end`; velocities from
/// `t_start` on are stored at every step for later nudged runs.
pub fn cmd_dns(cfg: &SimConfig, out: &Path) -> Result<DnsReport, CliError> {
    ensure_dir(out)?;
    let h = build_hierarchy(cfg)?;
    let disc = dns_discretization(cfg, &h)?;
    let problem = build_problem(cfg, disc);
    let t = &cfg.time;
    let spec = DnsSpec {
        dt: t.dt,
        t_start: cfg.reference_start(),
        t_end: t.t_end,
        record_from: t.t_start,
        stride: 1,
        initial: match cfg.physics.initial {
            Initial::Rest => InitialCondition::Rest,
            Initial::Stokes => InitialCondition::Stokes,
        },
        linear_tol: cfg.numerics.linear_tol,
    };
    let stride = cfg.output.snapshot_stride;
    let mut snap_err = None;
    let traj = run_dns(&problem, &spec, &mut |state| {
        if snapshot_due(stride, state.step) {
            let path = out.join(format!("dns_{:08}.vtk", state.step));
            if let Err(e) = write_snapshot(state, &path) {
                snap_err = Some(CliError::Io { path: path.display().to_string(), source: e });
            }
        }
        Ok(())
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }

    let path = out.join(REFERENCE_FILE);
    let mut w = create(&path)?;
    traj.write(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
    let mut meta = String::new();
    let _ = writeln!(meta, "reference_fingerprint: {:016x}", cfg.reference_fingerprint());
    let _ = writeln!(meta, "t_first: {:?}", traj.t_first);
    let _ = writeln!(meta, "t_last: {:?}", traj.t_last());
    let _ = writeln!(meta, "dt: {:?}", traj.dt);
    let _ = writeln!(meta, "snapshots: {}", traj.snapshots.len());
    write_text(&out.join(REFERENCE_META), &meta)?;

    let mut csv = String::from("t,ke\n");
    for (t, ke) in &traj.energy {
        let _ = writeln!(csv, "{t:?},{ke:?}");
    }
    write_text(&out.join("energy.csv"), &csv)?;
    Ok(DnsReport {
        steps: traj.energy.len() - 1,
        snapshots: traj.snapshots.len(),
        final_energy: traj.energy.last().map_or(0.0, |e| e.1),
    })
}

/// Loads the stored reference, checking it was produced by a configuration
/// with the same reference fingerprint and covers the run interval.
pub fn load_reference(cfg: &SimConfig, out: &Path) -> Result<Trajectory, CliError> {
    let meta_path = out.join(REFERENCE_META);
    if !meta_path.exists() {
        return Err(CliError::Missing(format!("{} not found; run `danse dns` with this configuration first", meta_path.display())));
    }
    let meta = read_key_values(&meta_path)?;
    let want = format!("{:016x}", cfg.reference_fingerprint());
    if meta.get("reference_fingerprint") != Some(&want) {
        return Err(CliError::Incompatible(format!(
            "reference in {} was produced by another configuration (fingerprint {}, expected {want})",
            out.display(),
            meta.get("reference_fingerprint").map_or("none", String::as_str)
        )));
    }
    let path = out.join(REFERENCE_FILE);
    let traj = Trajectory::read(BufReader::new(File::open(&path).map_err(io_err(&path))?))?;
    if traj.t_last() < cfg.time.t_end - 1e-9 * cfg.time.dt {
        return Err(CliError::Incompatible(format!(
            "reference ends at t = {} before t_end = {}",
            traj.t_last(),
            cfg.time.t_end
        )));
    }
    Ok(traj)
}

/// Outcome of a nudged run.
#[derive(Clone, Debug)]
pub struct NudgeReport {
    pub record: RunRecord,
    pub series: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub const MU_ZERO_WARNING: &str = "mu = 0 disables nudging: the run is a free evolution from rest and is not expected to synchronize";

fn checkpoint_name(prefix: &str, step: u64) -> String {
    format!("{prefix}checkpoint_{step:08}.chk")
}

fn run_nudge_with(
    cfg: &SimConfig,
    out: &Path,
    reference: &Trajectory,
    prefix: &str,
    resume: Option<&Path>,
) -> Result<NudgeReport, CliError> {
    let mut warnings = Vec::new();
    if cfg.nudging.mu == 0.0 {
        warnings.push(MU_ZERO_WARNING.to_string());
    }
    let h = build_hierarchy(cfg)?;
    let disc = dns_discretization(cfg, &h)?;
    let problem = build_problem(cfg, disc.clone());
    let n = &cfg.nudging;
    let interp = InterpOperator::build(&h, disc.velocity_space().clone(), cfg.data_index(), cfg.dns_index(), n.k, n.variant.to_core())?;
    let fingerprint = cfg.run_fingerprint();
    let resume_state = match resume {
        Some(path) => Some(load_checkpoint(path, &disc, fingerprint)?),
        None => None,
    };
    let spec = NudgeSpec {
        dt: cfg.time.dt,
        mu: n.mu,
        t_start: cfg.time.t_start,
        t_end: cfg.time.t_end,
        obs_stride: n.obs_stride,
        sync_threshold: n.sync_threshold,
        fingerprint,
        linear_tol: cfg.numerics.linear_tol,
        resume: resume_state.clone(),
    };
    let (cstride, sstride) = (cfg.output.checkpoint_stride, cfg.output.snapshot_stride);
    let first_step = resume_state.as_ref().map_or(0, |s| s.step);
    let mut checkpoints = Vec::new();
    let mut observe = |state: &EvolutionState| -> Result<(), SolverError> {
        if state.step > first_step && snapshot_due(cstride, state.step) {
            let path = out.join(checkpoint_name(prefix, state.step));
            save_checkpoint(&path, state, fingerprint)?;
            checkpoints.push(path);
        }
        if snapshot_due(sstride, state.step) {
            write_snapshot(state, &out.join(format!("{prefix}nudge_{:08}.vtk", state.step)))?;
        }
        Ok(())
    };
    let record = run_nudged(&problem, &spec, reference, Arc::new(interp), &mut observe)?;

    let series = out.join(format!("{prefix}{}", cfg.output.series));
    let mut w = create(&series)?;
    record.write_csv(&mut w).and_then(|_| w.flush()).map_err(io_err(&series))?;
    write_text(&summary_path(&series), &summary_text(cfg, &record, &warnings))?;
    Ok(NudgeReport { record, series, checkpoints, warnings })
}

/// `<series>` with its extension replaced by `summary`.
pub fn summary_path(series: &Path) -> PathBuf {
    series.with_extension("summary")
}

fn summary_text(cfg: &SimConfig, record: &RunRecord, warnings: &[String]) -> String {
    let n = &cfg.nudging;
    let mut s = String::new();
    let _ = writeln!(s, "fingerprint: {:016x}", record.fingerprint);
    let _ = writeln!(s, "mu: {:?}", n.mu);
    let _ = writeln!(s, "k: {}", n.k);
    let _ = writeln!(s, "variant: {}", n.variant.to_core().as_str());
    let _ = writeln!(s, "data_level: {}", cfg.mesh.data_level);
    let _ = writeln!(s, "dns_level: {}", cfg.mesh.dns_level);
    let _ = writeln!(s, "sync_threshold: {:?}", record.sync_threshold);
    let _ = writeln!(s, "sync_time: {}", record.sync_time.map_or("none".into(), |t| format!("{t:?}")));
    let _ = writeln!(s, "samples: {}", record.len());
    let _ = writeln!(s, "final_l2_err: {}", record.final_l2().map_or("none".into(), |e| format!("{e:?}")));
    for w in warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

/// Reads a series CSV and restores sync metadata from its summary, if any.
pub fn read_series(path: &Path) -> Result<RunRecord, CliError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut record = RunRecord::read_csv(BufReader::new(f))?;
    let summary = summary_path(path);
    if summary.exists() {
        let kv = read_key_values(&summary)?;
        record.sync_time = kv.get("sync_time").and_then(|v| v.parse().ok());
        if let Some(th) = kv.get("sync_threshold").and_then(|v| v.parse().ok()) {
            record.sync_threshold = th;
        }
        if let Some(fp) = kv.get("fingerprint").and_then(|v| u64::from_str_radix(v, 16).ok()) {
            record.fingerprint = fp;
        }
    }
    Ok(record)
}

/// Nudged run against the reference stored in `out`; `resume` continues
/// from a checkpoint of the same configuration.
pub fn cmd_nudge(cfg: &SimConfig, out: &Path, resume: Option<&Path>) -> Result<NudgeReport, CliError> {
    ensure_dir(out)?;
    let reference = load_reference(cfg, out)?;
    run_nudge_with(cfg, out, &reference, "", resume)
}

/// Runs both configurations against the shared reference in `out` and
/// writes `compare.txt`.
pub fn cmd_compare(a: &SimConfig, b: &SimConfig, out: &Path) -> Result<Comparison, CliError> {
    ensure_dir(out)?;
    if a.reference_fingerprint() != b.reference_fingerprint() {
        return Err(CliError::Incompatible("the two configurations need different reference runs".into()));
    }
    let reference = load_reference(a, out)?;
    let concurrent = a.numerics.workers.min(b.numerics.workers) >= 2;
    let (ra, rb) = if concurrent {
        std::thread::scope(|s| {
            let ha = s.spawn(|| run_nudge_with(a, out, &reference, "a_", None));
            let rb = run_nudge_with(b, out, &reference, "b_", None);
            (ha.join().expect("run a panicked"), rb)
        })
    } else {
        (run_nudge_with(a, out, &reference, "a_", None), run_nudge_with(b, out, &reference, "b_", None))
    };
    let (ra, rb) = (ra?, rb?);
    let cmp = compare_runs(&ra.record, &rb.record)?;
    let describe = |c: &SimConfig| {
        format!(
            "k={} variant={} data_level={} mu={:?}",
            c.nudging.k,
            c.nudging.variant.to_core().as_str(),
            c.mesh.data_level,
            c.nudging.mu
        )
    };
    let mut text = String::new();
    let _ = writeln!(text, "run_a: {}", describe(a));
    let _ = writeln!(text, "run_b: {}", describe(b));
    text.push_str(&cmp.to_text());
    write_text(&out.join("compare.txt"), &text)?;
    Ok(cmp)
}

/// Diagnostics of a configuration: smallest Stokes eigenvalue on the DNS
/// mesh, Grashof number, admissible nudging range with unit constants and,
/// given a series, its decay rate over `window`.
pub fn cmd_analyze(
    cfg: &SimConfig,
    out: &Path,
    series: Option<&Path>,
    window: Option<(f64, f64)>,
) -> Result<String, CliError> {
    ensure_dir(out)?;
    let h = build_hierarchy(cfg)?;
    let disc = dns_discretization(cfg, &h)?;
    let lambda = estimate_lambda1(&disc, 500, 1e-10)?;
    let nu = cfg.physics.nu;
    let g = if cfg.physics.body_force {
        grashof(&disc, &body_force, nu, lambda.lambda)?
    } else {
        0.0
    };
    let big_h = h.level(cfg.data_index()).stats().h_max;
    let small_h = h.level(cfg.dns_index()).stats().h_max;
    let range = mu_range(MuRangeInput::unit_constants(cfg.nudging.k, big_h, small_h, nu, lambda.lambda, g))?;

    let mut text = String::new();
    let _ = writeln!(text, "lambda1: {:e}", lambda.lambda);
    let _ = writeln!(text, "lambda1_residual: {:e}", lambda.residual);
    let _ = writeln!(text, "lambda1_iterations: {}", lambda.iterations);
    let _ = writeln!(text, "grashof: {g:e}");
    if !cfg.physics.body_force {
        let _ = writeln!(text, "grashof_note: flow is driven by boundary values only, body force is zero");
    }
    text.push_str(&range.to_text());
    if let Some(path) = series {
        let record = read_series(path)?;
        let window = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let fit = fit_decay_rate(&record, window)?;
        let _ = writeln!(text, "series: {}", path.display());
        let _ = writeln!(text, "decay_rate: {:e}", fit.sigma);
        let _ = writeln!(text, "fit_residual: {:e}", fit.residual);
        let _ = writeln!(text, "fit_used: {}", fit.used);
        let _ = writeln!(text, "fit_excluded: {}", fit.excluded);
        let _ = writeln!(text, "sync_time: {}", record.sync_time.map_or("none".into(), |t| format!("{t:?}")));
    }
    write_text(&out.join("analysis.txt"), &text)?;
    Ok(text)
}
