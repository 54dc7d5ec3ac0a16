use std::io::{Read, Write};
use std::sync::Arc;

use super::system::norm;
use super::{solve_stokes, EvolutionState, Problem, SolverError, StepSystem};
use crate::analysis::RunRecord;
use crate::fem::{kinetic_energy, FieldNorms};
use crate::interp::InterpOperator;

/// Initial velocity of a run.
#[derive(Clone, Debug)]
pub enum InitialCondition {
    Rest,
    /// Steady Stokes solution with the run's forcing and boundary values.
    Stokes,
    Velocity(Vec<f64>),
}

/// Reference (unnudged) run parameters.
#[derive(Clone, Debug)]
pub struct DnsSpec {
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Snapshots are kept from this time on.
    pub record_from: f64,
    /// Keep every `stride`-th step from `record_from`.
    pub stride: usize,
    pub initial: InitialCondition,
    /// Relative residual of each step solve.
    pub linear_tol: f64,
}

/// Number of steps of size `dt` from `a` to `b`; the interval must be a
/// whole number of steps.
pub(crate) fn step_count(a: f64, b: f64, dt: f64) -> Result<u64, SolverError> {
    let x = (b - a) / dt;
    let n = x.round();
    if !(n >= 0.0) || (x - n).abs() > 1e-6 {
        return Err(SolverError::InvalidParameters(format!(
            "interval [{a}, {b}] is not a whole number of steps of {dt}"
        )));
    }
    Ok(n as u64)
}

/// Stored reference velocities on a uniform time grid.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub dt: f64,
    /// Time of the first snapshot.
    pub t_first: f64,
    pub stride: usize,
    pub snapshots: Vec<Vec<f64>>,
    /// `(t, kinetic energy)` at every step of the run.
    pub energy: Vec<(f64, f64)>,
}

const TRAJ_MAGIC: &[u8; 8] = b"DANSETRJ";
const TRAJ_VERSION: u32 = 1;

impl Trajectory {
    /// Snapshot at time `t`, if `t` is on the stored grid.
    pub fn velocity_at(&self, t: f64) -> Option<&[f64]> {
        let x = (t - self.t_first) / self.dt;
        let n = x.round();
        if n < 0.0 || (x - n).abs() > 1e-6 {
            return None;
        }
        let n = n as usize;
        if n % self.stride != 0 {
            return None;
        }
        self.snapshots.get(n / self.stride).map(|v| v.as_slice())
    }

    pub fn t_last(&self) -> f64 {
        self.t_first + ((self.snapshots.len().max(1) - 1) * self.stride) as f64 * self.dt
    }

    /// Binary layout: magic "DANSETRJ", version u32, dt f64, t_first f64,
    /// stride u64, count u64, length u64, then count x length f64 values,
    /// all little-endian. Energy series are written separately as CSV.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(TRAJ_MAGIC)?;
        w.write_all(&TRAJ_VERSION.to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&self.t_first.to_le_bytes())?;
        w.write_all(&(self.stride as u64).to_le_bytes())?;
        w.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        let len = self.snapshots.first().map_or(0, |s| s.len());
        w.write_all(&(len as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * len);
        for s in &self.snapshots {
            buf.clear();
            s.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes()));
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self, SolverError> {
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        if &b8 != TRAJ_MAGIC {
            return Err(SolverError::Checkpoint("not a trajectory file".into()));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        if u32::from_le_bytes(b4) != TRAJ_VERSION {
            return Err(SolverError::Checkpoint("unsupported trajectory version".into()));
        }
        let mut next = || -> Result<u64, SolverError> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let dt = f64::from_bits(next()?);
        let t_first = f64::from_bits(next()?);
        let stride = next()? as usize;
        let count = next()? as usize;
        let len = next()? as usize;
        let mut snapshots = Vec::with_capacity(count);
        let mut buf = vec![0u8; 8 * len];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            snapshots.push(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect());
        }
        Ok(Self { dt, t_first, stride, snapshots, energy: Vec::new() })
    }
}

/// Callback run on every state of a time loop (initial state included).
pub type Observer<'a> = &'a mut dyn FnMut(&EvolutionState) -> Result<(), SolverError>;

/// Reference run with the nudging gain forced to zero.
pub fn run_dns(problem: &Problem, spec: &DnsSpec, observer: Observer<'_>) -> Result<Trajectory, SolverError> {
    if spec.stride == 0 {
        return Err(SolverError::InvalidParameters("snapshot stride must be at least 1".into()));
    }
    let steps = step_count(spec.t_start, spec.t_end, spec.dt)?;
    let rec0 = step_count(spec.t_start, spec.record_from, spec.dt)?;
    let disc = problem.disc.clone();
    let mut state = match &spec.initial {
        InitialCondition::Rest => EvolutionState::zero(&disc, 0, spec.t_start),
        InitialCondition::Stokes => {
            let (v, p) = solve_stokes(problem, spec.t_start)?;
            EvolutionState { step: 0, time: spec.t_start, velocity: v, pressure: p }
        }
        InitialCondition::Velocity(v) => EvolutionState::from_velocity(&disc, 0, spec.t_start, v.clone())?,
    };
    let mut sys = StepSystem::new(problem.clone(), spec.dt, 0.0, None)?.with_tolerance(spec.linear_tol)?;
    let mut traj = Trajectory {
        dt: spec.dt,
        t_first: spec.t_start + rec0 as f64 * spec.dt,
        stride: spec.stride,
        ..Default::default()
    };
    let keep = |state: &EvolutionState, traj: &mut Trajectory| {
        traj.energy.push((state.time, kinetic_energy(disc.mass(), state.velocity.coeffs())));
        if state.step >= rec0 && (state.step - rec0) % spec.stride as u64 == 0 {
            traj.snapshots.push(state.velocity.coeffs().to_vec());
        }
    };
    keep(&state, &mut traj);
    observer(&state)?;
    for n in 1..=steps {
        state = sys.step_to(&state, spec.t_start + n as f64 * spec.dt, None)?;
        keep(&state, &mut traj);
        observer(&state)?;
    }
    Ok(traj)
}

/// Nudged run parameters.
#[derive(Clone, Debug)]
pub struct NudgeSpec {
    pub dt: f64,
    pub mu: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Data are refreshed every `obs_stride` steps and held in between.
    pub obs_stride: usize,
    /// Halt once `||v - u||_0 / ||u||_0` drops below this value.
    pub sync_threshold: f64,
    pub fingerprint: u64,
    /// Relative residual of each step solve.
    pub linear_tol: f64,
    /// Continue from this state instead of starting at rest.
    pub resume: Option<EvolutionState>,
}

/// Nudged run from rest (or a resumed state) against a stored reference.
pub fn run_nudged(
    problem: &Problem,
    spec: &NudgeSpec,
    reference: &Trajectory,
    interp: Arc<InterpOperator>,
    observer: Observer<'_>,
) -> Result<RunRecord, SolverError> {
    if spec.obs_stride == 0 {
        return Err(SolverError::InvalidParameters("observation stride must be at least 1".into()));
    }
    if (reference.dt - spec.dt).abs() > 1e-12 * spec.dt {
        return Err(SolverError::InvalidParameters(format!(
            "reference time step {} differs from run time step {}",
            reference.dt, spec.dt
        )));
    }
    let disc = problem.disc.clone();
    let steps = step_count(spec.t_start, spec.t_end, spec.dt)?;
    let mut state = match &spec.resume {
        Some(s) => s.clone(),
        None => EvolutionState::zero(&disc, 0, spec.t_start),
    };
    let mut sys = StepSystem::new(problem.clone(), spec.dt, spec.mu, Some(interp))?.with_tolerance(spec.linear_tol)?;
    let mut record = RunRecord::new(spec.sync_threshold, spec.fingerprint);
    let time_of = |n: u64| spec.t_start + n as f64 * spec.dt;
    let reference_at = |t: f64| reference.velocity_at(t).ok_or(SolverError::MissingReference(t));

    // returns true once synchronized
    let measure = |state: &EvolutionState, record: &mut RunRecord| -> Result<bool, SolverError> {
        let u = reference_at(state.time)?;
        let v = state.velocity.coeffs();
        let d: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - b).collect();
        let err = FieldNorms::from_operators(disc.mass(), disc.stiffness(), &d);
        record.push(state.time, kinetic_energy(disc.mass(), v), err.l2, err.h1);
        let unorm = disc.mass().dot(u, u).max(0.0).sqrt();
        let rel = if unorm > 0.0 { err.l2 / unorm } else { err.l2 };
        if rel < spec.sync_threshold {
            record.sync_time = Some(state.time);
            return Ok(true);
        }
        Ok(false)
    };

    let mut synced = measure(&state, &mut record)?;
    observer(&state)?;
    let stride = spec.obs_stride as u64;
    while !synced && state.step < steps {
        let n1 = state.step + 1;
        let data = reference_at(time_of(stride * (n1 / stride)))?;
        let data = if spec.mu > 0.0 { Some(data) } else { None };
        state = sys.step_to(&state, time_of(n1), data)?;
        synced = measure(&state, &mut record)?;
        observer(&state)?;
    }
    Ok(record)
}

/// Relative coefficient-norm difference, for diagnostics.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}
