//! Binary checkpoint layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "DANSECHK"
//! version  u32
//! config   u64      fingerprint of the producing configuration
//! step     u64
//! time     f64
//! nv       u64      velocity coefficient count, then nv x f64
//! np       u64      pressure coefficient count, then np x f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Discretization, EvolutionState, SolverError};
use crate::fem::FeField;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"DANSECHK";

pub fn write_checkpoint<W: Write>(mut w: W, state: &EvolutionState, fingerprint: u64) -> Result<(), SolverError> {
    w.write_all(MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&fingerprint.to_le_bytes())?;
    w.write_all(&state.step.to_le_bytes())?;
    w.write_all(&state.time.to_le_bytes())?;
    for field in [state.velocity.coeffs(), state.pressure.coeffs()] {
        w.write_all(&(field.len() as u64).to_le_bytes())?;
        for v in field {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, state: &EvolutionState, fingerprint: u64) -> Result<(), SolverError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, state, fingerprint)?;
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, SolverError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_vec<R: Read>(r: &mut R, expected: usize, what: &str) -> Result<Vec<f64>, SolverError> {
    let n = read_u64(r)? as usize;
    if n != expected {
        return Err(SolverError::Checkpoint(format!("{what} has {n} coefficients, discretization needs {expected}")));
    }
    (0..n).map(|_| read_u64(r).map(f64::from_bits)).collect()
}

/// Reads a checkpoint, rejecting other versions, other configurations
/// (fingerprint mismatch) and other discretizations (length mismatch).
pub fn read_checkpoint<R: Read>(mut r: R, disc: &Discretization, fingerprint: u64) -> Result<EvolutionState, SolverError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SolverError::Checkpoint("not a checkpoint file".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != CHECKPOINT_VERSION {
        return Err(SolverError::Checkpoint(format!("version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let fp = read_u64(&mut r)?;
    if fp != fingerprint {
        return Err(SolverError::Checkpoint(format!("written by configuration {fp:016x}, current is {fingerprint:016x}")));
    }
    let step = read_u64(&mut r)?;
    let time = f64::from_bits(read_u64(&mut r)?);
    let v = read_vec(&mut r, disc.velocity_space().num_dofs(), "velocity")?;
    let p = read_vec(&mut r, disc.pressure_space().num_dofs(), "pressure")?;
    Ok(EvolutionState {
        step,
        time,
        velocity: FeField::new(disc.velocity_space().clone(), v)?,
        pressure: FeField::new(disc.pressure_space().clone(), p)?,
    })
}

pub fn load_checkpoint(path: &Path, disc: &Discretization, fingerprint: u64) -> Result<EvolutionState, SolverError> {
    read_checkpoint(BufReader::new(File::open(path)?), disc, fingerprint)
}
