//! Legacy VTK snapshots.
//!
//! ```text
//! # vtk DataFile Version 3.0
//! <title>
//! ASCII
//! DATASET UNSTRUCTURED_GRID
//! POINTS V double            x y 0 per vertex
//! CELLS T 4T                 3 a b c per triangle
//! CELL_TYPES T               5 per triangle
//! POINT_DATA V
//! VECTORS velocity double    vx vy 0
//! SCALARS speed double 1     |v|
//! SCALARS pressure double 1
//! ```
//!
//! Values are printed with 17 significant digits, so vertex values read
//! back exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use danse_core::solver::EvolutionState;

/// Vertex values of a snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
}

impl Snapshot {
    /// Restricts a state to mesh vertices. P2 and P1 vertex dofs are
    /// numbered like the vertices, so this is a plain copy.
    pub fn from_state(state: &EvolutionState) -> Self {
        let space = state.velocity.space();
        let mesh = space.mesh();
        let nv = mesh.num_vertices();
        let (ux, uy) = (state.velocity.component(0), state.velocity.component(1));
        Self {
            points: mesh.vertices().to_vec(),
            triangles: mesh.triangles().to_vec(),
            velocity: (0..nv).map(|v| [ux[v], uy[v]]).collect(),
            pressure: state.pressure.coeffs()[..nv].to_vec(),
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.velocity.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    pub fn write<W: Write>(&self, mut w: W, title: &str) -> std::io::Result<()> {
        let nv = self.points.len();
        let nt = self.triangles.len();
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "{}", title.replace('\n', " "))?;
        writeln!(w, "ASCII\nDATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {nv} double")?;
        for p in &self.points {
            writeln!(w, "{:.16e} {:.16e} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {nt} {}", 4 * nt)?;
        for t in &self.triangles {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        writeln!(w, "CELL_TYPES {nt}")?;
        for _ in 0..nt {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {nv}")?;
        writeln!(w, "VECTORS velocity double")?;
        for v in &self.velocity {
            writeln!(w, "{:.16e} {:.16e} 0", v[0], v[1])?;
        }
        writeln!(w, "SCALARS speed double 1\nLOOKUP_TABLE default")?;
        for v in &self.velocity {
            writeln!(w, "{:.16e}", v[0].hypot(v[1]))?;
        }
        writeln!(w, "SCALARS pressure double 1\nLOOKUP_TABLE default")?;
        for p in &self.pressure {
            writeln!(w, "{p:.16e}")?;
        }
        Ok(())
    }

    /// Reads a file produced by [`Snapshot::write`].
    pub fn read<R: BufRead>(r: R) -> Result<Self, String> {
        let lines: Vec<String> = r.lines().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let mut cur = Cursor { lines: &lines, pos: 4 };
        let nv = cur.header("POINTS")?;
        let points = cur.rows(nv, 3)?.into_iter().map(|v| [v[0], v[1]]).collect();
        let nt = cur.header("CELLS")?;
        let triangles = cur
            .rows(nt, 4)?
            .into_iter()
            .map(|v| [v[1] as usize, v[2] as usize, v[3] as usize])
            .collect();
        cur.header("CELL_TYPES")?;
        cur.rows(nt, 1)?;
        if cur.header("POINT_DATA")? != nv {
            return Err("POINT_DATA count differs from POINTS".into());
        }
        cur.keyword("VECTORS")?;
        let velocity = cur.rows(nv, 3)?.into_iter().map(|v| [v[0], v[1]]).collect();
        cur.keyword("SCALARS")?;
        cur.keyword("LOOKUP_TABLE")?;
        cur.rows(nv, 1)?;
        cur.keyword("SCALARS")?;
        cur.keyword("LOOKUP_TABLE")?;
        let pressure = cur.rows(nv, 1)?.into_iter().map(|v| v[0]).collect();
        Ok(Self { points, triangles, velocity, pressure })
    }
}

struct Cursor<'a> {
    lines: &'a [String],
    pos: usize,
}

impl Cursor<'_> {
    fn next(&mut self) -> Result<&str, String> {
        let l = self.lines.get(self.pos).ok_or_else(|| format!("unexpected end of file after line {}", self.pos))?;
        self.pos += 1;
        Ok(l)
    }

    fn keyword(&mut self, want: &str) -> Result<Vec<String>, String> {
        let line = self.pos + 1;
        let toks: Vec<String> = self.next()?.split_whitespace().map(str::to_string).collect();
        if toks.first().map(String::as_str) != Some(want) {
            return Err(format!("line {line}: expected {want}"));
        }
        Ok(toks)
    }

    /// Keyword line followed by a count.
    fn header(&mut self, want: &str) -> Result<usize, String> {
        let line = self.pos + 1;
        let toks = self.keyword(want)?;
        toks.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| format!("line {line}: bad {want} count"))
    }

    fn rows(&mut self, n: usize, width: usize) -> Result<Vec<Vec<f64>>, String> {
        (0..n)
            .map(|_| {
                let line = self.pos + 1;
                let v: Vec<f64> = self
                    .next()?
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| format!("line {line}: bad number '{t}'")))
                    .collect::<Result<_, _>>()?;
                if v.len() != width {
                    return Err(format!("line {line}: expected {width} values"));
                }
                Ok(v)
            })
            .collect()
    }
}

/// Writes the vertex values of `state` to `path`.
pub fn write_snapshot(state: &EvolutionState, path: &Path) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    Snapshot::from_state(state).write(&mut w, &format!("step {} t {:?}", state.step, state.time))?;
    w.flush()
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, String> {
    let f = File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Snapshot::read(BufReader::new(f))
}
