//! Plain-text mesh format.
//!
//! ```text
//! V E T
//! x y            (V lines)
//! a b c          (T lines, counterclockwise)
//! vertex i tag   (one line per boundary vertex)
//! edge a b tag   (one line per boundary edge)
//! ```
//!
//! Coordinates use the shortest decimal representation that round-trips.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BoundaryTag, MeshError, TriMesh};

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> Result<(), MeshError> {
    writeln!(w, "{} {} {}", mesh.num_vertices(), mesh.num_edges(), mesh.num_triangles())?;
    for p in mesh.vertices() {
        writeln!(w, "{:?} {:?}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
    }
    for (v, tag) in mesh.vertex_tags().iter().enumerate() {
        if let Some(tag) = tag {
            writeln!(w, "vertex {v} {}", tag.as_str())?;
        }
    }
    for (e, tag) in mesh.edge_tags().iter().enumerate() {
        if let Some(tag) = tag {
            let [a, b] = mesh.edges()[e];
            writeln!(w, "edge {a} {b} {}", tag.as_str())?;
        }
    }
    Ok(())
}

pub fn save_mesh(mesh: &TriMesh, path: &Path) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

fn fields<T: std::str::FromStr>(line: usize, s: &str, n: usize) -> Result<Vec<T>, MeshError> {
    let out: Vec<T> = s
        .split_whitespace()
        .map(|tok| tok.parse().map_err(|_| parse_err(line, format!("bad number '{tok}'"))))
        .collect::<Result<_, _>>()?;
    if out.len() != n {
        return Err(parse_err(line, format!("expected {n} fields, found {}", out.len())));
    }
    Ok(out)
}

/// Reads a mesh; edge count and boundary edge tags are cross-checked against
/// the recomputed topology.
pub fn read_mesh<R: Read>(r: R, level: usize) -> Result<TriMesh, MeshError> {
    let mut lines = Vec::new();
    for line in BufReader::new(r).lines() {
        lines.push(line?);
    }
    let mut it = lines.iter().enumerate().map(|(i, l)| (i + 1, l.as_str()));
    let (ln, header) = it.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let hdr: Vec<usize> = fields(ln, header, 3)?;
    let (nv, ne, nt) = (hdr[0], hdr[1], hdr[2]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, s) = it.next().ok_or_else(|| parse_err(lines.len(), "missing vertex lines"))?;
        let xy: Vec<f64> = fields(ln, s, 2)?;
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, s) = it.next().ok_or_else(|| parse_err(lines.len(), "missing triangle lines"))?;
        let abc: Vec<usize> = fields(ln, s, 3)?;
        triangles.push([abc[0], abc[1], abc[2]]);
    }
    let mut tags = vec![None; nv];
    let mut edge_tags = Vec::new();
    for (ln, s) in it {
        let toks: Vec<&str> = s.split_whitespace().collect();
        match toks.as_slice() {
            [] => {}
            ["vertex", v, tag] => {
                let v: usize = v.parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
                let tag = BoundaryTag::parse(tag).ok_or_else(|| parse_err(ln, "unknown tag"))?;
                *tags.get_mut(v).ok_or_else(|| parse_err(ln, "vertex index out of range"))? = Some(tag);
            }
            ["edge", a, b, tag] => {
                let a: usize = a.parse().map_err(|_| parse_err(ln, "bad edge index"))?;
                let b: usize = b.parse().map_err(|_| parse_err(ln, "bad edge index"))?;
                let tag = BoundaryTag::parse(tag).ok_or_else(|| parse_err(ln, "unknown tag"))?;
                edge_tags.push(([a.min(b), a.max(b)], tag, ln));
            }
            _ => return Err(parse_err(ln, format!("unrecognised line '{s}'"))),
        }
    }

    let mesh = TriMesh::from_parts(vertices, triangles, tags, level)?;
    if mesh.num_edges() != ne {
        return Err(parse_err(1, format!("header says {ne} edges, topology has {}", mesh.num_edges())));
    }
    let boundary_edges = mesh.edge_tags().iter().filter(|t| t.is_some()).count();
    if boundary_edges != edge_tags.len() {
        return Err(parse_err(1, "boundary edge lines do not match topology"));
    }
    for (key, tag, ln) in edge_tags {
        let e = mesh
            .edges()
            .binary_search(&key)
            .map_err(|_| parse_err(ln, "edge not in mesh"))?;
        if mesh.edge_tags()[e] != Some(tag) {
            return Err(parse_err(ln, "edge tag disagrees with vertex tags"));
        }
    }
    Ok(mesh)
}

pub fn load_mesh(path: &Path, level: usize) -> Result<TriMesh, MeshError> {
    read_mesh(File::open(path)?, level)
}
