//! Conforming triangular meshes of circular domains with one hole, and the
//! nested hierarchies obtained by uniform midpoint refinement.

mod generate;
mod io;
mod refine;

pub use generate::{generate_annulus, generate_offset_disk, RingDomain};
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};
pub use refine::{refine_uniform, MeshHierarchy, RefinementMap, VertexParent};

use std::collections::BTreeMap;

use thiserror::Error;

/// A point in the plane (nondimensional length).
pub type Point = [f64; 2];

/// Barycentric tolerance for point location.
pub const LOCATE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh parameters: {0}")]
    InvalidParameters(String),
    #[error("triangle {0} has non-positive signed area {1:e}")]
    Inverted(usize, f64),
    #[error("edge ({0}, {1}) is shared by more than two triangles")]
    NonConforming(usize, usize),
    #[error("boundary edge ({0}, {1}) has inconsistent or missing tags")]
    BadBoundaryTag(usize, usize),
    #[error("mesh topology check failed: {0}")]
    Topology(String),
    #[error("mesh file parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Label of a boundary loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryTag {
    Outer,
    Inner,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Outer => "outer",
            BoundaryTag::Inner => "inner",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "outer" => Some(BoundaryTag::Outer),
            "inner" => Some(BoundaryTag::Inner),
            _ => None,
        }
    }
}

/// Conforming triangulation with counterclockwise triangles, canonical edge
/// numbering and boundary tags.
///
/// Edges are stored as sorted vertex pairs in lexicographic order. Local edge
/// `i` of a triangle joins its local vertices `i` and `(i + 1) % 3`.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_triangles: Vec<(usize, Option<usize>)>,
    triangle_edges: Vec<[usize; 3]>,
    vertex_tags: Vec<Option<BoundaryTag>>,
    edge_tags: Vec<Option<BoundaryTag>>,
    level: usize,
}

/// Summary statistics of a mesh (cf. the columns of a mesh-hierarchy table).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshStats {
    pub vertices: usize,
    pub edges: usize,
    pub triangles: usize,
    /// Largest triangle diameter (longest edge).
    pub h_max: f64,
    /// Smallest triangle diameter.
    pub h_min: f64,
    /// Largest circumcircle diameter.
    pub circumdiameter_max: f64,
    /// Minimum interior angle in degrees.
    pub min_angle_deg: f64,
}

/// Result of locating a point in a mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Inside { triangle: usize, barycentric: [f64; 3] },
    Outside,
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl TriMesh {
    /// Builds a mesh from raw parts, computing edges and adjacency and
    /// validating orientation, conformity and boundary tagging.
    ///
    /// Boundary edges inherit the tag of their endpoints; both endpoints must
    /// carry the same tag.
    pub fn from_parts(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        vertex_tags: Vec<Option<BoundaryTag>>,
        level: usize,
    ) -> Result<Self, MeshError> {
        if vertex_tags.len() != vertices.len() {
            return Err(MeshError::InvalidParameters(format!(
                "{} vertex tags for {} vertices",
                vertex_tags.len(),
                vertices.len()
            )));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(MeshError::InvalidParameters(format!(
                    "triangle {t} references a missing vertex"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(area > 0.0) {
                return Err(MeshError::Inverted(t, area));
            }
        }

        let mut edge_map: BTreeMap<[usize; 2], Vec<usize>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                edge_map.entry([a.min(b), a.max(b)]).or_default().push(t);
            }
        }
        let mut edges = Vec::with_capacity(edge_map.len());
        let mut edge_triangles = Vec::with_capacity(edge_map.len());
        let mut index_of = BTreeMap::new();
        for (e, (key, tris)) in edge_map.into_iter().enumerate() {
            let adj = match tris.as_slice() {
                [t] => (*t, None),
                [t0, t1] => (*t0, Some(*t1)),
                _ => return Err(MeshError::NonConforming(key[0], key[1])),
            };
            index_of.insert(key, e);
            edges.push(key);
            edge_triangles.push(adj);
        }
        let triangle_edges = triangles
            .iter()
            .map(|tri| {
                let mut te = [0; 3];
                for i in 0..3 {
                    let (a, b) = (tri[i], tri[(i + 1) % 3]);
                    te[i] = index_of[&[a.min(b), a.max(b)]];
                }
                te
            })
            .collect();

        let mut edge_tags = vec![None; edges.len()];
        for (e, key) in edges.iter().enumerate() {
            if edge_triangles[e].1.is_none() {
                match (vertex_tags[key[0]], vertex_tags[key[1]]) {
                    (Some(a), Some(b)) if a == b => edge_tags[e] = Some(a),
                    _ => return Err(MeshError::BadBoundaryTag(key[0], key[1])),
                }
            }
        }

        Ok(Self {
            vertices,
            triangles,
            edges,
            edge_triangles,
            triangle_edges,
            vertex_tags,
            edge_tags,
            level,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Triangles adjacent to each edge; the second is `None` on the boundary.
    pub fn edge_triangles(&self) -> &[(usize, Option<usize>)] {
        &self.edge_triangles
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn vertex_tags(&self) -> &[Option<BoundaryTag>] {
        &self.vertex_tags
    }

    pub fn edge_tags(&self) -> &[Option<BoundaryTag>] {
        &self.edge_tags
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    /// Sum of triangle areas, i.e. the area of the polygonal domain.
    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn edge_midpoint(&self, e: usize) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_triangles() as i64
    }

    /// Boundary loops as closed vertex cycles, each with its tag.
    ///
    /// Fails if the boundary edges do not form simple cycles.
    pub fn boundary_loops(&self) -> Result<Vec<(BoundaryTag, Vec<usize>)>, MeshError> {
        let mut next: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (e, &[a, b]) in self.edges.iter().enumerate() {
            if self.edge_triangles[e].1.is_none() {
                next.entry(a).or_default().push(b);
                next.entry(b).or_default().push(a);
            }
        }
        if let Some((v, _)) = next.iter().find(|(_, n)| n.len() != 2) {
            return Err(MeshError::Topology(format!(
                "boundary vertex {v} does not have exactly two boundary neighbours"
            )));
        }
        let mut visited = BTreeMap::new();
        let mut loops = Vec::new();
        for &start in next.keys() {
            if visited.contains_key(&start) {
                continue;
            }
            let mut cycle = vec![start];
            visited.insert(start, ());
            let (mut prev, mut cur) = (start, next[&start][0]);
            while cur != start {
                cycle.push(cur);
                visited.insert(cur, ());
                let n = &next[&cur];
                let nxt = if n[0] == prev { n[1] } else { n[0] };
                prev = cur;
                cur = nxt;
            }
            let tag = self.vertex_tags[start]
                .ok_or_else(|| MeshError::Topology(format!("untagged boundary vertex {start}")))?;
            if cycle.iter().any(|&v| self.vertex_tags[v] != Some(tag)) {
                return Err(MeshError::Topology("boundary loop mixes tags".into()));
            }
            loops.push((tag, cycle));
        }
        Ok(loops)
    }

    /// Checks the invariants shared by every mesh of a disk with one hole:
    /// Euler characteristic 0 and exactly one outer and one inner loop.
    pub fn check_annular_topology(&self) -> Result<(), MeshError> {
        let chi = self.euler_characteristic();
        if chi != 0 {
            return Err(MeshError::Topology(format!("Euler characteristic {chi}, expected 0")));
        }
        let loops = self.boundary_loops()?;
        let outer = loops.iter().filter(|(t, _)| *t == BoundaryTag::Outer).count();
        let inner = loops.iter().filter(|(t, _)| *t == BoundaryTag::Inner).count();
        if loops.len() != 2 || outer != 1 || inner != 1 {
            return Err(MeshError::Topology(format!(
                "{} boundary loops ({outer} outer, {inner} inner)",
                loops.len()
            )));
        }
        Ok(())
    }

    pub fn stats(&self) -> MeshStats {
        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        let mut circ_max: f64 = 0.0;
        let mut min_angle = f64::INFINITY;
        for t in 0..self.num_triangles() {
            let p = self.triangle_points(t);
            let len = [dist(p[0], p[1]), dist(p[1], p[2]), dist(p[2], p[0])];
            let diam = len.iter().copied().fold(0.0, f64::max);
            h_max = h_max.max(diam);
            h_min = h_min.min(diam);
            let area = signed_area(p[0], p[1], p[2]);
            circ_max = circ_max.max(len[0] * len[1] * len[2] / (2.0 * area));
            for i in 0..3 {
                // angle opposite edge i
                let (a, b, c) = (len[i], len[(i + 1) % 3], len[(i + 2) % 3]);
                let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos());
            }
        }
        MeshStats {
            vertices: self.num_vertices(),
            edges: self.num_edges(),
            triangles: self.num_triangles(),
            h_max,
            h_min,
            circumdiameter_max: circ_max,
            min_angle_deg: min_angle.to_degrees(),
        }
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area(a, b, c);
        let l0 = signed_area(p, b, c) / area;
        let l1 = signed_area(a, p, c) / area;
        [l0, l1, 1.0 - l0 - l1]
    }

    /// Finds the lowest-index triangle containing `p` (within [`LOCATE_TOL`]).
    pub fn locate(&self, p: Point) -> Location {
        for t in 0..self.num_triangles() {
            let bary = self.barycentric(t, p);
            if bary.iter().all(|&l| l >= -LOCATE_TOL && l <= 1.0 + LOCATE_TOL) {
                return Location::Inside { triangle: t, barycentric: bary };
            }
        }
        Location::Outside
    }
}
