use super::{MeshError, Point, TriMesh};

/// Origin of a vertex of a refined mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexParent {
    Vertex(usize),
    EdgeMidpoint(usize),
}

/// Lineage from one refinement step.
///
/// Coarse vertex `v` keeps index `v`; the midpoint of coarse edge `e` gets
/// index `V + e`. Fine triangle `4 t + i` is child `i` of coarse triangle `t`.
#[derive(Clone, Debug)]
pub struct RefinementMap {
    pub vertex_parent: Vec<VertexParent>,
    pub triangle_parent: Vec<usize>,
}

/// Splits every triangle into four by joining edge midpoints. Midpoints of
/// boundary edges stay on the straight polygon edge and inherit its tag.
pub fn refine_uniform(mesh: &TriMesh) -> Result<(TriMesh, RefinementMap), MeshError> {
    let nv = mesh.num_vertices();
    let mut vertices: Vec<Point> = mesh.vertices().to_vec();
    let mut tags = mesh.vertex_tags().to_vec();
    let mut vertex_parent: Vec<VertexParent> = (0..nv).map(VertexParent::Vertex).collect();
    for e in 0..mesh.num_edges() {
        vertices.push(mesh.edge_midpoint(e));
        tags.push(mesh.edge_tags()[e]);
        vertex_parent.push(VertexParent::EdgeMidpoint(e));
    }

    let mut triangles = Vec::with_capacity(4 * mesh.num_triangles());
    let mut triangle_parent = Vec::with_capacity(4 * mesh.num_triangles());
    for (t, (&[a, b, c], &[e01, e12, e20])) in
        mesh.triangles().iter().zip(mesh.triangle_edges()).enumerate()
    {
        let (m01, m12, m20) = (nv + e01, nv + e12, nv + e20);
        triangles.extend_from_slice(&[[a, m01, m20], [m01, b, m12], [m20, m12, c], [m01, m12, m20]]);
        triangle_parent.extend_from_slice(&[t; 4]);
    }

    let fine = TriMesh::from_parts(vertices, triangles, tags, mesh.level() + 1)?;
    Ok((fine, RefinementMap { vertex_parent, triangle_parent }))
}

/// Nested meshes from coarsest (index 0) to finest.
///
/// Index `i` corresponds to the conventional "Mesh Level 2^i" naming
/// (1, 2, 4, 8, ...).
#[derive(Clone, Debug)]
pub struct MeshHierarchy {
    levels: Vec<TriMesh>,
    maps: Vec<RefinementMap>,
}

impl MeshHierarchy {
    pub fn new(base: TriMesh, refinements: usize) -> Result<Self, MeshError> {
        let mut levels = vec![base];
        let mut maps = Vec::with_capacity(refinements);
        for _ in 0..refinements {
            let (fine, map) = refine_uniform(levels.last().unwrap())?;
            levels.push(fine);
            maps.push(map);
        }
        Ok(Self { levels, maps })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, i: usize) -> &TriMesh {
        &self.levels[i]
    }

    pub fn levels(&self) -> &[TriMesh] {
        &self.levels
    }

    pub fn finest(&self) -> &TriMesh {
        self.levels.last().unwrap()
    }

    /// Lineage of the step from level `i` to level `i + 1`.
    pub fn refinement(&self, i: usize) -> &RefinementMap {
        &self.maps[i]
    }

    /// Ancestor at level `coarse` of triangle `t` of level `fine`.
    pub fn ancestor(&self, fine: usize, t: usize, coarse: usize) -> usize {
        assert!(coarse <= fine && fine < self.levels.len());
        t >> (2 * (fine - coarse))
    }

    /// Conventional mesh-level label (1, 2, 4, 8, ...) of hierarchy index `i`.
    pub fn label(i: usize) -> usize {
        1 << i
    }

    /// Hierarchy index of a mesh-level label; `None` unless a power of two.
    pub fn index_of_label(label: usize) -> Option<usize> {
        label.is_power_of_two().then(|| label.trailing_zeros() as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_annulus, BoundaryTag};

    #[test]
    fn single_triangle_split() {
        let m = TriMesh::from_parts(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            vec![Some(BoundaryTag::Outer); 3],
            0,
        )
        .unwrap();
        let (fine, map) = refine_uniform(&m).unwrap();
        assert_eq!(fine.num_vertices(), 6);
        assert_eq!(fine.num_triangles(), 4);
        assert_eq!(fine.num_edges(), 9);
        assert_eq!(map.triangle_parent, vec![0; 4]);
        for t in 0..4 {
            assert!((fine.triangle_area(t) - 0.125).abs() < 1e-16);
        }
    }

    #[test]
    fn table_counts_through_level_eight() {
        let h = MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), 3).unwrap();
        let counts: Vec<_> =
            h.levels().iter().map(|m| (m.num_vertices(), m.num_triangles())).collect();
        assert_eq!(counts, vec![(164, 290), (618, 1160), (2396, 4640), (9432, 18560)]);
        for i in 0..3 {
            let (c, f) = (h.level(i), h.level(i + 1));
            assert_eq!(f.num_vertices(), c.num_vertices() + c.num_edges());
            assert_eq!(f.num_edges(), 2 * c.num_edges() + 3 * c.num_triangles());
            assert_eq!(f.num_triangles(), 4 * c.num_triangles());
            f.check_annular_topology().unwrap();
        }
    }

    #[test]
    fn nesting_is_bitwise_and_h_halves() {
        let h = MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), 2).unwrap();
        let base = h.level(0);
        for lvl in h.levels() {
            for (v, p) in base.vertices().iter().enumerate() {
                assert_eq!(lvl.vertices()[v][0].to_bits(), p[0].to_bits());
                assert_eq!(lvl.vertices()[v][1].to_bits(), p[1].to_bits());
            }
        }
        let (s0, s1) = (h.level(0).stats(), h.level(1).stats());
        assert!((s1.h_max - 0.5 * s0.h_max).abs() < 1e-15);
        assert!((h.level(1).area() - h.level(0).area()).abs() < 1e-14);
    }

    #[test]
    fn children_lie_in_parent() {
        let h = MeshHierarchy::new(generate_annulus(20, 18, 1.0, 0.1).unwrap(), 2).unwrap();
        let fine = h.level(2);
        for t in 0..fine.num_triangles() {
            let anc = h.ancestor(2, t, 0);
            for p in fine.triangle_points(t) {
                let bary = h.level(0).barycentric(anc, p);
                assert!(bary.iter().all(|&l| l > -1e-12));
            }
        }
    }

    #[test]
    fn labels() {
        assert_eq!(MeshHierarchy::label(3), 8);
        assert_eq!(MeshHierarchy::index_of_label(4), Some(2));
        assert_eq!(MeshHierarchy::index_of_label(3), None);
    }
}
