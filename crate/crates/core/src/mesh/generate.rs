use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::{signed_area, BoundaryTag, MeshError, Point, TriMesh};

/// A unit-style domain: the disk of radius `outer_radius` centred at the
/// origin, minus the disk of radius `inner_radius` centred at `inner_center`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RingDomain {
    pub outer_radius: f64,
    pub inner_center: Point,
    pub inner_radius: f64,
}

impl RingDomain {
    fn validate(&self) -> Result<(), MeshError> {
        let offset = self.inner_center[0].hypot(self.inner_center[1]);
        if !(self.inner_radius > 0.0
            && self.inner_radius < self.outer_radius
            && offset + self.inner_radius < self.outer_radius)
        {
            return Err(MeshError::InvalidParameters(format!(
                "inner circle (centre {:?}, radius {}) must lie strictly inside the outer circle (radius {})",
                self.inner_center, self.inner_radius, self.outer_radius
            )));
        }
        Ok(())
    }

    /// Point on the layer circle with parameter `s` in [0, 1]; s = 0 is the
    /// inner circle and s = 1 the outer circle. Distinct `s` give disjoint
    /// nested circles.
    fn layer_point(&self, s: f64, angle: f64) -> Point {
        let (r, big_r, c) = (self.inner_radius, self.outer_radius, self.inner_center);
        let rho = (1.0 - s) * r + s * big_r;
        [(1.0 - s) * c[0] + rho * angle.cos(), (1.0 - s) * c[1] + rho * angle.sin()]
    }
}

/// Triangulates the annulus `r_inner <= |x| <= r_outer` with regular
/// `n_outer`- and `n_inner`-gon boundary loops.
pub fn generate_annulus(
    n_outer: usize,
    n_inner: usize,
    r_outer: f64,
    r_inner: f64,
) -> Result<TriMesh, MeshError> {
    generate_ring_domain(
        RingDomain { outer_radius: r_outer, inner_center: [0.0, 0.0], inner_radius: r_inner },
        n_outer,
        n_inner,
    )
}

/// Triangulates the unit disk minus the disk of radius 0.1 centred at (0.5, 0).
pub fn generate_offset_disk(n_outer: usize, n_inner: usize) -> Result<TriMesh, MeshError> {
    generate_ring_domain(
        RingDomain { outer_radius: 1.0, inner_center: [0.5, 0.0], inner_radius: 0.1 },
        n_outer,
        n_inner,
    )
}

/// Constrained Delaunay triangulation of a ring domain.
///
/// Interior vertices sit on `m` - 1 nested layer circles between the two
/// boundary loops, each carrying `n_inner` vertices rotated by half a step on
/// odd layers. Layer radii grow geometrically and `m` is chosen so that
/// layer spacing matches the height of an equilateral triangle on the inner
/// loop. Adjacent layers are stitched into strips, then Lawson flips restore
/// the Delaunay property with the boundary edges held fixed.
pub fn generate_ring_domain(
    domain: RingDomain,
    n_outer: usize,
    n_inner: usize,
) -> Result<TriMesh, MeshError> {
    if n_outer < 8 || n_inner < 6 {
        return Err(MeshError::InvalidParameters(format!(
            "need n_outer >= 8 and n_inner >= 6, got ({n_outer}, {n_inner})"
        )));
    }
    domain.validate()?;
    let (r, big_r) = (domain.inner_radius, domain.outer_radius);
    let layer_step = PI * 3f64.sqrt() / n_inner as f64;
    let m = ((big_r / r).ln() / layer_step).round().max(1.0) as usize;

    let mut vertices: Vec<Point> = Vec::new();
    let mut tags = Vec::new();
    let mut layers: Vec<Vec<(f64, usize)>> = vec![Vec::new(); m + 1];

    let mut push_layer = |j: usize, count: usize, offset: f64, s: f64, tag: Option<BoundaryTag>| {
        for k in 0..count {
            let angle = 2.0 * PI * (k as f64 + offset) / count as f64;
            layers[j].push((angle, vertices.len()));
            let p = match j {
                0 => [
                    domain.inner_center[0] + r * angle.cos(),
                    domain.inner_center[1] + r * angle.sin(),
                ],
                _ if j == m => [big_r * angle.cos(), big_r * angle.sin()],
                _ => domain.layer_point(s, angle),
            };
            vertices.push(p);
            tags.push(tag);
        }
    };
    push_layer(m, n_outer, 0.0, 1.0, Some(BoundaryTag::Outer));
    push_layer(0, n_inner, 0.0, 0.0, Some(BoundaryTag::Inner));
    for j in 1..m {
        let rho = r * (big_r / r).powf(j as f64 / m as f64);
        let s = (rho - r) / (big_r - r);
        push_layer(j, n_inner, 0.5 * (j % 2) as f64, s, None);
    }

    let mut triangles = Vec::new();
    for j in 0..m {
        stitch_strip(&vertices, &layers[j], &layers[j + 1], &mut triangles)?;
    }
    lawson_flip(&vertices, &mut triangles);

    let mesh = TriMesh::from_parts(vertices, triangles, tags, 0)?;
    mesh.check_annular_topology()?;
    Ok(mesh)
}

/// Triangulates the strip between an inner ring `a` and an outer ring `b`,
/// both sorted by increasing angle, by merging their angular sequences.
fn stitch_strip(
    vertices: &[Point],
    a: &[(f64, usize)],
    b: &[(f64, usize)],
    out: &mut Vec<[usize; 3]>,
) -> Result<(), MeshError> {
    let angle = |ring: &[(f64, usize)], i: usize| {
        let n = ring.len();
        ring[i % n].0 + if i >= n { 2.0 * PI } else { 0.0 }
    };
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_a = j == nb || (i < na && angle(a, i + 1) <= angle(b, j + 1));
        let tri = if advance_a {
            let t = [a[i % na].1, b[j % nb].1, a[(i + 1) % na].1];
            i += 1;
            t
        } else {
            let t = [a[i % na].1, b[j % nb].1, b[(j + 1) % nb].1];
            j += 1;
            t
        };
        let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
        if !(area > 0.0) {
            return Err(MeshError::Inverted(out.len(), area));
        }
        out.push(tri);
    }
    Ok(())
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle (a, b, c).
fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Flips interior edges that violate the empty-circumcircle condition until
/// none remain. Edges with a single adjacent triangle are never touched.
fn lawson_flip(vertices: &[Point], triangles: &mut [[usize; 3]]) {
    loop {
        let mut adjacency: BTreeMap<[usize; 2], Vec<(usize, usize)>> = BTreeMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                adjacency.entry([a.min(b), a.max(b)]).or_default().push((t, i));
            }
        }
        let mut touched = vec![false; triangles.len()];
        let mut flipped = false;
        for sides in adjacency.values() {
            let &[(t1, i1), (t2, i2)] = sides.as_slice() else { continue };
            if touched[t1] || touched[t2] {
                continue;
            }
            let (a, b, c) = (triangles[t1][i1], triangles[t1][(i1 + 1) % 3], triangles[t1][(i1 + 2) % 3]);
            let d = triangles[t2][(i2 + 2) % 3];
            let (pa, pb, pc, pd) = (vertices[a], vertices[b], vertices[c], vertices[d]);
            let scale = [pa, pb, pc]
                .iter()
                .map(|p| (p[0] - pd[0]).hypot(p[1] - pd[1]))
                .fold(0.0, f64::max);
            if incircle(pa, pb, pc, pd) <= 1e-12 * scale.powi(4) {
                continue;
            }
            if signed_area(pa, pd, pc) <= 0.0 || signed_area(pd, pb, pc) <= 0.0 {
                continue;
            }
            triangles[t1] = [a, d, c];
            triangles[t2] = [d, b, c];
            touched[t1] = true;
            touched[t2] = true;
            flipped = true;
        }
        if !flipped {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_delaunay(mesh: &TriMesh) {
        for (e, &(t1, t2)) in mesh.edge_triangles().iter().enumerate() {
            let Some(t2) = t2 else { continue };
            let [a, b] = mesh.edges()[e];
            let opposite = |t: usize| *mesh.triangles()[t].iter().find(|&&v| v != a && v != b).unwrap();
            let p = mesh.triangle_points(t1);
            let d = mesh.vertices()[opposite(t2)];
            let scale = mesh.stats().h_max.powi(4);
            assert!(incircle(p[0], p[1], p[2], d) <= 1e-10 * scale, "edge {e} is not locally Delaunay");
        }
    }

    #[test]
    fn annulus_level_one_counts() {
        let m = generate_annulus(20, 18, 1.0, 0.1).unwrap();
        assert_eq!(m.num_vertices(), 164);
        assert_eq!(m.num_triangles(), 290);
        assert_eq!(m.num_edges(), 454);
        assert_eq!(m.euler_characteristic(), 0);
    }

    #[test]
    fn annulus_is_delaunay() {
        assert_delaunay(&generate_annulus(20, 18, 1.0, 0.1).unwrap());
        assert_delaunay(&generate_offset_disk(20, 18).unwrap());
    }

    #[test]
    fn boundary_vertices_on_polygons() {
        let m = generate_annulus(20, 18, 1.0, 0.1).unwrap();
        for (v, tag) in m.vertex_tags().iter().enumerate() {
            let p = m.vertices()[v];
            let r = p[0].hypot(p[1]);
            match tag {
                Some(BoundaryTag::Outer) => assert!((r - 1.0).abs() < 1e-15),
                Some(BoundaryTag::Inner) => assert!((r - 0.1).abs() < 1e-15),
                None => assert!(r > 0.1 && r < 1.0),
            }
        }
        for t in 0..m.num_triangles() {
            assert!(m.triangle_area(t) > 0.0);
        }
    }

    #[test]
    fn offset_disk_loops() {
        let m = generate_offset_disk(20, 18).unwrap();
        assert_eq!(m.euler_characteristic(), 0);
        let loops = m.boundary_loops().unwrap();
        assert_eq!(loops.len(), 2);
        let (_, inner) = loops.iter().find(|(t, _)| *t == BoundaryTag::Inner).unwrap();
        let n = inner.len() as f64;
        let cx: f64 = inner.iter().map(|&v| m.vertices()[v][0]).sum::<f64>() / n;
        let cy: f64 = inner.iter().map(|&v| m.vertices()[v][1]).sum::<f64>() / n;
        assert!((cx - 0.5).abs() < 1e-12 && cy.abs() < 1e-12);
    }

    #[test]
    fn offset_disk_finer_parameters_shrink_h() {
        let coarse = generate_offset_disk(20, 18).unwrap().stats();
        let fine = generate_offset_disk(40, 36).unwrap().stats();
        assert!(fine.h_max < coarse.h_max);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_annulus(7, 18, 1.0, 0.1).is_err());
        assert!(generate_annulus(20, 5, 1.0, 0.1).is_err());
        assert!(generate_annulus(20, 18, 1.0, 1.0).is_err());
        assert!(generate_annulus(20, 18, 1.0, 0.0).is_err());
        let bad = RingDomain { outer_radius: 1.0, inner_center: [0.95, 0.0], inner_radius: 0.1 };
        assert!(generate_ring_domain(bad, 20, 18).is_err());
    }
}
