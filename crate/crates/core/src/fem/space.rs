use std::sync::Arc;

use super::FemError;
use crate::mesh::{BoundaryTag, Point, TriMesh};

/// Polynomial degree of a Lagrange space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Degree {
    P1,
    P2,
}

impl Degree {
    pub fn from_order(k: usize) -> Result<Self, FemError> {
        match k {
            1 => Ok(Degree::P1),
            2 => Ok(Degree::P2),
            _ => Err(FemError::UnsupportedDegree(k)),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Degree::P1 => 1,
            Degree::P2 => 2,
        }
    }

    pub fn nodes_per_element(self) -> usize {
        match self {
            Degree::P1 => 3,
            Degree::P2 => 6,
        }
    }

    /// Values of the local basis at barycentric point `l`.
    ///
    /// P2 local nodes: vertices 0, 1, 2, then midpoints of edges (0,1),
    /// (1,2), (2,0).
    pub fn basis(self, l: [f64; 3]) -> ([f64; 6], usize) {
        match self {
            Degree::P1 => ([l[0], l[1], l[2], 0.0, 0.0, 0.0], 3),
            Degree::P2 => (
                [
                    l[0] * (2.0 * l[0] - 1.0),
                    l[1] * (2.0 * l[1] - 1.0),
                    l[2] * (2.0 * l[2] - 1.0),
                    4.0 * l[0] * l[1],
                    4.0 * l[1] * l[2],
                    4.0 * l[2] * l[0],
                ],
                6,
            ),
        }
    }

    /// Derivatives of the local basis with respect to the barycentric
    /// coordinates, `d[i][a] = dphi_i / dlambda_a`.
    pub fn basis_dlambda(self, l: [f64; 3]) -> [[f64; 3]; 6] {
        match self {
            Degree::P1 => {
                let mut d = [[0.0; 3]; 6];
                for (i, row) in d.iter_mut().enumerate().take(3) {
                    row[i] = 1.0;
                }
                d
            }
            Degree::P2 => [
                [4.0 * l[0] - 1.0, 0.0, 0.0],
                [0.0, 4.0 * l[1] - 1.0, 0.0],
                [0.0, 0.0, 4.0 * l[2] - 1.0],
                [4.0 * l[1], 4.0 * l[0], 0.0],
                [0.0, 4.0 * l[2], 4.0 * l[1]],
                [4.0 * l[2], 0.0, 4.0 * l[0]],
            ],
        }
    }
}

/// Affine data of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub points: [Point; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(points: [Point; 3]) -> Self {
        let [a, b, c] = points;
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let grad_lambda = [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ];
        Self { points, area: 0.5 * two_area, grad_lambda }
    }

    pub fn point(&self, l: [f64; 3]) -> Point {
        let [a, b, c] = self.points;
        [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]]
    }

    /// Physical gradient from barycentric derivatives.
    pub fn gradient(&self, d: [f64; 3]) -> [f64; 2] {
        let g = &self.grad_lambda;
        [
            d[0] * g[0][0] + d[1] * g[1][0] + d[2] * g[2][0],
            d[0] * g[0][1] + d[1] * g[1][1] + d[2] * g[2][1],
        ]
    }
}

/// Continuous Lagrange space of degree 1 or 2 over a mesh, scalar or
/// two-component.
///
/// Scalar numbering: vertex `v` is dof `v`; for P2 the midpoint of edge `e`
/// is dof `V + e`. A vector space stores component `c` of scalar dof `i` at
/// `c * N + i`.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<TriMesh>,
    degree: Degree,
    components: usize,
    dof_map: Vec<[usize; 6]>,
    dof_coords: Vec<Point>,
    boundary: Vec<Option<BoundaryTag>>,
}

impl FeSpace {
    pub fn new(mesh: Arc<TriMesh>, degree: Degree, components: usize) -> Result<Self, FemError> {
        if components != 1 && components != 2 {
            return Err(FemError::UnsupportedComponents(components));
        }
        let nv = mesh.num_vertices();
        let mut dof_coords = mesh.vertices().to_vec();
        let mut boundary = mesh.vertex_tags().to_vec();
        if degree == Degree::P2 {
            for e in 0..mesh.num_edges() {
                dof_coords.push(mesh.edge_midpoint(e));
                boundary.push(mesh.edge_tags()[e]);
            }
        }
        let dof_map = mesh
            .triangles()
            .iter()
            .zip(mesh.triangle_edges())
            .map(|(t, e)| match degree {
                Degree::P1 => [t[0], t[1], t[2], usize::MAX, usize::MAX, usize::MAX],
                Degree::P2 => [t[0], t[1], t[2], nv + e[0], nv + e[1], nv + e[2]],
            })
            .collect();
        Ok(Self { mesh, degree, components, dof_map, dof_coords, boundary })
    }

    /// Taylor-Hood pair on one mesh: P2 vector velocity and P1 scalar pressure.
    pub fn taylor_hood(mesh: Arc<TriMesh>) -> Result<(Arc<Self>, Arc<Self>), FemError> {
        let velocity = Self::new(mesh.clone(), Degree::P2, 2)?;
        let pressure = Self::new(mesh, Degree::P1, 1)?;
        Ok((Arc::new(velocity), Arc::new(pressure)))
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Number of scalar dofs (per component).
    pub fn num_scalar_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    /// Total coefficient count.
    pub fn num_dofs(&self) -> usize {
        self.components * self.num_scalar_dofs()
    }

    /// Global scalar dofs of triangle `t` in local order.
    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.dof_map[t][..self.degree.nodes_per_element()]
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Boundary tag of each scalar dof (None for interior dofs).
    pub fn boundary_tags(&self) -> &[Option<BoundaryTag>] {
        &self.boundary
    }

    pub fn boundary_scalar_dofs(&self) -> impl Iterator<Item = (usize, BoundaryTag)> + '_ {
        self.boundary.iter().enumerate().filter_map(|(i, t)| t.map(|t| (i, t)))
    }

    pub fn geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.triangle_points(t))
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// Coefficient vector over an [`FeSpace`].
#[derive(Clone, Debug)]
pub struct FeField {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeField {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<Self, FemError> {
        if coeffs.len() != space.num_dofs() {
            return Err(FemError::LengthMismatch { expected: space.num_dofs(), found: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(FemError::NonFinite(i));
        }
        Ok(Self { space, coeffs })
    }

    pub fn zeros(space: Arc<FeSpace>) -> Self {
        let n = space.num_dofs();
        Self { space, coeffs: vec![0.0; n] }
    }

    /// Nodal interpolant of a scalar function on a scalar space.
    pub fn interpolate_scalar(space: Arc<FeSpace>, f: impl Fn(Point) -> f64) -> Self {
        assert_eq!(space.components(), 1);
        let coeffs = space.dof_coords().iter().map(|&p| f(p)).collect();
        Self { space, coeffs }
    }

    /// Nodal interpolant of a vector function on a vector space.
    pub fn interpolate_vector(space: Arc<FeSpace>, f: impl Fn(Point) -> [f64; 2]) -> Self {
        assert_eq!(space.components(), 2);
        let n = space.num_scalar_dofs();
        let mut coeffs = vec![0.0; 2 * n];
        for (i, &p) in space.dof_coords().iter().enumerate() {
            let v = f(p);
            coeffs[i] = v[0];
            coeffs[n + i] = v[1];
        }
        Self { space, coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficients of component `c`.
    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.space.num_scalar_dofs();
        &self.coeffs[c * n..(c + 1) * n]
    }

    /// Field value in triangle `t` at barycentric point `l`, per component.
    pub fn eval_in(&self, t: usize, l: [f64; 3]) -> [f64; 2] {
        let (phi, n) = self.space.degree().basis(l);
        let dofs = self.space.element_dofs(t);
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate().take(self.space.components()) {
            let comp = self.component(c);
            *o = (0..n).map(|i| phi[i] * comp[dofs[i]]).sum();
        }
        out
    }

    /// Field gradient in triangle `t` at barycentric point `l`;
    /// `g[c]` is the gradient of component `c`.
    pub fn grad_in(&self, t: usize, l: [f64; 3]) -> [[f64; 2]; 2] {
        let geom = self.space.geometry(t);
        let d = self.space.degree().basis_dlambda(l);
        let dofs = self.space.element_dofs(t);
        let mut out = [[0.0; 2]; 2];
        for (c, o) in out.iter_mut().enumerate().take(self.space.components()) {
            let comp = self.component(c);
            for (i, &dof) in dofs.iter().enumerate() {
                let g = geom.gradient(d[i]);
                o[0] += comp[dof] * g[0];
                o[1] += comp[dof] * g[1];
            }
        }
        out
    }
}
