//! Coarse-observation interpolation `I_H` expressed on the fine velocity
//! space of a nested hierarchy.
//!
//! An operator samples the fine field at coarse Lagrange nodes (which are
//! fine vertices by nesting) and evaluates the coarse interpolant at every
//! fine P2 node. Because coarse P1/P2 functions are exactly representable on
//! the fine P2 space, the result is the interpolant itself and the operator
//! is a projection.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use thiserror::Error;

use crate::fem::{Degree, FeField, FeSpace, SparseOperator, TriangleRule};
use crate::mesh::{MeshHierarchy, Point, TriMesh};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("coarse level {coarse} must be strictly coarser than fine level {fine}, both below {levels}")]
    NotNested { coarse: usize, fine: usize, levels: usize },
    #[error("unsupported interpolation degree {0}")]
    UnsupportedDegree(usize),
    #[error("linear-on-refined interpolation is piecewise linear (k = 1), got k = {0}")]
    VariantDegree(usize),
    #[error("field does not live on the operator's fine velocity space")]
    SpaceMismatch,
    #[error("rate measurement needs at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("norm index must be 0 or 1, got {0}")]
    BadNorm(usize),
}

/// Where the coarse interpolant lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InterpVariant {
    /// Degree-k Lagrange interpolation on the coarse triangles.
    OnCoarse,
    /// Piecewise linear interpolation on the once-refined coarse mesh; uses
    /// the same six nodes per coarse triangle as quadratic interpolation.
    LinearOnRefined,
}

impl InterpVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            InterpVariant::OnCoarse => "on_coarse",
            InterpVariant::LinearOnRefined => "linear_on_refined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "on_coarse" => Some(InterpVariant::OnCoarse),
            "linear_on_refined" => Some(InterpVariant::LinearOnRefined),
            _ => None,
        }
    }
}

/// Restrict-then-prolong interpolation matrix on a fine P2 velocity space.
#[derive(Clone, Debug)]
pub struct InterpOperator {
    k: usize,
    variant: InterpVariant,
    coarse_level: usize,
    fine_level: usize,
    sample_nodes: Vec<usize>,
    sample_coords: Vec<Point>,
    scalar: SparseOperator,
    matrix: SparseOperator,
    space: Arc<FeSpace>,
}

/// Snaps barycentric coordinates to the dyadic grid `2^-p`; nested P2 nodes
/// lie exactly on it.
fn snap(l: [f64; 3], p: usize) -> [f64; 3] {
    let s = (1u64 << p) as f64;
    let a = (l[0] * s).round() / s;
    let b = (l[1] * s).round() / s;
    [a, b, 1.0 - a - b]
}

/// Lagrange nodes of triangle `t` of a coarse mesh as vertex indices of the
/// once-refined mesh: three vertices, then midpoints of local edges.
fn p2_nodes(mesh: &TriMesh, t: usize) -> [usize; 6] {
    let [a, b, c] = mesh.triangles()[t];
    let nv = mesh.num_vertices();
    let [e0, e1, e2] = mesh.triangle_edges()[t];
    [a, b, c, nv + e0, nv + e1, nv + e2]
}

impl InterpOperator {
    /// Builds `I_H` from hierarchy level `coarse` onto `space`, the P2 vector
    /// space of hierarchy level `fine`.
    pub fn build(
        hierarchy: &MeshHierarchy,
        space: Arc<FeSpace>,
        coarse: usize,
        fine: usize,
        k: usize,
        variant: InterpVariant,
    ) -> Result<Self, InterpError> {
        let levels = hierarchy.num_levels();
        if !(coarse < fine && fine < levels) {
            return Err(InterpError::NotNested { coarse, fine, levels });
        }
        let degree = Degree::from_order(k).map_err(|_| InterpError::UnsupportedDegree(k))?;
        if variant == InterpVariant::LinearOnRefined && k != 1 {
            return Err(InterpError::VariantDegree(k));
        }
        let fine_mesh = hierarchy.level(fine);
        if space.degree() != Degree::P2
            || space.components() != 2
            || space.mesh().num_vertices() != fine_mesh.num_vertices()
            || space.mesh().triangles() != fine_mesh.triangles()
        {
            return Err(InterpError::SpaceMismatch);
        }

        // mesh carrying the interpolant and its local node table
        let (host_level, host_degree) = match variant {
            InterpVariant::OnCoarse => (coarse, degree),
            InterpVariant::LinearOnRefined => (coarse + 1, Degree::P1),
        };
        let host = hierarchy.level(host_level);
        let host_nodes = |t: usize| -> [usize; 6] {
            match host_degree {
                Degree::P2 => p2_nodes(host, t),
                Degree::P1 => {
                    let [a, b, c] = host.triangles()[t];
                    [a, b, c, usize::MAX, usize::MAX, usize::MAX]
                }
            }
        };

        let n = space.num_scalar_dofs();
        let mut owner = vec![usize::MAX; n];
        for t in 0..fine_mesh.num_triangles() {
            for &d in space.element_dofs(t) {
                if owner[d] == usize::MAX {
                    owner[d] = t;
                }
            }
        }
        let p = fine - host_level + 1;
        let mut triplets = Vec::new();
        let mut samples = BTreeSet::new();
        for (d, &tf) in owner.iter().enumerate() {
            let tc = hierarchy.ancestor(fine, tf, host_level);
            let l = snap(host.barycentric(tc, space.dof_coords()[d]), p);
            let (phi, np) = host_degree.basis(l);
            let nodes = host_nodes(tc);
            for i in 0..np {
                if phi[i] != 0.0 {
                    triplets.push((d, nodes[i], phi[i]));
                }
            }
            samples.extend(&nodes[..np]);
        }
        // every sample site is a coarse node; include nodes with zero weight
        let sample_nodes: Vec<usize> = samples.into_iter().collect();
        let sample_coords = sample_nodes.iter().map(|&v| fine_mesh.vertices()[v]).collect();
        let scalar = SparseOperator::from_triplets(n, n, &triplets);
        let matrix = scalar.block_diag(2);
        Ok(Self { k, variant, coarse_level: coarse, fine_level: fine, sample_nodes, sample_coords, scalar, matrix, space })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn variant(&self) -> InterpVariant {
        self.variant
    }

    pub fn coarse_level(&self) -> usize {
        self.coarse_level
    }

    pub fn fine_level(&self) -> usize {
        self.fine_level
    }

    /// Observation sites as fine scalar dof indices (ascending).
    pub fn sample_nodes(&self) -> &[usize] {
        &self.sample_nodes
    }

    pub fn sample_coords(&self) -> &[Point] {
        &self.sample_coords
    }

    /// Matrix acting on one velocity component.
    pub fn scalar_matrix(&self) -> &SparseOperator {
        &self.scalar
    }

    /// Matrix acting on full velocity coefficient vectors.
    pub fn matrix(&self) -> &SparseOperator {
        &self.matrix
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn apply_coeffs(&self, coeffs: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(coeffs)
    }

    pub fn apply(&self, field: &FeField) -> Result<FeField, InterpError> {
        if !Arc::ptr_eq(field.space(), &self.space) {
            return Err(InterpError::SpaceMismatch);
        }
        FeField::new(self.space.clone(), self.apply_coeffs(field.coeffs())).map_err(|_| InterpError::SpaceMismatch)
    }

    /// Writes the full matrix as `row col value` lines.
    pub fn write_triplets<W: Write>(&self, w: W) -> std::io::Result<()> {
        self.matrix.write_triplets(w)
    }
}

/// Result of an interpolation convergence study.
#[derive(Clone, Debug)]
pub struct InterpRate {
    /// Least-squares slope of log error against log H.
    pub rate: f64,
    /// Mesh sizes H (largest edge) per level.
    pub h: Vec<f64>,
    /// Interpolation errors per level.
    pub errors: Vec<f64>,
    /// `error / H^(k+1-m)` per level.
    pub constants: Vec<f64>,
    /// All errors negligible relative to the function norm.
    pub exact: bool,
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Measures `|phi - I_H^k phi|_m` on every hierarchy level, with the coarse
/// interpolant built on that level, and fits the convergence rate.
pub fn measure_interp_rate(
    hierarchy: &MeshHierarchy,
    k: usize,
    phi: &dyn Fn(Point) -> f64,
    grad: &dyn Fn(Point) -> [f64; 2],
    m: usize,
) -> Result<InterpRate, InterpError> {
    if hierarchy.num_levels() < 3 {
        return Err(InterpError::TooFewLevels(hierarchy.num_levels()));
    }
    if m > 1 {
        return Err(InterpError::BadNorm(m));
    }
    let degree = Degree::from_order(k).map_err(|_| InterpError::UnsupportedDegree(k))?;
    let rule = TriangleRule::degree6();
    let nodes: [[f64; 3]; 6] =
        [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]];
    let (mut hs, mut errors, mut exact) = (Vec::new(), Vec::new(), true);
    for mesh in hierarchy.levels() {
        let (mut err, mut reference) = (0.0, 0.0);
        for t in 0..mesh.num_triangles() {
            let pts = mesh.triangle_points(t);
            let g = crate::fem::ElementGeometry::new(pts);
            let np = degree.nodes_per_element();
            let vals: Vec<f64> = nodes[..np].iter().map(|&l| phi(g.point(l))).collect();
            for (q, &l) in rule.points.iter().enumerate() {
                let w = rule.weights[q] * g.area;
                let x = g.point(l);
                let (basis, _) = degree.basis(l);
                let dl = degree.basis_dlambda(l);
                if m == 0 {
                    let ih: f64 = (0..np).map(|i| basis[i] * vals[i]).sum();
                    let v = phi(x);
                    err += w * (v - ih).powi(2);
                    reference += w * v * v;
                } else {
                    let mut gih = [0.0; 2];
                    for i in 0..np {
                        let gi = g.gradient(dl[i]);
                        gih[0] += gi[0] * vals[i];
                        gih[1] += gi[1] * vals[i];
                    }
                    let gv = grad(x);
                    err += w * ((gv[0] - gih[0]).powi(2) + (gv[1] - gih[1]).powi(2));
                    reference += w * (gv[0] * gv[0] + gv[1] * gv[1]);
                }
            }
        }
        let (err, reference) = (err.sqrt(), reference.sqrt());
        exact &= err <= 1e-12 * reference.max(1e-300);
        hs.push(mesh.stats().h_max);
        errors.push(err);
    }
    let order = (k + 1 - m) as i32;
    let constants = errors.iter().zip(&hs).map(|(e, h)| e / h.powi(order)).collect();
    let rate = if exact {
        f64::NAN
    } else {
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        fit_slope(&lx, &ly)
    };
    Ok(InterpRate { rate, h: hs, errors, constants, exact })
}

#[cfg(test)]
mod tests;
