use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{FeSpace, FemError, SparseOperator};
use crate::mesh::{BoundaryTag, Point};

/// Boundary value as a function of position and time.
pub type BcFn = Arc<dyn Fn(Point, f64) -> [f64; 2] + Send + Sync>;

/// Strong velocity boundary conditions keyed by boundary tag.
#[derive(Clone, Default)]
pub struct DirichletBc {
    values: BTreeMap<BoundaryTag, BcFn>,
}

impl fmt::Debug for DirichletBc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.values.keys()).finish()
    }
}

impl DirichletBc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: BoundaryTag, f: impl Fn(Point, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.values.insert(tag, Arc::new(f));
        self
    }

    /// Zero velocity on both circles.
    pub fn no_slip() -> Self {
        Self::new().with(BoundaryTag::Outer, |_, _| [0.0, 0.0]).with(BoundaryTag::Inner, |_, _| [0.0, 0.0])
    }

    /// Rigid rotation `(-y, x) / r_outer` on the outer circle (unit tangential
    /// speed there), no-slip on the inner circle.
    pub fn outer_rotation(r_outer: f64) -> Self {
        Self::new()
            .with(BoundaryTag::Outer, move |p, _| [-p[1] / r_outer, p[0] / r_outer])
            .with(BoundaryTag::Inner, |_, _| [0.0, 0.0])
    }

    pub fn get(&self, tag: BoundaryTag) -> Option<&BcFn> {
        self.values.get(&tag)
    }

    /// Constrained global dofs of a vector space and their values at time `t`,
    /// sorted by dof index.
    pub fn constraints(&self, space: &FeSpace, t: f64) -> Result<Vec<(usize, f64)>, FemError> {
        let n = space.num_scalar_dofs();
        let mut out = Vec::new();
        for (i, tag) in space.boundary_scalar_dofs() {
            let f = self.values.get(&tag).ok_or(FemError::MissingBoundaryTag(tag))?;
            let v = f(space.dof_coords()[i], t);
            for c in 0..space.components() {
                out.push((c * n + i, v[c]));
            }
        }
        out.sort_by_key(|&(d, _)| d);
        Ok(out)
    }
}

/// Row elimination: each constrained row becomes the identity row with the
/// prescribed value on the right-hand side; couplings to constrained columns
/// in other rows move to the right-hand side and are zeroed in place, so the
/// pattern is unchanged and a symmetric operator stays symmetric.
pub fn apply_dirichlet(op: &mut SparseOperator, rhs: &mut [f64], constraints: &[(usize, f64)]) {
    assert_eq!(op.nrows(), rhs.len());
    let mut fixed: Vec<Option<f64>> = vec![None; op.ncols()];
    for &(d, g) in constraints {
        fixed[d] = Some(g);
    }
    let row_ptr = op.row_ptr().to_vec();
    let col_idx = op.col_idx().to_vec();
    let values = op.values_mut();
    for r in 0..rhs.len() {
        let range = row_ptr[r]..row_ptr[r + 1];
        if let Some(g) = fixed.get(r).copied().flatten() {
            for k in range {
                values[k] = if col_idx[k] == r { 1.0 } else { 0.0 };
            }
            rhs[r] = g;
        } else {
            for k in range {
                if let Some(g) = fixed[col_idx[k]] {
                    rhs[r] -= values[k] * g;
                    values[k] = 0.0;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Degree, FeSpace};
    use crate::mesh::generate_annulus;

    #[test]
    fn preset_values() {
        let mesh = Arc::new(generate_annulus(20, 18, 1.0, 0.1).unwrap());
        let vel = FeSpace::new(mesh, Degree::P2, 2).unwrap();
        let n = vel.num_scalar_dofs();
        let cons = DirichletBc::outer_rotation(1.0).constraints(&vel, 0.0).unwrap();
        assert_eq!(cons.len(), 2 * 2 * (20 + 18));
        for &(d, g) in &cons {
            let i = d % n;
            let p = vel.dof_coords()[i];
            let want = match vel.boundary_tags()[i].unwrap() {
                BoundaryTag::Outer => {
                    if d < n {
                        -p[1]
                    } else {
                        p[0]
                    }
                }
                BoundaryTag::Inner => 0.0,
            };
            assert_eq!(g, want);
        }
        let cons = DirichletBc::no_slip().constraints(&vel, 3.0).unwrap();
        assert!(cons.iter().all(|&(_, g)| g == 0.0));
        let partial = DirichletBc::new().with(BoundaryTag::Outer, |_, _| [0.0; 2]);
        assert!(matches!(partial.constraints(&vel, 0.0), Err(FemError::MissingBoundaryTag(BoundaryTag::Inner))));
    }

    #[test]
    fn elimination_keeps_symmetry_and_values() {
        let mut a = SparseOperator::from_triplets(
            3,
            3,
            &[(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0), (1, 2, 1.0), (2, 1, 1.0), (2, 2, 2.0)],
        );
        let mut rhs = vec![1.0, 2.0, 3.0];
        apply_dirichlet(&mut a, &mut rhs, &[(2, 5.0)]);
        assert_eq!(a.symmetry_defect(), 0.0);
        assert_eq!(a.get(2, 2), 1.0);
        assert_eq!(a.get(1, 2), 0.0);
        assert_eq!(rhs, vec![1.0, -3.0, 5.0]);
        assert_eq!(a.nnz(), 7);
    }
}
