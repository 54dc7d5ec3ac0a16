use super::{FeField, FeSpace, FemError, SparseOperator, TriangleRule};
use crate::mesh::Point;

/// Basis values and barycentric derivatives at the quadrature points of
/// the degree-6 rule.
#[derive(Clone, Debug)]
pub struct BasisTable {
    pub rule: TriangleRule,
    pub nodes: usize,
    pub phi: Vec<[f64; 6]>,
    pub dlambda: Vec<[[f64; 3]; 6]>,
}

impl BasisTable {
    pub fn new(space: &FeSpace) -> Self {
        let rule = TriangleRule::degree6();
        let degree = space.degree();
        let phi = rule.points.iter().map(|&l| degree.basis(l).0).collect();
        let dlambda = rule.points.iter().map(|&l| degree.basis_dlambda(l)).collect();
        Self { rule, nodes: degree.nodes_per_element(), phi, dlambda }
    }
}

/// Scalar CSR pattern of all element couplings between a row space and a
/// column space on one mesh, with the storage slot of every local entry.
///
/// Operators built from one pattern share storage layout, so their values
/// can be combined index by index.
#[derive(Clone, Debug)]
pub struct ElementPattern {
    template: SparseOperator,
    rows_per_elem: usize,
    cols_per_elem: usize,
    slots: Vec<usize>,
}

impl ElementPattern {
    pub fn new(row_space: &FeSpace, col_space: &FeSpace) -> Result<Self, FemError> {
        if !row_space.same_mesh(col_space) {
            return Err(FemError::MeshMismatch);
        }
        let nt = row_space.mesh().num_triangles();
        let (nr, nc) = (row_space.num_scalar_dofs(), col_space.num_scalar_dofs());
        let mut triplets = Vec::new();
        for t in 0..nt {
            for &i in row_space.element_dofs(t) {
                for &j in col_space.element_dofs(t) {
                    triplets.push((i, j, 0.0));
                }
            }
        }
        let template = SparseOperator::from_triplets(nr, nc, &triplets);
        let rows_per_elem = row_space.degree().nodes_per_element();
        let cols_per_elem = col_space.degree().nodes_per_element();
        let mut slots = Vec::with_capacity(triplets.len());
        for t in 0..nt {
            for &i in row_space.element_dofs(t) {
                for &j in col_space.element_dofs(t) {
                    slots.push(template.position(i, j).expect("pattern covers element couplings"));
                }
            }
        }
        Ok(Self { template, rows_per_elem, cols_per_elem, slots })
    }

    /// Zero operator carrying the pattern.
    pub fn zero_operator(&self) -> SparseOperator {
        self.template.clone()
    }

    /// Overwrites `values` (pattern storage order) with the sum of local
    /// element matrices, accumulated sequentially in triangle order.
    pub fn assemble_values(&self, values: &mut [f64], mut local: impl FnMut(usize, &mut [[f64; 6]; 6])) {
        assert_eq!(values.len(), self.template.nnz());
        values.iter_mut().for_each(|v| *v = 0.0);
        let per = self.rows_per_elem * self.cols_per_elem;
        let nt = self.slots.len() / per;
        let mut k = [[0.0; 6]; 6];
        for t in 0..nt {
            k.iter_mut().for_each(|r| r.iter_mut().for_each(|v| *v = 0.0));
            local(t, &mut k);
            let slots = &self.slots[t * per..(t + 1) * per];
            for i in 0..self.rows_per_elem {
                for j in 0..self.cols_per_elem {
                    values[slots[i * self.cols_per_elem + j]] += k[i][j];
                }
            }
        }
    }

    pub fn assemble(&self, local: impl FnMut(usize, &mut [[f64; 6]; 6])) -> SparseOperator {
        let mut op = self.zero_operator();
        self.assemble_values(op.values_mut(), local);
        op
    }

    /// Scalar skew-symmetrised convection values for `wind` on `space`:
    /// `N_ij = (C_ij - C_ji) / 2` with `C_ij = (wind . grad phi_j, phi_i)`.
    pub fn convection_values(
        &self,
        space: &FeSpace,
        table: &BasisTable,
        wind: &FeField,
        values: &mut [f64],
    ) -> Result<(), FemError> {
        check_wind(space, wind)?;
        let n = table.nodes;
        self.assemble_values(values, |t, k| {
            let g = space.geometry(t);
            for (q, &l) in table.rule.points.iter().enumerate() {
                let w = wind.eval_in(t, l);
                let wq = table.rule.weights[q] * g.area;
                let phi = &table.phi[q];
                let mut adv = [0.0; 6];
                for (j, a) in adv.iter_mut().enumerate().take(n) {
                    let grad = g.gradient(table.dlambda[q][j]);
                    *a = w[0] * grad[0] + w[1] * grad[1];
                }
                for i in 0..n {
                    for j in 0..n {
                        k[i][j] += 0.5 * wq * (phi[i] * adv[j] - phi[j] * adv[i]);
                    }
                }
            }
        });
        Ok(())
    }
}

fn check_wind(space: &FeSpace, wind: &FeField) -> Result<(), FemError> {
    if !space.same_mesh(wind.space()) {
        return Err(FemError::MeshMismatch);
    }
    if wind.space().components() != 2 {
        return Err(FemError::SpaceMismatch("convection wind must be a vector field".into()));
    }
    Ok(())
}

fn scalar_mass_local<'a>(space: &'a FeSpace, table: &'a BasisTable) -> impl Fn(usize, &mut [[f64; 6]; 6]) + 'a {
    move |t, k| {
        let area = space.geometry(t).area;
        for (q, phi) in table.phi.iter().enumerate() {
            let wq = table.rule.weights[q] * area;
            for i in 0..table.nodes {
                for j in 0..table.nodes {
                    k[i][j] += wq * phi[i] * phi[j];
                }
            }
        }
    }
}

fn scalar_stiffness_local<'a>(space: &'a FeSpace, table: &'a BasisTable) -> impl Fn(usize, &mut [[f64; 6]; 6]) + 'a {
    move |t, k| {
        let g = space.geometry(t);
        for (q, dl) in table.dlambda.iter().enumerate() {
            let wq = table.rule.weights[q] * g.area;
            let grads: Vec<[f64; 2]> = dl[..table.nodes].iter().map(|&d| g.gradient(d)).collect();
            for i in 0..table.nodes {
                for j in 0..table.nodes {
                    k[i][j] += wq * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
    }
}

fn lift(space: &FeSpace, scalar: SparseOperator) -> SparseOperator {
    if space.components() == 1 {
        scalar
    } else {
        scalar.block_diag(space.components())
    }
}

/// Mass matrix `M_ij = (phi_j, phi_i)`, block diagonal for vector spaces.
pub fn assemble_mass(space: &FeSpace) -> SparseOperator {
    let table = BasisTable::new(space);
    let pattern = ElementPattern::new(space, space).expect("same space");
    let scalar = pattern.assemble(scalar_mass_local(space, &table));
    lift(space, scalar).with_symmetric(true)
}

/// Stiffness matrix `K_ij = (grad phi_j, grad phi_i)`, block diagonal for
/// vector spaces.
pub fn assemble_stiffness(space: &FeSpace) -> SparseOperator {
    let table = BasisTable::new(space);
    let pattern = ElementPattern::new(space, space).expect("same space");
    let scalar = pattern.assemble(scalar_stiffness_local(space, &table));
    lift(space, scalar).with_symmetric(true)
}

/// Divergence operator `B_kj = (div phi_j, psi_k)`: rows are pressure dofs,
/// columns velocity dofs.
pub fn assemble_divergence(vel: &FeSpace, pres: &FeSpace) -> Result<SparseOperator, FemError> {
    if !vel.same_mesh(pres) {
        return Err(FemError::MeshMismatch);
    }
    if vel.components() != 2 || pres.components() != 1 {
        return Err(FemError::SpaceMismatch("divergence needs a vector velocity and a scalar pressure space".into()));
    }
    let vt = BasisTable::new(vel);
    let (pdeg, n) = (pres.degree(), vel.num_scalar_dofs());
    let mut triplets = Vec::new();
    for t in 0..vel.mesh().num_triangles() {
        let g = vel.geometry(t);
        let (vd, pd) = (vel.element_dofs(t), pres.element_dofs(t));
        for (q, &l) in vt.rule.points.iter().enumerate() {
            let wq = vt.rule.weights[q] * g.area;
            let (psi, np) = pdeg.basis(l);
            for (j, &dj) in vd.iter().enumerate() {
                let grad = g.gradient(vt.dlambda[q][j]);
                for (k, &dk) in pd.iter().enumerate().take(np) {
                    triplets.push((dk, dj, wq * psi[k] * grad[0]));
                    triplets.push((dk, n + dj, wq * psi[k] * grad[1]));
                }
            }
        }
    }
    Ok(SparseOperator::from_triplets(pres.num_scalar_dofs(), 2 * n, &triplets))
}

/// Skew-symmetrised convection operator with `(N v, w) = b(wind, v, w)`,
/// block diagonal over velocity components.
pub fn assemble_convection(space: &FeSpace, wind: &FeField) -> Result<SparseOperator, FemError> {
    if space.components() != 2 {
        return Err(FemError::SpaceMismatch("convection acts on a vector space".into()));
    }
    let table = BasisTable::new(space);
    let pattern = ElementPattern::new(space, space)?;
    let mut scalar = pattern.zero_operator();
    pattern.convection_values(space, &table, wind, scalar.values_mut())?;
    Ok(scalar.block_diag(2))
}

/// Load vector `(f, phi_i)` of a vector function, evaluated at quadrature
/// points.
pub fn assemble_load(space: &FeSpace, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
    assert_eq!(space.components(), 2);
    let table = BasisTable::new(space);
    let n = space.num_scalar_dofs();
    let mut out = vec![0.0; 2 * n];
    for t in 0..space.mesh().num_triangles() {
        let g = space.geometry(t);
        let dofs = space.element_dofs(t);
        for (q, &l) in table.rule.points.iter().enumerate() {
            let wq = table.rule.weights[q] * g.area;
            let fv = f(g.point(l));
            for (i, &d) in dofs.iter().enumerate() {
                out[d] += wq * fv[0] * table.phi[q][i];
                out[n + d] += wq * fv[1] * table.phi[q][i];
            }
        }
    }
    out
}

/// Integrals of the scalar basis functions, `m_i = (1, phi_i)`.
pub fn assemble_mean_vector(space: &FeSpace) -> Vec<f64> {
    assert_eq!(space.components(), 1);
    let table = BasisTable::new(space);
    let mut out = vec![0.0; space.num_scalar_dofs()];
    for t in 0..space.mesh().num_triangles() {
        let area = space.geometry(t).area;
        for (q, phi) in table.phi.iter().enumerate() {
            for (i, &d) in space.element_dofs(t).iter().enumerate() {
                out[d] += table.rule.weights[q] * area * phi[i];
            }
        }
    }
    out
}

/// Bordered saddle-point operator
/// `[[A, -B^T, 0], [-B, 0, m], [0, m^T, 0]]` for velocity, pressure and the
/// multiplier enforcing `(p, 1) = 0`.
pub fn saddle_operator(a: &SparseOperator, b: &SparseOperator, m: &[f64]) -> SparseOperator {
    let (nv, np) = (a.nrows(), b.nrows());
    assert_eq!(b.ncols(), nv);
    assert_eq!(m.len(), np);
    let mut triplets = Vec::with_capacity(a.nnz() + 2 * b.nnz() + 2 * np);
    for r in 0..nv {
        triplets.extend(a.row(r).map(|(c, v)| (r, c, v)));
    }
    for k in 0..np {
        for (j, v) in b.row(k) {
            triplets.push((nv + k, j, -v));
            triplets.push((j, nv + k, -v));
        }
        triplets.push((nv + k, nv + np, m[k]));
        triplets.push((nv + np, nv + k, m[k]));
    }
    let n = nv + np + 1;
    SparseOperator::from_triplets(n, n, &triplets)
}
