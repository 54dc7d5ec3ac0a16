use super::{BasisTable, FeField, SparseOperator};

/// L2, H1-seminorm and H1 norms of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldNorms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

impl FieldNorms {
    /// From the squared L2 norm and squared H1 seminorm.
    pub fn from_squares(l2_sq: f64, semi_sq: f64) -> Self {
        let (l2_sq, semi_sq) = (l2_sq.max(0.0), semi_sq.max(0.0));
        Self { l2: l2_sq.sqrt(), h1_semi: semi_sq.sqrt(), h1: (l2_sq + semi_sq).sqrt() }
    }

    /// From assembled mass and stiffness operators of the field's space.
    pub fn from_operators(mass: &SparseOperator, stiffness: &SparseOperator, coeffs: &[f64]) -> Self {
        Self::from_squares(mass.dot(coeffs, coeffs), stiffness.dot(coeffs, coeffs))
    }
}

/// Norms by element quadrature; exact for P1/P2 fields.
pub fn norms(field: &FeField) -> FieldNorms {
    let space = field.space();
    let table = BasisTable::new(space);
    let (mut l2, mut semi) = (0.0, 0.0);
    for t in 0..space.mesh().num_triangles() {
        let area = space.geometry(t).area;
        for (q, &l) in table.rule.points.iter().enumerate() {
            let w = table.rule.weights[q] * area;
            let v = field.eval_in(t, l);
            let g = field.grad_in(t, l);
            l2 += w * (v[0] * v[0] + v[1] * v[1]);
            semi += w * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
    }
    FieldNorms::from_squares(l2, semi)
}

/// Kinetic energy `(M c, c) / 2`.
pub fn kinetic_energy(mass: &SparseOperator, coeffs: &[f64]) -> f64 {
    0.5 * mass.dot(coeffs, coeffs)
}
