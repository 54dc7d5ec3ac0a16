/// Symmetric quadrature rule on a triangle in barycentric coordinates;
/// weights sum to one and are scaled by the triangle area at use.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// 12-point Dunavant rule, exact for polynomials of degree 6.
    pub fn degree6() -> Self {
        let mut points = Vec::with_capacity(12);
        let mut weights = Vec::with_capacity(12);
        let mut orbit3 = |a: f64, b: f64, w: f64| {
            for p in [[a, b, b], [b, a, b], [b, b, a]] {
                points.push(p);
                weights.push(w);
            }
        };
        orbit3(0.501426509658179, 0.249286745170910, 0.116786275726379);
        orbit3(0.873821971016996, 0.063089014491502, 0.050844906370207);
        let (a, b, c, w) = (0.053145049844817, 0.310352451033784, 0.636502499121399, 0.082851075618374);
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            points.push(p);
            weights.push(w);
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}
