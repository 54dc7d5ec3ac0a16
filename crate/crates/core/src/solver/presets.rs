use std::f64::consts::PI;

use super::Forcing;
use crate::fem::DirichletBc;
use crate::mesh::{BoundaryTag, Point};

/// Counterclockwise rotational body force
/// `(-4y (1 - x^2 - y^2), 4x (1 - x^2 - y^2))`.
pub fn body_force(p: Point) -> [f64; 2] {
    let [x, y] = p;
    let s = 1.0 - x * x - y * y;
    [-4.0 * y * s, 4.0 * x * s]
}

/// Time factor `a(t)` of a manufactured solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeProfile {
    /// `a = 1 + t`; backward differences of `a` are exact.
    Affine,
    /// `a = cos t`.
    Cosine,
}

impl TimeProfile {
    pub fn value(self, t: f64) -> f64 {
        match self {
            TimeProfile::Affine => 1.0 + t,
            TimeProfile::Cosine => t.cos(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            TimeProfile::Affine => 1.0,
            TimeProfile::Cosine => -t.sin(),
        }
    }
}

/// Closed-form swirl `u = a(t) sin(pi r) e_theta` about the origin with
/// pressure `a(t)^2 P(r)`, `P' = sin(pi r)^2 / r`.
///
/// The convection term is a pure gradient that the pressure cancels, so the
/// forcing is `a' U - nu a Lap U`.
#[derive(Clone, Copy, Debug)]
pub struct Manufactured {
    pub nu: f64,
    pub profile: TimeProfile,
}

impl Manufactured {
    fn swirl(p: Point) -> (f64, [f64; 2]) {
        let r = p[0].hypot(p[1]);
        (r, [-p[1] / r, p[0] / r])
    }

    pub fn velocity(&self, p: Point, t: f64) -> [f64; 2] {
        let (r, e) = Self::swirl(p);
        let s = self.profile.value(t) * (PI * r).sin();
        [s * e[0], s * e[1]]
    }

    pub fn force(&self, p: Point, t: f64) -> [f64; 2] {
        let (r, e) = Self::swirl(p);
        let v = (PI * r).sin();
        // vector Laplacian of v(r) e_theta is (v'' + v'/r - v/r^2) e_theta
        let lap = -PI * PI * v + PI * (PI * r).cos() / r - v / (r * r);
        let mag = self.profile.derivative(t) * v - self.nu * self.profile.value(t) * lap;
        [mag * e[0], mag * e[1]]
    }

    pub fn forcing(&self) -> Forcing {
        let m = *self;
        Forcing::unsteady(move |p, t| m.force(p, t))
    }

    pub fn bc(&self) -> DirichletBc {
        let (a, b) = (*self, *self);
        DirichletBc::new()
            .with(BoundaryTag::Outer, move |p, t| a.velocity(p, t))
            .with(BoundaryTag::Inner, move |p, t| b.velocity(p, t))
    }
}
