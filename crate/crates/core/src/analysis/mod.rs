//! Run diagnostics and theory calculators: decay fits, Grashof number,
//! smallest Stokes eigenvalue and the admissible nudging-gain range.

mod record;

pub use record::{RunRecord, RECORD_HEADER};

use std::fmt::Write as _;

use thiserror::Error;

use crate::fem::{apply_dirichlet, saddle_operator, DirichletBc, FeField, FemError, LuSolver, TriangleRule};
use crate::interp::fit_slope;
use crate::mesh::Point;
use crate::solver::Discretization;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid run record: {0}")]
    InvalidRecord(String),
    #[error("decay fit needs at least {needed} usable samples, found {found} ({excluded} excluded below the round-off floor or nonpositive)")]
    InsufficientSamples { needed: usize, found: usize, excluded: usize },
    #[error("records have mismatched time grids at index {0}")]
    MismatchedTimes(usize),
    #[error("inverse iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("record parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `||f||_0` over the mesh of a velocity space, by element quadrature.
pub fn force_l2_norm(disc: &Discretization, f: &dyn Fn(Point) -> [f64; 2]) -> f64 {
    let rule = TriangleRule::degree6();
    let space = disc.velocity_space();
    let mut s = 0.0;
    for t in 0..space.mesh().num_triangles() {
        let g = space.geometry(t);
        for (q, &l) in rule.points.iter().enumerate() {
            let v = f(g.point(l));
            s += rule.weights[q] * g.area * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    s.sqrt()
}

/// Grashof number `G = ||f||_0 / (nu^2 lambda_1)` from a precomputed force norm.
pub fn grashof_from_norm(f_norm: f64, nu: f64, lambda1: f64) -> Result<f64, AnalysisError> {
    if !(nu > 0.0) || !(lambda1 > 0.0) {
        return Err(AnalysisError::InvalidInput(format!("nu = {nu} and lambda1 = {lambda1} must be positive")));
    }
    Ok(f_norm / (nu * nu * lambda1))
}

/// Grashof number of a body force on the discretization's mesh.
pub fn grashof(disc: &Discretization, f: &dyn Fn(Point) -> [f64; 2], nu: f64, lambda1: f64) -> Result<f64, AnalysisError> {
    grashof_from_norm(force_l2_norm(disc, f), nu, lambda1)
}

/// Smallest eigenvalue of the discrete Stokes operator.
#[derive(Clone, Debug)]
pub struct Lambda1Estimate {
    /// Rayleigh quotient `(K w, w) / (M w, w)` of the returned eigenfield.
    pub lambda: f64,
    /// Eigenfield, discretely divergence free, unit L2 norm.
    pub eigenfield: FeField,
    /// Final `||u - lambda w||_M` with `||u||_M = 1`.
    pub residual: f64,
    pub iterations: usize,
}

/// Inverse iteration on `[K, -B^T; -B, 0]` (plus pressure-mean border) with
/// homogeneous velocity boundary values and the mass inner product.
pub fn estimate_lambda1(disc: &Discretization, max_iter: usize, tol: f64) -> Result<Lambda1Estimate, AnalysisError> {
    let vel = disc.velocity_space();
    let nv = vel.num_dofs();
    let np = disc.pressure_space().num_dofs();
    let (m, k) = (disc.mass(), disc.stiffness());
    let mut op = saddle_operator(k, disc.divergence(), disc.pressure_mean());
    let cons = DirichletBc::no_slip().constraints(vel, 0.0)?;
    let mut scratch = vec![0.0; op.nrows()];
    apply_dirichlet(&mut op, &mut scratch, &cons);
    let lu = LuSolver::factored(&op)?;

    let mnorm = |v: &[f64]| m.dot(v, v).max(0.0).sqrt();
    // smooth swirling start, zero on the boundary after the first solve
    let mut u: Vec<f64> = {
        let f = FeField::interpolate_vector(vel.clone(), |p| [-p[1] + 0.3 * p[0] * p[1], p[0] - 0.2 * p[1]]);
        f.into_coeffs()
    };
    let n0 = mnorm(&u);
    u.iter_mut().for_each(|x| *x /= n0);
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        let mut rhs = vec![0.0; nv + np + 1];
        rhs[..nv].copy_from_slice(&m.mul_vec(&u));
        for &(d, _) in &cons {
            rhs[d] = 0.0;
        }
        let sol = lu.solve(&op, &rhs)?;
        let w = &sol[..nv];
        let lam = 1.0 / m.dot(&u, w);
        let r: Vec<f64> = u.iter().zip(w).map(|(a, b)| a - lam * b).collect();
        residual = mnorm(&r);
        let wn = mnorm(w);
        u = w.iter().map(|x| x / wn).collect();
        if residual <= tol {
            let lambda = k.dot(&u, &u) / m.dot(&u, &u);
            return Ok(Lambda1Estimate {
                lambda,
                eigenfield: FeField::new(vel.clone(), u)?,
                residual,
                iterations: it,
            });
        }
    }
    Err(AnalysisError::NoConvergence { iterations: max_iter, residual })
}

/// Exponential fit `e(t) ~ C exp(-sigma t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    pub sigma: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub used: usize,
    pub excluded: usize,
}

/// Round-off floor per step for error series.
pub const ROUNDOFF_PER_STEP: f64 = 1e-14;
/// Samples below this multiple of the accumulated floor are excluded.
pub const FLOOR_FACTOR: f64 = 100.0;
/// Minimum usable samples for a decay fit.
pub const MIN_FIT_SAMPLES: usize = 10;

/// Least-squares decay rate of `l2_error` over `window` (inclusive).
/// Sample `i` of the record is taken to be `i` steps into the run; samples
/// at or below `FLOOR_FACTOR * ROUNDOFF_PER_STEP * i` are excluded.
pub fn fit_decay_rate(record: &RunRecord, window: (f64, f64)) -> Result<DecayFit, AnalysisError> {
    let (mut ts, mut ls, mut excluded) = (Vec::new(), Vec::new(), 0);
    for (i, (&t, &e)) in record.times.iter().zip(&record.l2_error).enumerate() {
        if t < window.0 || t > window.1 {
            continue;
        }
        let floor = FLOOR_FACTOR * ROUNDOFF_PER_STEP * i as f64;
        if !(e > floor) || !e.is_finite() {
            excluded += 1;
            continue;
        }
        ts.push(t);
        ls.push(e.ln());
    }
    if ts.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientSamples { needed: MIN_FIT_SAMPLES, found: ts.len(), excluded });
    }
    let slope = fit_slope(&ts, &ls);
    let n = ts.len() as f64;
    let (mt, ml) = (ts.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let rss: f64 = ts.iter().zip(&ls).map(|(t, l)| (l - (ml + slope * (t - mt))).powi(2)).sum();
    Ok(DecayFit { sigma: -slope, residual: (rss / n).sqrt(), used: ts.len(), excluded })
}

/// Inputs of the admissible nudging-gain range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuRangeInput {
    pub k: usize,
    /// Data mesh size.
    pub big_h: f64,
    /// Computational mesh size.
    pub h: f64,
    pub nu: f64,
    pub lambda1: f64,
    pub grashof: f64,
    /// Interpolation constant `C_{k+1,0}`.
    pub c_interp: f64,
    /// Inverse-inequality constant `C~_{k+1,1}`.
    pub c_inverse: f64,
    /// Constant `c_0` of the `c_0 exp(G^4)` bound.
    pub c0: f64,
    /// Generic constant `C` of the alternative route.
    pub c_generic: f64,
    /// Inverse-inequality constant `C~_{2,1}` of the alternative route.
    pub c_inverse21: f64,
}

impl MuRangeInput {
    /// All constants set to one.
    pub fn unit_constants(k: usize, big_h: f64, h: f64, nu: f64, lambda1: f64, grashof: f64) -> Self {
        Self { k, big_h, h, nu, lambda1, grashof, c_interp: 1.0, c_inverse: 1.0, c0: 1.0, c_generic: 1.0, c_inverse21: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MuRangeReport {
    pub input: MuRangeInput,
    /// `2 (c0 exp(G^4) + 1) nu lambda1 G^2`.
    pub lower_bound: f64,
    /// `nu C_{k+1,0}^-2 C~_{k+1,1}^-2 (h/H)^(2k) H^-2`.
    pub upper_bound: f64,
    pub feasible: bool,
    /// `4 C C~_{2,1}^2 h^-2 nu G^2`.
    pub alt_lower_bound: f64,
    /// False when the alternative lower bound exceeds the upper bound.
    pub alt_achievable: bool,
}

impl MuRangeReport {
    pub fn to_text(&self) -> String {
        let i = &self.input;
        let mut s = String::new();
        let _ = writeln!(s, "k: {}", i.k);
        let _ = writeln!(s, "H: {:e}", i.big_h);
        let _ = writeln!(s, "h: {:e}", i.h);
        let _ = writeln!(s, "nu: {:e}", i.nu);
        let _ = writeln!(s, "lambda1: {:e}", i.lambda1);
        let _ = writeln!(s, "G: {:e}", i.grashof);
        let _ = writeln!(s, "lower_bound: {:e}", self.lower_bound);
        let _ = writeln!(s, "upper_bound: {:e}", self.upper_bound);
        let _ = writeln!(s, "feasible: {}", self.feasible);
        let _ = writeln!(s, "alt_lower_bound: {:e}", self.alt_lower_bound);
        let _ = writeln!(
            s,
            "alt_route: {}",
            if self.alt_achievable { "achievable" } else { "clearly not achievable" }
        );
        s
    }
}

pub fn mu_range(input: MuRangeInput) -> Result<MuRangeReport, AnalysisError> {
    let i = input;
    let positive = [
        ("H", i.big_h),
        ("h", i.h),
        ("nu", i.nu),
        ("lambda1", i.lambda1),
        ("C_{k+1,0}", i.c_interp),
        ("C~_{k+1,1}", i.c_inverse),
        ("c0", i.c0),
        ("C", i.c_generic),
        ("C~_{2,1}", i.c_inverse21),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(AnalysisError::InvalidInput(format!("{name} must be positive, got {v}")));
        }
    }
    if !(i.grashof >= 0.0 && i.grashof.is_finite()) {
        return Err(AnalysisError::InvalidInput(format!("G must be nonnegative, got {}", i.grashof)));
    }
    if i.k == 0 {
        return Err(AnalysisError::InvalidInput("k must be at least 1".into()));
    }
    if i.big_h < i.h {
        return Err(AnalysisError::InvalidInput(format!("H = {} must not be below h = {}", i.big_h, i.h)));
    }
    let g2 = i.grashof * i.grashof;
    let lower_bound = 2.0 * (i.c0 * (g2 * g2).exp() + 1.0) * i.nu * i.lambda1 * g2;
    let upper_bound = i.nu / (i.c_interp * i.c_interp * i.c_inverse * i.c_inverse)
        * (i.h / i.big_h).powi(2 * i.k as i32)
        / (i.big_h * i.big_h);
    let alt_lower_bound = 4.0 * i.c_generic * i.c_inverse21 * i.c_inverse21 / (i.h * i.h) * i.nu * g2;
    Ok(MuRangeReport {
        input,
        lower_bound,
        upper_bound,
        feasible: lower_bound <= upper_bound,
        alt_lower_bound,
        alt_achievable: alt_lower_bound <= upper_bound,
    })
}

/// Side-by-side summary of two runs against the same reference.
#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub sync_time_a: Option<f64>,
    pub sync_time_b: Option<f64>,
    /// Elapsed time to threshold of `a` over that of `b`, when both synchronized.
    pub sync_ratio: Option<f64>,
    pub rate_a: Option<f64>,
    pub rate_b: Option<f64>,
    /// `rate_a / rate_b` over the common window.
    pub rate_ratio: Option<f64>,
    pub final_a: f64,
    pub final_b: f64,
    /// Final L2 errors at the last common time, `a / b`.
    pub final_ratio: f64,
    pub common_window: (f64, f64),
}

impl Comparison {
    /// Whether `a` synchronizes no later than `b`; falls back to final
    /// errors when not both synchronized.
    pub fn a_faster_or_equal(&self) -> bool {
        match (self.sync_time_a, self.sync_time_b) {
            (Some(a), Some(b)) => a <= b,
            (Some(_), None) => true,
            (None, Some(_)) => false,
            (None, None) => self.final_a <= self.final_b,
        }
    }

    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("none".to_string(), |x| format!("{x:e}"));
        let mut s = String::new();
        let _ = writeln!(s, "common_window: {:e} {:e}", self.common_window.0, self.common_window.1);
        let _ = writeln!(s, "sync_time_a: {}", opt(self.sync_time_a));
        let _ = writeln!(s, "sync_time_b: {}", opt(self.sync_time_b));
        let _ = writeln!(s, "sync_ratio: {}", opt(self.sync_ratio));
        let _ = writeln!(s, "rate_a: {}", opt(self.rate_a));
        let _ = writeln!(s, "rate_b: {}", opt(self.rate_b));
        let _ = writeln!(s, "rate_ratio: {}", opt(self.rate_ratio));
        let _ = writeln!(s, "final_l2_a: {:e}", self.final_a);
        let _ = writeln!(s, "final_l2_b: {:e}", self.final_b);
        let _ = writeln!(s, "final_ratio: {:e}", self.final_ratio);
        let _ = writeln!(s, "a_faster_or_equal: {}", self.a_faster_or_equal());
        s
    }
}

/// Compares two records whose time grids agree on their common prefix.
pub fn compare_runs(a: &RunRecord, b: &RunRecord) -> Result<Comparison, AnalysisError> {
    a.validate()?;
    b.validate()?;
    let n = a.len().min(b.len());
    if n == 0 {
        return Err(AnalysisError::InvalidRecord("empty record".into()));
    }
    for i in 0..n {
        let (ta, tb) = (a.times[i], b.times[i]);
        if (ta - tb).abs() > 1e-9 * ta.abs().max(tb.abs()).max(1.0) {
            return Err(AnalysisError::MismatchedTimes(i));
        }
    }
    let t0 = a.times[0];
    let window = (t0, a.times[n - 1]);
    let rate = |r: &RunRecord| fit_decay_rate(r, window).ok().map(|f| f.sigma);
    let (rate_a, rate_b) = (rate(a), rate(b));
    let sync_ratio = match (a.sync_time, b.sync_time) {
        (Some(x), Some(y)) if y > t0 => Some((x - t0) / (y - t0)),
        (Some(x), Some(y)) if x == y => Some(1.0),
        _ => None,
    };
    let rate_ratio = match (rate_a, rate_b) {
        (Some(x), Some(y)) if y != 0.0 => Some(x / y),
        _ => None,
    };
    let (final_a, final_b) = (a.l2_error[n - 1], b.l2_error[n - 1]);
    let final_ratio = if final_b > 0.0 { final_a / final_b } else if final_a == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(Comparison {
        sync_time_a: a.sync_time,
        sync_time_b: b.sync_time,
        sync_ratio,
        rate_a,
        rate_b,
        rate_ratio,
        final_a,
        final_b,
        final_ratio,
        common_window: window,
    })
}

#[cfg(test)]
mod tests;
