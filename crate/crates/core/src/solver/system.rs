use std::sync::Arc;

use super::{Forcing, SolverError};
use crate::fem::{
    apply_dirichlet, assemble_divergence, assemble_load, assemble_mass, assemble_mean_vector, assemble_stiffness,
    gmres, saddle_operator, BasisTable, Degree, DirichletBc, ElementPattern, FeField, FemError, FeSpace, LuSolver, QuasiDefiniteLdlt,
    SparseOperator,
};
use crate::interp::InterpOperator;
use crate::mesh::TriMesh;

/// Taylor-Hood spaces and the time-independent operators on one mesh.
#[derive(Debug)]
pub struct Discretization {
    mesh: Arc<TriMesh>,
    vel: Arc<FeSpace>,
    pres: Arc<FeSpace>,
    pattern: ElementPattern,
    table: BasisTable,
    mass_s: SparseOperator,
    stiff_s: SparseOperator,
    mass: SparseOperator,
    stiffness: SparseOperator,
    div: SparseOperator,
    mean: Vec<f64>,
}

impl Discretization {
    pub fn new(mesh: Arc<TriMesh>) -> Result<Self, SolverError> {
        let (vel, pres) = FeSpace::taylor_hood(mesh.clone())?;
        let scalar = FeSpace::new(mesh.clone(), Degree::P2, 1)?;
        let pattern = ElementPattern::new(&scalar, &scalar)?;
        let table = BasisTable::new(&scalar);
        let mass_s = assemble_mass(&scalar);
        let stiff_s = assemble_stiffness(&scalar);
        debug_assert_eq!(mass_s.col_idx(), pattern.zero_operator().col_idx());
        let mass = mass_s.block_diag(2).with_symmetric(true);
        let stiffness = stiff_s.block_diag(2).with_symmetric(true);
        let div = assemble_divergence(&vel, &pres)?;
        let mean = assemble_mean_vector(&pres);
        Ok(Self { mesh, vel, pres, pattern, table, mass_s, stiff_s, mass, stiffness, div, mean })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn velocity_space(&self) -> &Arc<FeSpace> {
        &self.vel
    }

    pub fn pressure_space(&self) -> &Arc<FeSpace> {
        &self.pres
    }

    /// Velocity mass matrix (block diagonal over components).
    pub fn mass(&self) -> &SparseOperator {
        &self.mass
    }

    /// Velocity stiffness matrix (block diagonal over components).
    pub fn stiffness(&self) -> &SparseOperator {
        &self.stiffness
    }

    /// Single-component P2 mass matrix.
    pub fn scalar_mass(&self) -> &SparseOperator {
        &self.mass_s
    }

    /// Single-component P2 stiffness matrix.
    pub fn scalar_stiffness(&self) -> &SparseOperator {
        &self.stiff_s
    }

    pub fn divergence(&self) -> &SparseOperator {
        &self.div
    }

    /// Integrals of the pressure basis functions.
    pub fn pressure_mean(&self) -> &[f64] {
        &self.mean
    }

    /// Load vector of `forcing` at time `t` (None for zero forcing).
    pub fn load(&self, forcing: &Forcing, t: f64) -> Option<Vec<f64>> {
        match forcing {
            Forcing::Zero => None,
            Forcing::Steady(f) | Forcing::Unsteady(f) => Some(assemble_load(&self.vel, |p| f(p, t))),
        }
    }

    /// `||B v|| / ||v||` in coefficient norms (0 for v = 0).
    pub fn divergence_defect(&self, v: &[f64]) -> f64 {
        let bv = self.div.mul_vec(v);
        let (a, b) = (norm(&bv), norm(v));
        if b == 0.0 {
            a
        } else {
            a / b
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Spatial problem: discretization, viscosity, forcing and boundary values.
#[derive(Clone, Debug)]
pub struct Problem {
    pub disc: Arc<Discretization>,
    pub nu: f64,
    pub forcing: Forcing,
    pub bc: DirichletBc,
}

/// Velocity and pressure at one time level.
#[derive(Clone, Debug)]
pub struct EvolutionState {
    pub step: u64,
    pub time: f64,
    pub velocity: FeField,
    pub pressure: FeField,
}

impl EvolutionState {
    pub fn zero(disc: &Discretization, step: u64, time: f64) -> Self {
        Self {
            step,
            time,
            velocity: FeField::zeros(disc.vel.clone()),
            pressure: FeField::zeros(disc.pres.clone()),
        }
    }

    pub fn from_velocity(disc: &Discretization, step: u64, time: f64, v: Vec<f64>) -> Result<Self, SolverError> {
        Ok(Self {
            step,
            time,
            velocity: FeField::new(disc.vel.clone(), v)?,
            pressure: FeField::zeros(disc.pres.clone()),
        })
    }
}

/// Relative residual targeted by the step solves; well below the
/// synchronization threshold so that solver error does not mask it.
pub const STEP_SOLVE_TOL: f64 = 1e-13;
/// Loosest admissible step tolerance.
pub const MAX_STEP_SOLVE_TOL: f64 = 1e-9;
const KRYLOV_RESTART: usize = 300;
const KRYLOV_MAX_ITER: usize = 600;
const CONSTRAINT_SHIFT: f64 = 1e-8;
/// Iterations allowed with the constant preconditioner before falling back.
pub(super) const FAST_MAX_ITER: usize = 300;

/// Saddle system with a fixed pattern: constant velocity block, optional
/// convection values added per solve, Dirichlet elimination, and GMRES
/// preconditioned by a constant quasi-definite `LDL^T` factorization of the
/// symmetric part of the constant operator.
///
/// When convection dominates, that preconditioner is poor. A solve that
/// does not converge within `FAST_MAX_ITER` iterations continues with an LU
/// factorization of the full current operator. The choice depends only on
/// the current system, so restarted runs repeat uninterrupted ones bitwise.
struct SaddleSystem {
    nv: usize,
    np: usize,
    template: SparseOperator,
    conv_slots: [Vec<usize>; 2],
    op: SparseOperator,
    precond: QuasiDefiniteLdlt,
    /// Symbolic analysis is kept across fallbacks.
    fallback: Option<LuSolver>,
    tol: f64,
    last_iterations: usize,
}

impl SaddleSystem {
    /// `a_const` is the scalar velocity block without convection and
    /// `a_precond` the symmetric scalar block used for the preconditioner;
    /// `fixed` lists the Dirichlet velocity dofs.
    fn new(
        disc: &Discretization,
        a_const: &SparseOperator,
        a_precond: &SparseOperator,
        fixed: &[usize],
    ) -> Result<Self, SolverError> {
        let n = disc.vel.num_scalar_dofs();
        let (nv, np) = (2 * n, disc.pres.num_dofs());
        let template = saddle_operator(&a_const.block_diag(2), &disc.div, &disc.mean);
        let pat = disc.pattern.zero_operator();
        let mut conv_slots = [Vec::with_capacity(pat.nnz()), Vec::with_capacity(pat.nnz())];
        for (c, slots) in conv_slots.iter_mut().enumerate() {
            for r in 0..n {
                for (j, _) in pat.row(r) {
                    slots.push(template.position(c * n + r, c * n + j).expect("velocity block covers element pattern"));
                }
            }
        }
        let mut sym = saddle_operator(&a_precond.block_diag(2), &disc.div, &disc.mean);
        let zeros: Vec<(usize, f64)> = fixed.iter().map(|&d| (d, 0.0)).collect();
        let mut scratch = vec![0.0; sym.nrows()];
        apply_dirichlet(&mut sym, &mut scratch, &zeros);
        let precond = QuasiDefiniteLdlt::new(&sym, nv, CONSTRAINT_SHIFT)?;
        let op = template.clone();
        Ok(Self {
            nv,
            np,
            template,
            conv_slots,
            op,
            precond,
            fallback: None,
            tol: STEP_SOLVE_TOL,
            last_iterations: 0,
        })
    }

    /// Solves with velocity right-hand side `rhs_v` and the given velocity
    /// constraints, starting from `guess`; returns velocity and pressure.
    fn solve(
        &mut self,
        conv: Option<&[f64]>,
        rhs_v: &[f64],
        cons: &[(usize, f64)],
        guess: Option<(&[f64], &[f64])>,
    ) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        self.op.values_mut().copy_from_slice(self.template.values());
        if let Some(conv) = conv {
            let vals = self.op.values_mut();
            for slots in &self.conv_slots {
                for (s, &k) in slots.iter().enumerate() {
                    vals[k] += conv[s];
                }
            }
        }
        let mut rhs = vec![0.0; self.nv + self.np + 1];
        rhs[..self.nv].copy_from_slice(rhs_v);
        apply_dirichlet(&mut self.op, &mut rhs, cons);
        let mut x = vec![0.0; rhs.len()];
        if let Some((v, p)) = guess {
            x[..self.nv].copy_from_slice(v);
            x[self.nv..self.nv + self.np].copy_from_slice(p);
        }
        for &(d, g) in cons {
            x[d] = g;
        }
        let start = x.clone();
        let precond = &self.precond;
        let spent = match gmres(&self.op, &rhs, &mut x, &|z| precond.apply(z), self.tol, KRYLOV_RESTART, FAST_MAX_ITER) {
            Ok(report) => {
                self.last_iterations = report.iterations;
                return Ok((x[..self.nv].to_vec(), x[self.nv..self.nv + self.np].to_vec()));
            }
            Err(FemError::Residual { .. }) => FAST_MAX_ITER,
            Err(e) => return Err(e.into()),
        };
        if !x.iter().all(|v| v.is_finite()) {
            x = start;
        }
        let mut lu = match self.fallback.take() {
            Some(lu) => lu,
            None => LuSolver::new(&self.op)?,
        };
        lu.factor(&self.op)?;
        let lu = self.fallback.insert(lu);
        let report = gmres(&self.op, &rhs, &mut x, &|z| lu.apply(z), self.tol, KRYLOV_RESTART, KRYLOV_MAX_ITER)?;
        self.last_iterations = spent + report.iterations;
        Ok((x[..self.nv].to_vec(), x[self.nv..self.nv + self.np].to_vec()))
    }
}

fn check_finite(v: &[f64], p: &[f64], step: u64, time: f64) -> Result<(), SolverError> {
    if v.iter().chain(p).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(SolverError::NonFinite { step, time })
    }
}

/// Steady Stokes problem `nu K u - B^T p = F`, `B u = 0`, mean-zero pressure,
/// with the problem's boundary values and forcing at time `t`.
pub fn solve_stokes(problem: &Problem, t: f64) -> Result<(FeField, FeField), SolverError> {
    let disc = &problem.disc;
    let mut a = disc.stiff_s.clone();
    a.scale(problem.nu);
    let cons = problem.bc.constraints(&disc.vel, t)?;
    // without a mass term the quasi-definite factors of nu K are too
    // inaccurate a preconditioner; this one-off solve goes direct
    let mut op = saddle_operator(&a.block_diag(2), &disc.div, &disc.mean);
    let (nv, np) = (disc.vel.num_dofs(), disc.pres.num_dofs());
    let mut rhs = vec![0.0; nv + np + 1];
    if let Some(load) = disc.load(&problem.forcing, t) {
        rhs[..nv].copy_from_slice(&load);
    }
    apply_dirichlet(&mut op, &mut rhs, &cons);
    let x = LuSolver::factored(&op)?.solve(&op, &rhs)?;
    let (v, p) = (x[..nv].to_vec(), x[nv..nv + np].to_vec());
    check_finite(&v, &p, 0, t)?;
    Ok((FeField::new(disc.vel.clone(), v)?, FeField::new(disc.pres.clone(), p)?))
}

/// One IMEX time step with implicit viscosity, pressure and nudging and
/// the convection wind lagged to the previous step.
pub struct StepSystem {
    problem: Problem,
    dt: f64,
    mu: f64,
    interp: Option<Arc<InterpOperator>>,
    saddle: SaddleSystem,
    conv: Vec<f64>,
    steady_load: Option<Vec<f64>>,
    steady_cons: Option<Vec<(usize, f64)>>,
}

impl StepSystem {
    /// `interp` is required when `mu > 0` and ignored when `mu == 0`.
    pub fn new(problem: Problem, dt: f64, mu: f64, interp: Option<Arc<InterpOperator>>) -> Result<Self, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidParameters(format!("time step must be positive, got {dt}")));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(SolverError::InvalidParameters(format!("nudging gain must be nonnegative, got {mu}")));
        }
        if !(problem.nu > 0.0) {
            return Err(SolverError::InvalidParameters(format!("viscosity must be positive, got {}", problem.nu)));
        }
        let disc = problem.disc.clone();
        let interp = if mu > 0.0 {
            let op = interp.ok_or_else(|| SolverError::InvalidParameters("nudging needs an interpolation operator".into()))?;
            if !Arc::ptr_eq(op.space(), &disc.vel) {
                return Err(SolverError::InvalidParameters("interpolation operator is built on another velocity space".into()));
            }
            Some(op)
        } else {
            None
        };
        let mut a = disc.mass_s.add_scaled(&disc.stiff_s, problem.nu * dt);
        a.scale(1.0 / dt);
        // the nudging term is left out of the preconditioner: its symmetric
        // part is indefinite and degrades convergence for large gains
        let a_precond = a.clone();
        if let Some(op) = &interp {
            let mp = disc.mass_s.matmul(op.scalar_matrix());
            a = a.add_scaled(&mp, mu);
        }
        // boundary dofs do not depend on time, only their values do
        let fixed: Vec<usize> = problem.bc.constraints(&disc.vel, 0.0)?.iter().map(|c| c.0).collect();
        let saddle = SaddleSystem::new(&disc, &a, &a_precond, &fixed)?;
        let conv = vec![0.0; disc.pattern.zero_operator().nnz()];
        let steady_load = match &problem.forcing {
            Forcing::Steady(_) => disc.load(&problem.forcing, 0.0),
            _ => None,
        };
        Ok(Self { problem, dt, mu, interp, saddle, conv, steady_load, steady_cons: None })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    /// Sets the relative residual required of each step solve; must lie in
    /// `(0, MAX_STEP_SOLVE_TOL]`.
    pub fn with_tolerance(mut self, tol: f64) -> Result<Self, SolverError> {
        if !(tol > 0.0 && tol <= MAX_STEP_SOLVE_TOL) {
            return Err(SolverError::InvalidParameters(format!(
                "linear tolerance must lie in (0, {MAX_STEP_SOLVE_TOL:e}], got {tol:e}"
            )));
        }
        self.saddle.tol = tol;
        Ok(self)
    }

    /// Krylov iterations used by the most recent step.
    pub fn last_iterations(&self) -> usize {
        self.saddle.last_iterations
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Marks the boundary values as time-independent so they are evaluated
    /// once.
    pub fn with_steady_bc(mut self) -> Result<Self, SolverError> {
        self.steady_cons = Some(self.problem.bc.constraints(&self.problem.disc.vel, 0.0)?);
        Ok(self)
    }

    /// Advances to `state.time + dt`.
    pub fn step(&mut self, state: &EvolutionState, data: Option<&[f64]>) -> Result<EvolutionState, SolverError> {
        let t = state.time + self.dt;
        self.step_to(state, t, data)
    }

    /// Advances `state` to time `t_next` (normally `state.time + dt`, passed
    /// explicitly so long runs avoid accumulating time round-off). `data` is
    /// the reference velocity at the observation time and is required iff
    /// `mu > 0`.
    pub fn step_to(
        &mut self,
        state: &EvolutionState,
        t_next: f64,
        data: Option<&[f64]>,
    ) -> Result<EvolutionState, SolverError> {
        let disc = self.problem.disc.clone();
        let vn = state.velocity.coeffs();
        disc.pattern.convection_values(&disc.vel, &disc.table, &state.velocity, &mut self.conv)?;

        let mut rhs = disc.mass.mul_vec(vn);
        rhs.iter_mut().for_each(|r| *r /= self.dt);
        let load = match &self.problem.forcing {
            Forcing::Steady(_) => self.steady_load.clone(),
            f => disc.load(f, t_next),
        };
        if let Some(load) = load {
            rhs.iter_mut().zip(&load).for_each(|(r, f)| *r += f);
        }
        if let Some(op) = &self.interp {
            let u = data.ok_or_else(|| SolverError::InvalidParameters("nudged step needs reference data".into()))?;
            let mpu = disc.mass.mul_vec(&op.apply_coeffs(u));
            rhs.iter_mut().zip(&mpu).for_each(|(r, d)| *r += self.mu * d);
        }
        let cons = match &self.steady_cons {
            Some(c) => c.clone(),
            None => self.problem.bc.constraints(&disc.vel, t_next)?,
        };
        let step = state.step + 1;
        let guess = (state.velocity.coeffs(), state.pressure.coeffs());
        let (v, p) = self.saddle.solve(Some(&self.conv), &rhs, &cons, Some(guess))?;
        check_finite(&v, &p, step, t_next)?;
        Ok(EvolutionState {
            step,
            time: t_next,
            velocity: FeField::new(disc.vel.clone(), v)?,
            pressure: FeField::new(disc.pres.clone(), p)?,
        })
    }
}
