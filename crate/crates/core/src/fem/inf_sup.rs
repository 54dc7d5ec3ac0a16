use super::{
    apply_dirichlet, assemble_divergence, assemble_mass, assemble_mean_vector, assemble_stiffness, saddle_operator,
    DirichletBc, FeSpace, FemError, LuSolver,
};

/// Health threshold for the discrete inf-sup proxy.
pub const INF_SUP_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug)]
pub struct InfSupEstimate {
    /// Square root of the smallest nonzero eigenvalue of `B K^-1 B^T`
    /// relative to the pressure mass matrix, with zero-trace velocities.
    pub beta: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl InfSupEstimate {
    pub fn healthy(&self) -> bool {
        self.beta > INF_SUP_THRESHOLD
    }
}

/// Inverse iteration on the pressure Schur complement. Each application of
/// `S^-1 M_p` is a Stokes-type saddle solve; constants are projected out.
pub fn inf_sup_proxy(vel: &FeSpace, pres: &FeSpace, max_iter: usize, tol: f64) -> Result<InfSupEstimate, FemError> {
    let (nv, np) = (vel.num_dofs(), pres.num_dofs());
    let k = assemble_stiffness(vel);
    let b = assemble_divergence(vel, pres)?;
    let mp = assemble_mass(pres);
    let mean = assemble_mean_vector(pres);
    let area: f64 = mean.iter().sum();
    let mut op = saddle_operator(&k, &b, &mean);
    let cons = DirichletBc::no_slip().constraints(vel, 0.0)?;
    let mut scratch = vec![0.0; op.nrows()];
    apply_dirichlet(&mut op, &mut scratch, &cons);
    let lu = LuSolver::factored(&op)?;

    let project = |y: &mut Vec<f64>| {
        let c = mean.iter().zip(y.iter()).map(|(m, v)| m * v).sum::<f64>() / area;
        y.iter_mut().for_each(|v| *v -= c);
    };
    let normalize = |y: &mut Vec<f64>| {
        let n = mp.dot(y, y).sqrt();
        y.iter_mut().for_each(|v| *v /= n);
    };
    // start from a smooth non-constant pressure
    let mut y: Vec<f64> = pres.dof_coords().iter().map(|p| p[0] + 0.5 * p[1]).collect();
    project(&mut y);
    normalize(&mut y);
    let mut lambda = f64::INFINITY;
    for it in 1..=max_iter {
        let g = mp.mul_vec(&y);
        let mut rhs = vec![0.0; nv + np + 1];
        for (i, gi) in g.iter().enumerate() {
            rhs[nv + i] = -gi;
        }
        for &(d, _) in &cons {
            rhs[d] = 0.0;
        }
        let sol = lu.solve(&op, &rhs)?;
        let mut p = sol[nv..nv + np].to_vec();
        project(&mut p);
        // Rayleigh quotient of S^-1 against M_p: (y, M p) / (y, M y), with (y, M y) = 1
        let inv = mp.dot(&y, &p);
        let next = 1.0 / inv;
        normalize(&mut p);
        y = p;
        if ((next - lambda) / next).abs() < tol {
            return Ok(InfSupEstimate { beta: next.max(0.0).sqrt(), iterations: it, converged: true });
        }
        lambda = next;
    }
    Ok(InfSupEstimate { beta: lambda.max(0.0).sqrt(), iterations: max_iter, converged: false })
}
