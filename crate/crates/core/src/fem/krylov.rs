use super::{FemError, SparseOperator};

/// Outcome of a converged Krylov solve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    /// True relative residual `||b - A x|| / ||b||` at exit.
    pub residual: f64,
}

/// Eight interleaved partial sums, combined in a fixed order: vectorizes,
/// and stays reproducible.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
///
/// `x` holds the initial guess on entry. Convergence is judged on the true
/// residual recomputed at every restart, so the reported residual is exact
/// up to round-off. The arithmetic order is fixed, hence results are
/// bitwise reproducible.
pub fn gmres(
    op: &SparseOperator,
    rhs: &[f64],
    x: &mut [f64],
    precond: &dyn Fn(&mut [f64]),
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<KrylovReport, FemError> {
    let n = rhs.len();
    assert!(op.nrows() == n && op.ncols() == n && x.len() == n && restart > 0);
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport { iterations: 0, residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    let mut residual = |x: &[f64], r: &mut Vec<f64>| {
        op.mul_vec_into(x, &mut ax);
        r.iter_mut().zip(rhs).zip(&ax).for_each(|((ri, b), a)| *ri = b - a);
    };
    let mut r = vec![0.0; n];
    residual(x, &mut r);
    let mut rel = norm(&r) / bnorm;
    let mut iterations = 0;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(restart + 1);
    let mut w = vec![0.0; n];
    while rel > tol {
        if iterations >= max_iter || !rel.is_finite() {
            return Err(FemError::Residual { residual: rel, tol });
        }
        let beta = norm(&r);
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        while k < restart && iterations < max_iter {
            let mut z = basis[k].clone();
            precond(&mut z);
            op.mul_vec_into(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][k] = hij;
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= hij * vi);
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == 0.0 {
                return Err(FemError::Residual { residual: rel, tol });
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if (g[k].abs() / bnorm) <= 0.5 * tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        // the preconditioner is fixed, so M^-1 (V y) replaces storing M^-1 v_i
        let mut u = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            u.iter_mut().zip(v).for_each(|(uv, vv)| *uv += yi * vv);
        }
        precond(&mut u);
        x.iter_mut().zip(&u).for_each(|(xv, uv)| *xv += uv);
        residual(x, &mut r);
        rel = norm(&r) / bnorm;
    }
    Ok(KrylovReport { iterations, residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn convection_diffusion(n: usize, wind: f64) -> SparseOperator {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0 - wind));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0 + wind));
            }
        }
        SparseOperator::from_triplets(n, n, &t)
    }

    #[test]
    fn solves_nonsymmetric_tridiagonal() {
        let a = convection_diffusion(60, 0.4);
        let want: Vec<f64> = (0..60).map(|i| (i as f64 * 0.1).sin()).collect();
        let b = a.mul_vec(&want);
        let mut x = vec![0.0; 60];
        let rep = gmres(&a, &b, &mut x, &|_| {}, 1e-12, 80, 200).unwrap();
        assert!(rep.residual <= 1e-12);
        assert!(x.iter().zip(&want).all(|(p, q)| (p - q).abs() < 1e-8));
    }

    #[test]
    fn restarts_and_preconditioning() {
        let a = convection_diffusion(80, 0.3);
        let b: Vec<f64> = (0..80).map(|i| 1.0 + (i % 3) as f64).collect();
        // Jacobi right preconditioner
        let jacobi = |z: &mut [f64]| z.iter_mut().for_each(|v| *v /= 2.0);
        let mut x = vec![0.0; 80];
        let rep = gmres(&a, &b, &mut x, &jacobi, 1e-11, 10, 5000).unwrap();
        assert!(rep.residual <= 1e-11 && rep.iterations > 10);
        let mut y = vec![0.0; 80];
        assert!(gmres(&a, &b, &mut y, &jacobi, 1e-11, 5, 6).is_err());
        let mut z = vec![1.0; 80];
        assert_eq!(gmres(&a, &[0.0; 80], &mut z, &jacobi, 1e-11, 5, 6).unwrap().iterations, 0);
        assert!(z.iter().all(|&v| v == 0.0));
    }
}
