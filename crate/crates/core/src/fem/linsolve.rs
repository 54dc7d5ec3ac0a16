use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, CholeskySymbolicParams, LdltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::SparseColMat;
use faer::{Conj, MatMut, Par, Side};

use super::{FemError, SparseOperator};

/// Relative residual `||b - A x|| / ||b||` accepted from a direct solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

const REFINE_STEPS: usize = 3;
const REFINE_TARGET: f64 = 1e-13;

/// Sparse LU solver for operators that share one pattern.
///
/// The symbolic analysis is done once; `factor` copies new values through
/// the stored CSR-to-CSC map and refactors numerically.
pub struct LuSolver {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    csr_to_csc: Vec<usize>,
    csc: SparseColMat<usize, f64>,
    symbolic: SymbolicLu<usize>,
    lu: Option<Lu<usize, f64>>,
}

impl std::fmt::Debug for LuSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSolver")
            .field("n", &(self.row_ptr.len() - 1))
            .field("nnz", &self.col_idx.len())
            .field("factored", &self.lu.is_some())
            .finish()
    }
}

impl LuSolver {
    /// Symbolic analysis of the pattern of `op`.
    pub fn new(op: &SparseOperator) -> Result<Self, FemError> {
        assert_eq!(op.nrows(), op.ncols(), "LU needs a square operator");
        let (csc, csr_to_csc) = op.to_csc();
        let symbolic = SymbolicLu::try_new(csc.symbolic()).map_err(|e| FemError::Factorization(format!("{e:?}")))?;
        Ok(Self {
            row_ptr: op.row_ptr().to_vec(),
            col_idx: op.col_idx().to_vec(),
            csr_to_csc,
            csc,
            symbolic,
            lu: None,
        })
    }

    /// Analyse and factor in one call.
    pub fn factored(op: &SparseOperator) -> Result<Self, FemError> {
        let mut s = Self::new(op)?;
        s.factor(op)?;
        Ok(s)
    }

    fn same_pattern(&self, op: &SparseOperator) -> bool {
        op.row_ptr() == self.row_ptr.as_slice() && op.col_idx() == self.col_idx.as_slice()
    }

    /// Numeric factorization of `op`, which must have the analysed pattern.
    pub fn factor(&mut self, op: &SparseOperator) -> Result<(), FemError> {
        if !self.same_pattern(op) {
            return Err(FemError::Factorization("operator pattern differs from the analysed one".into()));
        }
        let vals = self.csc.val_mut();
        for (k, &v) in op.values().iter().enumerate() {
            vals[self.csr_to_csc[k]] = v;
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), self.csc.as_ref())
            .map_err(|e| FemError::Factorization(format!("{e:?}")))?;
        self.lu = Some(lu);
        Ok(())
    }

    /// Overwrites `z` with `LU^{-1} z`, without refinement; for use as a
    /// preconditioner.
    pub fn apply(&self, z: &mut [f64]) {
        let lu = self.lu.as_ref().expect("apply after factor");
        let n = z.len();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(z, n, 1));
    }

    /// Solves `op x = rhs` with the current factors, refining iteratively and
    /// rejecting the result if the relative residual exceeds [`RESIDUAL_TOL`].
    pub fn solve(&self, op: &SparseOperator, rhs: &[f64]) -> Result<Vec<f64>, FemError> {
        let lu = self.lu.as_ref().ok_or_else(|| FemError::Factorization("solve before factor".into()))?;
        let n = rhs.len();
        let bnorm = norm(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let mut x = rhs.to_vec();
        lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        let mut residual = residual_of(op, &x, rhs);
        let mut rel = norm(&residual) / bnorm;
        for _ in 0..REFINE_STEPS {
            if rel <= REFINE_TARGET || !rel.is_finite() {
                break;
            }
            lu.solve_in_place(MatMut::from_column_major_slice_mut(&mut residual, n, 1));
            x.iter_mut().zip(&residual).for_each(|(xi, di)| *xi += di);
            residual = residual_of(op, &x, rhs);
            rel = norm(&residual) / bnorm;
        }
        if !(rel <= RESIDUAL_TOL) {
            return Err(FemError::Residual { residual: rel, tol: RESIDUAL_TOL });
        }
        Ok(x)
    }
}

/// `LDL^T` factorization of a symmetric saddle operator whose constraint
/// block (rows from `split` on) is shifted to `-eps I`.
///
/// With a positive definite leading block the shifted matrix is
/// quasi-definite, so it factors stably under the fill-reducing ordering
/// without pivoting. `eps` is `eps_rel` times the mean diagonal of the
/// Jacobi-scaled Schur complement, making the factorization an accurate
/// preconditioner for the unshifted (or a nearby nonsymmetric) operator.
pub struct QuasiDefiniteLdlt {
    n: usize,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    shift: f64,
}

impl std::fmt::Debug for QuasiDefiniteLdlt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("QuasiDefiniteLdlt")
            .field("n", &self.n)
            .field("factor_nnz", &self.values.len())
            .field("shift", &self.shift)
            .finish()
    }
}

impl QuasiDefiniteLdlt {
    pub fn new(op: &SparseOperator, split: usize, eps_rel: f64) -> Result<Self, FemError> {
        let n = op.nrows();
        assert!(op.ncols() == n && split < n);
        let diag: Vec<f64> = (0..split).map(|j| op.get(j, j)).collect();
        if diag.iter().any(|&d| !(d > 0.0)) {
            return Err(FemError::Factorization("leading block has a nonpositive diagonal".into()));
        }
        let mut schur = 0.0;
        for r in split..n {
            schur += op.row(r).filter(|&(j, _)| j < split).map(|(j, v)| v * v / diag[j]).sum::<f64>();
        }
        let shift = eps_rel * (schur / (n - split) as f64).max(f64::MIN_POSITIVE);
        let mut triplets = Vec::with_capacity(op.nnz() + n - split);
        for r in 0..n {
            triplets.extend(op.row(r).filter(|&(c, _)| c <= r).map(|(c, v)| (r, c, v)));
            if r >= split {
                triplets.push((r, r, -shift));
            }
        }
        let lower = SparseOperator::from_triplets(n, n, &triplets);
        // the CSC of the lower triangle is the CSR of the upper one; faer
        // reads the requested side only
        let (csc, _) = lower.to_csc();
        let err = |e: &dyn std::fmt::Debug| FemError::Factorization(format!("{e:?}"));
        let symbolic =
            factorize_symbolic_cholesky(csc.symbolic(), Side::Lower, SymmetricOrdering::Amd, CholeskySymbolicParams::default())
                .map_err(|e| err(&e))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let mut buf = MemBuffer::new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()));
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                csc.as_ref(),
                Side::Lower,
                LdltRegularization::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| err(&e))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FemError::Factorization("non-finite factor entries".into()));
        }
        Ok(Self { n, symbolic, values, shift })
    }

    /// The constraint-block shift actually used.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Overwrites `x` with the solution of the shifted system.
    pub fn apply(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(x, self.n, 1),
            Par::Seq,
            MemStack::new(&mut buf),
        );
    }
}

fn residual_of(op: &SparseOperator, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let ax = op.mul_vec(x);
    rhs.iter().zip(ax).map(|(b, a)| b - a).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
