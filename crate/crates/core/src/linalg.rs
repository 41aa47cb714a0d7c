//! Dense linear solves shared by the exact evaluators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a * x = b` by LU factorisation with partial pivoting.
pub(crate) fn solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.len() != n {
        return Err(Error::Dimension(format!(
            "solve: {}x{} system with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let rhs = DVector::from_column_slice(b);
    let lu = a.lu();
    lu.solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::Singular(format!("{n}x{n} system")))
}
