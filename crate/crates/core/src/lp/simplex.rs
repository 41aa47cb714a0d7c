//! Dense two-phase revised simplex for `max cᵀx s.t. A x = b, x >= 0`.
//!
//! The basis matrix is refactorised from scratch at every pivot. Entering and
//! leaving variables follow Bland's rule, so the pivot sequence is a pure
//! function of the input.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) const PIVOT_TOL: f64 = 1e-10;
pub(crate) const FEASIBILITY_TOL: f64 = 1e-9;
const REDUCED_COST_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SimplexStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexResult {
    pub status: SimplexStatus,
    /// Primal solution over the structural columns.
    pub x: Vec<f64>,
    /// Row duals `y` with `Aᵀy >= c` at optimality.
    pub y: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// Rows flipped so that `b >= 0`, with one artificial column per row
    /// appended after the structural columns.
    a: DMatrix<f64>,
    b: Vec<f64>,
    n_struct: usize,
    basis: Vec<usize>,
}

struct Factored {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    lu_t: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    x_b: Vec<f64>,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.a.nrows()
    }

    fn factor(&self) -> Result<Factored> {
        let m = self.rows();
        let mut bmat = DMatrix::zeros(m, m);
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.a.column(j));
        }
        let lu_t = bmat.transpose().lu();
        let lu = bmat.lu();
        let x_b = lu
            .solve(&DVector::from_column_slice(&self.b))
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))?;
        Ok(Factored {
            lu,
            lu_t,
            x_b: x_b.iter().copied().collect(),
        })
    }

    fn duals(&self, f: &Factored, cost: &[f64]) -> Result<Vec<f64>> {
        let c_b = DVector::from_iterator(self.rows(), self.basis.iter().map(|&j| cost[j]));
        // yᵀ B = c_Bᵀ  <=>  Bᵀ y = c_B
        f.lu_t
            .solve(&c_b)
            .map(|y| y.iter().copied().collect())
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))
    }

    fn column_in_basis(&self, f: &Factored, j: usize) -> Result<Vec<f64>> {
        f.lu
            .solve(&self.a.column(j).into_owned())
            .map(|u| u.iter().copied().collect())
            .ok_or_else(|| Error::Numerical("singular simplex basis".into()))
    }

    /// Runs simplex pivots maximising `cost` over columns `< allowed`.
    fn optimise(&mut self, cost: &[f64], allowed: usize) -> Result<()> {
        for _ in 0..MAX_PIVOTS {
            let f = self.factor()?;
            let y = DVector::from_vec(self.duals(&f, cost)?);
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let reduced = cost[j] - self.a.column(j).dot(&y);
                if reduced > REDUCED_COST_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let u = self.column_in_basis(&f, j)?;
            let mut leave: Option<(usize, f64)> = None;
            for (r, &ur) in u.iter().enumerate() {
                if ur <= PIVOT_TOL {
                    continue;
                }
                let ratio = f.x_b[r].max(0.0) / ur;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best_r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best.abs());
                        if ratio < best && !tie
                            || tie && self.basis[r] < self.basis[best_r]
                        {
                            Some((r, ratio))
                        } else {
                            Some((best_r, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(Error::Numerical(
                    "unbounded LP over a compact occupancy polytope".into(),
                ));
            };
            self.basis[r] = j;
        }
        Err(Error::Numerical(format!(
            "simplex did not terminate within {MAX_PIVOTS} pivots"
        )))
    }

    /// Pivots zero-valued artificials out of the basis where possible.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let n = self.n_struct;
        for r in 0..self.rows() {
            if self.basis[r] < n {
                continue;
            }
            let f = self.factor()?;
            for j in 0..n {
                if self.basis.contains(&j) {
                    continue;
                }
                let u = self.column_in_basis(&f, j)?;
                if u[r].abs() > FEASIBILITY_TOL {
                    self.basis[r] = j;
                    break;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn solve(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Result<SimplexResult> {
    let (m, n) = a.shape();
    if b.len() != m || c.len() != n {
        return Err(Error::Dimension("simplex: inconsistent LP shapes".into()));
    }
    let mut signs = vec![1.0; m];
    let mut full = DMatrix::zeros(m, n + m);
    let mut rhs = b.to_vec();
    for r in 0..m {
        if rhs[r] < 0.0 {
            signs[r] = -1.0;
            rhs[r] = -rhs[r];
        }
        for j in 0..n {
            full[(r, j)] = signs[r] * a[(r, j)];
        }
        full[(r, n + r)] = 1.0;
    }
    let mut tab = Tableau {
        a: full,
        b: rhs,
        n_struct: n,
        basis: (n..n + m).collect(),
    };

    // Phase 1: maximise -Σ artificials.
    let mut phase1 = vec![0.0; n + m];
    for v in &mut phase1[n..] {
        *v = -1.0;
    }
    tab.optimise(&phase1, n + m)?;
    let f = tab.factor()?;
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&f.x_b)
        .filter(|(j, _)| **j >= n)
        .map(|(_, x)| x.max(0.0))
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Ok(SimplexResult {
            status: SimplexStatus::Infeasible,
            x: Vec::new(),
            y: Vec::new(),
            objective: f64::NEG_INFINITY,
        });
    }
    tab.drive_out_artificials()?;

    // Phase 2 on the structural columns only.
    let mut phase2 = c.to_vec();
    phase2.extend(std::iter::repeat_n(0.0, m));
    tab.optimise(&phase2, n)?;
    let f = tab.factor()?;
    let mut x = vec![0.0; n];
    for (&j, &v) in tab.basis.iter().zip(&f.x_b) {
        if j < n {
            x[j] = v.max(0.0);
        }
    }
    let y_flipped = tab.duals(&f, &phase2)?;
    let y = y_flipped.iter().zip(&signs).map(|(y, s)| y * s).collect();
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(SimplexResult {
        status: SimplexStatus::Optimal,
        x,
        y,
        objective,
    })
}
