//! Dense two-phase revised simplex for `max cᵀx, Ax = b, 0 ≤ x ≤ u`.
//!
//! Sized for column-generation masters with tens of rows. The basis is
//! refactorized every iteration, which keeps primal values and duals exact
//! to working precision at the cost of speed.

use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct LpProblem<T> {
    pub rhs: Vec<T>,
    /// Dense columns, each of length `rhs.len()`.
    pub columns: Vec<Vec<T>>,
    pub costs: Vec<T>,
    /// Upper bounds; `T::infinity()` for none.
    pub upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    pub fn new(rhs: Vec<T>) -> Self {
        LpProblem {
            rhs,
            columns: Vec::new(),
            costs: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn add_column(&mut self, column: Vec<T>, cost: T, upper: T) -> usize {
        debug_assert_eq!(column.len(), self.rhs.len());
        self.columns.push(column);
        self.costs.push(cost);
        self.upper.push(upper);
        self.columns.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    /// One dual per row.
    pub duals: Vec<T>,
    /// `c_j − yᵀA_j` per column.
    pub reduced_costs: Vec<T>,
    pub objective: T,
    pub iterations: usize,
    pub basic: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic,
    Lower,
    Upper,
}

struct Simplex<'a, T> {
    p: &'a LpProblem<T>,
    m: usize,
    n: usize,
    sign: Vec<T>,
    basis: Vec<usize>,
    status: Vec<Status>,
    upper: Vec<T>,
    tol: T,
    iterations: usize,
}

impl<T: Scalar> Simplex<'_, T> {
    fn column(&self, j: usize) -> Vec<T> {
        if j < self.n {
            self.p.columns[j].clone()
        } else {
            let mut e = vec![T::zero(); self.m];
            e[j - self.n] = self.sign[j - self.n];
            e
        }
    }

    #[inline]
    fn entry(&self, j: usize, i: usize) -> T {
        if j < self.n {
            self.p.columns[j][i]
        } else if j - self.n == i {
            self.sign[i]
        } else {
            T::zero()
        }
    }

    fn dot_column(&self, y: &[T], j: usize) -> T {
        if j < self.n {
            self.p.columns[j].iter().zip(y).map(|(&a, &b)| a * b).sum()
        } else {
            self.sign[j - self.n] * y[j - self.n]
        }
    }

    fn factor(&self) -> Result<Lu<T>> {
        let b = Matrix::from_fn(self.m, self.m, |i, k| self.entry(self.basis[k], i));
        Lu::factor(&b)
    }

    fn basic_values(&self, lu: &Lu<T>) -> Vec<T> {
        let mut r = self.p.rhs.clone();
        for j in 0..self.n + self.m {
            if self.status[j] == Status::Upper {
                for (i, ri) in r.iter_mut().enumerate() {
                    *ri -= self.upper[j] * self.entry(j, i);
                }
            }
        }
        lu.solve(&r)
    }

    fn value(&self, j: usize, xb: &[T]) -> T {
        match self.status[j] {
            Status::Basic => xb[self.basis.iter().position(|&b| b == j).unwrap()],
            Status::Lower => T::zero(),
            Status::Upper => self.upper[j],
        }
    }

    /// Runs simplex iterations for `cost`, allowing only `eligible` columns to enter.
    fn optimize(&mut self, cost: &[T], eligible: impl Fn(usize) -> bool) -> Result<()> {
        let limit = 200 * (self.m + self.n) + 1000;
        let mut degenerate = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > limit {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let lu = self.factor()?;
            let xb = self.basic_values(&lu);
            let cb: Vec<T> = self.basis.iter().map(|&j| cost[j]).collect();
            let y = lu.solve_transpose(&cb);
            let bland = degenerate > 50;

            let mut enter = None;
            let mut best = T::zero();
            for j in 0..self.n + self.m {
                if self.status[j] == Status::Basic || !eligible(j) {
                    continue;
                }
                let d = cost[j] - self.dot_column(&y, j);
                let gain = match self.status[j] {
                    Status::Lower if d > self.tol && self.upper[j] > T::zero() => d,
                    Status::Upper if d < -self.tol => -d,
                    _ => continue,
                };
                if bland {
                    enter = Some(j);
                    break;
                }
                if gain > best {
                    best = gain;
                    enter = Some(j);
                }
            }
            let Some(j) = enter else {
                return Ok(());
            };

            let dir = if self.status[j] == Status::Lower { T::one() } else { -T::one() };
            let alpha = lu.solve(&self.column(j));
            // Step limited by the entering variable's own range first.
            let mut step = self.upper[j];
            let mut leave: Option<(usize, Status)> = None;
            let mut pivot_mag = T::zero();
            for (pos, (&a, &x)) in alpha.iter().zip(&xb).enumerate() {
                let rate = dir * a;
                let bv = self.basis[pos];
                let (ratio, to) = if rate > self.tol {
                    (x.max(T::zero()) / rate, Status::Lower)
                } else if rate < -self.tol && self.upper[bv].is_finite() {
                    ((self.upper[bv] - x).max(T::zero()) / -rate, Status::Upper)
                } else {
                    continue;
                };
                let better = match leave {
                    None => ratio <= step,
                    Some((lp, _)) => {
                        ratio < step - self.tol
                            || (ratio <= step + self.tol
                                && if bland { bv < self.basis[lp] } else { rate.abs() > pivot_mag })
                    }
                };
                if better {
                    step = if leave.is_some() { step.min(ratio) } else { ratio };
                    leave = Some((pos, to));
                    pivot_mag = rate.abs();
                }
            }
            if !step.is_finite() {
                return Err(Error::Numerical("linear program is unbounded".into()));
            }
            if step <= self.tol {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                None => {
                    // Bound flip.
                    self.status[j] = if self.status[j] == Status::Lower { Status::Upper } else { Status::Lower };
                }
                Some((pos, to)) => {
                    let out = self.basis[pos];
                    self.status[out] = to;
                    self.basis[pos] = j;
                    self.status[j] = Status::Basic;
                }
            }
        }
    }
}

/// Solves the program; infeasibility is reported as [`Error::Infeasible`].
pub fn solve_lp<T: Scalar>(problem: &LpProblem<T>) -> Result<LpSolution<T>> {
    let m = problem.rows();
    let n = problem.columns.len();
    if problem.costs.len() != n || problem.upper.len() != n {
        return Err(Error::Data("column, cost and bound counts differ".into()));
    }
    if let Some(u) = problem.upper.iter().find(|u| !(**u >= T::zero())) {
        return Err(Error::Data(format!("upper bound {u} below the zero lower bound")));
    }
    let tol = T::epsilon().sqrt() * T::of(0.1);
    let sign: Vec<T> = problem.rhs.iter().map(|&b| if b < T::zero() { -T::one() } else { T::one() }).collect();
    let mut upper = problem.upper.clone();
    upper.extend(std::iter::repeat_n(T::infinity(), m));
    let mut status = vec![Status::Lower; n + m];
    for s in status.iter_mut().skip(n) {
        *s = Status::Basic;
    }
    let mut sx = Simplex {
        p: problem,
        m,
        n,
        sign,
        basis: (n..n + m).collect(),
        status,
        upper,
        tol,
        iterations: 0,
    };

    // Phase 1: drive the artificials to zero.
    let mut phase1 = vec![T::zero(); n + m];
    phase1.iter_mut().skip(n).for_each(|c| *c = -T::one());
    sx.optimize(&phase1, |_| true)?;
    let lu = sx.factor()?;
    let xb = sx.basic_values(&lu);
    let infeas: T = (n..n + m).map(|j| sx.value(j, &xb)).sum();
    let scale = T::one() + problem.rhs.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
    if infeas > tol * scale * T::of(10.0) {
        return Err(Error::Infeasible(format!("phase 1 residual {infeas}")));
    }

    // Swap remaining zero-level artificials out where possible.
    for pos in 0..m {
        let a = sx.basis[pos];
        if a < n {
            continue;
        }
        let lu = sx.factor()?;
        let mut e = vec![T::zero(); m];
        e[pos] = T::one();
        let row = lu.solve_transpose(&e);
        if let Some(j) = (0..n).find(|&j| sx.status[j] == Status::Lower && sx.dot_column(&row, j).abs() > T::of(1e-7)) {
            sx.status[a] = Status::Lower;
            sx.basis[pos] = j;
            sx.status[j] = Status::Basic;
        }
    }
    for j in n..n + m {
        sx.upper[j] = T::zero();
        if sx.status[j] == Status::Upper {
            sx.status[j] = Status::Lower;
        }
    }

    // Phase 2.
    let mut cost = problem.costs.clone();
    cost.extend(std::iter::repeat_n(T::zero(), m));
    sx.optimize(&cost, |j| j < n)?;

    let lu = sx.factor()?;
    let xb = sx.basic_values(&lu);
    let cb: Vec<T> = sx.basis.iter().map(|&j| cost[j]).collect();
    let duals = lu.solve_transpose(&cb);
    let x: Vec<T> = (0..n).map(|j| sx.value(j, &xb)).collect();
    let reduced_costs = (0..n).map(|j| cost[j] - sx.dot_column(&duals, j)).collect();
    let objective = x.iter().zip(&problem.costs).map(|(&a, &c)| a * c).sum();
    Ok(LpSolution {
        x,
        duals,
        reduced_costs,
        objective,
        iterations: sx.iterations,
        basic: (0..n).map(|j| sx.status[j] == Status::Basic).collect(),
    })
}
