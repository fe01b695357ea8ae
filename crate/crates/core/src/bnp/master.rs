use super::{members, Branching, Column, DualPrices};
use crate::error::Result;
use crate::lp::{solve_lp, LpProblem};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct RlmpSolution<T> {
    /// One value per pool column; zero for columns the branching excludes.
    pub lambda: Vec<T>,
    /// Level of each user's artificial singleton.
    pub artificial: Vec<T>,
    /// Levels of the surplus and deficit columns on the cardinality row.
    pub cardinality_slack: (T, T),
    pub duals: DualPrices<T>,
    /// Includes artificial penalties.
    pub objective: T,
}

impl<T: Scalar> RlmpSolution<T> {
    pub fn uses_artificials(&self, tol: T) -> bool {
        self.artificial.iter().any(|&a| a > tol) || self.cardinality_slack.0 > tol || self.cardinality_slack.1 > tol
    }
}

/// Restricted master LP over the pool columns `branching` allows:
/// every user covered once, exactly `pilots` columns chosen. Artificial
/// columns priced at `-penalty` keep it feasible.
pub fn solve_rlmp<T: Scalar>(
    users: usize,
    pilots: usize,
    columns: &[Column<T>],
    branching: &Branching,
    penalty: T,
) -> Result<RlmpSolution<T>> {
    let rows = users + 1;
    let mut rhs = vec![T::one(); users];
    rhs.push(T::of_usize(pilots));
    let mut lp = LpProblem::new(rhs);
    let mut pool_index = Vec::new();
    for (j, c) in columns.iter().enumerate() {
        if !branching.allows(c.mask) {
            continue;
        }
        let mut a = vec![T::zero(); rows];
        for u in members(c.mask) {
            a[u] = T::one();
        }
        a[users] = T::one();
        lp.add_column(a, c.cost, T::infinity());
        pool_index.push(j);
    }
    let first_artificial = lp.columns.len();
    for u in 0..users {
        let mut a = vec![T::zero(); rows];
        a[u] = T::one();
        a[users] = T::one();
        lp.add_column(a, -penalty, T::infinity());
    }
    for s in [T::one(), -T::one()] {
        let mut a = vec![T::zero(); rows];
        a[users] = s;
        lp.add_column(a, -penalty, T::infinity());
    }

    let sol = solve_lp(&lp)?;
    let mut lambda = vec![T::zero(); columns.len()];
    for (k, &j) in pool_index.iter().enumerate() {
        lambda[j] = sol.x[k];
    }
    let artificial = sol.x[first_artificial..first_artificial + users].to_vec();
    let n = sol.x.len();
    Ok(RlmpSolution {
        lambda,
        artificial,
        cardinality_slack: (sol.x[n - 2], sol.x[n - 1]),
        duals: DualPrices {
            users: sol.duals[..users].to_vec(),
            cardinality: sol.duals[users],
        },
        objective: sol.objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnp::mask_of;

    fn col(users: &[usize], cost: f64) -> Column<f64> {
        Column { mask: mask_of(users), cost }
    }

    #[test]
    fn exact_partition_pool() {
        let pool = [col(&[0, 1], 1.5), col(&[2, 3], 2.0)];
        let s = solve_rlmp(4, 2, &pool, &Branching::default(), 1e7).unwrap();
        assert!((s.objective - 3.5).abs() < 1e-9);
        assert!(s.lambda.iter().all(|&l| (l - 1.0).abs() < 1e-9));
        assert!(!s.uses_artificials(1e-9));
        for c in &pool {
            assert!(s.duals.reduced_cost(c).abs() < 1e-8);
        }
    }

    #[test]
    fn fractional_odd_cycle() {
        // Three pairs on a triangle plus a disjoint pair: half of each
        // triangle pair is not a valid cover, so the pool mixes.
        let pool = [
            col(&[0, 1], 1.0),
            col(&[1, 2], 1.0),
            col(&[0, 2], 1.0),
            col(&[0, 1, 2], 2.5),
            col(&[3, 4], 1.0),
        ];
        let s = solve_rlmp(5, 2, &pool, &Branching::default(), 1e7).unwrap();
        assert!((s.objective - 3.5).abs() < 1e-9, "{}", s.objective);
        for (c, &l) in pool.iter().zip(&s.lambda) {
            let d = s.duals.reduced_cost(c);
            assert!(d <= 1e-8);
            assert!((l * d).abs() <= 1e-8);
        }
    }

    #[test]
    fn branching_excludes_columns() {
        let pool = [col(&[0, 1], 5.0), col(&[0, 2], 1.0), col(&[1, 3], 1.0), col(&[2, 3], 1.0)];
        let b = Branching::default().with_diff(0, 1);
        let s = solve_rlmp(4, 2, &pool, &b, 1e7).unwrap();
        assert_eq!(s.lambda[0], 0.0);
        assert!((s.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn empty_pool_runs_on_artificials() {
        let s = solve_rlmp(4, 2, &[], &Branching::default(), 100.0).unwrap();
        assert!(s.uses_artificials(1e-9));
        assert!(s.objective < -100.0);
    }
}
