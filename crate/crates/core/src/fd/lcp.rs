use serde::{Deserialize, Serialize};

use super::tridiag::{thomas_solve, TridiagonalSystem};
use crate::error::{domain, Error, Result};
use crate::Scalar;

/// How the payoff obstacle is imposed at each backward step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ObstacleMethod {
    /// Unconstrained Thomas solve followed by `max(v, obstacle)`.
    ProjectedDirect,
    /// Projected SOR on the complementarity problem.
    Psor { omega: f64, tol: f64, max_iter: usize },
}

impl Default for ObstacleMethod {
    fn default() -> Self {
        ObstacleMethod::Psor {
            omega: 1.2,
            tol: 1e-8,
            max_iter: 10_000,
        }
    }
}

impl ObstacleMethod {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ObstacleMethod::ProjectedDirect => Ok(()),
            ObstacleMethod::Psor { omega, tol, max_iter } => {
                if !(omega > 0.0 && omega < 2.0) {
                    return domain(format!("PSOR relaxation must lie in (0, 2), got {omega}"));
                }
                if !(tol > 0.0) {
                    return domain(format!("PSOR tolerance must be positive, got {tol}"));
                }
                if max_iter == 0 {
                    return domain("PSOR needs at least one iteration");
                }
                Ok(())
            }
        }
    }

    /// Solves one obstacle step, warm-starting PSOR from `guess`.
    pub(crate) fn solve<T: Scalar>(
        &self,
        system: &TridiagonalSystem<T>,
        rhs: &[T],
        obstacle: &[T],
        guess: &[T],
    ) -> Result<Vec<T>> {
        match *self {
            ObstacleMethod::ProjectedDirect => {
                let mut v = thomas_solve(system, rhs)?;
                for (vi, &oi) in v.iter_mut().zip(obstacle) {
                    *vi = vi.max(oi);
                }
                Ok(v)
            }
            ObstacleMethod::Psor { omega, tol, max_iter } => psor_from(
                system,
                rhs,
                obstacle,
                guess.to_vec(),
                T::lit(omega),
                T::lit(tol),
                max_iter,
            ),
        }
    }
}

/// Projected SOR for `A v ≥ rhs`, `v ≥ obstacle`, `(v − obstacle)ᵀ(A v − rhs) = 0`.
///
/// Starts from `max(rhs/diag, obstacle)` and stops once the max-norm of a
/// full sweep's update is below `tol`.
pub fn psor_step<T: Scalar>(
    system: &TridiagonalSystem<T>,
    rhs: &[T],
    obstacle: &[T],
    omega: T,
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    ObstacleMethod::Psor {
        omega: omega.as_f64(),
        tol: tol.as_f64(),
        max_iter,
    }
    .validate()?;
    let n = system.len();
    if rhs.len() != n || obstacle.len() != n {
        return Err(Error::Shape(format!(
            "system of size {n} with rhs {} and obstacle {}",
            rhs.len(),
            obstacle.len()
        )));
    }
    let guess = (0..n)
        .map(|i| (rhs[i] / system.diag[i]).max(obstacle[i]))
        .collect();
    psor_from(system, rhs, obstacle, guess, omega, tol, max_iter)
}

fn psor_from<T: Scalar>(
    system: &TridiagonalSystem<T>,
    rhs: &[T],
    obstacle: &[T],
    mut v: Vec<T>,
    omega: T,
    tol: T,
    max_iter: usize,
) -> Result<Vec<T>> {
    let n = system.len();
    for (vi, &oi) in v.iter_mut().zip(obstacle) {
        *vi = vi.max(oi);
    }
    let mut last = T::infinity();
    for _ in 0..max_iter {
        let mut max_update = T::zero();
        for i in 0..n {
            let mut r = rhs[i];
            if i > 0 {
                r -= system.lower[i] * v[i - 1];
            }
            if i + 1 < n {
                r -= system.upper[i] * v[i + 1];
            }
            let gs = r / system.diag[i];
            let updated = (v[i] + omega * (gs - v[i])).max(obstacle[i]);
            max_update = max_update.max((updated - v[i]).abs());
            v[i] = updated;
        }
        last = max_update;
        if max_update < tol {
            return Ok(v);
        }
    }
    Err(Error::Convergence {
        iterations: max_iter,
        last_update: last.as_f64(),
    })
}
