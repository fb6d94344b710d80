use crate::error::{Error, Result};
use crate::Scalar;

const PIVOT_FLOOR: f64 = 1e-14;

/// Tridiagonal coefficients over the interior nodes.
///
/// Row `i` reads `lower[i]·v[i−1] + diag[i]·v[i] + upper[i]·v[i+1]`.
/// `lower[0]` and `upper[n−1]` couple to the Dirichlet boundary values and
/// are not part of the matrix; the solvers ignore them.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalSystem<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> TridiagonalSystem<T> {
    pub fn new(lower: Vec<T>, diag: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != diag.len() || upper.len() != diag.len() || diag.is_empty() {
            return Err(Error::Shape(format!(
                "tridiagonal bands must share a nonzero length, got {}/{}/{}",
                lower.len(),
                diag.len(),
                upper.len()
            )));
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Matrix-vector product, boundary couplings excluded.
    pub fn apply(&self, v: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.lower[i] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.upper[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Strict row diagonal dominance over the matrix part.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| {
            let mut off = T::zero();
            if i > 0 {
                off += self.lower[i].abs();
            }
            if i + 1 < n {
                off += self.upper[i].abs();
            }
            self.diag[i].abs() > off
        })
    }
}

/// Thomas algorithm. Fails when a pivot drops below `1e-14` in magnitude.
pub fn thomas_solve<T: Scalar>(system: &TridiagonalSystem<T>, rhs: &[T]) -> Result<Vec<T>> {
    let n = system.len();
    if rhs.len() != n {
        return Err(Error::Shape(format!(
            "rhs length {} does not match system size {n}",
            rhs.len()
        )));
    }
    let floor = T::lit(PIVOT_FLOOR);
    let mut c_star = vec![T::zero(); n];
    let mut d_star = vec![T::zero(); n];

    let mut pivot = system.diag[0];
    if pivot.abs() < floor {
        return Err(Error::Singular { row: 0, pivot: pivot.as_f64() });
    }
    c_star[0] = system.upper[0] / pivot;
    d_star[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = system.diag[i] - system.lower[i] * c_star[i - 1];
        if pivot.abs() < floor {
            return Err(Error::Singular { row: i, pivot: pivot.as_f64() });
        }
        c_star[i] = if i + 1 < n { system.upper[i] / pivot } else { T::zero() };
        d_star[i] = (rhs[i] - system.lower[i] * d_star[i - 1]) / pivot;
    }

    let mut x = d_star;
    for i in (0..n - 1).rev() {
        let next = x[i + 1];
        x[i] -= c_star[i] * next;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Dense Gaussian elimination with partial pivoting, test oracle only.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
            x[i] = (b[i] - s) / a[i][i];
        }
        x
    }

    fn to_dense(s: &TridiagonalSystem<f64>) -> Vec<Vec<f64>> {
        let n = s.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = s.diag[i];
            if i > 0 {
                a[i][i - 1] = s.lower[i];
            }
            if i + 1 < n {
                a[i][i + 1] = s.upper[i];
            }
        }
        a
    }

    #[test]
    fn identity_system() {
        let s = TridiagonalSystem::new(vec![0.0; 3], vec![1.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(thomas_solve(&s, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn three_by_three_matches_dense() {
        let s = TridiagonalSystem::new(
            vec![0.0, -1.0, -1.0],
            vec![2.0, 2.0, 2.0],
            vec![-1.0, -1.0, 0.0],
        )
        .unwrap();
        let rhs = [1.0, 1.0, 1.0];
        let x = thomas_solve(&s, &rhs).unwrap();
        let oracle = dense_solve(to_dense(&s), rhs.to_vec());
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // [1.5, 2, 1.5] solves the discrete Laplacian with unit load
        assert!((x[0] - 1.5).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn random_dominant_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 50;
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|i| lower[i].abs() + upper[i].abs() + rng.random_range(0.1..2.0))
            .collect();
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s = TridiagonalSystem::new(lower, diag, upper).unwrap();
        assert!(s.is_diagonally_dominant());
        let x = thomas_solve(&s, &rhs).unwrap();
        let res = s
            .apply(&x)
            .iter()
            .zip(&rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-10, "residual {res}");
        let oracle = dense_solve(to_dense(&s), rhs);
        for (a, b) in x.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn singular_pivot_reported() {
        let s = TridiagonalSystem::new(vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]).unwrap();
        match thomas_solve(&s, &[1.0, 1.0]) {
            Err(Error::Singular { row: 1, .. }) => {}
            other => panic!("expected singular pivot, got {other:?}"),
        }
    }

    #[test]
    fn length_mismatch() {
        let s = TridiagonalSystem::new(vec![0.0; 2], vec![1.0; 2], vec![0.0; 2]).unwrap();
        assert!(matches!(thomas_solve(&s, &[1.0]), Err(Error::Shape(_))));
        assert!(TridiagonalSystem::new(vec![0.0], vec![1.0; 2], vec![0.0; 2]).is_err());
    }
}
