use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::Scalar;

/// Uniform log-price by time lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub x_min: T,
    pub x_max: T,
    pub n_space: usize,
    pub maturity: T,
    pub n_time: usize,
    pub y_nodes: Vec<T>,
    pub dt: T,
    pub dy: T,
}

/// Builds the log-price grid `y_j = ln x_min + j·dy` and the time step `T / n_time`.
///
/// Two spatial nodes are accepted here; pricing needs at least one interior node.
pub fn build_grid<T: Scalar>(
    x_min: T,
    x_max: T,
    n_space: usize,
    maturity: T,
    n_time: usize,
) -> Result<GridSpec<T>> {
    if !(x_min > T::zero()) || !x_min.is_finite() {
        return domain(format!("x_min must be a positive price, got {x_min}"));
    }
    if !(x_max > x_min) || !x_max.is_finite() {
        return domain(format!("x_max must exceed x_min, got [{x_min}, {x_max}]"));
    }
    if n_space < 2 {
        return domain(format!("need at least 2 spatial nodes, got {n_space}"));
    }
    if !(maturity > T::zero()) || !maturity.is_finite() {
        return domain(format!("maturity must be positive, got {maturity}"));
    }
    if n_time < 1 {
        return domain("need at least one time step");
    }
    let y_lo = x_min.ln();
    let y_hi = x_max.ln();
    let dy = (y_hi - y_lo) / T::from_usize_lossy(n_space - 1);
    let mut y_nodes: Vec<T> = (0..n_space)
        .map(|j| y_lo + T::from_usize_lossy(j) * dy)
        .collect();
    // pin the right end so the last node is ln x_max exactly
    y_nodes[n_space - 1] = y_hi;
    Ok(GridSpec {
        x_min,
        x_max,
        n_space,
        maturity,
        n_time,
        y_nodes,
        dt: maturity / T::from_usize_lossy(n_time),
        dy,
    })
}

impl<T: Scalar> GridSpec<T> {
    /// Prices `exp(y_j)`, with the two end nodes pinned to `x_min` and `x_max`.
    pub fn x_nodes(&self) -> Vec<T> {
        let mut xs: Vec<T> = self.y_nodes.iter().map(|y| y.exp()).collect();
        let last = xs.len() - 1;
        xs[0] = self.x_min;
        xs[last] = self.x_max;
        xs
    }

    pub fn time(&self, n: usize) -> T {
        if n == self.n_time {
            self.maturity
        } else {
            T::from_usize_lossy(n) * self.dt
        }
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.n_time).map(|n| self.time(n)).collect()
    }

    /// Fractional node coordinate of a price, `(ln x − y_0)/dy`.
    pub fn node_coordinate(&self, x: T) -> T {
        (x.ln() - self.y_nodes[0]) / self.dy
    }

    /// Nearest grid index of a price, clamped to the grid.
    pub fn nearest_node(&self, x: T) -> usize {
        let c = self.node_coordinate(x).round();
        if c <= T::zero() {
            0
        } else {
            c.to_usize().unwrap_or(usize::MAX).min(self.n_space - 1)
        }
    }

    /// Same lattice up to floating tolerance on the continuous fields.
    pub fn same_lattice(&self, other: &GridSpec<T>) -> bool {
        let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-12) * (T::one() + a.abs());
        self.n_space == other.n_space
            && self.n_time == other.n_time
            && close(self.x_min, other.x_min)
            && close(self.x_max, other.x_max)
            && close(self.maturity, other.maturity)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid() {
        let g = build_grid(45.0, 180.0, 300, 1.0, 50).unwrap();
        assert_eq!(g.y_nodes[0], 45f64.ln());
        assert_eq!(g.y_nodes[299], 180f64.ln());
        assert!((g.dt - 0.02).abs() < 1e-15);
        assert_eq!(g.dy, (180f64.ln() - 45f64.ln()) / 299.0);
        for w in g.y_nodes.windows(2) {
            assert!(((w[1] - w[0]) - g.dy).abs() < 1e-12);
        }
    }

    #[test]
    fn two_node_grid() {
        let g = build_grid(1.0, std::f64::consts::E, 2, 1.0, 1).unwrap();
        assert_eq!(g.y_nodes, vec![0.0, 1.0]);
        assert_eq!(g.dy, 1.0);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(build_grid(0.0, 1.0, 10, 1.0, 1).is_err());
        assert!(build_grid(2.0, 1.0, 10, 1.0, 1).is_err());
        assert!(build_grid(1.0, 2.0, 1, 1.0, 1).is_err());
        assert!(build_grid(1.0, 2.0, 10, 1.0, 0).is_err());
        assert!(build_grid(1.0, 2.0, 10, -1.0, 3).is_err());
    }

    #[test]
    fn nearest_node_roundtrip() {
        let g = build_grid(45.0, 180.0, 300, 1.0, 50).unwrap();
        let xs = g.x_nodes();
        for (j, x) in xs.iter().enumerate() {
            assert_eq!(g.nearest_node(*x), j);
        }
        assert_eq!(g.nearest_node(1.0), 0);
        assert_eq!(g.nearest_node(1e6), 299);
    }

    #[test]
    fn generic_over_f32() {
        let g = build_grid(45.0f32, 180.0, 300, 1.0, 50).unwrap();
        assert_eq!(g.y_nodes.len(), 300);
        assert!((g.dt - 0.02).abs() < 1e-7);
    }
}
