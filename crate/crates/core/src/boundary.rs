//! Early-exercise boundary extraction from American price surfaces.
//!
//! The boundary at time `t_n` is the largest grid price not above the strike
//! at which the surface is within `tol` of the payoff. At maturity it is the
//! strike by convention.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fd::{ExerciseStyle, PriceSurface, PutPayoff};
use crate::Scalar;

pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExerciseBoundary<T> {
    pub times: Vec<T>,
    pub critical_prices: Vec<T>,
    /// Grid index of each critical price (nearest node to the strike at maturity).
    pub node_indices: Vec<usize>,
    pub tol_used: T,
}

impl<T: Scalar> ExerciseBoundary<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest number of nodes by which `b` drops as calendar time advances.
    pub fn max_time_decrease_nodes(&self) -> usize {
        let mut worst = 0;
        for (n, &i) in self.node_indices.iter().enumerate() {
            for &later in &self.node_indices[n + 1..] {
                worst = worst.max(i.saturating_sub(later));
            }
        }
        worst
    }
}

/// `u := max(u, g)` at every node.
pub fn clip_to_payoff<T: Scalar>(surface: &PriceSurface<T>, payoff: &PutPayoff<T>) -> PriceSurface<T> {
    let xs = surface.grid.x_nodes();
    let mut out = surface.clone();
    for mut row in out.values.rows_mut() {
        for (v, &x) in row.iter_mut().zip(&xs) {
            *v = v.max(payoff.eval(x));
        }
    }
    out
}

pub fn extract_boundary<T: Scalar>(
    surface: &PriceSurface<T>,
    payoff: &PutPayoff<T>,
    tol: T,
) -> Result<ExerciseBoundary<T>> {
    if surface.style != ExerciseStyle::American {
        return Err(Error::Style("exercise boundary of a European surface".into()));
    }
    if !(tol > T::zero()) {
        return domain(format!("tolerance must be positive, got {tol}"));
    }
    let grid = &surface.grid;
    let xs = grid.x_nodes();
    let below_strike = xs.iter().take_while(|&&x| x <= payoff.strike).count();
    let mut critical_prices = Vec::with_capacity(grid.n_time + 1);
    let mut node_indices = Vec::with_capacity(grid.n_time + 1);
    for n in 0..grid.n_time {
        let row = surface.row(n);
        let j = (0..below_strike)
            .rev()
            .find(|&j| row[j] <= payoff.eval(xs[j]) + tol)
            .unwrap_or(0);
        critical_prices.push(xs[j]);
        node_indices.push(j);
    }
    critical_prices.push(payoff.strike);
    node_indices.push(grid.nearest_node(payoff.strike));
    Ok(ExerciseBoundary {
        times: grid.times(),
        critical_prices,
        node_indices,
        tol_used: tol,
    })
}

/// Largest grid-index distance between the two boundaries over all times.
pub fn compare_boundaries<T: Scalar>(a: &ExerciseBoundary<T>, b: &ExerciseBoundary<T>) -> Result<usize> {
    let same = a.len() == b.len()
        && a.times
            .iter()
            .zip(&b.times)
            .all(|(s, t)| (*s - *t).abs() <= T::lit(1e-12) * (T::one() + s.abs()));
    if !same {
        return Err(Error::GridMismatch(format!(
            "boundaries on {} and {} time points",
            a.len(),
            b.len()
        )));
    }
    Ok(a.node_indices
        .iter()
        .zip(&b.node_indices)
        .map(|(i, j)| i.abs_diff(*j))
        .max()
        .unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{build_grid, price_american, price_european, MarketParams, ObstacleMethod};
    use ndarray::Array2;

    fn paper_surface(k: f64) -> PriceSurface<f64> {
        let grid = build_grid(45.0, 180.0, 300, 1.0, 50).unwrap();
        let market = MarketParams::new(0.1, 0.2).unwrap();
        price_american(&market, &grid, &PutPayoff::new(k).unwrap(), &ObstacleMethod::default()).unwrap()
    }

    #[test]
    fn payoff_surface_is_fully_exercised() {
        let grid = build_grid(45.0, 180.0, 50, 1.0, 4).unwrap();
        let p = PutPayoff::new(100.0).unwrap();
        let xs = grid.x_nodes();
        let values = Array2::from_shape_fn((5, 50), |(_, j)| p.eval(xs[j]));
        let s = PriceSurface {
            grid: grid.clone(),
            values,
            style: ExerciseStyle::American,
        };
        let b = extract_boundary(&s, &p, 1e-4).unwrap();
        let top = *xs.iter().filter(|&&x| x <= 100.0).last().unwrap();
        assert!(b.critical_prices[..4].iter().all(|&c| c == top));
        assert_eq!(b.critical_prices[4], 100.0);
    }

    #[test]
    fn european_rejected_and_tol_checked() {
        let grid = build_grid(45.0, 180.0, 30, 1.0, 4).unwrap();
        let market = MarketParams::new(0.1, 0.2).unwrap();
        let p = PutPayoff::new(100.0).unwrap();
        let e = price_european(&market, &grid, &p).unwrap();
        assert!(matches!(extract_boundary(&e, &p, 1e-4), Err(Error::Style(_))));
        let a = price_american(&market, &grid, &p, &ObstacleMethod::default()).unwrap();
        assert!(extract_boundary(&a, &p, 0.0).is_err());
    }

    #[test]
    fn fd_boundary_shape() {
        let s = paper_surface(100.0);
        let p = PutPayoff::new(100.0).unwrap();
        let b = extract_boundary(&s, &p, DEFAULT_TOL).unwrap();
        let spacing = s.grid.x_nodes().windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!((b.critical_prices[50] - 100.0).abs() <= spacing);
        assert!(b.critical_prices.iter().all(|&c| (45.0..=100.0).contains(&c)));
        assert!(b.critical_prices[0] < b.critical_prices[45]);
        assert!(b.max_time_decrease_nodes() <= 1);
    }

    #[test]
    fn fd_boundaries_monotone_in_strike() {
        let ks = [90.0, 100.0, 110.0, 120.0];
        let bs: Vec<_> = ks
            .iter()
            .map(|&k| extract_boundary(&paper_surface(k), &PutPayoff::new(k).unwrap(), DEFAULT_TOL).unwrap())
            .collect();
        for b in &bs {
            assert!(b.max_time_decrease_nodes() <= 1);
        }
        for w in bs.windows(2) {
            assert!(w[0].node_indices.iter().zip(&w[1].node_indices).all(|(a, b)| *a <= b + 1));
        }
    }

    #[test]
    fn node_distance() {
        let s = paper_surface(100.0);
        let p = PutPayoff::new(100.0).unwrap();
        let b = extract_boundary(&s, &p, DEFAULT_TOL).unwrap();
        assert_eq!(compare_boundaries(&b, &b).unwrap(), 0);
        let mut shifted = b.clone();
        shifted.node_indices.iter_mut().for_each(|i| *i += 1);
        assert_eq!(compare_boundaries(&b, &shifted).unwrap(), 1);
        let mut short = b.clone();
        short.times.pop();
        short.node_indices.pop();
        assert!(compare_boundaries(&b, &short).is_err());
    }

    #[test]
    fn clipping_restores_obstacle() {
        let s = paper_surface(110.0);
        let p = PutPayoff::new(110.0).unwrap();
        let mut noisy = s.clone();
        noisy.values.mapv_inplace(|v| v - 0.5);
        let c = clip_to_payoff(&noisy, &p);
        let xs = s.grid.x_nodes();
        for row in c.values.rows() {
            assert!(row.iter().zip(&xs).all(|(v, &x)| *v >= p.eval(x)));
        }
    }
}
