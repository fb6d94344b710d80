use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::lcp::ObstacleMethod;
use super::tridiag::{thomas_solve, TridiagonalSystem};
use crate::error::{domain, Error, Result};
use crate::Scalar;

/// Risk-neutral Black–Scholes dynamics without dividends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams<T> {
    pub rate: T,
    pub volatility: T,
}

impl<T: Scalar> MarketParams<T> {
    pub fn new(rate: T, volatility: T) -> Result<Self> {
        if !(rate >= T::zero()) || !rate.is_finite() {
            return domain(format!("rate must be nonnegative, got {rate}"));
        }
        if !(volatility > T::zero()) || !volatility.is_finite() {
            return domain(format!("volatility must be positive, got {volatility}"));
        }
        Ok(Self { rate, volatility })
    }

    /// Skips validation; for degenerate limits such as zero volatility in simulations.
    pub fn new_unchecked(rate: T, volatility: T) -> Self {
        Self { rate, volatility }
    }

    /// Log-price drift `r − σ²/2`.
    pub fn drift_mu(&self) -> T {
        self.rate - T::lit(0.5) * self.volatility * self.volatility
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PutPayoff<T> {
    pub strike: T,
}

impl<T: Scalar> PutPayoff<T> {
    pub fn new(strike: T) -> Result<Self> {
        if !(strike > T::zero()) || !strike.is_finite() {
            return domain(format!("strike must be a positive price, got {strike}"));
        }
        Ok(Self { strike })
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        (self.strike - x).max(T::zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExerciseStyle {
    European,
    American,
}

/// `values[[n, j]] = u(t_n, x_j)`; row 0 is the valuation date, row `n_time` maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSurface<T> {
    pub grid: GridSpec<T>,
    pub values: Array2<T>,
    pub style: ExerciseStyle,
}

impl<T: Scalar> PriceSurface<T> {
    pub fn row(&self, n: usize) -> ndarray::ArrayView1<'_, T> {
        self.values.row(n)
    }

    /// Bilinear interpolation in `(t, ln x)`; arguments are clamped to the grid.
    pub fn interpolate(&self, t: T, x: T) -> T {
        let g = &self.grid;
        let tn = (t / g.dt).max(T::zero()).min(T::from_usize_lossy(g.n_time));
        let yc = g
            .node_coordinate(x.max(g.x_min).min(g.x_max))
            .max(T::zero())
            .min(T::from_usize_lossy(g.n_space - 1));
        let n0 = tn.floor().to_usize().unwrap_or(0).min(g.n_time.saturating_sub(1));
        let j0 = yc.floor().to_usize().unwrap_or(0).min(g.n_space - 2);
        let wt = tn - T::from_usize_lossy(n0);
        let wy = yc - T::from_usize_lossy(j0);
        let v = &self.values;
        let one = T::one();
        let lo = v[[n0, j0]] * (one - wy) + v[[n0, j0 + 1]] * wy;
        let hi = v[[n0 + 1, j0]] * (one - wy) + v[[n0 + 1, j0 + 1]] * wy;
        lo * (one - wt) + hi * wt
    }
}

/// Backward-Euler coefficients at the unknown level for every interior node:
/// `lower = −dt(σ²/2dy² − μ/2dy)`, `diag = 1 + dt(σ²/dy² + r)`, `upper = −dt(σ²/2dy² + μ/2dy)`.
pub fn assemble_implicit_system<T: Scalar>(
    market: &MarketParams<T>,
    grid: &GridSpec<T>,
) -> Result<TridiagonalSystem<T>> {
    if grid.n_space < 3 {
        return domain(format!(
            "pricing needs at least one interior node, grid has {}",
            grid.n_space
        ));
    }
    let m = grid.n_space - 2;
    let half = T::lit(0.5);
    let s2 = market.volatility * market.volatility;
    let mu = market.drift_mu();
    let dt = grid.dt;
    let dy = grid.dy;
    let diffusion = half * s2 / (dy * dy);
    let convection = half * mu / dy;
    let lower = -dt * (diffusion - convection);
    let diag = T::one() + dt * (s2 / (dy * dy) + market.rate);
    let upper = -dt * (diffusion + convection);
    TridiagonalSystem::new(vec![lower; m], vec![diag; m], vec![upper; m])
}

fn terminal_row<T: Scalar>(grid: &GridSpec<T>, payoff: &PutPayoff<T>) -> Vec<T> {
    grid.x_nodes().into_iter().map(|x| payoff.eval(x)).collect()
}

fn check_inputs<T: Scalar>(market: &MarketParams<T>, payoff: &PutPayoff<T>) -> Result<()> {
    MarketParams::new(market.rate, market.volatility)?;
    PutPayoff::new(payoff.strike)?;
    Ok(())
}

/// Marches the European put backward from the payoff row.
///
/// Dirichlet data: `max(K e^{−r(T−t)} − x_0, 0)` at the lowest node and 0 at the highest.
pub fn price_european<T: Scalar>(
    market: &MarketParams<T>,
    grid: &GridSpec<T>,
    payoff: &PutPayoff<T>,
) -> Result<PriceSurface<T>> {
    check_inputs(market, payoff)?;
    let system = assemble_implicit_system(market, grid)?;
    let x_lo = grid.x_min;
    march(grid, payoff, ExerciseStyle::European, &system, |n, rhs, _guess| {
        let tau = grid.maturity - grid.time(n);
        let lower_bc = (payoff.strike * (-market.rate * tau).exp() - x_lo).max(T::zero());
        let upper_bc = T::zero();
        apply_boundary(&system, rhs, lower_bc, upper_bc);
        let interior = thomas_solve(&system, rhs)?;
        Ok((lower_bc, interior, upper_bc))
    })
}

/// Marches the American put backward, solving the obstacle problem at every step.
///
/// Dirichlet data: the payoff at the lowest node and 0 at the highest.
pub fn price_american<T: Scalar>(
    market: &MarketParams<T>,
    grid: &GridSpec<T>,
    payoff: &PutPayoff<T>,
    method: &ObstacleMethod,
) -> Result<PriceSurface<T>> {
    check_inputs(market, payoff)?;
    method.validate()?;
    let system = assemble_implicit_system(market, grid)?;
    let obstacle_full = terminal_row(grid, payoff);
    let obstacle = &obstacle_full[1..grid.n_space - 1];
    let lower_bc = obstacle_full[0];
    march(grid, payoff, ExerciseStyle::American, &system, |_n, rhs, guess| {
        let upper_bc = T::zero();
        apply_boundary(&system, rhs, lower_bc, upper_bc);
        let interior = method.solve(&system, rhs, obstacle, guess)?;
        Ok((lower_bc, interior, upper_bc))
    })
}

fn apply_boundary<T: Scalar>(system: &TridiagonalSystem<T>, rhs: &mut [T], lo: T, hi: T) {
    let last = rhs.len() - 1;
    rhs[0] -= system.lower[0] * lo;
    rhs[last] -= system.upper[last] * hi;
}

/// Shared backward loop. `step(n, rhs, previous_interior)` returns `(lower, interior, upper)` at level `n`.
fn march<T, F>(
    grid: &GridSpec<T>,
    payoff: &PutPayoff<T>,
    style: ExerciseStyle,
    system: &TridiagonalSystem<T>,
    mut step: F,
) -> Result<PriceSurface<T>>
where
    T: Scalar,
    F: FnMut(usize, &mut [T], &[T]) -> Result<(T, Vec<T>, T)>,
{
    let ns = grid.n_space;
    debug_assert_eq!(system.len(), ns - 2);
    let mut values = Array2::<T>::zeros((grid.n_time + 1, ns));
    let terminal = terminal_row(grid, payoff);
    values.row_mut(grid.n_time).assign(&ndarray::Array1::from(terminal));

    let mut rhs = vec![T::zero(); ns - 2];
    for n in (0..grid.n_time).rev() {
        let next: Vec<T> = values.row(n + 1).iter().copied().collect();
        rhs.copy_from_slice(&next[1..ns - 1]);
        let (lo, interior, hi) = step(n, &mut rhs, &next[1..ns - 1])?;
        if interior.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at time level {n}")));
        }
        let mut row = values.row_mut(n);
        row[0] = lo;
        row[ns - 1] = hi;
        for (j, v) in interior.into_iter().enumerate() {
            // backward Euler is monotone here; clamp round-off below zero
            row[j + 1] = v.max(T::zero());
        }
    }
    Ok(PriceSurface {
        grid: grid.clone(),
        values,
        style,
    })
}
