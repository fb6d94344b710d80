//! Path simulation for the forward diffusion and Monte-Carlo checks of the
//! moment, tail and Lipschitz assumptions.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::fd::{price_european, GridSpec, MarketParams, PutPayoff};
use crate::seed::derive_seed;
use crate::Scalar;

/// Paths are generated in blocks of this many, each block on its own stream.
pub const BLOCK: usize = 1024;

/// `n_paths × (n_steps + 1)` path values on an equispaced time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBatch<T> {
    pub dt: T,
    pub x0: T,
    pub values: Array2<T>,
}

impl<T: Scalar> PathBatch<T> {
    pub fn n_paths(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_steps(&self) -> usize {
        self.values.ncols() - 1
    }

    pub fn maturity(&self) -> T {
        self.dt * T::from_usize_lossy(self.n_steps())
    }

    pub fn time(&self, n: usize) -> T {
        self.dt * T::from_usize_lossy(n)
    }

    pub fn terminal(&self) -> ndarray::ArrayView1<'_, T> {
        self.values.column(self.n_steps())
    }

    /// Paths shifted so that `x0` sits at `center`.
    pub fn recentered(&self, center: T) -> Self {
        let shift = center - self.x0;
        Self {
            dt: self.dt,
            x0: center,
            values: self.values.mapv(|v| v + shift),
        }
    }

    /// Fraction of paths that leave `[lo, hi]` at some time.
    pub fn exit_fraction(&self, lo: T, hi: T) -> f64 {
        let out = self
            .values
            .rows()
            .into_iter()
            .filter(|p| p.iter().any(|&v| v < lo || v > hi))
            .count();
        out as f64 / self.n_paths() as f64
    }
}

fn block_rng(seed: u64, block: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("paths/{block}")))
}

/// Exact log-normal paths of `dX = X(r dt + σ dB)`.
///
/// With `antithetic`, paths come in pairs driven by `±Z`.
pub fn simulate_gbm<T: Scalar>(
    x0: T,
    market: &MarketParams<T>,
    maturity: T,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> Result<PathBatch<T>> {
    if n_steps == 0 || n_paths == 0 {
        return domain("need at least one step and one path");
    }
    if !(x0 > T::zero()) || !(maturity > T::zero()) {
        return domain("x0 and maturity must be positive");
    }
    let dt = maturity / T::from_usize_lossy(n_steps);
    let mu = market.drift_mu();
    let sigma = market.volatility;
    let sqrt_dt = dt.sqrt();
    let mut values = Array2::zeros((n_paths, n_steps + 1));
    values
        .axis_chunks_iter_mut(Axis(0), BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .for_each(|(block, mut chunk)| {
            let mut rng = block_rng(seed, block);
            let mut z = vec![T::zero(); n_steps];
            for (i, mut path) in chunk.rows_mut().into_iter().enumerate() {
                if !antithetic || i % 2 == 0 {
                    for zi in z.iter_mut() {
                        let s: f64 = StandardNormal.sample(&mut rng);
                        *zi = T::lit(s);
                    }
                } else {
                    z.iter_mut().for_each(|zi| *zi = -*zi);
                }
                path[0] = x0;
                let mut w = T::zero();
                for n in 1..=n_steps {
                    w += z[n - 1];
                    let t = dt * T::from_usize_lossy(n);
                    path[n] = x0 * (mu * t + sigma * sqrt_dt * w).exp();
                }
            }
        });
    Ok(PathBatch { dt, x0, values })
}

/// Euler–Maruyama for `dX = b(t, X) dt + s(t, X) dB` with blocked seeding.
pub fn simulate_euler<T, B, S>(
    x0: T,
    drift: B,
    diffusion: S,
    maturity: T,
    n_steps: usize,
    n_paths: usize,
    seed: u64,
) -> Result<PathBatch<T>>
where
    T: Scalar,
    B: Fn(T, T) -> T + Sync,
    S: Fn(T, T) -> T + Sync,
{
    if n_steps == 0 || n_paths == 0 {
        return domain("need at least one step and one path");
    }
    let dt = maturity / T::from_usize_lossy(n_steps);
    let sqrt_dt = dt.sqrt();
    let mut values = Array2::zeros((n_paths, n_steps + 1));
    values
        .axis_chunks_iter_mut(Axis(0), BLOCK)
        .collect::<Vec<_>>()
        .into_par_iter()
        .enumerate()
        .for_each(|(block, mut chunk)| {
            let mut rng = block_rng(seed, block);
            for mut path in chunk.rows_mut() {
                let mut x = x0;
                path[0] = x;
                for n in 1..=n_steps {
                    let t = dt * T::from_usize_lossy(n - 1);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x = x + drift(t, x) * dt + diffusion(t, x) * sqrt_dt * T::lit(z);
                    path[n] = x;
                }
            }
        });
    Ok(PathBatch { dt, x0, values })
}

/// Sample mean and standard error.
fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Discounted payoff mean at maturity and its standard error.
pub fn mc_european_put<T: Scalar>(batch: &PathBatch<T>, payoff: &PutPayoff<T>, rate: T) -> (f64, f64) {
    let disc = (-rate * batch.maturity()).exp().as_f64();
    let (m, se) = mean_se(batch.terminal().iter().map(|&x| payoff.eval(x).as_f64()));
    (disc * m, disc * se)
}

/// `e^{−rT}·mean(X_T)` and its standard error.
pub fn discounted_terminal_mean<T: Scalar>(batch: &PathBatch<T>, rate: T) -> (f64, f64) {
    let disc = (-rate * batch.maturity()).exp().as_f64();
    let (m, se) = mean_se(batch.terminal().iter().map(|x| x.as_f64()));
    (disc * m, disc * se)
}

/// Mean over paths of `(max_t |X_t|)^p`.
pub fn empirical_sup_moment<T: Scalar>(batch: &PathBatch<T>, p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return domain(format!("moment order must be positive, got {p}"));
    }
    let total: f64 = batch
        .values
        .rows()
        .into_iter()
        .map(|r| r.iter().fold(0.0_f64, |m, v| m.max(v.as_f64().abs())).powf(p))
        .sum();
    Ok(total / batch.n_paths() as f64)
}

/// Fraction of paths with `max_t |X_t − x0| ≥ radius`.
pub fn empirical_tail_prob<T: Scalar>(batch: &PathBatch<T>, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return domain(format!("radius must be positive, got {radius}"));
    }
    let x0 = batch.x0.as_f64();
    let hits = batch
        .values
        .rows()
        .into_iter()
        .filter(|r| r.iter().any(|v| (v.as_f64() - x0).abs() >= radius))
        .count();
    Ok(hits as f64 / batch.n_paths() as f64)
}

/// Tail probabilities on a radius ladder with a least-squares fit of `ln P` against `radius²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub radii: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Slope of `ln P` on `radius²` over the nonzero estimates; `None` with fewer than two.
    pub slope: Option<f64>,
}

pub fn fit_tail<T: Scalar>(batch: &PathBatch<T>, radii: &[f64]) -> Result<TailFit> {
    let probabilities = radii
        .iter()
        .map(|&r| empirical_tail_prob(batch, r))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&probabilities)
        .filter(|(_, p)| **p > 0.0)
        .map(|(r, p)| (r * r, p.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    });
    Ok(TailFit {
        radii: radii.to_vec(),
        probabilities,
        slope,
    })
}

/// Both sides of the operator Lipschitz inequality along a path batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGap {
    /// Mean over paths of `max_t |u₁(t, X_t) − u₂(t, X_t)|²`.
    pub lhs: f64,
    /// `4e^{2rT}` times the mean of `max_t |g₁(X_t) − g₂(X_t)|²`.
    pub rhs: f64,
    pub exit_fraction: f64,
}

impl LipschitzGap {
    pub fn holds(&self, margin: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + margin)
    }
}

/// European FD surfaces for both strikes, interpolated along clamped paths.
pub fn lipschitz_gap_check<T: Scalar>(
    market: &MarketParams<T>,
    grid: &GridSpec<T>,
    k1: &PutPayoff<T>,
    k2: &PutPayoff<T>,
    batch: &PathBatch<T>,
) -> Result<LipschitzGap> {
    let tol = T::lit(1e-9) * (T::one() + grid.maturity);
    if (batch.maturity() - grid.maturity).abs() > tol {
        return domain("path batch and grid have different maturities");
    }
    let u1 = price_european(market, grid, k1)?;
    let u2 = price_european(market, grid, k2)?;
    let (lo, hi) = (grid.x_min, grid.x_max);
    let mut lhs = 0.0;
    let mut gap = 0.0;
    for path in batch.values.rows() {
        let mut du = 0.0_f64;
        let mut dg = 0.0_f64;
        for (n, &x) in path.iter().enumerate() {
            let t = batch.time(n).min(grid.maturity);
            let xc = x.max(lo).min(hi);
            du = du.max((u1.interpolate(t, xc) - u2.interpolate(t, xc)).as_f64().abs());
            dg = dg.max((k1.eval(x) - k2.eval(x)).as_f64().abs());
        }
        lhs += du * du;
        gap += dg * dg;
    }
    let n = batch.n_paths() as f64;
    let constant = 4.0 * (2.0 * market.rate.as_f64() * grid.maturity.as_f64()).exp();
    Ok(LipschitzGap {
        lhs: lhs / n,
        rhs: constant * gap / n,
        exit_fraction: batch.exit_fraction(lo, hi),
    })
}

/// Constants of the moment, tail, growth and Lipschitz assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub moment_order_p: f64,
    pub moment_bound_cp: f64,
    pub tail_scale_ct: f64,
    pub tail_rate_c: f64,
    pub tail_exponent_alpha: f64,
    pub growth_constant_cg: f64,
    pub lip_input_lg: f64,
    pub lip_operator_lgamma: f64,
}

impl AssumptionConstants {
    pub fn new(
        moment_order_p: f64,
        moment_bound_cp: f64,
        tail_scale_ct: f64,
        tail_rate_c: f64,
        tail_exponent_alpha: f64,
        growth_constant_cg: f64,
        lip_input_lg: f64,
        lip_operator_lgamma: f64,
    ) -> Result<Self> {
        let c = Self {
            moment_order_p,
            moment_bound_cp,
            tail_scale_ct,
            tail_rate_c,
            tail_exponent_alpha,
            growth_constant_cg,
            lip_input_lg,
            lip_operator_lgamma,
        };
        let all = [
            moment_order_p,
            moment_bound_cp,
            tail_scale_ct,
            tail_rate_c,
            tail_exponent_alpha,
            growth_constant_cg,
            lip_input_lg,
            lip_operator_lgamma,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return domain("assumption constants must be positive and finite");
        }
        Ok(c)
    }

    /// Lipschitz constant `4e^{2rT}` of the European operator for a diffusion with rate `r`.
    pub fn gbm(rate: f64, maturity: f64, moment_bound_cp: f64, tail_rate_c: f64) -> Result<Self> {
        Self::new(2.0, moment_bound_cp, maturity, tail_rate_c, 2.0, 1.0, 1.0, 4.0 * (2.0 * rate * maturity).exp())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::build_grid;
    use crate::oracles::{bs_put, BsQuote};

    fn paper() -> MarketParams<f64> {
        MarketParams::new(0.1, 0.2).unwrap()
    }

    #[test]
    fn zero_volatility_is_deterministic() {
        let m = MarketParams::new_unchecked(0.1, 0.0);
        let b = simulate_gbm(100.0, &m, 1.0, 10, 5, 1, false).unwrap();
        for row in b.values.rows() {
            for (n, &v) in row.iter().enumerate() {
                assert_eq!(v, 100.0 * (0.1_f64 * b.time(n)).exp());
            }
        }
        let flat = simulate_gbm(100.0, &MarketParams::new_unchecked(0.0, 0.0), 1.0, 10, 5, 1, false).unwrap();
        assert_eq!(empirical_sup_moment(&flat, 2.0).unwrap(), 10_000.0);
    }

    #[test]
    fn seeded_and_thread_independent() {
        let a = simulate_gbm(100.0, &paper(), 1.0, 20, 3000, 5, false).unwrap();
        let b = simulate_gbm(100.0, &paper(), 1.0, 20, 3000, 5, false).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| simulate_gbm(100.0, &paper(), 1.0, 20, 3000, 5, false).unwrap());
        assert_eq!(a, c);
        let d = simulate_gbm(100.0, &paper(), 1.0, 20, 3000, 6, false).unwrap();
        assert_ne!(a, d);
        assert!(a.values.column(0).iter().all(|&v| v == 100.0));
        assert!(a.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let b = simulate_gbm(100.0, &paper(), 1.0, 4, 4, 2, true).unwrap();
        let mu = paper().drift_mu();
        for pair in [0, 2] {
            let (p, q) = (b.values.row(pair), b.values.row(pair + 1));
            for n in 1..=4 {
                let drift = 2.0 * (100.0_f64.ln() + mu * b.time(n));
                assert!((p[n].ln() + q[n].ln() - drift).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn martingale_mean() {
        let b = simulate_gbm(100.0, &paper(), 1.0, 10, 100_000, 11, false).unwrap();
        let (m, se) = discounted_terminal_mean(&b, 0.1);
        assert!((m - 100.0).abs() < 3.0 * se, "{m} ± {se}");
    }

    #[test]
    fn monte_carlo_put_against_closed_form() {
        let b = simulate_gbm(100.0, &paper(), 1.0, 1, 1_000_000, 3, false).unwrap();
        let (p, se) = mc_european_put(&b, &PutPayoff::new(100.0).unwrap(), 0.1);
        let exact = bs_put(&BsQuote::new(100.0, 100.0, 0.1, 0.2, 1.0)).unwrap();
        assert!((p - exact).abs() < 3.0 * se, "{p} vs {exact} (se {se})");
        let small = simulate_gbm(100.0, &paper(), 1.0, 1, 500_000, 3, false).unwrap();
        let (_, se_half) = mc_european_put(&small, &PutPayoff::new(100.0).unwrap(), 0.1);
        let ratio = se / se_half;
        assert!((0.65..=0.75).contains(&ratio), "{ratio}");
        let low = b.terminal().iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(mc_european_put(&b, &PutPayoff::new(low).unwrap(), 0.1), (0.0, 0.0));
    }

    #[test]
    fn sup_moments() {
        let b = simulate_gbm(100.0, &paper(), 1.0, 50, 100_000, 4, false).unwrap();
        let m1 = empirical_sup_moment(&b, 1.0).unwrap();
        assert!(m1.is_finite() && m1 < 100.0 * 0.1_f64.exp() * 0.04_f64.exp() * 3.0);
        let unit = simulate_gbm(1.0, &paper(), 1.0, 50, 100_000, 4, false).unwrap();
        let m2 = empirical_sup_moment(&unit, 2.0).unwrap();
        let m4 = empirical_sup_moment(&unit, 4.0).unwrap();
        assert!(m4 >= m2 * m2);
        assert!(empirical_sup_moment(&unit, 0.0).is_err());
    }

    #[test]
    fn tail_probabilities() {
        let b = simulate_gbm(100.0, &paper(), 1.0, 50, 100_000, 8, false).unwrap();
        assert_eq!(empirical_tail_prob(&b, 1e-12).unwrap(), 1.0);
        assert_eq!(empirical_tail_prob(&b, 1000.0).unwrap(), 0.0);
        let fit = fit_tail(&b, &[20.0, 40.0, 60.0]).unwrap();
        assert!(fit.probabilities.windows(2).all(|w| w[1] < w[0]), "{fit:?}");
        assert!(fit.slope.unwrap() < 0.0);
        let ladder: Vec<f64> = (1..40).map(|i| i as f64 * 3.0).collect();
        let p = fit_tail(&b, &ladder).unwrap().probabilities;
        assert!(p.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lipschitz_pair() {
        let grid = build_grid(45.0, 180.0, 300, 1.0, 50).unwrap();
        let b = simulate_gbm(100.0, &paper(), 1.0, 50, 10_000, 9, false).unwrap();
        let k100 = PutPayoff::new(100.0).unwrap();
        let k101 = PutPayoff::new(101.0).unwrap();
        let same = lipschitz_gap_check(&paper(), &grid, &k100, &k100, &b).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
        let g = lipschitz_gap_check(&paper(), &grid, &k100, &k101, &b).unwrap();
        assert!(g.holds(0.05), "{g:?}");
        assert!(g.rhs <= 4.0 * 0.2_f64.exp() * 1.0 + 1e-12);
        assert!(g.exit_fraction < 0.01);
    }

    #[test]
    fn euler_matches_exact_in_mean() {
        let m = paper();
        let b = simulate_euler(100.0, |_, x| 0.1 * x, |_, x| 0.2 * x, 1.0, 200, 20_000, 1).unwrap();
        let (mean, se) = discounted_terminal_mean(&b, m.rate);
        assert!((mean - 100.0).abs() < 4.0 * se);
        let constant = simulate_euler(1.0, |_, _| 2.0, |_, _| 0.0, 1.0, 4, 2, 0).unwrap();
        assert!((constant.terminal()[0] - 3.0_f64).abs() < 1e-12);
    }

    #[test]
    fn constants_validated() {
        assert!(AssumptionConstants::gbm(0.1, 1.0, 1e4, 1.0).is_ok());
        assert!(AssumptionConstants::new(2.0, 1.0, 1.0, 1.0, -2.0, 1.0, 1.0, 1.0).is_err());
    }
}
