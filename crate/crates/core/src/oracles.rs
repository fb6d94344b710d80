//! Independent reference prices: Black–Scholes closed form and a CRR tree.

use crate::error::{domain, Result};
use crate::fd::MarketParams;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BsQuote<T> {
    pub spot: T,
    pub strike: T,
    pub rate: T,
    pub volatility: T,
    pub tau: T,
}

impl<T: Scalar> BsQuote<T> {
    pub fn new(spot: T, strike: T, rate: T, volatility: T, tau: T) -> Self {
        Self { spot, strike, rate, volatility, tau }
    }

    fn validate(&self) -> Result<()> {
        if !(self.spot > T::zero()) || !(self.strike > T::zero()) {
            return domain(format!(
                "spot and strike must be positive, got S={} K={}",
                self.spot, self.strike
            ));
        }
        if !(self.tau >= T::zero()) {
            return domain(format!("time to maturity must be nonnegative, got {}", self.tau));
        }
        if self.tau > T::zero() && !(self.volatility > T::zero()) {
            return domain("volatility must be positive before maturity");
        }
        Ok(())
    }

    fn d1_d2(&self) -> (T, T) {
        let vs = self.volatility * self.tau.sqrt();
        let d1 = ((self.spot / self.strike).ln()
            + (self.rate + T::lit(0.5) * self.volatility * self.volatility) * self.tau)
            / vs;
        (d1, d1 - vs)
    }
}

/// Standard normal CDF via `erfc`, accurate to ~1e-15 in both tails.
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::lit(0.5 * libm::erfc(-z.as_f64() / std::f64::consts::SQRT_2))
}

pub fn bs_put<T: Scalar>(q: &BsQuote<T>) -> Result<T> {
    q.validate()?;
    if q.tau == T::zero() {
        return Ok((q.strike - q.spot).max(T::zero()));
    }
    let (d1, d2) = q.d1_d2();
    let df = (-q.rate * q.tau).exp();
    Ok(q.strike * df * normal_cdf(-d2) - q.spot * normal_cdf(-d1))
}

pub fn bs_call<T: Scalar>(q: &BsQuote<T>) -> Result<T> {
    q.validate()?;
    if q.tau == T::zero() {
        return Ok((q.spot - q.strike).max(T::zero()));
    }
    let (d1, d2) = q.d1_d2();
    let df = (-q.rate * q.tau).exp();
    Ok(q.spot * normal_cdf(d1) - q.strike * df * normal_cdf(d2))
}

/// Cox–Ross–Rubinstein American put with exercise checked at every node.
pub fn crr_american_put<T: Scalar>(
    spot: T,
    strike: T,
    market: &MarketParams<T>,
    maturity: T,
    steps: usize,
) -> Result<T> {
    crr_put(spot, strike, market, maturity, steps, true)
}

/// Same lattice without early exercise; converges to [`bs_put`].
pub fn crr_european_put<T: Scalar>(
    spot: T,
    strike: T,
    market: &MarketParams<T>,
    maturity: T,
    steps: usize,
) -> Result<T> {
    crr_put(spot, strike, market, maturity, steps, false)
}

fn crr_put<T: Scalar>(
    spot: T,
    strike: T,
    market: &MarketParams<T>,
    maturity: T,
    steps: usize,
    american: bool,
) -> Result<T> {
    if steps == 0 {
        return domain("binomial tree needs at least one step");
    }
    if !(spot > T::zero()) || !(strike > T::zero()) || !(maturity > T::zero()) {
        return domain("spot, strike and maturity must be positive");
    }
    let dt = maturity / T::from_usize_lossy(steps);
    let up = (market.volatility * dt.sqrt()).exp();
    let down = T::one() / up;
    let growth = (market.rate * dt).exp();
    let p = (growth - down) / (up - down);
    if !(T::zero()..=T::one()).contains(&p) {
        return domain(format!("risk-neutral probability {p} outside [0, 1]"));
    }
    let disc = T::one() / growth;
    let pu = disc * p;
    let pd = disc * (T::one() - p);
    let payoff = |k: usize, i: usize| {
        // node price S u^i d^(k-i) = S u^(2i-k)
        let e = T::from_usize_lossy(2 * i) - T::from_usize_lossy(k);
        (strike - spot * up.powf(e)).max(T::zero())
    };
    let mut values: Vec<T> = (0..=steps).map(|i| payoff(steps, i)).collect();
    for k in (0..steps).rev() {
        for i in 0..=k {
            let cont = pd * values[i] + pu * values[i + 1];
            values[i] = if american { cont.max(payoff(k, i)) } else { cont };
        }
    }
    Ok(values[0])
}
