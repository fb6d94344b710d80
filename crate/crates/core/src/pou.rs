//! Partition-of-unity approximation on cubes and the ReLU constructions
//! behind it: the hat `ψ`, product bumps, sawtooth squaring and approximate
//! multiplication.

use ndarray::{array, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::neural::{Mlp, NetworkClassSpec};
use crate::sde::PathBatch;
use crate::Scalar;

/// `1` on `|a| < 1`, `0` on `|a| > 2`, `2 − |a|` between.
pub fn psi<T: Scalar>(a: T) -> T {
    let m = a.abs();
    if m <= T::one() {
        T::one()
    } else if m >= T::lit(2.0) {
        T::zero()
    } else {
        T::lit(2.0) - m
    }
}

fn relu<T: Scalar>(v: T) -> T {
    v.max(T::zero())
}

/// `ψ(a) = ReLU(a+2) − ReLU(a+1) − ReLU(a−1) + ReLU(a−2)`.
pub fn psi_relu<T: Scalar>(a: T) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    relu(a + two) - relu(a + one) - relu(a - one) + relu(a - two)
}

/// Uniform centers `{−r, −r + 2r/(N−1), …, r}^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterGrid<T> {
    pub radius: T,
    pub n_per_dim: usize,
    pub dim: usize,
}

impl<T: Scalar> CenterGrid<T> {
    pub fn new(radius: T, n_per_dim: usize, dim: usize) -> Result<Self> {
        if !(radius > T::zero()) || n_per_dim < 2 || dim == 0 {
            return domain(format!("need r > 0, N ≥ 2, d ≥ 1 (got {radius}, {n_per_dim}, {dim})"));
        }
        Ok(Self { radius, n_per_dim, dim })
    }

    pub fn spacing(&self) -> T {
        T::lit(2.0) * self.radius / T::from_usize_lossy(self.n_per_dim - 1)
    }

    /// Factor `3(N−1)/(2r)` applied to `x − c` inside `ψ`.
    pub fn scale(&self) -> T {
        T::lit(3.0) / self.spacing()
    }

    /// `‖x − c‖_∞` beyond which a bump vanishes: `4r/(3(N−1))`.
    pub fn support_radius(&self) -> T {
        T::lit(2.0) / self.scale()
    }

    pub fn len(&self) -> usize {
        self.n_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coordinate(&self, i: usize) -> T {
        if i + 1 == self.n_per_dim {
            self.radius
        } else {
            -self.radius + T::from_usize_lossy(i) * self.spacing()
        }
    }

    /// Center with flat index `k` (last coordinate fastest).
    pub fn center(&self, mut k: usize) -> Vec<T> {
        let mut c = vec![T::zero(); self.dim];
        for j in (0..self.dim).rev() {
            c[j] = self.coordinate(k % self.n_per_dim);
            k /= self.n_per_dim;
        }
        c
    }

    pub fn centers(&self) -> Vec<Vec<T>> {
        (0..self.len()).map(|k| self.center(k)).collect()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().all(|v| v.abs() <= self.radius)
    }
}

/// `∏_j ψ(3(N−1)/(2r)·(x_j − c_j))`.
pub fn phi_center<T: Scalar>(x: &[T], center: &[T], grid: &CenterGrid<T>) -> T {
    let s = grid.scale();
    x.iter()
        .zip(center)
        .map(|(xi, ci)| psi(s * (*xi - *ci)))
        .fold(T::one(), |acc, v| acc * v)
}

/// Sum of every bump at `x`; one on the cube.
pub fn partition_sum<T: Scalar>(x: &[T], grid: &CenterGrid<T>) -> T {
    (0..grid.len()).map(|k| phi_center(x, &grid.center(k), grid)).sum()
}

fn tooth<T: Scalar>(y: T) -> T {
    if y < T::lit(0.5) {
        T::lit(2.0) * y
    } else {
        T::lit(2.0) * (T::one() - y)
    }
}

/// `x − Σ_{s=1}^m g_s(x)/4^s` with `g_s` the `s`-fold sawtooth; within `2^{−2m−2}` of `x²`.
pub fn approx_square<T: Scalar>(x: T, m: usize) -> Result<T> {
    if m == 0 {
        return domain("approx_square needs m ≥ 1");
    }
    if !(x >= T::zero() && x <= T::one()) {
        return domain(format!("approx_square input {x} outside [0, 1]"));
    }
    let mut y = x;
    let mut acc = x;
    let mut w = T::one();
    for _ in 0..m {
        y = tooth(y);
        w = w * T::lit(0.25);
        acc -= w * y;
    }
    Ok(acc)
}

/// Error bound of [`approx_square`].
pub fn square_error_bound(m: usize) -> f64 {
    0.25_f64.powi(m as i32 + 1)
}

/// [`approx_square`] as a width-4 ReLU network with `m` hidden layers.
///
/// Hidden state: running sum, `ReLU(y)`, `ReLU(y − ½)`, `ReLU(y − 1)`.
pub fn square_network<T: Scalar>(m: usize) -> Result<Mlp<T>> {
    if m == 0 {
        return domain("square network needs m ≥ 1");
    }
    let (one, half, zero) = (T::one(), T::lit(0.5), T::zero());
    let tooth_row = [T::lit(2.0), T::lit(-4.0), T::lit(2.0)];
    let mut weights = vec![array![[one], [one], [one], [one]]];
    let mut biases = vec![array![zero, zero, -half, -one]];
    let mut w = one;
    for level in 1..=m {
        w = w * T::lit(0.25);
        // acc ← acc − w·y_level, y_level = 2a − 4b + 2c
        let acc_row = [one, -w * tooth_row[0], -w * tooth_row[1], -w * tooth_row[2]];
        if level == m {
            weights.push(Array2::from_shape_vec((1, 4), acc_row.to_vec()).expect("1×4"));
            biases.push(array![zero]);
        } else {
            let mut next = Array2::zeros((4, 4));
            for c in 0..4 {
                next[[0, c]] = acc_row[c];
            }
            for r in 1..4 {
                for c in 1..4 {
                    next[[r, c]] = tooth_row[c - 1];
                }
            }
            weights.push(next);
            biases.push(array![zero, zero, -half, -one]);
        }
    }
    Mlp::from_parts(weights, biases)
}

/// Approximate product with its declared accuracy `6M²·2^{−2m−2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxProduct<T> {
    pub value: T,
    pub epsilon: f64,
}

pub fn mul_accuracy(m: usize, bound: f64) -> f64 {
    6.0 * bound * bound * square_error_bound(m)
}

/// `2M²·(s(|x+y|/2M) − s(|x|/2M) − s(|y|/2M))` with `s` = [`approx_square`].
pub fn approx_mul<T: Scalar>(x: T, y: T, m: usize, bound: T) -> Result<ApproxProduct<T>> {
    if !(bound > T::zero()) {
        return domain("multiplication bound must be positive");
    }
    if !(x.abs() <= bound && y.abs() <= bound) {
        return domain(format!("inputs ({x}, {y}) exceed the bound {bound}"));
    }
    let two_m = T::lit(2.0) * bound;
    let s = |v: T| approx_square((v.abs() / two_m).min(T::one()), m);
    let value = T::lit(2.0) * bound * bound * (s(x + y)? - s(x)? - s(y)?);
    Ok(ApproxProduct {
        value,
        epsilon: mul_accuracy(m, bound.as_f64()),
    })
}

/// [`approx_mul`] as a ReLU network on `(x, y)`.
pub fn mul_network<T: Scalar>(m: usize, bound: T) -> Result<Mlp<T>> {
    if !(bound > T::zero()) {
        return domain("multiplication bound must be positive");
    }
    let k = T::one() / (T::lit(2.0) * bound);
    let (one, zero) = (T::one(), T::zero());
    // rows: ±(x+y), ±x, ±y, scaled by 1/2M
    let split = array![[k, k], [-k, -k], [k, zero], [-k, zero], [zero, k], [zero, -k]];
    let fold = array![
        [one, one, zero, zero, zero, zero],
        [zero, zero, one, one, zero, zero],
        [zero, zero, zero, zero, one, one]
    ];
    let abs = Mlp::from_parts(vec![split, fold], vec![Array1::zeros(6), Array1::zeros(3)])?;
    let sq = square_network::<T>(m)?;
    let squares = Mlp::block_diag(&Mlp::block_diag(&sq, &sq)?, &sq)?;
    let c = T::lit(2.0) * bound * bound;
    let combine = Mlp::affine(array![[c, -c, -c]], array![zero])?;
    Mlp::compose(&combine, &Mlp::compose(&squares, &abs)?)
}

fn clamp_unit<T: Scalar>(z: T) -> T {
    relu(z) - relu(z - T::one())
}

fn clamp_network<T: Scalar>() -> Result<Mlp<T>> {
    let one = T::one();
    Mlp::from_parts(
        vec![array![[one], [one]], array![[one, -one]]],
        vec![array![T::zero(), -one], array![T::zero()]],
    )
}

/// `ψ` factors of a bump, then nested clamped `×̃` with `M = 1`.
pub fn product_bump<T: Scalar>(x: &[T], center: &[T], grid: &CenterGrid<T>, m: usize) -> Result<T> {
    let s = grid.scale();
    let factors: Vec<T> = x.iter().zip(center).map(|(xi, ci)| psi(s * (*xi - *ci))).collect();
    let mut acc = *factors.last().expect("nonempty");
    for &f in factors[..factors.len() - 1].iter().rev() {
        acc = approx_mul(f, clamp_unit(acc), m, T::one())?.value;
    }
    Ok(acc)
}

fn product_network<T: Scalar>(d: usize, m: usize) -> Result<Mlp<T>> {
    if d == 1 {
        return Mlp::identity(1, 1);
    }
    let inner = Mlp::compose(&clamp_network()?, &product_network(d - 1, m)?)?;
    let both = Mlp::block_diag(&Mlp::identity(1, 1)?, &inner)?;
    Mlp::compose(&mul_network(m, T::one())?, &both)
}

/// Network realizing a product bump, its declared class and accuracy `d·δ`.
#[derive(Debug, Clone)]
pub struct BumpNetwork<T> {
    pub net: Mlp<T>,
    pub class: NetworkClassSpec,
    pub accuracy: f64,
}

pub fn product_bump_network<T: Scalar>(center: &[T], grid: &CenterGrid<T>, m: usize) -> Result<BumpNetwork<T>> {
    let d = grid.dim;
    if center.len() != d {
        return domain(format!("center of length {} on a {d}-dimensional grid", center.len()));
    }
    if m == 0 {
        return domain("product bump needs m ≥ 1");
    }
    let s = grid.scale();
    let (one, two) = (T::one(), T::lit(2.0));
    let mut w_in = Array2::zeros((4 * d, d));
    let mut b_in = Array1::zeros(4 * d);
    let mut w_out = Array2::zeros((d, 4 * d));
    for j in 0..d {
        for (u, (shift, sign)) in [(two, one), (one, -one), (-one, -one), (-two, one)].into_iter().enumerate() {
            w_in[[4 * j + u, j]] = s;
            b_in[4 * j + u] = shift - s * center[j];
            w_out[[j, 4 * j + u]] = sign;
        }
    }
    let psis = Mlp::from_parts(vec![w_in, w_out], vec![b_in, Array1::zeros(d)])?;
    let net = Mlp::compose(&product_network(d, m)?, &psis)?;
    let delta = mul_accuracy(m, 1.0);
    let accuracy = if d == 1 { 0.0 } else { d as f64 * delta };
    let max_c = center.iter().map(|c| c.abs().as_f64()).fold(0.0, f64::max);
    let dense: usize = net.dims().windows(2).map(|w| (w[0] + 1) * w[1]).sum();
    let class = NetworkClassSpec {
        d_in: d,
        d_out: 1,
        depth_l: 2 + (d - 1) * (m + 2),
        width_p: (4 * d).max(12 + 2 * d),
        sparsity_k: dense,
        weight_bound_kappa: 4.0_f64.max(s.as_f64() * max_c + 2.0).max(s.as_f64()),
        output_bound_r: 1.0 + accuracy,
    };
    Ok(BumpNetwork { net, class, accuracy })
}

/// `x ↦ Σ_k g(c_k)·φ_k(x)` on the cube and `0` outside, summing only bumps that can be nonzero.
pub fn piecewise_const_approx<'a, T, G>(g: G, grid: &'a CenterGrid<T>) -> impl Fn(&[T]) -> T + 'a
where
    T: Scalar,
    G: Fn(&[T]) -> T + 'a,
{
    let values: Vec<T> = grid.centers().iter().map(|c| g(c)).collect();
    move |x: &[T]| {
        if x.len() != grid.dim || !grid.contains(x) {
            return T::zero();
        }
        let n = grid.n_per_dim;
        let h = grid.spacing();
        let ranges: Vec<(usize, usize)> = x
            .iter()
            .map(|&v| {
                let p = ((v + grid.radius) / h).floor().to_usize().unwrap_or(0).min(n - 1);
                (p.saturating_sub(1), (p + 1).min(n - 1))
            })
            .collect();
        let mut total = T::zero();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        loop {
            let flat = idx.iter().fold(0, |acc, &i| acc * n + i);
            let c: Vec<T> = idx.iter().map(|&i| grid.coordinate(i)).collect();
            total += values[flat] * phi_center(x, &c, grid);
            let mut j = grid.dim;
            loop {
                if j == 0 {
                    return total;
                }
                j -= 1;
                if idx[j] < ranges[j].1 {
                    idx[j] += 1;
                    break;
                }
                idx[j] = ranges[j].0;
            }
        }
    }
}

/// The same sum over every center.
pub fn piecewise_const_full<T: Scalar>(g: impl Fn(&[T]) -> T, grid: &CenterGrid<T>, x: &[T]) -> T {
    if !grid.contains(x) {
        return T::zero();
    }
    grid.centers().iter().map(|c| g(c) * phi_center(x, c, grid)).sum()
}

/// `2r·L·√d/(N−1)`.
pub fn piecewise_bound(radius: f64, lipschitz: f64, dim: usize, n_per_dim: usize) -> f64 {
    2.0 * radius * lipschitz * (dim as f64).sqrt() / (n_per_dim - 1) as f64
}

/// Mean squared path-supremum error, split by whether the path stays in the cube.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathError {
    pub interior: f64,
    pub tail: f64,
    pub exit_fraction: f64,
}

impl PathError {
    pub fn total(&self) -> f64 {
        self.interior + self.tail
    }
}

/// `mean_paths (max_t |g(X_t) − ḡ(X_t)|²)` on a one-dimensional grid; paths must already be in cube coordinates.
pub fn path_approx_error<T: Scalar>(
    g: impl Fn(&[T]) -> T,
    grid: &CenterGrid<T>,
    batch: &PathBatch<T>,
) -> Result<PathError> {
    if grid.dim != 1 {
        return domain("path errors are defined for scalar paths");
    }
    let approx = piecewise_const_approx(&g, grid);
    let mut interior = 0.0;
    let mut tail = 0.0;
    let mut exits = 0usize;
    for path in batch.values.rows() {
        let mut sup = 0.0_f64;
        let mut inside = true;
        for &x in path.iter() {
            inside &= x.abs() <= grid.radius;
            sup = sup.max((g(&[x]) - approx(&[x])).as_f64().abs());
        }
        if inside {
            interior += sup * sup;
        } else {
            tail += sup * sup;
            exits += 1;
        }
    }
    let n = batch.n_paths() as f64;
    Ok(PathError {
        interior: interior / n,
        tail: tail / n,
        exit_fraction: exits as f64 / n,
    })
}
