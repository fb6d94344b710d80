use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{domain, Error, Result};
use crate::Scalar;

/// `x ↦ W_L·ReLU(… ReLU(W_1 x + b_1) …) + b_L`.
///
/// `weights[l]` is `dims[l+1] × dims[l]`; the output layer is affine.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    dims: Vec<usize>,
    pub(crate) weights: Vec<Array2<T>>,
    pub(crate) biases: Vec<Array1<T>>,
}

/// Parameter-shaped container used for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

/// Layer inputs and pre-activations of a batched forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    /// `inputs[l]` feeds affine layer `l`; `inputs[0]` is the batch itself.
    pub inputs: Vec<Array2<T>>,
    /// Output of the last affine layer.
    pub output: Array2<T>,
}

impl<T: Scalar> Mlp<T> {
    /// He-normal weights (variance `2/fan_in`) and zero biases.
    pub fn init(dims: &[usize], seed: u64) -> Result<Self> {
        check_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let std = (2.0 / w[0] as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            let data: Vec<T> = (0..w[0] * w[1])
                .map(|_| T::lit(normal.sample(&mut rng)))
                .collect();
            weights.push(Array2::from_shape_vec((w[1], w[0]), data).expect("shape"));
            biases.push(Array1::zeros(w[1]));
        }
        Ok(Self { dims: dims.to_vec(), weights, biases })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            dims: dims.to_vec(),
            weights: dims.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect(),
            biases: dims.windows(2).map(|w| Array1::zeros(w[1])).collect(),
        })
    }

    pub fn from_parts(weights: Vec<Array2<T>>, biases: Vec<Array1<T>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices vs {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut dims = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *dims.last().unwrap() || b.len() != w.nrows() {
                return Err(Error::Shape(format!(
                    "layer {l}: weight {:?} does not chain with input {} / bias {}",
                    w.dim(),
                    dims.last().unwrap(),
                    b.len()
                )));
            }
            dims.push(w.nrows());
        }
        check_dims(&dims)?;
        Ok(Self { dims, weights, biases })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn weights(&self) -> &[Array2<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<T>] {
        &self.biases
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {} for a network expecting {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = Array1::from(x.to_vec());
        let last = self.depth() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.dot(&a) + b;
            if l < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        Ok(a.to_vec())
    }

    /// Batched forward pass; rows are samples.
    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: ArrayView2<'_, T>) -> Result<Trace<T>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch with {} columns for a network expecting {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.depth());
        let mut a = x.to_owned();
        let last = self.depth() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = a.dot(&w.t());
            z += b;
            inputs.push(a);
            if l < last {
                z.mapv_inplace(relu);
            }
            a = z;
        }
        Ok(Trace { inputs, output: a })
    }

    /// Reverse pass given `∂L/∂output` for every row of the traced batch.
    ///
    /// Returns parameter gradients and `∂L/∂input`. `ReLU'(0)` is taken as 0.
    pub fn backprop(&self, trace: &Trace<T>, grad_output: Array2<T>) -> (Grads<T>, Array2<T>) {
        let depth = self.depth();
        let mut gw = vec![Array2::zeros((0, 0)); depth];
        let mut gb = vec![Array1::zeros(0); depth];
        let mut delta = grad_output;
        for l in (0..depth).rev() {
            let input = &trace.inputs[l];
            gw[l] = delta.t().dot(input);
            gb[l] = delta.sum_axis(Axis(0));
            let mut back = delta.dot(&self.weights[l]);
            if l > 0 {
                // inputs[l] = ReLU(z_{l-1}); positive exactly where z > 0
                Zip::from(&mut back).and(input).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
            }
            delta = back;
        }
        (Grads { weights: gw, biases: gb }, delta)
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Array2<T>], &mut [Array1<T>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// Every parameter in layer order, weights of a layer before its bias.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

/// Mean over samples of the squared output error `‖f(x) − y‖²`, and its gradient.
pub fn mlp_backward<T: Scalar>(
    net: &Mlp<T>,
    inputs: ArrayView2<'_, T>,
    targets: ArrayView2<'_, T>,
) -> Result<(T, Grads<T>)> {
    if inputs.nrows() != targets.nrows() || targets.ncols() != net.output_dim() {
        return Err(Error::Shape(format!(
            "inputs {:?} and targets {:?} for output width {}",
            inputs.dim(),
            targets.dim(),
            net.output_dim()
        )));
    }
    let n = inputs.nrows();
    if n == 0 {
        return domain("empty batch");
    }
    let trace = net.forward_trace(inputs)?;
    let resid = &trace.output - &targets;
    let inv_n = T::one() / T::from_usize_lossy(n);
    let loss = resid.iter().map(|r| *r * *r).sum::<T>() * inv_n;
    let grad_out = resid * (T::lit(2.0) * inv_n);
    let (grads, _) = net.backprop(&trace, grad_out);
    Ok((loss, grads))
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Grads<T>) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

#[inline]
fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) {
        return domain(format!(
            "layer dims need at least two positive entries, got {dims:?}"
        ));
    }
    Ok(())
}
