//! Exact network surgery: composition, parallel stacking and identity padding.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::Scalar;

impl<T: Scalar> Mlp<T> {
    /// One affine layer `x ↦ W x + b`.
    pub fn affine(weight: Array2<T>, bias: Array1<T>) -> Result<Self> {
        Self::from_parts(vec![weight], vec![bias])
    }

    /// Identity on `R^n` realized with `depth` affine layers (`x = ReLU(x) − ReLU(−x)`).
    pub fn identity(n: usize, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Domain("identity needs at least one layer".into()));
        }
        if depth == 1 {
            return Self::affine(Array2::eye(n), Array1::zeros(n));
        }
        let eye = Array2::<T>::eye(n);
        let split = concatenate![Axis(0), eye, eye.mapv(|v| -v)];
        let merge = concatenate![Axis(1), eye, eye.mapv(|v| -v)];
        let mut weights = vec![split];
        let mut biases = vec![Array1::zeros(2 * n)];
        for _ in 0..depth - 2 {
            weights.push(Array2::eye(2 * n));
            biases.push(Array1::zeros(2 * n));
        }
        weights.push(merge);
        biases.push(Array1::zeros(n));
        Self::from_parts(weights, biases)
    }

    /// `outer ∘ inner`, merging inner's output layer into outer's input layer.
    pub fn compose(outer: &Mlp<T>, inner: &Mlp<T>) -> Result<Self> {
        if outer.input_dim() != inner.output_dim() {
            return Err(Error::Shape(format!(
                "cannot feed {} outputs into {} inputs",
                inner.output_dim(),
                outer.input_dim()
            )));
        }
        let li = inner.depth();
        let mut weights: Vec<Array2<T>> = inner.weights[..li - 1].to_vec();
        let mut biases: Vec<Array1<T>> = inner.biases[..li - 1].to_vec();
        let w0 = &outer.weights[0];
        weights.push(w0.dot(&inner.weights[li - 1]));
        biases.push(w0.dot(&inner.biases[li - 1]) + &outer.biases[0]);
        weights.extend(outer.weights[1..].iter().cloned());
        biases.extend(outer.biases[1..].iter().cloned());
        Self::from_parts(weights, biases)
    }

    /// Pads with identity layers to exactly `depth` affine layers.
    pub fn deepen(&self, depth: usize) -> Result<Self> {
        if depth < self.depth() {
            return Err(Error::Domain(format!(
                "cannot shrink a depth-{} network to {depth}",
                self.depth()
            )));
        }
        if depth == self.depth() {
            return Ok(self.clone());
        }
        Self::compose(&Self::identity(self.output_dim(), depth - self.depth() + 1)?, self)
    }

    /// `(x, y) ↦ (a(x), b(y))`; the shallower network is padded first.
    pub fn block_diag(a: &Mlp<T>, b: &Mlp<T>) -> Result<Self> {
        let depth = a.depth().max(b.depth());
        let (a, b) = (a.deepen(depth)?, b.deepen(depth)?);
        let mut weights = Vec::with_capacity(depth);
        let mut biases = Vec::with_capacity(depth);
        for l in 0..depth {
            let (wa, wb) = (&a.weights[l], &b.weights[l]);
            let mut w = Array2::zeros((wa.nrows() + wb.nrows(), wa.ncols() + wb.ncols()));
            w.slice_mut(s![..wa.nrows(), ..wa.ncols()]).assign(wa);
            w.slice_mut(s![wa.nrows().., wa.ncols()..]).assign(wb);
            weights.push(w);
            biases.push(concatenate![Axis(0), a.biases[l], b.biases[l]]);
        }
        Self::from_parts(weights, biases)
    }

    /// `x ↦ (a(x), b(x))` on a shared input.
    pub fn parallel(a: &Mlp<T>, b: &Mlp<T>) -> Result<Self> {
        if a.input_dim() != b.input_dim() {
            return Err(Error::Shape("parallel networks need a common input".into()));
        }
        let n = a.input_dim();
        let dup = Self::affine(concatenate![Axis(0), Array2::eye(n), Array2::eye(n)], Array1::zeros(2 * n))?;
        Self::compose(&Self::block_diag(a, b)?, &dup)
    }
}
