//! Binary checkpoints: `b"DNOP"`, `u32` version, `u32` affine-layer count `L`,
//! `L+1` `u32` dims, then every weight matrix (row-major) followed by every
//! bias vector, in layer order, as little-endian `f64`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::Scalar;

pub const MAGIC: &[u8; 4] = b"DNOP";
pub const VERSION: u32 = 1;

pub fn write_mlp<T: Scalar, W: Write>(net: &Mlp<T>, out: &mut W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    write_mlp_body(net, out)
}

pub fn read_mlp<T: Scalar, R: Read>(input: &mut R) -> Result<Mlp<T>> {
    read_header(input)?;
    read_mlp_body(input)
}

pub(crate) fn read_header<R: Read>(input: &mut R) -> Result<()> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    Ok(())
}

/// Layer count, dims and parameters without the file header.
pub fn write_mlp_body<T: Scalar, W: Write>(net: &Mlp<T>, out: &mut W) -> Result<()> {
    out.write_all(&(net.depth() as u32).to_le_bytes())?;
    for &d in net.dims() {
        out.write_all(&(d as u32).to_le_bytes())?;
    }
    for w in net.weights() {
        for v in w.iter() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    for b in net.biases() {
        for v in b.iter() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_mlp_body<T: Scalar, R: Read>(input: &mut R) -> Result<Mlp<T>> {
    let layers = read_u32(input)? as usize;
    if layers == 0 || layers > 1024 {
        return Err(Error::Format(format!("implausible layer count {layers}")));
    }
    let dims: Vec<usize> = (0..=layers)
        .map(|_| read_u32(input).map(|d| d as usize))
        .collect::<Result<_>>()?;
    let mut weights = Vec::with_capacity(layers);
    for w in dims.windows(2) {
        let data = read_f64s(input, w[0] * w[1])?;
        weights.push(Array2::from_shape_vec((w[1], w[0]), data).map_err(|e| Error::Format(e.to_string()))?);
    }
    let mut biases = Vec::with_capacity(layers);
    for w in dims.windows(2) {
        biases.push(Array1::from(read_f64s(input, w[1])?));
    }
    Mlp::from_parts(weights, biases)
}

pub(crate) fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn read_f64s<T: Scalar, R: Read>(input: &mut R, n: usize) -> Result<Vec<T>> {
    let mut b = [0u8; 8];
    (0..n)
        .map(|_| {
            input.read_exact(&mut b)?;
            Ok(T::lit(f64::from_le_bytes(b)))
        })
        .collect()
}
