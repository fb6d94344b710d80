//! Surface serialization.
//!
//! CSV: header `x,t_0,…,t_N`, then one row per spatial node `x_j,u(t_0,x_j),…`.
//! Binary: `u32` length + UTF-8 manifest reference, `u32` rows, `u32` cols,
//! then row-major little-endian `f64` values (row = time index).

use std::io::{Read, Write};

use ndarray::Array2;

use super::pricer::PriceSurface;
use crate::error::{Error, Result};
use crate::Scalar;

pub fn surface_to_csv<T: Scalar>(surface: &PriceSurface<T>) -> String {
    let mut out = String::new();
    write_surface_csv(surface, &mut out).expect("writing to String cannot fail");
    out
}

pub fn write_surface_csv<T: Scalar, W: std::fmt::Write>(
    surface: &PriceSurface<T>,
    out: &mut W,
) -> std::fmt::Result {
    let g = &surface.grid;
    write!(out, "x")?;
    for t in g.times() {
        write!(out, ",{}", t.as_f64())?;
    }
    writeln!(out)?;
    for (j, x) in g.x_nodes().into_iter().enumerate() {
        write!(out, "{}", x.as_f64())?;
        for n in 0..=g.n_time {
            write!(out, ",{}", surface.values[[n, j]].as_f64())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_surface_bin<T: Scalar, W: Write>(
    values: &Array2<T>,
    manifest_ref: &str,
    out: &mut W,
) -> Result<()> {
    let name = manifest_ref.as_bytes();
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name)?;
    let (rows, cols) = values.dim();
    out.write_all(&(rows as u32).to_le_bytes())?;
    out.write_all(&(cols as u32).to_le_bytes())?;
    for v in values.iter() {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

/// Returns the manifest reference and the value matrix.
pub fn read_surface_bin<T: Scalar, R: Read>(input: &mut R) -> Result<(String, Array2<T>)> {
    let mut u32buf = [0u8; 4];
    input.read_exact(&mut u32buf)?;
    let len = u32::from_le_bytes(u32buf) as usize;
    if len > 4096 {
        return Err(Error::Format(format!("manifest reference of {len} bytes")));
    }
    let mut name = vec![0u8; len];
    input.read_exact(&mut name)?;
    let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
    input.read_exact(&mut u32buf)?;
    let rows = u32::from_le_bytes(u32buf) as usize;
    input.read_exact(&mut u32buf)?;
    let cols = u32::from_le_bytes(u32buf) as usize;
    let mut data = Vec::with_capacity(rows * cols);
    let mut f64buf = [0u8; 8];
    for _ in 0..rows * cols {
        input.read_exact(&mut f64buf)?;
        data.push(T::lit(f64::from_le_bytes(f64buf)));
    }
    let values = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((name, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::{build_grid, price_european, MarketParams, PutPayoff};
    use proptest::prelude::*;

    #[test]
    fn csv_layout() {
        let m = MarketParams::new(0.1, 0.2).unwrap();
        let g = build_grid(45.0f64, 180.0, 5, 1.0, 2).unwrap();
        let s = price_european(&m, &g, &PutPayoff::new(100.0).unwrap()).unwrap();
        let csv = surface_to_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "x,0,0.5,1");
        let first: Vec<f64> = lines[1].split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(first[0], 45.0);
        for n in 0..=2 {
            assert_eq!(first[n + 1].to_bits(), s.values[[n, 0]].to_bits());
        }
    }

    proptest! {
        #[test]
        fn binary_roundtrip_is_bitwise(vals in proptest::collection::vec(-1e6f64..1e6, 12), name in "[a-z_.]{0,20}") {
            let a = Array2::from_shape_vec((3, 4), vals).unwrap();
            let mut buf = Vec::new();
            write_surface_bin(&a, &name, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), 4 + name.len() + 8 + 12 * 8);
            let (n2, b) = read_surface_bin::<f64, _>(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(n2, name);
            for (x, y) in a.iter().zip(b.iter()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_binary_rejected() {
        let a = Array2::<f64>::ones((2, 2));
        let mut buf = Vec::new();
        write_surface_bin(&a, "m.json", &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_surface_bin::<f64, _>(&mut buf.as_slice()).is_err());
    }
}
