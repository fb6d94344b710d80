//! Operator checkpoints: the neural checkpoint header, an `OPER` section
//! (`u32` sensor count, sensor prices, then maturity, `x_min`, `x_max`,
//! output scale), then the branch and trunk bodies.

use std::io::{Read, Write};

use super::model::{Normalization, OperatorModel, SensorSet};
use crate::error::{Error, Result};
use crate::neural::checkpoint::{read_f64s, read_header, read_u32};
use crate::neural::{read_mlp_body, write_mlp_body, MAGIC, VERSION};
use crate::Scalar;

const SECTION: &[u8; 4] = b"OPER";

pub fn write_operator<T: Scalar, W: Write>(model: &OperatorModel<T>, out: &mut W) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(SECTION)?;
    out.write_all(&(model.sensors.len() as u32).to_le_bytes())?;
    let n = &model.norm;
    let values = model
        .sensors
        .points()
        .iter()
        .chain([&n.maturity, &n.x_min, &n.x_max, &n.u_scale]);
    for v in values {
        out.write_all(&v.as_f64().to_le_bytes())?;
    }
    write_mlp_body(&model.branch, out)?;
    write_mlp_body(&model.trunk, out)
}

pub fn read_operator<T: Scalar, R: Read>(input: &mut R) -> Result<OperatorModel<T>> {
    read_header(input)?;
    let mut tag = [0u8; 4];
    input.read_exact(&mut tag)?;
    if &tag != SECTION {
        return Err(Error::Format("checkpoint has no operator section".into()));
    }
    let count = read_u32(input)? as usize;
    if count > 1 << 20 {
        return Err(Error::Format(format!("implausible sensor count {count}")));
    }
    let sensors = SensorSet::from_points(read_f64s(input, count)?)?;
    let c: Vec<T> = read_f64s(input, 4)?;
    let norm = Normalization {
        maturity: c[0],
        x_min: c[1],
        x_max: c[2],
        u_scale: c[3],
    };
    let branch = read_mlp_body(input)?;
    let trunk = read_mlp_body(input)?;
    OperatorModel::from_parts(branch, trunk, sensors, norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fd::build_grid;
    use crate::operator::Architecture;

    #[test]
    fn roundtrip_is_bitwise() {
        let grid = build_grid(45.0, 180.0, 10, 1.0, 3).unwrap();
        let arch = Architecture {
            n_sensors: 8,
            latent: 3,
            branch_hidden: vec![5],
            trunk_hidden: vec![4, 4],
        };
        let m = OperatorModel::<f64>::new(&arch, &grid, 120.0, 11).unwrap();
        let mut bytes = Vec::new();
        write_operator(&m, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"DNOP");
        assert_eq!(&bytes[8..12], b"OPER");
        let back: OperatorModel<f64> = read_operator(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, m);
        let mut again = Vec::new();
        write_operator(&back, &mut again).unwrap();
        assert_eq!(again, bytes);
        assert!(read_operator::<f64, _>(&mut &bytes[..bytes.len() - 3]).is_err());
        let mut plain = Vec::new();
        crate::neural::write_mlp(&m.branch, &mut plain).unwrap();
        assert!(read_operator::<f64, _>(&mut plain.as_slice()).is_err());
    }
}
