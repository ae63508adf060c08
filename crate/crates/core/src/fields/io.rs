//! Flat binary field files (little-endian f64 re/im pairs, row-major nodes) with a JSON sidecar.

use super::{Axis, Chart, ChartKind, Field, Frame};
use crate::error::{CrError, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub kind: ChartKind,
    pub frame: Frame,
    pub names: Vec<String>,
    pub dims: Vec<usize>,
    pub axes: Vec<Axis>,
    pub coefficients_per_node: usize,
    pub weight: i32,
}

impl Sidecar {
    pub fn of(f: &Field) -> Self {
        let c = f.chart();
        Self {
            kind: c.kind(),
            frame: c.frame(),
            names: c.names().to_vec(),
            dims: c.shape().to_vec(),
            axes: c.axes().to_vec(),
            coefficients_per_node: c.ncoef(),
            weight: f.weight(),
        }
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn encode(f: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(f.data().len() * 16);
    for v in f.data() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Vec<C64>> {
    if bytes.len() % 16 != 0 {
        return Err(CrError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated field file")));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            C64::new(re, im)
        })
        .collect())
}

/// Write `path` (binary) and `path` with a `.json` extension (sidecar).
pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    std::fs::write(path, encode(f))?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&Sidecar::of(f))?)?;
    Ok(())
}

/// Read a field written by [`write_field`] onto a chart with matching layout.
pub fn read_field(path: &Path, chart: &Arc<Chart>) -> Result<Field> {
    let side: Sidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    if side.dims != chart.shape() || side.kind != chart.kind() || side.coefficients_per_node != chart.ncoef() {
        return Err(CrError::ChartMismatch(format!("file layout {:?} does not match {:?}", side.dims, chart)));
    }
    let data = decode(&std::fs::read(path)?)?;
    if data.len() != chart.nnodes() * chart.ncoef() {
        return Err(CrError::ChartMismatch("node count differs from sidecar".into()));
    }
    Ok(Field::new(chart, data, side.weight))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let c = Chart::periodic3([8; 3], [1.0; 3]).unwrap();
        let f = Field::from_fn(&c, |x| C64::new(x[0].exp(), -x[2])).with_weight(-2);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        write_field(&p, &f).unwrap();
        let g = read_field(&p, &c).unwrap();
        assert_eq!(g.weight(), -2);
        assert_eq!(g.data(), f.data());
        let other = Chart::periodic3([8, 8, 10], [1.0; 3]).unwrap();
        assert!(read_field(&p, &other).is_err());
    }
}
