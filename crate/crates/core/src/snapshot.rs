//! CFX1 raw field snapshots.
//!
//! Layout: magic `b"CFX1"`, `u32` resolution N, `u32` component count, four
//! reserved zero bytes, then `count·N·N` little-endian `f64` samples,
//! component-major and row-major within a component.

use std::io::{self, Read, Write};

use crate::field::{Grid, ScalarField};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"CFX1";
pub const HEADER_LEN: usize = 16;

pub fn write_snapshot<T: Real, W: Write>(
    mut out: W,
    components: &[&ScalarField<T>],
) -> io::Result<()> {
    let first = components
        .first()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "no components"))?;
    let n = first.grid().n();
    if components.iter().any(|c| c.grid() != first.grid()) {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            "components on different grids",
        ));
    }
    out.write_all(MAGIC)?;
    out.write_all(&(n as u32).to_le_bytes())?;
    out.write_all(&(components.len() as u32).to_le_bytes())?;
    out.write_all(&[0u8; 4])?;
    let mut buf = Vec::with_capacity(8 * n * n);
    for c in components {
        buf.clear();
        for &x in c.samples() {
            buf.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    Ok(())
}

/// Raw decoded snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn into_fields(self, grid: &Grid<f64>) -> io::Result<Vec<ScalarField<f64>>> {
        if grid.n() != self.n {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "snapshot resolution does not match grid",
            ));
        }
        self.components
            .into_iter()
            .map(|c| {
                ScalarField::from_vec(grid, c)
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
            })
            .collect()
    }
}

pub fn read_snapshot<R: Read>(mut input: R) -> io::Result<Snapshot> {
    let mut header = [0u8; HEADER_LEN];
    input.read_exact(&mut header)?;
    if &header[0..4] != MAGIC {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let n = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let count = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut components = Vec::with_capacity(count);
    let mut buf = vec![0u8; 8 * n * n];
    for _ in 0..count {
        input.read_exact(&mut buf)?;
        components.push(
            buf.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect(),
        );
    }
    Ok(Snapshot { n, components })
}
