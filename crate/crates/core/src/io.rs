//! Serialization: the self-describing binary field container, CSV
//! diagnostics, and atomic file writes.
//!
//! Container layout (little-endian):
//! `magic "RLXF" | version u32 | dim u32 | points_per_axis u32 |
//!  period f64 | ncomp u32 | ncomp * M^dim doubles, row-major`.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::euler::DiagnosticsRecord;
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;

const MAGIC: &[u8; 4] = b"RLXF";
const VERSION: u32 = 1;

/// Write bytes to `path` atomically (temp file + rename).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serialize one or more components sharing a grid.
pub fn encode_fields(fields: &[&ScalarField]) -> Result<Vec<u8>> {
    if fields.is_empty() {
        return Err(CoreError::Config("no components to serialize".into()));
    }
    let grid = fields[0].grid();
    if fields.iter().any(|f| !Arc::ptr_eq(f.grid(), grid)) {
        return Err(CoreError::Config(
            "all serialized components must share one grid".into(),
        ));
    }
    let n = grid.len();
    let mut out = Vec::with_capacity(28 + 8 * n * fields.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(grid.points_per_axis() as u32).to_le_bytes());
    out.extend_from_slice(&grid.period().to_le_bytes());
    out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
    for f in fields {
        for v in f.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_fields(path: &Path, fields: &[&ScalarField]) -> Result<()> {
    atomic_write(path, &encode_fields(fields)?)
}

/// Read a container back, reconstructing the grid from the header.
pub fn read_fields(path: &Path) -> Result<(Arc<PeriodicGrid>, Vec<ScalarField>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_fields(&bytes)
}

pub fn decode_fields(bytes: &[u8]) -> Result<(Arc<PeriodicGrid>, Vec<ScalarField>)> {
    let bad = |msg: &str| CoreError::Validation(format!("field container: {msg}"));
    if bytes.len() < 28 || &bytes[0..4] != MAGIC {
        return Err(bad("missing magic header"));
    }
    let u32_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let dim = u32_at(8) as usize;
    let m = u32_at(12) as usize;
    let period = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let ncomp = u32_at(24) as usize;
    let grid = PeriodicGrid::new(dim, m, period)?;
    let n = grid.len();
    let expected = 28 + 8 * n * ncomp;
    if bytes.len() != expected {
        return Err(bad(&format!(
            "payload length {} does not match header ({expected})",
            bytes.len()
        )));
    }
    let mut fields = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let base = 28 + 8 * n * c;
        let vals: Vec<f64> = (0..n)
            .map(|i| f64::from_le_bytes(bytes[base + 8 * i..base + 8 * i + 8].try_into().unwrap()))
            .collect();
        fields.push(ScalarField::from_values(grid.clone(), vals)?);
    }
    Ok((grid, fields))
}

/// Euler diagnostics as CSV; fixed float formatting keeps reruns
/// byte-identical.
pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(
        "s,mass,rel_entropy,dissipation,balance_residual,sup_w,sup_grad_w,blowup_integral\n",
    );
    for d in records {
        out.push_str(&format!(
            "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
            d.s,
            d.mass,
            d.rel_entropy,
            d.dissipation,
            d.balance_residual,
            d.sup_w,
            d.sup_grad_w,
            d.blowup_integral
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::RandomFieldSpec;

    #[test]
    fn container_round_trip() {
        let grid = PeriodicGrid::new(2, 16, 3.5).unwrap();
        let a = RandomFieldSpec {
            seed: 1,
            k_min: 1.0,
            k_max: 4.0,
            decay: 1.0,
            amplitude: 1.0,
        }
        .realize(&grid)
        .unwrap();
        let b = RandomFieldSpec {
            seed: 2,
            k_min: 1.0,
            k_max: 4.0,
            decay: 1.0,
            amplitude: 0.5,
        }
        .realize(&grid)
        .unwrap();
        let bytes = encode_fields(&[&a, &b]).unwrap();
        let (g2, fields) = decode_fields(&bytes).unwrap();
        assert_eq!(g2.dim(), 2);
        assert_eq!(g2.points_per_axis(), 16);
        assert_eq!(g2.period(), 3.5);
        assert_eq!(fields.len(), 2);
        for (orig, back) in [(&a, &fields[0]), (&b, &fields[1])] {
            for (x, y) in orig.values().iter().zip(back.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn corrupt_container_rejected() {
        let grid = PeriodicGrid::new(1, 16, 1.0).unwrap();
        let f = ScalarField::constant(grid, 1.0);
        let mut bytes = encode_fields(&[&f]).unwrap();
        bytes[0] = b'X';
        assert!(decode_fields(&bytes).is_err());
        let short = &encode_fields(&[&f]).unwrap()[..40];
        assert!(decode_fields(short).is_err());
    }

    #[test]
    fn atomic_write_creates_file() {
        let dir = std::env::temp_dir().join("relaxlab_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.bin");
        atomic_write(&path, b"hello").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"hello");
        std::fs::remove_dir_all(&dir).ok();
    }
}
