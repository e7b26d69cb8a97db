//! Binary snapshot container.
//!
//! Fixed little-endian layout for cross-platform reproducibility:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DOA1"
//! 4       4     format version (u32, currently 1)
//! 8       4     element count N (u32)
//! 12      4     snapshot count K (u32)
//! 16      16·N·K complex samples, row-major, f64 re/im pairs
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use doa_core::array::UcaGeometry;
use doa_core::signal::SnapshotMatrix;
use nalgebra::DMatrix;
use num_complex::Complex64;

pub const MAGIC: [u8; 4] = *b"DOA1";
pub const FORMAT_VERSION: u32 = 1;
/// Header bytes ahead of the sample payload.
pub const HEADER_LEN: usize = 16;

/// Writes a snapshot matrix; the resulting file has exactly
/// `16 + 16·N·K` bytes.
pub fn write_snapshots(path: &Path, x: &SnapshotMatrix) -> io::Result<()> {
    let (n, k) = (x.n_elements(), x.n_snapshots());
    let mut buf = Vec::with_capacity(HEADER_LEN + 16 * n * k);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(k as u32).to_le_bytes());
    for row in 0..n {
        for col in 0..k {
            let v = x.samples()[(row, col)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)
}

/// Reads a container and attaches it to the given geometry. The stored
/// element count must match the geometry.
pub fn read_snapshots(path: &Path, geometry: &UcaGeometry) -> io::Result<SnapshotMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);

    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "file too short for a snapshot header ({} bytes)",
            bytes.len()
        )));
    }
    if bytes[0..4] != MAGIC {
        return Err(bad("bad magic: not a snapshot container".to_string()));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let version = word(4);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported container version {version}")));
    }
    let n = word(8) as usize;
    let k = word(12) as usize;
    if n != geometry.n_elements() {
        return Err(bad(format!(
            "container holds {n} elements, scenario geometry has {}",
            geometry.n_elements()
        )));
    }
    let expect = HEADER_LEN + 16 * n * k;
    if bytes.len() != expect {
        return Err(bad(format!(
            "expected {expect} bytes for N={n} K={k}, found {}",
            bytes.len()
        )));
    }

    let f64_at = |at: usize| f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
    let mut samples = DMatrix::<Complex64>::zeros(n, k);
    let mut at = HEADER_LEN;
    for row in 0..n {
        for col in 0..k {
            samples[(row, col)] = Complex64::new(f64_at(at), f64_at(at + 8));
            at += 16;
        }
    }
    SnapshotMatrix::new(geometry.clone(), samples)
        .map_err(|e| bad(format!("container rejected: {e}")))
}
