//! Binary grid snapshots.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DSOD"
//!      4     4  format version (u32) = 1
//!      8     4  d (u32)
//!     12     4  kind code (u32)
//!     16     8  n (u64)
//!     24     8  value count n^d (u64)
//!     32  8·n^d values, f64 little-endian, row-major with the last axis fastest
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::torus::{RealGrid, TorusLattice};

pub const MAGIC: [u8; 4] = *b"DSOD";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

/// What a snapshot holds; the code is stored in the header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotKind {
    Chi,
    Eta,
    W,
    Odometer,
    Configuration,
    Weights,
}

impl SnapshotKind {
    pub fn code(self) -> u32 {
        match self {
            SnapshotKind::Chi => 1,
            SnapshotKind::Eta => 2,
            SnapshotKind::W => 3,
            SnapshotKind::Odometer => 4,
            SnapshotKind::Configuration => 5,
            SnapshotKind::Weights => 6,
        }
    }

    pub fn from_code(code: u32) -> Result<Self> {
        Ok(match code {
            1 => SnapshotKind::Chi,
            2 => SnapshotKind::Eta,
            3 => SnapshotKind::W,
            4 => SnapshotKind::Odometer,
            5 => SnapshotKind::Configuration,
            6 => SnapshotKind::Weights,
            _ => return Err(Error::Snapshot(format!("unknown kind code {code}"))),
        })
    }
}

impl From<crate::field::FieldKind> for SnapshotKind {
    fn from(k: crate::field::FieldKind) -> Self {
        match k {
            crate::field::FieldKind::Chi => SnapshotKind::Chi,
            crate::field::FieldKind::Eta => SnapshotKind::Eta,
            crate::field::FieldKind::W => SnapshotKind::W,
        }
    }
}

pub fn encode_header(lattice: &TorusLattice, kind: SnapshotKind) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
    h[8..12].copy_from_slice(&(lattice.d() as u32).to_le_bytes());
    h[12..16].copy_from_slice(&kind.code().to_le_bytes());
    h[16..24].copy_from_slice(&(lattice.n() as u64).to_le_bytes());
    h[24..32].copy_from_slice(&(lattice.size() as u64).to_le_bytes());
    h
}

pub fn write_snapshot<W: Write>(out: &mut W, grid: &RealGrid, kind: SnapshotKind) -> Result<()> {
    out.write_all(&encode_header(grid.lattice(), kind))?;
    let mut buf = Vec::with_capacity(8 * grid.values().len());
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<(SnapshotKind, RealGrid)> {
    let mut h = [0u8; HEADER_LEN];
    input.read_exact(&mut h)?;
    if h[0..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().expect("4 bytes"));
    let u64_at = |i: usize| u64::from_le_bytes(h[i..i + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let kind = SnapshotKind::from_code(u32_at(12))?;
    let lattice = TorusLattice::new(u32_at(8) as usize, u64_at(16) as usize)?;
    if u64_at(24) != lattice.size() as u64 {
        return Err(Error::Snapshot("value count does not match n^d".into()));
    }
    let mut raw = vec![0u8; 8 * lattice.size()];
    input.read_exact(&mut raw)?;
    let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Ok((kind, RealGrid::from_vec(lattice, values)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let lat = TorusLattice::new(2, 3).unwrap();
        let h = encode_header(&lat, SnapshotKind::Odometer);
        assert_eq!(&h[..4], b"DSOD");
        assert_eq!(h[4..8], [1, 0, 0, 0]);
        assert_eq!(h[8..12], [2, 0, 0, 0]);
        assert_eq!(h[12..16], [4, 0, 0, 0]);
        assert_eq!(h[16..24], [3, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(h[24..32], [9, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn round_trip() {
        let lat = TorusLattice::new(1, 4).unwrap();
        let g = RealGrid::from_vec(lat, vec![1.5, -0.25, f64::MIN_POSITIVE, 3e300]).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &g, SnapshotKind::Chi).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 32);
        assert_eq!(bytes[32..40], 1.5f64.to_le_bytes());
        let (kind, back) = read_snapshot(&mut bytes.as_slice()).unwrap();
        assert_eq!(kind, SnapshotKind::Chi);
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_corruption() {
        let lat = TorusLattice::new(1, 2).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &RealGrid::zeros(lat), SnapshotKind::W).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
        let mut bad = bytes.clone();
        bad[24] = 3;
        assert!(read_snapshot(&mut bad.as_slice()).is_err());
        assert!(read_snapshot(&mut &bytes[..40]).is_err());
    }
}
