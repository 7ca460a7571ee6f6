//! WFG1 wavefunction grid files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `WFG1` |
//! | 4 | 3×4 | dims `nx, ny, nz` as u32 |
//! | 16 | 3×8 | spacing in bohr as f64 |
//! | 40 | 8 | energy in Hartree as f64 |
//! | 48 | n×8 | values as `(re, im)` f32 pairs, row-major, z fastest |

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;

use super::WavefunctionGrid;
use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const WFG_MAGIC: &[u8; 4] = b"WFG1";
pub const WFG_HEADER_BYTES: usize = 48;

pub fn encode_wfg(grid: &WavefunctionGrid) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(WFG_HEADER_BYTES + 8 * grid.len());
    out.extend_from_slice(WFG_MAGIC);
    for d in grid.dims {
        let d = u32::try_from(d).map_err(|_| Error::Format { offset: 4, reason: "dimension exceeds u32".into() })?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for h in grid.spacing {
        out.extend_from_slice(&h.to_le_bytes());
    }
    out.extend_from_slice(&grid.energy.to_le_bytes());
    for v in &grid.values {
        out.extend_from_slice(&(v.re as f32).to_le_bytes());
        out.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_wfg(bytes: &[u8]) -> Result<WavefunctionGrid> {
    let fmt = |offset: usize, reason: &str| Error::Format { offset: offset as u64, reason: reason.into() };
    if bytes.len() < WFG_HEADER_BYTES {
        return Err(fmt(bytes.len(), "file shorter than the 48-byte header"));
    }
    if &bytes[..4] != WFG_MAGIC {
        return Err(fmt(0, "bad magic, expected WFG1"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = [u32_at(4), u32_at(8), u32_at(12)];
    let spacing = [f64_at(16), f64_at(24), f64_at(32)];
    let energy = f64_at(40);
    let n = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| fmt(4, "dims overflow"))?;
    let body = &bytes[WFG_HEADER_BYTES..];
    if body.len() != 8 * n {
        return Err(fmt(
            WFG_HEADER_BYTES + body.len().min(8 * n),
            &format!("body holds {} bytes, dims require {}", body.len(), 8 * n),
        ));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    WavefunctionGrid::new(dims, spacing, values, energy)
}

pub fn write_wfg(grid: &WavefunctionGrid, path: &Path) -> Result<()> {
    let bytes = encode_wfg(grid)?;
    write_atomic(path, |w| w.write_all(&bytes).map_err(Error::from))
}

pub fn read_wfg(path: &Path) -> Result<WavefunctionGrid> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_wfg(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tdm::gaussian_p;

    #[test]
    fn round_trip_at_single_precision() {
        let g = gaussian_p([9, 11, 13], [0.5, 0.45, 0.4], 0.5, 33.0, -0.2).unwrap().with_phase(0.3);
        let bytes = encode_wfg(&g).unwrap();
        assert_eq!(bytes.len(), WFG_HEADER_BYTES + 8 * 9 * 11 * 13);
        let back = decode_wfg(&bytes).unwrap();
        assert_eq!((back.dims, back.spacing, back.energy), (g.dims, g.spacing, g.energy));
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_eq!(a.re, b.re as f32 as f64);
            assert_eq!(a.im, b.im as f32 as f64);
        }
        // Exact once values are f32-representable.
        assert_eq!(encode_wfg(&back).unwrap(), bytes);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let g = gaussian_p([7; 3], [0.5; 3], 0.5, 0.0, 0.0).unwrap();
        let mut bytes = encode_wfg(&g).unwrap();
        assert!(matches!(decode_wfg(&bytes[..bytes.len() - 3]), Err(Error::Format { .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_wfg(&bytes), Err(Error::Format { offset: 0, .. })));
        assert!(decode_wfg(&bytes[..10]).is_err());
    }
}
