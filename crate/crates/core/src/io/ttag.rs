//! TTAG binary time-tag files.
//!
//! Little-endian throughout. Header (40 bytes):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `TTAG` |
//! | 4 | 2 | version, u16 = 1 |
//! | 6 | 2 | zero padding |
//! | 8 | 8 | repetition rate in mHz, u64 |
//! | 16 | 8 | duration in ps, u64 |
//! | 24 | 8 | record count, u64 |
//! | 32 | 8 | reserved, zero |
//!
//! Each 16-byte record is `channel u16, flags u16, reserved u32 (zero),
//! timestamp_ps u64`. Timestamps are non-decreasing.

use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::{TimeTag, TimeTagStream};

use super::write_atomic;

pub const TTAG_MAGIC: &[u8; 4] = b"TTAG";
pub const TTAG_VERSION: u16 = 1;
pub const TTAG_HEADER_BYTES: usize = 40;
pub const TTAG_RECORD_BYTES: usize = 16;

const PS_MHZ: f64 = 1e15;

/// Repetition rate in mHz for a sync period in ps.
fn rate_mhz(period_ps: u64) -> u64 {
    if period_ps == 0 {
        0
    } else {
        (PS_MHZ / period_ps as f64).round() as u64
    }
}

fn period_ps(rate_mhz: u64) -> u64 {
    if rate_mhz == 0 {
        0
    } else {
        (PS_MHZ / rate_mhz as f64).round() as u64
    }
}

pub fn encode_ttag(stream: &TimeTagStream) -> Result<Vec<u8>> {
    let rate = rate_mhz(stream.sync_period_ps);
    if period_ps(rate) != stream.sync_period_ps {
        return Err(Error::Format {
            offset: 8,
            reason: format!("sync period {} ps is not representable as a mHz rate", stream.sync_period_ps),
        });
    }
    if let Some(i) = stream.records.windows(2).position(|w| w[1].timestamp_ps < w[0].timestamp_ps) {
        return Err(Error::Format {
            offset: (TTAG_HEADER_BYTES + (i + 1) * TTAG_RECORD_BYTES) as u64,
            reason: "timestamps must be non-decreasing".into(),
        });
    }
    let mut out = Vec::with_capacity(TTAG_HEADER_BYTES + TTAG_RECORD_BYTES * stream.records.len());
    out.extend_from_slice(TTAG_MAGIC);
    out.extend_from_slice(&TTAG_VERSION.to_le_bytes());
    out.extend_from_slice(&[0u8; 2]);
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&stream.duration_ps.to_le_bytes());
    out.extend_from_slice(&(stream.records.len() as u64).to_le_bytes());
    out.extend_from_slice(&[0u8; 8]);
    for r in &stream.records {
        out.extend_from_slice(&r.channel.to_le_bytes());
        out.extend_from_slice(&r.flags.to_le_bytes());
        out.extend_from_slice(&[0u8; 4]);
        out.extend_from_slice(&r.timestamp_ps.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_ttag(bytes: &[u8]) -> Result<TimeTagStream> {
    let fmt = |offset: usize, reason: String| Error::Format { offset: offset as u64, reason };
    if bytes.len() < TTAG_HEADER_BYTES {
        return Err(fmt(bytes.len(), format!("file holds {} bytes, header needs 40", bytes.len())));
    }
    if &bytes[..4] != TTAG_MAGIC {
        return Err(fmt(0, "bad magic, expected TTAG".into()));
    }
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TTAG_VERSION {
        return Err(fmt(4, format!("unsupported version {version}")));
    }
    let rate = u64_at(8);
    if rate == 0 {
        return Err(fmt(8, "repetition rate is zero".into()));
    }
    let duration_ps = u64_at(16);
    let n = u64_at(24);
    let body = bytes.len() - TTAG_HEADER_BYTES;
    if body % TTAG_RECORD_BYTES != 0 || (body / TTAG_RECORD_BYTES) as u64 != n {
        if (body / TTAG_RECORD_BYTES) as u64 > n {
            return Err(fmt(
                TTAG_HEADER_BYTES + n as usize * TTAG_RECORD_BYTES,
                format!("trailing bytes after {n} records"),
            ));
        }
        return Err(Error::Truncated { expected: n, found: (body / TTAG_RECORD_BYTES) as u64 });
    }
    let mut records = Vec::with_capacity(n as usize);
    let mut last = 0u64;
    for (i, c) in bytes[TTAG_HEADER_BYTES..].chunks_exact(TTAG_RECORD_BYTES).enumerate() {
        let r = TimeTag {
            channel: u16::from_le_bytes([c[0], c[1]]),
            flags: u16::from_le_bytes([c[2], c[3]]),
            timestamp_ps: u64::from_le_bytes(c[8..16].try_into().unwrap()),
        };
        if r.timestamp_ps < last {
            return Err(fmt(TTAG_HEADER_BYTES + i * TTAG_RECORD_BYTES + 8, "timestamp decreases".into()));
        }
        last = r.timestamp_ps;
        records.push(r);
    }
    Ok(TimeTagStream { records, duration_ps, sync_period_ps: period_ps(rate) })
}

pub fn write_ttag(stream: &TimeTagStream, path: &Path) -> Result<()> {
    let bytes = encode_ttag(stream)?;
    write_atomic(path, |w| Ok(w.write_all(&bytes)?))
}

pub fn read_ttag(path: &Path) -> Result<TimeTagStream> {
    decode_ttag(&std::fs::read(path)?)
}
