//! Write a simulated stream to a TTAG file, read it back and inspect the
//! header fields and per-channel counts.

use polardyn::io::{read_ttag, write_ttag, TTAG_HEADER_BYTES, TTAG_RECORD_BYTES};
use polardyn::photophysics::EmitterModel;
use polardyn::simulator::{simulate_timetags, InstrumentConfig};

fn main() -> polardyn::Result<()> {
    let emitter = EmitterModel::default();
    let inst = InstrumentConfig::default();
    let stream = simulate_timetags(&emitter, &inst, emitter.exc_axis, None, 1_000_000, 1)?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("stream.ttag");
    write_ttag(&stream, &path)?;
    let size = std::fs::metadata(&path)?.len() as usize;
    assert_eq!(size, TTAG_HEADER_BYTES + TTAG_RECORD_BYTES * stream.records.len());
    let back = read_ttag(&path)?;
    println!(
        "{} records, {} bytes, period {} ps, duration {} ps, identical after reading: {}",
        back.records.len(),
        size,
        back.sync_period_ps,
        back.duration_ps,
        back == stream
    );
    println!("channel 0: {} clicks, channel 1: {} clicks", back.channel_count(0), back.channel_count(1));
    Ok(())
}
