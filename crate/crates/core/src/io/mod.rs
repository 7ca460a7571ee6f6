//! File formats and report plumbing: TTAG time-tag files, run configs,
//! JSON reports and CSV curves. Every writer goes through a temp file in the
//! destination directory followed by a rename, so readers never observe a
//! partially written file.

mod config;
mod csvio;
mod report;
mod ttag;

pub use config::{ExperimentConfig, ExperimentMode, RunConfig};
pub use csvio::{
    polar_sweep_curve, read_curve, read_decay_map_csv, read_dipole_records_csv, write_dipole_records_csv, read_pl_map_csv, read_polar_sweep_csv, write_curve, write_decay_map_csv,
    write_pl_map_csv, write_polar_sweep_csv, Curve,
};
pub use report::{Report, REPORT_SCHEMA_VERSION, TOOL_NAME};
pub use ttag::{
    decode_ttag, encode_ttag, read_ttag, write_ttag, TTAG_HEADER_BYTES, TTAG_MAGIC, TTAG_RECORD_BYTES, TTAG_VERSION,
};

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

/// Writes through `body` into a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        write_atomic(&p, |w| Ok(w.write_all(b"one")?)).unwrap();
        write_atomic(&p, |w| Ok(w.write_all(b"two")?)).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        // A failing body leaves the old file untouched and no stray temp files.
        let r = write_atomic(&p, |_| Err(crate::Error::Config("boom".into())));
        assert!(r.is_err());
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
