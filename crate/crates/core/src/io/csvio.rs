//! CSV curves: one header row, comma separated, `.` decimal point, numbers
//! in shortest round-trip form (`NaN` and `inf` spelled as Rust prints
//! them). Rereading a file reproduces the in-memory values exactly.

use std::path::Path;

use crate::analysis::{DecayMap, DipoleRecord, PolarSweep};
use crate::error::{invalid, Error, Result};
use crate::simulator::PlMap;

use super::write_atomic;

/// Named numeric columns stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Curve {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| invalid("csv", format!("missing column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            if r.len() != self.columns.len() {
                return Err(invalid("csv", "row length differs from header"));
            }
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is ascii"))
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| {
                    s.trim().parse::<f64>().map_err(|_| {
                        invalid("csv", format!("data row {}: `{s}` is not a number", line + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

pub fn write_curve(curve: &Curve, path: &Path) -> Result<()> {
    let text = curve.to_csv_string()?;
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

pub fn read_curve(path: &Path) -> Result<Curve> {
    Curve::from_csv_str(&std::fs::read_to_string(path)?)
}

const SWEEP_COLUMNS: [&str; 5] = ["angle_deg", "intensity", "error", "background", "acquisition_s"];

pub fn polar_sweep_curve(s: &PolarSweep) -> Curve {
    let mut c = Curve::new(&SWEEP_COLUMNS);
    for i in 0..s.len() {
        c.push(vec![s.angles_deg[i], s.intensities[i], s.errors[i], s.background, s.acquisition_s]);
    }
    c
}

pub fn write_polar_sweep_csv(s: &PolarSweep, path: &Path) -> Result<()> {
    s.validate()?;
    write_curve(&polar_sweep_curve(s), path)
}

pub fn read_polar_sweep_csv(path: &Path) -> Result<PolarSweep> {
    let c = read_curve(path)?;
    let first = |name: &str| -> Result<f64> {
        c.column(name)?.first().copied().ok_or_else(|| invalid("csv", "sweep file has no data rows"))
    };
    let s = PolarSweep {
        angles_deg: c.column("angle_deg")?,
        intensities: c.column("intensity")?,
        errors: c.column("error")?,
        background: first("background")?,
        acquisition_s: first("acquisition_s")?,
    };
    s.validate()?;
    Ok(s)
}

/// Long format: one row per (time bin, angle), rows grouped by time bin.
pub fn write_decay_map_csv(m: &DecayMap, path: &Path) -> Result<()> {
    m.validate()?;
    let mut c = Curve::new(&["t_start_ps", "t_end_ps", "angle_deg", "counts", "acquisition_s"]);
    for (row, counts) in m.counts.iter().enumerate() {
        for (a, n) in m.angles_deg.iter().zip(counts) {
            c.push(vec![
                m.time_edges_ps[row] as f64,
                m.time_edges_ps[row + 1] as f64,
                *a,
                *n as f64,
                m.acquisition_s,
            ]);
        }
    }
    write_curve(&c, path)
}

pub fn read_decay_map_csv(path: &Path) -> Result<DecayMap> {
    let c = read_curve(path)?;
    let (t0, t1, ang, cnt) = (c.column("t_start_ps")?, c.column("t_end_ps")?, c.column("angle_deg")?, c.column("counts")?);
    let acq = c.column("acquisition_s")?;
    if t0.is_empty() {
        return Err(invalid("csv", "decay map file has no data rows"));
    }
    let mut angles: Vec<f64> = Vec::new();
    for &a in &ang {
        if angles.contains(&a) {
            break;
        }
        angles.push(a);
    }
    let k = angles.len();
    if t0.len() % k != 0 {
        return Err(invalid("csv", "decay map rows do not form a full time × angle grid"));
    }
    let mut edges = Vec::new();
    let mut counts = Vec::new();
    for (r, chunk) in cnt.chunks(k).enumerate() {
        let base = r * k;
        if ang[base..base + k] != angles[..]
            || t0[base..base + k].iter().any(|&t| t != t0[base])
            || t1[base..base + k].iter().any(|&t| t != t1[base])
        {
            return Err(invalid("csv", format!("time bin {r} is not a complete angle block")));
        }
        if base + k < t0.len() && t1[base] != t0[base + k] {
            return Err(invalid("csv", format!("time bin {r} does not end where the next one starts")));
        }
        edges.push(t0[base] as i64);
        counts.push(chunk.iter().map(|&v| v as u64).collect());
    }
    edges.push(*t1.last().unwrap() as i64);
    let m = DecayMap { time_edges_ps: edges, angles_deg: angles, counts, acquisition_s: acq[0] };
    m.validate()?;
    Ok(m)
}

pub fn write_pl_map_csv(m: &PlMap, path: &Path) -> Result<()> {
    let mut c = Curve::new(&["ix", "iy", "counts", "pixel_size_nm", "dwell_ms"]);
    for iy in 0..m.height {
        for ix in 0..m.width {
            c.push(vec![ix as f64, iy as f64, m.at(ix, iy), m.pixel_size_nm, m.dwell_ms]);
        }
    }
    write_curve(&c, path)
}

pub fn read_pl_map_csv(path: &Path) -> Result<PlMap> {
    let c = read_curve(path)?;
    let (ix, iy, v) = (c.column("ix")?, c.column("iy")?, c.column("counts")?);
    if v.is_empty() {
        return Err(invalid("csv", "PL map file has no data rows"));
    }
    let width = ix.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    let height = iy.iter().fold(0.0f64, |a, &b| a.max(b)) as usize + 1;
    if width * height != v.len() {
        return Err(invalid("csv", "PL map rows do not cover a full rectangle"));
    }
    let mut values = vec![f64::NAN; v.len()];
    for ((x, y), val) in ix.iter().zip(&iy).zip(&v) {
        values[*y as usize * width + *x as usize] = *val;
    }
    if values.iter().any(|x| x.is_nan()) {
        return Err(invalid("csv", "PL map has duplicate or missing pixels"));
    }
    Ok(PlMap {
        width,
        height,
        pixel_size_nm: c.column("pixel_size_nm")?[0],
        dwell_ms: c.column("dwell_ms")?[0],
        values,
    })
}

/// One row per emitter with the `DipoleRecord` field names as header.
pub fn write_dipole_records_csv(records: &[DipoleRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, |out| Ok(out.write_all(&bytes)?))
}

pub fn read_dipole_records_csv(path: &Path) -> Result<Vec<DipoleRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let records = r.deserialize().collect::<std::result::Result<Vec<DipoleRecord>, _>>()?;
    for rec in &records {
        rec.validate()?;
    }
    Ok(records)
}
