//! Byte-level checks of the on-disk formats against hand-assembled files.

use polardyn::analysis::{DecayMap, DipoleRecord, PolarSweep};
use polardyn::io::{
    decode_ttag, encode_ttag, read_decay_map_csv, read_dipole_records_csv, read_pl_map_csv, read_polar_sweep_csv,
    write_decay_map_csv, write_dipole_records_csv, write_pl_map_csv, write_polar_sweep_csv, Report, RunConfig,
    TTAG_HEADER_BYTES, TTAG_RECORD_BYTES,
};
use polardyn::simulator::{PlMap, TimeTag, TimeTagStream};
use polardyn::tdm::{gaussian_p, read_wfg, write_wfg, WFG_HEADER_BYTES};
use polardyn::Error;

fn le_u16(v: u16) -> [u8; 2] {
    v.to_le_bytes()
}
fn le_u64(v: u64) -> [u8; 8] {
    v.to_le_bytes()
}

/// TTAG file written field by field, independently of the encoder.
fn hand_ttag(rate_mhz: u64, duration: u64, recs: &[(u16, u16, u64)]) -> Vec<u8> {
    let mut b = Vec::new();
    b.extend_from_slice(b"TTAG");
    b.extend_from_slice(&le_u16(1));
    b.extend_from_slice(&[0, 0]);
    b.extend_from_slice(&le_u64(rate_mhz));
    b.extend_from_slice(&le_u64(duration));
    b.extend_from_slice(&le_u64(recs.len() as u64));
    b.extend_from_slice(&[0; 8]);
    for &(ch, fl, t) in recs {
        b.extend_from_slice(&le_u16(ch));
        b.extend_from_slice(&le_u16(fl));
        b.extend_from_slice(&[0; 4]);
        b.extend_from_slice(&le_u64(t));
    }
    b
}

#[test]
fn ttag_matches_hand_assembled_bytes() {
    let recs = [(0u16, 0u16, 10u64), (1, 1, 10), (0, 0, 123_456_789_012)];
    // 20 MHz = 2e10 mHz; period 50 000 ps.
    let bytes = hand_ttag(20_000_000_000, 200_000_000_000, &recs);
    assert_eq!(bytes.len(), TTAG_HEADER_BYTES + 3 * TTAG_RECORD_BYTES);
    let s = decode_ttag(&bytes).unwrap();
    assert_eq!(s.sync_period_ps, 50_000);
    assert_eq!(s.duration_ps, 200_000_000_000);
    assert_eq!(s.records[1], TimeTag { timestamp_ps: 10, channel: 1, flags: 1 });
    assert_eq!(encode_ttag(&s).unwrap(), bytes);
}

#[test]
fn ttag_errors_are_located() {
    let bytes = hand_ttag(20_000_000_000, 1_000, &[(0, 0, 1), (1, 0, 2)]);
    match decode_ttag(&bytes[..bytes.len() - 5]) {
        Err(Error::Truncated { expected, found }) => assert!(found < expected),
        other => panic!("{other:?}"),
    }
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(decode_ttag(&bad), Err(Error::Format { offset: 4, .. })));
    let mut bad = bytes.clone();
    bad[8..16].fill(0);
    assert!(matches!(decode_ttag(&bad), Err(Error::Format { offset: 8, .. })));
    let mut bad = bytes.clone();
    bad[1] = b'X';
    assert!(matches!(decode_ttag(&bad), Err(Error::Format { offset: 0, .. })));
    // Out-of-order timestamps are a format error, not silently sorted.
    let unsorted = hand_ttag(20_000_000_000, 1_000, &[(0, 0, 5), (1, 0, 2)]);
    assert!(decode_ttag(&unsorted).is_err());
    let s = TimeTagStream {
        records: vec![TimeTag { timestamp_ps: 5, channel: 0, flags: 0 }, TimeTag { timestamp_ps: 2, channel: 0, flags: 0 }],
        duration_ps: 10,
        sync_period_ps: 50_000,
    };
    assert!(encode_ttag(&s).is_err());
}

#[test]
fn wfg_header_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.wfg");
    let g = gaussian_p([5, 6, 7], [0.5, 0.4, 0.3], 0.5, 10.0, -0.25).unwrap();
    write_wfg(&g, &path).unwrap();
    let b = std::fs::read(&path).unwrap();
    assert_eq!(b.len(), WFG_HEADER_BYTES + 8 * 5 * 6 * 7);
    assert_eq!(&b[..4], b"WFG1");
    assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 5);
    assert_eq!(u32::from_le_bytes(b[12..16].try_into().unwrap()), 7);
    assert_eq!(f64::from_le_bytes(b[24..32].try_into().unwrap()), 0.4);
    assert_eq!(f64::from_le_bytes(b[40..48].try_into().unwrap()), -0.25);
    // First value is (re, im) as f32, z fastest.
    let re = f32::from_le_bytes(b[48..52].try_into().unwrap());
    assert_eq!(re, g.values[0].re as f32);
    let back = read_wfg(&path).unwrap();
    assert_eq!(back.dims, [5, 6, 7]);
    // A header claiming more points than the body holds is rejected.
    let mut bad = b.clone();
    bad[4..8].copy_from_slice(&6u32.to_le_bytes());
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(read_wfg(&path), Err(Error::Format { .. })));
}

#[test]
fn csv_formats_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = PolarSweep {
        angles_deg: vec![0.0, 15.0, 30.0],
        intensities: vec![100.0, 80.5, 0.1],
        errors: vec![10.0, 8.972179222, 0.31622776601683794],
        acquisition_s: 0.25,
        background: 3.0,
    };
    let p = dir.path().join("sweep.csv");
    write_polar_sweep_csv(&sweep, &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().next().unwrap(), "angle_deg,intensity,error,background,acquisition_s");
    assert_eq!(read_polar_sweep_csv(&p).unwrap(), sweep);

    let map = DecayMap {
        time_edges_ps: vec![-100, 0, 41, 82],
        angles_deg: vec![0.0, 90.0],
        counts: vec![vec![1, 2], vec![30, 40], vec![5, 6]],
        acquisition_s: 1.0,
    };
    let p = dir.path().join("map.csv");
    write_decay_map_csv(&map, &p).unwrap();
    assert_eq!(
        std::fs::read_to_string(&p).unwrap().lines().next().unwrap(),
        "t_start_ps,t_end_ps,angle_deg,counts,acquisition_s"
    );
    assert_eq!(read_decay_map_csv(&p).unwrap(), map);
    let gap = std::fs::read_to_string(&p).unwrap().replacen("0,41,0,30", "1,41,0,30", 1).replacen("0,41,90,40", "1,41,90,40", 1);
    std::fs::write(&p, gap).unwrap();
    assert!(read_decay_map_csv(&p).is_err());

    let pl = PlMap { width: 3, height: 2, pixel_size_nm: 50.0, dwell_ms: 2.0, values: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.5] };
    let p = dir.path().join("pl.csv");
    write_pl_map_csv(&pl, &p).unwrap();
    assert_eq!(read_pl_map_csv(&p).unwrap(), pl);

    let recs = vec![DipoleRecord {
        emitter_id: "x1".into(),
        exc_axis_deg: 63.0,
        exc_axis_err_deg: 0.5,
        em_axis_deg: 81.0,
        em_axis_err_deg: 0.4,
        exc_visibility: 0.9667,
        em_visibility: 0.9801,
        g2_0: 0.017,
        lifetime_ns: 3.96,
    }];
    let p = dir.path().join("records.csv");
    write_dipole_records_csv(&recs, &p).unwrap();
    assert_eq!(read_dipole_records_csv(&p).unwrap(), recs);

    std::fs::write(&p, "emitter_id,exc_axis_deg\nx1,not-a-number\n").unwrap();
    assert!(read_dipole_records_csv(&p).is_err());
}

#[test]
fn run_config_and_reports() {
    let defaults = RunConfig::default();
    assert_eq!(RunConfig::from_json("{}").unwrap(), defaults);
    let echoed = defaults.to_json_pretty().unwrap();
    assert_eq!(RunConfig::from_json(&echoed).unwrap(), defaults);
    assert!(RunConfig::from_json(r#"{"instrument": {"rep_rate": 20}}"#).is_err());
    assert!(RunConfig::from_json(r#"{"experiment": {"n_pulses": -1}}"#).is_err());

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let r = Report::new("fit", Some(7), vec!["a.csv".into()], serde_json::json!({"k": 1}), serde_json::json!([1.5, 2.0]))
        .unwrap();
    r.write(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.ends_with("}\n"));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["command", "config", "inputs", "result", "schema_version", "seed", "tool", "tool_version"]);
    assert_eq!(Report::read(&p).unwrap(), r);
}
