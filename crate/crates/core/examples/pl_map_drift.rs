//! Confocal PL maps of one emitter over several frames with stage drift;
//! the spot fit tracks the centroid and keeps the integrated flux steady.

use polardyn::analysis::integrate_spot;
use polardyn::simulator::{simulate_pl_map, PlEmitter, PlScan};

fn main() -> polardyn::Result<()> {
    let emitter = PlEmitter { x_nm: 1000.0, y_nm: 950.0, rate_cps: 2.0e6 };
    let mut guess = (20.0, 19.0);
    for frame in 0..5 {
        let scan = PlScan { frame, drift_nm_per_frame: [30.0, -20.0], background_cps: 500.0, ..Default::default() };
        let map = simulate_pl_map(&[emitter], &scan, Some(frame as u64))?;
        let spot = integrate_spot(&map, guess, 8.0)?;
        println!(
            "frame {frame}: centroid ({:7.1}, {:7.1}) nm, flux {:8.0} ± {:5.0} counts",
            spot.centroid_nm.0, spot.centroid_nm.1, spot.flux, spot.flux_err
        );
        guess = spot.centroid_px;
    }
    Ok(())
}
