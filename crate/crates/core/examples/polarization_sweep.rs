//! Excitation and emission polarization sweeps fitted with the Malus model,
//! noiseless and with shot noise, and the resulting dipole misalignment.

use polardyn::analysis::analyze_polarization_sweep;
use polardyn::geometry::{signed_axis_difference, wrap_axis};
use polardyn::photophysics::EmitterModel;
use polardyn::recipes::angle_grid;
use polardyn::simulator::{simulate_polarization_sweep, InstrumentConfig, SweepMode};

fn main() -> polardyn::Result<()> {
    let emitter = EmitterModel {
        exc_axis: wrap_axis(63.0)?,
        em_axis_ss: wrap_axis(81.0)?,
        vis_ss: 0.9801,
        exc_visibility: 0.9667,
        ..Default::default()
    };
    let inst = InstrumentConfig::default();
    let angles = angle_grid(0.0, 360.0, 10.0);
    for seed in [None, Some(1), Some(2)] {
        let exc = analyze_polarization_sweep(&simulate_polarization_sweep(
            &emitter, &inst, SweepMode::Excitation, &angles, 0.1, seed,
        )?)?;
        let em = analyze_polarization_sweep(&simulate_polarization_sweep(
            &emitter, &inst, SweepMode::Emission, &angles, 0.1, seed,
        )?)?;
        let label = seed.map_or("noiseless".to_string(), |s| format!("seed {s}"));
        println!(
            "{label:>9}: excitation {:.2}° ± {:.2}° (V {:.4}), emission {:.2}° ± {:.2}° (V {:.4}), misalignment {:.2}°",
            exc.axis_deg,
            exc.axis_err_deg,
            exc.visibility,
            em.axis_deg,
            em.axis_err_deg,
            em.visibility,
            signed_axis_difference(em.axis_deg, exc.axis_deg)
        );
    }
    Ok(())
}
