//! Second-harmonic polarimetry of a hexagonal flake: recover the armchair
//! axis from parallel and perpendicular sweeps and check the quadratic
//! power dependence.

use polardyn::analysis::{analyze_shg_sweep, fit_power_law};
use polardyn::geometry::CrystalAxes;
use polardyn::recipes::angle_grid;
use polardyn::simulator::{simulate_shg_sweep, ShgConfig, ShgSource};

fn main() -> polardyn::Result<()> {
    let crystal = CrystalAxes::new(43.52)?;
    let source = ShgSource::default();
    let angles = angle_grid(0.0, 360.0, 5.0);
    for config in [ShgConfig::Parallel, ShgConfig::Perpendicular] {
        let fit = analyze_shg_sweep(&simulate_shg_sweep(&crystal, 20.0, &angles, config, &source, Some(5))?, config)?;
        println!("{config:?}: theta0 = {:.3}° ± {:.3}° (mod 60°)", fit.theta0_deg, fit.theta0_err_deg);
    }
    let powers = [2.0, 3.0, 5.0, 7.0, 10.0, 14.0, 20.0];
    let mut amps = Vec::new();
    for (i, &p) in powers.iter().enumerate() {
        let sweep = simulate_shg_sweep(&crystal, p, &angles, ShgConfig::Parallel, &source, Some(100 + i as u64))?;
        amps.push(analyze_shg_sweep(&sweep, ShgConfig::Parallel)?.amplitude);
    }
    let (k, k_err) = fit_power_law(&powers, &amps)?;
    println!("power-law exponent {k:.4} ± {k_err:.4}");
    Ok(())
}
