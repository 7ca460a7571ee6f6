//! Zero-phonon line plus phonon sideband from a Huang–Rhys factor.

use polardyn::photophysics::{huang_rhys_lineshape, HuangRhysSpectrum};

fn main() -> polardyn::Result<()> {
    let spectrum = HuangRhysSpectrum::default();
    for (nm, w) in spectrum.replicas() {
        println!("replica at {nm:7.2} nm, weight {w:.4}");
    }
    let grid: Vec<f64> = (0..=400).map(|i| 550.0 + 0.5 * i as f64).collect();
    let shape = huang_rhys_lineshape(&spectrum, &grid)?;
    let width = 60;
    let peak = shape.iter().cloned().fold(0.0, f64::max);
    for (nm, v) in grid.iter().zip(&shape).step_by(16) {
        println!("{nm:6.1} nm |{}", "#".repeat((v / peak * width as f64).round() as usize));
    }
    Ok(())
}
