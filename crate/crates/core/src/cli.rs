//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 2 on a usage error, 1 on a runtime error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::analysis::{
    analyze_polarization_sweep, analyze_shg_sweep, angle_statistics, build_decay_histogram, correlate_g2,
    estimate_g2_zero, extract_polarization_dynamics, fit_g2_comb, fit_lifetime, synthetic_cohort, CohortSpec,
    DynamicsOptions,
};
use crate::error::Result;
use crate::fitting::{eval_cosine_squared, eval_exp_irf_bin, eval_sixfold, SixfoldParams};
use crate::geometry::{wrap_axis, CrystalAxes};
use crate::io::{
    polar_sweep_curve, read_decay_map_csv, read_dipole_records_csv, read_polar_sweep_csv, read_ttag,
    write_curve, write_decay_map_csv, write_dipole_records_csv, write_polar_sweep_csv, write_atomic, write_ttag,
    Curve, ExperimentMode, Report, RunConfig,
};
use crate::recipes;
use crate::simulator::{
    simulate_decay_map, simulate_polarization_sweep, simulate_timetags, ShgConfig, SweepMode, FWHM_PER_SIGMA,
};
use crate::tdm::{
    apply_perturbation, defect_like_pair, gaussian_sp_pair, hydrogen_pair, read_wfg, transition_dipole,
    write_wfg, Perturbation, TransitionPair, VACANCY_STRAIN_MIXING, ZPL_573NM_HARTREE,
};

#[derive(Debug, Parser)]
#[command(name = "polardyn", version, about = "Single-photon emitter polarization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    json: Option<PathBuf>,
    /// CSV curve path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a configured acquisition and write its raw output plus the echoed config.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides `experiment.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// TTAG file for `timetags`, CSV for the sweep and decay-map modes.
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.config.json`.
        #[arg(long)]
        echo_config: Option<PathBuf>,
    },
    /// Cross-correlate channels 0 and 1 and estimate g²(0).
    G2 {
        input: PathBuf,
        #[arg(long)]
        period_ns: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        window_fraction: f64,
        #[arg(long, default_value_t = 8)]
        range_periods: u32,
        #[arg(long, default_value_t = 256)]
        bin_ps: u64,
        /// Starting lifetime for the comb fit.
        #[arg(long, default_value_t = 3.96)]
        tau_ns: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Histogram delays modulo the sync period and fit an IRF-convolved exponential.
    Lifetime {
        input: PathBuf,
        #[arg(long, default_value_t = 41)]
        bin_ps: u64,
        #[arg(long, default_value_t = 70.0)]
        irf_fwhm_ps: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Cosine-squared fit of a polarization sweep CSV.
    Polarization {
        input: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Time-resolved polarization from a decay-map CSV.
    Dynamics {
        input: PathBuf,
        #[arg(long, default_value_t = 2000)]
        min_counts: u64,
        #[arg(long, default_value_t = 120)]
        t_cut_ps: i64,
        #[arg(long, default_value_t = 300)]
        guard_ps: i64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Six-fold fit of an SHG polarization sweep CSV.
    Shg {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ShgArg::Parallel)]
        configuration: ShgArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Transition dipole of a fixture or of two WFG1 grid files.
    Tdm(TdmArgs),
    /// Dipole-angle statistics of an emitter cohort.
    Stats {
        /// Dipole-record CSV; a synthetic cohort is generated when omitted.
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 43.52)]
        crystal_theta0: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the (synthetic or read) records to this CSV.
        #[arg(long)]
        records_out: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Regenerate one figure's numbers from its packaged recipe.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for `<figure>.json` and CSV curves; stdout report only when omitted.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShgArg {
    Parallel,
    Perpendicular,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Figure {
    Fig1d,
    Fig2b,
    Fig3,
    Fig2c,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Fixture {
    Hydrogen,
    Gaussian,
    Defect,
}

#[derive(Debug, Args, Serialize)]
struct TdmArgs {
    #[arg(long, value_enum, default_value_t = Fixture::Defect)]
    fixture: Fixture,
    /// Initial-state WFG1 file; overrides the fixture together with `--final`.
    #[arg(long, requires = "final_state")]
    initial: Option<PathBuf>,
    #[arg(long = "final", requires = "initial")]
    final_state: Option<PathBuf>,
    #[arg(long, default_value_t = 43.52)]
    crystal_theta0: f64,
    /// Polarization-axis offset of the defect fixture from its crystal axis.
    #[arg(long, default_value_t = 11.1)]
    offset_deg: f64,
    /// Dipole direction of the Gaussian fixture.
    #[arg(long, default_value_t = 0.0)]
    phi_deg: f64,
    #[arg(long, default_value_t = 49)]
    grid_n: usize,
    #[arg(long, default_value_t = 0.25)]
    spacing: f64,
    /// Biaxial strain fraction.
    #[arg(long, allow_hyphen_values = true)]
    strain: Option<f64>,
    #[arg(long, default_value_t = VACANCY_STRAIN_MIXING)]
    strain_mixing: f64,
    /// Out-of-plane field in V/Å.
    #[arg(long)]
    field: Option<f64>,
    /// Write the (perturbed) initial and final grids as WFG1 files here.
    #[arg(long)]
    export_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    json: Option<PathBuf>,
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn emit(report: &Report, json: Option<&Path>) -> Result<()> {
    match json {
        Some(p) => report.write(p),
        None => {
            print!("{}", report.to_json_pretty()?);
            Ok(())
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate { config, seed, out, echo_config } => simulate(config, seed, &out, echo_config),
        Command::G2 { input, period_ns, window_fraction, range_periods, bin_ps, tau_ns, out } => {
            let stream = read_ttag(&input)?;
            let period_ns = period_ns.unwrap_or(stream.sync_period_ps as f64 * 1e-3);
            let hist = correlate_g2(&stream, range_periods as f64 * period_ns, bin_ps)?;
            let est = estimate_g2_zero(&hist, period_ns, window_fraction)?;
            let comb = fit_g2_comb(&hist, period_ns, tau_ns, window_fraction)?;
            if let Some(p) = &out.csv {
                let mut c = Curve::new(&["delay_ns", "counts"]);
                for (i, n) in hist.counts.iter().enumerate() {
                    c.push(vec![hist.bin_center_ns(i), *n as f64]);
                }
                write_curve(&c, p)?;
            }
            let cfg = json!({
                "period_ns": period_ns, "window_fraction": window_fraction, "range_periods": range_periods,
                "bin_ps": bin_ps, "tau_guess_ns": tau_ns,
            });
            let result = json!({
                "g2_0": est.g2_0, "g2_0_err": est.error, "estimate": est,
                "comb": {
                    "raw_g2": comb.raw_g2, "raw_g2_err": comb.raw_g2_err, "g2_0": comb.g2_0,
                    "g2_0_err": comb.g2_0_err, "tau_ns": comb.params.tau_ns, "fit": comb.fit,
                },
                "n_records": stream.records.len(),
            });
            emit(&Report::new("g2", None, vec![path_str(&input)], cfg, result)?, out.json.as_deref())
        }
        Command::Lifetime { input, bin_ps, irf_fwhm_ps, out } => {
            let stream = read_ttag(&input)?;
            let curve = build_decay_histogram(&stream, stream.sync_period_ps, bin_ps)?;
            let fit = fit_lifetime(&curve, irf_fwhm_ps / FWHM_PER_SIGMA * 1e-3)?;
            if let Some(p) = &out.csv {
                let mut c = Curve::new(&["t_start_ns", "t_end_ns", "counts", "model"]);
                for (i, n) in curve.counts.iter().enumerate() {
                    let (a, b) = curve.bin_edges_ns(i);
                    c.push(vec![a, b, *n as f64, eval_exp_irf_bin(&fit.params, a, b)]);
                }
                write_curve(&c, p)?;
            }
            let cfg = json!({"bin_ps": bin_ps, "irf_fwhm_ps": irf_fwhm_ps, "sync_period_ps": stream.sync_period_ps});
            emit(&Report::new("lifetime", None, vec![path_str(&input)], cfg, &fit)?, out.json.as_deref())
        }
        Command::Polarization { input, out } => {
            let sweep = read_polar_sweep_csv(&input)?;
            let fit = analyze_polarization_sweep(&sweep)?;
            if let Some(p) = &out.csv {
                let mut c = polar_sweep_curve(&sweep);
                c.columns.push("model".into());
                let params = fit.params();
                for row in c.rows.iter_mut() {
                    row.push(eval_cosine_squared(&params, row[0]));
                }
                write_curve(&c, p)?;
            }
            emit(&Report::new("polarization", None, vec![path_str(&input)], json!({}), &fit)?, out.json.as_deref())
        }
        Command::Dynamics { input, min_counts, t_cut_ps, guard_ps, out } => {
            let map = read_decay_map_csv(&input)?;
            let opts = DynamicsOptions { min_counts_per_bin: min_counts, t_cut_ps, background_guard_ps: guard_ps };
            let dynamics = extract_polarization_dynamics(&map, &opts)?;
            let relaxation = crate::analysis::fit_relaxation(&dynamics).ok();
            if let Some(p) = &out.csv {
                write_curve(&dynamics_curve(&dynamics), p)?;
            }
            let result = json!({"dynamics": dynamics, "relaxation": relaxation});
            emit(&Report::new("dynamics", None, vec![path_str(&input)], opts, result)?, out.json.as_deref())
        }
        Command::Shg { input, configuration, out } => {
            let sweep = read_polar_sweep_csv(&input)?;
            let config = match configuration {
                ShgArg::Parallel => ShgConfig::Parallel,
                ShgArg::Perpendicular => ShgConfig::Perpendicular,
            };
            let fit = analyze_shg_sweep(&sweep, config)?;
            if let Some(p) = &out.csv {
                let shift = if config == ShgConfig::Perpendicular { 30.0 } else { 0.0 };
                let params = SixfoldParams {
                    amplitude: fit.amplitude,
                    theta0_deg: fit.theta0_deg + shift,
                    background: fit.background,
                };
                let mut c = Curve::new(&["angle_deg", "intensity", "model"]);
                for (a, y) in sweep.angles_deg.iter().zip(&sweep.intensities) {
                    c.push(vec![*a, *y, eval_sixfold(&params, *a)]);
                }
                write_curve(&c, p)?;
            }
            emit(
                &Report::new("shg", None, vec![path_str(&input)], json!({"configuration": config}), &fit)?,
                out.json.as_deref(),
            )
        }
        Command::Tdm(args) => tdm(args),
        Command::Stats { input, crystal_theta0, seed, records_out, out } => {
            let crystal = CrystalAxes::new(crystal_theta0)?;
            let (records, inputs, seed_used, spec) = match &input {
                Some(p) => (read_dipole_records_csv(p)?, vec![path_str(p)], None, None),
                None => {
                    let spec = CohortSpec { crystal_theta0_deg: crystal_theta0, ..Default::default() };
                    (synthetic_cohort(&spec, seed)?, vec![], Some(seed), Some(spec))
                }
            };
            if let Some(p) = &records_out {
                write_dipole_records_csv(&records, p)?;
            }
            let report = angle_statistics(&records, &crystal)?;
            if let Some(p) = &out.csv {
                let mut c = Curve::new(&["index", "exc_offset_deg", "em_offset_deg", "misalignment_deg", "cluster"]);
                for i in 0..report.n {
                    c.push(vec![
                        i as f64,
                        report.exc_offsets_deg[i],
                        report.em_offsets_deg[i],
                        report.misalignment_signed_deg[i],
                        report.assignment[i] as f64,
                    ]);
                }
                write_curve(&c, p)?;
            }
            let cfg = json!({"crystal_theta0_deg": crystal_theta0, "synthetic_cohort": spec});
            emit(&Report::new("stats", seed_used, inputs, cfg, &report)?, out.json.as_deref())
        }
        Command::Reproduce { figure, seed, out_dir } => reproduce(figure, seed, out_dir.as_deref()),
    }
}

fn dynamics_curve(d: &crate::analysis::PolarizationDynamics) -> Curve {
    let mut c = Curve::new(&[
        "t_center_ns",
        "t_start_ps",
        "t_end_ps",
        "counts",
        "visibility",
        "visibility_err",
        "axis_deg",
        "axis_err_deg",
    ]);
    for b in &d.bins {
        c.push(vec![
            b.t_center_ns,
            b.t_start_ps as f64,
            b.t_end_ps as f64,
            b.counts as f64,
            b.fit.visibility,
            b.fit.visibility_err,
            b.fit.axis_deg,
            b.fit.axis_err_deg,
        ]);
    }
    c
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, out: &Path, echo: Option<PathBuf>) -> Result<()> {
    let mut cfg = match &config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.experiment.seed = s;
    }
    cfg.validate()?;
    let x = &cfg.experiment;
    let laser = match x.laser_axis_deg {
        Some(a) => wrap_axis(a)?,
        None => cfg.emitter.exc_axis,
    };
    match x.mode {
        ExperimentMode::Timetags => {
            let pol = x.detection_polarizer_deg.map(wrap_axis).transpose()?;
            let stream = simulate_timetags(&cfg.emitter, &cfg.instrument, laser, pol, x.n_pulses, x.seed)?;
            write_ttag(&stream, out)?;
        }
        ExperimentMode::ExcitationSweep | ExperimentMode::EmissionSweep => {
            let mode =
                if x.mode == ExperimentMode::ExcitationSweep { SweepMode::Excitation } else { SweepMode::Emission };
            let sweep = simulate_polarization_sweep(
                &cfg.emitter,
                &cfg.instrument,
                mode,
                &x.angles_deg,
                x.acquisition_s,
                Some(x.seed),
            )?;
            write_polar_sweep_csv(&sweep, out)?;
        }
        ExperimentMode::DecayMap => {
            let map =
                simulate_decay_map(&cfg.emitter, &cfg.instrument, &x.angles_deg, x.n_pulses, x.time_bin_ps, x.seed)?;
            write_decay_map_csv(&map, out)?;
        }
    }
    let echo = echo.unwrap_or_else(|| {
        let mut s = out.as_os_str().to_owned();
        s.push(".config.json");
        PathBuf::from(s)
    });
    let text = cfg.to_json_pretty()? + "\n";
    write_atomic(&echo, |w| Ok(w.write_all(text.as_bytes())?))
}

fn tdm(args: TdmArgs) -> Result<()> {
    let crystal = CrystalAxes::new(args.crystal_theta0)?;
    let (d, h) = ([args.grid_n; 3], [args.spacing; 3]);
    let mut inputs = Vec::new();
    let pair = match (&args.initial, &args.final_state) {
        (Some(i), Some(f)) => {
            inputs = vec![path_str(i), path_str(f)];
            TransitionPair::new(read_wfg(i)?, read_wfg(f)?)
        }
        _ => match args.fixture {
            Fixture::Hydrogen => hydrogen_pair(15.0, 0.2)?,
            Fixture::Gaussian => gaussian_sp_pair(d, h, 0.5, args.phi_deg, ZPL_573NM_HARTREE)?,
            Fixture::Defect => defect_like_pair(&crystal, args.offset_deg, d, h)?,
        },
    };
    let unperturbed = transition_dipole(&pair.final_state, &pair.initial, &crystal)?;
    let mut pair = pair;
    if let Some(m) = args.strain {
        pair = apply_perturbation(&pair, &Perturbation::strain(m, args.strain_mixing)?)?;
    }
    if let Some(e) = args.field {
        pair = apply_perturbation(&pair, &Perturbation::field(e)?)?;
    }
    let r = transition_dipole(&pair.final_state, &pair.initial, &crystal)?;
    if let Some(dir) = &args.export_dir {
        std::fs::create_dir_all(dir)?;
        write_wfg(&pair.initial, &dir.join("initial.wfg"))?;
        write_wfg(&pair.final_state, &dir.join("final.wfg"))?;
    }
    let result = json!({
        "mu_au": r.mu, "magnitude_au": r.magnitude_au(), "magnitude_debye": r.magnitude_debye(),
        "transition_energy_hartree": r.transition_energy_hartree,
        "in_plane_axis_deg": r.in_plane_axis, "in_plane_visibility": r.in_plane_visibility,
        "offset_from_crystal_axis_deg": r.offset_from_crystal_axis_deg,
        "unperturbed": {
            "in_plane_axis_deg": unperturbed.in_plane_axis, "in_plane_visibility": unperturbed.in_plane_visibility,
        },
    });
    emit(&Report::new("tdm", None, inputs, &args, result)?, args.json.as_deref())
}

fn reproduce(figure: Figure, seed: Option<u64>, out_dir: Option<&Path>) -> Result<()> {
    let name = serde_json::to_value(figure)?.as_str().unwrap_or("figure").to_string();
    let mut curves: Vec<(String, Curve)> = Vec::new();
    let report = match figure {
        Figure::Fig1d => {
            let mut cfg = recipes::Fig1dConfig::default();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = recipes::fig1d(&cfg)?;
            for fx in &r.fixtures {
                if let Some(h) = &fx.histogram {
                    let mut c = Curve::new(&["delay_ns", "counts"]);
                    for (i, n) in h.counts.iter().enumerate() {
                        c.push(vec![h.bin_center_ns(i), *n as f64]);
                    }
                    curves.push((format!("{name}_{}.csv", fx.label), c));
                }
            }
            Report::new("reproduce fig1d", Some(cfg.seed), vec![], &cfg, &r)?
        }
        Figure::Fig2b => {
            let cfg = recipes::Fig2bConfig { seed: seed.or(Some(2)), ..Default::default() };
            let r = recipes::fig2b(&cfg)?;
            if let Some((exc, em)) = &r.sweeps {
                curves.push((format!("{name}_excitation.csv"), polar_sweep_curve(exc)));
                curves.push((format!("{name}_emission.csv"), polar_sweep_curve(em)));
            }
            Report::new("reproduce fig2b", cfg.seed, vec![], &cfg, &r)?
        }
        Figure::Fig3 => {
            let mut cfg = recipes::Fig3Config::default();
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = recipes::fig3(&cfg)?;
            curves.push((format!("{name}_bins.csv"), dynamics_curve(&r.dynamics)));
            Report::new("reproduce fig3", Some(cfg.seed), vec![], &cfg, &r)?
        }
        Figure::Fig2c => {
            let mut cfg = recipes::Fig2cConfig::default();
            if seed.is_some() {
                cfg.seed = seed;
            }
            let r = recipes::fig2c(&cfg)?;
            let mut c = Curve::new(&["power_mw", "amplitude"]);
            for (p, a) in r.power_mw.iter().zip(&r.amplitude) {
                c.push(vec![*p, *a]);
            }
            curves.push((format!("{name}_power.csv"), c));
            Report::new("reproduce fig2c", cfg.seed, vec![], &cfg, &r)?
        }
    };
    match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            report.write(&dir.join(format!("{name}.json")))?;
            for (file, c) in &curves {
                write_curve(c, &dir.join(file))?;
            }
            Ok(())
        }
        None => emit(&report, None),
    }
}
