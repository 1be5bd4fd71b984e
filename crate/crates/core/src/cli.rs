//! Command-line front end. Every command reads a [`ScenarioConfig`],
//! writes its artifacts into a run directory named after the resolved
//! configuration and prints that directory on stdout.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::Value;

use crate::analysis::{crosstalk_metrics, hdr_compose, multi_gauss_fit, Profile};
use crate::chain::{
    design_uniform_spacing_with, equilibrium_positions, relay_map, AxialPotential, DesignOptions, RelayOptions,
};
use crate::chip::{
    build_cross_section, paths_disjoint, window_for, ChannelCrossSection, ChipLayout, Interpolation,
    TaperSpec,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::io::{load_exposures, num, read_csv, write_csv, write_json};
use crate::modes::{chip_mode, fiber_mode, single_mode_cutoff, solve_modes, vga_coupling_mc};
use crate::propagation::{
    bend_transmission_with, chip_crosstalk_scan, taper_transmission_with, Absorber, BpmOptions, ChipDesign,
};
use crate::sensor::{
    neighbor_error, rpe_estimate, scan_ion, AddressingMode, BeamMap, Decoupling, ExactOracle, NoiseModel, Oracle,
    RpeConfig, SampledOracle, ScanConfig,
};

#[derive(Debug, Parser)]
#[command(name = "ion-addressing", version, about = "Waveguide addressing chip and ion-chain simulations")]
pub struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs", value_name = "DIR")]
    pub out: PathBuf,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dry_run: bool,
    /// Override one key, e.g. `--set chip.contrast=0.012`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chip geometry.
    #[command(subcommand)]
    Chip(ChipCmd),
    /// Waveguide modes.
    #[command(subcommand)]
    Modes(ModesCmd),
    /// Fibre-to-chip coupling.
    #[command(subcommand)]
    Couple(CoupleCmd),
    /// Beam propagation through chip components.
    #[command(subcommand)]
    Propagate(PropagateCmd),
    /// Ion chain positions and imaging relay.
    #[command(subcommand)]
    Ion(IonCmd),
    /// Stark-shift sensing with a single ion.
    #[command(subcommand)]
    Sensor(SensorCmd),
    /// Camera data analysis.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
}

#[derive(Debug, Args)]
pub struct Channels {
    /// Overrides `chip.n_channels`.
    #[arg(long)]
    pub channels: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum ChipCmd {
    /// Cross-section of every channel plus the layout.
    Build(Channels),
    /// Lateral channel positions along the chip.
    Path(Channels),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Guide {
    Output,
    Input,
    Fiber,
}

#[derive(Debug, Subcommand)]
pub enum ModesCmd {
    /// Guided modes of one cross-section.
    Solve {
        #[arg(long, value_enum, default_value = "output")]
        guide: Guide,
    },
    /// Largest single-mode core diameter against index contrast.
    CutoffScan,
}

#[derive(Debug, Subcommand)]
pub enum CoupleCmd {
    /// Monte Carlo coupling from a fibre array under misalignment.
    Vga,
}

#[derive(Debug, Subcommand)]
pub enum PropagateCmd {
    Taper,
    Bend,
    /// Full-chip cross-talk from one injected channel.
    Crosstalk(Channels),
}

#[derive(Debug, Subcommand)]
pub enum IonCmd {
    /// Equilibrium positions in the configured potential.
    Positions,
    /// Potential for uniform spacing, and the relayed beams.
    Design,
}

#[derive(Debug, Subcommand)]
pub enum SensorCmd {
    /// Ion scan across a synthetic beam map.
    Scan,
    /// One phase estimate with its generation trace.
    Rpe,
    /// Neighbour error per channel from pairwise cross-talk.
    NeighborError,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCmd {
    /// Compose an exposure stack listed in a manifest CSV.
    Hdr {
        manifest: PathBuf,
        /// Camera pixel pitch in the object plane, µm.
        #[arg(long, default_value_t = 1.0)]
        pixel_size: f64,
    },
    /// Multi-Gaussian fit of a two-column profile CSV.
    Fit {
        profile: PathBuf,
        #[arg(long)]
        peaks: usize,
    },
}

type Summary = BTreeMap<String, Value>;

struct Run {
    dir: PathBuf,
    cfg: ScenarioConfig,
    seed: u64,
    summary: Summary,
}

impl Run {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.to_string(), v.into());
    }

    fn csv(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        write_csv(&self.path(name), header, rows)
    }
}

impl Command {
    fn name(&self) -> (&'static str, &'static str) {
        match self {
            Command::Chip(ChipCmd::Build(_)) => ("chip", "build"),
            Command::Chip(ChipCmd::Path(_)) => ("chip", "path"),
            Command::Modes(ModesCmd::Solve { .. }) => ("modes", "solve"),
            Command::Modes(ModesCmd::CutoffScan) => ("modes", "cutoff-scan"),
            Command::Couple(CoupleCmd::Vga) => ("couple", "vga"),
            Command::Propagate(PropagateCmd::Taper) => ("propagate", "taper"),
            Command::Propagate(PropagateCmd::Bend) => ("propagate", "bend"),
            Command::Propagate(PropagateCmd::Crosstalk(_)) => ("propagate", "crosstalk"),
            Command::Ion(IonCmd::Positions) => ("ion", "positions"),
            Command::Ion(IonCmd::Design) => ("ion", "design"),
            Command::Sensor(SensorCmd::Scan) => ("sensor", "scan"),
            Command::Sensor(SensorCmd::Rpe) => ("sensor", "rpe"),
            Command::Sensor(SensorCmd::NeighborError) => ("sensor", "neighbor-error"),
            Command::Analyze(AnalyzeCmd::Hdr { .. }) => ("analyze", "hdr"),
            Command::Analyze(AnalyzeCmd::Fit { .. }) => ("analyze", "fit"),
        }
    }

    fn sections(&self) -> &'static [&'static str] {
        match self {
            Command::Chip(_) => &["chip", "output"],
            Command::Modes(_) | Command::Couple(_) => &["chip", "solver", "output"],
            Command::Propagate(_) => &["chip", "propagation", "output"],
            Command::Ion(_) => &["ion", "output"],
            Command::Sensor(_) => &["sensor", "output"],
            Command::Analyze(_) => &["output"],
        }
    }

    fn channels(&self) -> Option<usize> {
        match self {
            Command::Chip(ChipCmd::Build(c) | ChipCmd::Path(c)) | Command::Propagate(PropagateCmd::Crosstalk(c)) => {
                c.channels
            }
            _ => None,
        }
    }

    /// Extra text mixed into the run hash so runs on different inputs do
    /// not share a directory.
    fn inputs(&self) -> String {
        match self {
            Command::Modes(ModesCmd::Solve { guide }) => format!("{guide:?}"),
            Command::Analyze(AnalyzeCmd::Hdr { manifest, pixel_size }) => {
                format!("{}|{pixel_size}", manifest.display())
            }
            Command::Analyze(AnalyzeCmd::Fit { profile, peaks }) => format!("{}|{peaks}", profile.display()),
            _ => String::new(),
        }
    }
}

/// Parses the process arguments, runs the command and returns the exit
/// code: 0 on success, 2 for configuration errors, 1 otherwise.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(Some(dir)) => {
            println!("{}", dir.display());
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidParameter { .. } => 2,
        _ => 1,
    }
}

/// Configuration for `cli` with file, overrides and flags applied and the
/// command's sections validated.
pub fn resolve(cli: &Cli) -> Result<ScenarioConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", p.display())),
            other => other,
        })?,
        None => ScenarioConfig::default(),
    };
    for s in &cli.overrides {
        cfg.set(s)?;
    }
    if let Some(n) = cli.command.channels() {
        cfg.set(&format!("chip.n_channels={n}"))?;
    }
    cfg.validate(cli.command.sections())?;
    Ok(cfg)
}

/// Runs `cli`; returns the run directory, or `None` for a dry run.
pub fn execute(cli: &Cli) -> Result<Option<PathBuf>> {
    let cfg = resolve(cli)?;
    if cli.dry_run {
        print!("{}", cfg.resolved());
        return Ok(None);
    }
    let (group, cmd) = cli.command.name();
    let resolved = cfg.resolved();
    let hash = fnv1a(format!("{resolved}\nseed = {}\n{group} {cmd} {}", cli.seed, cli.command.inputs()).as_bytes());
    let dir = cli
        .out
        .join(format!("{}-{group}-{cmd}-{hash:016x}", cfg.str("output.prefix")));
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.resolved"), &resolved)?;
    let mut run = Run {
        dir,
        cfg,
        seed: cli.seed,
        summary: Summary::new(),
    };
    run.put("seed", cli.seed);
    match &cli.command {
        Command::Chip(ChipCmd::Build(_)) => chip_build(&mut run)?,
        Command::Chip(ChipCmd::Path(_)) => chip_path(&mut run)?,
        Command::Modes(ModesCmd::Solve { guide }) => modes_solve(&mut run, *guide)?,
        Command::Modes(ModesCmd::CutoffScan) => cutoff_scan(&mut run)?,
        Command::Couple(CoupleCmd::Vga) => couple_vga(&mut run)?,
        Command::Propagate(PropagateCmd::Taper) => propagate_taper(&mut run)?,
        Command::Propagate(PropagateCmd::Bend) => propagate_bend(&mut run)?,
        Command::Propagate(PropagateCmd::Crosstalk(_)) => propagate_crosstalk(&mut run)?,
        Command::Ion(IonCmd::Positions) => ion_positions(&mut run)?,
        Command::Ion(IonCmd::Design) => ion_design(&mut run)?,
        Command::Sensor(SensorCmd::Scan) => sensor_scan(&mut run)?,
        Command::Sensor(SensorCmd::Rpe) => sensor_rpe(&mut run)?,
        Command::Sensor(SensorCmd::NeighborError) => sensor_neighbor_error(&mut run)?,
        Command::Analyze(AnalyzeCmd::Hdr { manifest, pixel_size }) => analyze_hdr(&mut run, manifest, *pixel_size)?,
        Command::Analyze(AnalyzeCmd::Fit { profile, peaks }) => analyze_fit(&mut run, profile, *peaks)?,
    }
    write_json(&run.path("summary.json"), &run.summary)?;
    Ok(Some(run.dir))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// Grid coordinate rounded to a picometre so labels read cleanly.
fn coord(x: f64) -> String {
    num((x * 1e6).round() / 1e6 + 0.0)
}

fn layout(cfg: &ScenarioConfig) -> ChipLayout {
    ChipLayout {
        n_channels: cfg.usize("chip.n_channels"),
        input_pitch: cfg.f64("chip.input_pitch_um"),
        output_pitch: cfg.f64("chip.output_pitch_um"),
        len_straight_in: cfg.f64("chip.len_straight_in_um"),
        len_curve: cfg.f64("chip.len_curve_um"),
        len_straight_out: cfg.f64("chip.len_straight_out_um"),
    }
}

fn design(cfg: &ScenarioConfig) -> ChipDesign {
    let n_clad = cfg.f64("chip.n_clad");
    match cfg.str("chip.design") {
        "conventional" => {
            let cs = ChannelCrossSection::conventional_with(
                n_clad,
                cfg.f64("chip.conventional_contrast"),
                cfg.f64("chip.conventional_sigma_um"),
            );
            ChipDesign {
                name: "conventional".into(),
                input: cs.clone(),
                output: cs,
            }
        }
        _ => {
            let output = ChannelCrossSection::spim_output_with(
                n_clad,
                cfg.f64("chip.contrast"),
                cfg.f64("chip.sigma_x_um"),
                cfg.f64("chip.sigma_y_um"),
            );
            ChipDesign {
                name: "spim".into(),
                input: ChannelCrossSection::spim_input_from(&output),
                output,
            }
        }
    }
}

fn bpm_options(cfg: &ScenarioConfig) -> BpmOptions {
    let width = cfg.f64("propagation.absorber_width_um");
    BpmOptions {
        dz: cfg.f64("propagation.dz_um"),
        absorber: (width > 0.0).then(|| Absorber {
            width,
            strength: cfg.f64("propagation.absorber_strength"),
        }),
        ..Default::default()
    }
}

fn chip_build(run: &mut Run) -> Result<()> {
    let layout = layout(&run.cfg);
    layout.validate()?;
    let d = design(&run.cfg);
    let step = run.cfg.f64("chip.grid_step_um");
    if !(step > 0.0) {
        return Err(Error::Config(format!("`chip.grid_step_um` must be positive, got {step}")));
    }
    let window = window_for(&d.output, 3.0, step);
    let profile = build_cross_section(&d.output, &window)?;
    let paths = layout.paths()?;
    // matrix layout: header holds x, first column holds y
    for (i, p) in paths.iter().enumerate() {
        let mut header = vec!["y_um\\x_um".to_string()];
        header.extend((0..window.nx).map(|ix| coord(p.x_out + window.x(ix))));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = (0..window.ny)
            .map(|iy| {
                std::iter::once(coord(window.y(iy)))
                    .chain((0..window.nx).map(|ix| num(profile.at_index(ix, iy))))
                    .collect()
            })
            .collect();
        run.csv(&format!("channel_{i:02}.csv"), &header, &rows)?;
    }
    let disjoint = paths_disjoint(&paths, 2000);
    write_json(
        &run.path("layout.json"),
        &serde_json::json!({
            "design": d.name,
            "layout": layout,
            "input_cross_section": d.input,
            "output_cross_section": d.output,
            "paths": paths,
        }),
    )?;
    run.put("n_channels", paths.len());
    run.put("paths_disjoint", disjoint);
    run.put("min_bend_radius_um", layout.min_bend_radius());
    run.put("total_length_um", layout.total_length());
    run.put("peak_contrast", profile.peak() - profile.n_clad);
    run.put("horizontal_fwhm_um", profile.horizontal_fwhm());
    Ok(())
}

fn chip_path(run: &mut Run) -> Result<()> {
    let layout = layout(&run.cfg);
    let paths = layout.paths()?;
    let step = run.cfg.f64("chip.path_step_um");
    if !(step > 0.0) {
        return Err(Error::Config(format!("`chip.path_step_um` must be positive, got {step}")));
    }
    let n_z = (layout.total_length() / step).ceil() as usize;
    let mut header = vec!["z_um".to_string()];
    header.extend((0..paths.len()).map(|i| format!("x{i}_um")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..=n_z)
        .map(|k| {
            let z = (k as f64 * step).min(layout.total_length());
            std::iter::once(num(z)).chain(paths.iter().map(|p| num(p.x(z)))).collect()
        })
        .collect();
    run.csv("paths.csv", &header, &rows)?;
    run.put("n_channels", paths.len());
    run.put("paths_disjoint", paths_disjoint(&paths, 2000));
    run.put("min_bend_radius_um", layout.min_bend_radius());
    run.put("total_length_um", layout.total_length());
    Ok(())
}

fn modes_solve(run: &mut Run, guide: Guide) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let d = design(&run.cfg);
    let modes = match guide {
        Guide::Fiber => vec![fiber_mode(lambda)?],
        Guide::Input | Guide::Output => {
            let cs = if matches!(guide, Guide::Input) { &d.input } else { &d.output };
            let window = window_for(cs, 3.0, run.cfg.f64("solver.grid_step_um"));
            let p = build_cross_section(cs, &window)?;
            solve_modes(&p, lambda, run.cfg.usize("solver.max_modes").max(1))?
        }
    };
    if modes.is_empty() {
        return Err(Error::NoGuidedMode);
    }
    let rows: Vec<Vec<String>> = modes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let s = m.summary();
            vec![i.to_string(), num(s.n_eff), num(s.mfd_x_um), num(s.mfd_y_um.unwrap_or(f64::NAN))]
        })
        .collect();
    run.csv("modes.csv", &["mode", "n_eff", "mfd_x_um", "mfd_y_um"], &rows)?;
    let m = &modes[0];
    let intensity = m.intensity();
    let mut field = Vec::with_capacity(intensity.len());
    for iy in 0..m.grid.ny {
        for ix in 0..m.grid.nx {
            field.push(vec![num(m.grid.x(ix)), num(m.grid.y(iy)), num(intensity[iy * m.grid.nx + ix])]);
        }
    }
    run.csv("fundamental.csv", &["x_um", "y_um", "intensity"], &field)?;
    let s = m.summary();
    run.put("guided_modes", modes.len());
    run.put("n_eff", s.n_eff);
    run.put("mfd_x_um", s.mfd_x_um);
    if let Some(y) = s.mfd_y_um {
        run.put("mfd_y_um", y);
    }
    Ok(())
}

fn cutoff_scan(run: &mut Run) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let n_clad = run.cfg.f64("chip.n_clad");
    let (lo, hi) = (run.cfg.f64("solver.contrast_min"), run.cfg.f64("solver.contrast_max"));
    let steps = run.cfg.usize("solver.contrast_steps").max(1);
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::Config(format!(
            "`solver.contrast_min`/`solver.contrast_max` must satisfy 0 < min <= max, got {lo}, {hi}"
        )));
    }
    let contrasts: Vec<f64> = if steps == 1 || hi == lo {
        vec![lo]
    } else {
        (0..steps).map(|k| lo + (hi - lo) * k as f64 / (steps - 1) as f64).collect()
    };
    let d: Vec<f64> = contrasts
        .iter()
        .map(|&c| single_mode_cutoff(c, lambda, n_clad))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<String>> = contrasts.iter().zip(&d).map(|(c, d)| vec![num(*c), num(*d)]).collect();
    run.csv("cutoff.csv", &["contrast", "d_max_um"], &rows)?;
    run.put("rows", rows.len());
    run.put("d_max_first_um", d[0]);
    run.put("d_max_last_um", d[d.len() - 1]);
    Ok(())
}

fn couple_vga(run: &mut Run) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let d = design(&run.cfg);
    let samples = run.cfg.usize("solver.vga_samples");
    let bounds = (run.cfg.f64("solver.vga_offset_x_um"), run.cfg.f64("solver.vga_offset_y_um"));
    let fiber = fiber_mode(lambda)?;
    let input = chip_mode(&d.input, lambda)?;
    let output = chip_mode(&d.output, lambda)?;
    let a = vga_coupling_mc(&fiber, &input, bounds, samples, run.seed)?;
    let b = vga_coupling_mc(&fiber, &output, bounds, samples, run.seed)?;
    let rows: Vec<Vec<String>> = (0..samples)
        .map(|i| {
            vec![
                i.to_string(),
                num(a.offsets[i].0),
                num(a.offsets[i].1),
                num(a.efficiencies[i]),
                num(b.efficiencies[i]),
            ]
        })
        .collect();
    run.csv("coupling.csv", &["sample", "dx_um", "dy_um", "eta_input", "eta_output"], &rows)?;
    let (fx, fy) = crate::modes::mfd(&fiber);
    let (ix, iy) = crate::modes::mfd(&input);
    run.put("fiber_mfd_x_um", fx);
    run.put("fiber_mfd_y_um", fy.unwrap_or(f64::NAN));
    run.put("input_mfd_x_um", ix);
    run.put("input_mfd_y_um", iy.unwrap_or(f64::NAN));
    run.put("mean_input", a.mean_efficiency);
    run.put("min_input", a.min_efficiency);
    run.put("mean_output_direct", b.mean_efficiency);
    run.put("min_output_direct", b.min_efficiency);
    Ok(())
}

fn propagate_taper(run: &mut Run) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let d = design(&run.cfg);
    let interp = match run.cfg.str("propagation.taper_profile") {
        "cosine" => Interpolation::Cosine,
        _ => Interpolation::Linear,
    };
    let opts = bpm_options(&run.cfg);
    let mut rows = Vec::new();
    for len in run.cfg.f64_list("propagation.taper_lengths_um") {
        let t = TaperSpec::new(d.input.clone(), d.output.clone(), len, interp)?;
        let tr = taper_transmission_with(&t, lambda, &opts)?;
        rows.push(vec![num(len), num(tr)]);
        run.put(&format!("transmission_{len}um"), tr);
    }
    run.csv("taper.csv", &["length_um", "transmission"], &rows)
}

fn propagate_bend(run: &mut Run) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let d = design(&run.cfg);
    let configured = run.cfg.f64("propagation.bend_radius_um");
    let radius = if configured > 0.0 { configured } else { layout(&run.cfg).min_bend_radius() };
    let arc = run.cfg.f64("propagation.bend_arc_um");
    let tr = bend_transmission_with(&d.output, radius, arc, lambda, &bpm_options(&run.cfg))?;
    run.csv("bend.csv", &["radius_um", "arc_um", "transmission"], &[vec![num(radius), num(arc), num(tr)]])?;
    run.put("radius_um", radius);
    run.put("arc_um", arc);
    run.put("transmission", tr);
    Ok(())
}

fn propagate_crosstalk(run: &mut Run) -> Result<()> {
    let lambda = run.cfg.f64("chip.wavelength_um");
    let layout = layout(&run.cfg);
    let d = design(&run.cfg);
    let injected = run.cfg.usize("propagation.injected");
    let r = chip_crosstalk_scan(&layout, &d, injected, lambda, &bpm_options(&run.cfg))?;
    let rows: Vec<Vec<String>> = r.line_profile.iter().map(|(x, i)| vec![num(*x), num(*i)]).collect();
    run.csv("line_profile.csv", &["x_um", "intensity"], &rows)?;
    let (x, y): (Vec<f64>, Vec<f64>) = r.line_profile.iter().copied().unzip();
    let metrics = crosstalk_metrics(&Profile::new(x, y)?, &r.centers, injected)?;
    let inj = r.channel_power[injected];
    let rows: Vec<Vec<String>> = (0..r.centers.len())
        .map(|i| {
            let m = metrics.channels.iter().find(|c| c.channel == i);
            vec![
                i.to_string(),
                num(r.centers[i]),
                num(r.channel_power[i]),
                num(r.channel_power[i] / inj),
                num(m.map_or(f64::NAN, |m| m.peak_ratio)),
                num(m.map_or(f64::NAN, |m| m.integrated_ratio)),
            ]
        })
        .collect();
    run.csv(
        "channels.csv",
        &["channel", "center_um", "mode_power", "mode_ratio", "peak_ratio", "integrated_ratio"],
        &rows,
    )?;
    write_json(
        &run.path("crosstalk.json"),
        &serde_json::json!({
            "design": d.name,
            "injected": injected,
            "neighbours": r.neighbours,
            "metrics": metrics,
        }),
    )?;
    run.put("injected", injected);
    run.put("transmitted", r.transmitted);
    run.put("nearest_neighbour_mode_ratio", r.worst_neighbour());
    let nearest_peak = metrics.nearest().map(|c| c.peak_ratio).fold(0.0, f64::max);
    let nearest_int = metrics.nearest().map(|c| c.integrated_ratio).fold(0.0, f64::max);
    run.put("nearest_neighbour_peak_ratio", nearest_peak);
    run.put("nearest_neighbour_integrated_ratio", nearest_int);
    Ok(())
}

fn potential(cfg: &ScenarioConfig) -> Result<AxialPotential> {
    let base = AxialPotential::for_ion(cfg.f64("ion.mass_amu"), cfg.f64("ion.axial_freq_mhz"))?;
    AxialPotential::new(base.alpha2, cfg.f64("ion.alpha4"))
}

fn position_rows(positions: &[f64]) -> Vec<Vec<String>> {
    positions
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let gap = if i > 0 { num(x - positions[i - 1]) } else { num(f64::NAN) };
            vec![i.to_string(), num(*x), gap]
        })
        .collect()
}

fn ion_positions(run: &mut Run) -> Result<()> {
    let pot = potential(&run.cfg)?;
    let chain = equilibrium_positions(run.cfg.usize("ion.n_ions"), &pot)?;
    run.csv("positions.csv", &["ion", "position_um", "spacing_um"], &position_rows(&chain.positions))?;
    run.put("length_scale_um", chain.length_scale);
    run.put("mean_spacing_um", chain.mean_spacing());
    run.put("spacing_rms_um", chain.spacing_rms);
    run.put("iterations", chain.iterations);
    Ok(())
}

fn ion_design(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let n = cfg.usize("ion.n_ions");
    let opts = DesignOptions {
        quartic: cfg.bool("ion.quartic"),
        ..Default::default()
    };
    let design = design_uniform_spacing_with(n, cfg.f64("ion.target_spacing_um"), &opts)?;
    let relay = RelayOptions {
        magnification: cfg.f64("ion.magnification"),
        diffraction_floor: cfg.f64("ion.diffraction_floor_um"),
        blur: cfg.f64("ion.blur_um"),
    };
    let layout = layout(cfg);
    let chip: Vec<f64> = (0..n).map(|i| layout.offset(i, layout.output_pitch)).collect();
    let beams = relay_map(&chip, &vec![cfg.f64("ion.chip_waist_um"); n], &relay)?;
    run.csv("positions.csv", &["ion", "position_um", "spacing_um"], &position_rows(&design.chain.positions))?;
    let rows: Vec<Vec<String>> = beams
        .iter()
        .enumerate()
        .map(|(i, b)| vec![i.to_string(), num(chip[i]), num(b.position), num(b.diffraction_waist), num(b.waist)])
        .collect();
    run.csv(
        "beams.csv",
        &["channel", "chip_position_um", "ion_position_um", "diffraction_waist_um", "waist_um"],
        &rows,
    )?;
    let pitch = if n > 1 { (beams[n - 1].position - beams[0].position) / (n - 1) as f64 } else { f64::NAN };
    let (a2, a4) = (design.potential.alpha2, design.potential.alpha4);
    run.put("alpha2", a2);
    run.put("alpha4", a4);
    run.put("mean_spacing_um", design.chain.mean_spacing());
    run.put("spacing_rms_um", design.achieved_rms);
    run.put("relative_rms", design.relative_rms());
    run.put("beam_pitch_um", pitch);
    run.put("beam_waist_um", beams.first().map_or(f64::NAN, |b| b.waist));
    Ok(())
}

fn decoupling(cfg: &ScenarioConfig) -> Decoupling {
    match cfg.str("sensor.decoupling") {
        "none" => Decoupling::None,
        "echo" => Decoupling::SpinEcho,
        _ => Decoupling::Kdd,
    }
}

fn rpe_config(cfg: &ScenarioConfig) -> RpeConfig {
    RpeConfig {
        tau0: cfg.f64("sensor.tau0_us"),
        generations: cfg.usize("sensor.generations"),
        max_gap: cfg.f64("sensor.max_gap_us"),
        decoupling: decoupling(cfg),
        ..Default::default()
    }
}

fn noise(cfg: &ScenarioConfig, seed: u64) -> Option<NoiseModel> {
    (!cfg.bool("sensor.exact")).then(|| NoiseModel {
        sigma: cfg.f64("sensor.noise_sigma"),
        shots: cfg.usize("sensor.shots"),
        readout_error: cfg.f64("sensor.readout_error"),
        seed,
    })
}

fn sensor_rpe(run: &mut Run) -> Result<()> {
    let rpe = rpe_config(&run.cfg);
    rpe.validate()?;
    let delta = run.cfg.f64("sensor.phase_rad") / rpe.tau0;
    let mut oracle: Box<dyn Oracle> = match noise(&run.cfg, run.seed) {
        Some(n) => Box::new(SampledOracle::new(delta, &rpe, &n)?),
        None => Box::new(ExactOracle::new(delta, &rpe)),
    };
    let r = rpe_estimate(oracle.as_mut(), &rpe)?;
    let rows: Vec<Vec<String>> = r
        .trace
        .iter()
        .map(|g| {
            let mut row = vec![g.k.to_string(), num(g.tau)];
            row.extend(g.probabilities.iter().map(|p| num(*p)));
            row.extend([num(g.cos), num(g.sin), num(g.theta), num(g.estimate), num(g.power)]);
            row
        })
        .collect();
    run.csv(
        "trace.csv",
        &["k", "tau_us", "p0", "p_half_pi", "p_pi", "p_three_half_pi", "cos", "sin", "theta_rad", "delta_hat", "power"],
        &rows,
    )?;
    run.put("delta_true_rad_per_us", delta);
    run.put("delta_hat_rad_per_us", r.estimate);
    run.put("sigma_rad_per_us", r.sigma);
    run.put("error_rad_per_us", r.estimate - delta);
    if let Some(s) = oracle.shots() {
        run.put("shots_per_setting", s);
    }
    Ok(())
}

fn sensor_scan(run: &mut Run) -> Result<()> {
    let cfg = &run.cfg;
    let map = BeamMap::uniform(
        cfg.usize("sensor.n_beams"),
        cfg.f64("sensor.pitch_um"),
        cfg.f64("sensor.waist_um"),
        cfg.f64("sensor.crosstalk"),
    );
    let step = cfg.f64("sensor.scan_step_um");
    if !(step > 0.0) {
        return Err(Error::Config(format!("`sensor.scan_step_um` must be positive, got {step}")));
    }
    let margin = cfg.f64("sensor.scan_margin_um");
    let centers = map.centers();
    let (lo, hi) = (centers[0] - margin, centers[centers.len() - 1] + margin);
    let n = ((hi - lo) / step).round() as usize;
    let positions: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).collect();
    let scan = ScanConfig {
        rpe: rpe_config(cfg),
        c_stark: cfg.f64("sensor.c_stark"),
        tau0_max: cfg.f64("sensor.tau0_max_us"),
        ..Default::default()
    };
    let m = scan_ion(&map, &positions, &scan, noise(cfg, run.seed).as_ref())?;
    let mut rows = Vec::new();
    for ch in &m.channels {
        for (x, p) in m.positions.iter().zip(&ch.points) {
            rows.push(vec![
                ch.channel.to_string(),
                num(*x),
                num(p.delta_hat),
                num(p.sigma),
                (p.valid as u8).to_string(),
            ]);
        }
    }
    run.csv("scan.csv", &["channel", "position_um", "delta_hat", "sigma_delta", "valid"], &rows)?;
    let combined: Vec<Vec<String>> = m.positions.iter().zip(&m.combined).map(|(x, y)| vec![num(*x), num(*y)]).collect();
    run.csv("combined.csv", &["position_um", "normalized_intensity"], &combined)?;
    if let Some(fit) = &m.fit {
        write_json(&run.path("fit.json"), fit)?;
        run.put("mean_waist_um", fit.mean_waist());
        if let Some(p) = fit.mean_pitch() {
            run.put("mean_pitch_um", p);
        }
        run.put("fit_ill_conditioned", fit.ill_conditioned);
    }
    run.put("mean_neighbour_ratio", m.mean_neighbour_ratio());
    run.put("points", positions.len());
    Ok(())
}

fn sensor_neighbor_error(run: &mut Run) -> Result<()> {
    let pairs = run.cfg.f64_list("sensor.pair_crosstalk");
    let single = neighbor_error(&pairs, AddressingMode::SingleGlobal)?;
    let both = neighbor_error(&pairs, AddressingMode::BothAddressed)?;
    let rows: Vec<Vec<String>> = (0..single.len())
        .map(|i| vec![i.to_string(), num(single[i]), num(both[i])])
        .collect();
    run.csv("neighbor_error.csv", &["channel", "single_global", "both_addressed"], &rows)?;
    let chosen = match run.cfg.str("sensor.addressing") {
        "both_addressed" => &both,
        _ => &single,
    };
    run.put("max_error", chosen.iter().copied().fold(0.0, f64::max));
    run.put("max_error_single_global", single.iter().copied().fold(0.0, f64::max));
    run.put("max_error_both_addressed", both.iter().copied().fold(0.0, f64::max));
    Ok(())
}

fn analyze_hdr(run: &mut Run, manifest: &Path, pixel_size: f64) -> Result<()> {
    let frames = load_exposures(manifest, pixel_size)?;
    let hdr = hdr_compose(&frames)?;
    let mut rows = Vec::with_capacity(hdr.composite.len());
    for r in 0..hdr.height {
        for c in 0..hdr.width {
            let i = r * hdr.width + c;
            rows.push(vec![
                num(c as f64 * pixel_size),
                num(r as f64 * pixel_size),
                num(hdr.composite[i]),
                (hdr.valid[i] as u8).to_string(),
            ]);
        }
    }
    run.csv("composite.csv", &["x_um", "y_um", "intensity", "valid"], &rows)?;
    let valid = hdr.valid.iter().filter(|v| **v).count();
    let peak = hdr
        .composite
        .iter()
        .zip(&hdr.valid)
        .filter(|(_, v)| **v)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    run.put("frames", frames.len());
    run.put("valid_fraction", valid as f64 / hdr.valid.len() as f64);
    run.put("peak", peak);
    Ok(())
}

fn analyze_fit(run: &mut Run, path: &Path, peaks: usize) -> Result<()> {
    let (_, rows) = read_csv(path)?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.len() >= 2 && r[0].is_finite() && r[1].is_finite())
        .map(|r| (r[0], r[1]))
        .unzip();
    let fit = multi_gauss_fit(&Profile::new(x, y)?, peaks, None)?;
    let out: Vec<Vec<String>> = fit
        .peaks
        .iter()
        .zip(&fit.uncertainties)
        .enumerate()
        .map(|(i, (p, u))| {
            vec![
                i.to_string(),
                num(p.amplitude),
                num(p.center),
                num(p.waist),
                num(u.amplitude),
                num(u.center),
                num(u.waist),
            ]
        })
        .collect();
    run.csv(
        "peaks.csv",
        &["peak", "amplitude", "center_um", "waist_um", "amplitude_err", "center_err_um", "waist_err_um"],
        &out,
    )?;
    run.put("mean_waist_um", fit.mean_waist());
    if let Some(p) = fit.mean_pitch() {
        run.put("mean_pitch_um", p);
    }
    run.put("background", fit.background);
    run.put("residual_rms", fit.residual_rms);
    run.put("condition_number", fit.condition_number);
    run.put("ill_conditioned", fit.ill_conditioned);
    Ok(())
}
