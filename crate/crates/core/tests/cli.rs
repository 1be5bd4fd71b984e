use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ion-addressing"))
}

fn run(out: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn run_dir(o: &Output) -> PathBuf {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    PathBuf::from(String::from_utf8(o.stdout.clone()).unwrap().trim())
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn default_build_writes_one_profile_per_channel() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&run(t.path(), &["chip", "build"]));
    let names: Vec<String> = files(&dir).into_iter().map(|f| f.0).collect();
    assert_eq!(names.iter().filter(|n| n.starts_with("channel_")).count(), 8);
    for n in ["config.resolved", "layout.json", "summary.json"] {
        assert!(names.iter().any(|x| x == n), "{n} missing from {names:?}");
    }
    let text = std::fs::read_to_string(dir.join("channel_00.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("y_um\\x_um,"));
}

#[test]
fn thirty_two_channels_stay_disjoint() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&run(t.path(), &["chip", "build", "--channels", "32"]));
    let layout: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("layout.json")).unwrap()).unwrap();
    let paths = layout["paths"].as_array().unwrap();
    assert_eq!(paths.len(), 32);
    assert_eq!(summary(&dir)["paths_disjoint"], true);
    // independent check on the exported paths
    let path_dir = run_dir(&run(t.path(), &["chip", "path", "--channels", "32"]));
    let (_, rows) = ion_addressing::io::read_csv(&path_dir.join("paths.csv")).unwrap();
    for r in rows {
        assert!(r[1..].windows(2).all(|w| w[1] > w[0]), "paths cross at z = {}", r[0]);
    }
}

#[test]
fn missing_required_key_exits_2_naming_it() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("chip.toml");
    std::fs::write(
        &cfg,
        "[chip]\ndesign = \"spim\"\ninput_pitch_um = 127.0\noutput_pitch_um = 8.0\nwavelength_um = 0.532\n",
    )
    .unwrap();
    let o = run(t.path(), &["--config", cfg.to_str().unwrap(), "chip", "build"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chip.n_channels"));
}

#[test]
fn complete_config_file_runs() {
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("chip.toml");
    std::fs::write(
        &cfg,
        "chip.design = \"conventional\"\nchip.n_channels = 4\nchip.input_pitch_um = 127.0\n\
         chip.output_pitch_um = 8.0\nchip.wavelength_um = 0.532\n",
    )
    .unwrap();
    let dir = run_dir(&run(t.path(), &["--config", cfg.to_str().unwrap(), "chip", "path"]));
    assert_eq!(summary(&dir)["n_channels"], 4);
}

#[test]
fn config_errors_exit_2() {
    let t = tempfile::tempdir().unwrap();
    for (args, needle) in [
        (vec!["--set", "chip.output_pitch_um=-8", "chip", "build"], "chip.output_pitch_um"),
        (vec!["--set", "sensor.waist_um=-0.1", "sensor", "scan"], "sensor.waist_um"),
        (vec!["--set", "chip.wavelength=0.5", "chip", "build"], "chip.wavelength"),
        (vec!["--set", "chip.design=ridge", "chip", "build"], "chip.design"),
    ] {
        let o = run(t.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains(needle), "{args:?}");
    }
    // nothing is written for a rejected run
    assert_eq!(std::fs::read_dir(t.path()).unwrap().count(), 0);
}

#[test]
fn dry_run_prints_the_merged_configuration() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["--dry-run", "--set", "ion.n_ions=5", "ion", "positions"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("ion.n_ions = 5"));
    assert!(text.contains("chip.output_pitch_um = 8.0"));
    assert_eq!(std::fs::read_dir(t.path()).unwrap().count(), 0);
    // the printed text is itself a valid scenario
    let cfg = ion_addressing::config::ScenarioConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.usize("ion.n_ions"), 5);
}

#[test]
fn cutoff_scan_rows() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&run(
        t.path(),
        &["--set", "solver.contrast_min=0.005", "--set", "solver.contrast_max=0.025", "--set", "solver.contrast_steps=5", "modes", "cutoff-scan"],
    ));
    let (h, rows) = ion_addressing::io::read_csv(&dir.join("cutoff.csv")).unwrap();
    assert_eq!(h, vec!["contrast", "d_max_um"]);
    assert_eq!(rows.len(), 5);
    assert!(rows.windows(2).all(|w| w[1][1] < w[0][1]));
    let at = rows.iter().find(|r| (r[0] - 0.015).abs() < 1e-12).unwrap();
    assert!((at[1] / 1.9 - 1.0).abs() < 0.1, "{}", at[1]);

    let one = run_dir(&run(
        t.path(),
        &["--set", "solver.contrast_min=0.015", "--set", "solver.contrast_max=0.015", "modes", "cutoff-scan"],
    ));
    let (_, rows) = ion_addressing::io::read_csv(&one.join("cutoff.csv")).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for args in [
        vec!["--seed", "11", "sensor", "rpe"],
        vec!["--seed", "3", "--set", "sensor.n_beams=3", "--set", "sensor.noise_sigma=1e-4", "sensor", "scan"],
        vec!["ion", "design"],
    ] {
        let da = run_dir(&run(a.path(), &args));
        let db = run_dir(&run(b.path(), &args));
        assert_eq!(da.file_name(), db.file_name());
        assert_eq!(files(&da), files(&db), "{args:?}");
    }
}

#[test]
fn seed_changes_sampled_output() {
    let t = tempfile::tempdir().unwrap();
    let a = run_dir(&run(t.path(), &["--seed", "1", "sensor", "rpe"]));
    let b = run_dir(&run(t.path(), &["--seed", "2", "sensor", "rpe"]));
    assert_ne!(a, b);
    assert_ne!(
        std::fs::read(a.join("trace.csv")).unwrap(),
        std::fs::read(b.join("trace.csv")).unwrap()
    );
}

#[test]
fn neighbor_error_spans_both_modes() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&run(
        t.path(),
        &["--set", "sensor.pair_crosstalk=[1e-3, 1e-3, 1e-3]", "sensor", "neighbor-error"],
    ));
    let (_, rows) = ion_addressing::io::read_csv(&dir.join("neighbor_error.csv")).unwrap();
    assert_eq!(rows.len(), 4);
    // interior channel: two neighbours at sin²(π√ε/2) and sin²(πε/2)
    let single = 2.0 * (std::f64::consts::FRAC_PI_2 * 1e-3f64.sqrt()).sin().powi(2);
    let both = 2.0 * (std::f64::consts::FRAC_PI_2 * 1e-3).sin().powi(2);
    assert!((rows[1][1] - single).abs() < 1e-15);
    assert!((rows[1][2] - both).abs() < 1e-18);
}

#[test]
fn scan_summary_carries_fit_fields() {
    let t = tempfile::tempdir().unwrap();
    let dir = run_dir(&run(t.path(), &["--set", "sensor.n_beams=3", "sensor", "scan"]));
    let s = summary(&dir);
    assert!((s["mean_waist_um"].as_f64().unwrap() - 0.67).abs() < 0.06);
    assert!((s["mean_pitch_um"].as_f64().unwrap() - 3.95).abs() < 0.03);
    let (h, _) = ion_addressing::io::read_csv(&dir.join("scan.csv")).unwrap();
    assert_eq!(h, vec!["channel", "position_um", "delta_hat", "sigma_delta", "valid"]);
}

#[test]
fn fit_command_recovers_synthetic_peaks() {
    let t = tempfile::tempdir().unwrap();
    let profile = t.path().join("profile.csv");
    let mut text = String::from("x_um,intensity\n");
    for i in 0..=400 {
        let x = i as f64 * 0.05;
        let y: f64 = [6.0, 10.0, 14.0].iter().map(|c| (-2.0 * (x - c).powi(2) / 0.49).exp()).sum();
        text.push_str(&format!("{x},{y}\n"));
    }
    std::fs::write(&profile, text).unwrap();
    let dir = run_dir(&run(t.path(), &["analyze", "fit", profile.to_str().unwrap(), "--peaks", "3"]));
    let s = summary(&dir);
    assert!((s["mean_waist_um"].as_f64().unwrap() - 0.7).abs() < 1e-6);
    assert!((s["mean_pitch_um"].as_f64().unwrap() - 4.0).abs() < 1e-6);
}
