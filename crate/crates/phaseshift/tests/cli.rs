use std::path::Path;
use std::process::{Command, Output};

use phaseshift::commands::Identification;
use phaseshift::io::parse_shift_table;
use tempfile::TempDir;

fn phaseshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaseshift"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = phaseshift(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// A small search so that each identification takes well under a second.
fn write_small_config(dir: &TempDir, extra: &str) -> String {
    let p = path(dir, "config.json");
    let text = format!(
        r#"{{
  "admissible": {{"radius": 2.5, "max_layers": 2, "q_low": -3.0, "q_high": 3.0}},
  "irrs": {{"batch_size": 60, "gamma": 0.1, "nu": 0.5, "beta": 0.95, "epsilon": 0.01, "j_max": 2}},
  "local": {{"max_powell_iters": 20}}{extra}
}}"#
    );
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn forward_reference_table() {
    let text = ok(&["forward", "--potential", "q1", "--k", "9"]);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# fingerprint="));
    assert_eq!(lines.next().unwrap(), "# k=9");
    assert_eq!(lines.next().unwrap(), "l,delta");
    let table = parse_shift_table(&text).unwrap();
    assert_eq!(table.shifts.len(), 33);
    assert!((table.shifts[0] - -0.0951516).abs() < 1e-7);
}

#[test]
fn forward_zero_potential_and_fixed_range() {
    let text = ok(&[
        "forward",
        "--potential",
        r#"{"radii": [2.4], "values": [0.0]}"#,
        "--k",
        "3",
        "--l-max",
        "4",
    ]);
    let table = parse_shift_table(&text).unwrap();
    assert_eq!(table.shifts, vec![0.0; 5]);
}

#[test]
fn regime_violation_names_the_layer() {
    let out = phaseshift(&["forward", "--potential", "q1", "--k", "2"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("layer 0"), "{err}");
}

#[test]
fn missing_inputs_fail_cleanly() {
    assert!(!phaseshift(&["forward", "--k", "3"]).status.success());
    assert!(!phaseshift(&["forward", "--potential", "q7", "--k", "3"])
        .status
        .success());
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "bad.csv");
    std::fs::write(&bad, "l,delta\n0,0.1\n2,0.3\n").unwrap();
    let out = phaseshift(&[
        "identify",
        "--targets",
        &bad,
        "--k",
        "6",
        "--preset",
        "desk",
    ]);
    assert!(!out.status.success());
}

#[test]
fn noise_command_records_provenance_and_bound() {
    let dir = TempDir::new().unwrap();
    let clean = path(&dir, "clean.csv");
    ok(&["forward", "--potential", "q2", "--k", "6", "--out", &clean]);
    let noisy = ok(&["noise", "--targets", &clean, "--h", "0.001", "--seed", "11"]);
    let a = parse_shift_table(&std::fs::read_to_string(&clean).unwrap()).unwrap();
    let b = parse_shift_table(&noisy).unwrap();
    assert_eq!(b.meta["h"], "0.001");
    assert_eq!(b.meta["seed"], "11");
    let delta_max: f64 = b.meta["delta_max"].parse().unwrap();
    assert_eq!(
        delta_max,
        a.shifts.iter().fold(0.0f64, |m, d| m.max(d.abs()))
    );
    for (x, y) in a.shifts.iter().zip(&b.shifts) {
        assert!((x - y).abs() <= 0.5 * 0.001 * delta_max);
    }
    assert_eq!(
        noisy,
        ok(&["noise", "--targets", &clean, "--h", "0.001", "--seed", "11"])
    );
    let same = ok(&["noise", "--targets", &clean, "--h", "0", "--seed", "11"]);
    assert_eq!(parse_shift_table(&same).unwrap().shifts, a.shifts);
}

fn read_report(p: &Path) -> Identification {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn forward_output_is_an_exact_target_for_identify() {
    let dir = TempDir::new().unwrap();
    let cfg = write_small_config(&dir, "");
    let targets = path(&dir, "t.csv");
    let truth = r#"{"radii": [0.7, 1.6], "values": [1.5, -1.0]}"#;
    ok(&[
        "forward",
        "--potential",
        truth,
        "--k",
        "4",
        "--out",
        &targets,
    ]);
    let report = path(&dir, "r.json");
    let summary = ok(&[
        "identify",
        "--config",
        &cfg,
        "--targets",
        &targets,
        "--potential",
        truth,
        "--planted",
        "--seed",
        "2",
        "--out",
        &report,
    ]);
    assert!(summary.contains("verdict:"));
    let id = read_report(Path::new(&report));
    assert_eq!(id.planted_phi, Some(0.0));
    assert_eq!(id.k, 4.0);
    assert!(id.report.iterations.len() <= 2);
    assert!(id.report.best.phi <= id.report.iterations[0].best_phi);
}

#[test]
fn identify_is_reproducible_and_worker_independent() {
    let dir = TempDir::new().unwrap();
    let cfg = write_small_config(&dir, r#", "potential": "q2", "k": 6"#);
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    ok(&[
        "identify",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--workers",
        "1",
        "--out",
        &a,
    ]);
    ok(&[
        "identify",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--workers",
        "3",
        "--out",
        &b,
    ]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = path(&dir, "c.json");
    ok(&["identify", "--config", &cfg, "--seed", "6", "--out", &c]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn single_iteration_cap() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "one.json");
    std::fs::write(
        &cfg,
        r#"{"potential": "q2", "k": 5, "admissible": {"radius": 2.5, "max_layers": 2, "q_low": -3, "q_high": 3},
            "irrs": {"batch_size": 40, "gamma": 0.1, "nu": 0.5, "epsilon": 1e-12, "j_max": 1},
            "local": {"max_powell_iters": 5}}"#,
    )
    .unwrap();
    let out = path(&dir, "r.json");
    ok(&["identify", "--config", &cfg, "--out", &out]);
    assert_eq!(read_report(Path::new(&out)).report.iterations.len(), 1);
}

#[test]
fn sweep_matrix_and_cells() {
    let dir = TempDir::new().unwrap();
    let cfg = write_small_config(&dir, r#", "potential": "q2""#);
    let matrix = path(&dir, "d.csv");
    ok(&[
        "sweep", "--config", &cfg, "--k-list", "4,6", "--h-list", "0,0.001", "--seed", "1",
        "--out", &matrix,
    ]);
    let text = std::fs::read_to_string(&matrix).unwrap();
    let lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(lines[0], "k,h=0,h=0.001");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("4,") && lines[2].starts_with("6,"));
    let cells = dir.path().join("d_cells");
    assert_eq!(std::fs::read_dir(&cells).unwrap().count(), 4);
    let cell = read_report(&cells.join("k=6_h=0.001.json"));
    let d: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(cell.report.final_diameter(), d);
}

#[test]
fn single_cell_sweep_equals_identify() {
    let dir = TempDir::new().unwrap();
    let cfg = write_small_config(&dir, r#", "potential": "q2""#);
    let matrix = ok(&[
        "sweep", "--config", &cfg, "--k-list", "5", "--h-list", "0", "--seed", "8",
    ]);
    let report = path(&dir, "r.json");
    ok(&[
        "identify", "--config", &cfg, "--k", "5", "--seed", "8", "--out", &report,
    ]);
    let d: f64 = matrix
        .lines()
        .last()
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(read_report(Path::new(&report)).report.final_diameter(), d);
}
