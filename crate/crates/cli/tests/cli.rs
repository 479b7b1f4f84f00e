use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn floqeels(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floqeels"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = floqeels(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Numeric rows of a CSV with `#` comments and one header line.
fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn undriven_spectrum_is_one_unit_gaussian_at_omega0() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run_ok(&[
        "spectrum", "--scenario", "two_level", "--rabi", "0", "--omega-l", "0.8",
        "--omega-points", "2001", "--out", path_str(&out),
    ]);
    let rows = read_csv(&out.join("spectrum.csv"));
    let h = rows[1][0] - rows[0][0];
    let area: f64 = rows.iter().map(|r| r[1]).sum::<f64>() * h;
    assert!((area - 1.0).abs() < 1e-6, "area {area}");
    let peak = rows.iter().max_by(|a, b| a[1].total_cmp(&b[1])).unwrap();
    assert!((peak[0] - 1.0).abs() <= h);
    let peaks = read_csv(&out.join("peaks.csv"));
    assert_eq!(peaks.len(), 1);
    assert_eq!(&peaks[0][..3], &[1.0, 0.0, 0.0]);
    assert!((peaks[0][4] - 1.0).abs() < 1e-8);
}

#[test]
fn driven_two_level_peaks_follow_parity() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run_ok(&[
        "spectrum", "--scenario", "two_level", "--rabi", "0.4", "--omega-l", "1.5",
        "--out", path_str(&out), "--reference",
    ]);
    let peaks = read_csv(&out.join("peaks.csv"));
    assert!(peaks.len() > 4);
    let mut sidebands = 0;
    for p in &peaks {
        let (j, jp, l) = (p[0] as i64, p[1] as i64, p[2] as i64);
        if j == jp {
            assert!(l % 2 != 0, "diagonal peak with even l: {p:?}");
            assert!((p[3] - l as f64 * 1.5).abs() < 1e-12);
            sidebands += 1;
        } else {
            assert!(l % 2 == 0, "off-diagonal peak with odd l: {p:?}");
        }
    }
    assert!(sidebands >= 2);
    assert!(out.join("spectrum_reference.csv").exists());
}

#[test]
fn lambda_c_shows_gain_and_loss_near_mid_transition() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run_ok(&["spectrum", "--scenario", "lambda_c", "--out", path_str(&out)]);
    let peaks = read_csv(&out.join("peaks.csv"));
    let near = |sign: f64| {
        peaks
            .iter()
            .any(|p| (p[3] - sign * 0.3).abs() < 0.1 && p[4] > 1e-3)
    };
    assert!(near(1.0) && near(-1.0));
}

#[test]
fn map_outputs_are_complete_and_thread_independent() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let out = tmp.path().join(name);
        run_ok(&[
            "map", "--scenario", "two_level", "--sweep", "omega_l:0.5:1.5:6",
            "--omega-points", "81", "--threads", threads, "--out", path_str(&out),
        ]);
        out
    };
    let a = run("a", "1");
    let b = run("b", "3");
    let m = manifest(&a);
    let files: Vec<String> = m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    for f in ["map.txt", "map.bin", "map_axis.csv", "map_peaks.csv", "manifest.json"] {
        assert!(files.iter().any(|x| x == f), "{f} not listed");
    }
    for f in &files {
        assert!(a.join(f).exists(), "{f} listed but missing");
        if f != "manifest.json" {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
        }
    }
    assert_eq!(fs::metadata(a.join("map.bin")).unwrap().len(), 6 * 81 * 8);
    let text = fs::read_to_string(a.join("map.txt")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(' ').count() == 81));
}

#[test]
fn manifest_config_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    run_ok(&[
        "spectrum", "--scenario", "lambda_a", "--rabi", "0.25", "--omega-l", "0.5",
        "--fwhm", "0.02", "--out", path_str(&first),
    ]);
    let m = manifest(&first);
    assert_eq!(m["config"]["drive"]["omega_l"], 0.5);
    assert_eq!(m["config"]["numerics"]["broadening_fwhm"], 0.02);
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, serde_json::to_string(&m["config"]).unwrap()).unwrap();
    let second = tmp.path().join("second");
    run_ok(&["spectrum", "--config", path_str(&cfg), "--out", path_str(&second)]);
    for f in ["spectrum.csv", "peaks.csv"] {
        let strip = |p: &Path| -> Vec<String> {
            fs::read_to_string(p.join(f))
                .unwrap()
                .lines()
                .filter(|l| !l.starts_with("# system"))
                .map(str::to_string)
                .collect()
        };
        assert_eq!(strip(&first), strip(&second), "{f} differs");
    }
}

#[test]
fn undriven_floquet_table() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("f");
    run_ok(&[
        "floquet", "--scenario", "two_level", "--rabi", "0", "--omega-l", "1.5",
        "--full", "--out", path_str(&out),
    ]);
    let rows = read_csv(&out.join("floquet.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][1], 0.0);
    assert!((rows[1][1] - 1.0).abs() < 1e-12);
    // ω₀ folded into (-ω_L/2, ω_L/2]
    assert!((rows[1][2] + 0.5).abs() < 1e-12);
    assert!(out.join("floquet_coeffs.csv").exists());
}

#[test]
fn steady_populations_sum_to_one() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    run_ok(&["steady", "--scenario", "lambda_b", "--full", "--out", path_str(&out)]);
    let rows = read_csv(&out.join("steady.csv"));
    assert_eq!(rows.len(), 3);
    let level: f64 = rows.iter().map(|r| r[2]).sum();
    let band: f64 = rows.iter().map(|r| r[3]).sum();
    assert!((level - 1.0).abs() < 1e-10 && (band - 1.0).abs() < 1e-10);
    assert!(out.join("steady_coeffs.csv").exists());
}

#[test]
fn validate_two_level_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let o = run_ok(&["validate", "two_level", "--out", path_str(&out)]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("overall: PASS"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("validation.json")).unwrap()).unwrap();
    assert_eq!(report[0]["passed"], true);
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("x");
    let out = path_str(&out);
    let code = |args: &[&str]| floqeels(args).status.code().unwrap();
    assert_eq!(code(&["spectrum", "--out", out]), 1);
    assert_eq!(code(&["spectrum", "--scenario", "nope", "--out", out]), 1);
    assert_eq!(code(&["spectrum", "--scenario", "two_level", "--omega-l", "-1", "--out", out]), 1);
    assert_eq!(code(&["map", "--scenario", "two_level", "--sweep", "rabi:0:0.6:1", "--out", out]), 1);
    assert_eq!(code(&["map", "--scenario", "two_level", "--sweep", "bogus", "--out", out]), 1);
    let missing = tmp.path().join("missing.json");
    assert_eq!(code(&["steady", "--config", path_str(&missing), "--out", out]), 1);
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{\"levels\": []}").unwrap();
    assert_eq!(code(&["steady", "--config", path_str(&bad), "--out", out]), 1);
    // far too strong a drive for the truncation cap
    assert_eq!(
        code(&["spectrum", "--scenario", "two_level", "--rabi", "30", "--l-max", "8", "--out", out]),
        2
    );
}

#[test]
fn failed_map_rows_are_flagged_and_the_rest_written() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("m");
    let o = floqeels(&[
        "map", "--scenario", "two_level", "--sweep", "rabi:0:30:3", "--l-max", "8",
        "--omega-points", "11", "--out", path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = fs::read_to_string(out.join("map_axis.csv")).unwrap();
    let status: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap())
        .collect();
    assert_eq!(status, ["ok", "failed", "failed"]);
    assert_eq!(manifest(&out)["parameters"]["failed_rows"], 2);
}
