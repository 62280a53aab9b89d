use std::path::Path;
use std::process::{Command, Output};

fn ehlora(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehlora"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn ehlora")
}

const SMALL: [&str; 4] = [
    "--override",
    "density_sweep=[2000.0, 4000.0]",
    "--override",
    "seeds={ start = 0, count = 2 }",
];

#[test]
fn topology_writes_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = ehlora(&["topology", "--seed", "3"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("topology.csv")).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "id,kind,x,y,distance,fading,gain,beacon_gain,harvest_rate_w");
    assert_eq!(text.lines().filter(|l| l.contains(",user,")).count(), 314);
}

#[test]
fn trial_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = ehlora(&["trial", "--seed", "1", "--override", "geometry.user_density_per_km2=3000"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["users"], 94);
    assert!(v["min_rate_nats"].as_f64().unwrap() > 0.0);
    assert_eq!(v["solver_converged"], true);
}

#[test]
fn sweep_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let mut args = vec!["sweep"];
        args.extend(SMALL);
        let o = ehlora(&args, d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sweep.csv", "sweep_summary.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    let rows = std::fs::read_to_string(a.path().join("sweep.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4);
}

#[test]
fn figures_emit_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["figures"];
    args.extend(SMALL);
    let o = ehlora(&args, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (f, rows) in [
        ("fig3_sf_histogram.csv", 4 * 6),
        ("fig4_ehtime_agreement.csv", 2 * 2 * 3),
        ("fig5_minrate_vs_density.csv", 2 * 4 * 2 * 2),
    ] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1 + rows, "{f}");
    }
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.toml");
    std::fs::write(&cfg, "seeds = [4]\n[geometry]\nuser_density_per_km2 = 2000.0\n").unwrap();
    let o = ehlora(&["trial", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 4);
    assert_eq!(v["users"], 63);
}

#[test]
fn shipped_default_config_loads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/default.toml");
    let o = ehlora(&["trial", "--config", cfg, "--seed", "0"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn errors_are_stage_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let o = ehlora(&["trial", "--override", "geometry.cell_radius=5"], dir.path());
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: [config]"), "{err}");

    let o = ehlora(
        &["trial", "--override", "phy.sensitivity_dbm=[-10.0, -11.0, -12.0, -13.0, -14.0, -15.0]"],
        dir.path(),
    );
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: [activation] empty active set"), "{err}");

    let o = ehlora(&["trial", "--config", "/nonexistent/x.toml"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: [config]"));
}
