use std::path::PathBuf;
use std::process::Command;

fn ffsi() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ffsi"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ffsi-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn scenario_writes_main_and_assignment_tables() {
    let dir = scratch("scenario");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "seed = 3\nbootstrap = 20\n[users]\nul = [0.0, 20.0]\ndl = [0.0, -20.0]\n\
         [[scatterers]]\nangle = 10.0\ndelay = 5\n[[scatterers]]\nangle = -40.0\ndelay = 9\ninr_db = 20.0\n",
    )
    .unwrap();
    let out = dir.join("result.csv");
    let status = ffsi()
        .args(["scenario", "--trials", "20", "--method", "proposed", "--method", "si-free", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let main = std::fs::read_to_string(&out).unwrap();
    assert!(main.contains("# seed: 3"));
    assert!(main.contains("# schema: 1"));
    let rows = data_lines(&main);
    assert!(rows[0].starts_with("method,limits,trials,skipped,ul_worst_db"));
    assert_eq!(rows.len(), 3);
    let assign = std::fs::read_to_string(dir.join("result.assignment.csv")).unwrap();
    assert_eq!(data_lines(&assign).len(), 3);
}

#[test]
fn same_seed_same_bytes() {
    let run = || {
        let o = ffsi()
            .args(["sweep-angle", "--trials", "3", "--seed", "9", "--bootstrap", "5", "--method", "only-dsic"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        o.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn limits_flag_adds_limited_method() {
    let o = ffsi()
        .args(["random-mc", "--trials", "2", "--frames", "1", "--bootstrap", "5", "--method", "proposed"])
        .args(["--limits", "rx=2,tx=2"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("proposed-limited,\"na=inf,rx=2,tx=2,dsic=inf\""), "{text}");
    assert!(text.lines().any(|l| l.starts_with("13,proposed,")), "{text}");
}

#[test]
fn emergence_reports_detection_columns() {
    let dir = scratch("emergence");
    let cfg = dir.join("e.toml");
    std::fs::write(&cfg, "[sweep]\nangles = [1.0, 30.0]\n").unwrap();
    let out = dir.join("em.csv");
    let status = ffsi()
        .args(["emergence", "--trials", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let rows = data_lines(&text);
    assert!(rows[0].contains("p_detect"));
    assert_eq!(rows.len(), 3);
    assert!(dir.join("em.detection-trace.csv").exists());
}

#[test]
fn configuration_errors_exit_nonzero() {
    let dir = scratch("bad");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "[system]\nn_training = 100\n").unwrap();
    let o = ffsi().args(["scenario", "--config"]).arg(&cfg).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_training"));

    let o = ffsi().args(["scenario", "--method", "telepathy"]).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown method"));

    let o = ffsi().args(["scenario", "--pfa", "2"]).output().unwrap();
    assert!(!o.status.success());

    let o = ffsi().args(["scenario", "--config", "/nonexistent/ffsi.toml"]).output().unwrap();
    assert!(!o.status.success());

    let o = ffsi().args(["teleport"]).output().unwrap();
    assert!(!o.status.success());
}
