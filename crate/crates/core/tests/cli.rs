use std::path::Path;
use std::process::{Command, Output};

fn molsync(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molsync"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn summary(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("summary_{command}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn curves_writes_csv_and_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let o = molsync(&["curves", "--t-max", "0.05"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(first_line(&dir.path().join("channel_curves.csv")).starts_with("t_s,"));
    let s = summary(dir.path(), "curves");
    let peaks = s["results"].as_array().unwrap();
    assert_eq!(peaks.len(), 3);
    let t = peaks[0]["argmax_t_s"].as_f64().unwrap();
    assert!((t - 0.033585).abs() <= 1.1e-5, "{t}");
    assert!(s["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn run_and_sweep_record_their_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "K = 30\nruns = 2\nsnr_db = 8.0\nthreshold = \"calibrated\"\nsweep_param = \"sigma2_symbol\"\nsweep_values = [0.0, 0.2]\n",
    );
    let o = molsync(&["run", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("SER proposed"));
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let s = summary(dir.path(), "run");
    let fp = s["fingerprint"].as_str().unwrap().to_string();
    assert_eq!(fp.len(), 16);
    assert!(csv.trim_end().ends_with(&fp));
    assert_eq!(s["threshold_mode"], "calibrated");

    let o = molsync(&["sweep", "--config", &cfg, "--runs", "1"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep_sigma2_symbol.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("sigma2_symbol,0,"));
    assert!(rows[2].starts_with("sigma2_symbol,0.2,"));
    assert_eq!(
        summary(dir.path(), "sweep")["results"]["rows"]
            .as_array()
            .unwrap()
            .len(),
        2
    );

    let o = molsync(
        &[
            "sweep", "--config", &cfg, "--runs", "1", "--param", "snr_db", "--values", "0,4",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("sweep_snr_db.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn eye_writes_both_alignments() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "K = 60\nruns = 1\nsigma2_symbol = 0.1\n");
    let o = molsync(&["eye", "--config", &cfg], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["eye_proposed.csv", "eye_fixed.csv"] {
        assert_eq!(
            first_line(&dir.path().join(name)),
            "symbol_index,bit,t_offset_s,normalized_cumulative_count"
        );
    }
    let s = summary(dir.path(), "eye");
    assert_eq!(s["results"][0]["alignment"], "proposed");
    assert_eq!(s["results"][1]["alignment"], "fixed");
}

#[test]
fn bad_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "K = 10\nno_such_key = 1\n");
    let o = molsync(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let cfg = write_config(dir.path(), "K = 10\nT_s = -1.0\n");
    assert_eq!(molsync(&["run", "--config", &cfg], dir.path()).status.code(), Some(2));
    let o = molsync(&["sweep", "--param", "bogus", "--values", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("summary_run.json").exists());
}
