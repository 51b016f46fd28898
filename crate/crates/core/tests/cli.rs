use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn kse(args: &[&str], out_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kse"));
    cmd.args(args).env("RUST_LOG", "warn");
    match out_dir {
        Some(d) => cmd.env("KSE_OUTPUT_DIR", d),
        None => cmd.env_remove("KSE_OUTPUT_DIR"),
    };
    cmd.output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_completes_into_the_override_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("elsewhere");
    let cfg = write_config(dir.path(), "n = 32\nh = 1e-3\nt_final = 0.02\nsave_every = 5\noutput_dir = ignored\n");
    let o = kse(&["run", &cfg], Some(&out));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("diagnostics.csv").exists());
    assert!(!Path::new("ignored").exists());
}

#[test]
fn bad_config_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 32\nh = -1\n");
    let o = kse(&["run", &cfg], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`h`"));

    let cfg = write_config(dir.path(), "n = 32\nlambda = 1\n");
    let o = kse(&["scaling", "--beta", "2", &cfg], Some(dir.path()));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`lambda`"));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 16\nlambda = 10000\nh = 1e-3\nt_final = 0.05\nsave_every = 1\n");
    let o = kse(&["run", &cfg], Some(dir.path()));
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn scaling_subcommand_reports_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "model = vector\nlambda = 0\nn = 64\nh = 1e-3\nt_final = 0.02\nsave_every = 5\n");
    let o = kse(&["scaling", "--beta", "2", &cfg], Some(dir.path()));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("scaling.txt")).unwrap();
    let d: f64 = text.lines().find_map(|l| l.strip_prefix("discrepancy=")).unwrap().parse().unwrap();
    assert!(d < 1e-6);
}

#[test]
fn validate_passes_and_catches_an_injected_fault() {
    let o = kse(&["validate"], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));

    let o = kse(&["validate", "--inject-fault", "dealias-mask"], None);
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("resolution_margin"), "{stderr}");
}
