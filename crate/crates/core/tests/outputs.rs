use std::fs;

use kse::harness::{drift_experiment, run_plain, RunConfig};
use kse::snapshot::read_snapshots;
use kse::{InitialData, ModelConfig, ModelFields, ModelKind};

fn small(dir: &std::path::Path) -> RunConfig {
    RunConfig {
        model: ModelConfig { n: 32, h: 1e-3, t_final: 0.1, save_every: 5, ..ModelConfig::default() },
        output_dir: dir.to_path_buf(),
        checkpoint_stride: 4,
        ..RunConfig::default()
    }
}

#[test]
fn diagnostics_have_a_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_plain(&small(dir.path())).unwrap();
    assert!(report.status.is_completed());
    let csv = fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert!(header.contains(&"lp_phi_inf") || header.iter().any(|h| h.starts_with("lp_phi_")));
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() as f64 >= 0.1 / (1e-3 * 5.0), "{} rows", rows.len());
    for r in &rows {
        assert_eq!(r.split(',').count(), header.len());
    }
    assert!(dir.path().join("spectrum.csv").exists());
    assert!(!dir.path().join("drift.csv").exists());
}

#[test]
fn runs_are_bitwise_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let mut cfg = small(d.path());
        cfg.model.init = InitialData::Random { seed: 11, band: 4.0, amplitude: 1.0 };
        run_plain(&cfg).unwrap();
    }
    for name in ["diagnostics.csv", "spectrum.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn checkpoints_restart_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_plain(&small(dir.path())).unwrap();
    assert!(report.checkpoints.len() >= 2);
    let last = report.checkpoints.last().unwrap();
    let records = read_snapshots(last).unwrap();
    assert_eq!(records.len(), 1);
    let ModelFields::Scalar(phi) = &report.final_state.fields else { panic!() };
    let restored = records[0].to_field(phi.grid()).unwrap();
    let gap = restored.values().iter().zip(phi.values().iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-12, "{gap:e}");

    let mut resumed = small(&dir.path().join("resumed"));
    resumed.model.init = InitialData::File(last.clone());
    assert!(run_plain(&resumed).unwrap().status.is_completed());
}

#[test]
fn drift_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(dir.path());
    cfg.model.model = ModelKind::Vector;
    let report = drift_experiment(&cfg).unwrap();
    let csv = fs::read_to_string(dir.path().join("drift.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "t,norm_Pu_L2,norm_grad_v_L2,norm_lap_v_L2,coupling_term");
    assert_eq!(csv.lines().count(), 1 + report.series.len());
    assert!(dir.path().join("drift_fit.txt").exists());
}
