use std::fs;
use std::path::Path;

use nuchaos::harness::{compare, run_experiment, ExperimentConfig, ExperimentKind, Tolerance};
use nuchaos::Error;

fn config(kind: ExperimentKind, out: &Path) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        n_qubits: 3,
        field: 0.4,
        n_realizations: 12,
        master_seed: 42,
        t_max: Some(30),
        out_dir: out.to_path_buf(),
        workers: Some(1),
        ..ExperimentConfig::default()
    }
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn output_bytes_do_not_depend_on_workers() {
    for kind in [ExperimentKind::Purify, ExperimentKind::Spectrum, ExperimentKind::Sff] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&config(kind, a.path())).unwrap();
        let mut wide = config(kind, b.path());
        wide.workers = Some(3);
        run_experiment(&wide).unwrap();
        let (fa, fb) = (csv_files(a.path()), csv_files(b.path()));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{kind}");
    }
}

#[test]
fn interrupted_run_resumes_to_the_same_output() {
    let whole = tempfile::tempdir().unwrap();
    let cut = tempfile::tempdir().unwrap();
    let cfg = config(ExperimentKind::Purify, whole.path());
    run_experiment(&cfg).unwrap();

    let partial = config(ExperimentKind::Purify, cut.path());
    run_experiment(&partial).unwrap();
    // drop every other completion record and all outputs, as if the run had been killed
    let ledger = cut.path().join("ledger");
    let mut entries: Vec<_> = fs::read_dir(&ledger).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries.iter().step_by(2) {
        fs::remove_file(p).unwrap();
    }
    for (name, _) in csv_files(cut.path()) {
        fs::remove_file(cut.path().join(name)).unwrap();
    }
    let resumed = run_experiment(&partial).unwrap();
    assert_eq!(resumed.manifest.resumed, 6);
    assert_eq!(csv_files(whole.path()), csv_files(cut.path()));
}

#[test]
fn resume_refuses_a_different_config() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&config(ExperimentKind::Spectrum, dir.path())).unwrap();
    let mut other = config(ExperimentKind::Spectrum, dir.path());
    other.field = 0.5;
    assert!(matches!(run_experiment(&other), Err(Error::ResumeMismatch(_))));
}

#[test]
fn theory_curves_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_experiment(&config(ExperimentKind::Theory, dir.path())).unwrap();
    assert!(!out.results.is_empty());
    for r in &out.results {
        assert!(r.points.iter().all(|p| p.n == 1 && p.sem == 0.0), "{}", r.observable);
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn compare_passes_identical_files_and_fails_a_corrupted_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(ExperimentKind::Sff, dir.path());
    cfg.n_realizations = 40;
    run_experiment(&cfg).unwrap();
    let result = dir.path().join("sff.csv");
    let same = compare(&result, &result, Tolerance::new(3.0)).unwrap();
    assert!(same.pass && same.max_z == 0.0);

    let text = fs::read_to_string(&result).unwrap();
    let corrupted: String = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            if i == 0 {
                return format!("{line}\n");
            }
            let mut cols: Vec<String> = line.split(',').map(str::to_string).collect();
            let mean: f64 = cols[1].parse().unwrap();
            cols[1] = format!("{:.16e}", mean * 3.0 + 10.0);
            format!("{}\n", cols.join(","))
        })
        .collect();
    let bad = dir.path().join("corrupted.csv");
    fs::write(&bad, corrupted).unwrap();
    assert!(!compare(&bad, &result, Tolerance::new(3.0)).unwrap().pass);
}
