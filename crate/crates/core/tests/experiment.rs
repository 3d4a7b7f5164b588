use std::fs;
use std::path::Path;
use std::process::Command;

use greenshift::experiment::{
    emit_plot_data, read_results, run_experiment, run_to_dir, summarize, validate_run, validate_snapshot,
    ExperimentSpec, Figure, PlotError, ResultRow, Slice, Snapshot, RESULTS_FILE, SNAPSHOT_DIR, STATUS_FILE,
    SUMMARY_FILE,
};

const TABLE_SPEC: &str = r#"
topology = "six-node"
algorithms = ["sp", "mp", "ep", "jre", "none"]
umax = [1.0]
loads = [2.0]
request_mode = "fixed"
h_max = 1
replications = 5
servers_per_dc = 1
energy_prices = { kind = "uniform", min = 9.0, max = 15.0 }
seed = 3
"#;

fn spec(text: &str) -> ExperimentSpec {
    ExperimentSpec::from_toml_str(text).unwrap()
}

fn small_sweep() -> ExperimentSpec {
    let mut s = spec(TABLE_SPEC);
    s.loads = vec![2.0, 3.0];
    s.umax = vec![0.05, 1.0];
    s.replications = 3;
    s.snapshots = true;
    s
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_greenshift"))
}

#[test]
fn table_style_spec_gives_one_row_per_cell() {
    let out = run_experiment(&spec(TABLE_SPEC)).unwrap();
    assert_eq!(out.rows.len(), 25);
    assert_eq!(out.summary.len(), 5);
    assert!(out.summary.iter().all(|s| s.n == 5));
    for (i, r) in out.rows.iter().enumerate() {
        assert_eq!(r.replication, i as u64 / 5);
        assert_eq!(r.seed, 3 + r.replication);
    }
}

#[test]
fn same_spec_same_bytes() {
    let s = small_sweep();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_to_dir(&s, a.path()).unwrap();
    run_to_dir(&s, b.path()).unwrap();
    for file in [RESULTS_FILE, SUMMARY_FILE] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
    assert_eq!(fs::read_to_string(a.path().join(STATUS_FILE)).unwrap().trim(), "complete");
    // Wall-clock time lives in its own file.
    let mut rows = run_experiment(&s).unwrap().rows;
    rows.iter_mut().for_each(|r| r.runtime_ms = 0.0);
    assert_eq!(read_results(a.path()).unwrap(), rows);
}

#[test]
fn summary_matches_recomputation() {
    let out = run_experiment(&small_sweep()).unwrap();
    for s in &out.summary {
        let cell: Vec<&ResultRow> =
            out.rows.iter().filter(|r| r.algorithm == s.algorithm && r.umax == s.umax && r.load == s.load).collect();
        assert_eq!(cell.len(), s.n);
        // Welford, independent of the two-pass formula in the runner.
        let stats = |f: &dyn Fn(&ResultRow) -> f64| {
            let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
            for r in &cell {
                n += 1.0;
                let x = f(r);
                let d = x - mean;
                mean += d / n;
                m2 += d * (x - mean);
            }
            (mean, (m2 / (n - 1.0)).sqrt())
        };
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        let (m, sd) = stats(&|r| r.obj2);
        assert!(close(m, s.obj2_mean) && close(sd, s.obj2_sd), "{s:?}");
        let (m, sd) = stats(&|r| r.obj);
        assert!(close(m, s.obj_mean) && close(sd, s.obj_sd), "{s:?}");
        let (m, sd) = stats(&|r| r.migrations as f64);
        assert!(close(m, s.migrations_mean) && close(sd, s.migrations_sd), "{s:?}");
    }
    assert_eq!(summarize(&out.rows), out.summary);
}

#[test]
fn no_migration_only() {
    let mut s = spec(TABLE_SPEC);
    s.algorithms = vec![greenshift::heuristics::Algorithm::None];
    s.replications = 1;
    let out = run_experiment(&s).unwrap();
    assert_eq!(out.rows.len(), 1);
    let r = &out.rows[0];
    assert_eq!((r.obj, r.obj2, r.migrations), (r.obj2_before, r.obj2_before, 0));
}

#[test]
fn plot_series_and_missing_cells() {
    let out = run_experiment(&small_sweep()).unwrap();
    let one = Slice { algorithms: Some(vec!["jre".into()]), umax: Some(vec![1.0]), loads: Some(vec![2.0]) };
    let pts = emit_plot_data(&out.rows, Figure::BrownCostVsLoad, &one).unwrap();
    assert_eq!(pts.len(), 1);
    assert_eq!((pts[0].x, pts[0].fixed, pts[0].n), (2.0, 1.0, 3));

    let pts = emit_plot_data(&out.rows, Figure::CostVsUmax, &Slice::default()).unwrap();
    assert_eq!(pts.len(), 5 * 2 * 2);

    let bad = Slice { algorithms: Some(vec!["sp".into(), "oracle".into()]), umax: None, loads: Some(vec![2.0, 9.0]) };
    match emit_plot_data(&out.rows, Figure::MigrationsVsLoad, &bad) {
        Err(PlotError::Missing(cells)) => {
            assert!(cells.contains(&("oracle".to_string(), 1.0, 2.0)));
            assert!(cells.contains(&("sp".to_string(), 0.05, 9.0)));
            assert!(!cells.contains(&("sp".to_string(), 1.0, 2.0)));
        }
        other => panic!("expected missing cells, got {other:?}"),
    }
    assert_eq!(emit_plot_data(&[], Figure::BrownCostVsLoad, &Slice::default()), Err(PlotError::Empty));
    assert!("brown-cost".parse::<Figure>().is_err());
}

#[test]
fn clean_run_validates() {
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&small_sweep(), dir.path()).unwrap();
    let report = validate_run(dir.path());
    assert_eq!(report.snapshots, 5 * 2 * 2 * 3);
    assert!(report.passed(), "{report}");
}

#[test]
fn oracle_dominance_is_checked_per_instance() {
    let mut s = spec(TABLE_SPEC);
    s.replications = 3;
    s.oracle = true;
    s.snapshots = true;
    let dir = tempfile::tempdir().unwrap();
    let out = run_to_dir(&s, dir.path()).unwrap();
    assert_eq!(out.rows.iter().filter(|r| r.algorithm == "oracle").count(), 3);
    let report = validate_run(dir.path());
    assert!(report.passed(), "{report}");
    assert_eq!(report.check("oracle-dominance").unwrap().checked, 3 * 5);

    // Undercut the oracle in one snapshot: the check names the file.
    let path = dir.path().join(SNAPSHOT_DIR).join("u1_l2_r1_oracle.json");
    let mut snap: Snapshot = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    snap.obj += 1e4;
    fs::write(&path, serde_json::to_string(&snap).unwrap()).unwrap();
    let report = validate_run(dir.path());
    let dom = report.check("oracle-dominance").unwrap();
    assert_eq!(dom.failures.len(), 5);
    assert!(dom.failures[0].contains("u1_l2_r1_"), "{}", dom.failures[0]);
}

fn snapshot_with_batches(dir: &Path) -> (std::path::PathBuf, Snapshot) {
    let mut entries: Vec<_> = fs::read_dir(dir.join(SNAPSHOT_DIR)).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            let s: Snapshot = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
            (p, s)
        })
        .find(|(_, s)| !s.batches.is_empty())
        .expect("some cell migrates")
}

#[test]
fn corrupted_snapshot_fails_non_overlap_and_names_the_link() {
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&small_sweep(), dir.path()).unwrap();
    let (path, mut snap) = snapshot_with_batches(dir.path());
    let mut twin = snap.batches[0].clone();
    twin.index = snap.batches.len();
    twin.vms.clear();
    twin.theta_gbps = 0.0;
    snap.batches.push(twin);
    let report = validate_snapshot(&snap);
    let overlap = report.check("rsa-non-overlap").unwrap();
    assert!(!overlap.passed());
    let link = snap.batches[0].path.links()[0];
    let (a, b) = (snap.topology.links[link].0, snap.topology.links[link].1);
    let msg = overlap.counterexample().unwrap();
    assert!(msg.contains(&format!("link {link} ({a}-{b})")), "{msg}");
    assert!(msg.contains(&format!("seed {}", snap.seed)), "{msg}");

    fs::write(&path, serde_json::to_string(&snap).unwrap()).unwrap();
    let report = validate_run(dir.path());
    assert!(!report.passed());
    assert!(!report.check("rsa-non-overlap").unwrap().passed());
    assert!(report.check("guard-band").unwrap().passed());

    let out = bin().args(["validate", "--in"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("FAIL rsa-non-overlap"), "{text}");
    assert!(text.contains("PASS continuity"), "{text}");
}

#[test]
fn other_corruptions_hit_their_checks() {
    let dir = tempfile::tempdir().unwrap();
    run_to_dir(&small_sweep(), dir.path()).unwrap();
    let (_, snap) = snapshot_with_batches(dir.path());

    let mut s = snap.clone();
    s.batches[0].slot_range.guard = 0;
    assert!(!validate_snapshot(&s).check("guard-band").unwrap().passed());

    let mut s = snap.clone();
    s.obj2 *= 0.5;
    assert!(!validate_snapshot(&s).check("energy-objective").unwrap().passed());

    let mut s = snap.clone();
    let dc = s.dcs.iter_mut().find(|d| d.used.iter().any(|&u| u > 0)).unwrap();
    dc.used[0] = dc.cores_per_server + 1;
    assert!(!validate_snapshot(&s).check("energy-capacity").unwrap().passed());

    let mut s = snap.clone();
    let extra = s.batches[0].clone();
    s.batches.push(extra);
    assert!(!validate_snapshot(&s).check("migration-batches").unwrap().passed());

    let mut s = snap.clone();
    s.params.umax = 1e-3;
    let cap = validate_snapshot(&s);
    assert!(!cap.check("congestion-cap").unwrap().passed(), "{cap}");
}

#[test]
fn failed_run_is_marked_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    // A directory where the results file should go makes the write fail.
    fs::create_dir_all(dir.path().join(RESULTS_FILE)).unwrap();
    assert!(run_to_dir(&spec(TABLE_SPEC), dir.path()).is_err());
    let status = fs::read_to_string(dir.path().join(STATUS_FILE)).unwrap();
    assert!(status.starts_with("incomplete:"), "{status}");
    let report = validate_run(dir.path());
    assert!(!report.check("run-status").unwrap().passed());
}

#[test]
fn cli_round_trip_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.toml");
    fs::write(&spec_path, format!("{TABLE_SPEC}\nsnapshots = true\n")).unwrap();
    let out_dir = dir.path().join("out");

    let run = bin().args(["run", "--seed", "9", "--spec"]).arg(&spec_path).arg("--out").arg(&out_dir).output().unwrap();
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let rows = read_results(&out_dir).unwrap();
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r.seed >= 9));

    let ok = bin().args(["validate", "--in"]).arg(&out_dir).output().unwrap();
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    let plot = bin().args(["plot", "--figure", "migrations-vs-load", "--in"]).arg(&out_dir).output().unwrap();
    assert_eq!(plot.status.code(), Some(0));
    let csv = fs::read_to_string(out_dir.join("figure-migrations-vs-load.csv")).unwrap();
    assert!(csv.starts_with("algorithm,umax,load,migrations_mean,sd,n\n"), "{csv}");
    assert_eq!(csv.lines().count(), 6);

    let missing = bin()
        .args(["plot", "--figure", "cost-vs-umax", "--algorithms", "sp,oracle", "--in"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("(oracle, 1, 2)"));

    let lp = dir.path().join("cell.lp");
    let export = bin().args(["export-ilp", "--spec"]).arg(&spec_path).arg("--out").arg(&lp).output().unwrap();
    assert_eq!(export.status.code(), Some(0), "{}", String::from_utf8_lossy(&export.stderr));
    let text = fs::read_to_string(&lp).unwrap();
    assert!(text.contains("\\ eq15\n") && text.trim_end().ends_with("End"));

    let bad_spec = dir.path().join("bad.toml");
    fs::write(&bad_spec, "umax = [1.5]\n").unwrap();
    let bad = bin().args(["run", "--spec"]).arg(&bad_spec).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("`umax`"));

    let unknown = bin().args(["plot", "--figure", "pie", "--in"]).arg(&out_dir).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
}
