//! A small desk-scale sweep written to a temporary directory, validated,
//! then turned into one figure's series.

use greenshift::experiment::{
    emit_plot_data, run_to_dir, validate_run, ExperimentSpec, Figure, Slice, RESULTS_FILE,
};

const SPEC: &str = r#"
profile = "desk"
topology = "nsfnet"
algorithms = ["none", "sp", "jre"]
umax = [0.5, 1.0]
loads = [40.0, 52.0, 64.0]
replications = 4
seed = 11
snapshots = true
"#;

fn main() {
    let spec = ExperimentSpec::from_toml_str(SPEC).expect("valid spec");
    let dir = std::env::temp_dir().join("greenshift-sweep");
    let out = run_to_dir(&spec, &dir).expect("sweep runs");
    println!("{} rows in {}", out.rows.len(), dir.join(RESULTS_FILE).display());
    for s in out.summary.iter().filter(|s| s.umax == 1.0) {
        println!("  {:<5} load {:>4}: brown {:>9.1} ± {:>7.1}, {:.2} batches", s.algorithm, s.load, s.obj2_mean, s.obj2_sd, s.migrations_mean);
    }
    print!("{}", validate_run(&dir));
    let series = emit_plot_data(&out.rows, Figure::CostVsUmax, &Slice::default()).expect("complete grid");
    for p in series.iter().filter(|p| p.algorithm == "jre") {
        println!("jre at load {}: umax {} -> {:.1}", p.fixed, p.x, p.mean);
    }
}
