//! Mean objective of every heuristic and the exact oracle over 20
//! six-node scenarios with two requests per datacenter and one batch per
//! source.

use greenshift::exact::{solve_exact, ExactInstance, ExactLimits};
use greenshift::heuristics::{run_cycle, Algorithm, NetworkParams};
use greenshift::spectrum::SpectrumGrid;
use greenshift::topology::preset;
use greenshift::workload::{generate_requests, PriceModel, RequestMode, ScenarioConfig};

fn main() {
    let topo = preset("six-node").expect("embedded preset");
    let params = NetworkParams { umax: 1.0, h_max: Some(1), ..NetworkParams::default() };
    let reps = 20;
    let mut sums = [0.0; Algorithm::ALL.len() + 1];
    let mut migrations = [0usize; Algorithm::ALL.len() + 1];
    for rep in 0..reps {
        let config = ScenarioConfig {
            requests_per_dc: 2.0,
            mode: RequestMode::Fixed,
            servers_per_dc: 1,
            energy_prices: PriceModel::Uniform { min: 9.0, max: 15.0 },
            seed: 1 + rep,
            ..ScenarioConfig::default()
        };
        let draw = generate_requests(&config, topo.dc_nodes()).expect("valid scenario");
        let model = config.energy_model();
        let grid = || SpectrumGrid::for_topology(&topo, params.slot_rate_gbps);
        for (i, alg) in Algorithm::ALL.into_iter().enumerate() {
            let out = run_cycle(&topo, grid(), &draw, &model, &params, alg);
            sums[i] += out.report.obj;
            migrations[i] += out.report.migrations;
        }
        let sol = solve_exact(&ExactInstance::from_draw(&topo, grid(), &draw, model, params.clone()), ExactLimits::default());
        assert!(sol.is_optimal(), "oracle gave up on seed {}", config.seed);
        sums[Algorithm::ALL.len()] += sol.obj;
        migrations[Algorithm::ALL.len()] += sol.batches.len();
    }
    let names = Algorithm::ALL.iter().map(|a| a.name()).chain(["oracle"]);
    println!("{:<8} {:>10} {:>10}", "", "mean obj", "batches");
    for ((name, s), m) in names.zip(sums).zip(migrations) {
        println!("{name:<8} {:>10.1} {:>10.2}", s / reps as f64, m as f64 / reps as f64);
    }
}
