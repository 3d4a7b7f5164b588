mod common;

use common::{host, tiny, topology, vm, Tiny};
use greenshift::energy::{Datacenter, EnergyModel, VmRequest};
use greenshift::exact::{build_ilp, export_lp, solve_exact, verify_solution, ExactInstance, ExactLimits, VarFamily};
use greenshift::heuristics::{run_cycle, Algorithm, NetworkParams};
use greenshift::spectrum::{slots_for_bandwidth, SlotRange, SpectrumGrid};
use greenshift::topology::{k_shortest_paths, modulation_level, NodeId, Path};
use greenshift::workload::ScenarioDraw;

/// Brute force over every assignment, every batch order, every path and
/// every start slot. Shares nothing with the solver but the grid.
fn enumerate_optimum(t: &Tiny) -> f64 {
    let dcs = &t.dcs;
    let n = dcs.len();
    let reqs = &t.requests;
    let p = &t.params;
    // Each request: usize::MAX stays, otherwise destination index.
    let mut best = f64::INFINITY;
    let total = (n).pow(reqs.len() as u32);
    for code in 0..total {
        let mut c = code;
        let mut dest = Vec::new();
        for r in reqs {
            let k = c % n;
            c /= n;
            let home = dcs.iter().position(|d| d.id == r.home_dc).unwrap();
            dest.push(if k == home { usize::MAX } else { k });
        }
        // One batch per source: all leavers must share a destination.
        let mut batches: Vec<(usize, usize, Vec<&VmRequest>)> = Vec::new();
        let mut ok = true;
        for (r, &d) in reqs.iter().zip(&dest) {
            if d == usize::MAX {
                continue;
            }
            let s = dcs.iter().position(|x| x.id == r.home_dc).unwrap();
            match batches.iter_mut().find(|b| b.0 == s) {
                Some(b) if b.1 == d => b.2.push(r),
                Some(_) => ok = false,
                None => batches.push((s, d, vec![r])),
            }
        }
        if !ok {
            continue;
        }
        let mut obj = 0.0;
        for (m, dc) in dcs.iter().enumerate() {
            let cores: u32 = reqs
                .iter()
                .zip(&dest)
                .filter(|(r, d)| if **d == usize::MAX { r.home_dc == dc.id } else { **d == m })
                .map(|(r, _)| r.cores)
                .sum();
            if cores > 16 {
                ok = false;
            }
            obj += dc.energy_price * (t.model.power.server_power(cores.min(16), 16) - dc.renewable_budget).max(0.0);
        }
        for (s, _, vms) in &batches {
            obj += dcs[*s].migration_price * (vms.iter().map(|v| v.bandwidth_gbps).sum::<f64>() + 1.0);
        }
        if !ok || obj >= best {
            continue;
        }
        let jobs: Vec<(Vec<Path>, f64)> = batches
            .iter()
            .map(|(s, d, vms)| {
                (k_shortest_paths(&t.topo, dcs[*s].id, dcs[*d].id, p.k_paths), vms.iter().map(|v| v.bandwidth_gbps).sum())
            })
            .collect();
        if place_any(&jobs, &mut vec![false; jobs.len()], &mut t.grid.clone(), p) {
            best = obj;
        }
    }
    best
}

fn place_any(jobs: &[(Vec<Path>, f64)], done: &mut Vec<bool>, grid: &mut SpectrumGrid, p: &NetworkParams) -> bool {
    if done.iter().all(|&d| d) {
        return true;
    }
    for j in 0..jobs.len() {
        if done[j] {
            continue;
        }
        for path in &jobs[j].0 {
            let level = modulation_level(path, &p.modulation);
            if jobs[j].1 > p.kappa_gbps * f64::from(level) + 1e-9 {
                continue;
            }
            let width = slots_for_bandwidth(jobs[j].1, level, p.slot_rate_gbps);
            for start in 1..=grid.slot_capacity() {
                let range = SlotRange { start, width, guard: p.guard_slots };
                if grid.allocate_at(path, range, p.umax).is_ok() {
                    done[j] = true;
                    if place_any(jobs, done, grid, p) {
                        return true;
                    }
                    done[j] = false;
                    grid.release(path, range).unwrap();
                }
            }
        }
    }
    false
}

fn two_dc() -> (greenshift::topology::Topology, Vec<Datacenter>, Vec<VmRequest>) {
    let topo = topology(&[1, 2], &[(1, 2, 500.0)], &[1, 2], 20);
    let requests = vec![vm(1, 1, 4, 10.0)];
    let mut dcs = vec![Datacenter::new(NodeId(1), 2, 16, 10.0, 0.1, 0.0), Datacenter::new(NodeId(2), 2, 16, 10.0, 0.1, 1000.0)];
    host(&mut dcs, &requests);
    (topo, dcs, requests)
}

fn instance<'t>(topo: &'t greenshift::topology::Topology, dcs: &[Datacenter], requests: &[VmRequest], h: usize) -> ExactInstance<'t> {
    let params = NetworkParams { k_paths: 1, h_max: Some(h), ..NetworkParams::default() };
    ExactInstance::new(topo, SpectrumGrid::for_topology(topo, 12.5), dcs.to_vec(), requests.to_vec(), EnergyModel::default(), params)
}

#[test]
fn forced_migration_matches_hand_value() {
    let (topo, dcs, requests) = two_dc();
    let inst = instance(&topo, &dcs, &requests, 1);
    let sol = solve_exact(&inst, ExactLimits::default());
    assert!(sol.is_optimal());
    // Home keeps 2 idle servers at 140 W with no renewable budget, and the
    // 4-core VM adds 25 W. Moving it costs 0.1 * (10 + 1).
    assert!((sol.obj_no_migration - 10.0 * 305.0).abs() < 1e-9);
    assert!((sol.obj - (10.0 * 280.0 + 1.1)).abs() < 1e-9, "{}", sol.obj);
    assert!((sol.obj2 - 2800.0).abs() < 1e-9);
    assert_eq!(sol.batches.len(), 1);
    assert!(verify_solution(&inst, &sol).is_empty());
}

#[test]
fn no_deficit_means_no_migration() {
    let (topo, mut dcs, requests) = two_dc();
    dcs[0].renewable_budget = 1e6;
    let inst = instance(&topo, &dcs, &requests, 1);
    let sol = solve_exact(&inst, ExactLimits::default());
    assert!(sol.is_optimal());
    assert_eq!(sol.obj, sol.obj_no_migration);
    assert!(sol.batches.is_empty());
}

#[test]
fn node_limit_reports_not_solved() {
    let t = tiny(3);
    let sol = solve_exact(&t.instance(), ExactLimits { max_nodes: 0, ..ExactLimits::default() });
    assert!(!sol.is_optimal());
    assert!(sol.obj <= sol.obj_no_migration);
}

#[test]
fn oracle_matches_full_enumeration_on_tiny_instances() {
    for seed in 0..60 {
        let t = tiny(seed);
        let inst = t.instance();
        let sol = solve_exact(&inst, ExactLimits::default());
        assert!(sol.is_optimal(), "seed {seed}");
        let violations = verify_solution(&inst, &sol);
        assert!(violations.is_empty(), "seed {seed}: {violations:?}");
        let brute = enumerate_optimum(&t);
        assert!((sol.obj - brute).abs() < 1e-6, "seed {seed}: oracle {} enumeration {brute}", sol.obj);
    }
}

#[test]
fn oracle_solution_satisfies_every_model_row() {
    for seed in 0..40 {
        let mut t = tiny(seed);
        // Row-level agreement is exact without background or a cap.
        t.grid = SpectrumGrid::for_topology(&t.topo, 12.5);
        t.params.umax = 1.0;
        let inst = t.instance();
        let sol = solve_exact(&inst, ExactLimits::default());
        let model = build_ilp(&inst, 1_000_000).unwrap();
        let values = model.assignment_for(&inst, &sol).expect("solution maps onto the model");
        assert_eq!(model.violations(&values), Vec::<String>::new(), "seed {seed}");
        assert!((model.objective_value(&values) - sol.obj).abs() < 1e-6, "seed {seed}");
    }
}

#[test]
fn oracle_never_loses_to_a_heuristic() {
    for seed in 100..140 {
        let t = tiny(seed);
        let inst = t.instance();
        let sol = solve_exact(&inst, ExactLimits::default());
        let draw = ScenarioDraw { dcs: t.dcs.clone(), requests: t.requests.clone(), rejected: 0, rng_seed: seed };
        for alg in Algorithm::ALL {
            let out = run_cycle(&t.topo, t.grid.clone(), &draw, &t.model, &t.params, alg);
            assert!(sol.obj <= out.report.obj + 1e-6, "seed {seed} {alg}: oracle {} heuristic {}", sol.obj, out.report.obj);
        }
    }
}

#[test]
fn hand_counted_columns() {
    let (topo, dcs, requests) = two_dc();
    let model = build_ilp(&instance(&topo, &dcs, &requests, 1), 10_000).unwrap();
    let counts: Vec<usize> = [
        VarFamily::X,
        VarFamily::Z,
        VarFamily::Omega,
        VarFamily::Y,
        VarFamily::Theta,
        VarFamily::B,
        VarFamily::F,
        VarFamily::Delta,
        VarFamily::Phi,
    ]
    .iter()
    .map(|&f| model.count(f))
    .collect();
    assert_eq!(counts, vec![2, 1, 2, 2, 2, 2, 2, 1, 2]);
    assert_eq!(model.count(VarFamily::Active), 0);
}

#[test]
fn single_dc_model_pins_z_to_zero() {
    let topo = topology(&[1, 2], &[(1, 2, 500.0)], &[1], 20);
    let requests = vec![vm(1, 1, 4, 10.0)];
    let mut dcs = vec![Datacenter::new(NodeId(1), 1, 16, 10.0, 0.1, 0.0)];
    host(&mut dcs, &requests);
    let inst = instance(&topo, &dcs, &requests, 1);
    let model = build_ilp(&inst, 10_000).unwrap();
    let eq5 = model.rows.iter().find(|r| r.tag == 5).unwrap();
    assert_eq!(eq5.terms.len(), 1);
    assert_eq!(model.variables[eq5.terms[0].0].family, VarFamily::Z);
    let sol = solve_exact(&inst, ExactLimits::default());
    assert_eq!(sol.obj, sol.obj_no_migration);
    let text = export_lp(&model);
    assert!(text.starts_with("\\ ") && text.ends_with("End\n"));
}

#[test]
fn row_budget_is_enforced() {
    let (topo, dcs, requests) = two_dc();
    let err = build_ilp(&instance(&topo, &dcs, &requests, 1), 5).unwrap_err();
    assert!(err.to_string().contains("budget is 5"));
}

#[test]
fn lp_export_is_deterministic_and_tagged() {
    let (topo, dcs, requests) = two_dc();
    let inst = instance(&topo, &dcs, &requests, 1);
    let a = export_lp(&build_ilp(&inst, 10_000).unwrap());
    let b = export_lp(&build_ilp(&inst, 10_000).unwrap());
    assert_eq!(a, b);
    for tag in 4..=22 {
        assert!(a.contains(&format!("\\ eq{tag}\n")), "missing eq{tag}");
    }
    for section in ["Minimize\n", "Subject To\n", "Bounds\n", "Generals\n", "Binaries\n", "End\n"] {
        assert!(a.contains(section));
    }
}
