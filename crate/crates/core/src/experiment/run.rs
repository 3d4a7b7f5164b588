use std::fs;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::snapshot::{DcState, Snapshot};
use super::spec::{ExperimentSpec, SpecError};
use crate::energy::{pack_exact, Datacenter, VmRequest};
use crate::exact::{solve_exact, ExactInstance};
use crate::heuristics::run_cycle;
use crate::spectrum::SpectrumGrid;
use crate::topology::Topology;
use crate::workload::{generate_requests, ScenarioDraw};

/// Environment variable that sets the worker thread count.
pub const THREADS_ENV: &str = "GREENSHIFT_THREADS";

pub const STATUS_FILE: &str = "STATUS";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const SPEC_FILE: &str = "spec.toml";
pub const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

/// One (algorithm, υ_max, load, replication) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    pub umax: f64,
    pub load: f64,
    pub replication: u64,
    pub seed: u64,
    pub obj: f64,
    pub obj2: f64,
    pub obj2_before: f64,
    pub relaxed_obj2: f64,
    pub migrations: usize,
    pub migrated_vms: usize,
    pub blocked: usize,
    /// Wall-clock time; kept out of `results.csv` so that file is
    /// reproducible byte for byte.
    #[serde(skip)]
    pub runtime_ms: f64,
}

/// Mean and sample standard deviation per (algorithm, υ_max, load).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub umax: f64,
    pub load: f64,
    pub n: usize,
    pub obj_mean: f64,
    pub obj_sd: f64,
    pub obj2_mean: f64,
    pub obj2_sd: f64,
    pub migrations_mean: f64,
    pub migrations_sd: f64,
    pub blocked_mean: f64,
    pub blocked_sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TimingRow<'a> {
    algorithm: &'a str,
    umax: f64,
    load: f64,
    replication: u64,
    runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by (algorithm, υ_max, load), keeping first-seen order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, f64, f64)> = Vec::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.umax, r.load);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(algorithm, umax, load)| {
            let cell: Vec<&ResultRow> =
                rows.iter().filter(|r| r.algorithm == algorithm && r.umax == umax && r.load == load).collect();
            let pick = |f: &dyn Fn(&ResultRow) -> f64| mean_sd(&cell.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (obj_mean, obj_sd) = pick(&|r| r.obj);
            let (obj2_mean, obj2_sd) = pick(&|r| r.obj2);
            let (migrations_mean, migrations_sd) = pick(&|r| r.migrations as f64);
            let (blocked_mean, blocked_sd) = pick(&|r| r.blocked as f64);
            SummaryRow {
                algorithm,
                umax,
                load,
                n: cell.len(),
                obj_mean,
                obj_sd,
                obj2_mean,
                obj2_sd,
                migrations_mean,
                migrations_sd,
                blocked_mean,
                blocked_sd,
            }
        })
        .collect()
}

fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

struct UnitOutput {
    rows: Vec<ResultRow>,
    snapshots: Vec<Snapshot>,
}

fn oracle_dcs(draw: &ScenarioDraw, placement: &[(crate::energy::VmId, crate::energy::DcId)]) -> Vec<Datacenter> {
    draw.dcs
        .iter()
        .map(|dc| {
            let mut out = dc.clone();
            let vms: Vec<&VmRequest> = placement
                .iter()
                .filter(|(_, at)| *at == dc.id)
                .filter_map(|(id, _)| draw.request(*id))
                .collect();
            let cores: Vec<u32> = vms.iter().map(|v| v.cores).collect();
            for s in &mut out.servers {
                *s = Default::default();
            }
            if let Some(assign) = pack_exact(&cores, dc.num_servers(), dc.cores_per_server) {
                for (v, s) in vms.iter().zip(assign) {
                    out.servers[s].used_cores += v.cores;
                    out.servers[s].hosted.insert(v.id);
                }
            }
            out
        })
        .collect()
}

fn run_unit(spec: &ExperimentSpec, topo: &Topology, load: f64, replication: u64) -> Result<UnitOutput, RunError> {
    let config = spec.scenario(load, replication);
    let draw = generate_requests(&config, topo.dc_nodes()).map_err(|e| RunError::Scenario(e.to_string()))?;
    let model = config.energy_model();
    let fresh = || SpectrumGrid::for_topology(topo, spec.slot_rate_gbps);
    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    for &umax in &spec.umax {
        let params = spec.network(umax);
        for &alg in &spec.algorithms {
            let out = run_cycle(topo, fresh(), &draw, &model, &params, alg);
            let r = &out.report;
            rows.push(ResultRow {
                algorithm: alg.name().to_string(),
                umax,
                load,
                replication,
                seed: config.seed,
                obj: r.obj,
                obj2: r.obj2,
                obj2_before: r.obj2_before,
                relaxed_obj2: r.relaxed_obj2,
                migrations: r.migrations,
                migrated_vms: r.migrated_vms,
                blocked: r.blocked,
                runtime_ms: out.runtime.as_secs_f64() * 1e3,
            });
            if spec.snapshots {
                snapshots.push(Snapshot {
                    algorithm: alg.name().to_string(),
                    umax,
                    load,
                    replication,
                    seed: config.seed,
                    topology: topo.to_spec(),
                    params: params.clone(),
                    model,
                    requests: draw.requests.clone(),
                    final_location: out.requests.iter().map(|v| (v.id, v.location())).collect(),
                    dcs: out.dcs.iter().map(DcState::of).collect(),
                    batches: out.log.batches.clone(),
                    obj: r.obj,
                    obj2: r.obj2,
                });
            }
        }
        if spec.oracle {
            let started = std::time::Instant::now();
            let inst = ExactInstance::from_draw(topo, fresh(), &draw, model, params.clone());
            let sol = solve_exact(&inst, spec.oracle_limits);
            let name = if sol.is_optimal() { "oracle" } else { "oracle-unsolved" };
            rows.push(ResultRow {
                algorithm: name.to_string(),
                umax,
                load,
                replication,
                seed: config.seed,
                obj: sol.obj,
                obj2: sol.obj2,
                obj2_before: sol.obj_no_migration,
                relaxed_obj2: rows.last().map_or(f64::NAN, |r| r.relaxed_obj2),
                migrations: sol.batches.len(),
                migrated_vms: sol.batches.iter().map(|b| b.vms.len()).sum(),
                blocked: 0,
                runtime_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            if spec.snapshots {
                let dcs = oracle_dcs(&draw, &sol.placement);
                snapshots.push(Snapshot {
                    algorithm: name.to_string(),
                    umax,
                    load,
                    replication,
                    seed: config.seed,
                    topology: topo.to_spec(),
                    params: params.clone(),
                    model,
                    requests: draw.requests.clone(),
                    final_location: sol.placement.clone(),
                    dcs: dcs.iter().map(DcState::of).collect(),
                    batches: sol.batches.clone(),
                    obj: sol.obj,
                    obj2: sol.obj2,
                });
            }
        }
    }
    Ok(UnitOutput { rows, snapshots })
}

/// Runs the full sweep in memory. Rows come out ordered by υ_max, load,
/// replication and then algorithm, whatever the thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunOutput, RunError> {
    run_inner(spec, None)
}

fn run_inner(spec: &ExperimentSpec, snapshot_dir: Option<&FsPath>) -> Result<RunOutput, RunError> {
    spec.validate()?;
    let topo = spec.load_topology()?;
    let units: Vec<(usize, f64, u64)> = spec
        .loads
        .iter()
        .enumerate()
        .flat_map(|(li, &load)| (0..spec.replications).map(move |r| (li, load, r)))
        .collect();
    let outputs: Vec<UnitOutput> = thread_pool().install(|| {
        units
            .par_iter()
            .map(|&(_, load, rep)| {
                let out = run_unit(spec, &topo, load, rep)?;
                if let Some(dir) = snapshot_dir {
                    for s in &out.snapshots {
                        let path = dir.join(s.file_name());
                        let text = serde_json::to_string_pretty(s).expect("snapshot serializes");
                        fs::write(&path, text).map_err(io_err(&path))?;
                    }
                }
                Ok(UnitOutput { rows: out.rows, snapshots: Vec::new() })
            })
            .collect::<Result<Vec<_>, RunError>>()
    })?;
    let mut rows: Vec<ResultRow> = outputs.into_iter().flat_map(|o| o.rows).collect();
    let umax_rank = |u: f64| spec.umax.iter().position(|&x| x == u).unwrap_or(usize::MAX);
    let load_rank = |l: f64| spec.loads.iter().position(|&x| x == l).unwrap_or(usize::MAX);
    let alg_rank = |a: &str| {
        spec.algorithms.iter().position(|x| x.name() == a).unwrap_or(spec.algorithms.len())
    };
    rows.sort_by(|a, b| {
        (umax_rank(a.umax), load_rank(a.load), a.replication, alg_rank(&a.algorithm))
            .cmp(&(umax_rank(b.umax), load_rank(b.load), b.replication, alg_rank(&b.algorithm)))
    });
    let summary = summarize(&rows);
    Ok(RunOutput { rows, summary })
}

fn write_csv<T: Serialize>(path: &FsPath, rows: impl IntoIterator<Item = T>) -> Result<(), RunError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))
}

fn set_status(dir: &FsPath, status: &str) -> Result<(), RunError> {
    let path = dir.join(STATUS_FILE);
    fs::write(&path, format!("{status}\n")).map_err(io_err(&path))
}

/// Runs the sweep and writes `results.csv`, `summary.csv`, `timings.csv`,
/// the resolved `spec.toml` and, if enabled, JSON snapshots into `dir`.
///
/// `STATUS` reads `running` until every file is written, then `complete`.
/// A failed run leaves `incomplete: <reason>` behind.
pub fn run_to_dir(spec: &ExperimentSpec, dir: &FsPath) -> Result<RunOutput, RunError> {
    spec.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    set_status(dir, "running")?;
    let result = (|| {
        let spec_path = dir.join(SPEC_FILE);
        fs::write(&spec_path, spec.to_toml()).map_err(io_err(&spec_path))?;
        let snaps = dir.join(SNAPSHOT_DIR);
        if spec.snapshots {
            fs::create_dir_all(&snaps).map_err(io_err(&snaps))?;
        }
        let out = run_inner(spec, spec.snapshots.then_some(snaps.as_path()))?;
        write_csv(&dir.join(RESULTS_FILE), &out.rows)?;
        write_csv(&dir.join(SUMMARY_FILE), &out.summary)?;
        write_csv(
            &dir.join(TIMINGS_FILE),
            out.rows.iter().map(|r| TimingRow {
                algorithm: &r.algorithm,
                umax: r.umax,
                load: r.load,
                replication: r.replication,
                runtime_ms: r.runtime_ms,
            }),
        )?;
        Ok(out)
    })();
    match &result {
        Ok(_) => set_status(dir, "complete")?,
        Err(e) => set_status(dir, &format!("incomplete: {e}"))?,
    }
    result
}

pub fn read_results(dir: &FsPath) -> Result<Vec<ResultRow>, RunError> {
    let mut r = csv::Reader::from_path(dir.join(RESULTS_FILE))?;
    r.deserialize().collect::<Result<Vec<ResultRow>, _>>().map_err(RunError::from)
}
