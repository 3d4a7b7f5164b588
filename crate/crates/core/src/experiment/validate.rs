use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use super::run::{STATUS_FILE, SNAPSHOT_DIR};
use super::snapshot::Snapshot;
use crate::energy::{DcId, VmId};
use crate::spectrum::{audit, slot_budget, slots_for_bandwidth, Blocked, Lightpath, RsaViolation, SpectrumGrid};
use crate::topology::{modulation_level, Path, Topology};

const TOL: f64 = 1e-6;

pub const CHECKS: [&str; 9] = [
    "run-status",
    "rsa-non-overlap",
    "guard-band",
    "continuity",
    "congestion-cap",
    "energy-capacity",
    "energy-objective",
    "migration-batches",
    "oracle-dominance",
];

/// Outcome of one invariant over every snapshot it was applied to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub checked: usize,
    pub failures: Vec<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn counterexample(&self) -> Option<&str> {
        self.failures.first().map(String::as_str)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.counterexample() {
            None => write!(f, "PASS {} ({} checked)", self.name, self.checked),
            Some(c) => write!(f, "FAIL {} ({} of {} failed): {c}", self.name, self.failures.len(), self.checked),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub snapshots: usize,
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    fn empty() -> Self {
        ValidationReport {
            snapshots: 0,
            checks: CHECKS.iter().map(|n| CheckResult { name: n.to_string(), checked: 0, failures: Vec::new() }).collect(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckResult::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn record(&mut self, name: &str, failure: Option<String>) {
        let c = self.checks.iter_mut().find(|c| c.name == name).expect("known check");
        c.checked += 1;
        c.failures.extend(failure);
    }

    fn record_all(&mut self, name: &str, failures: Vec<String>) {
        let c = self.checks.iter_mut().find(|c| c.name == name).expect("known check");
        c.checked += 1;
        c.failures.extend(failures);
    }

    fn merge(&mut self, other: ValidationReport) {
        self.snapshots += other.snapshots;
        for (mine, theirs) in self.checks.iter_mut().zip(other.checks) {
            mine.checked += theirs.checked;
            mine.failures.extend(theirs.failures);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} snapshots", self.snapshots)?;
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

fn link_name(topo: &Topology, link: usize) -> String {
    match topo.links().get(link) {
        Some(l) => format!("link {link} ({}-{})", l.a, l.b),
        None => format!("link {link}"),
    }
}

fn describe(v: &RsaViolation, topo: &Topology) -> String {
    let text = v.to_string();
    let link = match v {
        RsaViolation::Overlap { link, .. }
        | RsaViolation::GuardGap { link, .. }
        | RsaViolation::Continuity { link, .. }
        | RsaViolation::Cap { link, .. } => *link,
        RsaViolation::OutOfRange { .. } => return text,
    };
    text.replacen(&format!("link {link}"), &link_name(topo, link), 1)
}

/// Applies every per-snapshot invariant to one snapshot. `oracle-dominance`
/// and `run-status` need the whole run and are left unchecked here.
pub fn validate_snapshot(snap: &Snapshot) -> ValidationReport {
    let mut report = ValidationReport::empty();
    report.snapshots = 1;
    let at = format!("seed {} {}", snap.seed, snap.file_name());
    let topo = match Topology::from_spec(&snap.topology) {
        Ok(t) => t,
        Err(e) => {
            report.record("continuity", Some(format!("{at}: topology does not load: {e}")));
            return report;
        }
    };
    let p = &snap.params;

    // Continuity: each stored path must be re-derivable from its nodes.
    let mut continuity = Vec::new();
    for b in &snap.batches {
        match Path::from_nodes(&topo, b.path.nodes()) {
            None => continuity.push(format!("{at}: batch {} path {} is not a walk in the topology", b.index, b.path)),
            Some(derived) if derived.links() != b.path.links() => continuity.push(format!(
                "{at}: batch {} path {} lists links {:?}, nodes give {:?}",
                b.index,
                b.path,
                b.path.links(),
                derived.links()
            )),
            Some(_) => {}
        }
        if b.path.source() != b.source || b.path.target() != b.dest {
            continuity.push(format!("{at}: batch {} path {} does not join {} and {}", b.index, b.path, b.source, b.dest));
        }
    }

    // Replay the commits in order on an empty grid: this is where the cap
    // is enforced, exactly as at commit time.
    let mut grid = SpectrumGrid::new(topo.links().len(), topo.slot_capacity(), p.slot_rate_gbps);
    let mut cap = Vec::new();
    for b in &snap.batches {
        if let Err(Blocked::CongestionCap) = grid.allocate_at(&b.path, b.slot_range, p.umax) {
            let budget = slot_budget(topo.slot_capacity(), p.umax);
            let worst = b.path.links().iter().copied().max_by_key(|&l| grid.link_used(l)).unwrap_or(0);
            cap.push(format!(
                "{at}: batch {} on {} would exceed the cap of {budget} slots ({} used before it)",
                b.index,
                link_name(&topo, worst),
                grid.link_used(worst)
            ));
            // Record it anyway so the later audit sees the real spectrum.
            for &l in b.path.links() {
                grid.preoccupy(l, b.slot_range.start, b.slot_range.span());
            }
        }
    }
    // Audit against a grid that holds exactly the recorded lightpaths.
    let mut marked = SpectrumGrid::new(topo.links().len(), topo.slot_capacity(), p.slot_rate_gbps);
    for b in &snap.batches {
        for &l in b.path.links() {
            let r = b.slot_range;
            if r.start >= 1 && r.last() <= topo.slot_capacity() {
                marked.preoccupy(l, r.start, r.span());
            }
        }
    }
    let lightpaths: Vec<Lightpath> = snap.batches.iter().map(|b| b.lightpath()).collect();
    let mut overlap = Vec::new();
    let mut guard = Vec::new();
    for v in audit(&marked, &lightpaths, p.guard_slots, p.umax) {
        let msg = format!("{at}: {}", describe(&v, &topo));
        match v {
            RsaViolation::Overlap { .. } | RsaViolation::OutOfRange { .. } => overlap.push(msg),
            RsaViolation::GuardGap { .. } => guard.push(msg),
            RsaViolation::Continuity { .. } => continuity.push(msg),
            RsaViolation::Cap { .. } => {
                if cap.is_empty() {
                    cap.push(msg)
                }
            }
        }
    }
    for b in &snap.batches {
        if b.slot_range.guard != p.guard_slots {
            guard.push(format!("{at}: batch {} carries {} guard slots, expected {}", b.index, b.slot_range.guard, p.guard_slots));
        }
    }
    report.record_all("rsa-non-overlap", overlap);
    report.record_all("guard-band", guard);
    report.record_all("continuity", continuity);
    report.record_all("congestion-cap", cap);

    // Batches against the drawn requests.
    let requests: BTreeMap<VmId, _> = snap.requests.iter().map(|r| (r.id, r)).collect();
    let mut location: BTreeMap<VmId, DcId> = requests.iter().map(|(id, r)| (*id, r.home_dc)).collect();
    let mut moved = BTreeSet::new();
    let mut per_source: BTreeMap<DcId, usize> = BTreeMap::new();
    let mut batches = Vec::new();
    let mut migration = 0.0;
    for b in &snap.batches {
        let tag = format!("{at}: batch {} ({} -> {})", b.index, b.source, b.dest);
        let mut theta = 0.0;
        for v in &b.vms {
            match requests.get(v) {
                None => batches.push(format!("{tag}: unknown {v}")),
                Some(r) => {
                    if r.home_dc != b.source {
                        batches.push(format!("{tag}: {v} was not hosted at the source"));
                    }
                    if !moved.insert(*v) {
                        batches.push(format!("{tag}: {v} migrated twice"));
                    }
                    location.insert(*v, b.dest);
                    theta += r.bandwidth_gbps;
                }
            }
        }
        if b.vms.is_empty() {
            batches.push(format!("{tag}: carries no VM"));
        }
        if (theta - b.theta_gbps).abs() > TOL {
            batches.push(format!("{tag}: theta {} but its VMs need {theta}", b.theta_gbps));
        }
        let level = modulation_level(&b.path, &p.modulation);
        if b.theta_gbps > p.kappa_gbps * f64::from(level) + TOL {
            batches.push(format!("{tag}: theta {} exceeds the per-batch cap", b.theta_gbps));
        }
        let width = slots_for_bandwidth(b.theta_gbps, level, p.slot_rate_gbps);
        if b.slot_range.width != width {
            batches.push(format!("{tag}: {} payload slots, bandwidth needs {width}", b.slot_range.width));
        }
        let count = per_source.entry(b.source).or_default();
        *count += 1;
        if let Some(h) = p.h_max {
            if *count > h {
                batches.push(format!("{tag}: source {} sends more than {h} batches", b.source));
            }
        }
        let beta = snap.dcs.iter().find(|d| d.id == b.source).map_or(0.0, |d| d.migration_price);
        migration += beta * (b.theta_gbps + 1.0);
    }
    let claimed: BTreeMap<VmId, DcId> = snap.final_location.iter().copied().collect();
    if claimed != location {
        let diff = location.iter().find(|(v, d)| claimed.get(v) != Some(d));
        batches.push(match diff {
            Some((v, d)) => format!("{at}: batches put {v} at {d}, final location says {:?}", claimed.get(v)),
            None => format!("{at}: final location lists VMs that were never drawn"),
        });
    }
    report.record_all("migration-batches", batches);

    // Energy.
    let mut capacity = Vec::new();
    let mut obj2 = 0.0;
    for dc in &snap.dcs {
        let tag = format!("{at}: {}", dc.id);
        if dc.used.len() != dc.servers {
            capacity.push(format!("{tag}: {} server entries for {} servers", dc.used.len(), dc.servers));
        }
        if let Some((s, u)) = dc.used.iter().enumerate().find(|(_, u)| **u > dc.cores_per_server) {
            capacity.push(format!("{tag}: server {s} uses {u} of {} cores", dc.cores_per_server));
        }
        let hosted: u32 = location.iter().filter(|(_, d)| **d == dc.id).map(|(v, _)| requests[v].cores).sum();
        let used: u32 = dc.used.iter().sum();
        if hosted != used {
            capacity.push(format!("{tag}: servers hold {used} cores, hosted VMs need {hosted}"));
        }
        let power = snap.model.servers_power(dc.used.iter().copied(), dc.cores_per_server);
        obj2 += dc.energy_price * (power - dc.renewable_budget).max(0.0);
    }
    report.record_all("energy-capacity", capacity);
    let mut objective = Vec::new();
    if (obj2 - snap.obj2).abs() > TOL * obj2.abs().max(1.0) {
        objective.push(format!("{at}: brown cost {} recomputes to {obj2}", snap.obj2));
    }
    let obj = obj2 + migration;
    if (obj - snap.obj).abs() > TOL * obj.abs().max(1.0) {
        objective.push(format!("{at}: objective {} recomputes to {obj}", snap.obj));
    }
    report.record_all("energy-objective", objective);
    report
}

/// Oracle objective must not exceed any algorithm's in the same cell.
pub fn check_dominance(snaps: &[Snapshot]) -> CheckResult {
    let mut result = CheckResult { name: "oracle-dominance".into(), checked: 0, failures: Vec::new() };
    for oracle in snaps.iter().filter(|s| s.algorithm == "oracle") {
        for s in snaps.iter().filter(|s| {
            s.algorithm != "oracle"
                && s.algorithm != "oracle-unsolved"
                && s.umax == oracle.umax
                && s.load == oracle.load
                && s.replication == oracle.replication
        }) {
            result.checked += 1;
            if s.obj < oracle.obj - TOL * oracle.obj.abs().max(1.0) {
                result.failures.push(format!(
                    "seed {} {}: {} reaches {} below the oracle's {}",
                    s.seed,
                    s.file_name(),
                    s.algorithm,
                    s.obj,
                    oracle.obj
                ));
            }
        }
    }
    result
}

/// Re-checks a finished run directory: the status marker and, when the
/// run kept snapshots, every invariant on every snapshot.
pub fn validate_run(dir: &FsPath) -> ValidationReport {
    let mut report = ValidationReport::empty();
    let status = fs::read_to_string(dir.join(STATUS_FILE)).map(|s| s.trim().to_string());
    report.record(
        "run-status",
        match &status {
            Ok(s) if s == "complete" => None,
            Ok(s) => Some(format!("{}: status is `{s}`", dir.display())),
            Err(e) => Some(format!("{}: cannot read {STATUS_FILE}: {e}", dir.display())),
        },
    );
    let snap_dir = dir.join(SNAPSHOT_DIR);
    let mut files: Vec<_> = match fs::read_dir(&snap_dir) {
        Ok(entries) => entries
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect(),
        Err(_) => Vec::new(),
    };
    files.sort();
    let mut snaps = Vec::new();
    for path in files {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| serde_json::from_str::<Snapshot>(&t).map_err(|e| e.to_string()));
        match parsed {
            Ok(s) => {
                report.merge(validate_snapshot(&s));
                snaps.push(s);
            }
            Err(e) => {
                report.snapshots += 1;
                report.record("continuity", Some(format!("{}: unreadable snapshot: {e}", path.display())));
            }
        }
    }
    let dominance = check_dominance(&snaps);
    let c = report.checks.iter_mut().find(|c| c.name == "oracle-dominance").expect("known check");
    c.checked += dominance.checked;
    c.failures.extend(dominance.failures);
    report
}
