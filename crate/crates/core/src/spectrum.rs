//! Per-link spectrum-slot bookkeeping and routing-and-spectrum-assignment
//! feasibility: continuity, non-overlap, guard bands and the congestion cap.
//!
//! Slot indices are 1-based. A lightpath occupies `width` payload slots
//! followed by `guard` guard slots, at identical indices on every link of
//! its path. The congestion ratio of a path counts every slot index that is
//! occupied on at least one of its links.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{LinkId, Path, Topology};

const EPS: f64 = 1e-9;

/// Number of slots needed to carry `gbps` at modulation level `level` over
/// slots of `slot_rate_gbps` each: `ceil(gbps / (level * slot_rate))`.
pub fn slots_for_bandwidth(gbps: f64, level: u8, slot_rate_gbps: f64) -> usize {
    let exact = gbps / (f64::from(level) * slot_rate_gbps);
    (exact - EPS).ceil().max(1.0) as usize
}

/// Slots available to migration traffic on a link under cap `umax`.
pub fn slot_budget(slot_capacity: usize, umax: f64) -> usize {
    ((umax * slot_capacity as f64) + EPS).floor() as usize
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotState {
    Free,
    Payload,
    Guard,
}

/// Which slots count toward the congestion ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CongestionAccounting {
    /// Guard slots consume spectrum and are counted.
    #[default]
    IncludeGuard,
    /// Only payload slots are counted (sensitivity runs).
    PayloadOnly,
}

/// Contiguous allocation: payload `[start, start + width)` followed by
/// `guard` guard slots.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub start: usize,
    pub width: usize,
    pub guard: usize,
}

impl SlotRange {
    pub fn span(&self) -> usize {
        self.width + self.guard
    }

    /// Last slot index covered, guard included.
    pub fn last(&self) -> usize {
        self.start + self.span() - 1
    }

    pub fn payload_last(&self) -> usize {
        self.start + self.width - 1
    }

    /// Slots counted toward congestion under `mode`.
    pub fn counted_slots(&self, mode: CongestionAccounting) -> usize {
        match mode {
            CongestionAccounting::IncludeGuard => self.span(),
            CongestionAccounting::PayloadOnly => self.width,
        }
    }
}

impl fmt::Display for SlotRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{}]+{}g", self.start, self.payload_last(), self.guard)
    }
}

/// Why an allocation was refused.
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum Blocked {
    #[error("no contiguous run of {span} slots is free on every link of the path")]
    NoContiguousRun { span: usize },
    #[error("allocation would push the path beyond the congestion cap")]
    CongestionCap,
    #[error("allocation does not fit inside the link capacity")]
    OutOfRange,
    #[error("requested width is zero")]
    ZeroWidth,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum ReleaseError {
    #[error("slot {slot} on link {link} is not held by the released range")]
    NotAllocated { link: LinkId, slot: usize },
    #[error("range {0} exceeds the link capacity")]
    OutOfRange(SlotRange),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    links: Vec<Vec<SlotState>>,
    slot_capacity: usize,
    slot_rate_gbps: f64,
    accounting: CongestionAccounting,
}

impl SpectrumGrid {
    pub fn new(num_links: usize, slot_capacity: usize, slot_rate_gbps: f64) -> Self {
        SpectrumGrid {
            links: vec![vec![SlotState::Free; slot_capacity]; num_links],
            slot_capacity,
            slot_rate_gbps,
            accounting: CongestionAccounting::default(),
        }
    }

    pub fn for_topology(topo: &Topology, slot_rate_gbps: f64) -> Self {
        Self::new(topo.links().len(), topo.slot_capacity(), slot_rate_gbps)
    }

    pub fn with_accounting(mut self, accounting: CongestionAccounting) -> Self {
        self.accounting = accounting;
        self
    }

    pub fn slot_capacity(&self) -> usize {
        self.slot_capacity
    }

    pub fn slot_rate_gbps(&self) -> f64 {
        self.slot_rate_gbps
    }

    pub fn accounting(&self) -> CongestionAccounting {
        self.accounting
    }

    pub fn num_links(&self) -> usize {
        self.links.len()
    }

    /// State of 1-based `slot` on `link`.
    pub fn slot(&self, link: LinkId, slot: usize) -> SlotState {
        self.links[link][slot - 1]
    }

    fn counts(&self, s: SlotState) -> bool {
        match self.accounting {
            CongestionAccounting::IncludeGuard => s != SlotState::Free,
            CongestionAccounting::PayloadOnly => s == SlotState::Payload,
        }
    }

    /// Counted slots on a single link.
    pub fn link_used(&self, link: LinkId) -> usize {
        self.links[link].iter().filter(|&&s| self.counts(s)).count()
    }

    /// Counted slot indices over the union of the path's links.
    pub fn path_used_slots(&self, path: &Path) -> usize {
        (0..self.slot_capacity)
            .filter(|&i| path.links().iter().any(|&l| self.counts(self.links[l][i])))
            .count()
    }

    /// `υ_p`: fraction of slot indices occupied on at least one link of `path`.
    pub fn path_occupancy_ratio(&self, path: &Path) -> f64 {
        self.path_used_slots(path) as f64 / self.slot_capacity as f64
    }

    /// True iff `υ_p + additional / c_e <= umax`.
    pub fn congestion_feasible(&self, path: &Path, additional_slots: usize, umax: f64) -> bool {
        self.path_used_slots(path) + additional_slots <= slot_budget(self.slot_capacity, umax)
    }

    fn free_on_path(&self, path: &Path, idx: usize) -> bool {
        path.links().iter().all(|&l| self.links[l][idx] == SlotState::Free)
    }

    /// True iff slots `[start, start + span)` are free on every link of `path`.
    pub fn is_range_free(&self, path: &Path, start: usize, span: usize) -> bool {
        start >= 1
            && start + span - 1 <= self.slot_capacity
            && (start - 1..start - 1 + span).all(|i| self.free_on_path(path, i))
    }

    fn mark(&mut self, path: &Path, range: SlotRange) {
        for &l in path.links() {
            let slots = &mut self.links[l];
            for i in range.start - 1..range.start - 1 + range.width {
                slots[i] = SlotState::Payload;
            }
            for i in range.start - 1 + range.width..range.last() {
                slots[i] = SlotState::Guard;
            }
        }
    }

    /// Lowest-index allocation of `width` payload slots plus `guard` guard
    /// slots that is free on every link of `path` and keeps the path within
    /// the congestion cap. Leaves the grid untouched when blocked.
    pub fn first_fit_allocate(
        &mut self,
        path: &Path,
        width: usize,
        guard: usize,
        umax: f64,
    ) -> Result<SlotRange, Blocked> {
        if width == 0 {
            return Err(Blocked::ZeroWidth);
        }
        let span = width + guard;
        if span > self.slot_capacity {
            return Err(Blocked::OutOfRange);
        }
        let probe = SlotRange { start: 1, width, guard };
        // New slots are free on every link, so the union grows by exactly
        // the counted span wherever the range lands.
        if !self.congestion_feasible(path, probe.counted_slots(self.accounting), umax) {
            return Err(Blocked::CongestionCap);
        }
        let mut run = 0;
        for idx in 0..self.slot_capacity {
            if self.free_on_path(path, idx) {
                run += 1;
                if run == span {
                    let range = SlotRange { start: idx + 2 - span, width, guard };
                    self.mark(path, range);
                    return Ok(range);
                }
            } else {
                run = 0;
            }
        }
        Err(Blocked::NoContiguousRun { span })
    }

    /// Places `range` at a fixed position, subject to the same checks as
    /// first-fit.
    pub fn allocate_at(&mut self, path: &Path, range: SlotRange, umax: f64) -> Result<(), Blocked> {
        if range.width == 0 {
            return Err(Blocked::ZeroWidth);
        }
        if range.start == 0 || range.last() > self.slot_capacity {
            return Err(Blocked::OutOfRange);
        }
        if !self.is_range_free(path, range.start, range.span()) {
            return Err(Blocked::NoContiguousRun { span: range.span() });
        }
        if !self.congestion_feasible(path, range.counted_slots(self.accounting), umax) {
            return Err(Blocked::CongestionCap);
        }
        self.mark(path, range);
        Ok(())
    }

    /// Frees a live allocation. Every slot of `range` must currently hold
    /// the matching payload/guard state on every link of `path`.
    pub fn release(&mut self, path: &Path, range: SlotRange) -> Result<(), ReleaseError> {
        if range.start == 0 || range.span() == 0 || range.last() > self.slot_capacity {
            return Err(ReleaseError::OutOfRange(range));
        }
        for &l in path.links() {
            for slot in range.start..=range.last() {
                let expected = if slot <= range.payload_last() { SlotState::Payload } else { SlotState::Guard };
                if self.links[l][slot - 1] != expected {
                    return Err(ReleaseError::NotAllocated { link: l, slot });
                }
            }
        }
        for &l in path.links() {
            for slot in range.start..=range.last() {
                self.links[l][slot - 1] = SlotState::Free;
            }
        }
        Ok(())
    }

    /// `A(p)`: longest run of slots free on every link of `path`, clamped to
    /// what the congestion cap still allows on that path.
    pub fn available_contiguous_bandwidth(&self, path: &Path, umax: f64) -> usize {
        let mut best = 0;
        let mut run = 0;
        for idx in 0..self.slot_capacity {
            if self.free_on_path(path, idx) {
                run += 1;
                best = best.max(run);
            } else {
                run = 0;
            }
        }
        let headroom = slot_budget(self.slot_capacity, umax).saturating_sub(self.path_used_slots(path));
        best.min(headroom)
    }

    /// Marks `[start, start + len)` on one link as occupied by foreign
    /// traffic. Already occupied slots are left as they are.
    pub fn preoccupy(&mut self, link: LinkId, start: usize, len: usize) {
        let end = (start + len - 1).min(self.slot_capacity);
        for slot in start.max(1)..=end {
            if self.links[link][slot - 1] == SlotState::Free {
                self.links[link][slot - 1] = SlotState::Payload;
            }
        }
    }

    /// Pre-occupies random slot runs until every link carries roughly
    /// `fraction` of its capacity as background traffic.
    pub fn fill_background<R: Rng>(&mut self, rng: &mut R, fraction: f64, max_run: usize) {
        let target = (fraction.clamp(0.0, 1.0) * self.slot_capacity as f64).round() as usize;
        for link in 0..self.links.len() {
            let mut guard_iters = 0;
            while self.link_used(link) < target && guard_iters < 10 * self.slot_capacity {
                let len = rng.random_range(1..=max_run.max(1));
                let start = rng.random_range(1..=self.slot_capacity);
                let room = target - self.link_used(link);
                self.preoccupy(link, start, len.min(room));
                guard_iters += 1;
            }
        }
    }
}

/// A live lightpath as recorded by a migration log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lightpath {
    pub path: Path,
    pub range: SlotRange,
}

/// One RSA invariant breach found by [`audit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RsaViolation {
    Overlap { link: LinkId, slot: usize, first: usize, second: usize },
    GuardGap { link: LinkId, first: usize, second: usize, gap: usize },
    Continuity { lightpath: usize, link: LinkId, slot: usize },
    OutOfRange { lightpath: usize },
    Cap { link: LinkId, used: usize, budget: usize },
}

impl fmt::Display for RsaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RsaViolation::Overlap { link, slot, first, second } => {
                write!(f, "lightpaths {first} and {second} overlap on link {link} at slot {slot}")
            }
            RsaViolation::GuardGap { link, first, second, gap } => {
                write!(f, "lightpaths {first} and {second} on link {link} are only {gap} slots apart")
            }
            RsaViolation::Continuity { lightpath, link, slot } => {
                write!(f, "lightpath {lightpath} is not present on link {link} at slot {slot}")
            }
            RsaViolation::OutOfRange { lightpath } => write!(f, "lightpath {lightpath} exceeds capacity"),
            RsaViolation::Cap { link, used, budget } => {
                write!(f, "link {link} uses {used} slots, cap is {budget}")
            }
        }
    }
}

/// Checks non-overlap, guard separation and continuity of `lightpaths`
/// against `grid`, and the per-link congestion cap. Slots occupied in the
/// grid but not covered by any lightpath are treated as background.
pub fn audit(grid: &SpectrumGrid, lightpaths: &[Lightpath], guard: usize, umax: f64) -> Vec<RsaViolation> {
    let mut out = Vec::new();
    let cap = grid.slot_capacity();
    let mut owner: Vec<Vec<Option<usize>>> = vec![vec![None; cap]; grid.num_links()];
    let mut payloads: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); grid.num_links()];
    for (i, lp) in lightpaths.iter().enumerate() {
        let r = lp.range;
        if r.start == 0 || r.width == 0 || r.last() > cap {
            out.push(RsaViolation::OutOfRange { lightpath: i });
            continue;
        }
        for &l in lp.path.links() {
            payloads[l].push((r.start, r.payload_last(), i));
            for slot in r.start..=r.last() {
                match owner[l][slot - 1] {
                    Some(first) => out.push(RsaViolation::Overlap { link: l, slot, first, second: i }),
                    None => owner[l][slot - 1] = Some(i),
                }
                if grid.slot(l, slot) == SlotState::Free {
                    out.push(RsaViolation::Continuity { lightpath: i, link: l, slot });
                }
            }
        }
    }
    for (link, list) in payloads.iter_mut().enumerate() {
        list.sort();
        for w in list.windows(2) {
            let (_, end_a, a) = w[0];
            let (start_b, _, b) = w[1];
            if start_b > end_a {
                let gap = start_b - end_a - 1;
                if gap < guard {
                    out.push(RsaViolation::GuardGap { link, first: a, second: b, gap });
                }
            }
        }
    }
    let budget = slot_budget(cap, umax);
    for link in 0..grid.num_links() {
        let used = grid.link_used(link);
        if used > budget {
            out.push(RsaViolation::Cap { link, used, budget });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{NodeId, TopologySpec};

    fn line(n: u32, cap: usize) -> Topology {
        let nodes: Vec<u32> = (1..=n).collect();
        let links = (1..n).map(|i| (i, i + 1, 100.0)).collect();
        Topology::from_spec(&TopologySpec { name: None, nodes, links, slot_capacity: cap, dc_nodes: vec![] })
            .unwrap()
    }

    fn path(t: &Topology, nodes: &[u32]) -> Path {
        let ids: Vec<NodeId> = nodes.iter().map(|&n| NodeId(n)).collect();
        Path::from_nodes(t, &ids).unwrap()
    }

    #[test]
    fn bandwidth_to_slots() {
        assert_eq!(slots_for_bandwidth(12.5, 1, 12.5), 1);
        assert_eq!(slots_for_bandwidth(20.0, 1, 12.5), 2);
        assert_eq!(slots_for_bandwidth(100.0, 2, 12.5), 4);
        assert_eq!(slots_for_bandwidth(25.0, 1, 12.5), 2);
    }

    #[test]
    fn occupancy_ratio_uses_union() {
        let t = line(3, 300);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        let p1 = path(&t, &[1, 2]);
        let p = path(&t, &[1, 2, 3]);
        assert_eq!(g.path_occupancy_ratio(&p), 0.0);
        g.preoccupy(0, 1, 30);
        assert!((g.path_occupancy_ratio(&p1) - 0.1).abs() < 1e-12);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        g.preoccupy(0, 1, 10);
        g.preoccupy(1, 6, 10);
        assert!((g.path_occupancy_ratio(&p) - 15.0 / 300.0).abs() < 1e-12);
    }

    #[test]
    fn first_fit_examples() {
        let t = line(3, 300);
        let p = path(&t, &[1, 2, 3]);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        assert_eq!(g.first_fit_allocate(&p, 3, 1, 1.0), Ok(SlotRange { start: 1, width: 3, guard: 1 }));

        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        g.preoccupy(1, 1, 4);
        assert_eq!(g.first_fit_allocate(&p, 3, 1, 1.0).unwrap().start, 5);

        let t10 = line(2, 10);
        let p10 = path(&t10, &[1, 2]);
        let mut g = SpectrumGrid::for_topology(&t10, 12.5);
        g.preoccupy(0, 1, 5);
        let before = g.clone();
        assert_eq!(g.first_fit_allocate(&p10, 1, 0, 0.5), Err(Blocked::CongestionCap));
        assert_eq!(g, before);
    }

    #[test]
    fn congestion_boundaries() {
        let t = line(2, 300);
        let p = path(&t, &[1, 2]);
        let g = SpectrumGrid::for_topology(&t, 12.5);
        assert!(g.congestion_feasible(&p, 150, 0.5));
        assert!(!g.congestion_feasible(&p, 151, 0.5));
        assert!(g.congestion_feasible(&p, 300, 1.0));
    }

    #[test]
    fn release_roundtrip_and_errors() {
        let t = line(3, 20);
        let p = path(&t, &[1, 2, 3]);
        let q = path(&t, &[2, 3]);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        let empty = g.clone();
        assert!(g.release(&p, SlotRange { start: 1, width: 2, guard: 1 }).is_err());
        let a = g.first_fit_allocate(&p, 2, 1, 1.0).unwrap();
        let snapshot = g.clone();
        let b = g.first_fit_allocate(&q, 3, 1, 1.0).unwrap();
        assert_eq!(b.start, 4);
        g.release(&q, b).unwrap();
        assert_eq!(g, snapshot);
        let b = g.first_fit_allocate(&q, 3, 1, 1.0).unwrap();
        g.release(&p, a).unwrap();
        assert!((b.start..=b.last()).all(|s| g.slot(1, s) != SlotState::Free));
        g.release(&q, b).unwrap();
        assert_eq!(g, empty);
    }

    #[test]
    fn available_bandwidth_examples() {
        let t = line(3, 300);
        let p = path(&t, &[1, 2, 3]);
        let g = SpectrumGrid::for_topology(&t, 12.5);
        assert_eq!(g.available_contiguous_bandwidth(&p, 1.0), 300);
        assert_eq!(g.available_contiguous_bandwidth(&p, 0.5), 150);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        g.preoccupy(0, 11, 290);
        g.preoccupy(1, 1, 5);
        g.preoccupy(1, 21, 280);
        assert_eq!(g.available_contiguous_bandwidth(&p, 1.0), 5);
    }

    #[test]
    fn payload_only_accounting_ignores_guards() {
        let t = line(2, 10);
        let p = path(&t, &[1, 2]);
        let mut g = SpectrumGrid::for_topology(&t, 12.5).with_accounting(CongestionAccounting::PayloadOnly);
        g.first_fit_allocate(&p, 4, 1, 0.5).unwrap();
        assert_eq!(g.path_used_slots(&p), 4);
        assert_eq!(g.first_fit_allocate(&p, 2, 1, 0.5), Err(Blocked::CongestionCap));
        assert!(g.first_fit_allocate(&p, 1, 1, 0.5).is_ok());
    }

    #[test]
    fn audit_flags_injected_overlap() {
        let t = line(2, 10);
        let p = path(&t, &[1, 2]);
        let mut g = SpectrumGrid::for_topology(&t, 12.5);
        let r = g.first_fit_allocate(&p, 2, 1, 1.0).unwrap();
        let lps = vec![Lightpath { path: p.clone(), range: r }, Lightpath { path: p.clone(), range: r }];
        let v = audit(&g, &lps, 1, 1.0);
        assert!(v.iter().any(|x| matches!(x, RsaViolation::Overlap { link: 0, .. })));
        assert!(audit(&g, &lps[..1], 1, 1.0).is_empty());
    }
}
