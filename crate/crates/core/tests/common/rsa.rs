//! An independent slot-occupancy model to check the spectrum grid against.

use greenshift::spectrum::{audit, Blocked, Lightpath, SlotRange, SlotState, SpectrumGrid};
use greenshift::topology::{NodeId, Path};

use super::topology;

/// Independent occupancy model of a line topology `1 - 2 - ... - links+1`.
pub struct Model {
    cap: usize,
    /// `owner[link][slot - 1]`: (lightpath id, is guard).
    owner: Vec<Vec<Option<(usize, bool)>>>,
}

impl Model {
    fn union_used(&self, links: &[usize]) -> usize {
        (0..self.cap).filter(|&i| links.iter().any(|&l| self.owner[l][i].is_some())).count()
    }

    /// Lowest start of a free run of `span` slots on every link, after the
    /// cap check, in the order the allocator reports failures.
    fn first_fit(&self, links: &[usize], width: usize, guard: usize, umax: f64) -> Result<usize, Blocked> {
        let span = width + guard;
        if width == 0 {
            return Err(Blocked::ZeroWidth);
        }
        if span > self.cap {
            return Err(Blocked::OutOfRange);
        }
        let budget = (umax * self.cap as f64 + 1e-9).floor() as usize;
        if self.union_used(links) + span > budget {
            return Err(Blocked::CongestionCap);
        }
        (1..=self.cap + 1 - span)
            .find(|&start| links.iter().all(|&l| (start..start + span).all(|s| self.owner[l][s - 1].is_none())))
            .ok_or(Blocked::NoContiguousRun { span })
    }

    fn set(&mut self, links: &[usize], range: SlotRange, id: Option<usize>) {
        for &l in links {
            for s in range.start..=range.last() {
                self.owner[l][s - 1] = id.map(|id| (id, s > range.payload_last()));
            }
        }
    }
}

#[derive(Clone, Debug)]
pub enum Op {
    Alloc { from: usize, to: usize, width: usize, guard: usize, umax: f64 },
    Release(usize),
}

/// Runs `ops` against both the grid and the model; returns the number of
/// operations applied.
pub fn replay(links: usize, cap: usize, ops: &[Op]) -> Result<usize, String> {
    let nodes: Vec<u32> = (1..=links as u32 + 1).collect();
    let spec_links: Vec<(u32, u32, f64)> = (1..=links as u32).map(|i| (i, i + 1, 100.0)).collect();
    let topo = topology(&nodes, &spec_links, &nodes, cap);
    let mut grid = SpectrumGrid::for_topology(&topo, 12.5);
    let mut model = Model { cap, owner: vec![vec![None; cap]; links] };
    let mut live: Vec<(usize, Lightpath)> = Vec::new();
    let mut next_id = 0;
    // With one guard width throughout the audit can check guard gaps too.
    let mut guards = ops.iter().filter_map(|op| match op {
        Op::Alloc { guard, .. } => Some(*guard),
        Op::Release(_) => None,
    });
    let first = guards.next().unwrap_or(0);
    let audit_guard = if guards.all(|g| g == first) { first } else { 0 };
    for op in ops {
        match *op {
            Op::Alloc { from, to, width, guard, umax } => {
                let path_nodes: Vec<NodeId> = (from..=to + 1).map(|i| NodeId(i as u32 + 1)).collect();
                let path = Path::from_nodes(&topo, &path_nodes).unwrap();
                let want = model.first_fit(path.links(), width, guard, umax);
                let got = grid.first_fit_allocate(&path, width, guard, umax);
                let allocated = got.is_ok();
                match (want, got) {
                    (Ok(start), Ok(range)) => {
                        let want = SlotRange { start, width, guard };
                        if range != want {
                            return Err(format!("grid chose {range:?}, first fit is {want:?}"));
                        }
                        model.set(path.links(), range, Some(next_id));
                        live.push((next_id, Lightpath { path, range }));
                        next_id += 1;
                    }
                    (Err(w), Err(g)) if w == g => {}
                    (w, g) => return Err(format!("model {w:?} vs grid {g:?}")),
                }
                let lps: Vec<Lightpath> = live.iter().map(|(_, l)| l.clone()).collect();
                let violations = audit(&grid, &lps, audit_guard, 1.0);
                if !violations.is_empty() {
                    return Err(format!("audit: {violations:?}"));
                }
                let budget = (umax * cap as f64 + 1e-9).floor() as usize;
                if allocated {
                    let last = &live.last().unwrap().1;
                    if grid.path_used_slots(&last.path) > budget {
                        return Err(format!("{:?} pushed its path over {budget} slots", last.range));
                    }
                }
            }
            Op::Release(pick) => {
                if live.is_empty() {
                    let path = Path::from_nodes(&topo, &[NodeId(1), NodeId(2)]).unwrap();
                    let range = SlotRange { start: 1, width: 1, guard: 0 };
                    if grid.release(&path, range).is_ok() {
                        return Err("released a lightpath that was never allocated".into());
                    }
                    continue;
                }
                let (_, lp) = live.remove(pick % live.len());
                grid.release(&lp.path, lp.range).map_err(|e| format!("release {:?}: {e:?}", lp.range))?;
                model.set(lp.path.links(), lp.range, None);
            }
        }
        for l in 0..links {
            for s in 1..=cap {
                let want = match model.owner[l][s - 1] {
                    None => SlotState::Free,
                    Some((_, false)) => SlotState::Payload,
                    Some((_, true)) => SlotState::Guard,
                };
                if grid.slot(l, s) != want {
                    return Err(format!("link {l} slot {s}: grid {:?} model {want:?}", grid.slot(l, s)));
                }
            }
        }
    }
    Ok(ops.len())
}

