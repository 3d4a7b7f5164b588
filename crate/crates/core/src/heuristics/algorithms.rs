use std::cmp::{Ordering, Reverse};

use super::{weight_ep, weight_jre, Attempt, CycleState};
use crate::energy::DcId;
use crate::topology::Path;

fn pick_source(state: &CycleState, sources: &[DcId]) -> DcId {
    *sources
        .iter()
        .max_by(|a, b| {
            let (da, db) = (state.dc(**a), state.dc(**b));
            state
                .remaining(**a)
                .len()
                .cmp(&state.remaining(**b).len())
                .then(da.energy_price.total_cmp(&db.energy_price))
                .then(Reverse(**a).cmp(&Reverse(**b)))
        })
        .expect("non-empty source set")
}

fn pick_sink(state: &CycleState, sinks: &[DcId]) -> DcId {
    *sinks
        .iter()
        .max_by(|a, b| {
            let (ha, hb) = (state.sink_requirement(**a), state.sink_requirement(**b));
            ha.total_cmp(&hb).then(Reverse(**a).cmp(&Reverse(**b)))
        })
        .expect("non-empty sink set")
}

struct Candidate {
    s: DcId,
    d: DcId,
    index: usize,
    path: Path,
    score: f64,
}

fn all_candidates(state: &mut CycleState, sources: &[DcId], sinks: &[DcId]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for &s in sources {
        for &d in sinks {
            for (index, path) in state.candidate_paths(s, d).into_iter().enumerate() {
                out.push(Candidate { s, d, index, path, score: 0.0 });
            }
        }
    }
    out
}

/// Shortest-path anycast: the source with most designated VMs (ties: higher
/// energy price, lower id) sends to the sink with most renewable headroom
/// over their shortest path. The first blocked attempt ends the cycle.
pub fn anycast_sp(state: &mut CycleState) {
    loop {
        let sources = state.live_sources();
        let sinks = state.live_sinks();
        if sources.is_empty() || sinks.is_empty() {
            return;
        }
        let s = pick_source(state, &sources);
        let d = pick_sink(state, &sinks);
        let Some(path) = state.candidate_paths(s, d).into_iter().next() else {
            state.log.blocked_attempts += 1;
            return;
        };
        match state.attempt(s, d, &path) {
            Attempt::Committed => {}
            Attempt::Blocked => return,
            Attempt::NotWorthwhile => state.exclude(s),
        }
    }
}

/// Maximum-available-bandwidth anycast: over every source, sink and
/// candidate path, take the path with the largest contiguous free spectrum
/// (ties: shorter, then lower source/sink ids, then path rank). The first
/// blocked attempt ends the cycle.
pub fn anycast_mp(state: &mut CycleState) {
    loop {
        let sources = state.live_sources();
        let sinks = state.live_sinks();
        if sources.is_empty() || sinks.is_empty() {
            return;
        }
        let mut cands = all_candidates(state, &sources, &sinks);
        for c in &mut cands {
            c.score = state.grid.available_contiguous_bandwidth(&c.path, state.params.umax) as f64;
        }
        let best = cands.into_iter().min_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.path.length_km().total_cmp(&b.path.length_km()))
                .then((a.s, a.d, a.index).cmp(&(b.s, b.d, b.index)))
        });
        let Some(c) = best else {
            state.log.blocked_attempts += 1;
            return;
        };
        match state.attempt(c.s, c.d, &c.path) {
            Attempt::Committed => {}
            Attempt::Blocked => return,
            Attempt::NotWorthwhile => state.exclude(c.s),
        }
    }
}

fn weighted(state: &mut CycleState, with_cores: bool) {
    loop {
        let sources = state.live_sources();
        let sinks = state.live_sinks();
        if sources.is_empty() || sinks.is_empty() {
            return;
        }
        let mut cands = all_candidates(state, &sources, &sinks);
        if cands.is_empty() {
            // No route between any live pair: drop the sinks one by one.
            let d = *sinks.iter().min().unwrap();
            state.exclude(d);
            continue;
        }
        for c in &mut cands {
            c.score = if with_cores {
                weight_jre(&c.path, state.dc(c.d), &state.grid, state.params.umax)
            } else {
                weight_ep(&c.path, &state.grid, state.params.umax)
            };
        }
        let c = cands
            .into_iter()
            .min_by(|a, b| {
                b.score
                    .total_cmp(&a.score)
                    .then(a.path.hops().cmp(&b.path.hops()))
                    .then((a.s, a.d, a.index).cmp(&(b.s, b.d, b.index)))
            })
            .unwrap();
        match state.attempt(c.s, c.d, &c.path) {
            Attempt::Committed => {}
            Attempt::NotWorthwhile => state.exclude(c.s),
            Attempt::Blocked => {
                let src = state.source_requirement(c.s);
                let snk = state.sink_requirement(c.d);
                let drop = match src.partial_cmp(&snk) {
                    Some(Ordering::Less) => c.s,
                    _ => c.d,
                };
                state.exclude(drop);
            }
        }
    }
}

/// Joint renewable-energy anycast: path weight is available spectrum per
/// hop times the sink's spare cores. A failed candidate removes whichever
/// endpoint has the smaller pending requirement (ties: the sink).
pub fn anycast_jre(state: &mut CycleState) {
    weighted(state, true);
}

/// Like [`anycast_jre`] with the weight reduced to available spectrum per hop.
pub fn anycast_ep(state: &mut CycleState) {
    weighted(state, false);
}
