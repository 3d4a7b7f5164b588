//! First-fit allocation on a small ring: continuity across links, guard
//! slots, the congestion cap and what release gives back.

use greenshift::spectrum::{audit, slots_for_bandwidth, Lightpath, SlotState, SpectrumGrid};
use greenshift::topology::{NodeId, Path, Topology, TopologySpec};

fn show(grid: &SpectrumGrid, topo: &Topology) {
    for (l, link) in topo.links().iter().enumerate() {
        let row: String = (1..=grid.slot_capacity())
            .map(|s| match grid.slot(l, s) {
                SlotState::Free => '.',
                SlotState::Payload => '#',
                SlotState::Guard => 'g',
            })
            .collect();
        println!("  {}-{}  {row}", link.a, link.b);
    }
}

fn main() {
    let topo = Topology::from_spec(&TopologySpec {
        name: Some("ring".into()),
        nodes: vec![1, 2, 3, 4],
        links: vec![(1, 2, 400.0), (2, 3, 400.0), (3, 4, 400.0), (4, 1, 400.0)],
        slot_capacity: 16,
        dc_nodes: vec![1, 3],
    })
    .expect("valid ring");
    let path = |nodes: &[u32]| Path::from_nodes(&topo, &nodes.iter().map(|&n| NodeId(n)).collect::<Vec<_>>()).unwrap();
    let mut grid = SpectrumGrid::for_topology(&topo, 12.5);
    let (guard, umax) = (1, 0.75);

    let mut live = Vec::new();
    for (nodes, gbps) in [(&[1, 2, 3][..], 30.0), (&[2, 3][..], 12.5), (&[1, 4, 3][..], 40.0), (&[1, 2][..], 20.0)] {
        let p = path(nodes);
        let width = slots_for_bandwidth(gbps, 1, grid.slot_rate_gbps());
        match grid.first_fit_allocate(&p, width, guard, umax) {
            Ok(range) => {
                println!("{p}: {gbps} Gbps -> slots {range}");
                live.push(Lightpath { path: p, range });
            }
            Err(e) => println!("{p}: {gbps} Gbps blocked: {e}"),
        }
    }
    show(&grid, &topo);

    // A request that would push link 1-2 past 75% of its slots is refused
    // even though contiguous spectrum is still free.
    let p = path(&[1, 2]);
    println!("{p}: room for {} more slots under the cap", grid.available_contiguous_bandwidth(&p, umax));
    println!("{p}: 6 slots -> {:?}", grid.first_fit_allocate(&p, 6, guard, umax));

    let first = live.remove(0);
    grid.release(&first.path, first.range).expect("was allocated");
    println!("released {} at {}", first.path, first.range);
    show(&grid, &topo);
    println!("audit: {} violations", audit(&grid, &live, guard, umax).len());
}
