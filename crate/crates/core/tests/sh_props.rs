mod common;

use proptest::prelude::*;
use tiernav::geometry::Vec3;
use tiernav::sh::{collect_neighbors, sbc_filter, Neighbor, NeighborKind, SbcParams};
use tiernav::sim::RobotState;

#[test]
fn filtered_pairs_keep_their_distance() {
    let mut rng = common::rng(51);
    let mut fallbacks = 0;
    for _ in 0..100 {
        let e = common::sbc_encounter(&mut rng);
        if e.fallback {
            fallbacks += 1;
            continue;
        }
        assert!(e.min_distance >= e.safety_distance - 1e-3, "min {} < {}", e.min_distance, e.safety_distance);
        assert!(e.max_violation <= 1e-6, "constraint violated by {}", e.max_violation);
    }
    assert!(fallbacks <= 2, "{fallbacks} runs fell back");
}

fn vec3(r: f64) -> impl Strategy<Value = Vec3> {
    (-r..r, -r..r, -r..r).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #[test]
    fn non_fallback_output_satisfies_constraints(
        vel in vec3(1.5),
        a_des in vec3(4.0),
        others in prop::collection::vec((vec3(3.0), vec3(1.0), 0.1..0.8f64, 0usize..3), 0..6),
    ) {
        let params = SbcParams::with_a_max(4.0);
        let ego = RobotState { id: 0, position: Vec3::ZERO, velocity: vel, shape: common::cube(0.17) };
        let neighbors: Vec<Neighbor> = others
            .iter()
            .filter(|(p, _, r, _)| p.norm() > r + ego.radius() + params.clearance)
            .map(|&(position, velocity, radius, k)| Neighbor {
                position,
                velocity: if k == 2 { Vec3::ZERO } else { velocity },
                radius: if k == 2 { 0.0 } else { radius },
                kind: [NeighborKind::Teammate, NeighborKind::Obstacle, NeighborKind::Static][k],
            })
            .collect();
        let out = sbc_filter(a_des.clamp_norm(4.0), &ego, &neighbors, &params);
        prop_assert!(out.accel.norm() <= params.a_max + 1e-9);
        if !out.fallback {
            prop_assert!(out.max_violation() <= 1e-6);
        }
        if neighbors.is_empty() {
            prop_assert_eq!(out.accel, a_des.clamp_norm(4.0));
        }
    }
}

#[test]
fn neighbor_collection_skips_ego() {
    let params = SbcParams::with_a_max(4.0);
    let shape = common::cube(0.17);
    let robots: Vec<RobotState> =
        (0..3).map(|i| RobotState { id: i, position: Vec3::new(i as f64, 0.0, 0.0), velocity: Vec3::ZERO, shape }).collect();
    let n = collect_neighbors(&robots[1], &robots, &[], &[], &params);
    assert_eq!(n.len(), 2);
    assert!(n.iter().all(|x| x.position != robots[1].position));
}
