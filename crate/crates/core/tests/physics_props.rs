mod common;

use blockplan::physics::{simulate, simulate_observed, stability_margin, static_stable, SimConfig, World};
use blockplan::scene::{Block, Scene};
use blockplan::seeds::seeded_rng;
use common::{lone_cube, random_stacks, tower};
use nalgebra::Vector3;
use proptest::prelude::*;

/// Lowest point of any box in the world.
fn lowest_point(world: &World) -> f64 {
    let mut low = f64::INFINITY;
    for b in &world.bodies {
        let r = b.rotation();
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    let corner = b.position + r * Vector3::new(sx * b.half.x, sy * b.half.y, sz * b.half.z);
                    low = low.min(corner.z);
                }
            }
        }
    }
    low
}

fn two_stack(offset: f64) -> Scene {
    Scene::new(vec![Block::cube("a", 0.0, 0.0, 0.5), Block::cube("b", offset, 0.0, 1.5)]).unwrap()
}

#[test]
fn lone_cube_rests() {
    let out = simulate(&lone_cube(), &SimConfig::default()).unwrap();
    assert!(!out.fell);
    assert!(out.max_displacement < 1e-3);
}

#[test]
fn ten_tower_stands_unperturbed() {
    let out = simulate(&tower(10), &SimConfig::default()).unwrap();
    assert!(!out.fell, "displacement {}", out.max_displacement);
}

#[test]
fn overhang_past_the_edge_falls() {
    assert!(simulate(&two_stack(0.7), &SimConfig::default()).unwrap().fell);
    assert!(!simulate(&two_stack(0.3), &SimConfig::default()).unwrap().fell);
}

#[test]
fn oracle_agrees_on_clear_cases() {
    for (offset, stable) in [(0.0, true), (0.35, true), (0.65, false), (0.85, false)] {
        let s = two_stack(offset);
        assert_eq!(static_stable(&s).unwrap(), stable);
        assert_eq!(simulate(&s, &SimConfig::default()).unwrap().fell, !stable, "offset {offset}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let s = random_stacks(&mut seeded_rng(seed), 4, "b");
        let c = SimConfig::default();
        prop_assert_eq!(simulate(&s, &c).unwrap(), simulate(&s, &c).unwrap());
    }

    #[test]
    fn boxes_stay_above_ground(seed in any::<u64>()) {
        let s = random_stacks(&mut seeded_rng(seed), 5, "b");
        let (mut low, mut settled) = (f64::INFINITY, f64::INFINITY);
        simulate_observed(&s, &SimConfig::default(), |_, w| {
            settled = lowest_point(w);
            low = low.min(settled);
            Ok(())
        }).unwrap();
        prop_assert!(settled >= -0.01, "settled lowest point {settled}");
        prop_assert!(low > -0.02, "lowest point {low}");
    }

    #[test]
    fn energy_never_grows(offset in 0.0f64..0.9, drop in 0.0f64..0.3) {
        let s = two_stack(offset).translated(Vector3::new(0.0, 0.0, drop));
        let mut w = World::from_blocks(&s.blocks, SimConfig::default());
        let mut e = w.energy();
        for _ in 0..480 {
            w.step();
            let next = w.energy();
            prop_assert!(next - e < 1e-6, "energy rose by {}", next - e);
            e = next;
        }
    }

    #[test]
    fn margin_sign_matches_oracle(offset in -0.95f64..0.95) {
        let s = two_stack(offset);
        prop_assert_eq!(stability_margin(&s).unwrap() > 0.0, static_stable(&s).unwrap());
    }
}
