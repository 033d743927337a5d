mod common;

use std::collections::BTreeSet;

use blockplan::assign::{assign_blocks, total_distance};
use blockplan::seeds::seeded_rng;
use common::{brute_force_min, ground_scene, COLORS};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn instance(seed: u64) -> (blockplan::scene::Scene, blockplan::scene::Scene) {
    let mut rng = seeded_rng(seed);
    let n = rng.random_range(1..=6);
    let mut colors: Vec<_> = (0..n).map(|_| COLORS[rng.random_range(0..COLORS.len())]).collect();
    let a = ground_scene(&mut rng, "a", &colors);
    colors.shuffle(&mut rng);
    let b = ground_scene(&mut rng, "b", &colors);
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_brute_force(seed in any::<u64>()) {
        let (a, b) = instance(seed);
        let asg = assign_blocks(&a, &b).unwrap();
        prop_assert_eq!(asg.total_distance, brute_force_min(&a, &b));
    }

    #[test]
    fn color_respecting_bijection(seed in any::<u64>()) {
        let (a, b) = instance(seed);
        let asg = assign_blocks(&a, &b).unwrap();
        prop_assert_eq!(asg.len(), a.len());
        let targets: BTreeSet<&String> = asg.pairs.values().collect();
        prop_assert_eq!(targets.len(), b.len());
        for (ia, ib) in &asg.pairs {
            prop_assert_eq!(a.get(ia).unwrap().color, b.get(ib).unwrap().color);
        }
        prop_assert_eq!(asg.total_distance, total_distance(&a, &b, &asg.pairs));
    }

    #[test]
    fn identical_states_cost_nothing(seed in any::<u64>()) {
        let (a, _) = instance(seed);
        prop_assert_eq!(assign_blocks(&a, &a).unwrap().total_distance, 0.0);
    }
}
