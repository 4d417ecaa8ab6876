mod common;

use common::random_connected;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tropsamp::Graph;

fn with_legs(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = random_connected(&mut rng, 1..8, 0..8, true);
    let legs: Vec<usize> = (0..rng.random_range(0..5))
        .map(|_| rng.random_range(0..g.vertex_count()))
        .collect();
    let special = (legs.len() >= 2).then_some((1, 2));
    Graph::new(g.vertex_count(), g.edges().to_vec(), legs, special).unwrap()
}

proptest! {
    #[test]
    fn text_form_round_trips(seed in any::<u64>()) {
        let g = with_legs(seed);
        prop_assert_eq!(g.to_string().parse::<Graph>().unwrap(), g);
    }

    #[test]
    fn canonical_form_ignores_labelling(seed in any::<u64>()) {
        let g = with_legs(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut perm: Vec<usize> = (0..g.vertex_count()).collect();
        perm.shuffle(&mut rng);
        let mut order: Vec<usize> = (0..g.edge_count()).collect();
        order.shuffle(&mut rng);
        let h = g.relabelled(&perm, &order);
        prop_assert_eq!(g.canonical_form(), h.canonical_form());
        prop_assert_eq!(g.bridges().len(), h.bridges().len());
        prop_assert_eq!(g.loop_number(), h.loop_number());
    }
}

#[test]
fn canonical_form_separates_leg_placements() {
    let a: Graph = "V=3 E=0:1,1:2,2:0 LEGS=0,1,2 SPECIAL=none".parse().unwrap();
    let b: Graph = "V=3 E=0:1,1:2,2:0 LEGS=0,2,1 SPECIAL=none".parse().unwrap();
    let c: Graph = "V=3 E=0:1,1:2,2:0,0:1 LEGS=0,1,2 SPECIAL=none".parse().unwrap();
    assert_eq!(a.canonical_form(), b.canonical_form());
    assert_ne!(a.canonical_form(), c.canonical_form());
}

#[test]
fn malformed_text_is_rejected() {
    for bad in [
        "V=2 E=0:2 LEGS= SPECIAL=none",
        "V=2 E=0:1 LEGS=0 SPECIAL=1,1",
        "E=0:1 LEGS= SPECIAL=none",
        "V=x E= LEGS= SPECIAL=none",
    ] {
        assert!(bad.parse::<Graph>().is_err(), "{bad}");
    }
}
