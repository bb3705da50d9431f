mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symspace::geodesic_sub::{
    act_on_submanifold, contains, orbit_invariants, random_submanifold, reference_submanifold,
    tangent_space, OrbitInvariants,
};
use symspace::group::{algebra_basis, random_group_element};
use symspace::{Class, Space};

fn case(which: usize) -> (Space, OrbitInvariants) {
    use common::space;
    match which {
        0 => (
            space(3, Class::Hyperbolic { k: 1.0 }),
            OrbitInvariants::Hyperbolic { q: 2 },
        ),
        1 => (
            space(3, Class::Elliptic { k: 1.0, p: 3 }),
            OrbitInvariants::Elliptic { q: 2, p: 2 },
        ),
        2 => (
            space(3, Class::Elliptic { k: 1.0, p: 1 }),
            OrbitInvariants::Elliptic { q: 1, p: 0 },
        ),
        3 => (
            space(3, Class::Nilpotent { r: 2, p: 1, m: 2 }),
            OrbitInvariants::Nilpotent { q: 2, r: 2, p: 1 },
        ),
        _ => (
            space(2, Class::Nilpotent { r: 1, p: 1, m: 2 }),
            OrbitInvariants::Nilpotent { q: 1, r: 1, p: 1 },
        ),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn invariants_survive_the_group_action(seed in any::<u64>(), which in 0usize..5) {
        let (s, inv) = case(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let sub = random_submanifold(&s, inv, &basis, &mut rng).unwrap();
        prop_assert_eq!(orbit_invariants(&s, &sub).unwrap(), inv);
        let b = random_group_element(&s, &basis, &mut rng);
        let moved = act_on_submanifold(&s, &b, &sub).unwrap();
        prop_assert_eq!(orbit_invariants(&s, &moved).unwrap(), inv);
    }

    #[test]
    fn geodesics_tangent_to_s_stay_in_s(seed in any::<u64>(), which in 0usize..5) {
        let (s, inv) = case(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let sub = random_submanifold(&s, inv, &basis, &mut rng).unwrap();
        let tangent = tangent_space(&s, &sub);
        let mut v = tangent[0].clone() * 0.0;
        for t in &tangent {
            v += t * rand::Rng::random_range(&mut rng, -1.0..1.0);
        }
        let x = s.horizontal_project(sub.base(), &v);
        let x = x.scale(1.0 / x.vec().norm());
        for step in [0.5, 1.5, 3.0] {
            let (q, _) = s.geodesic(&x, step, 1e-3).unwrap();
            prop_assert!(contains(&s, &sub, &q, 1e-7), "residual {:e}", sub.residual(q.rep()));
        }
    }

    #[test]
    fn reference_submanifold_contains_the_base_point(which in 0usize..5) {
        let (s, inv) = case(which);
        let sub = reference_submanifold(&s, inv).unwrap();
        prop_assert!(contains(&s, &sub, &s.base_point(), 1e-10));
        prop_assert_eq!(sub.q(), inv.q());
    }
}

#[test]
fn illegal_invariants_are_rejected() {
    let s = common::space(2, Class::Elliptic { k: 1.0, p: 2 });
    assert!(reference_submanifold(&s, OrbitInvariants::Elliptic { q: 1, p: 0 }).is_err());
    assert!(reference_submanifold(&s, OrbitInvariants::Hyperbolic { q: 1 }).is_err());
    assert!(reference_submanifold(&s, OrbitInvariants::Elliptic { q: 3, p: 2 }).is_err());
    let n = common::space(2, Class::Nilpotent { r: 2, p: 1, m: 1 });
    assert!(reference_submanifold(&n, OrbitInvariants::Nilpotent { q: 1, r: 1, p: 0 }).is_err());
}
