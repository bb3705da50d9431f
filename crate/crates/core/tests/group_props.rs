mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symspace::group::{
    act, act_vector, algebra_basis, fundamental_field, haar_special_unitary, moment,
    random_algebra_element, random_group_element,
};
use symspace::Space;

fn pick(which: usize) -> Space {
    common::spaces().swap_remove(which)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn group_elements_preserve_the_reduced_form(seed in any::<u64>(), which in 0usize..6) {
        let s = pick(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let b = random_group_element(&s, &basis, &mut rng);
        let p = s.random_point(&mut rng);
        let x = s.random_horizontal(&p, &mut rng);
        let y = s.random_horizontal(&p, &mut rng);
        let bx = act_vector(&s, &b, &x).unwrap();
        let by = act_vector(&s, &b, &y).unwrap();
        let before = s.omega_red(&x, &y).unwrap();
        let after = s.omega_red(&bx, &by).unwrap();
        prop_assert!((before - after).abs() < 1e-9 * before.abs().max(1.0));
    }

    #[test]
    fn group_elements_map_geodesics_to_geodesics(seed in any::<u64>(), which in 0usize..6) {
        let s = pick(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let b = random_group_element(&s, &basis, &mut rng);
        let p = s.random_point(&mut rng);
        let x = s.random_horizontal(&p, &mut rng);
        let x = x.scale(0.5 / x.vec().norm());
        let (end, _) = s.geodesic(&x, 1.0, 1e-2).unwrap();
        let (moved_end, _) = s.geodesic(&act_vector(&s, &b, &x).unwrap(), 1.0, 1e-2).unwrap();
        let image = act(&s, &b, &end).unwrap();
        prop_assert!(s.points_equal(&image, &moved_end, 1e-8));
    }

    #[test]
    fn moment_is_a_hamiltonian_for_the_fundamental_field(seed in any::<u64>(), which in 0usize..6) {
        let s = pick(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let d = random_algebra_element(&s, &basis, &mut rng);
        let p = s.random_point(&mut rng);
        let y = s.random_horizontal(&p, &mut rng);
        let f = |t: f64| moment(&s, &s.retract(&p, &(y.vec() * t)).unwrap(), &d);
        let h = 1e-4;
        let df = (4.0 * (f(h / 2.0) - f(-h / 2.0)) / h - (f(h) - f(-h)) / (2.0 * h)) / 3.0;
        let w = s.omega_red(&fundamental_field(&s, &d, &p), &y).unwrap();
        prop_assert!((df - w).abs() < 1e-6 * w.abs().max(1.0));
    }

    #[test]
    fn fundamental_field_is_the_derivative_of_the_flow(seed in any::<u64>(), which in 0usize..6) {
        let s = pick(which);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = algebra_basis(&s);
        let d = random_algebra_element(&s, &basis, &mut rng);
        let p = s.random_point(&mut rng);
        let h = 1e-5;
        let plus = &d.scale(h).exp().matrix().clone() * p.rep();
        let minus = &d.scale(-h).exp().matrix().clone() * p.rep();
        // D* is the velocity of exp(-tD) p
        let fd = s.hproj_at(p.rep(), &((minus - plus) / (2.0 * h)));
        let field = fundamental_field(&s, &d, &p);
        prop_assert!((fd - field.vec()).norm() < 1e-6 * field.vec().norm().max(1.0));
    }

    #[test]
    fn sampling_is_deterministic_per_seed(seed in any::<u64>(), which in 0usize..6) {
        let s = pick(which);
        let basis = algebra_basis(&s);
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (s.random_point(&mut rng), random_group_element(&s, &basis, &mut rng))
        };
        let (p1, b1) = draw();
        let (p2, b2) = draw();
        prop_assert_eq!(p1, p2);
        prop_assert_eq!(b1.matrix(), b2.matrix());
    }
}

#[test]
fn haar_entries_have_mean_zero_and_variance_one_over_h() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let h = 3;
    let n = 4000;
    let mut sum = nalgebra::DMatrix::<num_complex::Complex<f64>>::zeros(h, h);
    let mut sq = 0.0;
    for _ in 0..n {
        let u = haar_special_unitary::<f64, _>(h, &mut rng);
        sq += u[(0, 0)].norm_sqr();
        sum += u;
    }
    // E|U_ij|^2 = 1/h, so each entry mean has stderr sqrt(1/(h n))
    let se = (1.0 / (h as f64 * n as f64)).sqrt();
    for z in sum.iter() {
        let m = z / n as f64;
        assert!(m.norm() < 3.0 * se * 2f64.sqrt(), "{m}");
    }
    assert!((sq / n as f64 - 1.0 / h as f64).abs() < 0.02);
}
