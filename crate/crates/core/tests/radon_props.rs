mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use symspace::geodesic_sub::{random_submanifold, OrbitInvariants};
use symspace::group::algebra_basis;
use symspace::radon::r3::{gaussian, r3_inverse, r3_radon, PlaneR3, SphereQuadrature};
use symspace::radon::{
    dual_radon, radon, similarity, vol_form_quadrature, CpqRule, DensityFunction, DensitySpec,
    OrbitQuadrature, QuadratureScheme,
};
use symspace::{Class, Point, Space};

fn cp2() -> Space {
    common::space(2, Class::Elliptic { k: 1.0, p: 2 })
}

const LINE: OrbitInvariants = OrbitInvariants::Elliptic { q: 1, p: 1 };

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radon_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let s = cp2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub = random_submanifold(&s, LINE, &algebra_basis(&s), &mut rng).unwrap();
        let quad = vol_form_quadrature(&s, &sub, QuadratureScheme::Grid { n_theta: 12, n_phi: 24 }).unwrap();
        let f = DensityFunction::from_spec(&s, DensitySpec::Gaussian { beta: 2.0 }, s.random_point(&mut rng)).unwrap();
        let g = DensityFunction::from_spec(&s, DensitySpec::ZonalHarmonic, s.random_point(&mut rng)).unwrap();
        let combo = DensityFunction::new(|x: &Point| a * f.eval(x) + b * g.eval(x), None);
        let lhs = radon(&combo, &quad).unwrap().value;
        let rhs = a * radon(&f, &quad).unwrap().value + b * radon(&g, &quad).unwrap().value;
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn radon_of_nonnegative_function_is_nonnegative(seed in any::<u64>(), radius in 0.1f64..1.0) {
        let s = cp2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sub = random_submanifold(&s, LINE, &algebra_basis(&s), &mut rng).unwrap();
        let quad = vol_form_quadrature(&s, &sub, QuadratureScheme::Grid { n_theta: 12, n_phi: 24 }).unwrap();
        let f = DensityFunction::from_spec(&s, DensitySpec::Bump { radius }, s.random_point(&mut rng)).unwrap();
        prop_assert!(radon(&f, &quad).unwrap().value >= 0.0);
    }

    #[test]
    fn dual_radon_is_linear(seed in any::<u64>(), a in -3.0f64..3.0) {
        let s = cp2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = s.random_point(&mut rng);
        let c = s.random_point(&mut rng);
        let rule = CpqRule::new(&s, &random_submanifold(&s, LINE, &algebra_basis(&s), &mut rng).unwrap(), 8, 16).unwrap();
        let g = DensityFunction::from_spec(&s, DensitySpec::Gaussian { beta: 1.0 }, c).unwrap();
        let big_f = |sub: &symspace::Submanifold| radon(&g, &rule.on(&s, sub)?).map(|e| e.value);
        let quad = OrbitQuadrature { samples: 40, seed };
        let one = dual_radon(&s, big_f, &p, 1, quad).unwrap().value;
        let scaled = dual_radon(&s, |sub| Ok(a * big_f(sub)? + 2.0), &p, 1, quad).unwrap().value;
        prop_assert!((scaled - (a * one + 2.0)).abs() < 1e-12 * (1.0 + scaled.abs()));
    }

    #[test]
    fn sinogram_parity(theta in 0.0f64..3.14, phi in 0.0f64..6.28, p in -2.0f64..2.0) {
        let w = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let f = |x: [f64; 3]| gaussian([x[0] - 0.3, x[1] + 0.2, x[2]]) * (1.0 + x[0]);
        let a = r3_radon(&f, 6.0, &PlaneR3::new(w, p).unwrap(), 32);
        let b = r3_radon(&f, 6.0, &PlaneR3::new([-w[0], -w[1], -w[2]], -p).unwrap(), 32);
        prop_assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn support_missing_s_gives_exact_zero() {
    let s = cp2();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sub = random_submanifold(&s, LINE, &algebra_basis(&s), &mut rng).unwrap();
    let quad = vol_form_quadrature(
        &s,
        &sub,
        QuadratureScheme::Grid {
            n_theta: 16,
            n_phi: 32,
        },
    )
    .unwrap();
    // a center far (in the similarity sense) from every point of S
    let mut best = None;
    for _ in 0..2000 {
        let c = s.random_point(&mut rng);
        let worst = quad
            .nodes
            .iter()
            .map(|x| similarity(&s, x.rep(), c.rep()))
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(w, _)| worst < *w) {
            best = Some((worst, c));
        }
    }
    let (sim, c) = best.unwrap();
    assert!(sim < 0.5);
    // d^2 = 1 - c > 0.5 on S, so a bump of radius 0.7 misses it
    let f = DensityFunction::from_spec(&s, DensitySpec::Bump { radius: 0.7 }, c).unwrap();
    assert_eq!(radon(&f, &quad).unwrap().value, 0.0);
}

#[test]
fn constant_sinogram_inverts_to_zero() {
    let quad = SphereQuadrature::new(16, 32);
    let v = r3_inverse(&|_, _| 2.5, [0.3, -0.1, 0.2], &quad, 1e-2).unwrap();
    // roundoff of the difference quotient, eps |J| / h^2
    assert!(v.abs() < 1e-9, "{v}");
}

#[test]
fn r3_inverse_is_linear() {
    let quad = SphereQuadrature::new(16, 32);
    let j1 = |_: usize, p: f64| (-p * p).exp();
    let j2 = |d: usize, p: f64| (-(p - 0.1 * d as f64 / 512.0).powi(2) * 2.0).exp();
    let x = [0.2, 0.1, -0.3];
    let combo = |d: usize, p: f64| 2.0 * j1(d, p) - 0.5 * j2(d, p);
    let lhs = r3_inverse(&combo, x, &quad, 1e-2).unwrap();
    let rhs = 2.0 * r3_inverse(&j1, x, &quad, 1e-2).unwrap()
        - 0.5 * r3_inverse(&j2, x, &quad, 1e-2).unwrap();
    assert!((lhs - rhs).abs() < 1e-10);
}

#[test]
fn noncompact_submanifolds_need_truncation() {
    let s = common::space(2, Class::Hyperbolic { k: 1.0 });
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let sub = random_submanifold(
        &s,
        OrbitInvariants::Hyperbolic { q: 1 },
        &algebra_basis(&s),
        &mut rng,
    )
    .unwrap();
    assert!(vol_form_quadrature(
        &s,
        &sub,
        QuadratureScheme::Grid {
            n_theta: 8,
            n_phi: 16
        }
    )
    .is_err());
    let quad = vol_form_quadrature(
        &s,
        &sub,
        QuadratureScheme::Truncated {
            radius: 2.0,
            order: 12,
        },
    )
    .unwrap();
    let g = DensityFunction::from_spec(&s, DensitySpec::Gaussian { beta: 1.0 }, sub.base().clone())
        .unwrap();
    assert!(matches!(radon(&g, &quad), Err(symspace::Error::Divergence)));
    let f = DensityFunction::from_spec(&s, DensitySpec::Bump { radius: 0.5 }, sub.base().clone())
        .unwrap();
    assert!(radon(&f, &quad).unwrap().value > 0.0);
}
