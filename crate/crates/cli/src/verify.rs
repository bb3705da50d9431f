//! The property suite behind `verify`.

use anyhow::Result;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use symspace::curvature::{
    connection_residuals, sample_connection, symmetry_defect_of, CurvatureSample, FrameChart,
};
use symspace::group::{
    algebra_basis, equivariance_defect, fundamental_field, moment, random_algebra_element,
    random_group_element,
};
use symspace::{Class, Point, Space};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Environment {
    pub case: String,
    pub n: usize,
    pub ambient_dim: usize,
    pub lambda: f64,
    pub seed: u64,
    pub model_tol: f64,
    pub perturbed_connection: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub environment: Environment,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Largest value seen for one check.
struct Max {
    name: &'static str,
    tol: f64,
    value: f64,
}

impl Max {
    fn new(name: &'static str, tol: f64) -> Self {
        Self {
            name,
            tol,
            value: 0.0,
        }
    }

    fn see(&mut self, v: f64) {
        // NaN must fail
        if !(v <= self.value) {
            self.value = v;
        }
    }

    fn check(&self) -> Check {
        Check {
            name: self.name,
            value: self.value,
            tol: self.tol,
            pass: self.value < self.tol,
        }
    }
}

fn rel_dist(a: &Point, b: &Point) -> f64 {
    (a.rep() - b.rep()).norm() / a.rep().norm().max(1.0)
}

fn near_point(s: &Space, rng: &mut ChaCha8Rng) -> Result<Point> {
    let b = s.base_point();
    let v = s.random_horizontal(&b, rng);
    let v = v.scale(rng.random_range(0.0..1.0) / v.vec().norm());
    Ok(s.geodesic(&v, 1.0, 1e-2)?.0)
}

/// Nilpotent `p = 1`: the component keeps the first `v` coordinate positive.
fn component_ok(s: &Space, p: &Point) -> bool {
    match s.class() {
        Class::Nilpotent { r, p: 1, .. } => s.adapted_coords(p.rep())[r] > 0.0,
        _ => true,
    }
}

pub fn run(cfg: &RunConfig) -> Result<VerificationReport> {
    let s = cfg.build_space()?;
    let vc = &cfg.verify;
    let h = vc.fd_step;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let class = s.class();
    let compact = matches!(class, Class::Elliptic { p, .. } if p == s.n());
    let has_chart_inverse = !matches!(class, Class::Elliptic { .. });

    let mut level = Max::new("level_set", 1e-10);
    let mut component = Max::new("component_selector_violations", 1.0);
    let mut idem = Max::new("canonical_rep_idempotence", 1e-12);
    let mut invol = Max::new("symmetry_involution", 1e-10);
    let mut compo = Max::new("symmetry_composition", 1e-8);
    let mut reversal = Max::new("geodesic_reversal", 1e-6);
    let mut constraints = Max::new("geodesic_constraints", 1e-8);
    let mut local = Max::new("local_symmetry", 1e-5);
    let mut torsion = Max::new("torsion", 1e-6);
    let mut nabla = Max::new("nabla_omega", 1e-6);
    let mut anti = Max::new("curvature_antisymmetry", 1e-7);
    let mut bianchi = Max::new("bianchi", 1e-7);
    let mut ricci = Max::new("ricci_type", 1e-6);
    let mut rho2 = Max::new("rho_squared", 1e-6);
    let mut sign = Max::new("k_hat_sign", 1e-6);
    let mut kahler = Max::new("kahler", 1e-5);
    let mut equi = Max::new("moment_equivariance", 1e-9);
    let mut ham = Max::new("hamiltonian", 1e-5);
    let mut round = Max::new("chart_roundtrip", 1e-10);
    let mut pull = Max::new("chart_pullback", 1e-5);

    let basis = algebra_basis(&s);
    let dim = s.ambient_dim();
    for i in 0..vc.points.max(1) {
        let p = s.random_point(&mut rng);
        let q = s.random_point(&mut rng);
        level.see((s.level(p.rep()) - 1.0).abs());
        idem.see(rel_dist(&p, &s.canonical_rep(p.rep(), s.tol())?));

        let m = s.symmetry_matrix(&p);
        invol.see(((&m * &m) - DMatrix::identity(dim, dim)).abs().max());
        invol.see(rel_dist(&q, &s.symmetry(&p, &s.symmetry(&p, &q)?)?));
        let (a, b, c) = (
            near_point(&s, &mut rng)?,
            near_point(&s, &mut rng)?,
            near_point(&s, &mut rng)?,
        );
        let lhs = s.symmetry(&a, &s.symmetry(&b, &s.symmetry(&a, &c)?)?)?;
        let rhs = s.symmetry(&s.symmetry(&a, &b)?, &c)?;
        compo.see(rel_dist(&lhs, &rhs));

        let v = s.random_horizontal(&p, &mut rng);
        let v = v.scale(1.0 / v.vec().norm());
        let (fwd, _) = s.geodesic(&v, 1.0, 1e-2)?;
        let (bwd, _) = s.geodesic(&v.scale(-1.0), 1.0, 1e-2)?;
        reversal.see(rel_dist(&bwd, &s.symmetry(&p, &fwd)?));
        for row in s.geodesic_path(&v, 2.0, 1e-3, 100)? {
            constraints.see(row.level_residual.max(row.pair_x).max(row.pair_ax));
        }
        let violations = [&p, &q, &fwd, &bwd]
            .iter()
            .filter(|x| !component_ok(&s, x))
            .count();
        component.see(violations as f64);

        let mut chart = FrameChart::new(&s, &p)?;
        if vc.perturb_connection {
            chart = chart.perturbed(vc.perturbation, cfg.seed.wrapping_add(i as u64))?;
        }
        let s0 = DVector::zeros(2 * s.n());
        let (t, nw) = connection_residuals(&chart, &s0, h)?;
        torsion.see(t);
        nabla.see(nw);
        if i < 3 {
            local.see(symmetry_defect_of(&chart, &s0, h)?);
        }
        let sample: CurvatureSample<f64> =
            sample_connection(&chart, chart.base().clone(), chart.frame().to_vec(), &s0, h)?;
        anti.see(sample.antisymmetry_residual());
        bianchi.see(sample.bianchi_residual());
        ricci.see(sample.ricci_type_defect()?);
        rho2.see(sample.rho_squared_residual());
        let k = sample.k_hat();
        let lambda = class.lambda();
        sign.see(if lambda == 0.0 {
            k.abs()
        } else if k.signum() == lambda.signum() && k.abs() > 1e-6 {
            0.0
        } else {
            1.0
        });
        if compact {
            kahler.see(sample.kahler_check(&s)?.1);
        }

        let d = random_algebra_element(&s, &basis, &mut rng);
        let g = random_group_element(&s, &basis, &mut rng);
        equi.see(equivariance_defect(&s, &g, &d, &p)?);
        let y = s.random_horizontal(&p, &mut rng);
        let f = |t: f64| -> Result<f64> { Ok(moment(&s, &s.retract(&p, &(y.vec() * t))?, &d)) };
        let fd = 1e-4;
        let d1 = (f(fd)? - f(-fd)?) / (2.0 * fd);
        let d2 = (f(fd / 2.0)? - f(-fd / 2.0)?) / fd;
        let df = (4.0 * d2 - d1) / 3.0;
        let w = s.omega_red(&fundamental_field(&s, &d, &p), &y)?;
        ham.see((df - w).abs() / df.abs().max(w.abs()).max(1.0));

        let c = s.to_chart(&p)?;
        if has_chart_inverse {
            let back = s.from_chart(&c)?;
            round.see(rel_dist(&p, &back));
        }
        let x2 = s.random_horizontal(&p, &mut rng);
        let lhs = s.canonical_form(
            &c,
            &s.chart_tangent(&v, 1e-4)?,
            &s.chart_tangent(&x2, 1e-4)?,
        );
        let rhs = s.omega_red(&v, &x2)?;
        pull.see((lhs - rhs).abs() / rhs.abs().max(1.0));
    }

    let mut checks = vec![level.check()];
    if matches!(class, Class::Nilpotent { p: 1, .. }) {
        checks.push(component.check());
    }
    checks.extend([
        idem.check(),
        invol.check(),
        compo.check(),
        reversal.check(),
        constraints.check(),
        local.check(),
        torsion.check(),
        nabla.check(),
        anti.check(),
        bianchi.check(),
        ricci.check(),
        rho2.check(),
        sign.check(),
    ]);
    if compact {
        checks.push(kahler.check());
    }
    checks.extend([equi.check(), ham.check()]);
    if has_chart_inverse {
        checks.push(round.check());
    }
    checks.push(pull.check());

    let passed = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        environment: Environment {
            case: class.name().to_string(),
            n: s.n(),
            ambient_dim: dim,
            lambda: class.lambda(),
            seed: cfg.seed,
            model_tol: s.tol(),
            perturbed_connection: vc.perturb_connection,
        },
        config: cfg.clone(),
        checks,
        passed,
    })
}
