use anyhow::{bail, Context, Result};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use symspace::curvature::{curvature_at, CurvatureReport};
use symspace::geodesic_sub::{random_submanifold, OrbitInvariants};
use symspace::group::algebra_basis;
use symspace::radon::r3::{
    reconstruct_grid, write_reconstruction_csv, Sinogram, SinogramGrid, SphereQuadrature,
};
use symspace::radon::{
    dual_radon, radon, vol_form_quadrature, CpqRule, DensityFunction, Estimate, OrbitQuadrature,
};
use symspace::{Class, Point, Space};

use crate::config::{RunConfig, SubmanifoldFunction};
use crate::output::{Csv, Outputs};

/// What a command leaves behind: files to write and whether its checks held.
pub struct Run {
    pub outputs: Outputs,
    pub passed: bool,
}

fn point_or_base(s: &Space, rec: &Option<symspace::model::PointRecord>) -> Result<Point> {
    match rec {
        Some(r) => Ok(s.point_from_record(r)?),
        None => Ok(s.base_point()),
    }
}

pub fn geodesic(cfg: &RunConfig) -> Result<Run> {
    let s = cfg.build_space()?;
    let gc = &cfg.geodesic;
    let p = point_or_base(&s, &gc.point)?;
    let v = match &gc.velocity {
        Some(v) => {
            if v.len() != s.ambient_dim() {
                bail!(
                    "velocity has {} entries, expected {}",
                    v.len(),
                    s.ambient_dim()
                );
            }
            s.horizontal_project(&p, &DVector::from_vec(v.clone()))
        }
        None => s.random_horizontal(&p, &mut ChaCha8Rng::seed_from_u64(cfg.seed)),
    };
    let norm = v.vec().norm();
    if norm == 0.0 {
        bail!("initial velocity has no horizontal part");
    }
    let v = v.scale(gc.speed / norm);
    let rows = s.geodesic_path(&v, gc.t, gc.step, gc.every)?;
    let dim = s.ambient_dim();
    let names: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["level_residual", "pair_x", "pair_ax"]);
    let mut csv = Csv::new(&header);
    let mut worst = 0.0f64;
    for r in &rows {
        let mut cells = vec![r.t];
        cells.extend(r.x.iter().copied());
        cells.extend([r.level_residual, r.pair_x, r.pair_ax]);
        csv.row(&cells);
        worst = worst.max(r.level_residual).max(r.pair_x).max(r.pair_ax);
    }
    println!(
        "geodesic: {} rows to t = {}, max constraint residual {worst:e}",
        rows.len(),
        gc.t
    );
    let mut outputs = Outputs::default();
    outputs.add("geodesic.csv", csv.finish());
    outputs.add_json(
        "geodesic.json",
        &json!({ "config": cfg, "rows": rows.len(), "max_constraint_residual": worst }),
    )?;
    Ok(Run {
        outputs,
        passed: true,
    })
}

pub fn curvature(cfg: &RunConfig) -> Result<Run> {
    let s = cfg.build_space()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports: Vec<CurvatureReport> = Vec::new();
    for i in 0..cfg.curvature.points.max(1) {
        let p = if i == 0 {
            s.base_point()
        } else {
            s.random_point(&mut rng)
        };
        let r = curvature_at(&s, &p, cfg.curvature.fd_step)?.report(&s);
        println!(
            "point {i}: ricci_type_defect {:e}, bianchi {:e}, rho^2 {:e}, k_hat {}",
            r.ricci_type_defect, r.bianchi_residual, r.rho_squared_residual, r.k_hat
        );
        reports.push(r);
    }
    let mut outputs = Outputs::default();
    outputs.add_json(
        "curvature.json",
        &json!({ "config": cfg, "samples": reports }),
    )?;
    Ok(Run {
        outputs,
        passed: true,
    })
}

fn default_invariants(s: &Space) -> Result<OrbitInvariants> {
    Ok(match s.class() {
        Class::Hyperbolic { .. } => OrbitInvariants::Hyperbolic { q: 1 },
        Class::Elliptic { p, .. } => OrbitInvariants::Elliptic { q: 1, p: p.min(1) },
        Class::Nilpotent { r, m, .. } => {
            if m >= 1 {
                OrbitInvariants::Nilpotent { q: 1, r: 1, p: 1 }
            } else if r >= 2 {
                OrbitInvariants::Nilpotent { q: 1, r: 2, p: 1 }
            } else {
                bail!("no default orbit; set radon.invariants")
            }
        }
    })
}

#[derive(Serialize)]
struct RadonRow {
    index: usize,
    #[serde(flatten)]
    estimate: Estimate,
}

pub fn radon_cmd(cfg: &RunConfig) -> Result<Run> {
    let s = cfg.build_space()?;
    let rc = &cfg.radon;
    let inv = match rc.invariants {
        Some(i) => i,
        None => default_invariants(&s)?,
    };
    let center = point_or_base(&s, &rc.center)?;
    let f = DensityFunction::from_spec(&s, rc.function, center)?;
    let basis = algebra_basis(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut csv = Csv::new(&["index", "value", "stderr", "samples"]);
    let mut rows = Vec::new();
    for i in 0..rc.submanifolds.max(1) {
        let sub = random_submanifold(&s, inv, &basis, &mut rng)?;
        let quad = vol_form_quadrature(&s, &sub, rc.quadrature)?;
        let e = radon(&f, &quad)?;
        println!("S{i}: {} +- {} ({} nodes)", e.value, e.stderr, e.samples);
        csv.row(&[i as f64, e.value, e.stderr, e.samples as f64]);
        rows.push(RadonRow {
            index: i,
            estimate: e,
        });
    }
    let mut outputs = Outputs::default();
    outputs.add("radon.csv", csv.finish());
    outputs.add_json(
        "radon.json",
        &json!({ "config": cfg, "invariants": inv, "results": rows }),
    )?;
    Ok(Run {
        outputs,
        passed: true,
    })
}

pub fn dual_radon_cmd(cfg: &RunConfig) -> Result<Run> {
    let s = cfg.build_space()?;
    let s = &s;
    let dc = &cfg.dual_radon;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center = point_or_base(s, &dc.center)?;
    let inv = OrbitInvariants::Elliptic { q: dc.q, p: dc.q };
    let big_f: Box<dyn Fn(&symspace::Submanifold) -> symspace::Result<f64>> = match dc.function {
        SubmanifoldFunction::Constant { value } => Box::new(move |_| Ok(value)),
        SubmanifoldFunction::RadonOf {
            function,
            n_theta,
            n_phi,
        } => {
            let g = DensityFunction::from_spec(s, function, center)?;
            let rule = CpqRule::new(
                s,
                &random_submanifold(s, inv, &algebra_basis(s), &mut rng)?,
                n_theta,
                n_phi,
            )?;
            Box::new(move |sub| radon(&g, &rule.on(s, sub)?).map(|e| e.value))
        }
    };
    let mut points = vec![s.base_point()];
    for _ in 1..dc.points.max(1) {
        points.push(s.random_point(&mut rng));
    }
    let dim = s.ambient_dim();
    let names: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
    let mut header = vec!["index"];
    header.extend(names.iter().map(String::as_str));
    header.extend(["value", "stderr", "samples"]);
    let mut csv = Csv::new(&header);
    let mut results = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let quad = OrbitQuadrature {
            samples: dc.samples,
            seed: cfg.seed.wrapping_add(i as u64),
        };
        let e = dual_radon(s, &big_f, p, dc.q, quad)?;
        println!("p{i}: {} +- {} ({} samples)", e.value, e.stderr, e.samples);
        let mut cells = vec![i as f64];
        cells.extend(p.rep().iter().copied());
        cells.extend([e.value, e.stderr, e.samples as f64]);
        csv.row(&cells);
        results.push(json!({ "index": i, "point": s.point_record(p), "estimate": e }));
    }
    let mut outputs = Outputs::default();
    outputs.add("dual_radon.csv", csv.finish());
    outputs.add_json(
        "dual_radon.json",
        &json!({ "config": cfg, "results": results }),
    )?;
    Ok(Run {
        outputs,
        passed: true,
    })
}

pub fn invert_r3(cfg: &RunConfig) -> Result<Run> {
    let ic = &cfg.invert_r3;
    if !(ic.beta > 0.0) {
        bail!("invert_r3.beta must be positive");
    }
    let beta = ic.beta;
    let f = move |x: [f64; 3]| (-beta * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).exp();
    let quad = SphereQuadrature::new(ic.order_theta, ic.n_phi);
    let grid = SinogramGrid {
        p_min: ic.p_min,
        p_max: ic.p_max,
        dp: ic.dp,
        plane_order: ic.plane_order,
        support_radius: ic.support_radius,
    };
    let sino = Sinogram::compute(&f, quad, &grid)?;
    // plane integral of exp(-beta |x|^2) is (pi / beta) exp(-beta p^2)
    let sino_err = sino
        .values
        .iter()
        .flat_map(|row| {
            sino.offsets
                .iter()
                .zip(row)
                .map(|(p, v)| (v - std::f64::consts::PI / beta * (-beta * p * p).exp()).abs())
        })
        .fold(0.0, f64::max);
    let rows = reconstruct_grid(&sino, &f, ic.grid, ic.half_width, ic.fd_step)?;
    let max_rel = rows.iter().map(|r| r.abs_err()).fold(0.0, f64::max) / f([0.0; 3]);
    let passed = max_rel < ic.max_rel_error;
    println!(
        "invert-r3: {} directions, {} offsets; sinogram oracle error {sino_err:e}; max relative error {max_rel:e} (bound {})",
        sino.quad.len(),
        sino.offsets.len(),
        ic.max_rel_error
    );
    let mut outputs = Outputs::default();
    if ic.write_sinogram {
        let mut buf = Vec::new();
        sino.write_csv(&mut buf).context("formatting sinogram")?;
        outputs.add("sinogram.csv", String::from_utf8(buf)?);
    }
    let mut buf = Vec::new();
    write_reconstruction_csv(&rows, &mut buf).context("formatting reconstruction")?;
    outputs.add("reconstruction.csv", String::from_utf8(buf)?);
    outputs.add_json(
        "invert_r3.json",
        &json!({
            "config": cfg,
            "sinogram_oracle_error": sino_err,
            "max_relative_error": max_rel,
            "passed": passed,
        }),
    )?;
    Ok(Run { outputs, passed })
}

pub fn classify(cfg: &RunConfig) -> Result<Run> {
    let s = cfg.build_space()?;
    let class = s.class();
    let (k, p, r, m) = match class {
        Class::Hyperbolic { k } => (Some(k), None, None, None),
        Class::Elliptic { k, p } => (Some(k), Some(p), None, None),
        Class::Nilpotent { r, p, m } => (None, Some(p), Some(r), Some(m)),
    };
    let summary = json!({
        "case": class.name(),
        "n": s.n(),
        "lambda": class.lambda(),
        "k": k,
        "p": p,
        "r": r,
        "m": m,
        "dim_model": 2 * s.n(),
    });
    println!("{summary}");
    let report = json!({ "config": cfg, "class": summary });
    let mut outputs = Outputs::default();
    outputs.add_json("classify.json", &report)?;
    Ok(Run {
        outputs,
        passed: true,
    })
}
