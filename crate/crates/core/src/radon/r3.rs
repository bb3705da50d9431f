//! Plane Radon transform on R^3 and its inversion
//! `f(x) = -(1/8 pi^2) L_x \int_{S^2} J(w, w.x) dw`.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use super::quadrature::{compensated_sum, gauss_legendre, gauss_legendre_on, CubicSpline};
use crate::error::{Error, Result};

/// The plane `x . omega = p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneR3 {
    omega: [f64; 3],
    p: f64,
}

impl PlaneR3 {
    pub fn new(omega: [f64; 3], p: f64) -> Result<Self> {
        let n = dot(&omega, &omega).sqrt();
        if !(n > 0.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(
                "plane normal must be nonzero and offset finite".into(),
            ));
        }
        Ok(Self {
            omega: omega.map(|c| c / n),
            p,
        })
    }

    pub fn omega(&self) -> [f64; 3] {
        self.omega
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Orthonormal basis of the plane's direction space.
    fn tangents(&self) -> ([f64; 3], [f64; 3]) {
        let w = self.omega;
        let pick = if w[0].abs() < 0.9 {
            [1.0, 0.0, 0.0]
        } else {
            [0.0, 1.0, 0.0]
        };
        let d = dot(&pick, &w);
        let u = normalize([pick[0] - d * w[0], pick[1] - d * w[1], pick[2] - d * w[2]]);
        let v = [
            w[1] * u[2] - w[2] * u[1],
            w[2] * u[0] - w[0] * u[2],
            w[0] * u[1] - w[1] * u[0],
        ];
        (u, v)
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(&a, &a).sqrt();
    a.map(|c| c / n)
}

/// Integral of `f` over the plane, on an `order x order` Gauss–Legendre grid
/// over the square of half-width `sqrt(R^2 - p^2)` around the foot point.
pub fn r3_radon<F: Fn([f64; 3]) -> f64>(
    f: &F,
    support_radius: f64,
    plane: &PlaneR3,
    order: usize,
) -> f64 {
    let a2 = support_radius * support_radius - plane.p * plane.p;
    if a2 <= 0.0 {
        return 0.0;
    }
    let a = a2.sqrt();
    let (s, w) = gauss_legendre_on(order, -a, a);
    let (u, v) = plane.tangents();
    let c = plane.omega.map(|x| x * plane.p);
    compensated_sum(s.iter().zip(&w).flat_map(|(si, wi)| {
        s.iter().zip(&w).map(move |(ti, wj)| {
            let x = [
                c[0] + si * u[0] + ti * v[0],
                c[1] + si * u[1] + ti * v[1],
                c[2] + si * u[2] + ti * v[2],
            ];
            wi * wj * f(x)
        })
    }))
}

/// Product rule on `S^2`: Gauss–Legendre in `cos theta` times uniform azimuths.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereQuadrature {
    pub directions: Vec<[f64; 3]>,
    /// `(theta, phi)` of each direction.
    pub angles: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl SphereQuadrature {
    pub fn new(order_theta: usize, n_phi: usize) -> Self {
        let (ct, wt) = gauss_legendre(order_theta);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut directions = Vec::with_capacity(order_theta * n_phi);
        let mut angles = Vec::with_capacity(order_theta * n_phi);
        let mut weights = Vec::with_capacity(order_theta * n_phi);
        for (c, w) in ct.iter().zip(&wt) {
            let s = (1.0 - c * c).sqrt();
            let theta = c.acos();
            for j in 0..n_phi {
                let phi = dphi * j as f64;
                directions.push([s * phi.cos(), s * phi.sin(), *c]);
                angles.push((theta, phi));
                weights.push(w * dphi);
            }
        }
        Self {
            directions,
            angles,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

impl Default for SphereQuadrature {
    fn default() -> Self {
        Self::new(32, 64)
    }
}

/// Resolution of the sinogram pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinogramGrid {
    pub p_min: f64,
    pub p_max: f64,
    pub dp: f64,
    pub plane_order: usize,
    pub support_radius: f64,
}

impl Default for SinogramGrid {
    fn default() -> Self {
        Self {
            p_min: -3.5,
            p_max: 3.5,
            dp: 0.02,
            plane_order: 48,
            support_radius: 6.0,
        }
    }
}

impl SinogramGrid {
    pub fn offsets(&self) -> Vec<f64> {
        let n = ((self.p_max - self.p_min) / self.dp).round() as usize;
        (0..=n).map(|i| self.p_min + self.dp * i as f64).collect()
    }
}

/// Plane integrals on every quadrature direction and offset, with a spline in `p`.
#[derive(Debug, Clone)]
pub struct Sinogram {
    pub quad: SphereQuadrature,
    pub offsets: Vec<f64>,
    /// `values[d][i] = J(omega_d, offsets[i])`.
    pub values: Vec<Vec<f64>>,
    splines: Vec<CubicSpline>,
}

impl Sinogram {
    pub fn compute<F: Fn([f64; 3]) -> f64 + Sync>(
        f: &F,
        quad: SphereQuadrature,
        grid: &SinogramGrid,
    ) -> Result<Self> {
        if !(grid.dp > 0.0) || grid.p_max <= grid.p_min {
            return Err(Error::InvalidParameter(
                "sinogram offset grid is empty".into(),
            ));
        }
        let offsets = grid.offsets();
        let values: Vec<Vec<f64>> = quad
            .directions
            .par_iter()
            .map(|w| {
                offsets
                    .iter()
                    .map(|&p| {
                        r3_radon(
                            f,
                            grid.support_radius,
                            &PlaneR3 { omega: *w, p },
                            grid.plane_order,
                        )
                    })
                    .collect()
            })
            .collect();
        let splines = values
            .iter()
            .map(|v| CubicSpline::new(offsets.clone(), v.clone()))
            .collect();
        Ok(Self {
            quad,
            offsets,
            values,
            splines,
        })
    }

    /// Interpolated `J(omega_d, p)`; zero outside the offset range.
    pub fn eval(&self, d: usize, p: f64) -> f64 {
        self.splines[d].eval(p)
    }

    /// CSV `omega_theta,omega_phi,p,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "omega_theta,omega_phi,p,value")?;
        for (d, row) in self.values.iter().enumerate() {
            let (t, ph) = self.quad.angles[d];
            for (p, v) in self.offsets.iter().zip(row) {
                writeln!(out, "{t},{ph},{p},{v}")?;
            }
        }
        Ok(())
    }
}

/// Back-projection `\int_{S^2} J(w, w.x) dw` with the quadrature.
pub fn backproject<J: Fn(usize, f64) -> f64>(
    jfun: &J,
    x: [f64; 3],
    quad: &SphereQuadrature,
) -> f64 {
    compensated_sum(
        quad.directions
            .iter()
            .zip(&quad.weights)
            .enumerate()
            .map(|(d, (w, wt))| wt * jfun(d, dot(w, &x))),
    )
}

/// Reconstruction at `x`: seven-point Laplacian of the back-projection with one
/// Richardson step (`h`, `h/2`), scaled by `-1/(8 pi^2)`.
pub fn r3_inverse<J: Fn(usize, f64) -> f64>(
    jfun: &J,
    x: [f64; 3],
    quad: &SphereQuadrature,
    fd_step: f64,
) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidStep(fd_step));
    }
    let g0 = backproject(jfun, x, quad);
    let lap = |h: f64| {
        let mut s = -6.0 * g0;
        for i in 0..3 {
            for sgn in [-1.0, 1.0] {
                let mut y = x;
                y[i] += sgn * h;
                s += backproject(jfun, y, quad);
            }
        }
        s / (h * h)
    };
    let l = (4.0 * lap(fd_step / 2.0) - lap(fd_step)) / 3.0;
    Ok(-l / (8.0 * PI * PI))
}

/// A reconstruction sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconRow {
    pub x: [f64; 3],
    pub f_rec: f64,
    pub f_true: f64,
}

impl ReconRow {
    pub fn abs_err(&self) -> f64 {
        (self.f_rec - self.f_true).abs()
    }
}

/// Reconstructs on an `n^3` grid over `[-half, half]^3`.
pub fn reconstruct_grid<F: Fn([f64; 3]) -> f64 + Sync>(
    sino: &Sinogram,
    f_true: &F,
    n: usize,
    half: f64,
    fd_step: f64,
) -> Result<Vec<ReconRow>> {
    if n < 2 {
        return Err(Error::InvalidParameter(
            "reconstruction grid needs n >= 2".into(),
        ));
    }
    let coords: Vec<f64> = (0..n)
        .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect();
    let mut pts = Vec::with_capacity(n * n * n);
    for &a in &coords {
        for &b in &coords {
            for &c in &coords {
                pts.push([a, b, c]);
            }
        }
    }
    let jfun = |d: usize, p: f64| sino.eval(d, p);
    pts.par_iter()
        .map(|&x| {
            Ok(ReconRow {
                x,
                f_rec: r3_inverse(&jfun, x, &sino.quad, fd_step)?,
                f_true: f_true(x),
            })
        })
        .collect()
}

/// CSV `x,y,z,f_rec,f_true,abs_err`.
pub fn write_reconstruction_csv<W: Write>(rows: &[ReconRow], mut out: W) -> io::Result<()> {
    writeln!(out, "x,y,z,f_rec,f_true,abs_err")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.x[0],
            r.x[1],
            r.x[2],
            r.f_rec,
            r.f_true,
            r.abs_err()
        )?;
    }
    Ok(())
}

/// `exp(-|x|^2)`.
pub fn gaussian(x: [f64; 3]) -> f64 {
    (-dot(&x, &x)).exp()
}
