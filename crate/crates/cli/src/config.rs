//! Run configuration. Every section has defaults; unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use symspace::model::PointRecord;
use symspace::{DensitySpec, GeneratorSpec, OrbitInvariants, QuadratureScheme, Space};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Generator spec; absent only for `invert-r3`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<GeneratorSpec>,
    #[serde(default)]
    pub seed: u64,
    /// Model tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub geodesic: GeodesicConfig,
    #[serde(default)]
    pub curvature: CurvatureConfig,
    #[serde(default)]
    pub radon: RadonConfig,
    #[serde(default)]
    pub dual_radon: DualRadonConfig,
    #[serde(default)]
    pub invert_r3: InvertR3Config,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            space: None,
            seed: 0,
            tol: default_tol(),
            out: default_out(),
            verify: VerifyConfig::default(),
            geodesic: GeodesicConfig::default(),
            curvature: CurvatureConfig::default(),
            radon: RadonConfig::default(),
            dual_radon: DualRadonConfig::default(),
            invert_r3: InvertR3Config::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub points: usize,
    pub fd_step: f64,
    /// Adds a random totally symmetric tensor to the connection (negative control).
    pub perturb_connection: bool,
    pub perturbation: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            points: 8,
            fd_step: 1e-4,
            perturb_connection: false,
            perturbation: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicConfig {
    /// Start point; the base point when absent.
    pub point: Option<PointRecord>,
    /// Ambient initial velocity, projected to the horizontal space; random when absent.
    pub velocity: Option<Vec<f64>>,
    /// Euclidean norm of the initial velocity.
    pub speed: f64,
    pub t: f64,
    pub step: f64,
    pub every: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        Self {
            point: None,
            velocity: None,
            speed: 1.0,
            t: 5.0,
            step: 1e-3,
            every: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvatureConfig {
    pub points: usize,
    pub fd_step: f64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self {
            points: 5,
            fd_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadonConfig {
    /// Orbit of the submanifolds; `q = 1` through the compact or hyperbolic default when absent.
    pub invariants: Option<OrbitInvariants>,
    pub function: DensitySpec,
    /// Center of the registry function; the base point when absent.
    pub center: Option<PointRecord>,
    pub quadrature: QuadratureScheme,
    /// Number of random submanifolds in the orbit.
    pub submanifolds: usize,
}

impl Default for RadonConfig {
    fn default() -> Self {
        Self {
            invariants: None,
            function: DensitySpec::Gaussian { beta: 2.0 },
            center: None,
            quadrature: QuadratureScheme::Grid {
                n_theta: 24,
                n_phi: 48,
            },
            submanifolds: 10,
        }
    }
}

/// The function on submanifolds fed to the dual transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SubmanifoldFunction {
    Constant {
        value: f64,
    },
    /// `F = Rad g` on a grid of the given resolution.
    RadonOf {
        function: DensitySpec,
        n_theta: usize,
        n_phi: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualRadonConfig {
    pub q: usize,
    pub function: SubmanifoldFunction,
    pub center: Option<PointRecord>,
    pub samples: usize,
    /// Evaluation points: the base point followed by random points.
    pub points: usize,
}

impl Default for DualRadonConfig {
    fn default() -> Self {
        Self {
            q: 1,
            function: SubmanifoldFunction::RadonOf {
                function: DensitySpec::Gaussian { beta: 1.0 },
                n_theta: 12,
                n_phi: 24,
            },
            center: None,
            samples: 1000,
            points: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvertR3Config {
    /// Width of `exp(-beta |x|^2)`.
    pub beta: f64,
    pub order_theta: usize,
    pub n_phi: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub dp: f64,
    pub plane_order: usize,
    pub support_radius: f64,
    pub grid: usize,
    pub half_width: f64,
    pub fd_step: f64,
    /// Bound on the max error relative to `f(0)`.
    pub max_rel_error: f64,
    pub write_sinogram: bool,
}

impl Default for InvertR3Config {
    fn default() -> Self {
        Self {
            beta: 1.0,
            order_theta: 32,
            n_phi: 64,
            p_min: -3.5,
            p_max: 3.5,
            dp: 0.02,
            plane_order: 48,
            support_radius: 6.0,
            grid: 21,
            half_width: 1.5,
            fd_step: 1e-2,
            max_rel_error: 1e-2,
            write_sinogram: true,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        // serde_json reports line and column of the offending field
        serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config error: {e}"))
    }

    pub fn build_space(&self) -> Result<Space> {
        let spec = self
            .space
            .as_ref()
            .context("config has no \"space\" section")?;
        let (omega, gen) = spec.build(self.tol)?;
        Ok(Space::new(omega, gen, self.tol)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.tol, 1e-9);
        assert_eq!(cfg.invert_r3.grid, 21);
        assert!(cfg.build_space().is_err());
    }

    #[test]
    fn nested_unknown_key_is_located() {
        let err = RunConfig::parse("{\n  \"radon\": {\"submanifold\": 3}\n}")
            .unwrap_err()
            .to_string();
        assert!(
            err.contains("submanifold") && err.contains("line 2"),
            "{err}"
        );
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{"space": {"n": 3, "case": "nilpotent", "r": 2, "p": 1}, "seed": 4,
            "dual_radon": {"function": {"kind": "constant", "value": 2}}}"#;
        let cfg = RunConfig::parse(text).unwrap();
        let back = RunConfig::parse(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(
            serde_json::to_value(&cfg).unwrap(),
            serde_json::to_value(&back).unwrap()
        );
        assert_eq!(cfg.build_space().unwrap().n(), 3);
    }
}
