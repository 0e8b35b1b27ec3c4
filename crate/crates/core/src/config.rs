//! Run configuration, read from TOML.
//!
//! ```toml
//! coeffs = [0.0, -2.0, 3.0, -1.0]   # h(x) = sum c_i x^i
//! x_max = 30.0
//! omega = 1.0
//! lambda = -0.1                     # optional
//! grid_points = 4096                # optional
//! output_dir = "out"                # optional
//!
//! [integrator]                      # optional, every key defaults
//! rel_tol = 1e-10
//! abs_tol = 1e-12
//! max_step = 0.5
//! max_steps = 1000000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::IntegratorConfig;
use crate::rmap::StroboscopicAnalyzer;
use crate::vectorfield::PolynomialVectorField;

pub const DEFAULT_GRID_POINTS: usize = 4096;

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub coeffs: Vec<f64>,
    pub x_max: f64,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<string>"))
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let config_err = |message: String| Error::Config { path: path.to_path_buf(), message };
        let cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.check().map_err(|e| config_err(e.to_string()))?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(Error::InvalidParameter(format!("omega must be positive, got {}", self.omega)));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidParameter(format!("grid_points must be at least 2, got {}", self.grid_points)));
        }
        if let Some(l) = self.lambda {
            if l.is_nan() {
                return Err(Error::InvalidParameter("lambda is NaN".into()));
            }
        }
        self.integrator.validate()?;
        PolynomialVectorField::new(self.coeffs.clone(), self.x_max).map(|_| ())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("RunConfig always serializes")
    }

    pub fn vector_field(&self) -> Result<PolynomialVectorField> {
        PolynomialVectorField::new(self.coeffs.clone(), self.x_max)
    }

    pub fn analyzer(&self) -> Result<StroboscopicAnalyzer> {
        StroboscopicAnalyzer::new(self.vector_field()?, self.omega, self.integrator)
    }
}
