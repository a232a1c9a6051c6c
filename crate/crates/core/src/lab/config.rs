//! Versioned TOML experiment definitions.
//!
//! ```toml
//! schema_version = 1
//! dim = 2
//! element = "q1"
//! levels = [2, 7]
//! tolerance = 1e-9
//!
//! [material]
//! kind = "checkerboard"
//! blocks = 4
//! d_low = 1.0
//! d_high = 40.0
//! absorption = 1.0
//! nu_fission = 1.0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_checkerboard, ElementKind, MaterialProps, Region, RegionMap};

pub const SCHEMA_VERSION: u32 = 1;

/// Material layout of the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MaterialSpec {
    Homogeneous {
        diffusion: f64,
        absorption: f64,
        nu_fission: f64,
    },
    /// `blocks^d` squares alternating between `d_high` (even index sum) and `d_low`.
    Checkerboard {
        blocks: usize,
        d_low: f64,
        d_high: f64,
        absorption: f64,
        nu_fission: f64,
    },
    Regions {
        region: Vec<Region>,
    },
}

impl MaterialSpec {
    pub fn region_map(&self, dim: usize) -> Result<RegionMap> {
        match self {
            MaterialSpec::Homogeneous {
                diffusion,
                absorption,
                nu_fission,
            } => RegionMap::homogeneous(
                dim,
                MaterialProps::new(*diffusion, *absorption, *nu_fission)?,
            ),
            MaterialSpec::Checkerboard {
                blocks,
                d_low,
                d_high,
                absorption,
                nu_fission,
            } => build_checkerboard(dim, *blocks, *d_low, *d_high, *absorption, *nu_fission),
            MaterialSpec::Regions { region } => RegionMap::new(dim, region.clone()),
        }
    }

    /// `D_max / D_min` over the layout.
    pub fn contrast(&self) -> f64 {
        match self {
            MaterialSpec::Homogeneous { .. } => 1.0,
            MaterialSpec::Checkerboard { d_low, d_high, .. } => {
                d_low.max(*d_high) / d_low.min(*d_high)
            }
            MaterialSpec::Regions { region } => {
                let (lo, hi) = region.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), r| {
                    (lo.min(r.props.diffusion), hi.max(r.props.diffusion))
                });
                hi / lo
            }
        }
    }
}

fn default_tolerance() -> f64 {
    1e-9
}

/// One experiment. Command-line flags override the optional fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabConfig {
    pub schema_version: u32,
    pub dim: usize,
    #[serde(default = "default_element")]
    pub element: ElementKind,
    /// Inclusive `[first, last]` refinement levels.
    #[serde(default)]
    pub levels: Option<[u32; 2]>,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub seed_level: Option<u32>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub material: MaterialSpec,
}

fn default_element() -> ElementKind {
    ElementKind::Q1
}

impl LabConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LabConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        LabConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Config(format!(
                "tolerance {} not in (0, 1)",
                self.tolerance
            )));
        }
        if let Some([a, b]) = self.levels {
            if a == 0 || a > b {
                return Err(Error::Config(format!(
                    "level range {a}..{b} is empty or starts at 0"
                )));
            }
        }
        self.region_map()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn region_map(&self) -> Result<RegionMap> {
        self.material.region_map(self.dim)
    }
}

/// Parses `a..b` (inclusive) or a single level.
pub fn parse_levels(s: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let bad = || Error::Config(format!("level range {s:?} is not of the form a..b"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().parse().map_err(|_| bad())?;
    if a == 0 {
        return Err(bad());
    }
    Ok(a..=b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHECKER: &str = r#"
schema_version = 1
dim = 2
levels = [2, 4]

[material]
kind = "checkerboard"
blocks = 4
d_low = 1.0
d_high = 40.0
absorption = 1.0
nu_fission = 1.0
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = LabConfig::from_toml(CHECKER).unwrap();
        assert_eq!(c.material.contrast(), 40.0);
        assert_eq!(LabConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_unknown_keys_and_versions() {
        assert!(LabConfig::from_toml(&CHECKER.replace("levels", "levles")).is_err());
        assert!(
            LabConfig::from_toml(&CHECKER.replace("blocks = 4", "blocks = 4\ncolor = 1")).is_err()
        );
        let v2 = CHECKER.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(LabConfig::from_toml(&v2), Err(Error::Config(_))));
    }

    #[test]
    fn level_ranges() {
        assert_eq!(parse_levels("1..6").unwrap(), 1..=6);
        assert_eq!(parse_levels("3").unwrap(), 3..=3);
        assert_eq!(parse_levels("4..3").unwrap().count(), 0);
        assert!(parse_levels("0..3").is_err());
    }
}
