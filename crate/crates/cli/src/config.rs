//! Run configuration: one TOML or JSON document, overridden by flags.

use fesh3b::kernel3b::ANGULAR_ORDER;
use fesh3b::units::{Catalog, ResonanceParams};
use fesh3b::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResonanceRef {
    Label(String),
    Inline(ResonanceParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    /// In units of 1/b.
    pub k_min: f64,
    pub k_max: f64,
    pub angular_order: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n: 400,
            k_min: 1e-6,
            k_max: 12.0,
            angular_order: ANGULAR_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub b_from: f64,
    pub b_to: f64,
    pub nb: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrimerConfig {
    /// Number of unitarity trimers whose branches are traced.
    pub levels: usize,
    /// Initial continuation step in 1/a, units of 1/b.
    pub step: f64,
}

impl Default for TrimerConfig {
    fn default() -> Self {
        Self { levels: 2, step: 2e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecombConfig {
    pub r_cut_factors: Vec<f64>,
    /// Box side used for the normalization check, units of b.
    pub box_l: f64,
    pub per_decade: f64,
    pub order: usize,
}

impl Default for RecombConfig {
    fn default() -> Self {
        Self {
            r_cut_factors: vec![0.5, 1.0, 2.0],
            box_l: 100.0,
            per_decade: 3.0,
            order: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub observable: String,
    pub ladder: Vec<f64>,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        Self {
            observable: "efimov_ratio".into(),
            ladder: vec![200.0, 400.0, 600.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub resonance: ResonanceRef,
    /// Catalog file searched for labels instead of the bundled one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog: Option<PathBuf>,
    /// Override b as a multiple of R_vdW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_over_rvdw: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub trimer: TrimerConfig,
    #[serde(default)]
    pub recomb: RecombConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn from_label(label: &str) -> Self {
        Self {
            resonance: ResonanceRef::Label(label.into()),
            catalog: None,
            b_over_rvdw: None,
            grid: GridConfig::default(),
            scan: None,
            trimer: TrimerConfig::default(),
            recomb: RecombConfig::default(),
            converge: ConvergeConfig::default(),
            out: None,
            threads: None,
        }
    }

    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.extension().and_then(|s| s.to_str()) == Some("json"))
    }

    /// Resolve the resonance, applying the b override.
    pub fn resonance_params(&self) -> Result<ResonanceParams> {
        let mut res = match &self.resonance {
            ResonanceRef::Inline(r) => r.clone(),
            ResonanceRef::Label(l) => {
                let cat = match &self.catalog {
                    Some(p) => Catalog::load(p)?,
                    None => Catalog::bundled(),
                };
                cat.find(l)?.clone()
            }
        };
        if let Some(f) = self.b_over_rvdw {
            if !(f > 0.0) {
                return Err(Error::InvalidParameter("b_over_rvdw > 0".into()));
            }
            let b = f * res.r_vdw;
            res = res.with_range(b);
        }
        res.validate()?;
        Ok(res)
    }

    /// Field range, defaulting to B0 +- 2 deltaB.
    pub fn scan_or_default(&self, res: &ResonanceParams) -> ScanConfig {
        self.scan.clone().unwrap_or(ScanConfig {
            b_from: res.b0 - 2.0 * res.delta_b.abs(),
            b_to: res.b0 + 2.0 * res.delta_b.abs(),
            nb: 81,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        if g.n == 0 || !(g.k_min > 0.0) || !(g.k_max > g.k_min) {
            return Err(Error::InvalidParameter("grid n > 0 and 0 < k_min < k_max".into()));
        }
        if g.angular_order != ANGULAR_ORDER {
            return Err(Error::InvalidParameter(format!("grid angular_order == {ANGULAR_ORDER}")));
        }
        if let Some(s) = &self.scan {
            if !(s.b_from.is_finite() && s.b_to.is_finite()) || s.b_to <= s.b_from || s.nb < 2 {
                return Err(Error::InvalidParameter("nonempty field range b_from < b_to with nb >= 2".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads > 0".into()));
        }
        if self.recomb.r_cut_factors.iter().any(|f| !(*f > 0.0)) || !(self.recomb.box_l > 0.0) {
            return Err(Error::InvalidParameter("positive r_cut_factors and box_l".into()));
        }
        if self.recomb.order == 0 || !(self.recomb.per_decade > 0.0) {
            return Err(Error::InvalidParameter("recomb order > 0 and per_decade > 0".into()));
        }
        if self.trimer.levels == 0 || !(self.trimer.step > 0.0) {
            return Err(Error::InvalidParameter("trimer levels > 0 and step > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_config_from_toml() {
        let c = RunConfig::parse("resonance = \"cs\"\n[grid]\nn = 200\n", false).unwrap();
        assert_eq!(c.grid.n, 200);
        assert_eq!(c.grid.k_max, 12.0);
        let r = c.resonance_params().unwrap();
        assert_eq!(r.a_bg, 1720.0);
        assert_eq!(r.range_a0(), 70.7);
    }

    #[test]
    fn inline_resonance_from_json() {
        let text = r#"{"resonance": {"label": "x", "B0": 10.0, "deltaB": 2.0, "a_bg": 50.0,
            "delta_mu": 1.5, "R_vdW": 40.0, "mass": 39.0}, "b_over_rvdw": 0.5}"#;
        let c = RunConfig::parse(text, true).unwrap();
        assert_eq!(c.resonance_params().unwrap().range_a0(), 20.0);
    }

    #[test]
    fn empty_range_rejected() {
        let mut c = RunConfig::from_label("na");
        c.scan = Some(ScanConfig { b_from: 907.0, b_to: 907.0, nb: 10 });
        assert!(c.validate().unwrap_err().is_config());
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::parse("resonance = \"cs\"\nbogus = 1\n", false).is_err());
    }
}
