//! Reduced units and coupling calibration.
//!
//! Internally hbar = m = 1 and lengths are measured in units of the form
//! factor range b, so energies are in units of hbar^2/(m b^2). Kinetic
//! energies follow eps_k = k^2/2, a relative-motion pair has E = k^2 and a
//! dimer sits at E = -q_dim^2. Everything in Gauss, Bohr radii or SI lives
//! in this module.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Reduced Planck constant, J s (CODATA 2018).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Bohr radius, m.
pub const BOHR: f64 = 5.291_772_109_03e-11;
/// Atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// One Gauss in Tesla.
pub const GAUSS: f64 = 1e-4;

/// Conversion layer between reduced and laboratory units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitSystem {
    pub mass_amu: f64,
    /// Bohr radii per internal length.
    pub length_unit: f64,
    /// hbar^2/(m L^2) in Joule.
    pub energy_unit: f64,
}

impl UnitSystem {
    pub fn new(mass_amu: f64, length_unit_a0: f64) -> Self {
        let m = mass_amu * AMU;
        let l = length_unit_a0 * BOHR;
        Self {
            mass_amu,
            length_unit: length_unit_a0,
            energy_unit: HBAR * HBAR / (m * l * l),
        }
    }

    pub fn length_from_a0(&self, a0: f64) -> f64 {
        a0 / self.length_unit
    }

    pub fn length_to_a0(&self, l: f64) -> f64 {
        l * self.length_unit
    }

    pub fn energy_from_joule(&self, e: f64) -> f64 {
        e / self.energy_unit
    }

    pub fn energy_to_joule(&self, e: f64) -> f64 {
        e * self.energy_unit
    }

    /// Reduced energy expressed as a frequency E/h in MHz.
    pub fn energy_to_mhz(&self, e: f64) -> f64 {
        e * self.energy_unit / PLANCK * 1e-6
    }

    /// Reduced energy per Gauss for a magnetic moment difference in mu_B.
    pub fn energy_per_gauss(&self, delta_mu: f64) -> f64 {
        delta_mu * MU_B * GAUSS / self.energy_unit
    }

    /// Rate constant with dimension length^6/time: reduced value times
    /// (hbar/m) L^4, returned in cm^6/s.
    pub fn rate6_to_cm6_per_s(&self, alpha: f64) -> f64 {
        let l = self.length_unit * BOHR;
        alpha * HBAR / (self.mass_amu * AMU) * l.powi(4) * 1e12
    }

    pub fn rate6_from_cm6_per_s(&self, alpha_cgs: f64) -> f64 {
        let l = self.length_unit * BOHR;
        alpha_cgs * 1e-12 / (HBAR / (self.mass_amu * AMU) * l.powi(4))
    }
}

/// Published description of one magnetic Feshbach resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceParams {
    pub label: String,
    /// Resonance position, G.
    #[serde(rename = "B0")]
    pub b0: f64,
    /// Width, G.
    #[serde(rename = "deltaB")]
    pub delta_b: f64,
    /// Background scattering length, a0.
    pub a_bg: f64,
    /// Magnetic moment difference in units of mu_B, signed.
    pub delta_mu: f64,
    /// van der Waals length, a0.
    #[serde(rename = "R_vdW")]
    pub r_vdw: f64,
    /// Form factor range, a0. Defaults to R_vdW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// Atomic mass, amu.
    pub mass: f64,
    /// Measured threshold fields carried for comparison only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub observed: Vec<ObservedThreshold>,
}

/// Experimental threshold position attached to a resonance as an annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedThreshold {
    /// "three_atom" or "atom_dimer".
    pub kind: String,
    /// Field, G.
    pub field: f64,
    #[serde(default)]
    pub note: String,
}

impl ResonanceParams {
    pub fn range_a0(&self) -> f64 {
        self.b.unwrap_or(self.r_vdw)
    }

    pub fn with_range(mut self, b_a0: f64) -> Self {
        self.b = Some(b_a0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let b = self.range_a0();
        if !(b > 0.0) {
            return Err(Error::InvalidParameter("b > 0".into()));
        }
        if !(self.mass > 0.0) {
            return Err(Error::InvalidParameter("mass > 0".into()));
        }
        if !(self.r_vdw > 0.0) {
            return Err(Error::InvalidParameter("R_vdW > 0".into()));
        }
        if !(self.delta_b.is_finite() && self.delta_mu.is_finite() && self.a_bg.is_finite() && self.b0.is_finite()) {
            return Err(Error::InvalidParameter("finite B0, deltaB, a_bg, delta_mu".into()));
        }
        let w = self.delta_mu * self.delta_b;
        if w == 0.0 || self.a_bg == 0.0 || w.signum() != self.a_bg.signum() {
            return Err(Error::SignMismatch {
                width: w,
                a_bg: self.a_bg,
            });
        }
        let crit = b * PI.sqrt();
        if ((self.a_bg - crit) / crit).abs() < 1e-9 {
            return Err(Error::SingularBackground { a_bg: self.a_bg, b_sqrt_pi: crit });
        }
        Ok(())
    }
}

/// Scattering length in a0 at field `b_gauss`.
pub fn scattering_length(res: &ResonanceParams, b_gauss: f64) -> Result<f64> {
    let d = b_gauss - res.b0;
    if d == 0.0 {
        return Err(Error::PoleAtResonance);
    }
    if d.is_infinite() {
        return Ok(res.a_bg);
    }
    if b_gauss == res.b0 + res.delta_b {
        return Ok(0.0);
    }
    Ok(res.a_bg * (1.0 - res.delta_b / d))
}

/// Detuning nu = delta_mu (B - B0) in reduced energy units.
pub fn detuning(res: &ResonanceParams, b_gauss: f64) -> f64 {
    let units = UnitSystem::new(res.mass, res.range_a0());
    units.energy_per_gauss(res.delta_mu) * (b_gauss - res.b0)
}

/// Derived couplings in reduced units (lengths in b, hbar = m = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCouplings {
    /// Open-channel contact strength.
    pub g0: f64,
    /// Strength at which the open channel alone binds at threshold.
    pub g0_crit: f64,
    /// Interchannel coupling, chosen real positive.
    pub lambda: f64,
    /// Reduced energy per Gauss of detuning.
    pub nu_per_gauss: f64,
    /// E_mol - nu.
    pub e_mol_offset: f64,
    /// Form factor range (1 in these units).
    pub b: f64,
    /// Background scattering length.
    pub a_bg: f64,
    /// Energy width W = delta_mu deltaB.
    pub width: f64,
    /// Resonance position, G.
    pub b0_gauss: f64,
}

impl ModelCouplings {
    /// Build couplings directly from reduced (b, a_bg, W).
    pub fn from_reduced(b: f64, a_bg: f64, width: f64) -> Result<Self> {
        if !(b > 0.0) {
            return Err(Error::InvalidParameter("b > 0".into()));
        }
        if width == 0.0 || width.signum() != a_bg.signum() {
            return Err(Error::SignMismatch { width, a_bg });
        }
        let g0_crit = -4.0 * PI.powf(1.5) * b;
        let denom = 1.0 / a_bg - 1.0 / (PI.sqrt() * b);
        if denom.abs() < 1e-9 / b {
            return Err(Error::SingularBackground {
                a_bg,
                b_sqrt_pi: b * PI.sqrt(),
            });
        }
        let g0 = 4.0 * PI / denom;
        let lambda = (width * g0 * g0 / (8.0 * PI * a_bg)).sqrt();
        Ok(Self {
            g0,
            g0_crit,
            lambda,
            nu_per_gauss: 1.0,
            e_mol_offset: 2.0 * lambda * lambda / g0 - width,
            b,
            a_bg,
            width,
            b0_gauss: 0.0,
        })
    }

    /// a_bg recovered from g0.
    pub fn a_bg_from_g0(&self) -> f64 {
        self.b * self.g0 * PI.sqrt() / (self.g0 - self.g0_crit)
    }

    /// W recovered from Lambda.
    pub fn width_from_lambda(&self) -> f64 {
        8.0 * PI * self.lambda * self.lambda * self.a_bg / (self.g0 * self.g0)
    }

    /// R* = 1/(a_bg W).
    pub fn r_star(&self) -> f64 {
        1.0 / (self.a_bg * self.width)
    }

    pub fn detuning(&self, b_gauss: f64) -> f64 {
        self.nu_per_gauss * (b_gauss - self.b0_gauss)
    }

    pub fn field(&self, nu: f64) -> f64 {
        self.b0_gauss + nu / self.nu_per_gauss
    }
}

/// Everything needed to go between laboratory and reduced quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub res: ResonanceParams,
    pub units: UnitSystem,
    pub couplings: ModelCouplings,
}

pub fn derive_couplings(res: &ResonanceParams) -> Result<Calibration> {
    res.validate()?;
    let units = UnitSystem::new(res.mass, res.range_a0());
    let a_bg = units.length_from_a0(res.a_bg);
    let nu_per_gauss = units.energy_per_gauss(res.delta_mu);
    let width = nu_per_gauss * res.delta_b;
    let mut couplings = ModelCouplings::from_reduced(1.0, a_bg, width)?;
    couplings.nu_per_gauss = nu_per_gauss;
    couplings.b0_gauss = res.b0;
    Ok(Calibration {
        res: res.clone(),
        units,
        couplings,
    })
}

impl Calibration {
    /// deltaB in Gauss recovered from the couplings.
    pub fn delta_b_from_couplings(&self) -> f64 {
        self.couplings.width_from_lambda() / self.couplings.nu_per_gauss
    }

    /// a_bg in a0 recovered from the couplings.
    pub fn a_bg_from_couplings(&self) -> f64 {
        self.units.length_to_a0(self.couplings.a_bg_from_g0())
    }

    pub fn r_star_a0(&self) -> f64 {
        self.units.length_to_a0(self.couplings.r_star())
    }
}

/// Bundled catalog of resonances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub resonance: Vec<ResonanceParams>,
}

const BUNDLED: &str = include_str!("../data/catalog.toml");

impl Catalog {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED).expect("bundled catalog parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Load a catalog file, TOML or JSON by extension.
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|s| s.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    /// Case-insensitive exact label match, else unique prefix match.
    pub fn find(&self, label: &str) -> Result<&ResonanceParams> {
        let l = label.to_ascii_lowercase();
        if let Some(r) = self.resonance.iter().find(|r| r.label.to_ascii_lowercase() == l) {
            return Ok(r);
        }
        let hits: Vec<_> = self
            .resonance
            .iter()
            .filter(|r| r.label.to_ascii_lowercase().starts_with(&l))
            .collect();
        match hits.as_slice() {
            [one] => Ok(one),
            [] => Err(Error::Config(format!("unknown resonance label '{label}'"))),
            _ => Err(Error::Config(format!("ambiguous resonance label '{label}'"))),
        }
    }
}
