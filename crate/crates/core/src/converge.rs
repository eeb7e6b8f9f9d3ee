//! Grid and cutoff ladders for named observables.

use crate::error::{Error, Result};
use crate::quadrature::MomentumGrid;
use crate::trimers::{efimov_spectrum, find_trimers, TrimerSolver, DEFAULT_THETA, ENERGY_FLOOR};
use crate::twobody::AmplitudeContext;
use crate::units::ModelCouplings;
use serde::{Deserialize, Serialize};

/// Shallowest depth searched for the Efimov ladder, in 1/b^2. Resolves three
/// levels at unitarity and stays above the fourth.
pub const EFIMOV_DEPTH_MIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub observable: String,
    /// Name of the parameter that is varied.
    pub parameter: String,
    pub ladder: Vec<f64>,
    pub values: Vec<f64>,
    /// |v_i - v_{i-1}| / |v_i|; the first entry is zero.
    pub deltas: Vec<f64>,
}

impl ConvergenceReport {
    pub fn new(observable: &str, parameter: &str, ladder: Vec<f64>, values: Vec<f64>) -> Self {
        let mut deltas = vec![0.0; values.len()];
        for i in 1..values.len() {
            deltas[i] = ((values[i] - values[i - 1]) / values[i]).abs();
        }
        Self {
            observable: observable.into(),
            parameter: parameter.into(),
            ladder,
            values,
            deltas,
        }
    }

    /// Successive changes never increase.
    pub fn is_monotone(&self) -> bool {
        self.deltas.windows(2).skip(1).all(|w| w[1] <= w[0])
    }
}

/// Observables available to the ladder runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// E1/E2 at unitarity against the number of grid points.
    EfimovRatio,
    /// Deepest trimer at unitarity against the number of grid points.
    GroundTrimer,
    /// Deepest trimer at unitarity against K_max (in 1/b) at fixed n.
    GroundTrimerKmax,
}

impl Observable {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "efimov_ratio" => Ok(Self::EfimovRatio),
            "ground_trimer" => Ok(Self::GroundTrimer),
            "ground_trimer_kmax" => Ok(Self::GroundTrimerKmax),
            _ => Err(Error::Config(format!(
                "unknown observable '{s}' (efimov_ratio, ground_trimer, ground_trimer_kmax)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::EfimovRatio => "efimov_ratio",
            Self::GroundTrimer => "ground_trimer",
            Self::GroundTrimerKmax => "ground_trimer_kmax",
        }
    }
}

/// Settings shared by the rungs of a ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderBase {
    pub n: usize,
    /// In units of 1/b.
    pub k_min: f64,
    pub k_max: f64,
}

fn ground_trimer(c: &ModelCouplings, solver: &TrimerSolver) -> Result<f64> {
    let ctx = AmplitudeContext::at_detuning(c, 0.0);
    let scale = ctx.energy_scale();
    find_trimers(&ctx, 1e-3 * scale, ENERGY_FLOOR * scale, solver)
        .first()
        .copied()
        .ok_or_else(|| Error::Numerical("no trimer in [-10, -1e-3]/b^2".into()))
}

fn solver(c: &ModelCouplings, n: usize, base: &LadderBase, k_max: f64) -> TrimerSolver {
    TrimerSolver::new(MomentumGrid::log_panels(n, base.k_min / c.b, k_max / c.b), DEFAULT_THETA)
}

/// Run `obs` over `ladder` (grid sizes, or K_max values in 1/b).
pub fn run_ladder(c: &ModelCouplings, obs: Observable, ladder: &[f64], base: &LadderBase) -> Result<ConvergenceReport> {
    if ladder.is_empty() {
        return Err(Error::Config("empty convergence ladder".into()));
    }
    let mut values = Vec::with_capacity(ladder.len());
    for &rung in ladder {
        let v = match obs {
            Observable::EfimovRatio => {
                let s = solver(c, rung as usize, base, base.k_max);
                let spectrum = efimov_spectrum(c, EFIMOV_DEPTH_MIN / (c.b * c.b), &s);
                let e = &spectrum.energies;
                if e.len() < 3 {
                    return Err(Error::Numerical(format!("{} trimers resolved at n = {rung}; need 3", e.len())));
                }
                e[1] / e[2]
            }
            Observable::GroundTrimer => ground_trimer(c, &solver(c, rung as usize, base, base.k_max))?,
            Observable::GroundTrimerKmax => ground_trimer(c, &solver(c, base.n, base, rung))?,
        };
        values.push(v);
    }
    let parameter = match obs {
        Observable::GroundTrimerKmax => "k_max_times_b",
        _ => "n",
    };
    Ok(ConvergenceReport::new(obs.as_str(), parameter, ladder.to_vec(), values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_rung_has_zero_delta() {
        let r = ConvergenceReport::new("x", "n", vec![400.0], vec![1.5]);
        assert_eq!(r.deltas, vec![0.0]);
        assert!(r.is_monotone());
    }

    #[test]
    fn deltas_are_relative_changes() {
        let r = ConvergenceReport::new("x", "n", vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 2.5]);
        assert!((r.deltas[1] - 0.5).abs() < 1e-15);
        assert!((r.deltas[2] - 0.2).abs() < 1e-15);
        assert!(r.is_monotone());
    }

    #[test]
    fn unknown_observable_is_config_error() {
        assert!(matches!(Observable::parse("nope"), Err(Error::Config(_))));
        assert_eq!(Observable::parse("efimov_ratio").unwrap(), Observable::EfimovRatio);
    }

    #[test]
    fn empty_ladder_rejected() {
        let c = ModelCouplings::from_reduced(1.0, 10.0, 1.0).unwrap();
        let base = LadderBase { n: 100, k_min: 1e-6, k_max: 12.0 };
        assert!(run_ladder(&c, Observable::GroundTrimer, &[], &base).is_err());
    }
}
