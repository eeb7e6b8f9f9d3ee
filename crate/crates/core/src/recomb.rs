//! Three-body recombination at zero collision energy.
//!
//! The incoming three-atom plane wave enters the atom-molecule equation as
//! a delta function at K = 0. Writing F(K) = (2 pi)^3 delta(K) c0 + F_s(K),
//! the delta parts fix c0 = -3/D(0) = 12 pi a and leave
//!
//!   D(K) F_s(K) - 1/(2 pi^2) int dk k^2 Z(K, k; 0) F_s(k) = c0 Z(K, 0; 0).
//!
//! The equation is solved for N = D F_s, which is free of the bare-molecule
//! pole. When a shallow dimer exists, 1/D has a simple pole at
//! K_p = (2/sqrt 3) q_dim; it is handled by principal-value subtraction with
//! K_p added as an extra collocation point, and the outgoing-wave iπ term
//! added in closed form.

use crate::error::{Error, Result};
use crate::kernel3b::swave_kernel;
use crate::quadrature::{gauss_legendre_on, MomentumGrid};
use crate::special::erfcx;
use crate::twobody::{AmplitudeContext, EffectiveRangeModel, PairInteraction};
use crate::units::UnitSystem;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Relative disagreement of the two residue extractions that is tolerated.
pub const RESIDUE_TOLERANCE: f64 = 0.01;

/// Panel layout of the recombination grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecombGrid {
    pub k_min: f64,
    pub k_max: f64,
    pub per_decade: f64,
    pub order: usize,
}

impl RecombGrid {
    /// Finite-range default: [1e-6, 12]/b.
    pub fn finite_range(b: f64) -> Self {
        Self {
            k_min: 1e-6 / b,
            k_max: 12.0 / b,
            per_decade: 3.0,
            order: 16,
        }
    }

    /// Zero-range default spanning six decades below and four above the
    /// scales K_p and 1/R*.
    pub fn zero_range(k_pole: f64, r_star: f64) -> Self {
        let s = if r_star > 0.0 { 1.0 / r_star } else { k_pole };
        Self {
            k_min: 1e-6 * k_pole.min(s),
            k_max: 1e4 * k_pole.max(s),
            per_decade: 3.0,
            order: 16,
        }
    }

    /// Grid with extra panel edges clustered around the pole.
    pub fn build(&self, k_pole: Option<f64>) -> MomentumGrid {
        let marks: Vec<f64> = match k_pole {
            Some(kp) => [0.9, 0.97, 1.0, 1.03, 1.1].iter().map(|f| f * kp).collect(),
            None => Vec::new(),
        };
        MomentumGrid::with_breakpoints(self.k_min, self.k_max, self.per_decade, self.order, &marks)
    }
}

/// Solution of the driven equation at E = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenSolution {
    pub grid: MomentumGrid,
    /// Coefficient c0 of the (2 pi)^3 delta(K) part.
    pub beta_delta_coeff: f64,
    /// N = D F_s on the grid nodes.
    pub numerator: Vec<Complex64>,
    /// F_s on the grid nodes.
    pub beta_regular: Vec<Complex64>,
    /// Pole position and N there, when a shallow dimer is open.
    pub k_pole: Option<f64>,
    pub numerator_pole: Option<Complex64>,
    /// (K - K_p)/D(K) on the nodes and its limit 1/D'(K_p).
    g_nodes: Vec<f64>,
    g_pole: Option<f64>,
    /// max |A N - rhs| / max |rhs| with rows and unknowns scaled by K^2.
    pub residual: f64,
    pub energy: f64,
}

fn diag<P: PairInteraction + ?Sized>(pair: &P, k: f64) -> f64 {
    pair.inv_amplitude(Complex64::new(-0.75 * k * k, 0.0)).re / (4.0 * PI)
}

/// Sign changes of D that are zeros rather than poles: |D| at the
/// crossing is smaller than at the next nodes outward.
fn zero_crossings(d: &[f64]) -> usize {
    let n = d.len();
    (0..n.saturating_sub(1))
        .filter(|&j| d[j].signum() != d[j + 1].signum())
        .filter(|&j| {
            let inner = d[j].abs().max(d[j + 1].abs());
            let left = if j > 0 { d[j - 1].abs() } else { f64::INFINITY };
            let right = if j + 2 < n { d[j + 2].abs() } else { f64::INFINITY };
            inner < left.max(right)
        })
        .count()
}

/// c0 = -3/D(0) = 12 pi a.
pub fn delta_coefficient<P: PairInteraction + ?Sized>(pair: &P) -> f64 {
    12.0 * PI / pair.inverse_scattering_length()
}

/// Driven solution in the Feshbach-dimer regime (one shallow dimer open).
pub fn solve_driven<P: PairInteraction + ?Sized>(pair: &P, grid: &RecombGrid) -> Result<DrivenSolution> {
    let ed = pair.shallow_dimer().ok_or(Error::NoShallowDimer)?;
    let kp = 2.0 * ed.sqrt() / 3f64.sqrt();
    if kp >= grid.k_max || kp <= grid.k_min {
        return Err(Error::PoleOffGrid {
            k_pole: kp,
            k_max: grid.k_max,
        });
    }
    solve_inner(pair, grid, Some(kp))
}

/// Driven solution with no shallow dimer (nu > 0 side).
pub fn solve_driven_closed<P: PairInteraction + ?Sized>(pair: &P, grid: &RecombGrid) -> Result<DrivenSolution> {
    if pair.shallow_dimer().is_some() {
        return Err(Error::ShallowDimerPresent);
    }
    solve_inner(pair, grid, None)
}

fn solve_inner<P: PairInteraction + ?Sized>(pair: &P, layout: &RecombGrid, kp: Option<f64>) -> Result<DrivenSolution> {
    let grid = layout.build(kp);
    let b = pair.range();
    let n = grid.n();
    let off = usize::from(kp.is_some());
    let m = n + off;
    let mut kall = Vec::with_capacity(m);
    kall.extend(kp);
    kall.extend_from_slice(&grid.nodes);
    let dvals: Vec<f64> = grid.nodes.iter().map(|&k| diag(pair, k)).collect();
    let (g_nodes, g_pole): (Vec<f64>, Option<f64>) = match kp {
        Some(p) => {
            let g: Vec<f64> = grid.nodes.iter().zip(&dvals).map(|(&k, &d)| (k - p) / d).collect();
            let dd_dk = pair.inv_amplitude_slope(-0.75 * p * p) / (4.0 * PI) * (-1.5 * p);
            (g, Some(1.0 / dd_dk))
        }
        None => (dvals.iter().map(|d| 1.0 / d).collect(), None),
    };
    // exactly one open channel: D may change sign only at the pole
    let crossings = zero_crossings(&dvals);
    let allowed = usize::from(kp.is_some());
    if crossings > allowed {
        return Err(Error::Numerical(format!(
            "{crossings} sign changes of D(K) on the grid; more than one open channel"
        )));
    }
    let c0 = delta_coefficient(pair);
    if c0 == 0.0 {
        // a = 0: the source vanishes and so does the scattered wave
        let zero = vec![Complex64::new(0.0, 0.0); n];
        return Ok(DrivenSolution {
            grid,
            beta_delta_coeff: 0.0,
            numerator: zero.clone(),
            beta_regular: zero,
            k_pole: kp,
            numerator_pole: kp.map(|_| Complex64::new(0.0, 0.0)),
            g_nodes,
            g_pole,
            residual: 0.0,
            energy: 0.0,
        });
    }
    let rows: Vec<Vec<f64>> = kall
        .par_iter()
        .map(|&ki| {
            let mut row = Vec::with_capacity(m + 1);
            if let Some(p) = kp {
                row.push(swave_kernel(ki, p, 0.0, b).unwrap_or(f64::NAN));
            }
            for &kj in &grid.nodes {
                row.push(swave_kernel(ki, kj, 0.0, b).unwrap_or(f64::NAN));
            }
            row.push(c0 * swave_kernel(ki, 0.0, 0.0, b).unwrap_or(f64::NAN));
            row
        })
        .collect();
    let pv = kp.map(|p| {
        let s: f64 = grid.nodes.iter().zip(&grid.weights).map(|(&k, &w)| w / (k - p)).sum();
        Complex64::new(((grid.k_max - p) / (p - grid.k_min)).ln() - s, PI)
    });
    let mut a = DMatrix::<Complex64>::identity(m, m);
    let mut rhs = DVector::<Complex64>::zeros(m);
    let c = 1.0 / (2.0 * PI * PI);
    for i in 0..m {
        let row = &rows[i];
        if let (Some(p), Some(gp), Some(pv)) = (kp, g_pole, pv) {
            a[(i, 0)] -= c * row[0] * p * p * gp * pv;
        }
        for j in 0..n {
            let kj = grid.nodes[j];
            let z = row[j + off];
            let sing = match kp {
                Some(p) => grid.weights[j] * kj * kj * z * g_nodes[j] / (kj - p),
                None => grid.weights[j] * kj * kj * z * g_nodes[j],
            };
            a[(i, j + off)] -= c * sing;
        }
        rhs[i] = Complex64::new(row[m], 0.0);
    }
    if a.iter().any(|v| !v.is_finite()) || rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in driven system".into()));
    }
    // N ~ 1/K^2 at small K: solve for K^2 N with rows scaled by K^2
    let scaled = DMatrix::from_fn(m, m, |i, j| a[(i, j)] * (kall[i] / kall[j]).powi(2));
    let srhs = DVector::from_fn(m, |i, _| rhs[i] * kall[i] * kall[i]);
    let ssol = scaled
        .clone()
        .lu()
        .solve(&srhs)
        .ok_or_else(|| Error::Numerical("singular driven system".into()))?;
    let sol = DVector::from_fn(m, |j, _| ssol[j] / (kall[j] * kall[j]));
    let resid_vec = &scaled * &ssol - &srhs;
    let rmax = srhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let residual = resid_vec.iter().map(|v| v.norm()).fold(0.0, f64::max) / rmax;
    let numerator: Vec<Complex64> = sol.iter().skip(off).copied().collect();
    let beta_regular = numerator.iter().zip(&dvals).map(|(nv, d)| nv / *d).collect();
    Ok(DrivenSolution {
        grid,
        beta_delta_coeff: c0,
        numerator,
        beta_regular,
        k_pole: kp,
        numerator_pole: kp.map(|_| sol[0]),
        g_nodes,
        g_pole,
        residual,
        energy: 0.0,
    })
}

/// Residue of F at K_p by two routes: the subtraction coefficient N_p/D'(K_p),
/// and a degree-4 least-squares fit of (K - K_p) F_s on the six nodes
/// nearest the pole extrapolated to K_p.
pub fn residue_pair(sol: &DrivenSolution) -> Result<(Complex64, Complex64)> {
    let (Some(kp), Some(np), Some(gp)) = (sol.k_pole, sol.numerator_pole, sol.g_pole) else {
        return Err(Error::NoShallowDimer);
    };
    let direct = np * gp;
    let mut idx: Vec<usize> = (0..sol.grid.n()).collect();
    idx.sort_by(|&i, &j| {
        let di = (sol.grid.nodes[i] - kp).abs();
        let dj = (sol.grid.nodes[j] - kp).abs();
        di.partial_cmp(&dj).unwrap()
    });
    idx.truncate(6);
    let scale = idx.iter().map(|&i| (sol.grid.nodes[i] - kp).abs()).fold(0.0, f64::max);
    let deg = 4;
    let v = DMatrix::from_fn(idx.len(), deg + 1, |r, cidx| ((sol.grid.nodes[idx[r]] - kp) / scale).powi(cidx as i32));
    let svd = v.svd(true, true);
    let mut fit = Complex64::new(0.0, 0.0);
    for part in 0..2 {
        let y = DVector::from_iterator(
            idx.len(),
            idx.iter().map(|&i| {
                let val = sol.g_nodes[i] * sol.numerator[i];
                if part == 0 {
                    val.re
                } else {
                    val.im
                }
            }),
        );
        let coef = svd.solve(&y, 1e-14).map_err(|e| Error::Numerical(e.into()))?;
        if part == 0 {
            fit.re = coef[0];
        } else {
            fit.im = coef[0];
        }
    }
    Ok((direct, fit))
}

/// Residue of F at the outgoing pole; errors when the two extractions
/// disagree by more than 1%.
pub fn extract_residue(sol: &DrivenSolution) -> Result<Complex64> {
    let (direct, fit) = residue_pair(sol)?;
    let rel = (direct - fit).norm() / direct.norm().max(f64::MIN_POSITIVE);
    if rel > RESIDUE_TOLERANCE {
        return Err(Error::FitDivergence(rel));
    }
    Ok(direct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    FeshbachExact,
    DeepEstimate,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::FeshbachExact => "feshbach_exact",
            Regime::DeepEstimate => "deep_estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecombinationResult {
    /// Reduced units (length^4 with hbar = m = 1).
    pub alpha: f64,
    pub alpha_cm6: Option<f64>,
    pub regime: Regime,
    /// |gamma|, residue of the physical molecule amplitude.
    pub gamma_abs: Option<f64>,
    pub p_closed: Option<f64>,
    pub p_less: Option<f64>,
    pub residual: f64,
    /// Relative disagreement of the two residue extractions.
    pub residue_mismatch: Option<f64>,
    /// |alpha(L)/alpha(2L) - 1| for the box-size check.
    pub box_check: Option<f64>,
}

impl RecombinationResult {
    pub fn in_units(mut self, units: &UnitSystem) -> Self {
        self.alpha_cm6 = Some(units.rate6_to_cm6_per_s(self.alpha));
        self
    }
}

/// alpha = 2 sqrt3 q^3 |gamma|^2 / (9 pi p_closed).
///
/// With gamma = mu Res F and p_closed = 2 pi mu^2 / (-d(1/f_o)/dE) the
/// molecule factor cancels, so alpha is evaluated as
/// 2 sqrt3 q^3 |Res F|^2 (-d(1/f_o)/dE) / (18 pi^2), which stays defined
/// for contact models.
pub fn alpha_feshbach<P: PairInteraction + ?Sized>(pair: &P, grid: &RecombGrid) -> Result<RecombinationResult> {
    let ed = pair.shallow_dimer().ok_or(Error::NoShallowDimer)?;
    let sol = solve_driven(pair, grid)?;
    let (direct, fit) = residue_pair(&sol)?;
    let mismatch = (direct - fit).norm() / direct.norm().max(f64::MIN_POSITIVE);
    if mismatch > RESIDUE_TOLERANCE {
        return Err(Error::FitDivergence(mismatch));
    }
    let q = ed.sqrt();
    let slope = pair.inv_amplitude_slope(-ed);
    let alpha = 2.0 * 3f64.sqrt() * q.powi(3) * direct.norm_sqr() * (-slope) / (18.0 * PI * PI);
    let mu = pair.molecule_factor(-ed);
    Ok(RecombinationResult {
        alpha,
        alpha_cm6: None,
        regime: Regime::FeshbachExact,
        gamma_abs: Some(mu.abs() * direct.norm()),
        p_closed: Some(pair.closed_fraction_at(-ed)),
        p_less: None,
        residual: sol.residual,
        residue_mismatch: Some(mismatch),
        box_check: None,
    })
}

/// Zero-range effective-range reference for a > 0 (relaxation into the
/// shallow dimer). For a < 0 the contact model has no channel to decay
/// into and the rate is zero.
pub fn alpha_effective_range_reference(a: f64, r_star: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Ok(0.0);
    }
    let model = EffectiveRangeModel::new(a, r_star);
    let ed = model.shallow_dimer().ok_or(Error::NoShallowDimer)?;
    let kp = 2.0 * ed.sqrt() / 3f64.sqrt();
    Ok(alpha_feshbach(&model, &RecombGrid::zero_range(kp, r_star))?.alpha)
}

/// Configuration-space pair function
/// G(r; kappa) = int d^3k/(2 pi)^3 e^{i k.r} e^{-k^2 b^2/2} / (k^2 + kappa^2).
pub fn pair_green(r: f64, kappa: f64, b: f64) -> f64 {
    if b == 0.0 {
        return (-kappa * r).exp() / (4.0 * PI * r);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x1 = (kappa * b - r / b) * s;
    let x2 = (kappa * b + r / b) * s;
    if r < 1e-6 * b {
        // r -> 0 limit: derivative of erfcx difference
        let xm = kappa * b * s;
        let d = 2.0 * xm * erfcx(xm) - 2.0 / PI.sqrt();
        return -d * s / (b * 4.0 * PI);
    }
    let gauss = (-0.5 * r * r / (b * b)).exp();
    if x1 < 0.0 {
        // reflect erfcx(x1) = 2 exp(x1^2) - erfcx(-x1) to keep the Gaussian factor bounded
        let tail = 2.0 * (0.5 * kappa * kappa * b * b - kappa * r).exp();
        return (tail - gauss * (erfcx(-x1) + erfcx(x2))) / (8.0 * PI * r);
    }
    gauss / (8.0 * PI * r) * (erfcx(x1) - erfcx(x2))
}

/// Short-range probability estimate on the nu > 0 side.
///
/// P_< = [ int_{R_hyper < r_c} |psi - 1|^2 + (1/6) int_{R < r_c} |beta|^2 ] / L^6
/// for a box of side L, and alpha = P_< L^6 / R_vdW^2. The incoming plane
/// wave is subtracted so that a non-interacting gas gives zero.
pub fn alpha_deep(ctx: &AmplitudeContext, r_vdw: f64, r_cut_factor: f64, box_l: f64, grid: &RecombGrid) -> Result<RecombinationResult> {
    if !ctx.scattering_length().is_finite() {
        return Err(Error::PoleAtResonance);
    }
    let sol = solve_driven_closed(ctx, grid)?;
    let rc = r_cut_factor * r_vdw;
    let p_tilde = short_range_weight(ctx, &sol, rc);
    let alpha_at = |l: f64| {
        let p_less = p_tilde / l.powi(6);
        (p_less, p_less * l.powi(6) / (r_vdw * r_vdw))
    };
    let (p_less, alpha) = alpha_at(box_l);
    let (_, alpha2) = alpha_at(2.0 * box_l);
    Ok(RecombinationResult {
        alpha,
        alpha_cm6: None,
        regime: Regime::DeepEstimate,
        gamma_abs: None,
        p_closed: None,
        p_less: Some(p_less),
        residual: sol.residual,
        residue_mismatch: None,
        box_check: Some((alpha / alpha2 - 1.0).abs()),
    })
}

/// alpha_deep at several cutoff factors.
pub fn alpha_deep_sensitivity(ctx: &AmplitudeContext, r_vdw: f64, factors: &[f64], box_l: f64, grid: &RecombGrid) -> Result<Vec<(f64, f64)>> {
    factors
        .iter()
        .map(|&f| alpha_deep(ctx, r_vdw, f, box_l, grid).map(|r| (f, r.alpha)))
        .collect()
}

/// Unnormalized short-range weight: the integral of |psi - 1|^2 over the
/// hyperradius ball plus one sixth of the closed-channel weight.
fn short_range_weight(ctx: &AmplitudeContext, sol: &DrivenSolution, rc: f64) -> f64 {
    let b = ctx.b();
    let c0 = sol.beta_delta_coeff;
    let nodes = &sol.grid.nodes;
    let wts = &sol.grid.weights;
    let fs: Vec<f64> = sol.beta_regular.iter().map(|v| v.re).collect();
    let c = 1.0 / (2.0 * PI * PI);
    let pair_amp = |r: f64, rho: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..nodes.len() {
            let k = nodes[j];
            s += wts[j] * k * k * crate::special::sinc(k * rho) * fs[j] * pair_green(r, 0.5 * 3f64.sqrt() * k, b);
        }
        -c0 * pair_green(r, 0.0, b) - c * s
    };
    // hyperspherical: x = r/sqrt2 = R cos a, y = sqrt(2/3) rho = R sin a
    let (rr, rw) = gauss_legendre_on(24, 0.0, rc);
    let (aa, aw) = gauss_legendre_on(32, 0.0, 0.5 * PI);
    let (tt, tw) = gauss_legendre_on(16, -1.0, 1.0);
    // collected before summing so the result does not depend on thread count
    let atomic: f64 = (0..rr.len())
        .into_par_iter()
        .map(|ir| {
            let big_r = rr[ir];
            let mut acc = 0.0;
            for ia in 0..aa.len() {
                let (sa, ca) = aa[ia].sin_cos();
                let r = 2f64.sqrt() * big_r * ca;
                let rho = (1.5f64).sqrt() * big_r * sa;
                for it in 0..tt.len() {
                    let t = tt[it];
                    let r23 = (0.25 * r * r + rho * rho + r * rho * t).sqrt();
                    let r31 = (0.25 * r * r + rho * rho - r * rho * t).sqrt();
                    let rho1 = (0.5625 * r * r + 0.25 * rho * rho - 0.75 * r * rho * t).max(0.0).sqrt();
                    let rho2 = (0.5625 * r * r + 0.25 * rho * rho + 0.75 * r * rho * t).max(0.0).sqrt();
                    let psi = (pair_amp(r, rho) + pair_amp(r23, rho1) + pair_amp(r31, rho2)) / 3.0;
                    acc += aw[ia] * tw[it] * ca * ca * sa * sa * psi * psi;
                }
            }
            rw[ir] * big_r.powi(5) * acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let atomic = 3.0 * 3f64.sqrt() * 8.0 * PI * PI * atomic;
    let mu0 = ctx.molecule_factor(0.0);
    let molecule = |big_r: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..nodes.len() {
            let k = nodes[j];
            s += wts[j] * k * k * crate::special::sinc(k * big_r) * ctx.molecule_factor(-0.75 * k * k) * fs[j];
        }
        c0 * mu0 + c * s
    };
    let (mr, mw) = gauss_legendre_on(48, 0.0, rc);
    let closed: f64 = mr
        .iter()
        .zip(&mw)
        .map(|(&r, &w)| {
            let beta = molecule(r);
            w * 4.0 * PI * r * r * beta * beta
        })
        .sum();
    atomic + closed / 6.0
}
