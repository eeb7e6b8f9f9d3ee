//! Trimer spectra, branch continuation and threshold location.
//!
//! Energies are searched as zeros of Re det(1 - D^{-1} L) on a rotated
//! momentum contour. Branches are continued in the inverse scattering
//! length x = 1/a, which passes smoothly through |B| = inf (x = 1/a_bg), with
//! the trimer energy tracked as y = ln(E_th - E), the log depth below the
//! lowest open threshold.

use crate::error::{Error, Result};
use crate::kernel3b::fredholm_determinant;
use crate::quadrature::MomentumGrid;
use crate::roots::brent;
use crate::twobody::{AmplitudeContext, PairInteraction};
use crate::units::ModelCouplings;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Efimov scaling exponent for three identical bosons.
pub const S0: f64 = 1.006_237_825_102_52;
/// Default contour rotation angle.
pub const DEFAULT_THETA: f64 = 0.15;
/// Default number of grid points.
pub const DEFAULT_N: usize = 400;
/// Lower edge of the search window in units of 1/b^2.
pub const ENERGY_FLOOR: f64 = 10.0;

/// e^{2 pi / s0}.
pub fn efimov_ratio() -> f64 {
    (2.0 * std::f64::consts::PI / S0).exp()
}

/// Grid and contour used for every indicator evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimerSolver {
    pub grid: MomentumGrid,
    pub theta: f64,
}

impl TrimerSolver {
    pub fn new(grid: MomentumGrid, theta: f64) -> Self {
        Self { grid, theta }
    }

    /// Log panels over [k_min, 12]/b with the default rotation.
    pub fn standard(b: f64, n: usize, k_min: f64) -> Self {
        Self::new(MomentumGrid::log_panels(n, k_min / b, 12.0 / b), DEFAULT_THETA)
    }

    pub fn indicator_complex<P: PairInteraction + ?Sized>(&self, pair: &P, e: Complex64) -> Complex64 {
        fredholm_determinant(pair, e, &self.grid, self.theta)
    }

    pub fn indicator<P: PairInteraction + ?Sized>(&self, pair: &P, e: f64) -> f64 {
        self.indicator_complex(pair, Complex64::new(e, 0.0)).re
    }
}

/// Lowest open threshold: -E_dim of the shallow dimer, else zero.
pub fn threshold_energy<P: PairInteraction + ?Sized>(pair: &P) -> f64 {
    pair.shallow_dimer().map_or(0.0, |ed| -ed)
}

/// Signed indicator whose zeros are trimer energies.
pub fn singular_indicator(ctx: &AmplitudeContext, e: f64, grid: &MomentumGrid) -> f64 {
    TrimerSolver::new(grid.clone(), DEFAULT_THETA).indicator(ctx, e)
}

/// Zeros of the indicator for energies `e_th - delta` with delta in
/// [delta_min, delta_max], refined to relative 1e-8 in E. Deepest first.
pub fn find_trimers<P: PairInteraction + ?Sized>(pair: &P, delta_min: f64, delta_max: f64, solver: &TrimerSolver) -> Vec<f64> {
    let e_th = threshold_energy(pair);
    if !(delta_max > delta_min && delta_min > 0.0) {
        return Vec::new();
    }
    let per_decade = 8.0;
    let m = ((delta_max / delta_min).log10() * per_decade).ceil().max(1.0) as usize;
    let ys: Vec<f64> = (0..=m)
        .map(|i| delta_min.ln() + (delta_max / delta_min).ln() * i as f64 / m as f64)
        .collect();
    let eval = |y: f64| solver.indicator_complex(pair, Complex64::new(e_th - y.exp(), 0.0));
    let vals: Vec<Complex64> = ys.iter().map(|&y| eval(y)).collect();
    let mut out = Vec::new();
    for i in 0..m {
        let (a, c) = (vals[i], vals[i + 1]);
        if a.re.signum() == c.re.signum() {
            continue;
        }
        if let Some(y) = refine_zero(&eval, ys[i], ys[i + 1], a, c) {
            out.push(e_th - y.exp());
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

/// Brent on Re d between two bracketing log-depths; rejects sign changes of
/// Re d that come from the phase rotating rather than from a zero of d.
fn refine_zero(eval: &dyn Fn(f64) -> Complex64, ya: f64, yb: f64, da: Complex64, db: Complex64) -> Option<f64> {
    // relative 1e-8 in E: y tolerance 1e-9 is well inside that
    let y = brent(|y| eval(y).re, ya, yb, 1e-10, 200)?;
    let dz = eval(y);
    if dz.norm() > 0.1 * da.norm().max(db.norm()) {
        return None;
    }
    Some(y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfimovSpectrum {
    pub energies: Vec<f64>,
    pub s0: f64,
}

impl EfimovSpectrum {
    /// E_n / E_{n+1} for consecutive levels.
    pub fn ratios(&self) -> Vec<f64> {
        self.energies.windows(2).map(|w| w[0] / w[1]).collect()
    }
}

/// Trimer energies at unitarity (nu = 0), deepest first.
pub fn efimov_spectrum(couplings: &ModelCouplings, delta_min: f64, solver: &TrimerSolver) -> EfimovSpectrum {
    let ctx = AmplitudeContext::at_detuning(couplings, 0.0);
    let scale = ctx.energy_scale();
    let energies = find_trimers(&ctx, delta_min, ENERGY_FLOOR * scale, solver);
    EfimovSpectrum { energies, s0: S0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ThreeAtomThreshold,
    AtomDimerThreshold,
    WindowEdge,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ThreeAtomThreshold => "three_atom",
            Termination::AtomDimerThreshold => "atom_dimer",
            Termination::WindowEdge => "window_edge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Field in G (infinite at x = 1/a_bg).
    pub field: f64,
    /// Reduced inverse scattering length.
    pub inv_a: f64,
    /// Trimer energy.
    pub energy: f64,
    /// Lowest open threshold at this field.
    pub threshold: f64,
    /// Outside the universal window (|a| < 10 b).
    pub qualitative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCrossing {
    pub kind: Termination,
    pub field: f64,
    pub inv_a: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimerBranch {
    pub index: usize,
    pub points: Vec<BranchPoint>,
    pub start: Termination,
    pub end: Termination,
    pub crossing: Option<ThresholdCrossing>,
}

/// Step control for continuation in x = 1/a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePolicy {
    pub step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Stop when |x| would exceed this.
    pub x_limit: f64,
    /// Depth below threshold, relative to the energy scale, at which the
    /// branch is handed to threshold refinement.
    pub delta_stop: f64,
    /// Largest accepted jump in ln(depth) between prediction and correction.
    pub max_jump: f64,
}

impl TracePolicy {
    pub fn for_range(b: f64) -> Self {
        Self {
            step: 2e-3 / b,
            min_step: 1e-8 / b,
            max_step: 2e-2 / b,
            x_limit: 1.0 / b,
            delta_stop: 1e-6,
            max_jump: 0.35,
        }
    }
}

struct Tracer<'a> {
    couplings: &'a ModelCouplings,
    solver: &'a TrimerSolver,
}

impl Tracer<'_> {
    fn ctx(&self, x: f64) -> AmplitudeContext {
        AmplitudeContext::at_inverse_scattering_length(self.couplings, x)
    }

    fn scale(&self) -> f64 {
        1.0 / (self.couplings.b * self.couplings.b)
    }

    fn point(&self, x: f64, e: f64, th: f64) -> BranchPoint {
        let ctx = self.ctx(x);
        let a = 1.0 / x;
        BranchPoint {
            field: ctx.field,
            inv_a: x,
            energy: e,
            threshold: th,
            qualitative: a.abs() < 10.0 * self.couplings.b,
        }
    }

    /// Solve for ln depth at fixed x near `y_guess`.
    fn correct(&self, x: f64, y_guess: f64, max_jump: f64) -> Option<(f64, f64)> {
        let ctx = self.ctx(x);
        let th = threshold_energy(&ctx);
        let eval = |y: f64| self.solver.indicator_complex(&ctx, Complex64::new(th - y.exp(), 0.0));
        let d0 = eval(y_guess);
        let mut h = 0.02;
        while h <= max_jump {
            for y1 in [y_guess - h, y_guess + h] {
                let d1 = eval(y1);
                if d1.re.signum() != d0.re.signum() {
                    let (ya, yb, da, db) = if y1 < y_guess { (y1, y_guess, d1, d0) } else { (y_guess, y1, d0, d1) };
                    return refine_zero(&eval, ya, yb, da, db).map(|y| (y, th));
                }
            }
            h *= 2.0;
        }
        None
    }
}

/// Continue a trimer from (x_start, e_start) in direction `dir` (+1 or -1
/// in x = 1/a) until it reaches a threshold or the window edge.
pub fn trace_branch(
    couplings: &ModelCouplings,
    index: usize,
    x_start: f64,
    e_start: f64,
    dir: f64,
    policy: &TracePolicy,
    solver: &TrimerSolver,
) -> Result<TrimerBranch> {
    let tr = Tracer { couplings, solver };
    let scale = tr.scale();
    let th0 = threshold_energy(&tr.ctx(x_start));
    let y0 = (th0 - e_start).ln();
    let (y0, th0) = tr
        .correct(x_start, y0, policy.max_jump)
        .ok_or(Error::LostBranch { at: x_start })?;
    let mut xs = vec![x_start];
    let mut ys = vec![y0];
    let mut points = vec![tr.point(x_start, th0 - y0.exp(), th0)];
    let mut step = policy.step;
    let end;
    loop {
        let n = xs.len();
        let x_last = xs[n - 1];
        let y_last = ys[n - 1];
        if x_last.abs() >= policy.x_limit || th_minus(&points) < -ENERGY_FLOOR * scale {
            end = Termination::WindowEdge;
            break;
        }
        let x_new = x_last + dir * step;
        let slope = if n >= 2 { (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]) } else { 0.0 };
        let y_pred = y_last + slope * (x_new - x_last);
        match tr.correct(x_new, y_pred, policy.max_jump) {
            Some((y, th)) if (y - y_pred).abs() < policy.max_jump => {
                xs.push(x_new);
                ys.push(y);
                points.push(tr.point(x_new, th - y.exp(), th));
                if y.exp() < policy.delta_stop * scale {
                    end = near_threshold_kind(th);
                    break;
                }
                if (y - y_pred).abs() < 0.05 {
                    step = (step * 1.5).min(policy.max_step);
                }
            }
            _ => {
                // branch may have left through a threshold inside this step
                if y_last.exp() < 1e-2 * scale && slope * dir < 0.0 {
                    end = near_threshold_kind(points[n - 1].threshold);
                    break;
                }
                step *= 0.5;
                if step < policy.min_step {
                    return Err(Error::LostBranch { at: x_last });
                }
            }
        }
    }
    let crossing = match end {
        Termination::ThreeAtomThreshold => Some(three_atom_crossing(&tr, &xs, dir, step)?),
        Termination::AtomDimerThreshold => atom_dimer_crossing(&tr, &xs, &ys, dir, &mut points),
        Termination::WindowEdge => None,
    };
    Ok(TrimerBranch {
        index,
        points,
        start: Termination::WindowEdge,
        end,
        crossing,
    })
}

fn th_minus(points: &[BranchPoint]) -> f64 {
    points.last().map_or(0.0, |p| p.energy)
}

fn near_threshold_kind(th: f64) -> Termination {
    if th == 0.0 {
        Termination::ThreeAtomThreshold
    } else {
        Termination::AtomDimerThreshold
    }
}

/// Root of Re d(E = 0) in x beyond the last traced point.
fn three_atom_crossing(tr: &Tracer, xs: &[f64], dir: f64, step: f64) -> Result<ThresholdCrossing> {
    let x_last = *xs.last().unwrap();
    let g = |x: f64| tr.solver.indicator(&tr.ctx(x), 0.0);
    let g0 = g(x_last);
    let mut h = step.max(1e-6 * tr.couplings.b.recip());
    let mut far = x_last;
    let mut found = false;
    for _ in 0..40 {
        far = x_last + dir * h;
        if g(far).signum() != g0.signum() {
            found = true;
            break;
        }
        h *= 1.6;
    }
    if !found {
        return Err(Error::LostBranch { at: x_last });
    }
    let (lo, hi) = if far < x_last { (far, x_last) } else { (x_last, far) };
    let x_star = brent(g, lo, hi, 1e-9 * tr.couplings.b.recip(), 200).ok_or(Error::LostBranch { at: x_last })?;
    let field = tr.ctx(x_star).field;
    // bracket width propagated to field is a strict bound after Brent
    let dx = 1e-9 / tr.couplings.b;
    let unc = (tr.ctx(x_star + dx).field - field).abs();
    Ok(ThresholdCrossing {
        kind: Termination::ThreeAtomThreshold,
        field,
        inv_a: x_star,
        uncertainty: unc,
    })
}

/// Atom-dimer crossing. The branch is re-solved in x at fixed depths
/// delta_k = delta_last 4^{-k} below the moving dimer threshold, and x(sqrt
/// delta) is extrapolated to zero depth with a quadratic through the last
/// three points; the linear extrapolation through the last two sets the
/// uncertainty. The solved points are appended to the branch.
fn atom_dimer_crossing(tr: &Tracer, xs: &[f64], ys: &[f64], dir: f64, points: &mut Vec<BranchPoint>) -> Option<ThresholdCrossing> {
    let mut x_prev = *xs.last()?;
    let delta_last = ys.last()?.exp();
    let mut sx: Vec<(f64, f64)> = Vec::new();
    for k in 1..=5 {
        let delta = delta_last * 4f64.powi(-k);
        let f = |x: f64| {
            let ctx = tr.ctx(x);
            tr.solver.indicator(&ctx, threshold_energy(&ctx) - delta)
        };
        let f0 = f(x_prev);
        let mut h = 1e-4 / tr.couplings.b;
        let mut bracket = None;
        for _ in 0..40 {
            let x1 = x_prev + dir * h;
            if f(x1).signum() != f0.signum() {
                bracket = Some(x1);
                break;
            }
            h *= 1.6;
        }
        let x1 = bracket?;
        let (lo, hi) = if x1 < x_prev { (x1, x_prev) } else { (x_prev, x1) };
        let xk = brent(f, lo, hi, 1e-12 / tr.couplings.b, 200)?;
        let th = threshold_energy(&tr.ctx(xk));
        points.push(tr.point(xk, th - delta, th));
        sx.push((delta.sqrt(), xk));
        x_prev = xk;
    }
    let n = sx.len();
    let (s1, x1) = sx[n - 3];
    let (s2, x2) = sx[n - 2];
    let (s3, x3) = sx[n - 1];
    let lin = x3 - s3 * (x3 - x2) / (s3 - s2);
    // Lagrange quadratic through three points evaluated at s = 0
    let quad = x1 * s2 * s3 / ((s1 - s2) * (s1 - s3)) + x2 * s1 * s3 / ((s2 - s1) * (s2 - s3)) + x3 * s1 * s2 / ((s3 - s1) * (s3 - s2));
    let field = tr.ctx(quad).field;
    Some(ThresholdCrossing {
        kind: Termination::AtomDimerThreshold,
        field,
        inv_a: quad,
        uncertainty: (field - tr.ctx(lin).field).abs(),
    })
}

/// Inverse scattering lengths in [x_from, x_to] at which a trimer of the
/// family `pair_at(x)` meets the three-atom threshold, located as zeros of
/// Re d(E = 0) after a uniform scan with `samples` points.
pub fn three_atom_thresholds<P, F>(pair_at: F, x_from: f64, x_to: f64, samples: usize, solver: &TrimerSolver) -> Vec<f64>
where
    P: PairInteraction,
    F: Fn(f64) -> P + Sync,
{
    let g = |x: f64| solver.indicator(&pair_at(x), 0.0);
    let m = samples.max(2);
    let xs: Vec<f64> = (0..m).map(|i| x_from + (x_to - x_from) * i as f64 / (m - 1) as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let tol = 1e-10 * x_from.abs().max(x_to.abs());
    crate::roots::sign_changes(&vals)
        .into_iter()
        .filter_map(|i| brent(g, xs[i], xs[i + 1], tol, 200))
        .collect()
}

/// Threshold crossings of a traced branch.
pub fn threshold_fields(branch: &TrimerBranch) -> Vec<ThresholdCrossing> {
    branch.crossing.into_iter().collect()
}

/// Result of tracing from the lowest trimers at unitarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrimerScan {
    pub spectrum: EfimovSpectrum,
    pub branches: Vec<TrimerBranch>,
    /// (level, direction, message) for traces that failed.
    pub failures: Vec<(usize, f64, String)>,
}

/// Trace the `levels` deepest trimers at unitarity toward both signs of
/// 1/a. Failed traces are recorded and the scan continues.
pub fn scan_branches(couplings: &ModelCouplings, levels: usize, policy: &TracePolicy, solver: &TrimerSolver) -> TrimerScan {
    let b2 = couplings.b * couplings.b;
    let spectrum = efimov_spectrum(couplings, 1e-9 / b2, solver);
    let jobs: Vec<(usize, f64)> = (0..levels.min(spectrum.energies.len()))
        .flat_map(|i| [(i, -1.0), (i, 1.0)])
        .collect();
    let mut branches = Vec::new();
    let mut failures = Vec::new();
    for (i, dir) in jobs {
        match trace_branch(couplings, i, 0.0, spectrum.energies[i], dir, policy, solver) {
            Ok(br) => branches.push(br),
            Err(e) => failures.push((i, dir, e.to_string())),
        }
    }
    TrimerScan {
        spectrum,
        branches,
        failures,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{derive_couplings, Catalog};

    fn na() -> ModelCouplings {
        derive_couplings(Catalog::bundled().find("na").unwrap()).unwrap().couplings
    }

    #[test]
    fn efimov_ratio_constant() {
        assert!((efimov_ratio() - 515.03).abs() < 0.01);
    }

    #[test]
    fn decoupled_model_has_no_trimers() {
        // vanishing width, repulsive open channel
        let c = ModelCouplings::from_reduced(1.0, 0.8, 1e-12).unwrap();
        let ctx = AmplitudeContext::at_detuning(&c, 1.0);
        let solver = TrimerSolver::standard(1.0, 160, 1e-6);
        assert!(find_trimers(&ctx, 1e-6, 1.0, &solver).is_empty());
    }

    #[test]
    fn found_trimers_are_indicator_zeros() {
        let c = na();
        let ctx = AmplitudeContext::at_detuning(&c, 0.0);
        let solver = TrimerSolver::standard(1.0, 200, 1e-6);
        let e = find_trimers(&ctx, 1e-7, 10.0, &solver);
        assert!(!e.is_empty());
        for &ei in &e {
            let h = 1e-8 * ei.abs();
            let lo = solver.indicator(&ctx, ei - h);
            let hi = solver.indicator(&ctx, ei + h);
            assert!(lo.signum() != hi.signum(), "{ei}");
            assert!(ei < 0.0 && ei > -ENERGY_FLOOR);
        }
    }
}
