//! Two-body amplitude, dimers, closed-channel fraction and effective range.
//!
//! The amplitude is carried with the Gaussian form factors stripped:
//! `1/f_o(E) = q erfcx(q b) - (1/a_bg)(E - nu)/(E - nu + W)`, q = sqrt(-E),
//! which equals `exp(q^2 b^2)/f(E)`. Both share zeros, and `f_o` is what the
//! three-body equation needs once the form factors are moved into the kernel.

use crate::error::{Error, Result};
use crate::roots::{brent, sign_changes};
use crate::special::{erfcx, erfcx_c};
use crate::units::{Calibration, ModelCouplings};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Default lower edge of the dimer search window, in units of 1/b^2.
pub const DEFAULT_E_MAX: f64 = 10.0;
/// Mesh density of the bracketing scan.
pub const POINTS_PER_DECADE: usize = 400;

/// Two-body input of the three-body solvers.
pub trait PairInteraction: Sync {
    /// Form factor range; zero for contact models.
    fn range(&self) -> f64;
    /// Stripped inverse amplitude at complex two-body energy.
    fn inv_amplitude(&self, e: Complex64) -> Complex64;
    /// Stripped amplitude, finite at the bare-molecule pole.
    fn amplitude(&self, e: Complex64) -> Complex64 {
        1.0 / self.inv_amplitude(e)
    }
    /// d(1/f_o)/dE for real e < 0.
    fn inv_amplitude_slope(&self, e: f64) -> f64;
    /// Ratio of the physical atom-molecule amplitude to the solved unknown
    /// at relative pair energy `e`.
    fn molecule_factor(&self, e: f64) -> f64;
    fn inverse_scattering_length(&self) -> f64 {
        -self.inv_amplitude(Complex64::new(0.0, 0.0)).re
    }
    /// Binding energy of the dimer continuously connected to threshold.
    fn shallow_dimer(&self) -> Option<f64>;
    /// Closed-channel fraction of a bound state at energy `e` = -E_dim.
    fn closed_fraction_at(&self, e: f64) -> f64 {
        let mu = self.molecule_factor(e);
        2.0 * PI * mu * mu / (-self.inv_amplitude_slope(e))
    }
}

/// Gaussian two-channel model at one magnetic field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeContext {
    pub couplings: ModelCouplings,
    /// Field in G; infinite at the formal |B| = inf point.
    pub field: f64,
    /// Detuning in reduced energy; infinite together with the field.
    pub nu: f64,
}

impl AmplitudeContext {
    pub fn at_field(couplings: &ModelCouplings, field: f64) -> Self {
        let nu = if field.is_infinite() {
            field.signum() * f64::INFINITY
        } else {
            couplings.detuning(field)
        };
        Self { couplings: *couplings, field, nu }
    }

    pub fn at_detuning(couplings: &ModelCouplings, nu: f64) -> Self {
        Self {
            couplings: *couplings,
            field: couplings.field(nu),
            nu,
        }
    }

    /// Context at reduced inverse scattering length `x = 1/a`; smooth
    /// through x = 1/a_bg where the field passes through infinity.
    pub fn at_inverse_scattering_length(couplings: &ModelCouplings, x: f64) -> Self {
        let xbg = 1.0 / couplings.a_bg;
        let nu = if x == xbg {
            f64::INFINITY
        } else {
            couplings.width * x / (x - xbg)
        };
        Self::at_detuning(couplings, nu)
    }

    pub fn b(&self) -> f64 {
        self.couplings.b
    }

    /// Scattering length from the amplitude at zero energy (reduced units).
    pub fn scattering_length(&self) -> f64 {
        -1.0 / self.inv_amplitude_real(0.0)
    }

    fn bracket(&self, e: Complex64) -> Complex64 {
        if self.nu.is_infinite() {
            return Complex64::new(1.0, 0.0);
        }
        (e - self.nu) / (e - self.nu + self.couplings.width)
    }

    /// Stripped inverse amplitude on the real axis, e <= 0.
    pub fn inv_amplitude_real(&self, e: f64) -> f64 {
        let q = (-e).max(0.0).sqrt();
        let br = if self.nu.is_infinite() {
            1.0
        } else {
            (e - self.nu) / (e - self.nu + self.couplings.width)
        };
        q * erfcx(q * self.b()) - br / self.couplings.a_bg
    }

    /// Inverse amplitude with the form factors attached, e <= 0.
    pub fn inverse_f(&self, e: f64) -> Result<f64> {
        if self.nu.is_finite() && e - self.nu + self.couplings.width == 0.0 {
            return Err(Error::ChannelPole(e));
        }
        let b = self.b();
        Ok((e * b * b).exp() * self.inv_amplitude_real(e))
    }

    /// (E - nu + W) / f_o, free of the bare-molecule pole. Rescaled so the
    /// magnitude stays O(1) as |nu| grows; only its sign and zeros matter.
    fn root_function(&self, e: f64) -> f64 {
        let q = (-e).sqrt();
        let w = self.couplings.width;
        let s = q * erfcx(q * self.b());
        if self.nu.is_infinite() {
            return s - 1.0 / self.couplings.a_bg;
        }
        let den = e - self.nu + w;
        (den * s - (e - self.nu) / self.couplings.a_bg) / (1.0 + self.nu.abs() + w.abs())
    }

    /// Energy scale 1/b^2.
    pub fn energy_scale(&self) -> f64 {
        1.0 / (self.b() * self.b())
    }

    /// Least-bound dimer binding energy when a > 0.
    fn shallow_binding(&self) -> Option<f64> {
        let a = self.scattering_length();
        if !(a > 0.0) {
            return None;
        }
        let scale = self.energy_scale();
        // the threshold-connected root lies between 0 and the first root
        // of the bracket scan; scan upward from very small binding
        let mut lo = (1e-14 * scale).min(0.25 / (a * a));
        let f = |ed: f64| self.root_function(-ed);
        let f_lo = f(lo);
        let mut hi = lo;
        for _ in 0..400 {
            let next = hi * 1.25;
            if f(next).signum() != f_lo.signum() {
                lo = hi;
                hi = next;
                return brent(f, lo, hi, 1e-16 * hi, 300);
            }
            hi = next;
            if hi > 1e3 * DEFAULT_E_MAX * scale {
                break;
            }
        }
        None
    }

    /// Effective range from the q^2 coefficient of the low-energy expansion.
    pub fn effective_range(&self) -> Result<f64> {
        let a = self.scattering_length();
        if !a.is_finite() || a == 0.0 {
            return Err(Error::InvalidParameter("finite nonzero scattering length".into()));
        }
        let b = self.b();
        let w = self.couplings.width;
        let bracket_slope = if self.nu.is_infinite() {
            0.0
        } else {
            w / (self.couplings.a_bg * (w - self.nu).powi(2))
        };
        Ok(4.0 * b / SQRT_PI - 2.0 * bracket_slope)
    }
}

/// N2(q) = int d^3k/(2pi)^3 exp(-k^2 b^2)/(k^2+q^2)^2 in closed form.
fn open_norm_closed_form(q: f64, b: f64) -> f64 {
    let x = q * b;
    let ex = erfcx(x);
    (ex + x * (2.0 * x * ex - 2.0 / SQRT_PI)) / (8.0 * PI * q)
}

impl PairInteraction for AmplitudeContext {
    fn range(&self) -> f64 {
        self.b()
    }

    fn inv_amplitude(&self, e: Complex64) -> Complex64 {
        if e.im == 0.0 && e.re <= 0.0 {
            return Complex64::new(self.inv_amplitude_real(e.re), 0.0);
        }
        let q = (-e).sqrt();
        q * erfcx_c(q * self.b()) - self.bracket(e) / self.couplings.a_bg
    }

    fn amplitude(&self, e: Complex64) -> Complex64 {
        let q = (-e).sqrt();
        let s = if e.im == 0.0 && e.re <= 0.0 {
            Complex64::new(q.re * erfcx(q.re * self.b()), 0.0)
        } else {
            q * erfcx_c(q * self.b())
        };
        if self.nu.is_infinite() {
            return 1.0 / (s - 1.0 / self.couplings.a_bg);
        }
        let den = e - self.nu + self.couplings.width;
        den / (den * s - (e - self.nu) / self.couplings.a_bg)
    }

    fn inv_amplitude_slope(&self, e: f64) -> f64 {
        let q = (-e).sqrt();
        let closed = if self.nu.is_infinite() {
            0.0
        } else {
            let den = e - self.nu + self.couplings.width;
            self.couplings.width / (self.couplings.a_bg * den * den)
        };
        -(closed + 4.0 * PI * open_norm_closed_form(q, self.b()))
    }

    fn molecule_factor(&self, e: f64) -> f64 {
        if self.nu.is_infinite() {
            return 0.0;
        }
        let c = &self.couplings;
        2.0 * (c.lambda / c.g0.abs()) / (e - self.nu + c.width)
    }

    fn inverse_scattering_length(&self) -> f64 {
        -self.inv_amplitude_real(0.0)
    }

    fn shallow_dimer(&self) -> Option<f64> {
        self.shallow_binding()
    }
}

/// Zero-range effective-range model: 1/f = -1/a + q + R* q^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRangeModel {
    pub inv_a: f64,
    pub r_star: f64,
}

impl EffectiveRangeModel {
    pub fn new(a: f64, r_star: f64) -> Self {
        Self { inv_a: 1.0 / a, r_star }
    }
}

impl PairInteraction for EffectiveRangeModel {
    fn range(&self) -> f64 {
        0.0
    }

    fn inv_amplitude(&self, e: Complex64) -> Complex64 {
        let q = (-e).sqrt();
        q + self.r_star * q * q - self.inv_a
    }

    fn inv_amplitude_slope(&self, e: f64) -> f64 {
        let q = (-e).sqrt();
        -(0.5 / q + self.r_star)
    }

    fn molecule_factor(&self, _e: f64) -> f64 {
        (self.r_star / (2.0 * PI)).sqrt()
    }

    fn inverse_scattering_length(&self) -> f64 {
        self.inv_a
    }

    fn shallow_dimer(&self) -> Option<f64> {
        if self.inv_a <= 0.0 {
            return None;
        }
        let q = if self.r_star == 0.0 {
            self.inv_a
        } else {
            2.0 * self.inv_a / (1.0 + (1.0 + 4.0 * self.r_star * self.inv_a).sqrt())
        };
        Some(q * q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Feshbach,
    Background,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Feshbach => "feshbach",
            Branch::Background => "background",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimerState {
    /// Binding energy E_dim > 0.
    pub energy: f64,
    pub q_dim: f64,
    pub branch: Branch,
    pub p_closed: f64,
}

/// All dimers with binding energy in (0, e_max], deepest first.
pub fn find_dimers(ctx: &AmplitudeContext, e_max: f64) -> Vec<DimerState> {
    let scale = ctx.energy_scale();
    let lo = 1e-12 * scale;
    let decades = (e_max / lo).log10();
    let n = (decades * POINTS_PER_DECADE as f64).ceil() as usize + 1;
    let mesh: Vec<f64> = (0..n)
        .map(|i| lo * (e_max / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let vals: Vec<f64> = mesh.iter().map(|&ed| ctx.root_function(-ed)).collect();
    let mut roots: Vec<f64> = sign_changes(&vals)
        .into_iter()
        .filter_map(|i| brent(|ed| ctx.root_function(-ed), mesh[i], mesh[i + 1], 1e-16 * mesh[i + 1], 300))
        .collect();
    roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let n_roots = roots.len();
    roots
        .into_iter()
        .enumerate()
        .map(|(i, ed)| {
            // shallowest root is the Feshbach dimer on the side where the
            // resonance pulls a bound state out of threshold
            let branch = if ctx.nu < 0.0 && i + 1 == n_roots {
                Branch::Feshbach
            } else {
                Branch::Background
            };
            let mut d = DimerState {
                energy: ed,
                q_dim: ed.sqrt(),
                branch,
                p_closed: 0.0,
            };
            d.p_closed = closed_channel_fraction(ctx, &d);
            d
        })
        .collect()
}

/// Closed-channel norm over total norm of the normalized bound state.
///
/// The open-channel radial norm is integrated numerically with the
/// substitution k = q tan(phi); the closed-channel amplitude is fixed by
/// the bound-state equation.
pub fn closed_channel_fraction(ctx: &AmplitudeContext, dimer: &DimerState) -> f64 {
    if ctx.nu.is_infinite() {
        return 0.0;
    }
    let q = dimer.q_dim;
    let w = ctx.couplings.width;
    let den = w - ctx.nu - dimer.energy;
    let closed = w / (2.0 * PI * ctx.couplings.a_bg * den * den);
    let open = 2.0 * open_norm_quadrature(q, ctx.b());
    closed / (closed + open)
}

fn open_norm_quadrature(q: f64, b: f64) -> f64 {
    // int_0^inf k^2 e^{-k^2 b^2}/(k^2+q^2)^2 dk = (1/q) int_0^{pi/2} sin^2 e^{-(qb tan)^2}
    let x = q * b;
    let mut edges = vec![0.0, 0.25 * PI];
    let mut delta = 0.25 * PI;
    let floor = (x / 8.0).max(1e-14);
    while delta > floor {
        delta *= 0.5;
        edges.push(0.5 * PI - delta);
    }
    edges.push(0.5 * PI);
    let mut sum = 0.0;
    for p in edges.windows(2) {
        let (t, wt) = crate::quadrature::gauss_legendre_on(20, p[0], p[1]);
        for (phi, wi) in t.into_iter().zip(wt) {
            let tn = phi.tan();
            sum += wi * phi.sin().powi(2) * (-(x * tn).powi(2)).exp();
        }
    }
    sum / q / (2.0 * PI * PI)
}

/// Bound-state energy derivative dE/d(nu) (with E = -E_dim) by central
/// differences, the Hellmann-Feynman counterpart of the closed fraction.
pub fn fraction_by_finite_difference(ctx: &AmplitudeContext, dimer: &DimerState) -> Option<f64> {
    let scale = ctx.energy_scale();
    let dnu = 1e-6 * ctx.nu.abs().max(scale);
    let track = |nu: f64| -> Option<f64> {
        let c = AmplitudeContext::at_detuning(&ctx.couplings, nu);
        let f = |ed: f64| c.root_function(-ed);
        let mut h = 1e-4 * dimer.energy;
        for _ in 0..40 {
            let lo = dimer.energy - h;
            let hi = dimer.energy + h;
            if lo > 0.0 && f(lo).signum() != f(hi).signum() {
                return brent(f, lo, hi, 1e-16 * hi, 300);
            }
            h *= 2.0;
        }
        None
    };
    let up = track(ctx.nu + dnu)?;
    let dn = track(ctx.nu - dnu)?;
    Some(-(up - dn) / (2.0 * dnu))
}

/// One field of a dimer spectrum scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimerScanRow {
    pub field: f64,
    pub a: f64,
    pub dimers: Vec<DimerState>,
    /// Two branches present with both strongly channel-mixed.
    pub avoided_crossing: bool,
}

pub fn dimer_spectrum_scan(cal: &Calibration, b_from: f64, b_to: f64, nb: usize) -> Result<Vec<DimerScanRow>> {
    if nb < 2 {
        return Err(Error::InvalidParameter("nB >= 2".into()));
    }
    if !(b_from.is_finite() && b_to.is_finite()) || b_from == b_to {
        return Err(Error::InvalidParameter("nonempty finite B range".into()));
    }
    let rows = (0..nb)
        .into_par_iter()
        .map(|i| {
            let field = b_from + (b_to - b_from) * i as f64 / (nb - 1) as f64;
            let ctx = AmplitudeContext::at_field(&cal.couplings, field);
            let dimers = find_dimers(&ctx, DEFAULT_E_MAX * ctx.energy_scale());
            let mixed = dimers.iter().filter(|d| (0.25..=0.75).contains(&d.p_closed)).count();
            DimerScanRow {
                field,
                a: ctx.scattering_length(),
                avoided_crossing: dimers.len() >= 2 && mixed >= 2,
                dimers,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{derive_couplings, scattering_length, Catalog};
    use proptest::prelude::*;

    fn cal(label: &str) -> Calibration {
        derive_couplings(Catalog::bundled().find(label).unwrap()).unwrap()
    }

    #[test]
    fn zero_energy_gives_inverse_scattering_length() {
        for label in ["cs", "na"] {
            let c = cal(label);
            for b in [c.res.b0 - 3.0, c.res.b0 + 0.4, c.res.b0 + 50.0] {
                let ctx = AmplitudeContext::at_field(&c.couplings, b);
                let a = c.units.length_from_a0(scattering_length(&c.res, b).unwrap());
                let got = ctx.inverse_f(0.0).unwrap();
                assert!((got * a + 1.0).abs() < 1e-12, "{label} {b}");
            }
        }
    }

    #[test]
    fn resonance_has_zero_inverse_amplitude() {
        let c = cal("cs");
        let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0);
        assert_eq!(ctx.inverse_f(0.0).unwrap(), 0.0);
    }

    #[test]
    fn bare_pole_reported() {
        let c = cal("na");
        let ctx = AmplitudeContext::at_field(&c.couplings, 906.0);
        let e = ctx.nu - ctx.couplings.width;
        assert!(matches!(ctx.inverse_f(e), Err(Error::ChannelPole(_))));
    }

    #[test]
    fn shallow_feshbach_root_below_resonance() {
        let c = cal("na");
        let mut prev = f64::INFINITY;
        for db in [-0.5, -0.1, -0.02, -0.004] {
            let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + db);
            let d = find_dimers(&ctx, DEFAULT_E_MAX);
            assert_eq!(d.len(), 1);
            assert_eq!(d[0].branch, Branch::Feshbach);
            assert!(d[0].energy < prev);
            prev = d[0].energy;
            assert!(ctx.inverse_f(-d[0].energy).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn na_has_no_dimer_above_resonance() {
        let c = cal("na");
        for db in [0.01, 0.3, 1.0, 20.0] {
            let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + db);
            assert!(find_dimers(&ctx, DEFAULT_E_MAX).is_empty());
        }
    }

    #[test]
    fn cs_background_dimer_far_above_resonance() {
        let c = cal("cs");
        let ctx = AmplitudeContext::at_field(&c.couplings, 100.0);
        let d = find_dimers(&ctx, DEFAULT_E_MAX);
        assert!(!d.is_empty());
        assert!(d.iter().all(|s| s.branch == Branch::Background));
    }

    #[test]
    fn closed_fraction_matches_closed_form_norm() {
        let c = cal("cs");
        for b in [-40.0, -20.0, 5.0, 30.0, 80.0] {
            let ctx = AmplitudeContext::at_field(&c.couplings, b);
            for d in find_dimers(&ctx, DEFAULT_E_MAX) {
                let alt = ctx.closed_fraction_at(-d.energy);
                assert!((alt - d.p_closed).abs() < 1e-12, "{b}: {alt} vs {}", d.p_closed);
            }
        }
    }

    #[test]
    fn hellmann_feynman_agreement() {
        for label in ["cs", "na"] {
            let c = cal(label);
            let span = 2.0 * c.res.delta_b;
            for i in 0..12 {
                let b = c.res.b0 - span + 2.0 * span * i as f64 / 11.0;
                let ctx = AmplitudeContext::at_field(&c.couplings, b);
                for d in find_dimers(&ctx, DEFAULT_E_MAX) {
                    let fd = fraction_by_finite_difference(&ctx, &d).unwrap();
                    assert!((fd - d.p_closed).abs() < 1e-4, "{label} {b}: {fd} vs {}", d.p_closed);
                }
            }
        }
    }

    #[test]
    fn narrow_resonance_far_below_is_closed_channel() {
        let c = cal("na");
        let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 - 100.0);
        let d = find_dimers(&ctx, DEFAULT_E_MAX);
        assert!(d[0].p_closed > 0.99);
    }

    #[test]
    fn broad_resonance_near_threshold_is_open_channel() {
        let c = cal("cs");
        let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 - 0.5);
        let d = find_dimers(&ctx, DEFAULT_E_MAX);
        let fesh = d.iter().find(|s| s.branch == Branch::Feshbach).unwrap();
        assert!(fesh.p_closed < 0.05);
    }

    #[test]
    fn effective_range_matches_polynomial_fit() {
        for (label, db) in [("cs", 36.7), ("cs", -5.0), ("na", -0.3), ("na", 0.7)] {
            let c = cal(label);
            let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + db);
            let inv_a = 1.0 / ctx.scattering_length();
            // (1/f + 1/a - q)/q^2 = -r_e/2 + c3 q + c4 q^2 + ...; fit and read intercept
            let qs: Vec<f64> = (1..=8).map(|i| 1e-3 * i as f64).collect();
            let ys: Vec<f64> = qs
                .iter()
                .map(|&q| (ctx.inv_amplitude_real(-q * q) + inv_a - q) / (q * q))
                .collect();
            let c0 = poly_intercept(&qs, &ys, 4);
            let re = ctx.effective_range().unwrap();
            assert!((-2.0 * c0 / re - 1.0).abs() < 1e-6, "{label}: fit {} vs {re}", -2.0 * c0);
        }
    }

    fn poly_intercept(x: &[f64], y: &[f64], deg: usize) -> f64 {
        let m = nalgebra::DMatrix::from_fn(x.len(), deg + 1, |i, j| x[i].powi(j as i32));
        let v = nalgebra::DVector::from_column_slice(y);
        let sol = m.svd(true, true).solve(&v, 1e-14).unwrap();
        sol[0]
    }

    #[test]
    fn cs_near_25_gauss_range_ratios() {
        let c = cal("cs");
        let ctx = AmplitudeContext::at_field(&c.couplings, 25.0);
        let a = ctx.scattering_length();
        let re = ctx.effective_range().unwrap();
        let rvdw = c.units.length_from_a0(c.res.r_vdw);
        assert!((a / re - 2.0).abs() < 0.6, "a/r_e = {}", a / re);
        assert!((a / rvdw - 4.0).abs() < 0.5, "a/R_vdW = {}", a / rvdw);
    }

    #[test]
    fn na_effective_range_tends_to_minus_two_r_star() {
        let c = cal("na");
        let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + 1e-6);
        let re = ctx.effective_range().unwrap();
        let rs = c.couplings.r_star();
        let b = c.couplings.b;
        assert!((re - (4.0 * b / SQRT_PI - 2.0 * rs)).abs() < 1e-4 * rs);
        assert!(rs > 10.0 * b);
    }

    #[test]
    fn effective_range_model_dimer() {
        let m = EffectiveRangeModel::new(50.0, 3.0);
        let ed = m.shallow_dimer().unwrap();
        assert!(m.inv_amplitude(Complex64::new(-ed, 0.0)).norm() < 1e-15);
        assert!(EffectiveRangeModel::new(-5.0, 1.0).shallow_dimer().is_none());
    }

    #[test]
    fn scan_labels_follow_adiabatic_order() {
        let c = cal("cs");
        let rows = dimer_spectrum_scan(&c, -30.0, 30.0, 61).unwrap();
        for r in &rows {
            let fesh = r.dimers.iter().filter(|d| d.branch == Branch::Feshbach).count();
            assert!(fesh <= 1);
            if let Some(f) = r.dimers.iter().find(|d| d.branch == Branch::Feshbach) {
                assert!(r.dimers.iter().all(|d| d.energy >= f.energy));
            }
        }
        assert!(dimer_spectrum_scan(&c, 1.0, 1.0, 4).is_err());
        assert!(dimer_spectrum_scan(&c, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn inverse_length_parametrization_is_continuous_at_infinity() {
        let c = cal("cs");
        let xbg = 1.0 / c.couplings.a_bg;
        let e = Complex64::new(-0.3, 0.0);
        let mid = AmplitudeContext::at_inverse_scattering_length(&c.couplings, xbg);
        let lo = AmplitudeContext::at_inverse_scattering_length(&c.couplings, xbg * (1.0 - 1e-9));
        let hi = AmplitudeContext::at_inverse_scattering_length(&c.couplings, xbg * (1.0 + 1e-9));
        assert!(mid.field.is_infinite());
        assert!((lo.inv_amplitude(e) - mid.inv_amplitude(e)).norm() < 1e-8);
        assert!((hi.inv_amplitude(e) - mid.inv_amplitude(e)).norm() < 1e-8);
        assert!((mid.scattering_length() - c.couplings.a_bg).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn p_closed_is_a_probability(db in -60.0f64..60.0) {
            let c = cal("cs");
            let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + db);
            for d in find_dimers(&ctx, DEFAULT_E_MAX) {
                prop_assert!(d.p_closed > 0.0 && d.p_closed <= 1.0);
                prop_assert!(ctx.inverse_f(-d.energy).unwrap().abs() < 1e-10);
            }
        }

        #[test]
        fn amplitude_is_reciprocal_of_inverse(e in -5.0f64..-1e-6, db in -3.0f64..3.0) {
            let c = cal("na");
            let ctx = AmplitudeContext::at_field(&c.couplings, c.res.b0 + db);
            let z = Complex64::new(e, 0.0);
            let p = ctx.amplitude(z) * ctx.inv_amplitude(z);
            prop_assert!((p - 1.0).norm() < 1e-9);
        }

        #[test]
        fn zero_crossing_at_b0_plus_width(dw in 0.1f64..100.0, abg in 2.0f64..5000.0) {
            let r = crate::units::ResonanceParams {
                label: "x".into(), b0: 1.0, delta_b: dw, a_bg: abg, delta_mu: 1.0,
                r_vdw: 50.0, b: None, mass: 40.0, observed: Vec::new(),
            };
            prop_assert_eq!(scattering_length(&r, 1.0 + dw).unwrap(), 0.0);
        }
    }
}
