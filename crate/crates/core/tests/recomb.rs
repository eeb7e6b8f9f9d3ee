use fesh3b::recomb::{alpha_deep, alpha_feshbach, RecombGrid};
use fesh3b::twobody::AmplitudeContext;
use fesh3b::units::{derive_couplings, Calibration, Catalog};
use proptest::prelude::*;

fn na() -> Calibration {
    derive_couplings(Catalog::bundled().find("na").unwrap()).unwrap()
}

fn alpha_exact(c: &Calibration, field: f64) -> f64 {
    let ctx = AmplitudeContext::at_field(&c.couplings, field);
    alpha_feshbach(&ctx, &RecombGrid::finite_range(c.couplings.b)).unwrap().alpha
}

#[test]
fn near_resonance_alpha_has_local_extremum() {
    let c = na();
    let fields: Vec<f64> = (0..20).map(|i| 906.9 + 0.095 * i as f64 / 19.0).collect();
    let alpha: Vec<f64> = fields.iter().map(|&f| alpha_exact(&c, f)).collect();
    let extrema = alpha.windows(3).filter(|w| (w[1] - w[0]) * (w[2] - w[1]) < 0.0).count();
    assert!(extrema >= 1, "{alpha:?}");
}

#[test]
fn alpha_continuous_in_exact_regime() {
    let c = na();
    let fields: Vec<f64> = (0..21).map(|i| 906.0 + 0.025 * i as f64).collect();
    let alpha: Vec<f64> = fields.iter().map(|&f| alpha_exact(&c, f)).collect();
    for (w, f) in alpha.windows(2).zip(&fields) {
        assert!((w[1] / w[0] - 1.0).abs() < 0.2, "jump after {f} G: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn alpha_deep_continuous() {
    let c = na();
    let r_vdw = c.units.length_from_a0(c.res.r_vdw);
    let grid = RecombGrid::finite_range(c.couplings.b);
    let alpha: Vec<f64> = [907.3, 907.32, 907.34]
        .iter()
        .map(|&f| alpha_deep(&AmplitudeContext::at_field(&c.couplings, f), r_vdw, 1.0, 100.0, &grid).unwrap().alpha)
        .collect();
    assert!(alpha.windows(2).all(|w| (w[1] / w[0] - 1.0).abs() < 0.2), "{alpha:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn alpha_nonnegative(db in -1.5f64..1.5) {
        prop_assume!(db.abs() > 1e-3);
        let c = na();
        let field = c.res.b0 + db;
        let ctx = AmplitudeContext::at_field(&c.couplings, field);
        let grid = RecombGrid::finite_range(c.couplings.b);
        let r = if c.couplings.detuning(field) < 0.0 {
            alpha_feshbach(&ctx, &grid)
        } else {
            alpha_deep(&ctx, c.units.length_from_a0(c.res.r_vdw), 1.0, 100.0, &grid)
        };
        let alpha = r.unwrap().alpha;
        prop_assert!(alpha >= 0.0 && alpha.is_finite(), "{field} G: {alpha}");
    }
}
