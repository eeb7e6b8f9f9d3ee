use fesh3b::converge::EFIMOV_DEPTH_MIN;
use fesh3b::trimers::{efimov_spectrum, threshold_energy, trace_branch, Termination, TracePolicy, TrimerSolver};
use fesh3b::twobody::AmplitudeContext;
use fesh3b::units::{derive_couplings, Catalog, ModelCouplings};

fn cs() -> ModelCouplings {
    derive_couplings(Catalog::bundled().find("cs").unwrap()).unwrap().couplings
}

#[test]
fn unitarity_trimers_are_indicator_zeros_below_threshold() {
    let c = cs();
    let solver = TrimerSolver::standard(c.b, 300, 1e-6);
    let spectrum = efimov_spectrum(&c, EFIMOV_DEPTH_MIN / (c.b * c.b), &solver);
    assert!(spectrum.energies.len() >= 2);
    let ctx = AmplitudeContext::at_detuning(&c, 0.0);
    for &e in &spectrum.energies {
        assert!(e < threshold_energy(&ctx));
        let h = 1e-6 * e.abs();
        assert!(solver.indicator(&ctx, e - h).signum() != solver.indicator(&ctx, e + h).signum(), "{e}");
    }
}

#[test]
fn traced_points_resolve_as_zeros() {
    let c = cs();
    let solver = TrimerSolver::standard(c.b, 300, 1e-6);
    let spectrum = efimov_spectrum(&c, EFIMOV_DEPTH_MIN / (c.b * c.b), &solver);
    let mut policy = TracePolicy::for_range(c.b);
    policy.x_limit = 0.05 / c.b;
    for dir in [-1.0, 1.0] {
        let br = trace_branch(&c, 0, 0.0, spectrum.energies[0], dir, &policy, &solver).unwrap();
        assert_eq!(br.end, Termination::WindowEdge);
        assert!(br.points.len() > 3);
        for p in &br.points {
            let ctx = AmplitudeContext::at_inverse_scattering_length(&c, p.inv_a);
            assert!(p.energy < p.threshold && p.threshold == threshold_energy(&ctx));
            let d = solver.indicator(&ctx, p.energy);
            assert!(d.abs() < 1e-8, "x = {}: d = {d:e}", p.inv_a);
        }
        let xs: Vec<f64> = br.points.iter().map(|p| p.inv_a * dir).collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}
