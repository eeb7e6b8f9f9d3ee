use fesh3b::twobody::{dimer_spectrum_scan, Branch};
use fesh3b::units::{derive_couplings, Catalog};
use proptest::prelude::*;

#[test]
fn branch_labels_continuous_along_scans() {
    for label in ["Cs133_-11.7G", "Na23_907G"] {
        let cal = derive_couplings(Catalog::bundled().find(label).unwrap()).unwrap();
        let (b0, w) = (cal.res.b0, cal.res.delta_b.abs());
        let rows = dimer_spectrum_scan(&cal, b0 - 3.0 * w - 0.013, b0 + 3.0 * w, 301).unwrap();
        for pair in rows.windows(2) {
            let (p, q) = (&pair[0], &pair[1]);
            let same_side = cal.couplings.detuning(p.field).signum() == cal.couplings.detuning(q.field).signum();
            if !same_side || p.dimers.len() != q.dimers.len() || p.avoided_crossing || q.avoided_crossing {
                continue;
            }
            let lp: Vec<Branch> = p.dimers.iter().map(|d| d.branch).collect();
            let lq: Vec<Branch> = q.dimers.iter().map(|d| d.branch).collect();
            assert_eq!(lp, lq, "{label}: label flip between {} and {} G", p.field, q.field);
        }
    }
}

#[test]
fn feshbach_dimer_only_on_bound_side() {
    let cal = derive_couplings(Catalog::bundled().find("na").unwrap()).unwrap();
    let rows = dimer_spectrum_scan(&cal, 905.0, 909.0, 41).unwrap();
    for r in &rows {
        let has = r.dimers.iter().any(|d| d.branch == Branch::Feshbach);
        assert_eq!(has, cal.couplings.detuning(r.field) < 0.0, "{} G", r.field);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dimers_sorted_and_bound(db in -80.0f64..80.0) {
        let cal = derive_couplings(Catalog::bundled().find("cs").unwrap()).unwrap();
        let field = cal.res.b0 + db;
        let rows = dimer_spectrum_scan(&cal, field, field + 1e-3, 2).unwrap();
        for r in rows {
            prop_assert!(r.dimers.windows(2).all(|w| w[0].energy > w[1].energy));
            prop_assert!(r.dimers.iter().all(|d| d.energy > 0.0 && (d.q_dim * d.q_dim / d.energy - 1.0).abs() < 1e-14));
        }
    }
}
