use std::f64::consts::PI;

use immersa::inequalities::*;
use immersa::sampler::FieldSampler;
use immersa::{InducedGeometry, SurfaceSpec, TensorField};

fn geom(spec: &SurfaceSpec, n: usize) -> InducedGeometry {
    InducedGeometry::new(&spec.generate(n).unwrap(), 1e-8).unwrap()
}

#[test]
fn closed_forms_on_the_clifford_torus() {
    let g = geom(&SurfaceSpec::Clifford, 64);
    let c = TensorField::constant_vector(g.tangent_map.grid(), &[0.5, -1.0, 0.25, 2.0]);
    let mss = mss_ratio(&g, &c).unwrap();
    let exact = 1.0 / (2.0 * 2f64.sqrt() * PI);
    assert!((mss - exact).abs() < 1e-5 * exact, "{mss}");
    let linf = linf_embed_ratio(&g, &c, 2.0).unwrap();
    assert!((linf - 1.0 / (8.0 * PI * PI)).abs() < 1e-5 / (8.0 * PI * PI), "{linf}");
    assert_eq!(hamilton_ratio(&g, &c, 2.0, 2.0, 1.0).unwrap(), 0.0);
    assert_eq!(interp_ratio(&g, &c, 1, 2).unwrap(), 0.0);
}

#[test]
fn exponent_validation() {
    let g = geom(&SurfaceSpec::Clifford, 16);
    let h = FieldSampler::new(4, 1).sample(g.tangent_map.grid(), 4, 0);
    assert!(mult_embed_ratio(&g, &h, 4.0, 4.0, 0.5).is_ok());
    assert!(matches!(mult_embed_ratio(&g, &h, 4.0, 4.0, 0.4), Err(immersa::Error::BadExponents(_))));
    assert!(mult_embed_ratio(&g, &h, 2.0, 2.0, 0.5).is_err());
    assert!(hamilton_ratio(&g, &h, 2.0, 2.0, 2.0).is_err());
    assert!(hamilton_ratio(&g, &h, 4.0, 4.0, 2.0).is_ok());
    assert!(linf_embed_ratio(&g, &h, 1.0).is_err());
    assert!(interp_ratio(&g, &h, 2, 1).is_err());
    assert!(interp_ratio(&g, &h, 1, 5).is_err());
}

#[test]
fn zero_field_gives_zero() {
    let g = geom(&SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }, 16);
    let z = TensorField::constant_vector(g.tangent_map.grid(), &[0.0; 3]);
    for id in InequalityId::ALL {
        assert_eq!(id.evaluate(&g, &z).unwrap(), 0.0);
    }
}

#[test]
fn ratios_are_scale_invariant_in_h() {
    for spec in [SurfaceSpec::Clifford, SurfaceSpec::bumpy_default(2)] {
        let g = geom(&spec, 24);
        let d = g.tangent_map.dim();
        for i in 0..3 {
            let h = FieldSampler::new(6, 9).sample(g.tangent_map.grid(), d, i);
            for id in InequalityId::ALL {
                let r = id.evaluate(&g, &h).unwrap();
                for lambda in [-3.0, 1e-3, 250.0] {
                    let s = id.evaluate(&g, &h.scaled(lambda)).unwrap();
                    assert!((s - r).abs() <= 1e-12 * r, "{id} {lambda}: {r} {s}");
                }
            }
        }
    }
}

#[test]
fn mss_is_invariant_under_surface_scaling() {
    let spec = SurfaceSpec::bumpy_default(5);
    let g = geom(&spec, 24);
    let gs = geom(&spec.clone().scaled(3.7), 24);
    let h = FieldSampler::new(6, 2).sample(g.tangent_map.grid(), 3, 0);
    let (a, b) = (mss_ratio(&g, &h).unwrap(), mss_ratio(&gs, &h).unwrap());
    assert!((a - b).abs() <= 1e-8 * a, "{a} {b}");
}

#[test]
fn scans_are_deterministic_and_monotone_in_samples() {
    let fam = [SurfaceSpec::Clifford, SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }];
    let s = FieldSampler::new(4, 11);
    let a = ensemble_scan(&fam, &s, InequalityId::Mss, &[16, 24], 50).unwrap();
    let b = ensemble_scan(&fam, &s, InequalityId::Mss, &[16, 24], 50).unwrap();
    assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
    assert_eq!(report_csv_rows(&a), report_csv_rows(&b));
    let c = ensemble_scan(&fam, &s, InequalityId::Mss, &[16, 24], 60).unwrap();
    assert!(c.max_ratio >= a.max_ratio);
    assert_eq!(a.sample_count, 200);
    assert_eq!(a.levels.len(), 2);
    assert!(a.quantiles[0] <= a.quantiles[1] && a.quantiles[1] <= a.quantiles[2]);
    assert_eq!(a.quantiles[2], a.max_ratio);
    let cl = ensemble_scan(&fam[..1], &s, InequalityId::L4H1, &[16], 50).unwrap();
    assert_eq!(report_csv_rows(&cl)[0].split(',').count(), REPORT_CSV_HEADER.split(',').count());
    assert!(report_csv_rows(&a)[0].contains("\"clifford+round(2,1)\""));
}

#[test]
fn mss_drift_under_refinement() {
    let fam = [SurfaceSpec::Clifford, SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }];
    let r = ensemble_scan(&fam, &FieldSampler::new(8, 3), InequalityId::Mss, &[32, 48], 50).unwrap();
    assert!(r.ratio_drift < 0.25, "{}", r.ratio_drift);
}

#[test]
fn ids_round_trip_through_names() {
    for id in InequalityId::ALL {
        assert_eq!(id.name().parse::<InequalityId>().unwrap(), id);
    }
    assert!("nope".parse::<InequalityId>().is_err());
}
