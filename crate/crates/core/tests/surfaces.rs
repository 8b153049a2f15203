use immersa::surfaces::*;
use immersa::Error;
use immersa::geometry::InducedGeometry;
use std::f64::consts::PI;

#[test]
fn round_torus_area() {
    let f = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(64).unwrap();
    let vol = InducedGeometry::new(&f, 1e-8).unwrap().volume();
    assert!((vol / (8.0 * PI * PI) - 1.0).abs() <= 1e-5);
}

#[test]
fn bad_radii_rejected() {
    let spec = SurfaceSpec::RoundTorus { big: 1.0, small: 1.0 };
    assert!(matches!(spec.generate(16), Err(Error::BadSpec(_))));
    assert!(matches!(
        SurfaceSpec::Clifford.scaled(0.0).generate(16),
        Err(Error::BadSpec(_))
    ));
}

#[test]
fn unit_scaling_is_bitwise_identity() {
    let a = SurfaceSpec::Clifford.generate(64).unwrap();
    let b = SurfaceSpec::Clifford.scaled(1.0).generate(64).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bumpy_is_deterministic_and_resolution_independent() {
    let spec = SurfaceSpec::bumpy_default(11);
    assert_eq!(spec.generate(16).unwrap(), spec.generate(16).unwrap());
    let coarse = spec.generate(16).unwrap();
    let fine = spec.generate(32).unwrap();
    // node (i, j) on the coarse grid is node (2i, 2j) on the fine grid
    let d = 3;
    for j in 0..16 {
        for i in 0..16 {
            let c = coarse.positions().node(i + 16 * j);
            let f = fine.positions().node(2 * i + 32 * 2 * j);
            for x in 0..d {
                assert!((c[x] - f[x]).abs() < 1e-14);
            }
        }
    }
}
