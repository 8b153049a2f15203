use immersa::geometry::*;
use immersa::grid::*;
use immersa::Error;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
use immersa::grid::{grid_shift, partial_derivative, Direction, ParamGrid};
use immersa::surfaces::SurfaceSpec;
use std::f64::consts::PI;

fn clifford(n: usize) -> GridImmersion {
    SurfaceSpec::Clifford.generate(n).unwrap()
}

fn round(n: usize) -> GridImmersion {
    SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }
        .generate(n)
        .unwrap()
}

fn bumpy(n: usize) -> GridImmersion {
    SurfaceSpec::bumpy_default(7).generate(n).unwrap()
}

#[test]
fn clifford_metric_is_identity() {
    let geom = InducedGeometry::new(&clifford(64), 1e-8).unwrap();
    let id = TensorField::from_fn(geom.grid(), METRIC_TYPE, 4, |_, _, o| {
        o.copy_from_slice(&[1.0, 0.0, 0.0, 1.0])
    });
    assert!(geom.g.max_abs_diff(&id) <= 1e-5);
    assert!(geom.gamma.max_abs() <= 1e-5);
}

#[test]
fn metric_scaling_and_translation() {
    let f = bumpy(16);
    let g = induced_metric(&f, 1e-8).unwrap();
    let g2 = induced_metric(&f.scaled(3.0), 1e-8).unwrap();
    assert!(g2.max_abs_diff(&g.scaled(9.0)) <= 1e-12 * g2.max_abs());
    let gt = induced_metric(&f.translated(&[1.0, -2.0, 0.5]), 1e-8).unwrap();
    // Constant shifts cancel inside each stencil difference up to rounding of
    // the shifted coordinates.
    assert!(gt.max_abs_diff(&g) <= 1e-12 * g.max_abs());
}

#[test]
fn inverse_times_metric_is_identity() {
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    for node in 0..geom.grid().len() {
        let g = geom.node_g(node);
        let gi = geom.node_g_inv(node);
        let p = [
            gi[0] * g[0] + gi[1] * g[2],
            gi[0] * g[1] + gi[1] * g[3],
            gi[2] * g[0] + gi[3] * g[2],
            gi[2] * g[1] + gi[3] * g[3],
        ];
        for (x, e) in p.iter().zip([1.0, 0.0, 0.0, 1.0]) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!((geom.rho.node(node)[0] - (g[0] * g[3] - g[1] * g[2]).sqrt()).abs() < 1e-14);
    }
}

#[test]
fn christoffel_symmetric_and_scale_invariant() {
    let f = bumpy(16);
    let geom = InducedGeometry::new(&f, 1e-8).unwrap();
    for node in 0..geom.grid().len() {
        let gam = geom.node_gamma(node);
        for a in 0..2 {
            assert_eq!(gam[4 * a + 1], gam[4 * a + 2]);
        }
    }
    let scaled = InducedGeometry::new(&f.scaled(2.5), 1e-8).unwrap();
    assert!(scaled.gamma.max_abs_diff(&geom.gamma) <= 1e-12 * geom.gamma.max_abs());
}

#[test]
fn round_torus_christoffel_closed_form() {
    let (big, small) = (2.0, 1.0);
    let geom = InducedGeometry::new(&round(64), 1e-8).unwrap();
    let exact = TensorField::from_fn(geom.grid(), CHRISTOFFEL_TYPE, 3, |_, v, o| {
        let w = big + small * v.cos();
        // Γ^u_uv = Γ^u_vu = −r sin v / w, Γ^v_uu = w sin v / r
        o[1] = -small * v.sin() / w;
        o[2] = o[1];
        o[4] = w * v.sin() / small;
    });
    assert!(geom.gamma.max_abs_diff(&exact) <= 1e-4);
}

#[test]
fn metric_is_parallel() {
    // ∇g = 0 is an algebraic identity for Γ built from ∂g.
    let geom = InducedGeometry::new(&round(64), 1e-8).unwrap();
    let ng = covariant_derivative(&geom, &geom.g).unwrap();
    assert!(ng.max_abs() <= 1e-4);
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    let ng = covariant_derivative(&geom, &geom.g).unwrap();
    assert!(ng.max_abs() <= 1e-10 * geom.dg.max_abs());
}

#[test]
fn clifford_second_fundamental_form() {
    let geom = InducedGeometry::new(&clifford(64), 1e-8).unwrap();
    let exact = TensorField::from_fn(geom.grid(), SECOND_FORM_TYPE, 4, |u, v, o| {
        o[0] = -u.cos();
        o[1] = -u.sin();
        o[12 + 2] = -v.cos();
        o[12 + 3] = -v.sin();
    });
    assert!(geom.second_fundamental.max_abs_diff(&exact) <= 1e-4);
    let hn = geom.mean_curvature_norm();
    assert!(hn.values().iter().all(|h| (h - 2f64.sqrt()).abs() <= 1e-4));
}

#[test]
fn round_torus_mean_curvature_and_area() {
    let (big, small) = (2.0, 1.0);
    let geom = InducedGeometry::new(&round(64), 1e-8).unwrap();
    let vol = geom.volume();
    assert!((vol - 8.0 * PI * PI).abs() <= 1e-5 * 8.0 * PI * PI);
    let hn = geom.mean_curvature_norm();
    for node in 0..geom.grid().len() {
        let (_, v) = geom.grid().coords(node);
        let exact = 1.0 / small + v.cos() / (big + small * v.cos());
        assert!((hn.values()[node] - exact).abs() <= 1e-3);
    }
    // outer equator
    assert!((hn.values()[0] - 4.0 / 3.0).abs() <= 1e-3);
}

#[test]
fn second_form_direct_matches_generic_covariant_derivative() {
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    let generic = covariant_derivative(&geom, &geom.tangent_map).unwrap();
    assert!(generic.max_abs_diff(&geom.second_fundamental) <= 1e-10);
}

#[test]
fn scaling_laws_for_s_and_h() {
    let f = bumpy(16);
    let geom = InducedGeometry::new(&f, 1e-8).unwrap();
    let lam = 1.7;
    let gs = InducedGeometry::new(&f.scaled(lam), 1e-8).unwrap();
    let tol = 1e-12;
    assert!(
        gs.second_fundamental.max_abs_diff(&geom.second_fundamental.scaled(lam))
            <= tol * gs.second_fundamental.max_abs()
    );
    assert!(
        gs.mean_curvature.max_abs_diff(&geom.mean_curvature.scaled(1.0 / lam))
            <= tol * geom.mean_curvature.max_abs()
    );
    assert!(gs.rho.max_abs_diff(&geom.rho.scaled(lam * lam)) <= tol * gs.rho.max_abs());
}

#[test]
fn mean_curvature_normality_improves_under_refinement() {
    let spec = SurfaceSpec::bumpy_default(3);
    let worst = |n: usize| {
        let f = spec.generate(n).unwrap();
        let geom = InducedGeometry::new(&f, 1e-8).unwrap();
        let d = f.dim();
        let mut w: f64 = 0.0;
        for node in 0..geom.grid().len() {
            let h = geom.mean_curvature.node(node);
            let t = geom.tangent_map.node(node);
            for a in 0..2 {
                let ta = &t[a * d..(a + 1) * d];
                w = w.max(dot(h, ta).abs() / dot(ta, ta).sqrt());
            }
        }
        w / geom.mean_curvature.max_abs()
    };
    let rate = (worst(32) / worst(64)).log2();
    assert!(rate >= 2.0, "observed normality order {rate}");
}

#[test]
fn scalar_vector_fields_ignore_the_connection() {
    let grid = ParamGrid::square(16).unwrap();
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    let h = TensorField::from_fn(grid, TensorType::VECTOR, 3, |u, v, o| {
        o[0] = u.sin();
        o[1] = (u + v).cos();
        o[2] = v.sin() * u.cos();
    });
    let nh = covariant_derivative(&geom, &h).unwrap();
    assert_eq!(nh, chart_gradient(&h));
}

#[test]
fn iterated_derivative_orders() {
    let geom = InducedGeometry::new(&clifford(64), 1e-8).unwrap();
    let c = TensorField::constant_vector(geom.grid(), &[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(iterated_covariant_derivative(&geom, &c, 0, 4).unwrap(), c);
    assert!(iterated_covariant_derivative(&geom, &c, 2, 4).unwrap().max_abs() <= 1e-5);
    assert!(matches!(
        iterated_covariant_derivative(&geom, &c, 5, 4),
        Err(Error::OrderTooHigh { .. })
    ));
    let h = TensorField::from_fn(geom.grid(), TensorType::VECTOR, 4, |u, v, o| {
        o[0] = (u + v).sin();
        o[3] = u.cos();
    });
    let twice = covariant_derivative(&geom, &covariant_derivative(&geom, &h).unwrap()).unwrap();
    assert_eq!(iterated_covariant_derivative(&geom, &h, 2, 4).unwrap(), twice);
    // Γ ≈ 0 on the Clifford torus.
    let flat = chart_gradient(&chart_gradient(&h));
    assert!(twice.max_abs_diff(&flat) <= 1e-5);
}

#[test]
fn fiber_norms_of_tangent_map_and_metric() {
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    let tf2 = fiber_inner(&geom, &geom.tangent_map, &geom.tangent_map).unwrap();
    assert!(tf2.values().iter().all(|x| (x - 2.0).abs() < 1e-12));
    let gg = fiber_inner(&geom, &geom.g, &geom.g).unwrap();
    assert!(gg.values().iter().all(|x| (x - 2.0).abs() < 1e-12));
}

#[test]
fn fiber_inner_orthogonal_vectors() {
    let geom = InducedGeometry::new(&bumpy(16), 1e-8).unwrap();
    let a = TensorField::constant_vector(geom.grid(), &[1.0, 0.0, 0.0]);
    let b = TensorField::constant_vector(geom.grid(), &[0.0, 2.0, -1.0]);
    assert!(fiber_inner(&geom, &a, &b).unwrap().values().iter().all(|&x| x == 0.0));
    assert!(matches!(
        fiber_inner(&geom, &a, &geom.g),
        Err(Error::TypeMismatch { .. })
    ));
}

#[test]
fn geometry_commutes_with_grid_shift() {
    let f = bumpy(16);
    let geom = InducedGeometry::new(&f, 1e-8).unwrap();
    let shifted = InducedGeometry::new(&f.shifted((3, -2)), 1e-8).unwrap();
    for (a, b) in [
        (&geom.g, &shifted.g),
        (&geom.gamma, &shifted.gamma),
        (&geom.second_fundamental, &shifted.second_fundamental),
        (&geom.mean_curvature, &shifted.mean_curvature),
    ] {
        assert_eq!(&grid_shift(a, (3, -2)), b);
    }
    let p = partial_derivative(&geom.rho, Direction::V);
    assert_eq!(grid_shift(&p, (1, 1)), partial_derivative(&grid_shift(&geom.rho, (1, 1)), Direction::V));
}
