use immersa::metric::*;
use immersa::grid::*;
use immersa::Error;
use immersa::InducedGeometry;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
use immersa::grid::{grid_shift, ParamGrid};
use immersa::sampler::FieldSampler;
use immersa::surfaces::SurfaceSpec;
use std::f64::consts::PI;

fn geom_of(spec: &SurfaceSpec, n: usize) -> (GridImmersion, InducedGeometry) {
    let f = spec.generate(n).unwrap();
    let g = InducedGeometry::new(&f, 1e-8).unwrap();
    (f, g)
}

#[test]
fn config_validation() {
    let mut cfg = MetricConfig::default();
    assert!(cfg.validate().is_ok());
    cfg.k = 2;
    assert!(cfg.validate().is_err());
    let cfg = MetricConfig {
        included_orders: vec![3],
        ..MetricConfig::default()
    };
    assert!(cfg.validate().is_err());
    let cfg = MetricConfig {
        weight_exponent: -1.0,
        ..MetricConfig::default()
    };
    assert!(cfg.validate().is_err());
}

#[test]
fn constant_field_gives_area() {
    let cfg = MetricConfig::default();
    for spec in [
        SurfaceSpec::Clifford,
        SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 },
        SurfaceSpec::bumpy_default(5),
    ] {
        let (f, geom) = geom_of(&spec, 16);
        let c: Vec<f64> = (0..f.dim()).map(|i| 0.5 + i as f64).collect();
        let h = TensorField::constant_vector(f.grid(), &c);
        let g = metric_eval(&geom, &h, &h, &cfg).unwrap();
        let expect = dot(&c, &c) * geom.volume();
        assert!((g - expect).abs() <= 1e-10 * expect);
    }
}

#[test]
fn translation_and_shift_invariance() {
    let cfg = MetricConfig::default();
    let (f, geom) = geom_of(&SurfaceSpec::bumpy_default(2), 16);
    let h = FieldSampler::new(4, 3).sample(f.grid(), f.dim(), 0);
    let base = metric_eval(&geom, &h, &h, &cfg).unwrap();
    let moved = metric_eval_at(&f.translated(&[3.0, -1.0, 2.0]), &h, &h, &cfg).unwrap();
    assert!((moved - base).abs() <= 1e-10 * base);
    let fs = f.shifted((5, 2));
    let hs = grid_shift(&h, (5, 2));
    let shifted = metric_eval_at(&fs, &hs, &hs, &cfg).unwrap();
    assert!((shifted - base).abs() <= 1e-12 * base);
}

#[test]
fn background_metric_examples() {
    let grid = ParamGrid::with_order(64, 64, 6).unwrap();
    let c = TensorField::constant_vector(grid, &[1.0, 2.0, 2.0]);
    let v = background_metric_eval(&c, &c, 3).unwrap();
    assert!((v - 9.0 * 4.0 * PI * PI).abs() <= 1e-12 * v);
    let h = TensorField::from_fn(grid, TensorType::VECTOR, 3, |u, _, o| o[0] = u.sin());
    let v = background_metric_eval(&h, &h, 3).unwrap();
    assert!((v - 4.0 * PI * PI).abs() <= 1e-6);
}

#[test]
fn background_metric_is_bilinear() {
    let grid = ParamGrid::square(16).unwrap();
    let s = FieldSampler::new(4, 3);
    let (h1, h2, w) = (s.sample(grid, 3, 1), s.sample(grid, 3, 2), s.sample(grid, 3, 3));
    let (a, b) = (0.7, -1.3);
    let comb = h1.scaled(a).axpy(b, &h2).unwrap();
    let lhs = background_metric_eval(&comb, &w, 3).unwrap();
    let rhs = a * background_metric_eval(&h1, &w, 3).unwrap()
        + b * background_metric_eval(&h2, &w, 3).unwrap();
    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()));
}

#[test]
fn lp_norm_examples() {
    let (f, geom) = geom_of(&SurfaceSpec::bumpy_default(4), 16);
    let one = TensorField::scalar_from_fn(f.grid(), |_, _| 1.0);
    let vol = geom.volume();
    for p in [1.0, 2.0, 3.0, 4.0] {
        let n = lp_norm(&geom, &one, p).unwrap();
        assert!((n - vol.powf(1.0 / p)).abs() <= 1e-12 * n);
    }
    assert_eq!(lp_norm(&geom, &one, f64::INFINITY).unwrap(), 1.0);
    assert!(lp_norm(&geom, &one, 0.5).is_err());

    let sampler = FieldSampler::new(4, 3);
    for s in 0..200 {
        let h = sampler.sample(f.grid(), f.dim(), s);
        let direct = (h
            .values()
            .chunks_exact(3)
            .zip(geom.rho.values())
            .map(|(x, r)| dot(x, x) * r)
            .sum::<f64>()
            * f.grid().cell_area())
        .sqrt();
        let l2 = lp_norm(&geom, &h, 2.0).unwrap();
        assert!((l2 - direct).abs() <= 1e-12 * direct);
        let l1 = lp_norm(&geom, &h, 1.0).unwrap();
        assert!(l1 <= vol.sqrt() * l2 * (1.0 + 1e-12));
    }
}

#[test]
fn seminorm_examples() {
    let grid = ParamGrid::with_order(64, 64, 6).unwrap();
    let f = SurfaceSpec::Clifford.generate_on(grid).unwrap();
    let geom = InducedGeometry::new(&f, 1e-8).unwrap();
    let h = TensorField::from_fn(grid, TensorType::VECTOR, 4, |u, _, o| o[0] = u.sin());
    let s1 = sobolev_seminorm(&geom, &h, 1, 2.0, 4).unwrap();
    assert!((s1 - (2.0 * PI * PI).sqrt()).abs() <= 1e-5);
    assert_eq!(
        sobolev_seminorm(&geom, &h, 0, 2.0, 4).unwrap(),
        lp_norm(&geom, &h, 2.0).unwrap()
    );
    let c = TensorField::constant_vector(grid, &[1.0, 1.0, 0.0, 2.0]);
    for l in 1..=3 {
        assert!(sobolev_seminorm(&geom, &c, l, 2.0, 4).unwrap() <= 1e-12);
    }
    assert!(matches!(
        sobolev_seminorm(&geom, &c, 5, 2.0, 4),
        Err(Error::OrderTooHigh { .. })
    ));
}

#[test]
fn weight_monotonicity_when_curvature_exceeds_one() {
    // |H| = √2/λ on a scaled Clifford torus, so λ ≤ √2 keeps |H| ≥ 1.
    let (f, geom) = geom_of(&SurfaceSpec::Clifford.scaled(0.8), 16);
    let min_h = geom.mean_curvature_norm().min_value();
    assert!(min_h >= 1.0);
    let sampler = FieldSampler::new(4, 9);
    for s in 0..10 {
        let h = sampler.sample(f.grid(), f.dim(), s);
        let mut prev = 0.0;
        for w in [0.0, 1.0, 2.0, 4.0, 6.0] {
            let cfg = MetricConfig {
                weight_exponent: w,
                ..MetricConfig::default()
            };
            let v = metric_eval(&geom, &h, &h, &cfg).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }
}

#[test]
fn domination_ratio_is_finite() {
    let cfg = MetricConfig::default();
    let (f, geom) = geom_of(&SurfaceSpec::bumpy_default(1), 16);
    let sampler = FieldSampler::new(4, 21);
    for s in 0..10 {
        let h = sampler.sample(f.grid(), f.dim(), s);
        let r = background_metric_eval(&h, &h, 3).unwrap() / metric_eval(&geom, &h, &h, &cfg).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}
