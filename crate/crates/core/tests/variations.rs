use immersa::geometry::{covariant_derivative_tower, fiber_inner, InducedGeometry};
use immersa::metric::{metric_eval_at, MetricConfig};
use immersa::path::{path_energy, DiscretePath};
use immersa::sampler::FieldSampler;
use immersa::variations::*;
use immersa::{GridImmersion, SurfaceSpec, TensorField};

fn rel(a: &TensorField, b: &TensorField) -> f64 {
    a.max_abs_diff(b) / b.max_abs().max(1e-300)
}

fn setup(seed: u64, n: usize) -> (GridImmersion, InducedGeometry, TensorField) {
    let f = SurfaceSpec::bumpy_default(seed).generate(n).unwrap();
    let geom = InducedGeometry::new(&f, 1e-8).unwrap();
    let fdot = FieldSampler::new(2, seed).sample_normalized(f.grid(), 3, 1);
    (f, geom, fdot)
}

fn perturbed(f: &GridImmersion, fdot: &TensorField, eps: f64) -> InducedGeometry {
    let p = f.positions().axpy(eps, fdot).unwrap();
    InducedGeometry::new(&GridImmersion::new(p).unwrap(), 1e-8).unwrap()
}

fn central<F: Fn(&InducedGeometry) -> TensorField>(
    f: &GridImmersion,
    fdot: &TensorField,
    eps: f64,
    q: F,
) -> TensorField {
    let plus = q(&perturbed(f, fdot, eps));
    let minus = q(&perturbed(f, fdot, -eps));
    plus.sub(&minus).unwrap().scaled(0.5 / eps)
}

#[test]
fn geometry_variations_match_finite_differences() {
    let eps = 1e-4;
    for seed in 0..3 {
        let (f, geom, fdot) = setup(seed, 16);
        let b = VariationBundle::new(&geom, &fdot).unwrap();
        let checks = [
            ("g", rel(&b.dt_g, &central(&f, &fdot, eps, |g| g.g.clone()))),
            ("ginv", rel(&b.dt_g_inv, &central(&f, &fdot, eps, |g| g.g_inv.clone()))),
            ("gamma", rel(&b.dt_gamma, &central(&f, &fdot, eps, |g| g.gamma.clone()))),
            ("S", rel(&b.dt_s, &central(&f, &fdot, eps, |g| g.second_fundamental.clone()))),
            ("H", rel(&b.dt_h, &central(&f, &fdot, eps, |g| g.mean_curvature.clone()))),
            ("rho", rel(&b.dt_rho, &central(&f, &fdot, eps, |g| g.rho.clone()))),
        ];
        for (name, e) in checks {
            assert!(e < 1e-5, "{name}: relative error {e}");
        }
        let (_, dvol) = variation_volume(&geom, &fdot).unwrap();
        let fd = (perturbed(&f, &fdot, eps).volume() - perturbed(&f, &fdot, -eps).volume()) / (2.0 * eps);
        assert!((dvol - fd).abs() <= 1e-6 * fd.abs().max(1.0));
    }
}

#[test]
fn trivial_directions() {
    let (f, geom, _) = setup(4, 16);
    let c = TensorField::constant_vector(f.grid(), &[0.3, -1.0, 2.0]);
    let b = VariationBundle::new(&geom, &c).unwrap();
    for x in [&b.dt_g, &b.dt_gamma, &b.dt_s, &b.dt_h, &b.dt_rho] {
        assert_eq!(x.max_abs(), 0.0);
    }
    let s = VariationBundle::new(&geom, f.positions()).unwrap();
    assert!(s.dt_g.max_abs_diff(&geom.g.scaled(2.0)) <= 1e-10 * geom.g.max_abs());
    assert!(s.dt_gamma.max_abs() <= 1e-10 * geom.gamma.max_abs().max(1.0));
    assert!(s.dt_s.max_abs_diff(&geom.second_fundamental) <= 1e-9 * geom.second_fundamental.max_abs());
    assert!(
        s.dt_h.max_abs_diff(&geom.mean_curvature.scaled(-1.0)) <= 1e-9 * geom.mean_curvature.max_abs()
    );
    let (_, dvol) = variation_volume(&geom, f.positions()).unwrap();
    assert!((dvol - 2.0 * geom.volume()).abs() <= 1e-9 * geom.volume());
}

#[test]
fn variations_are_linear() {
    let (f, geom, a) = setup(5, 16);
    let b = FieldSampler::new(2, 77).sample(f.grid(), 3, 2);
    let ab = a.axpy(-0.7, &b).unwrap();
    let va = VariationBundle::new(&geom, &a).unwrap();
    let vb = VariationBundle::new(&geom, &b).unwrap();
    let vab = VariationBundle::new(&geom, &ab).unwrap();
    let comb = |x: &TensorField, y: &TensorField| x.axpy(-0.7, y).unwrap();
    assert!(rel(&vab.dt_gamma, &comb(&va.dt_gamma, &vb.dt_gamma)) < 1e-10);
    assert!(rel(&vab.dt_h, &comb(&va.dt_h, &vb.dt_h)) < 1e-10);
    assert!(rel(&vab.dt_rho, &comb(&va.dt_rho, &vb.dt_rho)) < 1e-10);
}

#[test]
fn product_rule_form_converges_to_the_discrete_route() {
    let err = |n: usize| {
        let (_, geom, fdot) = setup(6, n);
        let b = VariationBundle::new(&geom, &fdot).unwrap();
        let pr = nabla_dt_g_product_rule(&geom, &fdot).unwrap();
        rel(&pr, &b.nabla_dt_g)
    };
    let (e16, e32) = (err(16), err(32));
    assert!(e32 < e16 / 4.0, "{e16} {e32}");
}

#[test]
fn covariant_derivative_variation_matches_finite_differences() {
    let (f, geom, fdot) = setup(7, 16);
    let h = FieldSampler::new(2, 3).sample(f.grid(), 3, 5);
    let c = TensorField::constant_vector(f.grid(), &[1.0, 1.0, 1.0]);
    assert_eq!(variation_covderiv(&geom, &fdot, &h, 1, 4).unwrap().max_abs(), 0.0);
    assert_eq!(variation_covderiv(&geom, &c, &h, 2, 4).unwrap().max_abs(), 0.0);
    for j in [2, 3] {
        let an = variation_covderiv(&geom, &fdot, &h, j, 4).unwrap();
        let fd = central(&f, &fdot, 1e-4, |g| {
            covariant_derivative_tower(g, &h, j).unwrap().pop().unwrap()
        });
        assert!(rel(&an, &fd) < 1e-5, "order {j}: {}", rel(&an, &fd));
    }
    assert!(variation_covderiv(&geom, &fdot, &h, 5, 4).is_err());
}

#[test]
fn fiber_inner_leibniz_consistency() {
    let (f, geom, fdot) = setup(8, 16);
    let h = FieldSampler::new(2, 3).sample(f.grid(), 3, 6);
    let a = covariant_derivative_tower(&geom, &h, 2).unwrap().pop().unwrap();
    let b = VariationBundle::new(&geom, &fdot).unwrap();
    let an = variation_fiber_inner(&geom, &b, &a, &a).unwrap();
    let fd = central(&f, &fdot, 1e-4, |g| fiber_inner(g, &a, &a).unwrap());
    assert!(rel(&an, &fd) < 1e-5);
}

fn random_path(seed: u64, n: usize, steps: usize) -> DiscretePath {
    let f0 = SurfaceSpec::bumpy_default(seed).generate(n).unwrap();
    let s = FieldSampler::new(2, seed + 100);
    let slices = (0..=steps)
        .map(|t| {
            let p = f0.positions().axpy(0.05, &s.sample_normalized(f0.grid(), 3, t as u64)).unwrap();
            GridImmersion::new(p).unwrap()
        })
        .collect();
    DiscretePath::new(slices).unwrap()
}

#[test]
fn metric_derivative_matches_finite_differences() {
    let (f, geom, fdot) = setup(9, 16);
    let h = FieldSampler::new(2, 3).sample(f.grid(), 3, 7);
    let hdot = FieldSampler::new(2, 4).sample(f.grid(), 3, 8);
    let cfg = MetricConfig::default();
    let an = metric_derivative(&geom, &h, &fdot, &hdot, &cfg).unwrap();
    let eps = 1e-5;
    let val = |e: f64| {
        let m = GridImmersion::new(f.positions().axpy(e, &fdot).unwrap()).unwrap();
        let hh = h.axpy(e, &hdot).unwrap();
        metric_eval_at(&m, &hh, &hh, &cfg).unwrap()
    };
    let fd = (val(eps) - val(-eps)) / (2.0 * eps);
    assert!((an - fd).abs() <= 1e-6 * fd.abs(), "{an} {fd}");
}

#[test]
fn gradient_engines_agree() {
    let cfg = MetricConfig::default();
    let path = random_path(1, 8, 4);
    let an = flatten(&energy_gradient(&path, &cfg, Engine::Analytic).unwrap());
    let fd = flatten(&energy_gradient(&path, &cfg, Engine::FiniteDifference).unwrap());
    let scale = fd.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let err = an.iter().zip(&fd).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err < 1e-5 * scale, "{err} vs {scale}");

    let grad = energy_gradient(&path, &cfg, Engine::Analytic).unwrap();
    for i in 0..3u64 {
        let dir: Vec<TensorField> = (0..3)
            .map(|t| FieldSampler::new(2, 50 + i).sample(path.grid(), 3, t))
            .collect();
        let dd = directional_energy_derivative(&path, &dir, &cfg).unwrap();
        let ip: f64 = grad.iter().zip(&dir).map(|(g, d)| g.dot(d)).sum();
        assert!((ip - dd).abs() <= 1e-10 * dd.abs().max(1e-300), "{ip} {dd}");
        let e = |s: f64| {
            let dofs: Vec<f64> = path
                .interior_dofs()
                .iter()
                .zip(flatten(&dir))
                .map(|(x, d)| x + s * d)
                .collect();
            path_energy(&path.with_interior_dofs(&dofs).unwrap(), &cfg).unwrap()
        };
        let fd = (e(1e-5) - e(-1e-5)) / 2e-5;
        assert!((dd - fd).abs() <= 1e-6 * fd.abs(), "{dd} {fd}");
    }
}

#[test]
fn constant_path_has_zero_gradient() {
    let f = SurfaceSpec::bumpy_default(3).generate(8).unwrap();
    let path = DiscretePath::constant(&f, 4).unwrap();
    let (e, g) = energy_and_gradient(&path, &MetricConfig::default()).unwrap();
    assert_eq!(e, 0.0);
    assert!(g.iter().all(|x| x.max_abs() == 0.0));
    let zero: Vec<TensorField> = (0..3).map(|_| TensorField::zeros(f.grid(), immersa::TensorType::VECTOR, 3)).collect();
    assert_eq!(directional_energy_derivative(&path, &zero, &MetricConfig::default()).unwrap(), 0.0);
}
