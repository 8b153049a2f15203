use immersa::geodesic::*;
use immersa::matching::{quotient_distance, MatchOptions, WarpField};
use immersa::metric::MetricConfig;
use immersa::path::{path_energy, path_length};
use immersa::sampler::FieldSampler;
use immersa::{DiscretePath, GridImmersion, InducedGeometry, SurfaceSpec};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn translation_path_energy_and_length() {
    let cfg = MetricConfig::default();
    let f = SurfaceSpec::bumpy_default(1).generate(16).unwrap();
    let c = [0.3, -0.2, 0.5];
    let vol = InducedGeometry::new(&f, 1e-8).unwrap().volume();
    let c2: f64 = c.iter().map(|x| x * x).sum();
    for steps in [1, 3, 7] {
        let p = DiscretePath::linear(&f, &f.translated(&c), steps).unwrap();
        assert!(rel(path_energy(&p, &cfg).unwrap(), c2 * vol) < 1e-10);
        assert!(rel(path_length(&p, &cfg).unwrap(), c2.sqrt() * vol.sqrt()) < 1e-10);
    }
    let still = DiscretePath::constant(&f, 4).unwrap();
    assert_eq!(path_energy(&still, &cfg).unwrap(), 0.0);
    assert_eq!(path_length(&still, &cfg).unwrap(), 0.0);
}

fn random_path(seed: u64, n: usize, steps: usize, amp: f64) -> DiscretePath {
    let f0 = SurfaceSpec::bumpy_default(seed).generate(n).unwrap();
    let s = FieldSampler::new(2, seed + 7);
    let slices = (0..=steps)
        .map(|t| GridImmersion::new(f0.positions().axpy(amp, &s.sample_normalized(f0.grid(), 3, t as u64)).unwrap()).unwrap())
        .collect();
    DiscretePath::new(slices).unwrap()
}

#[test]
fn energy_length_inequality_and_reversal() {
    let cfg = MetricConfig::default();
    for seed in 0..4 {
        let p = random_path(seed, 12, 5, 0.1);
        let e = path_energy(&p, &cfg).unwrap();
        let l = path_length(&p, &cfg).unwrap();
        assert!(l * l <= e + 1e-12);
        assert!(rel(path_energy(&p.reversed(), &cfg).unwrap(), e) < 1e-12);
        let cached = p.clone().with_energy(&cfg).unwrap();
        assert_eq!(cached.cached_energy(), Some(e));
    }
}

#[test]
fn sqrt_volume_is_lipschitz_along_paths() {
    let cfg = MetricConfig::default();
    for seed in 0..5 {
        let p = random_path(seed, 16, 4, 0.3);
        let rep = completeness_diagnostics(&p, &cfg).unwrap();
        let mut total = 0.0;
        for (t, s) in rep.steps.iter().enumerate() {
            let dv = (rep.slices[t + 1].volume.sqrt() - rep.slices[t].volume.sqrt()).abs();
            let bound = s.grad_velocity_l2_avg * p.dtau() / 2f64.sqrt();
            assert!(dv <= bound + 1e-8, "{dv} {bound}");
            total += bound;
        }
        let end = (rep.slices.last().unwrap().volume.sqrt() - rep.slices[0].volume.sqrt()).abs();
        assert!(end <= total + 1e-6);
    }
}

#[test]
fn diagnostics_of_special_paths() {
    let cfg = MetricConfig::default();
    let f = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(16).unwrap();
    let still = completeness_diagnostics(&DiscretePath::constant(&f, 3).unwrap(), &cfg).unwrap();
    assert!(still.steps.windows(2).all(|w| w[0].rho_min == w[1].rho_min && w[0].s_l4 == w[1].s_l4));
    assert_eq!(still.length, 0.0);

    let moved = DiscretePath::linear(&f, &f.translated(&[1.0, 2.0, 0.0]), 4).unwrap();
    let rep = completeness_diagnostics(&moved, &cfg).unwrap();
    let s0 = &rep.steps[0];
    for s in &rep.steps {
        assert!(rel(s.domination_ratio, s0.domination_ratio) < 1e-10);
        assert!(rel(s.rho_min, s0.rho_min) < 1e-10);
        assert!(rel(s.g_linf, s0.g_linf) < 1e-10);
        assert!(rel(s.s_l4, s0.s_l4) < 1e-10);
        assert!(rel(s.gamma_l4, s0.gamma_l4) < 1e-10);
    }
    assert!(s0.domination_ratio > 0.0 && s0.domination_ratio <= 1.0 + 1e-12);

    let grown = DiscretePath::linear(&f, &f.scaled(2.0), 4).unwrap();
    let rep = completeness_diagnostics(&grown, &cfg).unwrap();
    let (a, b) = (&rep.slices[0], rep.slices.last().unwrap());
    assert!(rel(b.rho_min / a.rho_min, 4.0) < 1e-6 && rel(b.rho_max / a.rho_max, 4.0) < 1e-6);
    assert!(rep.growth.iter().all(|g| g.constant.is_finite() && g.constant >= 0.0));
}

#[test]
fn solver_trivial_and_invalid_inputs() {
    let cfg = MetricConfig::default();
    let f = SurfaceSpec::Clifford.generate(8).unwrap();
    let sol = solve_geodesic_bvp(&f, &f, 4, &cfg, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, SolverStatus::Trivial);
    assert_eq!((sol.iterations, sol.energy), (0, 0.0));
    assert!(solve_geodesic_bvp(&f, &f.scaled(1.1), 1, &cfg, &SolverOptions::default()).is_err());
    let g = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(8).unwrap();
    assert!(solve_geodesic_bvp(&f, &g, 4, &cfg, &SolverOptions::default()).is_err());
}

#[test]
fn scaling_geodesic_descends_below_linear_interpolation() {
    let cfg = MetricConfig::default();
    let f0 = SurfaceSpec::Clifford.generate(16).unwrap();
    let f1 = f0.scaled(1.05);
    let opts = SolverOptions::default();
    let sol = solve_geodesic_bvp(&f0, &f1, 8, &cfg, &opts).unwrap();
    assert_eq!(sol.status, SolverStatus::Converged);
    assert!(sol.grad_sup <= 1e-6);
    let linear = path_energy(&DiscretePath::linear(&f0, &f1, 8).unwrap(), &cfg).unwrap();
    assert!(sol.energy <= linear);
    assert!(sol.history.windows(2).all(|w| w[1].value <= w[0].value));
    assert_eq!(sol.path.slice(0), &f0);
    assert_eq!(sol.path.slice(8), &f1);
    assert!(rel(path_energy(&sol.path.reversed(), &cfg).unwrap(), sol.energy) < 1e-10);
}

#[test]
fn initialization_feasibility() {
    let cfg = MetricConfig::default();
    let f0 = SurfaceSpec::RoundTorus { big: 2.0, small: 1.0 }.generate(8).unwrap();
    let f1 = f0.scaled(-1.0);
    // both interpolants collapse to the origin halfway between f and −f
    assert_eq!(initial_path(&f0, &f1, 4, &cfg).unwrap_err(), immersa::Error::InfeasibleInitialization);
    let f2 = f0.scaled(0.01);
    let q = initial_path(&f0, &f2, 4, &cfg).unwrap();
    q.check_immersions(cfg.immersion_floor).unwrap();
}

#[test]
fn quotient_distance_on_shifted_and_identical_pairs() {
    let cfg = MetricConfig::default();
    let f0 = SurfaceSpec::bumpy_default(2).generate(12).unwrap();
    let opts = MatchOptions {
        outer_iters: 1,
        warp_iters: 3,
        ..MatchOptions::default()
    };
    let same = quotient_distance(&f0, &f0, 3, &cfg, &opts).unwrap();
    assert_eq!(same.distance, 0.0);
    assert!(same.warp.is_identity());

    let f1 = f0.shifted((3, -2));
    let r = quotient_distance(&f0, &f1, 3, &cfg, &opts).unwrap();
    assert!(r.distance <= r.parametrized_distance + 1e-10);
    assert!(r.distance <= 1e-6, "{}", r.distance);
    assert!(r.accepted.iter().all(|a| a.min_rho > 0.0 && a.min_jacobian > 0.0));
    assert!(r.accepted.windows(2).all(|w| w[1].energy <= w[0].energy));
    let _ = WarpField::identity(f0.grid());
}
