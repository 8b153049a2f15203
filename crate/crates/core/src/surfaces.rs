//! Analytic test surfaces sampled on periodic grids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{GridImmersion, ParamGrid};

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceSpec {
    /// `(cos u, sin u, cos v, sin v)` in R⁴; flat with `|H| = √2`.
    Clifford,
    /// Torus of revolution in R³ with tube radius `small < big`.
    RoundTorus { big: f64, small: f64 },
    /// Round torus whose tube radius carries a random trigonometric bump of
    /// relative size `amplitude` and maximum frequency `freq`.
    Bumpy {
        big: f64,
        small: f64,
        amplitude: f64,
        freq: usize,
        seed: u64,
    },
    Scaled { inner: Box<SurfaceSpec>, factor: f64 },
}

impl SurfaceSpec {
    pub fn bumpy_default(seed: u64) -> SurfaceSpec {
        SurfaceSpec::Bumpy {
            big: 2.0,
            small: 1.0,
            amplitude: 0.15,
            freq: 2,
            seed,
        }
    }

    pub fn scaled(self, factor: f64) -> SurfaceSpec {
        SurfaceSpec::Scaled {
            inner: Box::new(self),
            factor,
        }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            SurfaceSpec::Clifford => "clifford".into(),
            SurfaceSpec::RoundTorus { big, small } => format!("round({big},{small})"),
            SurfaceSpec::Bumpy {
                amplitude, freq, seed, ..
            } => format!("bumpy(a={amplitude},f={freq},s={seed})"),
            SurfaceSpec::Scaled { inner, factor } => format!("{}x{}", factor, inner.label()),
        }
    }

    pub fn generate(&self, n: usize) -> Result<GridImmersion> {
        self.generate_on(ParamGrid::square(n)?)
    }

    pub fn generate_on(&self, grid: ParamGrid) -> Result<GridImmersion> {
        let f = match self {
            SurfaceSpec::Clifford => GridImmersion::from_fn(grid, 4, |u, v, o| {
                o[0] = u.cos();
                o[1] = u.sin();
                o[2] = v.cos();
                o[3] = v.sin();
            })?,
            SurfaceSpec::RoundTorus { big, small } => {
                check_radii(*big, *small)?;
                let (big, small) = (*big, *small);
                GridImmersion::from_fn(grid, 3, |u, v, o| torus_point(big, small, u, v, o))?
            }
            SurfaceSpec::Bumpy {
                big,
                small,
                amplitude,
                freq,
                seed,
            } => {
                check_radii(*big, *small)?;
                if !(0.0..1.0).contains(amplitude) {
                    return Err(Error::BadSpec(format!("amplitude {amplitude} not in [0, 1)")));
                }
                let bump = Bump::new(*freq, *seed);
                let (big, small, amp) = (*big, *small, *amplitude);
                GridImmersion::from_fn(grid, 3, |u, v, o| {
                    let r = small * (1.0 + amp * bump.eval(u, v));
                    torus_point(big, r, u, v, o)
                })?
            }
            SurfaceSpec::Scaled { inner, factor } => {
                if *factor == 0.0 || !factor.is_finite() {
                    return Err(Error::BadSpec(format!("scale factor {factor}")));
                }
                let f = inner.generate_on(grid)?;
                if *factor == 1.0 {
                    f
                } else {
                    f.scaled(*factor)
                }
            }
        };
        f.check_immersion(GridImmersion::DEFAULT_FLOOR)
            .map_err(|e| Error::BadSpec(format!("generated surface is not an immersion: {e}")))?;
        Ok(f)
    }
}

fn check_radii(big: f64, small: f64) -> Result<()> {
    if !(small > 0.0 && small < big) {
        return Err(Error::BadSpec(format!(
            "torus radii need 0 < r < R, got R = {big}, r = {small}"
        )));
    }
    Ok(())
}

fn torus_point(big: f64, small: f64, u: f64, v: f64, o: &mut [f64]) {
    let w = big + small * v.cos();
    o[0] = w * u.cos();
    o[1] = w * u.sin();
    o[2] = small * v.sin();
}

/// Random trigonometric polynomial normalized so that `|bump| ≤ 1`.
struct Bump {
    modes: Vec<(f64, f64, f64, f64)>,
}

impl Bump {
    fn new(freq: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = freq as i64;
        let mut modes = Vec::new();
        for p in 0..=f {
            for q in -f..=f {
                if p == 0 && q <= 0 {
                    continue;
                }
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                modes.push((p as f64, q as f64, a, b));
            }
        }
        let total: f64 = modes.iter().map(|m| m.2.abs() + m.3.abs()).sum();
        if total > 0.0 {
            for m in &mut modes {
                m.2 /= total;
                m.3 /= total;
            }
        }
        Bump { modes }
    }

    fn eval(&self, u: f64, v: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(p, q, a, b)| {
                let t = p * u + q * v;
                a * t.cos() + b * t.sin()
            })
            .sum()
    }
}
