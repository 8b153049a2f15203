//! Empirical ratios `lhs / rhs` of the Sobolev-type inequalities on immersed
//! surfaces, and ensemble scans over random fields and grid sizes. A maximal
//! ratio is a lower bound for the best constant.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{iterated_covariant_derivative, InducedGeometry};
use crate::grid::{ParamGrid, TensorField};
use crate::metric::lp_norm;
use crate::sampler::FieldSampler;
use crate::surfaces::SurfaceSpec;

/// Denominators at or below this reject a sample.
pub const DENOMINATOR_FLOOR: f64 = 1e-30;

const MAX_ORDER: usize = 4;

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if num == 0.0 {
        return Ok(0.0);
    }
    if !(den > DENOMINATOR_FLOOR) || !den.is_finite() || !num.is_finite() {
        return Err(Error::DegenerateSample(format!("{what}: denominator {den:e}")));
    }
    Ok(num / den)
}

/// `|H|^e · h`, nodewise.
fn curvature_scaled(geom: &InducedGeometry, h: &TensorField, e: f64) -> Result<TensorField> {
    let w = geom.mean_curvature_norm().map(|x| x.powf(e));
    h.pointwise_scaled(&w)
}

fn nabla(geom: &InducedGeometry, h: &TensorField, order: usize) -> Result<TensorField> {
    iterated_covariant_derivative(geom, h, order, MAX_ORDER)
}

/// `‖h‖_{L²} / (‖∇h‖_{L¹} + ‖|H|h‖_{L¹})`.
pub fn mss_ratio(geom: &InducedGeometry, h: &TensorField) -> Result<f64> {
    let num = lp_norm(geom, h, 2.0)?;
    let den = lp_norm(geom, &nabla(geom, h, 1)?, 1.0)?
        + lp_norm(geom, &curvature_scaled(geom, h, 1.0)?, 1.0)?;
    ratio(num, den, "mss")
}

/// `‖h‖_{L⁴} / (‖h‖_{L²} + ‖√|H| h‖_{L²} + ‖∇h‖_{L²})`.
pub fn l4h1_ratio(geom: &InducedGeometry, h: &TensorField) -> Result<f64> {
    let num = lp_norm(geom, h, 4.0)?;
    let den = lp_norm(geom, h, 2.0)?
        + lp_norm(geom, &curvature_scaled(geom, h, 0.5)?, 2.0)?
        + lp_norm(geom, &nabla(geom, h, 1)?, 2.0)?;
    ratio(num, den, "l4h1")
}

/// `‖h‖_{L^∞} / (‖h‖_{L^m}^{1−α} (‖∇h‖_{L^p} + ‖|H|h‖_{L^p})^α)` with
/// `1/α = (1/2 − 1/p) m + 1`, `p > 2`.
pub fn mult_embed_ratio(
    geom: &InducedGeometry,
    h: &TensorField,
    p: f64,
    m: f64,
    alpha: f64,
) -> Result<f64> {
    if !(p > 2.0) || !(m >= 1.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::BadExponents(format!("p = {p}, m = {m}, alpha = {alpha}")));
    }
    let rel = (0.5 - 1.0 / p) * m + 1.0;
    if (1.0 / alpha - rel).abs() > 1e-12 * rel.abs().max(1.0) {
        return Err(Error::BadExponents(format!(
            "1/alpha = {} but (1/2 - 1/p) m + 1 = {rel}",
            1.0 / alpha
        )));
    }
    let num = lp_norm(geom, h, f64::INFINITY)?;
    let grad = lp_norm(geom, &nabla(geom, h, 1)?, p)? + lp_norm(geom, &curvature_scaled(geom, h, 1.0)?, p)?;
    let den = lp_norm(geom, h, m)?.powf(1.0 - alpha) * grad.powf(alpha);
    ratio(num, den, "mult_embed")
}

/// `‖∇h‖²_{L^{2r}} / (‖∇²h‖_{L^p} ‖h‖_{L^q})` with `1/p + 1/q = 1/r`.
pub fn hamilton_ratio(geom: &InducedGeometry, h: &TensorField, p: f64, q: f64, r: f64) -> Result<f64> {
    if !(p >= 1.0 && q >= 1.0 && r >= 1.0) {
        return Err(Error::BadExponents(format!("p = {p}, q = {q}, r = {r}")));
    }
    if (1.0 / p + 1.0 / q - 1.0 / r).abs() > 1e-12 {
        return Err(Error::BadExponents(format!("1/{p} + 1/{q} != 1/{r}")));
    }
    let g1 = lp_norm(geom, &nabla(geom, h, 1)?, 2.0 * r)?;
    let den = lp_norm(geom, &nabla(geom, h, 2)?, p)? * lp_norm(geom, h, q)?;
    ratio(g1 * g1, den, "hamilton")
}

/// `‖h‖_{L^∞} / (Vol^{(q−1)/q} (‖∇²h‖_{L^q} + ‖|H|²h‖_{L^q}))`, `q > 1`.
pub fn linf_embed_ratio(geom: &InducedGeometry, h: &TensorField, q: f64) -> Result<f64> {
    if !(q > 1.0) {
        return Err(Error::BadExponents(format!("q = {q} must exceed 1")));
    }
    let num = lp_norm(geom, h, f64::INFINITY)?;
    let den = geom.volume().powf((q - 1.0) / q)
        * (lp_norm(geom, &nabla(geom, h, 2)?, q)? + lp_norm(geom, &curvature_scaled(geom, h, 2.0)?, q)?);
    ratio(num, den, "linf_embed")
}

/// `‖h‖²_{Ḣ^q} / (‖h‖²_{L²} + ‖h‖²_{Ḣ^{q'}})`, `q ≤ q'`.
pub fn interp_ratio(geom: &InducedGeometry, h: &TensorField, q: usize, q_prime: usize) -> Result<f64> {
    if q > q_prime {
        return Err(Error::BadExponents(format!("q = {q} > q' = {q_prime}")));
    }
    if q_prime > MAX_ORDER {
        return Err(Error::OrderTooHigh {
            order: q_prime,
            max: MAX_ORDER,
        });
    }
    let a = lp_norm(geom, &nabla(geom, h, q)?, 2.0)?;
    let b = lp_norm(geom, h, 2.0)?;
    let c = lp_norm(geom, &nabla(geom, h, q_prime)?, 2.0)?;
    ratio(a * a, b * b + c * c, "interp")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum InequalityId {
    Mss,
    L4H1,
    MultEmbed,
    Hamilton,
    LinfEmbed,
    Interp,
}

impl InequalityId {
    pub const ALL: [InequalityId; 6] = [
        InequalityId::Mss,
        InequalityId::L4H1,
        InequalityId::MultEmbed,
        InequalityId::Hamilton,
        InequalityId::LinfEmbed,
        InequalityId::Interp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InequalityId::Mss => "mss",
            InequalityId::L4H1 => "l4h1",
            InequalityId::MultEmbed => "mult_embed",
            InequalityId::Hamilton => "hamilton",
            InequalityId::LinfEmbed => "linf_embed",
            InequalityId::Interp => "interp",
        }
    }

    /// The ratio with the default probe exponents: `(p, m, α) = (4, 4, ½)`,
    /// `(p, q, r) = (2, 2, 1)`, `q = 2`, `(q, q') = (1, 2)`.
    pub fn evaluate(self, geom: &InducedGeometry, h: &TensorField) -> Result<f64> {
        match self {
            InequalityId::Mss => mss_ratio(geom, h),
            InequalityId::L4H1 => l4h1_ratio(geom, h),
            InequalityId::MultEmbed => mult_embed_ratio(geom, h, 4.0, 4.0, 0.5),
            InequalityId::Hamilton => hamilton_ratio(geom, h, 2.0, 2.0, 1.0),
            InequalityId::LinfEmbed => linf_embed_ratio(geom, h, 2.0),
            InequalityId::Interp => interp_ratio(geom, h, 1, 2),
        }
    }
}

impl fmt::Display for InequalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InequalityId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        InequalityId::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown inequality '{s}'")))
    }
}

/// Statistics of one grid size.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelStats {
    pub grid_size: usize,
    pub sample_count: usize,
    pub rejected: usize,
    pub max_ratio: f64,
    /// Nearest-rank quantiles at 0.5, 0.9 and 1.0.
    pub quantiles: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioReport {
    pub inequality: InequalityId,
    pub surface: String,
    pub sample_count: usize,
    pub max_ratio: f64,
    /// Quantiles pooled over all grid sizes.
    pub quantiles: [f64; 3],
    pub grid_sizes: Vec<usize>,
    /// Largest `|max_{n'} − max_n| / max_n` over consecutive sizes.
    pub ratio_drift: f64,
    pub levels: Vec<LevelStats>,
}

fn quantiles(sorted: &[f64]) -> [f64; 3] {
    if sorted.is_empty() {
        return [f64::NAN; 3];
    }
    let rank = |q: f64| {
        let k = (q * sorted.len() as f64).ceil() as usize;
        sorted[k.clamp(1, sorted.len()) - 1]
    };
    [rank(0.5), rank(0.9), rank(1.0)]
}

/// Evaluates one inequality on `samples` random fields per surface and grid
/// size. Field `i` is the same continuous function at every size.
pub fn ensemble_scan(
    surfaces: &[SurfaceSpec],
    sampler: &FieldSampler,
    inequality: InequalityId,
    sizes: &[usize],
    samples: usize,
) -> Result<RatioReport> {
    if surfaces.is_empty() || sizes.is_empty() {
        return Err(Error::InvalidConfig("empty surface family or size list".into()));
    }
    let mut levels = Vec::with_capacity(sizes.len());
    let mut pooled = Vec::new();
    for &n in sizes {
        let mut ratios = Vec::new();
        let mut rejected = 0;
        for spec in surfaces {
            let f = spec.generate_on(ParamGrid::square(n)?)?;
            let geom = InducedGeometry::new(&f, crate::grid::GridImmersion::DEFAULT_FLOOR)?;
            let vals: Vec<Result<f64>> = (0..samples as u64)
                .into_par_iter()
                .map(|i| inequality.evaluate(&geom, &sampler.sample(f.grid(), f.dim(), i)))
                .collect();
            for v in vals {
                match v {
                    Ok(r) => ratios.push(r),
                    Err(Error::DegenerateSample(_)) => rejected += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        pooled.extend_from_slice(&ratios);
        ratios.sort_by(f64::total_cmp);
        levels.push(LevelStats {
            grid_size: n,
            sample_count: ratios.len(),
            rejected,
            max_ratio,
            quantiles: quantiles(&ratios),
        });
    }
    pooled.sort_by(f64::total_cmp);
    let ratio_drift = levels
        .windows(2)
        .map(|w| ((w[1].max_ratio - w[0].max_ratio) / w[0].max_ratio).abs())
        .fold(0.0, f64::max);
    Ok(RatioReport {
        inequality,
        surface: surfaces.iter().map(|s| s.label()).collect::<Vec<_>>().join("+"),
        sample_count: pooled.len(),
        max_ratio: pooled.last().copied().unwrap_or(f64::NAN),
        quantiles: quantiles(&pooled),
        grid_sizes: sizes.to_vec(),
        ratio_drift,
        levels,
    })
}

pub const REPORT_CSV_HEADER: &str =
    "inequality,surface,grid_size,sample_count,rejected,max_ratio,q50,q90,q100,ratio_drift";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One CSV row per grid size, 17 significant digits.
pub fn report_csv_rows(report: &RatioReport) -> Vec<String> {
    report
        .levels
        .iter()
        .map(|l| {
            format!(
                "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                report.inequality,
                csv_field(&report.surface),
                l.grid_size,
                l.sample_count,
                l.rejected,
                l.max_ratio,
                l.quantiles[0],
                l.quantiles[1],
                l.quantiles[2],
                report.ratio_drift
            )
        })
        .collect()
}
