//! Adaptive numerical integration over finite and semi-infinite ranges.
//!
//! Two independent rules are provided so that one can be used to cross-check
//! the other:
//!
//! - [`Rule::GaussKronrod`]: globally adaptive 7/15-point Gauss-Kronrod
//!   bisection. The interval with the largest error estimate is split until
//!   the summed error meets the tolerance.
//! - [`Rule::TanhSinh`]: double-exponential quadrature with level doubling
//!   on each piece, no subdivision. Robust against endpoint singularities.
//!
//! Semi-infinite pieces `[a, inf)` are mapped onto `[0, 1)` with
//! `x = a + t / (1 - t)` before either rule is applied.

use crate::error::{Error, Result};

/// Tolerances and subdivision budget for the adaptive integrators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// For Gauss-Kronrod: total number of bisections allowed. For tanh-sinh:
    /// the budget is shared with the level count (capped at [`MAX_TANH_SINH_LEVELS`]).
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 200,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(abs_tol > 0.0 && abs_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "abs_tol must be positive, got {abs_tol}"
            )));
        }
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must be positive, got {rel_tol}"
            )));
        }
        if max_subdivisions == 0 {
            return Err(Error::InvalidParameter(
                "max_subdivisions must be at least 1".into(),
            ));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        })
    }

    /// Same budget, tolerances scaled by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            max_subdivisions: self.max_subdivisions,
        }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rule {
    #[default]
    GaussKronrod,
    TanhSinh,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

pub const MAX_TANH_SINH_LEVELS: usize = 12;

/// Integrate `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    integrate_with(Rule::GaussKronrod, f, &[a, b], spec)
}

/// Integrate `f` over `[a, inf)`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<Integral> {
    integrate_with(Rule::GaussKronrod, f, &[a, f64::INFINITY], spec)
}

/// Integrate `f` over consecutive pieces delimited by `points`. The last
/// point may be `f64::INFINITY`. Points must be non-decreasing; empty pieces
/// are skipped.
pub fn integrate_with<F: Fn(f64) -> f64>(
    rule: Rule,
    f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter(
            "integration needs at least two breakpoints".into(),
        ));
    }
    let mut segments = Vec::with_capacity(points.len() - 1);
    for pair in points.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if lo.is_nan() || hi.is_nan() || lo > hi || lo.is_infinite() {
            return Err(Error::InvalidParameter(format!(
                "invalid integration piece [{lo}, {hi}]"
            )));
        }
        if lo == hi {
            continue;
        }
        segments.push(if hi.is_infinite() {
            Segment::SemiInfinite(lo)
        } else {
            Segment::Finite(lo, hi)
        });
    }
    if segments.is_empty() {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    match rule {
        Rule::GaussKronrod => gauss_kronrod(&f, &segments, spec),
        Rule::TanhSinh => tanh_sinh(&f, &segments, spec),
    }
}

#[derive(Debug, Clone, Copy)]
enum Segment {
    Finite(f64, f64),
    SemiInfinite(f64),
}

impl Segment {
    /// Parameter range the rule sees.
    fn range(&self) -> (f64, f64) {
        match *self {
            Segment::Finite(a, b) => (a, b),
            Segment::SemiInfinite(_) => (0.0, 1.0),
        }
    }

    /// Integrand in the parameter variable, including the Jacobian.
    fn eval<F: Fn(f64) -> f64>(&self, f: &F, t: f64) -> f64 {
        match *self {
            Segment::Finite(_, _) => f(t),
            Segment::SemiInfinite(a) => {
                let one_minus = 1.0 - t;
                let x = a + t / one_minus;
                if !x.is_finite() {
                    return 0.0;
                }
                let fx = f(x);
                if fx == 0.0 {
                    0.0
                } else {
                    fx / (one_minus * one_minus)
                }
            }
        }
    }

    /// Evaluate at a point given by its distance from the left (`from_left`)
    /// or right endpoint, which keeps tanh-sinh nodes off the endpoints.
    fn eval_offset<F: Fn(f64) -> f64>(&self, f: &F, offset: f64, from_left: bool) -> f64 {
        match *self {
            Segment::Finite(a, b) => {
                let x = if from_left { a + offset } else { b - offset };
                f(x)
            }
            Segment::SemiInfinite(a) => {
                if from_left {
                    self.eval(f, offset)
                } else {
                    // t = 1 - offset, so x = a + (1 - offset) / offset.
                    let x = a + (1.0 - offset) / offset;
                    if !x.is_finite() {
                        return 0.0;
                    }
                    let fx = f(x);
                    if fx == 0.0 {
                        0.0
                    } else {
                        fx / (offset * offset)
                    }
                }
            }
        }
    }
}

// 7-point Gauss / 15-point Kronrod abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Piece {
    segment: usize,
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, seg: &Segment, lo: f64, hi: f64) -> (f64, f64) {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = seg.eval(f, center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let sum = seg.eval(f, center - dx) + seg.eval(f, center + dx);
        kronrod += WGK[j] * sum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * sum;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: &F,
    segments: &[Segment],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    let mut pieces: Vec<Piece> = segments
        .iter()
        .enumerate()
        .map(|(i, seg)| {
            let (lo, hi) = seg.range();
            let (value, error) = kronrod15(f, seg, lo, hi);
            Piece {
                segment: i,
                lo,
                hi,
                value,
                error,
            }
        })
        .collect();

    let mut subdivisions = 0;
    loop {
        let value: f64 = pieces.iter().map(|p| p.value).sum();
        let error: f64 = pieces.iter().map(|p| p.error).sum();
        if !value.is_finite() || !error.is_finite() {
            return Err(Error::Quadrature {
                subdivisions,
                estimate: value,
                error,
            });
        }
        if error <= spec.target(value) {
            return Ok(Integral {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions,
                estimate: value,
                error,
            });
        }
        let worst = pieces
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one piece");
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // Interval exhausted at machine resolution.
            return Err(Error::Quadrature {
                subdivisions,
                estimate: value,
                error,
            });
        }
        let seg = &segments[p.segment];
        for (lo, hi) in [(p.lo, mid), (mid, p.hi)] {
            let (value, error) = kronrod15(f, seg, lo, hi);
            pieces.push(Piece {
                segment: p.segment,
                lo,
                hi,
                value,
                error,
            });
        }
        subdivisions += 1;
    }
}

const TANH_SINH_T_MAX: f64 = 3.5;

/// Sum of one tanh-sinh level on `[lo, hi]` with step `h`, only the nodes
/// with odd index when `odd_only` is set.
fn tanh_sinh_sum<F: Fn(f64) -> f64>(f: &F, seg: &Segment, h: f64, odd_only: bool) -> f64 {
    use std::f64::consts::FRAC_PI_2;
    let (lo, hi) = seg.range();
    let half = 0.5 * (hi - lo);
    let mut sum = 0.0;
    let kmax = (TANH_SINH_T_MAX / h).ceil() as i64;
    let step = if odd_only { 2 } else { 1 };
    let start = if odd_only { 1 } else { 0 };
    let mut k = start;
    while k <= kmax {
        let t = k as f64 * h;
        let u = FRAC_PI_2 * t.sinh();
        let cosh_u = u.cosh();
        let weight = FRAC_PI_2 * t.cosh() / (cosh_u * cosh_u);
        // Distance from the nearer endpoint: half * (1 - tanh u).
        let offset = half * 2.0 / ((2.0 * u).exp() + 1.0);
        if k == 0 {
            sum += weight * seg.eval(f, lo + half);
        } else if offset > 0.0 {
            let right = seg.eval_offset(f, offset, false);
            let left = seg.eval_offset(f, offset, true);
            sum += weight * (left + right);
        }
        k += step;
    }
    sum * half
}

fn tanh_sinh<F: Fn(f64) -> f64>(
    f: &F,
    segments: &[Segment],
    spec: &QuadratureSpec,
) -> Result<Integral> {
    let max_levels = spec.max_subdivisions.min(MAX_TANH_SINH_LEVELS);
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut levels_used = 0;
    for seg in segments {
        let mut h = 1.0;
        let mut estimate = h * tanh_sinh_sum(f, seg, h, false);
        let mut converged = false;
        let mut err = f64::INFINITY;
        for level in 1..=max_levels {
            h *= 0.5;
            let refined = 0.5 * estimate + h * tanh_sinh_sum(f, seg, h, true);
            err = (refined - estimate).abs();
            estimate = refined;
            levels_used = levels_used.max(level);
            if !estimate.is_finite() {
                break;
            }
            // Level doubling roughly squares the error, so demand convergence
            // of two consecutive levels before trusting the difference.
            if level >= 3 && err <= spec.target(estimate) / segments.len() as f64 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Quadrature {
                subdivisions: levels_used,
                estimate,
                error: err,
            });
        }
        total += estimate;
        total_err += err;
    }
    Ok(Integral {
        value: total,
        error: total_err,
        subdivisions: levels_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both_rules() -> [Rule; 2] {
        [Rule::GaussKronrod, Rule::TanhSinh]
    }

    #[test]
    fn polynomials_are_exact() {
        let spec = QuadratureSpec::default();
        // x^20 on [0, 1] = 1/21; a single Kronrod panel already resolves it.
        for rule in both_rules() {
            let r = integrate_with(rule, |x| x.powi(20), &[0.0, 1.0], &spec).unwrap();
            assert!(
                (r.value - 1.0 / 21.0).abs() < 1e-14,
                "{rule:?}: {}",
                r.value
            );
        }
    }

    #[test]
    fn semi_infinite_exponential() {
        let spec = QuadratureSpec::default();
        for rule in both_rules() {
            let r = integrate_with(rule, |x| (-x).exp(), &[0.0, f64::INFINITY], &spec).unwrap();
            assert!((r.value - 1.0).abs() < 1e-11, "{rule:?}: {}", r.value);
            let r = integrate_with(
                rule,
                |x| (-2.0 * x).exp() * x,
                &[1.0, 3.0, f64::INFINITY],
                &spec,
            )
            .unwrap();
            // int_1^inf x e^{-2x} dx = 3/4 e^{-2}
            let exact = 0.75 * (-2.0f64).exp();
            assert!((r.value - exact).abs() < 1e-12, "{rule:?}: {}", r.value);
        }
    }

    #[test]
    fn endpoint_log_singularity() {
        let spec = QuadratureSpec::default();
        // int_0^1 ln x dx = -1
        for rule in both_rules() {
            let r = integrate_with(rule, |x| x.ln(), &[0.0, 1.0], &spec).unwrap();
            assert!((r.value + 1.0).abs() < 1e-10, "{rule:?}: {}", r.value);
        }
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let spec = QuadratureSpec::new(1e-15, 1e-15, 1).unwrap();
        let r = integrate(|x| (50.0 * x).sin().abs(), 0.0, 10.0, &spec);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(QuadratureSpec::new(0.0, 1e-10, 10).is_err());
        assert!(QuadratureSpec::new(1e-12, -1.0, 10).is_err());
        assert!(QuadratureSpec::new(1e-12, 1e-10, 0).is_err());
    }

    #[test]
    fn empty_range_is_zero() {
        let r = integrate(|x| x, 2.0, 2.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(r.value, 0.0);
    }
}
