//! Special functions used by the closed-form secrecy rates.
//!
//! Everything here is a pure function of its arguments. The exponential
//! integrals are evaluated with a power series for small arguments and a
//! modified-Lentz continued fraction otherwise; `K1` uses Temme's series for
//! `x <= 2` and Steed's continued fraction above.

use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_with, QuadratureSpec, Rule};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

fn check_positive(function: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(domain(function, x, "x > 0"))
    }
}

/// `e^x E_n(x)` for `x > 1` by continued fraction.
fn scaled_en_continued_fraction(n: u32, x: f64) -> f64 {
    let n = n as f64;
    let mut b = x + n;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let i = i as f64;
        let an = -i * (n - 1.0 + i);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `E_1(x)` for `0 < x <= 1` by its power series.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_ITER {
        let k = k as f64;
        term *= -x / k;
        let del = -term / k;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// Exponential integral `E_1(x) = int_x^inf e^{-t}/t dt`.
///
/// Underflows to exactly zero once `e^{-x}` does.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_positive("exp_integral_e1", x)?;
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        let decay = (-x).exp();
        if decay == 0.0 {
            return Ok(0.0);
        }
        Ok(scaled_en_continued_fraction(1, x) * decay)
    }
}

/// `F_e(x) = e^x E_1(x)`, evaluated without forming `e^x` for large `x`.
pub fn scaled_e1(x: f64) -> Result<f64> {
    check_positive("scaled_e1", x)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(scaled_en_continued_fraction(1, x))
    }
}

/// `I_m = int_0^inf e^{-beta u} / (u + a)^m du`.
///
/// Uses `I_1 = F_e(beta a)` and the upward recurrence
/// `I_{m+1} = (a^{-m} - beta I_m) / m` while `beta a <= 1`, where it is
/// stable. For larger `beta a` the recurrence cancels catastrophically, so
/// the equivalent form `a^{1-m} e^{beta a} E_m(beta a)` is taken from the
/// continued fraction instead.
pub fn exp_over_pole_power(beta: f64, a: f64, m: u32) -> Result<f64> {
    if !(beta > 0.0) || beta.is_nan() {
        return Err(domain("exp_over_pole_power", beta, "beta > 0"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(domain("exp_over_pole_power", a, "a > 0"));
    }
    if m == 0 {
        return Err(domain("exp_over_pole_power", 0.0, "m >= 1"));
    }
    let x = beta * a;
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x > 1.0 {
        return Ok(scaled_en_continued_fraction(m, x) * a.powi(1 - m as i32));
    }
    let mut value = scaled_e1(x)?;
    for k in 1..m {
        value = (a.powi(-(k as i32)) - beta * value) / k as f64;
    }
    Ok(value)
}

/// Temme's series for `(K_0(x), K_1(x))`, valid for `0 < x <= 2`.
fn bessel_k01_temme(x: f64) -> (f64, f64) {
    let half_x = 0.5 * x;
    let d = -half_x.ln();
    let mut ff = -EULER_GAMMA + d;
    let mut sum = ff;
    let mut p = 0.5;
    let mut q = 0.5;
    let mut c = 1.0;
    let dd = half_x * half_x;
    let mut sum1 = p;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi);
        c *= dd / fi;
        p /= fi;
        q /= fi;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / x)
}

/// Steed's continued fraction for `K_1(x)`, valid for `x > 2`, scaled by `e^x`.
fn bessel_k1_scaled_steed(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    h *= a1;
    let k0_scaled = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    k0_scaled * (x + 0.5 - h) / x
}

/// Modified Bessel function of the second kind, order one.
pub fn bessel_k1(x: f64) -> Result<f64> {
    check_positive("bessel_k1", x)?;
    if x <= 2.0 {
        Ok(bessel_k01_temme(x).1)
    } else {
        let decay = (-x).exp();
        if decay == 0.0 {
            return Ok(0.0);
        }
        Ok(bessel_k1_scaled_steed(x) * decay)
    }
}

/// `x K_1(x)`, extended continuously to 1 at `x = 0`.
pub fn x_bessel_k1(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(1.0);
    }
    Ok(x * bessel_k1(x)?)
}

/// `K_m(beta, a) = int_0^inf I_m(beta / mu, a) e^{-mu} dmu`, the first-hop
/// average of [`exp_over_pole_power`].
///
/// For `m = 1` this is `int_0^inf F_e(beta a / mu) e^{-mu} dmu`. The
/// integrand vanishes linearly at `mu -> 0` and has its knee near
/// `mu = beta a`, so the range is split there and at `mu = 1`.
pub fn pole_power_kernel(beta: f64, a: f64, m: u32, quad: &QuadratureSpec) -> Result<f64> {
    pole_power_kernel_with(Rule::GaussKronrod, beta, a, m, quad)
}

pub fn pole_power_kernel_with(
    rule: Rule,
    beta: f64,
    a: f64,
    m: u32,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(domain("pole_power_kernel", beta, "0 < beta < inf"));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(domain("pole_power_kernel", a, "a > 0"));
    }
    if m == 0 {
        return Err(domain("pole_power_kernel", 0.0, "m >= 1"));
    }
    let knee = beta * a;
    let mut points = vec![0.0];
    for p in [knee.min(1.0), knee.max(1.0)] {
        if p > *points.last().unwrap() && p.is_finite() {
            points.push(p);
        }
    }
    points.push(f64::INFINITY);

    let integrand = |mu: f64| -> f64 {
        if mu <= 0.0 {
            return 0.0;
        }
        let weight = (-mu).exp();
        if weight == 0.0 {
            return 0.0;
        }
        match exp_over_pole_power(beta / mu, a, m) {
            Ok(v) => v * weight,
            Err(_) => f64::NAN,
        }
    };
    let r = integrate_with(rule, integrand, &points, quad)?;
    if r.value.is_nan() {
        return Err(Error::Quadrature {
            subdivisions: r.subdivisions,
            estimate: r.value,
            error: r.error,
        });
    }
    Ok(r.value)
}

/// `K(beta) = int_0^inf F_e(beta / mu) e^{-mu} dmu`.
///
/// Equal (up to a `beta`-independent constant that cancels in the
/// secrecy-rate difference) to `4 xi S_{-2,1}(xi)` with `xi = 2 sqrt(beta)`;
/// the kernel is computed from its integral definition.
pub fn asr_kernel(beta: f64, quad: &QuadratureSpec) -> Result<f64> {
    pole_power_kernel(beta, 1.0, 1, quad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_to_infinity;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Quadrature oracles; independent of the series and continued fractions.
    fn e1_oracle(x: f64) -> f64 {
        let spec = QuadratureSpec::new(1e-300, 1e-13, 2000).unwrap();
        // Substitute t = x + s to keep the decay scale fixed.
        let r = integrate_to_infinity(|s| (-s).exp() / (x + s), 0.0, &spec).unwrap();
        r.value * (-x).exp()
    }

    fn k1_oracle(x: f64) -> f64 {
        let spec = QuadratureSpec::new(1e-300, 1e-13, 2000).unwrap();
        // Factor out e^{-x}: integrand e^{-x (cosh t - 1)} cosh t.
        let r = integrate_with(
            Rule::GaussKronrod,
            |t: f64| {
                let log_cosh = t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2;
                (-x * (t.cosh() - 1.0) + log_cosh).exp()
            },
            &[0.0, 1.0, f64::INFINITY],
            &spec,
        )
        .unwrap();
        r.value * (-x).exp()
    }

    fn pole_power_oracle(beta: f64, a: f64, m: u32) -> f64 {
        let spec = QuadratureSpec::new(1e-300, 1e-13, 2000).unwrap();
        integrate_to_infinity(|u| (-beta * u).exp() / (u + a).powi(m as i32), 0.0, &spec)
            .unwrap()
            .value
    }

    #[test]
    fn e1_frozen_values() {
        assert!(rel(exp_integral_e1(1.0).unwrap(), 0.219_383_934_395_520_27) < 1e-13);
        assert!(rel(exp_integral_e1(10.0).unwrap(), 4.156_968_929_685_324e-6) < 1e-12);
    }

    #[test]
    fn e1_matches_quadrature_on_log_grid() {
        for i in 0..=40 {
            let x = 10f64.powf(-6.0 + 8.0 * i as f64 / 40.0);
            let got = exp_integral_e1(x).unwrap();
            let want = e1_oracle(x);
            assert!(rel(got, want) < 1e-11, "x={x}: {got} vs {want}");
        }
        for x in [200.0, 500.0, 700.0] {
            assert!(rel(exp_integral_e1(x).unwrap(), e1_oracle(x)) < 1e-11);
        }
    }

    #[test]
    fn e1_small_argument_tracks_log() {
        let x: f64 = 1e-8;
        let leading = -EULER_GAMMA - x.ln();
        assert!((exp_integral_e1(x).unwrap() - leading).abs() < 2e-8);
    }

    #[test]
    fn e1_underflow_is_exact_zero() {
        assert_eq!(exp_integral_e1(800.0).unwrap(), 0.0);
        assert!(scaled_e1(800.0).unwrap() > 0.0);
    }

    #[test]
    fn domain_errors() {
        for x in [0.0, -1.0, f64::NAN] {
            assert!(exp_integral_e1(x).is_err());
            assert!(scaled_e1(x).is_err());
            assert!(bessel_k1(x).is_err());
        }
        assert!(exp_over_pole_power(0.0, 1.0, 1).is_err());
        assert!(exp_over_pole_power(1.0, -1.0, 1).is_err());
        assert!(exp_over_pole_power(1.0, 1.0, 0).is_err());
        assert!(asr_kernel(0.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn scaled_e1_frozen_and_consistent() {
        assert!(rel(scaled_e1(1.0).unwrap(), 0.596_347_362_323_194_1) < 1e-13);
        assert!(rel(scaled_e1(0.01).unwrap(), 4.078_511_443_456_425) < 1e-12);
        for i in 0..=40 {
            let x = 10f64.powf(-6.0 + 8.0 * i as f64 / 40.0);
            let direct = x.exp() * exp_integral_e1(x).unwrap();
            let scaled = scaled_e1(x).unwrap();
            assert!((scaled - direct).abs() <= 1e-10 * scaled, "x={x}");
        }
    }

    #[test]
    fn scaled_e1_asymptote() {
        let x: f64 = 1e4;
        let approx = 1.0 / x - 1.0 / (x * x) + 2.0 / x.powi(3);
        assert!(rel(scaled_e1(x).unwrap(), approx) < 1e-11);
    }

    #[test]
    fn k1_frozen_values() {
        assert!(rel(bessel_k1(1.0).unwrap(), 0.601_907_230_197_234_6) < 1e-13);
        assert!(rel(bessel_k1(2.0).unwrap(), 0.139_865_881_816_522_4) < 1e-13);
        assert!(rel(bessel_k1(5.0).unwrap(), 4.044_613_445_452_164e-3) < 1e-12);
    }

    #[test]
    fn k1_matches_integral_representation() {
        for i in 0..=50 {
            let x = 10f64.powf(-8.0 + (8.0 + 700f64.log10()) * i as f64 / 50.0);
            let got = bessel_k1(x).unwrap();
            let want = k1_oracle(x);
            assert!(rel(got, want) < 1e-10, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn x_k1_small_argument_limit() {
        assert!((x_bessel_k1(1e-8).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(x_bessel_k1(0.0).unwrap(), 1.0);
    }

    #[test]
    fn pole_power_examples() {
        let i1 = exp_over_pole_power(1.0, 1.0, 1).unwrap();
        assert!(rel(i1, 0.596_347_362_323_194_1) < 1e-13);
        let i2 = exp_over_pole_power(1.0, 1.0, 2).unwrap();
        assert!(rel(i2, 1.0 - i1) < 1e-13);
        assert!(rel(i2, 0.403_652_637_676_805_9) < 1e-12);
        assert!(exp_over_pole_power(1e6, 1.0, 3).unwrap() < 1e-6);
    }

    #[test]
    fn pole_power_matches_quadrature() {
        for m in 1..=6 {
            for beta in [0.1, 1.0, 10.0] {
                for a in [0.5, 1.0, 2.0] {
                    let got = exp_over_pole_power(beta, a, m).unwrap();
                    let want = pole_power_oracle(beta, a, m);
                    assert!(
                        rel(got, want) < 1e-8,
                        "m={m} beta={beta} a={a}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn continued_fraction_agrees_with_recurrence_near_switch() {
        // At beta a = 1 both routes are stable; compare them directly.
        for m in 1..=6u32 {
            let cf = scaled_en_continued_fraction(m, 1.0);
            let mut rec = scaled_e1(1.0).unwrap();
            for k in 1..m {
                rec = (1.0 - rec) / k as f64;
            }
            assert!(rel(cf, rec) < 1e-12, "m={m}");
        }
    }

    #[test]
    fn kernel_two_rules_agree() {
        let spec = QuadratureSpec::default();
        for beta in [1e-3, 0.1, 1.0, 2.0, 10.0, 300.0] {
            let gk = pole_power_kernel_with(Rule::GaussKronrod, beta, 1.0, 1, &spec).unwrap();
            let ts = pole_power_kernel_with(Rule::TanhSinh, beta, 1.0, 1, &spec).unwrap();
            assert!(rel(gk, ts) < 1e-8, "beta={beta}: {gk} vs {ts}");
        }
        for m in 2..=4 {
            let gk = pole_power_kernel_with(Rule::GaussKronrod, 0.5, 2.0, m, &spec).unwrap();
            let ts = pole_power_kernel_with(Rule::TanhSinh, 0.5, 2.0, m, &spec).unwrap();
            assert!(rel(gk, ts) < 1e-8, "m={m}");
        }
    }

    #[test]
    fn kernel_is_decreasing_and_vanishes() {
        let spec = QuadratureSpec::default();
        let mut prev = f64::INFINITY;
        for beta in [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 5.0, 20.0, 1e3, 1e5] {
            let k = asr_kernel(beta, &spec).unwrap();
            assert!(k < prev, "beta={beta}");
            prev = k;
        }
        assert!(prev < 1e-4);
    }
}
