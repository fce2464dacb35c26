//! Closed-form secrecy metrics for opportunistic relay selection.
//!
//! With `Z_n = (1 + gamma_m,n) / (1 + gamma_e,n)` and selection
//! `Z_max = max_n Z_n`, the average secrecy rate is
//! `int_0^inf [1 - F_max(e^x)] dx` and the outage probability at target
//! rate `R` is `F_max(e^R)`.
//!
//! For DF, `1 - F_n(z) = a_n e^{-lambda_m,n (z - 1)} / (z + a_n)` with
//! `a_n = lambda_e,n / lambda_m,n`. Expanding `1 - prod_n (1 - g_n)` over
//! relay subsets and splitting each rational factor into partial fractions
//! gives an [`Expansion`] whose terms integrate in closed form through
//! `F_e(x) = e^x E_1(x)`.
//!
//! For AF the second-hop SNRs are scaled by the first-hop gain `mu`, so the
//! same expansion applies with `beta -> beta / mu`; averaging over a single
//! `mu ~ Exp(1)` shared by all relays replaces every `F_e` by the kernel of
//! [`specfun::asr_kernel`].

use std::collections::BTreeMap;

use crate::channel::{NetworkConfig, RelayLinkParams};
use crate::error::{domain, Error, Result};
use crate::quadrature::{integrate_with, QuadratureSpec, Rule};
use crate::specfun;

/// Largest relay count accepted by the subset expansion (`N 2^(N-1)` terms).
pub const MAX_CLOSED_FORM_RELAYS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Decode-and-forward selection.
    Df,
    /// Amplify-and-forward selection under the product-SNR approximation.
    AfApprox,
}

/// Instantaneous secrecy rate: `ln z` above 1, zero otherwise.
pub fn secrecy_rate(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain("secrecy_rate", z, "z > 0"));
    }
    Ok(if z > 1.0 { z.ln() } else { 0.0 })
}

/// `1 - F_n(z)` for DF and `z >= 1`, without cancellation.
fn df_tail(z: f64, p: &RelayLinkParams) -> f64 {
    let decay = (-p.lambda_m * (z - 1.0)).exp();
    if decay == 0.0 {
        return 0.0;
    }
    p.lambda_e * decay / (p.lambda_m * (z - 1.0) + p.lambda_m + p.lambda_e)
}

/// CDF of the DF equivalent SNR `Z_n`.
///
/// Below `z = 1` the lower branch `e^{-lambda_e (1 - z) / z} lambda_m z / (lambda_m z + lambda_e)`
/// applies; both branches equal `lambda_m / (lambda_m + lambda_e)` at `z = 1`.
pub fn cdf_z_df(z: f64, p: &RelayLinkParams) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain("cdf_z_df", z, "z > 0"));
    }
    if z >= 1.0 {
        Ok(1.0 - df_tail(z, p))
    } else {
        let lm_z = p.lambda_m * z;
        Ok((-p.lambda_e * (1.0 - z) / z).exp() * lm_z / (lm_z + p.lambda_e))
    }
}

/// `1 - F_n(z)` for the AF approximation, `z >= 1`.
fn af_tail(z: f64, p: &RelayLinkParams) -> Result<f64> {
    let arg = 2.0 * (p.lambda_m * (z - 1.0)).sqrt();
    let xk1 = specfun::x_bessel_k1(arg)?;
    Ok(p.lambda_e / (p.lambda_m * z + p.lambda_e) * xk1)
}

/// Approximate CDF of `Z_n` for AF relaying with product SNRs, `z >= 1`.
pub fn cdf_z_af_approx(z: f64, p: &RelayLinkParams) -> Result<f64> {
    if !(z >= 1.0) {
        return Err(domain("cdf_z_af_approx", z, "z >= 1"));
    }
    Ok(1.0 - af_tail(z, p)?)
}

fn per_relay_cdf(z: f64, p: &RelayLinkParams, strategy: Strategy) -> Result<f64> {
    match strategy {
        Strategy::Df => cdf_z_df(z, p),
        Strategy::AfApprox => cdf_z_af_approx(z, p),
    }
}

/// `F_max(z) = prod_n F_n(z)`.
pub fn cdf_selection(z: f64, config: &NetworkConfig, strategy: Strategy) -> Result<f64> {
    config
        .relays()
        .iter()
        .try_fold(1.0, |acc, p| Ok(acc * per_relay_cdf(z, p, strategy)?))
}

/// `1 - F_max(z)` for `z >= 1`, computed as `-expm1(sum ln(1 - tail_n))` so
/// that it keeps full relative precision when every tail is tiny.
pub fn selection_tail(z: f64, config: &NetworkConfig, strategy: Strategy) -> Result<f64> {
    if !(z >= 1.0) {
        return Err(domain("selection_tail", z, "z >= 1"));
    }
    let mut log_cdf = 0.0;
    for p in config.relays() {
        let tail = match strategy {
            Strategy::Df => df_tail(z, p),
            Strategy::AfApprox => af_tail(z, p)?,
        };
        log_cdf += (-tail).ln_1p();
    }
    Ok(-log_cdf.exp_m1())
}

/// Secrecy outage probability `F_max(e^R)`.
///
/// For [`Strategy::AfApprox`] this is the product of the per-relay
/// approximate CDFs, i.e. independent first hops.
pub fn outage_probability(
    config: &NetworkConfig,
    strategy: Strategy,
    target_rate: f64,
) -> Result<f64> {
    if !(target_rate >= 0.0) {
        return Err(domain("outage_probability", target_rate, "R >= 0"));
    }
    cdf_selection(target_rate.exp(), config, strategy)
}

/// One term `sigma e^{-beta (z - 1)} / (z + alpha)^mult` of `1 - F_max(z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialFractionTerm {
    pub sigma: f64,
    pub beta: f64,
    pub alpha: f64,
    pub mult: u32,
}

impl PartialFractionTerm {
    pub fn eval(&self, z: f64) -> f64 {
        self.sigma * (-self.beta * (z - 1.0)).exp() / (z + self.alpha).powi(self.mult as i32)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expansion {
    pub terms: Vec<PartialFractionTerm>,
}

impl Expansion {
    /// Reconstructed `1 - F_max(z)`.
    pub fn eval(&self, z: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(z)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionOptions {
    /// Poles within this relative distance are treated as one repeated pole.
    pub merge_tol: f64,
    /// Distinct poles closer than this (relative) are rejected as ill-conditioned.
    pub cluster_tol: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        Self {
            merge_tol: 1e-9,
            cluster_tol: 1e-6,
        }
    }
}

/// Assign each relay a canonical pole, merging near-coincident ones.
fn canonical_poles(config: &NetworkConfig, opts: &ExpansionOptions) -> Result<Vec<f64>> {
    let poles: Vec<f64> = config.relays().iter().map(RelayLinkParams::pole).collect();
    let mut order: Vec<usize> = (0..poles.len()).collect();
    order.sort_by(|&i, &j| poles[i].total_cmp(&poles[j]));

    // Group sorted poles into clusters.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) => {
                let anchor = poles[c[0]];
                if (poles[i] - anchor).abs() < opts.merge_tol * poles[i].max(anchor) {
                    c.push(i);
                } else {
                    clusters.push(vec![i]);
                }
            }
            None => clusters.push(vec![i]),
        }
    }

    let mut canonical = vec![0.0; poles.len()];
    let mut reps = Vec::with_capacity(clusters.len());
    for c in &clusters {
        let mean = c.iter().map(|&i| poles[i]).sum::<f64>() / c.len() as f64;
        for &i in c {
            canonical[i] = mean;
        }
        reps.push(mean);
    }
    for w in reps.windows(2) {
        let gap = (w[1] - w[0]).abs();
        if gap < opts.cluster_tol * w[0].max(w[1]) {
            return Err(Error::PoleClustering {
                first: w[0],
                second: w[1],
                tolerance: opts.cluster_tol,
            });
        }
    }
    Ok(canonical)
}

/// Partial fractions of `1 / prod_j (z + p_j)^{m_j}`: returns, for each
/// pole, the coefficients of `1/(z + p_j)^k` for `k = 1..=m_j`.
fn partial_fractions(poles: &[(f64, u32)]) -> Vec<Vec<f64>> {
    poles
        .iter()
        .enumerate()
        .map(|(j, &(pj, mj))| {
            let order = mj as usize;
            // Taylor series in t = z + p_j of prod_{i != j} (d_i + t)^{-m_i}.
            let mut series = vec![0.0; order];
            series[0] = 1.0;
            for (i, &(pi, mi)) in poles.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = pi - pj;
                // (d + t)^{-m} = d^{-m} sum_r C(m + r - 1, r) (-t / d)^r
                let mut factor = vec![0.0; order];
                let mut coef = d.powi(-(mi as i32));
                for (r, f) in factor.iter_mut().enumerate() {
                    *f = coef;
                    let r = r as f64;
                    coef *= -(mi as f64 + r) / ((r + 1.0) * d);
                }
                let mut product = vec![0.0; order];
                for (a, &sa) in series.iter().enumerate() {
                    for (b, &fb) in factor.iter().enumerate().take(order - a) {
                        product[a + b] += sa * fb;
                    }
                }
                series = product;
            }
            // Coefficient of (z + p_j)^{-k} is series[m_j - k].
            (1..=order).map(|k| series[order - k]).collect()
        })
        .collect()
}

pub fn expand_partial_fractions(config: &NetworkConfig) -> Result<Expansion> {
    expand_partial_fractions_with(config, &ExpansionOptions::default())
}

/// Expand `1 - F_max(z)` for DF selection into [`PartialFractionTerm`]s.
///
/// Terms sharing `(beta, alpha, mult)` are aggregated, which collapses the
/// IID case to `O(N^2)` terms.
pub fn expand_partial_fractions_with(
    config: &NetworkConfig,
    opts: &ExpansionOptions,
) -> Result<Expansion> {
    let n = config.len();
    if n > MAX_CLOSED_FORM_RELAYS {
        return Err(Error::TooManyRelays {
            max: MAX_CLOSED_FORM_RELAYS,
            got: n,
        });
    }
    let poles = canonical_poles(config, opts)?;
    let relays = config.relays();

    let mut acc: BTreeMap<(u64, u64, u32), f64> = BTreeMap::new();
    let mut subset_poles: Vec<(f64, u32)> = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        let mut beta = 0.0;
        let mut scale = 1.0;
        subset_poles.clear();
        for (i, r) in relays.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            beta += r.lambda_m;
            scale *= poles[i];
            match subset_poles.iter_mut().find(|(p, _)| *p == poles[i]) {
                Some((_, m)) => *m += 1,
                None => subset_poles.push((poles[i], 1)),
            }
        }
        if mask.count_ones() % 2 == 0 {
            scale = -scale;
        }
        let coeffs = partial_fractions(&subset_poles);
        for (&(pole, _), cs) in subset_poles.iter().zip(&coeffs) {
            for (k, &c) in cs.iter().enumerate() {
                let key = (beta.to_bits(), pole.to_bits(), k as u32 + 1);
                *acc.entry(key).or_insert(0.0) += scale * c;
            }
        }
    }

    let terms = acc
        .into_iter()
        .filter(|(_, sigma)| *sigma != 0.0)
        .map(|((beta, alpha, mult), sigma)| PartialFractionTerm {
            sigma,
            beta: f64::from_bits(beta),
            alpha: f64::from_bits(alpha),
            mult,
        })
        .collect();
    Ok(Expansion { terms })
}

/// Splits `1 / ((u + 1)(u + 1 + alpha)^k)` into
/// `alpha^{-k} / (u + 1) - sum_{j=1..k} alpha^{-(k+1-j)} / (u + 1 + alpha)^j`
/// and integrates each piece against `e^{-beta u}` with `pole_integral`.
fn split_pole_integral<F>(term: &PartialFractionTerm, mut pole_integral: F) -> Result<f64>
where
    F: FnMut(f64, u32) -> Result<f64>,
{
    let alpha = term.alpha;
    let k = term.mult as i32;
    let mut value = alpha.powi(-k) * pole_integral(1.0, 1)?;
    for j in 1..=term.mult {
        value -= alpha.powi(-(k + 1 - j as i32)) * pole_integral(1.0 + alpha, j)?;
    }
    Ok(value)
}

/// Closed-form DF average secrecy rate.
///
/// Distinct-pole terms contribute `(sigma / alpha) [F_e(beta) - F_e(beta (1 + alpha))]`;
/// repeated poles use the generalized split and [`specfun::exp_over_pole_power`].
pub fn asr_df_closed(config: &NetworkConfig) -> Result<f64> {
    let expansion = expand_partial_fractions(config)?;
    asr_df_from_expansion(&expansion)
}

pub fn asr_df_from_expansion(expansion: &Expansion) -> Result<f64> {
    let mut total = 0.0;
    for term in &expansion.terms {
        let value = if term.mult == 1 {
            (specfun::scaled_e1(term.beta)? - specfun::scaled_e1(term.beta * (1.0 + term.alpha))?)
                / term.alpha
        } else {
            split_pole_integral(term, |a, m| specfun::exp_over_pole_power(term.beta, a, m))?
        };
        total += term.sigma * value;
    }
    Ok(total.max(0.0))
}

/// Closed-form AF average secrecy rate for a first-hop gain shared by all
/// relays: `sum_i (sigma_i / alpha_i) [K(beta_i) - K(beta_i (1 + alpha_i))]`
/// for distinct poles, with [`specfun::pole_power_kernel`] for repeated ones.
pub fn asr_af_closed(config: &NetworkConfig, quad: &QuadratureSpec) -> Result<f64> {
    let expansion = expand_partial_fractions(config)?;
    let mut cache: BTreeMap<(u64, u64, u32), f64> = BTreeMap::new();
    let mut kernel = |beta: f64, a: f64, m: u32| -> Result<f64> {
        // K_1(beta, a) = K(beta a); normalize so identical arguments share a cache slot.
        let (beta, a) = if m == 1 { (beta * a, 1.0) } else { (beta, a) };
        let key = (beta.to_bits(), a.to_bits(), m);
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let v = specfun::pole_power_kernel(beta, a, m, quad)?;
        cache.insert(key, v);
        Ok(v)
    };
    let mut total = 0.0;
    for term in &expansion.terms {
        let value = if term.mult == 1 {
            (kernel(term.beta, 1.0, 1)? - kernel(term.beta, 1.0 + term.alpha, 1)?) / term.alpha
        } else {
            split_pole_integral(term, |a, m| kernel(term.beta, a, m))?
        };
        total += term.sigma * value;
    }
    Ok(total.max(0.0))
}

/// Breakpoints in `x = ln z` where the selection tail changes character.
fn tail_breakpoints(config: &NetworkConfig, rate_scale: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    for r in config.relays() {
        let lm = r.lambda_m / rate_scale;
        for c in [r.pole(), 1.0 / lm, 10.0 / lm, 40.0 / lm] {
            let x = c.ln_1p();
            if x.is_finite() && x > 0.0 {
                pts.push(x);
            }
        }
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    pts.push(f64::INFINITY);
    pts
}

fn integrate_tail<F: Fn(f64) -> f64>(
    rule: Rule,
    tail: F,
    points: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    let r = integrate_with(
        rule,
        |x| {
            let z = x.exp();
            if z.is_infinite() {
                0.0
            } else {
                tail(z)
            }
        },
        points,
        quad,
    )?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            subdivisions: r.subdivisions,
            estimate: r.value,
            error: r.error,
        });
    }
    Ok(r.value)
}

fn df_asr_quadrature(config: &NetworkConfig, rule: Rule, quad: &QuadratureSpec) -> Result<f64> {
    let points = tail_breakpoints(config, 1.0);
    integrate_tail(
        rule,
        |z| selection_tail(z, config, Strategy::Df).unwrap_or(f64::NAN),
        &points,
        quad,
    )
}

/// Average secrecy rate by direct quadrature of `int_0^inf [1 - F_max(e^x)] dx`.
///
/// For [`Strategy::AfApprox`] the DF integral with rates `lambda / mu` is
/// additionally averaged over one first-hop gain `mu ~ Exp(1)` shared by all
/// relays, the model behind [`asr_af_closed`]. This path never touches the
/// partial-fraction expansion and serves as its oracle.
pub fn asr_quadrature_oracle(
    config: &NetworkConfig,
    strategy: Strategy,
    quad: &QuadratureSpec,
) -> Result<f64> {
    asr_quadrature_oracle_with(Rule::GaussKronrod, config, strategy, quad)
}

pub fn asr_quadrature_oracle_with(
    rule: Rule,
    config: &NetworkConfig,
    strategy: Strategy,
    quad: &QuadratureSpec,
) -> Result<f64> {
    match strategy {
        Strategy::Df => df_asr_quadrature(config, rule, quad),
        Strategy::AfApprox => {
            let inner = quad.tightened(1e-2);
            average_over_shared_first_hop(config, rule, quad, |scaled| {
                df_asr_quadrature(scaled, rule, &inner)
            })
        }
    }
}

/// `int_0^inf e^{-mu} f(config / mu) dmu`.
fn average_over_shared_first_hop<F>(
    config: &NetworkConfig,
    rule: Rule,
    quad: &QuadratureSpec,
    f: F,
) -> Result<f64>
where
    F: Fn(&NetworkConfig) -> Result<f64>,
{
    let mut points = vec![0.0];
    let mut marks: Vec<f64> = config
        .relays()
        .iter()
        .flat_map(|r| [r.lambda_m, r.lambda_e])
        .chain([1.0])
        .filter(|v| *v > 0.0 && *v < 50.0)
        .collect();
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    points.extend(marks);
    points.push(f64::INFINITY);

    let failure = std::cell::Cell::new(None);
    let r = integrate_with(
        rule,
        |mu| {
            let weight = (-mu).exp();
            if mu <= 0.0 || weight == 0.0 {
                return 0.0;
            }
            match f(&config.scaled_by_first_hop(mu)) {
                Ok(v) => v * weight,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            }
        },
        &points,
        quad,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let r = r?;
    Ok(r.value)
}

/// AF average secrecy rate when every relay has its own independent first
/// hop: quadrature of `1 - prod_n F_n(e^x)` with the per-relay approximate
/// CDFs. Coincides with [`asr_af_closed`] for a single relay.
pub fn asr_af_independent_first_hops(config: &NetworkConfig, quad: &QuadratureSpec) -> Result<f64> {
    let points = tail_breakpoints(config, 1.0);
    integrate_tail(
        Rule::GaussKronrod,
        |z| selection_tail(z, config, Strategy::AfApprox).unwrap_or(f64::NAN),
        &points,
        quad,
    )
}

/// AF outage probability with one first-hop gain shared by all relays:
/// `E_mu[prod_n F_n^DF(e^R; lambda / mu)]`.
pub fn outage_af_shared_first_hop(
    config: &NetworkConfig,
    target_rate: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    if !(target_rate >= 0.0) {
        return Err(domain("outage_af_shared_first_hop", target_rate, "R >= 0"));
    }
    let z = target_rate.exp();
    average_over_shared_first_hop(config, Rule::GaussKronrod, quad, |scaled| {
        cdf_selection(z, scaled, Strategy::Df)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(lambda_m: f64, lambda_e: f64) -> RelayLinkParams {
        RelayLinkParams::new(lambda_m, lambda_e, 1.0).unwrap()
    }

    fn iid(n: usize, lambda_m: f64, lambda_e: f64) -> NetworkConfig {
        NetworkConfig::iid(n, link(lambda_m, lambda_e)).unwrap()
    }

    #[test]
    fn secrecy_rate_cases() {
        assert_eq!(secrecy_rate(1.0).unwrap(), 0.0);
        assert!((secrecy_rate(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(secrecy_rate(0.5).unwrap(), 0.0);
        assert!(secrecy_rate(0.0).is_err());
        assert!(secrecy_rate(-2.0).is_err());
    }

    #[test]
    fn df_cdf_examples() {
        let p = link(1.0, 1.0);
        assert!((cdf_z_df(1.0, &p).unwrap() - 0.5).abs() < 1e-15);
        let want = 1.0 - (-1.0f64).exp() / 3.0;
        assert!((cdf_z_df(2.0, &p).unwrap() - want).abs() < 1e-15);
        assert!((cdf_z_df(2.0, &p).unwrap() - 0.877_374).abs() < 1e-6);
        assert!((cdf_z_df(1e4, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(cdf_z_df(0.0, &p).is_err());
    }

    #[test]
    fn df_cdf_continuous_at_one() {
        for (lm, le) in [(1.0, 1.0), (0.1, 2.0), (3.0, 0.01)] {
            let p = link(lm, le);
            let at_one = lm / (lm + le);
            let below = cdf_z_df(1.0 - 1e-12, &p).unwrap();
            let above = cdf_z_df(1.0, &p).unwrap();
            assert!((below - at_one).abs() < 1e-10);
            assert!((above - at_one).abs() < 1e-15);
        }
    }

    #[test]
    fn af_cdf_examples() {
        let p = link(1.0, 1.0);
        assert!((cdf_z_af_approx(1.0, &p).unwrap() - 0.5).abs() < 1e-15);
        assert!((cdf_z_af_approx(1.0 + 1e-14, &p).unwrap() - 0.5).abs() < 1e-6);
        let k1_2 = 0.139_865_881_816_522_4;
        // 2 lambda_e sqrt(lambda_m (z-1)) / (lambda_m z + lambda_e) = 2/3 at z = 2.
        let want_direct = 1.0 - (2.0 / 3.0) * k1_2;
        let got = cdf_z_af_approx(2.0, &p).unwrap();
        assert!((got - want_direct).abs() < 1e-14, "{got} vs {want_direct}");
        assert!((got - 0.906_756).abs() < 1e-6);
        assert!((cdf_z_af_approx(1e6, &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(cdf_z_af_approx(0.99, &p).is_err());
    }

    #[test]
    fn selection_cdf_examples() {
        let p = link(1.0, 1.0);
        let one = iid(1, 1.0, 1.0);
        for z in [1.0, 1.5, 3.0] {
            assert_eq!(
                cdf_selection(z, &one, Strategy::Df).unwrap(),
                cdf_z_df(z, &p).unwrap()
            );
        }
        assert!(
            (cdf_selection(1.0, &iid(2, 1.0, 1.0), Strategy::Df).unwrap() - 0.25).abs() < 1e-15
        );
        for z in [0.3, 1.0, 2.0, 10.0] {
            let f2 = cdf_selection(z, &iid(2, 0.5, 1.0), Strategy::Df).unwrap();
            let f3 = cdf_selection(z, &iid(3, 0.5, 1.0), Strategy::Df).unwrap();
            assert!(f3 <= f2);
        }
    }

    #[test]
    fn outage_examples() {
        let cfg = iid(2, 1.0, 1.0);
        assert!((outage_probability(&cfg, Strategy::Df, 0.0).unwrap() - 0.25).abs() < 1e-15);
        let p1 = outage_probability(&cfg, Strategy::Df, 0.2).unwrap();
        let p2 = outage_probability(&cfg, Strategy::Df, 0.5).unwrap();
        assert!(p1 <= p2);
        assert!(outage_probability(&cfg, Strategy::Df, -0.1).is_err());
        let inid =
            NetworkConfig::new(vec![link(0.3, 1.0), link(2.0, 0.5), link(1.0, 0.1)]).unwrap();
        let want: f64 = inid
            .relays()
            .iter()
            .map(|r| r.lambda_m / (r.lambda_m + r.lambda_e))
            .product();
        assert!((outage_probability(&inid, Strategy::Df, 0.0).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn single_relay_expansion() {
        let e = expand_partial_fractions(&iid(1, 1.0, 1.0)).unwrap();
        assert_eq!(
            e.terms,
            vec![PartialFractionTerm {
                sigma: 1.0,
                beta: 1.0,
                alpha: 1.0,
                mult: 1
            }]
        );
    }

    #[test]
    fn iid_pair_has_double_pole() {
        let e = expand_partial_fractions(&iid(2, 1.0, 1.0)).unwrap();
        assert!(e.terms.iter().any(|t| t.mult == 2));
        for i in 0..=100 {
            let z = 1.0 + 0.49 * i as f64;
            let want =
                2.0 * (-(z - 1.0)).exp() / (z + 1.0) - (-2.0 * (z - 1.0)).exp() / (z + 1.0).powi(2);
            assert!((e.eval(z) - want).abs() < 1e-14, "z={z}");
            let f = cdf_selection(z, &iid(2, 1.0, 1.0), Strategy::Df).unwrap();
            assert!((e.eval(z) - (1.0 - f)).abs() < 1e-14);
        }
    }

    #[test]
    fn expansion_rejects_clustered_poles() {
        let cfg = NetworkConfig::new(vec![link(1.0, 1.0), link(1.0, 1.0 + 1e-8)]).unwrap();
        assert!(matches!(
            expand_partial_fractions(&cfg),
            Err(Error::PoleClustering { .. })
        ));
        // Below the merge tolerance the poles collapse into a double pole.
        let cfg = NetworkConfig::new(vec![link(1.0, 1.0), link(1.0, 1.0 + 1e-12)]).unwrap();
        let e = expand_partial_fractions(&cfg).unwrap();
        assert!(e.terms.iter().any(|t| t.mult == 2));
    }

    #[test]
    fn too_many_relays() {
        assert!(matches!(
            expand_partial_fractions(&iid(21, 1.0, 1.0)),
            Err(Error::TooManyRelays { .. })
        ));
    }

    #[test]
    fn mixed_multiplicity_partial_fractions() {
        // 1/((z+1)^2 (z+3)) = 1/4/(z+1) ... check by evaluation.
        let pf = partial_fractions(&[(1.0, 2), (3.0, 1)]);
        for z in [0.0, 1.0, 2.5, 10.0] {
            let direct = 1.0 / ((z + 1.0f64).powi(2) * (z + 3.0));
            let sum = pf[0][0] / (z + 1.0) + pf[0][1] / (z + 1.0f64).powi(2) + pf[1][0] / (z + 3.0);
            assert!((direct - sum).abs() < 1e-15);
        }
    }

    #[test]
    fn df_closed_single_relay() {
        let asr = asr_df_closed(&iid(1, 1.0, 1.0)).unwrap();
        let want = 0.596_347_362_323_194_6 - 0.361_328_616_888_222_65;
        assert!((asr - want).abs() < 1e-14, "{asr}");
        assert!((asr - 0.235_019).abs() < 1e-6);
    }

    #[test]
    fn df_closed_matches_oracle() {
        let quad = QuadratureSpec::default();
        for n in 1..=4 {
            for (lm, le) in [(0.01, 0.1), (0.1, 1.0), (1.0, 0.1), (1.0, 1.0)] {
                let cfg = iid(n, lm, le);
                let closed = asr_df_closed(&cfg).unwrap();
                let oracle = asr_quadrature_oracle(&cfg, Strategy::Df, &quad).unwrap();
                assert!(
                    ((closed - oracle) / oracle).abs() < 1e-8,
                    "n={n} lm={lm} le={le}: {closed} vs {oracle}"
                );
            }
        }
        let inid =
            NetworkConfig::new(vec![link(0.2, 1.0), link(1.0, 0.3), link(0.05, 0.1)]).unwrap();
        let closed = asr_df_closed(&inid).unwrap();
        let oracle = asr_quadrature_oracle(&inid, Strategy::Df, &quad).unwrap();
        assert!(((closed - oracle) / oracle).abs() < 1e-8);
    }

    #[test]
    fn df_oracle_rules_agree() {
        let quad = QuadratureSpec::default();
        let cfg = iid(3, 0.1, 1.0);
        let gk = asr_quadrature_oracle_with(Rule::GaussKronrod, &cfg, Strategy::Df, &quad).unwrap();
        let ts = asr_quadrature_oracle_with(Rule::TanhSinh, &cfg, Strategy::Df, &quad).unwrap();
        assert!(((gk - ts) / gk).abs() < 1e-8);
    }

    #[test]
    fn af_closed_single_relay() {
        let quad = QuadratureSpec::default();
        let cfg = iid(1, 1.0, 1.0);
        let closed = asr_af_closed(&cfg, &quad).unwrap();
        // K(1) - K(2), each equal to 4 xi S_{-2,1}(xi) with xi = 2 sqrt(beta).
        let want = 0.512_358_377_698_223 - 0.318_076_139_638_355;
        assert!((closed - want).abs() < 1e-10, "{closed}");
        let oracle = asr_quadrature_oracle(&cfg, Strategy::AfApprox, &quad).unwrap();
        assert!(((closed - oracle) / oracle).abs() < 1e-6);
        let independent = asr_af_independent_first_hops(&cfg, &quad).unwrap();
        assert!(((closed - independent) / closed).abs() < 1e-8);
    }

    #[test]
    fn af_closed_repeated_poles_match_oracle() {
        let quad = QuadratureSpec::default();
        for n in [2, 3] {
            let cfg = iid(n, 0.5, 1.0);
            let closed = asr_af_closed(&cfg, &quad).unwrap();
            let oracle = asr_quadrature_oracle(&cfg, Strategy::AfApprox, &quad).unwrap();
            assert!(
                ((closed - oracle) / oracle).abs() < 1e-6,
                "n={n}: {closed} vs {oracle}"
            );
        }
    }

    #[test]
    fn af_shared_outage_reduces_to_product_for_one_relay() {
        let quad = QuadratureSpec::default();
        let cfg = iid(1, 0.3, 1.0);
        for r in [0.0, 0.5, 2.0] {
            let shared = outage_af_shared_first_hop(&cfg, r, &quad).unwrap();
            let product = outage_probability(&cfg, Strategy::AfApprox, r).unwrap();
            assert!(
                (shared - product).abs() < 1e-9,
                "R={r}: {shared} vs {product}"
            );
        }
    }

    #[test]
    fn af_below_df() {
        let quad = QuadratureSpec::default();
        for n in 1..=3 {
            for (lm, le) in [(0.01, 0.1), (0.1, 1.0), (1.0, 1.0)] {
                let cfg = iid(n, lm, le);
                assert!(asr_af_closed(&cfg, &quad).unwrap() <= asr_df_closed(&cfg).unwrap());
            }
        }
    }
}
