//! Validation suite: closed forms against oracles and simulation.
//!
//! Each criterion evaluates a set of cases. A case reports a ratio of its
//! test statistic to the allowed threshold; the case passes iff the ratio is
//! at most 1. Monte Carlo thresholds are multiples of the estimator's
//! standard error, so they widen automatically when fewer trials are used.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use relaysec_core::analytic::{self, Strategy};
use relaysec_core::channel::{self, NetworkConfig, RelayLinkParams};
use relaysec_core::montecarlo::{self, run_trials, AfModel, McOptions, Scheme};
use relaysec_core::opa::{self, Gamma0Policy, OpaProblem};
use relaysec_core::quadrature::{self, Rule};
use relaysec_core::{specfun, QuadratureSpec};
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

/// Deliberate defects used to check that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Simulate with `lambda_m` and `lambda_e` exchanged.
    SwapLambdas,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    /// Trials per Monte Carlo point.
    pub trials: u64,
    /// Paired trials per configuration in the OPA check.
    pub opa_trials: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub fault: Option<Fault>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            trials: montecarlo::DEFAULT_TRIALS,
            opa_trials: 100_000,
            seed: 2024,
            threads: None,
            fault: None,
        }
    }
}

impl SuiteOptions {
    /// Use `trials` for every Monte Carlo check.
    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self.opa_trials = trials;
        self
    }

    fn mc(&self) -> McOptions {
        McOptions {
            trials: self.trials,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub criterion: u8,
    pub title: &'static str,
    pub cases: usize,
    pub failed: usize,
    /// Largest statistic/threshold ratio over the cases.
    pub worst: f64,
    pub worst_case: String,
    /// Every case with its ratio, in evaluation order.
    pub details: Vec<(String, f64)>,
    pub error: Option<String>,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.failed == 0 && self.error.is_none() && self.cases > 0
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(
            f,
            "criterion {} {status} {:<44} cases {:>3}/{:<3} worst ratio {:.3} ({})",
            self.criterion,
            self.title,
            self.cases - self.failed,
            self.cases,
            self.worst,
            self.worst_case
        )?;
        if let Some(e) = &self.error {
            write!(f, " error: {e}")?;
        }
        Ok(())
    }
}

struct Tally {
    result: CheckResult,
}

impl Tally {
    fn new(criterion: u8, title: &'static str) -> Self {
        Self {
            result: CheckResult {
                criterion,
                title,
                cases: 0,
                failed: 0,
                worst: 0.0,
                worst_case: String::new(),
                details: Vec::new(),
                error: None,
            },
        }
    }

    fn record(&mut self, label: impl Into<String>, ratio: f64) {
        let label = label.into();
        let r = &mut self.result;
        r.cases += 1;
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if ratio > 1.0 {
            r.failed += 1;
        }
        if ratio >= r.worst || r.worst_case.is_empty() {
            r.worst = ratio;
            r.worst_case = label.clone();
        }
        r.details.push((label, ratio));
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.record(label, if ok { 0.0 } else { f64::INFINITY });
    }

    fn finish(mut self, outcome: relaysec_core::Result<()>) -> CheckResult {
        if let Err(e) = outcome {
            self.result.error = Some(e.to_string());
        }
        self.result
    }
}

fn iid(n: usize, lambda_m: f64, lambda_e: f64) -> NetworkConfig {
    let p = RelayLinkParams::new(lambda_m, lambda_e, 1.0 / lambda_m).expect("valid rates");
    NetworkConfig::iid(n, p).expect("non-empty")
}

/// The shared test grid: `N x lambda_m x lambda_e` IID points plus one INID mix.
pub fn grid() -> Vec<(String, NetworkConfig)> {
    let mut out = Vec::new();
    for n in 1..=4 {
        for lm in [0.01, 0.1, 1.0] {
            for le in [0.1, 1.0] {
                out.push((format!("N={n} lm={lm} le={le}"), iid(n, lm, le)));
            }
        }
    }
    let mix = [(0.01, 0.1), (0.1, 1.0), (1.0, 0.1), (0.3, 0.5)]
        .iter()
        .map(|&(lm, le)| RelayLinkParams::new(lm, le, 1.0 / lm).expect("valid rates"))
        .collect();
    out.push((
        "INID mix".to_string(),
        NetworkConfig::new(mix).expect("non-empty"),
    ));
    out
}

/// IID points at `gamma_e = 10 dB` with `N = 1..=4` over main SNRs in dB.
fn gamma_e_10db_sweep(snrs_db: &[f64]) -> Vec<(String, NetworkConfig)> {
    let mut out = Vec::new();
    for n in 1..=4 {
        for &s in snrs_db {
            let p = RelayLinkParams::from_snr_db(s, 10.0).expect("valid rates");
            out.push((
                format!("N={n} snr={s}dB"),
                NetworkConfig::iid(n, p).expect("non-empty"),
            ));
        }
    }
    out
}

fn faulted(config: &NetworkConfig, fault: Option<Fault>) -> NetworkConfig {
    match fault {
        None => config.clone(),
        Some(Fault::SwapLambdas) => NetworkConfig::new(
            config
                .relays()
                .iter()
                .map(|p| {
                    RelayLinkParams::new(p.lambda_e, p.lambda_m, 1.0 / p.lambda_e)
                        .expect("valid rates")
                })
                .collect(),
        )
        .expect("non-empty"),
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    if got == want {
        0.0
    } else {
        (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
    }
}

/// Ratio for `|mean - value| <= 3 std_error`.
fn ci_ratio(est: &montecarlo::EstimateWithCI, value: f64) -> f64 {
    est.z_score(value) / 3.0
}

/// As [`ci_ratio`], with the standard error floored at its value under the
/// hypothesis. Small samples of a right-skewed rate underestimate both the
/// mean and the spread together, which a sample-only band turns into
/// spurious failures.
fn ci_ratio_with_null(est: &montecarlo::EstimateWithCI, value: f64, second_moment: f64) -> f64 {
    let null_se = ((second_moment - value * value).max(0.0) / est.trials.max(1) as f64).sqrt();
    let se = est.std_error.max(null_se);
    if se == 0.0 {
        return ci_ratio(est, value);
    }
    (est.mean - value).abs() / (3.0 * se)
}

/// `E[C^2] = int_0^inf 2x P(C > x) dx` for DF selection.
fn df_rate_second_moment(cfg: &NetworkConfig, quad: &QuadratureSpec) -> relaysec_core::Result<f64> {
    let tail = |x: f64| {
        if x > 700.0 {
            0.0
        } else {
            2.0 * x * analytic::selection_tail(x.exp(), cfg, Strategy::Df).unwrap_or(0.0)
        }
    };
    Ok(quadrature::integrate_to_infinity(tail, 0.0, quad)?.value)
}

/// `E[C^2]` for AF selection with one first-hop gain shared by all relays.
fn af_rate_second_moment(cfg: &NetworkConfig, quad: &QuadratureSpec) -> relaysec_core::Result<f64> {
    let inner = quad.tightened(1e-2);
    let f = |mu: f64| {
        if mu <= 0.0 || mu > 700.0 {
            return 0.0;
        }
        df_rate_second_moment(&cfg.scaled_by_first_hop(mu), &inner).unwrap_or(f64::NAN)
            * (-mu).exp()
    };
    Ok(quadrature::integrate_to_infinity(f, 0.0, quad)?.value)
}

fn moment_quad() -> QuadratureSpec {
    QuadratureSpec::new(1e-10, 1e-7, 400).expect("valid tolerances")
}

pub fn criterion_1(_opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(1, "DF closed form vs quadrature oracle");
    let quad = QuadratureSpec::default();
    let outcome = grid().into_iter().try_for_each(|(label, cfg)| {
        let closed = analytic::asr_df_closed(&cfg)?;
        let oracle = analytic::asr_quadrature_oracle(&cfg, Strategy::Df, &quad)?;
        t.record(label, rel_err(closed, oracle) / 1e-8);
        Ok(())
    });
    t.finish(outcome)
}

pub fn criterion_2(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(2, "DF closed form vs Monte Carlo");
    let outcome = grid().into_iter().try_for_each(|(label, cfg)| {
        let closed = analytic::asr_df_closed(&cfg)?;
        let m2 = df_rate_second_moment(&cfg, &moment_quad())?;
        let est = montecarlo::estimate_asr(&faulted(&cfg, opts.fault), &Scheme::df(), &opts.mc());
        t.record(label, ci_ratio_with_null(&est, closed, m2));
        Ok(())
    });
    t.finish(outcome)
}

/// Relative gap allowed between the AF closed form and the exact APS model
/// with a 16 dB first-hop advantage.
pub const EXACT_APS_GAP: f64 = 0.05;

pub fn criterion_3(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(3, "AF closed form vs Monte Carlo");
    let quad = QuadratureSpec::default();
    let outcome = (|| {
        for (label, cfg) in grid() {
            let closed = analytic::asr_af_closed(&cfg, &quad)?;
            let m2 = af_rate_second_moment(&cfg, &moment_quad())?;
            let est = montecarlo::estimate_asr(&cfg, &Scheme::Af(AfModel::approx()), &opts.mc());
            t.record(
                format!("approx {label}"),
                ci_ratio_with_null(&est, closed, m2),
            );
        }
        for (label, cfg) in gamma_e_10db_sweep(&[0.0, 10.0, 20.0]) {
            let closed = analytic::asr_af_closed(&cfg, &quad)?;
            let m2 = af_rate_second_moment(&cfg, &moment_quad())?;
            let est =
                montecarlo::estimate_asr(&cfg, &Scheme::Af(AfModel::exact_aps(16.0)), &opts.mc());
            let null_se = ((m2 - closed * closed).max(0.0) / est.trials as f64).sqrt();
            let allowed = EXACT_APS_GAP * closed + 3.0 * est.std_error.max(null_se);
            t.record(
                format!(
                    "exact-aps 16dB {label} gap {:.4}",
                    rel_err(est.mean, closed)
                ),
                (est.mean - closed).abs() / allowed,
            );
        }
        Ok(())
    })();
    t.finish(outcome)
}

pub fn criterion_4(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(4, "AF closed form bounds exact APS at 0 dB");
    let quad = QuadratureSpec::default();
    let outcome = grid().into_iter().try_for_each(|(label, cfg)| {
        let closed = analytic::asr_af_closed(&cfg, &quad)?;
        let est = montecarlo::estimate_asr(&cfg, &Scheme::Af(AfModel::exact_aps(0.0)), &opts.mc());
        let excess = est.mean - closed;
        let ratio = if excess <= 0.0 {
            0.0
        } else {
            excess / (3.0 * est.std_error)
        };
        t.record(label, ratio);
        Ok(())
    });
    t.finish(outcome)
}

pub fn criterion_5(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(5, "S-DF outperforms S-AF");
    let quad = QuadratureSpec::default();
    let af = Scheme::Af(AfModel::approx());
    let df = Scheme::df();
    let outcome = grid().into_iter().try_for_each(|(label, cfg)| {
        let closed_df = analytic::asr_df_closed(&cfg)?;
        let closed_af = analytic::asr_af_closed(&cfg, &quad)?;
        t.check(format!("closed {label}"), closed_df >= closed_af);
        // Paired on the same realizations.
        let [diff] = run_trials(opts.trials.max(1), opts.seed, opts.threads, |rng, real| {
            channel::sample_realization_into(&cfg, rng, real);
            [montecarlo::trial_rate(real, &cfg, &df) - montecarlo::trial_rate(real, &cfg, &af)]
        });
        let d = diff.estimate(opts.seed);
        // Demand a resolved gap where the sample size can resolve it; otherwise
        // the paired difference must agree with the analytic gap.
        let gap = closed_df - closed_af;
        if gap >= 6.0 * d.std_error {
            let ratio = if d.mean > 0.0 {
                3.0 * d.std_error / d.mean
            } else {
                f64::INFINITY
            };
            t.record(format!("mc {label}"), ratio);
        } else {
            // Only a significant reversal contradicts the ordering.
            let ratio = if d.mean >= 0.0 {
                0.0
            } else if d.std_error == 0.0 {
                f64::INFINITY
            } else {
                -d.mean / (3.0 * d.std_error)
            };
            t.record(format!("mc unresolved {label}"), ratio);
        }
        Ok(())
    });
    t.finish(outcome)
}

fn random_feasible(rng: &mut ChaCha8Rng, n: usize, gamma0: f64) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let s = (gamma0 / v.iter().map(|x| x.norm_sqr()).sum::<f64>()).sqrt();
    v.into_iter().map(|x| x * s).collect()
}

pub fn criterion_6(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(6, "OPA-DF outperforms S-DF");
    let outcome = (|| {
        let mc = McOptions {
            trials: opts.opa_trials,
            ..opts.mc()
        };
        for (label, cfg) in gamma_e_10db_sweep(&[10.0, 20.0])
            .into_iter()
            .filter(|(_, c)| c.len() > 1)
        {
            let cmp = opa::compare_opa_vs_selection(&cfg, &mc, Gamma0Policy::MatchRelaySnr)?;
            t.check(
                format!("{label} violations {}", cmp.violations),
                cmp.violations == 0,
            );
            let ratio = if cmp.gap.mean > 0.0 {
                3.0 * cmp.gap.std_error / cmp.gap.mean
            } else {
                f64::INFINITY
            };
            t.record(format!("{label} mean gap"), ratio);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for instance in 0..100 {
            let n = rng.random_range(2..=6);
            let lm = 10f64.powf(rng.random_range(-2.0..1.0));
            let le = 10f64.powf(rng.random_range(-2.0..1.0));
            let cfg = iid(n, lm, le);
            let gamma0 = 1.0 / lm;
            let real = channel::sample_complex_realization(&cfg, &mut rng);
            let problem = OpaProblem::from_realization(&real, gamma0)?;
            let sol = opa::solve_opa(&problem);
            let power: f64 = sol.w.iter().map(|x| x.norm_sqr()).sum();
            t.record(
                format!("instance {instance} power"),
                rel_err(power, gamma0) / 1e-10,
            );
            let best_random = (0..10_000)
                .map(|_| problem.objective(&random_feasible(&mut rng, n, gamma0)))
                .fold(f64::NEG_INFINITY, f64::max);
            let excess = (best_random / sol.objective - 1.0).max(0.0);
            t.record(format!("instance {instance} random search"), excess / 1e-12);
        }
        Ok(())
    })();
    t.finish(outcome)
}

pub fn criterion_7(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(7, "Outage probability");
    let quad = QuadratureSpec::default();
    let rate = 0.5;
    let n = opts.trials.max(1);
    let binomial_ratio = |freq: f64, p: f64| binomial_z(freq, p, n) / 3.0;
    let outcome = (|| {
        for (label, cfg) in gamma_e_10db_sweep(&[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]) {
            let p_df = analytic::outage_probability(&cfg, Strategy::Df, rate)?;
            let est = montecarlo::estimate_outage(&cfg, &Scheme::df(), rate, &opts.mc());
            t.record(format!("df {label}"), binomial_ratio(est.mean, p_df));

            let p_af = analytic::outage_af_shared_first_hop(&cfg, rate, &quad)?;
            let est =
                montecarlo::estimate_outage(&cfg, &Scheme::Af(AfModel::approx()), rate, &opts.mc());
            t.record(format!("af {label}"), binomial_ratio(est.mean, p_af));
        }
        for (label, cfg) in grid() {
            let p0 = analytic::outage_probability(&cfg, Strategy::Df, 0.0)?;
            let want: f64 = cfg
                .relays()
                .iter()
                .map(|p| p.lambda_m / (p.lambda_m + p.lambda_e))
                .product();
            t.record(format!("P_out(0) {label}"), rel_err(p0, want) / 1e-12);
        }
        let p = analytic::outage_probability(&iid(2, 0.3, 0.3), Strategy::Df, 0.0)?;
        t.record("N=2 symmetric P_out(0)", rel_err(p, 0.25) / 1e-12);
        Ok(())
    })();
    t.finish(outcome)
}

/// Two-sided exact binomial test of an observed frequency against `p`,
/// reported as the equivalent normal deviate.
fn binomial_z(freq: f64, p: f64, n: u64) -> f64 {
    let k = (freq * n as f64).round() as u64;
    let Ok(b) = Binomial::new(p.clamp(0.0, 1.0), n) else {
        return f64::INFINITY;
    };
    let lower = b.cdf(k);
    let upper = if k == 0 { 1.0 } else { b.sf(k - 1) };
    let p_value = (2.0 * lower.min(upper)).min(1.0);
    if p_value >= 1.0 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(1.0 - 0.5 * p_value)
}

fn random_config(rng: &mut ChaCha8Rng, max_relays: usize) -> NetworkConfig {
    let n = rng.random_range(1..=max_relays);
    let relays = (0..n)
        .map(|_| {
            let lm = 10f64.powf(rng.random_range(-2.0..1.0));
            let le = 10f64.powf(rng.random_range(-2.0..1.0));
            RelayLinkParams::new(lm, le, 1.0 / lm).expect("valid rates")
        })
        .collect();
    NetworkConfig::new(relays).expect("non-empty")
}

pub fn criterion_8(opts: &SuiteOptions) -> CheckResult {
    let mut t = Tally::new(8, "Structural invariants");
    let quad = QuadratureSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed);
    let outcome = (|| {
        // Partial fractions reproduce the selection tail.
        for i in 0..200 {
            let cfg = random_config(&mut rng, 6);
            let e = analytic::expand_partial_fractions(&cfg)?;
            let mut worst: f64 = 0.0;
            for k in 0..=98 {
                let z = 1.0 + 0.5 * k as f64;
                worst =
                    worst.max((e.eval(z) - analytic::selection_tail(z, &cfg, Strategy::Df)?).abs());
            }
            t.record(format!("expansion config {i}"), worst / 1e-10);
        }
        // CDFs stay in [0, 1] and never decrease.
        for i in 0..200 {
            let cfg = random_config(&mut rng, 4);
            for strategy in [Strategy::Df, Strategy::AfApprox] {
                let mut prev: f64 = 0.0;
                let mut ok = true;
                for k in 0..400 {
                    let z = 1.0 + 0.25 * k as f64;
                    let f = analytic::cdf_selection(z, &cfg, strategy)?;
                    ok &= (0.0..=1.0).contains(&f) && f >= prev - 1e-15;
                    prev = f;
                }
                t.check(format!("cdf {strategy:?} config {i}"), ok);
            }
        }
        // Secrecy rate never decreases with more relays.
        for (lm, le) in [(0.01, 0.1), (0.1, 1.0), (1.0, 1.0), (1.0, 0.1)] {
            let mut prev_df: f64 = 0.0;
            let mut prev_af: f64 = 0.0;
            for n in 1..=6 {
                let cfg = iid(n, lm, le);
                let df = analytic::asr_df_closed(&cfg)?;
                let af = analytic::asr_af_closed(&cfg, &quad)?;
                t.check(
                    format!("asr monotone N={n} lm={lm} le={le}"),
                    df >= prev_df && af >= prev_af,
                );
                prev_df = df;
                prev_af = af;
            }
        }
        // Special functions against direct quadrature.
        let tight = QuadratureSpec::new(1e-300, 1e-13, 2000)?;
        for &x in &[0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
            let e1 = specfun::exp_integral_e1(x)?;
            let oracle = (-x).exp()
                * quadrature::integrate_to_infinity(|u| (-x * u).exp() / (1.0 + u), 0.0, &tight)?
                    .value;
            t.record(format!("E1({x})"), rel_err(e1, oracle) / 1e-8);

            let k1 = specfun::bessel_k1(x)?;
            // K1(x) = int_0^inf exp(-x cosh s) cosh s ds, scaled by e^x.
            let scaled = quadrature::integrate_to_infinity(
                |s: f64| {
                    if s > 700.0 {
                        0.0
                    } else {
                        (-x * (s.cosh() - 1.0)).exp() * s.cosh()
                    }
                },
                0.0,
                &tight,
            )?
            .value;
            t.record(format!("K1({x})"), rel_err(k1, scaled * (-x).exp()) / 1e-8);

            for m in 1..=4u32 {
                for &a in &[0.1, 1.0, 10.0] {
                    let v = specfun::exp_over_pole_power(x, a, m)?;
                    let oracle = quadrature::integrate_to_infinity(
                        |u| (-x * u).exp() / (u + a).powi(m as i32),
                        0.0,
                        &tight,
                    )?
                    .value;
                    t.record(format!("I{m}({x},{a})"), rel_err(v, oracle) / 1e-8);
                }
            }
        }
        for &beta in &[0.05, 0.5, 1.0, 2.0, 8.0] {
            let gk = specfun::asr_kernel(beta, &quad)?;
            let ts = specfun::pole_power_kernel_with(Rule::TanhSinh, beta, 1.0, 1, &quad)?;
            t.record(format!("kernel({beta}) rules"), rel_err(gk, ts) / 1e-8);
        }
        // Seed determinism across worker counts.
        let cfg = iid(3, 0.1, 1.0);
        let base = McOptions::new(opts.trials.clamp(1, 100_000), opts.seed);
        let single = montecarlo::estimate_secrecy(&cfg, &Scheme::df(), 0.5, &base.with_threads(1));
        let multi = montecarlo::estimate_secrecy(&cfg, &Scheme::df(), 0.5, &base.with_threads(4));
        t.check(
            "seed determinism 1 vs 4 workers",
            single.asr.mean.to_bits() == multi.asr.mean.to_bits()
                && single.asr.std_error.to_bits() == multi.asr.std_error.to_bits()
                && single.outage.mean.to_bits() == multi.outage.mean.to_bits(),
        );
        Ok(())
    })();
    t.finish(outcome)
}

pub type Criterion = fn(&SuiteOptions) -> CheckResult;

pub const CRITERIA: [Criterion; 8] = [
    criterion_1,
    criterion_2,
    criterion_3,
    criterion_4,
    criterion_5,
    criterion_6,
    criterion_7,
    criterion_8,
];

/// Run all criteria in order.
pub fn run_suite(opts: &SuiteOptions) -> Vec<CheckResult> {
    CRITERIA.iter().map(|c| c(opts)).collect()
}
