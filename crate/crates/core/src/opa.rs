//! Optimal power allocation (OPA) for DF relaying.
//!
//! Maximizes `(1 + w^H R_m w) / (1 + w^H R_e w)` subject to `||w||^2 = gamma0`
//! with `R_x = g_x g_x^H`. Components of `w` orthogonal to both `g_m` and
//! `g_e` contribute nothing to either quadratic form, so the problem is
//! solved on `span{g_m, g_e}` as a 2x2 generalized Hermitian eigenproblem.

use num_complex::Complex64;

use crate::channel::{self, ComplexRealization, NetworkConfig};
use crate::error::{Error, Result};
use crate::montecarlo::{run_trials, EstimateWithCI, McOptions, SecrecyEstimates};

#[derive(Debug, Clone, PartialEq)]
pub struct OpaProblem {
    /// Relay-to-destination gains `h_RD,n`.
    pub h_m: Vec<Complex64>,
    /// Relay-to-eavesdropper gains `h_RE,n`.
    pub h_e: Vec<Complex64>,
    /// Total transmit power.
    pub gamma0: f64,
}

impl OpaProblem {
    pub fn new(h_m: Vec<Complex64>, h_e: Vec<Complex64>, gamma0: f64) -> Result<Self> {
        if h_m.is_empty() || h_m.len() != h_e.len() {
            return Err(Error::InvalidParameter(format!(
                "gain vectors must be non-empty and equal length ({} vs {})",
                h_m.len(),
                h_e.len()
            )));
        }
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {gamma0}"
            )));
        }
        Ok(Self { h_m, h_e, gamma0 })
    }

    pub fn from_realization(real: &ComplexRealization, gamma0: f64) -> Result<Self> {
        Self::new(real.h_rd.clone(), real.h_re.clone(), gamma0)
    }

    /// `(1 + |h_m^T w|^2) / (1 + |h_e^T w|^2)`; the constraint is not checked.
    pub fn objective(&self, w: &[Complex64]) -> f64 {
        let am = dot_t(&self.h_m, w).norm_sqr();
        let ae = dot_t(&self.h_e, w).norm_sqr();
        (1.0 + am) / (1.0 + ae)
    }

    pub fn len(&self) -> usize {
        self.h_m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_m.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpaSolution {
    pub w: Vec<Complex64>,
    /// `max(ln objective, 0)`.
    pub rate: f64,
    pub objective: f64,
}

/// `sum_n h_n w_n`.
fn dot_t(h: &[Complex64], w: &[Complex64]) -> Complex64 {
    h.iter().zip(w).map(|(a, b)| a * b).sum()
}

/// `sum_n conj(a_n) b_n`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn scale(a: &[Complex64], s: Complex64) -> Vec<Complex64> {
    a.iter().map(|x| x * s).collect()
}

/// Rotate so the first non-negligible component is real and positive.
fn fix_phase(w: &mut [Complex64]) {
    let max = w.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if let Some(first) = w.iter().find(|x| x.norm() > 1e-12 * max).copied() {
        let rot = first.conj() / first.norm();
        for x in w.iter_mut() {
            *x *= rot;
        }
    }
}

/// Unit vector orthogonal to every vector in `basis` (which is orthonormal).
fn orthogonal_unit(n: usize, basis: &[Vec<Complex64>]) -> Option<Vec<Complex64>> {
    for i in 0..n {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[i] = Complex64::new(1.0, 0.0);
        for q in basis {
            let c = inner(q, &v);
            for (vk, qk) in v.iter_mut().zip(q) {
                *vk -= c * qk;
            }
        }
        let nv = norm(&v);
        if nv > 0.5 {
            return Some(scale(&v, Complex64::new(1.0 / nv, 0.0)));
        }
    }
    None
}

const RANK_TOL: f64 = 1e-12;

/// Largest eigenpair of the pencil `(I + g u u^H, I + g v v^H)` in two dimensions.
fn pencil_2x2(u: [Complex64; 2], v: [Complex64; 2], gamma0: f64) -> (f64, [Complex64; 2]) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let a = [
        [
            one + gamma0 * u[0] * u[0].conj(),
            gamma0 * u[0] * u[1].conj(),
        ],
        [
            gamma0 * u[1] * u[0].conj(),
            one + gamma0 * u[1] * u[1].conj(),
        ],
    ];
    let b = [
        [
            one + gamma0 * v[0] * v[0].conj(),
            gamma0 * v[0] * v[1].conj(),
        ],
        [
            gamma0 * v[1] * v[0].conj(),
            one + gamma0 * v[1] * v[1].conj(),
        ],
    ];
    // B = L L^H with L lower triangular.
    let l11 = b[0][0].re.sqrt();
    let l21 = b[1][0] / l11;
    let l22 = (b[1][1].re - l21.norm_sqr()).sqrt();
    // Linv = L^{-1}
    let linv = [
        [Complex64::new(1.0 / l11, 0.0), zero],
        [-l21 / (l11 * l22), Complex64::new(1.0 / l22, 0.0)],
    ];
    // M = Linv A Linv^H
    let mut tmp = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = linv[i][0] * a[0][j] + linv[i][1] * a[1][j];
        }
    }
    let mut m = [[zero; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = tmp[i][0] * linv[j][0].conj() + tmp[i][1] * linv[j][1].conj();
        }
    }
    let (m11, m22, m12) = (m[0][0].re, m[1][1].re, m[0][1]);
    let half_diff = 0.5 * (m11 - m22);
    let radius = (half_diff * half_diff + m12.norm_sqr()).sqrt();
    let lambda = 0.5 * (m11 + m22) + radius;
    let y = if m12.norm() == 0.0 {
        if m11 >= m22 {
            [one, zero]
        } else {
            [zero, one]
        }
    } else {
        let y1 = [m12, Complex64::new(lambda - m11, 0.0)];
        let y2 = [Complex64::new(lambda - m22, 0.0), m12.conj()];
        if y1[0].norm_sqr() + y1[1].norm_sqr() >= y2[0].norm_sqr() + y2[1].norm_sqr() {
            y1
        } else {
            y2
        }
    };
    // c = L^{-H} y
    let c = [
        linv[0][0].conj() * y[0] + linv[1][0].conj() * y[1],
        linv[1][1].conj() * y[1],
    ];
    (lambda, c)
}

/// Solve the OPA problem on the subspace spanned by the channel vectors.
pub fn solve_opa(p: &OpaProblem) -> OpaSolution {
    let n = p.len();
    let g0 = p.gamma0;
    let sqrt_g0 = g0.sqrt();
    // Effective vectors: |h^T w|^2 = |g^H w|^2 with g = conj(h).
    let gm: Vec<Complex64> = p.h_m.iter().map(|x| x.conj()).collect();
    let ge: Vec<Complex64> = p.h_e.iter().map(|x| x.conj()).collect();

    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(2);
    let scale_ref = norm(&gm).max(norm(&ge));
    for g in [&gm, &ge] {
        let mut r = g.clone();
        for q in &basis {
            let c = inner(q, &r);
            for (rk, qk) in r.iter_mut().zip(q) {
                *rk -= c * qk;
            }
        }
        let nr = norm(&r);
        if nr > RANK_TOL * scale_ref && nr > 0.0 {
            basis.push(scale(&r, Complex64::new(1.0 / nr, 0.0)));
        }
    }

    let finish = |mut w: Vec<Complex64>| -> OpaSolution {
        fix_phase(&mut w);
        let objective = p.objective(&w);
        OpaSolution {
            rate: if objective > 1.0 { objective.ln() } else { 0.0 },
            objective,
            w,
        }
    };
    let complement = |basis: &[Vec<Complex64>]| {
        orthogonal_unit(n, basis).map(|q| scale(&q, Complex64::new(sqrt_g0, 0.0)))
    };

    match basis.len() {
        0 => {
            let mut w = vec![Complex64::new(0.0, 0.0); n];
            w[0] = Complex64::new(sqrt_g0, 0.0);
            finish(w)
        }
        1 => {
            let w = scale(&basis[0], Complex64::new(sqrt_g0, 0.0));
            let in_span = p.objective(&w);
            if in_span < 1.0 {
                if let Some(w) = complement(&basis) {
                    return finish(w);
                }
            }
            finish(w)
        }
        _ => {
            let u = [inner(&basis[0], &gm), inner(&basis[1], &gm)];
            let v = [inner(&basis[0], &ge), inner(&basis[1], &ge)];
            let (lambda, c) = pencil_2x2(u, v, g0);
            if lambda < 1.0 {
                if let Some(w) = complement(&basis) {
                    return finish(w);
                }
            }
            let mut w: Vec<Complex64> = basis[0]
                .iter()
                .zip(&basis[1])
                .map(|(a, b)| a * c[0] + b * c[1])
                .collect();
            let nw = norm(&w);
            for x in w.iter_mut() {
                *x *= sqrt_g0 / nw;
            }
            finish(w)
        }
    }
}

/// Total power used by OPA when compared against selection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma0Policy {
    /// Mean of the relays' average SNRs `gamma_n` (equal to `gamma_n` under IID).
    #[default]
    MatchRelaySnr,
    Fixed(f64),
}

impl Gamma0Policy {
    pub fn gamma0(&self, config: &NetworkConfig) -> f64 {
        match *self {
            Gamma0Policy::MatchRelaySnr => {
                config.relays().iter().map(|r| r.gamma_avg).sum::<f64>() / config.len() as f64
            }
            Gamma0Policy::Fixed(g) => g,
        }
    }

    fn checked_gamma0(&self, config: &NetworkConfig) -> Result<f64> {
        let g = self.gamma0(config);
        if g > 0.0 && g.is_finite() {
            Ok(g)
        } else {
            Err(Error::InvalidParameter(format!(
                "gamma0 must be positive, got {g}"
            )))
        }
    }
}

/// Best single-relay allocation `w = sqrt(gamma0) e_n` on the OPA objective.
pub fn selection_rate(p: &OpaProblem) -> f64 {
    let best = p
        .h_m
        .iter()
        .zip(&p.h_e)
        .map(|(m, e)| (1.0 + p.gamma0 * m.norm_sqr()) / (1.0 + p.gamma0 * e.norm_sqr()))
        .fold(f64::NEG_INFINITY, f64::max);
    if best > 1.0 {
        best.ln()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpaComparison {
    pub opa: EstimateWithCI,
    pub selection: EstimateWithCI,
    /// Per-realization `opa_rate - selection_rate`.
    pub gap: EstimateWithCI,
    /// Realizations with `opa_rate < selection_rate` beyond rounding.
    pub violations: u64,
    pub gamma0: f64,
}

/// Paired Monte Carlo of OPA against single-relay selection at equal total power.
pub fn compare_opa_vs_selection(
    config: &NetworkConfig,
    opts: &McOptions,
    policy: Gamma0Policy,
) -> Result<OpaComparison> {
    let gamma0 = policy.checked_gamma0(config)?;
    let [opa, sel, gap, bad] = run_trials(
        opts.trials.max(1),
        opts.seed,
        opts.threads,
        |rng, _: &mut ()| {
            let real = channel::sample_complex_realization(config, rng);
            let problem = OpaProblem {
                h_m: real.h_rd,
                h_e: real.h_re,
                gamma0,
            };
            let opa = solve_opa(&problem).rate;
            let sel = selection_rate(&problem);
            let violated = opa < sel - 1e-12 * (1.0 + sel);
            [opa, sel, opa - sel, if violated { 1.0 } else { 0.0 }]
        },
    );
    Ok(OpaComparison {
        opa: opa.estimate(opts.seed),
        selection: sel.estimate(opts.seed),
        gap: gap.estimate(opts.seed),
        violations: (bad.mean * bad.count as f64).round() as u64,
        gamma0,
    })
}

/// Monte Carlo secrecy rate and outage of OPA at total power `gamma0`.
pub fn estimate_opa(
    config: &NetworkConfig,
    target_rate: f64,
    opts: &McOptions,
    policy: Gamma0Policy,
) -> Result<SecrecyEstimates> {
    let gamma0 = policy.checked_gamma0(config)?;
    let [asr, outage] = run_trials(
        opts.trials.max(1),
        opts.seed,
        opts.threads,
        |rng, _: &mut ()| {
            let real = channel::sample_complex_realization(config, rng);
            let rate = solve_opa(&OpaProblem {
                h_m: real.h_rd,
                h_e: real.h_re,
                gamma0,
            })
            .rate;
            [rate, if rate <= target_rate { 1.0 } else { 0.0 }]
        },
    );
    Ok(SecrecyEstimates {
        asr: asr.estimate(opts.seed),
        outage: outage.estimate(opts.seed),
    })
}
