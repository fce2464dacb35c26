//! Network parameters and Rayleigh fading draws.
//!
//! The first hop `S -> R_n` has unit-mean exponential SNR. The second hop
//! SNRs `R_n -> D` and `R_n -> E` are exponential with rates `lambda_m` and
//! `lambda_e`. Random streams are counter-based: trial `i` of a run seeded
//! with `seed` always draws from [`trial_stream`]`(seed, i)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};

/// Map an average SNR in dB to the exponential rate parameter `1 / 10^(db/10)`.
pub fn snr_db_to_rate(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayLinkParams {
    /// Rate of the exponential `R_n -> D` SNR.
    pub lambda_m: f64,
    /// Rate of the exponential `R_n -> E` SNR.
    pub lambda_e: f64,
    /// Average relay SNR `gamma_n` (linear). Only the complex-gain model uses it.
    pub gamma_avg: f64,
}

impl RelayLinkParams {
    pub fn new(lambda_m: f64, lambda_e: f64, gamma_avg: f64) -> Result<Self> {
        for (name, v) in [
            ("lambda_m", lambda_m),
            ("lambda_e", lambda_e),
            ("gamma_avg", gamma_avg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            lambda_m,
            lambda_e,
            gamma_avg,
        })
    }

    /// Second-hop parameters from average SNRs in dB. `gamma_avg` is set to
    /// the main-link average SNR.
    pub fn from_snr_db(main_db: f64, eve_db: f64) -> Result<Self> {
        Self::new(
            snr_db_to_rate(main_db),
            snr_db_to_rate(eve_db),
            db_to_linear(main_db),
        )
    }

    /// Pole offset `lambda_e / lambda_m` of the per-relay CDF.
    pub fn pole(&self) -> f64 {
        self.lambda_e / self.lambda_m
    }

    /// Same link with both rates divided by `mu` (first-hop gain `mu`).
    pub fn scaled_by_first_hop(&self, mu: f64) -> Self {
        Self {
            lambda_m: self.lambda_m / mu,
            lambda_e: self.lambda_e / mu,
            gamma_avg: self.gamma_avg,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    relays: Vec<RelayLinkParams>,
}

impl NetworkConfig {
    pub fn new(relays: Vec<RelayLinkParams>) -> Result<Self> {
        if relays.is_empty() {
            return Err(Error::InvalidParameter(
                "network needs at least one relay".into(),
            ));
        }
        for r in &relays {
            RelayLinkParams::new(r.lambda_m, r.lambda_e, r.gamma_avg)?;
        }
        Ok(Self { relays })
    }

    pub fn iid(n: usize, params: RelayLinkParams) -> Result<Self> {
        Self::new(vec![params; n])
    }

    pub fn relays(&self) -> &[RelayLinkParams] {
        &self.relays
    }

    pub fn len(&self) -> usize {
        self.relays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    /// True iff every relay has identical parameters.
    pub fn is_iid(&self) -> bool {
        self.relays.windows(2).all(|w| w[0] == w[1])
    }

    /// Every relay's rates divided by `mu`.
    pub fn scaled_by_first_hop(&self, mu: f64) -> Self {
        Self {
            relays: self
                .relays
                .iter()
                .map(|r| r.scaled_by_first_hop(mu))
                .collect(),
        }
    }
}

/// One fading draw of the per-relay instantaneous SNRs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChannelRealization {
    pub gamma_sr: Vec<f64>,
    pub gamma_rd: Vec<f64>,
    pub gamma_re: Vec<f64>,
}

impl ChannelRealization {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            gamma_sr: Vec::with_capacity(n),
            gamma_rd: Vec::with_capacity(n),
            gamma_re: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.gamma_rd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma_rd.is_empty()
    }
}

/// Second-hop complex gains, scaled so that `gamma_n |h|^2` has the link's
/// exponential law.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexRealization {
    pub h_rd: Vec<Complex64>,
    pub h_re: Vec<Complex64>,
}

/// Random stream for trial `trial` of a run seeded with `seed`.
pub fn trial_stream(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn sample_realization<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
) -> ChannelRealization {
    let mut out = ChannelRealization::with_capacity(config.len());
    sample_realization_into(config, rng, &mut out);
    out
}

/// Refill `out` in place. Draw order per relay: `S->R`, `R->D`, `R->E`.
pub fn sample_realization_into<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
    out: &mut ChannelRealization,
) {
    out.gamma_sr.clear();
    out.gamma_rd.clear();
    out.gamma_re.clear();
    for r in config.relays() {
        let sr: f64 = rng.sample(Exp1);
        let rd: f64 = rng.sample(Exp1);
        let re: f64 = rng.sample(Exp1);
        out.gamma_sr.push(sr);
        out.gamma_rd.push(rd / r.lambda_m);
        out.gamma_re.push(re / r.lambda_e);
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, mean_power: f64) -> Complex64 {
    let scale = (0.5 * mean_power).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

pub fn sample_complex_realization<R: Rng + ?Sized>(
    config: &NetworkConfig,
    rng: &mut R,
) -> ComplexRealization {
    let n = config.len();
    let mut out = ComplexRealization {
        h_rd: Vec::with_capacity(n),
        h_re: Vec::with_capacity(n),
    };
    for r in config.relays() {
        // gamma_n |h|^2 ~ Exp(lambda)  =>  E|h|^2 = 1 / (lambda gamma_n).
        out.h_rd
            .push(complex_gaussian(rng, 1.0 / (r.lambda_m * r.gamma_avg)));
        out.h_re
            .push(complex_gaussian(rng, 1.0 / (r.lambda_e * r.gamma_avg)));
    }
    out
}
