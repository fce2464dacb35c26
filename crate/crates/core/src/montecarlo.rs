//! Monte Carlo estimation of secrecy rate and outage under relay selection.
//!
//! Trial `i` draws from [`channel::trial_stream`]`(seed, i)`. Trials are
//! grouped into fixed-size blocks; each block is accumulated sequentially
//! and the block moments are merged in block order, so results are
//! bit-identical for any number of worker threads.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{self, db_to_linear, ChannelRealization, NetworkConfig};

/// Trials per accumulation block. Fixed so that the reduction order does not
/// depend on the thread count.
pub const BLOCK_TRIALS: u64 = 1 << 14;

pub const DEFAULT_TRIALS: u64 = 1_000_000;

/// The relay chosen in one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOutcome {
    pub relay_index: usize,
    pub z_value: f64,
    /// `max(ln z_value, 0)`.
    pub rate: f64,
}

impl SelectionOutcome {
    fn from_best(relay_index: usize, z_value: f64) -> Self {
        Self {
            relay_index,
            z_value,
            rate: if z_value > 1.0 { z_value.ln() } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(trials)`.
    pub std_error: f64,
    pub trials: u64,
    pub seed: u64,
}

impl EstimateWithCI {
    /// Number of standard errors separating the estimate from `value`.
    /// Infinite when the standard error is zero and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = (self.mean - value).abs();
        if diff == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            diff / self.std_error
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AfVariant {
    /// `gamma_X = mu gamma_RX`, the high-first-hop-SNR approximation.
    #[default]
    ApproxProduct,
    /// Fixed-gain relay under average power scaling:
    /// `gamma_X = g1 gamma_RX / (gamma_RX + 1 + E[g1])` with `g1 = gbar_sr mu`.
    ExactAps,
}

/// How first-hop gains are drawn across relays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstHop {
    /// One first-hop gain `mu` for all relays in a trial (relay 0's draw).
    /// This is the model the closed-form AF secrecy rate describes.
    #[default]
    Shared,
    /// Independent first hop per relay; the model behind the product of
    /// per-relay approximate CDFs.
    PerRelay,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AfModel {
    pub variant: AfVariant,
    /// First-hop average SNR above the stronger second-hop link, in dB.
    /// Only [`AfVariant::ExactAps`] depends on it.
    pub first_hop_boost_db: f64,
    pub first_hop: FirstHop,
}

impl AfModel {
    pub fn approx() -> Self {
        Self::default()
    }

    pub fn exact_aps(first_hop_boost_db: f64) -> Self {
        Self {
            variant: AfVariant::ExactAps,
            first_hop_boost_db,
            first_hop: FirstHop::Shared,
        }
    }

    pub fn with_first_hop(mut self, first_hop: FirstHop) -> Self {
        self.first_hop = first_hop;
        self
    }
}

/// Relaying strategy together with its simulation model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Decode-and-forward. A relay takes part iff its first-hop SNR exceeds
    /// `decode_threshold`; the default 0 admits every relay.
    Df {
        decode_threshold: f64,
    },
    Af(AfModel),
}

impl Scheme {
    pub fn df() -> Self {
        Scheme::Df {
            decode_threshold: 0.0,
        }
    }
}

/// Argmax of `Z` over candidates, lowest index on ties. `None` if empty.
fn best_of(zs: impl Iterator<Item = (usize, f64)>) -> Option<SelectionOutcome> {
    let mut best: Option<(usize, f64)> = None;
    for (i, z) in zs {
        match best {
            Some((_, bz)) if z <= bz => {}
            _ => best = Some((i, z)),
        }
    }
    best.map(|(i, z)| SelectionOutcome::from_best(i, z))
}

/// DF selection over all relays: `Z_n = (1 + gamma_RD,n) / (1 + gamma_RE,n)`.
pub fn select_df(real: &ChannelRealization) -> SelectionOutcome {
    best_of(
        real.gamma_rd
            .iter()
            .zip(&real.gamma_re)
            .map(|(rd, re)| (1.0 + rd) / (1.0 + re))
            .enumerate(),
    )
    .expect("realization has at least one relay")
}

/// DF selection restricted to relays whose first hop exceeds `threshold`.
pub fn select_df_decoding(real: &ChannelRealization, threshold: f64) -> Option<SelectionOutcome> {
    best_of(
        real.gamma_rd
            .iter()
            .zip(&real.gamma_re)
            .zip(&real.gamma_sr)
            .enumerate()
            .filter(|(_, (_, sr))| **sr > threshold)
            .map(|(i, ((rd, re), _))| (i, (1.0 + rd) / (1.0 + re))),
    )
}

/// Average first-hop SNR of relay `n` under `model`.
fn first_hop_mean(config: &NetworkConfig, n: usize, model: &AfModel) -> f64 {
    let r = &config.relays()[n];
    let second_hop = (1.0 / r.lambda_m).max(1.0 / r.lambda_e);
    db_to_linear(model.first_hop_boost_db) * second_hop
}

/// AF selection. `gamma_sr` holds unit-mean first-hop draws.
pub fn select_af(
    real: &ChannelRealization,
    config: &NetworkConfig,
    model: &AfModel,
) -> SelectionOutcome {
    let z = |n: usize| -> f64 {
        let mu = match model.first_hop {
            FirstHop::Shared => real.gamma_sr[0],
            FirstHop::PerRelay => real.gamma_sr[n],
        };
        let (rd, re) = (real.gamma_rd[n], real.gamma_re[n]);
        let (gm, ge) = match model.variant {
            AfVariant::ApproxProduct => (mu * rd, mu * re),
            AfVariant::ExactAps => {
                let mean = first_hop_mean(config, n, model);
                let g1 = mean * mu;
                let c = 1.0 + mean;
                (g1 * rd / (rd + c), g1 * re / (re + c))
            }
        };
        (1.0 + gm) / (1.0 + ge)
    };
    best_of((0..real.len()).map(|n| (n, z(n)))).expect("realization has at least one relay")
}

/// Secrecy rate of one trial under `scheme`.
pub fn trial_rate(real: &ChannelRealization, config: &NetworkConfig, scheme: &Scheme) -> f64 {
    match scheme {
        Scheme::Df { decode_threshold } => {
            if *decode_threshold <= 0.0 {
                select_df(real).rate
            } else {
                select_df_decoding(real, *decode_threshold).map_or(0.0, |o| o.rate)
            }
        }
        Scheme::Af(model) => select_af(real, config, model).rate,
    }
}

/// Running count, mean and centered second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = self.count + other.count;
        let delta = other.mean - self.mean;
        let w = other.count as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.count as f64 * w;
        self.count = n;
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self, seed: u64) -> EstimateWithCI {
        EstimateWithCI {
            mean: self.mean,
            std_error: (self.variance() / self.count.max(1) as f64).sqrt(),
            trials: self.count,
            seed,
        }
    }
}

/// Run `trials` independent trials and accumulate `K` statistics per trial.
///
/// `per_trial` receives the trial's own random stream and a scratch value
/// reused within a block. With `threads = None` the global rayon pool is used.
pub fn run_trials<const K: usize, S, F>(
    trials: u64,
    seed: u64,
    threads: Option<usize>,
    per_trial: F,
) -> [Moments; K]
where
    S: Default,
    F: Fn(&mut ChaCha8Rng, &mut S) -> [f64; K] + Sync,
{
    let blocks = trials.div_ceil(BLOCK_TRIALS);
    let run_block = |b: u64| -> [Moments; K] {
        let mut acc = [Moments::default(); K];
        let mut scratch = S::default();
        let start = b * BLOCK_TRIALS;
        let end = (start + BLOCK_TRIALS).min(trials);
        for t in start..end {
            let mut rng = channel::trial_stream(seed, t);
            let values = per_trial(&mut rng, &mut scratch);
            for (m, v) in acc.iter_mut().zip(values) {
                m.push(v);
            }
        }
        acc
    };
    let collect = || -> Vec<[Moments; K]> { (0..blocks).into_par_iter().map(run_block).collect() };
    let per_block = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(collect),
        None => collect(),
    };
    let mut total = [Moments::default(); K];
    for block in &per_block {
        for (t, m) in total.iter_mut().zip(block) {
            t.merge(m);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McOptions {
    pub trials: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl McOptions {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            threads: None,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Secrecy rate and outage indicator from the same trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyEstimates {
    pub asr: EstimateWithCI,
    pub outage: EstimateWithCI,
}

pub fn estimate_secrecy(
    config: &NetworkConfig,
    scheme: &Scheme,
    target_rate: f64,
    opts: &McOptions,
) -> SecrecyEstimates {
    let [asr, outage] = run_trials(
        opts.trials.max(1),
        opts.seed,
        opts.threads,
        |rng, real: &mut ChannelRealization| {
            channel::sample_realization_into(config, rng, real);
            let rate = trial_rate(real, config, scheme);
            [rate, if rate <= target_rate { 1.0 } else { 0.0 }]
        },
    );
    SecrecyEstimates {
        asr: asr.estimate(opts.seed),
        outage: outage.estimate(opts.seed),
    }
}

/// Mean secrecy rate over `opts.trials` trials.
pub fn estimate_asr(config: &NetworkConfig, scheme: &Scheme, opts: &McOptions) -> EstimateWithCI {
    estimate_secrecy(config, scheme, 0.0, opts).asr
}

/// Frequency of `{rate <= target_rate}`.
pub fn estimate_outage(
    config: &NetworkConfig,
    scheme: &Scheme,
    target_rate: f64,
    opts: &McOptions,
) -> EstimateWithCI {
    estimate_secrecy(config, scheme, target_rate, opts).outage
}
