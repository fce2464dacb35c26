//! Sweep execution and CSV output.

use std::io::Write;

use relaysec_core::analytic::{self, Strategy};
use relaysec_core::montecarlo::{
    self, EstimateWithCI, FirstHop, McOptions, Scheme, SecrecyEstimates,
};
use relaysec_core::opa;
use relaysec_core::QuadratureSpec;

use crate::config::{ConfigError, ExperimentSpec, StrategyKind};

pub const CSV_HEADER: [&str; 8] = [
    "snr_db",
    "strategy",
    "metric",
    "analytic",
    "mc_mean",
    "mc_stderr",
    "trials",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Asr,
    Outage,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Asr => "asr",
            Metric::Outage => "outage",
        }
    }
}

/// Which columns to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    AnalyticOnly,
    SimulateOnly,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultRow {
    pub snr_db: f64,
    pub strategy: StrategyKind,
    pub metric: Metric,
    /// `None` for strategies without a closed form or in simulate-only mode.
    pub analytic: Option<f64>,
    pub mc: Option<EstimateWithCI>,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{strategy} at snr_db = {snr_db}: {source}")]
    Point {
        strategy: &'static str,
        snr_db: f64,
        source: relaysec_core::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, ExperimentError> {
    run_experiment_with(spec, Mode::Both, None)
}

/// Run every sweep point in order. `threads` limits the Monte Carlo pool.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    mode: Mode,
    threads: Option<usize>,
) -> Result<Vec<ResultRow>, ExperimentError> {
    spec.validate()?;
    let offsets = spec.relay_offsets()?;
    let quad = QuadratureSpec::default();
    let mut rows = Vec::new();
    for snr_db in spec.sweep.points() {
        let point_err = |source| ExperimentError::Point {
            strategy: spec.strategy.as_str(),
            snr_db,
            source,
        };
        let config = spec.network_at(&offsets, snr_db).map_err(point_err)?;

        let (asr, outage) = if mode == Mode::SimulateOnly {
            (None, None)
        } else {
            analytic_values(spec, &config, &quad).map_err(point_err)?
        };
        let mc = if mode == Mode::AnalyticOnly {
            None
        } else {
            let mut opts = McOptions::new(spec.trials, spec.seed);
            opts.threads = threads;
            Some(simulate(spec, &config, &opts).map_err(point_err)?)
        };

        let norm = if spec.normalize_awgn {
            ExperimentSpec::awgn_capacity(snr_db)
        } else {
            1.0
        };
        if spec.outputs.asr() {
            rows.push(ResultRow {
                snr_db,
                strategy: spec.strategy,
                metric: Metric::Asr,
                analytic: asr.map(|a| a / norm),
                mc: mc.map(|m| EstimateWithCI {
                    mean: m.asr.mean / norm,
                    std_error: m.asr.std_error / norm,
                    ..m.asr
                }),
                seed: spec.seed,
            });
        }
        if spec.outputs.outage() {
            rows.push(ResultRow {
                snr_db,
                strategy: spec.strategy,
                metric: Metric::Outage,
                analytic: outage,
                mc: mc.map(|m| m.outage),
                seed: spec.seed,
            });
        }
    }
    Ok(rows)
}

type Pair = (Option<f64>, Option<f64>);

fn analytic_values(
    spec: &ExperimentSpec,
    config: &relaysec_core::channel::NetworkConfig,
    quad: &QuadratureSpec,
) -> relaysec_core::Result<Pair> {
    let r = spec.target_rate;
    let want_asr = spec.outputs.asr();
    let want_out = spec.outputs.outage();
    let opt = |want: bool,
               f: &dyn Fn() -> relaysec_core::Result<f64>|
     -> relaysec_core::Result<Option<f64>> {
        if want {
            f().map(Some)
        } else {
            Ok(None)
        }
    };
    match spec.strategy {
        StrategyKind::Sdf => Ok((
            opt(want_asr, &|| analytic::asr_df_closed(config))?,
            opt(want_out, &|| {
                analytic::outage_probability(config, Strategy::Df, r)
            })?,
        )),
        StrategyKind::Saf => match spec.af_model.first_hop {
            FirstHop::Shared => Ok((
                opt(want_asr, &|| analytic::asr_af_closed(config, quad))?,
                opt(want_out, &|| {
                    analytic::outage_af_shared_first_hop(config, r, quad)
                })?,
            )),
            FirstHop::PerRelay => Ok((
                opt(want_asr, &|| {
                    analytic::asr_af_independent_first_hops(config, quad)
                })?,
                opt(want_out, &|| {
                    analytic::outage_probability(config, Strategy::AfApprox, r)
                })?,
            )),
        },
        StrategyKind::OpaDf => Ok((None, None)),
    }
}

fn simulate(
    spec: &ExperimentSpec,
    config: &relaysec_core::channel::NetworkConfig,
    opts: &McOptions,
) -> relaysec_core::Result<SecrecyEstimates> {
    let r = spec.target_rate;
    match spec.strategy {
        StrategyKind::Sdf => Ok(montecarlo::estimate_secrecy(config, &Scheme::df(), r, opts)),
        StrategyKind::Saf => Ok(montecarlo::estimate_secrecy(
            config,
            &Scheme::Af(spec.af_model),
            r,
            opts,
        )),
        StrategyKind::OpaDf => opa::estimate_opa(config, r, opts, spec.gamma0),
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write rows as CSV with a header, 17 significant digits and LF endings.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), ExperimentError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        w.write_record([
            fmt_f64(row.snr_db),
            row.strategy.as_str().to_string(),
            row.metric.as_str().to_string(),
            opt(row.analytic),
            opt(row.mc.map(|m| m.mean)),
            opt(row.mc.map(|m| m.std_error)),
            row.mc.map(|m| m.trials.to_string()).unwrap_or_default(),
            row.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A small Python script that plots a CSV written by [`write_csv`].
pub fn plot_script(csv_path: &str) -> String {
    format!(
        r#"import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv_path:?})))
for metric in sorted({{r["metric"] for r in rows}}):
    sel = [r for r in rows if r["metric"] == metric]
    x = [float(r["snr_db"]) for r in sel]
    fig, ax = plt.subplots()
    if all(r["analytic"] for r in sel):
        ax.plot(x, [float(r["analytic"]) for r in sel], "-", label="analytic")
    if all(r["mc_mean"] for r in sel):
        ax.errorbar(x, [float(r["mc_mean"]) for r in sel],
                    yerr=[3 * float(r["mc_stderr"]) for r in sel], fmt="o", label="simulation")
    if metric == "outage":
        ax.set_yscale("log")
    ax.set_xlabel("main channel SNR (dB)")
    ax.set_ylabel(metric)
    ax.legend()
    fig.savefig({csv_path:?} + "." + metric + ".png")
"#
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Outputs, Sweep};

    fn small_spec(strategy: StrategyKind) -> ExperimentSpec {
        ExperimentSpec {
            strategy,
            trials: 20_000,
            sweep: Sweep {
                start: 0.0,
                stop: 10.0,
                step: 10.0,
            },
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn one_row_per_point_and_metric() {
        let rows = run_experiment(&small_spec(StrategyKind::Sdf)).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].metric, Metric::Asr);
        assert_eq!(rows[1].metric, Metric::Outage);
        assert_eq!(rows[2].snr_db, 10.0);
        for r in &rows {
            let mc = r.mc.unwrap();
            assert!(mc.z_score(r.analytic.unwrap()) < 4.0, "{r:?}");
        }
    }

    #[test]
    fn opa_rows_have_no_analytic_column() {
        let mut spec = small_spec(StrategyKind::OpaDf);
        spec.outputs = Outputs::Asr;
        let rows = run_experiment(&spec).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.analytic.is_none() && r.mc.is_some()));
    }

    #[test]
    fn normalization_divides_rate_only() {
        let mut spec = small_spec(StrategyKind::Sdf);
        spec.sweep = Sweep::single(10.0);
        let plain = run_experiment_with(&spec, Mode::AnalyticOnly, None).unwrap();
        spec.normalize_awgn = true;
        let norm = run_experiment_with(&spec, Mode::AnalyticOnly, None).unwrap();
        let c = 11f64.ln();
        assert!((norm[0].analytic.unwrap() * c - plain[0].analytic.unwrap()).abs() < 1e-15);
        assert_eq!(norm[1].analytic, plain[1].analytic);
    }

    #[test]
    fn csv_format() {
        let rows =
            run_experiment_with(&small_spec(StrategyKind::Sdf), Mode::AnalyticOnly, None).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0.0000000000000000e0");
        assert_eq!(&first[1..3], ["sdf", "asr"]);
        assert_eq!(first[4], "");
        assert!(!text.contains('\r'));
    }
}
