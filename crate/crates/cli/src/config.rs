//! Experiment configuration: TOML schema, validation and defaults.
//!
//! ```toml
//! strategy = "sdf"            # sdf | saf | opa-df
//! outputs = "both"            # asr | outage | both
//! gamma_e_db = 10.0
//! target_rate = 0.5
//! trials = 1000000
//! seed = 1
//! normalize_awgn = false
//!
//! [network]
//! relays = 2                  # IID relays, or
//! # [[network.relay]]         # one table per relay, or
//! # main_offset_db = 0.0
//! # eve_offset_db = 0.0
//! # file = "relays.toml"      # [[relay]] tables in a separate file
//!
//! [sweep]                     # main-channel average SNR in dB
//! start = 0.0
//! stop = 30.0
//! step = 5.0
//!
//! [af]
//! model = "approx"            # approx | exact-aps
//! first_hop_boost_db = 16.0
//! first_hop = "shared"        # shared | per-relay
//!
//! [opa]
//! gamma0 = "match"            # or a positive linear power
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use relaysec_core::analytic::MAX_CLOSED_FORM_RELAYS;
use relaysec_core::channel::{db_to_linear, NetworkConfig, RelayLinkParams};
use relaysec_core::montecarlo::{AfModel, AfVariant, FirstHop, DEFAULT_TRIALS};
use relaysec_core::opa::Gamma0Policy;
use toml::{Table, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Sdf,
    Saf,
    OpaDf,
}

impl StrategyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyKind::Sdf => "sdf",
            StrategyKind::Saf => "saf",
            StrategyKind::OpaDf => "opa-df",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sdf" => Some(StrategyKind::Sdf),
            "saf" => Some(StrategyKind::Saf),
            "opa-df" | "opa" => Some(StrategyKind::OpaDf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outputs {
    Asr,
    Outage,
    Both,
}

impl Outputs {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "asr" => Some(Outputs::Asr),
            "outage" => Some(Outputs::Outage),
            "both" => Some(Outputs::Both),
            _ => None,
        }
    }

    pub fn asr(&self) -> bool {
        matches!(self, Outputs::Asr | Outputs::Both)
    }

    pub fn outage(&self) -> bool {
        matches!(self, Outputs::Outage | Outputs::Both)
    }
}

pub fn parse_af_variant(s: &str) -> Option<AfVariant> {
    match s.to_ascii_lowercase().as_str() {
        "approx" | "approx-product" => Some(AfVariant::ApproxProduct),
        "exact-aps" | "exact" => Some(AfVariant::ExactAps),
        _ => None,
    }
}

pub fn parse_first_hop(s: &str) -> Option<FirstHop> {
    match s.to_ascii_lowercase().as_str() {
        "shared" => Some(FirstHop::Shared),
        "per-relay" => Some(FirstHop::PerRelay),
        _ => None,
    }
}

/// Per-relay SNR offsets (dB) added to the sweep SNR and to `gamma_e_db`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelayOffset {
    pub main_offset_db: f64,
    pub eve_offset_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSource {
    Iid(usize),
    Relays(Vec<RelayOffset>),
    File(PathBuf),
}

/// Main-channel SNR axis in dB, `start..=stop` in steps of `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Sweep {
    pub fn single(snr_db: f64) -> Self {
        Self {
            start: snr_db,
            stop: snr_db,
            step: 1.0,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| self.start + i as f64 * self.step)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub network: NetworkSource,
    pub strategy: StrategyKind,
    pub af_model: AfModel,
    pub gamma0: Gamma0Policy,
    pub sweep: Sweep,
    pub gamma_e_db: f64,
    pub target_rate: f64,
    pub trials: u64,
    pub seed: u64,
    pub outputs: Outputs,
    pub normalize_awgn: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            network: NetworkSource::Iid(2),
            strategy: StrategyKind::Sdf,
            af_model: AfModel::approx(),
            gamma0: Gamma0Policy::MatchRelaySnr,
            sweep: Sweep {
                start: 0.0,
                stop: 30.0,
                step: 5.0,
            },
            gamma_e_db: 10.0,
            target_rate: 0.5,
            trials: DEFAULT_TRIALS,
            seed: 1,
            outputs: Outputs::Both,
            normalize_awgn: false,
        }
    }
}

/// One validation problem, located by its dotted field path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<Issue>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.path, i.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    fn single(path: &str, message: impl Into<String>) -> Self {
        Self {
            issues: vec![Issue {
                path: path.to_string(),
                message: message.into(),
            }],
        }
    }

    pub fn mentions(&self, path: &str) -> bool {
        self.issues.iter().any(|i| i.path == path)
    }
}

#[derive(Default)]
struct Issues(Vec<Issue>);

impl Issues {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn into_result<T>(self, value: T) -> Result<T, ConfigError> {
        if self.0.is_empty() {
            Ok(value)
        } else {
            Err(ConfigError { issues: self.0 })
        }
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn reject_unknown(table: &Table, prefix: &str, allowed: &[&str], issues: &mut Issues) {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            issues.push(join(prefix, key), "unknown key");
        }
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

fn get_f64(table: &Table, prefix: &str, key: &str, issues: &mut Issues) -> Option<f64> {
    let v = table.get(key)?;
    match number(v) {
        Some(x) if x.is_finite() => Some(x),
        _ => {
            issues.push(join(prefix, key), "expected a finite number");
            None
        }
    }
}

fn get_u64(table: &Table, prefix: &str, key: &str, issues: &mut Issues) -> Option<u64> {
    match table.get(key)? {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        _ => {
            issues.push(join(prefix, key), "expected a non-negative integer");
            None
        }
    }
}

fn get_bool(table: &Table, prefix: &str, key: &str, issues: &mut Issues) -> Option<bool> {
    match table.get(key)? {
        Value::Boolean(b) => Some(*b),
        _ => {
            issues.push(join(prefix, key), "expected true or false");
            None
        }
    }
}

fn get_str<'a>(table: &'a Table, prefix: &str, key: &str, issues: &mut Issues) -> Option<&'a str> {
    match table.get(key)? {
        Value::String(s) => Some(s.as_str()),
        _ => {
            issues.push(join(prefix, key), "expected a string");
            None
        }
    }
}

fn get_table<'a>(table: &'a Table, key: &str, issues: &mut Issues) -> Option<&'a Table> {
    match table.get(key)? {
        Value::Table(t) => Some(t),
        _ => {
            issues.push(key, "expected a table");
            None
        }
    }
}

fn get_choice<T>(
    table: &Table,
    prefix: &str,
    key: &str,
    parse: impl Fn(&str) -> Option<T>,
    expected: &str,
    issues: &mut Issues,
) -> Option<T> {
    let s = get_str(table, prefix, key, issues)?;
    let parsed = parse(s);
    if parsed.is_none() {
        issues.push(
            join(prefix, key),
            format!("expected one of {expected}, got {s:?}"),
        );
    }
    parsed
}

fn parse_relay_tables(items: &[Value], prefix: &str, issues: &mut Issues) -> Vec<RelayOffset> {
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let path = format!("{prefix}[{i}]");
        let Value::Table(t) = item else {
            issues.push(path, "expected a table");
            continue;
        };
        reject_unknown(t, &path, &["main_offset_db", "eve_offset_db"], issues);
        out.push(RelayOffset {
            main_offset_db: get_f64(t, &path, "main_offset_db", issues).unwrap_or(0.0),
            eve_offset_db: get_f64(t, &path, "eve_offset_db", issues).unwrap_or(0.0),
        });
    }
    out
}

fn parse_network(t: &Table, issues: &mut Issues) -> Option<NetworkSource> {
    reject_unknown(t, "network", &["relays", "relay", "file"], issues);
    let mut sources = Vec::new();
    if let Some(n) = get_u64(t, "network", "relays", issues) {
        sources.push(NetworkSource::Iid(n as usize));
    }
    if let Some(v) = t.get("relay") {
        match v {
            Value::Array(items) => sources.push(NetworkSource::Relays(parse_relay_tables(
                items,
                "network.relay",
                issues,
            ))),
            _ => issues.push("network.relay", "expected an array of tables"),
        }
    }
    if let Some(f) = get_str(t, "network", "file", issues) {
        sources.push(NetworkSource::File(PathBuf::from(f)));
    }
    if sources.len() > 1 {
        issues.push("network", "set only one of relays, relay or file");
        return None;
    }
    sources.pop()
}

/// Parse and validate config text. All problems are reported together.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::single("<document>", e.message().to_string()))?;
    let mut issues = Issues::default();
    let mut spec = ExperimentSpec::default();
    reject_unknown(
        &root,
        "",
        &[
            "strategy",
            "outputs",
            "gamma_e_db",
            "target_rate",
            "trials",
            "seed",
            "normalize_awgn",
            "network",
            "sweep",
            "af",
            "opa",
        ],
        &mut issues,
    );

    if let Some(s) = get_choice(
        &root,
        "",
        "strategy",
        StrategyKind::parse,
        "sdf, saf, opa-df",
        &mut issues,
    ) {
        spec.strategy = s;
    }
    if let Some(o) = get_choice(
        &root,
        "",
        "outputs",
        Outputs::parse,
        "asr, outage, both",
        &mut issues,
    ) {
        spec.outputs = o;
    }
    if let Some(x) = get_f64(&root, "", "gamma_e_db", &mut issues) {
        spec.gamma_e_db = x;
    }
    if let Some(x) = get_f64(&root, "", "target_rate", &mut issues) {
        spec.target_rate = x;
    }
    if let Some(x) = get_u64(&root, "", "trials", &mut issues) {
        spec.trials = x;
    }
    if let Some(x) = get_u64(&root, "", "seed", &mut issues) {
        spec.seed = x;
    }
    if let Some(x) = get_bool(&root, "", "normalize_awgn", &mut issues) {
        spec.normalize_awgn = x;
    }

    if let Some(t) = get_table(&root, "network", &mut issues) {
        if let Some(n) = parse_network(t, &mut issues) {
            spec.network = n;
        }
    }
    if let Some(t) = get_table(&root, "sweep", &mut issues) {
        reject_unknown(t, "sweep", &["start", "stop", "step"], &mut issues);
        if let Some(x) = get_f64(t, "sweep", "start", &mut issues) {
            spec.sweep.start = x;
        }
        if let Some(x) = get_f64(t, "sweep", "stop", &mut issues) {
            spec.sweep.stop = x;
        }
        if let Some(x) = get_f64(t, "sweep", "step", &mut issues) {
            spec.sweep.step = x;
        }
    }
    if let Some(t) = get_table(&root, "af", &mut issues) {
        reject_unknown(
            t,
            "af",
            &["model", "first_hop_boost_db", "first_hop"],
            &mut issues,
        );
        if let Some(v) = get_choice(
            t,
            "af",
            "model",
            parse_af_variant,
            "approx, exact-aps",
            &mut issues,
        ) {
            spec.af_model.variant = v;
        }
        if let Some(x) = get_f64(t, "af", "first_hop_boost_db", &mut issues) {
            spec.af_model.first_hop_boost_db = x;
        }
        if let Some(h) = get_choice(
            t,
            "af",
            "first_hop",
            parse_first_hop,
            "shared, per-relay",
            &mut issues,
        ) {
            spec.af_model.first_hop = h;
        }
    }
    if let Some(t) = get_table(&root, "opa", &mut issues) {
        reject_unknown(t, "opa", &["gamma0"], &mut issues);
        match t.get("gamma0") {
            None => {}
            Some(Value::String(s)) if s == "match" => spec.gamma0 = Gamma0Policy::MatchRelaySnr,
            Some(v) => match number(v) {
                Some(g) => spec.gamma0 = Gamma0Policy::Fixed(g),
                None => issues.push("opa.gamma0", "expected \"match\" or a positive number"),
            },
        }
    }

    if let Err(e) = spec.validate() {
        issues.0.extend(e.issues);
    }
    issues.into_result(spec)
}

/// Read a config file. A relative `network.file` is resolved against the
/// config file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single("<file>", format!("{}: {e}", path.display())))?;
    let mut spec = parse_config(&text)?;
    if let NetworkSource::File(f) = &spec.network {
        if f.is_relative() {
            if let Some(dir) = path.parent() {
                spec.network = NetworkSource::File(dir.join(f));
            }
        }
    }
    Ok(spec)
}

/// Parse a relay file: one `[[relay]]` table per relay.
pub fn parse_relay_file(text: &str) -> Result<Vec<RelayOffset>, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        ConfigError::single("network.file", e.message().to_string())
    })?;
    let mut issues = Issues::default();
    reject_unknown(&root, "network.file", &["relay"], &mut issues);
    let relays = match root.get("relay") {
        Some(Value::Array(items)) => parse_relay_tables(items, "network.file.relay", &mut issues),
        _ => {
            issues.push(
                "network.file.relay",
                "expected an array of [[relay]] tables",
            );
            Vec::new()
        }
    };
    issues.into_result(relays)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Issues::default();
        let Sweep { start, stop, step } = self.sweep;
        if !(step > 0.0) {
            issues.push("sweep.step", format!("must be positive, got {step}"));
        }
        if !(start <= stop) {
            issues.push(
                "sweep.stop",
                format!("must be at least sweep.start ({start}), got {stop}"),
            );
        }
        if self.trials == 0 {
            issues.push("trials", "must be at least 1");
        }
        if !(self.target_rate >= 0.0 && self.target_rate.is_finite()) {
            issues.push(
                "target_rate",
                format!("must be non-negative, got {}", self.target_rate),
            );
        }
        if !self.gamma_e_db.is_finite() {
            issues.push("gamma_e_db", "must be finite");
        }
        if !self.af_model.first_hop_boost_db.is_finite() {
            issues.push("af.first_hop_boost_db", "must be finite");
        }
        if let Gamma0Policy::Fixed(g) = self.gamma0 {
            if !(g > 0.0 && g.is_finite()) {
                issues.push("opa.gamma0", format!("must be positive, got {g}"));
            }
        }
        let count = match &self.network {
            NetworkSource::Iid(n) => Some((*n, "network.relays")),
            NetworkSource::Relays(r) => Some((r.len(), "network.relay")),
            NetworkSource::File(_) => None,
        };
        if let Some((n, path)) = count {
            self.check_relay_count(n, path, &mut issues);
        }
        issues.into_result(())
    }

    fn check_relay_count(&self, n: usize, path: &str, issues: &mut Issues) {
        if n == 0 {
            issues.push(path, "at least one relay is required");
        } else if self.strategy != StrategyKind::OpaDf && n > MAX_CLOSED_FORM_RELAYS {
            issues.push(
                path,
                format!("at most {MAX_CLOSED_FORM_RELAYS} relays are supported by the closed forms, got {n}"),
            );
        }
    }

    /// Relay offsets, reading the network file if there is one.
    pub fn relay_offsets(&self) -> Result<Vec<RelayOffset>, ConfigError> {
        match &self.network {
            NetworkSource::Iid(n) => Ok(vec![RelayOffset::default(); *n]),
            NetworkSource::Relays(r) => Ok(r.clone()),
            NetworkSource::File(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    ConfigError::single("network.file", format!("{}: {e}", path.display()))
                })?;
                let relays = parse_relay_file(&text)?;
                let mut issues = Issues::default();
                self.check_relay_count(relays.len(), "network.file", &mut issues);
                issues.into_result(relays)
            }
        }
    }

    /// Network at main-channel SNR `snr_db`: `lambda_m = 10^{-snr/10}`,
    /// `lambda_e = 10^{-gamma_e_db/10}`, each shifted by the relay's offsets.
    pub fn network_at(
        &self,
        offsets: &[RelayOffset],
        snr_db: f64,
    ) -> relaysec_core::Result<NetworkConfig> {
        let relays = offsets
            .iter()
            .map(|o| {
                RelayLinkParams::from_snr_db(
                    snr_db + o.main_offset_db,
                    self.gamma_e_db + o.eve_offset_db,
                )
            })
            .collect::<relaysec_core::Result<Vec<_>>>()?;
        NetworkConfig::new(relays)
    }

    /// `ln(1 + gamma_m)` used by `normalize_awgn`.
    pub fn awgn_capacity(snr_db: f64) -> f64 {
        db_to_linear(snr_db).ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let spec = parse_config("[network]\nrelays = 2\n").unwrap();
        assert_eq!(spec.network, NetworkSource::Iid(2));
        assert_eq!(spec.strategy, StrategyKind::Sdf);
        assert_eq!(spec.gamma_e_db, 10.0);
        assert_eq!(spec.trials, DEFAULT_TRIALS);
        assert_eq!(spec.outputs, Outputs::Both);
    }

    #[test]
    fn zero_step_names_the_sweep_field() {
        let err = parse_config("[sweep]\nstart = 0\nstop = 10\nstep = 0\n").unwrap_err();
        assert!(err.mentions("sweep.step"), "{err}");
    }

    #[test]
    fn zero_relays_rejected() {
        let err = parse_config("[network]\nrelays = 0\n").unwrap_err();
        assert!(err.mentions("network.relays"), "{err}");
    }

    #[test]
    fn all_errors_reported_together() {
        let text =
            "strategy = \"xyz\"\ntrials = 0\nbogus = 1\n[sweep]\nstep = -1\n[af]\nmodel = 3\n";
        let err = parse_config(text).unwrap_err();
        for path in ["strategy", "trials", "bogus", "sweep.step", "af.model"] {
            assert!(err.mentions(path), "missing {path}: {err}");
        }
    }

    #[test]
    fn unknown_nested_keys_rejected() {
        let err =
            parse_config("[network]\nrelays = 2\ncount = 3\n[[network.relay]]\nmain_offset = 1\n")
                .unwrap_err();
        assert!(err.mentions("network.count"));
        assert!(err.mentions("network.relay[0].main_offset"));
        assert!(err.mentions("network"));
    }

    #[test]
    fn inid_relays_and_af_section() {
        let text = r#"
strategy = "saf"
[[network.relay]]
main_offset_db = 3.0
[[network.relay]]
eve_offset_db = -2
[af]
model = "exact-aps"
first_hop_boost_db = 16
first_hop = "per-relay"
"#;
        let spec = parse_config(text).unwrap();
        let NetworkSource::Relays(r) = &spec.network else {
            panic!()
        };
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].main_offset_db, 3.0);
        assert_eq!(r[1].eve_offset_db, -2.0);
        assert_eq!(spec.af_model.variant, AfVariant::ExactAps);
        assert_eq!(spec.af_model.first_hop, FirstHop::PerRelay);
        let cfg = spec.network_at(r, 10.0).unwrap();
        assert!((cfg.relays()[0].lambda_m - 10f64.powf(-1.3)).abs() < 1e-15);
        assert!((cfg.relays()[1].lambda_e - 10f64.powf(-0.8)).abs() < 1e-15);
    }

    #[test]
    fn sweep_points_include_stop() {
        let s = Sweep {
            start: 0.0,
            stop: 1.0,
            step: 0.1,
        };
        let p = s.points();
        assert_eq!(p.len(), 11);
        assert!((p[10] - 1.0).abs() < 1e-12);
        assert_eq!(Sweep::single(7.0).points(), vec![7.0]);
    }

    #[test]
    fn syntax_error_is_a_config_error() {
        assert!(parse_config("strategy = ").is_err());
    }
}
