//! Experiment configuration.
//!
//! The on-disk format is a flat `key = value` file, one entry per line, with
//! `#` starting a comment. Nested parameters use dotted keys such as
//! `fedyogi.eta`. Overrides (`--set key=value`) are applied after the file,
//! left to right. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adversary::FlipRule;
use crate::error::{Error, Result};
use crate::feddata::{PartitionMode, PartitionSpec, SampleSizeSpec};
use crate::learning::ModelKind;
use crate::traces::HeterogeneitySpec;

/// Environment variable supplying the seed when neither the file nor an
/// override sets one.
pub const SEED_ENV: &str = "FEDSIM_SEED";

/// Overcommitment factor kept as an exact decimal ratio so that `1.3 × 100`
/// is 130 and not 130.00000000000003.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Overcommit {
    num: u64,
    den: u64,
}

impl Overcommit {
    pub fn new(num: u64, den: u64) -> Option<Self> {
        (den > 0 && num >= den).then_some(Self { num, den })
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `ceil(factor × n)`.
    pub fn request_size(self, n: usize) -> usize {
        let total = n as u128 * self.num as u128;
        total.div_ceil(self.den as u128) as usize
    }
}

impl Default for Overcommit {
    fn default() -> Self {
        Self { num: 13, den: 10 }
    }
}

impl FromStr for Overcommit {
    type Err = String;

    /// Accepts `1.3`, `2`, or `13/10`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (num, den) = if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| format!("bad ratio `{s}`"))?;
            let d: u64 = d.trim().parse().map_err(|_| format!("bad ratio `{s}`"))?;
            (n, d)
        } else if let Some((int, frac)) = s.split_once('.') {
            if frac.len() > 9 || !frac.bytes().all(|b| b.is_ascii_digit()) {
                return Err(format!("bad decimal `{s}`"));
            }
            let int: u64 = int.parse().map_err(|_| format!("bad decimal `{s}`"))?;
            let den = 10u64.pow(frac.len() as u32);
            let frac: u64 = if frac.is_empty() {
                0
            } else {
                frac.parse().unwrap()
            };
            (int * den + frac, den)
        } else {
            (s.parse().map_err(|_| format!("bad number `{s}`"))?, 1)
        };
        Overcommit::new(num, den).ok_or_else(|| format!("overcommit must be >= 1, got `{s}`"))
    }
}

impl fmt::Display for Overcommit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Server-side federated optimisation algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    FedAvg,
    FedProx { mu: f64 },
    FedYoGi(YogiParams),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YogiParams {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub tau: f64,
}

impl Default for YogiParams {
    fn default() -> Self {
        Self {
            eta: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            tau: 1e-3,
        }
    }
}

pub const DEFAULT_PROX_MU: f64 = 0.01;

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::FedAvg => "fedavg",
            Algorithm::FedProx { .. } => "fedprox",
            Algorithm::FedYoGi(_) => "fedyogi",
        }
    }

    /// Proximal coefficient applied during local training.
    pub fn prox_mu(&self) -> f64 {
        match self {
            Algorithm::FedProx { mu } => *mu,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConfig {
    pub clip: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelArch {
    Logistic,
    Mlp { hidden: usize },
}

/// Synthetic task and partitioning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub num_clients: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub radius: f64,
    pub partition: PartitionSpec,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            num_clients: 1000,
            num_classes: 10,
            feature_dim: 32,
            radius: 3.0,
            partition: PartitionSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceConfig {
    pub profiles: Option<PathBuf>,
    pub availability: Option<PathBuf>,
    pub synth: HeterogeneitySpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target_participants: usize,
    pub overcommit: Overcommit,
    pub total_rounds: usize,
    pub local_steps: usize,
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub algorithm: Algorithm,
    pub dp: Option<DpConfig>,
    pub defense_clip: Option<f64>,
    pub corrupted_fraction: f64,
    pub flip_rule: FlipRule,
    pub seed: u64,
    pub traces_enabled: bool,
    pub eval_every: usize,
    /// Virtual seconds skipped when no client is available.
    pub stall_probe_s: f64,
    pub model: ModelArch,
    pub data: DataConfig,
    pub traces: TraceConfig,
}

impl ExperimentConfig {
    /// Configuration with every default filled in.
    pub fn with_defaults(algorithm: Algorithm, total_rounds: usize) -> Self {
        Self {
            target_participants: 100,
            overcommit: Overcommit::default(),
            total_rounds,
            local_steps: 20,
            batch_size: 32,
            initial_lr: 0.04,
            lr_decay: 0.98,
            lr_decay_every: 10,
            algorithm,
            dp: None,
            defense_clip: None,
            corrupted_fraction: 0.0,
            flip_rule: FlipRule::Rotate,
            seed: 0,
            traces_enabled: true,
            eval_every: 10,
            stall_probe_s: 60.0,
            model: ModelArch::Logistic,
            data: DataConfig::default(),
            traces: TraceConfig::default(),
        }
    }

    /// Clients requested per round.
    pub fn request_size(&self) -> usize {
        self.overcommit.request_size(self.target_participants)
    }

    pub fn model_kind(&self) -> ModelKind {
        let (num_classes, feature_dim) = (self.data.num_classes, self.data.feature_dim);
        match self.model {
            ModelArch::Logistic => ModelKind::Logistic {
                num_classes,
                feature_dim,
            },
            ModelArch::Mlp { hidden } => ModelKind::Mlp {
                num_classes,
                feature_dim,
                hidden,
            },
        }
    }

    pub fn parse_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    msg: "empty key".into(),
                });
            }
            if raw
                .0
                .insert(key.to_owned(), value.trim().to_owned())
                .is_some()
            {
                return Err(Error::ConfigSyntax {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        for (key, value) in overrides {
            raw.0.insert(key.trim().to_owned(), value.trim().to_owned());
        }
        Self::from_raw(raw)
    }

    fn from_raw(mut raw: RawConfig) -> Result<Self> {
        let algorithm_name = raw
            .take("algorithm")
            .ok_or(Error::ConfigMissing("algorithm"))?;
        let total_rounds: usize = raw
            .parse("total_rounds")?
            .ok_or(Error::ConfigMissing("total_rounds"))?;

        let algorithm = match algorithm_name.to_ascii_lowercase().as_str() {
            "fedavg" => Algorithm::FedAvg,
            "fedprox" => Algorithm::FedProx {
                mu: raw.parse("fedprox.mu")?.unwrap_or(DEFAULT_PROX_MU),
            },
            "fedyogi" => {
                let d = YogiParams::default();
                Algorithm::FedYoGi(YogiParams {
                    eta: raw.parse("fedyogi.eta")?.unwrap_or(d.eta),
                    beta1: raw.parse("fedyogi.beta1")?.unwrap_or(d.beta1),
                    beta2: raw.parse("fedyogi.beta2")?.unwrap_or(d.beta2),
                    tau: raw.parse("fedyogi.tau")?.unwrap_or(d.tau),
                })
            }
            other => {
                return Err(Error::value(
                    "algorithm",
                    format!("expected fedavg|fedprox|fedyogi, got `{other}`"),
                ))
            }
        };

        let mut cfg = Self::with_defaults(algorithm, total_rounds);
        if let Some(seed) = std::env::var(SEED_ENV)
            .ok()
            .filter(|s| !s.trim().is_empty())
        {
            cfg.seed = seed
                .trim()
                .parse()
                .map_err(|_| Error::value(SEED_ENV, format!("not a u64: `{seed}`")))?;
        }

        macro_rules! set {
            ($field:expr, $key:literal) => {
                if let Some(v) = raw.parse($key)? {
                    $field = v;
                }
            };
        }
        set!(cfg.target_participants, "participants");
        if let Some(v) = raw.take("overcommit") {
            cfg.overcommit = v
                .parse()
                .map_err(|e: String| Error::value("overcommit", e))?;
        }
        set!(cfg.local_steps, "local_steps");
        set!(cfg.batch_size, "batch_size");
        set!(cfg.initial_lr, "initial_lr");
        set!(cfg.lr_decay, "lr_decay");
        set!(cfg.lr_decay_every, "lr_decay_every");
        set!(cfg.seed, "seed");
        set!(cfg.traces_enabled, "traces_enabled");
        set!(cfg.eval_every, "eval_every");
        set!(cfg.stall_probe_s, "stall_probe_s");

        let dp_sigma: Option<f64> = raw.parse("dp.sigma")?;
        let dp_clip: Option<f64> = raw.parse("dp.clip")?;
        cfg.dp = match (dp_sigma, dp_clip) {
            (Some(sigma), clip) => Some(DpConfig {
                clip: clip.unwrap_or(1.0),
                sigma,
            }),
            (None, Some(_)) => return Err(Error::value("dp.clip", "set without dp.sigma")),
            (None, None) => None,
        };
        cfg.defense_clip = raw.parse("defense_clip")?;

        let fraction: Option<f64> = raw.parse("adversary.fraction")?;
        let alias: Option<f64> = raw.parse("corrupted_fraction")?;
        if fraction.is_some() && alias.is_some() {
            return Err(Error::value(
                "corrupted_fraction",
                "conflicts with adversary.fraction",
            ));
        }
        if let Some(f) = fraction.or(alias) {
            cfg.corrupted_fraction = f;
        }
        if let Some(rule) = raw.take("adversary.rule") {
            cfg.flip_rule = rule
                .parse()
                .map_err(|e: String| Error::value("adversary.rule", e))?;
        }

        match raw
            .take("model")
            .as_deref()
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            None | Some("logistic") => {
                if raw.0.contains_key("mlp.hidden") {
                    return Err(Error::value("mlp.hidden", "only valid with model = mlp"));
                }
            }
            Some("mlp") => {
                cfg.model = ModelArch::Mlp {
                    hidden: raw.parse("mlp.hidden")?.unwrap_or(64),
                }
            }
            Some(other) => {
                return Err(Error::value(
                    "model",
                    format!("expected logistic|mlp, got `{other}`"),
                ))
            }
        }

        let data = &mut cfg.data;
        set!(data.num_clients, "data.clients");
        set!(data.num_classes, "data.classes");
        set!(data.feature_dim, "data.feature_dim");
        set!(data.radius, "data.radius");
        let sizes = &mut data.partition.sizes;
        set!(sizes.median, "data.samples_median");
        set!(sizes.sigma_log, "data.samples_sigma_log");
        set!(sizes.max, "data.samples_max");
        set!(data.partition.val_fraction, "data.val_fraction");
        set!(data.partition.test_fraction, "data.test_fraction");
        let alpha: Option<f64> = raw.parse("data.alpha")?;
        let mapping = raw.take("data.mapping");
        data.partition.mode = match raw.take("data.partition").as_deref() {
            None | Some("iid") => PartitionMode::Iid,
            Some("dirichlet") => PartitionMode::Dirichlet {
                alpha: alpha.unwrap_or(0.1),
            },
            Some("mapping") => {
                PartitionMode::Mapping(PathBuf::from(mapping.clone().ok_or_else(|| {
                    Error::value("data.mapping", "required with partition = mapping")
                })?))
            }
            Some(other) => {
                return Err(Error::value(
                    "data.partition",
                    format!("expected iid|dirichlet|mapping, got `{other}`"),
                ))
            }
        };
        if alpha.is_some() && !matches!(data.partition.mode, PartitionMode::Dirichlet { .. }) {
            return Err(Error::value(
                "data.alpha",
                "only valid with partition = dirichlet",
            ));
        }
        if mapping.is_some() && !matches!(data.partition.mode, PartitionMode::Mapping(_)) {
            return Err(Error::value(
                "data.mapping",
                "only valid with partition = mapping",
            ));
        }

        let traces = &mut cfg.traces;
        traces.profiles = raw.take("traces.profiles").map(PathBuf::from);
        traces.availability = raw.take("traces.availability").map(PathBuf::from);
        let synth = &mut traces.synth;
        set!(synth.latency_min_ms, "traces.latency_min_ms");
        set!(synth.latency_max_ms, "traces.latency_max_ms");
        set!(synth.bandwidth_min_kbps, "traces.bandwidth_min_kbps");
        set!(synth.bandwidth_max_kbps, "traces.bandwidth_max_kbps");
        set!(synth.on_mean_s, "traces.on_mean_s");
        set!(synth.off_mean_s, "traces.off_mean_s");
        set!(synth.diurnal_amplitude, "traces.diurnal_amplitude");
        set!(synth.horizon_s, "traces.horizon_s");

        if let Some(key) = raw.0.keys().next() {
            return Err(Error::ConfigUnknown(key.clone()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks. Each failure names the offending key.
    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::value(key, msg))
            }
        }
        let pos = |x: f64| x.is_finite() && x > 0.0;
        check(
            self.target_participants >= 1,
            "participants",
            "must be >= 1",
        )?;
        check(self.local_steps >= 1, "local_steps", "must be >= 1")?;
        check(self.batch_size >= 1, "batch_size", "must be >= 1")?;
        check(pos(self.initial_lr), "initial_lr", "must be > 0")?;
        check(
            self.lr_decay > 0.0 && self.lr_decay <= 1.0,
            "lr_decay",
            "must be in (0, 1]",
        )?;
        check(self.lr_decay_every >= 1, "lr_decay_every", "must be >= 1")?;
        check(self.eval_every >= 1, "eval_every", "must be >= 1")?;
        check(pos(self.stall_probe_s), "stall_probe_s", "must be > 0")?;
        match self.algorithm {
            Algorithm::FedAvg => {}
            Algorithm::FedProx { mu } => {
                check(mu.is_finite() && mu >= 0.0, "fedprox.mu", "must be >= 0")?
            }
            Algorithm::FedYoGi(p) => {
                check(pos(p.eta), "fedyogi.eta", "must be > 0")?;
                check(
                    (0.0..1.0).contains(&p.beta1),
                    "fedyogi.beta1",
                    "must be in [0, 1)",
                )?;
                check(
                    (0.0..1.0).contains(&p.beta2),
                    "fedyogi.beta2",
                    "must be in [0, 1)",
                )?;
                check(pos(p.tau), "fedyogi.tau", "must be > 0")?;
            }
        }
        if let Some(dp) = self.dp {
            check(pos(dp.clip), "dp.clip", "must be > 0")?;
            check(
                dp.sigma.is_finite() && dp.sigma >= 0.0,
                "dp.sigma",
                "must be >= 0",
            )?;
        }
        if let Some(bound) = self.defense_clip {
            check(pos(bound), "defense_clip", "must be > 0")?;
        }
        check(
            (0.0..1.0).contains(&self.corrupted_fraction),
            "adversary.fraction",
            "must be in [0, 1)",
        )?;
        if let FlipRule::FixedTarget(t) = self.flip_rule {
            check(
                (t as usize) < self.data.num_classes,
                "adversary.rule",
                "target class out of range",
            )?;
        }
        if let ModelArch::Mlp { hidden } = self.model {
            check(hidden >= 1, "mlp.hidden", "must be >= 1")?;
        }
        let d = &self.data;
        check(d.num_clients >= 1, "data.clients", "must be >= 1")?;
        check(d.num_classes >= 2, "data.classes", "must be >= 2")?;
        check(d.feature_dim >= 2, "data.feature_dim", "must be >= 2")?;
        check(
            d.radius.is_finite() && d.radius >= 0.0,
            "data.radius",
            "must be >= 0",
        )?;
        let p = &d.partition;
        if let PartitionMode::Dirichlet { alpha } = p.mode {
            check(pos(alpha), "data.alpha", "must be > 0")?;
        }
        check(pos(p.sizes.median), "data.samples_median", "must be > 0")?;
        check(
            p.sizes.sigma_log.is_finite() && p.sizes.sigma_log >= 0.0,
            "data.samples_sigma_log",
            "must be >= 0",
        )?;
        check(p.sizes.max >= 1, "data.samples_max", "must be >= 1")?;
        check(
            (0.0..1.0).contains(&p.val_fraction),
            "data.val_fraction",
            "must be in [0, 1)",
        )?;
        check(
            (0.0..1.0).contains(&p.test_fraction) && p.val_fraction + p.test_fraction < 1.0,
            "data.test_fraction",
            "must be in [0, 1) and leave room for training clients",
        )?;
        let s = &self.traces.synth;
        check(
            pos(s.latency_min_ms),
            "traces.latency_min_ms",
            "must be > 0",
        )?;
        check(
            pos(s.latency_max_ms) && s.latency_max_ms >= s.latency_min_ms,
            "traces.latency_max_ms",
            "must be >= traces.latency_min_ms",
        )?;
        check(
            pos(s.bandwidth_min_kbps),
            "traces.bandwidth_min_kbps",
            "must be > 0",
        )?;
        check(
            pos(s.bandwidth_max_kbps) && s.bandwidth_max_kbps >= s.bandwidth_min_kbps,
            "traces.bandwidth_max_kbps",
            "must be >= traces.bandwidth_min_kbps",
        )?;
        check(pos(s.on_mean_s), "traces.on_mean_s", "must be > 0")?;
        check(pos(s.off_mean_s), "traces.off_mean_s", "must be > 0")?;
        check(
            (0.0..1.0).contains(&s.diurnal_amplitude),
            "traces.diurnal_amplitude",
            "must be in [0, 1)",
        )?;
        check(pos(s.horizon_s), "traces.horizon_s", "must be > 0")?;
        Ok(())
    }

    /// Fully resolved configuration in the same `key = value` format.
    /// Parsing the output yields an equal config.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("algorithm", &self.algorithm.name());
        match self.algorithm {
            Algorithm::FedAvg => {}
            Algorithm::FedProx { mu } => kv("fedprox.mu", &mu),
            Algorithm::FedYoGi(p) => {
                kv("fedyogi.eta", &p.eta);
                kv("fedyogi.beta1", &p.beta1);
                kv("fedyogi.beta2", &p.beta2);
                kv("fedyogi.tau", &p.tau);
            }
        }
        kv("total_rounds", &self.total_rounds);
        kv("participants", &self.target_participants);
        kv("overcommit", &self.overcommit);
        kv("local_steps", &self.local_steps);
        kv("batch_size", &self.batch_size);
        kv("initial_lr", &self.initial_lr);
        kv("lr_decay", &self.lr_decay);
        kv("lr_decay_every", &self.lr_decay_every);
        if let Some(dp) = self.dp {
            kv("dp.sigma", &dp.sigma);
            kv("dp.clip", &dp.clip);
        }
        if let Some(b) = self.defense_clip {
            kv("defense_clip", &b);
        }
        kv("adversary.fraction", &self.corrupted_fraction);
        kv("adversary.rule", &self.flip_rule);
        kv("seed", &self.seed);
        kv("traces_enabled", &self.traces_enabled);
        kv("eval_every", &self.eval_every);
        kv("stall_probe_s", &self.stall_probe_s);
        match self.model {
            ModelArch::Logistic => kv("model", &"logistic"),
            ModelArch::Mlp { hidden } => {
                kv("model", &"mlp");
                kv("mlp.hidden", &hidden);
            }
        }
        let d = &self.data;
        kv("data.clients", &d.num_clients);
        kv("data.classes", &d.num_classes);
        kv("data.feature_dim", &d.feature_dim);
        kv("data.radius", &d.radius);
        match &d.partition.mode {
            PartitionMode::Iid => kv("data.partition", &"iid"),
            PartitionMode::Dirichlet { alpha } => {
                kv("data.partition", &"dirichlet");
                kv("data.alpha", alpha);
            }
            PartitionMode::Mapping(path) => {
                kv("data.partition", &"mapping");
                kv("data.mapping", &path.display());
            }
        }
        let SampleSizeSpec {
            median,
            sigma_log,
            max,
        } = d.partition.sizes;
        kv("data.samples_median", &median);
        kv("data.samples_sigma_log", &sigma_log);
        kv("data.samples_max", &max);
        kv("data.val_fraction", &d.partition.val_fraction);
        kv("data.test_fraction", &d.partition.test_fraction);
        if let Some(p) = &self.traces.profiles {
            kv("traces.profiles", &p.display());
        }
        if let Some(p) = &self.traces.availability {
            kv("traces.availability", &p.display());
        }
        let s = &self.traces.synth;
        kv("traces.latency_min_ms", &s.latency_min_ms);
        kv("traces.latency_max_ms", &s.latency_max_ms);
        kv("traces.bandwidth_min_kbps", &s.bandwidth_min_kbps);
        kv("traces.bandwidth_max_kbps", &s.bandwidth_max_kbps);
        kv("traces.on_mean_s", &s.on_mean_s);
        kv("traces.off_mean_s", &s.off_mean_s);
        kv("traces.diurnal_amplitude", &s.diurnal_amplitude);
        kv("traces.horizon_s", &s.horizon_s);
        out
    }
}

#[derive(Default)]
struct RawConfig(BTreeMap<String, String>);

impl RawConfig {
    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn parse<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.0.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::value(key, format!("cannot parse `{v}`"))),
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    load_config_with_overrides(path, &[])
}

pub fn load_config_with_overrides(
    path: impl AsRef<Path>,
    overrides: &[(String, String)],
) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::parse_str(&text, overrides)
}

/// Splits a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("override `{s}` is not key=value")))?;
    Ok((k.trim().to_owned(), v.trim().to_owned()))
}

/// `initial_lr × lr_decay^⌊round / lr_decay_every⌋`.
pub fn effective_lr(cfg: &ExperimentConfig, round: usize) -> f64 {
    let steps = (round / cfg.lr_decay_every) as i32;
    cfg.initial_lr * cfg.lr_decay.powi(steps)
}
