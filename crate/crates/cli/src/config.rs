//! Experiment configuration: JSON schema, defaults, and validation.
//!
//! Every run is fully determined by one `ExperimentConfig` (the seed is
//! threaded through weight generation, family generation, and the
//! optimizers). Validation failures carry the name of the violated
//! constraint and map to exit code 3.

use std::fmt;

use serde::{Deserialize, Serialize};
use sparseform_core::forms::{conjugate, derive_config, ExponentConfig};
use sparseform_core::gauge::EntropyGauge;
use sparseform_core::young::YoungFn;

/// Exponent tuple as written in config files; `q0` accepts the string
/// `"inf"` besides plain numbers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Exponents {
    pub p0: f64,
    #[serde(with = "extended")]
    pub q0: f64,
    pub p: f64,
    pub q: f64,
}

impl Default for Exponents {
    fn default() -> Self {
        Exponents { p0: 1.0, q0: f64::INFINITY, p: 2.0, q: 2.0 }
    }
}

mod extended {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*x)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(x),
            Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Raw::Text(t) => {
                Err(de::Error::custom(format!("expected a number or \"inf\", got \"{t}\"")))
            }
        }
    }
}

/// One weight generator. All four are strictly positive by construction;
/// only `lognormal` consumes randomness.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { c: f64 },
    /// Leaf `k` at depth `L` gets `((k + 1/2) 2^{-L})^a`: a power of the
    /// distance to the origin, sampled at leaf centers.
    Power { a: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Spike { base: f64, height: f64, position: usize },
}

impl WeightSpec {
    pub fn label(&self) -> String {
        match self {
            WeightSpec::Constant { c } => format!("constant({c})"),
            WeightSpec::Power { a } => format!("power({a})"),
            WeightSpec::Lognormal { mu, sigma } => format!("lognormal({mu},{sigma})"),
            WeightSpec::Spike { base, height, position } => {
                format!("spike({base},{height},{position})")
            }
        }
    }
}

/// How the `(w, sigma)` ensemble is produced: the default crossed menu of
/// lognormal/spike/power generators with per-sample parameters, or one fixed
/// generator pair for all samples.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnsembleSpec {
    Crossed,
    Fixed { w: WeightSpec, sigma: WeightSpec },
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec::Crossed
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    /// Seeded top-down thinning; `density` is the per-cube admission rate.
    Random { density: f64 },
    /// The leftmost chain root > left half > ... (sparse exactly at 1/2).
    Chain,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec::Random { density: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    Constant { c: f64 },
    Power { a: f64 },
    /// `phi(t) = log(e + t)^a`.
    LogPower { a: f64 },
}

impl Default for GaugeSpec {
    fn default() -> Self {
        GaugeSpec::LogPower { a: 1.01 }
    }
}

impl GaugeSpec {
    pub fn build(&self) -> Result<EntropyGauge, String> {
        let named = |e| format!("gauge: {e}");
        match self {
            GaugeSpec::Constant { c } => EntropyGauge::constant(*c).map_err(named),
            GaugeSpec::Power { a } => EntropyGauge::power(*a).map_err(named),
            GaugeSpec::LogPower { a } => EntropyGauge::log_power(*a).map_err(named),
        }
    }

    /// The same shape with the exponent divided by `d` (the per-side
    /// integrability adjustment used by the exponential-flavor suites).
    pub fn scaled(&self, d: f64) -> GaugeSpec {
        match self {
            GaugeSpec::Constant { c } => GaugeSpec::Constant { c: *c },
            GaugeSpec::Power { a } => GaugeSpec::Power { a: a / d },
            GaugeSpec::LogPower { a } => GaugeSpec::LogPower { a: a / d },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum YoungSpec {
    /// The same `t^a` on both sides.
    Power { a: f64 },
    /// `A(t) = t^{p(1-eps)}` and `B(t) = t^{p'(1-eps)}`, which land in the
    /// integrability classes for exponents `p` and `p'` respectively.
    PowerBp { eps: f64 },
}

impl Default for YoungSpec {
    fn default() -> Self {
        YoungSpec::PowerBp { eps: 0.25 }
    }
}

impl YoungSpec {
    /// The pair `(A, B)` bumping the `u` side at `1/p` and the `v` side at
    /// `1/p'`.
    pub fn build_pair(&self, cfg: &ExponentConfig) -> Result<(YoungFn, YoungFn), String> {
        let named = |e| format!("young: {e}");
        match self {
            YoungSpec::Power { a } => {
                let f = YoungFn::power(*a).map_err(named)?;
                Ok((f.clone(), f))
            }
            YoungSpec::PowerBp { eps } => {
                if !(*eps > 0.0 && *eps < 1.0) {
                    return Err(format!("young: 0 < eps < 1 required, got {eps}"));
                }
                let a = YoungFn::power((cfg.p * (1.0 - eps)).max(1.0 + 1e-6))
                    .map_err(|e| format!("young: {e}"))?;
                let b = YoungFn::power((conjugate(cfg.p) * (1.0 - eps)).max(1.0 + 1e-6))
                    .map_err(|e| format!("young: {e}"))?;
                Ok((a, b))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum SuiteKind {
    #[serde(rename = "T1_1")]
    T11,
    #[serde(rename = "T1_2")]
    T12,
    #[serde(rename = "T1_3")]
    T13,
    #[serde(rename = "T1_4")]
    T14,
    #[serde(rename = "BUMP_ENTROPY")]
    BumpEntropy,
    #[serde(rename = "BUMP_JOINT")]
    BumpJoint,
}

impl SuiteKind {
    /// Everything past the characterization suite runs under the diagonal
    /// hypotheses `p = q` and Lebesgue cube coefficients.
    pub fn needs_diagonal(&self) -> bool {
        !matches!(self, SuiteKind::T11)
    }

    pub fn name(&self) -> &'static str {
        match self {
            SuiteKind::T11 => "T1_1",
            SuiteKind::T12 => "T1_2",
            SuiteKind::T13 => "T1_3",
            SuiteKind::T14 => "T1_4",
            SuiteKind::BumpEntropy => "BUMP_ENTROPY",
            SuiteKind::BumpJoint => "BUMP_JOINT",
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum ConjectureKind {
    #[serde(rename = "C5_1")]
    C51,
    #[serde(rename = "SEPARATED_BUMP")]
    SeparatedBump,
    #[serde(rename = "ONE_SUP")]
    OneSup,
}

impl ConjectureKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConjectureKind::C51 => "C5_1",
            ConjectureKind::SeparatedBump => "SEPARATED_BUMP",
            ConjectureKind::OneSup => "ONE_SUP",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct HuntSpec {
    /// Hill-climbing proposals per start.
    pub steps: usize,
    /// Std-dev of the log-multiplicative leaf perturbation.
    pub step_size: f64,
    /// Ratios above this are flagged for human follow-up.
    pub threshold: f64,
    pub starts: usize,
}

impl Default for HuntSpec {
    fn default() -> Self {
        HuntSpec { steps: 120, step_size: 0.35, threshold: 8.0, starts: 3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub exponents: Exponents,
    pub depth: u32,
    pub samples: usize,
    pub seed: u64,
    /// Optimizer relative tolerance.
    pub tol: f64,
    pub restarts: usize,
    pub iter_cap: usize,
    pub family: FamilySpec,
    pub weights: EnsembleSpec,
    pub gauge: GaugeSpec,
    pub young: YoungSpec,
    pub suite: Option<SuiteKind>,
    pub conjecture: Option<ConjectureKind>,
    pub hunt: HuntSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            exponents: Exponents::default(),
            depth: 6,
            samples: 200,
            seed: 0,
            tol: 1e-8,
            restarts: 8,
            iter_cap: 10_000,
            family: FamilySpec::default(),
            weights: EnsembleSpec::default(),
            gauge: GaugeSpec::default(),
            young: YoungSpec::default(),
            suite: None,
            conjecture: None,
            hunt: HuntSpec::default(),
        }
    }
}

/// A config that passed validation, with the derived exponent system.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub cfg: ExponentConfig,
}

/// Named-constraint violation; maps to exit code 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn check_weight_spec(which: &str, spec: &WeightSpec, leaves: usize) -> Result<(), ConfigError> {
    let fail = |msg: String| Err(ConfigError(format!("weights.{which}: {msg}")));
    match spec {
        WeightSpec::Constant { c } => {
            if !(*c > 0.0) || !c.is_finite() {
                return fail(format!("constant: c > 0 and finite required, got {c}"));
            }
        }
        WeightSpec::Power { a } => {
            if !a.is_finite() || a.abs() > 12.0 {
                return fail(format!("power: |a| <= 12 required, got {a}"));
            }
        }
        WeightSpec::Lognormal { mu, sigma } => {
            if !mu.is_finite() || mu.abs() > 20.0 {
                return fail(format!("lognormal: |mu| <= 20 required, got {mu}"));
            }
            if !(*sigma >= 0.0) || *sigma > 6.0 {
                return fail(format!("lognormal: 0 <= sigma <= 6 required, got {sigma}"));
            }
        }
        WeightSpec::Spike { base, height, position } => {
            if !(*base > 0.0) || !base.is_finite() || !(*height > 0.0) || !height.is_finite() {
                return fail("spike: base > 0 and height > 0 required".into());
            }
            if *position >= leaves {
                return fail(format!(
                    "spike: position < 2^depth required, got {position} with {leaves} leaves"
                ));
            }
        }
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Validated, ConfigError> {
        let e = &self.exponents;
        let cfg = derive_config(e.p0, e.q0, e.p, e.q)
            .map_err(|err| ConfigError(format!("exponents: {err}")))?;

        if !(1..=16).contains(&self.depth) {
            return Err(ConfigError(format!("depth: 1 <= depth <= 16 required, got {}", self.depth)));
        }
        if self.samples == 0 {
            return Err(ConfigError("samples: at least one sample required".into()));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(ConfigError(format!("tol: positive finite required, got {}", self.tol)));
        }
        if self.restarts == 0 {
            return Err(ConfigError("restarts: at least one restart required".into()));
        }
        if self.iter_cap == 0 {
            return Err(ConfigError("iter_cap: at least one iteration required".into()));
        }

        let leaves = 1usize << self.depth;
        if let EnsembleSpec::Fixed { w, sigma } = &self.weights {
            check_weight_spec("w", w, leaves)?;
            check_weight_spec("sigma", sigma, leaves)?;
        }
        if let FamilySpec::Random { density } = &self.family {
            if !(*density > 0.0 && *density <= 1.0) {
                return Err(ConfigError(format!(
                    "family: 0 < density <= 1 required, got {density}"
                )));
            }
        }
        self.gauge.build().map_err(ConfigError)?;
        self.young.build_pair(&cfg).map_err(ConfigError)?;

        if !(self.hunt.steps > 0 && self.hunt.starts > 0) {
            return Err(ConfigError("hunt: steps and starts must be positive".into()));
        }
        if !(self.hunt.step_size > 0.0) || !self.hunt.step_size.is_finite() {
            return Err(ConfigError(format!(
                "hunt: 0 < step_size < inf required, got {}",
                self.hunt.step_size
            )));
        }
        if !(self.hunt.threshold > 0.0) {
            return Err(ConfigError(format!(
                "hunt: threshold > 0 required, got {}",
                self.hunt.threshold
            )));
        }

        if let Some(suite) = self.suite {
            if suite.needs_diagonal() && e.p != e.q {
                return Err(ConfigError(format!(
                    "suite: {} requires p = q, got p={} q={}",
                    suite.name(),
                    e.p,
                    e.q
                )));
            }
        }
        if self.conjecture.is_some() && e.p != e.q {
            return Err(ConfigError(format!(
                "conjecture: hunting requires p = q, got p={} q={}",
                e.p, e.q
            )));
        }

        Ok(Validated { config: self.clone(), cfg })
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("parse: {e}")))
    }
}
