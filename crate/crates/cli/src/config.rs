//! Run configuration: a JSON file listing the suites to execute.

use crate::CliError;
use lacelab_core::lattice::{catalog_graph, CATALOG_NAMES};
use serde::Deserialize;
use serde_json::Value;
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteKind {
    VerifyOracle,
    VerifyLace,
    VerifyThrough,
    VerifyBounds,
    VerifySwitching,
    Greens,
    CheckConv,
}

impl SuiteKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::VerifyOracle => "verify-oracle",
            Self::VerifyLace => "verify-lace",
            Self::VerifyThrough => "verify-through",
            Self::VerifyBounds => "verify-bounds",
            Self::VerifySwitching => "verify-switching",
            Self::Greens => "greens",
            Self::CheckConv => "check-conv",
        }
    }

    /// Keys a suite entry may carry besides `name` and `label`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Self::VerifyOracle => &["graphs", "p", "tolerance", "budget"],
            Self::VerifyLace => &["graphs", "p", "orders", "mixed", "tolerance", "budget"],
            Self::VerifyThrough => &["graphs", "p", "max_a", "tolerance", "budget"],
            Self::VerifyBounds => &["graphs", "p", "orders", "max_a", "tolerance", "budget"],
            Self::VerifySwitching => &["seed", "instances", "ghs_k1", "ghs_k2", "max_edges", "budget"],
            Self::Greens => &["d", "side", "window", "tolerance"],
            Self::CheckConv => &["conv", "star", "tolerance", "seed"],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvCase {
    pub d: usize,
    pub a: f64,
    pub b: f64,
    pub boxes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StarCase {
    pub d: usize,
    pub q: f64,
    pub boxes: Vec<usize>,
}

/// One suite entry. Missing fields take the per-suite defaults of
/// [`SuiteConfig::with_defaults`].
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    #[serde(skip)]
    pub kind: Option<SuiteKind>,
    pub name: Option<String>,
    pub label: Option<String>,
    pub graphs: Option<Vec<String>>,
    pub p: Option<Vec<f64>>,
    pub orders: Option<Vec<usize>>,
    pub budget: Option<f64>,
    pub seed: Option<u64>,
    pub instances: Option<usize>,
    pub ghs_k1: Option<usize>,
    pub ghs_k2: Option<usize>,
    pub max_edges: Option<u32>,
    pub max_a: Option<usize>,
    pub mixed: Option<usize>,
    pub tolerance: Option<f64>,
    pub d: Option<usize>,
    pub side: Option<usize>,
    pub window: Option<(f64, f64)>,
    pub conv: Option<Vec<ConvCase>>,
    pub star: Option<Vec<StarCase>>,
}

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

impl SuiteConfig {
    pub fn new(kind: SuiteKind) -> Self {
        Self { kind: Some(kind), name: Some(kind.as_str().into()), ..Self::default() }
    }

    pub fn kind(&self) -> SuiteKind {
        self.kind.expect("suite kind is set during parsing")
    }

    /// Fills every unset field with the suite's default.
    pub fn with_defaults(mut self) -> Self {
        let six = || names(&["single-bond", "path-3", "triangle", "square", "square-diag", "K4"]);
        let kind = self.kind();
        match kind {
            SuiteKind::VerifyOracle => {
                self.graphs.get_or_insert_with(|| names(&CATALOG_NAMES));
                self.p.get_or_insert_with(|| vec![0.2, 0.5, 1.0]);
                self.tolerance.get_or_insert(1e-12);
            }
            SuiteKind::VerifyLace => {
                self.graphs.get_or_insert_with(six);
                self.p.get_or_insert_with(|| vec![0.2, 0.5]);
                self.orders.get_or_insert_with(|| vec![0, 1, 2]);
                self.mixed.get_or_insert(5);
                self.tolerance.get_or_insert(1e-9);
            }
            SuiteKind::VerifyThrough => {
                self.graphs.get_or_insert_with(|| names(&["triangle", "square"]));
                self.p.get_or_insert_with(|| vec![0.2, 0.5]);
                self.max_a.get_or_insert(2);
                self.tolerance.get_or_insert(1e-9);
            }
            SuiteKind::VerifyBounds => {
                self.graphs.get_or_insert_with(|| names(&["triangle", "square", "square-diag"]));
                self.p.get_or_insert_with(|| vec![0.2, 0.5]);
                self.orders.get_or_insert_with(|| vec![0, 1]);
                self.max_a.get_or_insert(2);
                self.tolerance.get_or_insert(1e-9);
            }
            SuiteKind::VerifySwitching => {
                self.seed.get_or_insert(0);
                self.instances.get_or_insert(50);
                self.ghs_k1.get_or_insert(50);
                self.ghs_k2.get_or_insert(20);
                self.max_edges.get_or_insert(10);
            }
            SuiteKind::Greens => {
                self.d.get_or_insert(5);
                self.side.get_or_insert(33);
                self.window.get_or_insert((5.0, 8.0));
                self.tolerance.get_or_insert(0.15);
            }
            SuiteKind::CheckConv => {
                self.conv.get_or_insert_with(|| {
                    vec![
                        ConvCase { d: 1, a: 2.0, b: 2.0, boxes: vec![64, 128] },
                        ConvCase { d: 2, a: 3.0, b: 2.0, boxes: vec![32, 64] },
                    ]
                });
                self.star.get_or_insert_with(|| vec![StarCase { d: 3, q: 2.0, boxes: vec![16, 32] }]);
                self.tolerance.get_or_insert(lacelab_core::greens::STABILITY_FACTOR);
            }
        }
        self
    }

    /// Checks references and ranges; expects defaults to be filled in.
    pub fn validate(&self) -> Result<(), CliError> {
        let kind = self.kind().as_str();
        for g in self.graphs.iter().flatten() {
            if catalog_graph(g).is_none() {
                return Err(CliError::Config(format!("suite {kind}: unknown graph '{g}'")));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("suite {kind}: tolerance must be positive, got {t}")));
            }
        }
        for &p in self.p.iter().flatten() {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(CliError::Config(format!("suite {kind}: p must be finite and non-negative, got {p}")));
            }
        }
        if let Some(b) = self.budget {
            if !(b >= 1.0 && b < 1.8e19) {
                return Err(CliError::Config(format!("suite {kind}: budget {b} out of range")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

fn default_dir() -> PathBuf {
    PathBuf::from("reports")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: default_dir(), format: Format::Json }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub suites: Vec<SuiteConfig>,
    pub output: OutputConfig,
    /// Worker threads; `None` lets the pool decide.
    pub parallelism: Option<usize>,
    /// Adds wall-clock times to reports (which then differ between runs).
    pub record_timing: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    suites: Vec<Value>,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    parallelism: Option<usize>,
    #[serde(default)]
    record_timing: bool,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        if raw.parallelism == Some(0) {
            return Err(CliError::Config("parallelism must be at least 1".into()));
        }
        let mut suites = Vec::with_capacity(raw.suites.len());
        for (i, v) in raw.suites.into_iter().enumerate() {
            let obj = v.as_object().ok_or_else(|| CliError::Config(format!("suite #{i} is not an object")))?;
            let name = obj.get("name").and_then(Value::as_str).map(str::to_owned).ok_or_else(|| CliError::Config(format!("suite #{i} has no name")))?;
            let kind: SuiteKind = serde_json::from_value(Value::String(name.clone()))
                .map_err(|_| CliError::Config(format!("suite #{i}: unknown suite '{name}'")))?;
            if let Some(k) = obj.keys().find(|k| !["name", "label"].contains(&k.as_str()) && !kind.keys().contains(&k.as_str())) {
                return Err(CliError::Config(format!("suite #{i} ({name}): field '{k}' does not apply")));
            }
            let mut s: SuiteConfig = serde_json::from_value(v).map_err(|e| CliError::Config(format!("suite #{i} ({name}): {e}")))?;
            s.kind = Some(kind);
            let s = s.with_defaults();
            s.validate()?;
            suites.push(s);
        }
        let mut labels: Vec<String> = suites.iter().enumerate().map(|(i, s)| label_of(i, s)).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("suite labels must be unique".into()));
        }
        Ok(Self { suites, output: raw.output, parallelism: raw.parallelism, record_timing: raw.record_timing })
    }
}

/// Report file stem: the explicit label, or `NN-name`.
pub fn label_of(index: usize, suite: &SuiteConfig) -> String {
    suite.label.clone().unwrap_or_else(|| format!("{index:02}-{}", suite.kind().as_str()))
}
