//! Config file schema, validation, and `--set` overrides.
//!
//! The file is TOML with sections `[model]`, `[analysis]`, `[output]` and
//! optional `[tolerances]`.  The model is given either in reduced units
//! (fields directly under `[model]`) or as physical rates under
//! `[model.raw]` — exactly one of the two.  Overrides are dotted paths
//! applied to the parsed tree before validation, so they are total over the
//! schema: `--set analysis.n=80`, `--set model.theta=[0]`,
//! `--set analysis=winding`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nhtop::model::{reduce, LatticeParams, RawRates};
use nhtop::{Tolerances, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One complex number written either as a float or as a `[re, im]` pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
}

impl From<ComplexEntry> for C64 {
    fn from(e: ComplexEntry) -> C64 {
        match e {
            ComplexEntry::Real(x) => C64::new(x, 0.0),
            ComplexEntry::Pair([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<ComplexEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cooperativity: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_eff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<RawSection>,
}

/// Physical rates; reduced internally.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSection {
    pub j: Vec<f64>,
    pub gamma_l: Vec<f64>,
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub kappa: f64,
    pub omega_c: f64,
    pub omega_d: f64,
}

impl ModelSection {
    pub fn params(&self) -> Result<LatticeParams, CliError> {
        if let Some(raw) = &self.raw {
            let extras = [
                ("model.lambda", self.lambda.is_some()),
                ("model.cooperativity", self.cooperativity.is_some()),
                ("model.theta", self.theta.is_some()),
                ("model.delta", self.delta.is_some()),
                ("model.gamma_eff", self.gamma_eff.is_some()),
            ];
            if let Some((key, _)) = extras.iter().find(|(_, set)| *set) {
                return Err(CliError::Validation(format!(
                    "{key} conflicts with [model.raw]: give the model either \
                     in reduced units or as raw rates, not both"
                )));
            }
            let rates = RawRates {
                j: raw.j.clone(),
                gamma_l: raw.gamma_l.clone(),
                theta: raw.theta.clone(),
                gamma: raw.gamma,
                kappa: raw.kappa,
                omega_c: raw.omega_c,
                omega_d: raw.omega_d,
            };
            return Ok(reduce(&rates)?);
        }
        let lambda = self
            .lambda
            .as_ref()
            .ok_or_else(|| missing("model.lambda"))?
            .iter()
            .map(|&e| C64::from(e))
            .collect();
        let coop = self
            .cooperativity
            .clone()
            .ok_or_else(|| missing("model.cooperativity"))?;
        let theta = self.theta.clone().ok_or_else(|| missing("model.theta"))?;
        Ok(LatticeParams::new(
            lambda,
            coop,
            theta,
            self.delta.unwrap_or(0.0),
            self.gamma_eff.unwrap_or(1.0),
        )?)
    }
}

fn missing(key: &str) -> CliError {
    CliError::Validation(format!("{key} is required (or use [model.raw])"))
}

/// The analyses this tool can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisKind {
    Spectrum,
    Winding,
    Svd,
    Gssh,
    Response,
    Disorder,
    Sweep,
}

impl FromStr for AnalysisKind {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Ok(match s {
            "spectrum" => AnalysisKind::Spectrum,
            "winding" => AnalysisKind::Winding,
            "svd" => AnalysisKind::Svd,
            "gssh" => AnalysisKind::Gssh,
            "response" => AnalysisKind::Response,
            "disorder" => AnalysisKind::Disorder,
            "sweep" => AnalysisKind::Sweep,
            other => {
                return Err(CliError::Validation(format!(
                    "analysis.kind `{other}` is not one of spectrum, winding, \
                     svd, gssh, response, disorder, sweep"
                )))
            }
        })
    }
}

impl fmt::Display for AnalysisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnalysisKind::Spectrum => "spectrum",
            AnalysisKind::Winding => "winding",
            AnalysisKind::Svd => "svd",
            AnalysisKind::Gssh => "gssh",
            AnalysisKind::Response => "response",
            AnalysisKind::Disorder => "disorder",
            AnalysisKind::Sweep => "sweep",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisorderSection {
    /// Half-width of the uniform decay-rate disorder (reduced units).
    pub w: f64,
    /// Ensemble size.
    pub realizations: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `delta` (probe detuning) or `cooperativity` (last dissipative
    /// channel).
    pub parameter: String,
    /// Values to sweep over.
    pub values: Vec<f64>,
    /// For a cooperativity sweep: tie the coherent coupling of the swept
    /// channel to the same value (walks along the unidirectional line).
    #[serde(default)]
    pub tie_lambda: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub kind: OneOrMany<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_probe: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_site: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<DisorderSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// `analysis = "winding"` is shorthand for `[analysis] kind = "winding"`.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum AnalysisField {
    Shorthand(String),
    Full(AnalysisSection),
}

// Hand-rolled so that errors from inside the full section (unknown keys,
// wrong types) surface verbatim instead of serde's unnamed "did not match
// any variant of untagged enum".
impl<'de> Deserialize<'de> for AnalysisField {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        let value = toml::Value::deserialize(deserializer)?;
        match value {
            toml::Value::String(kind) => Ok(AnalysisField::Shorthand(kind)),
            other => other
                .try_into::<AnalysisSection>()
                .map(AnalysisField::Full)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl AnalysisField {
    fn section(&self) -> AnalysisSection {
        match self {
            AnalysisField::Shorthand(kind) => AnalysisSection {
                kind: OneOrMany::One(kind.clone()),
                n: None,
                n_k: None,
                omega: None,
                gamma_probe: None,
                drive_site: None,
                n_list: None,
                disorder: None,
                sweep: None,
            },
            AnalysisField::Full(section) => section.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Directory receiving every artifact (created if absent).
    pub dir: PathBuf,
    /// Subset of {csv, json, svg}; CSV and JSON by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<String>>,
    /// Base seed for any stochastic analysis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub analysis: AnalysisField,
    pub output: OutputSection,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Output formats requested by the config.
#[derive(Debug, Clone, Copy)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

/// Everything a pipeline needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: LatticeParams,
    pub kinds: Vec<AnalysisKind>,
    pub n: usize,
    pub n_k: usize,
    pub omega: f64,
    pub gamma_probe: Option<f64>,
    pub drive_sites: Vec<usize>,
    pub n_list: Vec<usize>,
    pub disorder: Option<DisorderSection>,
    pub sweep: Option<SweepSection>,
    pub out_dir: PathBuf,
    pub formats: Formats,
    pub seed: u64,
    pub tol: Tolerances,
    /// The fully patched config tree, echoed into the manifest.
    pub echo: toml::Value,
}

/// Parse config text, apply `--set` overrides, validate.
pub fn load(text: &str, overrides: &[String]) -> Result<Resolved, CliError> {
    let mut tree: toml::Value = text
        .parse()
        .map_err(|e| CliError::Validation(format!("config is not valid TOML: {e}")))?;
    for item in overrides {
        apply_override(&mut tree, item)?;
    }
    let config: RunConfig = tree
        .clone()
        .try_into()
        .map_err(|e| CliError::Validation(format!("config: {e}")))?;
    resolve(config, tree)
}

fn resolve(config: RunConfig, echo: toml::Value) -> Result<Resolved, CliError> {
    let params = config.model.params()?;
    let analysis = config.analysis.section();
    let kinds: Vec<AnalysisKind> = analysis
        .kind
        .to_vec()
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    if kinds.is_empty() {
        return Err(CliError::Validation(
            "analysis.kind must name at least one analysis".into(),
        ));
    }
    let n = analysis.n.unwrap_or(50);
    if n == 0 {
        return Err(CliError::Validation("analysis.n must be positive".into()));
    }
    let formats = match &config.output.formats {
        None => Formats {
            csv: true,
            json: true,
            svg: false,
        },
        Some(list) => {
            let mut f = Formats {
                csv: false,
                json: false,
                svg: false,
            };
            for item in list {
                match item.as_str() {
                    "csv" => f.csv = true,
                    "json" => f.json = true,
                    "svg" => f.svg = true,
                    other => {
                        return Err(CliError::Validation(format!(
                            "output.formats entry `{other}` is not one of csv, json, svg"
                        )))
                    }
                }
            }
            f
        }
    };
    let drive_sites = analysis
        .drive_site
        .as_ref()
        .map(|d| d.to_vec())
        .unwrap_or_default();
    for &site in &drive_sites {
        if site == 0 || site > n {
            return Err(CliError::Validation(format!(
                "analysis.drive_site {site} is outside the chain (sites are \
                 1..={n})"
            )));
        }
    }
    if let Some(section) = &analysis.sweep {
        match section.parameter.as_str() {
            "delta" | "cooperativity" => {}
            other => {
                return Err(CliError::Validation(format!(
                    "analysis.sweep.parameter `{other}` is not one of delta, \
                     cooperativity"
                )))
            }
        }
        if section.values.is_empty() {
            return Err(CliError::Validation(
                "analysis.sweep.values must not be empty".into(),
            ));
        }
    }
    Ok(Resolved {
        params,
        kinds,
        n,
        n_k: analysis.n_k.unwrap_or(1024),
        omega: analysis.omega.unwrap_or(0.0),
        gamma_probe: analysis.gamma_probe,
        drive_sites,
        n_list: analysis
            .n_list
            .unwrap_or_else(|| (10..=40).step_by(5).collect()),
        disorder: analysis.disorder,
        sweep: analysis.sweep,
        out_dir: config.output.dir,
        formats,
        seed: config.output.seed.unwrap_or(0),
        tol: config.tolerances,
        echo,
    })
}

/// Apply one `path.key=value` override to the parsed tree.  The value is
/// parsed as a TOML literal; if that fails it is taken as a bare string.
fn apply_override(tree: &mut toml::Value, item: &str) -> Result<(), CliError> {
    let (path, value_text) = item.split_once('=').ok_or_else(|| {
        CliError::Validation(format!(
            "override `{item}` must have the form path.key=value"
        ))
    })?;
    let value: toml::Value = match format!("x = {value_text}").parse::<toml::Value>() {
        Ok(t) => t.get("x").cloned().expect("just parsed"),
        Err(_) => toml::Value::String(value_text.to_string()),
    };
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(CliError::Validation(format!(
            "override path `{path}` has an empty segment"
        )));
    }
    let mut node = tree;
    for seg in &segments[..segments.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| {
            CliError::Validation(format!(
                "override path `{path}`: `{seg}` is not a table"
            ))
        })?;
        node = table
            .entry(seg.to_string())
            .or_insert(toml::Value::Table(Default::default()));
    }
    let last = segments[segments.len() - 1];
    let table = node.as_table_mut().ok_or_else(|| {
        CliError::Validation(format!(
            "override path `{path}` descends into a non-table value"
        ))
    })?;
    table.insert(last.to_string(), value);
    Ok(())
}
