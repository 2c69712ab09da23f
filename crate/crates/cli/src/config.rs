use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wavepacket::critical::PotentialSpec;
use wavepacket::norms::NormSpec;
use wavepacket::spectral::{Normalization, WindowVariant};
use wavepacket::verify::{EmbeddingSetup, OffDiagonalSetup, PropagatorSetup, Shaping};

/// A run description read from TOML. Every field except `output` is echoed
/// into each report and hashed into artifact names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root seed for every random draw of the run.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub grid: GridBlock,
    #[serde(default)]
    pub operator: OperatorBlock,
    #[serde(default)]
    pub window: WindowVariant,
    #[serde(default)]
    pub sigma: SigmaBlock,
    #[serde(default)]
    pub family: FamilyBlock,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub norms: Vec<NormSpec>,
    #[serde(default)]
    pub input: InputBlock,
    #[serde(default)]
    pub verify: VerifyBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_radius: Option<RadiusBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offdiag: Option<OffDiagonalSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagator: Option<PropagatorSetup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingSetup>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "one")]
    pub d: usize,
    pub n: usize,
    pub half_extent: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    #[default]
    Laplacian,
    Schrodinger,
    OrnsteinUhlenbeck,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorBlock {
    #[serde(default)]
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    /// Field file (`.csv` or binary) sampled on the run grid; replaces `potential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_file: Option<PathBuf>,
    /// Number of Hermite modes for the Ornstein-Uhlenbeck operator.
    #[serde(default = "thirty_two")]
    pub modes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBlock {
    /// Largest scale. Defaults to the largest critical radius for the
    /// critical family and to 4 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(default = "forty_eight")]
    pub points_per_decade: usize,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default = "coverage")]
    pub coverage_defect: f64,
}

impl Default for SigmaBlock {
    fn default() -> Self {
        SigmaBlock { max: None, points_per_decade: 48, normalization: Normalization::Discrete, coverage_defect: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    LittlewoodPaley,
    Modulation,
    Directional,
    #[default]
    Operator,
    Gaussian,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    #[serde(default)]
    pub kind: FamilyKind,
    /// Modulation lattice step in units of the frequency step.
    #[serde(default = "two")]
    pub lattice_multiple: usize,
    /// Direction count of the directional family; 0 picks the minimum.
    #[serde(default)]
    pub omegas: usize,
}

impl Default for FamilyBlock {
    fn default() -> Self {
        FamilyBlock { kind: FamilyKind::Operator, lattice_multiple: 2, omegas: 0 }
    }
}

/// The field fed to `decompose`, `reconstruct` and `norm`: a file, or a
/// random probe drawn from the run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
    #[serde(default = "white")]
    pub shaping: Shaping,
}

impl Default for InputBlock {
    fn default() -> Self {
        InputBlock { field: None, shaping: Shaping::White }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    #[default]
    Reconstruction,
    Isometry,
    Projection,
    FiniteSpeed,
    KernelEnvelope,
    SquareFunction,
    RemainderProbe,
    OffdiagDecay,
    Propagator,
    Embedding,
    TheoremSweep,
}

impl Suite {
    pub const ALL: [Suite; 11] = [
        Suite::Reconstruction,
        Suite::Isometry,
        Suite::Projection,
        Suite::FiniteSpeed,
        Suite::KernelEnvelope,
        Suite::SquareFunction,
        Suite::RemainderProbe,
        Suite::OffdiagDecay,
        Suite::Propagator,
        Suite::Embedding,
        Suite::TheoremSweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Reconstruction => "reconstruction",
            Suite::Isometry => "isometry",
            Suite::Projection => "projection",
            Suite::FiniteSpeed => "finite_speed",
            Suite::KernelEnvelope => "kernel_envelope",
            Suite::SquareFunction => "square_function",
            Suite::RemainderProbe => "remainder_probe",
            Suite::OffdiagDecay => "offdiag_decay",
            Suite::Propagator => "propagator",
            Suite::Embedding => "embedding",
            Suite::TheoremSweep => "theorem_sweep",
        }
    }

    pub fn parse(text: &str) -> Option<Suite> {
        let key = text.replace('-', "_");
        Suite::ALL.into_iter().find(|s| s.name() == key)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBlock {
    #[serde(default)]
    pub suite: Suite,
    #[serde(default = "twenty")]
    pub trials: usize,
    #[serde(default = "white")]
    pub shaping: Shaping,
    /// Identity-class tolerance.
    #[serde(default = "identity_tolerance")]
    pub tolerance: f64,
    #[serde(default = "twenty")]
    pub ascent_steps: usize,
    /// Exponent of the square-function suite.
    #[serde(default = "one_and_a_half")]
    pub p: f64,
    /// Largest admitted max/min spread of the square-function ratios.
    #[serde(default = "three")]
    pub spread_bound: f64,
    /// Scales for the finite-speed and kernel-envelope suites.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigmas: Vec<f64>,
}

impl Default for VerifyBlock {
    fn default() -> Self {
        VerifyBlock {
            suite: Suite::Reconstruction,
            trials: 20,
            shaping: Shaping::White,
            tolerance: 1e-8,
            ascent_steps: 20,
            p: 1.5,
            spread_bound: 3.0,
            sigmas: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    #[serde(default = "sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "exponents")]
    pub exponents: Vec<f64>,
    /// Admitted relative variation of the maximal ratio across sizes.
    #[serde(default = "stability")]
    pub stability: f64,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock { sizes: sizes(), exponents: exponents(), stability: stability() }
    }
}

/// Optional check on `rho(0) / rho(probe e_1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusBlock {
    pub probe: f64,
    pub expected_ratio: f64,
    #[serde(default = "two_f")]
    pub factor: f64,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn twenty() -> usize {
    20
}
fn thirty_two() -> usize {
    32
}
fn forty_eight() -> usize {
    48
}
fn coverage() -> f64 {
    1e-12
}
fn identity_tolerance() -> f64 {
    1e-8
}
fn one_and_a_half() -> f64 {
    1.5
}
fn two_f() -> f64 {
    2.0
}
fn three() -> f64 {
    3.0
}
fn white() -> Shaping {
    Shaping::White
}
fn sizes() -> Vec<usize> {
    vec![64, 128, 256]
}
fn exponents() -> Vec<f64> {
    vec![1.25, 1.5, 2.0]
}
fn stability() -> f64 {
    0.2
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Parses `text`, then applies `key.path=value` overrides. Values are read
/// as TOML literals and fall back to bare strings.
pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError("config is empty".into()));
    }
    let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))?;
    if overrides.is_empty() {
        return toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")));
    }
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    RunConfig::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError(format!("config error after overrides: {e}")))
}

pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn apply_override(table: &mut toml::Table, text: &str) -> Result<(), ConfigError> {
    let (path, raw) = text.split_once('=').ok_or_else(|| ConfigError(format!("override '{text}' is not key=value")))?;
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError(format!("override key '{path}' is malformed")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| ConfigError(format!("override key '{path}': '{k}' is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// The config as echoed into reports: without the output directory.
    pub fn echo(&self) -> RunConfig {
        RunConfig { output: None, ..self.clone() }
    }

    /// First 12 hex digits of the SHA-256 of the echoed config as JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.echo()).expect("config is plain data");
        hex::encode(Sha256::digest(text.as_bytes()))[..12].to_string()
    }

    #[cfg(test)]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }
}
