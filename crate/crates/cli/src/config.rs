//! Run configuration: JSON schema, loading and validation.
//!
//! Every validation failure carries a JSON pointer into the offending
//! document, e.g. `/bc/F` for boundary maps of the wrong arity.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symflow::algebra::{validate_identities, IdentityReport};
use symflow::bc::{BcError, CompatibilityReport};
use symflow::deturck::{DeturckError, SolverConfig};
use symflow::expr::{parse_expr, ExprError};
use symflow::{catalog_lookup, check_compatibility, structure_constants, BcSpec, BracketTable, HomogeneousSpaceData, InitialProfiles};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{pointer}: {message}")]
    Invalid { pointer: String, message: String },
    #[error("initial data violate the boundary conditions at t = 0: {0}")]
    IncompatibleData(CompatibilityReport),
}

impl ConfigError {
    fn at(pointer: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::Invalid { pointer: pointer.into(), message: message.to_string() }
    }

    /// The JSON pointer of an [`ConfigError::Invalid`] error.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            Self::Invalid { pointer, .. } => Some(pointer),
            _ => None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::IncompatibleData(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// A catalog name such as `sphere(3)`, or a bracket-table JSON file
    /// (relative paths resolve against the config file).
    pub space: String,
    pub solver: SolverConfig,
    pub init: InitConfig,
    pub bc: BcConfig,
    #[serde(default)]
    pub pipeline: Pipeline,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    #[serde(default = "one")]
    pub h: String,
    pub f: Vec<String>,
}

fn one() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BcConfig {
    Preset(BcPreset),
    Maps(BcMaps),
    Shen(ShenLambda),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcPreset {
    TotallyGeodesic,
}

/// `F[j][i]` as expression strings in `t, u1..un`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcMaps {
    #[serde(rename = "F")]
    pub maps: Vec<Vec<String>>,
}

/// Umbilic ends, `F[j][i] = lambda(t) u_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShenLambda {
    pub shen_lambda: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipeline {
    #[serde(default = "yes")]
    pub gauge: bool,
    #[serde(default)]
    pub perelman: bool,
}

fn yes() -> bool {
    true
}

impl Default for Pipeline {
    fn default() -> Self {
        Self { gauge: true, perelman: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Default run directory; `--out` on the command line wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, formats: all_formats() }
    }
}

impl OutputConfig {
    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }
}

/// A validated configuration with everything the pipeline needs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: RunConfig,
    pub space: HomogeneousSpaceData,
    pub bc: BcSpec,
    pub init: InitialProfiles,
    pub identities: IdentityReport,
    pub compatibility: CompatibilityReport,
}

/// Reads, parses and validates a config file.
pub fn load_config(path: &Path) -> Result<Prepared, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let config = parse_config(&src)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    prepare(config, base)
}

/// Schema-level parsing only.
pub fn parse_config(src: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(src);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = to_pointer(e.path());
        let inner = e.into_inner();
        if pointer == "/bc" && inner.to_string().contains("untagged") {
            ConfigError::at(pointer, r#"expected "totally_geodesic", {"F": [[...], [...]]} or {"shen_lambda": "..."}"#)
        } else {
            ConfigError::at(pointer, inner)
        }
    })
}

/// Serialized form accepted back by [`parse_config`].
pub fn write_config(config: &RunConfig) -> String {
    serde_json::to_string_pretty(config).expect("configs always serialize")
}

fn to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

fn resolve_space(name: &str, base: &Path) -> Result<HomogeneousSpaceData, ConfigError> {
    let table = match catalog_lookup(name) {
        Ok(table) => table,
        Err(catalog) => {
            let path = base.join(name);
            if !path.is_file() {
                return Err(ConfigError::at("/space", format!("{catalog}, and no bracket-table file at {}", path.display())));
            }
            BracketTable::from_path(&path).map_err(|e| ConfigError::at("/space", e))?
        }
    };
    let mut space = structure_constants(&table).map_err(|e| ConfigError::at("/space", e))?;
    space.label = name.trim().to_string();
    Ok(space)
}

fn parse_at(src: &str, n: usize, pointer: String) -> Result<symflow::expr::Expr, ConfigError> {
    parse_expr(src, n).map_err(|e: ExprError| ConfigError::at(pointer, e))
}

fn build_bc(bc: &BcConfig, n: usize) -> Result<BcSpec, ConfigError> {
    match bc {
        BcConfig::Preset(BcPreset::TotallyGeodesic) => Ok(BcSpec::totally_geodesic(n)),
        BcConfig::Shen(s) => {
            let lambda = parse_at(&s.shen_lambda, 0, "/bc/shen_lambda".into())?;
            BcSpec::umbilic(&lambda, n).map_err(|e| ConfigError::at("/bc/shen_lambda", e))
        }
        BcConfig::Maps(m) => {
            if m.maps.len() != 2 || m.maps.iter().any(|side| side.len() != n) {
                let shape: Vec<usize> = m.maps.iter().map(Vec::len).collect();
                return Err(ConfigError::at("/bc/F", format!("expected 2 lists of {n} expressions, found lengths {shape:?}")));
            }
            let mut exprs: [Vec<_>; 2] = Default::default();
            for (j, side) in m.maps.iter().enumerate() {
                for (i, src) in side.iter().enumerate() {
                    exprs[j].push(parse_at(src, n, format!("/bc/F/{j}/{i}"))?);
                }
            }
            BcSpec::new(exprs).map_err(|e| ConfigError::at("/bc/F", e))
        }
    }
}

fn build_init(init: &InitConfig, n: usize) -> Result<InitialProfiles, ConfigError> {
    if init.f.len() != n {
        return Err(ConfigError::at("/init/f", format!("expected {n} profiles, found {}", init.f.len())));
    }
    let h = parse_at(&init.h, 0, "/init/h".into())?;
    let f = init
        .f
        .iter()
        .enumerate()
        .map(|(i, s)| parse_at(s, 0, format!("/init/f/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    InitialProfiles::new(h, f).map_err(|e| match &e {
        BcError::ForeignVariable { context, .. } if context == "init.h" => ConfigError::at("/init/h", e),
        _ => ConfigError::at("/init/f", e),
    })
}

/// Semantic validation of a parsed config. `base` anchors relative
/// bracket-table paths.
pub fn prepare(config: RunConfig, base: &Path) -> Result<Prepared, ConfigError> {
    config.solver.validate().map_err(|e| match e {
        DeturckError::Config(m) => ConfigError::at("/solver", m),
        other => ConfigError::at("/solver", other),
    })?;
    if config.pipeline.perelman {
        if !config.pipeline.gauge {
            return Err(ConfigError::at("/pipeline/perelman", "the potential is built on the recovered flow, so it needs gauge = true"));
        }
        if config.solver.t_end / config.solver.snapshot_interval < 2.0 - 1e-9 {
            return Err(ConfigError::at("/solver/snapshot_interval", "the potential needs at least three stored times"));
        }
    }
    if config.output.formats.is_empty() {
        return Err(ConfigError::at("/output/formats", "no output format selected"));
    }

    let space = resolve_space(&config.space, base)?;
    let identities = validate_identities(&space);
    if !identities.passed() {
        return Err(ConfigError::at("/space", format!("structure constants fail their identities: {}", identities.failures.join("; "))));
    }
    let n = space.n();
    let bc = build_bc(&config.bc, n)?;
    let init = build_init(&config.init, n)?;
    init.sample(config.solver.n_cells).map_err(|e| ConfigError::at("/init", e))?;
    let compatibility = check_compatibility(&bc, &init, &space).map_err(|e| ConfigError::at("/bc", e))?;
    if !compatibility.compatible() {
        return Err(ConfigError::IncompatibleData(compatibility));
    }
    Ok(Prepared { config, space, bc, init, identities, compatibility })
}
